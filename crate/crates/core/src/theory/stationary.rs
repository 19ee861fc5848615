//! Stationary laws of finite Markov chains given as sparse rows.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};

/// Row-stochastic matrix stored as `(column, probability)` lists.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseChain {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseChain {
    pub fn new(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            let total: f64 = row.iter().map(|&(_, p)| p).sum();
            if (total - 1.0).abs() > 1e-9 || row.iter().any(|&(j, p)| j >= n || p < 0.0) {
                return Err(Error::Chain(format!(
                    "row {i} is not a probability vector over {n} states"
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `x ↦ xP`.
    pub fn left_multiply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, row) in self.rows.iter().enumerate() {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for &(j, p) in row {
                out[j] += xi * p;
            }
        }
    }

    /// Closed communicating classes (recurrent classes), each sorted.
    pub fn closed_classes(&self) -> Vec<Vec<usize>> {
        let mut g = DiGraph::<(), ()>::with_capacity(self.len(), 0);
        let nodes: Vec<_> = (0..self.len()).map(|_| g.add_node(())).collect();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                if p > 0.0 {
                    g.add_edge(nodes[i], nodes[j], ());
                }
            }
        }
        let mut component = vec![0usize; self.len()];
        let sccs = tarjan_scc(&g);
        for (c, scc) in sccs.iter().enumerate() {
            for n in scc {
                component[n.index()] = c;
            }
        }
        let mut closed: Vec<Vec<usize>> = sccs
            .iter()
            .enumerate()
            .filter(|(c, scc)| {
                scc.iter().all(|n| {
                    self.rows[n.index()]
                        .iter()
                        .all(|&(j, p)| p == 0.0 || component[j] == *c)
                })
            })
            .map(|(_, scc)| {
                let mut v: Vec<usize> = scc.iter().map(|n| n.index()).collect();
                v.sort_unstable();
                v
            })
            .collect();
        closed.sort();
        closed
    }
}

/// Unique stationary distribution, by power iteration on the lazy chain
/// `(P + I)/2` (same fixed point, aperiodic). Transient states get zero
/// mass. Fails if there is more than one closed class.
pub fn stationary(chain: &SparseChain, tol: f64) -> Result<Vec<f64>> {
    let n = chain.len();
    if n == 0 {
        return Err(Error::Chain("empty chain".into()));
    }
    let closed = chain.closed_classes();
    if closed.len() != 1 {
        let sizes: Vec<usize> = closed.iter().map(Vec::len).collect();
        return Err(Error::Chain(format!(
            "reducible chain with {} closed classes of sizes {sizes:?}",
            closed.len()
        )));
    }
    let class = &closed[0];
    let mut mu = vec![0.0; n];
    for &i in class {
        mu[i] = 1.0 / class.len() as f64;
    }
    let mut next = vec![0.0; n];
    let max_iter =
        10_000_000 / (1 + chain.rows.iter().map(Vec::len).sum::<usize>() / n.max(1)).max(1);
    for _ in 0..max_iter.max(100_000) {
        chain.left_multiply(&mu, &mut next);
        // residual of the original chain, then the lazy step
        let residual: f64 = next.iter().zip(&mu).map(|(a, b)| (a - b).abs()).sum();
        for (m, x) in mu.iter_mut().zip(&next) {
            *m = 0.5 * (*m + x);
        }
        let total: f64 = mu.iter().sum();
        mu.iter_mut().for_each(|m| *m /= total);
        if residual <= tol {
            return Ok(mu);
        }
    }
    Err(Error::Chain(format!(
        "power iteration did not reach residual {tol}"
    )))
}
