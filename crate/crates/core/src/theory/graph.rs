//! Connectivity numbers of the feedback graph over state-action pairs:
//! mas-number ω (largest induced acyclic subgraph), independence number α
//! and domination number ζ.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ItemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GraphNumbers {
    pub omega: u64,
    pub alpha: u64,
    pub zeta: u64,
}

impl GraphNumbers {
    /// `ζ ≤ α ≤ ω ≤ |V|`.
    pub fn chain_holds(&self, nodes: u64) -> bool {
        self.zeta <= self.alpha && self.alpha <= self.omega && self.omega <= nodes
    }
}

/// Closed forms with base `a_max` exactly as commonly stated:
/// uncensored → (1, 1, 1); censored at `y_t` →
/// `α = ζ = (y_max − y_t)·a_max^L + 1{y_t ≠ 0}` and
/// `ω = (y_max − y_t)·a_max^L + y_t`.
pub fn graph_numbers(y_t: u32, censored: bool, params: &ItemParams) -> Result<GraphNumbers> {
    check_level(y_t, params)?;
    closed_form(
        y_t as u64,
        censored,
        params.y_max as u64,
        params,
        params.a_max as u64,
    )
}

/// The same closed forms counted over the full pair space.
///
/// The printed forms count inventory levels `1..=y_max` and `a_max` values
/// per pipeline slot. The pair space has levels `0..=y_max` and `a_max + 1`
/// actions; substituting `y_max + 1`, `y_t + 1` and `a_max + 1` gives
/// `α = ζ = (y_max − y_t)·(a_max+1)^L + 1` and
/// `ω = (y_max − y_t)·(a_max+1)^L + y_t + 1`, which is what exhaustive
/// search finds on [`feedback_graph`].
pub fn graph_numbers_full_space(
    y_t: u32,
    censored: bool,
    params: &ItemParams,
) -> Result<GraphNumbers> {
    check_level(y_t, params)?;
    closed_form(
        y_t as u64 + 1,
        censored,
        params.y_max as u64 + 1,
        params,
        params.a_max as u64 + 1,
    )
}

fn check_level(y_t: u32, params: &ItemParams) -> Result<()> {
    if y_t > params.y_max {
        return Err(Error::Config(format!(
            "y_t = {y_t} exceeds y_max = {}",
            params.y_max
        )));
    }
    Ok(())
}

fn closed_form(
    y_t: u64,
    censored: bool,
    y_max: u64,
    params: &ItemParams,
    base: u64,
) -> Result<GraphNumbers> {
    if !censored {
        return Ok(GraphNumbers {
            omega: 1,
            alpha: 1,
            zeta: 1,
        });
    }
    let overflow = || Error::Size("graph numbers overflow u64".into());
    let block = base
        .checked_pow(params.lead_time as u32)
        .ok_or_else(overflow)?;
    let free = (y_max - y_t).checked_mul(block).ok_or_else(overflow)?;
    Ok(GraphNumbers {
        omega: free + y_t,
        alpha: free + u64::from(y_t != 0),
        zeta: free + u64::from(y_t != 0),
    })
}

/// Directed graph as adjacency bit masks (`adj[u] >> v & 1` ⇔ `u → v`),
/// at most 64 nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmallDigraph {
    pub adj: Vec<u64>,
}

impl SmallDigraph {
    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u] >> v & 1 == 1
    }

    fn is_independent(&self, set: u64) -> bool {
        (0..self.len())
            .filter(|&u| set >> u & 1 == 1)
            .all(|u| self.adj[u] & set & !(1 << u) == 0)
    }

    fn dominates(&self, set: u64) -> bool {
        let full = if self.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.len()) - 1
        };
        let covered = (0..self.len())
            .filter(|&u| set >> u & 1 == 1)
            .fold(set, |acc, u| acc | self.adj[u]);
        covered & full == full
    }

    /// Acyclic after dropping self-loops (Kahn's algorithm on the induced subgraph).
    fn is_acyclic(&self, set: u64) -> bool {
        let members: Vec<usize> = (0..self.len()).filter(|&u| set >> u & 1 == 1).collect();
        let mut indeg: Vec<usize> = members
            .iter()
            .map(|&v| {
                members
                    .iter()
                    .filter(|&&u| u != v && self.has_edge(u, v))
                    .count()
            })
            .collect();
        let mut done = vec![false; members.len()];
        let mut removed = 0;
        loop {
            let Some(i) = (0..members.len()).find(|&i| !done[i] && indeg[i] == 0) else {
                break;
            };
            done[i] = true;
            removed += 1;
            for (j, &v) in members.iter().enumerate() {
                if !done[j] && v != members[i] && self.has_edge(members[i], v) {
                    indeg[j] -= 1;
                }
            }
        }
        removed == members.len()
    }

    /// Exhaustive ω, α and ζ over all `2^n` subsets.
    pub fn brute_force_numbers(&self) -> Result<GraphNumbers> {
        let n = self.len();
        if n > 20 {
            return Err(Error::Size(format!(
                "exhaustive search over {n} nodes is infeasible"
            )));
        }
        let (mut omega, mut alpha, mut zeta) = (0u32, 0u32, n as u32);
        for set in 0u64..(1u64 << n) {
            let size = set.count_ones();
            if size > alpha && self.is_independent(set) {
                alpha = size;
            }
            if size > omega && self.is_acyclic(set) {
                omega = size;
            }
            if size < zeta && self.dominates(set) {
                zeta = size;
            }
        }
        Ok(GraphNumbers {
            omega: omega as u64,
            alpha: alpha as u64,
            zeta: zeta as u64,
        })
    }
}

/// Graph over all state-action pairs of `params` after an observation at
/// on-hand level `y_t`. Uncensored: complete graph. Censored: a pair at
/// level `y ≤ y_t` reveals every pair at a level `≤ y` (a censored sale at
/// `y` pins down the outcome of any smaller stock), while pairs above `y_t`
/// reveal only themselves.
pub fn feedback_graph(y_t: u32, censored: bool, params: &ItemParams) -> Result<SmallDigraph> {
    let per_level = (params.num_actions() as u64)
        .checked_pow(params.lead_time as u32)
        .ok_or_else(|| Error::Size("graph too large".into()))?;
    let n = (params.y_max as u64 + 1) * per_level;
    if n > 64 {
        return Err(Error::Size(format!(
            "{n} nodes exceed the 64-node explicit graph limit"
        )));
    }
    let n = n as usize;
    let level = |u: usize| (u as u64 / per_level) as u32;
    let adj = (0..n)
        .map(|u| {
            (0..n).fold(0u64, |acc, v| {
                let edge = u == v || !censored || (level(u) <= y_t && level(v) <= level(u));
                if edge {
                    acc | 1 << v
                } else {
                    acc
                }
            })
        })
        .collect();
    Ok(SmallDigraph { adj })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ItemParams {
        ItemParams {
            y_max: 5,
            a_max: 1,
            lead_time: 1,
            d_max: 2,
            ..ItemParams::default()
        }
    }

    #[test]
    fn closed_form_examples() {
        let p = ItemParams::default();
        assert_eq!(
            graph_numbers(7, false, &p).unwrap(),
            GraphNumbers {
                omega: 1,
                alpha: 1,
                zeta: 1
            }
        );
        let g = graph_numbers(0, true, &p).unwrap();
        assert_eq!(
            (g.alpha, g.zeta, g.omega),
            (16_000_000, 16_000_000, 16_000_000)
        );
        let g = graph_numbers(3, true, &tiny()).unwrap();
        assert_eq!((g.alpha, g.zeta, g.omega), (3, 3, 5));
    }

    #[test]
    fn brute_force_on_hand_built_graphs() {
        // directed 3-cycle: α = 1, ζ = 2 (each node dominates its successor), ω = 2
        let cycle = SmallDigraph {
            adj: vec![0b010, 0b100, 0b001],
        };
        assert_eq!(
            cycle.brute_force_numbers().unwrap(),
            GraphNumbers {
                omega: 2,
                alpha: 1,
                zeta: 2
            }
        );
        // edgeless graph on 4 nodes: everything equals 4
        let empty = SmallDigraph { adj: vec![0; 4] };
        assert_eq!(
            empty.brute_force_numbers().unwrap(),
            GraphNumbers {
                omega: 4,
                alpha: 4,
                zeta: 4
            }
        );
        // star 0 → {1,2,3}: α = 3, ζ = 1, ω = 4
        let star = SmallDigraph {
            adj: vec![0b1110, 0, 0, 0],
        };
        assert_eq!(
            star.brute_force_numbers().unwrap(),
            GraphNumbers {
                omega: 4,
                alpha: 3,
                zeta: 1
            }
        );
    }

    #[test]
    fn explicit_graphs_on_tiny_instance() {
        let p = tiny();
        let complete = feedback_graph(2, false, &p)
            .unwrap()
            .brute_force_numbers()
            .unwrap();
        assert_eq!(
            complete,
            GraphNumbers {
                omega: 1,
                alpha: 1,
                zeta: 1
            }
        );
        for y_t in 0..=5 {
            let g = feedback_graph(y_t, true, &p)
                .unwrap()
                .brute_force_numbers()
                .unwrap();
            // levels above y_t: 2 isolated pairs each; levels 0..=y_t: one
            // acyclic pick per level, but one pair dominates all of them
            let free = (5 - y_t as u64) * 2;
            assert_eq!(
                g,
                GraphNumbers {
                    omega: free + y_t as u64 + 1,
                    alpha: free + 1,
                    zeta: free + 1
                }
            );
            assert!(g.chain_holds(12));
            assert_eq!(g, graph_numbers_full_space(y_t, true, &p).unwrap());
        }
    }
}
