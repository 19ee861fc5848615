//! Discrete demand distributions on `0..=d_max`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum DemandKind {
    /// Poisson(mean) draws clamped to `d_max`; the tail mass sits at `d_max`.
    PoissonClamped { mean: f64 },
    /// Arbitrary probability vector, sampled by inverse CDF.
    Table,
}

#[derive(Debug, Clone)]
pub struct DemandModel {
    kind: DemandKind,
    d_max: u32,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
    poisson: Option<Poisson<f64>>,
}

impl DemandModel {
    pub fn poisson_clamped(mean: f64, d_max: u32) -> Result<Self> {
        if !(mean.is_finite() && mean >= 0.0) {
            return Err(Error::Config(format!(
                "demand mean must be >= 0, got {mean}"
            )));
        }
        let n = d_max as usize + 1;
        let mut pmf = vec![0.0; n];
        if mean == 0.0 {
            pmf[0] = 1.0;
        } else {
            // P(k) via the recurrence P(k) = P(k-1)·mean/k, started in log space.
            let mut term = (-mean).exp();
            let mut head = 0.0;
            for (k, slot) in pmf.iter_mut().enumerate().take(n - 1) {
                if k > 0 {
                    term *= mean / k as f64;
                }
                *slot = term;
                head += term;
            }
            pmf[n - 1] = (1.0 - head).max(0.0);
        }
        let poisson = if mean > 0.0 {
            Some(Poisson::new(mean).map_err(|e| Error::Config(format!("poisson({mean}): {e}")))?)
        } else {
            None
        };
        let cdf = cumulative(&pmf);
        Ok(Self {
            kind: DemandKind::PoissonClamped { mean },
            d_max,
            pmf,
            cdf,
            poisson,
        })
    }

    /// Demand with an explicit probability table indexed by quantity.
    pub fn from_pmf(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::Config("demand pmf is empty".into()));
        }
        if pmf.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
            return Err(Error::Config(
                "demand pmf has a negative or non-finite entry".into(),
            ));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "demand pmf sums to {total}, expected 1"
            )));
        }
        let cdf = cumulative(&pmf);
        Ok(Self {
            kind: DemandKind::Table,
            d_max: (pmf.len() - 1) as u32,
            pmf,
            cdf,
            poisson: None,
        })
    }

    /// Point mass at `d`.
    pub fn deterministic(d: u32) -> Self {
        let mut pmf = vec![0.0; d as usize + 1];
        pmf[d as usize] = 1.0;
        Self::from_pmf(pmf).expect("point mass is a valid pmf")
    }

    pub fn kind(&self) -> &DemandKind {
        &self.kind
    }

    pub fn d_max(&self) -> u32 {
        self.d_max
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(d, p)| d as f64 * p).sum()
    }

    /// Nonzero support as `(demand, probability)` pairs.
    pub fn support(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.pmf
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(d, &p)| (d as u32, p))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match (&self.kind, &self.poisson) {
            (DemandKind::PoissonClamped { .. }, Some(poisson)) => {
                let draw = poisson.sample(rng);
                if draw >= self.d_max as f64 {
                    self.d_max
                } else {
                    draw as u32
                }
            }
            (DemandKind::PoissonClamped { .. }, None) => 0,
            (DemandKind::Table, _) => {
                let u: f64 = rng.random();
                let idx = self.cdf.partition_point(|&c| c <= u);
                idx.min(self.pmf.len() - 1) as u32
            }
        }
    }
}

fn cumulative(pmf: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    pmf.iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}
