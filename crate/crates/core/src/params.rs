//! Environment constants for a single stocking point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cost, bound and demand parameters of one item (or one echelon node).
///
/// Defaults reproduce the reference single-item setting: `L=4, p=4,
/// y_max=100, a_max=20, c=0, h=1, d_mean=5, d_max=20`, discount 0.995.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ItemParams {
    /// Unit procurement cost.
    pub c: f64,
    /// Unit holding cost per period.
    pub h: f64,
    /// Unit lost-sales penalty.
    pub p: f64,
    /// Lead time in periods; the state carries `L - 1` outstanding orders.
    #[serde(rename = "L")]
    pub lead_time: usize,
    pub a_max: u32,
    /// Cap on post-receipt inventory.
    pub y_max: u32,
    pub d_max: u32,
    pub d_mean: f64,
    pub gamma: f64,
}

impl Default for ItemParams {
    fn default() -> Self {
        Self {
            c: 0.0,
            h: 1.0,
            p: 4.0,
            lead_time: 4,
            a_max: 20,
            y_max: 100,
            d_max: 20,
            d_mean: 5.0,
            gamma: 0.995,
        }
    }
}

impl ItemParams {
    /// Default parameters with the given penalty and lead time.
    pub fn with_penalty_and_lead(p: f64, lead_time: usize) -> Self {
        Self {
            p,
            lead_time,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for (name, v) in [("c", self.c), ("h", self.h), ("p", self.p)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if self.lead_time < 1 {
            return bad("L must be >= 1".into());
        }
        if self.a_max == 0 {
            return bad("a_max must be > 0".into());
        }
        if self.d_max == 0 {
            return bad("d_max must be > 0".into());
        }
        if self.d_max > self.y_max {
            return bad(format!(
                "d_max ({}) must not exceed y_max ({})",
                self.d_max, self.y_max
            ));
        }
        if self.d_max == self.y_max {
            log::warn!(
                "d_max == y_max ({}); the update-probability analysis assumes d_max < y_max",
                self.y_max
            );
        }
        if !(self.d_mean.is_finite() && self.d_mean >= 0.0) {
            return bad(format!(
                "d_mean must be finite and >= 0, got {}",
                self.d_mean
            ));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        Ok(())
    }

    /// Number of outstanding orders carried in the state.
    pub fn pipeline_len(&self) -> usize {
        self.lead_time - 1
    }

    pub fn num_actions(&self) -> usize {
        self.a_max as usize + 1
    }

    /// Cost incurred in one period: `c·a + h·[y-d]^+ + p·[d-y]^+`.
    pub fn period_cost(&self, y: u32, a: u32, d: u32) -> f64 {
        let held = y.saturating_sub(d) as f64;
        let lost = d.saturating_sub(y) as f64;
        self.c * a as f64 + self.h * held + self.p * lost
    }

    /// Largest possible one-period cost; rewards lie in `[-max_period_cost, 0]`.
    pub fn max_period_cost(&self) -> f64 {
        self.c * self.a_max as f64 + self.h * self.y_max as f64 + self.p * self.d_max as f64
    }

    /// Upper bound for the base-stock level, `y_max + (L-1)·a_max`.
    pub fn max_inventory_position(&self) -> u32 {
        self.y_max + self.pipeline_len() as u32 * self.a_max
    }
}

/// Per-item parameter sets used for the multi-item experiments.
pub fn multi_item_preset(items: usize) -> Option<Vec<ItemParams>> {
    let (penalties, leads): (&[f64], &[usize]) = match items {
        2 => (&[4.0, 9.0], &[4, 3]),
        3 => (&[4.0, 9.0, 19.0], &[4, 3, 2]),
        5 => (&[4.0, 9.0, 4.0, 9.0, 19.0], &[4, 4, 3, 3, 2]),
        _ => return None,
    };
    Some(
        penalties
            .iter()
            .zip(leads)
            .map(|(&p, &l)| ItemParams::with_penalty_and_lead(p, l))
            .collect(),
    )
}

/// Warehouse and retailer parameters for the multi-echelon experiments.
pub fn multi_echelon_preset(retailers: usize) -> Option<(ItemParams, Vec<ItemParams>)> {
    let (penalties, leads): (&[f64], &[usize]) = match retailers {
        1 => (&[4.0], &[4]),
        2 => (&[4.0, 9.0], &[4, 4]),
        4 => (&[4.0, 9.0, 4.0, 9.0], &[4, 4, 3, 3]),
        _ => return None,
    };
    let warehouse = ItemParams::with_penalty_and_lead(4.0, 4);
    let retailers = penalties
        .iter()
        .zip(leads)
        .map(|(&p, &l)| ItemParams::with_penalty_and_lead(p, l))
        .collect();
    Some((warehouse, retailers))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_setting() {
        let p = ItemParams::default();
        assert_eq!(p.lead_time, 4);
        assert_eq!(p.p, 4.0);
        assert_eq!(p.y_max, 100);
        assert_eq!(p.a_max, 20);
        assert_eq!(p.c, 0.0);
        assert_eq!(p.h, 1.0);
        assert_eq!(p.d_mean, 5.0);
        assert_eq!(p.d_max, 20);
        p.validate().unwrap();
    }

    #[test]
    fn rejects_bad_fields() {
        let mut p = ItemParams::default();
        p.lead_time = 0;
        assert!(p.validate().is_err());
        let mut p = ItemParams::default();
        p.d_max = 101;
        assert!(p.validate().is_err());
        let mut p = ItemParams::default();
        p.gamma = 0.0;
        assert!(p.validate().is_err());
        let mut p = ItemParams::default();
        p.h = -1.0;
        assert!(p.validate().is_err());
        let mut p = ItemParams::default();
        p.d_max = p.y_max;
        assert!(p.validate().is_ok());
    }

    #[test]
    fn presets() {
        let three = multi_item_preset(3).unwrap();
        let p: Vec<f64> = three.iter().map(|i| i.p).collect();
        let l: Vec<usize> = three.iter().map(|i| i.lead_time).collect();
        assert_eq!(p, vec![4.0, 9.0, 19.0]);
        assert_eq!(l, vec![4, 3, 2]);
        let five = multi_item_preset(5).unwrap();
        let p: Vec<f64> = five.iter().map(|i| i.p).collect();
        let l: Vec<usize> = five.iter().map(|i| i.lead_time).collect();
        assert_eq!(p, vec![4.0, 9.0, 4.0, 9.0, 19.0]);
        assert_eq!(l, vec![4, 4, 3, 3, 2]);
        let (w, r) = multi_echelon_preset(2).unwrap();
        assert_eq!((w.p, w.lead_time), (4.0, 4));
        assert_eq!(r.iter().map(|i| i.p).collect::<Vec<_>>(), vec![4.0, 9.0]);
        assert_eq!(
            r.iter().map(|i| i.lead_time).collect::<Vec<_>>(),
            vec![4, 4]
        );
        assert!(multi_item_preset(4).is_none());
    }
}
