use rand_chacha::ChaCha8Rng;

use super::config::MultiEchelonConfig;
use super::seeded_rng;
use super::single::{transition, Experience, SingleItemState};
use crate::demand::DemandModel;
use crate::error::{Error, Result};

/// Integer split of `supply` across `requests` in proportion to the
/// requests (Hamilton / largest-remainder rounding, ties to the lower index).
/// Requests are met in full when supply covers their total.
pub fn allocate_largest_remainder(supply: u32, requests: &[u32]) -> Vec<u32> {
    let total: u64 = requests.iter().map(|&r| r as u64).sum();
    if supply as u64 >= total {
        return requests.to_vec();
    }
    let supply = supply as u64;
    let mut alloc: Vec<u64> = requests
        .iter()
        .map(|&r| supply * r as u64 / total)
        .collect();
    let mut left = supply - alloc.iter().sum::<u64>();
    // remainders compared exactly as `supply·r mod total`
    let mut order: Vec<usize> = (0..requests.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(supply * requests[i] as u64 % total));
    for i in order {
        if left == 0 {
            break;
        }
        alloc[i] += 1;
        left -= 1;
    }
    alloc.into_iter().map(|a| a as u32).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EchelonState {
    pub warehouse: SingleItemState,
    pub retailers: Vec<SingleItemState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EchelonOutcome {
    /// Warehouse transition; its demand is the total retailer order.
    pub warehouse: Experience,
    /// Retailer transitions; each `action` is the quantity actually shipped.
    pub retailers: Vec<Experience>,
    pub requested: Vec<u32>,
    pub allocated: Vec<u32>,
    pub reward: f64,
}

/// One warehouse supplying several retailers, lost sales at every node.
///
/// Each period the retailers' orders form the warehouse's demand. The
/// warehouse ships what it has on hand, split by
/// [`allocate_largest_remainder`]; unshipped units are lost and charged the
/// warehouse penalty. Shipments enter the retailer pipelines, and the
/// retailers then face their own customer demand.
#[derive(Debug, Clone)]
pub struct MultiEchelonEnv {
    config: MultiEchelonConfig,
    demands: Vec<DemandModel>,
    rngs: Vec<ChaCha8Rng>,
    state: EchelonState,
}

impl MultiEchelonEnv {
    pub fn new(config: MultiEchelonConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let demands = config
            .retailers
            .iter()
            .map(|r| DemandModel::poisson_clamped(r.d_mean, r.d_max))
            .collect::<Result<Vec<_>>>()?;
        let mut env = Self {
            rngs: Vec::new(),
            demands,
            state: EchelonState {
                warehouse: SingleItemState::empty(&config.warehouse),
                retailers: config
                    .retailers
                    .iter()
                    .map(SingleItemState::empty)
                    .collect(),
            },
            config,
        };
        env.reset(seed);
        Ok(env)
    }

    pub fn reset(&mut self, seed: u64) -> &EchelonState {
        self.rngs = (0..self.config.retailers.len())
            .map(|i| seeded_rng(seed, i as u64))
            .collect();
        self.state = EchelonState {
            warehouse: SingleItemState::empty(&self.config.warehouse),
            retailers: self
                .config
                .retailers
                .iter()
                .map(SingleItemState::empty)
                .collect(),
        };
        &self.state
    }

    pub fn config(&self) -> &MultiEchelonConfig {
        &self.config
    }

    pub fn state(&self) -> &EchelonState {
        &self.state
    }

    pub fn set_state(&mut self, state: EchelonState) -> Result<()> {
        let ok = state.warehouse.is_valid(&self.config.warehouse)
            && state.retailers.len() == self.config.retailers.len()
            && state
                .retailers
                .iter()
                .zip(&self.config.retailers)
                .all(|(s, p)| s.is_valid(p));
        if !ok {
            return Err(Error::Config("echelon state out of bounds".into()));
        }
        self.state = state;
        Ok(())
    }

    pub fn step(
        &mut self,
        warehouse_order: u32,
        retailer_orders: &[u32],
    ) -> Result<EchelonOutcome> {
        self.check_actions(warehouse_order, retailer_orders)?;
        let demands: Vec<u32> = self
            .demands
            .iter()
            .zip(self.rngs.iter_mut())
            .map(|(m, rng)| m.sample(rng))
            .collect();
        Ok(self.apply(warehouse_order, retailer_orders, &demands))
    }

    pub fn step_with_demands(
        &mut self,
        warehouse_order: u32,
        retailer_orders: &[u32],
        customer_demands: &[u32],
    ) -> Result<EchelonOutcome> {
        self.check_actions(warehouse_order, retailer_orders)?;
        if customer_demands.len() != self.config.retailers.len() {
            return Err(Error::Action(
                "one customer demand per retailer required".into(),
            ));
        }
        Ok(self.apply(warehouse_order, retailer_orders, customer_demands))
    }

    fn check_actions(&self, warehouse_order: u32, retailer_orders: &[u32]) -> Result<()> {
        if warehouse_order > self.config.warehouse.a_max {
            return Err(Error::Action(format!(
                "warehouse order {warehouse_order} exceeds a_max {}",
                self.config.warehouse.a_max
            )));
        }
        if retailer_orders.len() != self.config.retailers.len() {
            return Err(Error::Action(format!(
                "expected {} retailer orders, got {}",
                self.config.retailers.len(),
                retailer_orders.len()
            )));
        }
        for (i, (&a, p)) in retailer_orders
            .iter()
            .zip(&self.config.retailers)
            .enumerate()
        {
            if a > p.a_max {
                return Err(Error::Action(format!(
                    "retailer {i}: order {a} exceeds a_max {}",
                    p.a_max
                )));
            }
        }
        Ok(())
    }

    fn apply(
        &mut self,
        warehouse_order: u32,
        requested: &[u32],
        customer: &[u32],
    ) -> EchelonOutcome {
        let wh = &self.config.warehouse;
        let wh_demand: u32 = requested.iter().sum();
        let shipped = wh_demand.min(self.state.warehouse.y);
        let allocated = allocate_largest_remainder(shipped, requested);

        let wt = transition(wh, &self.state.warehouse, warehouse_order, wh_demand);
        let warehouse = Experience {
            state: self.state.warehouse.clone(),
            action: warehouse_order,
            reward: wt.reward,
            next: wt.next,
            demand_obs: wt.demand_obs,
            censored: wt.censored,
        };

        let retailers: Vec<Experience> = self
            .config
            .retailers
            .iter()
            .zip(&self.state.retailers)
            .zip(allocated.iter().zip(customer))
            .map(|((p, s), (&ship, &d))| {
                let t = transition(p, s, ship, d);
                Experience {
                    state: s.clone(),
                    action: ship,
                    reward: t.reward,
                    next: t.next,
                    demand_obs: t.demand_obs,
                    censored: t.censored,
                }
            })
            .collect();

        self.state = EchelonState {
            warehouse: warehouse.next.clone(),
            retailers: retailers.iter().map(|e| e.next.clone()).collect(),
        };
        let reward = warehouse.reward + retailers.iter().map(|e| e.reward).sum::<f64>();
        EchelonOutcome {
            warehouse,
            retailers,
            requested: requested.to_vec(),
            allocated,
            reward,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::SingleItemEnv;
    use crate::params::{multi_echelon_preset, ItemParams};
    use proptest::prelude::*;

    /// Every integer split of `supply` with `0 <= x_i <= r_i`.
    fn all_splits(supply: u32, requests: &[u32]) -> Vec<Vec<u32>> {
        fn rec(i: usize, left: u32, req: &[u32], cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if i == req.len() {
                if left == 0 {
                    out.push(cur.clone());
                }
                return;
            }
            for x in 0..=req[i].min(left) {
                cur.push(x);
                rec(i + 1, left - x, req, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(0, supply, requests, &mut Vec::new(), &mut out);
        out
    }

    /// Largest-remainder criterion checked with exact rationals.
    fn satisfies_criterion(x: &[u32], supply: u32, requests: &[u32]) -> bool {
        let total: u64 = requests.iter().map(|&r| r as u64).sum();
        let quota_floor = |i: usize| supply as u64 * requests[i] as u64 / total;
        let rem = |i: usize| supply as u64 * requests[i] as u64 % total;
        for i in 0..x.len() {
            let f = quota_floor(i);
            if x[i] as u64 != f && x[i] as u64 != f + 1 {
                return false;
            }
        }
        for i in 0..x.len() {
            for j in 0..x.len() {
                let up_i = x[i] as u64 == quota_floor(i) + 1;
                let down_j = x[j] as u64 == quota_floor(j);
                if up_i && down_j && i != j && !(rem(i) > rem(j) || (rem(i) == rem(j) && i < j)) {
                    return false;
                }
            }
        }
        true
    }

    fn brute_allocate(supply: u32, requests: &[u32]) -> Vec<u32> {
        let total: u32 = requests.iter().sum();
        if supply >= total {
            return requests.to_vec();
        }
        let winners: Vec<Vec<u32>> = all_splits(supply, requests)
            .into_iter()
            .filter(|x| satisfies_criterion(x, supply, requests))
            .collect();
        assert_eq!(winners.len(), 1, "criterion must pick a unique split");
        winners.into_iter().next().unwrap()
    }

    #[test]
    fn shortage_example() {
        assert_eq!(allocate_largest_remainder(5, &[4, 4]), vec![3, 2]);
        assert_eq!(brute_allocate(5, &[4, 4]), vec![3, 2]);
        assert_eq!(allocate_largest_remainder(0, &[4, 4]), vec![0, 0]);
        assert_eq!(allocate_largest_remainder(9, &[4, 4]), vec![4, 4]);
    }

    proptest! {
        #[test]
        fn allocation_matches_brute_force(supply in 0u32..15, requests in proptest::collection::vec(0u32..8, 1..4)) {
            let got = allocate_largest_remainder(supply, &requests);
            prop_assert_eq!(got.clone(), brute_allocate(supply, &requests));
            prop_assert_eq!(got.iter().sum::<u32>(), supply.min(requests.iter().sum()));
        }
    }

    #[test]
    fn warehouse_shortage_step() {
        let (w, r) = multi_echelon_preset(2).unwrap();
        let cfg = MultiEchelonConfig {
            warehouse: w.clone(),
            retailers: r,
        };
        let mut env = MultiEchelonEnv::new(cfg, 0).unwrap();
        let mut st = env.state().clone();
        st.warehouse.y = 5;
        env.set_state(st).unwrap();
        let out = env.step_with_demands(0, &[4, 4], &[0, 0]).unwrap();
        assert_eq!(out.allocated, vec![3, 2]);
        assert_eq!(out.warehouse.demand_obs, 5);
        assert!(out.warehouse.censored);
        // 3 units short at the warehouse
        assert_eq!(out.warehouse.reward, -(w.p * 3.0));
        assert_eq!(out.retailers[0].next.pipeline.last(), Some(&3));
        assert_eq!(out.retailers[1].next.pipeline.last(), Some(&2));
    }

    #[test]
    fn single_retailer_with_ample_warehouse_matches_single_item() {
        let retailer = ItemParams {
            lead_time: 2,
            ..ItemParams::default()
        };
        let warehouse = ItemParams {
            y_max: 100_000,
            d_max: 20,
            h: 0.0,
            ..ItemParams::default()
        };
        let cfg = MultiEchelonConfig {
            warehouse: warehouse.clone(),
            retailers: vec![retailer.clone()],
        };
        let mut echelon = MultiEchelonEnv::new(cfg, 11).unwrap();
        let mut st = echelon.state().clone();
        st.warehouse.y = 100_000;
        echelon.set_state(st).unwrap();
        let mut single = SingleItemEnv::new(retailer, 11).unwrap();
        for t in 0..500u32 {
            let a = (t * 7) % 21;
            let e = echelon.step(0, &[a]).unwrap();
            let s = single.step(a).unwrap();
            assert_eq!(e.retailers[0], s);
            assert_eq!(e.reward, s.reward);
        }
    }

    #[test]
    fn bounds_are_checked() {
        let (w, r) = multi_echelon_preset(1).unwrap();
        let mut env = MultiEchelonEnv::new(
            MultiEchelonConfig {
                warehouse: w,
                retailers: r,
            },
            0,
        )
        .unwrap();
        assert!(matches!(env.step(21, &[0]), Err(Error::Action(_))));
        assert!(matches!(env.step(0, &[21]), Err(Error::Action(_))));
        assert!(matches!(env.step(0, &[1, 1]), Err(Error::Action(_))));
    }
}
