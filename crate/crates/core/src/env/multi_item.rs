use super::single::{Experience, SingleItemEnv, SingleItemState};
use crate::error::{Error, Result};
use crate::params::ItemParams;

/// Independent items sharing a store; item `i` draws demand from stream `i`.
#[derive(Debug, Clone)]
pub struct MultiItemEnv {
    items: Vec<SingleItemEnv>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiItemOutcome {
    pub items: Vec<Experience>,
    /// Sum of the per-item rewards.
    pub reward: f64,
}

impl MultiItemEnv {
    pub fn new(items: Vec<ItemParams>, seed: u64) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Config(
                "multi-item environment needs at least one item".into(),
            ));
        }
        let items = items
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                let demand = crate::demand::DemandModel::poisson_clamped(p.d_mean, p.d_max)?;
                SingleItemEnv::with_demand_stream(p, demand, seed, i as u64)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { items })
    }

    pub fn reset(&mut self, seed: u64) -> Vec<SingleItemState> {
        self.items
            .iter_mut()
            .enumerate()
            .map(|(i, env)| env.reset_stream(seed, i as u64).clone())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item(&self, i: usize) -> &SingleItemEnv {
        &self.items[i]
    }

    pub fn states(&self) -> Vec<SingleItemState> {
        self.items.iter().map(|e| e.state().clone()).collect()
    }

    pub fn set_states(&mut self, states: Vec<SingleItemState>) -> Result<()> {
        self.check_len(states.len())?;
        for (env, s) in self.items.iter_mut().zip(states) {
            env.set_state(s)?;
        }
        Ok(())
    }

    pub fn step(&mut self, actions: &[u32]) -> Result<MultiItemOutcome> {
        self.check_actions(actions)?;
        let items = self
            .items
            .iter_mut()
            .zip(actions)
            .map(|(env, &a)| env.step(a))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::outcome(items))
    }

    pub fn step_with_demands(
        &mut self,
        actions: &[u32],
        demands: &[u32],
    ) -> Result<MultiItemOutcome> {
        self.check_actions(actions)?;
        self.check_len(demands.len())?;
        let items = self
            .items
            .iter_mut()
            .zip(actions.iter().zip(demands))
            .map(|(env, (&a, &d))| env.step_with_demand(a, d))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::outcome(items))
    }

    fn outcome(items: Vec<Experience>) -> MultiItemOutcome {
        let reward = items.iter().map(|e| e.reward).sum();
        MultiItemOutcome { items, reward }
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.items.len() {
            return Err(Error::Action(format!(
                "expected {} per-item values, got {n}",
                self.items.len()
            )));
        }
        Ok(())
    }

    fn check_actions(&self, actions: &[u32]) -> Result<()> {
        self.check_len(actions.len())?;
        for (i, (env, &a)) in self.items.iter().zip(actions).enumerate() {
            if a > env.params().a_max {
                return Err(Error::Action(format!(
                    "item {i}: order {a} exceeds a_max {}",
                    env.params().a_max
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::multi_item_preset;

    #[test]
    fn joint_reward_is_additive() {
        let p = ItemParams {
            lead_time: 3,
            ..ItemParams::default()
        };
        let mut env = MultiItemEnv::new(vec![p.clone(), p], 0).unwrap();
        let s = SingleItemState {
            y: 10,
            pipeline: vec![3, 2],
        };
        env.set_states(vec![s.clone(), s]).unwrap();
        let out = env.step_with_demands(&[4, 4], &[7, 7]).unwrap();
        assert_eq!(out.reward, -6.0);
        assert!(out.items.iter().all(|e| e.next
            == SingleItemState {
                y: 6,
                pipeline: vec![2, 4]
            }));
    }

    #[test]
    fn length_mismatch_is_action_error() {
        let mut env = MultiItemEnv::new(multi_item_preset(3).unwrap(), 1).unwrap();
        assert!(matches!(env.step(&[1, 2]), Err(Error::Action(_))));
        assert!(matches!(env.step(&[1, 2, 21]), Err(Error::Action(_))));
        let out = env.step(&[1, 2, 3]).unwrap();
        assert_eq!(out.items.len(), 3);
        // shapes follow each item's own lead time
        let shapes: Vec<usize> = env.states().iter().map(|s| s.pipeline.len()).collect();
        assert_eq!(shapes, vec![3, 2, 1]);
    }

    #[test]
    fn items_draw_independent_streams() {
        let p = ItemParams::default();
        let mut env = MultiItemEnv::new(vec![p.clone(), p], 5).unwrap();
        let mut d0 = Vec::new();
        let mut d1 = Vec::new();
        for _ in 0..200 {
            let out = env.step(&[20, 20]).unwrap();
            d0.push(out.items[0].demand_obs);
            d1.push(out.items[1].demand_obs);
        }
        assert_ne!(d0, d1);
        let mut again = MultiItemEnv::new(vec![ItemParams::default(); 2], 5).unwrap();
        let first = again.step(&[20, 20]).unwrap();
        env.reset(5);
        assert_eq!(env.step(&[20, 20]).unwrap(), first);
    }
}
