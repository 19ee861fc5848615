//! Feedback-graph side experiences for lost-sales transitions.
//!
//! An observed demand `d_obs` is replayed against other inventory levels
//! and orders. If the source period was not censored (`d_obs < y`) every
//! inventory level `0..=y_max` can be replayed; if it was censored only
//! levels `0..=y` can, since all that is known is that demand reached `y`.
//! Censored replays use `d_obs` as the demand, so their lost-sales penalty
//! is a lower bound on the true one.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{transition, Experience, SingleItemState};
use crate::error::{Error, Result};
use crate::params::ItemParams;

/// Which state dimensions are enumerated when building side experiences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeedbackGraphSpec {
    /// Number of leading pipeline slots enumerated over `0..=a_max`
    /// (the rest are copied from the source). Zero varies only inventory
    /// and order.
    pub enumerate_pipeline_dims: usize,
    /// Optional uniform subsample size per source experience.
    pub cap_side_per_experience: Option<usize>,
}

impl Default for FeedbackGraphSpec {
    fn default() -> Self {
        Self {
            enumerate_pipeline_dims: 0,
            cap_side_per_experience: None,
        }
    }
}

impl FeedbackGraphSpec {
    pub fn validate(&self, params: &ItemParams) -> Result<()> {
        if self.enumerate_pipeline_dims > params.pipeline_len() {
            return Err(Error::Config(format!(
                "fg dims {} exceed the {} pipeline slots",
                self.enumerate_pipeline_dims,
                params.pipeline_len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SideExperience {
    pub experience: Experience,
    /// Identifier of the real experience this was generated from.
    pub source_id: u64,
}

/// Highest inventory level that may be replayed for this source.
pub fn inventory_bound(exp: &Experience, params: &ItemParams) -> u32 {
    if exp.censored {
        exp.state.y
    } else {
        params.y_max
    }
}

/// `(y_bound+1)·(a_max+1)^(k+1)`, before any cap.
pub fn side_count(exp: &Experience, spec: &FeedbackGraphSpec, params: &ItemParams) -> usize {
    let radix = params.num_actions();
    (inventory_bound(exp, params) as usize + 1) * radix.pow(spec.enumerate_pipeline_dims as u32 + 1)
}

/// Number of side experiences actually produced once the cap is applied.
pub fn capped_count(exp: &Experience, spec: &FeedbackGraphSpec, params: &ItemParams) -> usize {
    let full = side_count(exp, spec, params);
    spec.cap_side_per_experience
        .map_or(full, |cap| cap.min(full))
}

/// Visits every replayed `(ŝ, â)` in enumeration order: inventory outermost,
/// then the enumerated pipeline slots (last slot fastest), then the order.
pub fn for_each_side_pair(
    exp: &Experience,
    spec: &FeedbackGraphSpec,
    params: &ItemParams,
    mut f: impl FnMut(&SingleItemState, u32),
) {
    let k = spec.enumerate_pipeline_dims.min(exp.state.pipeline.len());
    let mut state = exp.state.clone();
    for y in 0..=inventory_bound(exp, params) {
        state.y = y;
        state.pipeline[..k].iter_mut().for_each(|slot| *slot = 0);
        loop {
            for a in 0..=params.a_max {
                f(&state, a);
            }
            // odometer over the enumerated slots
            let mut carry = true;
            for slot in state.pipeline[..k].iter_mut().rev() {
                if *slot < params.a_max {
                    *slot += 1;
                    carry = false;
                    break;
                }
                *slot = 0;
            }
            if carry {
                break;
            }
        }
    }
}

/// Replays one `(ŝ, â)` against the source's observed demand.
pub fn replay(
    params: &ItemParams,
    state: &SingleItemState,
    action: u32,
    demand_obs: u32,
) -> Experience {
    let t = transition(params, state, action, demand_obs);
    Experience {
        state: state.clone(),
        action,
        reward: t.reward,
        next: t.next,
        demand_obs: t.demand_obs,
        censored: t.censored,
    }
}

/// Full (uncapped) side-experience list for `exp`.
pub fn generate_side_experiences(
    exp: &Experience,
    spec: &FeedbackGraphSpec,
    params: &ItemParams,
    source_id: u64,
) -> Vec<SideExperience> {
    let mut out = Vec::with_capacity(side_count(exp, spec, params));
    for_each_side_pair(exp, spec, params, |s, a| {
        out.push(SideExperience {
            experience: replay(params, s, a, exp.demand_obs),
            source_id,
        });
    });
    out
}

/// Side experiences with the spec's cap applied as a uniform subsample
/// (enumeration order is preserved). Without a cap the RNG is untouched.
pub fn generate_capped<R: Rng + ?Sized>(
    exp: &Experience,
    spec: &FeedbackGraphSpec,
    params: &ItemParams,
    source_id: u64,
    rng: &mut R,
) -> Vec<SideExperience> {
    let full = side_count(exp, spec, params);
    match spec.cap_side_per_experience {
        Some(cap) if cap < full => {
            let mut picks = rand::seq::index::sample(rng, full, cap).into_vec();
            picks.sort_unstable();
            let mut out = Vec::with_capacity(cap);
            let mut next = picks.iter().peekable();
            let mut i = 0usize;
            for_each_side_pair(exp, spec, params, |s, a| {
                if next.peek() == Some(&&i) {
                    next.next();
                    out.push(SideExperience {
                        experience: replay(params, s, a, exp.demand_obs),
                        source_id,
                    });
                }
                i += 1;
            });
            out
        }
        _ => generate_side_experiences(exp, spec, params, source_id),
    }
}

/// A side experience of one node in a multi-node system; the other nodes'
/// states are held at the source values.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSideExperience {
    pub node: usize,
    pub side: SideExperience,
}

/// Per-node side experiences for multi-item or multi-echelon transitions.
/// Nodes are varied one at a time, never jointly.
pub fn generate_per_node(
    node_experiences: &[Experience],
    spec: &FeedbackGraphSpec,
    node_params: &[ItemParams],
    source_id: u64,
) -> Result<Vec<NodeSideExperience>> {
    if node_experiences.len() != node_params.len() {
        return Err(Error::Config("one parameter set per node required".into()));
    }
    let mut out = Vec::new();
    for (node, (exp, params)) in node_experiences.iter().zip(node_params).enumerate() {
        let node_spec = FeedbackGraphSpec {
            enumerate_pipeline_dims: spec.enumerate_pipeline_dims.min(params.pipeline_len()),
            ..*spec
        };
        out.extend(
            generate_side_experiences(exp, &node_spec, params, source_id)
                .into_iter()
                .map(|side| NodeSideExperience { node, side }),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small(y_max: u32, a_max: u32, lead_time: usize) -> ItemParams {
        ItemParams {
            y_max,
            a_max,
            lead_time,
            d_max: y_max.min(20),
            ..ItemParams::default()
        }
    }

    fn exp_from(params: &ItemParams, state: SingleItemState, a: u32, d: u32) -> Experience {
        replay(params, &state, a, d)
    }

    #[test]
    fn censored_count() {
        let p = small(10, 2, 2);
        let e = exp_from(
            &p,
            SingleItemState {
                y: 3,
                pipeline: vec![1],
            },
            1,
            5,
        );
        assert!(e.censored);
        let spec = FeedbackGraphSpec::default();
        let side = generate_side_experiences(&e, &spec, &p, 0);
        assert_eq!(side.len(), 12);
        assert_eq!(side_count(&e, &spec, &p), 12);
        assert!(side.iter().all(|s| s.experience.state.y <= 3));
    }

    #[test]
    fn uncensored_count_is_complete() {
        let p = ItemParams::default();
        let e = exp_from(
            &p,
            SingleItemState {
                y: 10,
                pipeline: vec![0, 0, 0],
            },
            0,
            4,
        );
        assert!(!e.censored);
        let spec = FeedbackGraphSpec::default();
        assert_eq!(generate_side_experiences(&e, &spec, &p, 0).len(), 2121);
        let k1 = FeedbackGraphSpec {
            enumerate_pipeline_dims: 1,
            ..spec
        };
        assert_eq!(side_count(&e, &k1, &p), 44541);
        let e0 = exp_from(
            &p,
            SingleItemState {
                y: 0,
                pipeline: vec![0, 0, 0],
            },
            0,
            4,
        );
        assert_eq!(side_count(&e0, &spec, &p), 21);
    }

    #[test]
    fn side_reward_uses_observed_demand() {
        let p = ItemParams {
            lead_time: 2,
            ..ItemParams::default()
        };
        let s = replay(
            &p,
            &SingleItemState {
                y: 1,
                pipeline: vec![2],
            },
            0,
            3,
        );
        assert_eq!(s.reward, -8.0);
        assert_eq!(
            s.next,
            SingleItemState {
                y: 2,
                pipeline: vec![0]
            }
        );
    }

    #[test]
    fn cap_subsamples_without_replacement() {
        let p = small(10, 3, 2);
        let e = exp_from(
            &p,
            SingleItemState {
                y: 6,
                pipeline: vec![1],
            },
            2,
            2,
        );
        let spec = FeedbackGraphSpec {
            cap_side_per_experience: Some(7),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let side = generate_capped(&e, &spec, &p, 9, &mut rng);
        assert_eq!(side.len(), 7);
        let full = generate_side_experiences(&e, &FeedbackGraphSpec::default(), &p, 9);
        assert!(side.iter().all(|s| full.contains(s)));
        let zero = FeedbackGraphSpec {
            cap_side_per_experience: Some(0),
            ..Default::default()
        };
        assert!(generate_capped(&e, &zero, &p, 9, &mut rng).is_empty());
    }

    #[test]
    fn dims_beyond_pipeline_rejected() {
        let p = small(10, 3, 2);
        let spec = FeedbackGraphSpec {
            enumerate_pipeline_dims: 2,
            ..Default::default()
        };
        assert!(spec.validate(&p).is_err());
    }

    #[test]
    fn per_node_varies_one_node_at_a_time() {
        let a = small(4, 1, 2);
        let b = small(6, 2, 1);
        let ea = exp_from(
            &a,
            SingleItemState {
                y: 2,
                pipeline: vec![0],
            },
            1,
            1,
        );
        let eb = exp_from(
            &b,
            SingleItemState {
                y: 3,
                pipeline: vec![],
            },
            0,
            5,
        );
        let out = generate_per_node(
            &[ea.clone(), eb.clone()],
            &FeedbackGraphSpec::default(),
            &[a.clone(), b.clone()],
            0,
        )
        .unwrap();
        let spec = FeedbackGraphSpec::default();
        assert_eq!(
            out.len(),
            side_count(&ea, &spec, &a) + side_count(&eb, &spec, &b)
        );
        assert_eq!(out.iter().filter(|n| n.node == 1).count(), 4 * 3);
    }

    fn arb_experience() -> impl Strategy<Value = (ItemParams, Experience, usize)> {
        (1usize..4, 1u32..12, 1u32..4).prop_flat_map(|(l, y_max, a_max)| {
            let p = ItemParams {
                y_max,
                a_max,
                lead_time: l,
                d_max: y_max,
                ..ItemParams::default()
            };
            (
                Just(p),
                0..=y_max,
                proptest::collection::vec(0..=a_max, l - 1),
                0..=a_max,
                0..=y_max,
                0..l,
            )
                .prop_map(|(p, y, pipe, a, d, k)| {
                    let e = replay(&p, &SingleItemState { y, pipeline: pipe }, a, d);
                    (p, e, k)
                })
        })
    }

    proptest! {
        #[test]
        fn fg_properties((p, e, k) in arb_experience()) {
            let spec = FeedbackGraphSpec { enumerate_pipeline_dims: k, cap_side_per_experience: None };
            let side = generate_side_experiences(&e, &spec, &p, 3);
            prop_assert_eq!(side.len(), side_count(&e, &spec, &p));
            let bound = if e.censored { e.state.y } else { p.y_max };
            prop_assert!(side.iter().all(|s| s.experience.state.y <= bound));
            if !e.censored {
                for y in 0..=p.y_max {
                    prop_assert!(side.iter().any(|s| s.experience.state.y == y));
                }
            }
            // the source pair appears whenever its pipeline is enumerated
            prop_assert!(side.iter().any(|s| s.experience.state == e.state && s.experience.action == e.action));
            for s in &side {
                let t = transition(&p, &s.experience.state, s.experience.action, e.demand_obs);
                prop_assert_eq!(t.reward, s.experience.reward);
                prop_assert_eq!(&t.next, &s.experience.next);
                prop_assert_eq!(s.experience.censored, s.experience.demand_obs == s.experience.state.y);
            }
        }
    }
}
