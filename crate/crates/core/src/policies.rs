//! Alarm rules replayed on observed trajectories.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bounds::bisect;
use crate::error::{Error, Result};
use crate::model::dynamics::{flow_signed, jump_unchecked};
use crate::model::params::ModelParams;
use crate::model::statistic::{init_statistic, Statistic3};
use crate::sim::Trajectory;
use crate::solver::{first_hit, ResolvedConfig, ValueFunction};

#[derive(Debug, Clone)]
pub enum Policy {
    /// Alarm once `φ× + φ⁺ ≥ threshold`. A zero threshold alarms at once, an
    /// infinite one never.
    ThresholdSum { threshold: f64 },
    /// Alarm once either channel odds reaches `threshold`.
    PerChannelMin { threshold: f64 },
    /// Alarm on entry into `{v ≥ −ε_stop}`.
    ValueRegion {
        value: Arc<ValueFunction>,
        eps_stop: f64,
        dt: f64,
    },
    /// The ε-optimal rule built from `v₁, …, vₙ`.
    EpsOptimal {
        stages: Arc<Vec<ValueFunction>>,
        eps: f64,
        eps_stop: f64,
        dt: f64,
    },
}

impl Policy {
    /// Sum rule at the advantageous threshold `κ`.
    pub fn threshold_sum(p: &ModelParams) -> Self {
        Policy::ThresholdSum {
            threshold: p.kappa(),
        }
    }

    /// Per-channel rule at the single-channel threshold `λ/c`.
    pub fn per_channel_min(p: &ModelParams) -> Self {
        Policy::PerChannelMin {
            threshold: p.lambda() / p.c(),
        }
    }

    pub fn value_region(value: Arc<ValueFunction>, cfg: &ResolvedConfig) -> Self {
        Policy::ValueRegion {
            value,
            eps_stop: cfg.eps_stop,
            dt: cfg.dt,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Policy::ThresholdSum { .. } => "threshold-sum",
            Policy::PerChannelMin { .. } => "per-channel-min",
            Policy::ValueRegion { .. } => "value-region",
            Policy::EpsOptimal { .. } => "eps-optimal",
        }
    }

    /// Number of stages of an ε-optimal rule.
    pub fn stage_count(&self) -> Option<usize> {
        match self {
            Policy::EpsOptimal { stages, .. } => Some(stages.len()),
            _ => None,
        }
    }
}

/// Alarm time on a trajectory; `fired == false` means the horizon was reached
/// first and `time` equals the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alarm {
    pub time: f64,
    pub fired: bool,
}

pub fn build_eps_optimal(
    v_seq: Vec<ValueFunction>,
    eps: f64,
    cfg: &ResolvedConfig,
) -> Result<Policy> {
    if v_seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: format!("must be positive, got {eps}"),
        });
    }
    Ok(Policy::EpsOptimal {
        stages: Arc::new(v_seq),
        eps,
        eps_stop: cfg.eps_stop,
        dt: cfg.dt,
    })
}

fn sum_at(t: f64, s: &Statistic3, p: &ModelParams) -> f64 {
    flow_signed(t, s, p).sum()
}

/// Time derivative of `φ× + φ⁺` along the flow.
fn sum_slope(t: f64, s: &Statistic3, p: &ModelParams) -> f64 {
    let q = flow_signed(t, s, p);
    let (l, a) = (p.lambda(), p.a());
    (l + a) * q.phi_p + 2.0 * a * q.phi_x + 2.0 * l
}

/// Earliest `t ∈ [0, limit]` with `x(t) + y(t) ≥ level` along the flow from
/// `s`, or `None`.
///
/// The sum is a quadratic in `e^{at}`, so it has at most one stationary point;
/// the two monotone pieces on either side are searched by bisection.
pub fn first_crossing_within(
    s: &Statistic3,
    p: &ModelParams,
    level: f64,
    limit: f64,
    tol: f64,
) -> Option<f64> {
    if s.sum() >= level {
        return Some(0.0);
    }
    if !(limit > 0.0) || level.is_infinite() {
        return None;
    }
    let d0 = sum_slope(0.0, s, p);
    let d1 = sum_slope(limit, s, p);
    let mut pieces = [(0.0, limit), (limit, limit)];
    if (d0 > 0.0) != (d1 > 0.0) {
        let up_first = d0 > 0.0;
        let ts = bisect(
            |t| (sum_slope(t, s, p) > 0.0) != up_first,
            0.0,
            limit,
            1e-13 * limit.max(1.0),
        );
        pieces = [(0.0, ts), (ts, limit)];
    }
    for (lo, hi) in pieces {
        if hi > lo && sum_at(hi, s, p) >= level {
            return Some(bisect(|t| sum_at(t, s, p) >= level, lo, hi, tol));
        }
    }
    None
}

/// Earliest time the flow from `s` reaches `φ× + φ⁺ = κ`; infinite if never.
pub fn first_crossing(s: &Statistic3, p: &ModelParams) -> f64 {
    first_crossing_level(s, p, p.kappa())
}

pub fn first_crossing_level(s: &Statistic3, p: &ModelParams, level: f64) -> f64 {
    let rate = p.lambda() + p.a().abs();
    let mut limit = 60.0 / rate;
    let tol = |lim: f64| 1e-13 * lim.max(1.0);
    if p.a() < 0.0 {
        // The path settles at the fixed point well before this time.
        limit = 60.0 / p.a().abs() + 60.0 / p.lambda();
        return first_crossing_within(s, p, level, limit, tol(limit)).unwrap_or(f64::INFINITY);
    }
    for _ in 0..64 {
        if let Some(t) = first_crossing_within(s, p, level, limit, tol(limit)) {
            return t;
        }
        limit *= 2.0;
    }
    f64::INFINITY
}

/// Earliest time in `[0, limit]` at which one channel odds reaches `level`.
fn channel_crossing(phi: f64, p: &ModelParams, level: f64, limit: f64, tol: f64) -> Option<f64> {
    if phi >= level {
        return Some(0.0);
    }
    let z = |t: f64| {
        let c = crate::model::dynamics::FlowCoefficients::at(t, p);
        c.growth * phi + p.lambda() * c.drift
    };
    // Each channel odds is monotone along the flow.
    if z(limit) >= level {
        Some(bisect(|t| z(t) >= level, 0.0, limit, tol))
    } else {
        None
    }
}

/// Rule-specific search inside one inter-arrival gap.
struct Segment<'a> {
    state: Statistic3,
    gap: f64,
    params: &'a ModelParams,
}

/// Replays the rule on `traj`.
pub fn alarm_time(policy: &Policy, traj: &Trajectory, p: &ModelParams) -> Result<Alarm> {
    traj.validate()?;
    let mut state = init_statistic(p.pi1(), p.pi2())?;
    let mut start = 0.0;
    let ratio = p.ratio();
    // State carried by the ε-optimal recursion: stages left and current ε.
    let mut eps_state = match policy {
        Policy::EpsOptimal { stages, eps, .. } => Some((stages.len(), *eps)),
        _ => None,
    };
    let jumps = traj.jumps();
    for index in 0..=jumps.len() {
        let end = jumps.get(index).map(|j| j.time).unwrap_or(traj.horizon());
        let seg = Segment {
            state,
            gap: end - start,
            params: p,
        };
        if let Some(r) = search(policy, &seg, eps_state) {
            return Ok(Alarm {
                time: start + r,
                fired: true,
            });
        }
        let Some(jump) = jumps.get(index) else {
            break;
        };
        if let Some((m, e)) = eps_state {
            if m <= 1 {
                return Ok(Alarm {
                    time: jump.time,
                    fired: true,
                });
            }
            eps_state = Some((m - 1, e / 2.0));
        }
        state = jump_unchecked(&flow_signed(seg.gap, &state, p), jump.channel, ratio);
        start = jump.time;
    }
    Ok(Alarm {
        time: traj.horizon(),
        fired: false,
    })
}

fn search(policy: &Policy, seg: &Segment<'_>, eps_state: Option<(usize, f64)>) -> Option<f64> {
    let p = seg.params;
    match policy {
        Policy::ThresholdSum { threshold } => {
            if *threshold <= 0.0 {
                return Some(0.0);
            }
            first_crossing_within(&seg.state, p, *threshold, seg.gap, 1e-12 * seg.gap.max(1.0))
        }
        Policy::PerChannelMin { threshold } => {
            let tol = 1e-12 * seg.gap.max(1.0);
            let one = channel_crossing(seg.state.phi_1, p, *threshold, seg.gap, tol);
            let two = channel_crossing(seg.state.phi_2(), p, *threshold, seg.gap, tol);
            match (one, two) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            }
        }
        Policy::ValueRegion {
            value,
            eps_stop,
            dt,
        } => first_hit(value, &seg.state, p, *eps_stop, seg.gap, *dt),
        Policy::EpsOptimal {
            stages,
            eps_stop,
            dt,
            ..
        } => {
            let (m, e) = eps_state.expect("ε-optimal replay carries its recursion state");
            let (v, thr) = if m >= 2 {
                (&stages[m - 1], e / 2.0)
            } else {
                (&stages[0], e)
            };
            first_hit(v, &seg.state, p, eps_stop.max(thr), seg.gap, *dt)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::dynamics::Channel;
    use crate::sim::Jump;

    fn case_one() -> ModelParams {
        ModelParams::with_rates(2.0, 1.0, 2.0, 2.0).unwrap()
    }

    #[test]
    fn crossing_on_level_is_zero() {
        let p = case_one();
        let s = Statistic3::new(0.0, p.kappa(), 0.0).unwrap();
        assert_eq!(first_crossing(&s, &p), 0.0);
    }

    #[test]
    fn crossing_is_finite_for_growing_flow() {
        let p = case_one();
        let t = first_crossing(&Statistic3::ORIGIN, &p);
        assert!(t.is_finite() && t > 0.0);
        assert!((sum_at(t, &Statistic3::ORIGIN, &p) - p.kappa()).abs() < 1e-9);
    }

    #[test]
    fn crossing_is_infinite_when_path_settles_below() {
        let p = ModelParams::with_rates(3.0, 1.0, 0.5, 1.0).unwrap();
        assert!(first_crossing(&Statistic3::ORIGIN, &p).is_infinite());
    }

    #[test]
    fn immediate_and_never_rules() {
        let p = case_one();
        let traj = Trajectory::new(
            vec![Jump { time: 0.5, channel: Channel::One }],
            3.0,
            None,
        )
        .unwrap();
        let now = alarm_time(&Policy::ThresholdSum { threshold: 0.0 }, &traj, &p).unwrap();
        assert_eq!(now, Alarm { time: 0.0, fired: true });
        let never = alarm_time(&Policy::ThresholdSum { threshold: f64::INFINITY }, &traj, &p).unwrap();
        assert_eq!(never, Alarm { time: 3.0, fired: false });
    }

    #[test]
    fn already_above_threshold_alarms_at_zero() {
        let p = case_one().with_priors(0.6, 0.5).unwrap();
        let traj = Trajectory::new(vec![], 1.0, None).unwrap();
        let a = alarm_time(&Policy::threshold_sum(&p), &traj, &p).unwrap();
        assert_eq!(a.time, 0.0);
    }

    #[test]
    fn empty_sequence_is_rejected() {
        let p = case_one();
        let cfg = crate::solver::SolverConfig::default().resolve(&p).unwrap();
        assert!(matches!(build_eps_optimal(vec![], 0.1, &cfg), Err(Error::EmptySequence)));
    }
}
