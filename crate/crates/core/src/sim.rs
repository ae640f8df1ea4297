//! Scenario and trajectory sampling, statistic reconstruction and Monte Carlo
//! estimation of the Bayes risk.

use rand::distr::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::dynamics::{flow_signed, jump_unchecked, Channel};
use crate::model::params::ModelParams;
use crate::model::statistic::{init_statistic, Statistic3};
use crate::policies::{alarm_time, Policy};
use crate::solver::ValueFunction;

/// Disorder times of the two channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub theta1: f64,
    pub theta2: f64,
}

impl Scenario {
    pub fn theta(&self) -> f64 {
        self.theta1.min(self.theta2)
    }

    pub fn theta_of(&self, channel: Channel) -> f64 {
        match channel {
            Channel::One => self.theta1,
            Channel::Two => self.theta2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    pub channel: Channel,
}

/// Observed arrivals over `[0, horizon]`, optionally with the hidden scenario
/// that generated them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    jumps: Vec<Jump>,
    horizon: f64,
    scenario: Option<Scenario>,
}

impl Trajectory {
    pub fn new(jumps: Vec<Jump>, horizon: f64, scenario: Option<Scenario>) -> Result<Self> {
        let t = Trajectory {
            jumps,
            horizon,
            scenario,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::MalformedTrajectory(format!(
                "horizon must be positive and finite, got {}",
                self.horizon
            )));
        }
        let mut prev = 0.0;
        for (i, j) in self.jumps.iter().enumerate() {
            if !j.time.is_finite() || !(j.time > prev) {
                return Err(Error::MalformedTrajectory(format!(
                    "jump {i} at {} does not follow {prev}",
                    j.time
                )));
            }
            if j.time > self.horizon {
                return Err(Error::MalformedTrajectory(format!(
                    "jump {i} at {} lies beyond the horizon {}",
                    j.time, self.horizon
                )));
            }
            prev = j.time;
        }
        Ok(())
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn scenario(&self) -> Option<&Scenario> {
        self.scenario.as_ref()
    }

    pub fn count(&self, channel: Channel) -> usize {
        self.jumps.iter().filter(|j| j.channel == channel).count()
    }
}

fn unit_exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = Open01.sample(rng);
    -u.ln()
}

pub fn sample_scenario<R: Rng + ?Sized>(p: &ModelParams, rng: &mut R) -> Scenario {
    let mut draw = |pi: f64| {
        let u: f64 = rng.random();
        if u < pi {
            0.0
        } else {
            unit_exponential(rng) / p.lambda()
        }
    };
    let theta1 = draw(p.pi1());
    let theta2 = draw(p.pi2());
    Scenario { theta1, theta2 }
}

/// Arrival times on `[0, horizon]` of a Poisson process whose rate switches
/// from `before` to `after` at `switch`.
fn switching_arrivals<R: Rng + ?Sized>(
    before: f64,
    after: f64,
    switch: f64,
    horizon: f64,
    rng: &mut R,
    out: &mut Vec<f64>,
) {
    let mut t = 0.0;
    loop {
        if t < switch {
            let next = t + unit_exponential(rng) / before;
            if next >= switch {
                t = switch;
                continue;
            }
            t = next;
        } else {
            t += unit_exponential(rng) / after;
        }
        if t > horizon {
            return;
        }
        out.push(t);
    }
}

fn merge(one: &[f64], two: &[f64]) -> Vec<Jump> {
    let mut jumps: Vec<Jump> = one
        .iter()
        .map(|&time| Jump {
            time,
            channel: Channel::One,
        })
        .chain(two.iter().map(|&time| Jump {
            time,
            channel: Channel::Two,
        }))
        .collect();
    jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
    jumps.dedup_by(|b, a| b.time <= a.time);
    jumps
}

/// Observations under the physical measure: each channel at rate `β` before its
/// disorder time and `α` after.
pub fn simulate_trajectory<R: Rng + ?Sized>(
    sc: &Scenario,
    p: &ModelParams,
    horizon: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter {
            name: "horizon",
            reason: format!("must be positive, got {horizon}"),
        });
    }
    let mut one = Vec::new();
    let mut two = Vec::new();
    switching_arrivals(p.beta(), p.alpha(), sc.theta1, horizon, rng, &mut one);
    switching_arrivals(p.beta(), p.alpha(), sc.theta2, horizon, rng, &mut two);
    Ok(Trajectory {
        jumps: merge(&one, &two),
        horizon,
        scenario: Some(*sc),
    })
}

/// Observations under the reference measure: both channels at rate `β`.
pub fn simulate_reference<R: Rng + ?Sized>(p: &ModelParams, horizon: f64, rng: &mut R) -> Trajectory {
    let mut one = Vec::new();
    let mut two = Vec::new();
    switching_arrivals(p.beta(), p.beta(), f64::INFINITY, horizon, rng, &mut one);
    switching_arrivals(p.beta(), p.beta(), f64::INFINITY, horizon, rng, &mut two);
    Trajectory {
        jumps: merge(&one, &two),
        horizon,
        scenario: None,
    }
}

/// Statistic along a trajectory: the state right after every arrival, from
/// which any time is reached by the flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticPath {
    pub times: Vec<f64>,
    /// `states[i]` holds at `times[i]` after the arrival there (the initial
    /// state for `i = 0`).
    pub states: Vec<Statistic3>,
    /// Left limits just before each arrival.
    pub pre_jump: Vec<Statistic3>,
    pub horizon: f64,
}

impl StatisticPath {
    /// State at time `t` (right-continuous: an arrival at `t` is included).
    pub fn at(&self, t: f64, p: &ModelParams) -> Statistic3 {
        let i = self.times.partition_point(|&s| s <= t).max(1) - 1;
        flow_signed(t - self.times[i], &self.states[i], p)
    }

    pub fn terminal(&self, p: &ModelParams) -> Statistic3 {
        self.at(self.horizon, p)
    }
}

pub fn statistic_path(traj: &Trajectory, p: &ModelParams) -> Result<StatisticPath> {
    traj.validate()?;
    let mut s = init_statistic(p.pi1(), p.pi2())?;
    let mut times = vec![0.0];
    let mut states = vec![s];
    let mut pre_jump = Vec::with_capacity(traj.jumps.len());
    let mut last = 0.0;
    for j in &traj.jumps {
        let before = flow_signed(j.time - last, &s, p);
        pre_jump.push(before);
        s = jump_unchecked(&before, j.channel, p.ratio());
        times.push(j.time);
        states.push(s);
        last = j.time;
    }
    Ok(StatisticPath {
        times,
        states,
        pre_jump,
        horizon: traj.horizon,
    })
}

/// One replication's bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub theta: f64,
    pub tau: f64,
    pub fired: bool,
    pub false_alarm: bool,
    pub delay: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub risk: f64,
    pub std_error: f64,
    pub false_alarm: f64,
    pub mean_delay: f64,
    pub reps: usize,
    pub seed: u64,
    /// Replications in which the policy never fired before the horizon.
    pub censored: usize,
}

impl RiskEstimate {
    pub fn censored_fraction(&self) -> f64 {
        self.censored as f64 / self.reps as f64
    }

    /// Normal-approximation interval at the given two-sided quantile.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.risk - z * self.std_error, self.risk + z * self.std_error)
    }
}

/// Default simulation horizon `20/min(λ, β)`.
pub fn default_horizon(p: &ModelParams) -> f64 {
    20.0 / p.lambda().min(p.beta())
}

/// Generator dedicated to replication `rep` of a run seeded with `seed`.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

fn replicate(policy: &Policy, p: &ModelParams, horizon: f64, seed: u64, rep: u64) -> Result<ReplicationRecord> {
    let mut rng = replication_rng(seed, rep);
    let sc = sample_scenario(p, &mut rng);
    let traj = simulate_trajectory(&sc, p, horizon, &mut rng)?;
    let alarm = alarm_time(policy, &traj, p)?;
    let theta = sc.theta();
    let false_alarm = alarm.time < theta;
    let delay = (alarm.time - theta).max(0.0);
    Ok(ReplicationRecord {
        theta,
        tau: alarm.time,
        fired: alarm.fired,
        false_alarm,
        delay,
        loss: f64::from(u8::from(false_alarm)) + p.c() * delay,
    })
}

/// Monte Carlo estimate of `P(τ < θ) + c·E(τ − θ)⁺` together with the
/// per-replication records.
pub fn estimate_risk_with_log(
    policy: &Policy,
    p: &ModelParams,
    n_reps: usize,
    horizon: f64,
    seed: u64,
) -> Result<(RiskEstimate, Vec<ReplicationRecord>)> {
    if n_reps < 100 {
        return Err(Error::InvalidParameter {
            name: "n_reps",
            reason: format!("need at least 100 replications, got {n_reps}"),
        });
    }
    let records: Vec<ReplicationRecord> = (0..n_reps as u64)
        .into_par_iter()
        .map(|rep| replicate(policy, p, horizon, seed, rep))
        .collect::<Result<_>>()?;
    let n = n_reps as f64;
    let mut loss_sum = 0.0;
    let mut fa = 0usize;
    let mut delay_sum = 0.0;
    let mut censored = 0usize;
    for r in &records {
        loss_sum += r.loss;
        delay_sum += r.delay;
        fa += usize::from(r.false_alarm);
        censored += usize::from(!r.fired);
    }
    let risk = loss_sum / n;
    let var = records.iter().map(|r| (r.loss - risk).powi(2)).sum::<f64>() / (n - 1.0);
    let est = RiskEstimate {
        risk,
        std_error: (var / n).sqrt(),
        false_alarm: fa as f64 / n,
        mean_delay: delay_sum / n,
        reps: n_reps,
        seed,
        censored,
    };
    if est.censored_fraction() > 1e-3 {
        log::warn!(
            "{} of {} replications reached the horizon {horizon} without an alarm; \
             the delay estimate is censored",
            censored,
            n_reps
        );
    }
    Ok((est, records))
}

pub fn estimate_risk(
    policy: &Policy,
    p: &ModelParams,
    n_reps: usize,
    horizon: f64,
    seed: u64,
) -> Result<RiskEstimate> {
    estimate_risk_with_log(policy, p, n_reps, horizon, seed).map(|(e, _)| e)
}

/// `(1 − π)(1 + c·v(Υ₀))` for prior masses `(π₁, π₂)`.
pub fn predicted_risk(v: &ValueFunction, pi1: f64, pi2: f64, p: &ModelParams) -> Result<f64> {
    let s = init_statistic(pi1, pi2)?;
    let value = v.eval(&s);
    if value >= 0.0 {
        log::warn!("initial state {s:?} lies in the stop set; the predicted alarm is immediate");
    }
    let pi = 1.0 - (1.0 - pi1) * (1.0 - pi2);
    Ok((1.0 - pi) * (1.0 + p.c() * value))
}

/// Open box `{φ× < x_max, φ⁺ < y_max, φ¹ < z_max}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitBox {
    pub x_max: f64,
    pub y_max: f64,
    pub z_max: f64,
}

impl ExitBox {
    pub fn contains(&self, s: &Statistic3) -> bool {
        s.phi_x < self.x_max && s.phi_p < self.y_max && s.phi_1 < self.z_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynkinReport {
    /// Mean residual divided by its standard error; zero when every residual
    /// vanishes.
    pub standardized_residual: f64,
    pub mean_residual: f64,
    pub std_error: f64,
    /// Mean of `τ_D ∧ t_cap` over all replications and over the first half.
    pub mean_exit: f64,
    pub mean_exit_first_half: f64,
    pub reps: usize,
}

/// Simpson's rule for `∫₀ᵘ 2λ(φ× + φ⁺ + 1)` along the flow from `s`.
fn generator_integral(s: &Statistic3, u: f64, p: &ModelParams) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    let panels = 64;
    let h = u / panels as f64;
    let f = |t: f64| 2.0 * p.lambda() * (flow_signed(t, s, p).sum() + 1.0);
    let mut acc = f(0.0) + f(u);
    for i in 1..panels {
        acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// First time in `[0, limit]` at which the flow from `s` leaves the box.
fn flow_exit(s: &Statistic3, p: &ModelParams, d: &ExitBox, limit: f64) -> Option<f64> {
    let outside = |t: f64| !d.contains(&flow_signed(t, s, p));
    let step = 0.01 / (p.lambda() + p.a().abs() + p.beta());
    let mut prev = 0.0;
    let mut t = step;
    loop {
        let cur = t.min(limit);
        if outside(cur) {
            return Some(crate::bounds::bisect(outside, prev, cur, 1e-12 * cur.max(1.0)));
        }
        if cur >= limit {
            return None;
        }
        prev = cur;
        t += step;
    }
}

/// One replication of `f(Υ_{τ_D∧t}) − f(Υ₀) − ∫₀^{τ_D∧t} A f ds` under the
/// reference measure with `f = φ× + φ⁺`; returns `(residual, τ_D ∧ t)`.
fn dynkin_replication(p: &ModelParams, d: &ExitBox, t_cap: f64, rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
    let start = init_statistic(p.pi1(), p.pi2())?;
    let mut s = start;
    let mut t = 0.0;
    let mut integral = 0.0;
    if !d.contains(&s) || t_cap == 0.0 {
        return Ok((0.0, 0.0));
    }
    let total = 2.0 * p.beta();
    loop {
        let gap = unit_exponential(rng) / total;
        let room = t_cap - t;
        let span = gap.min(room);
        if let Some(exit) = flow_exit(&s, p, d, span) {
            integral += generator_integral(&s, exit, p);
            let end = flow_signed(exit, &s, p);
            return Ok((end.sum() - start.sum() - integral, t + exit));
        }
        integral += generator_integral(&s, span, p);
        let before = flow_signed(span, &s, p);
        if gap >= room {
            return Ok((before.sum() - start.sum() - integral, t_cap));
        }
        let channel = if rng.random::<bool>() {
            Channel::One
        } else {
            Channel::Two
        };
        s = jump_unchecked(&before, channel, p.ratio());
        t += gap;
        if !d.contains(&s) {
            return Ok((s.sum() - start.sum() - integral, t));
        }
    }
}

/// Monte Carlo check of Dynkin's formula for `f = φ× + φ⁺` stopped at the exit
/// from `d` or at `t_cap`.
pub fn dynkin_check(p: &ModelParams, d: &ExitBox, t_cap: f64, n_reps: usize, seed: u64) -> Result<DynkinReport> {
    if !(t_cap >= 0.0) || n_reps < 2 {
        return Err(Error::InvalidParameter {
            name: "dynkin_check",
            reason: format!("need t_cap ≥ 0 and at least 2 replications, got {t_cap}, {n_reps}"),
        });
    }
    let samples: Vec<(f64, f64)> = (0..n_reps as u64)
        .into_par_iter()
        .map(|rep| dynkin_replication(p, d, t_cap, &mut replication_rng(seed, rep)))
        .collect::<Result<_>>()?;
    let n = n_reps as f64;
    let mean = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.0 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let half = n_reps / 2;
    let mean_exit = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let mean_exit_first_half = samples[..half.max(1)].iter().map(|s| s.1).sum::<f64>() / half.max(1) as f64;
    Ok(DynkinReport {
        standardized_residual: if se > 0.0 { mean / se } else { 0.0 },
        mean_residual: mean,
        std_error: se,
        mean_exit,
        mean_exit_first_half,
        reps: n_reps,
    })
}
