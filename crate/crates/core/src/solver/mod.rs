//! Value iteration `vₙ = J₀vₙ₋₁` on a bounded grid, stopping regions and
//! hitting times along the flow.

pub mod grid;
pub mod operator;

use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{bisect, continuation_bounding_box};
use crate::error::{Error, Result};
use crate::model::dynamics::FlowCoefficients;
use crate::model::params::ModelParams;
use crate::model::statistic::Statistic3;

pub use grid::{Axis, Grid, ValueFunction};
pub use operator::{J0Result, Operator, Scratch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    #[default]
    Uniform,
    Geometric,
}

/// User-facing solver settings; unset fields resolve to defaults derived from
/// the model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub spacing: Spacing,
    /// Node ratio for geometric spacing.
    pub ratio: f64,
    /// `[x_max, y_max, z_max]`; defaults to the continuation bounding box.
    pub extents: Option<[f64; 3]>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub eps_stop: Option<f64>,
    pub eps_conv: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            nx: 48,
            ny: 48,
            nz: 32,
            spacing: Spacing::Uniform,
            ratio: 1.05,
            extents: None,
            dt: None,
            t_max: None,
            eps_stop: None,
            eps_conv: 1e-6,
            max_iter: 200,
        }
    }
}

/// Fully determined solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub dims: [usize; 3],
    pub spacing: Spacing,
    pub ratio: f64,
    pub extents: [f64; 3],
    pub dt: f64,
    pub t_max: f64,
    pub eps_stop: f64,
    pub eps_conv: f64,
    pub max_iter: usize,
}

impl SolverConfig {
    pub fn resolve(&self, p: &ModelParams) -> Result<ResolvedConfig> {
        let rate = p.rho() + 2.0 * p.beta();
        let dt = self.dt.unwrap_or_else(|| (0.05 / rate).min(0.01));
        let t_max = self.t_max.unwrap_or_else(|| 1e10f64.ln() / rate);
        let eps_stop = self.eps_stop.unwrap_or(1e-5 / p.c());
        let extents = match self.extents {
            Some(e) => e,
            None => {
                let b = continuation_bounding_box(p);
                [b.x_max, b.y_max, b.z_max]
            }
        };
        let positive = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        positive("dt", dt)?;
        positive("t_max", t_max)?;
        positive("eps_stop", eps_stop)?;
        positive("eps_conv", self.eps_conv)?;
        for e in extents {
            positive("grid extent", e)?;
        }
        if self.nx < 2 || self.ny < 2 || self.nz < 2 {
            return Err(Error::InvalidConfig("each axis needs at least 2 nodes".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be positive".into()));
        }
        if t_max < 10.0 * dt {
            return Err(Error::InvalidConfig(format!(
                "t_max = {t_max} must be at least 10·dt = {}",
                10.0 * dt
            )));
        }
        let kappa = p.kappa();
        if extents[0] < kappa || extents[1] < kappa || extents[2] < kappa {
            return Err(Error::InvalidConfig(format!(
                "grid extents {extents:?} do not cover the advantageous region (κ = {kappa})"
            )));
        }
        Ok(ResolvedConfig {
            dims: [self.nx, self.ny, self.nz],
            spacing: self.spacing,
            ratio: self.ratio,
            extents,
            dt,
            t_max,
            eps_stop,
            eps_conv: self.eps_conv,
            max_iter: self.max_iter,
        })
    }
}

impl ResolvedConfig {
    pub fn build_grid(&self) -> Result<Grid> {
        let axis = |hi: f64, n: usize| match self.spacing {
            Spacing::Uniform => Axis::uniform(hi, n),
            Spacing::Geometric => Axis::geometric(hi, n, self.ratio),
        };
        Ok(Grid::new(
            axis(self.extents[0], self.dims[0])?,
            axis(self.extents[1], self.dims[1])?,
            axis(self.extents[2], self.dims[2])?,
        ))
    }

    pub fn operator(&self, p: &ModelParams) -> Result<Operator> {
        Operator::new(p, self.dt, self.t_max)
    }
}

/// `[Jg](t, s)` for a single query.
pub fn apply_j(
    g: &ValueFunction,
    t: f64,
    s: &Statistic3,
    p: &ModelParams,
    cfg: &ResolvedConfig,
) -> Result<f64> {
    cfg.operator(p)?.apply_j(g, t, s)
}

/// `[J₀g](s)` for a single query.
pub fn apply_j0(
    g: &ValueFunction,
    s: &Statistic3,
    p: &ModelParams,
    cfg: &ResolvedConfig,
) -> Result<J0Result> {
    let op = cfg.operator(p)?;
    Ok(op.apply_j0(g, s, g.min_value(), &mut Scratch::default()))
}

fn sweep(op: &Operator, v: &ValueFunction) -> ValueFunction {
    let grid = v.grid().clone();
    let g_min = v.min_value();
    let prev = v.values();
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map_init(Scratch::default, |scratch, idx| {
            let s = grid.node_at(idx).ordered();
            let r = op.apply_j0(v, &s, g_min, scratch);
            r.value.min(prev[idx]).min(0.0)
        })
        .collect();
    ValueFunction::from_values(grid, values, v.iteration() + 1)
        .expect("sweep produces one finite nonpositive value per node")
}

/// One application of `J₀` at every grid node; nodes with `φ¹ > φ⁺` take the
/// value at `φ⁺ = φ¹`.
pub fn iterate(v: &ValueFunction, p: &ModelParams, cfg: &ResolvedConfig) -> Result<ValueFunction> {
    let op = cfg.operator(p)?;
    Ok(sweep(&op, v))
}

/// Boolean stop mask (`v ≥ −ε`) over the grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingRegionGrid {
    pub stop: Vec<bool>,
    pub iteration: usize,
}

impl StoppingRegionGrid {
    pub fn stop_count(&self) -> usize {
        self.stop.iter().filter(|b| **b).count()
    }

    /// Whether every stop node here is also a stop node of `earlier`.
    pub fn is_subset_of(&self, earlier: &StoppingRegionGrid) -> bool {
        self.stop
            .iter()
            .zip(earlier.stop.iter())
            .all(|(a, b)| !*a || *b)
    }
}

pub fn extract_region(v: &ValueFunction, eps: f64) -> StoppingRegionGrid {
    StoppingRegionGrid {
        stop: v.values().iter().map(|&x| x >= -eps).collect(),
        iteration: v.iteration(),
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub value: ValueFunction,
    /// `v₁, …, v_K` in order; the last entry equals `value`.
    pub stages: Vec<ValueFunction>,
    /// Stop regions of `v₀, v₁, …, v_K`.
    pub regions: Vec<StoppingRegionGrid>,
    /// `‖vₙ − vₙ₋₁‖∞` for `n = 1, …, K`.
    pub sup_history: Vec<f64>,
    pub elapsed: Duration,
    pub converged: bool,
    pub config: ResolvedConfig,
}

impl SolveOutput {
    pub fn iterations(&self) -> usize {
        self.stages.len()
    }

    /// Successive ratios `‖vₙ₊₁ − vₙ‖ / ‖vₙ − vₙ₋₁‖`, indexed by `n ≥ 1`.
    pub fn contraction_ratios(&self) -> Vec<(usize, f64)> {
        self.sup_history
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] > 0.0)
            .map(|(i, w)| (i + 1, w[1] / w[0]))
            .collect()
    }
}

/// Iterates from `v₀ = 0` until the sup-norm change drops to `ε_conv` or the
/// iteration cap is hit.
pub fn solve(p: &ModelParams, cfg: &SolverConfig) -> Result<SolveOutput> {
    let resolved = cfg.resolve(p)?;
    let start = Instant::now();
    let grid = Arc::new(resolved.build_grid()?);
    let op = resolved.operator(p)?;
    let mut v = ValueFunction::zero(grid);
    let mut stages = Vec::new();
    let mut regions = vec![extract_region(&v, resolved.eps_stop)];
    let mut sup_history = Vec::new();
    let mut converged = false;
    for n in 1..=resolved.max_iter {
        let next = sweep(&op, &v);
        let change = next.sup_distance(&v);
        log::debug!("iteration {n}: sup change {change:.3e}");
        sup_history.push(change);
        regions.push(extract_region(&next, resolved.eps_stop));
        stages.push(next.clone());
        v = next;
        if change <= resolved.eps_conv {
            converged = true;
            break;
        }
    }
    if !converged {
        let ratio = match sup_history.as_slice() {
            [.., a, b] if *a > 0.0 => b / a,
            _ => 0.0,
        };
        if ratio > 1.0 {
            return Err(Error::NonConvergence {
                iterations: sup_history.len(),
                last_change: *sup_history.last().unwrap_or(&0.0),
                ratio,
            });
        }
        log::warn!(
            "iteration cap {} reached before the sup change fell below {}",
            resolved.max_iter,
            resolved.eps_conv
        );
    }
    Ok(SolveOutput {
        value: v,
        stages,
        regions,
        sup_history,
        elapsed: start.elapsed(),
        converged,
        config: resolved,
    })
}

/// First time in `[0, limit]` at which `v(flow(t, s)) ≥ −threshold`, scanning
/// at step `dt` and refining by bisection to `dt/100`.
pub fn first_hit(
    v: &ValueFunction,
    s: &Statistic3,
    p: &ModelParams,
    threshold: f64,
    limit: f64,
    dt: f64,
) -> Option<f64> {
    let hit = |t: f64| {
        let q = FlowCoefficients::at(t, p).apply(s, p.lambda());
        v.eval(&q) >= -threshold
    };
    if hit(0.0) {
        return Some(0.0);
    }
    let mut prev = 0.0;
    let mut k = 1usize;
    loop {
        let t = (k as f64 * dt).min(limit);
        if hit(t) {
            return Some(bisect(hit, prev, t, dt / 100.0));
        }
        if t >= limit {
            return None;
        }
        prev = t;
        k += 1;
    }
}

/// `rₙ(s)`, the first time the flow from `s` enters `{v_next ≥ −max(ε_stop, ε)}`;
/// infinite if that never happens before `T_max`.
pub fn hitting_time_r(
    v_next: &ValueFunction,
    s: &Statistic3,
    eps: f64,
    p: &ModelParams,
    cfg: &ResolvedConfig,
) -> f64 {
    first_hit(v_next, s, p, cfg.eps_stop.max(eps), cfg.t_max, cfg.dt).unwrap_or(f64::INFINITY)
}
