use crate::error::{Error, Result};
use crate::model::dynamics::{jump_unchecked, Channel, FlowCoefficients};
use crate::model::params::ModelParams;
use crate::model::statistic::Statistic3;
use crate::solver::grid::ValueFunction;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Outcome of the one-stage minimization at a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct J0Result {
    pub value: f64,
    /// Earliest minimizer; `f64::INFINITY` when the minimum sits at the horizon.
    pub t_opt: f64,
}

#[derive(Debug, Clone, Copy)]
struct Row {
    g: f64,
    gg: f64,
    lgt: f64,
    l2t2: f64,
    lt: f64,
    disc: f64,
}

impl Row {
    #[inline]
    fn apply(&self, s: &Statistic3) -> Statistic3 {
        Statistic3 {
            phi_x: self.gg * s.phi_x + self.lgt * s.phi_p + self.l2t2,
            phi_p: self.g * s.phi_p + 2.0 * self.lt,
            phi_1: self.g * s.phi_1 + self.lt,
        }
    }
}

/// Per-thread work buffers for [`Operator::apply_j0`].
#[derive(Debug, Default)]
pub struct Scratch {
    floor: Vec<f64>,
    cumulative: Vec<f64>,
}

/// Discretized `J` and `J₀` on the time grid `{0, Δt, …, KΔt}` with the flow
/// coefficients tabulated once.
#[derive(Debug, Clone)]
pub struct Operator {
    params: ModelParams,
    dt: f64,
    steps: usize,
    rate: f64,
    table: Vec<Row>,
}

impl Operator {
    pub const QUERY_SUBSTEPS: usize = 4;

    pub fn new(p: &ModelParams, dt: f64, t_max: f64) -> Result<Self> {
        if !(dt > 0.0) || !(t_max >= 10.0 * dt) || !t_max.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "need Δt > 0 and T_max ≥ 10Δt, got Δt = {dt}, T_max = {t_max}"
            )));
        }
        let steps = (t_max / dt).ceil() as usize;
        let rate = p.rho() + 2.0 * p.beta();
        let l = p.lambda();
        let table = (0..=steps)
            .map(|k| {
                let t = k as f64 * dt;
                let c = FlowCoefficients::at(t, p);
                Row {
                    g: c.growth,
                    gg: c.growth * c.growth,
                    lgt: l * c.growth * c.drift,
                    l2t2: l * l * c.drift * c.drift,
                    lt: l * c.drift,
                    disc: (-rate * t).exp(),
                }
            })
            .collect();
        Ok(Operator {
            params: *p,
            dt,
            steps,
            rate,
            table,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Last time of the quadrature grid, standing in for `t = ∞`.
    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Flow of `s` to the `k`-th grid time.
    #[inline]
    pub fn flow_to(&self, k: usize, s: &Statistic3) -> Statistic3 {
        self.table[k].apply(s)
    }

    #[inline]
    fn undiscounted(&self, g: &ValueFunction, q: &Statistic3) -> f64 {
        let p = &self.params;
        let r = p.ratio();
        let h = q.phi_x + q.phi_p - p.kappa();
        let jumps = g.eval(&jump_unchecked(q, Channel::One, r))
            + g.eval(&jump_unchecked(q, Channel::Two, r));
        h + p.beta() * jumps
    }

    #[inline]
    fn integrand_at(&self, g: &ValueFunction, s: &Statistic3, t: f64) -> f64 {
        let q = FlowCoefficients::at(t, &self.params).apply(s, self.params.lambda());
        (-self.rate * t).exp() * self.undiscounted(g, &q)
    }

    /// `[Jg](t, s)`: corrected composite trapezoid over `[0, min(t, T_max)]`
    /// with each `Δt` panel split in [`Self::QUERY_SUBSTEPS`], since the
    /// interpolated payoff has kinks at every cell face the jumped path crosses.
    pub fn apply_j(&self, g: &ValueFunction, t: f64, s: &Statistic3) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::NegativeTime(t));
        }
        let end = t.min(self.horizon());
        if end == 0.0 {
            return Ok(0.0);
        }
        let n = ((end / self.dt).ceil() as usize * Self::QUERY_SUBSTEPS).max(2);
        let h = end / n as f64;
        let f: Vec<f64> = (0..=n)
            .map(|i| self.integrand_at(g, s, if i == n { end } else { i as f64 * h }))
            .collect();
        Ok(corrected_trapezoid(&f, h))
    }

    /// `[J₀g](s) = inf_{t ≥ 0} [Jg](t, s)`, using `g_min ≤ min g` to cut the
    /// scan once no later time can beat the running minimum.
    pub fn apply_j0(
        &self,
        g: &ValueFunction,
        s: &Statistic3,
        g_min: f64,
        scratch: &mut Scratch,
    ) -> J0Result {
        let p = &self.params;
        let kappa = p.kappa();
        let beta = p.beta();
        let dt = self.dt;
        let kk = self.steps;

        // Suffix minima of the running cost bound every later integrand.
        let floor = &mut scratch.floor;
        floor.clear();
        floor.resize(kk + 1, 0.0);
        let mut m = f64::INFINITY;
        for k in (0..=kk).rev() {
            let q = self.table[k].apply(s);
            m = m.min(q.phi_x + q.phi_p - kappa);
            floor[k] = m + 2.0 * beta * g_min;
        }

        let cumulative = &mut scratch.cumulative;
        cumulative.clear();
        cumulative.resize(kk + 1, 0.0);

        let f0 = self.undiscounted(g, s);
        let f1 = self.table[1].disc * self.undiscounted(g, &self.table[1].apply(s));
        let mut fm2 = f0;
        let mut fm1 = f1;
        let mut trap = 0.5 * dt * (f0 + f1);
        let mut d0 = 0.0;
        let mut best = 0.0;
        let mut best_k = 0usize;

        for k in 2..=kk {
            let row = &self.table[k];
            let fk = row.disc * self.undiscounted(g, &row.apply(s));
            if k == 2 {
                d0 = -3.0 * f0 + 4.0 * f1 - fk;
                let j1 = 0.5 * dt * (f0 + f1) - dt / 24.0 * ((fk - f0) - d0);
                cumulative[1] = j1;
                if j1 < best {
                    best = j1;
                    best_k = 1;
                }
            }
            trap += 0.5 * dt * (fm1 + fk);
            let jk = trap - dt / 24.0 * ((3.0 * fk - 4.0 * fm1 + fm2) - d0);
            cumulative[k] = jk;
            if jk < best {
                best = jk;
                best_k = k;
            }
            let fl = floor[k];
            let lower = if fl >= 0.0 { 0.0 } else { fl * row.disc / self.rate };
            if jk + lower > best {
                break;
            }
            fm2 = fm1;
            fm1 = fk;
        }

        // A negative integrand at zero puts the infimum strictly inside the first
        // cell even when no grid time beats zero.
        if best_k == 0 && f0 >= 0.0 {
            return J0Result {
                value: 0.0,
                t_opt: 0.0,
            };
        }
        if best_k == kk {
            return J0Result {
                value: best.min(0.0),
                t_opt: f64::INFINITY,
            };
        }

        // Golden-section refinement on the two cells around the grid minimizer.
        let lo = self.time(best_k.saturating_sub(1));
        let hi = self.time((best_k + 1).min(kk));
        let base = cumulative[best_k.saturating_sub(1)];
        let f_lo = self.integrand_at(g, s, lo);
        let partial = |t: f64| -> f64 {
            let mid = 0.5 * (lo + t);
            base + (t - lo) / 6.0
                * (f_lo + 4.0 * self.integrand_at(g, s, mid) + self.integrand_at(g, s, t))
        };
        let tol = dt / 100.0;
        let (mut a, mut b) = (lo, hi);
        let mut c = b - GOLDEN * (b - a);
        let mut d = a + GOLDEN * (b - a);
        let mut fc = partial(c);
        let mut fd = partial(d);
        while b - a > tol {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - GOLDEN * (b - a);
                fc = partial(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + GOLDEN * (b - a);
                fd = partial(d);
            }
        }
        let (tg, vg) = if fc <= fd { (c, fc) } else { (d, fd) };
        let (value, t_opt) = if vg < best {
            (vg, tg)
        } else {
            (best, self.time(best_k))
        };
        J0Result {
            value: value.min(0.0),
            t_opt,
        }
    }
}

/// Composite trapezoid on equally spaced samples with the second-order
/// Euler–Maclaurin end correction (one-sided difference quotients).
fn corrected_trapezoid(f: &[f64], h: f64) -> f64 {
    let n = f.len() - 1;
    let inner: f64 = f[1..n].iter().sum();
    let trap = h * (0.5 * (f[0] + f[n]) + inner);
    if n < 2 {
        return trap;
    }
    let d_start = -3.0 * f[0] + 4.0 * f[1] - f[2];
    let d_end = 3.0 * f[n] - 4.0 * f[n - 1] + f[n - 2];
    trap - h / 24.0 * (d_end - d_start)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corrected_trapezoid_is_exact_for_quadratics() {
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t;
        let n = 10;
        let h = 0.3;
        let samples: Vec<f64> = (0..=n).map(|i| f(i as f64 * h)).collect();
        let end = n as f64 * h;
        let exact = end - end * end + end * end * end / 6.0;
        assert!((corrected_trapezoid(&samples, h) - exact).abs() < 1e-12);

        let g = |t: f64| (-3.0 * t).exp();
        let samples: Vec<f64> = (0..=200).map(|i| g(i as f64 * 0.01)).collect();
        let exact = (1.0 - (-6.0f64).exp()) / 3.0;
        assert!((corrected_trapezoid(&samples, 0.01) - exact).abs() < 1e-8);
    }
}
