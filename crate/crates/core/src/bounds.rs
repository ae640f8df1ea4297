//! Case taxonomy, analytic supersets of the continuation region and the
//! deterministic lower bound on the value.
//!
//! Jumps never lower `(φ×, φ⁺)` when `α ≥ β`, so the discounted cost along
//! the jump-free path bounds the stopping value from below. Each case below
//! turns that observation into a region where stopping at once is optimal.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::dynamics::flow_coefficients;
use crate::model::params::ModelParams;
use crate::model::statistic::{Statistic3, FEASIBILITY_SLACK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseTag {
    CaseI,
    CaseIIa,
    CaseIIbi1,
    CaseIIbi2,
    CaseIIbii1,
    CaseIIbii2,
    CaseIII,
}

impl CaseTag {
    pub fn label(self) -> &'static str {
        match self {
            CaseTag::CaseI => "I",
            CaseTag::CaseIIa => "II-a",
            CaseTag::CaseIIbi1 => "II-b-i-1",
            CaseTag::CaseIIbi2 => "II-b-i-2",
            CaseTag::CaseIIbii1 => "II-b-ii-1",
            CaseTag::CaseIIbii2 => "II-b-ii-2",
            CaseTag::CaseIII => "III",
        }
    }

    /// Cases in which the advantageous region is the exact continuation region.
    pub fn advantageous_is_exact(self) -> bool {
        matches!(
            self,
            CaseTag::CaseI | CaseTag::CaseIIbi1 | CaseTag::CaseIIbii1
        )
    }

    pub fn has_curve(self) -> bool {
        matches!(self, CaseTag::CaseIIbi2 | CaseTag::CaseIIbii2)
    }
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Case {}", self.label())
    }
}

/// `λ²/a² − 2λ/a`, the sum coordinate of the flow's fixed point when `a < 0`.
pub fn mean_reversion_sum(p: &ModelParams) -> f64 {
    let (l, a) = (p.lambda(), p.a());
    l * l / (a * a) - 2.0 * l / a
}

pub fn classify_case(p: &ModelParams) -> CaseTag {
    if p.alpha() < p.beta() {
        return CaseTag::CaseIII;
    }
    let a = p.a();
    if a >= 0.0 {
        return CaseTag::CaseI;
    }
    let kappa = p.kappa();
    if mean_reversion_sum(p) <= kappa {
        return CaseTag::CaseIIa;
    }
    let second = a * kappa + p.lambda() < 0.0;
    match (p.lambda() + a <= 0.0, second) {
        (true, false) => CaseTag::CaseIIbi1,
        (true, true) => CaseTag::CaseIIbi2,
        (false, false) => CaseTag::CaseIIbii1,
        (false, true) => CaseTag::CaseIIbii2,
    }
}

/// Closed advantageous region `φ× + φ⁺ ≤ κ`.
pub fn in_advantageous(s: &Statistic3, p: &ModelParams) -> bool {
    s.sum() <= p.kappa()
}

fn ensure_planar_feasible(phi0: f64, phi1: f64) -> Result<()> {
    let tol = FEASIBILITY_SLACK * phi1.abs().max(1.0);
    if phi0.is_finite() && phi1.is_finite() && phi0 >= -tol && phi1 + tol >= 2.0 * phi0.max(0.0).sqrt()
    {
        Ok(())
    } else {
        Err(Error::InfeasibleState {
            phi_x: phi0,
            phi_p: phi1,
            phi_1: 0.0,
        })
    }
}

// Eight-point Gauss–Legendre rule on [-1, 1].
const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut acc = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
        acc += w * (f(mid - half * x) + f(mid + half * x));
    }
    acc * half
}

/// Jump-free path of `(φ×, φ⁺)` started at `(φ₀, φ₁)`.
#[derive(Debug, Clone, Copy)]
struct PlanarPath {
    x0: f64,
    y0: f64,
    lambda: f64,
    a: f64,
    cutoff: f64,
    kappa: f64,
}

impl PlanarPath {
    fn new(phi0: f64, phi1: f64, p: &ModelParams) -> Self {
        PlanarPath {
            x0: phi0,
            y0: phi1,
            lambda: p.lambda(),
            a: p.a(),
            cutoff: p.a_cutoff(),
            kappa: p.kappa(),
        }
    }

    fn at(&self, t: f64) -> (f64, f64) {
        let c = flow_coefficients(t, self.a, self.cutoff);
        let (g, tt, l) = (c.growth, c.drift, self.lambda);
        (
            g * g * self.x0 + l * g * tt * self.y0 + l * l * tt * tt,
            g * self.y0 + 2.0 * l * tt,
        )
    }

    fn excess(&self, t: f64) -> f64 {
        let (x, y) = self.at(t);
        x + y - self.kappa
    }

    /// Characteristic time scale used to lay out search and quadrature grids.
    fn scale(&self, rate: f64) -> f64 {
        1.0 / (rate + self.a.abs() + self.lambda)
    }

    /// `∫₀ᵗ e^{−rate·s}(x + y − κ) ds` on geometrically growing panels.
    fn cost_integral(&self, t: f64, rate: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let f = |s: f64| (-rate * s).exp() * self.excess(s);
        let mut width = 0.05 * self.scale(rate);
        let mut lo = 0.0;
        let mut acc = 0.0;
        while lo < t {
            let hi = (lo + width).min(t);
            acc += gauss_legendre(&f, lo, hi);
            lo = hi;
            width *= 1.25;
        }
        acc
    }

    /// Value of the integral over `[0, ∞)`; infinite when the discount fails to
    /// dominate the growth of the path.
    fn cost_integral_infinite(&self, rate: f64) -> f64 {
        if self.a >= 0.0 && rate <= 2.0 * self.a {
            return f64::INFINITY;
        }
        let decay = if self.a < 0.0 { rate } else { rate - 2.0 * self.a };
        let horizon = 45.0 / decay + 45.0 * self.scale(rate);
        let body = self.cost_integral(horizon, rate);
        let tail = if self.a < 0.0 {
            let l = self.lambda;
            let m = l * l / (self.a * self.a) - 2.0 * l / self.a;
            (m - self.kappa) * (-rate * horizon).exp() / rate
        } else {
            0.0
        };
        body + tail
    }

    /// Times at which `x + y` crosses `κ` from below, in increasing order.
    fn upward_crossings(&self, rate: f64) -> Vec<f64> {
        let scale = self.scale(rate);
        let end = 80.0 / (self.a.abs().max(1e-3 * (rate + self.lambda))) + 80.0 * scale;
        let mut times = vec![0.0];
        let mut t = 1e-4 * scale;
        while t < end {
            times.push(t);
            t *= 1.02;
        }
        times.push(end);
        let mut out = Vec::new();
        let mut prev_t = times[0];
        let mut prev = self.excess(prev_t);
        for &t in &times[1..] {
            let cur = self.excess(t);
            if prev < 0.0 && cur >= 0.0 {
                out.push(bisect(|s| self.excess(s) >= 0.0, prev_t, t, 1e-15 * t.max(1.0)));
            }
            prev_t = t;
            prev = cur;
        }
        out
    }
}

/// Smallest point of `[lo, hi]` where the monotone predicate switches to true,
/// assuming `pred(lo)` is false and `pred(hi)` true.
pub(crate) fn bisect<P: Fn(f64) -> bool>(pred: P, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Result of minimizing the discounted cost along the jump-free path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeterministicInfimum {
    pub value: f64,
    /// Earliest minimizer; `f64::INFINITY` when the infimum is approached only
    /// as `t → ∞`.
    pub t_opt: f64,
}

/// `inf_{t ∈ [0, ∞]} ∫₀ᵗ e^{−ρs}(x(s) + y(s) − κ) ds` from `(φ₀, φ₁)`.
pub fn deterministic_infimum(phi0: f64, phi1: f64, p: &ModelParams) -> Result<DeterministicInfimum> {
    deterministic_infimum_discounted(phi0, phi1, p, p.rho())
}

/// As [`deterministic_infimum`] with an arbitrary discount rate.
pub fn deterministic_infimum_discounted(
    phi0: f64,
    phi1: f64,
    p: &ModelParams,
    rate: f64,
) -> Result<DeterministicInfimum> {
    ensure_planar_feasible(phi0, phi1)?;
    let path = PlanarPath::new(phi0.max(0.0), phi1, p);
    let mut best = DeterministicInfimum {
        value: 0.0,
        t_opt: 0.0,
    };
    for t in path.upward_crossings(rate) {
        let v = path.cost_integral(t, rate);
        if v < best.value {
            best = DeterministicInfimum { value: v, t_opt: t };
        }
    }
    let tail = path.cost_integral_infinite(rate);
    if tail < best.value {
        best = DeterministicInfimum {
            value: tail,
            t_opt: f64::INFINITY,
        };
    }
    best.value = best.value.min(0.0);
    Ok(best)
}

/// Coefficients of the affine form `c₀φ₀ + c₁φ₁ + k` equal to the full
/// discounted cost `∫₀^∞ e^{−ρs} h ds` when `a < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct D0Coefficients {
    pub c0: f64,
    pub c1: f64,
    pub k: f64,
}

impl D0Coefficients {
    pub fn for_params(p: &ModelParams) -> Self {
        let (l, a, rho, kappa) = (p.lambda(), p.a(), p.rho(), p.kappa());
        let r1 = rho - a;
        let r2 = rho - 2.0 * a;
        D0Coefficients {
            c0: 1.0 / r2,
            c1: (r2 + l) / (r1 * r2),
            k: -kappa / rho + 2.0 * l / (rho * r1) + 2.0 * l * l / (rho * r1 * r2),
        }
    }

    pub fn eval(&self, phi0: f64, phi1: f64) -> f64 {
        self.c0 * phi0 + self.c1 * phi1 + self.k
    }
}

/// The affine functional whose positivity, outside the advantageous region,
/// certifies stopping in Case II-a.
pub fn d0_functional(phi0: f64, phi1: f64, p: &ModelParams) -> Result<f64> {
    let case = classify_case(p);
    if case != CaseTag::CaseIIa {
        return Err(Error::CaseMismatch {
            expected: "Case II-a",
            actual: case,
        });
    }
    Ok(D0Coefficients::for_params(p).eval(phi0, phi1))
}

/// Tangency data of the curve bounding the stopping superset in Cases
/// II-b-i-2 and II-b-ii-2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveC1 {
    /// Intersection `I` of the sum level `κ` with the line where the sum is
    /// stationary along the flow.
    pub x_i: f64,
    pub y_i: f64,
    /// Time for the path from `(x*, 0)` to reach `I`.
    pub t_star: f64,
    pub x_star: f64,
}

impl CurveC1 {
    /// Point of the tangent path at parameter `t ∈ [0, t*]`.
    pub fn path_at(&self, t: f64, p: &ModelParams) -> (f64, f64) {
        PlanarPath::new(self.x_star, 0.0, p).at(t)
    }

    /// Ordinate of the tangent path over abscissa `x ∈ [x_I, x*]`.
    pub fn ordinate(&self, x: f64, p: &ModelParams) -> f64 {
        let path = PlanarPath::new(self.x_star, 0.0, p);
        if x >= self.x_star {
            return 0.0;
        }
        if x <= self.x_i {
            return self.y_i;
        }
        let t = bisect(|t| path.at(t).0 <= x, 0.0, self.t_star, 1e-14 * self.t_star.max(1.0));
        path.at(t).1
    }

    /// Samples of the tangent path from `(x*, 0)` to `I`.
    pub fn samples(&self, n: usize, p: &ModelParams) -> Vec<(f64, f64)> {
        let n = n.max(2);
        (0..n)
            .map(|i| self.path_at(self.t_star * i as f64 / (n - 1) as f64, p))
            .collect()
    }
}

pub fn curve_c1(p: &ModelParams) -> Result<CurveC1> {
    let case = classify_case(p);
    if !case.has_curve() {
        return Err(Error::CaseMismatch {
            expected: "Case II-b-i-2 or II-b-ii-2",
            actual: case,
        });
    }
    let (l, a, kappa) = (p.lambda(), p.a(), p.kappa());
    let y_i = -2.0 * (a * kappa + l) / (l - a);
    let x_i = kappa - y_i;
    let inner = a * y_i + 2.0 * l;
    if !(inner > 0.0) || x_i < 0.0 {
        return Err(Error::CaseMismatch {
            expected: "an intersection reachable from the φ⁺ = 0 axis",
            actual: case,
        });
    }
    let t_star = -(2.0 * l / inner).ln() / a;
    let back = crate::model::dynamics::flow_signed(
        -t_star,
        &Statistic3 {
            phi_x: x_i,
            phi_p: y_i,
            phi_1: 0.0,
        },
        p,
    );
    Ok(CurveC1 {
        x_i,
        y_i,
        t_star,
        x_star: back.phi_x,
    })
}

const CURVE_ORDINATE_TOL: f64 = 1e-9;

/// Membership in the analytic subset of the stopping region for the case of
/// `p`. `true` guarantees that the optimal value at `s` is zero.
pub fn stopping_superset_contains(s: &Statistic3, p: &ModelParams) -> bool {
    Certifier::new(p).contains(s)
}

/// Case-dispatched certificate with the case data computed once.
#[derive(Debug, Clone)]
pub struct Certifier {
    params: ModelParams,
    case: CaseTag,
    d0: Option<D0Coefficients>,
    curve: Option<CurveC1>,
}

impl Certifier {
    pub fn new(p: &ModelParams) -> Self {
        let case = classify_case(p);
        Certifier {
            params: *p,
            case,
            d0: (case == CaseTag::CaseIIa).then(|| D0Coefficients::for_params(p)),
            curve: if case.has_curve() { curve_c1(p).ok() } else { None },
        }
    }

    pub fn case(&self) -> CaseTag {
        self.case
    }

    pub fn contains(&self, s: &Statistic3) -> bool {
        let p = &self.params;
        let kappa = p.kappa();
        let (x, y) = (s.phi_x, s.phi_p);
        let sum = x + y;
        if sum <= kappa {
            return false;
        }
        match self.case {
            CaseTag::CaseI | CaseTag::CaseIIbi1 | CaseTag::CaseIIbii1 => true,
            CaseTag::CaseIII => sum >= kappa + 2.0 * p.beta() / p.c(),
            CaseTag::CaseIIa => self.d0.map(|d| d.eval(x, y) > 0.0).unwrap_or(false),
            CaseTag::CaseIIbi2 | CaseTag::CaseIIbii2 => match self.curve {
                Some(curve) => {
                    if x >= curve.x_star {
                        true
                    } else if x < curve.x_i {
                        sum > kappa + CURVE_ORDINATE_TOL
                    } else {
                        y > curve.ordinate(x, p) + CURVE_ORDINATE_TOL
                    }
                }
                None => false,
            },
        }
    }
}

/// Axis-aligned box containing the continuation region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    /// Bound on `φ× + φ⁺` over the continuation region, before the margin.
    pub sum_bound: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub z_max: f64,
}

impl BoundingBox {
    pub const MARGIN: f64 = 1.1;

    fn from_sum(sum_bound: f64) -> Self {
        let b = Self::MARGIN * sum_bound;
        // The solver works on the ordered cone, where φ× alone can approach the
        // sum bound.
        BoundingBox {
            sum_bound,
            x_max: b,
            y_max: b,
            z_max: b,
        }
    }

    pub fn contains(&self, s: &Statistic3) -> bool {
        s.phi_x <= self.x_max && s.phi_p <= self.y_max && s.phi_1 <= self.z_max
    }
}

pub fn continuation_bounding_box(p: &ModelParams) -> BoundingBox {
    let kappa = p.kappa();
    let sum_bound = match classify_case(p) {
        CaseTag::CaseI | CaseTag::CaseIIbi1 | CaseTag::CaseIIbii1 => kappa,
        CaseTag::CaseIII => kappa + 2.0 * p.beta() / p.c(),
        CaseTag::CaseIIa => {
            let d = D0Coefficients::for_params(p);
            if d.k < 0.0 {
                kappa.max(-d.k / d.c0).max(-d.k / d.c1)
            } else {
                kappa
            }
        }
        CaseTag::CaseIIbi2 | CaseTag::CaseIIbii2 => match curve_c1(p) {
            Ok(curve) => curve
                .samples(2001, p)
                .into_iter()
                .map(|(x, y)| x + y)
                .fold(kappa.max(curve.x_star), f64::max),
            // Unreachable for valid parameters; fall back to the sum at the
            // fixed point, above which the flow only decreases toward it.
            Err(_) => kappa.max(mean_reversion_sum(p)),
        },
    };
    BoundingBox::from_sum(sum_bound)
}

/// Summary of the analytic region data for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub case: CaseTag,
    pub kappa: f64,
    pub rho: f64,
    pub mean_reversion: Option<[f64; 2]>,
    pub intersection: Option<[f64; 2]>,
    pub t_star: Option<f64>,
    pub x_star: Option<f64>,
    pub d0: Option<D0Coefficients>,
    pub bounding_box: BoundingBox,
}

pub fn region_report(p: &ModelParams) -> RegionReport {
    let case = classify_case(p);
    let (l, a) = (p.lambda(), p.a());
    let curve = if case.has_curve() { curve_c1(p).ok() } else { None };
    RegionReport {
        case,
        kappa: p.kappa(),
        rho: p.rho(),
        mean_reversion: (a < 0.0).then(|| [l * l / (a * a), -2.0 * l / a]),
        intersection: curve.map(|c| [c.x_i, c.y_i]),
        t_star: curve.map(|c| c.t_star),
        x_star: curve.map(|c| c.x_star),
        d0: (case == CaseTag::CaseIIa).then(|| D0Coefficients::for_params(p)),
        bounding_box: continuation_bounding_box(p),
    }
}

/// Samples `(φ×, φ⁺)` of the lower boundary of the certified stopping set,
/// restricted to feasible points.
pub fn boundary_polyline(p: &ModelParams, n: usize) -> Vec<(f64, f64)> {
    let n = n.max(2);
    let kappa = p.kappa();
    let level_line = |level: f64| -> Vec<(f64, f64)> {
        let r = (1.0 + level).sqrt() - 1.0;
        let x_end = r * r;
        (0..n)
            .map(|i| {
                let x = x_end * i as f64 / (n - 1) as f64;
                (x, level - x)
            })
            .collect()
    };
    let feasible = |&(x, y): &(f64, f64)| y + 1e-12 >= 2.0 * x.max(0.0).sqrt();
    let pts: Vec<(f64, f64)> = match classify_case(p) {
        CaseTag::CaseI | CaseTag::CaseIIbi1 | CaseTag::CaseIIbii1 => level_line(kappa),
        CaseTag::CaseIII => level_line(kappa + 2.0 * p.beta() / p.c()),
        CaseTag::CaseIIa => {
            let d = D0Coefficients::for_params(p);
            let x_end = continuation_bounding_box(p).x_max;
            (0..n)
                .map(|i| {
                    let x = x_end * i as f64 / (n - 1) as f64;
                    (x, (kappa - x).max((-d.k - d.c0 * x) / d.c1))
                })
                .collect()
        }
        CaseTag::CaseIIbi2 | CaseTag::CaseIIbii2 => match curve_c1(p) {
            Ok(curve) => {
                let mut v: Vec<(f64, f64)> = (0..n)
                    .map(|i| {
                        let x = curve.x_i * i as f64 / (n - 1) as f64;
                        (x, kappa - x)
                    })
                    .collect();
                let mut tail = curve.samples(n, p);
                tail.reverse();
                v.extend(tail.into_iter().skip(1));
                v
            }
            Err(_) => level_line(kappa),
        },
    };
    pts.into_iter().filter(feasible).collect()
}
