use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::statistic::Statistic3;

/// Strictly increasing node coordinates of one grid axis, starting at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    coords: Vec<f64>,
    #[serde(skip)]
    uniform_step: Option<f64>,
}

impl Axis {
    pub fn uniform(hi: f64, n: usize) -> Result<Self> {
        check_axis(hi, n)?;
        let step = hi / (n - 1) as f64;
        let mut coords: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
        coords[n - 1] = hi;
        Ok(Axis {
            coords,
            uniform_step: Some(step),
        })
    }

    /// Nodes `hi·(rⁱ − 1)/(r^{n−1} − 1)`, denser near zero for `r > 1`.
    pub fn geometric(hi: f64, n: usize, ratio: f64) -> Result<Self> {
        check_axis(hi, n)?;
        if !(ratio >= 1.0) || !ratio.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "geometric ratio must be at least 1, got {ratio}"
            )));
        }
        if ratio == 1.0 {
            return Self::uniform(hi, n);
        }
        let denom = ratio.powi(n as i32 - 1) - 1.0;
        let mut coords: Vec<f64> = (0..n)
            .map(|i| hi * (ratio.powi(i as i32) - 1.0) / denom)
            .collect();
        coords[n - 1] = hi;
        Self::from_coords(coords)
    }

    pub fn from_coords(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 || coords[0] != 0.0 {
            return Err(Error::InvalidConfig(
                "axis needs at least two nodes starting at 0".into(),
            ));
        }
        if coords.windows(2).any(|w| !(w[1] > w[0])) || !coords.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidConfig(
                "axis coordinates must be finite and strictly increasing".into(),
            ));
        }
        let n = coords.len();
        let step = coords[n - 1] / (n - 1) as f64;
        let uniform = coords
            .iter()
            .enumerate()
            .all(|(i, &c)| (c - i as f64 * step).abs() <= 1e-12 * coords[n - 1]);
        Ok(Axis {
            coords,
            uniform_step: uniform.then_some(step),
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn max(&self) -> f64 {
        self.coords[self.coords.len() - 1]
    }

    /// Largest gap between neighbouring nodes.
    pub fn max_step(&self) -> f64 {
        self.coords
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Cell index and fractional position of `v ∈ [0, max]`.
    #[inline]
    pub fn locate(&self, v: f64) -> (usize, f64) {
        let n = self.coords.len();
        let v = v.max(0.0);
        let i = match self.uniform_step {
            Some(step) => ((v / step) as usize).min(n - 2),
            None => self.coords.partition_point(|&c| c <= v).clamp(1, n - 1) - 1,
        };
        let lo = self.coords[i];
        let hi = self.coords[i + 1];
        (i, ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
    }

    fn rebuild(&mut self) {
        if let Ok(a) = Axis::from_coords(std::mem::take(&mut self.coords)) {
            *self = a;
        }
    }
}

fn check_axis(hi: f64, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "each axis needs at least 2 nodes, got {n}"
        )));
    }
    if !(hi > 0.0) || !hi.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "axis extent must be positive and finite, got {hi}"
        )));
    }
    Ok(())
}

/// Rectilinear grid over `(φ×, φ⁺, φ¹)`; node `(i, j, k)` is stored at
/// `(i·ny + j)·nz + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x: Axis,
    pub y: Axis,
    pub z: Axis,
}

impl Grid {
    pub fn new(x: Axis, y: Axis, z: Axis) -> Self {
        Grid { x, y, z }
    }

    /// Restores lookup acceleration after deserialization.
    pub fn reindexed(mut self) -> Self {
        self.x.rebuild();
        self.y.rebuild();
        self.z.rebuild();
        self
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.x.len(), self.y.len(), self.z.len()]
    }

    pub fn len(&self) -> usize {
        self.x.len() * self.y.len() * self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.y.len() + j) * self.z.len() + k
    }

    pub fn unindex(&self, idx: usize) -> (usize, usize, usize) {
        let nz = self.z.len();
        let ny = self.y.len();
        (idx / (ny * nz), (idx / nz) % ny, idx % nz)
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> Statistic3 {
        Statistic3 {
            phi_x: self.x.coords[i],
            phi_p: self.y.coords[j],
            phi_1: self.z.coords[k],
        }
    }

    pub fn node_at(&self, idx: usize) -> Statistic3 {
        let (i, j, k) = self.unindex(idx);
        self.node(i, j, k)
    }

    #[inline]
    pub fn contains(&self, s: &Statistic3) -> bool {
        s.phi_x <= self.x.max() && s.phi_p <= self.y.max() && s.phi_1 <= self.z.max()
    }

    /// Largest cell diagonal measured in the sum `φ× + φ⁺`.
    pub fn sum_cell(&self) -> f64 {
        self.x.max_step() + self.y.max_step()
    }
}

/// Nonpositive grid function with trilinear interpolation and value zero
/// beyond the grid extents.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
    iteration: usize,
}

impl ValueFunction {
    pub fn zero(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        ValueFunction {
            grid,
            values: vec![0.0; n],
            iteration: 0,
        }
    }

    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>, iteration: usize) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidConfig(format!(
                "value array has {} entries for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v > 0.0) {
            return Err(Error::InvalidConfig(
                "values must be finite and nonpositive".into(),
            ));
        }
        Ok(ValueFunction {
            grid,
            values,
            iteration,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn at_node(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, j, k)]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::min)
    }

    /// Maximum nodewise distance to another function on the same grid.
    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Trilinear interpolation; zero outside the grid box.
    #[inline]
    pub fn eval(&self, s: &Statistic3) -> f64 {
        let g = &*self.grid;
        if !g.contains(s) {
            return 0.0;
        }
        let (i, wx) = g.x.locate(s.phi_x);
        let (j, wy) = g.y.locate(s.phi_p);
        let (k, wz) = g.z.locate(s.phi_1);
        let nz = g.z.len();
        let ny = g.y.len();
        let v = &self.values;
        let base = (i * ny + j) * nz + k;
        let sx = ny * nz;
        let c000 = v[base];
        let c001 = v[base + 1];
        let c010 = v[base + nz];
        let c011 = v[base + nz + 1];
        let c100 = v[base + sx];
        let c101 = v[base + sx + 1];
        let c110 = v[base + sx + nz];
        let c111 = v[base + sx + nz + 1];
        let c00 = c000 + wz * (c001 - c000);
        let c01 = c010 + wz * (c011 - c010);
        let c10 = c100 + wz * (c101 - c100);
        let c11 = c110 + wz * (c111 - c110);
        let c0 = c00 + wy * (c01 - c00);
        let c1 = c10 + wy * (c11 - c10);
        c0 + wx * (c1 - c0)
    }
}
