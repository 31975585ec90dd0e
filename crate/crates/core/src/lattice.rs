//! Finite-dimensional lattice arithmetic on grid functions.
//!
//! The cone is the componentwise order on `ℝⁿ`. Functionals are identified
//! with grid functions through the quadrature-weighted pairing
//! `⟨φ, f⟩ = Σᵢ wᵢ φᵢ fᵢ`, so the dual space needs no separate type.
//!
//! Strict positivity with respect to a reference vector `u` ("`f ⪰ u`", i.e.
//! `f ≥ c·u` for some `c > 0`) cannot be certified in floating point, so it is
//! decided against an explicit margin `eps` and the raw margin is always
//! available through [`gauge`].

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default strict-positivity margin.
pub const DEFAULT_EPS: f64 = 1e-10;

/// Placement of the grid nodes inside `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeScheme {
    /// `a + i·h`, `i = 0..n`, `h = (b−a)/(n−1)`; trapezoid weights.
    EndpointsIncluded,
    /// `a + i·h`, `i = 1..=n`, `h = (b−a)/(n+1)`; uniform weights `(b−a)/n`.
    InteriorOnly,
    /// `a + i·h`, `i = 0..n`, `h = (b−a)/n`; uniform weights `h`.
    PeriodicLeftClosed,
    /// `a + (i+½)·h`, `i = 0..n`, `h = (b−a)/n`; midpoint weights `h`.
    CellCentered,
}

impl NodeScheme {
    pub fn name(self) -> &'static str {
        match self {
            NodeScheme::EndpointsIncluded => "endpoints_included",
            NodeScheme::InteriorOnly => "interior_only",
            NodeScheme::PeriodicLeftClosed => "periodic_left_closed",
            NodeScheme::CellCentered => "cell_centered",
        }
    }
}

/// One-dimensional grid geometry with quadrature weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    a: f64,
    b: f64,
    n: usize,
    node_scheme: NodeScheme,
    spacing: f64,
    weights: Vec<f64>,
}

impl GridSpec {
    pub fn new(a: f64, b: f64, n: usize, node_scheme: NodeScheme) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::InvalidGrid(format!("need finite a < b, got ({a}, {b})")));
        }
        let min = match node_scheme {
            NodeScheme::EndpointsIncluded => 2,
            _ => 1,
        };
        if n < min {
            return Err(Error::TooFewNodes { n, min });
        }
        let len = b - a;
        let (spacing, weights) = match node_scheme {
            NodeScheme::EndpointsIncluded => {
                let h = len / (n - 1) as f64;
                let mut w = vec![h; n];
                w[0] = 0.5 * h;
                w[n - 1] = 0.5 * h;
                (h, w)
            }
            NodeScheme::InteriorOnly => (len / (n + 1) as f64, vec![len / n as f64; n]),
            NodeScheme::PeriodicLeftClosed | NodeScheme::CellCentered => {
                let h = len / n as f64;
                (h, vec![h; n])
            }
        };
        Ok(Self {
            a,
            b,
            n,
            node_scheme,
            spacing,
            weights,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn node_scheme(&self) -> NodeScheme {
        self.node_scheme
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node(&self, i: usize) -> f64 {
        let h = self.spacing;
        match self.node_scheme {
            NodeScheme::EndpointsIncluded | NodeScheme::PeriodicLeftClosed => self.a + i as f64 * h,
            NodeScheme::InteriorOnly => self.a + (i + 1) as f64 * h,
            NodeScheme::CellCentered => self.a + (i as f64 + 0.5) * h,
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Index of the node closest to `x`.
    pub fn nearest_node(&self, x: f64) -> usize {
        (0..self.n)
            .min_by(|&i, &j| {
                (self.node(i) - x)
                    .abs()
                    .total_cmp(&(self.node(j) - x).abs())
            })
            .unwrap_or(0)
    }

    /// Same geometry (node placement), ignoring floating-point noise in derived fields.
    pub fn compatible(&self, other: &GridSpec) -> bool {
        self.n == other.n
            && self.node_scheme == other.node_scheme
            && (self.a - other.a).abs() <= 1e-14 * (1.0 + self.a.abs())
            && (self.b - other.b).abs() <= 1e-14 * (1.0 + self.b.abs())
    }

    pub fn ensure_compatible(&self, other: &GridSpec) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        if !self.compatible(other) {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Real grid function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeVector {
    grid: GridSpec,
    values: Vec<f64>,
}

impl LatticeVector {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::DimensionMismatch {
                expected: grid.n(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn constant(grid: &GridSpec, c: f64) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![c; grid.n()],
        }
    }

    pub fn ones(grid: &GridSpec) -> Self {
        Self::constant(grid, 1.0)
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn from_dvector(grid: &GridSpec, v: &DVector<f64>) -> Result<Self> {
        Self::new(grid.clone(), v.iter().copied().collect())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        self.map(|v| alpha * v)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.ensure_compatible(&other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Weighted pairing `⟨self, f⟩ = Σ wᵢ selfᵢ fᵢ`.
    pub fn pairing(&self, f: &Self) -> Result<f64> {
        self.grid.ensure_compatible(&f.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&f.values)
            .zip(self.grid.weights())
            .map(|((&p, &v), &w)| w * p * v)
            .sum())
    }

    /// Weighted density `w ∘ self`, i.e. the row vector representing the functional.
    pub fn density_row(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.values
                .iter()
                .zip(self.grid.weights())
                .map(|(&v, &w)| v * w),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `f ≥ 0` componentwise and `f ≠ 0`.
    pub fn is_positive_nonzero(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0) && self.values.iter().any(|&v| v > 0.0)
    }
}

/// Two-sided comparison of `f` against a strictly positive `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeResult {
    /// Largest `c` with `f ≥ c·u`.
    pub lower: f64,
    /// Gauge norm `‖f‖_u = maxᵢ |fᵢ|/uᵢ`.
    pub upper: f64,
    pub argmin_index: usize,
    pub argmax_index: usize,
}

fn check_reference(u: &[f64]) -> Result<()> {
    for (index, &value) in u.iter().enumerate() {
        if !(value > 0.0) {
            return Err(Error::NotStrictlyPositive { index, value });
        }
    }
    Ok(())
}

/// Gauge comparison on raw slices; `u` must be strictly positive.
pub fn gauge_slices(f: &[f64], u: &[f64]) -> Result<GaugeResult> {
    if f.len() != u.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: f.len(),
        });
    }
    check_reference(u)?;
    let mut res = GaugeResult {
        lower: f64::INFINITY,
        upper: 0.0,
        argmin_index: 0,
        argmax_index: 0,
    };
    for (i, (&fi, &ui)) in f.iter().zip(u).enumerate() {
        let ratio = fi / ui;
        if ratio < res.lower {
            res.lower = ratio;
            res.argmin_index = i;
        }
        let mag = fi.abs() / ui;
        if mag > res.upper {
            res.upper = mag;
            res.argmax_index = i;
        }
    }
    Ok(res)
}

pub fn gauge(f: &LatticeVector, u: &LatticeVector) -> Result<GaugeResult> {
    u.grid().ensure_compatible(f.grid())?;
    gauge_slices(f.values(), u.values())
}

/// `f ⪰ u` decided with margin `eps`.
pub fn strongly_positive(f: &LatticeVector, u: &LatticeVector, eps: f64) -> Result<bool> {
    Ok(gauge(f, u)?.lower > eps)
}

/// `g ≥ |f|` up to a hybrid relative/absolute tolerance.
pub fn dominates_vec(g: &LatticeVector, f: &LatticeVector, eps: f64) -> Result<bool> {
    g.grid().ensure_compatible(f.grid())?;
    Ok(dominates_slices(g.values(), f.values(), eps))
}

pub fn dominates_slices(g: &[f64], f: &[f64], eps: f64) -> bool {
    g.iter()
        .zip(f)
        .all(|(&gi, &fi)| gi >= fi.abs() - eps * fi.abs().max(1.0))
}
