//! Operator gallery: finite-difference Laplacians, Fourier odd-order
//! derivatives and the exact rank-one projection pair.
//!
//! Every builder returns an immutable [`OperatorHandle`] carrying the real
//! matrix, its grid, and enough metadata to export or compare it.

use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{GridSpec, LatticeVector, NodeScheme};
use crate::spectral::SpectralData;

/// Minimum node count accepted by the Laplacian builders.
pub const MIN_LAPLACIAN_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
    Antisymmetric,
    Periodic,
    NonlocalBeta(f64),
    NonlocalSymmetric,
}

impl BoundaryCondition {
    /// Interval the operator is defined on.
    pub fn default_interval(self) -> (f64, f64) {
        match self {
            BoundaryCondition::Antisymmetric => (-1.0, 1.0),
            BoundaryCondition::NonlocalBeta(_) => (0.0, PI),
            _ => (0.0, 1.0),
        }
    }

    /// Intervals accepted besides the default. Neumann and periodic also run
    /// on `(−1, 1)` so they can be compared with the anti-symmetric Laplacian.
    pub fn alternative_intervals(self) -> &'static [(f64, f64)] {
        match self {
            BoundaryCondition::Neumann | BoundaryCondition::Periodic => &[(-1.0, 1.0)],
            _ => &[],
        }
    }

    pub fn default_scheme(self) -> NodeScheme {
        match self {
            BoundaryCondition::Dirichlet => NodeScheme::InteriorOnly,
            BoundaryCondition::Antisymmetric | BoundaryCondition::Periodic => {
                NodeScheme::PeriodicLeftClosed
            }
            _ => NodeScheme::EndpointsIncluded,
        }
    }

    fn allows(self, scheme: NodeScheme) -> bool {
        use NodeScheme::*;
        match self {
            BoundaryCondition::Dirichlet => scheme == InteriorOnly,
            BoundaryCondition::Neumann => matches!(scheme, EndpointsIncluded | CellCentered),
            BoundaryCondition::Antisymmetric | BoundaryCondition::Periodic => {
                matches!(scheme, PeriodicLeftClosed | CellCentered)
            }
            BoundaryCondition::NonlocalBeta(_) | BoundaryCondition::NonlocalSymmetric => {
                scheme == EndpointsIncluded
            }
        }
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryCondition::Dirichlet => write!(f, "dirichlet"),
            BoundaryCondition::Neumann => write!(f, "neumann"),
            BoundaryCondition::Antisymmetric => write!(f, "antisymmetric"),
            BoundaryCondition::Periodic => write!(f, "periodic"),
            BoundaryCondition::NonlocalBeta(beta) => write!(f, "nonlocal_beta({beta})"),
            BoundaryCondition::NonlocalSymmetric => write!(f, "nonlocal_symmetric"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    FiniteDifference,
    FourierSpectral,
    ExactClosedForm,
}

/// Placement of an operator's own nodes inside a larger host grid.
///
/// Dirichlet operators live on interior nodes; comparisons with operators on
/// the closed grid zero-extend their outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub host: GridSpec,
    pub indices: Vec<usize>,
}

/// A continuum eigenvalue the discretization should approximate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactEigenvalue {
    pub value: Complex64,
    pub description: String,
}

#[derive(Debug, Clone)]
pub struct OperatorHandle {
    name: String,
    grid: GridSpec,
    matrix: DMatrix<f64>,
    symmetric: bool,
    exact_spectrum: Option<Vec<ExactEigenvalue>>,
    provenance: Provenance,
    boundary: Option<BoundaryCondition>,
    embedding: Option<Embedding>,
    pub(crate) spectrum: OnceLock<SpectralData>,
}

impl OperatorHandle {
    pub fn new(
        name: impl Into<String>,
        grid: GridSpec,
        matrix: DMatrix<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        if matrix.nrows() != grid.n() {
            return Err(Error::DimensionMismatch {
                expected: grid.n(),
                found: matrix.nrows(),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("matrix has non-finite entries".into()));
        }
        let symmetric = weighted_symmetric(&matrix, grid.weights());
        Ok(Self {
            name: name.into(),
            grid,
            matrix,
            symmetric,
            exact_spectrum: None,
            provenance,
            boundary: None,
            embedding: None,
            spectrum: OnceLock::new(),
        })
    }

    pub fn with_exact_spectrum(mut self, spectrum: Vec<ExactEigenvalue>) -> Self {
        self.exact_spectrum = Some(spectrum);
        self
    }

    pub fn with_boundary(mut self, bc: BoundaryCondition) -> Self {
        self.boundary = Some(bc);
        self
    }

    pub fn with_embedding(mut self, embedding: Embedding) -> Result<Self> {
        if embedding.indices.len() != self.grid.n()
            || embedding.indices.iter().any(|&i| i >= embedding.host.n())
        {
            return Err(Error::Precondition("embedding does not fit host grid".into()));
        }
        self.embedding = Some(embedding);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    /// Symmetric with respect to the quadrature-weighted inner product.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn exact_spectrum(&self) -> Option<&[ExactEigenvalue]> {
        self.exact_spectrum.as_deref()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn boundary(&self) -> Option<BoundaryCondition> {
        self.boundary
    }

    pub fn embedding(&self) -> Option<&Embedding> {
        self.embedding.as_ref()
    }

    /// Grid on which comparisons with other operators take place.
    pub fn host_grid(&self) -> &GridSpec {
        self.embedding.as_ref().map_or(&self.grid, |e| &e.host)
    }

    pub fn max_norm(&self) -> f64 {
        max_abs(&self.matrix)
    }

    /// `self + sigma·I`, keeping grid and embedding.
    pub fn shifted(&self, sigma: f64) -> OperatorHandle {
        let mut m = self.matrix.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += sigma;
        }
        OperatorHandle {
            name: if sigma == 0.0 {
                self.name.clone()
            } else {
                format!("{}{:+}", self.name, sigma)
            },
            grid: self.grid.clone(),
            matrix: m,
            symmetric: self.symmetric,
            exact_spectrum: self.exact_spectrum.as_ref().map(|s| {
                s.iter()
                    .map(|e| ExactEigenvalue {
                        value: e.value + sigma,
                        description: e.description.clone(),
                    })
                    .collect()
            }),
            provenance: self.provenance,
            boundary: self.boundary,
            embedding: self.embedding.clone(),
            spectrum: OnceLock::new(),
        }
    }

    /// Zero-extend an operator-sized matrix to the host grid (identity map without embedding).
    pub fn lift_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.embedding {
            None => m.clone(),
            Some(e) => {
                let mut out = DMatrix::zeros(e.host.n(), e.host.n());
                for (a, &i) in e.indices.iter().enumerate() {
                    for (b, &j) in e.indices.iter().enumerate() {
                        out[(i, j)] = m[(a, b)];
                    }
                }
                out
            }
        }
    }

    pub fn lift_vector(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.embedding {
            None => v.clone(),
            Some(e) => {
                let mut out = DVector::zeros(e.host.n());
                for (a, &i) in e.indices.iter().enumerate() {
                    out[i] = v[a];
                }
                out
            }
        }
    }

    pub fn restrict_vector(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.embedding {
            None => v.clone(),
            Some(e) => DVector::from_iterator(e.indices.len(), e.indices.iter().map(|&i| v[i])),
        }
    }
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// `‖W·M − Mᵀ·W‖_max < 1e−10·‖M‖_max`.
fn weighted_symmetric(m: &DMatrix<f64>, w: &[f64]) -> bool {
    let n = m.nrows();
    let scale = max_abs(m);
    if scale == 0.0 {
        return true;
    }
    let wmax = w.iter().fold(0.0f64, |a, &b| a.max(b));
    for i in 0..n {
        for j in (i + 1)..n {
            if (w[i] * m[(i, j)] - w[j] * m[(j, i)]).abs() >= 1e-10 * scale * wmax {
                return false;
            }
        }
    }
    true
}

fn check_interval(bc: BoundaryCondition, interval: Option<(f64, f64)>) -> Result<(f64, f64)> {
    let expected = bc.default_interval();
    let Some((a, b)) = interval else {
        return Ok(expected);
    };
    let same = |(x, y): (f64, f64)| (a - x).abs() <= 1e-12 && (b - y).abs() <= 1e-12;
    if same(expected) {
        return Ok(expected);
    }
    bc.alternative_intervals()
        .iter()
        .copied()
        .find(|&iv| same(iv))
        .ok_or(Error::UnsupportedInterval {
            operator: bc.to_string(),
            a,
            b,
            expected_a: expected.0,
            expected_b: expected.1,
        })
}

/// Second-order finite-difference Laplacian on the default grid for `bc`.
pub fn build_laplacian(
    bc: BoundaryCondition,
    interval: Option<(f64, f64)>,
    n: usize,
) -> Result<OperatorHandle> {
    build_laplacian_with_scheme(bc, interval, n, bc.default_scheme())
}

/// As [`build_laplacian`], with an explicit node scheme.
///
/// Neumann, anti-symmetric and periodic Laplacians also accept
/// [`NodeScheme::CellCentered`], which gives all three a common node set.
pub fn build_laplacian_with_scheme(
    bc: BoundaryCondition,
    interval: Option<(f64, f64)>,
    n: usize,
    scheme: NodeScheme,
) -> Result<OperatorHandle> {
    if n < MIN_LAPLACIAN_NODES {
        return Err(Error::TooFewNodes {
            n,
            min: MIN_LAPLACIAN_NODES,
        });
    }
    let (a, b) = check_interval(bc, interval)?;
    if !bc.allows(scheme) {
        return Err(Error::Precondition(format!(
            "{bc} cannot be discretized on a {} grid",
            scheme.name()
        )));
    }
    let grid = GridSpec::new(a, b, n, scheme)?;
    let h = grid.spacing();
    let inv_h2 = 1.0 / (h * h);

    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = -2.0 * inv_h2;
        if i > 0 {
            m[(i, i - 1)] = inv_h2;
        }
        if i + 1 < n {
            m[(i, i + 1)] = inv_h2;
        }
    }

    let len = b - a;
    let mut exact = Vec::new();
    match bc {
        BoundaryCondition::Dirichlet => {
            for k in 1..=6 {
                exact.push(eig(-(k as f64 * PI / len).powi(2), format!("k={k}")));
            }
        }
        BoundaryCondition::Neumann => {
            reflect_ends(&mut m, scheme, inv_h2);
            for k in 0..6 {
                exact.push(eig(-(k as f64 * PI / len).powi(2), format!("k={k}")));
            }
        }
        BoundaryCondition::Antisymmetric | BoundaryCondition::Periodic => {
            // Ghost values f(a−h) = ∓f(b−h) and f(b) = ∓f(a).
            let sign = if bc == BoundaryCondition::Antisymmetric {
                -1.0
            } else {
                1.0
            };
            m[(0, n - 1)] = sign * inv_h2;
            m[(n - 1, 0)] = sign * inv_h2;
            for k in 0..4 {
                let freq = if bc == BoundaryCondition::Antisymmetric {
                    (k as f64 + 0.5) * 2.0 * PI / len
                } else {
                    k as f64 * 2.0 * PI / len
                };
                let mult = if bc == BoundaryCondition::Periodic && k == 0 { 1 } else { 2 };
                for copy in 0..mult {
                    exact.push(eig(-freq * freq, format!("k={k} copy {copy}")));
                }
            }
        }
        BoundaryCondition::NonlocalBeta(beta) => {
            if !beta.is_finite() {
                return Err(Error::OutOfRange(format!("beta = {beta}")));
            }
            reflect_ends(&mut m, scheme, inv_h2);
            // f'(b) = β f(a): ghost f_n = f_{n-2} + 2hβ f_0.
            m[(n - 1, 0)] += 2.0 * beta / h;
            if beta == 0.0 {
                exact.push(eig(0.0, "constant mode".into()));
            } else if beta > -0.5 && beta < 0.0 {
                let mu = solve_transcendental_mu(beta)?;
                exact.push(eig(-mu * mu, "−μ² with μ sin(μπ) = −β".into()));
            }
        }
        BoundaryCondition::NonlocalSymmetric => {
            reflect_ends(&mut m, scheme, inv_h2);
            // f'(a) = −f'(b) = f(a) + f(b): ghosts f_{-1} = f_1 − 2hs, f_n = f_{n−2} − 2hs.
            let c = 2.0 / h;
            m[(0, 0)] -= c;
            m[(0, n - 1)] -= c;
            m[(n - 1, n - 1)] -= c;
            m[(n - 1, 0)] -= c;
        }
    }

    let mut op = OperatorHandle::new(bc.to_string(), grid, m, Provenance::FiniteDifference)?
        .with_boundary(bc);
    if !exact.is_empty() {
        op = op.with_exact_spectrum(exact);
    }
    if bc == BoundaryCondition::Dirichlet {
        let host = GridSpec::new(a, b, n + 2, NodeScheme::EndpointsIncluded)?;
        op = op.with_embedding(Embedding {
            host,
            indices: (1..=n).collect(),
        })?;
    }
    Ok(op)
}

fn eig(value: f64, description: String) -> ExactEigenvalue {
    ExactEigenvalue {
        value: Complex64::new(value, 0.0),
        description,
    }
}

/// Homogeneous Neumann ghost-node elimination at both ends.
fn reflect_ends(m: &mut DMatrix<f64>, scheme: NodeScheme, inv_h2: f64) {
    let n = m.nrows();
    match scheme {
        NodeScheme::CellCentered => {
            m[(0, 0)] = -inv_h2;
            m[(n - 1, n - 1)] = -inv_h2;
        }
        _ => {
            m[(0, 1)] = 2.0 * inv_h2;
            m[(n - 1, n - 2)] = 2.0 * inv_h2;
        }
    }
}

/// Fourier-spectral matrix of `d^{2k+1}/dx^{2k+1}` with periodic matching
/// conditions on `(0,1)`.
///
/// The Nyquist mode `(−1)ʲ` has no real odd-derivative symbol; it is given the
/// real symbol `−(πn)^{2k+1}`, which keeps the matrix real and the kernel
/// spanned by `𝟙` alone.
pub fn build_odd_order(k: u32, n: usize) -> Result<OperatorHandle> {
    if n % 2 == 1 {
        return Err(Error::OddNodeCount(n));
    }
    if n < 16 {
        return Err(Error::TooFewNodes { n, min: 16 });
    }
    let grid = GridSpec::new(0.0, 1.0, n, NodeScheme::PeriodicLeftClosed)?;
    let order = 2 * k as i32 + 1;
    let half = n / 2;
    let sign = if k % 2 == 0 { -1.0 } else { 1.0 };

    // Circulant first column: c_d = (1/n) Σ_m σ(m) e^{2πimd/n}, paired over ±m.
    let mut c = vec![0.0; n];
    for d in 1..half {
        let mut s = 0.0;
        for m in 1..half {
            let phase = 2.0 * PI * ((m * d) % n) as f64 / n as f64;
            s += sign * 2.0 * (2.0 * PI * m as f64).powi(order) * phase.sin();
        }
        c[d] = s / n as f64;
        c[n - d] = -c[d];
    }
    let nyquist = -(PI * n as f64).powi(order);
    let mut mat = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        for l in 0..n {
            let d = (j + n - l) % n;
            let alt = if d % 2 == 0 { 1.0 } else { -1.0 };
            mat[(j, l)] = c[d] + nyquist * alt / n as f64;
        }
    }

    let mut exact = Vec::with_capacity(n);
    let i_pow = Complex64::i().powi(order);
    for m in -(half as i64) + 1..half as i64 {
        let v = i_pow * (2.0 * PI * m as f64).powi(order);
        exact.push(ExactEigenvalue {
            value: v,
            description: format!("m={m}"),
        });
    }
    exact.push(eig(nyquist, "Nyquist mode (damped)".into()));

    Ok(
        OperatorHandle::new(format!("odd_order_{k}"), grid, mat, Provenance::FourierSpectral)?
            .with_exact_spectrum(exact),
    )
}

/// The rank-one pair `A = P_A − (3/2)·I`, `B = P_B − I` on `C[0,1]`.
#[derive(Debug, Clone)]
pub struct RankOneExampleBundle {
    pub space_grid: GridSpec,
    pub a: OperatorHandle,
    pub b: OperatorHandle,
    pub p_a: OperatorHandle,
    pub p_b: OperatorHandle,
    /// Density of `φ_A` (constant 1).
    pub phi_a: LatticeVector,
    /// Density of `φ_B` (`2x`).
    pub phi_b: LatticeVector,
}

pub fn build_rank_one_example(n: usize) -> Result<RankOneExampleBundle> {
    if n < 16 {
        return Err(Error::TooFewNodes { n, min: 16 });
    }
    let grid = GridSpec::new(0.0, 1.0, n, NodeScheme::EndpointsIncluded)?;
    let phi_a = LatticeVector::ones(&grid);
    let phi_b = LatticeVector::from_fn(&grid, |x| 2.0 * x);

    let rank_one = |phi: &LatticeVector| -> DMatrix<f64> {
        let row = phi.density_row();
        DMatrix::from_fn(n, n, |_, j| row[j])
    };
    let pa = rank_one(&phi_a);
    let pb = rank_one(&phi_b);
    let a = &pa - DMatrix::identity(n, n) * 1.5;
    let b = &pb - DMatrix::identity(n, n);

    let proj_spec = || vec![eig(1.0, "range 𝟙".into()), eig(0.0, "kernel of φ".into())];
    Ok(RankOneExampleBundle {
        p_a: OperatorHandle::new("P_A", grid.clone(), pa, Provenance::ExactClosedForm)?
            .with_exact_spectrum(proj_spec()),
        p_b: OperatorHandle::new("P_B", grid.clone(), pb, Provenance::ExactClosedForm)?
            .with_exact_spectrum(proj_spec()),
        a: OperatorHandle::new("rank_one_A", grid.clone(), a, Provenance::ExactClosedForm)?
            .with_exact_spectrum(vec![
                eig(-0.5, "range of P_A".into()),
                eig(-1.5, "kernel of φ_A".into()),
            ]),
        b: OperatorHandle::new("rank_one_B", grid.clone(), b, Provenance::ExactClosedForm)?
            .with_exact_spectrum(vec![
                eig(0.0, "range of P_B".into()),
                eig(-1.0, "kernel of φ_B".into()),
            ]),
        space_grid: grid,
        phi_a,
        phi_b,
    })
}

/// Samples `fₙ(x) = max(1 − n·x, 0)`.
pub fn test_function_fn(n_index: u32, grid: &GridSpec) -> Result<LatticeVector> {
    if n_index == 0 {
        return Err(Error::OutOfRange("fₙ needs n ≥ 1".into()));
    }
    let k = n_index as f64;
    Ok(LatticeVector::from_fn(grid, |x| (1.0 - k * x).max(0.0)))
}

/// Unique `μ ∈ (0, ½)` with `μ·sin(μπ) = −β`, by bisection to `1e−12`.
pub fn solve_transcendental_mu(beta: f64) -> Result<f64> {
    if !(beta > -0.5 && beta < 0.0) {
        return Err(Error::OutOfRange(format!(
            "beta = {beta} outside (−1/2, 0)"
        )));
    }
    let g = |mu: f64| mu * (mu * PI).sin() + beta;
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
