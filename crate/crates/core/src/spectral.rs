//! Dense spectral analysis: spectral bound, dominant eigenvalue, spectral and
//! mean-ergodic projections with a pole-order estimate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gallery::{max_abs, OperatorHandle};

/// Relative threshold for the rank tests behind pole-order estimates.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SpectralData {
    /// Sorted by real part descending, then imaginary part ascending.
    pub eigenvalues: Vec<Complex64>,
    /// Column `k` belongs to `eigenvalues[k]`.
    pub right_eigenvectors: DMatrix<Complex64>,
    pub spectral_bound: f64,
    pub dominant: bool,
    /// `s(A)` minus the largest real part among the remaining eigenvalues.
    pub gap: f64,
    pub symmetric_path: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionData {
    pub lambda0: f64,
    #[serde(skip)]
    pub p: DMatrix<f64>,
    pub algebraic_multiplicity: usize,
    pub pole_order_estimate: usize,
    pub rank: usize,
}

pub(crate) fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn sort_key(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im))
}

/// Default clustering tolerance `1e−6·max(1, ‖A‖_max)`.
pub fn default_cluster_tol(op: &OperatorHandle) -> f64 {
    1e-6 * op.max_norm().max(1.0)
}

/// Full eigendecomposition, cached on the handle.
pub fn analyze(op: &OperatorHandle) -> Result<&SpectralData> {
    if let Some(d) = op.spectrum.get() {
        return Ok(d);
    }
    let data = compute_spectrum(op)?;
    Ok(op.spectrum.get_or_init(|| data))
}

fn compute_spectrum(op: &OperatorHandle) -> Result<SpectralData> {
    let m = op.matrix();
    let n = m.nrows();
    let (mut pairs, symmetric_path): (Vec<(Complex64, DVector<Complex64>)>, bool) =
        if op.is_symmetric() {
            let (vals, q) = symmetric_eigen(op)?;
            let sq: Vec<f64> = op.grid().weights().iter().map(|w| w.sqrt()).collect();
            let pairs = (0..n)
                .map(|k| {
                    let v = DVector::from_fn(n, |i, _| Complex64::new(q[(i, k)] / sq[i], 0.0));
                    (Complex64::new(vals[k], 0.0), v)
                })
                .collect();
            (pairs, true)
        } else {
            let (vals, vecs) = general_eigen(m)?;
            let pairs = (0..n)
                .map(|k| (vals[k], vecs.column(k).into_owned()))
                .collect();
            (pairs, false)
        };

    if !symmetric_path {
        check_conjugate_pairs(&pairs.iter().map(|p| p.0).collect::<Vec<_>>(), op.max_norm())?;
    }
    pairs.sort_by(|a, b| sort_key(&a.0, &b.0));
    let eigenvalues: Vec<Complex64> = pairs.iter().map(|p| p.0).collect();
    let right_eigenvectors = DMatrix::from_fn(n, n, |i, k| pairs[k].1[i]);

    let spectral_bound = eigenvalues[0].re;
    let tol = default_cluster_tol(op);
    let top = eigenvalues
        .iter()
        .filter(|z| z.re > spectral_bound - tol)
        .count();
    let gap = if n > 1 {
        spectral_bound - eigenvalues[1].re
    } else {
        f64::INFINITY
    };
    Ok(SpectralData {
        eigenvalues,
        right_eigenvectors,
        spectral_bound,
        dominant: top == 1,
        gap,
        symmetric_path,
    })
}

/// Eigenpairs of `W^{1/2} M W^{−1/2}` (ascending eigenvalues, orthonormal columns).
fn symmetric_eigen(op: &OperatorHandle) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let m = op.matrix();
    let n = m.nrows();
    let sq: Vec<f64> = op.grid().weights().iter().map(|w| w.sqrt()).collect();
    let s = faer::Mat::<f64>::from_fn(n, n, |i, j| {
        let a = sq[i] * m[(i, j)] / sq[j];
        let b = sq[j] * m[(j, i)] / sq[i];
        0.5 * (a + b)
    });
    let eig = s
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let vals: Vec<f64> = (0..n).map(|k| eig.S()[k]).collect();
    let u = eig.U();
    let q = DMatrix::from_fn(n, n, |i, k| u[(i, k)]);
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    Ok((vals, q))
}

fn general_eigen(m: &DMatrix<f64>) -> Result<(Vec<Complex64>, DMatrix<Complex64>)> {
    let n = m.nrows();
    let eig = to_faer(m)
        .eigen()
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let s = eig.S();
    let u = eig.U();
    let vals: Vec<Complex64> = (0..n).map(|k| Complex64::new(s[k].re, s[k].im)).collect();
    if vals.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    let vecs = DMatrix::from_fn(n, n, |i, k| Complex64::new(u[(i, k)].re, u[(i, k)].im));
    Ok((vals, vecs))
}

fn check_conjugate_pairs(vals: &[Complex64], scale: f64) -> Result<()> {
    let tol = 1e-8 * scale.max(1.0);
    let mut used = vec![false; vals.len()];
    for (i, z) in vals.iter().enumerate() {
        if z.im.abs() <= tol || used[i] {
            continue;
        }
        let partner = (0..vals.len())
            .filter(|&j| j != i && !used[j])
            .min_by(|&a, &b| (vals[a] - z.conj()).norm().total_cmp(&(vals[b] - z.conj()).norm()));
        match partner {
            Some(j) if (vals[j] - z.conj()).norm() <= tol * 1e3 => {
                used[i] = true;
                used[j] = true;
            }
            _ => {
                return Err(Error::Eigensolver(format!(
                    "eigenvalue {z} has no conjugate partner"
                )))
            }
        }
    }
    Ok(())
}

/// Indices of the eigenvalues within `tol` of `lambda0`, after checking that
/// nothing sits in the ambiguity band `(tol, 10·tol]`.
fn cluster(vals: &[Complex64], lambda0: f64, tol: f64) -> Result<Vec<usize>> {
    let z0 = Complex64::new(lambda0, 0.0);
    let mut idx = Vec::new();
    for (k, z) in vals.iter().enumerate() {
        let d = (z - z0).norm();
        if d <= tol {
            idx.push(k);
        } else if d <= 10.0 * tol {
            return Err(Error::AmbiguousCluster {
                lambda0,
                straddler: *z,
                tol,
            });
        }
    }
    if idx.is_empty() {
        return Err(Error::NoEigenvalueNear { lambda0, tol });
    }
    Ok(idx)
}

/// Projection onto the generalized eigenspace of the eigenvalues within
/// `cluster_tol` of `lambda0`, along the complementary invariant subspace.
pub fn spectral_projection(
    op: &OperatorHandle,
    lambda0: f64,
    cluster_tol: Option<f64>,
) -> Result<ProjectionData> {
    let tol = cluster_tol.unwrap_or_else(|| default_cluster_tol(op));
    let data = analyze(op)?;
    let idx = cluster(&data.eigenvalues, lambda0, tol)?;
    let mult = idx.len();
    let n = op.n();

    if data.symmetric_path {
        let (vals, q) = symmetric_eigen(op)?;
        let z0 = Complex64::new(lambda0, 0.0);
        let cols: Vec<usize> = (0..n)
            .filter(|&k| (Complex64::new(vals[k], 0.0) - z0).norm() <= tol)
            .collect();
        if cols.len() != mult {
            return Err(Error::Eigensolver("symmetric cluster size changed".into()));
        }
        let sq: Vec<f64> = op.grid().weights().iter().map(|w| w.sqrt()).collect();
        let mut p = DMatrix::zeros(n, n);
        for &k in &cols {
            for i in 0..n {
                for j in 0..n {
                    p[(i, j)] += q[(i, k)] * q[(j, k)] * sq[j] / sq[i];
                }
            }
        }
        return Ok(ProjectionData {
            lambda0,
            p,
            algebraic_multiplicity: mult,
            pole_order_estimate: 1,
            rank: mult,
        });
    }

    // Centre the rank tests on the computed cluster, not on the caller's guess.
    let centre = idx.iter().map(|&k| data.eigenvalues[k].re).sum::<f64>() / mult as f64;
    let shifted = {
        let mut k = op.matrix().clone();
        for i in 0..n {
            k[(i, i)] -= centre;
        }
        k
    };

    let vc = DMatrix::from_fn(n, mult, |i, c| data.right_eigenvectors[(i, idx[c])]);
    if semisimple_basis(&vc) {
        let p = biorthogonal_projection(op, &vc, lambda0, tol)?;
        return Ok(ProjectionData {
            lambda0,
            p,
            algebraic_multiplicity: mult,
            pole_order_estimate: 1,
            rank: mult,
        });
    }

    // Defective cluster: find the smallest power whose kernel has full size.
    let mut power = shifted.clone();
    for j in 1..=mult {
        if j > 1 {
            power = &power * &shifted;
        }
        let svd = to_faer(&power)
            .svd()
            .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let s = svd.S();
        let smax = s[0].max(f64::MIN_POSITIVE);
        let nullity = (0..n).filter(|&k| s[k] <= RANK_TOL * smax).count();
        if nullity == mult {
            let (u, v) = (svd.U(), svd.V());
            let nb = DMatrix::from_fn(n, mult, |i, c| v[(i, n - mult + c)]);
            let lb = DMatrix::from_fn(n, mult, |i, c| u[(i, n - mult + c)]);
            let gram = lb.transpose() * &nb;
            let inv = gram
                .try_inverse()
                .ok_or(Error::RankTestInconclusive { lambda0 })?;
            let p = &nb * inv * lb.transpose();
            return Ok(ProjectionData {
                lambda0,
                p,
                algebraic_multiplicity: mult,
                pole_order_estimate: j,
                rank: mult,
            });
        }
        if nullity > mult {
            break;
        }
    }
    Err(Error::RankTestInconclusive { lambda0 })
}

/// Columns of the eigenvector block are numerically independent.
fn semisimple_basis(vc: &DMatrix<Complex64>) -> bool {
    let m = vc.ncols();
    let mut normed = vc.clone();
    for mut col in normed.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= Complex64::new(norm, 0.0);
        }
    }
    let gram = normed.adjoint() * &normed;
    let mut smallest = f64::INFINITY;
    let eig = faer::Mat::<num_complex::Complex<f64>>::from_fn(m, m, |i, j| gram[(i, j)]);
    if let Ok(e) = eig.self_adjoint_eigen(faer::Side::Lower) {
        for k in 0..m {
            smallest = smallest.min(e.S()[k].re);
        }
    } else {
        return false;
    }
    smallest > 1e-12
}

/// `P = V_c (Y_cᵀ V_c)⁻¹ Y_cᵀ` with `Y_c` eigenvectors of `Aᵀ`.
fn biorthogonal_projection(
    op: &OperatorHandle,
    vc: &DMatrix<Complex64>,
    lambda0: f64,
    tol: f64,
) -> Result<DMatrix<f64>> {
    let n = op.n();
    let mult = vc.ncols();
    let (lvals, lvecs) = general_eigen(&op.matrix().transpose())?;
    let z0 = Complex64::new(lambda0, 0.0);
    let cols: Vec<usize> = (0..n).filter(|&k| (lvals[k] - z0).norm() <= tol).collect();
    if cols.len() != mult {
        return Err(Error::Eigensolver(format!(
            "left and right clusters at {lambda0} differ in size ({} vs {mult})",
            cols.len()
        )));
    }
    let yc = DMatrix::from_fn(n, mult, |i, c| lvecs[(i, cols[c])]);
    let gram = yc.transpose() * vc;
    let inv = gram
        .try_inverse()
        .ok_or(Error::RankTestInconclusive { lambda0 })?;
    let pc = vc * inv * yc.transpose();
    let pmax = pc.iter().fold(0.0f64, |a, z| a.max(z.re.abs()));
    let residue = pc.iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
    if residue >= 1e-8 * pmax.max(1.0) {
        return Err(Error::ComplexProjection { lambda0, residue });
    }
    Ok(pc.map(|z| z.re))
}

/// Spectral projection at 0 for an operator with `s(A) = 0`.
pub fn mean_ergodic_projection(op: &OperatorHandle) -> Result<ProjectionData> {
    let data = analyze(op)?;
    let tol = default_cluster_tol(op);
    let s = data.spectral_bound;
    if s.abs() > 1e-8 * op.max_norm().max(1.0) {
        return Err(Error::Precondition(format!(
            "spectral bound {s:e} is not 0; rescale by A − s(A)"
        )));
    }
    if let Some(z) = data
        .eigenvalues
        .iter()
        .find(|z| z.re.abs() <= tol && z.im.abs() > tol)
    {
        return Err(Error::NonErgodic(format!(
            "eigenvalue {z} on the imaginary axis"
        )));
    }
    let proj = spectral_projection(op, 0.0, Some(tol))?;
    if proj.pole_order_estimate > 1 {
        return Err(Error::NonErgodic(format!(
            "eigenvalue 0 has pole order {}",
            proj.pole_order_estimate
        )));
    }
    Ok(proj)
}

/// Residuals of the projection invariants: `‖P² − P‖`, `‖AP − PA‖` and
/// `‖(A − λ0)^p P‖`, each relative to the matching scale.
pub fn projection_residuals(op: &OperatorHandle, proj: &ProjectionData) -> (f64, f64, f64) {
    let p = &proj.p;
    let a = op.matrix();
    let pn = max_abs(p).max(f64::MIN_POSITIVE);
    let an = max_abs(a).max(f64::MIN_POSITIVE);
    let idem = max_abs(&(p * p - p)) / pn;
    let comm = max_abs(&(a * p - p * a)) / (an * pn);
    let mut k = a.clone();
    for i in 0..k.nrows() {
        k[(i, i)] -= proj.lambda0;
    }
    let mut nil = p.clone();
    for _ in 0..proj.pole_order_estimate {
        nil = &k * nil;
    }
    let nil_rel = max_abs(&nil) / (an.powi(proj.pole_order_estimate as i32) * pn);
    (idem, comm, nil_rel)
}
