//! Semigroup `e^{tA}`, resolvent `Res(λ,A)` and Cesàro means `C(r)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gallery::OperatorHandle;
use crate::spectral::{analyze, spectral_projection};

/// Default condition-number cap for resolvent solves.
pub const DEFAULT_RESOLVENT_CAP: f64 = 1e12;
/// Relaxed cap used by checkers that sample close to a pole.
pub const CHECKER_RESOLVENT_CAP: f64 = 1e15;
/// Default Gauss–Legendre nodes per panel.
pub const DEFAULT_QUAD_POINTS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolutionKind {
    Semigroup,
    Resolvent,
    Cesaro,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CesaroMethod {
    /// `A⁻¹(e^{rA} − I)/r`.
    ExactInverse,
    /// `P + (A+P)⁻¹(e^{rA} − I)(I − P)/r` with `P` the projection at a semisimple 0.
    SpectralSplit,
    /// Composite Gauss–Legendre quadrature of `e^{sA}`.
    Quadrature,
}

#[derive(Debug, Clone)]
pub struct EvolutionSample {
    pub parameter: f64,
    pub kind: EvolutionKind,
    pub matrix: DMatrix<f64>,
    pub method: Option<CesaroMethod>,
}

pub(crate) fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

const THETA13: f64 = 5.371920351148152;
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// `e^{M}` by scaling and squaring with the degree-13 Padé approximant.
pub fn expm_matrix(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let norm = norm1(m);
    if !norm.is_finite() {
        return Err(Error::ExpmOverflow { norm });
    }
    let id = DMatrix::<f64>::identity(n, n);
    if norm == 0.0 {
        return Ok(id);
    }
    let s = ((norm / THETA13).log2().ceil()).max(0.0) as i32;
    let a = m * 2f64.powi(-s);
    let b = &PADE13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];
    let lu = (&v - &u).lu();
    let mut r = lu
        .solve(&(&v + &u))
        .ok_or(Error::ExpmOverflow { norm })?;
    for _ in 0..s {
        r = &r * &r;
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::ExpmOverflow { norm });
    }
    Ok(r)
}

/// `e^{tA}` on the operator's own nodes.
pub fn expm(op: &OperatorHandle, t: f64) -> Result<EvolutionSample> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::OutOfRange(format!("t = {t} must be finite and ≥ 0")));
    }
    let matrix = expm_matrix(&(op.matrix() * t))?;
    Ok(EvolutionSample {
        parameter: t,
        kind: EvolutionKind::Semigroup,
        matrix,
        method: None,
    })
}

fn nearest_eigenvalue(op: &OperatorHandle, lambda: f64) -> Result<(Complex64, f64)> {
    let data = analyze(op)?;
    let z = Complex64::new(lambda, 0.0);
    let best = data
        .eigenvalues
        .iter()
        .copied()
        .min_by(|a, b| (a - z).norm().total_cmp(&(b - z).norm()))
        .unwrap_or(Complex64::new(f64::NAN, 0.0));
    Ok((best, (best - z).norm()))
}

/// `Res(λ,A) = (λI − A)⁻¹` with the default condition cap.
pub fn resolvent(op: &OperatorHandle, lambda: f64) -> Result<EvolutionSample> {
    resolvent_with_cap(op, lambda, DEFAULT_RESOLVENT_CAP)
}

pub fn resolvent_with_cap(op: &OperatorHandle, lambda: f64, cap: f64) -> Result<EvolutionSample> {
    if !lambda.is_finite() {
        return Err(Error::OutOfRange(format!("lambda = {lambda}")));
    }
    let (nearest, dist) = nearest_eigenvalue(op, lambda)?;
    if dist <= 1e-10 {
        return Err(Error::ResolventSingular {
            lambda,
            condition: f64::INFINITY,
            nearest,
        });
    }
    let n = op.n();
    let shifted = DMatrix::<f64>::identity(n, n) * lambda - op.matrix();
    let singular = |condition| Error::ResolventSingular {
        lambda,
        condition,
        nearest,
    };
    let x = shifted
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| singular(f64::INFINITY))?;
    let condition = norm1(&shifted) * norm1(&x);
    if !condition.is_finite() || condition > cap {
        return Err(singular(condition));
    }
    Ok(EvolutionSample {
        parameter: lambda,
        kind: EvolutionKind::Resolvent,
        matrix: x,
        method: None,
    })
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` by Newton iteration on `P_q`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; q];
    let mut w = vec![0.0; q];
    let qf = q as f64;
    for i in 0..q.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (qf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=q {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pq = if q == 1 { z } else { p1 };
            let pq1 = if q == 1 { 1.0 } else { p0 };
            dp = qf * (z * pq - pq1) / (z * z - 1.0);
            let dz = pq / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[q - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[q - 1 - i] = wi;
    }
    (x, w)
}

/// `∫₀^len e^{sM} ds` over dyadic panels refined towards 0 down to width
/// `≤ 1/max(1,‖M‖₁)`, with `q` Gauss–Legendre nodes per panel.
fn integrate_head(m: &DMatrix<f64>, len: f64, q: usize) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let (x, w) = gauss_legendre(q);
    let finest = 1.0 / norm1(m).max(1.0);
    let mut edges = vec![len];
    let mut lo = len;
    while lo > finest {
        lo *= 0.5;
        edges.push(lo);
    }
    edges.push(0.0);
    edges.reverse();
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (xi, wi) in x.iter().zip(&w) {
            let e = expm_matrix(&(m * (mid + half * xi)))
                .map_err(|_| Error::QuadratureOverflow { lo: a, hi: b })?;
            acc += e * (half * wi);
        }
    }
    Ok(acc)
}

/// `∫₀ʳ e^{sM} ds` with unit panels after the refined head panel.
pub fn integrate_semigroup(m: &DMatrix<f64>, r: f64, q: usize) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if r <= 1.0 {
        return integrate_head(m, r, q);
    }
    let unit = integrate_head(m, 1.0, q)?;
    let step = expm_matrix(m).map_err(|_| Error::QuadratureOverflow { lo: 0.0, hi: 1.0 })?;
    let whole = r.floor() as usize;
    let frac = r - whole as f64;
    // Σ_k e^{kM} over the whole panels, then one multiplication by the unit integral.
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut sum = DMatrix::<f64>::zeros(n, n);
    for _ in 0..whole {
        sum += &power;
        power = &power * &step;
    }
    let mut total = sum * unit;
    if frac > 0.0 {
        total += &power * integrate_head(m, frac, q)?;
    }
    if total.iter().any(|v| !v.is_finite()) {
        return Err(Error::QuadratureOverflow { lo: 0.0, hi: r });
    }
    Ok(total)
}

/// `C(r) = (1/r)∫₀ʳ e^{sA} ds`, choosing the exact path when possible.
pub fn cesaro(op: &OperatorHandle, r: f64, quad_points: usize) -> Result<EvolutionSample> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::OutOfRange(format!("r = {r} must be positive")));
    }
    if quad_points < 8 {
        return Err(Error::OutOfRange(format!("quad_points = {quad_points} < 8")));
    }
    let n = op.n();
    let a = op.matrix();
    let id = DMatrix::<f64>::identity(n, n);
    let (_, dist0) = nearest_eigenvalue(op, 0.0)?;
    let zero_tol = 1e-8 * op.max_norm().max(1.0);

    let sample = |matrix, method| EvolutionSample {
        parameter: r,
        kind: EvolutionKind::Cesaro,
        matrix,
        method: Some(method),
    };

    if dist0 > zero_tol {
        if let Some(inv) = a.clone().lu().try_inverse() {
            if norm1(a) * norm1(&inv) < DEFAULT_RESOLVENT_CAP {
                let e = expm_matrix(&(a * r))?;
                return Ok(sample(inv * (e - &id) / r, CesaroMethod::ExactInverse));
            }
        }
    } else if let Ok(proj) = spectral_projection(op, 0.0, None) {
        if proj.pole_order_estimate == 1 {
            let shifted = a + &proj.p;
            if let Some(inv) = shifted.clone().lu().try_inverse() {
                if norm1(&shifted) * norm1(&inv) < DEFAULT_RESOLVENT_CAP {
                    let e = expm_matrix(&(a * r))?;
                    let m = &proj.p + inv * (e - &id) * (&id - &proj.p) / r;
                    return Ok(sample(m, CesaroMethod::SpectralSplit));
                }
            }
        }
    }
    cesaro_quadrature(op, r, quad_points)
}

/// Cesàro mean by quadrature regardless of the spectrum.
pub fn cesaro_quadrature(op: &OperatorHandle, r: f64, quad_points: usize) -> Result<EvolutionSample> {
    let integral = integrate_semigroup(op.matrix(), r, quad_points)?;
    Ok(EvolutionSample {
        parameter: r,
        kind: EvolutionKind::Cesaro,
        matrix: integral / r,
        method: Some(CesaroMethod::Quadrature),
    })
}

/// `‖∫₀ᵀ e^{−λs}e^{sA} ds − Res(λ,A)‖_max`, with `T` defaulting to the point
/// where the tail bound `e^{(s(A)−λ)T}/(λ−s(A))` drops below `1e−10`.
pub fn laplace_transform_check(
    op: &OperatorHandle,
    lambda: f64,
    t_max: Option<f64>,
    quad_points: usize,
) -> Result<f64> {
    let s = analyze(op)?.spectral_bound;
    let margin = lambda - s;
    if !(margin > 0.1) {
        return Err(Error::Precondition(format!(
            "lambda = {lambda} must exceed the spectral bound {s} by 0.1"
        )));
    }
    let t = t_max.unwrap_or_else(|| ((1.0 / (1e-10 * margin)).ln() / margin).max(1.0));
    let n = op.n();
    let shifted = op.matrix() - DMatrix::<f64>::identity(n, n) * lambda;
    let integral = integrate_semigroup(&shifted, t, quad_points)?;
    let res = resolvent(op, lambda)?;
    Ok((integral - res.matrix).amax())
}
