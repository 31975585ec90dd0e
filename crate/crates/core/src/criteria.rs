//! Sampled checks for eventual domination, eventual positivity of Cesàro
//! means, resolvent windows and (anti-)maximum principles.
//!
//! All semigroup checks run on `A − s(B)·I` and `B − s(B)·I`; samples carry
//! the rescaled margin and the raw margin `margin·e^{s(B)·t}`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{cesaro, expm_matrix, resolvent_with_cap, CHECKER_RESOLVENT_CAP, DEFAULT_QUAD_POINTS};
use crate::gallery::{max_abs, OperatorHandle};
use crate::lattice::{gauge_slices, LatticeVector, DEFAULT_EPS};
use crate::spectral::{analyze, default_cluster_tol, mean_ergodic_projection};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TimeGridSpec {
    Log { t_min: f64, t_max: f64, count: usize },
    Linear { t_min: f64, t_max: f64, count: usize },
    Explicit { count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub spec: TimeGridSpec,
    values: Vec<f64>,
}

impl TimeGrid {
    pub fn log(t_min: f64, t_max: f64, count: usize) -> Result<Self> {
        Self::check_bounds(t_min, t_max, count)?;
        let (la, lb) = (t_min.ln(), t_max.ln());
        let values = (0..count)
            .map(|k| {
                if k == 0 {
                    t_min
                } else if k == count - 1 {
                    t_max
                } else {
                    (la + (lb - la) * k as f64 / (count - 1) as f64).exp()
                }
            })
            .collect();
        Self::from_parts(TimeGridSpec::Log { t_min, t_max, count }, values)
    }

    pub fn linear(t_min: f64, t_max: f64, count: usize) -> Result<Self> {
        Self::check_bounds(t_min, t_max, count)?;
        let values = (0..count)
            .map(|k| t_min + (t_max - t_min) * k as f64 / (count - 1) as f64)
            .collect();
        Self::from_parts(TimeGridSpec::Linear { t_min, t_max, count }, values)
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        let count = values.len();
        Self::from_parts(TimeGridSpec::Explicit { count }, values)
    }

    fn check_bounds(t_min: f64, t_max: f64, count: usize) -> Result<()> {
        if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "time grid needs 0 < t_min < t_max, got ({t_min}, {t_max})"
            )));
        }
        if count < 2 {
            return Err(Error::OutOfRange(format!("time grid count {count} < 2")));
        }
        Ok(())
    }

    fn from_parts(spec: TimeGridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::OutOfRange("time grid needs at least 2 points".into()));
        }
        if values.iter().any(|&t| !(t > 0.0) || !t.is_finite())
            || values.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::OutOfRange(
                "time grid must be positive and strictly increasing".into(),
            ));
        }
        Ok(Self { spec, values })
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
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DominationMode {
    Individual,
    UniformEntrywise,
    CesaroPositivity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    EventualDominationObserved,
    NoDominationInWindow,
    DominationForAllSampledT,
}

impl Verdict {
    /// Domination holds on the tail of the grid.
    pub fn is_positive(self) -> bool {
        !matches!(self, Verdict::NoDominationInWindow)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub param: f64,
    pub margin: f64,
    pub raw_margin: f64,
    pub pass: bool,
}

/// Location of the smallest margin at a failing sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub param: f64,
    pub node_index: usize,
    /// Column of the failing entry (uniform checks only).
    pub column: Option<usize>,
    pub x: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub mode: DominationMode,
    pub pair: (String, String),
    pub u: Option<Vec<f64>>,
    pub shift: f64,
    pub eps: f64,
    pub samples: Vec<Sample>,
    pub earliest_pass: Option<f64>,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    /// Best `c` with `e^{tB} − |e^{tA}| ≥ c·u·(w∘φ)ᵀ`, per sample.
    pub rank_one_constants: Option<Vec<f64>>,
}

/// Classify a margin series; `pass` flags are already decided per sample.
fn classify(margins: &[f64], pass: &[bool], eps: f64) -> (Verdict, Option<usize>) {
    let n = pass.len();
    let earliest = (0..n).find(|&i| pass[i..].iter().all(|&p| p));
    if pass.iter().all(|&p| p) {
        return (Verdict::DominationForAllSampledT, Some(0));
    }
    let tail = n.div_ceil(4).max(1);
    let start = n - tail;
    let tail_pass = pass[start..].iter().all(|&p| p);
    let tail_m = &margins[start..];
    let monotone = tail_m.windows(2).all(|w| w[1] >= w[0] - eps);
    let last = tail_m[tail_m.len() - 1];
    let extrapolated = last - (tail_m[0] - last);
    let steady = monotone || extrapolated > eps;
    if tail_pass && steady {
        (Verdict::EventualDominationObserved, earliest)
    } else {
        (Verdict::NoDominationInWindow, earliest.filter(|_| tail_pass && steady))
    }
}

fn same_host(a: &OperatorHandle, b: &OperatorHandle) -> Result<()> {
    a.host_grid().ensure_compatible(b.host_grid())
}

fn check_vec(v: &LatticeVector, op: &OperatorHandle) -> Result<()> {
    v.grid().ensure_compatible(op.host_grid())
}

/// Apply an operator-sized matrix to a host-grid vector.
fn apply_lifted(op: &OperatorHandle, m: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    op.lift_vector(&(m * op.restrict_vector(f)))
}

fn shifted_expm(op: &OperatorHandle, shift: f64, t: f64) -> Result<DMatrix<f64>> {
    let n = op.n();
    let m = (op.matrix() - DMatrix::<f64>::identity(n, n) * shift) * t;
    expm_matrix(&m)
}

/// `gauge(e^{tB}|f| − |e^{tA}f|, u).lower` on each sampled `t`.
pub fn check_individual_semigroup_domination(
    a: &OperatorHandle,
    b: &OperatorHandle,
    f: &LatticeVector,
    u: &LatticeVector,
    grid: &TimeGrid,
    eps: f64,
) -> Result<DominationReport> {
    same_host(a, b)?;
    check_vec(f, b)?;
    check_vec(u, b)?;
    gauge_slices(u.values(), u.values())?;
    let s = analyze(b)?.spectral_bound;
    let fv = f.to_dvector();
    let fabs = fv.abs();
    let nodes = b.host_grid().nodes();

    let rows: Vec<(f64, usize, f64, f64)> = grid
        .values()
        .par_iter()
        .map(|&t| {
            let ea = shifted_expm(a, s, t)?;
            let eb = shifted_expm(b, s, t)?;
            let lhs = apply_lifted(a, &ea, &fv).abs();
            let rhs = apply_lifted(b, &eb, &fabs);
            let diff: Vec<f64> = (0..lhs.len()).map(|i| rhs[i] - lhs[i]).collect();
            let g = gauge_slices(&diff, u.values())?;
            let i = g.argmin_index;
            Ok((g.lower, i, lhs[i], rhs[i]))
        })
        .collect::<Result<_>>()?;

    let margins: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let pass: Vec<bool> = margins.iter().map(|&m| m > eps).collect();
    let witness = pass.iter().position(|&p| !p).map(|k| Witness {
        param: grid.values()[k],
        node_index: rows[k].1,
        column: None,
        x: nodes[rows[k].1],
        lhs: rows[k].2,
        rhs: rows[k].3,
    });
    Ok(assemble(
        DominationMode::Individual,
        a,
        b,
        Some(u),
        s,
        eps,
        grid,
        margins,
        pass,
        witness,
        None,
    ))
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    mode: DominationMode,
    a: &OperatorHandle,
    b: &OperatorHandle,
    u: Option<&LatticeVector>,
    shift: f64,
    eps: f64,
    grid: &TimeGrid,
    margins: Vec<f64>,
    pass: Vec<bool>,
    witness: Option<Witness>,
    rank_one_constants: Option<Vec<f64>>,
) -> DominationReport {
    let (verdict, earliest) = classify(&margins, &pass, eps);
    let samples = grid
        .values()
        .iter()
        .zip(margins.iter().zip(&pass))
        .map(|(&t, (&m, &p))| Sample {
            param: t,
            margin: m,
            raw_margin: if mode == DominationMode::CesaroPositivity {
                m
            } else {
                m * (shift * t).exp()
            },
            pass: p,
        })
        .collect();
    DominationReport {
        mode,
        pair: (a.name().to_string(), b.name().to_string()),
        u: u.map(|v| v.values().to_vec()),
        shift,
        eps,
        samples,
        earliest_pass: earliest.map(|k| grid.values()[k]),
        verdict,
        witness,
        rank_one_constants,
    }
}

/// Optional rank-one lower bound `u·(w∘φ)ᵀ` for the uniform check.
#[derive(Debug, Clone)]
pub struct RankOneBound {
    pub u: LatticeVector,
    pub phi: LatticeVector,
}

/// Entrywise `|e^{tA}| ≤ e^{tB}` on each sampled `t`.
pub fn check_uniform_semigroup_domination(
    a: &OperatorHandle,
    b: &OperatorHandle,
    grid: &TimeGrid,
    eps: f64,
) -> Result<DominationReport> {
    check_uniform_semigroup_domination_with_bound(a, b, grid, eps, None)
}

pub fn check_uniform_semigroup_domination_with_bound(
    a: &OperatorHandle,
    b: &OperatorHandle,
    grid: &TimeGrid,
    eps: f64,
    bound: Option<&RankOneBound>,
) -> Result<DominationReport> {
    same_host(a, b)?;
    if let Some(bd) = bound {
        check_vec(&bd.u, b)?;
        check_vec(&bd.phi, b)?;
        gauge_slices(bd.u.values(), bd.u.values())?;
    }
    let s = analyze(b)?.spectral_bound;
    let nodes = b.host_grid().nodes();
    let weights = b.host_grid().weights().to_vec();

    let rows: Vec<(f64, usize, usize, f64, f64, Option<f64>)> = grid
        .values()
        .par_iter()
        .map(|&t| {
            let ea = a.lift_matrix(&shifted_expm(a, s, t)?);
            let eb = b.lift_matrix(&shifted_expm(b, s, t)?);
            let n = eb.nrows();
            let (mut best, mut bi, mut bj) = (f64::INFINITY, 0, 0);
            // Column-major walk keeps the first minimum deterministic.
            for j in 0..n {
                for i in 0..n {
                    let d = eb[(i, j)] - ea[(i, j)].abs();
                    if d < best {
                        best = d;
                        bi = i;
                        bj = j;
                    }
                }
            }
            let c = bound.map(|bd| {
                let mut c = f64::INFINITY;
                for j in 0..n {
                    let col = weights[j] * bd.phi.values()[j];
                    if col <= 0.0 {
                        continue;
                    }
                    for i in 0..n {
                        let d = eb[(i, j)] - ea[(i, j)].abs();
                        c = c.min(d / (bd.u.values()[i] * col));
                    }
                }
                c
            });
            Ok((best, bi, bj, ea[(bi, bj)].abs(), eb[(bi, bj)], c))
        })
        .collect::<Result<_>>()?;

    let margins: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let pass: Vec<bool> = margins.iter().map(|&m| m >= -eps).collect();
    let witness = pass.iter().position(|&p| !p).map(|k| Witness {
        param: grid.values()[k],
        node_index: rows[k].1,
        column: Some(rows[k].2),
        x: nodes[rows[k].1],
        lhs: rows[k].3,
        rhs: rows[k].4,
    });
    let constants = bound.map(|_| rows.iter().map(|r| r.5.unwrap_or(f64::NAN)).collect());
    Ok(assemble(
        DominationMode::UniformEntrywise,
        a,
        b,
        None,
        s,
        eps,
        grid,
        margins,
        pass,
        witness,
        constants,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Right,
    Left,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Right => 1.0,
            Side::Left => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowOptions {
    /// Largest offset from `λ0`.
    pub delta: f64,
    /// Offsets `delta·2⁻ʲ`, `j = 0..=levels`.
    pub levels: u32,
}

impl Default for WindowOptions {
    fn default() -> Self {
        Self {
            delta: 0.5,
            levels: 20,
        }
    }
}

impl WindowOptions {
    fn offsets(&self) -> Vec<f64> {
        (0..=self.levels)
            .map(|j| self.delta * 2f64.powi(-(j as i32)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowVerdict {
    HoldsNearLambda0,
    FailsNearLambda0,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub lambda: f64,
    pub offset: f64,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub lambda0: f64,
    pub side: Side,
    pub samples: Vec<WindowSample>,
    /// Largest sampled offset with all closer samples passing (0 if none).
    pub delta_found: f64,
    pub verdict: WindowVerdict,
    pub skipped: Vec<f64>,
    pub witness: Option<Witness>,
}

impl WindowReport {
    pub fn passes(&self) -> bool {
        self.verdict == WindowVerdict::HoldsNearLambda0
    }
}

/// `(λ, offset)` pairs kept, and the λ values skipped near eigenvalues.
type SampledLambdas = (Vec<(f64, f64)>, Vec<f64>);

/// Sampled λ values on one side of `λ0`, dropping those within `1e−10` of
/// an eigenvalue of any of `ops`.
fn window_lambdas(
    ops: &[&OperatorHandle],
    lambda0: f64,
    side: Side,
    opts: &WindowOptions,
) -> Result<SampledLambdas> {
    let mut keep = Vec::new();
    let mut skipped = Vec::new();
    for off in opts.offsets() {
        let lambda = lambda0 + side.sign() * off;
        let mut near = false;
        for op in ops {
            let d = analyze(op)?;
            if d
                .eigenvalues
                .iter()
                .any(|z| (z - num_complex::Complex64::new(lambda, 0.0)).norm() <= 1e-10)
            {
                near = true;
            }
        }
        if near {
            skipped.push(lambda);
        } else {
            keep.push((lambda, off));
        }
    }
    Ok((keep, skipped))
}

fn window_report(
    lambda0: f64,
    side: Side,
    lambdas: &[(f64, f64)],
    skipped: Vec<f64>,
    rows: Vec<(f64, usize, f64, f64)>,
    eps: f64,
    nodes: &[f64],
) -> WindowReport {
    let samples: Vec<WindowSample> = lambdas
        .iter()
        .zip(&rows)
        .map(|(&(lambda, offset), r)| WindowSample {
            lambda,
            offset,
            margin: r.0,
            pass: r.0 > eps,
        })
        .collect();
    let n = samples.len();
    let tail = n.div_ceil(4).max(1);
    let holds = n > 0 && samples[n - tail..].iter().all(|s| s.pass);
    // Offsets decrease along the samples; scan from the closest outwards.
    let mut delta_found = 0.0;
    for s in samples.iter().rev() {
        if !s.pass {
            break;
        }
        delta_found = s.offset;
    }
    let witness = samples.iter().rposition(|s| !s.pass).map(|k| Witness {
        param: samples[k].lambda,
        node_index: rows[k].1,
        column: None,
        x: nodes[rows[k].1],
        lhs: rows[k].2,
        rhs: rows[k].3,
    });
    WindowReport {
        lambda0,
        side,
        samples,
        delta_found,
        verdict: if holds {
            WindowVerdict::HoldsNearLambda0
        } else {
            WindowVerdict::FailsNearLambda0
        },
        skipped,
        witness,
    }
}

fn near_eigenvalue(op: &OperatorHandle, lambda0: f64) -> Result<f64> {
    let d = analyze(op)?;
    let z = num_complex::Complex64::new(lambda0, 0.0);
    Ok(d
        .eigenvalues
        .iter()
        .map(|e| (e - z).norm())
        .fold(f64::INFINITY, f64::min))
}

fn eigen_tol(op: &OperatorHandle) -> f64 {
    1e-6_f64.max(default_cluster_tol(op))
}

/// Resolvent domination on one side of `λ0 = s(B)`.
///
/// Right: `gauge(Res(λ,B)|f| − |Res(λ,A)f|, u).lower > eps`.
/// Left: `gauge(−Res(μ,B)|f| − |Res(μ,A)f|, u).lower > eps`.
#[allow(clippy::too_many_arguments)]
pub fn check_resolvent_domination_window(
    a: &OperatorHandle,
    b: &OperatorHandle,
    f: &LatticeVector,
    u: &LatticeVector,
    lambda0: f64,
    side: Side,
    eps: f64,
    opts: &WindowOptions,
) -> Result<WindowReport> {
    same_host(a, b)?;
    check_vec(f, b)?;
    check_vec(u, b)?;
    gauge_slices(u.values(), u.values())?;
    let s = analyze(b)?.spectral_bound;
    if (s - lambda0).abs() > 1e-6 * s.abs().max(1.0) {
        return Err(Error::Precondition(format!(
            "lambda0 = {lambda0} is not the spectral bound {s} of {}",
            b.name()
        )));
    }
    if near_eigenvalue(a, lambda0)? <= 1e-6 {
        return Err(Error::Precondition(format!(
            "lambda0 = {lambda0} is an eigenvalue of {}",
            a.name()
        )));
    }
    let (lambdas, skipped) = window_lambdas(&[a, b], lambda0, side, opts)?;
    let fv = f.to_dvector();
    let fabs = fv.abs();
    let rows: Vec<(f64, usize, f64, f64)> = lambdas
        .par_iter()
        .map(|&(lambda, _)| {
            let ra = resolvent_with_cap(a, lambda, CHECKER_RESOLVENT_CAP)?.matrix;
            let rb = resolvent_with_cap(b, lambda, CHECKER_RESOLVENT_CAP)?.matrix;
            let lhs = apply_lifted(a, &ra, &fv).abs();
            let rb_f = apply_lifted(b, &rb, &fabs) * side.sign();
            let diff: Vec<f64> = (0..lhs.len()).map(|i| rb_f[i] - lhs[i]).collect();
            let g = gauge_slices(&diff, u.values())?;
            let i = g.argmin_index;
            Ok((g.lower, i, lhs[i], rb_f[i]))
        })
        .collect::<Result<_>>()?;
    Ok(window_report(
        lambda0,
        side,
        &lambdas,
        skipped,
        rows,
        eps,
        &b.host_grid().nodes(),
    ))
}

/// `gauge((λ−λ0)·Res(λ,A)f, u).lower > eps` on one side of an eigenvalue `λ0`.
///
/// On the right this is the maximum principle; on the left the same
/// inequality reads `Res(μ,A)f ⪯ −c·u/(λ0−μ)`, the anti-maximum principle.
pub fn check_max_antimax(
    op: &OperatorHandle,
    f: &LatticeVector,
    u: &LatticeVector,
    lambda0: f64,
    side: Side,
    eps: f64,
    opts: &WindowOptions,
) -> Result<WindowReport> {
    check_vec(f, op)?;
    check_vec(u, op)?;
    gauge_slices(u.values(), u.values())?;
    if !f.is_positive_nonzero() {
        return Err(Error::Precondition("f must be ≥ 0 and nonzero".into()));
    }
    if near_eigenvalue(op, lambda0)? > eigen_tol(op) {
        return Err(Error::NoEigenvalueNear {
            lambda0,
            tol: eigen_tol(op),
        });
    }
    let (lambdas, skipped) = window_lambdas(&[op], lambda0, side, opts)?;
    let fv = f.to_dvector();
    let rows: Vec<(f64, usize, f64, f64)> = lambdas
        .par_iter()
        .map(|&(lambda, _)| {
            let r = resolvent_with_cap(op, lambda, CHECKER_RESOLVENT_CAP)?.matrix;
            let v = apply_lifted(op, &r, &fv) * (lambda - lambda0);
            let g = gauge_slices(v.as_slice(), u.values())?;
            let i = g.argmin_index;
            Ok((g.lower, i, v[i], u.values()[i]))
        })
        .collect::<Result<_>>()?;
    Ok(window_report(
        lambda0,
        side,
        &lambdas,
        skipped,
        rows,
        eps,
        &op.host_grid().nodes(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConverseWitness {
    pub trial: usize,
    /// Support nodes and convex weights of the trial vector.
    pub support: Vec<(usize, f64)>,
    pub lambda: f64,
    pub node_index: usize,
    pub res_a: f64,
    pub res_b: f64,
    /// `true` if `Res(λ,A)f` went negative, `false` if it exceeded `Res(λ,B)f`.
    pub negativity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum ConverseOutcome {
    Witness(ConverseWitness),
    Inconclusive { trials: usize, lambdas: usize },
}

/// Search for `f ≥ 0` and `λ > λ0` violating `0 ≤ Res(λ,A)f ≤ Res(λ,B)f`.
pub fn search_converse_witness(
    a: &OperatorHandle,
    b: &OperatorHandle,
    lambda0: f64,
    trial_count: usize,
    seed: u64,
) -> Result<ConverseOutcome> {
    same_host(a, b)?;
    let diff = if a.n() == b.n() {
        max_abs(&(a.matrix() - b.matrix()))
    } else {
        f64::INFINITY
    };
    if diff <= 1e-8 {
        return Err(Error::Precondition("A and B coincide".into()));
    }
    for op in [a, b] {
        if near_eigenvalue(op, lambda0)? > eigen_tol(op) {
            return Err(Error::Precondition(format!(
                "lambda0 = {lambda0} is not an eigenvalue of {}",
                op.name()
            )));
        }
    }
    let opts = WindowOptions::default();
    let (lambdas, _) = window_lambdas(&[a, b], lambda0, Side::Right, &opts)?;
    let pairs: Vec<(f64, DMatrix<f64>, DMatrix<f64>)> = lambdas
        .par_iter()
        .filter_map(|&(lambda, _)| {
            let ra = resolvent_with_cap(a, lambda, CHECKER_RESOLVENT_CAP).ok()?;
            let rb = resolvent_with_cap(b, lambda, CHECKER_RESOLVENT_CAP).ok()?;
            Some((lambda, a.lift_matrix(&ra.matrix), b.lift_matrix(&rb.matrix)))
        })
        .collect();

    let n = a.host_grid().n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trial_count {
        let k = rng.random_range(1..=3usize);
        let mut support: Vec<(usize, f64)> = (0..k)
            .map(|_| (rng.random_range(0..n), rng.random::<f64>() + 1e-3))
            .collect();
        let total: f64 = support.iter().map(|p| p.1).sum();
        for p in &mut support {
            p.1 /= total;
        }
        let mut f = DVector::<f64>::zeros(n);
        for &(i, w) in &support {
            f[i] += w;
        }
        for (lambda, ra, rb) in &pairs {
            let y = ra * &f;
            let z = rb * &f;
            let tol = 1e-10 * y.amax().max(z.amax()).max(1.0);
            for i in 0..n {
                let negativity = y[i] < -tol;
                if negativity || y[i] > z[i] + tol {
                    return Ok(ConverseOutcome::Witness(ConverseWitness {
                        trial,
                        support,
                        lambda: *lambda,
                        node_index: i,
                        res_a: y[i],
                        res_b: z[i],
                        negativity,
                    }));
                }
            }
        }
    }
    Ok(ConverseOutcome::Inconclusive {
        trials: trial_count,
        lambdas: pairs.len(),
    })
}

/// `gauge(C(r)f, u).lower` for the Cesàro means of `A − s(A)·I`.
pub fn check_cesaro_eventual_positivity(
    op: &OperatorHandle,
    f: &LatticeVector,
    u: &LatticeVector,
    grid: &TimeGrid,
    eps: f64,
) -> Result<DominationReport> {
    check_vec(f, op)?;
    check_vec(u, op)?;
    gauge_slices(u.values(), u.values())?;
    if !f.is_positive_nonzero() {
        return Err(Error::Precondition("f must be ≥ 0 and nonzero".into()));
    }
    let s = analyze(op)?.spectral_bound;
    let shifted = op.shifted(-s);
    mean_ergodic_projection(&shifted)?;
    let means = cesaro_means(&shifted, grid)?;
    let fv = f.to_dvector();
    let rows: Vec<(f64, usize, f64)> = means
        .iter()
        .map(|c| {
            let v = apply_lifted(op, c, &fv);
            let g = gauge_slices(v.as_slice(), u.values())?;
            Ok((g.lower, g.argmin_index, v[g.argmin_index]))
        })
        .collect::<Result<_>>()?;
    let margins: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let pass: Vec<bool> = margins.iter().map(|&m| m > eps).collect();
    let nodes = op.host_grid().nodes();
    let witness = pass.iter().position(|&p| !p).map(|k| Witness {
        param: grid.values()[k],
        node_index: rows[k].1,
        column: None,
        x: nodes[rows[k].1],
        lhs: rows[k].2,
        rhs: 0.0,
    });
    Ok(assemble(
        DominationMode::CesaroPositivity,
        op,
        op,
        Some(u),
        s,
        eps,
        grid,
        margins,
        pass,
        witness,
        None,
    ))
}

fn cesaro_means(shifted: &OperatorHandle, grid: &TimeGrid) -> Result<Vec<DMatrix<f64>>> {
    grid.values()
        .par_iter()
        .map(|&r| Ok(cesaro(shifted, r, DEFAULT_QUAD_POINTS)?.matrix))
        .collect()
}

/// The fixed 20-vector trial set on the normalized coordinate `s = (x−a)/(b−a)`:
/// `𝟙`, `s`, `1−s`, `𝟙_{s>1/2}`, ten interval indicators, five narrow
/// Gaussians and the ramp `max(1−3s, 0)`.
pub fn standard_trial_set(grid: &crate::lattice::GridSpec) -> Vec<(String, LatticeVector)> {
    let (a, b) = grid.interval();
    let norm = move |x: f64| (x - a) / (b - a);
    let mut out = vec![
        ("one".to_string(), LatticeVector::ones(grid)),
        ("s".to_string(), LatticeVector::from_fn(grid, norm)),
        ("1-s".to_string(), LatticeVector::from_fn(grid, move |x| 1.0 - norm(x))),
        (
            "step".to_string(),
            LatticeVector::from_fn(grid, move |x| if norm(x) > 0.5 { 1.0 } else { 0.0 }),
        ),
    ];
    for k in 0..10 {
        let (lo, hi) = (k as f64 / 10.0, (k + 1) as f64 / 10.0);
        out.push((
            format!("indicator[{lo},{hi}]"),
            LatticeVector::from_fn(grid, move |x| {
                let s = norm(x);
                if s >= lo && s <= hi {
                    1.0
                } else {
                    0.0
                }
            }),
        ));
    }
    for c in [0.0, 0.25, 0.5, 0.75, 1.0] {
        out.push((
            format!("gaussian@{c}"),
            LatticeVector::from_fn(grid, move |x| (-((norm(x) - c) / 0.05).powi(2)).exp()),
        ));
    }
    out.push((
        "ramp".to_string(),
        LatticeVector::from_fn(grid, move |x| (1.0 - 3.0 * norm(x)).max(0.0)),
    ));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditOptions {
    pub r_grid: TimeGrid,
    pub window: WindowOptions,
    pub eps: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            r_grid: TimeGrid::log(0.1, 1000.0, 60).expect("static grid"),
            window: WindowOptions::default(),
            eps: DEFAULT_EPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub label: String,
    pub cesaro: bool,
    pub projection: bool,
    pub projection_margin: f64,
    pub right_window: bool,
    pub left_window: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceAudit {
    pub operator: String,
    pub shift: f64,
    pub trials: Vec<TrialOutcome>,
    pub cesaro: bool,
    pub projection: bool,
    pub right_window: bool,
    pub left_window: bool,
    pub agree: bool,
}

/// Four verdicts over the standard trial set for `A − s(A)·I`: Cesàro eventual
/// positivity, positivity of the mean-ergodic projection, and the right and
/// left window principles at 0. Each aggregate holds iff it holds for every
/// trial vector.
pub fn equivalence_audit(
    op: &OperatorHandle,
    u: &LatticeVector,
    opts: &AuditOptions,
) -> Result<EquivalenceAudit> {
    check_vec(u, op)?;
    gauge_slices(u.values(), u.values())?;
    let s = analyze(op)?.spectral_bound;
    let shifted = op.shifted(-s);
    let proj = mean_ergodic_projection(&shifted)?;
    let means = cesaro_means(&shifted, &opts.r_grid)?;

    let mut windows = Vec::new();
    for side in [Side::Right, Side::Left] {
        let (lambdas, _) = window_lambdas(&[&shifted], 0.0, side, &opts.window)?;
        let scaled: Vec<DMatrix<f64>> = lambdas
            .par_iter()
            .map(|&(lambda, _)| {
                Ok(resolvent_with_cap(&shifted, lambda, CHECKER_RESOLVENT_CAP)?.matrix * lambda)
            })
            .collect::<Result<_>>()?;
        windows.push(scaled);
    }

    let uv = u.values();
    let eps = opts.eps;
    let lower = |m: &DMatrix<f64>, f: &DVector<f64>| -> Result<f64> {
        let v = apply_lifted(op, m, f);
        Ok(gauge_slices(v.as_slice(), uv)?.lower)
    };
    let tail_holds = |mats: &[DMatrix<f64>], f: &DVector<f64>| -> Result<bool> {
        let n = mats.len();
        let tail = n.div_ceil(4).max(1);
        for m in &mats[n - tail..] {
            if lower(m, f)? <= eps {
                return Ok(false);
            }
        }
        Ok(n > 0)
    };

    let mut trials = Vec::new();
    for (label, f) in standard_trial_set(op.host_grid()) {
        let fv = f.to_dvector();
        let ces_margins: Vec<f64> = means.iter().map(|m| lower(m, &fv)).collect::<Result<_>>()?;
        let ces_pass: Vec<bool> = ces_margins.iter().map(|&m| m > eps).collect();
        let (verdict, _) = classify(&ces_margins, &ces_pass, eps);
        let projection_margin = lower(&proj.p, &fv)?;
        trials.push(TrialOutcome {
            label,
            cesaro: verdict.is_positive(),
            projection: projection_margin > eps,
            projection_margin,
            right_window: tail_holds(&windows[0], &fv)?,
            left_window: tail_holds(&windows[1], &fv)?,
        });
    }
    let all = |f: fn(&TrialOutcome) -> bool| trials.iter().all(f);
    let cesaro_all = all(|t| t.cesaro);
    let projection = all(|t| t.projection);
    let right_window = all(|t| t.right_window);
    let left_window = all(|t| t.left_window);
    Ok(EquivalenceAudit {
        operator: op.name().to_string(),
        shift: s,
        agree: cesaro_all == projection && projection == right_window && right_window == left_window,
        cesaro: cesaro_all,
        projection,
        right_window,
        left_window,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::{
        build_laplacian, build_laplacian_with_scheme, build_odd_order, build_rank_one_example,
        test_function_fn, BoundaryCondition,
    };
    use crate::lattice::NodeScheme;

    #[test]
    fn time_grids() {
        let g = TimeGrid::log(0.01, 50.0, 200).unwrap();
        assert_eq!(g.len(), 200);
        assert_eq!(g.values()[0], 0.01);
        assert_eq!(g.values()[199], 50.0);
        assert!(g.values().windows(2).all(|w| w[1] > w[0]));
        assert!(TimeGrid::log(0.0, 1.0, 5).is_err());
        assert!(TimeGrid::linear(1.0, 2.0, 1).is_err());
        assert!(TimeGrid::explicit(vec![1.0, 0.5]).is_err());
        let l = TimeGrid::linear(1.0, 2.0, 3).unwrap();
        assert_eq!(l.values(), &[1.0, 1.5, 2.0]);
    }

    #[test]
    fn classification() {
        let m = [-1.0, -0.5, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7];
        let p: Vec<bool> = m.iter().map(|&v| v > 0.0).collect();
        let (v, e) = classify(&m, &p, 0.0);
        assert_eq!(v, Verdict::EventualDominationObserved);
        assert_eq!(e, Some(2));
        let p = vec![true; 8];
        assert_eq!(classify(&m, &p, 0.0).0, Verdict::DominationForAllSampledT);
        let m = [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.4, -0.1];
        let p: Vec<bool> = m.iter().map(|&v| v > 0.0).collect();
        let (v, e) = classify(&m, &p, 0.0);
        assert_eq!(v, Verdict::NoDominationInWindow);
        assert_eq!(e, None);
        // Tail passes but collapses fast enough to cross 0 on extrapolation.
        let m = [-1.0, -1.0, 0.9, 0.5];
        let p: Vec<bool> = m.iter().map(|&v| v > 0.0).collect();
        assert_eq!(classify(&m, &p, 0.0).0, Verdict::EventualDominationObserved);
        let m = [-1.0, -1.0, -1.0, -1.0, -1.0, 0.9, 0.5, 0.05];
        let p: Vec<bool> = m.iter().map(|&v| v > 0.0).collect();
        assert_eq!(classify(&m, &p, 0.0).0, Verdict::NoDominationInWindow);
    }

    #[test]
    fn self_domination_has_zero_margin() {
        let op = build_laplacian(BoundaryCondition::Neumann, None, 24).unwrap();
        let f = LatticeVector::from_fn(op.grid(), |x| (x - 0.3).abs());
        let u = LatticeVector::ones(op.grid());
        let grid = TimeGrid::log(0.01, 1.0, 6).unwrap();
        let r = check_individual_semigroup_domination(&op, &op, &f, &u, &grid, DEFAULT_EPS).unwrap();
        assert!(r.samples.iter().all(|s| s.margin >= -1e-12 && !s.pass));
        let uni = check_uniform_semigroup_domination(&op, &op, &grid, 0.0).unwrap();
        assert_eq!(uni.verdict, Verdict::DominationForAllSampledT);
    }

    #[test]
    fn rank_one_individual_and_uniform() {
        let bundle = build_rank_one_example(65).unwrap();
        let u = LatticeVector::ones(&bundle.space_grid);
        let grid = TimeGrid::log(0.01, 50.0, 60).unwrap();
        let f2 = test_function_fn(2, &bundle.space_grid).unwrap();
        let r = check_individual_semigroup_domination(&bundle.a, &bundle.b, &f2, &u, &grid, DEFAULT_EPS)
            .unwrap();
        assert!(r.verdict.is_positive(), "{:?}", r.verdict);

        let grid = TimeGrid::explicit(vec![0.5, 1.0, 2.0]).unwrap();
        let uni = check_uniform_semigroup_domination(&bundle.a, &bundle.b, &grid, DEFAULT_EPS).unwrap();
        assert_eq!(uni.verdict, Verdict::NoDominationInWindow);
        assert!(uni.samples.iter().all(|s| !s.pass));
        let w = uni.witness.unwrap();
        let xj = bundle.space_grid.node(w.column.unwrap());
        assert!(xj < (-w.param / 2.0).exp() / 2.0);
        assert!(w.lhs > w.rhs);
    }

    #[test]
    fn rank_one_resolvent_window() {
        let bundle = build_rank_one_example(65).unwrap();
        let u = LatticeVector::ones(&bundle.space_grid);
        let f1 = test_function_fn(1, &bundle.space_grid).unwrap();
        let w = check_resolvent_domination_window(
            &bundle.a,
            &bundle.b,
            &f1,
            &u,
            0.0,
            Side::Right,
            DEFAULT_EPS,
            &WindowOptions::default(),
        )
        .unwrap();
        assert!(w.samples.iter().all(|s| s.lambda > 0.0));
        assert!(w.passes());
        assert_eq!(w.delta_found, 0.5);
        assert!(check_resolvent_domination_window(
            &bundle.b,
            &bundle.a,
            &f1,
            &u,
            0.0,
            Side::Right,
            DEFAULT_EPS,
            &WindowOptions::default()
        )
        .is_err());
    }

    #[test]
    fn neumann_maximum_principle_is_exact() {
        let op = build_laplacian(BoundaryCondition::Neumann, None, 32).unwrap();
        let one = LatticeVector::ones(op.grid());
        let w = check_max_antimax(&op, &one, &one, 0.0, Side::Right, DEFAULT_EPS, &WindowOptions::default())
            .unwrap();
        assert!(w.passes());
        for s in &w.samples {
            assert!((s.margin - 1.0).abs() < 1e-6);
        }
        let left = check_max_antimax(&op, &one, &one, 0.0, Side::Left, DEFAULT_EPS, &WindowOptions::default())
            .unwrap();
        assert!(left.samples.iter().all(|s| s.lambda < 0.0));
    }

    #[test]
    fn converse_search() {
        let a0 = build_odd_order(0, 32).unwrap();
        let a1 = build_odd_order(1, 32).unwrap();
        match search_converse_witness(&a0, &a1, 0.0, 200, 7).unwrap() {
            ConverseOutcome::Witness(w) => assert!(w.lambda > 0.0),
            other => panic!("{other:?}"),
        }
        assert!(search_converse_witness(&a0, &a0, 0.0, 10, 7).is_err());
        let n = build_laplacian_with_scheme(BoundaryCondition::Neumann, None, 32, NodeScheme::EndpointsIncluded).unwrap();
        assert!(search_converse_witness(&a0, &n, 0.0, 10, 7).is_err());
    }

    #[test]
    fn cesaro_positivity_of_constants() {
        let op = build_laplacian(BoundaryCondition::Neumann, None, 32).unwrap();
        let one = LatticeVector::ones(op.grid());
        let grid = TimeGrid::log(0.1, 100.0, 8).unwrap();
        let r = check_cesaro_eventual_positivity(&op, &one, &one, &grid, DEFAULT_EPS).unwrap();
        assert_eq!(r.verdict, Verdict::DominationForAllSampledT);
        for s in &r.samples {
            assert!((s.margin - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn trial_set_shape() {
        let grid = crate::lattice::GridSpec::new(-1.0, 1.0, 64, NodeScheme::CellCentered).unwrap();
        let set = standard_trial_set(&grid);
        assert_eq!(set.len(), 20);
        assert!(set.iter().all(|(_, f)| f.is_positive_nonzero()));
    }
}
