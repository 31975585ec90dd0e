//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use evdom_core::{
    analyze, build_laplacian, build_odd_order, build_rank_one_example, check_individual_semigroup_domination,
    check_max_antimax, check_uniform_semigroup_domination, expm, laplace_transform_check,
    odd_order_trials, rank_one_semigroup_difference, resolvent, resolvent_with_cap,
    scenario_cesaro, search_converse_witness, solve_transcendental_mu, spectral_projection,
    test_function_fn, BoundaryCondition, ConverseOutcome, DMatrix, LatticeVector, Side, SubReport,
    TimeGrid, Verdict, WindowOptions, CHECKER_RESOLVENT_CAP, DEFAULT_EPS, DEFAULT_QUAD_POINTS,
    SCENARIO_SEED,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn antisym_spectrum() -> Outcome {
    let start = Instant::now();
    let op = build_laplacian(BoundaryCondition::Antisymmetric, None, 400).map_err(e)?;
    let spec = analyze(&op).map_err(e)?;
    let elapsed = start.elapsed().as_secs_f64();
    let e1 = -PI * PI / 4.0;
    let e2 = -9.0 * PI * PI / 4.0;
    let ev: Vec<f64> = spec.eigenvalues.iter().take(4).map(|z| z.re).collect();
    let d1 = (ev[0] - e1).abs().max((ev[1] - e1).abs());
    let d2 = (ev[2] - e2).abs().max((ev[3] - e2).abs());
    ensure(d1 < 1e-3, format!("leading pair off by {d1:.3e}"))?;
    ensure(d2 < 5e-3, format!("next pair off by {d2:.3e}"))?;
    ensure(elapsed < 5.0, format!("took {elapsed:.2}s"))?;
    Ok(format!("leading err {d1:.2e}, next err {d2:.2e}, {elapsed:.2}s"))
}

fn antisym_projection_sign() -> Outcome {
    let op = build_laplacian(BoundaryCondition::Antisymmetric, None, 400).map_err(e)?;
    let s = analyze(&op).map_err(e)?.spectral_bound;
    let proj = spectral_projection(&op, s, None).map_err(e)?;
    let ind = LatticeVector::from_fn(op.grid(), |x| if x > 0.0 && x < 1.0 { 1.0 } else { 0.0 });
    let pf = &proj.p * ind.to_dvector();
    let left = (0.05 * op.n() as f64).ceil() as usize;
    let min = pf.iter().take(left).copied().fold(f64::INFINITY, f64::min);
    ensure(min < -1e-4, format!("min over left 5% is {min:.3e}"))?;
    Ok(format!("min over left 5% = {min:.4e}"))
}

fn rank_one_closed_forms() -> Outcome {
    let n = 200;
    let bundle = build_rank_one_example(n).map_err(e)?;
    let id = DMatrix::<f64>::identity(n, n);
    let pb = bundle.p_b.matrix();
    let mut worst = 0.0f64;
    for t in [0.1, 1.0, 10.0] {
        let eb = expm(&bundle.b, t).map_err(e)?.matrix;
        worst = worst.max((eb - (pb + (&id - pb) * (-t).exp())).amax());
    }
    ensure(worst < 1e-10, format!("expm(B) closed form off by {worst:.3e}"))?;
    let grid = &bundle.space_grid;
    let h = grid.spacing();
    let last = grid.nearest_node(1.0);
    let mut signs = Vec::new();
    for (t, k) in [(1.0, 1u32), (1.0, 2), (2.0, 3)] {
        let f = test_function_fn(k, grid).map_err(e)?.to_dvector();
        let diff = expm(&bundle.b, t).map_err(e)?.matrix - expm(&bundle.a, t).map_err(e)?.matrix;
        let value = (diff * f)[last];
        let expected = rank_one_semigroup_difference(t, k);
        let tol = 4.0 * k as f64 * h * h;
        ensure(
            (value - expected).abs() <= tol,
            format!("t={t} n={k}: {value:.6e} vs {expected:.6e}"),
        )?;
        signs.push(if value > 0.0 { '+' } else { '-' });
    }
    ensure(signs == ['+', '-', '-'], format!("signs {signs:?}"))?;
    Ok(format!("expm(B) err {worst:.2e}, signs {}", signs.iter().collect::<String>()))
}

fn projection_resolvent() -> Outcome {
    let bundle = build_rank_one_example(64).map_err(e)?;
    let p = bundle.p_b.matrix();
    let n = p.nrows();
    let r = resolvent(&bundle.p_b, 2.0).map_err(e)?.matrix;
    let err = (r - (p + DMatrix::<f64>::identity(n, n)) / 2.0).amax();
    ensure(err < 1e-12, format!("error {err:.3e}"))?;
    Ok(format!("error {err:.2e}"))
}

fn individual_vs_uniform() -> Outcome {
    let bundle = build_rank_one_example(128).map_err(e)?;
    let grid = &bundle.space_grid;
    let one = LatticeVector::ones(grid);
    let log_grid = TimeGrid::log(0.01, 50.0, 200).map_err(e)?;
    for k in [1u32, 2, 4] {
        let f = test_function_fn(k, grid).map_err(e)?;
        let r = check_individual_semigroup_domination(&bundle.a, &bundle.b, &f, &one, &log_grid, DEFAULT_EPS)
            .map_err(e)?;
        ensure(r.verdict.is_positive(), format!("individual f{k}: {:?}", r.verdict))?;
    }
    let times = [0.5, 1.0, 2.0];
    let grid_t = TimeGrid::explicit(times.to_vec()).map_err(e)?;
    let r = check_uniform_semigroup_domination(&bundle.a, &bundle.b, &grid_t, DEFAULT_EPS).map_err(e)?;
    ensure(r.samples.iter().all(|s| !s.pass), "uniform check passes at some sampled t")?;
    let w = r.witness.as_ref().ok_or("uniform check reported no witness")?;
    ensure(w.column.is_some() && w.lhs > w.rhs, "witness does not violate the inequality")?;
    let mut indices = Vec::new();
    for t in times {
        let eb = expm(&bundle.b, t).map_err(e)?.matrix;
        let ea = expm(&bundle.a, t).map_err(e)?.matrix.abs();
        let diff = eb - ea;
        // Column j is the point mass at x_j; the rank-one test index behind it is 1/x_j.
        let failing: Vec<f64> = (0..diff.ncols())
            .filter(|&j| diff.column(j).min() < -DEFAULT_EPS)
            .map(|j| 1.0 / grid.node(j))
            .collect();
        ensure(!failing.is_empty(), format!("no failing column at t={t}"))?;
        let smallest = failing.iter().copied().fold(f64::INFINITY, f64::min);
        ensure(
            smallest > (2.0 / 3.0) * (t / 2.0).exp(),
            format!("t={t}: witness index {smallest:.3} too small"),
        )?;
        indices.push(format!("{smallest:.2}"));
    }
    Ok(format!("individual f1,f2,f4 pass; smallest witness index per t: {}", indices.join(", ")))
}

fn transcendental_consistency() -> Outcome {
    let betas = [-0.4, -0.25, -0.1];
    let mut bounds = Vec::new();
    let mut worst = 0.0f64;
    for beta in betas {
        let op = build_laplacian(BoundaryCondition::NonlocalBeta(beta), None, 400).map_err(e)?;
        let s = analyze(&op).map_err(e)?.spectral_bound;
        let mu = solve_transcendental_mu(beta).map_err(e)?;
        let err = (s + mu * mu).abs();
        ensure(err < 5e-3, format!("beta={beta}: error {err:.3e}"))?;
        worst = worst.max(err);
        bounds.push(s);
    }
    ensure(bounds.windows(2).all(|w| w[0] < w[1]), format!("bounds not increasing: {bounds:?}"))?;
    Ok(format!("worst |eig + mu^2| = {worst:.2e}, monotone"))
}

fn sandwich_ordering() -> Outcome {
    let n = 100;
    let d = build_laplacian(BoundaryCondition::Dirichlet, None, n - 2).map_err(e)?;
    let nl = build_laplacian(BoundaryCondition::NonlocalSymmetric, None, n).map_err(e)?;
    let neu = build_laplacian(BoundaryCondition::Neumann, None, n).map_err(e)?;
    let sd = analyze(&d).map_err(e)?.spectral_bound;
    let snl = analyze(&nl).map_err(e)?.spectral_bound;
    let sn = analyze(&neu).map_err(e)?.spectral_bound;
    ensure(sd < snl && snl < 0.0, format!("bounds {sd}, {snl}"))?;
    ensure(sn.abs() < 1e-8, format!("s(neumann) = {sn:.3e}"))?;
    let log_grid = TimeGrid::log(0.01, 50.0, 200).map_err(e)?;
    let d_nl = check_uniform_semigroup_domination(&d, &nl, &log_grid, DEFAULT_EPS).map_err(e)?;
    let nl_n = check_uniform_semigroup_domination(&nl, &neu, &log_grid, DEFAULT_EPS).map_err(e)?;
    let mut times = Vec::new();
    for (label, r) in [("dirichlet<=nonlocal", &d_nl), ("nonlocal<=neumann", &nl_n)] {
        ensure(
            r.verdict == Verdict::EventualDominationObserved,
            format!("{label}: {:?}", r.verdict),
        )?;
        let t0 = r.earliest_pass.ok_or(format!("{label}: no earliest pass"))?;
        times.push(format!("{label} from t={t0:.4}"));
    }
    ensure(
        nl_n.witness.as_ref().is_some_and(|w| w.param == 0.01),
        "no small-t witness for nonlocal<=neumann",
    )?;
    Ok(times.join(", "))
}

fn odd_order_rigidity() -> Outcome {
    let n = 64;
    let mut parts = Vec::new();
    for (m, l) in [(0u32, 1u32), (1, 2)] {
        let am = build_odd_order(m, n).map_err(e)?;
        let al = build_odd_order(l, n).map_err(e)?;
        let outcome = search_converse_witness(&am, &al, 0.0, 200, SCENARIO_SEED).map_err(e)?;
        let ConverseOutcome::Witness(w) = outcome else {
            return Err(format!("no converse witness for ({m},{l})"));
        };
        let one = LatticeVector::ones(am.grid());
        for (label, f) in odd_order_trials(am.grid()) {
            let r = check_max_antimax(&am, &f, &one, 0.0, Side::Right, DEFAULT_EPS, &WindowOptions::default())
                .map_err(e)?;
            ensure(r.passes(), format!("A_{m} right window fails for {label}"))?;
        }
        parts.push(format!("({m},{l}) witness at trial {}", w.trial));
    }
    Ok(parts.join(", "))
}

fn identity_suite() -> Outcome {
    let mut ops = vec![
        build_laplacian(BoundaryCondition::Neumann, None, 40).map_err(e)?,
        build_laplacian(BoundaryCondition::Dirichlet, None, 40).map_err(e)?,
        build_laplacian(BoundaryCondition::NonlocalSymmetric, None, 40).map_err(e)?,
        build_laplacian(BoundaryCondition::NonlocalBeta(-0.25), None, 40).map_err(e)?,
        build_laplacian(BoundaryCondition::Antisymmetric, None, 40).map_err(e)?,
        build_laplacian(BoundaryCondition::Periodic, None, 40).map_err(e)?,
        build_odd_order(1, 32).map_err(e)?,
    ];
    let bundle = build_rank_one_example(40).map_err(e)?;
    ops.push(bundle.a);
    ops.push(bundle.b);
    let mut worst = [0.0f64; 4];
    let mut simple = 0;
    for op in &ops {
        let s = analyze(op).map_err(e)?.spectral_bound;
        let (l, m) = (s + 1.0, s + 3.0);
        let rl = resolvent(op, l).map_err(e)?.matrix;
        let rm = resolvent(op, m).map_err(e)?.matrix;
        let lhs = &rl - &rm;
        let rhs = (&rl * &rm) * (m - l);
        worst[0] = worst[0].max((lhs - &rhs).amax() / rhs.amax());

        let (t1, t2) = (0.03, 0.07);
        let prod = expm(op, t1).map_err(e)?.matrix * expm(op, t2).map_err(e)?.matrix;
        let joint = expm(op, t1 + t2).map_err(e)?.matrix;
        worst[1] = worst[1].max((prod - &joint).amax() / joint.amax());

        if op.boundary().is_some() || op.name().starts_with("rank_one") {
            let err = laplace_transform_check(op, s + 1.0, None, DEFAULT_QUAD_POINTS).map_err(e)?;
            worst[2] = worst[2].max(err);
        }

        let data = analyze(op).map_err(e)?;
        if data.dominant {
            simple += 1;
            let p = spectral_projection(op, s, None).map_err(e)?.p;
            let shifted = op.shifted(-s);
            // Final error along lambda_j = 2^-j, j = 0..=22; beyond that LU roundoff
            // (~ eps·|A|/lambda) overtakes the O(lambda) truncation term.
            let mut err = f64::INFINITY;
            for j in 0..=22 {
                let lambda = 2f64.powi(-j);
                let r = resolvent_with_cap(&shifted, lambda, CHECKER_RESOLVENT_CAP).map_err(e)?.matrix;
                err = (r * lambda - &p).amax();
            }
            worst[3] = worst[3].max(err);
        }
    }
    ensure(worst[0] < 1e-9, format!("resolvent identity {:.3e}", worst[0]))?;
    ensure(worst[1] < 1e-9, format!("semigroup law {:.3e}", worst[1]))?;
    ensure(worst[2] < 1e-6, format!("laplace transform {:.3e}", worst[2]))?;
    ensure(worst[3] < 1e-6, format!("lambda*Res -> P {:.3e}", worst[3]))?;
    ensure(simple >= 5, format!("only {simple} operators with a simple dominant eigenvalue"))?;
    Ok(format!(
        "resolvent {:.1e}, semigroup {:.1e}, laplace {:.1e}, lambda*Res {:.1e} over {} ops",
        worst[0],
        worst[1],
        worst[2],
        worst[3],
        ops.len()
    ))
}

fn cesaro_suite() -> Outcome {
    let r = scenario_cesaro(64).map_err(e)?;
    let mut ks = Vec::new();
    for sub in &r.sub_reports {
        if let SubReport::Scalar(c) = sub {
            ks.push(format!("{}={:.3}", c.name.split_whitespace().next().unwrap_or(""), c.value));
        }
    }
    ensure(r.pass, format!("mismatched: {:?}", r.failures()))?;
    Ok(format!("K fits {}; audits agree", ks.join(" ")))
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("antisymmetric spectrum", antisym_spectrum),
        ("antisymmetric projection sign", antisym_projection_sign),
        ("rank-one closed forms", rank_one_closed_forms),
        ("projection resolvent", projection_resolvent),
        ("individual vs uniform separation", individual_vs_uniform),
        ("transcendental consistency", transcendental_consistency),
        ("sandwich ordering", sandwich_ordering),
        ("odd-order rigidity", odd_order_rigidity),
        ("identity suite", identity_suite),
        ("cesaro suite", cesaro_suite),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail}) [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail}) [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
