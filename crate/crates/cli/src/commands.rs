//! One runner per subcommand, each producing a [`Report`].

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use evdom_core::{
    analyze, cesaro, check_cesaro_eventual_positivity, check_individual_semigroup_domination,
    check_max_antimax, check_resolvent_domination_window, check_uniform_semigroup_domination,
    expm, export_operator, gauge, mean_ergodic_projection, resolvent, scenario_antisym_vs_neumann,
    scenario_cesaro, scenario_nonlocal_beta, scenario_odd_order, scenario_rank_one,
    scenario_sandwich, search_converse_witness, BoundaryCondition, ConverseOutcome, DMatrix,
    DominationReport, LatticeVector, OperatorHandle, ScenarioResult, Side, SubReport,
    WindowOptions, WindowReport, DEFAULT_QUAD_POINTS,
};

use crate::report::{Format, Report, ReportProvenance, SampleRow};
use crate::specs::{build_operator, build_pair, parse_list, parse_scheme, parse_time_grid, parse_vector, BuildOptions};
use crate::{CheckCommand, Cli, Command, Common, GridArgs, ModeArg, ScenarioCommand, SideArg, VectorArgs, WindowArgs};

type Dispatch = (Report, Format, Option<PathBuf>);

fn options(grid: &GridArgs) -> Result<BuildOptions> {
    Ok(BuildOptions {
        n: grid.n,
        beta: grid.beta,
        scheme: grid.scheme.as_deref().map(parse_scheme).transpose()?,
    })
}

/// `{command, args, resolved}`: everything needed to reproduce the run.
fn config(cli: &Cli, resolved: Value) -> Result<Value> {
    let args = serde_json::to_value(&cli.command)?;
    let (name, body) = match args {
        Value::Object(m) => m.into_iter().next().context("empty command")?,
        Value::String(s) => (s, Value::Null),
        other => bail!("unexpected command encoding {other}"),
    };
    let (command, args) = match body {
        Value::Object(m) if m.len() == 1 && matches!(cli.command, Command::Check(_) | Command::Scenario(_)) => {
            let (sub, inner) = m.into_iter().next().context("empty subcommand")?;
            (format!("{name} {sub}"), inner)
        }
        other => (name, other),
    };
    Ok(json!({ "command": command, "args": args, "resolved": resolved }))
}

fn report(config: Value, anchor: &str, tolerance: f64) -> Report {
    Report {
        config,
        verdicts: json!({}),
        samples: Vec::new(),
        witnesses: Vec::new(),
        provenance: ReportProvenance {
            anchor: anchor.to_string(),
            tolerance,
        },
        sub_reports: Vec::new(),
        data: Value::Null,
        pass: true,
    }
}

fn default_u(b: &OperatorHandle, spec: Option<&str>) -> String {
    match spec {
        Some(s) => s.to_string(),
        None if b.boundary() == Some(BoundaryCondition::Dirichlet) => "sin-bulk".into(),
        None => "ones".into(),
    }
}

fn vectors(b: &OperatorHandle, args: &VectorArgs) -> Result<(LatticeVector, LatticeVector, String)> {
    let grid = b.host_grid();
    let u_spec = default_u(b, args.u.as_deref());
    let f = parse_vector(&args.f, grid).context("--f")?;
    let u = parse_vector(&u_spec, grid).context("--u")?;
    Ok((f, u, u_spec))
}

fn side(s: SideArg) -> Side {
    match s {
        SideArg::Right => Side::Right,
        SideArg::Left => Side::Left,
    }
}

fn window_options(w: &WindowArgs) -> WindowOptions {
    WindowOptions {
        delta: w.delta,
        levels: w.levels,
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn domination_samples(r: &DominationReport, series: &str) -> Vec<SampleRow> {
    let mut rows: Vec<SampleRow> = r
        .samples
        .iter()
        .map(|s| SampleRow {
            param: s.param,
            margin: s.margin,
            pass: s.pass,
            series: series.to_string(),
        })
        .collect();
    rows.extend(r.samples.iter().map(|s| SampleRow {
        param: s.param,
        margin: s.raw_margin,
        pass: s.pass,
        series: format!("{series}_raw"),
    }));
    rows
}

fn window_samples(r: &WindowReport, series: &str) -> Vec<SampleRow> {
    r.samples
        .iter()
        .map(|s| SampleRow {
            param: s.lambda,
            margin: s.margin,
            pass: s.pass,
            series: series.to_string(),
        })
        .collect()
}

fn fill_domination(out: &mut Report, r: &DominationReport, series: &str) -> Result<()> {
    out.samples = domination_samples(r, series);
    out.verdicts = json!({
        "verdict": r.verdict,
        "earliest_pass": r.earliest_pass,
        "shift": r.shift,
        "pair": r.pair,
    });
    out.witnesses = r.witness.iter().map(to_value).collect::<Result<_>>()?;
    if let Some(c) = &r.rank_one_constants {
        out.data = json!({ "rank_one_constants": c });
    }
    out.pass = r.verdict.is_positive();
    Ok(())
}

fn fill_window(out: &mut Report, r: &WindowReport) -> Result<()> {
    out.samples = window_samples(r, &format!("{:?}", r.side).to_lowercase());
    out.verdicts = json!({
        "verdict": r.verdict,
        "lambda0": r.lambda0,
        "delta_found": r.delta_found,
        "skipped": r.skipped,
    });
    out.witnesses = r.witness.iter().map(to_value).collect::<Result<_>>()?;
    out.data = json!({
        "note": "finite matrices: every isolated eigenvalue is a pole of the resolvent",
    });
    out.pass = r.passes();
    Ok(())
}

/// Margin of `M f` against `u`, or the smallest entry of `M` when `f` is absent.
fn sample_matrix(
    op: &OperatorHandle,
    m: &DMatrix<f64>,
    fu: Option<&(LatticeVector, LatticeVector)>,
    eps: f64,
) -> Result<(f64, bool)> {
    Ok(match fu {
        Some((f, u)) => {
            let v = op.lift_vector(&(m * op.restrict_vector(&f.to_dvector())));
            let v = LatticeVector::from_dvector(u.grid(), &v)?;
            let g = gauge(&v, u)?.lower;
            (g, g > eps)
        }
        None => {
            let min = m.min();
            (min, min >= -eps)
        }
    })
}

fn optional_vectors(
    op: &OperatorHandle,
    f: Option<&str>,
    u: Option<&str>,
) -> Result<Option<(LatticeVector, LatticeVector)>> {
    match f {
        None => {
            if u.is_some() {
                bail!("--u needs --f");
            }
            Ok(None)
        }
        Some(f) => {
            let grid = op.host_grid();
            let u_spec = default_u(op, u);
            Ok(Some((parse_vector(f, grid).context("--f")?, parse_vector(&u_spec, grid).context("--u")?)))
        }
    }
}

fn describe(op: &OperatorHandle) -> Value {
    json!({
        "name": op.name(),
        "n": op.n(),
        "interval": op.grid().interval(),
        "node_scheme": op.grid().node_scheme(),
        "host_n": op.host_grid().n(),
        "boundary": op.boundary().map(|b| b.to_string()),
        "provenance": op.provenance(),
        "symmetric": op.is_symmetric(),
        "max_norm": op.max_norm(),
        "exact_spectrum": op.exact_spectrum().map(|s| {
            s.iter()
                .map(|e| json!({ "re": e.value.re, "im": e.value.im, "description": e.description }))
                .collect::<Vec<_>>()
        }),
    })
}

pub fn dispatch(cli: &Cli) -> Result<Dispatch> {
    match &cli.command {
        Command::OpBuild { op, grid, common } => {
            let op = build_operator(op, &options(grid)?)?;
            let mut out = report(config(cli, json!({}))?, "operator construction", common.eps);
            out.data = describe(&op);
            Ok(finish(out, common))
        }
        Command::Spectrum { op, grid, k, common } => {
            let op = build_operator(op, &options(grid)?)?;
            let d = analyze(&op)?;
            let k = (*k).min(d.eigenvalues.len());
            let mut out = report(config(cli, json!({ "k": k }))?, "dense eigensolve", common.eps);
            out.samples = d.eigenvalues[..k]
                .iter()
                .enumerate()
                .map(|(i, z)| SampleRow {
                    param: i as f64,
                    margin: z.re,
                    pass: true,
                    series: "eigenvalue_re".into(),
                })
                .collect();
            out.verdicts = json!({ "spectral_bound": d.spectral_bound, "dominant": d.dominant, "gap": d.gap });
            out.data = json!({
                "operator": describe(&op),
                "eigenvalues": d.eigenvalues[..k].iter().map(|z| json!({ "re": z.re, "im": z.im })).collect::<Vec<_>>(),
                "symmetric_path": d.symmetric_path,
            });
            Ok(finish(out, common))
        }
        Command::Semigroup { op, grid, t_grid, f, u, common } => {
            let op = build_operator(op, &options(grid)?)?;
            let times = parse_time_grid(t_grid)?;
            let fu = optional_vectors(&op, f.as_deref(), u.as_deref())?;
            let rows = times
                .values()
                .par_iter()
                .map(|&t| {
                    let m = expm(&op, t)?.matrix;
                    let (margin, pass) = sample_matrix(&op, &m, fu.as_ref(), common.eps)?;
                    Ok((t, margin, pass))
                })
                .collect::<Result<Vec<_>>>()?;
            let series = if fu.is_some() { "gauge_lower" } else { "min_entry" };
            let mut out = report(config(cli, json!({ "series": series }))?, "matrix exponential", common.eps);
            out.samples = rows
                .iter()
                .map(|&(t, margin, pass)| SampleRow { param: t, margin, pass, series: series.into() })
                .collect();
            out.verdicts = json!({ "all_pass": rows.iter().all(|r| r.2) });
            Ok(finish(out, common))
        }
        Command::Resolvent { op, grid, lambda, f, u, common } => {
            let op = build_operator(op, &options(grid)?)?;
            let lambdas = parse_list(lambda)?;
            let fu = optional_vectors(&op, f.as_deref(), u.as_deref())?;
            let rows = lambdas
                .par_iter()
                .map(|&l| {
                    let m = resolvent(&op, l)?.matrix;
                    let (margin, pass) = sample_matrix(&op, &m, fu.as_ref(), common.eps)?;
                    Ok((l, margin, pass))
                })
                .collect::<Result<Vec<_>>>()?;
            let series = if fu.is_some() { "gauge_lower" } else { "min_entry" };
            let mut out = report(config(cli, json!({ "series": series }))?, "resolvent solve", common.eps);
            out.samples = rows
                .iter()
                .map(|&(l, margin, pass)| SampleRow { param: l, margin, pass, series: series.into() })
                .collect();
            out.verdicts = json!({ "all_pass": rows.iter().all(|r| r.2) });
            Ok(finish(out, common))
        }
        Command::Cesaro { op, grid, r_grid, common } => {
            let op = build_operator(op, &options(grid)?)?;
            let rs = parse_time_grid(r_grid)?;
            let s = analyze(&op)?.spectral_bound;
            let shifted = op.shifted(-s);
            let p = mean_ergodic_projection(&shifted)?.p;
            let rows = rs
                .values()
                .par_iter()
                .map(|&r| {
                    let c = cesaro(&shifted, r, DEFAULT_QUAD_POINTS)?;
                    Ok((r, (c.matrix - &p).amax(), c.method))
                })
                .collect::<Result<Vec<_>>>()?;
            let k = rows.iter().map(|(r, e, _)| r * e).fold(0.0, f64::max);
            let mut out = report(
                config(cli, json!({ "shift": s }))?,
                "Cesaro means converge to the mean-ergodic projection at rate K/r",
                common.eps,
            );
            out.samples = rows
                .iter()
                .map(|&(r, e, _)| SampleRow { param: r, margin: e, pass: true, series: "projection_error".into() })
                .collect();
            out.verdicts = json!({ "fitted_k": k, "spectral_bound": s });
            out.data = json!({ "methods": rows.iter().map(|r| r.2).collect::<Vec<_>>() });
            Ok(finish(out, common))
        }
        Command::Check(check) => run_check(cli, check),
        Command::Scenario(scenario) => run_scenario(cli, scenario),
        Command::Export { op, grid, out, format } => {
            let handle = build_operator(op, &options(grid)?)?;
            let sidecar = export_operator(&handle, out)?;
            let mut rep = report(config(cli, json!({}))?, "Matrix Market export", 0.0);
            rep.data = json!({
                "matrix": out.display().to_string(),
                "sidecar": sidecar.display().to_string(),
                "operator": describe(&handle),
            });
            Ok((rep, *format, None))
        }
    }
}

fn finish(out: Report, common: &Common) -> Dispatch {
    (out, common.format, common.out.clone())
}

fn run_check(cli: &Cli, check: &CheckCommand) -> Result<Dispatch> {
    match check {
        CheckCommand::Dominate { a, b, mode, grid, vectors: vargs, t_grid, common } => {
            let (a, b) = build_pair(a, b, &options(grid)?)?;
            let times = parse_time_grid(t_grid)?;
            let (r, resolved) = match mode {
                ModeArg::Individual => {
                    let (f, u, u_spec) = vectors(&b, vargs)?;
                    let r = check_individual_semigroup_domination(&a, &b, &f, &u, &times, common.eps)?;
                    (r, json!({ "u": u_spec }))
                }
                ModeArg::Uniform => (check_uniform_semigroup_domination(&a, &b, &times, common.eps)?, json!({})),
            };
            let anchor = "eventual domination |e^{tA}f| <= e^{tB}|f| for all large t";
            let mut out = report(config(cli, resolved)?, anchor, common.eps);
            let series = match mode {
                ModeArg::Individual => "individual",
                ModeArg::Uniform => "uniform",
            };
            fill_domination(&mut out, &r, series)?;
            Ok(finish(out, common))
        }
        CheckCommand::Window { a, b, grid, vectors: vargs, window, common } => {
            let (a, b) = build_pair(a, b, &options(grid)?)?;
            let (f, u, u_spec) = vectors(&b, vargs)?;
            let lambda0 = match window.lambda0 {
                Some(l) => l,
                None => analyze(&b)?.spectral_bound,
            };
            let r = check_resolvent_domination_window(&a, &b, &f, &u, lambda0, side(window.side), common.eps, &window_options(window))?;
            let anchor = "resolvent domination in a one-sided neighbourhood of the spectral bound";
            let mut out = report(config(cli, json!({ "lambda0": lambda0, "u": u_spec }))?, anchor, common.eps);
            fill_window(&mut out, &r)?;
            Ok(finish(out, common))
        }
        CheckCommand::MaxAntimax { op, grid, vectors: vargs, window, common } => {
            let op = build_operator(op, &options(grid)?)?;
            let (f, u, u_spec) = vectors(&op, vargs)?;
            let lambda0 = match window.lambda0 {
                Some(l) => l,
                None => analyze(&op)?.spectral_bound,
            };
            let r = check_max_antimax(&op, &f, &u, lambda0, side(window.side), common.eps, &window_options(window))?;
            let anchor = "maximum (right) and anti-maximum (left) principles";
            let mut out = report(config(cli, json!({ "lambda0": lambda0, "u": u_spec }))?, anchor, common.eps);
            fill_window(&mut out, &r)?;
            Ok(finish(out, common))
        }
        CheckCommand::Converse { a, b, grid, lambda0, trials, common } => {
            let (a, b) = build_pair(a, b, &options(grid)?)?;
            let lambda0 = match lambda0 {
                Some(l) => *l,
                None => analyze(&b)?.spectral_bound,
            };
            let outcome = search_converse_witness(&a, &b, lambda0, *trials, common.seed)?;
            let anchor = "0 <= Res(l,A)f <= Res(l,B)f near the spectral bound forces A = B; a witness shows they differ";
            let mut out = report(config(cli, json!({ "lambda0": lambda0 }))?, anchor, common.eps);
            let found = matches!(outcome, ConverseOutcome::Witness(_));
            out.verdicts = json!({ "witness_found": found });
            out.witnesses = vec![to_value(&outcome)?];
            out.pass = found;
            Ok(finish(out, common))
        }
        CheckCommand::Cesaro { op, grid, vectors: vargs, r_grid, common } => {
            let op = build_operator(op, &options(grid)?)?;
            let (f, u, u_spec) = vectors(&op, vargs)?;
            let rs = parse_time_grid(r_grid)?;
            let r = check_cesaro_eventual_positivity(&op, &f, &u, &rs, common.eps)?;
            let anchor = "Cesaro means of the rescaled semigroup are eventually strongly positive";
            let mut out = report(config(cli, json!({ "u": u_spec }))?, anchor, common.eps);
            fill_domination(&mut out, &r, "cesaro")?;
            Ok(finish(out, common))
        }
    }
}

fn run_scenario(cli: &Cli, scenario: &ScenarioCommand) -> Result<Dispatch> {
    let (result, common, anchor) = match scenario {
        ScenarioCommand::RankOne { n_grid, common } => (
            scenario_rank_one(*n_grid)?,
            common,
            "rank-one pair: individual but not uniform eventual domination",
        ),
        ScenarioCommand::AntisymVsNeumann { n_grid, common } => (
            scenario_antisym_vs_neumann(*n_grid)?,
            common,
            "Neumann semigroup eventually dominates the anti-symmetric one",
        ),
        ScenarioCommand::NonlocalBeta { beta1, beta2, n_grid, common } => (
            scenario_nonlocal_beta(*beta1, *beta2, *n_grid)?,
            common,
            "ordering of non-local Robin-type Laplacians in beta",
        ),
        ScenarioCommand::Sandwich { n_grid, common } => (
            scenario_sandwich(*n_grid)?,
            common,
            "Dirichlet <= non-local <= Neumann for large t",
        ),
        ScenarioCommand::OddOrder { m, l, n_grid, common } => (
            scenario_odd_order(*m, *l, *n_grid)?,
            common,
            "odd-order operators: resolvent domination forces equal order",
        ),
        ScenarioCommand::Cesaro { n_grid, common } => (
            scenario_cesaro(*n_grid)?,
            common,
            "four equivalent characterisations of Cesaro eventual positivity",
        ),
    };
    let mut out = report(config(cli, json!({}))?, anchor, common.eps);
    fill_scenario(&mut out, &result)?;
    Ok(finish(out, common))
}

fn fill_scenario(out: &mut Report, result: &ScenarioResult) -> Result<()> {
    for sub in &result.sub_reports {
        match sub {
            SubReport::Domination { label, report, .. } => {
                out.samples.extend(domination_samples(report, label));
                if let Some(w) = &report.witness {
                    out.witnesses.push(json!({ "label": label, "witness": w }));
                }
            }
            SubReport::Window { label, report, .. } => {
                out.samples.extend(window_samples(report, label));
                if let Some(w) = &report.witness {
                    out.witnesses.push(json!({ "label": label, "witness": w }));
                }
            }
            SubReport::Converse { label, outcome, .. } => {
                out.witnesses.push(json!({ "label": label, "witness": outcome }));
            }
            _ => {}
        }
        out.sub_reports.push(to_value(sub)?);
    }
    out.verdicts = json!({ "pass": result.pass, "failures": result.failures() });
    out.data = json!({ "name": result.name, "inputs": result.inputs, "notes": result.notes });
    out.pass = result.pass;
    Ok(())
}
