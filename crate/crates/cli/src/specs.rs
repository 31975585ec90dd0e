//! Parsers for operator names, vector SPECs and time grids.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use evdom_core::{
    build_laplacian, build_laplacian_with_scheme, build_odd_order, build_rank_one_example,
    import_operator, sin_bulk_profile, test_function_fn, BoundaryCondition, GridSpec,
    LatticeVector, NodeScheme, OperatorHandle, TimeGrid,
};

pub const OPERATOR_NAMES: &str = "dirichlet, neumann, antisymmetric, periodic, nonlocal-symmetric, \
nonlocal-beta[:BETA], odd-order:K, rank-one-a, rank-one-b, projection-a, projection-b, file:PATH";

/// Grid choices shared by every operator built in one run.
#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub n: usize,
    pub beta: Option<f64>,
    pub scheme: Option<NodeScheme>,
}

pub fn parse_scheme(s: &str) -> Result<NodeScheme> {
    Ok(match s {
        "endpoints" | "endpoints-included" => NodeScheme::EndpointsIncluded,
        "interior" | "interior-only" => NodeScheme::InteriorOnly,
        "periodic" | "periodic-left-closed" => NodeScheme::PeriodicLeftClosed,
        "cell-centered" => NodeScheme::CellCentered,
        _ => bail!("unknown node scheme {s:?} (endpoints, interior, periodic, cell-centered)"),
    })
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .with_context(|| format!("{what}: {s:?} is not a number"))
}

fn laplacian(bc: BoundaryCondition, n: usize, scheme: Option<NodeScheme>, wide: bool) -> Result<OperatorHandle> {
    let interval = wide.then_some((-1.0, 1.0));
    Ok(match scheme {
        Some(s) => build_laplacian_with_scheme(bc, interval, n, s)?,
        None => build_laplacian(bc, interval, n)?,
    })
}

/// Build a named operator with `n` nodes (Dirichlet gets `n` interior nodes).
pub fn build_operator(name: &str, opts: &BuildOptions) -> Result<OperatorHandle> {
    build_named(name, opts.n, opts, false)
}

fn build_named(name: &str, n: usize, opts: &BuildOptions, wide: bool) -> Result<OperatorHandle> {
    let scheme = opts.scheme;
    if let Some(path) = name.strip_prefix("file:") {
        return import_operator(Path::new(path)).with_context(|| format!("importing {path}"));
    }
    if let Some(k) = name.strip_prefix("odd-order:").or_else(|| name.strip_prefix("odd-order-")) {
        let k: u32 = k.parse().with_context(|| format!("odd-order index {k:?}"))?;
        return Ok(build_odd_order(k, n)?);
    }
    if let Some(beta) = name.strip_prefix("nonlocal-beta:") {
        let beta = parse_f64(beta, "beta")?;
        return laplacian(BoundaryCondition::NonlocalBeta(beta), n, scheme, false);
    }
    let bc = match name {
        "dirichlet" => BoundaryCondition::Dirichlet,
        "neumann" => BoundaryCondition::Neumann,
        "antisymmetric" => BoundaryCondition::Antisymmetric,
        "periodic" => BoundaryCondition::Periodic,
        "nonlocal-symmetric" => BoundaryCondition::NonlocalSymmetric,
        "nonlocal-beta" => {
            let beta = opts
                .beta
                .ok_or_else(|| anyhow!("nonlocal-beta needs --beta or the nonlocal-beta:BETA form"))?;
            BoundaryCondition::NonlocalBeta(beta)
        }
        "rank-one-a" | "rank-one-b" | "projection-a" | "projection-b" => {
            let bundle = build_rank_one_example(n)?;
            return Ok(match name {
                "rank-one-a" => bundle.a,
                "rank-one-b" => bundle.b,
                "projection-a" => bundle.p_a,
                _ => bundle.p_b,
            });
        }
        _ => bail!("unknown operator {name:?}; expected one of {OPERATOR_NAMES}"),
    };
    laplacian(bc, n, scheme, wide)
}

/// Build `A` and `B` on a shared host grid. A Dirichlet operator paired with a
/// closed-grid one takes the `n − 2` interior nodes; an antisymmetric operator
/// paired with Neumann or periodic puts both on a cell-centered grid over (−1, 1)
/// unless `--scheme` says otherwise.
pub fn build_pair(a: &str, b: &str, opts: &BuildOptions) -> Result<(OperatorHandle, OperatorHandle)> {
    let wide = |me: &str, other: &str| {
        matches!(me, "neumann" | "periodic") && other == "antisymmetric"
    };
    let mut opts = *opts;
    if opts.scheme.is_none() && (wide(a, b) || wide(b, a)) {
        opts.scheme = Some(NodeScheme::CellCentered);
    }
    let opts = &opts;
    let closed = |s: &str| s != "dirichlet" && !s.starts_with("file:");
    let n_for = |me: &str, other: &str| {
        if me == "dirichlet" && closed(other) {
            opts.n.checked_sub(2).ok_or_else(|| anyhow!("--n too small"))
        } else {
            Ok(opts.n)
        }
    };
    let op_a = build_named(a, n_for(a, b)?, opts, wide(a, b))?;
    let op_b = build_named(b, n_for(b, a)?, opts, wide(b, a))?;
    op_a.host_grid()
        .ensure_compatible(op_b.host_grid())
        .with_context(|| format!("{a} and {b} do not share a grid; adjust --n or --scheme"))?;
    Ok((op_a, op_b))
}

pub const VECTOR_SPECS: &str = "ones, bump:X0:WIDTH, fn:N, indicator:A:B, sin-bulk, file:PATH";

/// Vector SPEC evaluated on `grid`.
pub fn parse_vector(spec: &str, grid: &GridSpec) -> Result<LatticeVector> {
    let parts: Vec<&str> = spec.split(':').collect();
    let v = match parts[..] {
        ["ones"] => LatticeVector::ones(grid),
        ["sin-bulk"] => sin_bulk_profile(grid),
        ["bump", x0, width] => {
            let (x0, width) = (parse_f64(x0, "bump center")?, parse_f64(width, "bump width")?);
            if width.is_nan() || width <= 0.0 {
                bail!("bump width must be positive");
            }
            LatticeVector::from_fn(grid, |x| (-((x - x0) / width).powi(2)).exp())
        }
        ["fn", k] => {
            let k: u32 = k.parse().with_context(|| format!("fn index {k:?}"))?;
            test_function_fn(k, grid)?
        }
        ["indicator", a, b] => {
            let (a, b) = (parse_f64(a, "indicator start")?, parse_f64(b, "indicator end")?);
            LatticeVector::from_fn(grid, |x| if x >= a && x <= b { 1.0 } else { 0.0 })
        }
        ["file", ..] => {
            let path = &spec["file:".len()..];
            let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            let values = text
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| parse_f64(t, path))
                .collect::<Result<Vec<_>>>()?;
            LatticeVector::new(grid.clone(), values)?
        }
        _ => bail!("unknown vector SPEC {spec:?}; expected one of {VECTOR_SPECS}"),
    };
    Ok(v)
}

/// `log:MIN:MAX:COUNT`, `linear:MIN:MAX:COUNT` or `list:V1,V2,...`.
pub fn parse_time_grid(spec: &str) -> Result<TimeGrid> {
    let parts: Vec<&str> = spec.split(':').collect();
    let grid = match parts[..] {
        [kind @ ("log" | "linear"), lo, hi, count] => {
            let (lo, hi) = (parse_f64(lo, "grid start")?, parse_f64(hi, "grid end")?);
            let count: usize = count.parse().with_context(|| format!("grid count {count:?}"))?;
            if kind == "log" {
                TimeGrid::log(lo, hi, count)?
            } else {
                TimeGrid::linear(lo, hi, count)?
            }
        }
        ["list", values] => TimeGrid::explicit(parse_list(values)?)?,
        _ => bail!("unknown grid SPEC {spec:?}; expected log:MIN:MAX:COUNT, linear:MIN:MAX:COUNT or list:V1,V2"),
    };
    Ok(grid)
}

pub fn parse_list(values: &str) -> Result<Vec<f64>> {
    values.split(',').map(|v| parse_f64(v, "list entry")).collect()
}
