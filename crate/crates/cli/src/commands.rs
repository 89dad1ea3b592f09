use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::Value;
use stickyflow::chain::{rescale, sample_sticky_bm, simulate_chain, ChainSpec};
use stickyflow::flow::{compose_check, propagate_kernel, sample_particles, Environment};
use stickyflow::halfplane::{
    exit_strip, exit_triangle, occupation_probability, simulate_halfplane, HalfPlaneSpec, StripSpec, TriangleSpec,
};
use stickyflow::params::{
    drift_transform, gauge_shift, p_from_mu, p_n_from_theta, theta_from_nu, validate_p, validate_theta, AtomicMeasure,
    FamilyDoc, FamilyKind, PFamily, ThetaFamily,
};
use stickyflow::path::JumpPath;
use stickyflow::rng::{self, Domain};
use stickyflow::verify::acceptance::{run_all, run_one, AcceptanceConfig, Criterion};
use stickyflow::verify::{equivalence_test, exit_experiment, moment_check_n2, replicate, Check};

use crate::args::*;
use crate::table::{int, num, Table};

/// Settings shared by every subcommand after flags, config and environment are merged.
pub struct RunSettings {
    pub seed: u64,
    pub replicas: usize,
    pub parallelism: usize,
}

/// A command result in both encodings.
pub struct Output {
    pub table: Table,
    /// Structured form for `--format json`; the table itself when absent.
    pub json: Option<Value>,
    pub default_format: Format,
    /// `Some(false)` when a statistical gate failed.
    pub gate: Option<bool>,
}

impl Output {
    fn bulk(table: Table) -> Self {
        Self { table, json: None, default_format: Format::Csv, gate: None }
    }

    fn report(json: impl Serialize, table: Table, gate: Option<bool>) -> Result<Self> {
        Ok(Self { table, json: Some(serde_json::to_value(json)?), default_format: Format::Json, gate })
    }
}

/// `x:w,...`, `uniform:c`, `endpoints`, or a path to a `{"atoms": ...}` file.
pub fn parse_measure(text: &str) -> Result<AtomicMeasure> {
    let text = text.trim();
    if text == "endpoints" {
        return Ok(AtomicMeasure::endpoints());
    }
    if let Some(c) = text.strip_prefix("uniform:") {
        let c: f64 = c.parse().with_context(|| format!("bad uniform scale {c:?}"))?;
        return Ok(AtomicMeasure::uniform(c)?);
    }
    if text.ends_with(".json") {
        let body = std::fs::read_to_string(text).with_context(|| format!("reading measure {text}"))?;
        let m: AtomicMeasure = serde_json::from_str(&body).with_context(|| format!("parsing measure {text}"))?;
        return Ok(AtomicMeasure::new(m.atoms().to_vec())?);
    }
    let atoms = text
        .split(',')
        .map(|pair| {
            let (x, w) = pair.split_once(':').with_context(|| format!("atom {pair:?} is not of the form x:w"))?;
            Ok((x.trim().parse::<f64>()?, w.trim().parse::<f64>()?))
        })
        .collect::<Result<Vec<_>>>()
        .with_context(|| format!("bad measure {text:?}"))?;
    Ok(AtomicMeasure::new(atoms)?)
}

fn read_doc(path: &Path) -> Result<FamilyDoc> {
    let body = std::fs::read_to_string(path).with_context(|| format!("reading family {}", path.display()))?;
    serde_json::from_str(&body).with_context(|| format!("parsing family {}", path.display()))
}

enum Family {
    Theta(ThetaFamily),
    P(PFamily),
}

fn read_family(path: &Path) -> Result<Family> {
    let doc = read_doc(path)?;
    Ok(match doc.kind {
        Some(FamilyKind::P) => Family::P(PFamily::from_doc(&doc)?),
        _ => Family::Theta(ThetaFamily::from_doc(&doc)?),
    })
}

fn family_table(doc: &FamilyDoc) -> Table {
    let kind = match doc.kind {
        Some(FamilyKind::P) => "p",
        _ => "theta",
    };
    let mut t = Table::new(["kind", "k", "l", "value"]);
    let mut entries: Vec<(usize, usize, f64)> = doc
        .values
        .iter()
        .map(|(key, &v)| {
            let (k, l) = key.split_once(',').expect("keys are written as k,l");
            (k.parse().unwrap(), l.parse().unwrap(), v)
        })
        .collect();
    entries.sort_by_key(|&(k, l, _)| (k + l, k));
    for (k, l, v) in entries {
        t.push(vec![Value::from(kind), int(k as i64), int(l as i64), num(v)]);
    }
    t
}

fn family_output(doc: FamilyDoc) -> Result<Output> {
    let table = family_table(&doc);
    Output::report(doc, table, None)
}

fn checks_table(rows: &[(&str, &Check)]) -> Table {
    let mut t = Table::new(["criterion", "name", "estimate", "stderr", "target", "tolerance", "pass"]);
    for (id, c) in rows {
        t.push(vec![
            Value::from(*id),
            Value::from(c.name.clone()),
            num(c.estimate),
            num(c.stderr),
            num(c.target),
            num(c.tolerance),
            Value::Bool(c.pass),
        ]);
    }
    t
}

fn path_table(path: &JumpPath<f64>, names: &[String]) -> Table {
    let mut t = Table::new(std::iter::once("time".to_string()).chain(names.iter().cloned()));
    for i in 0..path.len() {
        t.push(std::iter::once(num(path.entry_time(i))).chain(path.state(i).iter().map(|&v| num(v))).collect());
    }
    t
}

fn int_path_table(path: &JumpPath<i64>) -> Table {
    let names: Vec<String> = (1..=path.dim()).map(|i| format!("x_{i}")).collect();
    let mut t = Table::new(std::iter::once("time".to_string()).chain(names));
    for i in 0..path.len() {
        t.push(std::iter::once(num(path.entry_time(i))).chain(path.state(i).iter().map(|&v| int(v))).collect());
    }
    t
}

/// Joint path of independently recorded one-dimensional paths.
fn merge_paths(paths: &[JumpPath<i64>]) -> Result<JumpPath<i64>> {
    let first = paths.first().context("no particles")?;
    let mut times: Vec<f64> = paths.iter().flat_map(|p| p.jump_times().iter().copied()).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let at = |t: f64| paths.iter().map(|p| p.value_at(t).map(|v| v[0])).collect::<stickyflow::Result<Vec<i64>>>();
    let mut joint = JumpPath::new(first.t0(), &at(first.t0())?, first.horizon());
    for t in times {
        joint.push(t, &at(t)?);
    }
    Ok(joint)
}

fn lattice_family(source: &FamilySource, dim: usize) -> Result<PFamily> {
    let theta_to_p = |theta: &ThetaFamily| -> Result<PFamily> {
        let n = source.n.context("a θ-family needs the resolution --n")?;
        Ok(p_n_from_theta(theta, n)?)
    };
    match (&source.mu, &source.nu, &source.family) {
        (Some(mu), None, None) => Ok(p_from_mu(&parse_measure(mu)?, dim)?),
        (None, Some(nu), None) => theta_to_p(&theta_from_nu(&parse_measure(nu)?, source.beta, dim)?),
        (None, None, Some(path)) => match read_family(path)? {
            Family::P(p) => Ok(p),
            Family::Theta(theta) => theta_to_p(&theta),
        },
        _ => bail!("give exactly one of --mu, --nu or --family"),
    }
}

fn halfplane_spec(data: &HalfplaneData) -> Result<HalfPlaneSpec> {
    if data.start.len() != 2 {
        bail!("--start takes two values x,y, got {}", data.start.len());
    }
    Ok(HalfPlaneSpec::new(data.a0, data.theta0, (data.start[0], data.start[1]), data.n)?)
}

pub fn params(cmd: &ParamsCommand) -> Result<Output> {
    match cmd {
        ParamsCommand::FromNu { atoms, beta, n_max } => {
            family_output(theta_from_nu(&parse_measure(atoms)?, *beta, *n_max)?.to_doc())
        }
        ParamsCommand::FromMu { mu, n_max } => family_output(p_from_mu(&parse_measure(mu)?, *n_max)?.to_doc()),
        ParamsCommand::Validate { family } => {
            let findings = match read_family(family)? {
                Family::Theta(theta) => validate_theta(&theta),
                Family::P(p) => validate_p(&p),
            };
            if !findings.is_empty() {
                let list: Vec<String> = findings.iter().map(|v| v.to_string()).collect();
                bail!("family {} is invalid: {}", family.display(), list.join("; "));
            }
            let mut t = Table::new(["family", "valid"]);
            t.push(vec![Value::from(family.display().to_string()), Value::Bool(true)]);
            Output::report(serde_json::json!({ "family": family, "valid": true }), t, None)
        }
        ParamsCommand::Convert { family, n, gauge_shift: alpha, drift_transform: drift } => {
            let Family::Theta(theta) = read_family(family)? else { bail!("convert expects a θ-family") };
            let doc = match (n, alpha, drift) {
                (Some(n), None, false) => p_n_from_theta(&theta, *n)?.to_doc(),
                (None, Some(a), false) => gauge_shift(&theta, *a).to_doc(),
                (None, None, true) => drift_transform(&theta).to_doc(),
                _ => bail!("give one of --n, --gauge-shift or --drift-transform"),
            };
            family_output(doc)
        }
    }
}

fn environment(ctx: &RunSettings, w: &FlowWindow) -> Result<Environment> {
    Ok(Environment::new(ctx.seed, parse_measure(&w.mu)?, w.horizon.unwrap_or(w.t))?)
}

pub fn flow(ctx: &RunSettings, cmd: &FlowCommand) -> Result<Output> {
    match cmd {
        FlowCommand::Kernel { window, x0 } => {
            let env = environment(ctx, window)?;
            let row = propagate_kernel(&env, *x0, window.s, window.t)?;
            let mut t = Table::new(["site", "weight"]);
            for (site, w) in row.trimmed() {
                t.push(vec![int(site), num(w)]);
            }
            Ok(Output::bulk(t))
        }
        FlowCommand::Compose { window, x0, u } => {
            let env = Environment::new(ctx.seed, parse_measure(&window.mu)?, window.horizon.unwrap_or(*u))?;
            let residual = compose_check(&env, *x0, window.s, window.t, *u)?;
            let mut t = Table::new(["x0", "s", "t", "u", "residual"]);
            t.push(vec![int(*x0), num(window.s), num(window.t), num(*u), num(residual)]);
            Ok(Output::bulk(t))
        }
        FlowCommand::Particles { window, x0 } => {
            let env = environment(ctx, window)?;
            let mut stream = rng::stream(ctx.seed, Domain::Replica, 0);
            let paths = sample_particles(&env, x0, window.s, window.t, &mut stream)?;
            Ok(Output::bulk(int_path_table(&merge_paths(&paths)?)))
        }
    }
}

pub fn chain(ctx: &RunSettings, cmd: &ChainCommand) -> Result<Output> {
    match cmd {
        ChainCommand::Simulate { source, x0, horizon } => {
            let spec = ChainSpec::new(lattice_family(source, x0.len())?, x0.clone(), *horizon)?;
            let path = simulate_chain(&spec, &mut rng::stream(ctx.seed, Domain::Replica, 0))?;
            Ok(Output::bulk(int_path_table(&path)))
        }
        ChainCommand::Rescale { input, n } => {
            let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
            let table = Table::read_csv(&text)?;
            let dim = table.columns.len().saturating_sub(1);
            if dim == 0 || table.columns[0] != "time" || table.rows.is_empty() {
                bail!("{} is not a lattice path (columns time, x_1..x_N)", input.display());
            }
            let times = table.column("time")?;
            let coords: Vec<Vec<f64>> = table.columns[1..].iter().map(|c| table.column(c)).collect::<Result<_>>()?;
            let state = |i: usize| -> Result<Vec<i64>> {
                coords
                    .iter()
                    .map(|c| {
                        let v = c[i];
                        if v.fract() != 0.0 {
                            bail!("non-integer lattice value {v}");
                        }
                        Ok(v as i64)
                    })
                    .collect()
            };
            let mut raw = JumpPath::new(times[0], &state(0)?, *times.last().unwrap());
            for i in 1..times.len() {
                raw.push(times[i], &state(i)?);
            }
            let names: Vec<String> = table.columns[1..].to_vec();
            Ok(Output::bulk(path_table(&rescale(&raw, *n)?, &names)))
        }
        ChainCommand::StickyBm { theta0, y0, horizon, n } => {
            let path = sample_sticky_bm(*theta0, *y0, *horizon, *n, &mut rng::stream(ctx.seed, Domain::Replica, 0))?;
            Ok(Output::bulk(path_table(&path, &["eta".to_string()])))
        }
    }
}

pub fn halfplane(ctx: &RunSettings, cmd: &HalfplaneCommand) -> Result<Output> {
    match cmd {
        HalfplaneCommand::F { theta0, t_max, points } => {
            if *points < 2 {
                bail!("--points must be at least 2");
            }
            let mut t = Table::new(["t", "f"]);
            for i in 0..*points {
                let time = t_max * i as f64 / (*points - 1) as f64;
                t.push(vec![num(time), num(occupation_probability(*theta0, time)?)]);
            }
            Ok(Output::bulk(t))
        }
        HalfplaneCommand::Simulate { data, horizon } => {
            let spec = halfplane_spec(data)?;
            let path = simulate_halfplane(&spec, *horizon, &mut rng::stream(ctx.seed, Domain::Replica, 0))?;
            Ok(Output::bulk(path_table(&path, &["xi".to_string(), "eta".to_string()])))
        }
        HalfplaneCommand::Exit { data, strip, triangle } => {
            let spec = halfplane_spec(data)?;
            let outcomes = match (strip, triangle) {
                (Some(eps), None) => {
                    let strip = StripSpec::new(*eps)?;
                    replicate(ctx.replicas, ctx.seed, ctx.parallelism, |_, rng| exit_strip(&spec, &strip, rng))?
                }
                (None, Some(tri)) => {
                    if tri.len() != 3 {
                        bail!("--triangle takes three values eps,phi1,phi2, got {}", tri.len());
                    }
                    let tri = TriangleSpec::new(tri[0], tri[1], tri[2])?;
                    replicate(ctx.replicas, ctx.seed, ctx.parallelism, |_, rng| exit_triangle(&spec, &tri, rng))?
                }
                _ => bail!("give one of --strip or --triangle"),
            };
            let mut t = Table::new(["replica", "exit_x", "exit_y", "sticky_flag"]);
            for (i, o) in outcomes.into_iter().enumerate() {
                let o = o?;
                t.push(vec![int(i as i64), num(o.point.0), num(o.point.1), int(i64::from(o.sticky))]);
            }
            Ok(Output::bulk(t))
        }
    }
}

#[derive(Serialize)]
struct SuiteReport {
    suite: &'static str,
    seed: u64,
    pass: bool,
    criteria: Vec<Criterion>,
}

pub fn verify(ctx: &RunSettings, cmd: &VerifyCommand) -> Result<Output> {
    match cmd {
        VerifyCommand::Run { suite: Suite::Acceptance, only } => {
            let cfg = AcceptanceConfig { seed: ctx.seed, parallelism: ctx.parallelism };
            let criteria = if only.is_empty() {
                run_all(&cfg)?
            } else {
                only.iter()
                    .map(|id| run_one(id, &cfg).with_context(|| format!("unknown criterion {id:?}"))?.map_err(Into::into))
                    .collect::<Result<Vec<_>>>()?
            };
            for c in &criteria {
                eprintln!("{}", c.summary_line());
            }
            let pass = criteria.iter().all(|c| c.pass);
            let rows: Vec<(&str, &Check)> =
                criteria.iter().flat_map(|c| c.checks.iter().map(move |k| (c.id.as_str(), k))).collect();
            let table = checks_table(&rows);
            Output::report(SuiteReport { suite: "acceptance", seed: ctx.seed, pass, criteria }, table, Some(pass))
        }
        VerifyCommand::ExitStats { nu, beta, dim, eps, n } => {
            let theta = theta_from_nu(&parse_measure(nu)?, *beta, *dim)?;
            let stats = exit_experiment(&theta, *dim, *eps, *n, ctx.replicas, ctx.seed, ctx.parallelism)?;
            let mut t = Table::new(["cell", "count", "frequency", "stderr"]);
            for cell in &stats.cells {
                let (f, se) = stats.frequency(cell.count);
                t.push(vec![Value::from(cell.vector.clone()), int(cell.count as i64), num(f), num(se)]);
            }
            let (f, se) = stats.frequency(stats.multi_value);
            t.push(vec![Value::from("multi"), int(stats.multi_value as i64), num(f), num(se)]);
            Output::report(stats, t, None)
        }
        VerifyCommand::Moments { theta11, eps, n, tol_mean, tol_second } => {
            let report =
                moment_check_n2(*theta11, *eps, *n, ctx.replicas, ctx.seed, ctx.parallelism, (*tol_mean, *tol_second))?;
            let pass = report.checks.iter().all(|c| c.pass);
            let rows: Vec<(&str, &Check)> = report.checks.iter().map(|c| ("moments", c)).collect();
            let table = checks_table(&rows);
            Output::report(report, table, Some(pass))
        }
        VerifyCommand::Equivalence { mu, x0, t } => {
            let report = equivalence_test(&parse_measure(mu)?, x0, *t, ctx.replicas, ctx.seed, ctx.parallelism)?;
            let mut table = Table::new(["statistic", "degrees_of_freedom", "p_value", "bins", "replicas", "pass"]);
            table.push(vec![
                num(report.statistic),
                int(report.degrees_of_freedom as i64),
                num(report.p_value),
                int(report.bins as i64),
                int(report.replicas as i64),
                Value::Bool(report.pass),
            ]);
            let pass = report.pass;
            Output::report(report, table, Some(pass))
        }
    }
}

pub fn write(output: &Output, format: Option<Format>, out: Option<&PathBuf>) -> Result<()> {
    let mut buf = Vec::new();
    match format.unwrap_or(output.default_format) {
        Format::Csv => output.table.write_csv(&mut buf)?,
        Format::Json => {
            let value = match &output.json {
                Some(v) => v.clone(),
                None => serde_json::to_value(&output.table)?,
            };
            serde_json::to_writer_pretty(&mut buf, &value)?;
            buf.push(b'\n');
        }
    }
    match out {
        Some(path) => std::fs::write(path, buf).with_context(|| format!("writing {}", path.display())),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&buf)?;
            Ok(())
        }
    }
}
