#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use anyhow::Context;
use clap::{Parser, Subcommand};
use config::{ConfigError, Experiment};
use conegrowth::circle::{gamma_exact, rotation_number, CircleGroup};
use conegrowth::order::{relative_growth, GrowthSettings};
use conegrowth::stable::{dual_lower_bound, stable_norm_primal, BetaEstimate, DualSettings, PrimalSettings};
use conegrowth::suite::{run_suite, SuiteSettings};
use conegrowth::torus::{check_shape_properties, gamma_torus, shape_values, SphereTable};
use serde::Serialize;
use serde_json::{json, Value};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Relative growth in partially ordered groups: circle lifts, homogeneous
/// contact Hamiltonians on the torus, and stable norms.
#[derive(Parser)]
#[command(name = "conegrowth", version)]
struct Cli {
    /// Experiment config (JSON). Defaults to the shipped configs/default.json.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for JSON and CSV artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed of the randomized checks in `verify`; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Rotation numbers with enclosures.
    Rot,
    /// Brute-force relative growth of circle lifts.
    GammaCircle,
    /// Relative growth of homogeneous Hamiltonians on the sphere grid.
    GammaTorus,
    /// Shape values and their properties.
    Shape,
    /// Primal (and dual) stable norm estimates.
    StableNorm,
    /// Minimal action from the stable norm.
    Beta,
    /// Run the verification suite; exits with 1 if any criterion fails.
    Verify,
}

impl Command {
    fn stem(self) -> &'static str {
        match self {
            Command::Rot => "rot",
            Command::GammaCircle => "gamma_circle",
            Command::GammaTorus => "gamma_torus",
            Command::Shape => "shape",
            Command::StableNorm => "stable_norm",
            Command::Beta => "beta",
            Command::Verify => "verify",
        }
    }
}

enum Failure {
    Config(ConfigError),
    Run(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

impl From<conegrowth::Error> for Failure {
    fn from(e: conegrowth::Error) -> Self {
        Failure::Run(e.into())
    }
}

/// A CSV artifact: file name, header and rows.
struct Table {
    name: String,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: impl Into<String>, header: &[&'static str]) -> Self {
        Self {
            name: name.into(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

struct Output {
    json: Value,
    tables: Vec<Table>,
    /// Extra files written as-is.
    files: Vec<(String, Vec<u8>)>,
    pass: bool,
}

impl Output {
    fn new(json: Value, tables: Vec<Table>) -> Self {
        Self {
            json,
            tables,
            files: Vec::new(),
            pass: true,
        }
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn join(v: &[impl ToString]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

fn to_json(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T, Failure> {
    s.as_ref()
        .ok_or_else(|| Failure::Config(ConfigError::Invalid(format!("config has no `{name}` section"))))
}

fn rot(exp: &Experiment) -> Result<Output, Failure> {
    let s = section(&exp.config.rot, "rot")?;
    let mut rows = Vec::new();
    let mut table = Table::new("rot.csv", &["element", "iterations", "rot", "enclosure", "lo", "hi"]);
    for name in &s.elements {
        let r = rotation_number(exp.lift(name)?, s.iterations)?;
        let half = 0.5 * r.width();
        table.push(vec![
            name.clone(),
            s.iterations.to_string(),
            num(r.mid()),
            num(half),
            num(r.lo),
            num(r.hi),
        ]);
        rows.push(json!({"element": name, "iterations": s.iterations, "rot": r.mid(), "enclosure": half, "interval": r}));
    }
    Ok(Output::new(json!({ "rot": rows }), vec![table]))
}

fn gamma_circle(exp: &Experiment) -> Result<Output, Failure> {
    let s = section(&exp.config.gamma_circle, "gamma_circle")?;
    let model = CircleGroup::new(exp.circle_settings);
    let growth = GrowthSettings::default();
    let mut rows = Vec::new();
    let mut seq = Table::new("gamma_circle.csv", &["f", "g", "k", "gamma_k", "gamma_k_over_k"]);
    let mut summary = Table::new(
        "gamma_circle_summary.csv",
        &["f", "g", "horizon", "trend", "upper_envelope", "exact_lo", "exact_hi"],
    );
    for (f, g) in &s.pairs {
        let est = relative_growth(&model, exp.lift(f)?, exp.lift(g)?, s.horizon, &growth)
            .with_context(|| format!("gamma({f}, {g})"))?;
        let exact = gamma_exact(exp.lift(f)?, exp.lift(g)?, s.iterations).ok();
        for (i, gk) in est.gammas.iter().enumerate() {
            let k = i + 1;
            seq.push(vec![f.clone(), g.clone(), k.to_string(), gk.to_string(), num(*gk as f64 / k as f64)]);
        }
        summary.push(vec![
            f.clone(),
            g.clone(),
            s.horizon.to_string(),
            num(est.trend),
            num(est.upper_envelope),
            exact.map_or(String::new(), |x| num(x.lo)),
            exact.map_or(String::new(), |x| num(x.hi)),
        ]);
        rows.push(json!({"f": f, "g": g, "estimate": est, "exact": exact}));
    }
    Ok(Output::new(json!({ "gamma_circle": rows }), vec![seq, summary]))
}

fn gamma_torus_cmd(exp: &Experiment) -> Result<Output, Failure> {
    let s = section(&exp.config.gamma_torus, "gamma_torus")?;
    let mut rows = Vec::new();
    let mut table = Table::new("gamma_torus.csv", &["f", "g", "value", "enclosure", "upper", "refined"]);
    let mut files = Vec::new();
    for (f, g) in &s.pairs {
        let (hf, hg) = (exp.hamiltonian(f)?, exp.hamiltonian(g)?);
        let grid = exp.sphere_grid(hf.dim())?;
        let r = gamma_torus(hf, hg, &grid).with_context(|| format!("gamma({f}, {g})"))?;
        table.push(vec![
            f.clone(),
            g.clone(),
            num(r.value),
            num(r.enclosure),
            num(r.upper),
            r.refined.map_or(String::new(), num),
        ]);
        if s.write_tables {
            for (name, h) in [(f, hf), (g, hg)] {
                let file = format!("table_{name}.csv");
                if files.iter().any(|(n, _)| *n == file) {
                    continue;
                }
                let mut buf = Vec::new();
                SphereTable::sample(h, &grid)?.write_csv(&grid, &mut buf)?;
                files.push((file, buf));
            }
        }
        rows.push(json!({"f": f, "g": g, "growth": r}));
    }
    let mut out = Output::new(json!({ "gamma_torus": rows }), vec![table]);
    out.files = files;
    Ok(out)
}

fn shape(exp: &Experiment) -> Result<Output, Failure> {
    let s = section(&exp.config.shape, "shape")?;
    let mut rows = Vec::new();
    let mut table = Table::new("shape.csv", &["f", "g", "a", "r_minus", "r_plus", "properties_pass"]);
    let mut pass = true;
    for inst in &s.instances {
        let (f, g) = (exp.hamiltonian(&inst.f)?, exp.hamiltonian(&inst.g)?);
        let values = shape_values(&inst.a, f)?;
        let grid = exp.sphere_grid(f.dim())?;
        let report = check_shape_properties(f, g, &inst.a, inst.c, inst.k, &grid)?;
        pass &= report.passed();
        table.push(vec![
            inst.f.clone(),
            inst.g.clone(),
            join(&inst.a),
            num(values.r_minus),
            num(values.r_plus),
            report.passed().to_string(),
        ]);
        rows.push(json!({"f": inst.f, "g": inst.g, "c": inst.c, "k": inst.k, "values": values, "properties": report}));
    }
    let mut out = Output::new(json!({ "shape": rows }), vec![table]);
    out.pass = pass;
    Ok(out)
}

fn stable_norm(exp: &Experiment) -> Result<Output, Failure> {
    let s = section(&exp.config.stable_norm, "stable_norm")?;
    let mut rows = Vec::new();
    let mut seq = Table::new("stable_norm.csv", &["metric", "e", "k", "l_over_k"]);
    let mut summary = Table::new(
        "stable_norm_summary.csv",
        &["metric", "e", "envelope", "slack", "dual_lower_bound", "dual_value", "no_descent"],
    );
    for run in &s.runs {
        let metric = exp.metric(&run.metric)?;
        let est = stable_norm_primal(metric, &run.e, s.horizon, &PrimalSettings::new(s.resolution))
            .with_context(|| format!("stable norm of {:?} on {}", run.e, run.metric))?;
        let dual = if s.dual {
            Some(dual_lower_bound(metric, &run.e, &DualSettings::new(s.resolution))?)
        } else {
            None
        };
        let lower = dual.as_ref().map(|d| d.lower_bound(&run.e));
        for (i, v) in est.sequence.iter().enumerate() {
            seq.push(vec![run.metric.clone(), join(&run.e), (i + 1).to_string(), num(*v)]);
        }
        summary.push(vec![
            run.metric.clone(),
            join(&run.e),
            num(est.envelope),
            num(est.slack),
            lower.map_or(String::new(), num),
            dual.as_ref().map_or(String::new(), |d| num(d.value)),
            dual.as_ref().map_or(String::new(), |d| d.no_descent.to_string()),
        ]);
        rows.push(json!({"metric": run.metric, "estimate": est, "dual": dual, "dual_lower_bound": lower}));
    }
    Ok(Output::new(json!({ "stable_norm": rows }), vec![seq, summary]))
}

fn beta(exp: &Experiment) -> Result<Output, Failure> {
    let s = section(&exp.config.beta, "beta")?;
    let mut rows = Vec::new();
    let mut table = Table::new("beta.csv", &["metric", "e", "beta", "tolerance", "norm"]);
    for run in &s.runs {
        let metric = exp.metric(&run.metric)?;
        let est = stable_norm_primal(metric, &run.e, s.horizon, &PrimalSettings::new(s.resolution))?;
        let b = BetaEstimate::from_norm(&est);
        table.push(vec![run.metric.clone(), join(&run.e), num(b.beta), num(b.tolerance), num(b.norm)]);
        rows.push(json!({"metric": run.metric, "beta": b}));
    }
    Ok(Output::new(json!({ "beta": rows }), vec![table]))
}

fn verify(exp: &Experiment, seed: Option<u64>) -> Result<Output, Failure> {
    let settings = SuiteSettings {
        seed: seed.unwrap_or(exp.config.verify.seed),
    };
    let report = run_suite(settings);
    let mut table = Table::new(
        "verify.csv",
        &["criterion", "name", "record", "k", "lhs", "rhs", "tol", "pass"],
    );
    for c in &report.criteria {
        eprintln!("criterion {:>2} {:<28} {}", c.id, c.name, if c.pass { "PASS" } else { "FAIL" });
        for r in &c.records {
            table.push(vec![
                c.id.to_string(),
                c.name.clone(),
                r.name.clone(),
                r.k.map_or(String::new(), |k| k.to_string()),
                num(r.lhs),
                num(r.rhs),
                num(r.tol),
                r.pass.to_string(),
            ]);
        }
    }
    let mut out = Output::new(to_json(&report), vec![table]);
    out.pass = report.pass;
    Ok(out)
}

fn write_artifacts(dir: &Path, stem: &str, out: &Output) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut json = serde_json::to_vec_pretty(&out.json)?;
    json.push(b'\n');
    std::fs::write(dir.join(format!("{stem}.json")), json)?;
    for t in &out.tables {
        let mut w = csv::Writer::from_path(dir.join(&t.name))?;
        w.write_record(&t.header)?;
        for row in &t.rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    for (name, bytes) in &out.files {
        std::fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(ConfigError::Invalid("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let exp = Experiment::load(cli.config.as_deref())?;
    let out = match cli.command {
        Command::Rot => rot(&exp)?,
        Command::GammaCircle => gamma_circle(&exp)?,
        Command::GammaTorus => gamma_torus_cmd(&exp)?,
        Command::Shape => shape(&exp)?,
        Command::StableNorm => stable_norm(&exp)?,
        Command::Beta => beta(&exp)?,
        Command::Verify => verify(&exp, cli.seed)?,
    };
    if let Some(dir) = &cli.out {
        write_artifacts(dir, cli.command.stem(), &out)?;
    }
    let mut text = serde_json::to_string_pretty(&out.json).context("serializing output")?;
    text.push('\n');
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            return Err(anyhow::Error::from(e).context("writing to stdout").into())
        }
        _ => {}
    }
    Ok(out.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("conegrowth: some checks failed");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("conegrowth: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("conegrowth: {e:#}");
            ExitCode::from(1)
        }
    }
}
