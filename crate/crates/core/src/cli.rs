//! Command-line front end.
//!
//! Every command that writes files also writes a JSON manifest listing each
//! output with its SHA-256 digest. The manifest is re-verified before exit.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensembles::{product_spectrum, read_dump, sample_pair, write_dump, EnsembleSpec, EntryDistribution};
use crate::error::Error;
use crate::harness::{run_experiment, ExperimentKind, ExperimentOutcome, ExperimentPlan, MIN_COUNTING_POINTS, MIN_E_GRID};
use crate::laws::{density_curve, manova_stieltjes, support_edges, Law, ModelParams};
use crate::selfconsistent::{ProductSolver, SolverConfig};
use crate::Complex64;

/// Environment variable that overrides every seed flag and plan seed.
pub const SEED_ENV: &str = "MANOVA_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MATH: i32 = 3;
pub const EXIT_THRESHOLD: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("plan: {0}")]
    Plan(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("digest mismatch for {0}")]
    Digest(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e {
                Error::InvalidParams(_) | Error::Validation(_) | Error::EmptyWindow { .. } => EXIT_USAGE,
                Error::ExperimentThreshold { .. } => EXIT_THRESHOLD,
                _ => EXIT_MATH,
            },
            CliError::Plan(_) | CliError::Io { .. } => EXIT_USAGE,
            CliError::Csv(_) | CliError::Json(_) | CliError::Digest(_) => EXIT_FAILURE,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "manova", version, about = "Spectral laws and local-law experiments for MANOVA matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct ParamArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub b: f64,
}

impl ParamArgs {
    fn params(&self) -> Result<ModelParams, CliError> {
        Ok(ModelParams::new(self.a, self.b)?)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    /// Left end of the real grid; defaults to the support's lower edge.
    #[arg(long, allow_negative_numbers = true)]
    pub from: Option<f64>,
    /// Right end of the real grid; defaults to the support's upper edge.
    #[arg(long, allow_negative_numbers = true)]
    pub to: Option<f64>,
    #[arg(long, default_value_t = 50)]
    pub points: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Support edges of every law as JSON.
    Edges {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Density of one law on a grid, as CSV `(x, density)`.
    Density {
        #[arg(long, default_value = "manova")]
        law: String,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Closed-form MANOVA Stieltjes transform at `E + i eta`.
    Stieltjes {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 0.01)]
        eta: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Self-consistent product-matrix Stieltjes transform at `E + i eta`.
    Solve {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 0.05)]
        eta: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sample one `(X, Y)` pair and write it as a binary dump.
    Sample {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value = "complex-gaussian")]
        dist: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// MANOVA and product eigenvalues of a dumped pair, as CSV.
    Spectrum {
        #[arg(long)]
        dump: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a plan file and write per-trial rows, a summary and a manifest.
    Experiment {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Path relative to the manifest's directory.
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub parameters: serde_json::Value,
    pub master_seed: Option<u64>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub outputs: Vec<FileDigest>,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

pub fn sha256_file(path: &Path) -> Result<(String, u64), CliError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

/// Recompute every digest listed in a manifest.
pub fn verify_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    for entry in &manifest.outputs {
        let (sha, bytes) = sha256_file(&dir.join(&entry.file))?;
        if sha != entry.sha256 || bytes != entry.bytes {
            return Err(CliError::Digest(entry.file.clone()));
        }
    }
    Ok(manifest)
}

struct ManifestWriter {
    path: PathBuf,
    subcommand: &'static str,
    parameters: serde_json::Value,
    master_seed: Option<u64>,
    started: u128,
    files: Vec<PathBuf>,
}

impl ManifestWriter {
    fn new(path: PathBuf, subcommand: &'static str, parameters: serde_json::Value, master_seed: Option<u64>) -> Self {
        Self {
            path,
            subcommand,
            parameters,
            master_seed,
            started: now_ms(),
            files: Vec::new(),
        }
    }

    fn add(&mut self, file: PathBuf) {
        self.files.push(file);
    }

    fn finish(self) -> Result<PathBuf, CliError> {
        let dir = self.path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let mut outputs = Vec::with_capacity(self.files.len());
        for f in &self.files {
            let (sha256, bytes) = sha256_file(f)?;
            let rel = f.strip_prefix(&dir).unwrap_or(f);
            outputs.push(FileDigest {
                file: rel.to_string_lossy().into_owned(),
                sha256,
                bytes,
            });
        }
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: self.subcommand.to_string(),
            parameters: self.parameters,
            master_seed: self.master_seed,
            started_unix_ms: self.started,
            finished_unix_ms: now_ms(),
            outputs,
        };
        write_json(&self.path, &manifest)?;
        verify_manifest(&self.path)?;
        Ok(self.path)
    }
}

fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(OsString::from).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn write_csv<T: Serialize>(out: impl Write, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::Csv(e.into()))?;
    Ok(())
}

fn write_csv_file<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    write_csv(io::BufWriter::new(file), rows)
}

/// Either a file with a manifest next to it, or stdout.
fn emit_csv<T: Serialize>(
    output: Option<&Path>,
    stdout: &mut dyn Write,
    rows: &[T],
    subcommand: &'static str,
    parameters: serde_json::Value,
) -> Result<(), CliError> {
    match output {
        Some(path) => {
            write_csv_file(path, rows)?;
            let mut m = ManifestWriter::new(manifest_path_for(path), subcommand, parameters, None);
            m.add(path.to_path_buf());
            m.finish()?;
            Ok(())
        }
        None => write_csv(stdout, rows),
    }
}

#[derive(Serialize)]
struct DensityRow {
    x: f64,
    density: f64,
}

#[derive(Serialize)]
struct StieltjesRow {
    re_z: f64,
    im_z: f64,
    re_m: f64,
    im_m: f64,
}

#[derive(Serialize)]
struct SolveRow {
    re_z: f64,
    im_z: f64,
    re_m: f64,
    im_m: f64,
    residual: f64,
    iterations: usize,
    panels: usize,
    stability_margin: f64,
}

#[derive(Serialize)]
struct SpectrumRow {
    k: usize,
    lambda: f64,
    mu: f64,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    n: usize,
    eta: f64,
    metric: &'a str,
    count: usize,
    min: f64,
    q1: f64,
    median: f64,
    q3: f64,
    max: f64,
    trials: usize,
    successes: usize,
    failures: usize,
    seed: u64,
}

fn grid(g: &GridArgs, support: (f64, f64)) -> Result<Vec<f64>, CliError> {
    let from = g.from.unwrap_or(support.0);
    let to = g.to.unwrap_or(support.1);
    if g.points == 0 || !(from <= to) || !from.is_finite() || !to.is_finite() {
        return Err(Error::Validation(format!(
            "need points >= 1 and finite from <= to, got {} points on [{from}, {to}]",
            g.points
        ))
        .into());
    }
    Ok(match g.points {
        1 => vec![from],
        p => (0..p).map(|i| from + (to - from) * i as f64 / (p - 1) as f64).collect(),
    })
}

fn check_eta(eta: f64) -> Result<(), CliError> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!("eta must be > 0, got {eta}")).into())
    }
}

/// Seed from the environment, else the flag, else the fallback.
fn resolve_seed(flag: Option<u64>, fallback: u64) -> Result<u64, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Error::Validation(format!("{SEED_ENV} must be an unsigned integer, got '{s}'")).into()),
        Err(_) => Ok(flag.unwrap_or(fallback)),
    }
}

/// One value or a list of values.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleSection {
    a: f64,
    b: f64,
    #[serde(default)]
    dist: Option<String>,
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    n: OneOrMany<usize>,
    #[serde(default)]
    eta: Option<OneOrMany<f64>>,
    trials: usize,
    #[serde(default)]
    kappa: Option<f64>,
    #[serde(default)]
    e_grid: Option<usize>,
    #[serde(default)]
    points: Option<usize>,
    #[serde(default)]
    threads: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    ensemble: EnsembleSection,
    locallaw: Option<ExperimentSection>,
    counting: Option<ExperimentSection>,
    deloc: Option<ExperimentSection>,
    rigidity: Option<ExperimentSection>,
    scaling: Option<ExperimentSection>,
}

/// Parse and validate a plan file: an `[ensemble]` section plus exactly one
/// experiment section named after its kind.
pub fn parse_plan(text: &str) -> Result<ExperimentPlan, CliError> {
    let file: PlanFile = toml::from_str(text).map_err(|e| CliError::Plan(e.to_string()))?;
    let mut sections: Vec<(ExperimentKind, ExperimentSection)> = [
        (ExperimentKind::Locallaw, file.locallaw),
        (ExperimentKind::Counting, file.counting),
        (ExperimentKind::Deloc, file.deloc),
        (ExperimentKind::Rigidity, file.rigidity),
        (ExperimentKind::Scaling, file.scaling),
    ]
    .into_iter()
    .filter_map(|(k, s)| s.map(|s| (k, s)))
    .collect();
    if sections.len() != 1 {
        return Err(CliError::Plan(format!(
            "expected exactly one experiment section, found {}",
            sections.len()
        )));
    }
    let (kind, section) = sections.pop().expect("one section");
    let params = ModelParams::new(file.ensemble.a, file.ensemble.b)?;
    let dist: EntryDistribution = match &file.ensemble.dist {
        Some(d) => d.parse()?,
        None => EntryDistribution::ComplexGaussian,
    };
    let eta_list = match section.eta {
        Some(e) => e.into_vec(),
        None if matches!(kind, ExperimentKind::Deloc | ExperimentKind::Rigidity) => vec![0.05],
        None => return Err(CliError::Plan(format!("[{kind}] needs eta"))),
    };
    let plan = ExperimentPlan {
        kind,
        params,
        dist,
        master_seed: file.ensemble.seed,
        n_list: section.n.into_vec(),
        eta_list,
        trials: section.trials,
        kappa: section.kappa.unwrap_or(0.05),
        e_grid: section.e_grid.unwrap_or(MIN_E_GRID),
        counting_points: section.points.unwrap_or(MIN_COUNTING_POINTS),
        threads: section.threads.unwrap_or(1),
    };
    plan.validate()?;
    Ok(plan)
}

pub fn load_plan(path: &Path) -> Result<ExperimentPlan, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_plan(&text)
}

/// Write every artifact of an experiment into `dir`. Returns the manifest path.
pub fn write_experiment(outcome: &ExperimentOutcome, dir: &Path, started: u128) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let plan = &outcome.plan;
    let mut m = ManifestWriter::new(
        dir.join("manifest.json"),
        "experiment",
        serde_json::to_value(plan)?,
        Some(plan.master_seed),
    );
    m.started = started;

    let trials: Vec<_> = outcome.runs.iter().flat_map(|r| r.records.iter().cloned()).collect();
    let path = dir.join("trials.csv");
    write_csv_file(&path, &trials)?;
    m.add(path);

    let mut summary = Vec::new();
    for run in &outcome.runs {
        let s = &run.summary;
        for metric in &s.metrics {
            summary.push(SummaryRow {
                n: s.n,
                eta: s.eta,
                metric: metric.metric,
                count: metric.count,
                min: metric.min,
                q1: metric.q1,
                median: metric.median,
                q3: metric.q3,
                max: metric.max,
                trials: s.trials,
                successes: s.successes,
                failures: s.failures,
                seed: s.seed,
            });
        }
    }
    let path = dir.join("summary.csv");
    write_csv_file(&path, &summary)?;
    m.add(path);

    for run in &outcome.runs {
        let tag = format!("n{}_eta{}", run.n, run.eta);
        if !run.locallaw_rows.is_empty() {
            let path = dir.join(format!("locallaw_rows_{tag}.csv"));
            write_csv_file(&path, &run.locallaw_rows)?;
            m.add(path);
        }
        if !run.counting_rows.is_empty() {
            let path = dir.join(format!("counting_rows_{tag}.csv"));
            write_csv_file(&path, &run.counting_rows)?;
            m.add(path);
        }
    }

    let path = dir.join("summary.json");
    write_json(&path, outcome)?;
    m.add(path);
    m.finish()
}

fn run_command(command: Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Edges { params, output } => {
            let p = params.params()?;
            let edges = support_edges(&p);
            match output {
                Some(path) => {
                    write_json(&path, &edges)?;
                    let mut m = ManifestWriter::new(manifest_path_for(&path), "edges", serde_json::to_value(&params)?, None);
                    m.add(path);
                    m.finish()?;
                }
                None => {
                    let text = serde_json::to_string_pretty(&edges)?;
                    writeln!(stdout, "{text}").map_err(io_err(Path::new("<stdout>")))?;
                }
            }
            Ok(())
        }
        Command::Density { law, params, grid: g, output } => {
            let p = params.params()?;
            let law: Law = law.parse()?;
            let xs = grid(&g, law.support(&p))?;
            let curve = density_curve(law, &p, xs[0], xs[xs.len() - 1], xs.len())?;
            let rows: Vec<DensityRow> = curve
                .grid
                .iter()
                .zip(&curve.values)
                .map(|(&x, &density)| DensityRow { x, density })
                .collect();
            let echo = serde_json::json!({ "law": law, "params": params, "grid": g });
            emit_csv(output.as_deref(), stdout, &rows, "density", echo)
        }
        Command::Stieltjes { params, grid: g, eta, output } => {
            let p = params.params()?;
            check_eta(eta)?;
            let e = support_edges(&p);
            let rows = grid(&g, (e.lambda_minus, e.lambda_plus))?
                .into_iter()
                .map(|x| {
                    let z = Complex64::new(x, eta);
                    manova_stieltjes(&p, z).map(|m| StieltjesRow {
                        re_z: z.re,
                        im_z: z.im,
                        re_m: m.re,
                        im_m: m.im,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let echo = serde_json::json!({ "params": params, "grid": g, "eta": eta });
            emit_csv(output.as_deref(), stdout, &rows, "stieltjes", echo)
        }
        Command::Solve { params, grid: g, eta, tol, output } => {
            let p = params.params()?;
            check_eta(eta)?;
            let cfg = SolverConfig {
                tol,
                ..SolverConfig::default()
            };
            let solver = ProductSolver::new(p, cfg)?;
            let e = support_edges(&p);
            let rows = grid(&g, (e.mu_minus, e.mu_plus))?
                .into_iter()
                .map(|x| {
                    let z = Complex64::new(x, eta);
                    let s = solver.solve(z)?;
                    let d = solver.stability(z, s.m)?;
                    Ok(SolveRow {
                        re_z: z.re,
                        im_z: z.im,
                        re_m: s.m.re,
                        im_m: s.m.im,
                        residual: s.residual,
                        iterations: s.iterations,
                        panels: s.panels,
                        stability_margin: d.margin,
                    })
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let echo = serde_json::json!({ "params": params, "grid": g, "eta": eta, "tol": tol });
            emit_csv(output.as_deref(), stdout, &rows, "solve", echo)
        }
        Command::Sample {
            n,
            params,
            dist,
            seed,
            trial,
            output,
        } => {
            let spec = EnsembleSpec {
                n,
                params: params.params()?,
                dist: dist.parse()?,
                master_seed: resolve_seed(Some(seed), seed)?,
                trial_index: trial,
            };
            let pair = sample_pair(&spec)?;
            let file = fs::File::create(&output).map_err(io_err(&output))?;
            let mut w = io::BufWriter::new(file);
            write_dump(&pair, &mut w)?;
            w.flush().map_err(io_err(&output))?;
            drop(w);
            let mut m = ManifestWriter::new(
                manifest_path_for(&output),
                "sample",
                serde_json::to_value(spec)?,
                Some(spec.master_seed),
            );
            m.add(output);
            m.finish()?;
            Ok(())
        }
        Command::Spectrum { dump, output } => {
            let file = fs::File::open(&dump).map_err(io_err(&dump))?;
            let pair = read_dump(io::BufReader::new(file))?;
            let mu = product_spectrum(&pair, false)?;
            let lambda = mu.to_manova()?;
            let len = mu.eigenvalues.len();
            let rows: Vec<SpectrumRow> = (0..len)
                .map(|k| SpectrumRow {
                    k,
                    lambda: lambda.eigenvalues[k],
                    mu: mu.eigenvalues[len - 1 - k],
                })
                .collect();
            let echo = serde_json::json!({
                "dump": dump,
                "n": pair.n(),
                "master_seed": pair.master_seed,
                "trial_index": pair.trial_index,
            });
            emit_csv(output.as_deref(), stdout, &rows, "spectrum", echo)
        }
        Command::Experiment { plan, seed, threads, out } => {
            let started = now_ms();
            let mut p = load_plan(&plan)?;
            p.master_seed = resolve_seed(seed, p.master_seed)?;
            if let Some(t) = threads {
                p.threads = t;
            }
            p.validate()?;
            let outcome = run_experiment(&p)?;
            let manifest = write_experiment(&outcome, &out, started)?;
            writeln!(stdout, "{}", manifest.display()).map_err(io_err(Path::new("<stdout>")))?;
            outcome.check_failures()?;
            Ok(())
        }
    }
}

/// Parse `args` and run. Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    match run_command(cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("manova").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn edges_json() {
        let (code, out, _) = run_capture(&["edges", "--a", "2", "--b", "2"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!((v["lambda_minus"].as_f64().unwrap() - 0.0669873).abs() < 1e-6);
    }

    #[test]
    fn invalid_params_exit_2() {
        assert_eq!(run_capture(&["edges", "--a", "0.5", "--b", "2"]).0, 2);
        assert_eq!(run_capture(&["edges", "--a", "x"]).0, 2);
        assert_eq!(run_capture(&["nope"]).0, 2);
        assert_eq!(run_capture(&["--help"]).0, 0);
    }

    #[test]
    fn density_csv() {
        let (code, out, _) = run_capture(&[
            "density", "--law", "manova", "--a", "2", "--b", "2", "--points", "3", "--from", "0.4", "--to", "0.6",
        ]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "x,density");
        assert_eq!(lines.len(), 4);
        let mid: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert!((mid - 1.102658).abs() < 1e-6);
    }

    #[test]
    fn non_positive_eta_is_usage_error() {
        assert_eq!(run_capture(&["stieltjes", "--a", "2", "--b", "2", "--eta", "0"]).0, 2);
    }

    #[test]
    fn plan_parsing() {
        let text = "[ensemble]\na = 2.0\nb = 2.0\nseed = 7\n\n[counting]\nn = [100, 200]\neta = 0.05\ntrials = 3\n";
        let plan = parse_plan(text).unwrap();
        assert_eq!(plan.kind, ExperimentKind::Counting);
        assert_eq!(plan.n_list, vec![100, 200]);
        assert_eq!(plan.eta_list, vec![0.05]);
        assert_eq!(plan.master_seed, 7);

        let zero = text.replace("trials = 3", "trials = 0");
        assert_eq!(parse_plan(&zero).unwrap_err().exit_code(), 2);
        let two = format!("{text}\n[deloc]\nn = 100\ntrials = 1\n");
        assert!(matches!(parse_plan(&two), Err(CliError::Plan(_))));
        let typo = text.replace("trials", "trails");
        assert!(matches!(parse_plan(&typo), Err(CliError::Plan(_))));
    }

    #[test]
    fn exit_code_mapping() {
        assert_eq!(CliError::from(Error::Domain("x".into())).exit_code(), 3);
        assert_eq!(CliError::from(Error::ExperimentThreshold { failed: 3, trials: 4 }).exit_code(), 4);
        assert_eq!(CliError::from(Error::EmptyWindow { kappa: 1.0, max: 0.1 }).exit_code(), 2);
    }
}
