//! Command-line front end: run specifications, key=value configuration files,
//! output writers and exit codes. The `certseg` binary is a thin wrapper
//! around [`main_with_args`].

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::adapt::{run_adaptive, AdaptConfig, AdaptiveRun, CycleReport};
use crate::error::{Error, Result};
use crate::fdgrid::Lattice;
use crate::input::{signed_to_u16, to_u16, write_pgm16, write_pgm8, Image, Source, TwoGaussian};
use crate::model::{self, ModelParams};
use crate::oracle;
use crate::pdsolver::{SchemeKind, SolverConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_BAD_INPUT: i32 = 2;
pub const EXIT_STEP_SIZE: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

pub const CSV_HEADER: &str = "cycle,scheme,dofs,E_primal,D_predual,err_u_sq,eta_opt,err_chi,wall_ms";

/// Exit code for an error category.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParams(_)
        | Error::DegenerateClustering(_)
        | Error::NonBinary { .. }
        | Error::SizeMismatch { .. }
        | Error::OutOfDomain { .. }
        | Error::InvalidImage(_)
        | Error::InvalidConfig(_) => EXIT_BAD_INPUT,
        Error::Io(e) if matches!(e.kind(), std::io::ErrorKind::NotFound | std::io::ErrorKind::InvalidData) => {
            EXIT_BAD_INPUT
        }
        Error::StepSize { .. } => EXIT_STEP_SIZE,
        Error::Factorization(_) | Error::Infeasible { .. } | Error::OracleTooLarge { .. } | Error::Io(_) => {
            EXIT_INTERNAL
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InputSpec {
    Image(PathBuf),
    TwoGaussian(TwoGaussian),
}

/// Gray values: fixed, or from 2-means clustering of the input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Means {
    Fixed { c1: f64, c2: f64 },
    Auto,
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub input: InputSpec,
    pub scheme: SchemeKind,
    pub means: Means,
    pub nu: f64,
    pub solver: SolverConfig,
    pub adapt: AdaptConfig,
    pub out: PathBuf,
    pub seed: u64,
    /// Record wall-clock times in the CSV (breaks byte-identical reruns).
    pub record_timings: bool,
    pub verify: bool,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            input: InputSpec::TwoGaussian(TwoGaussian::default()),
            scheme: SchemeKind::FePrime,
            means: Means::Fixed { c1: 0.495349, c2: 0.056845 },
            nu: 5e-3,
            solver: SolverConfig::default(),
            adapt: AdaptConfig::default(),
            out: PathBuf::from("out"),
            seed: 0,
            record_timings: false,
            verify: false,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse '{v}'")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::InvalidConfig(format!("{key}: expected true or false, got '{v}'"))),
    }
}

fn parse_pair(key: &str, v: &str) -> Result<[f64; 2]> {
    let parts: Vec<&str> = v.split(',').collect();
    if parts.len() != 2 {
        return Err(Error::InvalidConfig(format!("{key}: expected two comma-separated numbers, got '{v}'")));
    }
    Ok([parse_num(key, parts[0])?, parse_num(key, parts[1])?])
}

/// Parses flat `key = value` text. Blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key = value, got '{line}'", n + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

impl RunSpec {
    /// Applies `key = value` entries on top of `self`. Keys under `result.` and
    /// `version` are informational and skipped.
    pub fn apply(&mut self, map: &BTreeMap<String, String>) -> Result<()> {
        let mut c1 = None;
        let mut c2 = None;
        for (k, v) in map {
            let key = k.as_str();
            match key {
                "input" => {
                    self.input = match v.strip_prefix("builtin:") {
                        Some("two-gaussian") => match &self.input {
                            InputSpec::TwoGaussian(g) => InputSpec::TwoGaussian(*g),
                            InputSpec::Image(_) => InputSpec::TwoGaussian(TwoGaussian::default()),
                        },
                        Some(other) => return Err(Error::InvalidConfig(format!("unknown builtin input '{other}'"))),
                        None => InputSpec::Image(PathBuf::from(v)),
                    }
                }
                "gaussian.center1" | "gaussian.center2" | "gaussian.weights" | "gaussian.widths" => {}
                "scheme" => self.scheme = v.parse()?,
                "c1" => c1 = Some(parse_num(key, v)?),
                "c2" => c2 = Some(parse_num(key, v)?),
                "auto_means" => {
                    if parse_bool(key, v)? {
                        self.means = Means::Auto;
                    } else if self.means == Means::Auto {
                        self.means = RunSpec::default().means;
                    }
                }
                "nu" => self.nu = parse_num(key, v)?,
                "tau" => self.solver.tau = parse_num(key, v)?,
                "sigma" => self.solver.sigma = parse_num(key, v)?,
                "threshold" => self.solver.threshold = parse_num(key, v)?,
                "max_iters" => self.solver.max_iters = parse_num(key, v)?,
                "gap_every" => self.solver.gap_every = parse_num(key, v)?,
                "alpha" => self.adapt.alpha = parse_num(key, v)?,
                "cycles" => self.adapt.cycles = parse_num(key, v)?,
                "init_level" => self.adapt.init_level = parse_num(key, v)?,
                "max_level" => self.adapt.max_level = parse_num(key, v)?,
                "out" => self.out = PathBuf::from(v),
                "seed" => self.seed = parse_num(key, v)?,
                "record_timings" => self.record_timings = parse_bool(key, v)?,
                "verify" => self.verify = parse_bool(key, v)?,
                "version" => {}
                _ if key.starts_with("result.") => {}
                _ => return Err(Error::InvalidConfig(format!("unknown key '{key}'"))),
            }
        }
        if let InputSpec::TwoGaussian(g) = &mut self.input {
            for (i, key) in ["gaussian.center1", "gaussian.center2"].iter().enumerate() {
                if let Some(v) = map.get(*key) {
                    g.centers[i] = parse_pair(key, v)?;
                }
            }
            if let Some(v) = map.get("gaussian.weights") {
                g.weights = parse_pair("gaussian.weights", v)?;
            }
            if let Some(v) = map.get("gaussian.widths") {
                g.widths = parse_pair("gaussian.widths", v)?;
            }
        }
        if c1.is_some() || c2.is_some() {
            if self.means == Means::Auto {
                if !map.contains_key("auto_means") {
                    self.means = RunSpec::default().means;
                } else {
                    return Err(Error::InvalidConfig("c1/c2 conflict with auto_means = true".into()));
                }
            }
            if let Means::Fixed { c1: a, c2: b } = &mut self.means {
                *a = c1.unwrap_or(*a);
                *b = c2.unwrap_or(*b);
            }
        }
        Ok(())
    }

    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut spec = RunSpec::default();
        spec.apply(&parse_key_values(text)?)?;
        Ok(spec)
    }

    /// The specification as `key = value` lines (sorted keys).
    pub fn to_key_values(&self) -> String {
        let mut map = BTreeMap::new();
        match &self.input {
            InputSpec::Image(p) => {
                map.insert("input", p.display().to_string());
            }
            InputSpec::TwoGaussian(g) => {
                map.insert("input", "builtin:two-gaussian".to_string());
                map.insert("gaussian.center1", format!("{},{}", g.centers[0][0], g.centers[0][1]));
                map.insert("gaussian.center2", format!("{},{}", g.centers[1][0], g.centers[1][1]));
                map.insert("gaussian.weights", format!("{},{}", g.weights[0], g.weights[1]));
                map.insert("gaussian.widths", format!("{},{}", g.widths[0], g.widths[1]));
            }
        }
        map.insert("scheme", self.scheme.to_string());
        match self.means {
            Means::Fixed { c1, c2 } => {
                map.insert("auto_means", "false".into());
                map.insert("c1", c1.to_string());
                map.insert("c2", c2.to_string());
            }
            Means::Auto => {
                map.insert("auto_means", "true".into());
            }
        }
        map.insert("nu", self.nu.to_string());
        map.insert("tau", self.solver.tau.to_string());
        map.insert("sigma", self.solver.sigma.to_string());
        map.insert("threshold", self.solver.threshold.to_string());
        map.insert("max_iters", self.solver.max_iters.to_string());
        map.insert("gap_every", self.solver.gap_every.to_string());
        map.insert("alpha", self.adapt.alpha.to_string());
        map.insert("cycles", self.adapt.cycles.to_string());
        map.insert("init_level", self.adapt.init_level.to_string());
        map.insert("max_level", self.adapt.max_level.to_string());
        map.insert("out", self.out.display().to_string());
        map.insert("seed", self.seed.to_string());
        map.insert("record_timings", self.record_timings.to_string());
        map.insert("verify", self.verify.to_string());
        map.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn source(&self) -> Result<Source> {
        match &self.input {
            InputSpec::Image(p) => Ok(Source::Image(Image::load_pgm(p)?)),
            InputSpec::TwoGaussian(g) => {
                g.validate()?;
                Ok(Source::Analytic(*g))
            }
        }
    }

    /// Resolves the gray values; automatic means cluster the input samples.
    pub fn model_params(&self, source: &Source) -> Result<ModelParams> {
        let (c1, c2) = match self.means {
            Means::Fixed { c1, c2 } => (c1, c2),
            Means::Auto => {
                let samples = match source {
                    Source::Image(img) => img.values().to_vec(),
                    Source::Analytic(g) => Lattice::with_level(self.adapt.max_level).sample(|x, y| g.eval(x, y)),
                };
                model::lloyd_2means(&samples)?
            }
        };
        ModelParams::new(c1, c2, self.nu)
    }
}

/// Formats one certificate row.
pub fn csv_row(report: &CycleReport, record_timings: bool) -> String {
    let c = &report.certificate;
    let wall = if record_timings { report.wall_ms } else { 0.0 };
    format!(
        "{},{},{},{:.12e},{:.12e},{:.12e},{:.4},{:.12e},{:.3}",
        report.cycle,
        report.scheme,
        report.dofs,
        c.e_primal,
        c.d_predual,
        c.err_u_sq,
        c.eta_opt,
        c.err_chi,
        wall
    )
}

pub fn certificates_csv(run: &AdaptiveRun, record_timings: bool) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in &run.cycles {
        s.push_str(&csv_row(r, record_timings));
        s.push('\n');
    }
    s
}

/// Result of [`execute`].
#[derive(Debug)]
pub struct RunOutcome {
    pub run: AdaptiveRun,
    pub params: ModelParams,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.run.converged() {
            EXIT_OK
        } else {
            EXIT_NOT_CONVERGED
        }
    }
}

/// Runs the pipeline and writes every output into `spec.out`.
pub fn execute(spec: &RunSpec, observer: &mut dyn FnMut(&CycleReport)) -> Result<RunOutcome> {
    let source = spec.source()?;
    let params = spec.model_params(&source)?;
    let run = run_adaptive(&source, &params, spec.scheme, &spec.solver, &spec.adapt, observer)?;
    let files = write_outputs(spec, &params, &run)?;
    Ok(RunOutcome { run, params, files })
}

/// Writes images, the certificate table, the manifest and the mesh dump.
pub fn write_outputs(spec: &RunSpec, params: &ModelParams, run: &AdaptiveRun) -> Result<Vec<PathBuf>> {
    let dir = &spec.out;
    fs::create_dir_all(dir)?;
    let f = &run.fields;
    let mut files = Vec::new();
    let mut emit = |name: &str| {
        let p = dir.join(name);
        files.push(p.clone());
        p
    };

    let seg: Vec<u8> = f.segmentation.iter().map(|&c| if c > 0.5 { 255 } else { 0 }).collect();
    write_pgm8(emit("segmentation.pgm"), f.side, &seg)?;
    write_pgm16(emit("relaxed.pgm"), f.side, &f.relaxed.iter().map(|&v| to_u16(v)).collect::<Vec<_>>())?;
    write_pgm16(emit("dual_x.pgm"), f.side, &f.dual.iter().map(|q| signed_to_u16(q[0])).collect::<Vec<_>>())?;
    write_pgm16(emit("dual_y.pgm"), f.side, &f.dual.iter().map(|q| signed_to_u16(q[1])).collect::<Vec<_>>())?;

    let cells = f.side - 1;
    let peak = f.per_cell_density.iter().copied().fold(0.0f64, f64::max);
    let scale = if peak > 0.0 { 1.0 / peak } else { 0.0 };
    let density: Vec<u16> = f.per_cell_density.iter().map(|&v| to_u16(v * scale)).collect();
    write_pgm16(emit("error_density.pgm"), cells, &density)?;

    fs::write(emit("certificates.csv"), certificates_csv(run, spec.record_timings))?;
    if let Some(mesh) = &run.final_mesh {
        fs::write(emit("mesh.txt"), mesh.dump())?;
    }
    fs::write(emit("manifest.txt"), manifest(spec, params, run))?;
    Ok(files)
}

/// Run manifest: the specification followed by informational `result.` keys.
pub fn manifest(spec: &RunSpec, params: &ModelParams, run: &AdaptiveRun) -> String {
    let mut s = format!("version = certseg {}\n", env!("CARGO_PKG_VERSION"));
    s.push_str(&spec.to_key_values());
    let last = run.last();
    let _ = writeln!(s, "result.c1 = {}", params.c1());
    let _ = writeln!(s, "result.c2 = {}", params.c2());
    let _ = writeln!(s, "result.cycles = {}", run.cycles.len());
    let _ = writeln!(s, "result.converged = {}", run.converged());
    let _ = writeln!(s, "result.stalled = {}", run.stalled);
    let _ = writeln!(s, "result.dofs = {}", last.dofs);
    let _ = writeln!(s, "result.err_u_sq = {:e}", last.certificate.err_u_sq);
    let _ = writeln!(s, "result.err_chi = {:e}", last.certificate.err_chi);
    let _ = writeln!(s, "result.iterations = {}", run.cycles.iter().map(|c| c.iterations).sum::<usize>());
    if spec.record_timings {
        let _ = writeln!(s, "result.wall_ms = {:.3}", run.cycles.iter().map(|c| c.wall_ms).sum::<f64>());
    }
    for w in &run.warnings {
        let _ = writeln!(s, "# warning: {w}");
    }
    s
}

#[derive(Debug, Parser)]
#[command(name = "certseg", version, about = "Two-phase segmentation with guaranteed a posteriori error bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment an image or the builtin analytic input.
    Run(RunArgs),
    /// Run the brute-force cross-checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// Base configuration file (`key = value` lines); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Grayscale PGM of side 2^L + 1.
    #[arg(long, conflicts_with = "builtin")]
    pub input: Option<PathBuf>,
    /// Builtin analytic input.
    #[arg(long, value_parser = ["two-gaussian"])]
    pub builtin: Option<String>,
    /// fd, fe or fe-prime.
    #[arg(long)]
    pub scheme: Option<SchemeKind>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    /// Estimate c1 and c2 by 2-means clustering of the input.
    #[arg(long, conflicts_with_all = ["c1", "c2"])]
    pub auto_means: bool,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Marking fraction in (0, 1).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Stop once max |U^{k+1} - U^k| falls below this.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub cycles: Option<usize>,
    #[arg(long)]
    pub init_level: Option<u32>,
    #[arg(long)]
    pub max_level: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write measured wall times instead of zeros.
    #[arg(long)]
    pub record_timings: bool,
    /// Run the oracle cross-checks after the run.
    #[arg(long)]
    pub verify: bool,
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_parser = ["oracle"], default_value = "oracle")]
    pub suite: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl RunArgs {
    /// Configuration file, then flags.
    pub fn to_spec(&self) -> Result<RunSpec> {
        let mut map = match &self.config {
            Some(p) => parse_key_values(&fs::read_to_string(p)?)?,
            None => BTreeMap::new(),
        };
        let mut set = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                map.insert(k.to_string(), v);
            }
        };
        set("input", self.input.as_ref().map(|p| p.display().to_string()));
        set("input", self.builtin.as_ref().map(|b| format!("builtin:{b}")));
        set("scheme", self.scheme.map(|s| s.to_string()));
        set("nu", self.nu.map(|v| v.to_string()));
        set("c1", self.c1.map(|v| v.to_string()));
        set("c2", self.c2.map(|v| v.to_string()));
        set("tau", self.tau.map(|v| v.to_string()));
        set("sigma", self.sigma.map(|v| v.to_string()));
        set("alpha", self.alpha.map(|v| v.to_string()));
        set("threshold", self.threshold.map(|v| v.to_string()));
        set("max_iters", self.max_iters.map(|v| v.to_string()));
        set("cycles", self.cycles.map(|v| v.to_string()));
        set("init_level", self.init_level.map(|v| v.to_string()));
        set("max_level", self.max_level.map(|v| v.to_string()));
        set("out", self.out.as_ref().map(|p| p.display().to_string()));
        set("seed", self.seed.map(|v| v.to_string()));
        if self.auto_means {
            map.remove("c1");
            map.remove("c2");
            map.insert("auto_means".into(), "true".into());
        } else if self.c1.is_some() || self.c2.is_some() {
            map.insert("auto_means".into(), "false".into());
        }
        if self.record_timings {
            map.insert("record_timings".into(), "true".into());
        }
        if self.verify {
            map.insert("verify".into(), "true".into());
        }
        let mut spec = RunSpec::default();
        spec.apply(&map)?;
        Ok(spec)
    }
}

fn report_error(err: &Error) -> i32 {
    eprintln!("error: {err}");
    exit_code(err)
}

fn run_verify(seed: u64) -> Result<bool> {
    let mut ok = true;
    for c in oracle::run_suite(seed)? {
        println!("{:<32} {}  {}", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail);
        ok &= c.passed;
    }
    Ok(ok)
}

fn cmd_run(args: &RunArgs) -> i32 {
    let spec = match args.to_spec() {
        Ok(s) => s,
        Err(e) => return report_error(&e),
    };
    let quiet = args.quiet;
    let record = spec.record_timings;
    if !quiet {
        println!("{CSV_HEADER}");
    }
    let outcome = match execute(&spec, &mut |r| {
        if !quiet {
            println!("{}", csv_row(r, record));
        }
    }) {
        Ok(o) => o,
        Err(e) => return report_error(&e),
    };
    for w in &outcome.run.warnings {
        eprintln!("warning: {w}");
    }
    if !quiet {
        println!("wrote {} files to {}", outcome.files.len(), spec.out.display());
    }
    if spec.verify {
        match run_verify(spec.seed) {
            Ok(true) => {}
            Ok(false) => return EXIT_INTERNAL,
            Err(e) => return report_error(&e),
        }
    }
    if outcome.exit_code() == EXIT_NOT_CONVERGED {
        eprintln!("warning: the solver hit max_iters before reaching the threshold");
    }
    outcome.exit_code()
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_BAD_INPUT } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Verify(v) => match run_verify(v.seed) {
            Ok(true) => EXIT_OK,
            Ok(false) => EXIT_INTERNAL,
            Err(e) => report_error(&e),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_round_trip() {
        let mut spec = RunSpec::default();
        spec.scheme = SchemeKind::Fe;
        spec.solver.tau = 1.25e-3;
        spec.adapt.cycles = 4;
        spec.out = PathBuf::from("/tmp/x y");
        if let InputSpec::TwoGaussian(g) = &mut spec.input {
            g.widths = [0.2, 0.1 + 0.2];
        }
        let back = RunSpec::from_key_values(&spec.to_key_values()).unwrap();
        assert_eq!(back, spec);

        let auto = RunSpec { means: Means::Auto, input: InputSpec::Image("a.pgm".into()), ..RunSpec::default() };
        assert_eq!(RunSpec::from_key_values(&auto.to_key_values()).unwrap(), auto);
    }

    #[test]
    fn config_errors() {
        assert!(RunSpec::from_key_values("bogus = 1").is_err());
        assert!(RunSpec::from_key_values("nu 3").is_err());
        assert!(RunSpec::from_key_values("scheme = fem").is_err());
        assert!(RunSpec::from_key_values("auto_means = true\nc1 = 0.3").is_err());
        let s = RunSpec::from_key_values("# comment\n\ncycles = 3\ninput = builtin:two-gaussian").unwrap();
        assert_eq!(s.adapt.cycles, 3);
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "nu = 0.01\ncycles = 2\nscheme = fd\n").unwrap();
        let cli = Cli::try_parse_from(["certseg", "run", "--config", cfg.to_str().unwrap(), "--nu", "0.02"]).unwrap();
        let Command::Run(args) = cli.command else { panic!() };
        let spec = args.to_spec().unwrap();
        assert_eq!((spec.nu, spec.adapt.cycles, spec.scheme), (0.02, 2, SchemeKind::Fd));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::StepSize { product: 1.2 }), EXIT_STEP_SIZE);
        assert_eq!(exit_code(&Error::InvalidImage("x".into())), EXIT_BAD_INPUT);
        assert_eq!(exit_code(&Error::Factorization("x".into())), EXIT_INTERNAL);
        assert_eq!(main_with_args(["certseg", "run", "--scheme", "nope"]), EXIT_BAD_INPUT);
        assert_eq!(main_with_args(["certseg", "run", "--input", "/nonexistent.pgm", "-q"]), EXIT_BAD_INPUT);
        assert_eq!(
            main_with_args(["certseg", "run", "--builtin", "two-gaussian", "--scheme", "fe", "--max-level", "11", "-q"]),
            EXIT_STEP_SIZE
        );
    }
}
