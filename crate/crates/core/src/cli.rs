//! Command-line front end: `init`, `run`, `verify` and `inspect`.
//!
//! Every command that writes files also writes `manifest.json` into its
//! output directory. Exit codes: 0 success, 1 failed verification or I/O
//! error, 2 invalid configuration, 3 numerical breakdown.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::axisym::{sign_condition_data, Family, FamilyParams};
use crate::biot_savart::velocity_from_w1_unchecked;
use crate::constraint::{constraint_residual, reconstruct_vorticity_unchecked, MEMBERSHIP_TOL};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::lambda::lambda_spectral;
use crate::pullback::{permutation_residual_max, symmetry_residual};
use crate::snapshot::{read_scalar, scalar_path, write_scalar, write_vector, SnapshotHeader};
use crate::solver::{
    run_from, BreakdownInfo, DiagnosticsRecord, InitialFamily, Mode, Observer, SolverConfig, TrajectoryState,
};
use crate::spectral::{sobolev_norm, NormKind, NormSpec};
use crate::symmetry::{mirror, sigma_unit};
use crate::verify::{run_suite, CheckResult, Hooks, Level};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BREAKDOWN: i32 = 3;

/// Largest sigma-mirror residual accepted by `init --mirror`.
pub const MIRROR_TOL: f64 = 1e-8;

pub const MANIFEST: &str = "manifest.json";

#[derive(Parser, Debug)]
#[command(name = "permsym", version, about = "Permutation-symmetric Euler toolkit")]
pub struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write sign-condition initial data.
    Init(InitArgs),
    /// Integrate a configuration and write diagnostics and snapshots.
    Run(RunArgs),
    /// Run the identity suites.
    Verify(VerifyArgs),
    /// Print a snapshot header with norms and residuals.
    Inspect(InspectArgs),
}

#[derive(Args, Debug, Default)]
pub struct FamilyArgs {
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub width: Option<f64>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub perturbation: Option<f64>,
}

impl FamilyArgs {
    fn apply(&self, p: &mut FamilyParams) {
        if let Some(v) = self.amplitude {
            p.amplitude = v;
        }
        if let Some(v) = self.width {
            p.width = v;
        }
        if let Some(v) = self.radius {
            p.radius = v;
        }
        if let Some(v) = self.perturbation {
            p.perturbation = v;
        }
    }
}

#[derive(Args, Debug)]
pub struct InitArgs {
    /// TOML file in the `run` format; only `n`, `L` and `[initial]` are used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// gaussian, ring or perturbed.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "L")]
    pub length: Option<f64>,
    #[command(flatten)]
    pub params: FamilyArgs,
    /// Check sigma-mirror symmetry and record it in the snapshot header.
    #[arg(long)]
    pub mirror: bool,
    /// Also write the velocity and the full vorticity.
    #[arg(long)]
    pub fields: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "L")]
    pub length: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub cfl: Option<f64>,
    /// single_component, full_vorticity or both.
    #[arg(long)]
    pub mode: Option<String>,
    /// gaussian, ring, perturbed or zero.
    #[arg(long)]
    pub family: Option<String>,
    #[command(flatten)]
    pub params: FamilyArgs,
    /// Initial `w1` snapshot; overrides the family.
    #[arg(long)]
    pub initial: Option<PathBuf>,
    #[arg(long)]
    pub snapshot_every: Option<usize>,
    #[arg(long)]
    pub diagnostics_every: Option<usize>,
    #[arg(long)]
    pub reproject_every: Option<usize>,
    #[arg(long)]
    pub no_dealias: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// n = 16 and 32 (the default).
    #[arg(long, conflicts_with = "full")]
    pub fast: bool,
    /// n = 32 and 64 at the tightest tolerances.
    #[arg(long)]
    pub full: bool,
    /// Directory for `verify.json` and the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    pub file: PathBuf,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub n: usize,
    #[serde(rename = "L")]
    pub length: f64,
}

/// What a command did: configuration, outputs and outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridInfo>,
    pub wall_clock_seconds: f64,
    /// Files written, relative to the output directory. The manifest itself
    /// is not listed.
    pub files: Vec<String>,
    pub status: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckResult>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub measurements: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<BreakdownInfo>,
}

impl RunManifest {
    fn new(command: &str, config: serde_json::Value) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            grid: None,
            wall_clock_seconds: 0.0,
            files: Vec::new(),
            status: "ok".into(),
            checks: Vec::new(),
            measurements: BTreeMap::new(),
            breakdown: None,
        }
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST))?;
        serde_json::from_str(&text).map_err(|e| Error::input(format!("manifest: {e}")))
    }

    fn write(&mut self, dir: &Path, start: Instant) -> Result<()> {
        self.wall_clock_seconds = start.elapsed().as_secs_f64();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(dir.join(MANIFEST), text + "\n")?;
        Ok(())
    }

    fn add(&mut self, dir: &Path, path: &Path) {
        let rel = path.strip_prefix(dir).unwrap_or(path);
        self.files.push(rel.to_string_lossy().into_owned());
    }
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("value serializes")
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::InvalidInput(_) => EXIT_CONFIG,
        Error::Breakdown { .. } => EXIT_BREAKDOWN,
        _ => EXIT_FAILED,
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_CONFIG;
        }
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let outcome = match &cli.command {
        Command::Init(a) => cmd_init(a),
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Inspect(a) => cmd_inspect(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<SolverConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::config(format!("{}: {e}", p.display())))?;
            let c: SolverConfig = toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", p.display())))?;
            Ok(c)
        }
        None => Ok(SolverConfig::default()),
    }
}

fn parse_family(s: &str) -> Result<InitialFamily> {
    s.parse::<InitialFamily>().map_err(|e| Error::config(e.to_string()))
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct InitEcho {
    family: InitialFamily,
    n: usize,
    #[serde(rename = "L")]
    length: f64,
    #[serde(flatten)]
    params: FamilyParams,
    mirror: bool,
    fields: bool,
}

/// Resolves `init` arguments against an optional config; flags win.
fn init_settings(a: &InitArgs) -> Result<InitEcho> {
    let base = match &a.config {
        Some(p) => Some(load_config(Some(p))?),
        None => None,
    };
    let family = match (&a.family, &base) {
        (Some(f), _) => parse_family(f)?,
        (None, Some(c)) => c.initial.family,
        (None, None) => return Err(Error::config("--family is required")),
    };
    let n = a.n.or(base.as_ref().map(|c| c.n)).ok_or_else(|| Error::config("--n is required"))?;
    let length = a.length.or(base.as_ref().map(|c| c.length)).ok_or_else(|| Error::config("--L is required"))?;
    let mut params = base.as_ref().map(|c| c.initial.params).unwrap_or_default();
    a.params.apply(&mut params);
    Ok(InitEcho { family, n, length, params, mirror: a.mirror, fields: a.fields })
}

fn init_family(f: InitialFamily) -> Result<Family> {
    match f {
        InitialFamily::Gaussian => Ok(Family::Gaussian),
        InitialFamily::Ring => Ok(Family::Ring),
        InitialFamily::Perturbed => Ok(Family::Perturbed),
        InitialFamily::Zero => Err(Error::config("init needs a sign-condition family")),
    }
}

/// Writes `w1`, optionally `u` and `omega`, and the manifest. Validation
/// happens before anything touches the output directory.
pub fn cmd_init(a: &InitArgs) -> Result<i32> {
    let start = Instant::now();
    let s = init_settings(a)?;
    let family = init_family(s.family)?;
    let grid = crate::grid::Grid::new(s.n, s.length).map_err(|e| Error::config(e.to_string()))?;
    let w1 = sign_condition_data(grid, family, &s.params).map_err(|e| Error::config(e.to_string()))?;

    let mut manifest = RunManifest::new("init", to_json(&s));
    manifest.grid = Some(GridInfo { n: s.n, length: s.length });
    let c = constraint_residual(&w1);
    manifest.measurements.insert("constraint_residual".into(), c.max());
    let u = velocity_from_w1_unchecked(&w1);
    manifest.measurements.insert("permutation_residual".into(), permutation_residual_max(&u));
    let mut flags = vec!["permutation"];
    if c.max() <= MEMBERSHIP_TOL {
        flags.push("constraint");
    }
    let mut status = EXIT_OK;
    if s.mirror {
        // the vorticity is localized; the periodic velocity also carries
        // image contributions, and the lattice has no sigma-mirror symmetry
        let omega = reconstruct_vorticity_unchecked(&w1);
        let m = mirror(sigma_unit())?.to_map().interpolating();
        let r = symmetry_residual(&omega, &m, -1.0)?;
        manifest.measurements.insert("sigma_mirror_vorticity".into(), r);
        if r <= MIRROR_TOL {
            flags.push("sigma_mirror");
        } else {
            eprintln!("sigma-mirror residual {r:.3e} exceeds {MIRROR_TOL:e}");
            manifest.status = "failed".into();
            status = EXIT_FAILED;
        }
    }

    create_out(&a.out)?;
    let header = SnapshotHeader::new(&grid, "w1", 0.0).with_symmetry(&flags);
    let p = scalar_path(&a.out, "w1");
    write_scalar(&p, &w1, &header)?;
    manifest.add(&a.out, &p);
    if s.fields {
        let h = SnapshotHeader { kind: "velocity".into(), ..header.clone() };
        for p in write_vector(&a.out, "u", &u, &h)? {
            manifest.add(&a.out, &p);
        }
        let h = SnapshotHeader { kind: "vorticity".into(), ..header };
        for p in write_vector(&a.out, "omega", &reconstruct_vorticity_unchecked(&w1), &h)? {
            manifest.add(&a.out, &p);
        }
    }
    manifest.write(&a.out, start)?;
    Ok(status)
}

/// Resolves `run` arguments against the config file; flags win.
pub fn run_settings(a: &RunArgs) -> Result<SolverConfig> {
    let mut c = load_config(a.config.as_deref())?;
    if let Some(v) = a.n {
        c.n = v;
    }
    if let Some(v) = a.length {
        c.length = v;
    }
    if let Some(v) = a.t_end {
        c.t_end = v;
    }
    if let Some(v) = a.dt {
        c.dt = Some(v);
    }
    if let Some(v) = a.cfl {
        c.cfl = v;
    }
    if let Some(m) = &a.mode {
        c.mode = m.parse::<Mode>().map_err(|e| Error::config(e.to_string()))?;
    }
    if let Some(f) = &a.family {
        c.initial.family = parse_family(f)?;
        c.initial.file = None;
    }
    a.params.apply(&mut c.initial.params);
    if let Some(p) = &a.initial {
        c.initial.file = Some(p.clone());
    }
    if let Some(v) = a.snapshot_every {
        c.snapshot_every = v;
    }
    if let Some(v) = a.diagnostics_every {
        c.diagnostics_every = v;
    }
    if let Some(v) = a.reproject_every {
        c.reproject_every = v;
    }
    if a.no_dealias {
        c.dealias = false;
    }
    c.validate()?;
    Ok(c)
}

struct RunWriter<'a> {
    dir: &'a Path,
    csv: fs::File,
    files: Vec<PathBuf>,
}

impl RunWriter<'_> {
    fn write_state(&mut self, stem: &str, state: &TrajectoryState) -> Result<()> {
        let w1 = state.first_component();
        let header = SnapshotHeader::new(w1.grid(), "w1", state.t);
        let p = scalar_path(self.dir, stem);
        write_scalar(&p, w1, &header)?;
        self.files.push(p);
        if let Some(omega) = &state.omega {
            let h = SnapshotHeader::new(w1.grid(), "vorticity", state.t);
            self.files.extend(write_vector(self.dir, &format!("{stem}_omega"), omega, &h)?);
        }
        Ok(())
    }
}

impl Observer for RunWriter<'_> {
    fn record(&mut self, r: &DiagnosticsRecord) -> Result<()> {
        writeln!(self.csv, "{}", r.csv_row())?;
        Ok(())
    }

    fn snapshot(&mut self, step: usize, state: &TrajectoryState) -> Result<()> {
        self.write_state(&format!("w1_{step:06}"), state)
    }
}

pub fn cmd_run(a: &RunArgs) -> Result<i32> {
    let start = Instant::now();
    let config = run_settings(a)?;
    let w1 = config.initial_w1()?;
    create_out(&a.out)?;
    let csv_path = a.out.join("diagnostics.csv");
    let mut csv = fs::File::create(&csv_path)?;
    writeln!(csv, "{}", DiagnosticsRecord::csv_header(config.mode))?;
    let mut writer = RunWriter { dir: &a.out, csv, files: vec![csv_path] };
    let config_path = a.out.join("config.toml");
    fs::write(&config_path, config.to_toml())?;
    writer.files.push(config_path);

    let out = run_from(&config, TrajectoryState::new(w1, config.mode), &mut writer)?;
    writer.write_state("w1_final", &out.final_state)?;
    writer.csv.flush()?;

    let mut manifest = RunManifest::new("run", to_json(&config));
    manifest.grid = Some(GridInfo { n: config.n, length: config.length });
    for p in &writer.files {
        manifest.add(&a.out, p);
    }
    let last = out.records.last().expect("initial record");
    manifest.measurements.insert("steps".into(), out.steps as f64);
    manifest.measurements.insert("final_time".into(), out.final_state.t);
    manifest.measurements.insert("bkm_integral".into(), last.bkm_integral);
    let code = match out.breakdown {
        Some(b) => {
            eprintln!("breakdown at t = {:e}: {}", b.time, b.reason);
            manifest.status = "breakdown".into();
            manifest.breakdown = Some(b);
            EXIT_BREAKDOWN
        }
        None => EXIT_OK,
    };
    manifest.write(&a.out, start)?;
    Ok(code)
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<i32> {
    let start = Instant::now();
    let level = if a.full { Level::Full } else { Level::Fast };
    let results = run_suite(level, Hooks::default());
    for r in &results {
        println!("{}", r.line());
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} checks passed in {:.1}s", results.len(), start.elapsed().as_secs_f64());
    let ok = passed == results.len();
    if let Some(dir) = &a.out {
        create_out(dir)?;
        let mut manifest = RunManifest::new("verify", serde_json::json!({ "level": level }));
        let report = dir.join("verify.json");
        fs::write(&report, serde_json::to_string_pretty(&results).expect("results serialize") + "\n")?;
        manifest.add(dir, &report);
        manifest.checks = results;
        manifest.status = if ok { "ok" } else { "failed" }.into();
        manifest.write(dir, start)?;
    }
    Ok(if ok { EXIT_OK } else { EXIT_FAILED })
}

/// Header and on-demand quantities of a snapshot.
#[derive(Debug, Clone, Serialize)]
pub struct Inspection {
    pub header: SnapshotHeader,
    pub values: BTreeMap<String, f64>,
}

pub fn inspect(path: &Path) -> Result<Inspection> {
    let (header, f) = read_scalar(path)?;
    let mut values = BTreeMap::new();
    values.insert("l2".to_string(), f.norm_l2());
    values.insert("linf".to_string(), f.norm_linf());
    values.insert("mean".to_string(), f.mean());
    if header.kind == "w1" {
        add_w1_values(&f, &mut values);
    }
    Ok(Inspection { header, values })
}

fn add_w1_values(w1: &ScalarField, values: &mut BTreeMap<String, f64>) {
    let c = constraint_residual(w1);
    values.insert("constraint_physical".into(), c.physical);
    values.insert("constraint_fourier".into(), c.fourier);
    if let Ok(v) = sobolev_norm(w1, NormSpec::new(0.0), NormKind::HdotNeg1) {
        values.insert("hminus1".into(), v);
    }
    let u = velocity_from_w1_unchecked(w1);
    values.insert("l2_velocity".into(), u.norm_l2());
    values.insert("permutation_residual".into(), permutation_residual_max(&u));
    values.insert("lambda".into(), lambda_spectral(w1));
}

pub fn cmd_inspect(a: &InspectArgs) -> Result<i32> {
    let r = inspect(&a.file)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&r).expect("inspection serializes"));
    } else {
        print!("{}", toml::to_string(&r.header).expect("header serializes"));
        for (k, v) in &r.values {
            println!("{k} = {v:e}");
        }
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(args: &[&str]) -> i32 {
        main_with_args(std::iter::once("permsym").chain(args.iter().copied()))
    }

    #[test]
    fn init_requires_family_and_grid() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o");
        let o = out.to_str().unwrap();
        assert_eq!(code(&["init", "--n", "16", "--L", "8", "--out", o]), EXIT_CONFIG);
        assert_eq!(code(&["init", "--family", "gaussian", "--L", "8", "--out", o]), EXIT_CONFIG);
        assert_eq!(code(&["init", "--family", "blob", "--n", "16", "--L", "8", "--out", o]), EXIT_CONFIG);
        assert_eq!(code(&["init", "--family", "gaussian", "--n", "15", "--L", "8", "--out", o]), EXIT_CONFIG);
        assert_eq!(code(&["init", "--family", "gaussian", "--n", "16", "--L", "8", "--width=-1", "--out", o]), EXIT_CONFIG);
        assert!(!out.exists());
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        fs::write(&p, "n = 16\nL = 4.0\nt_end = 0.5\n[initial]\nfamily = \"ring\"\nradius = 2.0\n").unwrap();
        let cli = Cli::try_parse_from(["permsym", "run", "--config", p.to_str().unwrap(), "--n", "24", "--width", "0.5"]).unwrap();
        let Command::Run(a) = cli.command else { panic!() };
        let c = run_settings(&a).unwrap();
        assert_eq!((c.n, c.length, c.t_end), (24, 4.0, 0.5));
        assert_eq!(c.initial.family, InitialFamily::Ring);
        assert_eq!((c.initial.params.radius, c.initial.params.width), (2.0, 0.5));
    }

    #[test]
    fn bad_config_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        fs::write(&p, "n = 16\nbogus = 1\n").unwrap();
        let out = dir.path().join("o");
        assert_eq!(code(&["run", "--config", p.to_str().unwrap(), "--out", out.to_str().unwrap()]), EXIT_CONFIG);
        assert_eq!(code(&["run", "--t-end=-1", "--out", out.to_str().unwrap()]), EXIT_CONFIG);
        assert!(!out.exists());
    }
}
