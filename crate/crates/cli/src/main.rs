//! `ququad`: run the reproductions and the verification suite from a config file.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ququad::config::{ExperimentConfig, CALIBRATED_CONFIG};
use ququad::output::{self, RunDir, RunManifest, RunStatus};
use ququad::scenarios::{run_fig2, run_fig3, run_snr_sweep, run_visibility_matrix, Fig2Variant};
use ququad::validation::{run_validation, ValidationOptions};
use ququad::Error;
use serde_json::json;

#[derive(Parser)]
#[command(name = "ququad", version, about = "Multi-path two-photon entanglement simulator")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Parent directory for run directories when --out is not given.
    #[arg(long, env = "QUQUAD_OUTPUT_DIR", global = true, default_value = "runs")]
    output_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario config (TOML); the shipped calibration when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Delay scans (a: Δx1, b: Δx3, c: hybrid).
    Scan {
        #[command(flatten)]
        common: Common,
        /// One of a, b, c; all three when omitted.
        #[arg(long)]
        variant: Option<String>,
        /// Scan points.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Drift-phase coincidence traces.
    Oscillation {
        #[command(flatten)]
        common: Common,
        /// Acquisitions per trace.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Standard-basis visibility matrix and witness.
    Matrix {
        #[command(flatten)]
        common: Common,
    },
    /// True and accidental coincidences against the number of mode pairs.
    Snr {
        #[command(flatten)]
        common: Common,
    },
    /// Embedded verification suite.
    Validate {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Random configurations per randomized check.
        #[arg(long, default_value_t = 100)]
        configurations: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Scan { .. } => "scan",
            Command::Oscillation { .. } => "oscillation",
            Command::Matrix { .. } => "matrix",
            Command::Snr { .. } => "snr",
            Command::Validate { .. } => "validate",
        }
    }

    fn out(&self) -> Option<&Path> {
        match self {
            Command::Scan { common, .. }
            | Command::Oscillation { common, .. }
            | Command::Matrix { common }
            | Command::Snr { common } => common.out.as_deref(),
            Command::Validate { out, .. } => out.as_deref(),
        }
    }
}

struct Failure {
    kind: &'static str,
    message: String,
    code: u8,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = match error {
            Error::Config(_) | Error::InvalidParameter { .. } | Error::Io(_) => 2,
            _ => 1,
        };
        Failure { kind: error.kind(), message: error.to_string(), code }
    }
}

fn load_config(common: &Common, manifest: &mut RunManifest) -> Result<ExperimentConfig, Error> {
    let (mut cfg, bytes, path) = match &common.config {
        Some(p) => {
            let (cfg, bytes) = ExperimentConfig::load(p)?;
            (cfg, bytes, p.clone())
        }
        None => (ExperimentConfig::calibrated(), CALIBRATED_CONFIG.as_bytes().to_vec(), PathBuf::from("<builtin>/configs/calibrated.toml")),
    };
    *manifest = std::mem::replace(manifest, RunManifest::new("")).with_config(&path, &bytes);
    if let Some(seed) = common.seed {
        cfg.seed = Some(seed);
        manifest.overrides.push(format!("seed={seed}"));
    }
    manifest.seed = cfg.seed;
    Ok(cfg)
}

fn revalidate(cfg: &ExperimentConfig) -> Result<(), Error> {
    cfg.validate()
}

fn execute(cmd: &Command, run: &mut RunDir, manifest: &mut RunManifest) -> Result<(), Failure> {
    match cmd {
        Command::Scan { common, variant, steps } => {
            let mut cfg = load_config(common, manifest)?;
            if let Some(n) = steps {
                cfg.fig2.steps = *n;
                manifest.overrides.push(format!("steps={n}"));
            }
            revalidate(&cfg)?;
            let variants = match variant {
                Some(v) => vec![v.parse::<Fig2Variant>()?],
                None => Fig2Variant::ALL.to_vec(),
            };
            let mut summary = String::new();
            let mut results = serde_json::Map::new();
            for v in variants {
                let r = run_fig2(v, &cfg)?;
                run.write(&format!("scan_{v}.csv"), &output::scan_csv(&r.scan)?)?;
                run.write_json(&format!("scan_{v}.json"), &r)?;
                summary.push_str(&output::fig2_summary(&r));
                for w in &r.warnings {
                    eprintln!("warning: {w}");
                    manifest.warnings.push(w.clone());
                }
                results.insert(v.to_string(), json!({ "fwhm_m": r.fwhm_m, "visibility": r.visibility.value }));
            }
            run.write("summary.txt", summary.as_bytes())?;
            manifest.results = serde_json::Value::Object(results);
        }
        Command::Oscillation { common, steps } => {
            let mut cfg = load_config(common, manifest)?;
            if let Some(n) = steps {
                cfg.fig3.acquisitions = *n;
                manifest.overrides.push(format!("steps={n}"));
            }
            revalidate(&cfg)?;
            let r = run_fig3(&cfg)?;
            for t in &r.traces {
                run.write(&format!("trace_{}.csv", t.trace.name()), &output::trace_csv(t)?)?;
            }
            run.write_json("oscillation.json", &r)?;
            run.write("summary.txt", output::fig3_summary(&r).as_bytes())?;
            manifest.results = json!({
                "enhancement": r.enhancement,
                "enhancement_raw": r.enhancement_raw,
                "visibility_internal": r.traces[0].visibility_fringe,
                "visibility_external": r.traces[1].visibility_fringe,
            });
        }
        Command::Matrix { common } => {
            let cfg = load_config(common, manifest)?;
            revalidate(&cfg)?;
            let r = run_visibility_matrix(&cfg)?;
            run.write("matrix.csv", &output::matrix_csv(&r)?)?;
            run.write_json("matrix.json", &r)?;
            run.write("summary.txt", output::matrix_summary(&r).as_bytes())?;
            manifest.results = json!({ "v_zz": r.v_zz, "witnesses": r.witnesses });
        }
        Command::Snr { common } => {
            let cfg = load_config(common, manifest)?;
            revalidate(&cfg)?;
            let r = run_snr_sweep(&cfg, None)?;
            run.write("snr.csv", &output::snr_csv(&r)?)?;
            run.write_json("snr.json", &r)?;
            run.write("summary.txt", output::snr_summary(&r).as_bytes())?;
            manifest.results = json!({ "true_slope": r.true_slope, "accidental_slope": r.accidental_slope });
        }
        Command::Validate { configurations, seed, .. } => {
            let checks = run_validation(&ValidationOptions { seed: *seed, configurations: *configurations, ..Default::default() });
            println!("{:<44}{:<8}{:>10}  detail", "check", "result", "seconds");
            for c in &checks {
                let verdict = if c.passed { "pass" } else { "FAIL" };
                println!("{:<44}{:<8}{:>10.3}  {}", c.name, verdict, c.seconds, c.detail);
            }
            run.write_json("validation.json", &checks)?;
            manifest.results = json!(checks);
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            if !failed.is_empty() {
                return Err(Failure { kind: "validation_failed", message: format!("failed checks: {}", failed.join(", ")), code: 1 });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let name = cli.command.name();
    let dir = cli.command.out().map(Path::to_path_buf).unwrap_or_else(|| cli.output_root.join(name));
    let mut run = match RunDir::create(&dir) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{}", json!({ "error": { "kind": e.kind(), "message": e.to_string() } }));
            return ExitCode::from(2);
        }
    };
    let mut manifest = RunManifest::new(name);
    let outcome = execute(&cli.command, &mut run, &mut manifest);
    manifest.command = name.into();
    let code = match &outcome {
        Ok(()) => 0,
        Err(f) => {
            manifest.fail(f.kind, f.message.clone());
            eprintln!("{}", json!({ "error": { "kind": f.kind, "message": f.message } }));
            f.code
        }
    };
    match run.finish(manifest) {
        Ok(m) => {
            if m.status == RunStatus::Ok {
                eprintln!("wrote {}", dir.display());
            }
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": { "kind": e.kind(), "message": e.to_string() } }));
            return ExitCode::from(2);
        }
    }
    ExitCode::from(code)
}
