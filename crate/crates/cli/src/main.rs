use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use weanpred_core::bayesopt::optimize_svm;
use weanpred_core::eval::repeated_cv;
use weanpred_core::io::write_file;
use weanpred_core::nudft::{spectrogram, write_spectrogram_csv};
use weanpred_core::pipeline::{
    compare_interpolation, comparison_grid, ingest_cohort, jittered_test_signal, mean_rate, run_pipeline, synth_cohort,
    write_cohort, PatientRecord, REPORT_CSV_FILE, REPORT_JSON_FILE, SELECTION_FILE, TRACE_FILE,
};
use weanpred_core::select::{select_features, write_selection_report};
use weanpred_core::series::{read_series_csv, wrangle, write_series_csv};
use weanpred_core::svm::KernelKind;
use weanpred_core::{Dataset, Error, KernelSpec, Result, RunConfig, SignalKind};

/// Writes to stdout, ignoring failures such as a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(
    name = "weanpred",
    version,
    about = "Weaning-outcome prediction from irregularly sampled series"
)]
struct Cli {
    /// `key = value` config file; unset keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CohortArg {
    /// Cohort manifest (`patient_id,label,series_dir`).
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Args)]
struct FeaturesArg {
    /// Feature matrix CSV written by `features`.
    #[arg(long)]
    features: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labelled cohort.
    Synth {
        /// Success patients (defaults to the config value).
        #[arg(long)]
        n_success: Option<usize>,
        #[arg(long)]
        n_failure: Option<usize>,
        /// 0 separates the classes, 1 makes them indistinguishable.
        #[arg(long)]
        difficulty: Option<f64>,
    },
    /// Clean every series of a cohort.
    Wrangle(CohortArg),
    /// Windowed NUDFT spectrograms of every cleaned series.
    Spectrogram(CohortArg),
    /// Feature matrix of a cohort.
    Features(CohortArg),
    /// Rank-test feature selection report.
    Select(FeaturesArg),
    /// Bayesian search over SVM hyperparameters.
    Optimize(FeaturesArg),
    /// Repeated stratified cross-validation of one SVM configuration.
    Evaluate {
        #[command(flatten)]
        features: FeaturesArg,
        #[arg(long, default_value = "rbf")]
        kernel: KernelKind,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 3)]
        degree: u32,
    },
    /// NUDFT versus interpolate-then-transform PSDs for one series.
    CompareInterp {
        /// Series CSV (`time_s,value`); a jittered test signal is used when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Resampling rate in Hz; defaults to the mean sampling rate.
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long, default_value_t = 256)]
        bins: usize,
    },
    /// Full pipeline on a cohort, or on a synthetic cohort when no manifest is given.
    Run {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

impl Command {
    fn stage(&self) -> &'static str {
        match self {
            Command::Synth { .. } => "synth",
            Command::Wrangle(_) => "wrangle",
            Command::Spectrogram(_) => "spectrogram",
            Command::Features(_) => "features",
            Command::Select(_) => "select",
            Command::Optimize(_) => "optimize",
            Command::Evaluate { .. } => "evaluate",
            Command::CompareInterp { .. } => "compare-interp",
            Command::Run { .. } => "run",
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn per_series(
    records: &[PatientRecord],
    out: &Path,
    mut f: impl FnMut(&Path, SignalKind, &weanpred_core::NonUniformSeries) -> Result<()>,
) -> Result<()> {
    for r in records {
        for (kind, s) in &r.series {
            let path = out.join(&r.patient_id).join(format!("{}.csv", kind.ident()));
            f(&path, *kind, s)?;
        }
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli).map_err(|e| e.in_stage("config"))?;
    let stamp = cfg.stamp();
    let out = &cli.out;
    match &cli.command {
        Command::Synth {
            n_success,
            n_failure,
            difficulty,
        } => {
            let cohort = synth_cohort(
                n_success.unwrap_or(cfg.synth_success),
                n_failure.unwrap_or(cfg.synth_failure),
                cfg.seed,
                difficulty.unwrap_or(cfg.synth_difficulty),
            )?;
            let manifest = write_cohort(out, &cohort, Some(&stamp))?;
            say!("{}", manifest.display());
        }
        Command::Wrangle(arg) => {
            let records = ingest_cohort(&arg.manifest)?;
            per_series(&records, &out.join("wrangled"), |path, _, s| {
                write_series_csv(path, &wrangle(s, &cfg.wrangle)?, Some(&stamp))
            })?;
        }
        Command::Spectrogram(arg) => {
            let records = ingest_cohort(&arg.manifest)?;
            per_series(&records, &out.join("spectrograms"), |path, _, s| {
                let frames = spectrogram(&wrangle(s, &cfg.wrangle)?, &cfg.spectrogram)?;
                write_spectrogram_csv(path, &frames, Some(&stamp))
            })?;
        }
        Command::Features(arg) => {
            let records = ingest_cohort(&arg.manifest)?;
            let ds = weanpred_core::pipeline::extract_features(&records, &cfg)?;
            let path = out.join("features.csv");
            ds.write_csv(&path, Some(&stamp))?;
            say!("{} patients x {} features -> {}", ds.len(), ds.dim(), path.display());
        }
        Command::Select(arg) => {
            let ds = Dataset::read_csv(&arg.features)?;
            let sel = select_features(&ds, cfg.selection.threshold, cfg.selection.k)?;
            write_selection_report(&out.join(SELECTION_FILE), &ds, &sel, Some(&stamp))?;
            for (name, p) in sel.kept_names.iter().zip(&sel.p_values) {
                say!("{name}\t{p:.3e}");
            }
        }
        Command::Optimize(arg) => {
            let ds = Dataset::read_csv(&arg.features)?;
            let search = optimize_svm(&ds, &cfg.bo(), &cfg.selection, &cfg.smo())?;
            search.write_trace(&out.join(TRACE_FILE), Some(&stamp))?;
            match search.best_spec() {
                Some(spec) => say!("best {spec}"),
                None => return Err(Error::InvalidConfig("every hyperparameter evaluation failed".into())),
            }
        }
        Command::Evaluate {
            features,
            kernel,
            c,
            scale,
            degree,
        } => {
            let ds = Dataset::read_csv(&features.features)?;
            let spec = KernelSpec {
                kind: *kernel,
                c: *c,
                degree: *degree,
                scale: *scale,
            };
            spec.validate()?;
            let report = repeated_cv(&ds, &spec, &cfg.cv())?;
            report.write(&out.join(REPORT_CSV_FILE), &out.join(REPORT_JSON_FILE), Some(&stamp))?;
            say!("{}", report.to_csv(None).trim_end());
        }
        Command::CompareInterp { input, rate, bins } => {
            let series = match input {
                Some(path) => read_series_csv(path, SignalKind::Vt)?,
                None => jittered_test_signal(cfg.seed, 300, 1.0, 0.5, 0.08, 1.0, 0.3)?,
            };
            let rate = match rate {
                Some(r) => *r,
                None => mean_rate(&series)?,
            };
            let cmp = compare_interpolation(&series, rate, &comparison_grid(rate, *bins)?)?;
            write_file(&out.join("interp_psd.csv"), &cmp.psd_csv(Some(&stamp)))?;
            let diagnostics = cmp.diagnostics_csv(Some(&stamp));
            write_file(&out.join("interp_diagnostics.csv"), &diagnostics)?;
            say!("{}", diagnostics.lines().skip(1).collect::<Vec<_>>().join("\n"));
        }
        Command::Run { manifest } => {
            let records = match manifest {
                Some(path) => ingest_cohort(path).map_err(|e| e.in_stage("ingest"))?,
                None => synth_cohort(cfg.synth_success, cfg.synth_failure, cfg.seed, cfg.synth_difficulty)
                    .map_err(|e| e.in_stage("synth"))?,
            };
            let summary = run_pipeline(&records, &cfg, out)?;
            let report = &summary.run.report;
            say!("best {}", summary.run.best_spec);
            for (name, m) in report.rows() {
                say!("{name}\t{:.4} +/- {:.4}", m.mean, m.std);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.in_stage(cli.command.stage()));
            ExitCode::FAILURE
        }
    }
}
