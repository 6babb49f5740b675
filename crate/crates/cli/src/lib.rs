//! `run` and `compare` commands behind the `fedtransfer` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fedtransfer::federation::run_experiment;
use fedtransfer::report::ExperimentReport;
use fedtransfer::{Error, ExperimentConfig};

/// Environment variable naming the default output directory.
pub const OUTPUT_ENV: &str = "FEDTRANSFER_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

/// A failure carrying its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { code: EXIT_CONFIG, message: message.into() }
    }

    fn data(message: impl Into<String>) -> Self {
        Failure { code: EXIT_DATA, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) => EXIT_CONFIG,
            e if e.is_data_error() => EXIT_DATA,
            _ => EXIT_INTERNAL,
        };
        Failure { code, message: e.to_string() }
    }
}

pub struct RunOptions {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

pub fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    Ok(cfg)
}

fn output_dir(opts: &RunOptions, cfg: &ExperimentConfig) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

pub fn read_report(path: &Path) -> Result<ExperimentReport, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

/// Runs the configured experiment and writes its artifacts. Nothing is
/// written unless the run succeeds.
pub fn run(opts: &RunOptions) -> Result<PathBuf, Failure> {
    let cfg = load_config(&opts.config, opts.seed)?;
    let reference = match &cfg.reference_report {
        Some(p) => Some(read_report(p)?),
        None => None,
    };
    let out = output_dir(opts, &cfg);
    let started = Instant::now();
    let mut report = run_experiment(&cfg)?;
    if let Some(r) = &reference {
        report.set_reference(r);
    }
    report.wall_clock_seconds = started.elapsed().as_secs_f64();
    write_outputs(&out, &report).map_err(|e| Failure {
        code: EXIT_INTERNAL,
        message: format!("writing {}: {e}", out.display()),
    })?;
    Ok(out)
}

pub fn write_outputs(dir: &Path, report: &ExperimentReport) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(report).map_err(std::io::Error::other)?;
    fs::write(dir.join("report.json"), json + "\n")?;
    fs::write(dir.join("curves.csv"), curves_csv(report))?;
    for (modality, cm) in &report.confusion {
        let mut raw = String::from("actual");
        for j in 0..cm.classes() {
            let _ = write!(raw, ",pred_{j}");
        }
        raw.push('\n');
        for (i, row) in cm.counts.iter().enumerate() {
            let _ = write!(raw, "{i}");
            for c in row {
                let _ = write!(raw, ",{c}");
            }
            raw.push('\n');
        }
        fs::write(dir.join(format!("confusion_{modality}.csv")), raw)?;

        let norm = &report.normalized_confusion[modality];
        let mut text = String::from("actual");
        for j in 0..cm.classes() {
            let _ = write!(text, ",pred_{j}");
        }
        text.push('\n');
        for (i, row) in norm.rates.iter().enumerate() {
            let _ = write!(text, "{i}");
            for r in row {
                let _ = write!(text, ",{r}");
            }
            text.push('\n');
        }
        fs::write(dir.join(format!("confusion_{modality}_normalized.csv")), text)?;
    }
    Ok(())
}

/// Long format: one row per (seed, epoch, series).
pub fn curves_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("seed,epoch,series,value\n");
    for seed in &report.seeds {
        for (series, values) in &seed.curves {
            for (i, v) in values.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{}", seed.seed, i + 1, series, v);
            }
        }
    }
    out
}

/// Side-by-side final accuracies of two reports.
pub fn compare_table(a: &ExperimentReport, b: &ExperimentReport) -> String {
    let mut modalities: Vec<&String> = a.mean_test_accuracy.keys().chain(b.mean_test_accuracy.keys()).collect();
    modalities.sort();
    modalities.dedup();
    let mut out = String::new();
    let _ = writeln!(out, "A: {}  B: {}", a.regime, b.regime);
    let _ = writeln!(
        out,
        "{:<12} {:>10} {:>10} {:>10} {:>10}",
        "modality", "A acc", "B acc", "B - A", "delta"
    );
    for m in modalities {
        let fmt = |v: Option<&f64>| v.map_or("-".to_string(), |x| format!("{:.4}", x));
        let (va, vb) = (a.mean_test_accuracy.get(m), b.mean_test_accuracy.get(m));
        let (diff, gap) = match (va, vb) {
            (Some(x), Some(y)) => (
                format!("{:+.4}", y - x),
                format!("{:.4}", fedtransfer::metrics::delta_gap(*x, *y)),
            ),
            _ => ("-".into(), "-".into()),
        };
        let _ = writeln!(out, "{:<12} {:>10} {:>10} {:>10} {:>10}", m, fmt(va), fmt(vb), diff, gap);
    }
    out
}

pub fn compare(a: &Path, b: &Path) -> Result<String, Failure> {
    Ok(compare_table(&read_report(a)?, &read_report(b)?))
}
