//! Command-line front end. Every subcommand writes a CSV table (and some a
//! JSON report) into the output directory and echoes the table to stdout.
//!
//! Exit codes: 0 success, 1 bad arguments, 2 computation failure.

use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analytics::{
    pdf_support_bound, pdf_wij_iid, pdf_wij_theta, prf_mse_ratio, prf_orthogonality_gap,
    rff_asymptotic_ratio, rff_exact_ratio, rff_orthogonality_gap, simrf_small_v_prefactor,
    SeriesControl,
};
use crate::blocks::{CouplingKind, CouplingScheme};
use crate::error::{Error, Result};
use crate::experiments::{
    classification_experiment, closure_suite, gaussian_points, gram_frobenius, load_dataset,
    mse_gap, mse_ratio_curve, pair_with_v, pair_with_z, synthetic_banknote_like,
    synthetic_wifi_like, tune_sigma, write_csv, write_json, ClassificationConfig, CsvOptions,
    Dataset, ExperimentReport, ReportParameters, SchemeStatistic, SplitFractions, TUNING_SEEDS,
};
use crate::features::FeatureMapKind;
use crate::optimizer::{conformity_comparison, optimize_block, OptimizerSettings};
use crate::rng::RngStream;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SIMRF_OUT_DIR";

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "simrf",
    version,
    about = "Simplex random features: kernel estimator analytics and benchmarks",
    after_help = "Output directory: --out, else $SIMRF_OUT_DIR, else the current directory.\n\
                  Every CSV starts with a '#' line holding the full run configuration."
)]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Relative truncation tolerance of the conformity series.
    #[arg(long, global = true, default_value_t = 1e-12)]
    rel_tol: f64,
    #[arg(long, global = true, default_value_t = 10_000)]
    max_terms: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Analytic and empirical RF-conformity per coupling scheme.
    #[command(after_help = "conformity.csv: draw,scheme,analytic,empirical,empirical_sd,truncated,v,d,m,seed")]
    Conformity(ConformityArgs),
    /// PRF MSE ratios against IID over a grid of v (closed forms only).
    #[command(after_help = "mse-curve.csv: v,orf_ratio,simrf_ratio,limit\n\
                            limit=true marks v=0, where ratios are their small-v limits.")]
    MseCurve(MseCurveArgs),
    /// Orthogonality gap MSE_IID - MSE_ORF, closed form and optional Monte Carlo.
    #[command(after_help = "gap.csv: map,d,m,arg,gap,ratio,asymptotic_ratio,mc_gap,mc_se,trials\n\
                            arg is v for prf and z for rff; ratio is MSE_ORF/MSE_IID.")]
    Gap(GapArgs),
    /// Frobenius error of PRF Gram matrix approximations.
    #[command(after_help = "gram.csv: m,scheme,mean,se,trials   (also gram.json)")]
    Gram(GramArgs),
    /// Kernel-regression classification accuracy per scheme and m.
    #[command(after_help = "classify.csv: scheme,m,mean,se,trials   (also classify.json)\n\
                            sigma-tuning.csv (with --tune-sigma): sigma,mean,se,trials\n\
                            The row with scheme=exact, m=0 is the exact-kernel baseline.")]
    Classify(ClassifyArgs),
    /// Numerically optimised directions for one norm draw.
    #[command(after_help = "optimize.csv: vector,norm,x1..xd   (also optimize.json)")]
    Optimize(OptimizeArgs),
    /// Densities of |w_i + w_j| for independent and coupled pairs.
    #[command(after_help = "pdf.csv: w,iid,orthogonal,simplex")]
    Pdf(PdfArgs),
    /// Check simulated MSEs against the closed forms.
    #[command(after_help = "selftest.csv: map,scheme,d,m,arg,analytic,empirical,se,z,pass")]
    Selftest(SelftestArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Conformity(_) => "conformity",
            Command::MseCurve(_) => "mse-curve",
            Command::Gap(_) => "gap",
            Command::Gram(_) => "gram",
            Command::Classify(_) => "classify",
            Command::Optimize(_) => "optimize",
            Command::Pdf(_) => "pdf",
            Command::Selftest(_) => "selftest",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConformityArgs {
    #[arg(long, default_value_t = 6)]
    pub d: usize,
    #[arg(long, default_value_t = 1.0)]
    pub v: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Independent norm draws.
    #[arg(long, default_value_t = 1)]
    pub draws: usize,
    /// Add the numerically optimised baseline.
    #[arg(long)]
    pub numerical: bool,
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    #[arg(long, default_value_t = 2000)]
    pub max_iters: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MseCurveArgs {
    #[arg(long, default_value_t = 64)]
    pub d: usize,
    /// Comma-separated v values (default: 0 to 2 in steps of 0.1).
    #[arg(long, value_delimiter = ',')]
    pub v: Vec<f64>,
    /// Number of features (default d).
    #[arg(long)]
    pub m: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GapArgs {
    /// prf or rff.
    #[arg(long, default_value = "rff")]
    pub map: String,
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    #[arg(long)]
    pub m: Option<usize>,
    /// v values (prf).
    #[arg(long, value_delimiter = ',')]
    pub v: Vec<f64>,
    /// z values (rff).
    #[arg(long, value_delimiter = ',')]
    pub z: Vec<f64>,
    /// Monte Carlo trials for the paired gap estimate (0 skips it).
    #[arg(long, default_value_t = 0)]
    pub trials: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GramArgs {
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 64)]
    pub d: usize,
    /// Coordinate standard deviation of the points.
    #[arg(long, default_value_t = 0.1)]
    pub sd: f64,
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128")]
    pub m: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "iid,orf,simrf")]
    pub schemes: Vec<String>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClassifyArgs {
    /// CSV dataset.
    #[arg(long, conflicts_with = "synthetic")]
    pub data: Option<PathBuf>,
    /// Built-in synthetic set: banknote or wifi.
    #[arg(long)]
    pub synthetic: Option<String>,
    /// Zero-based label column (default: last).
    #[arg(long)]
    pub label_column: Option<usize>,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// The first row is a header.
    #[arg(long)]
    pub header: bool,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Standardize columns with training-split statistics.
    #[arg(long)]
    pub standardize: bool,
    /// Zero-pad the features to this many columns.
    #[arg(long)]
    pub pad_to: Option<usize>,
    /// Keep at most this many training points.
    #[arg(long)]
    pub max_train: Option<usize>,
    /// Keep at most this many validation and test points.
    #[arg(long)]
    pub max_test: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "iid,orf,simrf,simrf+")]
    pub schemes: Vec<String>,
    /// Feature counts (default: the data dimension).
    #[arg(long, value_delimiter = ',')]
    pub m: Vec<usize>,
    #[arg(long, default_value = "prf")]
    pub map: String,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Pick sigma by IID PRF validation accuracy at m = 10d.
    #[arg(long)]
    pub tune_sigma: bool,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75,1,1.5,2")]
    pub sigma_grid: Vec<f64>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OptimizeArgs {
    #[arg(long, default_value_t = 6)]
    pub d: usize,
    #[arg(long, default_value_t = 1.0)]
    pub v: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    #[arg(long, default_value_t = 2000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub gradient_tol: f64,
    /// Start every restart at random directions.
    #[arg(long)]
    pub random_starts: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PdfArgs {
    #[arg(long, default_value_t = 4)]
    pub d: usize,
    /// Largest w tabulated (default: where the densities are negligible).
    #[arg(long)]
    pub w_max: Option<f64>,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SelftestArgs {
    /// Smaller dimensions and trial counts.
    #[arg(long)]
    pub quick: bool,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

/// Everything that determines a run; serialized into each output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub version: String,
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
    pub series: SeriesControl,
    pub command: Command,
}

impl RunConfig {
    fn comment(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let out_dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let config = RunConfig {
        version: env!("CARGO_PKG_VERSION").into(),
        threads: cli.threads,
        out_dir,
        series: SeriesControl {
            rel_tol: cli.rel_tol,
            max_terms: cli.max_terms,
        },
        command: cli.command,
    };
    let result = match config.threads {
        Some(0) => Err(Error::Argument("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&config)),
            Err(e) => Err(Error::Range(format!("thread pool: {e}"))),
        },
        None => execute(&config),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("simrf {}: {e}", config.command.name());
            if e.is_argument() {
                1
            } else {
                2
            }
        }
    }
}

fn execute(config: &RunConfig) -> Result<i32> {
    config.series.validate()?;
    std::fs::create_dir_all(&config.out_dir)?;
    let ctl = config.series;
    match &config.command {
        Command::Conformity(a) => conformity(config, a, ctl),
        Command::MseCurve(a) => mse_curve(config, a, ctl),
        Command::Gap(a) => gap(config, a, ctl),
        Command::Gram(a) => gram(config, a),
        Command::Classify(a) => classify(config, a),
        Command::Optimize(a) => optimize(config, a, ctl),
        Command::Pdf(a) => pdf(config, a),
        Command::Selftest(a) => selftest(config, a, ctl),
    }
}

fn cell<T: Display>(x: T) -> String {
    x.to_string()
}

fn opt_cell<T: Display>(x: Option<T>) -> String {
    x.map(cell).unwrap_or_default()
}

/// Write `<out>/<name>.csv` and echo the table to stdout.
fn emit(config: &RunConfig, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
    let path = config.out_dir.join(format!("{name}.csv"));
    write_csv(&path, &config.comment()?, header, rows)?;
    println!("{}", header.join(","));
    for r in rows {
        println!("{}", r.join(","));
    }
    eprintln!("wrote {}", path.display());
    Ok(path)
}

fn emit_report(config: &RunConfig, name: &str, mut report: ExperimentReport, files: &[&Path]) -> Result<()> {
    report.files = files.iter().map(|p| p.display().to_string()).collect();
    report.config = Some(serde_json::to_value(config)?);
    let path = config.out_dir.join(format!("{name}.json"));
    write_json(&path, &report)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn schemes(names: &[String]) -> Result<Vec<CouplingScheme>> {
    names.iter().map(|s| s.parse()).collect()
}

fn optimizer_settings(restarts: usize, max_iters: usize, ctl: SeriesControl) -> OptimizerSettings {
    OptimizerSettings {
        restarts,
        max_iters,
        series: ctl,
        ..OptimizerSettings::default()
    }
}

fn conformity(config: &RunConfig, a: &ConformityArgs, ctl: SeriesControl) -> Result<i32> {
    if a.draws == 0 {
        return Err(Error::Argument("--draws must be at least 1".into()));
    }
    let settings = optimizer_settings(a.restarts, a.max_iters, ctl);
    let base = RngStream::new(a.seed);
    let mut rows = Vec::new();
    for draw in 0..a.draws {
        for r in conformity_comparison(a.d, a.v, &base.trial(draw as u64), a.numerical, &settings)? {
            rows.push(vec![
                cell(draw),
                r.scheme,
                opt_cell(r.analytic),
                cell(r.empirical),
                opt_cell(r.empirical_sd),
                opt_cell(r.truncated),
                cell(r.v),
                cell(r.d),
                cell(r.m),
                cell(r.seed),
            ]);
        }
    }
    emit(
        config,
        "conformity",
        &["draw", "scheme", "analytic", "empirical", "empirical_sd", "truncated", "v", "d", "m", "seed"],
        &rows,
    )?;
    Ok(0)
}

fn mse_curve(config: &RunConfig, a: &MseCurveArgs, ctl: SeriesControl) -> Result<i32> {
    let grid: Vec<f64> = if a.v.is_empty() {
        (0..=20).map(|i| i as f64 / 10.0).collect()
    } else {
        a.v.clone()
    };
    let rows: Vec<Vec<String>> = mse_ratio_curve(a.d, &grid, a.m.unwrap_or(a.d), ctl)?
        .into_iter()
        .map(|r| vec![cell(r.v), cell(r.orf), cell(r.simrf), cell(r.limit)])
        .collect();
    emit(config, "mse-curve", &["v", "orf_ratio", "simrf_ratio", "limit"], &rows)?;
    Ok(0)
}

fn gap(config: &RunConfig, a: &GapArgs, ctl: SeriesControl) -> Result<i32> {
    let map: FeatureMapKind = a.map.parse()?;
    let m = a.m.unwrap_or(a.d);
    let args = match map {
        FeatureMapKind::Prf => &a.v,
        FeatureMapKind::Rff => &a.z,
    };
    if args.is_empty() {
        return Err(Error::Argument(format!(
            "gap for {map} needs --{}",
            if map == FeatureMapKind::Prf { "v" } else { "z" }
        )));
    }
    let stream = RngStream::new(a.seed);
    let mut rows = Vec::new();
    for &x in args {
        let (pair, gap, ratio, asym) = match map {
            FeatureMapKind::Prf => {
                let p = pair_with_v(a.d, x)?;
                let g = prf_orthogonality_gap(p.x_norm(), p.y_norm(), x, a.d, m, ctl)?;
                (p, g, prf_mse_ratio(CouplingKind::Orf, x, a.d, m, ctl)?, None)
            }
            FeatureMapKind::Rff => (
                pair_with_z(a.d, x)?,
                rff_orthogonality_gap(x, a.d, m, ctl)?,
                rff_exact_ratio(x, a.d, m, ctl)?,
                Some(rff_asymptotic_ratio(x, a.d, m)?),
            ),
        };
        let mc = if a.trials > 0 {
            Some(mse_gap(&pair, CouplingScheme::IID, CouplingScheme::ORF, map, m, a.trials, &stream)?)
        } else {
            None
        };
        rows.push(vec![
            cell(map),
            cell(a.d),
            cell(m),
            cell(x),
            cell(gap),
            cell(ratio),
            opt_cell(asym),
            opt_cell(mc.map(|s| s.mean)),
            opt_cell(mc.map(|s| s.se)),
            cell(a.trials),
        ]);
    }
    emit(
        config,
        "gap",
        &["map", "d", "m", "arg", "gap", "ratio", "asymptotic_ratio", "mc_gap", "mc_se", "trials"],
        &rows,
    )?;
    Ok(0)
}

fn gram(config: &RunConfig, a: &GramArgs) -> Result<i32> {
    let schemes = schemes(&a.schemes)?;
    let stream = RngStream::new(a.seed);
    let points = gaussian_points(a.n, a.d, a.sd, &stream.derive(1))?;
    let mut stats = Vec::new();
    for &m in &a.m {
        for &scheme in &schemes {
            let s = gram_frobenius(&points, scheme, m, a.trials, &stream)?;
            stats.push(SchemeStatistic {
                scheme: scheme.to_string(),
                m,
                mean: s.mean,
                se: s.se,
                trials: s.n,
            });
        }
    }
    let rows = statistic_rows(&stats);
    let csv = emit(config, "gram", &["m", "scheme", "mean", "se", "trials"], &rows)?;
    let report = ExperimentReport::new(
        "gram",
        ReportParameters {
            d: a.d,
            m_grid: a.m.clone(),
            schemes: schemes.iter().map(ToString::to_string).collect(),
            map: Some(FeatureMapKind::Prf.to_string()),
            sigma: None,
            trials: a.trials,
            seed: a.seed,
            dataset: None,
        },
        stats,
    );
    emit_report(config, "gram", report, &[&csv])?;
    Ok(0)
}

fn statistic_rows(stats: &[SchemeStatistic]) -> Vec<Vec<String>> {
    stats
        .iter()
        .map(|s| vec![cell(s.m), s.scheme.clone(), cell(s.mean), cell(s.se), cell(s.trials)])
        .collect()
}

fn classify_dataset(a: &ClassifyArgs) -> Result<Dataset> {
    let mut ds = match (&a.data, a.synthetic.as_deref()) {
        (Some(path), None) => {
            if !a.delimiter.is_ascii() {
                return Err(Error::Argument("--delimiter must be a single ASCII character".into()));
            }
            let opts = CsvOptions {
                label_column: a.label_column,
                delimiter: a.delimiter as u8,
                has_header: a.header,
                fractions: SplitFractions::default(),
                split_seed: a.split_seed,
                standardize: a.standardize,
            };
            load_dataset(path, &opts)?
        }
        (None, Some("banknote")) => synthetic_banknote_like(a.split_seed)?,
        (None, Some("wifi")) => synthetic_wifi_like(a.split_seed)?,
        (None, Some(other)) => {
            return Err(Error::Argument(format!("unknown synthetic dataset '{other}'")));
        }
        _ => return Err(Error::Argument("classify needs --data or --synthetic".into())),
    };
    if a.synthetic.is_some() && a.standardize {
        ds = ds.standardized();
    }
    if let Some(dim) = a.pad_to {
        ds = ds.zero_padded(dim)?;
    }
    if a.max_train.is_some() || a.max_test.is_some() {
        ds = ds.restricted(a.max_train.unwrap_or(usize::MAX), a.max_test.unwrap_or(usize::MAX));
    }
    Ok(ds)
}

fn classify(config: &RunConfig, a: &ClassifyArgs) -> Result<i32> {
    let schemes = schemes(&a.schemes)?;
    let map: FeatureMapKind = a.map.parse()?;
    if a.sigma.is_none() && !a.tune_sigma {
        return Err(Error::Argument("classify needs --sigma or --tune-sigma".into()));
    }
    let ds = classify_dataset(a)?;
    let stream = RngStream::new(a.seed);
    let mut files = Vec::new();
    let sigma = match a.sigma {
        Some(s) if !a.tune_sigma => s,
        _ => {
            let t = tune_sigma(
                &ds.train(),
                &ds.validation(),
                &a.sigma_grid,
                CouplingScheme::IID,
                10 * ds.dim(),
                &stream.derive(1),
            )?;
            let rows: Vec<Vec<String>> = t
                .table
                .iter()
                .map(|s| vec![cell(s.sigma), cell(s.accuracy.mean), cell(s.accuracy.se), cell(s.accuracy.n)])
                .collect();
            files.push(emit(config, "sigma-tuning", &["sigma", "mean", "se", "trials"], &rows)?);
            eprintln!("tuned sigma = {} over {TUNING_SEEDS} ensembles per grid point", t.sigma);
            t.sigma
        }
    };
    let cfg = ClassificationConfig {
        schemes,
        m_grid: if a.m.is_empty() { vec![ds.dim()] } else { a.m.clone() },
        trials: a.trials,
        sigma,
        map,
    };
    let report = classification_experiment(&ds, &cfg, &stream)?;
    let csv = emit(config, "classify", &["scheme", "m", "mean", "se", "trials"], &{
        report
            .statistics
            .iter()
            .map(|s| vec![s.scheme.clone(), cell(s.m), cell(s.mean), cell(s.se), cell(s.trials)])
            .collect::<Vec<_>>()
    })?;
    files.push(csv);
    let refs: Vec<&Path> = files.iter().map(PathBuf::as_path).collect();
    emit_report(config, "classify", report, &refs)?;
    Ok(0)
}

fn optimize(config: &RunConfig, a: &OptimizeArgs, ctl: SeriesControl) -> Result<i32> {
    let settings = OptimizerSettings {
        gradient_tol: a.gradient_tol,
        structured_starts: !a.random_starts,
        ..optimizer_settings(a.restarts, a.max_iters, ctl)
    };
    let (norms, opt) = optimize_block(a.d, a.v, &settings, &RngStream::new(a.seed).trial(0))?;
    let mut header = vec!["vector".to_string(), "norm".to_string()];
    header.extend((1..=a.d).map(|i| format!("x{i}")));
    let rows: Vec<Vec<String>> = opt
        .directions
        .row_iter()
        .enumerate()
        .map(|(i, dir)| {
            let mut r = vec![cell(i), cell(norms[i])];
            r.extend(dir.iter().map(|x| cell(*x)));
            r
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let csv = emit(config, "optimize", &header, &rows)?;
    if opt.warning {
        eprintln!("warning: no restart met the gradient tolerance");
    }
    let summary = serde_json::json!({
        "rho": opt.rho,
        "restart": opt.restart,
        "iterations": opt.iterations,
        "converged": opt.converged,
        "warning": opt.warning,
        "files": [csv.display().to_string()],
        "config": config,
    });
    let path = config.out_dir.join("optimize.json");
    write_json(&path, &summary)?;
    eprintln!("rho = {}", opt.rho);
    Ok(0)
}

fn pdf(config: &RunConfig, a: &PdfArgs) -> Result<i32> {
    if a.points < 2 {
        return Err(Error::Argument("--points must be at least 2".into()));
    }
    if a.d < 2 {
        return Err(Error::Argument("pdf needs d >= 2".into()));
    }
    let w_max = a.w_max.unwrap_or_else(|| pdf_support_bound(a.d) / 2.0);
    if !(w_max > 0.0) {
        return Err(Error::Argument("--w-max must be positive".into()));
    }
    let simplex_cos = -1.0 / (a.d as f64 - 1.0);
    let rows = (0..a.points)
        .map(|i| {
            let w = w_max * i as f64 / (a.points - 1) as f64;
            Ok(vec![
                cell(w),
                cell(pdf_wij_iid(w, a.d)?),
                cell(pdf_wij_theta(w, a.d, 0.0)?),
                cell(pdf_wij_theta(w, a.d, simplex_cos)?),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    emit(config, "pdf", &["w", "iid", "orthogonal", "simplex"], &rows)?;
    Ok(0)
}

fn selftest(config: &RunConfig, a: &SelftestArgs, ctl: SeriesControl) -> Result<i32> {
    let (dims, args, trials): (&[usize], &[f64], usize) = if a.quick {
        (&[4, 8], &[0.5, 1.0], 20_000)
    } else {
        (&[4, 8, 64], &[0.5, 1.0, 2.0], 100_000)
    };
    let checks = closure_suite(
        &[FeatureMapKind::Prf, FeatureMapKind::Rff],
        dims,
        args,
        trials,
        &RngStream::new(a.seed),
        ctl,
    )?;
    let mut failed = 0;
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            let pass = c.passes(3.0);
            failed += usize::from(!pass);
            vec![
                cell(c.map),
                cell(c.scheme),
                cell(c.d),
                cell(c.m),
                cell(c.arg),
                cell(c.analytic),
                cell(c.empirical.mean),
                cell(c.empirical.se),
                cell(c.z_score()),
                cell(pass),
            ]
        })
        .collect();
    emit(
        config,
        "selftest",
        &["map", "scheme", "d", "m", "arg", "analytic", "empirical", "se", "z", "pass"],
        &rows,
    )?;
    let prefactor = simrf_small_v_prefactor(64)?;
    let prefactor_ok = (prefactor - 0.0078).abs() < 5e-5;
    eprintln!("small-v prefactor at d=64: {prefactor:.6} ({})", if prefactor_ok { "ok" } else { "FAILED" });
    eprintln!("{} of {} closure checks within 3 SE", checks.len() - failed, checks.len());
    Ok(if failed == 0 && prefactor_ok { 0 } else { 2 })
}
