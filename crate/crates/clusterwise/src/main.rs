use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use clusterwise::config::{FitConfig, McSection, RunConfig};
use clusterwise::csv_io::CsvSchema;
use clusterwise::error::{exit, AppError, Result};
use clusterwise::fit::{coefficient_table, run_fit, write_fit_outputs};
use clusterwise::montecarlo::{calibration_from, efficiency_from, me_study_from, simulate, ESTIMATORS};
use clusterwise::report::{file_stem, fmt_opt, hash_json, write_json, write_mc_outputs};
use clusterwise::scenarios::{catalog, describe};
use clusterwise_core::covgen::{classify_dependence, OmegaSpec};

#[derive(Parser)]
#[command(name = "clusterwise", version, about = "Cluster-averaged and pooled OLS with cluster-robust inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit both estimators to a CSV file.
    Fit(FitArgs),
    /// Run a Monte Carlo scenario.
    Mc(McArgs),
    /// Draw one error covariance and print it as CSV.
    Omega(OmegaArgs),
}

#[derive(Args)]
struct FitArgs {
    /// JSON file with a `fit` section; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    cluster_col: Option<String>,
    #[arg(long)]
    y_col: Option<String>,
    /// Comma-separated regressor columns.
    #[arg(long, value_delimiter = ',')]
    x_cols: Option<Vec<String>>,
    #[arg(long)]
    no_intercept: bool,
    #[arg(long)]
    min_cluster_size: Option<usize>,
    #[arg(long)]
    df_correction: bool,
    /// Drop rows with missing cells instead of failing.
    #[arg(long)]
    drop_na: bool,
    /// Student t(G-1) p-values for coefficients.
    #[arg(long)]
    t_reference: bool,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    scenario: Option<String>,
    /// JSON file with an `mc` section; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of clusters.
    #[arg(long = "G")]
    clusters: Option<usize>,
    /// Size of the large cluster in one-large-cluster designs.
    #[arg(long = "N1")]
    large_size: Option<usize>,
    /// Replications.
    #[arg(long = "R")]
    replications: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    df_correction: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Print the scenario catalog and exit.
    #[arg(long)]
    list_scenarios: bool,
}

#[derive(Args)]
struct OmegaArgs {
    /// random_strong, scaled_strong, equicorrelated, semi_strong_block, weak_ar1 or identity.
    #[arg(long)]
    kind: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    exponent: Option<f64>,
    /// Write the matrix here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_section(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn fit_config(args: &FitArgs) -> Result<FitConfig> {
    let from_file = load_section(&args.config)?.fit;
    let missing = |flag: &str| AppError::Config(format!("fit needs --{flag} (or a config file with it)"));
    let mut cfg = match from_file {
        Some(c) => c,
        None => {
            let input = args.input.clone().ok_or_else(|| missing("input"))?;
            let schema = CsvSchema::new(
                args.cluster_col.clone().ok_or_else(|| missing("cluster-col"))?,
                args.y_col.clone().ok_or_else(|| missing("y-col"))?,
                args.x_cols.clone().ok_or_else(|| missing("x-cols"))?,
            );
            FitConfig {
                input,
                schema,
                estimators: ESTIMATORS.to_vec(),
                hypotheses: Vec::new(),
                df_correction: false,
                t_reference: false,
                level: clusterwise::scenarios::default_level(),
            }
        }
    };
    if let Some(p) = &args.input {
        cfg.input = p.clone();
    }
    if let Some(c) = &args.cluster_col {
        cfg.schema.cluster_col = c.clone();
    }
    if let Some(c) = &args.y_col {
        cfg.schema.y_col = c.clone();
    }
    if let Some(c) = &args.x_cols {
        cfg.schema.x_cols = c.clone();
    }
    if let Some(n) = args.min_cluster_size {
        cfg.schema.min_cluster_size = n;
    }
    cfg.schema.add_intercept &= !args.no_intercept;
    cfg.schema.drop_na |= args.drop_na;
    cfg.df_correction |= args.df_correction;
    cfg.t_reference |= args.t_reference;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let cfg = fit_config(args)?;
    let report = run_fit(&cfg)?;
    let files = write_fit_outputs(&args.out, &report)?;
    let (header, rows) = coefficient_table(&report);
    println!("{}", header[..6].join("\t"));
    for r in rows {
        println!("{}", r[..6].join("\t"));
    }
    for e in &report.estimators {
        if let Some(m) = &e.metrics {
            println!(
                "{}: r2={} adj_r2={} aic={} bic={}",
                e.estimator.as_str(),
                m.r2,
                fmt_opt(m.adj_r2),
                fmt_opt(m.aic),
                fmt_opt(m.bic)
            );
        }
    }
    println!(
        "clusters={} n_obs={} dropped_clusters={} dropped_cluster_rows={} dropped_na_rows={} config_hash={}",
        report.clusters,
        report.n_obs,
        report.dropped_clusters,
        report.dropped_cluster_rows,
        report.dropped_na_rows,
        report.config_hash
    );
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_mc(args: &McArgs) -> Result<()> {
    if args.list_scenarios {
        for s in catalog() {
            println!("{}", describe(&s));
        }
        return Ok(());
    }
    let base = load_section(&args.config)?.mc.unwrap_or_default();
    if base == McSection::default() && args.scenario.is_none() {
        return Err(AppError::Config("mc needs --scenario or --config".into()));
    }
    let flags = McSection {
        scenario: args.scenario.clone(),
        clusters: args.clusters,
        large_size: args.large_size,
        replications: args.replications,
        seed: args.seed,
        workers: args.workers,
        df_correction: args.df_correction,
        ..McSection::default()
    };
    let mut merged = base.merged(&flags);
    if args.scenario.is_some() {
        // A scenario named on the command line replaces an inline one.
        merged.design = flags.design;
        merged.omega = flags.omega;
    }
    let cfg = merged.resolve()?;
    let sim = simulate(&cfg)?;
    let report = sim.report;
    let mut files = write_mc_outputs(&args.out, &report)?;
    let stem = file_stem(&report.scenario);
    if report.measurement_error.is_some() {
        let p = args.out.join(format!("{stem}_me.json"));
        write_json(&p, &me_study_from(&report)?)?;
        files.push(p);
    } else if report.estimators.iter().all(|e| e.vhat_rel_error.is_some()) {
        let p = args.out.join(format!("{stem}_efficiency.json"));
        write_json(&p, &efficiency_from(&report, &cfg.scenario.omega))?;
        files.push(p);
        let p = args.out.join(format!("{stem}_calibration.json"));
        write_json(&p, &calibration_from(&report)?)?;
        files.push(p);
    }
    print_mc_summary(&report);
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn print_mc_summary(report: &clusterwise::montecarlo::McReport) {
    println!(
        "{} G={} R={} seed={} failures={} config_hash={}",
        report.scenario, report.design.clusters, report.replications, report.seed, report.failures, report.config_hash
    );
    println!("estimator\tmse\tsize\tpower\tsc_power");
    for e in &report.estimators {
        let mse: Vec<String> = e.mse.iter().map(|v| format!("{v:.4e}")).collect();
        println!(
            "{}\t{}\t{}\t{}\t{}",
            e.estimator.as_str(),
            mse.join(","),
            fmt_opt(e.empirical_size),
            fmt_opt(e.power),
            fmt_opt(e.size_corrected_power)
        );
    }
}

fn omega_spec(args: &OmegaArgs) -> Result<OmegaSpec> {
    let mut obj = serde_json::Map::new();
    obj.insert("kind".into(), args.kind.clone().into());
    for (key, v) in [("a", args.a), ("b", args.b), ("rho", args.rho), ("exponent", args.exponent)] {
        if let Some(v) = v {
            obj.insert(key.into(), v.into());
        }
    }
    serde_json::from_value(obj.into()).map_err(|e| AppError::Config(format!("omega `{}`: {e}", args.kind)))
}

fn cmd_omega(args: &OmegaArgs) -> Result<()> {
    let spec = omega_spec(args)?;
    let mut rng = clusterwise::montecarlo::stream_rng(args.seed, 0);
    let omega = spec.generate(args.n, &mut rng)?;
    let class = classify_dependence(&omega)?;
    let hash = hash_json(&(&spec, args.n, args.seed));
    let write_err = |path: &Path, e: csv::Error| AppError::Output {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    };
    match &args.out {
        Some(p) => {
            let f = std::fs::File::create(p).map_err(|source| AppError::Output {
                path: p.clone(),
                source,
            })?;
            clusterwise::csv_io::write_matrix_csv(f, &omega).map_err(|e| write_err(p, e))?;
        }
        None => clusterwise::csv_io::write_matrix_csv(std::io::stdout().lock(), &omega)
            .map_err(|e| write_err(Path::new("<stdout>"), e))?,
    }
    eprintln!(
        "{} n={} seed={} lambda_max={} class={:?} config_hash={hash}",
        spec.name(),
        args.n,
        args.seed,
        class.lambda_max,
        class.label
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let res = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Mc(a) => cmd_mc(a),
        Command::Omega(a) => cmd_omega(a),
    };
    match res {
        Ok(()) => {
            eprintln!("done in {:.2}s", started.elapsed().as_secs_f64());
            ExitCode::from(exit::OK as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
