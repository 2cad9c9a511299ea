use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cxmiss::data::IncompleteInstance;
use cxmiss::explainers::Method;
use cxmiss::harness::{
    aggregate, config_base, read_rows, render, render_aggregate, run_bench_in, sweep_wachter, write_outputs,
    write_sweep, BenchConfig, GroupBy, HarnessError, Prepared, ReportFormat, SweepConfig,
};
use cxmiss::impute::{Imputer, ImputerKind};
use cxmiss::model::{Classifier, MODEL_EXTENSION};
use cxmiss::solver::{encode, MiloProblem};

#[derive(Parser)]
#[command(name = "cxmiss", version, about = "Counterfactual explanations under missing data")]
struct Cli {
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Write the mixed-integer program of `explain` to this file.
    #[arg(long, global = true)]
    dump_milo: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one classifier per configured dataset.
    Train { config: PathBuf },
    /// Run the benchmark grid and write rows.csv and manifest.json.
    Bench { config: PathBuf },
    /// Wachter hyperparameter sweep.
    Sweep { config: PathBuf },
    /// Render a results file.
    Report {
        rows: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: String,
        /// Summarize VRC by group with rank tests instead of listing cells.
        #[arg(long)]
        aggregate: Option<String>,
    },
    /// Explain one instance, e.g. `0.2,*,0.9`.
    Explain {
        model: PathBuf,
        instance: String,
        #[arg(long)]
        method: String,
        #[arg(long, default_value = "knn")]
        impute: String,
        /// Bench config providing the training data.
        #[arg(long)]
        config: PathBuf,
        /// Dataset name within the config (default: the first).
        #[arg(long)]
        dataset: Option<String>,
    },
}

fn bench_config(path: &Path, cli: &Cli) -> Result<BenchConfig, HarnessError> {
    let mut cfg = BenchConfig::from_file(path)?;
    if let Some(seed) = cli.seed {
        cfg.seeds.master = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn output_dir(dir: &Path, base: &Path) -> PathBuf {
    if dir.is_absolute() { dir.to_path_buf() } else { base.join(dir) }
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    match &cli.command {
        Command::Train { config } => {
            let cfg = bench_config(config, cli)?;
            let base = config_base(config);
            let dir = cli.out.clone().unwrap_or_else(|| output_dir(&cfg.output_dir, &base));
            std::fs::create_dir_all(&dir)?;
            for dc in &cfg.datasets {
                let ds = dc.load(&base)?.dataset;
                let prep = Prepared::new(&dc.name, &ds, &cfg.model, cfg.n_batch, cfg.seeds.master)?;
                let path = dir.join(format!("{}.{MODEL_EXTENSION}", dc.name));
                prep.clf.save(&path)?;
                println!("{}: test accuracy {:.4} -> {}", dc.name, prep.clf.accuracy(&prep.split.test), path.display());
            }
        }
        Command::Bench { config } => {
            let cfg = bench_config(config, cli)?;
            let base = config_base(config);
            let out = run_bench_in(&cfg, &base)?;
            let dir = cli.out.clone().unwrap_or_else(|| output_dir(&cfg.output_dir, &base));
            write_outputs(&out, &dir)?;
            println!("{} rows -> {}", out.rows.len(), dir.join("rows.csv").display());
        }
        Command::Sweep { config } => {
            let mut cfg = SweepConfig::from_file(config)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let base = config_base(config);
            let cells = sweep_wachter(&cfg, &base)?;
            let dir = cli.out.clone().unwrap_or_else(|| output_dir(&cfg.output_dir, &base));
            let path = dir.join(format!("sweep_{}.csv", cfg.axis_x.name()));
            write_sweep(&path, cfg.axis_x, &cells)?;
            println!("{} cells -> {}", cells.len(), path.display());
        }
        Command::Report { rows, format, aggregate: by } => {
            let format: ReportFormat = format.parse()?;
            let by: Option<GroupBy> = by.as_deref().map(str::parse).transpose()?;
            let rows = read_rows(rows)?;
            let text = match by {
                Some(by) => render_aggregate(&aggregate(&rows, by)?, format)?,
                None => render(&rows, format)?,
            };
            match &cli.out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
        }
        Command::Explain { model, instance, method, impute, config, dataset } => {
            explain(cli, model, instance, method, impute, config, dataset.as_deref())?;
        }
    }
    Ok(())
}

fn explain(
    cli: &Cli,
    model: &Path,
    instance: &str,
    method: &str,
    impute: &str,
    config: &Path,
    dataset: Option<&str>,
) -> Result<(), HarnessError> {
    let method: Method = method.parse().map_err(|e| HarnessError::Config(format!("{e}")))?;
    let kind: ImputerKind = impute.parse().map_err(|e| HarnessError::Config(format!("{e}")))?;
    let cfg = bench_config(config, cli)?;
    let dc = match dataset {
        Some(name) => cfg
            .datasets
            .iter()
            .find(|d| d.name == name)
            .ok_or_else(|| HarnessError::Config(format!("no dataset named `{name}`")))?,
        None => &cfg.datasets[0],
    };
    let ds = dc.load(&config_base(config))?.dataset;
    let split = cxmiss::data::split(&ds, cfg.seeds.master)?;
    let clf = Classifier::load(model)?;
    let x = IncompleteInstance::parse(instance)?;
    if x.len() != clf.n_features() {
        return Err(HarnessError::Config(format!(
            "instance has {} values, model expects {}",
            x.len(),
            clf.n_features()
        )));
    }
    let imputer = Imputer::fit(kind, &split.train, cfg.imputer_params)?;
    let x_hat = imputer.impute(&x)?;
    let target = clf.class_of(&x_hat).opposite();
    let completions = if method == Method::Armin {
        let mice = Imputer::fit(ImputerKind::Mice, &split.train, cfg.imputer_params)?;
        Some(mice.impute_multi(&x, cfg.params.armin_draws, cfg.seeds.master)?)
    } else {
        None
    };
    if let Some(path) = &cli.dump_milo {
        let anchors = completions.clone().unwrap_or_else(|| vec![x_hat.clone()]);
        let prob = MiloProblem::with_anchors(&clf, anchors, target, cfg.params.margin);
        let model = encode(&prob).map_err(cxmiss::explainers::ExplainError::from)?;
        std::fs::write(path, model.to_lp_text())?;
    }
    let ctx = cxmiss::explainers::ExplainContext::new(&clf, &split.train.features, cfg.params, cfg.seeds.master)?;
    let e = ctx.explain(method, &x_hat, target, cfg.seeds.master, completions.as_deref())?;
    let report = serde_json::json!({
        "instance": x.to_string(),
        "imputed": x_hat,
        "target": target.as_u8(),
        "method": method,
        "status": e.status,
        "counterfactual": e.counterfactual,
        "delta": e.delta,
        "l1": e.l1_norm(),
        "iterations": e.iterations,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
