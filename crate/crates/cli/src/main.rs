use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rankopt::config::{ScalarKind, StudyConfig};
use rankopt::datagen::{self, GeneratorSpec, ORACLE_CAP};
use rankopt::meta::{extract_top_configs, meta_evaluate, vote_select};
use rankopt::study::{render_csv, render_text, StudyReport};
use rankopt::{Error, ObservationDataset, Scalar};

const DEFAULT_OUT_DIR: &str = "rankopt-out";

#[derive(Parser)]
#[command(name = "rankopt", version, about = "Multi-objective tuning of retrieval ranking weights")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(clap::Args)]
struct StudyArgs {
    /// Study configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    parallel: Option<usize>,
    /// Comma-separated trial budget per stage, e.g. `50,50,50`.
    #[arg(long, value_delimiter = ',')]
    stage_budgets: Option<Vec<usize>>,
    /// Edits a config value before validation, e.g. `sampler.gamma=0.2`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl StudyArgs {
    fn load(&self) -> Result<(StudyConfig, PathBuf), Error> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        if let Some(p) = self.parallel {
            overrides.push(format!("parallelism={p}"));
        }
        if let Some(b) = &self.stage_budgets {
            let list: Vec<String> = b.iter().map(usize::to_string).collect();
            overrides.push(format!("cumulative.stages=[{}]", list.join(",")));
        }
        let config = StudyConfig::load(&self.config, &overrides)?;
        Ok((config, self.config.clone()))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Runs every stage of a study and writes its exports.
    Run {
        #[command(flatten)]
        study: StudyArgs,
        /// Output directory; falls back to the config's `out_dir`.
        #[arg(long, env = "RANKOPT_OUT_DIR")]
        out_dir: Option<PathBuf>,
    },
    /// Writes a synthetic corpus, queries and train/meta logs.
    Datagen {
        /// Generator settings (TOML); defaults apply when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "RANKOPT_OUT_DIR", default_value = DEFAULT_OUT_DIR)]
        out_dir: PathBuf,
    },
    /// Renders a saved report.
    Report {
        #[arg(long)]
        report: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Re-runs meta selection for one stage of a saved report against the config's meta data.
    Vote {
        #[command(flatten)]
        study: StudyArgs,
        #[arg(long)]
        report: PathBuf,
        /// Stage to re-score; defaults to the last.
        #[arg(long)]
        stage: Option<usize>,
        #[arg(long)]
        top_n: Option<usize>,
    },
    /// Exhaustively evaluates a grid over the search space on the training split.
    Oracle {
        #[command(flatten)]
        study: StudyArgs,
        /// Grid points per continuous parameter.
        #[arg(long, default_value_t = 9)]
        resolution: usize,
        #[arg(long, default_value_t = ORACLE_CAP)]
        cap: u128,
    },
}

fn run(study: &StudyArgs, out_dir: Option<PathBuf>) -> Result<(), Error> {
    let (config, _) = study.load()?;
    let report = match config.scalar {
        ScalarKind::F64 => config.build_study::<f64>()?.run()?,
        ScalarKind::F32 => config.build_study::<f32>()?.run()?,
    };
    let dir = out_dir
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let written = report.write_outputs(&dir)?;
    print!("{}", render_text(&report));
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn datagen_cmd(spec: Option<&Path>, seed: Option<u64>, out_dir: &Path) -> Result<(), Error> {
    let mut spec: GeneratorSpec = match spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            toml::from_str(&text).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?
        }
        None => GeneratorSpec::default(),
    };
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let data = datagen::generate(&spec)?;
    for path in data.write(out_dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn report_cmd(path: &Path, format: Format) -> Result<(), Error> {
    let report = StudyReport::load(path)?;
    match format {
        Format::Text => print!("{}", render_text(&report)),
        Format::Csv => print!("{}", render_csv(&report)?),
    }
    Ok(())
}

fn vote_with<S: Scalar>(
    config: &StudyConfig,
    report: &StudyReport,
    stage: Option<usize>,
    top_n: Option<usize>,
) -> Result<(), Error> {
    let index = stage.unwrap_or(report.stages.len().saturating_sub(1));
    let stage = report
        .stages
        .get(index)
        .ok_or_else(|| Error::config("--stage", format!("report has {} stages", report.stages.len())))?;
    let n = top_n.unwrap_or(config.selection.top_n);
    let dataset: ObservationDataset = stage.trials.iter().cloned().collect();
    let top = extract_top_configs(&dataset, &report.objectives, &report.directions, &report.weights, n)?;
    let (train, meta) = config.evaluators::<S>()?;
    let scores = meta_evaluate(
        &top.pool(),
        &meta,
        &train.query_ids(),
        &report.weights,
        config.selection.allow_identity_split,
    )?;
    let (winner, tally) = vote_select(&scores, n)?;
    println!("stage {index}, top {n}, {} candidates", tally.entries.len());
    let mut entries = tally.entries.clone();
    entries.sort_by(|a, b| b.votes.cmp(&a.votes).then(a.trial_id.cmp(&b.trial_id)));
    for e in &entries {
        let scores: Vec<String> = e.scores.iter().map(|s| format!("{s:.4}")).collect();
        println!("  trial {:>5}  votes {}  [{}]", e.trial_id, e.votes, scores.join(", "));
    }
    println!(
        "winner: trial {} with {} votes: {}",
        winner.trial_id,
        winner.votes,
        winner.config.describe(&report.space)
    );
    Ok(())
}

fn vote_cmd(study: &StudyArgs, report: &Path, stage: Option<usize>, top_n: Option<usize>) -> Result<(), Error> {
    let (config, _) = study.load()?;
    let report = StudyReport::load(report)?;
    match config.scalar {
        ScalarKind::F64 => vote_with::<f64>(&config, &report, stage, top_n),
        ScalarKind::F32 => vote_with::<f32>(&config, &report, stage, top_n),
    }
}

fn oracle_cmd(study: &StudyArgs, resolution: usize, cap: u128) -> Result<(), Error> {
    let (config, _) = study.load()?;
    let (train, _) = config.evaluators::<f64>()?;
    let pool = rayon_pool(config.parallelism())?;
    let result = pool.install(|| datagen::oracle_best(&train, &config.weights(), resolution, cap))?;
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

fn rayon_pool(threads: usize) -> Result<rayon::ThreadPool, Error> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config("parallelism", e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { study, out_dir } => run(study, out_dir.clone()),
        Command::Datagen { spec, seed, out_dir } => datagen_cmd(spec.as_deref(), *seed, out_dir),
        Command::Report { report, format } => report_cmd(report, *format),
        Command::Vote {
            study,
            report,
            stage,
            top_n,
        } => vote_cmd(study, report, *stage, *top_n),
        Command::Oracle { study, resolution, cap } => oracle_cmd(study, *resolution, *cap),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
