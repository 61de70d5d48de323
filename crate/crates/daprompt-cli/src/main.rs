//! `daprompt` command line: corpus validation and generation, training,
//! evaluation, threshold sweeps and the ablation table.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use daprompt::checkpoint::load_checkpoint;
use daprompt::corpus::{corpus_stats, load_corpus, save_corpus, Corpus, ScopeFilter};
use daprompt::decision::{individual_decide, RuleMode};
use daprompt::evaluation::{prf1, reports_to_csv, run_ablation, sweep_to_csv, Confusion};
use daprompt::model::VariantConfig;
use daprompt::pipeline::{
    ablation_table_csv, evaluate, plan_for, sweep_predictions, train_full,
};
use daprompt::synthetic::{generate, SyntheticConfig};
use daprompt::training::TrainingConfig;

#[derive(Parser)]
#[command(name = "daprompt", version, about = "Event causality identification via prompt learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON training config; unset fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the variant: full|sim|shm|et|prompt.
    #[arg(long)]
    variant: Option<String>,
    /// Override the pair scope: intra|cross|all.
    #[arg(long)]
    scope: Option<String>,
    /// Override the decision threshold.
    #[arg(long)]
    rho: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a corpus file and print its statistics.
    Validate {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Generate a synthetic corpus.
    Gen {
        #[arg(long, default_value_t = 220)]
        docs: usize,
        #[arg(long, default_value_t = 22)]
        topics: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output JSONL path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model on the whole corpus and write a checkpoint.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Checkpoint directory; defaults to $DAPROMPT_CACHE/run-<seed>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a corpus.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0.6)]
        rho: f64,
        /// Use the individual rule with this threshold for P1.
        #[arg(long, requires = "rho2")]
        rho1: Option<f64>,
        /// Use the individual rule with this threshold for P2.
        #[arg(long, requires = "rho1")]
        rho2: Option<f64>,
        /// Pair scope: intra|cross|all.
        #[arg(long, default_value = "all")]
        scope: String,
        /// Write the CSV report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep decision thresholds on a checkpoint's predictions.
    Sweep {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Rule family: joint|individual.
        #[arg(long, default_value = "joint")]
        mode: String,
        /// Grid as comma-separated values or start:end:step.
        #[arg(long, default_value = "0.0:2.0:0.1")]
        grid: String,
        #[arg(long, default_value = "all")]
        scope: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validated ablation over all variants.
    Ablate {
        #[arg(long)]
        corpus: PathBuf,
        /// Fold plan: esc|ctb.
        #[arg(long, default_value = "esc")]
        plan: String,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_scope(s: &str) -> Result<ScopeFilter> {
    match s {
        "intra" => Ok(ScopeFilter::Intra),
        "cross" => Ok(ScopeFilter::Cross),
        "all" => Ok(ScopeFilter::All),
        other => bail!("unknown scope {other}; expected intra|cross|all"),
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    if let Some((start, rest)) = spec.split_once(':') {
        let (end, step) = rest
            .split_once(':')
            .context("grid range must be start:end:step")?;
        let (start, end, step): (f64, f64, f64) =
            (start.parse()?, end.parse()?, step.parse()?);
        if step <= 0.0 || end < start {
            bail!("grid range must ascend with a positive step");
        }
        let n = ((end - start) / step).round() as usize;
        return Ok((0..=n).map(|i| start + i as f64 * step).collect());
    }
    spec.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(Into::into))
        .collect()
}

fn load_config(args: &ConfigArgs) -> Result<TrainingConfig> {
    let mut cfg: TrainingConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text)?
        }
        None => TrainingConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(variant) = &args.variant {
        cfg.variant = VariantConfig::from_name(variant)?;
    }
    if let Some(scope) = &args.scope {
        cfg.scope = parse_scope(scope)?;
    }
    if let Some(rho) = args.rho {
        cfg.rho = rho;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".to_string());
    Ok(load_corpus(path, name)?)
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Validate { corpus } => {
            let corpus = read_corpus(&corpus)?;
            let stats = corpus_stats(&corpus);
            println!("{}", serde_json::to_string_pretty(&stats)?);
        }
        Command::Gen {
            docs,
            topics,
            seed,
            out,
        } => {
            let corpus = generate(&SyntheticConfig {
                n_docs: docs,
                n_topics: topics,
                seed,
            })?;
            save_corpus(&corpus, &out)?;
            println!("wrote {} documents to {}", corpus.n_documents(), out.display());
        }
        Command::Train {
            corpus,
            config,
            out,
        } => {
            let corpus = read_corpus(&corpus)?;
            let cfg = load_config(&config)?;
            let out_dir = match out {
                Some(dir) => dir,
                None => match std::env::var_os("DAPROMPT_CACHE") {
                    Some(cache) => PathBuf::from(cache).join(format!("run-{}", cfg.seed)),
                    None => bail!("pass --out or set DAPROMPT_CACHE"),
                },
            };
            let (_, state) = train_full(&corpus, &cfg, Some(&out_dir))?;
            println!(
                "trained {} steps over {} epochs; checkpoint at {}",
                state.step,
                state.epoch,
                out_dir.display()
            );
        }
        Command::Eval {
            corpus,
            checkpoint,
            rho,
            rho1,
            rho2,
            scope,
            out,
        } => {
            let corpus = read_corpus(&corpus)?;
            let (model, _) = load_checkpoint(&checkpoint)?;
            let scope = parse_scope(&scope)?;
            let (preds, reports) = evaluate(&corpus, &model, rho, scope)?;
            let reports = match (rho1, rho2) {
                (Some(r1), Some(r2)) => {
                    // individual rule replaces the joint-rule reports
                    let mut c = Confusion::default();
                    for p in &preds {
                        c.count(individual_decide(p.p1, p.p2, r1, r2)?.verdict, p.gold);
                    }
                    vec![prf1(&c)]
                }
                _ => reports,
            };
            write_or_print(&out, &reports_to_csv(&reports))?;
        }
        Command::Sweep {
            corpus,
            checkpoint,
            mode,
            grid,
            scope,
            out,
        } => {
            let corpus = read_corpus(&corpus)?;
            let (model, _) = load_checkpoint(&checkpoint)?;
            let scope = parse_scope(&scope)?;
            let mode = match mode.as_str() {
                "joint" => RuleMode::Joint,
                "individual" => RuleMode::Individual,
                other => bail!("unknown mode {other}; expected joint|individual"),
            };
            let grid = parse_grid(&grid)?;
            let (preds, _) = evaluate(&corpus, &model, 0.0, scope)?;
            let rows = sweep_predictions(&preds, mode, &grid)?;
            write_or_print(&out, &sweep_to_csv(&rows))?;
        }
        Command::Ablate {
            corpus,
            plan,
            config,
            out,
        } => {
            let corpus = read_corpus(&corpus)?;
            let cfg = load_config(&config)?;
            let plan = plan_for(&corpus, &plan)?;
            let results = run_ablation(&corpus, &plan, &cfg)?;
            write_or_print(&out, &ablation_table_csv(&results))?;
        }
    }
    Ok(())
}
