//! Command-line front end: run benchmarks from a TOML config, consolidate
//! two checkpoints over an auxiliary pool, evaluate a checkpoint on a test
//! CSV, and generate synthetic datasets.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use consolid_core::checkpoint::{load_model, save_model};
use consolid_core::config::{run_experiment, ExperimentConfig};
use consolid_core::data::{
    load_aux_csv, load_labeled_csv, save_aux_csv, save_labeled_csv, Split,
};
use consolid_core::distill::consolidate;
use consolid_core::incremental::Strategy;
use consolid_core::metrics::{confusion_matrix, top1_accuracy};
use consolid_core::report::emit_report;
use consolid_core::MlpSpec;

#[derive(Parser)]
#[command(
    name = "consolid",
    about = "Class-incremental learning lab: specialist training and logit-space consolidation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured incremental benchmark and write reports.
    Run {
        /// TOML experiment configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the CSV reports and JSON summary.
        #[arg(long)]
        out: PathBuf,
        /// Override the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's strategy
        /// (finetune, fixed-repr, oracle, dmc, dmc-plus).
        #[arg(long)]
        strategy: Option<String>,
        /// Exemplar budget; required when --strategy dmc-plus is given.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Merge two specialist checkpoints into one student checkpoint by
    /// distilling over an unlabeled auxiliary CSV.
    Consolidate {
        /// TOML experiment configuration (its [consolidation] section is used).
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint of the model holding the earlier classes.
        #[arg(long)]
        old: PathBuf,
        /// Checkpoint of the model holding the later classes.
        #[arg(long)]
        new: PathBuf,
        /// Unlabeled auxiliary pool as CSV (features only).
        #[arg(long)]
        aux: PathBuf,
        /// Path of the consolidated checkpoint to write.
        #[arg(long)]
        out: PathBuf,
        /// Student initialization seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate a checkpoint on a labeled test CSV and print JSON metrics.
    Eval {
        /// Model checkpoint.
        #[arg(long)]
        model: PathBuf,
        /// Labeled test set as CSV (features then label per row).
        #[arg(long)]
        test: PathBuf,
        /// Optional path for the JSON metrics; stdout either way.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the configured synthetic datasets as CSV files.
    GenData {
        /// TOML experiment configuration (its [data.generator] is used).
        #[arg(long)]
        config: PathBuf,
        /// Directory receiving train.csv, test.csv, and aux.csv.
        #[arg(long)]
        out: PathBuf,
        /// Override the generator seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let cfg: ExperimentConfig = toml::from_str(&text)
        .with_context(|| format!("malformed config {}", path.display()))?;
    Ok(cfg)
}

fn parse_strategy(name: &str, budget: Option<usize>) -> Result<Strategy> {
    Ok(match name {
        "finetune" => Strategy::Finetune,
        "fixed-repr" => Strategy::FixedRepr,
        "oracle" => Strategy::Oracle,
        "dmc" => Strategy::Dmc,
        "dmc-plus" => match budget {
            Some(budget) => Strategy::DmcPlus { budget },
            None => bail!("--strategy dmc-plus needs --budget"),
        },
        other => bail!(
            "unknown strategy '{}' (expected finetune, fixed-repr, oracle, dmc, or dmc-plus)",
            other
        ),
    })
}

fn cmd_run(
    config: PathBuf,
    out: PathBuf,
    seed: Option<u64>,
    strategy: Option<String>,
    budget: Option<usize>,
) -> Result<()> {
    let cfg = load_config(&config)?;
    let strategy = strategy
        .map(|s| parse_strategy(&s, budget))
        .transpose()?;
    let records = run_experiment(&cfg, seed, strategy)?;
    emit_report(&records, &out)?;
    println!("wrote reports for {} run(s) to {}", records.len(), out.display());
    Ok(())
}

fn cmd_consolidate(
    config: PathBuf,
    old: PathBuf,
    new: PathBuf,
    aux: PathBuf,
    out: PathBuf,
    seed: u64,
) -> Result<()> {
    let cfg = load_config(&config)?;
    let old_model = load_model(&old)?;
    let new_model = load_model(&new)?;
    let pool = load_aux_csv(&aux)?;
    // student architecture: the old model's hidden stack, widened to cover
    // both class sets
    let mut widths = old_model.spec.layer_widths.clone();
    let total = old_model.num_classes() + new_model.num_classes();
    *widths.last_mut().unwrap() = total;
    let student_spec = MlpSpec::new(widths)?;
    let result = consolidate(
        &old_model,
        &new_model,
        &pool,
        &cfg.consolidation,
        &student_spec,
        seed,
    )?;
    save_model(&out, &result.student)?;
    println!(
        "consolidated {} + {} classes over {} auxiliary samples -> {}",
        old_model.num_classes(),
        new_model.num_classes(),
        pool.len(),
        out.display()
    );
    Ok(())
}

fn cmd_eval(model: PathBuf, test: PathBuf, out: Option<PathBuf>) -> Result<()> {
    let model = load_model(&model)?;
    let data = load_labeled_csv(&test, Split::Test)?;
    let top1 = top1_accuracy(&model, &data)?;
    let confusion = confusion_matrix(&model, &data)?;
    let json = serde_json::json!({
        "samples": data.len(),
        "classes": model.class_labels,
        "top1": top1,
        "confusion": { "labels": confusion.labels, "counts": confusion.counts },
    });
    let text = serde_json::to_string_pretty(&json)?;
    if let Some(path) = out {
        std::fs::write(&path, &text)?;
    }
    println!("{}", text);
    Ok(())
}

fn cmd_gen_data(config: PathBuf, out: PathBuf, seed: Option<u64>) -> Result<()> {
    let cfg = load_config(&config)?;
    let mut gen = cfg
        .data
        .generator
        .context("config has no [data.generator] section")?;
    if let Some(seed) = seed {
        gen.seed = seed;
    }
    let (train, test, aux) = consolid_core::data::generate(&gen)?;
    std::fs::create_dir_all(&out)?;
    save_labeled_csv(&out.join("train.csv"), &train)?;
    save_labeled_csv(&out.join("test.csv"), &test)?;
    save_aux_csv(&out.join("aux.csv"), &aux)?;
    println!(
        "wrote {} train, {} test, {} auxiliary samples to {}",
        train.len(),
        test.len(),
        aux.len(),
        out.display()
    );
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            seed,
            strategy,
            budget,
        } => cmd_run(config, out, seed, strategy, budget),
        Command::Consolidate {
            config,
            old,
            new,
            aux,
            out,
            seed,
        } => cmd_consolidate(config, old, new, aux, out, seed),
        Command::Eval { model, test, out } => cmd_eval(model, test, out),
        Command::GenData { config, out, seed } => cmd_gen_data(config, out, seed),
    };
    if let Err(err) = result {
        eprintln!("error: {:#}", err);
        std::process::exit(1);
    }
}
