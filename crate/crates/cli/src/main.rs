use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use ams_sfe::autoencoder::{load_checkpoint, save_checkpoint};
use ams_sfe::error::StageExt;
use ams_sfe::io::{load_split, read_matrix, save_split};
use ams_sfe::pipeline::{
    ablation_csv, cartesian, grid_search, prepare, run_ablation, run_pipeline, run_with_model, train_expansion_model,
    PipelineConfig, PipelineOutcome,
};
use ams_sfe::prototypes::NeighborCombination;
use ams_sfe::recognition::{rank, Metric};
use ams_sfe::synthetic::{generate_synthetic, SyntheticSpec};
use ams_sfe::{Error, Result, SeenDataset, SemanticView, Stage, UnseenDataset};

#[derive(Parser)]
#[command(name = "ams-sfe", version, about = "Zero-shot recognition with expanded semantic features")]
struct Cli {
    /// Random seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// cosine or euclidean.
    #[arg(long, global = true)]
    metric: Option<String>,
    /// Semantic view: P, E or P+E.
    #[arg(long, global = true)]
    ablation: Option<String>,
    /// Extra config overrides, e.g. `--set epochs=50`. May be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory for reports and artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DataArg {
    /// Split directory with seen_* and unseen_* files. Without it a default
    /// synthetic split is generated from the seed.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 15)]
    m_seen: usize,
    #[arg(long, default_value_t = 5)]
    v_unseen: usize,
    #[arg(long, default_value_t = 64)]
    d: usize,
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 50)]
    examples_per_class: usize,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 12)]
    latent_dim: usize,
    #[arg(long, default_value_t = 1.0)]
    prototype_noise_ratio: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic seen/unseen split into --out.
    Synth(SynthArgs),
    /// Train the autoencoder and write model.amsf and training.csv.
    Train(DataArg),
    /// Build seen and unseen prototype tables from a trained model.
    Expand {
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        model: PathBuf,
    },
    /// Predict unseen classes for a feature matrix.
    Recognize {
        #[command(flatten)]
        data: DataArg,
        /// Needed unless --ablation P.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Features to classify; defaults to the unseen split's features.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Evaluate on the unseen split with an existing model.
    Evaluate {
        #[command(flatten)]
        data: DataArg,
        /// Needed unless --ablation P.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Compare the P, E and P+E views.
    Ablate(DataArg),
    /// Choose (alpha, beta) on a class holdout of the seen split.
    GridSearch {
        #[command(flatten)]
        data: DataArg,
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 9.0, 27.0])]
        alphas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [7.0, 77.0, 231.0])]
        betas: Vec<f64>,
    },
    /// Full pipeline: train, expand, project, evaluate.
    Run(DataArg),
}

fn build_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path).stage(Stage::Ingest)?,
        None => PipelineConfig::default(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::parameter(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        config.set(k, v)?;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(m) = &cli.metric {
        config.metric = Metric::parse(m)?;
    }
    if let Some(a) = &cli.ablation {
        config.ablation = SemanticView::parse(a)?;
    }
    config.validate()?;
    Ok(config)
}

fn load_data(arg: &DataArg, config: &PipelineConfig) -> Result<(SeenDataset, UnseenDataset)> {
    match &arg.data {
        Some(dir) => load_split(dir).stage(Stage::Ingest),
        None => {
            info!("no --data given; using the default synthetic split (seed {})", config.seed);
            generate_synthetic(&SyntheticSpec {
                seed: config.seed,
                ..Default::default()
            })
            .stage(Stage::Ingest)
        }
    }
}

fn write(out: &Path, name: &str, text: &str) -> Result<()> {
    let path = out.join(name);
    fs::create_dir_all(out).map_err(|e| Error::io(out, e)).stage(Stage::Report)?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e)).stage(Stage::Report)
}

fn combinations_csv(combos: &[NeighborCombination], unseen: &[ams_sfe::ClassId]) -> String {
    let mut out = String::from("class_id,rank,neighbor_id,theta,residual\n");
    for (c, combo) in unseen.iter().zip(combos) {
        for (r, (id, t)) in combo.neighbor_ids.iter().zip(&combo.theta).enumerate() {
            let _ = writeln!(out, "{c},{},{id},{t},{}", r + 1, combo.residual);
        }
    }
    out
}

fn write_outcome(out: &Path, config: &PipelineConfig, outcome: &PipelineOutcome) -> Result<()> {
    write(out, "config.txt", &config.to_kv())?;
    if let Some(model) = &outcome.model {
        save_checkpoint(out.join("model.amsf"), model).stage(Stage::Report)?;
    }
    if let Some(training) = &outcome.training {
        write(out, "training.csv", &training.to_csv())?;
    }
    outcome.report.save(out, "").stage(Stage::Report)?;
    outcome.seen_table.save_csv(out.join("seen_prototypes.csv")).stage(Stage::Report)?;
    outcome.unseen_table.save_csv(out.join("unseen_prototypes.csv")).stage(Stage::Report)?;
    if !outcome.combinations.is_empty() {
        write(
            out,
            "neighbors.csv",
            &combinations_csv(&outcome.combinations, outcome.unseen_table.class_ids()),
        )?;
    }
    write(out, "report.txt", &outcome.report.to_text())
}

fn load_model(path: &Option<PathBuf>) -> Result<Option<ams_sfe::autoencoder::AutoencoderModel>> {
    path.as_ref()
        .map(|p| load_checkpoint(p).stage(Stage::Checkpoint))
        .transpose()
}

fn execute(cli: &Cli) -> Result<()> {
    let config = build_config(cli)?;
    let out = &cli.out;
    match &cli.command {
        Command::Synth(a) => {
            let spec = SyntheticSpec {
                m_seen: a.m_seen,
                v_unseen: a.v_unseen,
                d: a.d,
                n: a.n,
                examples_per_class: a.examples_per_class,
                noise_sigma: a.noise,
                latent_dim: a.latent_dim,
                prototype_noise_ratio: a.prototype_noise_ratio,
                seed: config.seed,
            };
            let (seen, unseen) = generate_synthetic(&spec)?;
            save_split(out, &seen, &unseen).stage(Stage::Report)?;
            println!(
                "wrote {} seen examples ({} classes) and {} unseen examples ({} classes) to {}",
                seen.len(),
                seen.num_classes(),
                unseen.len(),
                unseen.num_classes(),
                out.display()
            );
        }
        Command::Train(data) => {
            let (seen, unseen) = load_data(data, &config)?;
            let (_, seen, _) = prepare(&config, &seen, &unseen)?;
            let (model, training) = train_expansion_model(&config, &seen)?;
            write(out, "config.txt", &config.to_kv())?;
            write(out, "training.csv", &training.to_csv())?;
            save_checkpoint(out.join("model.amsf"), &model).stage(Stage::Report)?;
            let last = training.total.last().copied().unwrap_or(f64::NAN);
            println!(
                "trained {:?} for {} epochs; final loss {last}",
                model.layer_dims(),
                training.epochs()
            );
        }
        Command::Expand { data, model } => {
            let (seen, unseen) = load_data(data, &config)?;
            let model = load_model(&Some(model.clone()))?;
            let config = PipelineConfig {
                ablation: SemanticView::Combined,
                ..config
            };
            let outcome = run_with_model(&config, model, &seen, &unseen)?;
            outcome.seen_table.save_csv(out.join("seen_prototypes.csv")).stage(Stage::Report)?;
            outcome.unseen_table.save_csv(out.join("unseen_prototypes.csv")).stage(Stage::Report)?;
            write(
                out,
                "neighbors.csv",
                &combinations_csv(&outcome.combinations, outcome.unseen_table.class_ids()),
            )?;
            println!(
                "wrote {} seen and {} unseen prototypes of width {}",
                outcome.seen_table.len(),
                outcome.unseen_table.len(),
                outcome.unseen_table.combined().cols()
            );
        }
        Command::Recognize { data, model, features } => {
            let (seen, unseen) = load_data(data, &config)?;
            let outcome = run_with_model(&config, load_model(model)?, &seen, &unseen)?;
            let x = match features {
                Some(p) => read_matrix(p).stage(Stage::Ingest)?,
                None => unseen.features().clone(),
            };
            let x = outcome.preprocessor.apply_features(&x).stage(Stage::Preprocess)?;
            let projected = outcome.projection.project_batch(&x).stage(Stage::Projection)?;
            let table = &outcome.unseen_table;
            let depth = config.top_k.min(table.len());
            let mut csv = String::from("index");
            for k in 1..=depth {
                let _ = write!(csv, ",top_{k}");
            }
            csv.push('\n');
            for (i, s) in projected.row_iter().enumerate() {
                let order = rank(s, table, config.metric).stage(Stage::Evaluation)?;
                let _ = write!(csv, "{i}");
                for &j in order.iter().take(depth) {
                    let _ = write!(csv, ",{}", table.class_ids()[j]);
                }
                csv.push('\n');
            }
            write(out, "predictions.csv", &csv)?;
            println!("classified {} examples into {}", projected.rows(), out.join("predictions.csv").display());
        }
        Command::Evaluate { data, model } => {
            let (seen, unseen) = load_data(data, &config)?;
            let outcome = run_with_model(&config, load_model(model)?, &seen, &unseen)?;
            outcome.report.save(out, "").stage(Stage::Report)?;
            write(out, "report.txt", &outcome.report.to_text())?;
            print!("{}", outcome.report.to_text());
        }
        Command::Ablate(data) => {
            let (seen, unseen) = load_data(data, &config)?;
            let outcomes = run_ablation(&config, &seen, &unseen)?;
            write(out, "config.txt", &config.to_kv())?;
            write(out, "ablation.csv", &ablation_csv(&outcomes))?;
            for o in &outcomes {
                let prefix = format!("{}_", o.view.label().replace('+', ""));
                o.report.save(out, &prefix).stage(Stage::Report)?;
            }
            println!("view  Hit@1");
            for o in &outcomes {
                println!("{:<5} {:.4}", o.view.label(), o.report.hit_at(1));
            }
        }
        Command::GridSearch { data, alphas, betas } => {
            let (seen, _) = load_data(data, &config)?;
            let result = grid_search(&config, &cartesian(alphas, betas), &seen)?;
            write(out, "grid.csv", &result.to_csv())?;
            print!("{}", result.to_csv());
            println!("best alpha={} beta={}", result.best_alpha, result.best_beta);
        }
        Command::Run(data) => {
            let (seen, unseen) = load_data(data, &config)?;
            let outcome = run_pipeline(&config, &seen, &unseen)?;
            write_outcome(out, &config, &outcome)?;
            println!("view {}", outcome.view);
            print!("{}", outcome.report.to_text());
        }
    }
    Ok(())
}

/// Pulls every `--set` value out of argv. Clap keeps only the occurrences on
/// one side of the subcommand for repeated global flags, so they are gathered here.
fn take_overrides(args: Vec<String>) -> (Vec<String>, Vec<String>) {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        if arg == "--" {
            rest.push(arg);
            rest.extend(iter.by_ref());
        } else if arg == "--set" {
            match iter.next() {
                Some(v) => overrides.push(v),
                None => rest.push(arg),
            }
        } else if let Some(v) = arg.strip_prefix("--set=") {
            overrides.push(v.to_string());
        } else {
            rest.push(arg);
        }
    }
    (rest, overrides)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (args, overrides) = take_overrides(std::env::args().collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(mut cli) => {
            cli.overrides = overrides;
            cli
        }
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
