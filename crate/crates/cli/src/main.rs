//! `lcgan`: dataset build, classifier pretraining, GAN training, corpus
//! translation, retraining, evaluation and reporting for the
//! label-conditioned CycleGAN experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use label_cyclegan::data::Corpus;
use label_cyclegan::eval::{evaluate_classifier, label_preservation_rate};
use label_cyclegan::losses::Mode;
use label_cyclegan::models::{Classifier, Generator};
use label_cyclegan::pipeline::{DataStatus, Experiment, ExperimentConfig, RunResult};

#[derive(Parser)]
#[command(name = "lcgan", version, about = "Label-conditioned CycleGAN experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment config (TOML); the built-in desk preset when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Single seed; shorthand for `--seeds N`.
    #[arg(long, global = true, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated seed roster, e.g. `1,2,3`.
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Translation method(s): simgan, cyclegan, label_cyclegan (comma-separated).
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_mode)]
    mode: Option<Vec<Mode>>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Recompute outputs that already exist.
    #[arg(long, global = true)]
    force: bool,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    Mode::parse(s).map_err(|e| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Dataset operations.
    Data {
        #[command(subcommand)]
        action: DataAction,
    },
    /// Pretrain f_r, f_s and the judge classifier for each seed.
    Pretrain,
    /// Train the translation GAN for each mode and seed.
    Train,
    /// Translate the simulated training corpus with each trained generator.
    Transform,
    /// Retrain and evaluate on half-real/half-translated batches.
    Retrain {
        /// Train the real-only baseline instead.
        #[arg(long)]
        baseline: bool,
    },
    /// Evaluate a classifier file on a corpus file.
    Eval {
        #[arg(long)]
        classifier: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Also report the label-preservation rate of this generator on the corpus.
        #[arg(long)]
        generator: Option<PathBuf>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Regenerate image grids and the markdown summary of a finished run.
    Report,
    /// Every phase for every seed and mode, then the summary table.
    Pipeline,
    /// Print the resolved experiment config as TOML.
    Config,
}

#[derive(Subcommand)]
enum DataAction {
    /// Write the six corpora and their resolved manifests.
    Build,
}

fn resolve(global: &Global) -> Result<ExperimentConfig> {
    let mut config = match &global.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentConfig::desk(),
    };
    if let Some(out) = &global.out {
        config.out_dir = out.clone();
    }
    if let Some(seed) = global.seed {
        config.seeds = vec![seed];
    }
    if let Some(seeds) = &global.seeds {
        config.seeds = seeds.clone();
    }
    if let Some(modes) = &global.mode {
        config.modes = modes.clone();
    }
    config.validate()?;
    Ok(config)
}

fn print_result(r: &RunResult) {
    let per_class: Vec<String> = r.eval.per_class_accuracy.iter().map(|a| format!("{a:.3}")).collect();
    let preservation = r
        .preservation
        .as_ref()
        .map(|p| format!(", preservation {:.3} (minor {:.3})", p.overall, p.minor_mean))
        .unwrap_or_default();
    println!(
        "{} seed {}: accuracy {:.4}, per class [{}]{preservation}",
        r.method,
        r.seed,
        r.eval.overall_accuracy,
        per_class.join(", ")
    );
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    if let Command::Eval {
        classifier,
        corpus,
        generator,
        output,
    } = &cli.command
    {
        let (f, _) = Classifier::load(classifier).with_context(|| format!("loading {}", classifier.display()))?;
        let c = Corpus::load(corpus).with_context(|| format!("loading {}", corpus.display()))?;
        let mut report = evaluate_classifier(&f, &c)?;
        if let Some(path) = generator {
            let (gen, _) = Generator::load(path).with_context(|| format!("loading {}", path.display()))?;
            report.label_preservation_rate = Some(label_preservation_rate(&f, &gen, &c)?);
        }
        match output {
            Some(path) => report.save(path)?,
            None => println!("{}", report.to_json()),
        }
        return Ok(());
    }

    let config = resolve(g)?;
    let seeds = config.seeds.clone();
    let modes = config.modes.clone();
    let exp = Experiment::new(config)?;
    match &cli.command {
        Command::Config => print!("{}", exp.config.to_toml()),
        Command::Data {
            action: DataAction::Build,
        } => match exp.build_data(g.force)? {
            DataStatus::UpToDate => println!("datasets in {} are up to date", exp.out_dir().join("data").display()),
            DataStatus::Written(files) => {
                for f in files {
                    println!("wrote {}", f.display());
                }
            }
        },
        Command::Pretrain => {
            let data = exp.load_data()?;
            for seed in seeds {
                let p = exp.pretrain(&data, seed, g.force)?;
                println!(
                    "seed {seed}: f_r {:.4}, f_s {:.4}, judge {:.4} held-out accuracy",
                    p.summary.f_r_held_out_accuracy, p.summary.f_s_held_out_accuracy, p.summary.judge_held_out_accuracy
                );
            }
        }
        Command::Train => {
            let data = exp.load_data()?;
            for seed in seeds {
                let pre = exp.pretrain(&data, seed, false)?;
                for &mode in &modes {
                    exp.train(&data, &pre, mode, seed, g.force)?;
                    println!(
                        "{} seed {seed}: {}",
                        mode.tag(),
                        exp.generator_path(mode, seed).display()
                    );
                }
            }
        }
        Command::Transform => {
            let data = exp.load_data()?;
            for seed in seeds {
                for &mode in &modes {
                    let gen = load_generator(&exp, mode, seed)?;
                    let t = exp.transform(&data, &gen, mode, seed)?;
                    println!(
                        "{} seed {seed}: {} items -> {}",
                        mode.tag(),
                        t.len(),
                        exp.transformed_path(mode, seed).display()
                    );
                }
            }
        }
        Command::Retrain { baseline } => {
            let data = exp.load_data()?;
            let mut results = Vec::new();
            for seed in seeds {
                if *baseline {
                    results.push(exp.baseline(&data, seed)?);
                    continue;
                }
                let pre = exp.pretrain(&data, seed, false)?;
                for &mode in &modes {
                    let gen = load_generator(&exp, mode, seed)?;
                    let path = exp.transformed_path(mode, seed);
                    if !path.exists() {
                        bail!("{} is missing; run `transform` first", path.display());
                    }
                    let t = Corpus::load(&path)?;
                    results.push(exp.retrain(&data, &pre, &gen, &t, mode, seed)?);
                }
            }
            results.iter().for_each(print_result);
            exp.update_summary(&results)?;
        }
        Command::Report => {
            for path in exp.report()? {
                println!("wrote {}", path.display());
            }
        }
        Command::Pipeline => {
            let results = exp.run_pipeline(&modes, &seeds, g.force)?;
            results.iter().for_each(print_result);
            println!("summary: {}", exp.summary_path().display());
        }
        Command::Eval { .. } => unreachable!("handled above"),
    }
    Ok(())
}

fn load_generator(exp: &Experiment, mode: Mode, seed: u64) -> Result<Generator<f32>> {
    let path = exp.generator_path(mode, seed);
    if !path.exists() {
        bail!("{} is missing; run `train` first", path.display());
    }
    Ok(Generator::load(&path)?.0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
