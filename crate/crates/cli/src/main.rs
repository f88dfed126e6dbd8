use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cml_core::learner::Strategy;
use cml_core::pipeline::{cmd_report, cmd_synth, format_plan, ExperimentConfig, Overrides, Pipeline, Stage};
use cml_core::Result;

const DEFAULT_ROOT: &str = "cml-runs";

#[derive(Debug, Parser)]
#[command(name = "cml-lab", version, about = "Continual relation learning experiments")]
struct Cli {
    /// JSON experiment config; unknown keys are rejected.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// cml, vanilla, replay or meta_noncurriculum.
    #[arg(long, global = true, value_name = "S")]
    strategy: Option<Strategy>,
    /// Parallel study runs.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Output directory. Defaults to a directory under the output root.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Root for default output directories.
    #[arg(long, global = true, env = "CML_LAB_OUT", default_value = DEFAULT_ROOT, hide_default_value = true)]
    root: PathBuf,
    /// Print what would run and exit.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset and knowledge graph.
    Synth,
    /// Train TransE on the knowledge graph.
    PretrainKg,
    /// Train the concept model and export relation embeddings.
    EmbedRelations,
    /// Group relations into tasks.
    Partition,
    /// Train one run over the base task order.
    Train,
    /// Run the full permutation study and write the metrics report.
    Study,
    /// Merge finished run directories into comparison tables.
    Report {
        #[arg(required = true, value_name = "RUN_DIR")]
        run_dirs: Vec<PathBuf>,
    },
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    Overrides {
        seed: cli.seed,
        strategy: cli.strategy,
        workers: cli.workers,
        out: cli.out.clone(),
    }
    .apply(&mut config);
    Ok(config)
}

fn output_dir(cli: &Cli, config: &ExperimentConfig, name: &str) -> PathBuf {
    config.paths.out.clone().unwrap_or_else(|| cli.root.join(name))
}

fn print_plan(out: &Path, pipeline: &Pipeline, last: Stage) {
    println!("run directory: {}", out.display());
    print!("{}", format_plan(&pipeline.plan(last)));
}

fn run(cli: &Cli) -> Result<()> {
    let config = resolve_config(cli)?;
    let seed = config.base_seed;
    match &cli.command {
        Command::Synth => {
            let out = output_dir(cli, &config, &format!("synth-seed{seed}"));
            if cli.dry_run {
                config.synth.validate()?;
                println!("would write synthetic dataset to {}", out.display());
                return Ok(());
            }
            for f in cmd_synth(&config, &out)? {
                println!("{}", f.display());
            }
        }
        Command::Report { run_dirs } => {
            let out = cli.out.clone().unwrap_or_else(|| cli.root.join("report"));
            if cli.dry_run {
                println!("would merge {} run directories into {}", run_dirs.len(), out.display());
                return Ok(());
            }
            let (tables, files) = cmd_report(run_dirs, &out)?;
            print!("{}", tables.accuracy);
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        cmd => {
            let last = match cmd {
                Command::PretrainKg => Stage::PretrainKg,
                Command::EmbedRelations => Stage::EmbedRelations,
                Command::Partition | Command::Train => Stage::Partition,
                _ => Stage::Report,
            };
            let out = output_dir(cli, &config, &format!("{}-seed{seed}", config.strategy()));
            if cli.dry_run {
                config.validate()?;
                println!("run directory: {}", out.display());
                // Nothing is created on a dry run, so every stage is planned
                // against an empty directory unless it already exists.
                let pipeline = Pipeline { config, dir: cml_core::pipeline::RunDirectory::new(&out) };
                print!("{}", format_plan(&pipeline.plan(last)));
                if matches!(cmd, Command::Train) {
                    println!("then train one run over order {:?}", pipeline.config.base_order());
                }
                return Ok(());
            }
            let pipeline = Pipeline::open(config, &out)?;
            log::info!("plan:\n{}", format_plan(&pipeline.plan(last)));
            match cmd {
                Command::Train => {
                    let r = pipeline.train_single()?;
                    println!("acc_a {:.4}  acc_w {:.4}", r.acc_a, r.acc_w);
                    println!("wrote {}", pipeline.dir.train_dir().display());
                }
                Command::Study => {
                    let r = pipeline.run()?;
                    let eb = |e: Option<f64>| e.map_or("n/a".to_string(), |e| format!("{e:.4}"));
                    println!("{} over {} runs", r.strategy, r.runs.len());
                    println!("acc_w {:.4} ± {}", r.acc_w.mean, eb(r.acc_w.eb));
                    println!("acc_a {:.4} ± {}", r.acc_a.mean, eb(r.acc_a.eb));
                    if let Some(p) = r.pcc {
                        println!("pcc(prior, forgetting) {p:.4}");
                    }
                    for w in &r.warnings {
                        eprintln!("warning: {w}");
                    }
                    println!("wrote {}", pipeline.dir.metrics_path().display());
                }
                _ => {
                    pipeline.run_until(last)?;
                    print_plan(&out, &pipeline, last);
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
