use std::path::PathBuf;
use std::process::ExitCode;

use actsum_core::pipeline::{self, PipelineConfig};
use actsum_core::Error;
use clap::{Args, Parser, Subcommand};

/// Multi-person action recognition and timeline summaries for fixed-camera video.
#[derive(Parser, Debug)]
#[command(name = "actsum", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Flat `key = value` config file; flags override it.
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set kcf_sigma=0.3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Directory every output file goes to.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render synthetic clip archives, a surveillance scene or a shot video.
    GenData {
        #[command(flatten)]
        common: Common,
        /// actions, scene or shots.
        #[arg(long)]
        kind: Option<String>,
    },
    /// Pack `<input>/<label>/<clip>/` frame directories into one clip archive.
    Pack {
        #[command(flatten)]
        common: Common,
    },
    /// Train a network on a clip archive.
    Train {
        #[command(flatten)]
        common: Common,
        /// rgb, bs, mhi or frames.
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        /// 80, 90 or train/val/test.
        #[arg(long)]
        split: Option<String>,
    },
    /// Score a checkpoint on the test part of a clip archive.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        split: Option<String>,
    },
    /// Detect, track and recognize every person in a frame directory.
    Recognize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Also write the foreground masks.
        #[arg(long)]
        debug_masks: bool,
    },
    /// Label each shot of a frame directory from whole frames.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Rewrite a summary JSON file as canonical JSON and SVG.
    Summarize {
        #[command(flatten)]
        common: Common,
    },
}

fn resolve(common: &Common, extra: Vec<(&str, Option<String>)>) -> Result<PipelineConfig, Error> {
    let mut overrides = Vec::new();
    for s in &common.sets {
        let (k, v) = s.split_once('=').ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{s}'")))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    let flags = [("out_dir", path(&common.out_dir)), ("input", path(&common.input)), ("seed", common.seed.map(|s| s.to_string()))];
    for (k, v) in flags.into_iter().chain(extra) {
        if let Some(v) = v {
            overrides.push((k.to_string(), v));
        }
    }
    PipelineConfig::resolve(common.config.as_deref(), &overrides)
}

fn path_flag(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::GenData { common, kind } => {
            let cfg = resolve(&common, vec![("data_kind", kind)])?;
            for p in pipeline::gen_data(&cfg)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Pack { common } => {
            let cfg = resolve(&common, vec![])?;
            println!("wrote {}", pipeline::pack(&cfg)?.display());
        }
        Command::Train { common, variant, epochs, split } => {
            let cfg = resolve(&common, vec![("variant", variant), ("epochs", epochs.map(|e| e.to_string())), ("split", split)])?;
            let out = pipeline::run_train(&cfg)?;
            println!("split {}: train {} val {} test {}", cfg.split, out.split.train.len(), out.split.val.len(), out.split.test.len());
            for m in &out.report.history {
                match m.val_accuracy {
                    Some(a) => println!("epoch {} train loss {:.6} acc {:.6} val acc {a:.6}", m.epoch, m.train_loss, m.train_accuracy),
                    None => println!("epoch {} train loss {:.6} acc {:.6}", m.epoch, m.train_loss, m.train_accuracy),
                }
            }
            println!("kept epoch {}", out.report.final_epoch);
            match &out.test {
                Some(e) => println!("test accuracy {:.6}", e.accuracy),
                None => println!("test accuracy n/a (empty test split)"),
            }
            println!("wrote {}", out.checkpoint.display());
        }
        Command::Eval { common, checkpoint, split } => {
            let cfg = resolve(&common, vec![("checkpoint", path_flag(&checkpoint)), ("split", split)])?;
            let e = pipeline::run_eval(&cfg)?;
            println!("test clips {}", e.predictions.len());
            println!("accuracy {:.6}", e.accuracy);
            println!("loss {:.6}", e.loss);
        }
        Command::Recognize { common, checkpoint, debug_masks } => {
            let mut extra = vec![("mode", Some("surveillance".to_string())), ("checkpoint", path_flag(&checkpoint))];
            if debug_masks {
                extra.push(("debug_masks", Some("true".into())));
            }
            let cfg = resolve(&common, extra)?;
            let out = pipeline::run_surveillance(&cfg)?;
            println!("tracks {}", out.tracks.len());
            for s in &out.summary.subjects {
                println!("person {}: {}", s.id, s.dominant_action().unwrap_or("-"));
            }
        }
        Command::Classify { common, checkpoint } => {
            let cfg = resolve(&common, vec![("mode", Some("classify".to_string())), ("checkpoint", path_flag(&checkpoint))])?;
            let summary = pipeline::run_classify(&cfg)?;
            for s in &summary.subjects {
                for e in &s.events {
                    println!("shot {}: {} [{}, {}) confidence {:.6}", s.id, e.action, e.start, e.end, e.confidence);
                }
            }
        }
        Command::Summarize { common } => {
            let cfg = resolve(&common, vec![])?;
            let s = pipeline::summarize(&cfg)?;
            println!("subjects {}", s.subjects.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 2 } else { 1 })
        }
    }
}
