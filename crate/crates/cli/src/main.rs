use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use abtrack_cli::{cmd_eval, cmd_generate, cmd_track};
use abtrack_core::SyntheticSpec;

#[derive(Parser)]
#[command(name = "abtrack", version, about = "Abrupt-motion tracker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track a target through a directory of numbered PPM frames.
    Track {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score a results file against ground truth.
    Eval {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic teleporting-target sequence.
    Generate {
        #[arg(long, default_value_t = 64)]
        frames: usize,
        /// Teleport every N frames; 0 disables teleports.
        #[arg(long, default_value_t = 8)]
        teleport: usize,
        #[arg(long, default_value_t = 320)]
        width: usize,
        #[arg(long, default_value_t = 240)]
        height: usize,
        #[arg(long, default_value_t = 36)]
        target_w: usize,
        #[arg(long, default_value_t = 28)]
        target_h: usize,
        #[arg(long, default_value_t = 300.0)]
        target_hue: f64,
        #[arg(long, default_value_t = 3)]
        max_step: i64,
        #[arg(long, default_value_t = 3)]
        distractors: usize,
        #[arg(long, default_value_t = 0.02)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> abtrack_core::Result<()> {
    match cli.command {
        Command::Track { config } => {
            let (cfg, run) = cmd_track(&config)?;
            let abrupt = run.frames.iter().filter(|f| f.report.abrupt).count();
            println!(
                "tracked {} frames ({abrupt} abrupt) into {}",
                run.frames.len(),
                cfg.output.display()
            );
        }
        Command::Eval { results, truth, out } => {
            let s = cmd_eval(&results, &truth, &out)?;
            s.write_summary(std::io::stdout())?;
        }
        Command::Generate {
            frames,
            teleport,
            width,
            height,
            target_w,
            target_h,
            target_hue,
            max_step,
            distractors,
            noise,
            seed,
            out,
        } => {
            let spec = SyntheticSpec {
                width,
                height,
                frames,
                target_w,
                target_h,
                target_hue,
                max_step,
                teleport_every: teleport,
                distractors,
                noise,
                seed,
                ..SyntheticSpec::default()
            };
            let seq = cmd_generate(&spec, &out)?;
            println!(
                "wrote {} frames ({} teleports) to {}",
                seq.frames.len(),
                seq.teleports.len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
