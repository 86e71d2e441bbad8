//! `graspseg` — batch tooling for robot-supervised RGB-D segmentation
//! datasets: synthesize scenes, extract foreground masks, label held
//! objects, build augmented training splits, and score the results.
//!
//! Exit status: 0 on success, 1 on processing failures, 2 on bad usage.

mod cmd_annotate;
mod cmd_augment;
mod cmd_baseline;
mod cmd_eval;
mod cmd_fgseg;
mod cmd_overlay;
mod cmd_selfdata;
mod cmd_synth;
mod io;
mod opts;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "graspseg",
    version,
    about = "Robot-supervised RGB-D segmentation toolkit",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render synthetic RGB-D arm scenes with ground-truth masks.
    Synth(cmd_synth::SynthArgs),
    /// Extract the manipulator(+object) foreground mask per frame.
    Fgseg(cmd_fgseg::FgsegArgs),
    /// Label manipulator-only frames into a training annotation set.
    Selfdata(cmd_selfdata::SelfdataArgs),
    /// Composite labeled frames over new backgrounds with distractors.
    Augment(cmd_augment::AugmentArgs),
    /// Subtract robot predictions from foreground masks to label objects.
    Annotate(cmd_annotate::AnnotateArgs),
    /// Box-prior color baseline segmentation.
    Baseline(cmd_baseline::BaselineArgs),
    /// Mean IoU / precision / recall over paired mask directories.
    EvalMiou(cmd_eval::EvalMiouArgs),
    /// COCO-style average precision between two annotation files.
    EvalAp(cmd_eval::EvalApArgs),
    /// Render mask overlays for visual inspection.
    Overlay(cmd_overlay::OverlayArgs),
}

/// Cap the rayon pool when GRASPSEG_THREADS is set.
fn init_thread_pool() {
    if let Ok(v) = std::env::var("GRASPSEG_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring GRASPSEG_THREADS={v:?} (want a positive integer)"),
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Synth(args) => cmd_synth::run(args),
        Cmd::Fgseg(args) => cmd_fgseg::run(args),
        Cmd::Selfdata(args) => cmd_selfdata::run(args),
        Cmd::Augment(args) => cmd_augment::run(args),
        Cmd::Annotate(args) => cmd_annotate::run(args),
        Cmd::Baseline(args) => cmd_baseline::run(args),
        Cmd::EvalMiou(args) => cmd_eval::run_miou(args),
        Cmd::EvalAp(args) => cmd_eval::run_ap(args),
        Cmd::Overlay(args) => cmd_overlay::run(args),
    }
}

fn main() {
    let cli = Cli::parse(); // clap exits with status 2 on usage errors
    init_thread_pool();
    match run(cli) {
        Ok(()) => {}
        Err(e) if e.is::<opts::UsageError>() => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
