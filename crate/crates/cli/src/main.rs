mod args;
mod commands;
mod config;
mod rundir;

use std::process::ExitCode;

use clap::Parser;
use debias_core::Result;

use crate::args::{Cli, Command};
use crate::config::FileConfig;

fn run(cli: &Cli) -> Result<()> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Preprocess(a) => commands::preprocess(a, &cfg),
        Command::Train(a) => commands::train(a, &cfg),
        Command::LooEval(a) => commands::loo_eval(a, &cfg),
        Command::GenSynth(a) => commands::gen_synth_cmd(a),
        Command::Saliency(a) => commands::saliency_cmd(a, &cfg),
        Command::Eval(a) => commands::eval_cmd(a, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            // 2: bad data or configuration; 1: internal failure.
            ExitCode::from(if e.is_user_error() { 2 } else { 1 })
        }
    }
}
