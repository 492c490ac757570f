mod args;
mod commands;
mod meta;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::json;

use args::{Cli, Command};

/// Exit status per error kind.
fn exit_code(kind: &str) -> u8 {
    match kind {
        "usage" => 2,
        "io" => 3,
        "not-found" => 5,
        "corrupt-input" => 6,
        "insufficient-candidates" | "degenerate-training" => 7,
        "inconsistent-state" => 8,
        // bad input, labels, config, spec, URLs, streams, parse errors
        _ => 4,
    }
}

fn fail(kind: &str, message: &str) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(exit_code(kind))
}

fn run(cli: &Cli) -> newsrep::Result<()> {
    match &cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::TrainHarmonic(a) => commands::train_harmonic(a, cli.threads),
        Command::TrainLogistic(a) => commands::train_logistic(a),
        Command::Classify(a) => commands::classify(a),
        Command::Stream(a) => commands::stream(a),
        Command::EvalRecall(a) => commands::eval_recall(a),
        Command::EvalSites(a) => commands::eval_sites(a),
        Command::EvalCrosslist(a) => commands::eval_crosslist(a),
        Command::EvalCorrelation(a) => commands::eval_correlation(a),
        Command::EvalAgreement(a) => commands::eval_agreement(a),
        Command::Synth(a) => commands::synth(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            let first = message.lines().next().unwrap_or("bad arguments");
            return fail("usage", first.trim_start_matches("error: "));
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
    {
        return fail(
            "usage",
            &format!("cannot start {} threads: {e}", cli.threads),
        );
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}
