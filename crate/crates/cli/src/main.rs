use std::net::SocketAddr;
use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use visionseg_cli::args::{Cli, Command};
use visionseg_cli::commands::{cmd_eval, cmd_format, cmd_netspec, cmd_segment, cmd_synth};
use visionseg_cli::server::{serve, AppState};
use visionseg_cli::UsageError;

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Segment(args) => {
            let s = cmd_segment(&args)?;
            eprintln!(
                "segmented {} page(s), {} system(s) queued, {} failure(s)",
                s.pages,
                s.items,
                s.failures.len()
            );
        }
        Command::Synth(args) => {
            let m = cmd_synth(&args)?;
            eprintln!("wrote {} page(s) to {}", m.pages.len(), args.out.display());
        }
        Command::Eval(args) => {
            let report = cmd_eval(&args)?;
            if args.out.is_none() {
                println!("{}", serde_json::to_string_pretty(&report)?);
            }
        }
        Command::Format(args) => {
            let m = cmd_format(&args)?;
            eprintln!(
                "exported {} sample(s) from {} piece(s)",
                m.sample_count, m.piece_count
            );
        }
        Command::Serve(args) => {
            let state = AppState::open(&args.queue, args.ui_dir.clone())?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(serve(state, SocketAddr::new(args.host, args.port)))?;
        }
        Command::Netspec(args) => {
            let json = cmd_netspec(&args)?;
            if args.out.is_none() {
                print!("{json}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
