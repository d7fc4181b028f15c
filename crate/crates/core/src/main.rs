use clap::{Parser, Subcommand};
use pplab::harness::{emit_plotdata, run, verify, HarnessError, PlotSelector, RunConfig};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "pplab", version, about = "Run, plot and verify pplab experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a config and write artifacts plus manifest.json.
    Run { config: PathBuf },
    /// Emit CSV tables for plotting from a finished run.
    Plot {
        manifest: PathBuf,
        #[arg(long)]
        what: String,
    },
    /// Re-hash artifacts and re-check stored invariants.
    Verify { manifest: PathBuf },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli.cmd) {
        eprintln!("pplab: {e}");
        std::process::exit(e.exit_code());
    }
}

fn dispatch(cmd: Cmd) -> Result<(), HarnessError> {
    match cmd {
        Cmd::Run { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| HarnessError::Schema(format!("{}: {e}", config.display())))?;
            let cfg = RunConfig::parse(&text)?;
            let out = run(&cfg)?;
            for line in &out.summary {
                println!("{line}");
            }
            println!("manifest: {}", out.dir.join(pplab::harness::MANIFEST_NAME).display());
            println!("checksum: {}", out.manifest.checksum());
        }
        Cmd::Plot { manifest, what } => {
            for f in emit_plotdata(&manifest, what.parse::<PlotSelector>()?)? {
                println!("{}", f.display());
            }
        }
        Cmd::Verify { manifest } => {
            let r = verify(&manifest)?;
            for inv in &r.invariants {
                println!("ok {inv}");
            }
            println!("verified {} artifacts, checksum {}", r.artifacts_checked, r.checksum);
        }
    }
    Ok(())
}
