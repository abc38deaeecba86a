use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cv2x_chanest::harness::config::Estimator;
use cv2x_chanest::harness::metrics::read_csv;
use cv2x_chanest::harness::{generate_dataset, run_eval, train_model, write_report, RunConfig, RunPaths};
use cv2x_chanest::nn::Checkpoint;
use cv2x_chanest::Result;

#[derive(Parser)]
#[command(name = "cv2x-sim", version, about = "C-V2X sidelink channel estimation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the dataset files
    Gen(Common),
    /// Train the network on the training split
    Train(Common),
    /// Score the estimators and write metrics.csv
    Eval(Common),
    /// Write one plot-ready file per (speed, estimator) curve from metrics.csv
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Plain-text key=value configuration; defaults are used when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(c) => {
            let cfg = c.resolve()?;
            let paths = RunPaths::new(&cfg.out_dir);
            let s = generate_dataset(&cfg, &paths)?;
            println!("wrote {} records in {} files under {}", s.records, s.files.len(), paths.dataset_dir().display());
        }
        Command::Train(c) => {
            let cfg = c.resolve()?;
            let paths = RunPaths::new(&cfg.out_dir);
            let (ck, _) = train_model(&cfg, &paths, |e, loss| eprintln!("epoch {:>3}  loss {loss:.6e}", e + 1))?;
            println!("wrote {} ({} parameters)", paths.model().display(), ck.model.param_count());
        }
        Command::Eval(c) => {
            let cfg = c.resolve()?;
            let paths = RunPaths::new(&cfg.out_dir);
            let mut ck = if cfg.estimators.contains(&Estimator::Ann) { Some(Checkpoint::load(&paths.model())?) } else { None };
            let out = run_eval(&cfg, &paths, ck.as_mut().map(|c| &mut c.model))?;
            println!("wrote {} rows to {}", out.rows.len(), paths.metrics().display());
        }
        Command::Report(c) => {
            let cfg = c.resolve()?;
            let paths = RunPaths::new(&cfg.out_dir);
            let rows = read_csv(&paths.metrics())?;
            let files = write_report(&rows, &paths.report_dir())?;
            println!("wrote {} curve files under {}", files.len(), paths.report_dir().display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cv2x-sim: error: {e}");
            ExitCode::FAILURE
        }
    }
}
