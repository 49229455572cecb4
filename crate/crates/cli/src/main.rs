use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use reclink::pipeline::{self, Selection};
use reclink::simulate::ScenarioConfig;
use reclink::{Error, Result};

#[derive(Parser)]
#[command(name = "reclink", version, about = "Probabilistic record linkage without shared identifiers")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate two overlapping files with known links.
    Simulate {
        /// Scenario TOML; built-in defaults when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the model on two files and select links.
    Link {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        selection: SelectionArgs,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare a link file with a truth file.
    Evaluate {
        #[arg(long)]
        links: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Also write the metrics as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Add value distortion to file B of a simulated directory.
    Distort {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        level: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Ratio of capture probabilities with and without an earlier overlap.
    Independence {
        #[arg(long, default_value_t = 200)]
        n_a: usize,
        /// Records already linked; comma list.
        #[arg(long, value_delimiter = ',', default_values_t = [10usize, 190])]
        k: Vec<usize>,
        /// Capture counts; comma list or start:end[:step].
        #[arg(long, default_value = "0:5")]
        c: String,
        /// Sizes of file B; comma list or start:end[:step].
        #[arg(long, default_value = "500:3000:100")]
        n_b: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
#[group(multiple = false)]
struct SelectionArgs {
    /// Keep pairs with posterior probability above this value.
    #[arg(long)]
    threshold: Option<f64>,
    /// Smallest threshold of at least 0.5 whose estimated FDR is below this value.
    #[arg(long)]
    fdr: Option<f64>,
}

impl SelectionArgs {
    fn selection(&self) -> Selection {
        match (self.threshold, self.fdr) {
            (_, Some(f)) => Selection::Fdr(f),
            (Some(t), None) => Selection::Threshold(t),
            (None, None) => Selection::Threshold(0.5),
        }
    }
}

/// Parses `a,b,c` or an inclusive range `start:end[:step]`.
fn parse_counts(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::Argument(format!("cannot read '{text}' as counts"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let (start, end) = (num(parts[0])?, num(parts[1])?);
        let step = match parts.get(2) {
            Some(s) => num(s)?,
            None => 1,
        };
        if parts.len() > 3 || step == 0 || end < start {
            return Err(bad());
        }
        Ok((start..=end).step_by(step).collect())
    } else {
        text.split(',').map(num).collect()
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate { scenario, seed, out } => {
            let mut cfg = match scenario {
                Some(p) => pipeline::load_scenario(&p)?,
                None => ScenarioConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let s = pipeline::command_simulate(&cfg, &out)?;
            println!(
                "wrote {} records to A.csv, {} to B.csv, {} true links",
                s.a.n_records(),
                s.b.n_records(),
                s.truth.pairs.len()
            );
        }
        Command::Link {
            config,
            out,
            selection,
            seed,
        } => {
            let r = pipeline::command_link(&config, &out, selection.selection(), seed)?;
            println!(
                "{} links at threshold {} (estimated FDR {:.4})",
                r.links.pairs.len(),
                r.links.threshold,
                r.links.estimated_fdr
            );
        }
        Command::Evaluate { links, truth, out } => {
            let (_, _, report) = pipeline::command_evaluate(&links, &truth, out.as_deref())?;
            print!("{report}");
        }
        Command::Distort {
            input,
            out,
            level,
            seed,
        } => {
            let (before, after) = pipeline::command_distort(&input, &out, level, seed)?;
            println!("distortion level {before:.4} -> {after:.4}");
        }
        Command::Independence { n_a, k, c, n_b, out } => {
            let (cs, n_bs) = (parse_counts(&c)?, parse_counts(&n_b)?);
            pipeline::command_independence(n_a, &k, &cs, &n_bs, &out)?;
            println!("wrote {} grids to {}", k.len(), out.display());
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
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
