use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use desaf_core::harness::{self, Comparison, SweepParam};
use desaf_core::{Algorithm, AnalysisBank, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "desaf",
    version,
    about = "Subband adaptive filter channel-identification experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm over many trials.
    Run {
        #[command(flatten)]
        opts: Overrides,
    },
    /// Run several algorithms on identical scenarios.
    Compare {
        /// Comma-separated entries `algo[:mu]`, e.g. `nsaf:0.1,nsaf:1,sm_nsaf:1,de_nsaf`.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "nsaf:0.1,nsaf:1,sm_nsaf:1,de_nsaf"
        )]
        algos: Vec<String>,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Sweep DE-NSAF population size or crossover rate.
    Sweep {
        /// `ps` or `cr`.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Dump analysis-bank taps and magnitude responses as CSV.
    Bank {
        #[arg(long, default_value_t = 4)]
        subbands: usize,
        #[arg(long)]
        prototype_len: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

/// Experiment settings shared by the flags and the `--config` file. Flags
/// win over file values, which win over built-in defaults.
#[derive(Args, Deserialize, Default, Debug, Clone)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct Overrides {
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    taps: Option<usize>,
    #[arg(long)]
    subbands: Option<usize>,
    #[arg(long)]
    prototype_len: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    snr_db: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    gamma_scale: Option<f64>,
    #[arg(long)]
    ps: Option<usize>,
    #[arg(long)]
    cr: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    gmax: Option<u64>,
    #[arg(long)]
    gens_per_block: Option<usize>,
    #[arg(long)]
    cost_window: Option<usize>,
    #[arg(long)]
    warmup_blocks: Option<usize>,
    #[arg(long)]
    steady_start: Option<usize>,
    /// Output directory for `curves.csv` and `summary.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Overrides {
    /// Layers the flags over the optional config file.
    fn resolve(&self) -> Result<Overrides> {
        let mut merged = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str::<Overrides>(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => Overrides::default(),
        };
        let flags = self;
        merge_fields!(
            merged,
            flags,
            algo,
            taps,
            subbands,
            prototype_len,
            snr_db,
            trials,
            blocks,
            seed,
            mu,
            delta,
            gamma_scale,
            ps,
            cr,
            k,
            gmax,
            gens_per_block,
            cost_window,
            warmup_blocks,
            steady_start,
            out
        );
        Ok(merged)
    }

    fn experiment(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(a) = &self.algo {
            cfg.algo = a.parse()?;
        }
        macro_rules! set {
            ($($src:ident => $($dst:ident).+),*) => {
                $( if let Some(v) = self.$src { cfg.$($dst).+ = v; } )*
            };
        }
        set!(
            taps => taps, subbands => subbands, snr_db => snr_db, trials => trials,
            blocks => blocks, seed => seed, mu => mu, delta => delta, gamma_scale => gamma_scale,
            ps => de_nsaf.de.population_size, cr => de_nsaf.de.crossover_rate,
            k => de_nsaf.de.scale_factor, gmax => de_nsaf.de.max_generations,
            gens_per_block => de_nsaf.generations_per_block, cost_window => de_nsaf.cost_window,
            warmup_blocks => de_nsaf.warmup_blocks
        );
        cfg.prototype_len = self.prototype_len.or(cfg.prototype_len);
        cfg.steady_state_start = self.steady_start.unwrap_or(cfg.blocks / 2);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_entry(entry: &str, base: &ExperimentConfig) -> Result<ExperimentConfig> {
    let mut cfg = base.clone();
    let (name, mu) = match entry.split_once(':') {
        Some((n, m)) => (
            n,
            Some(
                m.parse::<f64>()
                    .with_context(|| format!("step size in {entry:?}"))?,
            ),
        ),
        None => (entry, None),
    };
    cfg.algo = name.trim().parse()?;
    if let Some(mu) = mu {
        if cfg.algo == Algorithm::DeNsaf {
            bail!("de_nsaf takes no step size ({entry:?})");
        }
        cfg.mu = mu;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(cmp: &Comparison, out: Option<&Path>) -> Result<()> {
    print!("{}", cmp.summary_table());
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("curves.csv"), cmp.curves_csv())?;
        fs::write(dir.join("summary.csv"), cmp.summary_csv())?;
        println!(
            "wrote {} and {}",
            dir.join("curves.csv").display(),
            dir.join("summary.csv").display()
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { opts } => {
            let opts = opts.resolve()?;
            let cfg = opts.experiment()?;
            emit(&harness::compare(&[cfg])?, opts.out.as_deref())
        }
        Command::Compare { algos, opts } => {
            let opts = opts.resolve()?;
            let base = opts.experiment()?;
            let configs = algos
                .iter()
                .map(|a| parse_entry(a, &base))
                .collect::<Result<Vec<_>>>()?;
            emit(&harness::compare(&configs)?, opts.out.as_deref())
        }
        Command::Sweep {
            param,
            values,
            opts,
        } => {
            let opts = opts.resolve()?;
            let mut base = opts.experiment()?;
            base.algo = Algorithm::DeNsaf;
            let param: SweepParam = param.parse()?;
            emit(&harness::sweep(param, &values, &base)?, opts.out.as_deref())
        }
        Command::Bank {
            subbands,
            prototype_len,
            out,
        } => {
            let bank = AnalysisBank::design(subbands, prototype_len.unwrap_or(8 * subbands))?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("bank_taps.csv"), bank.taps_csv())?;
            fs::write(out.join("bank_response.csv"), bank.response_csv(513))?;
            println!(
                "wrote bank_taps.csv and bank_response.csv to {}",
                out.display()
            );
            Ok(())
        }
    }
}
