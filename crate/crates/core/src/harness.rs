//! Monte Carlo experiments: independent identification trials, ensemble
//! learning curves, steady-state statistics and CSV reports.
//!
//! Trial `t` of an experiment with master seed `s` draws its channel, input
//! and noise from `derive_seed(s, [t])`, and DE-NSAF draws its population
//! streams from `derive_seed(s, [t, DE])`. Algorithms compared under the same
//! master seed therefore see identical scenarios, and results do not depend
//! on the order in which trials execute.

use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::de::DePopulation;
use crate::de_nsaf::{DeNsaf, DeNsafConfig};
use crate::error::{invalid, Result};
use crate::filterbank::{AnalysisBank, SubbandBlock};
use crate::nsaf::{FilterState, DEFAULT_DELTA};
use crate::rng::{derive_seed, tag};
use crate::signal_model::{Ar4Params, ChannelScenario, ScenarioParams};

pub const CURVES_HEADER: &str = "algo,block,mse_linear,mse_db";
pub const SUMMARY_HEADER: &str = "algo,steady_mean,steady_std,window_start";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Nsaf,
    SmNsaf,
    DeNsaf,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Nsaf => "nsaf",
            Algorithm::SmNsaf => "sm_nsaf",
            Algorithm::DeNsaf => "de_nsaf",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "nsaf" => Ok(Algorithm::Nsaf),
            "sm_nsaf" | "smnsaf" => Ok(Algorithm::SmNsaf),
            "de_nsaf" | "densaf" => Ok(Algorithm::DeNsaf),
            other => invalid(format!("unknown algorithm {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algo: Algorithm,
    /// Row label in reports; derived from the algorithm when absent.
    pub label: Option<String>,
    pub taps: usize,
    pub subbands: usize,
    /// Prototype length of the analysis bank; `8 * subbands` when absent.
    pub prototype_len: Option<usize>,
    pub snr_db: f64,
    pub trials: usize,
    pub seed: u64,
    pub blocks: usize,
    pub mu: f64,
    pub delta: f64,
    /// `γ = gamma_scale · σ_v` for SM-NSAF.
    pub gamma_scale: f64,
    pub de_nsaf: DeNsafConfig,
    pub steady_state_start: usize,
    pub db_floor: f64,
    pub ar: Ar4Params,
    pub normalize_input: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algo: Algorithm::Nsaf,
            label: None,
            taps: 32,
            subbands: 4,
            prototype_len: None,
            snr_db: 20.0,
            trials: 20,
            seed: 1,
            blocks: 2000,
            mu: 0.1,
            delta: DEFAULT_DELTA,
            gamma_scale: 5f64.sqrt(),
            de_nsaf: DeNsafConfig::default(),
            steady_state_start: 1000,
            db_floor: -80.0,
            ar: Ar4Params::default(),
            normalize_input: true,
        }
    }
}

impl ExperimentConfig {
    /// 200 trials and 5000 blocks, the full-size protocol.
    pub fn full_scale(algo: Algorithm) -> Self {
        Self {
            algo,
            trials: 200,
            blocks: 5000,
            steady_state_start: 2500,
            ..Self::default()
        }
    }

    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        match self.algo {
            Algorithm::Nsaf => format!("nsaf(mu={})", self.mu),
            Algorithm::SmNsaf => format!("sm_nsaf(mu={})", self.mu),
            Algorithm::DeNsaf => format!(
                "de_nsaf(ps={} cr={})",
                self.de_nsaf.de.population_size, self.de_nsaf.de.crossover_rate
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.blocks == 0 {
            return invalid("trials and blocks must be at least 1");
        }
        if self.taps == 0 || self.subbands < 2 {
            return invalid("need taps >= 1 and subbands >= 2");
        }
        if self.steady_state_start >= self.blocks {
            return invalid(format!(
                "steady_state_start {} must be below blocks {}",
                self.steady_state_start, self.blocks
            ));
        }
        if self.snr_db.is_nan() {
            return invalid("snr_db is NaN");
        }
        if !(self.gamma_scale >= 0.0) {
            return invalid("gamma_scale must be non-negative");
        }
        if let Some(l) = &self.label {
            if l.contains([',', '\n', '"']) {
                return invalid("label may not contain commas, quotes or newlines");
            }
        }
        match self.algo {
            Algorithm::Nsaf | Algorithm::SmNsaf => {
                FilterState::new(self.taps, self.mu, self.delta, 0.0).map(|_| ())
            }
            Algorithm::DeNsaf => self.de_nsaf.validate(),
        }
    }

    pub fn scenario_params(&self) -> ScenarioParams {
        ScenarioParams {
            taps: self.taps,
            samples: self.blocks * self.subbands,
            snr_db: self.snr_db,
            ar: self.ar,
            normalize_input: self.normalize_input,
        }
    }

    pub fn bank(&self) -> Result<AnalysisBank> {
        AnalysisBank::design(
            self.subbands,
            self.prototype_len.unwrap_or(8 * self.subbands),
        )
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        derive_seed(self.seed, &[trial as u64])
    }

    pub fn trial_de_seed(&self, trial: usize) -> u64 {
        derive_seed(self.seed, &[trial as u64, tag::DE])
    }
}

/// Runs the configured algorithm over `blocks` and returns `Σ_i e_{i,D}²(k)`
/// per block. `initial_weights` replaces the zero start of NSAF/SM-NSAF and
/// becomes member 0 of the DE population.
pub fn run_algorithm(
    cfg: &ExperimentConfig,
    blocks: &[SubbandBlock],
    noise_variance: f64,
    de_seed: u64,
    initial_weights: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let w0 = initial_weights.map_or_else(|| vec![0.0; cfg.taps], <[f64]>::to_vec);
    if w0.len() != cfg.taps {
        return invalid("initial weights have the wrong length");
    }
    match cfg.algo {
        Algorithm::Nsaf | Algorithm::SmNsaf => {
            let gamma = cfg.gamma_scale * noise_variance.sqrt();
            let mut state = FilterState::with_weights(w0, cfg.mu, cfg.delta, gamma)?;
            blocks
                .iter()
                .map(|b| {
                    let errs = if cfg.algo == Algorithm::Nsaf {
                        state.nsaf_update(b)?
                    } else {
                        state.sm_nsaf_update(b)?
                    };
                    Ok(errs.energy())
                })
                .collect()
        }
        Algorithm::DeNsaf => {
            let mut filter = match initial_weights {
                None => DeNsaf::new(cfg.de_nsaf.clone(), cfg.taps, de_seed)?,
                Some(w) => {
                    let mut members = DePopulation::init(&cfg.de_nsaf.de, cfg.taps, de_seed)?
                        .members()
                        .to_vec();
                    members[0] = w.to_vec();
                    let pop = DePopulation::from_members(members, de_seed)?;
                    DeNsaf::with_population(cfg.de_nsaf.clone(), pop)?
                }
            };
            Ok(filter.run(blocks)?.mse())
        }
    }
}

/// Per-block MSE of one trial, plus the checksum of the scenario it ran on.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub mse: Vec<f64>,
    pub scenario_checksum: u64,
}

pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<Vec<f64>> {
    cfg.validate()?;
    Ok(run_trial_with_bank(cfg, &cfg.bank()?, trial)?.mse)
}

fn run_trial_with_bank(
    cfg: &ExperimentConfig,
    bank: &AnalysisBank,
    trial: usize,
) -> Result<TrialResult> {
    let scenario = ChannelScenario::generate(&cfg.scenario_params(), cfg.trial_seed(trial))?;
    let blocks = bank.make_blocks(&scenario.u, &scenario.d, cfg.taps)?;
    let mse = run_algorithm(
        cfg,
        &blocks,
        scenario.noise_variance,
        cfg.trial_de_seed(trial),
        None,
    )?;
    Ok(TrialResult {
        mse,
        scenario_checksum: scenario.checksum(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub mse_linear: Vec<f64>,
    pub mse_db: Vec<f64>,
    pub steady_mean: f64,
    pub steady_std: f64,
    pub window_start: usize,
}

impl AggregateResult {
    pub fn steady_mean_db(&self) -> f64 {
        10.0 * self.steady_mean.log10()
    }
}

/// Pointwise mean over trials (summed in trial order) and mean/standard
/// deviation of that curve over `[steady_state_start, end]`.
pub fn aggregate(
    curves: &[Vec<f64>],
    steady_state_start: usize,
    db_floor: f64,
) -> Result<AggregateResult> {
    let Some(first) = curves.first() else {
        return invalid("no curves to aggregate");
    };
    let len = first.len();
    if len == 0 || curves.iter().any(|c| c.len() != len) {
        return invalid("curves must be non-empty and of equal length");
    }
    if steady_state_start >= len {
        return invalid("steady-state window starts past the end of the curve");
    }
    let mut mean = vec![0.0; len];
    for c in curves {
        mean.iter_mut().zip(c).for_each(|(m, x)| *m += x);
    }
    let n = curves.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);

    let window = &mean[steady_state_start..];
    let wn = window.len() as f64;
    let steady_mean = window.iter().sum::<f64>() / wn;
    let steady_std = (window
        .iter()
        .map(|x| (x - steady_mean).powi(2))
        .sum::<f64>()
        / wn)
        .sqrt();
    let mse_db = mean.iter().map(|&m| to_db(m, db_floor)).collect();
    Ok(AggregateResult {
        mse_linear: mean,
        mse_db,
        steady_mean,
        steady_std,
        window_start: steady_state_start,
    })
}

pub fn to_db(x: f64, floor: f64) -> f64 {
    if x > 0.0 {
        (10.0 * x.log10()).max(floor)
    } else {
        floor
    }
}

/// First block at which the trailing `smoothing`-block average of `mse`
/// drops to `threshold_db` or below.
pub fn blocks_to_threshold(mse: &[f64], threshold_db: f64, smoothing: usize) -> Option<usize> {
    let s = smoothing.max(1);
    let target = 10f64.powf(threshold_db / 10.0);
    (s - 1..mse.len()).find(|&k| mse[k + 1 - s..=k].iter().sum::<f64>() / s as f64 <= target)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub label: String,
    pub config: ExperimentConfig,
    pub aggregate: AggregateResult,
    pub trial_curves: Vec<Vec<f64>>,
    pub scenario_checksums: Vec<u64>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let bank = cfg.bank()?;
    let trials: Vec<TrialResult> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial_with_bank(cfg, &bank, t))
        .collect::<Result<_>>()?;
    let (trial_curves, scenario_checksums): (Vec<_>, Vec<_>) = trials
        .into_iter()
        .map(|t| (t.mse, t.scenario_checksum))
        .unzip();
    let aggregate = aggregate(&trial_curves, cfg.steady_state_start, cfg.db_floor)?;
    Ok(ExperimentResult {
        label: cfg.label(),
        config: cfg.clone(),
        aggregate,
        trial_curves,
        scenario_checksums,
    })
}

/// Results of several algorithms run on identical scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub results: Vec<ExperimentResult>,
}

pub fn compare(configs: &[ExperimentConfig]) -> Result<Comparison> {
    let Some(base) = configs.first() else {
        return invalid("nothing to compare");
    };
    for c in configs {
        let same = c.subbands == base.subbands
            && c.taps == base.taps
            && c.snr_db.to_bits() == base.snr_db.to_bits()
            && c.trials == base.trials
            && c.blocks == base.blocks
            && c.seed == base.seed
            && c.ar == base.ar
            && c.normalize_input == base.normalize_input
            && c.prototype_len == base.prototype_len;
        if !same {
            return invalid(format!(
                "{} does not share subbands/taps/snr/trials/blocks/seed with {}",
                c.label(),
                base.label()
            ));
        }
    }
    let mut labels: Vec<String> = configs.iter().map(ExperimentConfig::label).collect();
    labels.sort();
    labels.dedup();
    if labels.len() != configs.len() {
        return invalid("compared configurations need distinct labels");
    }

    let results = configs
        .iter()
        .map(run_experiment)
        .collect::<Result<Vec<_>>>()?;
    if results
        .iter()
        .any(|r| r.scenario_checksums != results[0].scenario_checksums)
    {
        return Err(crate::Error::InvalidState(
            "compared runs saw different scenarios".into(),
        ));
    }
    Ok(Comparison { results })
}

impl Comparison {
    pub fn curves_csv(&self) -> String {
        let mut out = String::from(CURVES_HEADER);
        out.push('\n');
        for r in &self.results {
            for (k, (lin, db)) in r
                .aggregate
                .mse_linear
                .iter()
                .zip(&r.aggregate.mse_db)
                .enumerate()
            {
                let _ = writeln!(out, "{},{k},{lin},{db}", r.label);
            }
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from(SUMMARY_HEADER);
        out.push('\n');
        for r in &self.results {
            let a = &r.aggregate;
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.label, a.steady_mean, a.steady_std, a.window_start
            );
        }
        out
    }

    /// Human-readable `mean ± std (start~end)` table.
    pub fn summary_table(&self) -> String {
        let width = self
            .results
            .iter()
            .map(|r| r.label.len())
            .max()
            .unwrap_or(0)
            .max(9);
        let mut out = format!("{:<width$}  {}\n", "Algorithm", "Average MSE");
        for r in &self.results {
            let a = &r.aggregate;
            let _ = writeln!(
                out,
                "{:<width$}  {:.6} \u{b1} {:.7} ({}~end)  [{:.2} dB]",
                r.label,
                a.steady_mean,
                a.steady_std,
                a.window_start,
                a.steady_mean_db()
            );
        }
        out
    }

    pub fn get(&self, label: &str) -> Option<&ExperimentResult> {
        self.results.iter().find(|r| r.label == label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    PopulationSize,
    CrossoverRate,
}

impl std::str::FromStr for SweepParam {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ps" | "population_size" => Ok(SweepParam::PopulationSize),
            "cr" | "crossover_rate" => Ok(SweepParam::CrossoverRate),
            other => invalid(format!("unknown sweep parameter {other:?}")),
        }
    }
}

/// One DE-NSAF experiment per value, all on the scenarios of `base`.
pub fn sweep(param: SweepParam, values: &[f64], base: &ExperimentConfig) -> Result<Comparison> {
    if base.algo != Algorithm::DeNsaf {
        return invalid("PS and Cr sweeps apply to de_nsaf only");
    }
    if values.is_empty() {
        return invalid("sweep needs at least one value");
    }
    let configs = values
        .iter()
        .map(|&v| {
            let mut c = base.clone();
            c.label = None;
            match param {
                SweepParam::PopulationSize => {
                    if v.fract() != 0.0 || v < 0.0 {
                        return invalid(format!("population size {v} is not a whole number"));
                    }
                    c.de_nsaf.de.population_size = v as usize;
                }
                SweepParam::CrossoverRate => c.de_nsaf.de.crossover_rate = v,
            }
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    compare(&configs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small(algo: Algorithm) -> ExperimentConfig {
        ExperimentConfig {
            algo,
            taps: 8,
            trials: 2,
            blocks: 60,
            steady_state_start: 30,
            ..Default::default()
        }
    }

    #[test]
    fn aggregate_basics() {
        let a = aggregate(&[vec![0.01; 10]], 0, -80.0).unwrap();
        assert_abs_diff_eq!(a.steady_mean, 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(a.steady_std, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a.mse_db[3], -20.0, epsilon = 1e-12);

        let b = aggregate(&[vec![0.01; 4], vec![0.03; 4]], 2, -80.0).unwrap();
        assert!(b.mse_linear.iter().all(|&x| (x - 0.02).abs() < 1e-15));
        assert_eq!(b.window_start, 2);

        assert!(aggregate(&[], 0, -80.0).is_err());
        assert!(aggregate(&[vec![1.0; 3], vec![1.0; 4]], 0, -80.0).is_err());
        assert!(aggregate(&[vec![1.0; 3]], 3, -80.0).is_err());
    }

    #[test]
    fn db_floor() {
        let a = aggregate(&[vec![0.0, 1e-12, 1.0]], 0, -80.0).unwrap();
        assert_eq!(a.mse_db, vec![-80.0, -80.0, 0.0]);
    }

    #[test]
    fn threshold_crossing() {
        let curve = [1.0, 0.5, 0.2, 0.09, 0.05, 0.2];
        assert_eq!(blocks_to_threshold(&curve, -10.0, 1), Some(3));
        assert_eq!(blocks_to_threshold(&curve, -10.0, 2), Some(4));
        assert_eq!(blocks_to_threshold(&curve, -30.0, 1), None);
    }

    #[test]
    fn labels_and_parsing() {
        assert_eq!("sm-nsaf".parse::<Algorithm>().unwrap(), Algorithm::SmNsaf);
        assert!("rls".parse::<Algorithm>().is_err());
        assert_eq!(
            "PS".parse::<SweepParam>().unwrap(),
            SweepParam::PopulationSize
        );
        assert_eq!(small(Algorithm::Nsaf).label(), "nsaf(mu=0.1)");
        let bad = ExperimentConfig {
            label: Some("a,b".into()),
            ..small(Algorithm::Nsaf)
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn trials_are_deterministic() {
        let cfg = small(Algorithm::SmNsaf);
        assert_eq!(run_trial(&cfg, 1).unwrap(), run_trial(&cfg, 1).unwrap());
        assert_ne!(run_trial(&cfg, 1).unwrap(), run_trial(&cfg, 0).unwrap());
    }

    #[test]
    fn starting_at_the_channel_without_noise_gives_zero_error() {
        for algo in [Algorithm::Nsaf, Algorithm::SmNsaf, Algorithm::DeNsaf] {
            let cfg = ExperimentConfig {
                snr_db: f64::INFINITY,
                ..small(algo)
            };
            let bank = cfg.bank().unwrap();
            let s = ChannelScenario::generate(&cfg.scenario_params(), cfg.trial_seed(0)).unwrap();
            let blocks = bank.make_blocks(&s.u, &s.d, cfg.taps).unwrap();
            let mse = run_algorithm(&cfg, &blocks, 0.0, 3, Some(&s.w_o)).unwrap();
            // only rounding differences between filtering d and filtering u
            assert!(mse.iter().all(|&x| x < 1e-24), "{algo}");
        }
    }

    #[test]
    fn compare_rejects_mismatched_configs() {
        let a = small(Algorithm::Nsaf);
        let b = ExperimentConfig {
            blocks: 61,
            ..small(Algorithm::SmNsaf)
        };
        assert!(compare(&[a.clone(), b]).is_err());
        assert!(compare(&[a.clone(), a]).is_err());
        assert!(compare(&[]).is_err());
    }

    #[test]
    fn sweep_requires_de() {
        assert!(sweep(SweepParam::CrossoverRate, &[0.5], &small(Algorithm::Nsaf)).is_err());
        assert!(sweep(
            SweepParam::PopulationSize,
            &[10.5],
            &small(Algorithm::DeNsaf)
        )
        .is_err());
    }

    #[test]
    fn csv_shapes() {
        let cmp = compare(&[small(Algorithm::Nsaf), small(Algorithm::SmNsaf)]).unwrap();
        let curves = cmp.curves_csv();
        assert!(curves.starts_with("algo,block,mse_linear,mse_db\n"));
        assert_eq!(curves.lines().count(), 1 + 2 * 60);
        let summary = cmp.summary_csv();
        assert!(summary.starts_with("algo,steady_mean,steady_std,window_start\n"));
        assert_eq!(summary.lines().count(), 3);
        let table = cmp.summary_table();
        assert!(table.contains("\u{b1}") && table.contains("(30~end)"));
    }
}
