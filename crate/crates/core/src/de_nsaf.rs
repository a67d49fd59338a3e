//! Differential-evolution-trained subband adaptive filter.
//!
//! At every decimated block the population is re-scored on the subband cost
//! `Σ_k Σ_i (d_{i,D}(k) - u_i(k)ᵀ w)²` over the most recent `cost_window`
//! blocks, evolved for `generations_per_block` generations, and its cheapest
//! member becomes the filter estimate `w(k)`. The population carries over
//! from block to block.
//!
//! For the first `warmup_blocks` blocks the population is only scored, not
//! evolved: while the window holds fewer than `M/N` blocks the cost is rank
//! deficient and evolving on it drives members far off along its null space.

use crate::de::{DeConfig, DePopulation};
use crate::error::{invalid, Result};
use crate::filterbank::{AnalysisBank, SubbandBlock};
use crate::nsaf::{subband_output, BlockErrors};
use crate::signal_model::ChannelScenario;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DeNsafConfig {
    pub de: DeConfig,
    pub generations_per_block: usize,
    pub cost_window: usize,
    /// Blocks processed before the first generation runs.
    pub warmup_blocks: usize,
}

impl Default for DeNsafConfig {
    fn default() -> Self {
        Self {
            de: DeConfig {
                max_generations: u64::MAX,
                ..DeConfig::default()
            },
            generations_per_block: 10,
            cost_window: 16,
            warmup_blocks: 16,
        }
    }
}

impl DeNsafConfig {
    pub fn validate(&self) -> Result<()> {
        self.de.validate()?;
        if self.generations_per_block == 0 {
            return invalid("generations_per_block must be at least 1");
        }
        if self.cost_window == 0 {
            return invalid("cost_window must be at least 1");
        }
        Ok(())
    }
}

/// Sum of squared subband residuals of `w` over `blocks`.
pub fn subband_cost(w: &[f64], blocks: &[SubbandBlock]) -> Result<f64> {
    if blocks.is_empty() {
        return invalid("need at least one block");
    }
    let mut f = 0.0;
    for b in blocks {
        let y = subband_output(w, b)?;
        f += b
            .desired
            .iter()
            .zip(&y)
            .map(|(d, y)| (d - y).powi(2))
            .sum::<f64>();
    }
    Ok(f)
}

/// Unchecked cost used inside the optimizer once dimensions were validated.
fn window_cost(w: &[f64], blocks: &[SubbandBlock]) -> f64 {
    blocks
        .iter()
        .flat_map(|b| b.regressors.iter().zip(&b.desired))
        .map(|(u, d)| (d - crate::dot(u, w)).powi(2))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRecord {
    pub k: usize,
    /// Cost of `w(k)` over the block's cost window.
    pub cost: f64,
    /// `e_{i,D}(k)` of `w(k)` on block `k`.
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearningCurve {
    pub records: Vec<CurveRecord>,
}

impl LearningCurve {
    /// `Σ_i e_{i,D}²(k)` per block.
    pub fn mse(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| r.errors.iter().map(|e| e * e).sum())
            .collect()
    }
}

/// Stateful DE-NSAF filter.
#[derive(Debug, Clone)]
pub struct DeNsaf {
    cfg: DeNsafConfig,
    population: DePopulation,
    generations_run: u64,
    blocks_seen: usize,
}

impl DeNsaf {
    pub fn new(cfg: DeNsafConfig, taps: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let population = DePopulation::init(&cfg.de, taps, seed)?;
        Ok(Self {
            cfg,
            population,
            generations_run: 0,
            blocks_seen: 0,
        })
    }

    /// Starts from a caller-supplied population.
    pub fn with_population(cfg: DeNsafConfig, population: DePopulation) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            population,
            generations_run: 0,
            blocks_seen: 0,
        })
    }

    pub fn population(&self) -> &DePopulation {
        &self.population
    }

    pub fn config(&self) -> &DeNsafConfig {
        &self.cfg
    }

    pub fn generations_run(&self) -> u64 {
        self.generations_run
    }

    pub fn weights(&self) -> &[f64] {
        self.population.best().0
    }

    /// Processes the newest block, `history.last()`, with the cost taken over
    /// the trailing `cost_window` blocks of `history`. Returns `w(k)` and its
    /// errors on the newest block.
    pub fn step(&mut self, history: &[SubbandBlock]) -> Result<(Vec<f64>, BlockErrors)> {
        let Some(current) = history.last() else {
            return invalid("need at least one block");
        };
        let start = history.len().saturating_sub(self.cfg.cost_window);
        let window = &history[start..];
        let dim = self.population.dim();
        if window
            .iter()
            .any(|b| b.regressors.iter().any(|u| u.len() != dim))
        {
            return invalid(format!("regressor length does not match {dim} taps"));
        }
        if window.iter().any(|b| b.regressors.len() != b.desired.len()) {
            return invalid("block has mismatched regressor and desired counts");
        }

        let cost = |w: &[f64]| window_cost(w, window);
        // The landscape moved with the new block.
        self.population.evaluate(cost)?;
        let evolve = self.blocks_seen >= self.cfg.warmup_blocks;
        self.blocks_seen += 1;
        for _ in 0..if evolve {
            self.cfg.generations_per_block
        } else {
            0
        } {
            if self.generations_run >= self.cfg.de.max_generations {
                break;
            }
            self.population.step_generation(&self.cfg.de, cost)?;
            self.generations_run += 1;
        }

        let w = self.population.best().0.to_vec();
        let y = subband_output(&w, current)?;
        let e = current.desired.iter().zip(&y).map(|(d, y)| d - y).collect();
        Ok((w, BlockErrors { e, y }))
    }

    /// Runs over `blocks` in order, recording one curve entry per block.
    pub fn run(&mut self, blocks: &[SubbandBlock]) -> Result<LearningCurve> {
        let mut curve = LearningCurve {
            records: Vec::with_capacity(blocks.len()),
        };
        for k in 0..blocks.len() {
            let (_, errs) = self.step(&blocks[..=k])?;
            curve.records.push(CurveRecord {
                k: blocks[k].k,
                cost: self.population.best().1,
                errors: errs.e,
            });
        }
        Ok(curve)
    }
}

/// Splits the scenario, trains DE-NSAF over at most `block_budget` blocks and
/// returns the learning curve with the final weights.
pub fn run_de_nsaf(
    scenario: &ChannelScenario,
    bank: &AnalysisBank,
    cfg: &DeNsafConfig,
    seed: u64,
    block_budget: Option<usize>,
) -> Result<(LearningCurve, Vec<f64>)> {
    let taps = scenario.w_o.len();
    let mut blocks = bank.make_blocks(&scenario.u, &scenario.d, taps)?;
    if let Some(budget) = block_budget {
        blocks.truncate(budget);
    }
    if blocks.is_empty() {
        return invalid("scenario too short for a single block");
    }
    let mut filter = DeNsaf::new(cfg.clone(), taps, seed)?;
    let curve = filter.run(&blocks)?;
    Ok((curve, filter.weights().to_vec()))
}
