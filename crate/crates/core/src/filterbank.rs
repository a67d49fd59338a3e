//! Cosine-modulated pseudo-QMF analysis bank and critically decimated
//! subband regressors.
//!
//! Band `i` of an `N`-band bank is
//!
//! ```text
//! h_i(n) = 2 p(n) cos((2i+1) π/(2N) · (n - (L-1)/2) + (-1)^i π/4)
//! ```
//!
//! where `p` is a Hamming-windowed sinc lowpass of length `L`. The prototype
//! cutoff is tuned so that `Σ_i |H_i(e^jω)|²` is as flat as possible, and `p`
//! is scaled to unit DC gain, which makes the bank approximately
//! power-complementary with unit total gain.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{invalid, Result};
use crate::signal_model::convolve_causal;

/// Frequencies on `[0, π]` used when tuning the prototype cutoff.
const TUNING_GRID: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisBank {
    subbands: usize,
    prototype: Vec<f64>,
    filters: Vec<Vec<f64>>,
}

impl AnalysisBank {
    /// Designs an `n`-band bank with a prototype of `prototype_len` taps.
    pub fn design(n: usize, prototype_len: usize) -> Result<Self> {
        if n < 2 {
            return invalid("a filter bank needs at least two subbands");
        }
        if prototype_len == 0 || !prototype_len.is_multiple_of(2 * n) {
            return invalid(format!(
                "prototype length {prototype_len} must be a positive multiple of {}",
                2 * n
            ));
        }
        let nominal = PI / (2 * n) as f64;
        let ripple = |scale: f64| {
            let p = windowed_sinc(prototype_len, scale * nominal);
            power_ripple(&modulate(n, &p))
        };

        // Coarse scan, then golden-section refinement around the best point.
        let coarse: Vec<f64> = (0..=40).map(|j| 0.8 + 0.02 * j as f64).collect();
        let best = coarse
            .iter()
            .copied()
            .min_by(|a, b| ripple(*a).total_cmp(&ripple(*b)))
            .unwrap_or(1.0);
        let scale = golden_min(ripple, best - 0.02, best + 0.02, 40);

        let prototype = windowed_sinc(prototype_len, scale * nominal);
        Self::from_prototype(n, prototype)
    }

    /// Builds the bank by cosine modulation of an existing prototype.
    pub fn from_prototype(n: usize, prototype: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return invalid("a filter bank needs at least two subbands");
        }
        if prototype.is_empty() {
            return invalid("prototype must be non-empty");
        }
        let filters = modulate(n, &prototype);
        Ok(Self {
            subbands: n,
            prototype,
            filters,
        })
    }

    pub fn subbands(&self) -> usize {
        self.subbands
    }

    pub fn prototype(&self) -> &[f64] {
        &self.prototype
    }

    pub fn filters(&self) -> &[Vec<f64>] {
        &self.filters
    }

    /// Filters `x` through every band and keeps samples `n = kN`, `k = 0, 1, ...`.
    pub fn analyze_decimate(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.is_empty() {
            return invalid("input must be non-empty");
        }
        let n = self.subbands;
        Ok(self
            .filters
            .iter()
            .map(|h| {
                (0..x.len())
                    .step_by(n)
                    .map(|t| {
                        h.iter()
                            .take(t + 1)
                            .enumerate()
                            .map(|(m, hm)| hm * x[t - m])
                            .sum()
                    })
                    .collect()
            })
            .collect())
    }

    /// Splits `u` and `d` into subbands and assembles one [`SubbandBlock`] per
    /// decimated index, with `taps`-long regressors drawn from the undecimated
    /// subband input.
    pub fn make_blocks(&self, u: &[f64], d: &[f64], taps: usize) -> Result<Vec<SubbandBlock>> {
        if u.len() != d.len() {
            return invalid("input and desired sequences differ in length");
        }
        if u.is_empty() {
            return invalid("need at least one sample to form a block");
        }
        if taps == 0 {
            return invalid("regressor length must be positive");
        }
        let n = self.subbands;
        let u_sub: Vec<Vec<f64>> = self.filters.iter().map(|h| convolve_causal(u, h)).collect();
        let d_sub: Vec<Vec<f64>> = self.filters.iter().map(|h| convolve_causal(d, h)).collect();

        Ok((0..u.len())
            .step_by(n)
            .enumerate()
            .map(|(k, t)| SubbandBlock {
                k,
                regressors: u_sub
                    .iter()
                    .map(|ui| {
                        (0..taps)
                            .map(|m| if t >= m { ui[t - m] } else { 0.0 })
                            .collect()
                    })
                    .collect(),
                desired: d_sub.iter().map(|di| di[t]).collect(),
            })
            .collect())
    }

    /// Tap table with header `tap_index,h0,...,h{N-1}`.
    pub fn taps_csv(&self) -> String {
        let mut out = String::from("tap_index");
        for i in 0..self.subbands {
            let _ = write!(out, ",h{i}");
        }
        out.push('\n');
        for t in 0..self.prototype.len() {
            let _ = write!(out, "{t}");
            for h in &self.filters {
                let _ = write!(out, ",{}", h[t]);
            }
            out.push('\n');
        }
        out
    }

    /// Magnitude responses in dB on `points` frequencies spanning `[0, π]`,
    /// header `omega,h0,...,h{N-1}`.
    pub fn response_csv(&self, points: usize) -> String {
        let mut out = String::from("omega");
        for i in 0..self.subbands {
            let _ = write!(out, ",h{i}");
        }
        out.push('\n');
        for j in 0..points {
            let w = PI * j as f64 / (points.max(2) - 1) as f64;
            let _ = write!(out, "{w}");
            for h in &self.filters {
                let db = 20.0 * magnitude_response(h, w).max(1e-12).log10();
                let _ = write!(out, ",{db}");
            }
            out.push('\n');
        }
        out
    }
}

/// Per-block regressors and decimated desired samples for all bands.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandBlock {
    pub k: usize,
    /// `regressors[i] = [u_i(kN), u_i(kN-1), ..., u_i(kN-M+1)]`.
    pub regressors: Vec<Vec<f64>>,
    /// `desired[i] = d_i(kN)`.
    pub desired: Vec<f64>,
}

impl SubbandBlock {
    pub fn subbands(&self) -> usize {
        self.desired.len()
    }

    pub fn taps(&self) -> usize {
        self.regressors.first().map_or(0, Vec::len)
    }
}

/// `|H(e^{jω})|` of a real FIR filter.
pub fn magnitude_response(h: &[f64], omega: f64) -> f64 {
    let (re, im) = h.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, hn)| {
        let a = omega * n as f64;
        (re + hn * a.cos(), im - hn * a.sin())
    });
    re.hypot(im)
}

fn windowed_sinc(len: usize, cutoff: f64) -> Vec<f64> {
    let c = (len - 1) as f64 / 2.0;
    let denom = (len - 1).max(1) as f64;
    let mut p: Vec<f64> = (0..len)
        .map(|n| {
            let t = n as f64 - c;
            let ideal = if t == 0.0 {
                cutoff / PI
            } else {
                (cutoff * t).sin() / (PI * t)
            };
            let hamming = 0.54 - 0.46 * (2.0 * PI * n as f64 / denom).cos();
            ideal * hamming
        })
        .collect();
    let dc: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= dc);
    p
}

fn modulate(n: usize, prototype: &[f64]) -> Vec<Vec<f64>> {
    let c = (prototype.len() - 1) as f64 / 2.0;
    (0..n)
        .map(|i| {
            let phase = if i % 2 == 0 { PI / 4.0 } else { -PI / 4.0 };
            let w = (2 * i + 1) as f64 * PI / (2 * n) as f64;
            prototype
                .iter()
                .enumerate()
                .map(|(t, p)| 2.0 * p * (w * (t as f64 - c) + phase).cos())
                .collect()
        })
        .collect()
}

/// Peak-to-trough ratio of `Σ_i |H_i|²` over `[0, π]`, in dB.
fn power_ripple(filters: &[Vec<f64>]) -> f64 {
    let (lo, hi) = (0..TUNING_GRID).fold((f64::INFINITY, 0.0f64), |(lo, hi), j| {
        let w = PI * j as f64 / (TUNING_GRID - 1) as f64;
        let s: f64 = filters
            .iter()
            .map(|h| magnitude_response(h, w).powi(2))
            .sum();
        (lo.min(s), hi.max(s))
    });
    10.0 * (hi / lo).log10()
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}
