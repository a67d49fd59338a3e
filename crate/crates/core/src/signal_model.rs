//! Colored excitation, random channels and the noisy desired response
//! `d(n) = u(n)ᵀ w_o + v(n)`.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::rng::{self, tag};

/// Samples generated and thrown away before an AR(4) realization is used.
pub const AR_WARMUP: usize = 1000;

/// Coefficients of `u(n) = a1 u(n-1) + a2 u(n-2) + a3 u(n-3) + a4 u(n-4) + ξ(n)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Ar4Params {
    pub coefficients: [f64; 4],
    /// Power of the white Gaussian innovation ξ(n).
    pub innovation_variance: f64,
}

impl Default for Ar4Params {
    // 0.5235 is a model coefficient, not π/6.
    #[allow(clippy::approx_constant)]
    fn default() -> Self {
        Self {
            coefficients: [0.6617, 0.3402, 0.5235, -0.8703],
            innovation_variance: 1.0,
        }
    }
}

impl Ar4Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.innovation_variance >= 0.0) || !self.innovation_variance.is_finite() {
            return invalid("AR innovation variance must be finite and non-negative");
        }
        if self.coefficients.iter().any(|c| !c.is_finite()) {
            return invalid("AR coefficients must be finite");
        }
        Ok(())
    }
}

/// Runs the AR(4) recursion over explicit innovations, starting from zero state.
pub fn ar4_recursion(innovations: &[f64], params: &Ar4Params) -> Vec<f64> {
    let a = params.coefficients;
    let mut out = Vec::with_capacity(innovations.len());
    for (n, &xi) in innovations.iter().enumerate() {
        let mut s = xi;
        for (j, aj) in a.iter().enumerate() {
            if n > j {
                s += aj * out[n - 1 - j];
            }
        }
        out.push(s);
    }
    out
}

/// Generates `n_samples` of AR(4) excitation driven by Gaussian innovations.
///
/// The recursion runs for [`AR_WARMUP`] extra samples that are discarded so the
/// returned sequence carries no start-up transient.
pub fn generate_ar4(n_samples: usize, params: &Ar4Params, seed: u64) -> Result<Vec<f64>> {
    if n_samples == 0 {
        return invalid("n_samples must be positive");
    }
    params.validate()?;
    let mut rng = rng::stream(seed, &[tag::INPUT]);
    let sigma = params.innovation_variance.sqrt();
    let innovations: Vec<f64> = (0..n_samples + AR_WARMUP)
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut u = ar4_recursion(&innovations, params);
    Ok(u.split_off(AR_WARMUP))
}

/// Draws `m` i.i.d. standard-normal taps and rescales them to unit Euclidean norm.
pub fn random_channel(m: usize, seed: u64) -> Result<Vec<f64>> {
    if m == 0 {
        return invalid("channel length must be positive");
    }
    let mut rng = rng::stream(seed, &[tag::CHANNEL]);
    loop {
        let w: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return Ok(w.into_iter().map(|x| x / norm).collect());
        }
    }
}

/// Noiseless channel output `u(n)ᵀ w_o` with zero history before `n = 0`.
pub fn simulate_channel(u: &[f64], w_o: &[f64]) -> Result<Vec<f64>> {
    if u.is_empty() || w_o.is_empty() {
        return invalid("input and channel must be non-empty");
    }
    Ok(convolve_causal(u, w_o))
}

/// `y(n) = Σ_m h(m) x(n-m)` for `n < x.len()`, zero initial state.
pub(crate) fn convolve_causal(x: &[f64], h: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|n| {
            h.iter()
                .take(n + 1)
                .enumerate()
                .map(|(m, hm)| hm * x[n - m])
                .sum()
        })
        .collect()
}

pub fn power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Adds white Gaussian noise so that `power(d_clean) / σ_v² = 10^(snr_db/10)`.
///
/// `snr_db = +∞` is the noise-free sentinel and returns `d_clean` unchanged
/// with zero noise variance.
pub fn add_noise_snr(d_clean: &[f64], snr_db: f64, seed: u64) -> Result<(Vec<f64>, f64)> {
    if d_clean.is_empty() {
        return invalid("desired signal must be non-empty");
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return invalid("SNR must be a number below +inf or the +inf sentinel");
    }
    let p = power(d_clean);
    if !(p > 0.0) {
        return Err(Error::DegenerateSignal(
            "desired signal has zero power".into(),
        ));
    }
    if snr_db == f64::INFINITY {
        return Ok((d_clean.to_vec(), 0.0));
    }
    let noise_variance = p / 10f64.powf(snr_db / 10.0);
    let sigma = noise_variance.sqrt();
    let mut rng = rng::stream(seed, &[tag::NOISE]);
    let d = d_clean
        .iter()
        .map(|x| x + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok((d, noise_variance))
}

/// Parameters of one identification scenario.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScenarioParams {
    pub taps: usize,
    pub samples: usize,
    pub snr_db: f64,
    pub ar: Ar4Params,
    /// Rescale the excitation to unit empirical power before it drives the channel.
    pub normalize_input: bool,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            taps: 32,
            samples: 8000,
            snr_db: 20.0,
            ar: Ar4Params::default(),
            normalize_input: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelScenario {
    pub w_o: Vec<f64>,
    pub u: Vec<f64>,
    pub d_clean: Vec<f64>,
    pub d: Vec<f64>,
    pub noise_variance: f64,
}

impl ChannelScenario {
    /// Builds channel, input and noise from independent streams of `seed`.
    pub fn generate(params: &ScenarioParams, seed: u64) -> Result<Self> {
        let w_o = random_channel(params.taps, seed)?;
        let mut u = generate_ar4(params.samples, &params.ar, seed)?;
        if params.normalize_input {
            let p = power(&u);
            if !(p > 0.0) {
                return Err(Error::DegenerateSignal("excitation has zero power".into()));
            }
            let g = p.sqrt().recip();
            u.iter_mut().for_each(|x| *x *= g);
        }
        let d_clean = simulate_channel(&u, &w_o)?;
        let (d, noise_variance) = add_noise_snr(&d_clean, params.snr_db, seed)?;
        Ok(Self {
            w_o,
            u,
            d_clean,
            d,
            noise_variance,
        })
    }

    /// FNV-1a digest over the bit patterns of every stored sample.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for x in self
            .w_o
            .iter()
            .chain(&self.u)
            .chain(&self.d)
            .chain(std::iter::once(&self.noise_variance))
        {
            for b in x.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}
