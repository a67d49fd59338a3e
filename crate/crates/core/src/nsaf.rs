//! NSAF and set-membership NSAF weight updates.
//!
//! Both updates compute the a-priori subband errors with the current weights
//! and then move the fullband weight vector along the subband regressors:
//!
//! ```text
//! NSAF:    w ← w + μ Σ_i u_i e_i / (δ + ‖u_i‖²)
//! SM-NSAF: w ← w + μ Σ_i α_i u_i e_i / ‖u_i‖²,   α_i = 1 - γ/|e_i| if |e_i| > γ else 0
//! ```
//!
//! A subband whose normalizer is zero contributes nothing.

use crate::error::{invalid, Result};
use crate::filterbank::SubbandBlock;

pub const DEFAULT_DELTA: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub w: Vec<f64>,
    pub mu: f64,
    pub delta: f64,
    pub gamma: f64,
}

/// A-priori outputs and errors of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockErrors {
    pub e: Vec<f64>,
    pub y: Vec<f64>,
}

impl BlockErrors {
    /// `Σ_i e_i²`.
    pub fn energy(&self) -> f64 {
        self.e.iter().map(|e| e * e).sum()
    }
}

impl FilterState {
    /// Zero-initialized weights of length `taps`.
    pub fn new(taps: usize, mu: f64, delta: f64, gamma: f64) -> Result<Self> {
        Self::with_weights(vec![0.0; taps], mu, delta, gamma)
    }

    pub fn with_weights(w: Vec<f64>, mu: f64, delta: f64, gamma: f64) -> Result<Self> {
        let s = Self {
            w,
            mu,
            delta,
            gamma,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.w.is_empty() {
            return invalid("weight vector must be non-empty");
        }
        if !(self.mu > 0.0 && self.mu < 2.0) {
            return invalid(format!("step size {} outside (0, 2)", self.mu));
        }
        if !(self.delta >= 0.0) || !(self.gamma >= 0.0) {
            return invalid("delta and gamma must be non-negative");
        }
        Ok(())
    }

    pub fn errors(&self, block: &SubbandBlock) -> Result<BlockErrors> {
        let y = subband_output(&self.w, block)?;
        let e = block.desired.iter().zip(&y).map(|(d, y)| d - y).collect();
        Ok(BlockErrors { e, y })
    }

    pub fn nsaf_update(&mut self, block: &SubbandBlock) -> Result<BlockErrors> {
        let errs = self.errors(block)?;
        for (u, &e) in block.regressors.iter().zip(&errs.e) {
            let norm = self.delta + energy(u);
            if norm > 0.0 {
                self.axpy(self.mu * e / norm, u);
            }
        }
        Ok(errs)
    }

    pub fn sm_nsaf_update(&mut self, block: &SubbandBlock) -> Result<BlockErrors> {
        let errs = self.errors(block)?;
        for (u, &e) in block.regressors.iter().zip(&errs.e) {
            let alpha = sm_gate(e, self.gamma);
            let norm = energy(u);
            if alpha > 0.0 && norm > 0.0 {
                self.axpy(self.mu * alpha * e / norm, u);
            }
        }
        Ok(errs)
    }

    fn axpy(&mut self, a: f64, x: &[f64]) {
        self.w.iter_mut().zip(x).for_each(|(w, x)| *w += a * x);
    }
}

/// Set-membership gate: `1 - γ/|e|` when `|e| > γ`, else 0.
pub fn sm_gate(e: f64, gamma: f64) -> f64 {
    let mag = e.abs();
    if mag > gamma {
        1.0 - gamma / mag
    } else {
        0.0
    }
}

/// `y_i = u_i(k)ᵀ w` for every subband.
pub fn subband_output(w: &[f64], block: &SubbandBlock) -> Result<Vec<f64>> {
    if block.regressors.iter().any(|u| u.len() != w.len()) {
        return invalid(format!(
            "weight length {} does not match regressor length {}",
            w.len(),
            block.taps()
        ));
    }
    Ok(block.regressors.iter().map(|u| crate::dot(u, w)).collect())
}

fn energy(u: &[f64]) -> f64 {
    u.iter().map(|x| x * x).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn block(regressors: Vec<Vec<f64>>, desired: Vec<f64>) -> SubbandBlock {
        SubbandBlock {
            k: 0,
            regressors,
            desired,
        }
    }

    #[test]
    fn state_invariants() {
        assert!(FilterState::new(4, 0.0, 0.0, 0.0).is_err());
        assert!(FilterState::new(4, 2.0, 0.0, 0.0).is_err());
        assert!(FilterState::new(4, 1.0, -1.0, 0.0).is_err());
        assert!(FilterState::new(4, 1.0, 0.0, -0.1).is_err());
        assert!(FilterState::new(0, 1.0, 0.0, 0.0).is_err());
        assert!(FilterState::new(4, 1.999, 0.0, 0.0).is_ok());
    }

    #[test]
    fn outputs() {
        let b = block(
            vec![
                vec![1.0, 2.0, 3.0, 4.0],
                vec![-1.0, 0.5, 0.0, 2.0],
                vec![0.0, 0.0, 7.0, 1.0],
            ],
            vec![0.0; 3],
        );
        assert_eq!(subband_output(&[0.0; 4], &b).unwrap(), vec![0.0; 3]);
        assert_eq!(
            subband_output(&[1.0, 0.0, 0.0, 0.0], &b).unwrap(),
            vec![1.0, -1.0, 0.0]
        );
        let w = [0.5, -1.0, 2.0, 0.25];
        let y = subband_output(&w, &b).unwrap();
        for (i, u) in b.regressors.iter().enumerate() {
            let mut acc = 0.0;
            for m in 0..4 {
                acc += u[m] * w[m];
            }
            assert_abs_diff_eq!(y[i], acc, epsilon = 1e-15);
        }
        assert!(subband_output(&[1.0; 3], &b).is_err());
    }

    #[test]
    fn zero_error_is_fixed_point() {
        let b = block(vec![vec![1.0, 2.0], vec![3.0, -1.0]], vec![0.0, 0.0]);
        let mut s = FilterState::new(2, 0.5, 0.01, 0.0).unwrap();
        s.nsaf_update(&b).unwrap();
        assert_eq!(s.w, vec![0.0, 0.0]);
    }

    #[test]
    fn unit_step_projection_zeroes_posterior_error() {
        let u = vec![0.3, -1.1, 2.0, 0.7];
        let b = block(vec![u.clone(), vec![0.0; 4]], vec![1.5, 0.0]);
        let mut s = FilterState::with_weights(vec![0.2, 0.1, -0.4, 0.9], 1.0, 0.0, 0.0).unwrap();
        s.nsaf_update(&b).unwrap();
        let post = crate::dot(&u, &s.w) - 1.5;
        assert_abs_diff_eq!(post, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn hand_computed_step() {
        // w = (1, 0, -1), μ = 0.5, δ = 1.
        // u0 = (1, 2, 0), d0 = 3 → y0 = 1, e0 = 2, ‖u0‖² = 5, scale 0.5·2/6 = 1/6
        // u1 = (0, 1, 1), d1 = 0 → y1 = -1, e1 = 1, ‖u1‖² = 2, scale 0.5·1/3 = 1/6
        // w' = (1 + 1/6, 2/6 + 1/6, -1 + 1/6)
        let b = block(
            vec![vec![1.0, 2.0, 0.0], vec![0.0, 1.0, 1.0]],
            vec![3.0, 0.0],
        );
        let mut s = FilterState::with_weights(vec![1.0, 0.0, -1.0], 0.5, 1.0, 0.0).unwrap();
        let errs = s.nsaf_update(&b).unwrap();
        assert_eq!(errs.e, vec![2.0, 1.0]);
        assert_eq!(errs.y, vec![1.0, -1.0]);
        let expect = [7.0 / 6.0, 0.5, -5.0 / 6.0];
        for (w, x) in s.w.iter().zip(expect) {
            assert_abs_diff_eq!(*w, x, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_regressor_with_zero_delta_contributes_nothing() {
        let b = block(vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![5.0, 1.0]);
        let mut s = FilterState::new(2, 1.0, 0.0, 0.0).unwrap();
        s.nsaf_update(&b).unwrap();
        assert_eq!(s.w, vec![1.0, 0.0]);
        let mut s = FilterState::new(2, 1.0, 0.0, 0.0).unwrap();
        s.sm_nsaf_update(&b).unwrap();
        assert_eq!(s.w, vec![1.0, 0.0]);
    }

    #[test]
    fn gate_values() {
        assert_eq!(sm_gate(0.5, 0.5), 0.0);
        assert_eq!(sm_gate(-0.4, 0.5), 0.0);
        assert_eq!(sm_gate(1.0, 0.5), 0.5);
        assert_eq!(sm_gate(-1.0, 0.5), 0.5);
        assert_eq!(sm_gate(3.0, 0.0), 1.0);
    }

    #[test]
    fn errors_within_bound_skip_update() {
        let b = block(vec![vec![1.0, 2.0], vec![3.0, -1.0]], vec![0.1, -0.2]);
        let mut s = FilterState::new(2, 1.0, 0.0, 0.25).unwrap();
        s.sm_nsaf_update(&b).unwrap();
        assert_eq!(s.w, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_bound_matches_unregularized_nsaf() {
        let b = block(
            vec![vec![1.0, 2.0, 0.5], vec![-0.3, 1.0, 1.0]],
            vec![0.7, -1.3],
        );
        let mut sm = FilterState::with_weights(vec![0.1, 0.2, 0.3], 0.7, 0.0, 0.0).unwrap();
        let mut ns = sm.clone();
        sm.sm_nsaf_update(&b).unwrap();
        ns.nsaf_update(&b).unwrap();
        for (a, b) in sm.w.iter().zip(&ns.w) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-15);
        }
    }
}
