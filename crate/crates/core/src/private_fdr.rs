//! Differentially private step-down BHq on log p-values.
//!
//! The pipeline truncates p-values at `ν`, privately selects the `k`
//! smallest log p-values (peeling or one-shot), releases them with fresh
//! noise and runs step-down against cutoffs shifted by `η Δ_k`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{positive, unit_interval, Error, Result};
use crate::mechanisms::{
    one_shot_lambda, one_shot_min_k, one_shot_release_scale, peeling_lambda, peeling_top_k_scaled,
    release_values_scaled, DEFAULT_ONE_SHOT_C,
};
use crate::model::{bhq_critical, cmp_value_index, PValueVector, PrivacyParams, RejectionReport};
use crate::noise::NoiseStream;

/// Default multiplier standing in for the `(1 + o(1))` factor of `Δ_k`.
pub const DEFAULT_DELTA_K_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectionBackend {
    Peeling,
    OneShot,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivateFdrConfig {
    pub privacy: PrivacyParams,
    pub q: f64,
    pub backend: SelectionBackend,
    /// Use the literal `√(k ln(1/δ))/ε` scales instead of the
    /// composition-derived ones.
    pub paper_exact_scales: bool,
    /// Constant `C` of the one-shot selection scale.
    pub one_shot_c: f64,
    /// Constant `c_Δ` of the accuracy bound.
    pub delta_k_factor: f64,
}

impl PrivateFdrConfig {
    pub fn new(privacy: PrivacyParams, q: f64, backend: SelectionBackend) -> Result<Self> {
        unit_interval("q", q)?;
        Ok(Self {
            privacy,
            q,
            backend,
            paper_exact_scales: false,
            one_shot_c: DEFAULT_ONE_SHOT_C,
            delta_k_factor: DEFAULT_DELTA_K_FACTOR,
        })
    }

    pub fn with_paper_exact_scales(mut self, on: bool) -> Self {
        self.paper_exact_scales = on;
        self
    }

    pub fn with_backend(mut self, backend: SelectionBackend) -> Self {
        self.backend = backend;
        self
    }

    fn validate(&self, m: usize) -> Result<()> {
        unit_interval("q", self.q)?;
        positive("C", self.one_shot_c)?;
        positive("delta_k_factor", self.delta_k_factor)?;
        self.privacy.check_against(m)
    }

    /// `Δ_k` for `m` hypotheses under this configuration.
    pub fn delta_k(&self, m: usize) -> f64 {
        let p = &self.privacy;
        delta_k(p.k, m, p.epsilon, p.delta, self.delta_k_factor)
    }
}

/// Accuracy bound `c_Δ √(k ln(1/δ)) ln(m) / ε` of the peeling selection.
pub fn delta_k(k: usize, m: usize, epsilon: f64, delta: f64, factor: f64) -> f64 {
    factor * libm::sqrt(k as f64 * libm::log(1.0 / delta)) * libm::log(m as f64) / epsilon
}

/// Shifted log-domain cutoffs `ln(q j / m + ν) + η Δ_k` for `j = 1..=k`.
pub fn private_cutoffs(q: f64, m: usize, k: usize, eta: f64, nu: f64, delta_k: f64) -> Vec<f64> {
    (1..=k)
        .map(|j| libm::log(bhq_critical(q, j, m) + nu) + eta * delta_k)
        .collect()
}

/// Truncated log p-values `ln(max(p_i, ν))`.
pub fn truncated_log_pvalues(p: &PValueVector, nu: f64) -> Vec<f64> {
    p.values().iter().map(|&v| libm::log(v.max(nu))).collect()
}

/// Private FDR control with the peeling selection.
pub fn dp_bhq(
    p: &PValueVector,
    config: &PrivateFdrConfig,
    rng: &mut NoiseStream,
) -> Result<RejectionReport> {
    run(p, &config.with_backend(SelectionBackend::Peeling), rng)
}

/// Private FDR control with the one-shot selection and a fresh-noise release.
pub fn fast_dp_bhq(
    p: &PValueVector,
    config: &PrivateFdrConfig,
    rng: &mut NoiseStream,
) -> Result<RejectionReport> {
    run(p, &config.with_backend(SelectionBackend::OneShot), rng)
}

/// Runs the pipeline with the backend named in `config`.
pub fn private_bhq(
    p: &PValueVector,
    config: &PrivateFdrConfig,
    rng: &mut NoiseStream,
) -> Result<RejectionReport> {
    run(p, config, rng)
}

fn run(
    p: &PValueVector,
    config: &PrivateFdrConfig,
    rng: &mut NoiseStream,
) -> Result<RejectionReport> {
    let m = p.len();
    if m == 0 {
        return Err(Error::Empty);
    }
    config.validate(m)?;
    let PrivacyParams {
        epsilon,
        delta,
        eta,
        nu,
        k,
    } = config.privacy;

    let x = truncated_log_pvalues(p, nu);
    let released = match config.backend {
        SelectionBackend::Peeling => {
            let lambda = eta * peeling_lambda(k, epsilon, delta, config.paper_exact_scales)?;
            peeling_top_k_scaled(&x, k, lambda, rng)?
        }
        SelectionBackend::OneShot => {
            let select = eta * one_shot_lambda(k, m, epsilon, delta, config.one_shot_c)?.lambda;
            let release = eta
                * if config.paper_exact_scales {
                    peeling_lambda(k, epsilon, delta, true)?
                } else {
                    one_shot_release_scale(k, epsilon, delta)?
                };
            let chosen = one_shot_min_k(&x, k, select, rng)?;
            release_values_scaled(&x, &chosen, release, rng)?
        }
    };

    let mut pairs: Vec<(usize, f64)> = released
        .pairs()
        .ok_or(Error::Precondition("selection released no values"))?
        .collect();
    pairs.sort_unstable_by(|a, b| cmp_value_index(a.1, a.0, b.1, b.0));

    let cutoffs = private_cutoffs(config.q, m, k, eta, nu, config.delta_k(m));
    let accepted = pairs
        .iter()
        .zip(&cutoffs)
        .take_while(|((_, y), cut)| y <= cut)
        .count();
    let values: BTreeMap<usize, f64> = pairs[..accepted].iter().copied().collect();
    let report = RejectionReport::new(values.keys().copied().collect()).with_released(values)?;
    match p.labels() {
        Some(labels) => report.with_labels(labels),
        None => Ok(report),
    }
}
