//! Monte-Carlo and exhaustive verification.
//!
//! Every simulation takes a base seed and a [`TrialExecutor`]. Trial `i`
//! draws from `NoiseStream::for_trial(seed, i)` and per-trial results are
//! aggregated in trial order, so estimates are reproducible bit for bit
//! whatever executor runs them.
//!
//! [`TrialExecutor`]: crate::exec::TrialExecutor

mod accuracy;
mod fdr;
mod order;
mod privacy;
mod scenario;

pub use accuracy::{selection_accuracy, AccuracyReport};
pub use fdr::{
    adversarial_fdp_oracle, adversarial_sup_k_oracle, compare_private, fdr_bound, fdr_sup_k_bound,
    simulate_fdr, verify_fdr_bounds, BoundCheck, Check, FdrEstimate, PrivateComparison, Procedure,
};
pub use order::{
    fdr1_min_term_bound, fdr1_min_term_estimate, submartingale_max_estimate,
    submartingale_max_from_exponentials, submartingale_max_sample, submartingale_mean_profile,
    verify_fdr1_min_term, verify_submartingale,
};
pub use privacy::{
    c_closeness_check, poisson_binomial_cdf, poisson_binomial_pmf, privacy_audit_one_shot,
    privacy_verify_exhaustive, random_c_close_pair, AuditReport, AuditResult, ExhaustiveGap,
    Verdict, AUDIT_ALPHA, EXHAUSTIVE_MAX_M,
};
pub use scenario::{scenario_generate, AlternativeLaw, ScenarioGenerator};

/// Sample mean with its standard error `s / √n` (sample standard deviation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: u64,
}

impl Estimate {
    /// Welford accumulation in iteration order.
    pub fn from_samples<I: IntoIterator<Item = f64>>(samples: I) -> Self {
        let mut n = 0u64;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for x in samples {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        let se = if n > 1 {
            libm::sqrt(m2 / (n - 1) as f64 / n as f64)
        } else {
            0.0
        };
        Self { mean, se, n }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn estimate_matches_textbook_formulas() {
        let e = Estimate::from_samples([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.n, 4);
        assert_relative_eq!(e.mean, 2.5);
        // s² = 5/3
        assert_relative_eq!(e.se, libm::sqrt(5.0 / 3.0 / 4.0), max_relative = 1e-15);
        let one = Estimate::from_samples([7.0]);
        assert_eq!((one.mean, one.se), (7.0, 0.0));
        let none = Estimate::from_samples(core::iter::empty());
        assert_eq!(none.n, 0);
    }
}
