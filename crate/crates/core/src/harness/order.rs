//! Order statistics of uniforms through exponential spacings:
//! `(U_(1), ..., U_(m))` has the law of `(T_1, ..., T_m) / T_{m+1}` where
//! `T_j` are partial sums of unit exponentials.

use alloc::vec::Vec;

use super::fdr::{BoundCheck, Check};
use super::Estimate;
use crate::error::{unit_interval, Error, Result};
use crate::exec::TrialExecutor;
use crate::noise::NoiseStream;

fn check_m(m: usize, min: usize) -> Result<()> {
    if m < min {
        Err(Error::Domain {
            name: "m",
            value: m as f64,
            range: if min == 1 { "[1, inf)" } else { "[2, inf)" },
        })
    } else {
        Ok(())
    }
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        Err(Error::Domain {
            name: "trials",
            value: 0.0,
            range: "[1, inf)",
        })
    } else {
        Ok(())
    }
}

/// `W_j / m = j T_{m+1} / (m T_j)` for `j = 2..=m`.
fn scaled_ratios(xi: &[f64]) -> Vec<f64> {
    let m = xi.len() - 1;
    let mut partial = Vec::with_capacity(m);
    let mut t = 0.0;
    for &x in &xi[..m] {
        t += x;
        partial.push(t);
    }
    let total = t + xi[m];
    (2..=m)
        .map(|j| j as f64 * total / partial[j - 1] / m as f64)
        .collect()
}

/// `max_{2<=j<=m} W_j / m` with `W_j = j T_{m+1} / T_j`, for the `m + 1`
/// exponentials `xi`.
pub fn submartingale_max_from_exponentials(xi: &[f64]) -> Result<f64> {
    if xi.len() < 3 {
        return Err(Error::Domain {
            name: "m",
            value: xi.len().saturating_sub(1) as f64,
            range: "[2, inf)",
        });
    }
    Ok(scaled_ratios(xi)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max))
}

/// One draw of `max_{2<=j<=m} W_j / m` from `rng`.
pub fn submartingale_max_sample(m: usize, rng: &mut NoiseStream) -> Result<f64> {
    check_m(m, 2)?;
    let xi: Vec<f64> = (0..=m).map(|_| rng.next_exponential()).collect();
    submartingale_max_from_exponentials(&xi)
}

/// Monte-Carlo mean of `max_{2<=j<=m} W_j / m`.
pub fn submartingale_max_estimate<E: TrialExecutor>(
    m: usize,
    trials: u64,
    seed: u64,
    exec: &E,
) -> Result<Estimate> {
    check_m(m, 2)?;
    check_trials(trials)?;
    let samples = exec.map_trials(trials, |i| {
        submartingale_max_sample(m, &mut NoiseStream::for_trial(seed, i)).unwrap_or(f64::NAN)
    });
    Ok(Estimate::from_samples(samples))
}

/// Monte-Carlo means of `W_j / m` for `j = 2..=m`; entry `j - 2` belongs to
/// `j`. The exact means are `j / (j - 1)`.
pub fn submartingale_mean_profile<E: TrialExecutor>(
    m: usize,
    trials: u64,
    seed: u64,
    exec: &E,
) -> Result<Vec<Estimate>> {
    check_m(m, 2)?;
    check_trials(trials)?;
    let rows = exec.map_trials(trials, |i| {
        let mut rng = NoiseStream::for_trial(seed, i);
        let xi: Vec<f64> = (0..=m).map(|_| rng.next_exponential()).collect();
        scaled_ratios(&xi)
    });
    Ok((0..m - 1)
        .map(|c| Estimate::from_samples(rows.iter().map(|r| r[c])))
        .collect())
}

/// Checks the Monte-Carlo mean of the running maximum against 3, with no
/// standard-error slack.
pub fn verify_submartingale<E: TrialExecutor>(
    m: usize,
    trials: u64,
    seed: u64,
    exec: &E,
) -> Result<BoundCheck> {
    let estimate = submartingale_max_estimate(m, trials, seed, exec)?;
    Ok(BoundCheck::new(Check::SubmartingaleMax, estimate, 3.0, 0.0))
}

/// `min{1 / ceil(m U_(1) / q), 1}` for the minimum `u_min` of `m` uniforms.
fn min_term(u_min: f64, m: usize, q: f64) -> f64 {
    (1.0 / libm::ceil(m as f64 * u_min / q)).min(1.0)
}

/// Monte-Carlo mean of `min{1 / ceil(m U_(1) / q), 1}`, with `U_(1)` the
/// minimum of `m` uniforms drawn one by one.
pub fn fdr1_min_term_estimate<E: TrialExecutor>(
    m: usize,
    q: f64,
    trials: u64,
    seed: u64,
    exec: &E,
) -> Result<Estimate> {
    check_m(m, 1)?;
    unit_interval("q", q)?;
    check_trials(trials)?;
    let samples = exec.map_trials(trials, |i| {
        let mut rng = NoiseStream::for_trial(seed, i);
        let u_min = (0..m).map(|_| rng.next_uniform()).fold(1.0, f64::min);
        min_term(u_min, m, q)
    });
    Ok(Estimate::from_samples(samples))
}

/// `q ln(1/q) + 2.3 q`.
pub fn fdr1_min_term_bound(q: f64) -> f64 {
    q * libm::log(1.0 / q) + 2.3 * q
}

pub fn verify_fdr1_min_term<E: TrialExecutor>(
    m: usize,
    q: f64,
    trials: u64,
    seed: u64,
    exec: &E,
) -> Result<BoundCheck> {
    let estimate = fdr1_min_term_estimate(m, q, trials, seed, exec)?;
    Ok(BoundCheck::new(
        Check::Fdr1MinTerm,
        estimate,
        fdr1_min_term_bound(q),
        3.0,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use alloc::vec;
    use approx::assert_relative_eq;

    #[test]
    fn forced_unit_exponentials() {
        assert_eq!(
            submartingale_max_from_exponentials(&[1.0, 1.0, 1.0]).unwrap(),
            1.5
        );
        let mut rng = NoiseStream::scripted(vec![libm::exp(-1.0)]).unwrap();
        assert_relative_eq!(
            submartingale_max_sample(2, &mut rng).unwrap(),
            1.5,
            max_relative = 1e-15
        );
        assert!(submartingale_max_from_exponentials(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn running_max_is_at_least_last_term() {
        let mut rng = NoiseStream::from_seed(3);
        for m in [2usize, 5, 40] {
            for _ in 0..200 {
                let xi: Vec<f64> = (0..=m).map(|_| rng.next_exponential()).collect();
                let last = xi.iter().sum::<f64>() / xi[..m].iter().sum::<f64>();
                assert!(submartingale_max_from_exponentials(&xi).unwrap() >= last * (1.0 - 1e-12));
                assert!(last >= 1.0);
            }
        }
    }

    #[test]
    fn min_term_single_uniform_by_quadrature() {
        // m = 1, q = 1/2: the term is 1 on U <= 1/2 and 1/2 above, mean 3/4.
        let e = fdr1_min_term_estimate(1, 0.5, 40_000, 11, &Sequential).unwrap();
        assert!((e.mean - 0.75).abs() <= 4.0 * e.se, "{e:?}");
        assert_eq!(min_term(0.2, 1, 0.5), 1.0);
        assert_eq!(min_term(0.7, 1, 0.5), 0.5);
    }

    #[test]
    fn min_term_bound_limits() {
        assert_relative_eq!(fdr1_min_term_bound(1.0 - 1e-12), 2.3, max_relative = 1e-9);
        assert_relative_eq!(
            fdr1_min_term_bound(0.1),
            0.460_258_509_299_404_6,
            max_relative = 1e-14
        );
    }

    #[test]
    fn profile_tracks_exact_means() {
        let prof = submartingale_mean_profile(6, 20_000, 5, &Sequential).unwrap();
        assert_eq!(prof.len(), 5);
        // W_2 has infinite variance; check from j = 3 on.
        for (c, e) in prof.iter().enumerate().skip(1) {
            let j = (c + 2) as f64;
            assert!((e.mean - j / (j - 1.0)).abs() <= 4.0 * e.se, "j={j} {e:?}");
        }
    }

    #[test]
    fn estimates_are_seed_deterministic() {
        let a = submartingale_max_estimate(20, 100, 9, &Sequential).unwrap();
        let b = submartingale_max_estimate(20, 100, 9, &Sequential).unwrap();
        assert_eq!(a, b);
        assert!(a.mean >= 1.0);
    }
}
