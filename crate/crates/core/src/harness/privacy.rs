use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::TrialExecutor;
use crate::mechanisms::one_shot_min_k;
use crate::noise::NoiseStream;

/// Largest `m` accepted by [`privacy_verify_exhaustive`].
pub const EXHAUSTIVE_MAX_M: usize = 22;

/// Total error probability shared by all confidence bands of one audit.
pub const AUDIT_ALPHA: f64 = 1e-3;

const AUDIT_MAX_M: usize = 8;
const AUDIT_MAX_K: usize = 3;
const AUDIT_CHUNKS: u64 = 64;

fn check_probabilities(q: &[f64]) -> Result<()> {
    for (index, &value) in q.iter().enumerate() {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::InvalidPValue { index, value });
        }
    }
    Ok(())
}

fn check_same_len(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::LengthMismatch { left: a, right: b })
    }
}

/// `|q_i - q'_i| <= c q_i (1 - q_i)` for every `i`. Not symmetric.
pub fn c_closeness_check(q: &[f64], q2: &[f64], c: f64) -> Result<bool> {
    check_same_len(q.len(), q2.len())?;
    check_probabilities(q)?;
    check_probabilities(q2)?;
    Ok(q.iter()
        .zip(q2)
        .all(|(&a, &b)| (a - b).abs() <= c * a * (1.0 - a)))
}

/// A pair with `q_i` uniform on `(0, 1)` and `q'_i` moved by just under
/// `c q_i (1 - q_i)` in a random direction.
pub fn random_c_close_pair(
    m: usize,
    c: f64,
    rng: &mut NoiseStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::Domain {
            name: "c",
            value: c,
            range: "(0, 1)",
        });
    }
    let mut q = Vec::with_capacity(m);
    let mut q2 = Vec::with_capacity(m);
    for _ in 0..m {
        let qi = rng.next_uniform();
        let radius = c * qi * (1.0 - qi);
        let sign = if rng.next_uniform() < 0.5 { -1.0 } else { 1.0 };
        let mut step = radius * (1.0 - 1e-9);
        // rounding near 0 or 1 can push the difference past the radius
        while ((qi + sign * step) - qi).abs() > radius
            || !(qi + sign * step > 0.0 && qi + sign * step < 1.0)
        {
            step *= 0.5;
        }
        q.push(qi);
        q2.push(qi + sign * step);
    }
    Ok((q, q2))
}

/// Exact `(ε, δ)` gaps of the mechanism `M(q)` restricted to weight-`k`
/// outputs, in both role orders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExhaustiveGap {
    /// `Σ_z max(0, P_q(z) - e^ε P_q'(z))`.
    pub forward: f64,
    /// `Σ_z max(0, P_q'(z) - e^ε P_q(z))`.
    pub backward: f64,
}

impl ExhaustiveGap {
    pub fn max(&self) -> f64 {
        self.forward.max(self.backward)
    }
}

/// Next larger integer with the same number of set bits.
fn gosper(x: u32) -> u32 {
    let c = x & x.wrapping_neg();
    let r = x + c;
    (((r ^ x) >> 2) / c) | r
}

struct LogOdds {
    base: f64,
    odds: Vec<f64>,
}

impl LogOdds {
    fn new(q: &[f64]) -> Self {
        Self {
            base: q.iter().map(|&p| libm::log1p(-p)).sum(),
            odds: q.iter().map(|&p| libm::log(p) - libm::log1p(-p)).collect(),
        }
    }

    fn prob(&self, mask: u32) -> f64 {
        let mut s = self.base;
        let mut bits = mask;
        while bits != 0 {
            s += self.odds[bits.trailing_zeros() as usize];
            bits &= bits - 1;
        }
        libm::exp(s)
    }
}

/// Enumerates every weight-`k` vector `z` and sums the excess of
/// `P_q(z) = Π q_i^{z_i} (1 - q_i)^{1 - z_i}` over `e^ε P_q'(z)`.
pub fn privacy_verify_exhaustive(
    q: &[f64],
    q2: &[f64],
    epsilon: f64,
    k: usize,
) -> Result<ExhaustiveGap> {
    check_same_len(q.len(), q2.len())?;
    let m = q.len();
    if m > EXHAUSTIVE_MAX_M {
        return Err(Error::TooLarge {
            name: "m",
            value: m,
            max: EXHAUSTIVE_MAX_M,
        });
    }
    if k == 0 {
        return Err(Error::Domain {
            name: "k",
            value: 0.0,
            range: "[1, m]",
        });
    }
    if k > m {
        return Err(Error::KTooLarge { k, m });
    }
    if !(epsilon >= 0.0) {
        return Err(Error::Domain {
            name: "epsilon",
            value: epsilon,
            range: "[0, inf)",
        });
    }
    check_probabilities(q)?;
    check_probabilities(q2)?;
    let a = LogOdds::new(q);
    let b = LogOdds::new(q2);
    let scale = libm::exp(epsilon);
    let limit = 1u32 << m;
    let mut mask = (1u32 << k) - 1;
    let mut gap = ExhaustiveGap {
        forward: 0.0,
        backward: 0.0,
    };
    while mask < limit {
        let (pa, pb) = (a.prob(mask), b.prob(mask));
        gap.forward += (pa - scale * pb).max(0.0);
        gap.backward += (pb - scale * pa).max(0.0);
        if mask == limit - 1 {
            break;
        }
        mask = gosper(mask);
    }
    Ok(gap)
}

/// Sampling-audit verdict for a target `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// One direction of a sampling audit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditResult {
    /// Plug-in `Σ_S max(0, P̂(S) - e^ε P̂'(S))`.
    pub delta_hat: f64,
    /// `upper - delta_hat`.
    pub half_width: f64,
    /// Smallest `δ` consistent with every confidence band.
    pub lower: f64,
    /// Largest `δ` consistent with every confidence band.
    pub upper: f64,
    pub verdict: Verdict,
}

/// Both role orders of a one-shot audit over shared samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub forward: AuditResult,
    pub backward: AuditResult,
    /// Empirical probability of each `k`-subset, in lexicographic
    /// bit-mask order, under `x` and under `x'`.
    pub frequencies: (Vec<f64>, Vec<f64>),
    pub samples: u64,
}

impl AuditReport {
    /// `Fail` if either direction fails, `Pass` if both pass.
    pub fn verdict(&self) -> Verdict {
        match (self.forward.verdict, self.backward.verdict) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Pass, Verdict::Pass) => Verdict::Pass,
            _ => Verdict::Inconclusive,
        }
    }
}

fn subset_table(m: usize, k: usize) -> (Vec<u32>, Vec<usize>) {
    let mut masks = Vec::new();
    let mut rank = vec![usize::MAX; 1 << m];
    let limit = 1u32 << m;
    let mut mask = (1u32 << k) - 1;
    while mask < limit {
        rank[mask as usize] = masks.len();
        masks.push(mask);
        if mask == limit - 1 {
            break;
        }
        mask = gosper(mask);
    }
    (masks, rank)
}

#[allow(clippy::too_many_arguments)]
fn count_subsets<E: TrialExecutor>(
    x: &[f64],
    k: usize,
    lambda: f64,
    samples: u64,
    seed: u64,
    rank: &[usize],
    n_subsets: usize,
    exec: &E,
) -> Result<Vec<u64>> {
    let chunks = AUDIT_CHUNKS.min(samples);
    let partial = exec.map_trials(chunks, |c| -> Result<Vec<u64>> {
        let mut rng = NoiseStream::for_trial(seed, c);
        let size = samples / chunks + u64::from(c < samples % chunks);
        let mut counts = vec![0u64; n_subsets];
        for _ in 0..size {
            let chosen = one_shot_min_k(x, k, lambda, &mut rng)?;
            let mask = chosen.indices().iter().fold(0usize, |acc, &i| acc | 1 << i);
            counts[rank[mask]] += 1;
        }
        Ok(counts)
    });
    let mut total = vec![0u64; n_subsets];
    for counts in partial {
        for (t, c) in total.iter_mut().zip(counts?) {
            *t += c;
        }
    }
    Ok(total)
}

/// Maurer–Pontil empirical Bernstein width for a mean of `n` indicators.
fn bernstein_width(p_hat: f64, n: f64, log_term: f64) -> f64 {
    let var = p_hat * (1.0 - p_hat) * n / (n - 1.0);
    libm::sqrt(2.0 * var * log_term / n) + 7.0 * log_term / (3.0 * (n - 1.0))
}

fn direction(
    p: &[f64],
    wp: &[f64],
    p2: &[f64],
    wp2: &[f64],
    scale: f64,
    delta: f64,
) -> AuditResult {
    let mut delta_hat = 0.0;
    let mut lower = 0.0;
    let mut upper = 0.0;
    for i in 0..p.len() {
        delta_hat += (p[i] - scale * p2[i]).max(0.0);
        upper += ((p[i] + wp[i]).min(1.0) - scale * (p2[i] - wp2[i]).max(0.0)).max(0.0);
        lower += ((p[i] - wp[i]).max(0.0) - scale * (p2[i] + wp2[i]).min(1.0)).max(0.0);
    }
    let verdict = if upper <= delta {
        Verdict::Pass
    } else if lower > delta {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    AuditResult {
        delta_hat,
        half_width: upper - delta_hat,
        lower,
        upper,
        verdict,
    }
}

/// Estimates the probability of every `k`-subset output by the one-shot
/// mechanism on `x` and on `x'` (`samples` runs each) and bounds the
/// `(ε, δ)` gap in both directions.
///
/// Each subset frequency gets an empirical Bernstein band; the `4N` one-sided
/// events over `N` subsets and two inputs share [`AUDIT_ALPHA`] by a union
/// bound, so every reported interval holds simultaneously with probability at
/// least `1 - AUDIT_ALPHA`.
#[allow(clippy::too_many_arguments)]
pub fn privacy_audit_one_shot<E: TrialExecutor>(
    x: &[f64],
    x2: &[f64],
    k: usize,
    lambda: f64,
    epsilon: f64,
    delta: f64,
    samples: u64,
    seed: u64,
    exec: &E,
) -> Result<AuditReport> {
    check_same_len(x.len(), x2.len())?;
    let m = x.len();
    if m > AUDIT_MAX_M {
        return Err(Error::TooLarge {
            name: "m",
            value: m,
            max: AUDIT_MAX_M,
        });
    }
    if k > AUDIT_MAX_K {
        return Err(Error::TooLarge {
            name: "k",
            value: k,
            max: AUDIT_MAX_K,
        });
    }
    if k == 0 || k > m {
        return Err(Error::KTooLarge { k, m });
    }
    for (index, (a, b)) in x.iter().zip(x2).enumerate() {
        let distance = (a - b).abs();
        if !(distance <= 1.0) {
            return Err(Error::NotAdjacent { index, distance });
        }
    }
    if samples < 2 {
        return Err(Error::Domain {
            name: "samples",
            value: samples as f64,
            range: "[2, inf)",
        });
    }
    let (masks, rank) = subset_table(m, k);
    let n_subsets = masks.len();
    let seed2 = crate::noise::mix64(seed ^ 0xA5A5_A5A5_A5A5_A5A5);
    let cx = count_subsets(x, k, lambda, samples, seed, &rank, n_subsets, exec)?;
    let cx2 = count_subsets(x2, k, lambda, samples, seed2, &rank, n_subsets, exec)?;

    let n = samples as f64;
    let log_term = libm::log(2.0 * 4.0 * n_subsets as f64 / AUDIT_ALPHA);
    let freq = |c: &[u64]| c.iter().map(|&v| v as f64 / n).collect::<Vec<f64>>();
    let (p, p2) = (freq(&cx), freq(&cx2));
    let w = |p: &[f64]| {
        p.iter()
            .map(|&v| bernstein_width(v, n, log_term))
            .collect::<Vec<f64>>()
    };
    let (wp, wp2) = (w(&p), w(&p2));
    let scale = libm::exp(epsilon);
    Ok(AuditReport {
        forward: direction(&p, &wp, &p2, &wp2, scale, delta),
        backward: direction(&p2, &wp2, &p, &wp, scale, delta),
        frequencies: (p, p2),
        samples,
    })
}

/// Exact distribution of `Σ Z_i` for independent Bernoulli(`q_i`).
pub fn poisson_binomial_pmf(q: &[f64]) -> Result<Vec<f64>> {
    for (index, &value) in q.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidPValue { index, value });
        }
    }
    let mut pmf = vec![0.0; q.len() + 1];
    pmf[0] = 1.0;
    for (n, &p) in q.iter().enumerate() {
        for j in (1..=n + 1).rev() {
            pmf[j] = pmf[j] * (1.0 - p) + pmf[j - 1] * p;
        }
        pmf[0] *= 1.0 - p;
    }
    Ok(pmf)
}

/// `P(Σ Z_i <= k)`.
pub fn poisson_binomial_cdf(q: &[f64], k: usize) -> Result<f64> {
    let pmf = poisson_binomial_pmf(q)?;
    Ok(pmf.iter().take(k + 1).sum::<f64>().min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::mechanisms::{poisson_binomial_floor_bound, subset_probability};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn closeness_examples() {
        assert!(c_closeness_check(&[0.3, 0.7], &[0.3, 0.7], 0.0).unwrap());
        assert!(c_closeness_check(&[0.5], &[0.6], 0.4).unwrap());
        assert!(!c_closeness_check(&[0.5], &[0.6], 0.39).unwrap());
        assert!(c_closeness_check(&[0.5], &[0.6, 0.1], 0.4).is_err());
        assert!(c_closeness_check(&[0.0], &[0.1], 0.4).is_err());
    }

    #[test]
    fn random_pairs_are_close() {
        let mut rng = NoiseStream::from_seed(4);
        for _ in 0..100 {
            let (q, q2) = random_c_close_pair(12, 0.03, &mut rng).unwrap();
            assert!(c_closeness_check(&q, &q2, 0.03).unwrap());
        }
    }

    #[test]
    fn gosper_walks_all_weight_k_masks() {
        let (masks, _) = subset_table(6, 2);
        assert_eq!(masks.len(), 15);
        assert!(masks.windows(2).all(|w| w[0] < w[1]));
        assert!(masks.iter().all(|m| m.count_ones() == 2));
        assert_eq!(subset_table(3, 3).0, vec![7]);
    }

    #[test]
    fn exhaustive_examples() {
        let q = [0.2, 0.4, 0.7];
        let g = privacy_verify_exhaustive(&q, &q, 0.0, 2).unwrap();
        assert_eq!((g.forward, g.backward), (0.0, 0.0));
        let g = privacy_verify_exhaustive(&[0.5], &[0.6], 0.0, 1).unwrap();
        assert_eq!(g.forward, 0.0);
        assert_relative_eq!(g.backward, 0.1, max_relative = 1e-12);
        assert!(privacy_verify_exhaustive(&[0.5; 23], &[0.5; 23], 1.0, 1).is_err());
        assert!(privacy_verify_exhaustive(&[0.5; 2], &[0.5; 2], 1.0, 3).is_err());
    }

    #[test]
    fn exhaustive_matches_direct_enumeration() {
        let q = [0.1, 0.35, 0.5, 0.8, 0.6];
        let q2 = [0.12, 0.3, 0.55, 0.75, 0.62];
        let eps = 0.05;
        let mut forward = 0.0;
        for mask in 0u32..32 {
            if mask.count_ones() != 2 {
                continue;
            }
            let z: Vec<bool> = (0..5).map(|i| mask >> i & 1 == 1).collect();
            let a = subset_probability(&q, &z).unwrap();
            let b = subset_probability(&q2, &z).unwrap();
            forward += (a - libm::exp(eps) * b).max(0.0);
        }
        let g = privacy_verify_exhaustive(&q, &q2, eps, 2).unwrap();
        assert_relative_eq!(g.forward, forward, max_relative = 1e-12);
    }

    #[test]
    fn pmf_matches_binomial_and_floor_bound() {
        let pmf = poisson_binomial_pmf(&[0.5; 4]).unwrap();
        for (got, want) in pmf.iter().zip([1.0, 4.0, 6.0, 4.0, 1.0]) {
            assert_relative_eq!(*got, want / 16.0, max_relative = 1e-15);
        }
        let q = vec![0.5; 30];
        let exact = poisson_binomial_cdf(&q, 10).unwrap();
        assert!(exact <= poisson_binomial_floor_bound(&q, 10, 0.5).unwrap());
        assert_eq!(poisson_binomial_cdf(&q, 30).unwrap(), 1.0);
    }

    #[test]
    fn audit_identical_inputs_is_within_band() {
        let x = [3.0; 5];
        let r = privacy_audit_one_shot(&x, &x, 2, 1.0, 0.0, 0.5, 20_000, 1, &Sequential).unwrap();
        assert!(r.forward.delta_hat <= r.forward.half_width);
        assert!(r.forward.lower == 0.0);
        assert_eq!(r.frequencies.0.len(), 10);
    }

    #[test]
    fn audit_detects_a_blatant_violation() {
        // Noiseless selection is deterministic, so δ is 1 at any ε.
        let x = [0.0, 1.0, 1.0, 1.0];
        let x2 = [1.0, 1.0, 0.0, 1.0];
        let r = privacy_audit_one_shot(&x, &x2, 1, 0.0, 1.0, 0.1, 1000, 2, &Sequential).unwrap();
        assert_eq!(r.verdict(), Verdict::Fail);
        assert_eq!(r.forward.delta_hat, 1.0);
    }

    #[test]
    fn audit_validation() {
        assert!(matches!(
            privacy_audit_one_shot(
                &[0.0, 0.0],
                &[2.0, 0.0],
                1,
                1.0,
                1.0,
                0.1,
                10,
                0,
                &Sequential
            ),
            Err(Error::NotAdjacent { index: 0, .. })
        ));
        assert!(
            privacy_audit_one_shot(&[0.0; 9], &[0.0; 9], 1, 1.0, 1.0, 0.1, 10, 0, &Sequential)
                .is_err()
        );
        assert!(
            privacy_audit_one_shot(&[0.0; 6], &[0.0; 6], 4, 1.0, 1.0, 0.1, 10, 0, &Sequential)
                .is_err()
        );
    }

    proptest! {
        #[test]
        fn exhaustive_gap_nonincreasing_in_epsilon(
            pairs in proptest::collection::vec((0.01f64..0.99, 0.01f64..0.99), 3..8),
            k in 1usize..4,
            e1 in 0.0f64..2.0,
            de in 0.0f64..2.0,
        ) {
            let q: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let q2: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let k = k.min(q.len());
            let a = privacy_verify_exhaustive(&q, &q2, e1, k).unwrap();
            let b = privacy_verify_exhaustive(&q, &q2, e1 + de, k).unwrap();
            prop_assert!(b.forward <= a.forward + 1e-15);
            prop_assert!(b.backward <= a.backward + 1e-15);
        }

        #[test]
        fn pmf_sums_to_one(q in proptest::collection::vec(0.0f64..=1.0, 0..30)) {
            let total: f64 = poisson_binomial_pmf(&q).unwrap().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
