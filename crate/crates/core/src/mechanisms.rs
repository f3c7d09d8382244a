//! Laplace-noise primitives and private selection of the `k` smallest values.
//!
//! Adjacency for the selection mechanisms is `‖x − x′‖_∞ ≤ 1`. Released values
//! always use fresh noise, never the noise that decided the selection.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{positive, unit_interval, Error, Result};
use crate::model::cmp_value_index;
use crate::noise::NoiseStream;

/// One draw from `Lap(lambda)`.
pub fn laplace_sample(lambda: f64, rng: &mut NoiseStream) -> Result<f64> {
    positive("lambda", lambda)?;
    Ok(rng.laplace(lambda))
}

/// CDF of the standard Laplace distribution.
pub fn laplace_cdf(z: f64) -> f64 {
    if z < 0.0 {
        0.5 * libm::exp(z)
    } else {
        1.0 - 0.5 * libm::exp(-z)
    }
}

/// Report Noisy Min at budget `epsilon`: the argmin of `x_i + Lap(2/ε)` and
/// the selected count plus fresh `Lap(2/ε)` noise.
pub fn report_noisy_min(x: &[f64], epsilon: f64, rng: &mut NoiseStream) -> Result<(usize, f64)> {
    if x.is_empty() {
        return Err(Error::Empty);
    }
    positive("epsilon", epsilon)?;
    let lambda = 2.0 / epsilon;
    let candidates: Vec<usize> = (0..x.len()).collect();
    let pos = noisy_argmin(x, &candidates, lambda, rng);
    let index = candidates[pos];
    Ok((index, x[index] + rng.laplace(lambda)))
}

/// Position in `candidates` of the smallest `x[i] + Lap(lambda)`, ties by index.
fn noisy_argmin(x: &[f64], candidates: &[usize], lambda: f64, rng: &mut NoiseStream) -> usize {
    let mut best = 0;
    let mut best_value = f64::INFINITY;
    let mut best_index = usize::MAX;
    for (pos, &i) in candidates.iter().enumerate() {
        let y = x[i] + rng.laplace(lambda);
        if cmp_value_index(y, i, best_value, best_index) == Ordering::Less {
            best = pos;
            best_value = y;
            best_index = i;
        }
    }
    best
}

/// Total privacy loss of `k`-fold composition of `step_epsilon`-DP mechanisms
/// under advanced composition with slack `delta`.
pub fn composition_epsilon(step_epsilon: f64, k: usize, delta: f64) -> f64 {
    let k = k as f64;
    libm::sqrt(2.0 * k * libm::log(1.0 / delta)) * step_epsilon
        + k * step_epsilon * libm::expm1(step_epsilon) / 2.0
}

/// Per-round budget whose `k`-fold advanced composition is exactly `epsilon`,
/// found by bisection to 1e-12 relative tolerance.
pub fn composition_step_epsilon(epsilon: f64, k: usize, delta: f64) -> Result<f64> {
    positive("epsilon", epsilon)?;
    unit_interval("delta", delta)?;
    if k == 0 {
        return Err(Error::Domain {
            name: "k",
            value: 0.0,
            range: "[1, m]",
        });
    }
    let mut lo = 0.0;
    let mut hi = epsilon;
    while composition_epsilon(hi, k, delta) < epsilon {
        hi *= 2.0;
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if composition_epsilon(mid, k, delta) < epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Per-round Laplace scale of the peeling mechanism for `(epsilon, delta)`.
///
/// The default scale is `2 / ε_step` with `ε_step` from
/// [`composition_step_epsilon`]; `paper_exact` uses `√(k ln(1/δ)) / ε`.
pub fn peeling_lambda(k: usize, epsilon: f64, delta: f64, paper_exact: bool) -> Result<f64> {
    if paper_exact {
        positive("epsilon", epsilon)?;
        unit_interval("delta", delta)?;
        Ok(libm::sqrt(k as f64 * libm::log(1.0 / delta)) / epsilon)
    } else {
        Ok(2.0 / composition_step_epsilon(epsilon, k, delta)?)
    }
}

/// Indices chosen by a selection mechanism, with optional released values.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyReport {
    indices: Vec<usize>,
    values: Option<Vec<f64>>,
    ordered: bool,
}

impl NoisyReport {
    /// Selected indices: in selection order for peeling, ascending for one-shot.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Released values aligned with [`indices`](Self::indices).
    pub fn values(&self) -> Option<&[f64]> {
        self.values.as_deref()
    }

    /// Whether the index order carries rank information.
    pub fn is_ordered(&self) -> bool {
        self.ordered
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `(index, value)` pairs, if values were released.
    pub fn pairs(&self) -> Option<impl Iterator<Item = (usize, f64)> + '_> {
        self.values
            .as_ref()
            .map(|v| self.indices.iter().copied().zip(v.iter().copied()))
    }
}

fn check_k(k: usize, m: usize) -> Result<()> {
    if k == 0 {
        Err(Error::Domain {
            name: "k",
            value: 0.0,
            range: "[1, m]",
        })
    } else if k > m {
        Err(Error::KTooLarge { k, m })
    } else {
        Ok(())
    }
}

/// Peeling at total budget `(epsilon, delta)` with the composition-derived
/// per-round scale.
pub fn peeling_top_k(
    x: &[f64],
    k: usize,
    epsilon: f64,
    delta: f64,
    rng: &mut NoiseStream,
) -> Result<NoisyReport> {
    check_k(k, x.len())?;
    let lambda = peeling_lambda(k, epsilon, delta, false)?;
    peeling_top_k_scaled(x, k, lambda, rng)
}

/// `k` rounds of Report Noisy Min with per-round scale `lambda`, removing each
/// winner; every released value gets fresh noise. `lambda == 0` is noiseless.
pub fn peeling_top_k_scaled(
    x: &[f64],
    k: usize,
    lambda: f64,
    rng: &mut NoiseStream,
) -> Result<NoisyReport> {
    check_k(k, x.len())?;
    check_scale(lambda)?;
    let mut remaining: Vec<usize> = (0..x.len()).collect();
    let mut indices = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);
    for _ in 0..k {
        let pos = noisy_argmin(x, &remaining, lambda, rng);
        let index = remaining.swap_remove(pos);
        indices.push(index);
        values.push(x[index] + rng.laplace(lambda));
    }
    Ok(NoisyReport {
        indices,
        values: Some(values),
        ordered: true,
    })
}

fn check_scale(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "lambda",
            value: lambda,
            range: "[0, inf)",
        })
    }
}

#[derive(Clone, Copy)]
struct Ranked {
    value: f64,
    index: usize,
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_value_index(self.value, self.index, other.value, other.index)
    }
}

/// One-shot mechanism: perturb every value once with `Lap(lambda)` and return
/// the unordered set of the `k` smallest noisy values, sorted by index.
///
/// Runs in `O(m log k)` with a bounded max-heap.
pub fn one_shot_min_k(
    x: &[f64],
    k: usize,
    lambda: f64,
    rng: &mut NoiseStream,
) -> Result<NoisyReport> {
    check_k(k, x.len())?;
    check_scale(lambda)?;
    let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(k + 1);
    for (index, &xi) in x.iter().enumerate() {
        let entry = Ranked {
            value: xi + rng.laplace(lambda),
            index,
        };
        if heap.len() < k {
            heap.push(entry);
        } else if let Some(mut top) = heap.peek_mut() {
            if entry < *top {
                *top = entry;
            }
        }
    }
    let mut indices: Vec<usize> = heap.into_iter().map(|r| r.index).collect();
    indices.sort_unstable();
    Ok(NoisyReport {
        indices,
        values: None,
        ordered: false,
    })
}

/// Noise scale of the one-shot mechanism and how it was chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneShotScale {
    pub lambda: f64,
    /// The pure-DP scale `2k/ε` was selected.
    pub pure: bool,
    /// `ε ≤ ln(m/δ)` holds; when false the scale is still returned.
    pub hypothesis_holds: bool,
}

/// Default constant in the approximate-DP one-shot scale.
pub const DEFAULT_ONE_SHOT_C: f64 = 8.0;

/// `C √(k ln(m/δ)) / ε`, replaced by the pure-DP scale `2k/ε` when
/// `k ≤ ln(m/δ)` and that is smaller.
pub fn one_shot_lambda(
    k: usize,
    m: usize,
    epsilon: f64,
    delta: f64,
    c: f64,
) -> Result<OneShotScale> {
    unit_interval("delta", delta)?;
    if m == 0 {
        return Err(Error::Empty);
    }
    let log_m_over_delta = libm::log(m as f64 / delta);
    one_shot_lambda_from_log(k, log_m_over_delta, epsilon, c)
}

/// [`one_shot_lambda`] with `ln(m/δ)` supplied directly.
pub fn one_shot_lambda_from_log(
    k: usize,
    log_m_over_delta: f64,
    epsilon: f64,
    c: f64,
) -> Result<OneShotScale> {
    positive("epsilon", epsilon)?;
    positive("C", c)?;
    positive("ln(m/delta)", log_m_over_delta)?;
    if k == 0 {
        return Err(Error::Domain {
            name: "k",
            value: 0.0,
            range: "[1, m]",
        });
    }
    let kf = k as f64;
    let approx = c * libm::sqrt(kf * log_m_over_delta) / epsilon;
    let pure = 2.0 * kf / epsilon;
    let use_pure = kf <= log_m_over_delta && pure < approx;
    Ok(OneShotScale {
        lambda: if use_pure { pure } else { approx },
        pure: use_pure,
        hypothesis_holds: epsilon <= log_m_over_delta,
    })
}

/// Scale of the fresh noise on values released after a one-shot selection.
pub fn one_shot_release_scale(k: usize, epsilon: f64, delta: f64) -> Result<f64> {
    positive("epsilon", epsilon)?;
    unit_interval("delta", delta)?;
    Ok(2.0 * libm::sqrt(2.0 * k as f64 * libm::log(2.0 / delta)) / epsilon)
}

/// Releases `x_i + Lap(2√(2k ln(2/δ))/ε)` for every selected index.
pub fn one_shot_release_values(
    x: &[f64],
    report: &NoisyReport,
    epsilon: f64,
    delta: f64,
    rng: &mut NoiseStream,
) -> Result<NoisyReport> {
    let lambda = one_shot_release_scale(report.len(), epsilon, delta)?;
    release_values_scaled(x, report, lambda, rng)
}

/// Releases `x_i + Lap(lambda)` with fresh noise for every selected index.
pub fn release_values_scaled(
    x: &[f64],
    report: &NoisyReport,
    lambda: f64,
    rng: &mut NoiseStream,
) -> Result<NoisyReport> {
    check_scale(lambda)?;
    let mut values = Vec::with_capacity(report.len());
    for &i in &report.indices {
        let xi = *x.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: x.len(),
        })?;
        values.push(xi + rng.laplace(lambda));
    }
    Ok(NoisyReport {
        indices: report.indices.clone(),
        values: Some(values),
        ordered: report.ordered,
    })
}

fn check_probabilities(q: &[f64]) -> Result<()> {
    for &qi in q {
        unit_interval("q_i", qi)?;
    }
    Ok(())
}

/// Mechanism `M(q)`: includes each index `i` independently with probability
/// `q_i`.
pub fn bernoulli_subset_mechanism(q: &[f64], rng: &mut NoiseStream) -> Result<Vec<usize>> {
    check_probabilities(q)?;
    Ok(q.iter()
        .enumerate()
        .filter_map(|(i, &qi)| (rng.next_uniform() < qi).then_some(i))
        .collect())
}

/// Probability that `M(q)` outputs exactly the indicator vector `z`.
pub fn subset_probability(q: &[f64], z: &[bool]) -> Result<f64> {
    if q.len() != z.len() {
        return Err(Error::LengthMismatch {
            left: q.len(),
            right: z.len(),
        });
    }
    check_probabilities(q)?;
    Ok(q.iter()
        .zip(z)
        .map(|(&qi, &zi)| if zi { qi } else { 1.0 - qi })
        .product())
}

/// `h(u) = (1 + u) ln(1 + u) − u`.
pub fn bennett_h(u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::Domain {
            name: "u",
            value: u,
            range: "[0, inf)",
        });
    }
    if u < 1e-3 {
        // h(u) = Σ_{n≥2} (−1)^n uⁿ / (n(n−1))
        let u2 = u * u;
        return Ok(u2 * (0.5 - u / 6.0 + u2 / 12.0 - u2 * u / 20.0));
    }
    Ok((1.0 + u) * libm::log1p(u) - u)
}

/// Bennett tail bound `exp(−σ² h(a t / σ²) / a²)`.
pub fn bennett_tail(sigma2: f64, a: f64, t: f64) -> Result<f64> {
    positive("sigma2", sigma2)?;
    positive("a", a)?;
    if !(t >= 0.0) {
        return Err(Error::Domain {
            name: "t",
            value: t,
            range: "[0, inf)",
        });
    }
    Ok(libm::exp(-sigma2 * bennett_h(a * t / sigma2)? / (a * a)))
}

/// Bound on `P(Σ Z_i ≤ k)` for independent Bernoulli(`q_i`) variables with
/// `Σ q_i ≥ (1 + t) k`: `exp(−(1 + t) h(t / (1 + t)) k)`.
pub fn poisson_binomial_floor_bound(q: &[f64], k: usize, t: f64) -> Result<f64> {
    positive("t", t)?;
    let sum: f64 = q.iter().sum();
    let kf = k as f64;
    if sum < (1.0 + t) * kf {
        return Err(Error::Precondition("sum of q_i must be at least (1 + t) k"));
    }
    Ok(libm::exp(-(1.0 + t) * bennett_h(t / (1.0 + t))? * kf))
}

/// Margin `t = 2 √(ln(m/δ) / k)` at which the floor bound drops to `δ`.
pub fn poisson_binomial_margin(m: usize, k: usize, delta: f64) -> f64 {
    2.0 * libm::sqrt(libm::log(m as f64 / delta) / k as f64)
}
