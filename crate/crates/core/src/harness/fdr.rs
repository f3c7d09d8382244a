use alloc::vec::Vec;

use super::scenario::{scenario_generate, ScenarioGenerator};
use super::Estimate;
use crate::error::{unit_interval, Error, Result};
use crate::exec::TrialExecutor;
use crate::model::{fdp_accounting, PValueVector, RejectionReport};
use crate::noise::NoiseStream;
use crate::private_fdr::{private_bhq, PrivateFdrConfig};
use crate::procedures::truncated_step_down;

/// A rejection rule the harness can score. Closures of the matching shape
/// implement it.
pub trait Procedure: Sync {
    fn reject(&self, p: &PValueVector, rng: &mut NoiseStream) -> Result<RejectionReport>;
}

impl<F> Procedure for F
where
    F: Fn(&PValueVector, &mut NoiseStream) -> Result<RejectionReport> + Sync,
{
    fn reject(&self, p: &PValueVector, rng: &mut NoiseStream) -> Result<RejectionReport> {
        self(p, rng)
    }
}

/// Monte-Carlo estimates of `E[V/R]`, `E[V/R; V >= k]` and `E[V/R; R >= k]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdrEstimate {
    pub fdr: Estimate,
    pub fdr_k: Estimate,
    pub fdr_sup_k: Estimate,
    /// Mean number of rejections.
    pub rejections: Estimate,
    pub trials: u64,
    pub k: usize,
}

struct TrialOutcome {
    fdp: f64,
    v: usize,
    r: usize,
}

fn aggregate(outcomes: &[TrialOutcome], k: usize) -> FdrEstimate {
    let gated = |keep: fn(&TrialOutcome, usize) -> bool| {
        Estimate::from_samples(
            outcomes
                .iter()
                .map(|o| if keep(o, k) { o.fdp } else { 0.0 }),
        )
    };
    FdrEstimate {
        fdr: Estimate::from_samples(outcomes.iter().map(|o| o.fdp)),
        fdr_k: gated(|o, k| o.v >= k),
        fdr_sup_k: gated(|o, k| o.r >= k),
        rejections: Estimate::from_samples(outcomes.iter().map(|o| o.r as f64)),
        trials: outcomes.len() as u64,
        k,
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

/// Runs `procedure` on `trials` draws from `gen` and scores it against the
/// labels.
pub fn simulate_fdr<P, E>(
    procedure: &P,
    gen: &ScenarioGenerator,
    trials: u64,
    k: usize,
    seed: u64,
    exec: &E,
) -> Result<FdrEstimate>
where
    P: Procedure + ?Sized,
    E: TrialExecutor,
{
    check_trials(trials)?;
    let outcomes = exec
        .map_trials(trials, |i| {
            let mut rng = NoiseStream::for_trial(seed, i);
            let p = scenario_generate(gen, &mut rng)?;
            let report = procedure.reject(&p, &mut rng)?;
            let labels = p
                .labels()
                .ok_or(Error::Precondition("scenario without labels"))?;
            let f = fdp_accounting(&report, labels)?;
            Ok(TrialOutcome {
                fdp: f.fdp,
                v: f.v,
                r: f.r,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(&outcomes, k))
}

fn check_sorted(values: &[f64]) -> Result<()> {
    for (index, &value) in values.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidPValue { index, value });
        }
    }
    if values.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Unsorted);
    }
    Ok(())
}

fn check_oracle_k(k: usize, m0: usize, m: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Domain {
            name: "k",
            value: 0.0,
            range: "[1, m0]",
        });
    }
    if m0 > m {
        return Err(Error::TooLarge {
            name: "m0",
            value: m0,
            max: m,
        });
    }
    if k > m0 {
        return Err(Error::KTooLarge { k, m: m0 });
    }
    Ok(())
}

/// Largest FDP with at least `k` false rejections that any procedure
/// adaptive to the BHq critical values can reach, given the sorted null
/// p-values: `max_{k<=j<=m0} j / max(j, ceil(m p0_(j) / q))`.
pub fn adversarial_fdp_oracle(null_sorted: &[f64], m: usize, q: f64, k: usize) -> Result<f64> {
    unit_interval("q", q)?;
    check_sorted(null_sorted)?;
    check_oracle_k(k, null_sorted.len(), m)?;
    let mf = m as f64;
    Ok((k..=null_sorted.len())
        .map(|j| {
            let needed = libm::ceil(mf * null_sorted[j - 1] / q).max(j as f64);
            j as f64 / needed
        })
        .fold(0.0, f64::max))
}

/// Largest FDP over adaptive procedures making `R >= k` rejections:
/// `max_{j>=k} min(1, #{null p <= q j / m} / j)`.
///
/// Like [`adversarial_fdp_oracle`], `j` is not capped at `m`, so this
/// dominates that oracle pointwise. The scan stops once every null p-value
/// lies below `q j / m`, after which the ratio only decreases.
pub fn adversarial_sup_k_oracle(null_sorted: &[f64], m: usize, q: f64, k: usize) -> Result<f64> {
    unit_interval("q", q)?;
    check_sorted(null_sorted)?;
    if null_sorted.len() > m {
        return Err(Error::TooLarge {
            name: "m0",
            value: null_sorted.len(),
            max: m,
        });
    }
    if k == 0 || k > m {
        return Err(Error::KTooLarge { k, m });
    }
    let m0 = null_sorted.len();
    let mut below = 0usize;
    let mut worst: f64 = 0.0;
    let mut j = 1usize;
    loop {
        let cut = q * j as f64 / m as f64;
        while below < m0 && null_sorted[below] <= cut {
            below += 1;
        }
        if j >= k {
            worst = worst.max((below as f64 / j as f64).min(1.0));
            if below == m0 {
                break;
            }
        }
        j += 1;
    }
    Ok(worst)
}

/// `q ln(1/q) + 3q`.
pub fn fdr_bound(q: f64) -> f64 {
    q * libm::log(1.0 / q) + 3.0 * q
}

/// `(1 + 2/√(qk)) q`.
pub fn fdr_sup_k_bound(q: f64, k: usize) -> f64 {
    (1.0 + 2.0 / libm::sqrt(q * k as f64)) * q
}

/// The quantity a [`BoundCheck`] row compares against its bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    Fdr,
    FdrK(usize),
    FdrSupK(usize),
    SubmartingaleMax,
    Fdr1MinTerm,
}

/// One estimate tested against a bound with `slack_se` standard errors of
/// slack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub check: Check,
    pub estimate: Estimate,
    pub bound: f64,
    pub slack_se: f64,
    pub pass: bool,
}

impl BoundCheck {
    pub fn new(check: Check, estimate: Estimate, bound: f64, slack_se: f64) -> Self {
        let pass = estimate.mean <= bound + slack_se * estimate.se;
        Self {
            check,
            estimate,
            bound,
            slack_se,
            pass,
        }
    }
}

/// Evaluates the adversarial oracles on `trials` global-null draws of `m`
/// uniforms and checks, for each `k` in `k_list`, the FDR_k mean (FDR at
/// `k = 1`) and the FDR^k mean against their bounds with 3 SE of slack.
pub fn verify_fdr_bounds<E: TrialExecutor>(
    m: usize,
    q: f64,
    k_list: &[usize],
    trials: u64,
    seed: u64,
    exec: &E,
) -> Result<Vec<BoundCheck>> {
    unit_interval("q", q)?;
    check_trials(trials)?;
    if m < 2 {
        return Err(Error::Domain {
            name: "m",
            value: m as f64,
            range: "[2, inf)",
        });
    }
    if k_list.is_empty() {
        return Err(Error::Empty);
    }
    for &k in k_list {
        check_oracle_k(k, m, m)?;
    }
    let per_trial = exec.map_trials(trials, |i| {
        let mut rng = NoiseStream::for_trial(seed, i);
        let mut u: Vec<f64> = (0..m).map(|_| rng.next_uniform()).collect();
        u.sort_unstable_by(f64::total_cmp);
        let mut row = Vec::with_capacity(2 * k_list.len());
        for &k in k_list {
            row.push(adversarial_fdp_oracle(&u, m, q, k).unwrap_or(f64::NAN));
            row.push(adversarial_sup_k_oracle(&u, m, q, k).unwrap_or(f64::NAN));
        }
        row
    });
    let mut checks = Vec::with_capacity(2 * k_list.len());
    for (c, &k) in k_list.iter().enumerate() {
        let column =
            |offset: usize| Estimate::from_samples(per_trial.iter().map(|row| row[2 * c + offset]));
        let (check, bound) = match k {
            1 => (Check::Fdr, fdr_bound(q)),
            2 => (Check::FdrK(2), 3.0 * q),
            _ => (Check::FdrK(k), fdr_sup_k_bound(q, k)),
        };
        checks.push(BoundCheck::new(check, column(0), bound, 3.0));
        checks.push(BoundCheck::new(
            Check::FdrSupK(k),
            column(1),
            fdr_sup_k_bound(q, k),
            3.0,
        ));
    }
    Ok(checks)
}

/// Private pipeline scored against labels, alongside the non-private
/// truncated step-down run on the same p-values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivateComparison {
    pub private: FdrEstimate,
    pub baseline_rejections: Estimate,
    /// Trials where the private run rejected at least as many hypotheses as
    /// truncated step-down.
    pub at_least_baseline: u64,
    pub trials: u64,
    /// `e^{η Δ_k} (q ln(1/q) + 3q)`.
    pub fdr_bound: f64,
}

impl PrivateComparison {
    pub fn at_least_baseline_frequency(&self) -> f64 {
        self.at_least_baseline as f64 / self.trials as f64
    }
}

pub fn compare_private<E: TrialExecutor>(
    gen: &ScenarioGenerator,
    config: &PrivateFdrConfig,
    trials: u64,
    seed: u64,
    exec: &E,
) -> Result<PrivateComparison> {
    check_trials(trials)?;
    let k = config.privacy.k;
    let results = exec
        .map_trials(trials, |i| {
            let mut rng = NoiseStream::for_trial(seed, i);
            let p = scenario_generate(gen, &mut rng)?;
            let baseline = truncated_step_down(&p, config.q, k)?.r();
            let report = private_bhq(&p, config, &mut rng)?;
            let labels = p
                .labels()
                .ok_or(Error::Precondition("scenario without labels"))?;
            let f = fdp_accounting(&report, labels)?;
            Ok((
                TrialOutcome {
                    fdp: f.fdp,
                    v: f.v,
                    r: f.r,
                },
                baseline,
            ))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let outcomes: Vec<TrialOutcome> = results
        .iter()
        .map(|(o, _)| TrialOutcome {
            fdp: o.fdp,
            v: o.v,
            r: o.r,
        })
        .collect();
    let at_least_baseline = results.iter().filter(|(o, b)| o.r >= *b).count() as u64;
    let eta_delta = config.privacy.eta * config.delta_k(gen.m());
    Ok(PrivateComparison {
        private: aggregate(&outcomes, 1),
        baseline_rejections: Estimate::from_samples(results.iter().map(|(_, b)| *b as f64)),
        at_least_baseline,
        trials,
        fdr_bound: libm::exp(eta_delta) * fdr_bound(config.q),
    })
}
