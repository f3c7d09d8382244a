//! One-sided p-values from bounded per-individual statistics under a normal
//! approximation, and multiplicative-sensitivity bookkeeping.
//!
//! The audit treats adjacency as replacement of one row, which moves each
//! column sum by at most `2B`.

use alloc::vec::Vec;

use crate::error::{positive, unit_interval, Error, Result};
use crate::model::PValueVector;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const TAIL_SWITCH: f64 = 8.0;
const CF_TERMS: u32 = 300;

/// Null model shared by every column: bound `B` on each entry, mean `μ` and
/// standard deviation `σ` of an entry under the null.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullModel {
    pub bound: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl NullModel {
    pub fn new(bound: f64, mu: f64, sigma: f64) -> Result<Self> {
        positive("B", bound)?;
        positive("sigma", sigma)?;
        if !mu.is_finite() {
            return Err(Error::Domain {
                name: "mu",
                value: mu,
                range: "finite",
            });
        }
        Ok(Self { bound, mu, sigma })
    }
}

/// `n` rows by `m` columns of bounded statistics, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticDataset {
    n: usize,
    m: usize,
    data: Vec<f64>,
    model: NullModel,
}

impl StatisticDataset {
    pub fn from_rows(rows: &[Vec<f64>], model: NullModel) -> Result<Self> {
        let m = rows.first().ok_or(Error::Empty)?.len();
        let mut data = Vec::with_capacity(rows.len() * m);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != m {
                return Err(Error::RaggedRow {
                    row,
                    expected: m,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(rows.len(), m, data, model)
    }

    pub fn from_flat(n: usize, m: usize, data: Vec<f64>, model: NullModel) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Empty);
        }
        if data.len() != n * m {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: n * m,
            });
        }
        for &value in &data {
            if !(value.abs() <= model.bound) {
                return Err(Error::Domain {
                    name: "entry",
                    value,
                    range: "[-B, B]",
                });
            }
        }
        Ok(Self { n, m, data, model })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn model(&self) -> &NullModel {
        &self.model
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn get(&self, row: usize, column: usize) -> f64 {
        self.data[row * self.m + column]
    }

    /// P-values of every column.
    pub fn pvalues(&self) -> Result<PValueVector> {
        let NullModel { mu, sigma, .. } = self.model;
        let p = column_sums(self)
            .into_iter()
            .map(|t| pvalue_from_sum(t, self.n, mu, sigma))
            .collect::<Result<Vec<_>>>()?;
        PValueVector::new(p)
    }
}

/// Per-column sums, accumulated row by row in a fixed order.
pub fn column_sums(data: &StatisticDataset) -> Vec<f64> {
    let mut sums = alloc::vec![0.0; data.m];
    for i in 0..data.n {
        for (s, v) in sums.iter_mut().zip(data.row(i)) {
            *s += v;
        }
    }
    sums
}

/// Upper tail `Φ(-z)` of the standard normal.
pub fn normal_sf(z: f64) -> f64 {
    if z > TAIL_SWITCH {
        libm::exp(log_normal_sf(z))
    } else {
        0.5 * libm::erfc(z * core::f64::consts::FRAC_1_SQRT_2)
    }
}

/// `ln Φ(-z)`, accurate far into the upper tail.
pub fn log_normal_sf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z > TAIL_SWITCH {
        // Mills ratio by its continued fraction, evaluated from the tail.
        let mut t = z;
        for n in (1..=CF_TERMS).rev() {
            t = z + n as f64 / t;
        }
        -0.5 * z * z - LN_SQRT_2PI - libm::log(t)
    } else if z < 0.0 {
        libm::log1p(-0.5 * libm::erfc(-z * core::f64::consts::FRAC_1_SQRT_2))
    } else {
        libm::log(0.5 * libm::erfc(z * core::f64::consts::FRAC_1_SQRT_2))
    }
}

fn standardized(t: f64, n: usize, mu: f64, sigma: f64) -> Result<f64> {
    positive("sigma", sigma)?;
    if n == 0 {
        return Err(Error::Empty);
    }
    let n = n as f64;
    Ok((t - n * mu) / (libm::sqrt(n) * sigma))
}

/// `Φ(-(T - nμ) / (√n σ))`.
pub fn pvalue_from_sum(t: f64, n: usize, mu: f64, sigma: f64) -> Result<f64> {
    standardized(t, n, mu, sigma).map(normal_sf)
}

/// Natural log of [`pvalue_from_sum`], finite wherever the statistic is.
pub fn log_pvalue_from_sum(t: f64, n: usize, mu: f64, sigma: f64) -> Result<f64> {
    standardized(t, n, mu, sigma).map(log_normal_sf)
}

/// `η = B √(2 ln(1/ν) / n) / σ`.
pub fn multiplicative_sensitivity(bound: f64, sigma: f64, n: usize, nu: f64) -> Result<f64> {
    positive("B", bound)?;
    positive("sigma", sigma)?;
    unit_interval("nu", nu)?;
    if n == 0 {
        return Err(Error::Empty);
    }
    Ok(bound * libm::sqrt(2.0 * libm::log(1.0 / nu) / n as f64) / sigma)
}

/// True iff every coordinate pair is either jointly below `ν` or within a
/// factor `e^η` of each other.
pub fn are_eta_nu_neighbors(
    p: &PValueVector,
    p2: &PValueVector,
    eta: f64,
    nu: f64,
) -> Result<bool> {
    if p.len() != p2.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: p2.len(),
        });
    }
    Ok(p.values().iter().zip(p2.values()).all(|(&a, &b)| {
        if a < nu && b < nu {
            return true;
        }
        if a == b {
            return true;
        }
        if a == 0.0 || b == 0.0 {
            return false;
        }
        (libm::log(a) - libm::log(b)).abs() <= eta
    }))
}

/// Outcome of [`empirical_sensitivity_audit`].
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityAudit {
    /// Largest observed `|ln(p'/p)|` over all columns.
    pub eta_hat: f64,
    pub eta_formula: f64,
    pub within_formula: bool,
    /// Per-column maxima; 0 where no replacement kept both values above `ν`.
    pub column_eta: Vec<f64>,
}

/// Replaces every row in turn by the all-`+B` and all-`-B` extremes and
/// records the largest log-ratio of p-values that stay at or above `ν`.
pub fn empirical_sensitivity_audit(data: &StatisticDataset, nu: f64) -> Result<SensitivityAudit> {
    unit_interval("nu", nu)?;
    if data.n < 2 {
        return Err(Error::Domain {
            name: "n",
            value: data.n as f64,
            range: "[2, inf)",
        });
    }
    let NullModel { bound, mu, sigma } = data.model;
    let ln_nu = libm::log(nu);
    let sums = column_sums(data);
    let mut column_eta = Vec::with_capacity(data.m);
    let mut distinct = Vec::with_capacity(data.n);
    for (j, &t) in sums.iter().enumerate() {
        let base = log_pvalue_from_sum(t, data.n, mu, sigma)?;
        if base < ln_nu {
            column_eta.push(0.0);
            continue;
        }
        distinct.clear();
        distinct.extend((0..data.n).map(|i| data.get(i, j)));
        distinct.sort_unstable_by(f64::total_cmp);
        distinct.dedup();
        let mut worst: f64 = 0.0;
        for &old in &distinct {
            for replacement in [bound, -bound] {
                let lp = log_pvalue_from_sum(t - old + replacement, data.n, mu, sigma)?;
                if lp >= ln_nu {
                    worst = worst.max((lp - base).abs());
                }
            }
        }
        column_eta.push(worst);
    }
    let eta_hat = column_eta.iter().copied().fold(0.0, f64::max);
    let eta_formula = multiplicative_sensitivity(bound, sigma, data.n, nu)?;
    Ok(SensitivityAudit {
        eta_hat,
        eta_formula,
        within_formula: eta_hat <= eta_formula,
        column_eta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn model(b: f64, mu: f64, sigma: f64) -> NullModel {
        NullModel::new(b, mu, sigma).unwrap()
    }

    // Asymptotic Mills series (1/z) Σ (-1)^n (2n-1)!! / z^{2n}, cut at the
    // smallest term with half of that term added back.
    fn mills_series_log_sf(z: f64) -> f64 {
        let z2 = z * z;
        let mut term = 1.0;
        let mut sum = 0.0;
        let mut n = 1.0;
        loop {
            let next = -term * (2.0 * n - 1.0) / z2;
            if next.abs() >= term.abs() {
                sum += 0.5 * term;
                break;
            }
            sum += term;
            term = next;
            n += 1.0;
        }
        -0.5 * z2 - LN_SQRT_2PI - libm::log(z) + libm::log(sum)
    }

    #[test]
    fn column_sum_examples() {
        let d = StatisticDataset::from_rows(
            &[vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]],
            model(1.0, 0.5, 0.5),
        )
        .unwrap();
        assert_eq!(column_sums(&d), vec![2.0, 2.0]);
        let removed =
            StatisticDataset::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], model(1.0, 0.5, 0.5))
                .unwrap();
        let diff: f64 = column_sums(&d)
            .iter()
            .zip(column_sums(&removed))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert_eq!(diff, 1.0);
        let zeros = StatisticDataset::from_flat(4, 3, vec![0.0; 12], model(1.0, 0.0, 1.0)).unwrap();
        assert_eq!(column_sums(&zeros), vec![0.0; 3]);
    }

    #[test]
    fn dataset_validation() {
        let m = model(1.0, 0.0, 1.0);
        assert!(matches!(
            StatisticDataset::from_rows(&[vec![0.0, 0.0], vec![0.0]], m),
            Err(Error::RaggedRow {
                row: 1,
                expected: 2,
                found: 1
            })
        ));
        assert!(StatisticDataset::from_rows(&[vec![1.5]], m).is_err());
        assert!(StatisticDataset::from_rows(&[vec![f64::NAN]], m).is_err());
        assert!(StatisticDataset::from_rows(&[], m).is_err());
        assert!(NullModel::new(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn pvalue_examples() {
        assert_eq!(pvalue_from_sum(50.0, 100, 0.5, 0.3).unwrap(), 0.5);
        let z = 1.959_963_984_540_054;
        assert_relative_eq!(
            pvalue_from_sum(z, 1, 0.0, 1.0).unwrap(),
            0.025,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            normal_sf(10.0),
            7.619_853_024_160_526e-24,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            normal_sf(10.0),
            libm::exp(mills_series_log_sf(10.0)),
            max_relative = 1e-6
        );
        assert!(pvalue_from_sum(1.0, 1, 0.0, 0.0).is_err());
    }

    #[test]
    fn tail_matches_high_precision_values() {
        let cases = [
            (5.0, -15.064_998_393_988_725),
            (10.0, -53.231_285_150_512_47),
            (20.0, -203.917_155_371_097_26),
            (30.0, -454.321_243_956_343_2),
            (37.5, -707.668_989_317_507_2),
        ];
        for (z, want) in cases {
            assert_relative_eq!(log_normal_sf(z), want, max_relative = 1e-13);
        }
        assert_relative_eq!(
            normal_sf(8.0),
            6.220_960_574_271_784e-16,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            normal_sf(37.5),
            4.605_353_009_581_955e-308,
            max_relative = 1e-10
        );
        assert_relative_eq!(
            normal_sf(5.0),
            2.866_515_718_791_939e-7,
            max_relative = 1e-13
        );
    }

    #[test]
    fn tail_branches_agree_at_the_switch() {
        let below = libm::log(0.5 * libm::erfc(TAIL_SWITCH * core::f64::consts::FRAC_1_SQRT_2));
        let above = log_normal_sf(TAIL_SWITCH + 1e-12);
        assert_relative_eq!(below, above, max_relative = 1e-12);
    }

    #[test]
    fn series_oracle_agrees_in_far_tail() {
        for z in [12.0, 15.0, 25.0, 50.0, 100.0] {
            assert_relative_eq!(
                log_normal_sf(z),
                mills_series_log_sf(z),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn lower_tail_is_log_of_near_one() {
        assert_relative_eq!(
            log_normal_sf(-10.0),
            -7.619_853_024_160_526e-24,
            max_relative = 1e-10
        );
        assert_eq!(log_normal_sf(-40.0), 0.0);
    }

    #[test]
    fn sensitivity_examples() {
        assert_relative_eq!(
            multiplicative_sensitivity(1.0, 1.0, 2, libm::exp(-1.0)).unwrap(),
            1.0,
            max_relative = 1e-15
        );
        let a = multiplicative_sensitivity(1.0, 0.5, 100, 1e-6).unwrap();
        let b = multiplicative_sensitivity(1.0, 0.5, 400, 1e-6).unwrap();
        assert_eq!(a, 2.0 * b);
        assert_relative_eq!(
            multiplicative_sensitivity(1.0, 0.5, 10_000, 1e-6).unwrap(),
            0.105_130_435_395_138_64,
            max_relative = 1e-14
        );
        assert!(multiplicative_sensitivity(1.0, 0.5, 10, 1.0).is_err());
    }

    #[test]
    fn neighbor_examples() {
        let pv = |v: &[f64]| PValueVector::new(v.to_vec()).unwrap();
        let p = pv(&[0.3, 0.0, 1.0]);
        assert!(are_eta_nu_neighbors(&p, &p, 0.0, 1e-6).unwrap());
        assert!(are_eta_nu_neighbors(&pv(&[0.01]), &pv(&[0.0105]), 0.05, 1e-6).unwrap());
        assert!(!are_eta_nu_neighbors(&pv(&[0.01]), &pv(&[0.0106]), 0.05, 1e-6).unwrap());
        assert!(are_eta_nu_neighbors(&pv(&[1e-9]), &pv(&[1e-7]), 0.1, 1e-6).unwrap());
        assert!(!are_eta_nu_neighbors(&pv(&[0.0]), &pv(&[1e-3]), 5.0, 1e-6).unwrap());
        assert!(are_eta_nu_neighbors(&pv(&[0.1]), &pv(&[0.1, 0.2]), 1.0, 0.5).is_err());
    }

    #[test]
    fn audit_two_rows_by_hand() {
        // T = 1, n = 2: p = 1/2. Replacing the zero row by +1 gives
        // z = √2 and p' = erfc(1)/2, the worst case.
        let d = StatisticDataset::from_rows(&[vec![0.0], vec![1.0]], model(1.0, 0.5, 0.5)).unwrap();
        let audit = empirical_sensitivity_audit(&d, 1e-8).unwrap();
        let erfc1 = 0.157_299_207_050_285_13;
        assert_relative_eq!(audit.eta_hat, -libm::log(erfc1), max_relative = 1e-12);
        assert_eq!(audit.column_eta.len(), 1);
    }

    #[test]
    fn audit_of_constant_dataset_is_finite() {
        let d = StatisticDataset::from_flat(50, 3, vec![0.5; 150], model(1.0, 0.5, 0.5)).unwrap();
        assert_eq!(d.pvalues().unwrap().values(), &[0.5, 0.5, 0.5]);
        let audit = empirical_sensitivity_audit(&d, 1e-8).unwrap();
        assert!(audit.eta_hat.is_finite() && audit.eta_hat > 0.0);
        let single = StatisticDataset::from_flat(1, 1, vec![0.0], model(1.0, 0.0, 1.0)).unwrap();
        assert!(empirical_sensitivity_audit(&single, 1e-8).is_err());
    }

    #[test]
    fn audit_skips_columns_below_truncation() {
        let d = StatisticDataset::from_flat(4, 1, vec![1.0; 4], model(1.0, 0.0, 0.1)).unwrap();
        let audit = empirical_sensitivity_audit(&d, 1e-6).unwrap();
        assert_eq!(audit.column_eta, vec![0.0]);
    }

    proptest! {
        #[test]
        fn pvalue_is_strictly_decreasing(t in -300.0f64..300.0, step in 1e-3f64..10.0) {
            let a = log_pvalue_from_sum(t, 400, 0.1, 0.7).unwrap();
            let b = log_pvalue_from_sum(t + step, 400, 0.1, 0.7).unwrap();
            prop_assert!(b < a);
        }

        #[test]
        fn neighbors_symmetric_and_monotone(
            pairs in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..10),
            eta in 0.0f64..2.0,
            nu in 1e-6f64..0.5,
        ) {
            let p = PValueVector::new(pairs.iter().map(|x| x.0).collect()).unwrap();
            let p2 = PValueVector::new(pairs.iter().map(|x| x.1).collect()).unwrap();
            let fwd = are_eta_nu_neighbors(&p, &p2, eta, nu).unwrap();
            prop_assert_eq!(fwd, are_eta_nu_neighbors(&p2, &p, eta, nu).unwrap());
            if fwd {
                prop_assert!(are_eta_nu_neighbors(&p, &p2, eta * 1.5 + 0.1, nu).unwrap());
                prop_assert!(are_eta_nu_neighbors(&p, &p2, eta, (nu * 1.5).min(0.99)).unwrap());
            }
        }
    }
}
