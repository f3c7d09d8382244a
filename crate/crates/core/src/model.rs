//! Domain types shared by every procedure: p-value vectors, BHq critical
//! values, rejection reports and privacy parameters.
//!
//! Indices are 0-based throughout the library; file and CLI boundaries
//! convert to 1-based.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{positive, unit_interval, Error, Result};

/// Ground-truth status of a hypothesis, known only in simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    TrueNull,
    FalseNull,
}

/// `m` p-values with optional null/non-null labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueVector {
    values: Vec<f64>,
    labels: Option<Vec<Label>>,
}

impl PValueVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidPValue { index, value });
            }
        }
        Ok(Self {
            values,
            labels: None,
        })
    }

    pub fn with_labels(values: Vec<f64>, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: labels.len(),
            });
        }
        let mut p = Self::new(values)?;
        p.labels = Some(labels);
        Ok(p)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[Label]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Indices in ascending p-value order, ties broken by ascending index.
    pub fn sorted_order(&self) -> Vec<usize> {
        ascending_order(&self.values)
    }
}

/// Ascending order of `values`, ties by index. `values` must be NaN-free.
pub(crate) fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_unstable_by(|&a, &b| cmp_value_index(values[a], a, values[b], b));
    order
}

#[inline]
pub(crate) fn cmp_value_index(va: f64, a: usize, vb: f64, b: usize) -> Ordering {
    va.partial_cmp(&vb)
        .unwrap_or(Ordering::Equal)
        .then(a.cmp(&b))
}

/// BHq critical value `q * j / m` for the 1-based rank `j`.
///
/// Always evaluated directly from `(q, j, m)`, never accumulated.
#[inline]
pub fn bhq_critical(q: f64, j: usize, m: usize) -> f64 {
    q * j as f64 / m as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalValues {
    q: f64,
    alphas: Vec<f64>,
}

impl CriticalValues {
    pub fn q(&self) -> f64 {
        self.q
    }

    /// `alphas()[j - 1]` is the critical value for rank `j`.
    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Critical value for `r` rejections (1-based), if defined.
    pub fn for_rank(&self, r: usize) -> Option<f64> {
        r.checked_sub(1).and_then(|i| self.alphas.get(i).copied())
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }
}

pub fn bhq_critical_values(q: f64, m: usize) -> Result<CriticalValues> {
    unit_interval("q", q)?;
    if m == 0 {
        return Err(Error::Empty);
    }
    Ok(CriticalValues {
        q,
        alphas: (1..=m).map(|j| bhq_critical(q, j, m)).collect(),
    })
}

/// Rejected hypotheses, optionally with released noisy values and the number
/// of rejected true nulls.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RejectionReport {
    rejected: Vec<usize>,
    released: BTreeMap<usize, f64>,
    false_rejections: Option<usize>,
}

impl RejectionReport {
    /// Builds a report from rejected indices; duplicates are collapsed and the
    /// set is stored in ascending order.
    pub fn new(mut rejected: Vec<usize>) -> Self {
        rejected.sort_unstable();
        rejected.dedup();
        Self {
            rejected,
            released: BTreeMap::new(),
            false_rejections: None,
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Attaches released values; every key must be a rejected index.
    pub fn with_released(mut self, released: BTreeMap<usize, f64>) -> Result<Self> {
        for &index in released.keys() {
            if self.rejected.binary_search(&index).is_err() {
                return Err(Error::Precondition(
                    "released value for a non-rejected index",
                ));
            }
        }
        self.released = released;
        Ok(self)
    }

    /// Records `V` from ground-truth labels.
    pub fn with_labels(mut self, labels: &[Label]) -> Result<Self> {
        let fdp = fdp_accounting(&self, labels)?;
        self.false_rejections = Some(fdp.v);
        Ok(self)
    }

    pub fn rejected(&self) -> &[usize] {
        &self.rejected
    }

    pub fn is_rejected(&self, index: usize) -> bool {
        self.rejected.binary_search(&index).is_ok()
    }

    pub fn released(&self) -> &BTreeMap<usize, f64> {
        &self.released
    }

    /// Number of rejections `R`.
    pub fn r(&self) -> usize {
        self.rejected.len()
    }

    /// Number of rejected true nulls `V`, when labels were attached.
    pub fn v(&self) -> Option<usize> {
        self.false_rejections
    }
}

/// `(V, R, V / max(R, 1))` for one realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fdp {
    pub v: usize,
    pub r: usize,
    pub fdp: f64,
}

pub fn fdp_accounting(report: &RejectionReport, labels: &[Label]) -> Result<Fdp> {
    let mut v = 0;
    for &index in report.rejected() {
        match labels.get(index) {
            Some(Label::TrueNull) => v += 1,
            Some(Label::FalseNull) => {}
            None => {
                return Err(Error::IndexOutOfRange {
                    index,
                    len: labels.len(),
                })
            }
        }
    }
    let r = report.r();
    Ok(Fdp {
        v,
        r,
        fdp: v as f64 / r.max(1) as f64,
    })
}

/// Whether the rejection set is adaptive to `criticals`: it is empty, or every
/// rejected p-value is at most `alpha_R`. Rejected p-values need not be the
/// `R` smallest.
pub fn is_adaptive(
    report: &RejectionReport,
    pvalues: &PValueVector,
    criticals: &CriticalValues,
) -> Result<bool> {
    let r = report.r();
    if r == 0 {
        return Ok(true);
    }
    let mut max_p = f64::NEG_INFINITY;
    for &index in report.rejected() {
        let p = *pvalues.values().get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: pvalues.len(),
        })?;
        max_p = max_p.max(p);
    }
    let alpha = criticals.for_rank(r).ok_or(Error::IndexOutOfRange {
        index: r - 1,
        len: criticals.len(),
    })?;
    Ok(max_p <= alpha)
}

/// Privacy parameters of the private FDR pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
    /// Multiplicative sensitivity of the p-values.
    pub eta: f64,
    /// Truncation level below which p-values are unconstrained.
    pub nu: f64,
    /// Maximum number of rejections.
    pub k: usize,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64, eta: f64, nu: f64, k: usize) -> Result<Self> {
        positive("epsilon", epsilon)?;
        unit_interval("delta", delta)?;
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::Domain {
                name: "eta",
                value: eta,
                range: "[0, inf)",
            });
        }
        unit_interval("nu", nu)?;
        if k == 0 {
            return Err(Error::Domain {
                name: "k",
                value: 0.0,
                range: "[1, m]",
            });
        }
        Ok(Self {
            epsilon,
            delta,
            eta,
            nu,
            k,
        })
    }

    /// Checks `k <= m` for a concrete number of hypotheses.
    pub fn check_against(&self, m: usize) -> Result<()> {
        if self.k > m {
            Err(Error::KTooLarge { k: self.k, m })
        } else {
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn critical_values_follow_direct_formula() {
        let c = bhq_critical_values(0.2, 4).unwrap();
        for (got, want) in c.alphas().iter().zip([0.05, 0.10, 0.15, 0.20]) {
            assert_relative_eq!(*got, want, max_relative = 1e-15);
        }
        assert_eq!(bhq_critical_values(0.5, 1).unwrap().alphas(), &[0.5]);
        let c = bhq_critical_values(0.1, 1000).unwrap();
        assert_relative_eq!(c.for_rank(100).unwrap(), 0.01, max_relative = 1e-15);
    }

    #[test]
    fn critical_values_reject_bad_domain() {
        assert!(matches!(
            bhq_critical_values(0.0, 3),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            bhq_critical_values(1.0, 3),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            bhq_critical_values(f64::NAN, 3),
            Err(Error::Domain { .. })
        ));
        assert_eq!(bhq_critical_values(0.1, 0), Err(Error::Empty));
    }

    #[test]
    fn fdp_examples() {
        use Label::*;
        let f = fdp_accounting(&RejectionReport::empty(), &[TrueNull, FalseNull]).unwrap();
        assert_eq!((f.v, f.r, f.fdp), (0, 0, 0.0));
        let f = fdp_accounting(&RejectionReport::new(vec![0, 1]), &[TrueNull, FalseNull]).unwrap();
        assert_eq!((f.v, f.r, f.fdp), (1, 2, 0.5));
        let f = fdp_accounting(&RejectionReport::new(vec![0, 1, 2]), &[TrueNull; 3]).unwrap();
        assert_eq!((f.v, f.r, f.fdp), (3, 3, 1.0));
    }

    #[test]
    fn fdp_missing_label_is_an_error() {
        let err = fdp_accounting(&RejectionReport::new(vec![3]), &[Label::TrueNull]).unwrap_err();
        assert_eq!(err, Error::IndexOutOfRange { index: 3, len: 1 });
    }

    #[test]
    fn adaptivity_examples() {
        let c = bhq_critical_values(0.2, 3).unwrap();
        let p = PValueVector::new(vec![0.01, 0.04, 0.9]).unwrap();
        assert!(is_adaptive(&RejectionReport::empty(), &p, &c).unwrap());
        assert!(is_adaptive(&RejectionReport::new(vec![0, 1]), &p, &c).unwrap());
        let p = PValueVector::new(vec![0.01, 0.20, 0.9]).unwrap();
        assert!(!is_adaptive(&RejectionReport::new(vec![0, 1]), &p, &c).unwrap());
    }

    #[test]
    fn adaptivity_allows_gaps() {
        let c = bhq_critical_values(0.3, 3).unwrap();
        let p = PValueVector::new(vec![0.01, 0.02, 0.15]).unwrap();
        // skips the second smallest p-value
        assert!(is_adaptive(&RejectionReport::new(vec![0, 2]), &p, &c).unwrap());
    }

    #[test]
    fn pvalue_vector_validation() {
        assert!(PValueVector::new(vec![0.0, 1.0]).is_ok());
        assert_eq!(
            PValueVector::new(vec![0.5, 1.5]),
            Err(Error::InvalidPValue {
                index: 1,
                value: 1.5
            })
        );
        assert!(PValueVector::new(vec![f64::NAN]).is_err());
        assert!(PValueVector::with_labels(vec![0.5], vec![]).is_err());
    }

    #[test]
    fn sorted_order_breaks_ties_by_index() {
        let p = PValueVector::new(vec![0.3, 0.1, 0.3, 0.1]).unwrap();
        assert_eq!(p.sorted_order(), vec![1, 3, 0, 2]);
    }

    #[test]
    fn released_keys_must_be_rejected() {
        let mut map = BTreeMap::new();
        map.insert(5, -1.0);
        assert!(RejectionReport::new(vec![1]).with_released(map).is_err());
    }

    #[test]
    fn privacy_params_validation() {
        assert!(PrivacyParams::new(1.0, 1e-6, 0.0, 1e-6, 3).is_ok());
        assert!(PrivacyParams::new(0.0, 1e-6, 0.1, 1e-6, 3).is_err());
        assert!(PrivacyParams::new(1.0, 1.0, 0.1, 1e-6, 3).is_err());
        assert!(PrivacyParams::new(1.0, 1e-6, -0.1, 1e-6, 3).is_err());
        assert!(PrivacyParams::new(1.0, 1e-6, 0.1, 0.0, 3).is_err());
        assert!(PrivacyParams::new(1.0, 1e-6, 0.1, 1e-6, 0).is_err());
        let p = PrivacyParams::new(1.0, 1e-6, 0.1, 1e-6, 3).unwrap();
        assert_eq!(p.check_against(2), Err(Error::KTooLarge { k: 3, m: 2 }));
    }

    proptest! {
        #[test]
        fn critical_values_strictly_increase(q in 0.001f64..0.999, m in 1usize..500) {
            let c = bhq_critical_values(q, m).unwrap();
            for w in c.alphas().windows(2) {
                prop_assert!(w[0] < w[1]);
            }
        }

        #[test]
        fn fdp_is_a_proportion(labels in proptest::collection::vec(any::<bool>(), 1..40),
                               picks in proptest::collection::vec(any::<prop::sample::Index>(), 0..40)) {
            let labels: Vec<Label> = labels.into_iter()
                .map(|b| if b { Label::TrueNull } else { Label::FalseNull }).collect();
            let rejected = picks.iter().map(|i| i.index(labels.len())).collect();
            let f = fdp_accounting(&RejectionReport::new(rejected), &labels).unwrap();
            prop_assert!((0.0..=1.0).contains(&f.fdp));
            prop_assert!(f.v <= f.r);
            if f.r == 0 { prop_assert_eq!(f.fdp, 0.0); }
        }

        #[test]
        fn adaptive_subsets_stay_adaptive(
            p in proptest::collection::vec(0.0f64..=1.0, 1..30),
            q in 0.01f64..0.99,
            mask in proptest::collection::vec(any::<bool>(), 30),
            sub in proptest::collection::vec(any::<bool>(), 30),
        ) {
            let m = p.len();
            let pv = PValueVector::new(p.clone()).unwrap();
            let c = bhq_critical_values(q, m).unwrap();
            let s: Vec<usize> = (0..m).filter(|&i| mask[i]).collect();
            let s_sub: Vec<usize> = s.iter().copied().filter(|&i| sub[i]).collect();
            let big = RejectionReport::new(s);
            let small = RejectionReport::new(s_sub.clone());
            let max_sub = s_sub.iter().map(|&i| p[i]).fold(f64::NEG_INFINITY, f64::max);
            if is_adaptive(&big, &pv, &c).unwrap()
                && (s_sub.is_empty() || max_sub <= c.for_rank(s_sub.len()).unwrap())
            {
                prop_assert!(is_adaptive(&small, &pv, &c).unwrap());
            }
        }
    }
}
