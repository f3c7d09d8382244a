//! Non-private BHq procedures.

use alloc::vec::Vec;

use crate::error::{unit_interval, Error, Result};
use crate::model::{bhq_critical, PValueVector, RejectionReport};

/// Step-up BHq: the largest `j` with `p_(j) <= q j / m` determines the
/// rejection of the `j` smallest p-values.
pub fn step_up_bhq(p: &PValueVector, q: f64) -> Result<RejectionReport> {
    unit_interval("q", q)?;
    let m = p.len();
    let order = p.sorted_order();
    let values = p.values();
    let cut = (1..=m)
        .rev()
        .find(|&j| values[order[j - 1]] <= bhq_critical(q, j, m))
        .unwrap_or(0);
    finish(p, order[..cut].to_vec())
}

/// Step-down BHq: rejects in ascending order while `p_(j) <= q j / m`.
pub fn step_down_bhq(p: &PValueVector, q: f64) -> Result<RejectionReport> {
    step_down_limited(p, q, p.len())
}

/// Step-down BHq stopped after at most `k` rejections.
pub fn truncated_step_down(p: &PValueVector, q: f64, k: usize) -> Result<RejectionReport> {
    if k == 0 {
        return Err(Error::Domain {
            name: "k",
            value: 0.0,
            range: "[1, m]",
        });
    }
    if k > p.len() {
        return Err(Error::KTooLarge { k, m: p.len() });
    }
    step_down_limited(p, q, k)
}

fn step_down_limited(p: &PValueVector, q: f64, limit: usize) -> Result<RejectionReport> {
    unit_interval("q", q)?;
    let m = p.len();
    let order = p.sorted_order();
    let values = p.values();
    let cut = (1..=limit.min(m))
        .take_while(|&j| values[order[j - 1]] <= bhq_critical(q, j, m))
        .count();
    finish(p, order[..cut].to_vec())
}

fn finish(p: &PValueVector, rejected: Vec<usize>) -> Result<RejectionReport> {
    let report = RejectionReport::new(rejected);
    match p.labels() {
        Some(labels) => report.with_labels(labels),
        None => Ok(report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{bhq_critical_values, is_adaptive, Label};
    use alloc::vec;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> PValueVector {
        PValueVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn step_up_examples() {
        let r = step_up_bhq(&pv(&[0.01, 0.04, 0.30, 0.50]), 0.2).unwrap();
        assert_eq!(r.rejected(), &[0, 1]);
        assert_eq!(r.r(), 2);
        assert_eq!(step_up_bhq(&pv(&[1.0, 1.0, 1.0]), 0.5).unwrap().r(), 0);
        assert_eq!(
            step_up_bhq(&pv(&[0.0, 0.0]), 0.1).unwrap().rejected(),
            &[0, 1]
        );
    }

    #[test]
    fn step_down_examples() {
        let p = pv(&[0.16, 0.25]);
        assert_eq!(step_down_bhq(&p, 0.3).unwrap().r(), 0);
        assert_eq!(step_up_bhq(&p, 0.3).unwrap().rejected(), &[0, 1]);
        assert_eq!(step_down_bhq(&pv(&[0.01, 0.12, 0.13]), 0.3).unwrap().r(), 3);
        assert_eq!(step_down_bhq(&pv(&[1.0]), 0.5).unwrap().r(), 0);
    }

    #[test]
    fn truncated_examples() {
        assert_eq!(
            truncated_step_down(&pv(&[0.0, 0.0, 0.0]), 0.3, 2)
                .unwrap()
                .rejected(),
            &[0, 1]
        );
        assert_eq!(
            truncated_step_down(&pv(&[0.16, 0.25]), 0.3, 2).unwrap().r(),
            0
        );
        assert!(matches!(
            truncated_step_down(&pv(&[0.1]), 0.3, 2),
            Err(Error::KTooLarge { .. })
        ));
        assert!(truncated_step_down(&pv(&[0.1]), 0.3, 0).is_err());
    }

    #[test]
    fn empty_input_rejects_nothing() {
        let p = pv(&[]);
        assert_eq!(step_up_bhq(&p, 0.1).unwrap().r(), 0);
        assert_eq!(step_down_bhq(&p, 0.1).unwrap().r(), 0);
    }

    #[test]
    fn invalid_level_is_rejected() {
        assert!(step_up_bhq(&pv(&[0.1]), 1.5).is_err());
        assert!(step_down_bhq(&pv(&[0.1]), 0.0).is_err());
    }

    #[test]
    fn labels_fill_false_rejection_count() {
        let p = PValueVector::with_labels(
            vec![0.001, 0.002, 0.9],
            vec![Label::TrueNull, Label::FalseNull, Label::TrueNull],
        )
        .unwrap();
        let r = step_up_bhq(&p, 0.1).unwrap();
        assert_eq!((r.r(), r.v()), (2, Some(1)));
    }

    fn pvec() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(
            prop_oneof![0.0f64..=1.0, (0u32..=20).prop_map(|i| i as f64 * 0.05)],
            1..40,
        )
    }

    proptest! {
        #[test]
        fn step_down_is_subset_of_step_up(p in pvec(), q in 0.01f64..0.99) {
            let p = pv(&p);
            let up = step_up_bhq(&p, q).unwrap();
            let down = step_down_bhq(&p, q).unwrap();
            for i in down.rejected() {
                prop_assert!(up.is_rejected(*i));
            }
        }

        #[test]
        fn both_procedures_are_adaptive(p in pvec(), q in 0.01f64..0.99) {
            let p = pv(&p);
            let c = bhq_critical_values(q, p.len()).unwrap();
            prop_assert!(is_adaptive(&step_up_bhq(&p, q).unwrap(), &p, &c).unwrap());
            prop_assert!(is_adaptive(&step_down_bhq(&p, q).unwrap(), &p, &c).unwrap());
        }

        #[test]
        fn truncation_is_a_prefix_of_step_down(p in pvec(), q in 0.01f64..0.99, k in 1usize..40) {
            let p = pv(&p);
            let k = k.min(p.len());
            let full = step_down_bhq(&p, q).unwrap();
            let cut = truncated_step_down(&p, q, k).unwrap();
            prop_assert_eq!(cut.r(), full.r().min(k));
            let order = p.sorted_order();
            for i in &order[..cut.r()] {
                prop_assert!(cut.is_rejected(*i));
            }
            if k == p.len() {
                prop_assert_eq!(cut, full);
            }
        }

        #[test]
        fn rejections_are_permutation_equivariant(
            p in proptest::collection::vec(0.0f64..=1.0, 1..30),
            q in 0.01f64..0.99,
            seed in any::<u64>(),
        ) {
            // distinct values, so tie-breaking cannot interfere
            let mut vals = p.clone();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            let m = vals.len();
            let mut perm: Vec<usize> = (0..m).collect();
            let mut s = crate::noise::NoiseStream::from_seed(seed);
            for i in (1..m).rev() {
                let j = (s.next_uniform() * (i + 1) as f64) as usize;
                perm.swap(i, j.min(i));
            }
            let permuted: Vec<f64> = (0..m).map(|i| vals[perm[i]]).collect();
            let a = step_up_bhq(&pv(&vals), q).unwrap();
            let b = step_up_bhq(&pv(&permuted), q).unwrap();
            let mapped = RejectionReport::new(b.rejected().iter().map(|&i| perm[i]).collect());
            prop_assert_eq!(a.rejected(), mapped.rejected());
            let a = step_down_bhq(&pv(&vals), q).unwrap();
            let b = step_down_bhq(&pv(&permuted), q).unwrap();
            let mapped = RejectionReport::new(b.rejected().iter().map(|&i| perm[i]).collect());
            prop_assert_eq!(a.rejected(), mapped.rejected());
        }
    }
}
