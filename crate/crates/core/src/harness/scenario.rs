use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{Label, PValueVector};
use crate::noise::NoiseStream;

/// Law of the false-null p-values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlternativeLaw {
    AllZero,
    FixedValue(f64),
    /// `1 - median` of the drawn null p-values, shared by every false null.
    OneMinusMedianOfNulls,
}

/// `m0` uniform true nulls at indices `0..m0`, followed by `m - m0` false
/// nulls drawn from `alternative`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioGenerator {
    m: usize,
    m0: usize,
    alternative: AlternativeLaw,
}

impl ScenarioGenerator {
    pub fn new(m: usize, m0: usize, alternative: AlternativeLaw) -> Result<Self> {
        if m == 0 {
            return Err(Error::Empty);
        }
        if m0 > m {
            return Err(Error::TooLarge {
                name: "m0",
                value: m0,
                max: m,
            });
        }
        match alternative {
            AlternativeLaw::FixedValue(v) if !(0.0..=1.0).contains(&v) => {
                return Err(Error::InvalidPValue {
                    index: m0,
                    value: v,
                })
            }
            AlternativeLaw::OneMinusMedianOfNulls if m0 == 0 && m > 0 => {
                return Err(Error::Precondition(
                    "the median law needs at least one null",
                ))
            }
            _ => {}
        }
        Ok(Self { m, m0, alternative })
    }

    /// All `m` hypotheses are true nulls.
    pub fn global_null(m: usize) -> Result<Self> {
        Self::new(m, m, AlternativeLaw::AllZero)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn m0(&self) -> usize {
        self.m0
    }

    pub fn alternative(&self) -> AlternativeLaw {
        self.alternative
    }
}

/// Draws one labelled p-value vector.
pub fn scenario_generate(gen: &ScenarioGenerator, rng: &mut NoiseStream) -> Result<PValueVector> {
    let mut values: Vec<f64> = (0..gen.m0).map(|_| rng.next_uniform()).collect();
    let alt = match gen.alternative {
        AlternativeLaw::AllZero => 0.0,
        AlternativeLaw::FixedValue(v) => v,
        AlternativeLaw::OneMinusMedianOfNulls => 1.0 - median(&values),
    };
    values.resize(gen.m, alt);
    let mut labels = alloc::vec![Label::TrueNull; gen.m0];
    labels.resize(gen.m, Label::FalseNull);
    PValueVector::with_labels(values, labels)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
