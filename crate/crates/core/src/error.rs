use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A real parameter fell outside its admissible range.
    Domain {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    /// A p-value outside `[0, 1]` (or NaN).
    InvalidPValue {
        index: usize,
        value: f64,
    },
    IndexOutOfRange {
        index: usize,
        len: usize,
    },
    LengthMismatch {
        left: usize,
        right: usize,
    },
    /// The selection size exceeds the number of candidates.
    KTooLarge {
        k: usize,
        m: usize,
    },
    /// A problem size beyond what an exhaustive or sampling routine supports.
    TooLarge {
        name: &'static str,
        value: usize,
        max: usize,
    },
    Empty,
    Unsorted,
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    NotAdjacent {
        index: usize,
        distance: f64,
    },
    Precondition(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { name, value, range } => {
                write!(f, "{name} = {value} is outside the range {range}")
            }
            Error::InvalidPValue { index, value } => {
                write!(
                    f,
                    "p-value at position {index} is {value}, expected a value in [0, 1]"
                )
            }
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for length {len}")
            }
            Error::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            Error::KTooLarge { k, m } => write!(f, "k = {k} exceeds m = {m}"),
            Error::TooLarge { name, value, max } => {
                write!(f, "{name} = {value} exceeds the supported maximum {max}")
            }
            Error::Empty => f.write_str("empty input"),
            Error::Unsorted => f.write_str("input must be sorted ascending"),
            Error::RaggedRow {
                row,
                expected,
                found,
            } => write!(f, "row {row} has {found} entries, expected {expected}"),
            Error::NotAdjacent { index, distance } => write!(
                f,
                "inputs are not adjacent: coordinate {index} differs by {distance} > 1"
            ),
            Error::Precondition(msg) => write!(f, "precondition violated: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

/// Checks `lo < value < hi`.
pub(crate) fn open_interval(
    name: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
    range: &'static str,
) -> Result<()> {
    if value > lo && value < hi {
        Ok(())
    } else {
        Err(Error::Domain { name, value, range })
    }
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<()> {
    open_interval(name, value, 0.0, f64::INFINITY, "(0, inf)")
}

pub(crate) fn unit_interval(name: &'static str, value: f64) -> Result<()> {
    open_interval(name, value, 0.0, 1.0, "(0, 1)")
}
