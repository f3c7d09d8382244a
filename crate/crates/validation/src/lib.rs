//! Holds the `acceptance` test target; it has no library API of its own.
