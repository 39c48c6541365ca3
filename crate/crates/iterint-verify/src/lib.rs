//! Acceptance checks for `iterint`; see `tests/acceptance.rs`.
//!
//! Kept in its own package so the suite runs after every other test target.
