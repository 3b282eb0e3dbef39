//! Acceptance checks for `bklab` live in `tests/acceptance.rs`.
