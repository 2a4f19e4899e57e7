//! Acceptance criteria for the kvqe toolkit live in `tests/acceptance.rs`.
