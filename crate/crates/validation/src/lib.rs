//! Test-only crate: `tests/acceptance.rs` checks the engine end to end and
//! prints one verdict line per criterion.
