//! Holds the acceptance test only; see tests/acceptance.rs.
