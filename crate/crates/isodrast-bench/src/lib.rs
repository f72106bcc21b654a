//! Shared fixtures for the criterion benches.

pub use isodrast;
