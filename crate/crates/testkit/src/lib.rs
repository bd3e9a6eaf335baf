//! Synthetic fixtures for exercising the scanner: random version ranges
//! with a reference predicate, seeded extension corpora with expectation
//! ledgers, and vulnerability databases.

pub mod semver;
pub mod hosts;
pub mod digraph;
pub mod gallery;
pub mod vsix;
pub mod corpus;
