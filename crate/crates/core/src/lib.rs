//! Static security scanner for code-editor extension packages.

pub mod clock;
pub mod deps;
pub mod finding;
pub mod graph;
pub mod identity;
pub mod intel;
pub mod js;
pub mod manifest_rules;
pub mod market;
pub mod package;
pub mod par;
pub mod pipeline;
pub mod policy;
pub mod report;
pub mod source;
