pub mod claims;
pub mod dsl;
pub mod engine;
pub mod harness;
pub mod optimizer;
pub mod oracle;
pub mod par;
pub mod provenance;
pub mod relation;
pub mod relevance;
pub mod stats;
