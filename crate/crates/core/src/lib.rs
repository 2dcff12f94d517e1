//! Repository-level code generation benchmark toolkit.

pub mod backend;
pub mod config;
pub mod dataset;
pub mod debug;
pub mod deps;
pub mod evaluate;
pub mod exec;
pub mod metrics;
pub mod model;
pub mod prompt;
pub mod python;
pub mod sample;
pub mod testgen;
pub mod text;
