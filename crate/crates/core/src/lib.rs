pub mod content;
pub mod dice;
pub mod engine;
pub mod evalkit;
pub mod eventlog;
pub mod exec;
pub mod fixtures;
pub mod pipeline;
pub mod promptgen;
pub mod statecore;
pub mod synth;
