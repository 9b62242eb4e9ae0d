pub mod bitset;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod learn;
pub mod log;
pub mod rational;
pub mod report;
pub mod rules;
pub mod synth;
pub mod theorems;
