//! Staged source-separation recipe on top of the core DSP crate: WAV and
//! manifest plumbing, deterministic data synthesis, oracle and iterative
//! separation methods, batch evaluation, and the CLI driver.

#![forbid(unsafe_code)]

pub mod cli;
pub mod config;
pub mod evalset;
pub mod fbfile;
pub mod manifest;
pub mod stages;
pub mod synth;
pub mod wav;
