//! Test oracles shared by this crate's tests and the workspace acceptance suite.
#![allow(dead_code)]

pub mod fuzz;
pub mod oracle;
