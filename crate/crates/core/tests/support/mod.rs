//! Oracles and trial drivers shared by the test targets. Each target uses
//! a subset.
#![allow(dead_code)]

pub mod oracle;
pub mod trials;
