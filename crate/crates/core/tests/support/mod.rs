//! Checks shared between test targets; each target uses a subset.
#![allow(dead_code)]

pub mod actions;
pub mod policy_grad;
pub mod primitives;
