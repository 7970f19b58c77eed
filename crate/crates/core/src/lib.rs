//! Counterfactual explanations for graph node classifiers by learned edge edits.
//!
//! Given a frozen node classifier and a target node, a graph-attention policy
//! proposes a short sequence of edge additions and deletions inside the
//! target's neighborhood until the classifier's prediction changes. The policy
//! is trained with REINFORCE and, once trained, explains unseen nodes with
//! forward passes only.
//!
//! This crate is `no_std` (it needs `alloc`). File formats, the command line
//! and wall-clock timing live in the `edgeflip` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod blackbox;
pub mod diff;
pub mod error;
pub mod eval;
pub mod exec;
pub mod explainer;
pub mod graph;
pub mod mdp;
pub mod policy;
pub mod rng;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::{EditKind, Graph, Perturbation};
