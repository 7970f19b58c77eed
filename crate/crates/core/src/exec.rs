//! Pluggable executor for embarrassingly parallel work (rollouts inside a
//! batch, per-node explanations). The core ships a sequential executor; the
//! std crate provides a thread-pool backed one.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Apply `f` to every item. Output order must match input order.
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync,
    {
        items.iter().map(f).collect()
    }
}
