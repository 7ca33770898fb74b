//! Switch between rayon and plain iteration for independent work items.
//!
//! Only embarrassingly parallel loops go through here (sweep cells,
//! influence grids); the solver itself is sequential because the
//! assignment pass depends on point order.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Execution {
    Sequential,
    /// Uses rayon when the `parallel` feature is on, otherwise sequential.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Maps `op` over `items`, keeping input order in the output.
pub fn map_collect<T, R, F>(exec: Execution, items: &[T], op: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(op).collect();
    }
    let _ = exec;
    items.iter().map(op).collect()
}
