//! Selection between the rayon-backed and the sequential code path for the
//! per-point loops (distance evaluation, nearest-center assignment).
//!
//! Both paths produce bit-identical results: work is split per point and
//! every reduction over points is done sequentially afterwards, in row order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

impl Execution {
    /// Every execution mode compiled into this build.
    pub fn available() -> Vec<Execution> {
        vec![
            Execution::Sequential,
            #[cfg(feature = "parallel")]
            Execution::Parallel,
        ]
    }

    pub fn label(self) -> &'static str {
        match self {
            Execution::Sequential => "sequential",
            #[cfg(feature = "parallel")]
            Execution::Parallel => "parallel",
        }
    }

    /// Applies `f` to every item, preserving order.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().map(f).collect(),
        }
    }

    /// Updates every element of `out` in place from the matching item.
    pub fn zip_update<T, U, F>(self, items: &[T], out: &mut [U], f: F)
    where
        T: Sync,
        U: Send,
        F: Fn(&T, &mut U) + Sync + Send,
    {
        debug_assert_eq!(items.len(), out.len());
        match self {
            Execution::Sequential => items.iter().zip(out.iter_mut()).for_each(|(t, u)| f(t, u)),
            #[cfg(feature = "parallel")]
            Execution::Parallel => items
                .par_iter()
                .zip(out.par_iter_mut())
                .for_each(|(t, u)| f(t, u)),
        }
    }
}

/// Number of worker threads the parallel path would use.
pub fn worker_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}
