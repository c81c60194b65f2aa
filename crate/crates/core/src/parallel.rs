//! Index-ordered map over independent simulation points.
//!
//! With the `parallel` feature the work is spread over a rayon pool;
//! without it every [`Execution`] runs sequentially. Either way the output
//! order follows the input order, so results do not depend on scheduling.

use serde::{Deserialize, Serialize};

use crate::Result;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Execution {
    Sequential,
    /// Rayon's global pool.
    #[default]
    Parallel,
    /// Dedicated pool of this many threads.
    Workers(usize),
}

impl Execution {
    /// `0` → global pool, `1` → sequential, `n` → dedicated pool of `n`.
    pub fn from_workers(n: usize) -> Self {
        match n {
            0 => Execution::Parallel,
            1 => Execution::Sequential,
            n => Execution::Workers(n),
        }
    }

    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && !matches!(self, Execution::Sequential)
    }

    /// `f(i, &items[i])` for every item, results in input order.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            let run = || items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect();
            match self {
                Execution::Sequential => {}
                Execution::Parallel => return run(),
                Execution::Workers(n) => {
                    if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(*n).build() {
                        return pool.install(run);
                    }
                }
            }
        }
        items.iter().enumerate().map(|(i, x)| f(i, x)).collect()
    }

    /// Fallible [`map`](Self::map); the first error in input order wins.
    pub fn try_map<T, R, F>(&self, items: &[T], f: F) -> Result<Vec<R>>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> Result<R> + Sync + Send,
    {
        self.map(items, f).into_iter().collect()
    }
}
