//! Execution strategy for embarrassingly parallel work (per dimension, per model).

use serde::{Deserialize, Serialize};

/// How independent tasks are scheduled. Results always come back in input
/// order, so both strategies produce identical output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    /// Data-parallel over the rayon pool (sequential when built without the
    /// `parallel` feature).
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }

    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_preserved() {
        let items: Vec<u64> = (0..1000).collect();
        let a = Execution::Parallel.map(&items, |x| x * x);
        let b = Execution::Sequential.map(&items, |x| x * x);
        assert_eq!(a, b);
        assert_eq!(
            Execution::Parallel.map_range(5, |i| i + 1),
            vec![1, 2, 3, 4, 5]
        );
    }
}
