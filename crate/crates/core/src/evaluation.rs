//! Batch evaluation of proposals, optionally spread over worker threads.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Maps a scoring function over a batch; results always come back in
/// proposal order, so any worker count gives identical output.
pub(crate) struct Evaluator {
    pool: Option<rayon::ThreadPool>,
}

impl Evaluator {
    pub(crate) fn new(workers: usize, serial: bool) -> Result<Self> {
        if workers == 0 {
            return Err(Error::contract("at least one worker is required"));
        }
        let pool = if workers > 1 && !serial {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| Error::contract(format!("cannot start worker pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self { pool })
    }

    pub(crate) fn map<T, F>(&self, items: &[T], f: F) -> Vec<f64>
    where
        T: Sync,
        F: Fn(&T) -> f64 + Sync + Send,
    {
        match &self.pool {
            Some(pool) => pool.install(|| items.par_iter().map(&f).collect()),
            None => items.iter().map(f).collect(),
        }
    }
}

/// Receives one record per controller iteration.
pub trait LogSink<R> {
    fn record(&mut self, record: &R);
}

/// Discards every record.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl<R> LogSink<R> for NullSink {
    fn record(&mut self, _: &R) {}
}

impl<R: Clone> LogSink<R> for Vec<R> {
    fn record(&mut self, record: &R) {
        self.push(record.clone());
    }
}

/// Adapts a closure, e.g. for progress printing.
pub struct FnSink<F>(pub F);

impl<R, F: FnMut(&R)> LogSink<R> for FnSink<F> {
    fn record(&mut self, record: &R) {
        (self.0)(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_preserved_across_worker_counts() {
        let items: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let serial = Evaluator::new(1, false).unwrap().map(&items, |x| x.sin());
        let parallel = Evaluator::new(4, false).unwrap().map(&items, |x| x.sin());
        assert_eq!(serial, parallel);
        assert!(Evaluator::new(0, false).is_err());
    }
}
