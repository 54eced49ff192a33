//! Rayon-backed fan-out with a dedicated pool.

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use wkm_core::Fanout;

/// Runs work items on a private pool of `threads` workers. Results keep
/// index order, so output never depends on the thread count.
pub struct RayonFanout {
    pool: ThreadPool,
}

impl RayonFanout {
    /// `threads = 0` uses one worker per available core.
    pub fn new(threads: usize) -> anyhow::Result<Self> {
        let pool = ThreadPoolBuilder::new().num_threads(threads).build()?;
        Ok(RayonFanout { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Fanout for RayonFanout {
    fn map_indexed<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..count).into_par_iter().map(f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use wkm_core::Sequential;

    #[test]
    fn matches_sequential_order() {
        let par = RayonFanout::new(3).unwrap();
        let f = |i: usize| (i * 7919) % 1013;
        assert_eq!(par.map_indexed(5000, f), Sequential.map_indexed(5000, f));
        assert_eq!(par.threads(), 3);
    }
}
