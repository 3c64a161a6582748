//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) [`Exec::Parallel`] fans work out
//! over the rayon pool. Results always come back in index order, so outputs do
//! not depend on the number of worker threads.

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

impl Exec {
    /// `(0..n).map(f)` collected in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
        }
    }

    pub fn is_parallel(self) -> bool {
        self != Exec::Sequential
    }
}

/// Runs `f` with a pool of `threads` workers. `threads == 1` runs
/// sequentially and `0` uses the default pool.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce(Exec) -> R + Send) -> crate::Result<R> {
    if threads == 1 {
        return Ok(f(Exec::Sequential));
    }
    #[cfg(feature = "parallel")]
    {
        if threads == 0 {
            return Ok(f(Exec::Parallel));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| crate::Error::Config(format!("thread pool: {e}")))?;
        Ok(pool.install(|| f(Exec::Parallel)))
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok(f(Exec::Sequential))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let seq = Exec::Sequential.map(100, |i| i * i);
        let dflt = Exec::default().map(100, |i| i * i);
        assert_eq!(seq, dflt);
        assert_eq!(seq[7], 49);
    }
}
