//! A thread-pool [`Executor`].

use rayon::prelude::*;
use ssm_core::inference::Executor;
use ssm_core::Result;

/// Splits particle work across a dedicated rayon pool. Chunk boundaries
/// depend on the thread count, results never do.
pub struct Pool {
    pool: rayon::ThreadPool,
    threads: usize,
}

impl Pool {
    pub fn new(threads: usize) -> std::result::Result<Pool, rayon::ThreadPoolBuildError> {
        let threads = threads.max(1);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        Ok(Pool { pool, threads })
    }
}

impl Executor for Pool {
    fn map_chunks<T, R, F>(&self, data: &mut [T], unit: usize, f: F) -> Result<Vec<R>>
    where
        T: Send,
        R: Send,
        F: Fn(usize, &mut [T]) -> Result<Vec<R>> + Sync,
    {
        let unit = unit.max(1);
        let items = data.len() / unit;
        if self.threads == 1 || items < 2 {
            return f(0, data);
        }
        // a few chunks per thread for load balance
        let per = items.div_ceil(self.threads * 4).max(1);
        let parts: Vec<Result<Vec<R>>> = self.pool.install(|| {
            data.par_chunks_mut(per * unit)
                .enumerate()
                .map(|(c, chunk)| f(c * per, chunk))
                .collect()
        });
        let mut out = Vec::with_capacity(items);
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_come_back_in_item_order() {
        let pool = Pool::new(4).unwrap();
        let mut data: Vec<f64> = (0..1000).map(f64::from).collect();
        let out = pool
            .map_chunks(&mut data, 2, |first, chunk| {
                Ok(chunk.chunks(2).enumerate().map(|(k, c)| (first + k, c[0] + c[1])).collect())
            })
            .unwrap();
        assert_eq!(out.len(), 500);
        for (i, (idx, s)) in out.into_iter().enumerate() {
            assert_eq!(idx, i);
            assert_eq!(s, (4 * i + 1) as f64);
        }
    }

    #[test]
    fn first_error_in_item_order_wins() {
        let pool = Pool::new(3).unwrap();
        let mut data = vec![0u8; 100];
        let e = pool
            .map_chunks(&mut data, 1, |first, chunk| {
                if first + chunk.len() > 40 {
                    Err(ssm_core::Error::DegenerateEnsemble { time: first as f64 })
                } else {
                    Ok(vec![(); chunk.len()])
                }
            })
            .unwrap_err();
        let ssm_core::Error::DegenerateEnsemble { time } = e else { panic!() };
        assert!(time <= 40.0);
    }
}
