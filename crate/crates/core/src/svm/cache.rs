use std::collections::HashMap;
use std::rc::Rc;

use rayon::prelude::*;

use super::KernelSpec;

/// Above this many points the full Gram matrix is not materialized.
pub const FULL_GRAM_LIMIT: usize = 8192;

/// Budget for cached rows when falling back to the LRU cache.
const ROW_CACHE_BYTES: usize = 256 << 20;

/// Kernel rows for the training set, either fully precomputed or computed on
/// demand behind an LRU cache.
pub(crate) struct KernelRows<'a> {
    data: &'a [Vec<f64>],
    kernel: KernelSpec,
    diag: Vec<f64>,
    store: Store,
}

enum Store {
    Full(Vec<Rc<[f64]>>),
    Lru {
        rows: HashMap<usize, (Rc<[f64]>, u64)>,
        capacity: usize,
        clock: u64,
    },
}

impl<'a> KernelRows<'a> {
    pub fn new(data: &'a [Vec<f64>], kernel: KernelSpec) -> Self {
        Self::with_limit(data, kernel, FULL_GRAM_LIMIT)
    }

    pub fn with_limit(data: &'a [Vec<f64>], kernel: KernelSpec, full_limit: usize) -> Self {
        let n = data.len();
        let diag = data.iter().map(|x| kernel.eval(x, x)).collect();
        let store = if n <= full_limit {
            let rows: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|i| data.iter().map(|x| kernel.eval(&data[i], x)).collect())
                .collect();
            Store::Full(rows.into_iter().map(Rc::from).collect())
        } else {
            let capacity = (ROW_CACHE_BYTES / (8 * n.max(1))).max(2);
            Store::Lru {
                rows: HashMap::with_capacity(capacity),
                capacity,
                clock: 0,
            }
        };
        KernelRows {
            data,
            kernel,
            diag,
            store,
        }
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.diag[i]
    }

    pub fn row(&mut self, i: usize) -> Rc<[f64]> {
        match &mut self.store {
            Store::Full(rows) => rows[i].clone(),
            Store::Lru {
                rows,
                capacity,
                clock,
            } => {
                *clock += 1;
                if let Some((row, stamp)) = rows.get_mut(&i) {
                    *stamp = *clock;
                    return row.clone();
                }
                if rows.len() >= *capacity {
                    let oldest = rows
                        .iter()
                        .min_by_key(|(_, (_, stamp))| *stamp)
                        .map(|(&k, _)| k);
                    if let Some(k) = oldest {
                        rows.remove(&k);
                    }
                }
                let kernel = self.kernel;
                let xi = &self.data[i];
                let row: Rc<[f64]> = self.data.iter().map(|x| kernel.eval(xi, x)).collect();
                rows.insert(i, (row.clone(), *clock));
                row
            }
        }
    }
}
