//! Disorder ensembles and deterministic parallel maps over realizations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{sample_field, DisorderField, DisorderSpec};
use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::operator::{assemble, LatticeOperator};

/// A lattice window together with the law of the random potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub lattice: LatticeSpec,
    pub disorder: DisorderSpec,
}

impl Ensemble {
    pub fn new(lattice: LatticeSpec, disorder: DisorderSpec) -> Result<Self> {
        disorder.validate()?;
        Ok(Self { lattice, disorder })
    }

    pub fn samples(&self) -> u64 {
        self.disorder.samples
    }

    pub fn field(&self, index: u64) -> Result<DisorderField> {
        sample_field(&self.disorder, &self.lattice, index)
    }

    pub fn operator(&self, index: u64) -> Result<LatticeOperator> {
        assemble(&self.lattice, &self.field(index)?)
    }
}

/// Applies `f` to `0..n` on a pool of `workers` threads and returns the
/// results in index order, so the output never depends on scheduling.
pub fn par_map_indexed<T, F>(workers: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let workers = workers.max(1);
    if workers == 1 {
        return (0..n).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Parameter(format!("cannot start worker pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(&f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_come_back_in_index_order() {
        let a = par_map_indexed(1, 50, |i| Ok(i * i)).unwrap();
        let b = par_map_indexed(8, 50, |i| Ok(i * i)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[7], 49);
    }

    #[test]
    fn first_error_is_reported() {
        let r: Result<Vec<usize>> = par_map_indexed(4, 10, |i| {
            if i == 3 {
                Err(Error::Parameter("boom".into()))
            } else {
                Ok(i)
            }
        });
        assert!(r.is_err());
    }

    #[test]
    fn ensemble_operators_are_reproducible() {
        let lat = LatticeSpec::chain(11).unwrap();
        let ens = Ensemble::new(lat, DisorderSpec::iid_uniform(2.0, 5, 3)).unwrap();
        let a = ens.operator(2).unwrap();
        let b = ens.operator(2).unwrap();
        assert_eq!(a.diagonal(), b.diagonal());
        assert!(ens.operator(3).is_err());
    }
}
