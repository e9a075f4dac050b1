//! Symmetric positive definite sparse systems with a fixed pattern: the
//! pattern and its symbolic Cholesky factorization are built once, values
//! are refilled per Newton step.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{Argsort, Pair, SparseColMat, SymbolicSparseColMat};
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Upper-triangle pattern built from `(row, col)` entries, duplicates summed.
pub struct SpdPattern {
    n: usize,
    entries: Vec<(usize, usize)>,
    symbolic: SymbolicSparseColMat<usize>,
    argsort: Argsort<usize>,
    llt: SymbolicLlt<usize>,
}

impl SpdPattern {
    /// `entries` may list either triangle; they are folded into the upper one.
    pub fn new(n: usize, entries: Vec<(usize, usize)>) -> Result<Self> {
        let entries: Vec<(usize, usize)> = entries.into_iter().map(|(i, j)| (i.min(j), i.max(j))).collect();
        let pairs: Vec<Pair<usize, usize>> = entries.iter().map(|&(row, col)| Pair { row, col }).collect();
        let (symbolic, argsort) = SymbolicSparseColMat::try_new_from_indices(n, n, &pairs)
            .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        let llt = SymbolicLlt::try_new(symbolic.as_ref(), Side::Upper).map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        Ok(SpdPattern { n, entries, symbolic, argsort, llt })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Factor the matrix whose values follow the entry order given to `new`.
    pub fn factor(&self, values: &[f64]) -> Result<SpdFactor> {
        debug_assert_eq!(values.len(), self.entries.len());
        let mat = SparseColMat::new_from_argsort(self.symbolic.clone(), &self.argsort, values)
            .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        let llt = Llt::try_new_with_symbolic(self.llt.clone(), mat.as_ref(), Side::Upper)
            .map_err(|e| Error::LinearSolve(format!("matrix not positive definite: {e:?}")))?;
        Ok(SpdFactor { llt, n: self.n })
    }
}

pub struct SpdFactor {
    llt: Llt<usize, f64>,
    n: usize,
}

impl SpdFactor {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = Mat::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.llt.solve(&b);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

/// Make faer run sequentially so repeated runs give identical bits.
pub fn init_deterministic() {
    faer::set_global_parallelism(faer::Par::Seq);
}
