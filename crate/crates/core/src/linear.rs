//! Direct sparse solves.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::assembly::SparseMatrix;
use crate::error::{DdfvError, Result};

/// Solves `a x = rhs` by sparse LU and checks the backward error
/// `|a x - rhs|_inf <= 1e-10 (|a|_inf |x|_inf + |rhs|_inf)`.
pub fn linear_solve(a: &SparseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = a.dim();
    if rhs.len() != n {
        return Err(DdfvError::invalid(format!("rhs has length {}, matrix is {n} x {n}", rhs.len())));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut entries = a.entries().to_vec();
    entries.sort_by_key(|&(i, j, _)| (j, i));
    let mut merged: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(entries.len());
    for (i, j, v) in entries {
        match merged.last_mut() {
            Some(t) if t.row == i && t.col == j => t.val += v,
            _ => merged.push(Triplet::new(i, j, v)),
        }
    }
    let matrix = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &merged)
        .map_err(|e| DdfvError::invalid(format!("malformed sparse matrix: {e:?}")))?;
    let lu = matrix
        .sp_lu()
        .map_err(|e| DdfvError::SingularSystem(format!("factorization failed: {e:?}")))?;
    let b = Col::<f64>::from_fn(n, |i| rhs[i]);
    let sol = lu.solve(&b);
    let x: Vec<f64> = (0..n).map(|i| sol[i]).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(DdfvError::SingularSystem("solution is not finite".into()));
    }
    let ax = a.mul_vec(&x);
    let defect = ax.iter().zip(rhs).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let x_norm = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let b_norm = rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if defect > 1e-10 * (a.norm_inf() * x_norm + b_norm) {
        return Err(DdfvError::SingularSystem(format!("backward error {defect:e} too large")));
    }
    Ok(x)
}
