#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use svrsqp::linalg::{DenseMatrix, DenseVector};
use svrsqp::problems::{ConstraintSpec, Dataset, QuadraticProblem};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("data")
}

/// The australian data, or the file named by `SVRSQP_AUSTRALIAN`.
pub fn australian_path() -> PathBuf {
    std::env::var_os("SVRSQP_AUSTRALIAN")
        .map(PathBuf::from)
        .unwrap_or_else(|| data_dir().join("australian"))
}

pub fn australian() -> Arc<Dataset> {
    Arc::new(Dataset::open(australian_path(), None).expect("australian fixture"))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut impl Rng, n: usize) -> DenseVector {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>().into()
}

pub fn normal_mat(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    DenseMatrix::from_row_major(rows, cols, data).unwrap()
}

/// `MᵀM + I` for a random square `M`.
pub fn spd(rng: &mut impl Rng, n: usize) -> DenseMatrix {
    let m = normal_mat(rng, n, n);
    let mut h = symmetrize(&m.transpose().mul_mat(&m));
    for i in 0..n {
        h[(i, i)] += 1.0;
    }
    h
}

pub fn to_na(m: &DenseMatrix) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn to_na_vec(v: &DenseVector) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_column_slice(v.as_slice())
}

/// Random quadratic finite sum with linear constraints. Each `Q_i` is
/// positive semidefinite, so the gradient Lipschitz constant of the mean is
/// the largest eigenvalue of the mean Hessian.
pub fn quadratic_fixture(seed: u64, big_n: usize, n: usize, m: usize) -> QuadraticProblem {
    let mut r = rng(seed);
    let hessians = (0..big_n)
        .map(|_| {
            let b = normal_mat(&mut r, n, n);
            let h = b.transpose().mul_mat(&b);
            let data = h.as_slice().iter().map(|v| v / n as f64).collect();
            symmetrize(&DenseMatrix::from_row_major(n, n, data).unwrap())
        })
        .collect();
    let linear = (0..big_n).map(|_| normal_vec(&mut r, n)).collect();
    let a = normal_mat(&mut r, m, n);
    let a1 = normal_vec(&mut r, m);
    QuadraticProblem::new(hessians, linear, ConstraintSpec::Linear { a, a1 })
}

/// `(M + Mᵀ)/2`, to strip rounding asymmetry.
pub fn symmetrize(m: &DenseMatrix) -> DenseMatrix {
    let t = m.transpose();
    let data = m.as_slice().iter().zip(t.as_slice()).map(|(a, b)| 0.5 * (a + b)).collect();
    DenseMatrix::from_row_major(m.rows(), m.cols(), data).unwrap()
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(m: &DenseMatrix) -> f64 {
    let e = nalgebra::SymmetricEigen::new(to_na(m));
    e.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    diff / scale
}
