//! Block locally optimal preconditioned conjugate gradient iteration for the
//! smallest eigenpairs of `A x = λ B x` (`B = I` when absent).
//!
//! The trial basis `[X, W, P]` is B-orthonormalized each iteration with two
//! passes of modified Gram–Schmidt; directions that collapse are dropped. The
//! A- and B-images of the basis are recomputed exactly before the
//! Rayleigh–Ritz step, which is solved as a small generalized problem.

use nalgebra::{DMatrix, SymmetricEigen};

use super::precond::Preconditioner;
use crate::error::{Error, Result};
use crate::sparse::SparseOperator;

pub(crate) struct Block {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

const DROP_TOL: f64 = 1e-10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn apply_b(b: Option<&SparseOperator>, x: &[f64]) -> Vec<f64> {
    match b {
        Some(b) => b.mul_vec(x),
        None => x.to_vec(),
    }
}

/// Linear combinations `Σ_i basis[i]·coef[(offset + i, j)]` for each column `j`.
fn combine(basis: &[Vec<f64>], coef: &DMatrix<f64>, offset: usize, cols: usize) -> Vec<Vec<f64>> {
    let n = basis.first().map_or(0, Vec::len);
    (0..cols)
        .map(|j| {
            let mut out = vec![0.0; n];
            for (i, v) in basis.iter().enumerate() {
                let c = coef[(offset + i, j)];
                if c != 0.0 {
                    axpy(c, v, &mut out);
                }
            }
            out
        })
        .collect()
}

/// B-orthonormal basis built from `candidates` by modified Gram–Schmidt.
/// Returns the retained vectors, their B-images and the count retained from
/// the first `leading` candidates.
fn orthonormalize(
    b: Option<&SparseOperator>,
    candidates: Vec<Vec<f64>>,
    leading: usize,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, usize) {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(candidates.len());
    let mut bbasis: Vec<Vec<f64>> = Vec::with_capacity(candidates.len());
    let mut kept_leading = 0;
    for (idx, mut v) in candidates.into_iter().enumerate() {
        let mut bv = apply_b(b, &v);
        let n0 = dot(&v, &bv);
        if !(n0 > 0.0) || !n0.is_finite() {
            continue;
        }
        let s = 1.0 / n0.sqrt();
        v.iter_mut().for_each(|x| *x *= s);
        bv.iter_mut().for_each(|x| *x *= s);
        for _ in 0..2 {
            for (q, bq) in basis.iter().zip(&bbasis) {
                let c = dot(bq, &v);
                axpy(-c, q, &mut v);
                axpy(-c, bq, &mut bv);
            }
        }
        let nn = dot(&v, &bv);
        if !(nn > DROP_TOL * DROP_TOL) {
            continue;
        }
        // Recompute the B-image exactly after the subtraction sweep.
        let s = 1.0 / nn.sqrt();
        v.iter_mut().for_each(|x| *x *= s);
        let bv = apply_b(b, &v);
        let nn = dot(&v, &bv);
        if !(nn > 0.0) {
            continue;
        }
        let s = 1.0 / nn.sqrt();
        v.iter_mut().for_each(|x| *x *= s);
        let bv: Vec<f64> = bv.into_iter().map(|x| x * s).collect();
        if idx < leading {
            kept_leading += 1;
        }
        basis.push(v);
        bbasis.push(bv);
    }
    (basis, bbasis, kept_leading)
}

fn gram(u: &[Vec<f64>], v: &[Vec<f64>]) -> DMatrix<f64> {
    let k = u.len();
    let mut g = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let x = 0.5 * (dot(&u[i], &v[j]) + dot(&u[j], &v[i]));
            g[(i, j)] = x;
            g[(j, i)] = x;
        }
    }
    g
}

/// Smallest eigenpairs of the small pencil `(ga, gb)`, ascending.
pub(crate) fn small_generalized(
    ga: &DMatrix<f64>,
    gb: &DMatrix<f64>,
) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let chol = gb.clone().cholesky()?;
    let l = chol.l();
    let linv = l.clone().try_inverse()?;
    let h = &linv * ga * linv.transpose();
    let h = (&h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut y = DMatrix::zeros(eig.eigenvectors.nrows(), order.len());
    for (c, &i) in order.iter().enumerate() {
        y.set_column(c, &eig.eigenvectors.column(i));
    }
    let coef = linv.transpose() * y;
    if values.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((values, coef))
}

pub(crate) struct Settings<'p> {
    pub tol: f64,
    pub max_iter: usize,
    /// Leading block vectors that must converge; the rest are guards.
    pub wanted: usize,
    pub precond: &'p dyn Preconditioner,
}

pub(crate) fn relative_residual(r: f64, ax: f64, bx: f64, lambda: f64, floor: f64) -> f64 {
    let scale = (ax + lambda.abs() * bx).max(floor);
    if scale > 0.0 {
        r / scale
    } else {
        r
    }
}

pub(crate) fn lobpcg(
    a: &SparseOperator,
    b: Option<&SparseOperator>,
    x0: Vec<Vec<f64>>,
    settings: &Settings,
) -> Result<Block> {
    let k = x0.len();
    let n = a.order();
    let anorm_floor = 1e-6 * a.gershgorin_bound();

    let (mut x, _, kept) = orthonormalize(b, x0, k);
    if kept < k {
        return Err(Error::InvalidArgument(
            "initial block is rank deficient".into(),
        ));
    }
    let mut ax: Vec<Vec<f64>> = x.iter().map(|v| a.mul_vec(v)).collect();
    let mut bx: Vec<Vec<f64>> = x.iter().map(|v| apply_b(b, v)).collect();
    let (mut lambda, coef) = small_generalized(&gram(&x, &ax), &gram(&x, &bx))
        .ok_or_else(|| Error::NotPositiveDefinite("initial Rayleigh–Ritz failed".into()))?;
    x = combine(&x, &coef, 0, k);
    ax = combine(&ax, &coef, 0, k);
    bx = combine(&bx, &coef, 0, k);

    let mut p: Vec<Vec<f64>> = Vec::new();
    let mut best = f64::INFINITY;
    let mut residuals = vec![f64::INFINITY; k];
    let mut r = vec![vec![0.0; n]; k];

    for iter in 0..=settings.max_iter {
        for j in 0..k {
            for i in 0..n {
                r[j][i] = ax[j][i] - lambda[j] * bx[j][i];
            }
            residuals[j] =
                relative_residual(norm(&r[j]), norm(&ax[j]), norm(&bx[j]), lambda[j], anorm_floor * norm(&x[j]));
        }
        let worst = residuals[..settings.wanted.min(k)].iter().cloned().fold(0.0, f64::max);
        best = best.min(worst);
        if worst <= settings.tol {
            return Ok(Block {
                values: lambda,
                vectors: x,
                residuals,
                iterations: iter,
            });
        }
        if iter == settings.max_iter {
            break;
        }

        let mut candidates: Vec<Vec<f64>> = x.clone();
        for j in 0..k {
            if residuals[j] > settings.tol {
                let mut w = vec![0.0; n];
                settings.precond.apply(&r[j], &mut w);
                candidates.push(w);
            }
        }
        candidates.extend(p.iter().cloned());

        let (basis, bbasis, kx) = orthonormalize(b, candidates, k);
        if kx < k {
            return Err(Error::NotConverged {
                iterations: iter,
                residual: best,
            });
        }
        let abasis: Vec<Vec<f64>> = basis.iter().map(|v| a.mul_vec(v)).collect();
        let ga = gram(&basis, &abasis);
        let gb = gram(&basis, &bbasis);
        let (vals, coef) = match small_generalized(&ga, &gb) {
            Some(s) => s,
            None => {
                // Restart without the conjugate directions.
                p.clear();
                continue;
            }
        };
        lambda = vals[..k].to_vec();
        x = combine(&basis, &coef, 0, k);
        ax = combine(&abasis, &coef, 0, k);
        bx = combine(&bbasis, &coef, 0, k);
        p = if basis.len() > kx {
            combine(&basis[kx..], &coef, kx, k)
        } else {
            Vec::new()
        };
    }
    Err(Error::NotConverged {
        iterations: settings.max_iter,
        residual: best,
    })
}
