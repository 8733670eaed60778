//! Smallest eigenpairs of sparse symmetric standard and generalized problems,
//! and the penalized cell eigenproblem `(A + C·P(1−φ)) u = λ B u` solved on a
//! computational neighborhood.
//!
//! Eigenvectors are scaled to unit B-norm by the solvers. The penalized
//! solver rescales grid eigenvectors to unit discrete L² norm
//! (`h^dim Σ u_i² = 1`) so that `−C u²` is the L² gradient of λ with respect
//! to the density. Signs are fixed so the largest-magnitude entry is
//! positive.

mod lobpcg;
mod precond;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use precond::PreconditionerKind;

use crate::error::{Error, Result};
use crate::neighborhood::Neighborhood;
use crate::sparse::SparseOperator;
use crate::surface_fem::{weighted_mass, TriMesh};

/// Problems up to this order are solved densely.
const DENSE_LIMIT: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct EigResult {
    pub eigenvalue: f64,
    pub eigenvector: Vec<f64>,
    /// Relative residual `‖Au − λBu‖ / (‖Au‖ + |λ|‖Bu‖)`.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigOptions {
    pub tol: f64,
    /// Outer iteration cap; `None` means `max(50, ⌈10·√n⌉)`.
    pub max_iter: Option<usize>,
    pub preconditioner: PreconditionerKind,
    /// Seed for the random start block.
    pub seed: u64,
    /// Extra block vectors carried along to speed up convergence when the
    /// wanted eigenvalues are clustered.
    pub guard_vectors: usize,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: None,
            preconditioner: PreconditionerKind::Ssor,
            seed: 0x5eed,
            guard_vectors: 0,
        }
    }
}

impl EigOptions {
    pub fn max_iterations(&self, n: usize) -> usize {
        self.max_iter
            .unwrap_or_else(|| ((10.0 * (n as f64).sqrt()).ceil() as usize).max(50))
    }
}

fn check_square(a: &SparseOperator, m: Option<&SparseOperator>) -> Result<()> {
    if a.order() == 0 {
        return Err(Error::EmptyNeighborhood);
    }
    if let Some(m) = m {
        if m.order() != a.order() {
            return Err(Error::InvalidArgument(format!(
                "operator orders differ: {} vs {}",
                a.order(),
                m.order()
            )));
        }
        if m.diagonal().iter().any(|&d| !(d > 0.0)) {
            return Err(Error::NotPositiveDefinite(
                "mass matrix has a non-positive diagonal entry".into(),
            ));
        }
    }
    Ok(())
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn dense(a: &SparseOperator) -> DMatrix<f64> {
    let n = a.order();
    let mut d = DMatrix::zeros(n, n);
    for (i, j, v) in a.triplets() {
        d[(i, j)] = v;
    }
    d
}

fn residual_of(a: &SparseOperator, m: Option<&SparseOperator>, lambda: f64, x: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let bx = match m {
        Some(m) => m.mul_vec(x),
        None => x.to_vec(),
    };
    let r: f64 = ax
        .iter()
        .zip(&bx)
        .map(|(p, q)| (p - lambda * q).powi(2))
        .sum::<f64>()
        .sqrt();
    let nrm = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>().sqrt();
    lobpcg::relative_residual(
        r,
        nrm(&ax),
        nrm(&bx),
        lambda,
        1e-6 * a.gershgorin_bound() * nrm(x),
    )
}

fn solve_dense(a: &SparseOperator, m: Option<&SparseOperator>, k: usize) -> Result<Vec<EigResult>> {
    let n = a.order();
    let ga = dense(a);
    let gb = match m {
        Some(m) => dense(m),
        None => DMatrix::identity(n, n),
    };
    let (values, coef) = lobpcg::small_generalized(&ga, &gb)
        .ok_or_else(|| Error::NotPositiveDefinite("mass matrix Cholesky failed".into()))?;
    Ok((0..k.min(n))
        .map(|j| {
            let mut v: Vec<f64> = coef.column(j).iter().copied().collect();
            fix_sign(&mut v);
            EigResult {
                eigenvalue: values[j],
                residual: residual_of(a, m, values[j], &v),
                eigenvector: v,
                iterations: 0,
            }
        })
        .collect())
}

fn start_block(n: usize, cols: usize, initial: Option<&[f64]>, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cols)
        .map(|j| match (j, initial) {
            (0, Some(init)) if init.iter().any(|&x| x != 0.0) => init.to_vec(),
            (0, _) => (0..n).map(|_| 1.0 + 0.1 * rng.gen::<f64>()).collect(),
            _ => (0..n).map(|_| rng.gen::<f64>() - 0.5).collect(),
        })
        .collect()
}

/// The `k` smallest eigenpairs of `A u = λ M u` (`M = I` when `None`), in
/// ascending order.
pub fn smallest_eigenpairs(
    a: &SparseOperator,
    m: Option<&SparseOperator>,
    k: usize,
    initial: Option<&[f64]>,
    opts: &EigOptions,
) -> Result<Vec<EigResult>> {
    check_square(a, m)?;
    let n = a.order();
    if k == 0 {
        return Ok(Vec::new());
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenpairs of an order-{n} problem"
        )));
    }
    let block = (k + opts.guard_vectors).min(n);
    if n <= DENSE_LIMIT.max(4 * block) {
        return solve_dense(a, m, k);
    }
    let pre = precond::build(opts.preconditioner, a);
    let settings = lobpcg::Settings {
        tol: opts.tol,
        max_iter: opts.max_iterations(n),
        wanted: k,
        precond: pre.as_ref(),
    };
    let x0 = start_block(n, block, initial, opts.seed);
    let out = lobpcg::lobpcg(a, m, x0, &settings).map_err(|e| match e {
        Error::InvalidArgument(_) if m.is_some() => {
            Error::NotPositiveDefinite("mass matrix is not positive definite".into())
        }
        other => other,
    })?;
    Ok(out
        .values
        .into_iter()
        .zip(out.vectors)
        .zip(out.residuals)
        .take(k)
        .map(|((eigenvalue, mut eigenvector), residual)| {
            fix_sign(&mut eigenvector);
            EigResult {
                eigenvalue,
                eigenvector,
                residual,
                iterations: out.iterations,
            }
        })
        .collect())
}

/// Smallest eigenpair of a symmetric positive definite `A`.
pub fn smallest_eigpair(a: &SparseOperator, opts: &EigOptions) -> Result<EigResult> {
    Ok(smallest_eigenpairs(a, None, 1, None, opts)?.remove(0))
}

/// Smallest eigenpair of `A u = λ M u` with `M` symmetric positive definite.
pub fn smallest_eigpair_generalized(
    a: &SparseOperator,
    m: &SparseOperator,
    opts: &EigOptions,
) -> Result<EigResult> {
    Ok(smallest_eigenpairs(a, Some(m), 1, None, opts)?.remove(0))
}

/// Base operator of a cell eigenproblem: the grid Laplacian (no mass
/// matrix), or P1 stiffness and mass on a surface.
#[derive(Debug, Clone, Copy)]
pub struct PenaltyOperator<'a> {
    pub stiffness: &'a SparseOperator,
    pub mass: Option<&'a SparseOperator>,
    /// In-domain flags; masked-out nodes are always fully penalized.
    pub mask: Option<&'a [bool]>,
    /// `h^dim` on grids; unused on surfaces.
    pub node_weight: f64,
    /// Surface whose P1 functions carry the penalty `∫ C(1−φ) u v`.
    pub mesh: Option<&'a TriMesh>,
}

impl<'a> PenaltyOperator<'a> {
    pub fn grid(laplacian: &'a SparseOperator, mask: &'a [bool], node_weight: f64) -> Self {
        Self {
            stiffness: laplacian,
            mass: None,
            mask: Some(mask),
            node_weight,
            mesh: None,
        }
    }

    pub fn surface(stiffness: &'a SparseOperator, mass: &'a SparseOperator, mesh: &'a TriMesh) -> Self {
        Self {
            stiffness,
            mass: Some(mass),
            mask: None,
            node_weight: 1.0,
            mesh: Some(mesh),
        }
    }

    /// Density with masked-out nodes forced to zero.
    pub fn effective_density(&self, phi: &[f64]) -> Vec<f64> {
        match self.mask {
            Some(mask) => phi
                .iter()
                .zip(mask)
                .map(|(&p, &m)| if m { p } else { 0.0 })
                .collect(),
            None => phi.to_vec(),
        }
    }

    /// Restricted penalized operator and restricted mass matrix.
    pub fn assemble(
        &self,
        phi: &[f64],
        c: f64,
        nb: &Neighborhood,
    ) -> Result<(SparseOperator, Option<SparseOperator>)> {
        let phi = self.effective_density(phi);
        let base = self.stiffness.principal_submatrix(nb.nodes())?;
        match (self.mass, self.mesh) {
            (Some(m), Some(mesh)) => {
                let w: Vec<f64> = phi.iter().map(|p| c * (1.0 - p)).collect();
                let a = base.add_scaled(1.0, &weighted_mass(mesh, &w, nb.nodes())?);
                Ok((a, Some(m.principal_submatrix(nb.nodes())?)))
            }
            (Some(m), None) => {
                let mr = m.principal_submatrix(nb.nodes())?;
                let lumped = mr.row_sums();
                let penalty: Vec<f64> = nb
                    .nodes()
                    .iter()
                    .zip(&lumped)
                    .map(|(&g, l)| c * (1.0 - phi[g]) * l)
                    .collect();
                Ok((base.add_diagonal(&penalty), Some(mr)))
            }
            (None, _) => {
                let penalty: Vec<f64> = nb.nodes().iter().map(|&g| c * (1.0 - phi[g])).collect();
                Ok((base.add_diagonal(&penalty), None))
            }
        }
    }
}

/// Solves the penalized problem for density `phi` on neighborhood `nb`. The
/// returned eigenvector is zero-extended to all nodes. `warm` is an optional
/// full-length starting vector.
pub fn penalized_eigenvalue(
    op: &PenaltyOperator,
    phi: &[f64],
    c: f64,
    nb: &Neighborhood,
    warm: Option<&[f64]>,
    opts: &EigOptions,
) -> Result<EigResult> {
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!("penalization must be positive, got {c}")));
    }
    if nb.is_empty() {
        return Err(Error::EmptyNeighborhood);
    }
    if phi.len() != op.stiffness.order() || nb.total() != phi.len() {
        return Err(Error::InvalidArgument("density length does not match the operator".into()));
    }
    let (a, m) = op.assemble(phi, c, nb)?;
    let init = warm.map(|w| nb.restrict(w));
    let mut res = smallest_eigenpairs(&a, m.as_ref(), 1, init.as_deref(), opts)?.remove(0);
    if op.mass.is_none() {
        let s = 1.0 / op.node_weight.sqrt();
        res.eigenvector.iter_mut().for_each(|x| *x *= s);
    }
    res.eigenvector = nb.extend(&res.eigenvector);
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{assemble_laplacian, build_grid, BoundaryMode, DomainSpec};

    fn tridiag(n: usize, h: f64) -> SparseOperator {
        let s = 1.0 / (h * h);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 * s));
            if i + 1 < n {
                t.push((i, i + 1, -s));
                t.push((i + 1, i, -s));
            }
        }
        SparseOperator::from_triplets(n, t).unwrap()
    }

    #[test]
    fn two_by_two() {
        let a = SparseOperator::from_triplets(
            2,
            [(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)],
        )
        .unwrap();
        let r = smallest_eigpair(&a, &EigOptions::default()).unwrap();
        assert!((r.eigenvalue - 1.0).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.eigenvector[0] - s).abs() < 1e-12 && (r.eigenvector[1] - s).abs() < 1e-12);
    }

    #[test]
    fn iterative_path_matches_closed_form() {
        let n = 600;
        let h = 1.0 / (n as f64 + 1.0);
        let a = tridiag(n, h);
        let exact = 4.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
        // One-dimensional Laplacians are the worst conditioned case.
        let opts = EigOptions {
            max_iter: Some(1500),
            ..EigOptions::default()
        };
        let r = smallest_eigpair(&a, &opts).unwrap();
        assert!((r.eigenvalue - exact).abs() / exact < 1e-10, "{} vs {}", r.eigenvalue, exact);
        assert!(r.residual <= 1e-8);
        assert!(r.eigenvector.iter().all(|&x| x >= -1e-8));
    }

    #[test]
    fn uniform_shift() {
        let g = build_grid(&DomainSpec::unit_square(), 24, BoundaryMode::Dirichlet).unwrap();
        let l = assemble_laplacian(&g);
        let opts = EigOptions::default();
        let base = smallest_eigpair(&l, &opts).unwrap().eigenvalue;
        for c in [1.0, 10.0, 1000.0] {
            let shifted = l.add_diagonal(&vec![c; l.order()]);
            let s = smallest_eigpair(&shifted, &opts).unwrap().eigenvalue;
            assert!((s - base - c).abs() < 1e-6 * (base + c), "c={c}");
        }
    }

    #[test]
    fn identity_mass_agrees_with_standard() {
        let a = tridiag(300, 0.01);
        let opts = EigOptions {
            max_iter: Some(1500),
            ..EigOptions::default()
        };
        let s = smallest_eigpair(&a, &opts).unwrap();
        let g = smallest_eigpair_generalized(&a, &SparseOperator::identity(300), &opts).unwrap();
        assert!((s.eigenvalue - g.eigenvalue).abs() < 1e-8 * s.eigenvalue);
    }

    #[test]
    fn several_smallest_against_dense() {
        let a = tridiag(250, 0.02);
        let m = SparseOperator::from_diagonal(&(0..250).map(|i| 1.0 + (i % 3) as f64).collect::<Vec<_>>());
        let it = smallest_eigenpairs(&a, Some(&m), 4, None, &EigOptions::default()).unwrap();
        let de = solve_dense(&a, Some(&m), 4).unwrap();
        for (x, y) in it.iter().zip(&de) {
            assert!((x.eigenvalue - y.eigenvalue).abs() < 1e-7 * y.eigenvalue);
        }
    }

    #[test]
    fn indefinite_mass_is_rejected() {
        let a = tridiag(10, 0.1);
        let mut d = vec![1.0; 10];
        d[3] = -1.0;
        let m = SparseOperator::from_diagonal(&d);
        assert!(matches!(
            smallest_eigpair_generalized(&a, &m, &EigOptions::default()),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn iteration_cap_reports_best_residual() {
        let a = tridiag(2000, 1e-3);
        let opts = EigOptions {
            max_iter: Some(2),
            preconditioner: PreconditionerKind::None,
            ..EigOptions::default()
        };
        match smallest_eigpair(&a, &opts) {
            Err(Error::NotConverged { iterations, residual }) => {
                assert_eq!(iterations, 2);
                assert!(residual.is_finite() && residual > 1e-8);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
