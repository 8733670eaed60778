use serde::{Deserialize, Serialize};

use crate::sparse::SparseOperator;

/// Approximate inverse applied to residual blocks.
pub trait Preconditioner: Sync {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreconditionerKind {
    None,
    Jacobi,
    /// Symmetric Gauss–Seidel sweep.
    #[default]
    Ssor,
}

pub(crate) struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

pub(crate) struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub(crate) fn new(a: &SparseOperator) -> Self {
        Self {
            inv_diag: a
                .diagonal()
                .into_iter()
                .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
                .collect(),
        }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

/// `M = (D + L) D⁻¹ (D + U)` for `A = L + D + U`; SPD whenever `A` is
/// symmetric with positive diagonal.
pub(crate) struct Ssor<'a> {
    a: &'a SparseOperator,
    diag: Vec<f64>,
    diag_pos: Vec<usize>,
}

impl<'a> Ssor<'a> {
    pub(crate) fn new(a: &'a SparseOperator) -> Option<Self> {
        let rp = a.row_ptr();
        let ci = a.col_idx();
        let mut diag = Vec::with_capacity(a.order());
        let mut diag_pos = Vec::with_capacity(a.order());
        for i in 0..a.order() {
            let row = &ci[rp[i]..rp[i + 1]];
            let k = row.binary_search(&i).ok()?;
            let d = a.values()[rp[i] + k];
            if !(d > 0.0) {
                return None;
            }
            diag.push(d);
            diag_pos.push(rp[i] + k);
        }
        Some(Self { a, diag, diag_pos })
    }
}

impl Preconditioner for Ssor<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let rp = self.a.row_ptr();
        let ci = self.a.col_idx();
        let v = self.a.values();
        let n = r.len();
        // (D + L) y = r
        for i in 0..n {
            let mut acc = r[i];
            for k in rp[i]..self.diag_pos[i] {
                acc -= v[k] * z[ci[k]];
            }
            z[i] = acc / self.diag[i];
        }
        // (D + U) z = D y
        for i in (0..n).rev() {
            let mut acc = z[i] * self.diag[i];
            for k in self.diag_pos[i] + 1..rp[i + 1] {
                acc -= v[k] * z[ci[k]];
            }
            z[i] = acc / self.diag[i];
        }
    }
}

pub(crate) fn build<'a>(kind: PreconditionerKind, a: &'a SparseOperator) -> Box<dyn Preconditioner + 'a> {
    match kind {
        PreconditionerKind::None => Box::new(Identity),
        PreconditionerKind::Jacobi => Box::new(Jacobi::new(a)),
        PreconditionerKind::Ssor => match Ssor::new(a) {
            Some(p) => Box::new(p),
            None => Box::new(Jacobi::new(a)),
        },
    }
}
