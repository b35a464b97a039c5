//! The lattice Hamiltonian `H = −Δ_d + V`, its Dirichlet restrictions,
//! exact spectral decompositions and smooth energy filters.
//!
//! `−Δ_d` is pure nearest-neighbour hopping with amplitude `+1` and no
//! diagonal term: `(−Δ_d ψ)(n) = Σ_{|i−n|=1} ψ(i)`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::disorder::DisorderField;
use crate::error::{Error, Result};
use crate::lattice::{Cuboid, LatticeBox, LatticeSpec, Site};

pub const HOPPING: f64 = 1.0;
pub const DEFAULT_MATRIX_CAP: usize = 4096;
const NO_ROW: usize = usize::MAX;

/// Sparse symmetric operator on a lattice window or on a box inside it.
#[derive(Debug, Clone)]
pub struct LatticeOperator {
    lattice: LatticeSpec,
    diag: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    /// Lattice index of each row.
    lattice_index: Vec<usize>,
    /// Row of each lattice index, `NO_ROW` when the site is not represented.
    row_of_index: Vec<usize>,
    restriction: Option<LatticeBox>,
    bandwidth: usize,
}

pub fn assemble(lattice: &LatticeSpec, field: &DisorderField) -> Result<LatticeOperator> {
    let n = lattice.num_sites();
    if field.values.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: field.values.len(),
        });
    }
    let rows: Vec<usize> = (0..n).collect();
    Ok(LatticeOperator::from_rows(lattice, &field.values, &rows, None))
}

impl LatticeOperator {
    fn from_rows(
        lattice: &LatticeSpec,
        potential: &[f64],
        rows: &[usize],
        restriction: Option<LatticeBox>,
    ) -> Self {
        let mut row_of_index = vec![NO_ROW; lattice.num_sites()];
        for (r, &i) in rows.iter().enumerate() {
            row_of_index[i] = r;
        }
        let mut diag = Vec::with_capacity(rows.len());
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut bandwidth = 0;
        row_ptr.push(0);
        for (r, &i) in rows.iter().enumerate() {
            diag.push(potential[i]);
            let site = lattice.site_of(i);
            let mut nbrs: Vec<usize> = lattice
                .neighbors(&site)
                .iter()
                .filter_map(|s| lattice.index_of(s))
                .filter_map(|k| match row_of_index[k] {
                    NO_ROW => None,
                    c => Some(c),
                })
                .collect();
            nbrs.sort_unstable();
            for c in nbrs {
                bandwidth = bandwidth.max(c.abs_diff(r));
                cols.push(c);
                vals.push(HOPPING);
            }
            row_ptr.push(cols.len());
        }
        Self {
            lattice: *lattice,
            diag,
            row_ptr,
            cols,
            vals,
            lattice_index: rows.to_vec(),
            row_of_index,
            restriction,
            bandwidth,
        }
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn restriction(&self) -> Option<&LatticeBox> {
        self.restriction.as_ref()
    }

    /// Largest `|i − j|` over stored off-diagonal entries.
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn row_entries(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[row]..self.row_ptr[row + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        if row == col {
            return self.diag[row];
        }
        self.row_entries(row)
            .find(|&(c, _)| c == col)
            .map(|(_, v)| v)
            .unwrap_or(0.0)
    }

    pub fn row_of(&self, site: &Site) -> Option<usize> {
        let i = self.lattice.index_of(site)?;
        match self.row_of_index[i] {
            NO_ROW => None,
            r => Some(r),
        }
    }

    pub fn site_of_row(&self, row: usize) -> Site {
        self.lattice.site_of(self.lattice_index[row])
    }

    pub fn sites(&self) -> Vec<Site> {
        (0..self.dim()).map(|r| self.site_of_row(r)).collect()
    }

    pub fn lattice_indices(&self) -> &[usize] {
        &self.lattice_index
    }

    /// Off-diagonal entries per row.
    pub fn off_diagonal_count(&self, row: usize) -> usize {
        self.row_ptr[row + 1] - self.row_ptr[row]
    }

    /// Row-sum (Gershgorin) bound on `‖H‖`.
    pub fn gershgorin_bound(&self) -> f64 {
        (0..self.dim())
            .map(|r| self.diag[r].abs() + self.row_entries(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Interval containing the spectrum, from Gershgorin discs.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in 0..self.dim() {
            let rad: f64 = self.row_entries(r).map(|(_, v)| v.abs()).sum();
            lo = lo.min(self.diag[r] - rad);
            hi = hi.max(self.diag[r] + rad);
        }
        (lo, hi)
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.dim() {
            let mut acc = self.diag[r] * x[r];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[r] = acc;
        }
    }

    pub fn apply_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        for r in 0..self.dim() {
            let mut acc = x[r] * self.diag[r];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += x[self.cols[k]] * self.vals[k];
            }
            y[r] = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for r in 0..n {
            m[(r, r)] = self.diag[r];
            for (c, v) in self.row_entries(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// Same hopping with `shift` added to every diagonal entry.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut out = self.clone();
        for d in &mut out.diag {
            *d += shift;
        }
        out
    }

    /// Entries of `[H, X_axis]`: `H_xy (y_axis − x_axis)`, as an
    /// antisymmetric sparse matrix in CSR triplets `(row, col, value)`.
    pub fn commutator_with_position(&self, axis: usize) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for r in 0..self.dim() {
            let xr = self.site_of_row(r)[axis];
            for (c, v) in self.row_entries(r) {
                let xc = self.site_of_row(c)[axis];
                let w = v * (xc - xr) as f64;
                if w != 0.0 {
                    out.push((r, c, w));
                }
            }
        }
        out
    }

    /// Operator norm of `[H, X_axis]`. The potential commutes with `X`, so
    /// this only sees the hopping.
    pub fn commutator_norm(&self, axis: usize) -> f64 {
        let n = self.dim();
        let mut c = DMatrix::<f64>::zeros(n, n);
        for (r, col, w) in self.commutator_with_position(axis) {
            c[(r, col)] = w;
        }
        let ctc = c.transpose() * &c;
        let ev = ctc.symmetric_eigenvalues();
        ev.iter().fold(0.0f64, |m, &v| m.max(v)).max(0.0).sqrt()
    }
}

/// Dirichlet restriction to the sites of `bx`: the exact principal
/// submatrix, with bonds crossing the box surface deleted.
pub fn restrict(op: &LatticeOperator, bx: &LatticeBox) -> Result<LatticeOperator> {
    let rows: Vec<usize> = bx
        .indices(&op.lattice)
        .into_iter()
        .filter(|&i| op.row_of_index[i] != NO_ROW)
        .collect();
    if rows.is_empty() {
        return Err(Error::Geometry(format!(
            "box of radius {} at {:?} contains no sites of the operator",
            bx.radius, bx.center
        )));
    }
    let mut potential = vec![0.0; op.lattice.num_sites()];
    for (r, &i) in op.lattice_index.iter().enumerate() {
        potential[i] = op.diag[r];
    }
    Ok(LatticeOperator::from_rows(&op.lattice, &potential, &rows, Some(*bx)))
}

/// Dirichlet restriction to the sites of a cuboid.
pub fn restrict_cuboid(op: &LatticeOperator, block: &Cuboid) -> Result<LatticeOperator> {
    let rows: Vec<usize> = block
        .indices(&op.lattice)
        .into_iter()
        .filter(|&i| op.row_of_index[i] != NO_ROW)
        .collect();
    if rows.is_empty() {
        return Err(Error::Geometry(format!(
            "cuboid {:?}..{:?} contains no sites of the operator",
            block.lower, block.upper
        )));
    }
    let mut potential = vec![0.0; op.lattice.num_sites()];
    for (r, &i) in op.lattice_index.iter().enumerate() {
        potential[i] = op.diag[r];
    }
    Ok(LatticeOperator::from_rows(&op.lattice, &potential, &rows, None))
}

/// Eigenvalues in ascending order with orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
    /// `max_k ‖H v_k − θ_k v_k‖`.
    pub max_residual: f64,
    pub operator_norm: f64,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, k: usize) -> nalgebra::DVectorView<'_, f64> {
        self.eigenvectors.column(k)
    }

    /// Coefficients `⟨v_k, ψ⟩`.
    pub fn coefficients(&self, psi: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(psi.len(), n);
        (0..n)
            .map(|k| {
                let col = self.eigenvectors.column(k);
                col.iter().zip(psi).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    pub fn coefficients_complex(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(psi.len(), n);
        (0..n)
            .map(|k| {
                let col = self.eigenvectors.column(k);
                col.iter().zip(psi).map(|(a, b)| b * *a).sum()
            })
            .collect()
    }

    /// `Σ_k c_k v_k`.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (k, c) in coeffs.iter().enumerate() {
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            let col = self.eigenvectors.column(k);
            for (o, v) in out.iter_mut().zip(col.iter()) {
                *o += c * *v;
            }
        }
        out
    }

    /// Max-norm deviation of `VᵀV` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.eigenvectors.transpose() * &self.eigenvectors;
        let n = self.dim();
        let mut err = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((g[(i, j)] - target).abs());
            }
        }
        err
    }
}

pub fn diagonalize(op: &LatticeOperator) -> Result<SpectralDecomposition> {
    diagonalize_with_cap(op, DEFAULT_MATRIX_CAP)
}

pub fn diagonalize_with_cap(op: &LatticeOperator, cap: usize) -> Result<SpectralDecomposition> {
    let n = op.dim();
    if n > cap {
        return Err(Error::CapExceeded { dim: n, cap });
    }
    let eig = SymmetricEigen::new(op.to_dense());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        // fix the sign: largest-magnitude component (first on ties) positive
        let mut pivot = 0;
        for i in 0..n {
            if col[i].abs() > col[pivot].abs() + 1e-12 {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, dst)] = sign * col[i];
        }
    }
    let mut max_residual = 0.0f64;
    let mut hv = vec![0.0; n];
    for k in 0..n {
        let v: Vec<f64> = vectors.column(k).iter().copied().collect();
        op.apply(&v, &mut hv);
        let r: f64 = hv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - eigenvalues[k] * b).powi(2))
            .sum::<f64>()
            .sqrt();
        max_residual = max_residual.max(r);
    }
    let operator_norm = eigenvalues
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors: vectors,
        max_residual,
        operator_norm,
    })
}

/// Eigenvalues only, ascending.
pub fn eigenvalues(op: &LatticeOperator) -> Vec<f64> {
    let mut ev: Vec<f64> = op.to_dense().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Smooth step: 0 for `u ≤ 0`, 1 for `u ≥ 1`, `g(u)/(g(u)+g(1−u))` with
/// `g(u) = exp(−1/u)` in between.
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let g = |x: f64| (-1.0 / x).exp();
        let a = g(u);
        a / (a + g(1.0 - u))
    }
}

/// Smooth energy filter `f` with `0 ≤ f ≤ 1`, supported in `[a+δ, b−δ]`
/// for the outer interval `I = [a, b]`, and equal to 1 on the plateau
/// `[a+δ+w, b−δ−w]` where `w` is the ramp width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub lower: f64,
    pub upper: f64,
    pub margin: f64,
    pub ramp: f64,
}

impl FilterSpec {
    pub fn new(lower: f64, upper: f64, margin: f64, ramp: f64) -> Result<Self> {
        if !(margin > 0.0) || !(ramp > 0.0) {
            return Err(Error::Parameter(
                "filter margin and ramp width must be positive".into(),
            ));
        }
        if !(upper - lower > 2.0 * margin) {
            return Err(Error::Parameter(format!(
                "filter interval [{lower}, {upper}] too short for margin {margin}"
            )));
        }
        Ok(Self {
            lower,
            upper,
            margin,
            ramp,
        })
    }

    /// Closed support `[a+δ, b−δ]`.
    pub fn support(&self) -> (f64, f64) {
        (self.lower + self.margin, self.upper - self.margin)
    }

    pub fn plateau(&self) -> (f64, f64) {
        let (s0, s1) = self.support();
        (s0 + self.ramp, s1 - self.ramp)
    }

    pub fn value(&self, e: f64) -> f64 {
        let (s0, s1) = self.support();
        smooth_step((e - s0) / self.ramp) * smooth_step((s1 - e) / self.ramp)
    }
}

/// `f(H)ψ = Σ_k f(θ_k) ⟨v_k, ψ⟩ v_k` by exact eigen-expansion.
pub fn apply_filter(spec: &FilterSpec, decomp: &SpectralDecomposition, psi: &[f64]) -> Vec<f64> {
    let coeffs = decomp.coefficients(psi);
    let n = decomp.dim();
    let mut out = vec![0.0; n];
    for (k, c) in coeffs.iter().enumerate() {
        let w = spec.value(decomp.eigenvalues[k]) * c;
        if w == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(decomp.eigenvectors.column(k).iter()) {
            *o += w * v;
        }
    }
    out
}
