//! Banded complex LU for shifted systems `(H − z) x = b` with `Im z ≠ 0`.
//!
//! `H − z` has a definite imaginary part, so every leading principal minor
//! is nonsingular and elimination without pivoting is stable.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::LatticeOperator;

#[derive(Debug, Clone)]
pub struct ShiftedSolver<'a> {
    op: &'a LatticeOperator,
    z: Complex64,
    n: usize,
    band: usize,
    /// Row-major band storage of the LU factors, width `2·band + 1`.
    lu: Vec<Complex64>,
}

impl<'a> ShiftedSolver<'a> {
    pub fn new(op: &'a LatticeOperator, z: Complex64) -> Result<Self> {
        if z.im == 0.0 {
            return Err(Error::Parameter("shift must have a nonzero imaginary part".into()));
        }
        let n = op.dim();
        let b = op.bandwidth();
        let w = 2 * b + 1;
        let mut lu = vec![Complex64::new(0.0, 0.0); n * w];
        for r in 0..n {
            lu[r * w + b] = Complex64::new(op.diagonal()[r], 0.0) - z;
            for (c, v) in op.row_entries(r) {
                lu[r * w + (c + b - r)] = Complex64::new(v, 0.0);
            }
        }
        for k in 0..n {
            let pivot = lu[k * w + b];
            let last = (k + b).min(n - 1);
            for i in k + 1..=last {
                let lik = lu[i * w + (k + b - i)] / pivot;
                lu[i * w + (k + b - i)] = lik;
                if lik == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in k + 1..=last {
                    let akj = lu[k * w + (j + b - k)];
                    lu[i * w + (j + b - i)] -= lik * akj;
                }
            }
        }
        Ok(Self { op, z, n, band: b, lu })
    }

    pub fn shift(&self) -> Complex64 {
        self.z
    }

    fn solve_factored(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let (n, b, w) = (self.n, self.band, 2 * self.band + 1);
        let mut x = rhs.to_vec();
        for i in 0..n {
            let first = i.saturating_sub(b);
            let mut acc = x[i];
            for (k, xk) in x.iter().enumerate().take(i).skip(first) {
                acc -= self.lu[i * w + (k + b - i)] * xk;
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let last = (i + b).min(n - 1);
            let mut acc = x[i];
            for (j, xj) in x.iter().enumerate().take(last + 1).skip(i + 1) {
                acc -= self.lu[i * w + (j + b - i)] * xj;
            }
            x[i] = acc / self.lu[i * w + b];
        }
        x
    }

    /// `r = rhs − (H − z) x`.
    pub fn residual(&self, x: &[Complex64], rhs: &[Complex64]) -> Vec<Complex64> {
        let mut hx = vec![Complex64::new(0.0, 0.0); self.n];
        self.op.apply_complex(x, &mut hx);
        rhs.iter()
            .zip(hx.iter().zip(x))
            .map(|(b, (h, xi))| b - (h - self.z * xi))
            .collect()
    }

    /// Solution with one step of iterative refinement, and the final
    /// residual norm.
    pub fn solve(&self, rhs: &[Complex64]) -> (Vec<Complex64>, f64) {
        let mut x = self.solve_factored(rhs);
        let r = self.residual(&x, rhs);
        let dx = self.solve_factored(&r);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        let res = self.residual(&x, rhs).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        (x, res)
    }

    /// Column `(H − z)^{−1} δ_row`.
    pub fn column(&self, row: usize) -> (Vec<Complex64>, f64) {
        let mut rhs = vec![Complex64::new(0.0, 0.0); self.n];
        rhs[row] = Complex64::new(1.0, 0.0);
        self.solve(&rhs)
    }
}
