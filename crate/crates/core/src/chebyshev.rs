//! Chebyshev expansions of `e^{−itH}` and of smooth filters `f(H)`.
//!
//! Both only need matrix-vector products, so they run on lattices above the
//! diagonalization cap. The exact eigen-expansion stays the reference path.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::operator::{FilterSpec, LatticeOperator};

/// Affine map `H̃ = (H − center)/half_width` with spectrum inside `[−1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralWindow {
    pub center: f64,
    pub half_width: f64,
}

impl SpectralWindow {
    /// Gershgorin interval, widened slightly so the rescaled spectrum stays
    /// strictly inside `[−1, 1]`.
    pub fn of(op: &LatticeOperator) -> Self {
        let (lo, hi) = op.spectral_bounds();
        let center = 0.5 * (lo + hi);
        let half_width = 0.5 * (hi - lo) * 1.01 + 1e-3;
        Self { center, half_width }
    }

    fn apply<T>(&self, op: &LatticeOperator, x: &[T], y: &mut [T])
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Sub<Output = T> + std::ops::Add<Output = T>,
    {
        let inv = 1.0 / self.half_width;
        for r in 0..op.dim() {
            let mut acc = x[r] * (op.diagonal()[r] - self.center);
            for (c, v) in op.row_entries(r) {
                acc = acc + x[c] * v;
            }
            y[r] = acc * inv;
        }
    }
}

/// `J_0(x), …, J_{n−1}(x)` by Miller's backward recurrence, normalized with
/// `J_0 + 2 Σ_k J_{2k} = 1`.
pub fn bessel_j_sequence(x: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let mut start = n.max(ax.ceil() as usize) + 40 + (10.0 * ax.sqrt()) as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let mut vals = vec![0.0f64; start + 2];
    vals[start] = 1e-300;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        vals[k - 1] = 2.0 * k as f64 / ax * vals[k] - vals[k + 1];
        if vals[k - 1].abs() > 1e250 {
            for v in vals.iter_mut().take(start + 1).skip(k - 1) {
                *v *= 1e-250;
            }
            norm *= 1e-250;
        }
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * vals[k - 1];
        }
    }
    norm += vals[0];
    for k in 0..n {
        let v = vals[k] / norm;
        // J_k(−x) = (−1)^k J_k(x)
        out[k] = if x < 0.0 && k % 2 == 1 { -v } else { v };
    }
    out
}

/// One fixed time step `e^{−iH dt}` as a truncated Chebyshev series.
#[derive(Debug, Clone)]
pub struct ChebyshevPropagator<'a> {
    op: &'a LatticeOperator,
    window: SpectralWindow,
    dt: f64,
    coeffs: Vec<Complex64>,
}

impl<'a> ChebyshevPropagator<'a> {
    pub fn new(op: &'a LatticeOperator, dt: f64, tolerance: f64) -> Result<Self> {
        if !(dt.is_finite() && dt >= 0.0) {
            return Err(Error::Parameter(format!("time step must be finite and nonnegative, got {dt}")));
        }
        let window = SpectralWindow::of(op);
        let x = window.half_width * dt;
        let n = (x.ceil() as usize) + 64 + (4.0 * x.sqrt()) as usize;
        let j = bessel_j_sequence(x, n);
        let cutoff = tolerance.max(1e-300) * 1e-2;
        let mut keep = n;
        while keep > 1 && j[keep - 1].abs() < cutoff && (keep as f64) > x {
            keep -= 1;
        }
        let phase = Complex64::from_polar(1.0, -window.center * dt);
        let mut coeffs = Vec::with_capacity(keep);
        let mut mi = Complex64::new(1.0, 0.0);
        for (k, jk) in j.iter().take(keep).enumerate() {
            let w = if k == 0 { 1.0 } else { 2.0 };
            coeffs.push(phase * mi * (w * jk));
            mi *= Complex64::new(0.0, -1.0);
        }
        Ok(Self { op, window, dt, coeffs })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of Chebyshev terms per step.
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn step(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let n = psi.len();
        let mut out: Vec<Complex64> = psi.iter().map(|v| v * self.coeffs[0]).collect();
        if self.coeffs.len() == 1 {
            return out;
        }
        let mut prev = psi.to_vec();
        let mut cur = vec![Complex64::new(0.0, 0.0); n];
        self.window.apply(self.op, &prev, &mut cur);
        for (o, c) in out.iter_mut().zip(&cur) {
            *o += c * self.coeffs[1];
        }
        let mut next = vec![Complex64::new(0.0, 0.0); n];
        for ck in &self.coeffs[2..] {
            self.window.apply(self.op, &cur, &mut next);
            for i in 0..n {
                next[i] = next[i] * 2.0 - prev[i];
                out[i] += next[i] * ck;
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
        out
    }
}

/// `e^{−iHt}ψ` in steps of at most `max_step`.
pub fn propagate(
    op: &LatticeOperator,
    psi: &[Complex64],
    t: f64,
    max_step: f64,
    tolerance: f64,
) -> Result<Vec<Complex64>> {
    let steps = (t.abs() / max_step).ceil().max(1.0) as usize;
    let prop = ChebyshevPropagator::new(op, t / steps as f64, tolerance)?;
    let mut state = psi.to_vec();
    for _ in 0..steps {
        state = prop.step(&state);
    }
    Ok(state)
}

/// Polynomial approximation of a filter `f(H)`.
#[derive(Debug, Clone)]
pub struct ChebyshevFilter<'a> {
    op: &'a LatticeOperator,
    window: SpectralWindow,
    coeffs: Vec<f64>,
}

impl<'a> ChebyshevFilter<'a> {
    /// Picks the degree where all further coefficients fall below
    /// `tolerance / 10`, doubling the node count up to `2^22` as needed.
    pub fn new(op: &'a LatticeOperator, spec: &FilterSpec, tolerance: f64) -> Result<Self> {
        let window = SpectralWindow::of(op);
        let f = |x: f64| spec.value(window.center + window.half_width * x);
        let mut nodes = 4096usize;
        loop {
            let c = chebyshev_coefficients(&f, nodes);
            let cutoff = tolerance / 10.0;
            let tail_start = nodes / 2;
            let tail_max = c[tail_start..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if tail_max < cutoff {
                let mut keep = tail_start;
                while keep > 1 && c[keep - 1].abs() < cutoff {
                    keep -= 1;
                }
                let coeffs = c[..keep].to_vec();
                return Ok(Self { op, window, coeffs });
            }
            if nodes >= 1 << 22 {
                return Err(Error::Parameter(format!(
                    "filter ramp too sharp for a Chebyshev expansion to tolerance {tolerance:e}"
                )));
            }
            nodes *= 2;
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn apply(&self, psi: &[f64]) -> Vec<f64> {
        let n = psi.len();
        let mut out: Vec<f64> = psi.iter().map(|v| v * self.coeffs[0]).collect();
        if self.coeffs.len() == 1 {
            return out;
        }
        let mut prev = psi.to_vec();
        let mut cur = vec![0.0; n];
        self.window.apply(self.op, &prev, &mut cur);
        for (o, c) in out.iter_mut().zip(&cur) {
            *o += c * self.coeffs[1];
        }
        let mut next = vec![0.0; n];
        for &ck in &self.coeffs[2..] {
            self.window.apply(self.op, &cur, &mut next);
            for i in 0..n {
                next[i] = 2.0 * next[i] - prev[i];
                out[i] += ck * next[i];
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
        out
    }
}

/// Chebyshev coefficients `c_k` of `f` on `[−1, 1]` from `m` Gauss nodes,
/// so that `f(x) ≈ Σ_k c_k T_k(x)`.
fn chebyshev_coefficients(f: &dyn Fn(f64) -> f64, m: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    let mut buf = vec![Complex64::new(0.0, 0.0); 2 * m];
    for (j, b) in buf.iter_mut().take(m).enumerate() {
        let theta = PI * (j as f64 + 0.5) / m as f64;
        *b = Complex64::new(f(theta.cos()), 0.0);
    }
    // Σ_j f_j e^{iπkj/m} as an inverse DFT of length 2m
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(2 * m).process(&mut buf);
    (0..m)
        .map(|k| {
            let shift = Complex64::from_polar(1.0, PI * k as f64 / (2.0 * m as f64));
            let s = (shift * buf[k]).re * 2.0 / m as f64;
            if k == 0 {
                0.5 * s
            } else {
                s
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{sample_field, DisorderSpec};
    use crate::lattice::LatticeSpec;
    use crate::operator::{apply_filter, assemble, diagonalize};

    #[test]
    fn bessel_reference_values() {
        // J_0(1), J_1(1), J_5(10) from Abramowitz and Stegun tables
        let j = bessel_j_sequence(1.0, 3);
        assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-14);
        let j = bessel_j_sequence(10.0, 6);
        assert!((j[5] - (-0.234_061_528_186_793_6)).abs() < 1e-13);
        let j = bessel_j_sequence(-1.0, 2);
        assert!((j[1] + 0.440_050_585_744_933_5).abs() < 1e-14);
    }

    fn disordered_chain(n: usize) -> LatticeOperator {
        let lat = LatticeSpec::chain(n).unwrap();
        let f = sample_field(&DisorderSpec::iid_uniform(3.0, 11, 1), &lat, 0).unwrap();
        assemble(&lat, &f).unwrap()
    }

    #[test]
    fn propagator_matches_exact_evolution() {
        let op = disordered_chain(41);
        let dec = diagonalize(&op).unwrap();
        let mut psi = vec![Complex64::new(0.0, 0.0); 41];
        psi[20] = Complex64::new(1.0, 0.0);
        psi[21] = Complex64::new(0.0, 1.0);
        let t = 7.3;
        let cheb = propagate(&op, &psi, t, 0.5, 1e-14).unwrap();
        let c = dec.coefficients_complex(&psi);
        let phased: Vec<Complex64> = c
            .iter()
            .zip(&dec.eigenvalues)
            .map(|(ck, th)| ck * Complex64::from_polar(1.0, -th * t))
            .collect();
        let exact = dec.synthesize(&phased);
        let err = cheb
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn filter_matches_exact_expansion() {
        let op = disordered_chain(61);
        let dec = diagonalize(&op).unwrap();
        let spec = FilterSpec::new(-2.5, -0.5, 0.1, 0.4).unwrap();
        let mut psi = vec![0.0; 61];
        psi[30] = 1.0;
        let cheb = ChebyshevFilter::new(&op, &spec, 1e-10).unwrap();
        let a = cheb.apply(&psi);
        let b = apply_filter(&spec, &dec, &psi);
        let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err} at degree {}", cheb.degree());
    }

    #[test]
    fn zero_step_is_identity() {
        let op = disordered_chain(9);
        let prop = ChebyshevPropagator::new(&op, 0.0, 1e-14).unwrap();
        let psi: Vec<Complex64> = (0..9).map(|i| Complex64::new(i as f64, 1.0)).collect();
        assert_eq!(prop.step(&psi), psi);
    }
}
