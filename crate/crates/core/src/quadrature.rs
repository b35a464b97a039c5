//! Quadrature rules with refinement-based error estimates.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub value: f64,
    /// Estimated absolute error from comparing two resolutions.
    pub error: f64,
    pub evaluations: usize,
}

/// Composite Simpson rule over `values[0..=n]` with spacing `h`; `n` even.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    assert!(n % 2 == 0, "Simpson needs an even number of intervals");
    if n == 0 {
        return 0.0;
    }
    let mut odd = 0.0;
    let mut even = 0.0;
    for (i, v) in values.iter().enumerate().take(n).skip(1) {
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    h / 3.0 * (values[0] + values[n] + 4.0 * odd + 2.0 * even)
}

/// Simpson on `values[0..=n]` with `n` divisible by 4, with the Richardson
/// estimate `|S_h − S_{2h}| / 15`.
pub fn simpson_with_error(values: &[f64], h: f64) -> Quadrature {
    let n = values.len() - 1;
    assert!(n % 4 == 0, "refinement estimate needs n divisible by 4");
    let fine = simpson(values, h);
    let coarse_vals: Vec<f64> = values.iter().step_by(2).copied().collect();
    let coarse = simpson(&coarse_vals, 2.0 * h);
    Quadrature {
        value: fine,
        error: (fine - coarse).abs() / 15.0,
        evaluations: values.len(),
    }
}

/// Trapezoid rule on `[a, b]` with spacing at most `max_spacing`, compared
/// against the rule on every other node.
pub fn trapezoid<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, max_spacing: f64) -> Result<Quadrature> {
    if !(b >= a) || !(max_spacing > 0.0) {
        return Err(Error::Grid(format!(
            "bad trapezoid interval [{a}, {b}] or spacing {max_spacing}"
        )));
    }
    if b == a {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let mut n = ((b - a) / max_spacing).ceil() as usize;
    n = n.max(2);
    if n % 2 == 1 {
        n += 1;
    }
    let h = (b - a) / n as f64;
    let vals: Vec<f64> = (0..=n).map(|i| f(a + i as f64 * h)).collect();
    let fine = h * (0.5 * (vals[0] + vals[n]) + vals[1..n].iter().sum::<f64>());
    let coarse = 2.0
        * h
        * (0.5 * (vals[0] + vals[n]) + vals[2..n].iter().step_by(2).sum::<f64>());
    Ok(Quadrature {
        value: fine,
        error: (fine - coarse).abs() / 3.0,
        evaluations: n + 1,
    })
}

/// Integral over the whole real line via `E = c + s·tan φ`.
///
/// For integrands that are rational in `E` and decay like `E^{−2}`, the
/// mapped integrand is smooth and `π`-periodic in `φ`, so the midpoint rule
/// converges geometrically. The node count doubles until two successive
/// values agree to `rtol`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullLineRule {
    pub center: f64,
    pub scale: f64,
    pub initial_points: usize,
    pub rtol: f64,
    pub max_points: usize,
}

impl FullLineRule {
    /// Rule for Lorentzian features of width `width` in `[lo, hi]`.
    pub fn for_spectrum(lo: f64, hi: f64, width: f64, rtol: f64) -> Self {
        let center = 0.5 * (lo + hi);
        let scale = (0.5 * (hi - lo)).max(width).max(1e-3);
        let initial = ((4.0 * PI * scale / width).ceil() as usize).clamp(64, 1 << 22);
        Self {
            center,
            scale,
            initial_points: initial,
            rtol,
            max_points: 1 << 24,
        }
    }

    fn midpoint<F: FnMut(f64) -> f64>(&self, f: &mut F, n: usize) -> f64 {
        let dphi = PI / n as f64;
        let mut acc = 0.0;
        for j in 0..n {
            let phi = -0.5 * PI + (j as f64 + 0.5) * dphi;
            let c = phi.cos();
            let e = self.center + self.scale * phi.tan();
            acc += f(e) * self.scale / (c * c);
        }
        acc * dphi
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> Result<Quadrature> {
        let mut n = self.initial_points.max(8);
        let mut prev = self.midpoint(&mut f, n);
        let mut evaluations = n;
        loop {
            n *= 2;
            let cur = self.midpoint(&mut f, n);
            evaluations += n;
            let err = (cur - prev).abs();
            if err <= self.rtol * cur.abs() || err == 0.0 {
                return Ok(Quadrature {
                    value: cur,
                    error: err,
                    evaluations,
                });
            }
            if n >= self.max_points {
                return Err(Error::Grid(format!(
                    "full-line quadrature did not reach rtol {:e} with {n} nodes (last change {err:e})",
                    self.rtol
                )));
            }
            prev = cur;
        }
    }
}
