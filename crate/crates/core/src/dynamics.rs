//! Time evolution, second moments `m(t) = ‖|X| e^{−itH} ψ‖²`, Cesàro means
//! `C(T) = T^{−1} ∫_0^T m`, the ballistic bound and disorder averages.

use std::f64::consts::E as EULER;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chebyshev::{ChebyshevFilter, ChebyshevPropagator};
use crate::disorder::Provenance;
use crate::error::{Error, Result};
use crate::lattice::{sup_norm, Site};
use crate::operator::{apply_filter, FilterSpec, LatticeOperator, SpectralDecomposition};
use crate::quadrature::{simpson_with_error, trapezoid, FullLineRule, Quadrature};
use crate::stats;

/// How `e^{−itH}` is applied.
#[derive(Debug, Clone, Copy)]
pub enum Propagation<'a> {
    /// Exact eigen-expansion restricted to modes the state actually uses.
    Spectral(&'a SpectralDecomposition),
    /// Chebyshev steps on a uniform grid; works above the matrix cap.
    Chebyshev { tolerance: f64 },
}

/// Initial states used by the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialState {
    Delta(Site),
    FilteredDelta { site: Site, filter: FilterSpec },
}

impl InitialState {
    pub fn label(&self) -> String {
        match self {
            InitialState::Delta(s) => format!("delta{s:?}"),
            InitialState::FilteredDelta { site, filter } => format!(
                "filtered-delta{site:?} I=[{}, {}] margin {} ramp {}",
                filter.lower, filter.upper, filter.margin, filter.ramp
            ),
        }
    }

    /// State vector in the row basis of `op`. Filtering uses the exact
    /// expansion when a decomposition is given, the Chebyshev filter otherwise.
    pub fn prepare(
        &self,
        op: &LatticeOperator,
        decomp: Option<&SpectralDecomposition>,
        tolerance: f64,
    ) -> Result<Vec<f64>> {
        let site = match self {
            InitialState::Delta(s) | InitialState::FilteredDelta { site: s, .. } => *s,
        };
        let row = op
            .row_of(&site)
            .ok_or_else(|| Error::Geometry(format!("initial site {site:?} outside the operator")))?;
        let mut delta = vec![0.0; op.dim()];
        delta[row] = 1.0;
        match self {
            InitialState::Delta(_) => Ok(delta),
            InitialState::FilteredDelta { filter, .. } => match decomp {
                Some(d) => Ok(apply_filter(filter, d, &delta)),
                None => Ok(ChebyshevFilter::new(op, filter, tolerance)?.apply(&delta)),
            },
        }
    }
}

/// Guard against the wave packet reaching the edge of the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakGuard {
    /// Mass is counted on sites with `‖x‖_∞ > half_extent − margin`.
    pub margin: i64,
    pub threshold: f64,
}

impl Default for LeakGuard {
    fn default() -> Self {
        Self {
            margin: 10,
            threshold: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsTrace {
    pub provenance: Option<Provenance>,
    pub initial_state: String,
    pub times: Vec<f64>,
    pub second_moments: Vec<f64>,
    /// Tail mass near the window edge per time; empty without a guard.
    pub leak: Vec<f64>,
    pub cesaro_times: Vec<f64>,
    pub cesaro: Vec<f64>,
    pub cesaro_error: Vec<f64>,
}

impl DynamicsTrace {
    pub fn max_leak(&self) -> f64 {
        self.leak.iter().fold(0.0, |m, &v| m.max(v))
    }
}

/// `t_j = j·dt` for `j = 0..=round(t_max/dt)`.
pub fn uniform_time_grid(t_max: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !(t_max >= 0.0) {
        return Err(Error::Grid(format!("bad time grid t_max={t_max}, dt={dt}")));
    }
    let n = (t_max / dt).round() as usize;
    Ok((0..=n).map(|j| j as f64 * dt).collect())
}

/// `per_decade` points per decade from `t_min` to `t_max`, both included.
pub fn geometric_grid(t_min: f64, t_max: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0) || !(t_max >= t_min) || per_decade == 0 {
        return Err(Error::Grid(format!(
            "bad geometric grid [{t_min}, {t_max}] with {per_decade} points per decade"
        )));
    }
    let decades = (t_max / t_min).log10();
    let n = (decades * per_decade as f64).round() as usize;
    if n == 0 {
        return Ok(vec![t_min]);
    }
    Ok((0..=n)
        .map(|i| t_min * 10f64.powf(decades * i as f64 / n as f64))
        .collect())
}

/// `e^{−itH}ψ_0 = Σ_k e^{−iθ_k t} ⟨v_k, ψ_0⟩ v_k`.
pub fn evolve(decomp: &SpectralDecomposition, psi0: &[Complex64], t: f64) -> Vec<Complex64> {
    let c = decomp.coefficients_complex(psi0);
    let phased: Vec<Complex64> = c
        .iter()
        .zip(&decomp.eigenvalues)
        .map(|(ck, th)| ck * Complex64::from_polar(1.0, -th * t))
        .collect();
    decomp.synthesize(&phased)
}

fn check_time_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() || times[0] != 0.0 {
        return Err(Error::Grid("time grid must start at 0".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Grid("time grid must be strictly increasing".into()));
    }
    Ok(())
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::Grid("need at least two time points".into()));
    }
    let h = times[1] - times[0];
    for (j, &t) in times.iter().enumerate() {
        if (t - j as f64 * h).abs() > 1e-9 * h.max(t) {
            return Err(Error::Grid("time grid must be uniform".into()));
        }
    }
    Ok(h)
}

/// Row weights `g(site)` on the rows of `op`.
pub fn row_weights<F: Fn(&Site) -> f64>(op: &LatticeOperator, g: F) -> Vec<f64> {
    (0..op.dim()).map(|r| g(&op.site_of_row(r))).collect()
}

/// `|x|²` on the rows of `op`.
pub fn second_moment_weights(op: &LatticeOperator) -> Vec<f64> {
    row_weights(op, |s| s.iter().map(|&c| (c * c) as f64).sum())
}

fn leak_weights(op: &LatticeOperator, guard: &LeakGuard) -> Vec<f64> {
    let edge = op.lattice().half_extent() - guard.margin;
    row_weights(op, |s| if sup_norm(s) > edge { 1.0 } else { 0.0 })
}

/// Evaluates `⟨e^{−itH}ψ, diag(w) e^{−itH}ψ⟩` for every weight and time.
fn sweep(
    op: &LatticeOperator,
    prop: Propagation<'_>,
    psi0: &[f64],
    times: &[f64],
    weights: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    check_time_grid(times)?;
    if psi0.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: psi0.len(),
        });
    }
    let mut out = vec![Vec::with_capacity(times.len()); weights.len()];
    match prop {
        Propagation::Spectral(decomp) => {
            let c = decomp.coefficients(psi0);
            let cmax = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let active: Vec<usize> = (0..c.len()).filter(|&k| c[k].abs() > 1e-15 * cmax).collect();
            let n = op.dim();
            let ka = active.len();
            let mut va = DMatrix::<f64>::zeros(n, ka);
            for (j, &k) in active.iter().enumerate() {
                va.set_column(j, &decomp.eigenvectors.column(k));
            }
            let grams: Vec<DMatrix<f64>> = weights
                .iter()
                .map(|w| {
                    let mut b = va.clone();
                    for (i, wi) in w.iter().enumerate() {
                        let s = wi.sqrt();
                        b.row_mut(i).scale_mut(s);
                    }
                    b.transpose() * b
                })
                .collect();
            let mut zr = DVector::<f64>::zeros(ka);
            let mut zi = DVector::<f64>::zeros(ka);
            for &t in times {
                for (j, &k) in active.iter().enumerate() {
                    let (s, co) = (decomp.eigenvalues[k] * t).sin_cos();
                    zr[j] = c[k] * co;
                    zi[j] = -c[k] * s;
                }
                for (g, o) in grams.iter().zip(out.iter_mut()) {
                    o.push(zr.dot(&(g * &zr)) + zi.dot(&(g * &zi)));
                }
            }
        }
        Propagation::Chebyshev { tolerance } => {
            let h = uniform_step(times)?;
            let stepper = ChebyshevPropagator::new(op, h, tolerance)?;
            let mut state: Vec<Complex64> = psi0.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            for j in 0..times.len() {
                if j > 0 {
                    state = stepper.step(&state);
                }
                for (w, o) in weights.iter().zip(out.iter_mut()) {
                    o.push(state.iter().zip(w).map(|(s, wi)| wi * s.norm_sqr()).sum());
                }
            }
        }
    }
    Ok(out)
}

fn leak_error(times: &[f64], leak: &[f64], guard: &LeakGuard) -> Option<Error> {
    let bad = leak.iter().position(|&l| l > guard.threshold)?;
    Some(Error::BoundaryLeak {
        time: times[bad],
        leak: leak[bad],
        threshold: guard.threshold,
        safe_t_max: if bad == 0 { 0.0 } else { times[bad - 1] },
    })
}

/// Second moments `m(t_j)` on a grid starting at 0, with the boundary-leak
/// guard applied when given.
pub fn second_moment_trace(
    op: &LatticeOperator,
    prop: Propagation<'_>,
    psi0: &[f64],
    times: &[f64],
    initial_state: &str,
    guard: Option<LeakGuard>,
) -> Result<DynamicsTrace> {
    let mut weights = vec![second_moment_weights(op)];
    if let Some(g) = &guard {
        weights.push(leak_weights(op, g));
    }
    let mut res = sweep(op, prop, psi0, times, &weights)?;
    let leak = if guard.is_some() { res.pop().unwrap() } else { Vec::new() };
    if let Some(g) = &guard {
        if let Some(e) = leak_error(times, &leak, g) {
            return Err(e);
        }
    }
    Ok(DynamicsTrace {
        provenance: None,
        initial_state: initial_state.to_string(),
        times: times.to_vec(),
        second_moments: res.pop().unwrap(),
        leak,
        cesaro_times: Vec::new(),
        cesaro: Vec::new(),
        cesaro_error: Vec::new(),
    })
}

/// Fills the Cesàro means at the requested `T` values.
///
/// Each `T` is snapped to the nearest positive multiple of `4h` so that
/// Simpson's rule and its `2h` companion share nodes; duplicates after
/// snapping are dropped.
pub fn cesaro(trace: &DynamicsTrace, t_values: &[f64]) -> Result<DynamicsTrace> {
    let h = uniform_step(&trace.times)?;
    let t_max = *trace.times.last().unwrap();
    let mut out = trace.clone();
    out.cesaro_times.clear();
    out.cesaro.clear();
    out.cesaro_error.clear();
    let mut last_n = 0usize;
    for &t in t_values {
        let n = ((t / (4.0 * h)).round() as usize).max(1) * 4;
        let snapped = n as f64 * h;
        if t < 2.0 * h || snapped > t_max * (1.0 + 1e-12) || n >= trace.times.len() {
            return Err(Error::Grid(format!(
                "Cesàro time {t} outside the trace range [{}, {t_max}]",
                4.0 * h
            )));
        }
        if n == last_n {
            continue;
        }
        last_n = n;
        let q = simpson_with_error(&trace.second_moments[..=n], h);
        out.cesaro_times.push(snapped);
        out.cesaro.push(q.value / snapped);
        out.cesaro_error.push(q.error / snapped);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBallistic {
    pub axis: usize,
    /// Constant `κ` in `‖X_j ψ‖ + t·κ·‖ψ‖`.
    pub constant: f64,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub min_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallisticReport {
    pub times: Vec<f64>,
    pub axes: Vec<AxisBallistic>,
    pub min_slack: f64,
    pub pass: bool,
}

/// Checks `‖X_j e^{−itH}ψ‖ ≤ ‖X_j ψ‖ + t·κ_j·‖ψ‖` for each axis. With
/// `constant = None`, `κ_j` is the computed norm of `[H, X_j]`.
pub fn ballistic_bound_check(
    op: &LatticeOperator,
    decomp: &SpectralDecomposition,
    psi0: &[f64],
    times: &[f64],
    constant: Option<f64>,
) -> Result<BallisticReport> {
    let d = op.lattice().dimension();
    let weights: Vec<Vec<f64>> = (0..d)
        .map(|j| row_weights(op, |s| (s[j] * s[j]) as f64))
        .collect();
    let vals = sweep(op, Propagation::Spectral(decomp), psi0, times, &weights)?;
    let norm = psi0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut axes = Vec::with_capacity(d);
    for (j, v) in vals.iter().enumerate() {
        let kappa = match constant {
            Some(k) => k,
            None => op.commutator_norm(j),
        };
        let lhs: Vec<f64> = v.iter().map(|x| x.max(0.0).sqrt()).collect();
        let x0 = lhs[0];
        let rhs: Vec<f64> = times.iter().map(|t| x0 + t * kappa * norm).collect();
        let min_slack = lhs
            .iter()
            .zip(&rhs)
            .map(|(l, r)| r - l)
            .fold(f64::INFINITY, f64::min);
        axes.push(AxisBallistic {
            axis: j,
            constant: kappa,
            lhs,
            rhs,
            min_slack,
        });
    }
    let min_slack = axes.iter().map(|a| a.min_slack).fold(f64::INFINITY, f64::min);
    // t = 0 gives exact equality; allow rounding there
    let pass = min_slack >= -1e-12 * (1.0 + axes.iter().map(|a| a.lhs[0]).fold(0.0, f64::max));
    Ok(BallisticReport {
        times: times.to_vec(),
        axes,
        min_slack,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedTrace {
    pub realizations: usize,
    pub initial_state: String,
    pub times: Vec<f64>,
    pub mean_m: Vec<f64>,
    pub se_m: Vec<f64>,
    pub cesaro_times: Vec<f64>,
    pub mean_c: Vec<f64>,
    pub se_c: Vec<f64>,
    pub min_c: Vec<f64>,
    pub max_c: Vec<f64>,
    /// Cesàro means of each realization, in realization order.
    pub per_realization_c: Vec<Vec<f64>>,
    /// `Ê[sup_{T>1} C(T)]` over the sampled `T`, sup taken per realization.
    pub mean_sup_c: f64,
    pub se_sup_c: f64,
}

/// Pointwise means and standard errors; fixed summation order.
pub fn disorder_average(traces: &[DynamicsTrace]) -> Result<AveragedTrace> {
    let first = traces
        .first()
        .ok_or_else(|| Error::Grid("no traces to average".into()))?;
    for t in traces {
        if t.times != first.times || t.cesaro_times != first.cesaro_times {
            return Err(Error::Grid("traces do not share time grids".into()));
        }
        if t.initial_state != first.initial_state {
            return Err(Error::Grid("traces do not share the initial state".into()));
        }
    }
    let column = |f: &dyn Fn(&DynamicsTrace) -> f64| -> (f64, f64) {
        let xs: Vec<f64> = traces.iter().map(f).collect();
        stats::mean_se(&xs)
    };
    let mut mean_m = Vec::new();
    let mut se_m = Vec::new();
    for j in 0..first.times.len() {
        let (m, s) = column(&|t| t.second_moments[j]);
        mean_m.push(m);
        se_m.push(s);
    }
    let (mut mean_c, mut se_c, mut min_c, mut max_c) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for j in 0..first.cesaro_times.len() {
        let (m, s) = column(&|t| t.cesaro[j]);
        mean_c.push(m);
        se_c.push(s);
        min_c.push(traces.iter().map(|t| t.cesaro[j]).fold(f64::INFINITY, f64::min));
        max_c.push(traces.iter().map(|t| t.cesaro[j]).fold(f64::NEG_INFINITY, f64::max));
    }
    let sups: Vec<f64> = traces
        .iter()
        .map(|t| {
            t.cesaro_times
                .iter()
                .zip(&t.cesaro)
                .filter(|(tt, _)| **tt > 1.0)
                .map(|(_, c)| *c)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let (mean_sup_c, se_sup_c) = stats::mean_se(&sups);
    Ok(AveragedTrace {
        realizations: traces.len(),
        initial_state: first.initial_state.clone(),
        times: first.times.clone(),
        mean_m,
        se_m,
        cesaro_times: first.cesaro_times.clone(),
        mean_c,
        se_c,
        min_c,
        max_c,
        per_realization_c: traces.iter().map(|t| t.cesaro.clone()).collect(),
        mean_sup_c,
        se_sup_c,
    })
}

/// Energy-side evaluator for `‖|X| (H − E ∓ iη)^{−1} ψ‖²` through the
/// eigen-expansion restricted to the modes `ψ` uses.
pub(crate) struct WeightedResolvent {
    eigenvalues: Vec<f64>,
    coeffs: Vec<f64>,
    gram: DMatrix<f64>,
}

impl WeightedResolvent {
    pub(crate) fn new(decomp: &SpectralDecomposition, psi: &[f64], weight: &[f64]) -> Self {
        let c = decomp.coefficients(psi);
        let cmax = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let active: Vec<usize> = (0..c.len()).filter(|&k| c[k].abs() > 1e-15 * cmax).collect();
        let n = decomp.dim();
        let mut b = DMatrix::<f64>::zeros(n, active.len());
        for (j, &k) in active.iter().enumerate() {
            b.set_column(j, &decomp.eigenvectors.column(k));
        }
        for (i, w) in weight.iter().enumerate() {
            b.row_mut(i).scale_mut(w.sqrt());
        }
        Self {
            eigenvalues: active.iter().map(|&k| decomp.eigenvalues[k]).collect(),
            coeffs: active.iter().map(|&k| c[k]).collect(),
            gram: b.transpose() * b,
        }
    }

    pub(crate) fn spectral_range(&self) -> (f64, f64) {
        let lo = self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// `‖W^{1/2} (H − z)^{−1} ψ‖²`.
    pub(crate) fn eval(&self, z: Complex64) -> f64 {
        let k = self.coeffs.len();
        let mut ar = DVector::<f64>::zeros(k);
        let mut ai = DVector::<f64>::zeros(k);
        for j in 0..k {
            let a = self.coeffs[j] / (Complex64::new(self.eigenvalues[j], 0.0) - z);
            ar[j] = a.re;
            ai[j] = a.im;
        }
        ar.dot(&(&self.gram * &ar)) + ai.dot(&(&self.gram * &ai))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeterReport {
    pub time: f64,
    pub epsilon: f64,
    pub time_average: Quadrature,
    pub energy_integral: Quadrature,
    /// `(e·ε/2π)·∫_ℝ ‖|X| R_ε(E) ψ‖² dE`.
    pub bound: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Time average of `m` over `[0, T]` against `(e ε / 2π) ∫_ℝ ‖|X| R_ε(E) ψ‖² dE`
/// with `ε = 1/T` and `R_ε(E) = (H − E + iε/2)^{−1}`.
pub fn peter_check(
    op: &LatticeOperator,
    decomp: &SpectralDecomposition,
    psi: &[f64],
    t: f64,
    dt: f64,
    tolerance: f64,
) -> Result<PeterReport> {
    let n = ((t / (4.0 * dt)).ceil() as usize).max(1) * 4;
    let h = t / n as f64;
    let times: Vec<f64> = (0..=n).map(|j| j as f64 * h).collect();
    let m = sweep(op, Propagation::Spectral(decomp), psi, &times, &[second_moment_weights(op)])?
        .pop()
        .unwrap();
    let q = simpson_with_error(&m, h);
    let time_average = Quadrature {
        value: q.value / t,
        error: q.error / t,
        evaluations: q.evaluations,
    };
    let eps = 1.0 / t;
    let wr = WeightedResolvent::new(decomp, psi, &second_moment_weights(op));
    let (lo, hi) = wr.spectral_range();
    let rule = FullLineRule::for_spectrum(lo, hi, 0.5 * eps, tolerance * 1e-3);
    let energy_integral = rule.integrate(|e| wr.eval(Complex64::new(e, -0.5 * eps)))?;
    let bound = EULER * eps / (2.0 * std::f64::consts::PI) * energy_integral.value;
    let quad_ok = time_average.error <= tolerance * time_average.value.abs()
        && energy_integral.error <= tolerance * energy_integral.value.abs();
    let pass = quad_ok && time_average.value <= bound * (1.0 + tolerance);
    Ok(PeterReport {
        time: t,
        epsilon: eps,
        time_average,
        energy_integral,
        bound,
        tolerance,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cm0Report {
    pub times: Vec<f64>,
    pub cesaro: Vec<f64>,
    /// `ε ∫_I ‖|X| R_ε(E) φ‖² dE` with `ε = 1/T`.
    pub energy_term: Vec<f64>,
    pub c3: f64,
    pub c0: f64,
    /// `max (C − c3·J)` over the second half of the grid.
    pub holdout_max: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Fits `C(T) ≤ c0 + c3·ε∫_I ‖|X| R_ε φ‖²` on the first half of `t_values`
/// (least-squares `c3 ≥ 0`, then the envelope `c0`) and checks the
/// envelope on the second half within `tolerance` relative.
pub fn cm0_check(
    op: &LatticeOperator,
    decomp: &SpectralDecomposition,
    phi: &[f64],
    filter: &FilterSpec,
    t_values: &[f64],
    dt: f64,
    tolerance: f64,
) -> Result<Cm0Report> {
    if t_values.len() < 4 {
        return Err(Error::Grid("need at least four T values".into()));
    }
    let fphi = apply_filter(filter, decomp, phi);
    let t_max = t_values.iter().copied().fold(0.0, f64::max);
    let times = uniform_time_grid((t_max / (4.0 * dt)).ceil() * 4.0 * dt, dt)?;
    let trace = second_moment_trace(op, Propagation::Spectral(decomp), &fphi, &times, "cm0", None)?;
    let trace = cesaro(&trace, t_values)?;
    let wr = WeightedResolvent::new(decomp, phi, &second_moment_weights(op));
    let mut energy_term = Vec::with_capacity(trace.cesaro_times.len());
    for &t in &trace.cesaro_times {
        let eps = 1.0 / t;
        let q = trapezoid(
            |e| wr.eval(Complex64::new(e, -0.5 * eps)),
            filter.lower,
            filter.upper,
            eps / 4.0,
        )?;
        energy_term.push(eps * q.value);
    }
    let half = trace.cesaro.len() / 2;
    let fit = stats::ols(&energy_term[..half], &trace.cesaro[..half]);
    let c3 = if fit.slope.is_finite() { fit.slope.max(0.0) } else { 0.0 };
    let resid = |j: usize| trace.cesaro[j] - c3 * energy_term[j];
    let c0 = (0..half).map(resid).fold(f64::NEG_INFINITY, f64::max);
    let holdout_max = (half..trace.cesaro.len()).map(resid).fold(f64::NEG_INFINITY, f64::max);
    let pass = holdout_max <= c0 + tolerance * c0.abs().max(1e-12);
    Ok(Cm0Report {
        times: trace.cesaro_times.clone(),
        cesaro: trace.cesaro.clone(),
        energy_term,
        c3,
        c0,
        holdout_max,
        tolerance,
        pass,
    })
}
