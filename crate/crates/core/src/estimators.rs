//! Diffusion-exponent fits, the Abel-mean trend of the diffusion constant,
//! the dynamical-localization statistic and the Wegner pair statistic.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{AveragedTrace, InitialState};
use crate::ensemble::{par_map_indexed, Ensemble};
use crate::error::{Error, Result};
use crate::green::{abel_functional, ResolventEngine};
use crate::lattice::Cuboid;
use crate::operator::{diagonalize_with_cap, eigenvalues, restrict_cuboid, DEFAULT_MATRIX_CAP};
use crate::rng;
use crate::stats::{self, LineFit};

/// Realization bootstrap settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bootstrap {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for Bootstrap {
    fn default() -> Self {
        Self {
            resamples: 200,
            seed: 0x5eed,
        }
    }
}

impl Bootstrap {
    /// Resampled realization indices for replicate `b`.
    fn draw(&self, b: usize, n: usize) -> Vec<usize> {
        let mut r = rng::stream(self.seed, "bootstrap", b as u64);
        (0..n).map(|_| r.random_range(0..n)).collect()
    }
}

/// Closed time window `[t_lo, t_hi]` for log–log fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub t_lo: f64,
    pub t_hi: f64,
}

impl Window {
    pub fn new(t_lo: f64, t_hi: f64) -> Result<Self> {
        if !(t_lo > 0.0) || !(t_hi >= t_lo * 10f64.sqrt() * (1.0 - 1e-12)) {
            return Err(Error::Grid(format!(
                "window [{t_lo}, {t_hi}] must be positive and span at least half a decade"
            )));
        }
        Ok(Self { t_lo, t_hi })
    }

    /// Consecutive windows of `width` decades, stepping by `step` decades.
    pub fn sliding(t_lo: f64, t_hi: f64, width: f64, step: f64) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        let mut a = t_lo;
        while a * 10f64.powf(width) <= t_hi * (1.0 + 1e-12) {
            out.push(Self::new(a, a * 10f64.powf(width))?);
            a *= 10f64.powf(step);
        }
        if out.is_empty() {
            return Err(Error::Grid(format!("no window of {width} decades fits in [{t_lo}, {t_hi}]")));
        }
        Ok(out)
    }

    fn select(&self, times: &[f64]) -> Vec<usize> {
        times
            .iter()
            .enumerate()
            .filter(|(_, &t)| t >= self.t_lo * (1.0 - 1e-12) && t <= self.t_hi * (1.0 + 1e-12))
            .map(|(i, _)| i)
            .collect()
    }
}

pub const MIN_WINDOW_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub windows: Vec<Window>,
    pub points: Vec<usize>,
    pub slopes: Vec<f64>,
    pub r2: Vec<f64>,
    pub bootstrap_se: Vec<f64>,
    pub sigma_minus: f64,
    pub sigma_plus: f64,
    pub sigma_minus_se: f64,
    pub sigma_plus_se: f64,
}

fn window_fits(times: &[f64], values: &[f64], windows: &[Window]) -> Result<Vec<(usize, LineFit)>> {
    windows
        .iter()
        .map(|w| {
            let idx = w.select(times);
            if idx.len() < MIN_WINDOW_POINTS {
                return Err(Error::Grid(format!(
                    "window [{}, {}] holds {} points, need at least {MIN_WINDOW_POINTS}",
                    w.t_lo,
                    w.t_hi,
                    idx.len()
                )));
            }
            let mut x = Vec::with_capacity(idx.len());
            let mut y = Vec::with_capacity(idx.len());
            for &i in &idx {
                if !(values[i] > 0.0) {
                    return Err(Error::Parameter(format!(
                        "nonpositive Cesàro value {} at T = {}",
                        values[i], times[i]
                    )));
                }
                x.push(times[i].ln());
                y.push(values[i].ln());
            }
            Ok((idx.len(), stats::ols(&x, &y)))
        })
        .collect()
}

/// Log–log slopes of `C(T)` per window for a single curve.
pub fn window_slopes(times: &[f64], values: &[f64], windows: &[Window]) -> Result<Vec<f64>> {
    Ok(window_fits(times, values, windows)?
        .into_iter()
        .map(|(_, f)| f.slope)
        .collect())
}

/// Per-window slopes of `log Ê[C(T)]` against `log T`, with `σ∓` the
/// extreme slopes and standard errors from resampling realizations.
pub fn fit_exponents(avg: &AveragedTrace, windows: &[Window], boot: &Bootstrap) -> Result<ExponentFit> {
    if windows.is_empty() {
        return Err(Error::Grid("no fit windows".into()));
    }
    let fits = window_fits(&avg.cesaro_times, &avg.mean_c, windows)?;
    let slopes: Vec<f64> = fits.iter().map(|(_, f)| f.slope).collect();
    let extremes = |s: &[f64]| {
        (
            s.iter().copied().fold(f64::INFINITY, f64::min),
            s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    let (sigma_minus, sigma_plus) = extremes(&slopes);

    let n = avg.per_realization_c.len();
    let mut reps: Vec<Vec<f64>> = vec![Vec::new(); windows.len()];
    let mut rep_min = Vec::new();
    let mut rep_max = Vec::new();
    if n > 1 {
        for b in 0..boot.resamples {
            let pick = boot.draw(b, n);
            let mean: Vec<f64> = (0..avg.cesaro_times.len())
                .map(|j| pick.iter().map(|&i| avg.per_realization_c[i][j]).sum::<f64>() / n as f64)
                .collect();
            let s = window_slopes(&avg.cesaro_times, &mean, windows)?;
            let (lo, hi) = extremes(&s);
            rep_min.push(lo);
            rep_max.push(hi);
            for (r, v) in reps.iter_mut().zip(s) {
                r.push(v);
            }
        }
    }
    let sd = |xs: &[f64]| if xs.len() > 1 { stats::mean_var(xs).1.sqrt() } else { 0.0 };
    Ok(ExponentFit {
        windows: windows.to_vec(),
        points: fits.iter().map(|(p, _)| *p).collect(),
        r2: fits.iter().map(|(_, f)| f.r2).collect(),
        bootstrap_se: reps.iter().map(|r| sd(r)).collect(),
        slopes,
        sigma_minus,
        sigma_plus,
        sigma_minus_se: sd(&rep_min),
        sigma_plus_se: sd(&rep_max),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynlocStatistic {
    /// `Ê[sup_{T>1} C(T)]`.
    pub mean_sup: f64,
    pub se_sup: f64,
    /// Last-decade `max Ê[C] / min Ê[C]`.
    pub stability_ratio: f64,
    /// Log–log slope of `Ê[C]` over the last decade.
    pub last_decade_slope: f64,
    pub t_max: f64,
    pub ratio_threshold: f64,
    pub localized: bool,
}

/// Finite-sample surrogate for `𝔼 sup_{T>1} C(T) < ∞`.
pub fn dynloc_statistic(avg: &AveragedTrace, ratio_threshold: f64) -> Result<DynlocStatistic> {
    let t_max = avg.cesaro_times.iter().copied().fold(0.0, f64::max);
    if t_max < 1e3 * (1.0 - 1e-12) {
        return Err(Error::Grid(format!("T grid reaches {t_max}, need at least 1e3")));
    }
    let idx: Vec<usize> = (0..avg.cesaro_times.len())
        .filter(|&i| avg.cesaro_times[i] >= t_max / 10.0 * (1.0 - 1e-12))
        .collect();
    let vals: Vec<f64> = idx.iter().map(|&i| avg.mean_c[i]).collect();
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let stability_ratio = hi / lo;
    let last_decade_slope = if idx.len() >= 2 && lo > 0.0 {
        let x: Vec<f64> = idx.iter().map(|&i| avg.cesaro_times[i].ln()).collect();
        let y: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
        stats::ols(&x, &y).slope
    } else {
        f64::NAN
    };
    Ok(DynlocStatistic {
        mean_sup: avg.mean_sup_c,
        se_sup: avg.se_sup_c,
        stability_ratio,
        last_decade_slope,
        t_max,
        ratio_threshold,
        localized: stability_ratio <= ratio_threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbelTrend {
    pub epsilons: Vec<f64>,
    /// Disorder mean of `ε² ∫ ‖|X| R(E+iε) ψ‖² dE` per `ε`.
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    /// Same with prefactor `ε`.
    pub mean_eps: Vec<f64>,
    pub per_realization: Vec<Vec<f64>>,
    /// Slope of `log mean` against `log ε`.
    pub slope: f64,
    pub slope_se: f64,
    /// Values strictly decrease as `ε` decreases.
    pub strictly_decreasing: bool,
    pub vanishing: bool,
}

/// How many solves per realization may use the eigen-expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineChoice {
    Spectral,
    Banded,
    /// Spectral up to the matrix cap, banded above it.
    Auto,
}

/// Disorder average of the Abel functional on a geometric `ε` list.
///
/// The vanishing verdict asks for values that strictly decrease as `ε`
/// decreases and a log–log slope (against `log ε`) exceeding twice its
/// bootstrap standard error.
#[allow(clippy::too_many_arguments)]
pub fn abel_trend(
    ens: &Ensemble,
    psi: &InitialState,
    epsilons: &[f64],
    engine: EngineChoice,
    rtol: f64,
    workers: usize,
    realizations: u64,
    boot: &Bootstrap,
) -> Result<AbelTrend> {
    if epsilons.len() < 3 {
        return Err(Error::Grid("abel_trend needs at least 3 values of ε".into()));
    }
    if epsilons.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Grid("ε values must be positive".into()));
    }
    let ratios: Vec<f64> = epsilons.windows(2).map(|w| w[1] / w[0]).collect();
    if ratios.iter().any(|&r| !(r < 1.0) || (r - ratios[0]).abs() > 1e-9 * ratios[0]) {
        return Err(Error::Grid("ε list must be geometric and decreasing".into()));
    }
    let per_realization = par_map_indexed(workers, realizations as usize, |i| {
        let op = ens.operator(i as u64)?;
        let spectral = match engine {
            EngineChoice::Spectral => true,
            EngineChoice::Banded => false,
            EngineChoice::Auto => op.dim() <= DEFAULT_MATRIX_CAP,
        };
        let dec = if spectral {
            Some(diagonalize_with_cap(&op, DEFAULT_MATRIX_CAP)?)
        } else {
            None
        };
        let state = psi.prepare(&op, dec.as_ref(), 1e-12)?;
        let norm = state.iter().map(|v| v * v).sum::<f64>().sqrt();
        let state: Vec<f64> = state.iter().map(|v| v / norm).collect();
        let eng = match &dec {
            Some(d) => ResolventEngine::Spectral(d),
            None => ResolventEngine::Banded,
        };
        epsilons
            .iter()
            .map(|&e| abel_functional(&op, eng, &state, e, rtol).map(|a| (a.value, a.value_eps)))
            .collect::<Result<Vec<_>>>()
    })?;
    let n = per_realization.len();
    let column = |j: usize| -> Vec<f64> { per_realization.iter().map(|r| r[j].0).collect() };
    let (mut mean, mut se, mut mean_eps) = (Vec::new(), Vec::new(), Vec::new());
    for j in 0..epsilons.len() {
        let (m, s) = stats::mean_se(&column(j));
        mean.push(m);
        se.push(s);
        mean_eps.push(stats::mean(&per_realization.iter().map(|r| r[j].1).collect::<Vec<_>>()));
    }
    let x: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let fit_slope = |vals: &[f64]| -> f64 {
        let y: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
        stats::ols(&x, &y).slope
    };
    let slope = fit_slope(&mean);
    let mut reps = Vec::new();
    if n > 1 {
        for b in 0..boot.resamples {
            let pick = boot.draw(b, n);
            let m: Vec<f64> = (0..epsilons.len())
                .map(|j| pick.iter().map(|&i| per_realization[i][j].0).sum::<f64>() / n as f64)
                .collect();
            reps.push(fit_slope(&m));
        }
    }
    let slope_se = if reps.len() > 1 {
        stats::mean_var(&reps).1.sqrt()
    } else {
        0.0
    };
    let strictly_decreasing = mean.windows(2).all(|w| w[1] < w[0]);
    Ok(AbelTrend {
        epsilons: epsilons.to_vec(),
        mean,
        se,
        mean_eps,
        per_realization: per_realization
            .into_iter()
            .map(|r| r.into_iter().map(|v| v.0).collect())
            .collect(),
        slope,
        slope_se,
        strictly_decreasing,
        vanishing: strictly_decreasing && slope > 2.0 * slope_se,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WegnerResult {
    pub energy: f64,
    pub etas: Vec<f64>,
    pub box1: Cuboid,
    pub box2: Cuboid,
    pub separation: i64,
    pub samples: usize,
    /// `Ê[Tr 𝐄₁ · Tr 𝐄₂]` per `η`.
    pub estimates: Vec<f64>,
    pub se: Vec<f64>,
    /// `estimate / (η² |Λ₁| |Λ₂|)`.
    pub bound_ratio: Vec<f64>,
    /// Single-box means `Ê[Tr 𝐄₁]`, `Ê[Tr 𝐄₂]` per `η`.
    pub mean_counts: (Vec<f64>, Vec<f64>),
    /// Weighted log–log slope of the estimate against `η`.
    pub fitted_power: f64,
    pub fitted_power_se: f64,
    /// `max_η` of the bound ratio.
    pub c_w: f64,
    /// `max / min` of the bound ratio.
    pub ratio_spread: f64,
}

fn count_in(ev: &[f64], lo: f64, hi: f64) -> u64 {
    ev.iter().filter(|&&v| v >= lo && v <= hi).count() as u64
}

/// Eigenvalue-pair counting statistic on two disjoint blocks.
#[allow(clippy::too_many_arguments)]
pub fn wegner_pair(
    ens: &Ensemble,
    energy: f64,
    etas: &[f64],
    box1: &Cuboid,
    box2: &Cuboid,
    min_separation: i64,
    realizations: u64,
    workers: usize,
) -> Result<WegnerResult> {
    if etas.is_empty() || etas.windows(2).any(|w| !(w[1] < w[0])) || etas.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Grid("η list must be positive and strictly decreasing".into()));
    }
    let separation = box1
        .gap(box2)
        .ok_or_else(|| Error::Geometry("Wegner boxes overlap".into()))?;
    if separation < min_separation {
        return Err(Error::Geometry(format!(
            "box separation {separation} below the required {min_separation}"
        )));
    }
    for b in [box1, box2] {
        if !b.fits_in(&ens.lattice) {
            return Err(Error::Geometry(format!(
                "box {:?}..{:?} does not fit in the lattice",
                b.lower, b.upper
            )));
        }
    }
    let d = ens.lattice.dimension();
    let (n1, n2) = (box1.site_count(d), box2.site_count(d));
    let counts = par_map_indexed(workers, realizations as usize, |i| {
        let op = ens.operator(i as u64)?;
        let e1 = eigenvalues(&restrict_cuboid(&op, box1)?);
        let e2 = eigenvalues(&restrict_cuboid(&op, box2)?);
        Ok(etas
            .iter()
            .map(|&eta| {
                (
                    count_in(&e1, energy - eta, energy + eta),
                    count_in(&e2, energy - eta, energy + eta),
                )
            })
            .collect::<Vec<_>>())
    })?;
    let mut estimates = Vec::new();
    let mut se = Vec::new();
    let mut m1 = Vec::new();
    let mut m2 = Vec::new();
    for j in 0..etas.len() {
        let prod: Vec<f64> = counts.iter().map(|c| (c[j].0 * c[j].1) as f64).collect();
        let (m, s) = stats::mean_se(&prod);
        estimates.push(m);
        se.push(s);
        m1.push(stats::mean(&counts.iter().map(|c| c[j].0 as f64).collect::<Vec<_>>()));
        m2.push(stats::mean(&counts.iter().map(|c| c[j].1 as f64).collect::<Vec<_>>()));
    }
    let bound_ratio: Vec<f64> = estimates
        .iter()
        .zip(etas)
        .map(|(e, eta)| e / (eta * eta * n1 as f64 * n2 as f64))
        .collect();
    let c_w = bound_ratio.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ratio_min = bound_ratio.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio_spread = if ratio_min > 0.0 { c_w / ratio_min } else { f64::INFINITY };

    // weights 1/Var(log estimate) by the delta method
    let usable: Vec<usize> = (0..etas.len()).filter(|&j| estimates[j] > 0.0 && se[j] > 0.0).collect();
    let (fitted_power, fitted_power_se) = if usable.len() >= 2 {
        let x: Vec<f64> = usable.iter().map(|&j| etas[j].ln()).collect();
        let y: Vec<f64> = usable.iter().map(|&j| estimates[j].ln()).collect();
        let w: Vec<f64> = usable
            .iter()
            .map(|&j| (estimates[j] / se[j]).powi(2))
            .collect();
        let f = stats::weighted_ols(&x, &y, &w);
        (f.slope, f.slope_se)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(WegnerResult {
        energy,
        etas: etas.to_vec(),
        box1: *box1,
        box2: *box2,
        separation,
        samples: counts.len(),
        estimates,
        se,
        bound_ratio,
        mean_counts: (m1, m2),
        fitted_power,
        fitted_power_se,
        c_w,
        ratio_spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::DisorderSpec;
    use crate::lattice::LatticeSpec;

    fn synthetic(c: impl Fn(f64) -> f64) -> AveragedTrace {
        synthetic_on(20, c)
    }

    fn synthetic_on(per_decade: usize, c: impl Fn(f64) -> f64) -> AveragedTrace {
        let times: Vec<f64> = (0..=3 * per_decade)
            .map(|i| 10f64.powf(i as f64 / per_decade as f64))
            .collect();
        let vals: Vec<f64> = times.iter().map(|&t| c(t)).collect();
        AveragedTrace {
            realizations: 1,
            initial_state: "synthetic".into(),
            times: times.clone(),
            mean_m: vals.clone(),
            se_m: vec![0.0; times.len()],
            cesaro_times: times.clone(),
            mean_c: vals.clone(),
            se_c: vec![0.0; times.len()],
            min_c: vals.clone(),
            max_c: vals.clone(),
            per_realization_c: vec![vals.clone()],
            mean_sup_c: vals.iter().copied().fold(0.0, f64::max),
            se_sup_c: 0.0,
        }
    }

    #[test]
    fn power_law_slopes_are_exact() {
        let w = Window::sliding(1.0, 1000.0, 1.0, 0.5).unwrap();
        let f = fit_exponents(&synthetic(|t| 7.0 * t * t), &w, &Bootstrap::default()).unwrap();
        for s in &f.slopes {
            assert!((s - 2.0).abs() < 1e-12);
        }
        let f = fit_exponents(&synthetic(|_| 3.0), &w, &Bootstrap::default()).unwrap();
        assert!(f.sigma_plus.abs() < 1e-12 && f.sigma_minus.abs() < 1e-12);
    }

    #[test]
    fn windows_are_validated() {
        assert!(Window::new(1.0, 2.0).is_err());
        let w = [Window::new(1.0, 10f64.sqrt()).unwrap()];
        assert!(fit_exponents(&synthetic_on(10, |t| t), &w, &Bootstrap::default()).is_err());
        assert!(fit_exponents(&synthetic_on(20, |t| t), &w, &Bootstrap::default()).is_ok());
        let w = Window::sliding(1.0, 1000.0, 1.0, 1.0).unwrap();
        assert!(fit_exponents(&synthetic(|t| t - 2.0), &w, &Bootstrap::default()).is_err());
    }

    #[test]
    fn dynloc_of_constant_and_ballistic() {
        let s = dynloc_statistic(&synthetic(|_| 4.0), 1.05).unwrap();
        assert_eq!(s.mean_sup, 4.0);
        assert!((s.stability_ratio - 1.0).abs() < 1e-15 && s.localized);
        let s = dynloc_statistic(&synthetic(|t| 2.0 * t * t / 3.0), 1.05).unwrap();
        assert!(s.stability_ratio > 50.0 && !s.localized);
    }

    #[test]
    fn wegner_saturates_for_wide_windows() {
        let lat = LatticeSpec::chain(41).unwrap();
        let ens = Ensemble::new(lat, DisorderSpec::iid_uniform(1.0, 4, 20)).unwrap();
        let b1 = Cuboid::interval(-20, 8).unwrap();
        let b2 = Cuboid::interval(5, 8).unwrap();
        let r = wegner_pair(&ens, 0.0, &[100.0, 50.0], &b1, &b2, 10, 20, 1).unwrap();
        assert_eq!(r.estimates, vec![64.0, 64.0]);
        assert_eq!(r.separation, 17);
        let overlapping = Cuboid::interval(-15, 8).unwrap();
        assert!(wegner_pair(&ens, 0.0, &[1.0], &b1, &overlapping, 0, 2, 1).is_err());
    }
}
