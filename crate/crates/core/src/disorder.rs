//! Reproducible disorder realizations.
//!
//! Each site value of realization `n` is a pure function of
//! `(master seed, n, site)`: the realization index selects a ChaCha stream
//! and the site code selects the word position inside it. Fields over
//! different windows therefore agree on their common sites.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, Site, MAX_DIMENSION};
use crate::rng;
use crate::stats;

const DOMAIN: &str = "disorder";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisorderKind {
    /// Zero potential.
    None,
    IidUniform,
    IidDensity,
    CorrelatedMovingAverage,
}

impl DisorderKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "iid-uniform" => Ok(Self::IidUniform),
            "iid-density" => Ok(Self::IidDensity),
            "correlated-moving-average" => Ok(Self::CorrelatedMovingAverage),
            other => Err(Error::Disorder(format!("unknown disorder kind '{other}'"))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::IidUniform => "iid-uniform",
            Self::IidDensity => "iid-density",
            Self::CorrelatedMovingAverage => "correlated-moving-average",
        }
    }
}

/// Piecewise-linear single-site density on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedDensity {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(skip)]
    cdf: Vec<f64>,
}

impl TabulatedDensity {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() || grid.len() < 2 {
            return Err(Error::Disorder(
                "density needs matching grid and value lists of length >= 2".into(),
            ));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Disorder("density grid must be strictly increasing".into()));
        }
        if values.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::Disorder("density values must be finite and nonnegative".into()));
        }
        let mut cdf = vec![0.0; grid.len()];
        for i in 1..grid.len() {
            cdf[i] = cdf[i - 1] + 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
        }
        let total = cdf[cdf.len() - 1];
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Disorder(format!(
                "density integrates to {total}, not 1 within 1e-10"
            )));
        }
        Ok(Self { grid, values, cdf })
    }

    /// Inverse CDF of the piecewise-linear density.
    pub fn quantile(&self, u: f64) -> f64 {
        let total = self.cdf[self.cdf.len() - 1];
        let target = u * total;
        let k = match self.cdf.partition_point(|&c| c <= target) {
            0 => 1,
            k if k >= self.cdf.len() => self.cdf.len() - 1,
            k => k,
        };
        let (x0, x1) = (self.grid[k - 1], self.grid[k]);
        let (f0, f1) = (self.values[k - 1], self.values[k]);
        let h = x1 - x0;
        let need = target - self.cdf[k - 1];
        // mass over [x0, x0 + s] is f0 s + (f1 - f0) s^2 / (2h)
        let a = 0.5 * (f1 - f0) / h;
        let s = if a.abs() < 1e-300 {
            if f0 > 0.0 {
                need / f0
            } else {
                0.0
            }
        } else {
            let disc = (f0 * f0 + 4.0 * a * need).max(0.0);
            2.0 * need / (f0 + disc.sqrt())
        };
        (x0 + s.clamp(0.0, h)).min(x1)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }

    fn rebuild(&mut self) {
        if self.cdf.len() != self.grid.len() {
            *self = Self::new(self.grid.clone(), self.values.clone()).expect("validated density");
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub kind: DisorderKind,
    /// Support half-width `M` of the single-site (base) distribution.
    pub half_width: f64,
    /// Moving-average window radius; 0 for iid kinds.
    pub radius: u32,
    pub density: Option<TabulatedDensity>,
    pub seed: u64,
    pub samples: u64,
}

impl DisorderSpec {
    pub fn iid_uniform(half_width: f64, seed: u64, samples: u64) -> Self {
        Self {
            kind: DisorderKind::IidUniform,
            half_width,
            radius: 0,
            density: None,
            seed,
            samples,
        }
    }

    pub fn none(samples: u64) -> Self {
        Self {
            kind: DisorderKind::None,
            half_width: 0.0,
            radius: 0,
            density: None,
            seed: 0,
            samples,
        }
    }

    pub fn moving_average(half_width: f64, radius: u32, seed: u64, samples: u64) -> Self {
        Self {
            kind: DisorderKind::CorrelatedMovingAverage,
            half_width,
            radius,
            density: None,
            seed,
            samples,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            DisorderKind::None => Ok(()),
            _ => {
                if !(self.half_width > 0.0) || !self.half_width.is_finite() {
                    return Err(Error::Disorder(format!(
                        "support half-width must be positive, got {}",
                        self.half_width
                    )));
                }
                if self.kind == DisorderKind::IidUniform && self.radius != 0 {
                    return Err(Error::Disorder("iid kinds require radius 0".into()));
                }
                if self.kind == DisorderKind::IidDensity {
                    let d = self.density.as_ref().ok_or_else(|| {
                        Error::Disorder("iid-density requires a tabulated density".into())
                    })?;
                    TabulatedDensity::new(d.grid.clone(), d.values.clone())?;
                    let (lo, hi) = d.support();
                    if lo < -self.half_width - 1e-12 || hi > self.half_width + 1e-12 {
                        return Err(Error::Disorder(
                            "density support exceeds [-M, M]".into(),
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    /// Sup of `|λ_i|`; the moving-average kernel is normalized to total weight 1.
    pub fn value_bound(&self) -> f64 {
        match self.kind {
            DisorderKind::None => 0.0,
            _ => self.half_width,
        }
    }

    fn base_value(&self, rng: &mut rand_chacha::ChaCha20Rng, site: &Site) -> f64 {
        rng.set_word_pos(2 * rng::site_code(site) as u128);
        let u = rng::unit_f64(rng.next_u64());
        match &self.density {
            Some(d) => d.quantile(u),
            None => self.half_width * (2.0 * u - 1.0),
        }
    }

    /// Value of realization `index` at `site` of a `dimension`-dimensional lattice.
    pub fn site_value(&self, index: u64, site: &Site, dimension: usize) -> f64 {
        let mut stream = rng::stream(self.seed, DOMAIN, index);
        self.site_value_with(&mut stream, site, dimension)
    }

    fn site_value_with(
        &self,
        stream: &mut rand_chacha::ChaCha20Rng,
        site: &Site,
        dimension: usize,
    ) -> f64 {
        match self.kind {
            DisorderKind::None => 0.0,
            DisorderKind::IidUniform | DisorderKind::IidDensity => self.base_value(stream, site),
            DisorderKind::CorrelatedMovingAverage => {
                let r = self.radius as i64;
                let mut sum = 0.0;
                let mut count = 0usize;
                let mut offset = [0i64; MAX_DIMENSION];
                for j in 0..dimension {
                    offset[j] = -r;
                }
                loop {
                    let mut s = *site;
                    for j in 0..dimension {
                        s[j] += offset[j];
                    }
                    sum += self.base_value(stream, &s);
                    count += 1;
                    let mut j = dimension;
                    let done = loop {
                        if j == 0 {
                            break true;
                        }
                        j -= 1;
                        if offset[j] < r {
                            offset[j] += 1;
                            break false;
                        }
                        offset[j] = -r;
                    };
                    if done {
                        break;
                    }
                }
                sum / count as f64
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: DisorderKind,
    pub seed: u64,
    pub index: u64,
}

/// One realization `ω` on a lattice window.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderField {
    pub index: u64,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl DisorderField {
    pub fn zeros(lattice: &LatticeSpec) -> Self {
        Self {
            index: 0,
            values: vec![0.0; lattice.num_sites()],
            provenance: Provenance {
                kind: DisorderKind::None,
                seed: 0,
                index: 0,
            },
        }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        Self {
            index: 0,
            values,
            provenance: Provenance {
                kind: DisorderKind::None,
                seed: 0,
                index: 0,
            },
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn sample_field(spec: &DisorderSpec, lattice: &LatticeSpec, index: u64) -> Result<DisorderField> {
    if index >= spec.samples {
        return Err(Error::IndexOutOfRange {
            index,
            count: spec.samples,
        });
    }
    spec.validate()?;
    let mut spec = spec.clone();
    if let Some(d) = spec.density.as_mut() {
        d.rebuild();
    }
    let mut stream = rng::stream(spec.seed, DOMAIN, index);
    let d = lattice.dimension();
    let values = lattice
        .sites()
        .map(|s| spec.site_value_with(&mut stream, &s, d))
        .collect();
    Ok(DisorderField {
        index,
        values,
        provenance: Provenance {
            kind: spec.kind,
            seed: spec.seed,
            index,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub lag: usize,
    pub correlation: f64,
    pub std_error: f64,
}

/// Empirical correlation of `λ_0` and `λ_{lag·e_1}` across realizations
/// `0..samples` on a chain, with 1σ errors.
pub fn correlation_diagnostic(
    spec: &DisorderSpec,
    max_lag: usize,
    samples: usize,
) -> Result<Vec<CorrelationEstimate>> {
    if samples < 100 {
        return Err(Error::Parameter(format!(
            "correlation diagnostic needs at least 100 samples, got {samples}"
        )));
    }
    spec.validate()?;
    let mut spec = spec.clone();
    if let Some(d) = spec.density.as_mut() {
        d.rebuild();
    }
    let mut series: Vec<Vec<f64>> = vec![Vec::with_capacity(samples); max_lag + 1];
    for n in 0..samples as u64 {
        let mut stream = rng::stream(spec.seed, DOMAIN, n);
        for (lag, s) in series.iter_mut().enumerate() {
            s.push(spec.site_value_with(&mut stream, &[lag as i64, 0, 0], 1));
        }
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        if lag == 0 {
            out.push(CorrelationEstimate {
                lag,
                correlation: 1.0,
                std_error: 0.0,
            });
            continue;
        }
        let rho = stats::pearson(&series[0], &series[lag]);
        let se = (1.0 - rho * rho) / ((samples - 1) as f64).sqrt();
        out.push(CorrelationEstimate {
            lag,
            correlation: rho,
            std_error: se,
        });
    }
    Ok(out)
}

/// Exact lag correlation of the uniform moving-average field along an axis.
pub fn moving_average_correlation(radius: u32, lag: usize) -> f64 {
    let w = 2 * radius as usize + 1;
    if lag >= w {
        0.0
    } else {
        (w - lag) as f64 / w as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rayon::prelude::*;

    #[test]
    fn uniform_values_stay_in_support() {
        let lat = LatticeSpec::new(2, 21).unwrap();
        let spec = DisorderSpec::iid_uniform(2.0, 11, 10);
        for n in 0..10 {
            let f = sample_field(&spec, &lat, n).unwrap();
            assert!(f.values.iter().all(|v| (-2.0..=2.0).contains(v)));
        }
    }

    #[test]
    fn index_out_of_range() {
        let lat = LatticeSpec::chain(5).unwrap();
        let spec = DisorderSpec::iid_uniform(1.0, 1, 3);
        assert!(matches!(
            sample_field(&spec, &lat, 3),
            Err(Error::IndexOutOfRange { index: 3, count: 3 })
        ));
    }

    #[test]
    fn unnormalized_density_rejected() {
        assert!(TabulatedDensity::new(vec![-1.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(TabulatedDensity::new(vec![-1.0, 1.0], vec![0.5, 0.5]).is_ok());
        assert!(TabulatedDensity::new(vec![-1.0, 1.0], vec![-0.5, 1.5]).is_err());
    }

    #[test]
    fn density_quantile_inverts_triangle_cdf() {
        // triangle on [-1, 1], peak 1 at 0
        let d = TabulatedDensity::new(vec![-1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]).unwrap();
        // CDF(x) = (x+1)^2/2 on [-1,0]
        for &x in &[-0.9, -0.5, -0.1] {
            let u: f64 = (x + 1.0) * (x + 1.0) / 2.0;
            assert!((d.quantile(u) - x).abs() < 1e-12);
        }
        assert!((d.quantile(0.5)).abs() < 1e-12);
    }

    #[test]
    fn density_samples_have_expected_variance() {
        let d = TabulatedDensity::new(vec![-1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]).unwrap();
        let spec = DisorderSpec {
            kind: DisorderKind::IidDensity,
            half_width: 1.0,
            radius: 0,
            density: Some(d),
            seed: 5,
            samples: 1,
        };
        let lat = LatticeSpec::chain(40_001).unwrap();
        let f = sample_field(&spec, &lat, 0).unwrap();
        let (mean, var) = stats::mean_var(&f.values);
        assert!(mean.abs() < 0.01);
        // triangle variance 1/6
        assert!((var - 1.0 / 6.0).abs() < 0.005, "var {var}");
    }

    #[test]
    fn parallel_generation_is_bit_identical() {
        let lat = LatticeSpec::new(2, 15).unwrap();
        let spec = DisorderSpec::moving_average(3.0, 1, 99, 64);
        let serial: Vec<Vec<u64>> = (0..64)
            .map(|n| {
                sample_field(&spec, &lat, n)
                    .unwrap()
                    .values
                    .iter()
                    .map(|v| v.to_bits())
                    .collect()
            })
            .collect();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
        let parallel: Vec<Vec<u64>> = pool.install(|| {
            (0..64u64)
                .rev()
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(|n| {
                    sample_field(&spec, &lat, n)
                        .unwrap()
                        .values
                        .iter()
                        .map(|v| v.to_bits())
                        .collect()
                })
                .collect::<Vec<_>>()
                .into_iter()
                .rev()
                .collect()
        });
        assert_eq!(serial, parallel);
    }

    #[test]
    fn fields_agree_across_window_sizes() {
        let small = LatticeSpec::chain(11).unwrap();
        let big = LatticeSpec::chain(101).unwrap();
        let spec = DisorderSpec::moving_average(1.0, 2, 3, 4);
        let a = sample_field(&spec, &small, 2).unwrap();
        let b = sample_field(&spec, &big, 2).unwrap();
        for (i, s) in small.sites().enumerate() {
            assert_eq!(a.values[i], b.values[big.index_of(&s).unwrap()]);
        }
    }

    #[test]
    fn moving_average_bound_holds() {
        let lat = LatticeSpec::new(2, 31).unwrap();
        let spec = DisorderSpec::moving_average(2.5, 2, 8, 3);
        for n in 0..3 {
            let f = sample_field(&spec, &lat, n).unwrap();
            assert!(f.max_abs() <= spec.value_bound());
        }
    }

    #[test]
    fn iid_correlations_vanish() {
        let spec = DisorderSpec::iid_uniform(1.0, 21, 1);
        let est = correlation_diagnostic(&spec, 4, 20_000).unwrap();
        assert_eq!(est[0].correlation, 1.0);
        for e in &est[1..] {
            assert!(e.correlation.abs() <= 4.0 * e.std_error, "{e:?}");
        }
    }

    #[test]
    fn moving_average_correlation_matches_kernel_overlap() {
        let spec = DisorderSpec::moving_average(1.0, 1, 17, 1);
        let est = correlation_diagnostic(&spec, 4, 100_000).unwrap();
        for e in &est {
            let exact = moving_average_correlation(1, e.lag);
            let tol = 4.0 * e.std_error.max(1.0 / (100_000f64).sqrt());
            assert!((e.correlation - exact).abs() <= tol, "{e:?} vs {exact}");
        }
        assert!((moving_average_correlation(1, 1) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn moving_average_has_finite_range() {
        // values more than 2r apart share no base noise: perturbing the base
        // stream at one window never moves the other
        let spec = DisorderSpec::moving_average(1.0, 1, 4, 1);
        let a = spec.site_value(0, &[0, 0, 0], 1);
        let b = spec.site_value(0, &[3, 0, 0], 1);
        let other = DisorderSpec::moving_average(1.0, 1, 5, 1);
        assert_ne!(a, other.site_value(0, &[0, 0, 0], 1));
        assert_ne!(b, other.site_value(0, &[3, 0, 0], 1));
        // window supports {-1,0,1} and {2,3,4} are disjoint
        let win = |c: i64| (c - 1..=c + 1).collect::<Vec<_>>();
        assert!(win(0).iter().all(|x| !win(3).contains(x)));
    }

    #[test]
    fn stationarity_ks_between_sites() {
        let spec = DisorderSpec::moving_average(1.0, 1, 31, 1);
        let n = 10_000u64;
        let at = |x: i64| -> Vec<f64> {
            (0..n).map(|k| spec.site_value(k, &[x, 0, 0], 1)).collect()
        };
        let a = at(0);
        let b = at(7);
        let d = stats::ks_two_sample(&a, &b);
        let crit = 1.628 * (2.0 / n as f64).sqrt();
        assert!(d < crit, "KS {d} >= {crit}");
    }
}
