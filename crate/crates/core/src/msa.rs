//! Scale schedules, Monte Carlo estimates of the multi-scale assumptions
//! and certificate calculators for the single scale step.

use num_rational::BigRational;
use num_traits::FromPrimitive;
use serde::{Deserialize, Serialize};

use crate::ensemble::{par_map_indexed, Ensemble};
use crate::error::{Error, Result};
use crate::green::{BoxGreen, EpsilonProbe, RegularityVerdict};
use crate::lattice::{sup_distance, sup_norm, LatticeBox, Site};
use crate::stats::clopper_pearson;

/// `L_k = L_0^{α^k}` for `k = 0..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSchedule {
    pub l0: f64,
    pub alpha: f64,
    pub scales: Vec<f64>,
}

pub fn schedule(l0: f64, alpha: f64, depth: usize) -> Result<ScaleSchedule> {
    if !(l0 > 1.0) || !(alpha > 1.0) || !l0.is_finite() || !alpha.is_finite() {
        return Err(Error::Parameter(format!(
            "schedule needs L0 > 1 and α > 1, got L0 = {l0}, α = {alpha}"
        )));
    }
    let scales = (0..=depth)
        .map(|k| l0.powf(alpha.powi(k as i32)))
        .collect();
    Ok(ScaleSchedule { l0, alpha, scales })
}

impl ScaleSchedule {
    pub fn depth(&self) -> usize {
        self.scales.len() - 1
    }

    pub fn scale(&self, k: usize) -> f64 {
        self.scales[k]
    }

    /// Box radius `⌈L_k⌉` used when a scale is tested on the lattice.
    pub fn radius(&self, k: usize) -> f64 {
        self.scales[k].ceil()
    }

    /// `ln L_k = α^k ln L_0`, valid beyond the stored depth.
    pub fn log_scale(&self, k: usize) -> f64 {
        self.alpha.powi(k as i32) * self.l0.ln()
    }

    /// Largest `k` whose box `Λ_{⌈L_k⌉}(q)` with `‖q‖_∞ > 2L_k` and an
    /// exterior layer fits in a lattice of half-extent `half`.
    pub fn largest_feasible(&self, half: i64) -> Option<usize> {
        (0..self.scales.len())
            .rev()
            .find(|&k| m2_center_offset(self.scales[k]) + self.radius(k) as i64 + 1 <= half)
    }
}

/// `k ≥ 1` with `e^{L_{k−1}^ν} ≤ 1/ε < e^{L_k^ν}`, or `None` when
/// `1/ε < e^{L_0^ν}`.
pub fn select_k_exponential(l0: f64, alpha: f64, nu: f64, epsilon: f64) -> Option<usize> {
    let target = (1.0 / epsilon).ln();
    let level = |k: usize| (nu * alpha.powi(k as i32) * l0.ln()).exp();
    if !(target >= level(0)) {
        return None;
    }
    let mut k = 1;
    while level(k) <= target {
        k += 1;
    }
    Some(k)
}

/// `k ≥ 1` with `L_{k−1}^n < 1/ε ≤ L_k^n`, or `None` when `1/ε ≤ L_0^n`.
pub fn select_k_algebraic(l0: f64, alpha: f64, n: f64, epsilon: f64) -> Option<usize> {
    let target = -epsilon.ln();
    let level = |k: usize| n * alpha.powi(k as i32) * l0.ln();
    if !(target > level(0)) {
        return None;
    }
    let mut k = 1;
    while level(k) < target {
        k += 1;
    }
    Some(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesTail {
    pub value: f64,
    pub terms: usize,
    pub converged: bool,
}

/// `Σ_{j≥k} L_j^{α(d+2)} (e^{−L_j^ν} |I| + L_j^{−p})`.
pub fn series_tail(
    sched: &ScaleSchedule,
    d: usize,
    nu: f64,
    p: f64,
    interval_len: f64,
    k: usize,
) -> SeriesTail {
    let growth = sched.alpha * (d as f64 + 2.0);
    if p <= growth {
        return SeriesTail {
            value: f64::INFINITY,
            terms: 0,
            converged: false,
        };
    }
    let mut value = 0.0;
    for (n, j) in (k..k + 512).enumerate() {
        let ln_l = sched.log_scale(j);
        let a = (growth * ln_l - (nu * ln_l).exp()).exp() * interval_len;
        let b = ((growth - p) * ln_l).exp();
        let term = a + b;
        value += term;
        if term <= 1e-17 * value || term == 0.0 {
            return SeriesTail {
                value,
                terms: n + 1,
                converged: true,
            };
        }
    }
    SeriesTail {
        value,
        terms: 512,
        converged: false,
    }
}

/// Decay profile `ρ` of the multi-scale assumptions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RhoSpec {
    /// `ρ(L) = e^{−2L^ν}`.
    Exponential { nu: f64 },
    /// `ρ(L) = L^{−m}`.
    Algebraic { m: f64 },
    /// `ρ(L) = c(n) L^{−2n}`.
    AlgebraicM1 { n: f64, c_n: f64 },
}

impl RhoSpec {
    pub fn rho(&self, l: f64) -> f64 {
        match *self {
            RhoSpec::Exponential { nu } => (-2.0 * l.powf(nu)).exp(),
            RhoSpec::Algebraic { m } => l.powf(-m),
            RhoSpec::AlgebraicM1 { n, c_n } => c_n * l.powf(-2.0 * n),
        }
    }

    /// Regularity threshold `ρ(L)^{1/2}`.
    pub fn threshold(&self, l: f64) -> f64 {
        match *self {
            RhoSpec::Exponential { nu } => (-l.powf(nu)).exp(),
            RhoSpec::Algebraic { m } => l.powf(-0.5 * m),
            RhoSpec::AlgebraicM1 { n, c_n } => c_n.sqrt() * l.powf(-n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MsaVariant {
    M1,
    M2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsaParams {
    pub variant: MsaVariant,
    pub rho: RhoSpec,
    pub p: f64,
    pub d: usize,
    pub interval: (f64, f64),
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub satisfied: bool,
    pub violations: Vec<String>,
}

impl MsaParams {
    /// Parameter hypotheses of the assumption, reported rather than enforced.
    pub fn hypotheses(&self, alpha: f64) -> HypothesisReport {
        let d = self.d as f64;
        let mut violations = Vec::new();
        match self.variant {
            MsaVariant::M1 => {
                let g = alpha * (d + 2.0);
                if !(self.p > g) {
                    violations.push(format!("p = {} must exceed α(d+2) = {g}", self.p));
                }
                if let RhoSpec::AlgebraicM1 { n, .. } = self.rho {
                    if !(n > g) {
                        violations.push(format!("n = {n} must exceed α(d+2) = {g}"));
                    }
                }
            }
            MsaVariant::M2 => {
                let g = 3.0 + d + self.beta;
                if let RhoSpec::Algebraic { m } = self.rho {
                    if !(m > g) {
                        violations.push(format!("m = {m} must exceed 3+d+β = {g}"));
                    }
                } else {
                    violations.push("M2 uses ρ(L) = L^{−m}".into());
                }
                if !(self.p > g) {
                    violations.push(format!("p = {} must exceed 3+d+β = {g}", self.p));
                }
            }
        }
        HypothesisReport {
            satisfied: violations.is_empty(),
            violations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleEstimate {
    pub scale: f64,
    pub radius: f64,
    pub samples: u64,
    pub passes: u64,
    pub pass_fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `1 − L^{−p}`.
    pub bound: f64,
    pub verdict: bool,
}

fn scale_estimate(scale: f64, radius: f64, passes: u64, samples: u64, p: f64, confidence: f64) -> ScaleEstimate {
    let (ci_low, ci_high) = clopper_pearson(passes, samples, confidence);
    let bound = 1.0 - scale.powf(-p);
    ScaleEstimate {
        scale,
        radius,
        samples,
        passes,
        pass_fraction: passes as f64 / samples as f64,
        ci_low,
        ci_high,
        bound,
        verdict: ci_low >= bound,
    }
}

/// Smallest integer `‖q‖_∞` with `‖q‖_∞ > 2L`.
pub fn m2_center_offset(l: f64) -> i64 {
    (2.0 * l).floor() as i64 + 1
}

/// Shared Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub realizations: u64,
    pub workers: usize,
    pub confidence: f64,
    pub probe: EpsilonProbe,
}

/// Per-realization regularity verdicts of one scale, in realization order.
pub fn m2_verdicts(
    ens: &Ensemble,
    rho: &RhoSpec,
    scale: f64,
    energy: f64,
    q: Site,
    mc: &MonteCarlo,
) -> Result<Vec<RegularityVerdict>> {
    if !((sup_norm(&q) as f64) > 2.0 * scale) {
        return Err(Error::Geometry(format!(
            "center {q:?} must satisfy ‖q‖_∞ > 2L = {}",
            2.0 * scale
        )));
    }
    let bx = LatticeBox::new(q, scale.ceil());
    if !bx.has_exterior_layer(&ens.lattice) {
        return Err(Error::Geometry(format!(
            "box of radius {} at {q:?} with its exterior layer does not fit in a lattice of extent {}",
            bx.radius,
            ens.lattice.extent()
        )));
    }
    let threshold = rho.threshold(scale);
    par_map_indexed(mc.workers, mc.realizations as usize, |i| {
        let op = ens.operator(i as u64)?;
        Ok(BoxGreen::new(&op, &bx)?.regularity(energy, threshold, &mc.probe))
    })
}

/// Pass fraction and Clopper–Pearson interval from per-realization verdicts.
pub fn summarize_scale(verdicts: &[RegularityVerdict], scale: f64, p: f64, confidence: f64) -> Result<ScaleEstimate> {
    if verdicts.is_empty() {
        return Err(Error::Parameter("no realizations".into()));
    }
    let passes = verdicts.iter().filter(|v| v.pass).count() as u64;
    Ok(scale_estimate(scale, scale.ceil(), passes, verdicts.len() as u64, p, confidence))
}

/// Fraction of realizations for which `Λ_{⌈L⌉}(q)` is `(ρ, E, L, q)`-regular,
/// with its Clopper–Pearson interval against `1 − L^{−p}`.
pub fn estimate_m2_probability(
    ens: &Ensemble,
    params: &MsaParams,
    scale: f64,
    energy: f64,
    q: Site,
    mc: &MonteCarlo,
) -> Result<ScaleEstimate> {
    let verdicts = m2_verdicts(ens, &params.rho, scale, energy, q, mc)?;
    summarize_scale(&verdicts, scale, params.p, mc.confidence)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct M1Estimate {
    /// All energies regular at one fixed center.
    pub uniform_choice: ScaleEstimate,
    /// Each energy regular at one of the two centers.
    pub per_energy_choice: ScaleEstimate,
    pub grid_points: usize,
    pub grid_spacing: f64,
    /// Realizations where the per-energy event holds but the uniform one does not.
    pub gap: u64,
}

/// Both readings of the two-center event of (M1) on shared realizations.
pub fn estimate_m1_probability(
    ens: &Ensemble,
    params: &MsaParams,
    scale: f64,
    energies: &[f64],
    q: Site,
    qp: Site,
    mc: &MonteCarlo,
) -> Result<M1Estimate> {
    if !((sup_distance(&q, &qp) as f64) > 2.0 * scale) {
        return Err(Error::Geometry(format!(
            "centers {q:?} and {qp:?} must satisfy ‖q − q′‖_∞ > 2L = {}",
            2.0 * scale
        )));
    }
    if energies.is_empty() {
        return Err(Error::Grid("empty energy grid".into()));
    }
    let spacing = energies
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max);
    if spacing > mc.probe.epsilon_min / 4.0 * (1.0 + 1e-9) {
        return Err(Error::Grid(format!(
            "energy grid spacing {spacing:e} exceeds ε_min/4 = {:e}",
            mc.probe.epsilon_min / 4.0
        )));
    }
    let boxes = [LatticeBox::new(q, scale.ceil()), LatticeBox::new(qp, scale.ceil())];
    for b in &boxes {
        if !b.has_exterior_layer(&ens.lattice) {
            return Err(Error::Geometry(format!(
                "box of radius {} at {:?} with its exterior layer does not fit in the lattice",
                b.radius, b.center
            )));
        }
    }
    let threshold = params.rho.threshold(scale);
    let outcomes = par_map_indexed(mc.workers, mc.realizations as usize, |i| {
        let op = ens.operator(i as u64)?;
        let a = BoxGreen::new(&op, &boxes[0])?;
        let b = BoxGreen::new(&op, &boxes[1])?;
        let pa: Vec<bool> = energies
            .iter()
            .map(|&e| a.regularity(e, threshold, &mc.probe).pass)
            .collect();
        let pb: Vec<bool> = energies
            .iter()
            .map(|&e| b.regularity(e, threshold, &mc.probe).pass)
            .collect();
        let uniform = pa.iter().all(|&x| x) || pb.iter().all(|&x| x);
        let per_energy = pa.iter().zip(&pb).all(|(&x, &y)| x || y);
        Ok((uniform, per_energy))
    })?;
    let uni = outcomes.iter().filter(|o| o.0).count() as u64;
    let per = outcomes.iter().filter(|o| o.1).count() as u64;
    let gap = outcomes.iter().filter(|o| o.1 && !o.0).count() as u64;
    let n = mc.realizations;
    Ok(M1Estimate {
        uniform_choice: scale_estimate(scale, scale.ceil(), uni, n, params.p, mc.confidence),
        per_energy_choice: scale_estimate(scale, scale.ceil(), per, n, params.p, mc.confidence),
        grid_points: energies.len(),
        grid_spacing: spacing,
        gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentBound {
    /// `α(d+2)/n`, reported only under the hypothesis `n > α(d+2)`.
    pub bound: Option<f64>,
    pub hypothesis: bool,
}

/// Upper bound `α(d+2)/n` on `σ⁺` for algebraic decay of order `n`.
pub fn remark23_bound(alpha: f64, d: usize, n: f64) -> ExponentBound {
    let g = alpha * (d as f64 + 2.0);
    let hypothesis = n > g;
    ExponentBound {
        bound: hypothesis.then(|| g / n),
        hypothesis,
    }
}

/// Constants of the single scale step. The combinatorial constants and the
/// Wegner data are inputs, not derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateParams {
    pub alpha: f64,
    pub m: f64,
    pub w: f64,
    pub s: u32,
    pub n: u32,
    pub d: usize,
    pub k0: u32,
    pub theta: f64,
    pub p: f64,
    pub c_w: f64,
    pub interval_len: f64,
    /// `c(N, S, d)`.
    pub c_nsd: f64,
    /// `c_{d,N}`.
    pub c_dn: f64,
    /// `č`.
    pub c_check: f64,
}

impl CertificateParams {
    pub fn validate(&self) -> Result<()> {
        if self.n <= 4 {
            return Err(Error::Parameter(format!("N = {} must exceed 4", self.n)));
        }
        if self.s % 2 != 0 || !(2 < self.s && self.s + 1 < self.n) {
            return Err(Error::Parameter(format!(
                "S = {} must be even with 2 < S < N − 1 = {}",
                self.s,
                self.n - 1
            )));
        }
        if !(self.alpha > 1.0) {
            return Err(Error::Parameter(format!("α = {} must exceed 1", self.alpha)));
        }
        for (name, v) in [
            ("C_W", self.c_w),
            ("|I|", self.interval_len),
            ("c(N,S,d)", self.c_nsd),
            ("c_{d,N}", self.c_dn),
            ("č", self.c_check),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Parameter(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }
}

fn exact(v: f64) -> Result<BigRational> {
    BigRational::from_f64(v).ok_or_else(|| Error::Parameter(format!("{v} is not finite")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicCertificate {
    pub params: CertificateParams,
    /// `(S − α) m`.
    pub condition_lhs: f64,
    /// `α(S+1)w + S(d−1)(α−1)`.
    pub condition_rhs: f64,
    pub condition: bool,
    pub ell: f64,
    /// `L = N ℓ^α`.
    pub big_l: f64,
    /// `ln` of the chain product.
    pub log_chain: f64,
    /// `ln L^{−m}`.
    pub log_target: f64,
    pub chain_holds: bool,
    /// Smallest `ℓ > 1` from which the chain bound holds, if any.
    pub smallest_ell: Option<f64>,
    pub smallest_l: Option<f64>,
    pub pass: bool,
}

/// Condition of the deterministic step, decided in exact rational arithmetic.
pub fn deterministic_condition(params: &CertificateParams) -> Result<bool> {
    let s = BigRational::from_u32(params.s).expect("small integer");
    let d1 = BigRational::from_i64(params.d as i64 - 1).expect("small integer");
    let one = BigRational::from_u32(1).expect("one");
    let a = exact(params.alpha)?;
    let m = exact(params.m)?;
    let w = exact(params.w)?;
    let lhs = (&s - &a) * m;
    let rhs = &a * (&s + &one) * w + &s * d1 * (&a - &one);
    Ok(lhs > rhs)
}

/// `(č c_{d,N})^S č (L^{(1−1/α)(d−1)} L^w ℓ^{−m})^S L^w ≤ L^{−m}` at
/// `L = N ℓ^α`, together with the exact condition on the exponents.
///
/// With `x = ln ℓ` both sides are affine in `x`; the difference has slope
/// `α(S+1)w + S(d−1)(α−1) − (S−α)m`, so the smallest passing `ℓ` has a
/// closed form whenever the condition holds.
pub fn deterministic_certificate(params: &CertificateParams, ell: f64) -> Result<DeterministicCertificate> {
    params.validate()?;
    if !(ell > 1.0) {
        return Err(Error::Parameter(format!("ℓ = {ell} must exceed 1")));
    }
    let condition = deterministic_condition(params)?;
    let (a, m, w, d) = (params.alpha, params.m, params.w, params.d as f64);
    let s = params.s as f64;
    let ln_n = (params.n as f64).ln();
    let frame = (1.0 - 1.0 / a) * (d - 1.0);
    let constant = s * (params.c_check * params.c_dn).ln() + params.c_check.ln();
    let chain_at = |x: f64| {
        let ln_l = ln_n + a * x;
        constant + s * ((frame + w) * ln_l - m * x) + w * ln_l
    };
    let x = ell.ln();
    let log_chain = chain_at(x);
    let log_target = -m * (ln_n + a * x);
    // chain − target = intercept + slope·x
    let slope = a * (s + 1.0) * w + s * (d - 1.0) * (a - 1.0) - (s - a) * m;
    let intercept = constant + (s * (frame + w) + w + m) * ln_n;
    let smallest_x = if slope < 0.0 {
        Some((-intercept / slope).max(0.0))
    } else if intercept <= 0.0 && slope == 0.0 {
        Some(0.0)
    } else {
        None
    };
    let smallest_ell = smallest_x.map(f64::exp);
    let chain_holds = log_chain <= log_target;
    Ok(DeterministicCertificate {
        params: params.clone(),
        condition_lhs: (s - a) * m,
        condition_rhs: a * (s + 1.0) * w + s * (d - 1.0) * (a - 1.0),
        condition,
        ell,
        big_l: params.n as f64 * ell.powf(a),
        log_chain,
        log_target,
        chain_holds,
        smallest_ell,
        smallest_l: smallest_ell.map(|l| params.n as f64 * l.powf(a)),
        pass: condition && chain_holds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilisticCertificate {
    pub params: CertificateParams,
    pub l0: f64,
    /// `L_1 = N L_0^α`.
    pub l1: f64,
    /// `2^{2d+1} C(N−1, N−S) C_W |I| L_1^{−w+2d}`.
    pub wegner_term: f64,
    /// `3 c(N,S,d) N^{pθ/α} L_1^{(1−1/α)(d−1)(N−S) − pθ/α}`.
    pub frame_term: f64,
    pub lower_bound: f64,
    /// `1 − L_1^{−p}`.
    pub target: f64,
    /// `L_1^{−p} − (wegner_term + frame_term)`; nonnegative iff the bound holds.
    pub deficit: f64,
    /// `(α−1)(d−1)(N−S)/(θ−α) < p < w − 2d`.
    pub hypothesis: bool,
    pub hypothesis_window: (f64, f64),
    pub pass: bool,
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as f64
}

/// Lower bound on the probability of the scale step from `L_0` to `L_1`.
pub fn probabilistic_certificate(params: &CertificateParams, l0: f64) -> Result<ProbabilisticCertificate> {
    params.validate()?;
    if !(l0 > 1.0) {
        return Err(Error::Parameter(format!("L0 = {l0} must exceed 1")));
    }
    let (a, w, p, th) = (params.alpha, params.w, params.p, params.theta);
    let d = params.d as f64;
    let (n, s) = (params.n, params.s);
    let l1 = n as f64 * l0.powf(a);
    let ln_l1 = l1.ln();
    let wegner_term = (2f64.powi(2 * params.d as i32 + 1)
        * binomial(n - 1, n - s)
        * params.c_w
        * params.interval_len)
        * ((-w + 2.0 * d) * ln_l1).exp();
    let expo = (1.0 - 1.0 / a) * (d - 1.0) * (n - s) as f64 - p * th / a;
    let frame_term = 3.0 * params.c_nsd * ((p * th / a) * (n as f64).ln() + expo * ln_l1).exp();
    let tail = (-p * ln_l1).exp();
    let lo = if th > a {
        (a - 1.0) * (d - 1.0) * (n - s) as f64 / (th - a)
    } else {
        f64::INFINITY
    };
    let hi = w - 2.0 * d;
    let deficit = tail - (wegner_term + frame_term);
    Ok(ProbabilisticCertificate {
        params: params.clone(),
        l0,
        l1,
        wegner_term,
        frame_term,
        lower_bound: 1.0 - wegner_term - frame_term,
        target: 1.0 - tail,
        deficit,
        hypothesis: lo < p && p < hi,
        hypothesis_window: (lo, hi),
        pass: deficit >= 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsaReport {
    pub variant: MsaVariant,
    pub schedule: ScaleSchedule,
    pub hypotheses: HypothesisReport,
    pub per_scale: Vec<ScaleEstimate>,
    pub deterministic: Option<DeterministicCertificate>,
    pub probabilistic: Option<ProbabilisticCertificate>,
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example3() -> CertificateParams {
        CertificateParams {
            alpha: 1.5,
            m: 33.0,
            w: 8.0,
            s: 4,
            n: 14,
            d: 1,
            k0: 10,
            theta: 3.0,
            p: 5.5,
            c_w: 1.0,
            interval_len: 1.0,
            c_nsd: 1.0,
            c_dn: 1.0,
            c_check: 1.0,
        }
    }

    #[test]
    fn schedule_values() {
        let s = schedule(3.0, 1.5, 3).unwrap();
        let expected = [3.0, 3f64.powf(1.5), 3f64.powf(2.25), 3f64.powf(3.375)];
        for (a, b) in s.scales.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12 * b);
        }
        assert!((s.scales[1] - 5.196).abs() < 1e-3);
        assert!((s.scales[3] - 40.77).abs() < 1e-2);
        assert_eq!(schedule(3.0, 1.5, 0).unwrap().scales, vec![3.0]);
        assert!(schedule(1.0, 1.5, 2).is_err());
        assert!(schedule(2.0, 1.0, 2).is_err());
    }

    #[test]
    fn example3_condition() {
        let c = deterministic_certificate(&example3(), 2.0).unwrap();
        assert!(c.condition);
        assert_eq!(c.condition_lhs, 82.5);
        assert_eq!(c.condition_rhs, 60.0);
        let mut low = example3();
        low.m = 24.0;
        assert!(!deterministic_certificate(&low, 2.0).unwrap().condition);
    }

    #[test]
    fn smallest_ell_is_the_crossing() {
        let c = deterministic_certificate(&example3(), 2.0).unwrap();
        let l = c.smallest_ell.unwrap();
        assert!(!c.chain_holds);
        assert!(deterministic_certificate(&example3(), l * 1.001).unwrap().chain_holds);
        assert!(!deterministic_certificate(&example3(), l * 0.999).unwrap().chain_holds);
        let mut huge = example3();
        huge.m = 1e4;
        assert!(deterministic_certificate(&huge, 4.0).unwrap().pass);
    }

    #[test]
    fn remark_bound() {
        assert_eq!(remark23_bound(1.5, 1, 9.0).bound, Some(0.5));
        let near = remark23_bound(1.5, 1, 4.5 + 1e-6).bound.unwrap();
        assert!(near < 1.0 && near > 0.999_999);
        let bad = remark23_bound(1.5, 1, 4.0);
        assert!(!bad.hypothesis && bad.bound.is_none());
    }

    #[test]
    fn probabilistic_generic_instance() {
        let c = probabilistic_certificate(&example3(), 10.0).unwrap();
        let l1 = 14.0 * 10f64.powf(1.5);
        assert!((c.l1 - l1).abs() < 1e-12 * l1);
        let wegner = 8.0 * 286.0 * l1.powi(-6);
        assert!((c.wegner_term - wegner).abs() < 1e-12 * wegner);
        assert!(c.hypothesis);
        assert_eq!(c.pass, c.deficit >= 0.0);
        let mut q = example3();
        q.p = 6.5;
        assert!(!probabilistic_certificate(&q, 10.0).unwrap().hypothesis);
        let far = probabilistic_certificate(&example3(), 1e3).unwrap();
        assert!(far.wegner_term < c.wegner_term);
    }

    #[test]
    fn certificate_validation() {
        let mut p = example3();
        p.s = 3;
        assert!(p.validate().is_err());
        p.s = 14;
        assert!(p.validate().is_err());
        p = example3();
        p.n = 4;
        assert!(p.validate().is_err());
    }

    #[test]
    fn k_selectors_sandwich() {
        for &eps in &[1e-3, 1e-8, 1e-20, 1e-100] {
            let k = select_k_exponential(2.0, 1.5, 0.5, eps).unwrap();
            let lk = |k: i32| 2f64.powf(1.5f64.powi(k));
            assert!(lk(k as i32 - 1).powf(0.5).exp() <= 1.0 / eps);
            assert!(1.0 / eps < lk(k as i32).powf(0.5).exp());
            let k = select_k_algebraic(2.0, 1.5, 3.0, eps).unwrap();
            assert!(lk(k as i32 - 1).powf(3.0) < 1.0 / eps);
            assert!(1.0 / eps <= lk(k as i32).powf(3.0));
        }
        assert_eq!(select_k_exponential(10.0, 1.5, 1.0, 0.5), None);
    }

    #[test]
    fn series_convergence() {
        let s = schedule(3.0, 1.5, 1).unwrap();
        assert!(series_tail(&s, 1, 0.5, 5.0, 1.0, 1).converged);
        assert!(!series_tail(&s, 1, 0.5, 4.5, 1.0, 1).converged);
    }

    #[test]
    fn hypotheses_flagged() {
        let p = MsaParams {
            variant: MsaVariant::M2,
            rho: RhoSpec::Algebraic { m: 4.0 },
            p: 2.0,
            d: 1,
            interval: (-2.5, -1.5),
            beta: 0.0,
        };
        let h = p.hypotheses(1.5);
        assert!(!h.satisfied);
        assert_eq!(h.violations.len(), 2);
    }
}
