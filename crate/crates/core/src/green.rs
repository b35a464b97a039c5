//! Lattice Green's functions `G(x, y; z) = ⟨δ_x, (H − z)^{−1} δ_y⟩`, the
//! geometric resolvent identity, `(ρ, E, L, q)`-regularity tests and the
//! energy integrals of resolvent norms.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::banded::ShiftedSolver;
use crate::dynamics::{second_moment_weights, WeightedResolvent};
use crate::error::{Error, Result};
use crate::lattice::{boundary_pairs, sup_distance, BoundaryPairSet, LatticeBox, Site};
use crate::operator::{diagonalize, restrict, LatticeOperator, SpectralDecomposition, HOPPING};
use crate::quadrature::{trapezoid, FullLineRule, Quadrature};

/// A request for `G(target, source; E + iε)`, optionally on a box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenQuery {
    pub energy: f64,
    pub epsilon: f64,
    pub source: Site,
    pub target: Site,
    pub restriction: Option<LatticeBox>,
}

impl GreenQuery {
    pub fn z(&self) -> Complex64 {
        Complex64::new(self.energy, self.epsilon)
    }

    pub fn evaluate(&self, op: &LatticeOperator) -> Result<Complex64> {
        let restricted;
        let op = match &self.restriction {
            Some(b) => {
                restricted = restrict(op, b)?;
                &restricted
            }
            None => op,
        };
        let col = resolve(op, &self.source, self.energy, self.epsilon)?;
        let row = row_of(op, &self.target)?;
        Ok(col.values[row])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventColumn {
    pub values: Vec<Complex64>,
    /// `‖(H − z) x − δ_q‖`.
    pub residual: f64,
}

fn row_of(op: &LatticeOperator, site: &Site) -> Result<usize> {
    op.row_of(site)
        .ok_or_else(|| Error::Geometry(format!("site {site:?} is not a site of the operator")))
}

/// `(H − E − iε)^{−1} δ_q` by a banded direct solve.
pub fn resolve(op: &LatticeOperator, q: &Site, energy: f64, epsilon: f64) -> Result<ResolventColumn> {
    if epsilon == 0.0 {
        return Err(Error::Parameter("ε must be nonzero".into()));
    }
    let row = row_of(op, q)?;
    let solver = ShiftedSolver::new(op, Complex64::new(energy, epsilon))?;
    let (values, residual) = solver.column(row);
    Ok(ResolventColumn { values, residual })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreReport {
    pub full: (f64, f64),
    pub expansion: (f64, f64),
    pub residual: f64,
    pub pairs: usize,
}

fn check_separation(bx: &LatticeBox, q: &Site) -> Result<()> {
    let sep = sup_distance(q, &bx.center) as f64;
    if !(sep > 2.0 * bx.radius) {
        return Err(Error::Geometry(format!(
            "source {q:?} is at distance {sep} from the box center, need more than 2L = {}",
            2.0 * bx.radius
        )));
    }
    Ok(())
}

/// `−t Σ_{(u,u′)} G_Λ(q′, u; z) G(u′, q; z)` for the given boundary pairs,
/// with `q′` the box center and `t` the hopping amplitude.
pub fn gre_expansion(
    op: &LatticeOperator,
    bx: &LatticeBox,
    pairs: &BoundaryPairSet,
    q: &Site,
    z: Complex64,
) -> Result<Complex64> {
    let full = ShiftedSolver::new(op, z)?.column(row_of(op, q)?).0;
    let boxed = restrict(op, bx)?;
    let gbox = ShiftedSolver::new(&boxed, z)?.column(row_of(&boxed, &bx.center)?).0;
    let mut sum = Complex64::new(0.0, 0.0);
    for (u, up) in &pairs.pairs {
        sum += gbox[row_of(&boxed, u)?] * full[row_of(op, up)?];
    }
    Ok(-HOPPING * sum)
}

/// `|G(q′, q; z) − (−t) Σ G_Λ(q′, u; z) G(u′, q; z)|` for the box `Λ_L(q′)`.
///
/// With hopping `+1` the identity carries a minus sign: it is the second
/// resolvent identity applied to the bonds removed by the restriction.
pub fn gre_identity_residual(
    op: &LatticeOperator,
    bx: &LatticeBox,
    q: &Site,
    energy: f64,
    epsilon: f64,
) -> Result<GreReport> {
    check_separation(bx, q)?;
    let pairs = boundary_pairs(bx, op.lattice())?;
    gre_residual_with_pairs(op, bx, &pairs, q, energy, epsilon)
}

/// Same as [`gre_identity_residual`] with a caller-supplied pair set.
pub fn gre_residual_with_pairs(
    op: &LatticeOperator,
    bx: &LatticeBox,
    pairs: &BoundaryPairSet,
    q: &Site,
    energy: f64,
    epsilon: f64,
) -> Result<GreReport> {
    let z = Complex64::new(energy, epsilon);
    let full = ShiftedSolver::new(op, z)?.column(row_of(op, q)?).0[row_of(op, &bx.center)?];
    let expansion = gre_expansion(op, bx, pairs, q, z)?;
    Ok(GreReport {
        full: (full.re, full.im),
        expansion: (expansion.re, expansion.im),
        residual: (full - expansion).norm(),
        pairs: pairs.len(),
    })
}

/// Geometric probe grid for `sup_{ε>0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonProbe {
    pub epsilon_min: f64,
    pub per_decade: usize,
}

impl Default for EpsilonProbe {
    fn default() -> Self {
        Self {
            epsilon_min: 1e-6,
            per_decade: 8,
        }
    }
}

impl EpsilonProbe {
    pub fn values(&self) -> Vec<f64> {
        let decades = -self.epsilon_min.log10();
        let n = ((decades * self.per_decade as f64).ceil() as usize).max(1);
        (0..=n)
            .map(|i| self.epsilon_min * 10f64.powf(decades * i as f64 / n as f64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityVerdict {
    pub energy: f64,
    pub radius: f64,
    pub center: Site,
    /// `max` over the probe grid of `‖1_q D_{L,q}(E + iε)‖`.
    pub measured_norm: f64,
    /// Probe `ε` attaining the maximum.
    pub worst_epsilon: f64,
    pub threshold: f64,
    /// `dist(E, spec H_Λ)`.
    pub guard_distance: f64,
    pub guard_ok: bool,
    pub pass: bool,
}

/// Spectral data of `H_Λ` for a box `Λ = Λ_L(q)`, reduced to what the
/// boundary norm `‖1_q D_{L,q}(z)‖` needs.
#[derive(Debug, Clone)]
pub struct BoxGreen {
    pub bx: LatticeBox,
    pub eigenvalues: Vec<f64>,
    /// `b_{k,u′} = v_k(q) Σ_{u∼u′, u∈Λ} v_k(u)`, one column per exterior site.
    amplitudes: DMatrix<f64>,
}

impl BoxGreen {
    pub fn new(op: &LatticeOperator, bx: &LatticeBox) -> Result<Self> {
        let pairs = boundary_pairs(bx, op.lattice())?;
        let boxed = restrict(op, bx)?;
        let dec = diagonalize(&boxed)?;
        Self::from_parts(&boxed, &dec, bx, &pairs)
    }

    fn from_parts(
        boxed: &LatticeOperator,
        dec: &SpectralDecomposition,
        bx: &LatticeBox,
        pairs: &BoundaryPairSet,
    ) -> Result<Self> {
        let exterior = pairs.exterior_sites();
        let qrow = row_of(boxed, &bx.center)?;
        let k = dec.dim();
        let mut amplitudes = DMatrix::<f64>::zeros(k, exterior.len());
        for (col, up) in exterior.iter().enumerate() {
            let inner: Vec<usize> = pairs
                .pairs
                .iter()
                .filter(|(_, v)| v == up)
                .map(|(u, _)| row_of(boxed, u))
                .collect::<Result<_>>()?;
            for kk in 0..k {
                let v = dec.eigenvectors.column(kk);
                let s: f64 = inner.iter().map(|&r| v[r]).sum();
                amplitudes[(kk, col)] = HOPPING * v[qrow] * s;
            }
        }
        Ok(Self {
            bx: *bx,
            eigenvalues: dec.eigenvalues.clone(),
            amplitudes,
        })
    }

    /// `‖1_q D_{L,q}(z)‖ = (Σ_{u′} |Σ_{u∼u′} G_Λ(q, u; z)|²)^{1/2}`.
    pub fn boundary_norm(&self, z: Complex64) -> f64 {
        let inv: Vec<Complex64> = self
            .eigenvalues
            .iter()
            .map(|&t| 1.0 / (Complex64::new(t, 0.0) - z))
            .collect();
        let mut total = 0.0;
        for col in 0..self.amplitudes.ncols() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, w) in inv.iter().enumerate() {
                acc += w * self.amplitudes[(k, col)];
            }
            total += acc.norm_sqr();
        }
        total.sqrt()
    }

    pub fn guard_distance(&self, energy: f64) -> f64 {
        self.eigenvalues
            .iter()
            .map(|t| (t - energy).abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn regularity(&self, energy: f64, threshold: f64, probe: &EpsilonProbe) -> RegularityVerdict {
        let guard_distance = self.guard_distance(energy);
        let guard_ok = guard_distance >= probe.epsilon_min;
        let mut measured_norm = 0.0f64;
        let mut worst_epsilon = probe.epsilon_min;
        for eps in probe.values() {
            let n = self.boundary_norm(Complex64::new(energy, eps));
            if n > measured_norm {
                measured_norm = n;
                worst_epsilon = eps;
            }
        }
        RegularityVerdict {
            energy,
            radius: self.bx.radius,
            center: self.bx.center,
            measured_norm,
            worst_epsilon,
            threshold,
            guard_distance,
            guard_ok,
            pass: guard_ok && measured_norm <= threshold,
        }
    }
}

/// `(ρ, E, L, q)`-regularity of the box `bx = Λ_L(q)` with threshold
/// `ρ(L)^{1/2}`.
pub fn regularity_test(
    op: &LatticeOperator,
    bx: &LatticeBox,
    energy: f64,
    threshold: f64,
    probe: &EpsilonProbe,
) -> Result<RegularityVerdict> {
    Ok(BoxGreen::new(op, bx)?.regularity(energy, threshold, probe))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableEnergyVerdict {
    pub pass: bool,
    pub energies: usize,
    pub grid_spacing: f64,
    pub worst_energy: f64,
    /// Largest `norm / threshold`, infinite where the guard fails.
    pub worst_ratio: f64,
    pub per_energy_pass: Vec<bool>,
}

/// Regularity at every energy of a grid: the conjunction of single-energy tests.
pub fn variable_energy_regularity(
    op: &LatticeOperator,
    bx: &LatticeBox,
    energies: &[f64],
    threshold: f64,
    probe: &EpsilonProbe,
) -> Result<VariableEnergyVerdict> {
    let bg = BoxGreen::new(op, bx)?;
    variable_energy_with(&bg, energies, threshold, probe)
}

pub fn variable_energy_with(
    bg: &BoxGreen,
    energies: &[f64],
    threshold: f64,
    probe: &EpsilonProbe,
) -> Result<VariableEnergyVerdict> {
    if energies.is_empty() {
        return Err(Error::Grid("empty energy grid".into()));
    }
    let spacing = energies
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max);
    if spacing > probe.epsilon_min / 4.0 * (1.0 + 1e-9) {
        return Err(Error::Grid(format!(
            "energy grid spacing {spacing:e} exceeds ε_min/4 = {:e}",
            probe.epsilon_min / 4.0
        )));
    }
    let mut per_energy_pass = Vec::with_capacity(energies.len());
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut worst_energy = energies[0];
    for &e in energies {
        let v = bg.regularity(e, threshold, probe);
        let ratio = if v.guard_ok {
            v.measured_norm / threshold
        } else {
            f64::INFINITY
        };
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst_energy = e;
        }
        per_energy_pass.push(v.pass);
    }
    Ok(VariableEnergyVerdict {
        pass: per_energy_pass.iter().all(|&p| p),
        energies: energies.len(),
        grid_spacing: spacing,
        worst_energy,
        worst_ratio,
        per_energy_pass,
    })
}

/// Uniform energy grid on `[a, b]` with spacing at most `max_spacing`.
pub fn energy_grid(a: f64, b: f64, max_spacing: f64) -> Result<Vec<f64>> {
    if !(b >= a) || !(max_spacing > 0.0) {
        return Err(Error::Grid(format!("bad energy window [{a}, {b}]")));
    }
    let n = ((b - a) / max_spacing).ceil().max(1.0) as usize;
    Ok((0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect())
}

/// Integration range for resolvent-norm integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EnergyRange {
    Interval(f64, f64),
    FullLine,
}

/// How `(H − z)^{−1} ψ` is evaluated inside energy integrals.
#[derive(Debug, Clone, Copy)]
pub enum ResolventEngine<'a> {
    Spectral(&'a SpectralDecomposition),
    Banded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResiduumReport {
    pub epsilon: f64,
    pub range: EnergyRange,
    pub integral: Quadrature,
    /// `π/ε`.
    pub bound: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn weighted_norm_fn<'a>(
    op: &'a LatticeOperator,
    engine: ResolventEngine<'a>,
    psi: &'a [f64],
    weight: Option<Vec<f64>>,
) -> Box<dyn Fn(Complex64) -> f64 + 'a> {
    match engine {
        ResolventEngine::Spectral(dec) => {
            let w = weight.unwrap_or_else(|| vec![1.0; op.dim()]);
            let wr = WeightedResolvent::new(dec, psi, &w);
            Box::new(move |z| wr.eval(z))
        }
        ResolventEngine::Banded => {
            let rhs: Vec<Complex64> = psi.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            Box::new(move |z| {
                let solver = ShiftedSolver::new(op, z).expect("nonreal shift");
                let (x, _) = solver.solve(&rhs);
                match &weight {
                    Some(w) => x.iter().zip(w).map(|(a, wi)| wi * a.norm_sqr()).sum(),
                    None => x.iter().map(|a| a.norm_sqr()).sum(),
                }
            })
        }
    }
}

/// `∫_I ‖(H − E − iε)^{−1} ψ‖² dE` against `π/ε` for normalized `ψ`.
pub fn residuum_check(
    op: &LatticeOperator,
    engine: ResolventEngine<'_>,
    psi: &[f64],
    range: EnergyRange,
    epsilon: f64,
    tolerance: f64,
) -> Result<ResiduumReport> {
    let norm = psi.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Parameter(format!("ψ must be normalized, ‖ψ‖ = {norm}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Parameter("ε must be positive".into()));
    }
    let f = weighted_norm_fn(op, engine, psi, None);
    let g = |e: f64| f(Complex64::new(e, epsilon));
    let integral = match range {
        EnergyRange::Interval(a, b) => trapezoid(g, a, b, epsilon / 4.0)?,
        EnergyRange::FullLine => {
            let (lo, hi) = op.spectral_bounds();
            FullLineRule::for_spectrum(lo, hi, epsilon, 1e-10).integrate(g)?
        }
    };
    let bound = PI / epsilon;
    Ok(ResiduumReport {
        epsilon,
        range,
        bound,
        tolerance,
        pass: integral.value <= bound * (1.0 + tolerance),
        integral,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbelValue {
    pub epsilon: f64,
    /// `∫_ℝ ‖|X| (H − E − iε)^{−1} ψ‖² dE`.
    pub integral: Quadrature,
    /// `ε² ∫`.
    pub value: f64,
    /// `ε ∫`.
    pub value_eps: f64,
}

/// `ε² ∫_ℝ ‖|X| (H − E − iε)^{−1} ψ‖² dE` over the whole real line.
pub fn abel_functional(
    op: &LatticeOperator,
    engine: ResolventEngine<'_>,
    psi: &[f64],
    epsilon: f64,
    rtol: f64,
) -> Result<AbelValue> {
    if !(epsilon > 0.0) {
        return Err(Error::Parameter("ε must be positive".into()));
    }
    let f = weighted_norm_fn(op, engine, psi, Some(second_moment_weights(op)));
    let (lo, hi) = op.spectral_bounds();
    let integral = FullLineRule::for_spectrum(lo, hi, epsilon, rtol)
        .integrate(|e| f(Complex64::new(e, epsilon)))?;
    Ok(AbelValue {
        epsilon,
        value: epsilon * epsilon * integral.value,
        value_eps: epsilon * integral.value,
        integral,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnyCaseReport {
    /// `|G(q′, q; z)|²`.
    pub lhs: f64,
    pub norm_at_target: f64,
    pub norm_at_source: f64,
    pub column_norm_source: f64,
    pub column_norm_target: f64,
    /// `max(n_q, n_q′)² (‖R δ_q‖² + ‖R δ_q′‖²)`.
    pub rhs: f64,
    pub pass: bool,
}

/// `|G(q′,q;z)|² ≤ n² (‖R(z)δ_q‖² + ‖R(z)δ_{q′}‖²)` with `n` the larger of
/// the measured boundary norms of `Λ_L(q)` and `Λ_L(q′)` at the same `z`.
pub fn any_case_check(
    op: &LatticeOperator,
    q: &Site,
    qp: &Site,
    radius: f64,
    energy: f64,
    epsilon: f64,
) -> Result<AnyCaseReport> {
    let bq = LatticeBox::new(*q, radius);
    let bqp = LatticeBox::new(*qp, radius);
    check_separation(&bqp, q)?;
    let z = Complex64::new(energy, epsilon);
    let n_tgt = BoxGreen::new(op, &bqp)?.boundary_norm(z);
    let n_src = BoxGreen::new(op, &bq)?.boundary_norm(z);
    let col_q = resolve(op, q, energy, epsilon)?.values;
    let col_qp = resolve(op, qp, energy, epsilon)?.values;
    let g = col_q[row_of(op, qp)?];
    let nq: f64 = col_q.iter().map(|v| v.norm_sqr()).sum();
    let nqp: f64 = col_qp.iter().map(|v| v.norm_sqr()).sum();
    let lhs = g.norm_sqr();
    let n = n_tgt.max(n_src);
    let rhs = n * n * (nq + nqp);
    Ok(AnyCaseReport {
        lhs,
        norm_at_target: n_tgt,
        norm_at_source: n_src,
        column_norm_source: nq.sqrt(),
        column_norm_target: nqp.sqrt(),
        rhs,
        pass: lhs <= rhs * (1.0 + 1e-10),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{sample_field, DisorderField, DisorderSpec};
    use crate::lattice::LatticeSpec;
    use crate::operator::assemble;

    fn random_chain(n: usize, w: f64, index: u64) -> LatticeOperator {
        let lat = LatticeSpec::chain(n).unwrap();
        let f = sample_field(&DisorderSpec::iid_uniform(w, 21, 100), &lat, index).unwrap();
        assemble(&lat, &f).unwrap()
    }

    #[test]
    fn diagonal_operator_resolvent() {
        let lat = LatticeSpec::chain(5).unwrap();
        let vals = vec![0.5, -1.0, 2.0, 0.0, 3.0];
        let op = assemble(&lat, &DisorderField::from_values(vals.clone())).unwrap();
        let bx = LatticeBox::new([0, 0, 0], 0.0);
        let single = restrict(&op, &bx).unwrap();
        let col = resolve(&single, &[0, 0, 0], 0.3, 0.2).unwrap();
        let expected = 1.0 / (Complex64::new(vals[2], 0.0) - Complex64::new(0.3, 0.2));
        assert!((col.values[0] - expected).norm() < 1e-15);
    }

    #[test]
    fn two_site_resolvent_by_hand() {
        let lat = LatticeSpec::chain(3).unwrap();
        let op = assemble(&lat, &DisorderField::zeros(&lat)).unwrap();
        // [[−z, 1, 0], [1, −z, 1], [0, 1, −z]] with z = i, middle column by cofactors
        let z = Complex64::new(0.0, 1.0);
        let col = resolve(&op, &[0, 0, 0], 0.0, 1.0).unwrap();
        let det = -z * (z * z - 1.0) + z;
        let c11 = z * z;
        let c01 = z;
        assert!((col.values[1] - c11 / det).norm() < 1e-14);
        assert!((col.values[0] - c01 / det).norm() < 1e-14);
    }

    #[test]
    fn gre_holds_on_random_chain_and_fails_without_a_pair() {
        let op = random_chain(65, 2.0, 0);
        let bx = LatticeBox::new([-10, 0, 0], 8.0);
        let rep = gre_identity_residual(&op, &bx, &[12, 0, 0], 0.4, 0.05).unwrap();
        assert!(rep.residual <= 1e-10, "{}", rep.residual);
        let mut pairs = boundary_pairs(&bx, op.lattice()).unwrap();
        pairs.pairs.retain(|(_, up)| up[0] < -10);
        let bad = gre_residual_with_pairs(&op, &bx, &pairs, &[12, 0, 0], 0.4, 0.05).unwrap();
        assert!(bad.residual > 1e-6, "{}", bad.residual);
    }

    #[test]
    fn separation_is_enforced() {
        let op = random_chain(65, 2.0, 0);
        let bx = LatticeBox::new([0, 0, 0], 8.0);
        assert!(gre_identity_residual(&op, &bx, &[16, 0, 0], 0.0, 0.1).is_err());
    }

    #[test]
    fn boundary_norm_matches_direct_solve() {
        let op = random_chain(41, 3.0, 2);
        let bx = LatticeBox::new([3, 0, 0], 5.0);
        let bg = BoxGreen::new(&op, &bx).unwrap();
        let z = Complex64::new(-0.7, 0.01);
        let boxed = restrict(&op, &bx).unwrap();
        let col = resolve(&boxed, &bx.center, z.re, z.im).unwrap().values;
        // exterior sites 9 and −3, adjacent inner sites 8 and −2
        let a = col[boxed.row_of(&[8, 0, 0]).unwrap()];
        let b = col[boxed.row_of(&[-2, 0, 0]).unwrap()];
        let direct = (a.norm_sqr() + b.norm_sqr()).sqrt();
        assert!((bg.boundary_norm(z) - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn free_chain_resolvent_eigenvector_integrals() {
        let lat = LatticeSpec::chain(21).unwrap();
        let op = assemble(&lat, &DisorderField::zeros(&lat)).unwrap();
        let dec = diagonalize(&op).unwrap();
        let k = 7;
        let psi: Vec<f64> = dec.vector(k).iter().copied().collect();
        let eps = 0.1;
        let abel = abel_functional(&op, ResolventEngine::Spectral(&dec), &psi, eps, 1e-11).unwrap();
        let x2: f64 = psi
            .iter()
            .zip(second_moment_weights(&op))
            .map(|(p, w)| p * p * w)
            .sum();
        let exact = PI * eps * x2;
        assert!((abel.value - exact).abs() < 1e-8 * exact, "{} vs {exact}", abel.value);
    }
}
