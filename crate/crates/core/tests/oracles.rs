use std::f64::consts::PI;

use dynloc::disorder::DisorderSpec;
use dynloc::dynamics::{ballistic_bound_check, evolve, uniform_time_grid};
use dynloc::ensemble::Ensemble;
use dynloc::green::{abel_functional, BoxGreen, EpsilonProbe, GreenQuery, ResolventEngine};
use dynloc::lattice::{LatticeBox, LatticeSpec};
use dynloc::msa::{estimate_m2_probability, remark23_bound, MonteCarlo, MsaParams, MsaVariant, RhoSpec};
use dynloc::operator::diagonalize;
use num_complex::Complex64;

fn free_chain(n: usize) -> dynloc::operator::LatticeOperator {
    Ensemble::new(LatticeSpec::chain(n).unwrap(), DisorderSpec::none(1))
        .unwrap()
        .operator(0)
        .unwrap()
}

/// Path-graph resolvent on sites `0..n` from the sine basis.
fn path_green(n: usize, x: usize, y: usize, z: Complex64) -> Complex64 {
    let h = PI / (n + 1) as f64;
    (1..=n)
        .map(|k| {
            let phi = |j: usize| (2.0 / (n + 1) as f64).sqrt() * ((j + 1) as f64 * k as f64 * h).sin();
            Complex64::new(phi(x) * phi(y), 0.0) / (2.0 * (k as f64 * h).cos() - z)
        })
        .sum()
}

/// `J_0..J_{n_max}` at `x` by backward recurrence normalized with
/// `J_0 + 2 Σ J_{2k} = 1`.
fn bessel_j(n_max: usize, x: f64) -> Vec<f64> {
    let start = n_max + 40 + x as usize * 2;
    let mut j = vec![0.0; start + 2];
    j[start] = 1e-300;
    for k in (1..=start).rev() {
        j[k - 1] = 2.0 * k as f64 / x * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            for v in j.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    j.truncate(n_max + 1);
    j.iter().map(|v| v / norm).collect()
}

#[test]
fn chain_green_matches_sine_basis() {
    let n = 41;
    let op = free_chain(n);
    for &(e, eps) in &[(0.3, 0.1), (-1.9, 1e-3), (2.5, 0.5), (0.0, 1.0)] {
        for &(a, b) in &[(0i64, 0i64), (-5, 7), (20, -20), (3, 4)] {
            let g = GreenQuery {
                energy: e,
                epsilon: eps,
                source: [a, 0, 0],
                target: [b, 0, 0],
                restriction: None,
            }
            .evaluate(&op)
            .unwrap();
            let oracle = path_green(n, (b + 20) as usize, (a + 20) as usize, Complex64::new(e, eps));
            assert!((g - oracle).norm() <= 1e-10 * (1.0 + oracle.norm()), "{g} vs {oracle}");
        }
    }
}

#[test]
fn free_propagation_is_bessel() {
    let op = free_chain(201);
    let dec = diagonalize(&op).unwrap();
    let mut psi = vec![Complex64::new(0.0, 0.0); 201];
    psi[op.row_of(&[0; 3]).unwrap()] = Complex64::new(1.0, 0.0);
    for t in [0.5, 3.0, 10.0, 25.0] {
        let out = evolve(&dec, &psi, t);
        let j = bessel_j(90, 2.0 * t);
        for (n, jn) in j.iter().enumerate().take(80) {
            for s in [n as i64, -(n as i64)] {
                let p = out[op.row_of(&[s, 0, 0]).unwrap()].norm_sqr();
                assert!((p - jn * jn).abs() <= 1e-12, "t = {t}, n = {s}: {p} vs {}", jn * jn);
            }
        }
    }
}

#[test]
fn free_chain_abel_value_diverges_like_inverse_epsilon() {
    let op = free_chain(2001);
    let dec = diagonalize(&op).unwrap();
    let mut psi = vec![0.0; 2001];
    psi[op.row_of(&[0; 3]).unwrap()] = 1.0;
    for eps in [0.1, 0.05] {
        let v = abel_functional(&op, ResolventEngine::Spectral(&dec), &psi, eps, 1e-8).unwrap();
        // ε² ∫ ‖X R ψ‖² dE = 2π ε² ∫₀^∞ 2t² e^{−2εt} dt = π/ε
        let oracle = PI / eps;
        assert!((v.value - oracle).abs() <= 0.1 * oracle, "ε = {eps}: {} vs {oracle}", v.value);
    }
}

#[test]
fn free_box_boundary_norm_matches_path_graph() {
    let op = free_chain(61);
    let r = 6usize;
    let bx = LatticeBox::new([10, 0, 0], r as f64);
    let bg = BoxGreen::new(&op, &bx).unwrap();
    let n = 2 * r + 1;
    for &(e, eps) in &[(0.0, 0.3), (2.6, 1e-4), (-1.0, 0.02)] {
        let z = Complex64::new(e, eps);
        let left = path_green(n, r, 0, z);
        let right = path_green(n, r, n - 1, z);
        let oracle = (left.norm_sqr() + right.norm_sqr()).sqrt();
        let got = bg.boundary_norm(z);
        assert!((got - oracle).abs() <= 1e-10 * oracle, "{got} vs {oracle}");
    }
}

#[test]
fn free_chain_mid_band_is_never_regular() {
    let ens = Ensemble::new(LatticeSpec::chain(121).unwrap(), DisorderSpec::none(5)).unwrap();
    let params = MsaParams {
        variant: MsaVariant::M2,
        rho: RhoSpec::Algebraic { m: 4.0 },
        p: 2.0,
        d: 1,
        interval: (-0.1, 0.1),
        beta: 0.0,
    };
    let mc = MonteCarlo {
        realizations: 5,
        workers: 1,
        confidence: 0.95,
        probe: EpsilonProbe::default(),
    };
    for l in [8.0, 16.0] {
        let est = estimate_m2_probability(&ens, &params, l, 0.0, [2 * l as i64 + 1, 0, 0], &mc).unwrap();
        assert_eq!(est.passes, 0, "L = {l}");
    }
}

#[test]
fn free_chain_ballistic_slack_is_positive() {
    let op = free_chain(401);
    let dec = diagonalize(&op).unwrap();
    let mut psi = vec![0.0; 401];
    psi[op.row_of(&[0; 3]).unwrap()] = 1.0;
    let times = uniform_time_grid(50.0, 0.5).unwrap();
    let rep = ballistic_bound_check(&op, &dec, &psi, &times, Some(2.0)).unwrap();
    assert!(rep.pass);
    let axis = &rep.axes[0];
    for (j, &t) in times.iter().enumerate().skip(1) {
        // ‖X ψ_t‖ = √2 t against 2t
        assert!((axis.lhs[j] - 2f64.sqrt() * t).abs() <= 1e-8 * t);
        assert!(axis.rhs[j] - axis.lhs[j] > 0.5 * t);
    }
}

#[test]
fn remark_bound_approaches_one_from_below() {
    let b = remark23_bound(1.5, 1, 4.5 + 1e-6).bound.unwrap();
    assert!(b < 1.0 && b > 1.0 - 1e-5, "{b}");
    assert_eq!(remark23_bound(1.5, 1, 9.0).bound, Some(0.5));
}
