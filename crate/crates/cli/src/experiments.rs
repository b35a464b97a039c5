//! Experiment drivers behind the subcommands.

use std::f64::consts::PI;

use dynloc::disorder::{DisorderKind, DisorderSpec, TabulatedDensity};
use dynloc::dynamics::{
    cesaro, disorder_average, geometric_grid, second_moment_trace, uniform_time_grid, AveragedTrace,
    InitialState, LeakGuard, Propagation,
};
use dynloc::ensemble::{par_map_indexed, Ensemble};
use dynloc::estimators::{
    abel_trend, dynloc_statistic, fit_exponents, AbelTrend, EngineChoice, wegner_pair, Bootstrap, DynlocStatistic, ExponentFit, WegnerResult,
    Window,
};
use dynloc::green::{
    gre_identity_residual, gre_residual_with_pairs, residuum_check, EnergyRange, EpsilonProbe,
    ResolventEngine,
};
use dynloc::lattice::{boundary_pairs, Cuboid, LatticeBox, LatticeSpec, Site};
use dynloc::msa::{
    deterministic_certificate, estimate_m1_probability, m2_center_offset, m2_verdicts,
    probabilistic_certificate, remark23_bound, schedule, summarize_scale, CertificateParams,
    DeterministicCertificate, ExponentBound, HypothesisReport, M1Estimate, MonteCarlo, MsaParams,
    MsaVariant, ProbabilisticCertificate, RhoSpec, ScaleEstimate, ScaleSchedule,
};
use dynloc::operator::{assemble, diagonalize_with_cap, FilterSpec};
use dynloc::{rng, Error, Result};
use rand::Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{Artifacts, Cell};

pub fn workers(cfg: &RunConfig) -> Result<usize> {
    Ok(cfg.usize("execution", "workers")?.max(1))
}

pub fn seed(cfg: &RunConfig) -> Result<u64> {
    cfg.u64("execution", "seed")
}

pub fn lattice(cfg: &RunConfig) -> Result<LatticeSpec> {
    LatticeSpec::new(cfg.usize("lattice", "dimension")?, cfg.usize("lattice", "extent")?)
}

fn load_density(path: &str) -> Result<TabulatedDensity> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_string(),
        source,
    })?;
    let mut grid = Vec::new();
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty());
        let parse = |t: Option<&str>| -> Result<f64> {
            t.and_then(|s| s.parse().ok()).ok_or_else(|| Error::Config {
                line: i + 1,
                message: format!("density file {path}: expected two numbers"),
            })
        };
        grid.push(parse(it.next())?);
        values.push(parse(it.next())?);
    }
    TabulatedDensity::new(grid, values)
}

/// Disorder law of the `[disorder]` section with `samples` realizations.
pub fn disorder_spec(cfg: &RunConfig, samples: u64) -> Result<DisorderSpec> {
    let kind = DisorderKind::parse(cfg.str("disorder", "kind"))?;
    let density_file = cfg.str("disorder", "density_file");
    let density = if kind == DisorderKind::IidDensity || !density_file.is_empty() {
        if density_file.is_empty() {
            return Err(Error::Disorder("iid-density requires disorder.density_file".into()));
        }
        Some(load_density(density_file)?)
    } else {
        None
    };
    let spec = DisorderSpec {
        kind,
        half_width: if kind == DisorderKind::None {
            0.0
        } else {
            cfg.f64("disorder", "half_width")?
        },
        radius: cfg.u64("disorder", "radius")? as u32,
        density,
        seed: seed(cfg)?,
        samples,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn ensemble(cfg: &RunConfig) -> Result<Ensemble> {
    Ensemble::new(lattice(cfg)?, disorder_spec(cfg, cfg.u64("disorder", "samples")?)?)
}

fn initial_state(cfg: &RunConfig, d: usize) -> Result<InitialState> {
    let site = cfg.site("dynamics", "initial_site", d)?;
    if cfg.bool("dynamics", "filter")? {
        Ok(InitialState::FilteredDelta {
            site,
            filter: FilterSpec::new(
                cfg.f64("dynamics", "filter_lower")?,
                cfg.f64("dynamics", "filter_upper")?,
                cfg.f64("dynamics", "filter_margin")?,
                cfg.f64("dynamics", "filter_ramp")?,
            )?,
        })
    } else {
        Ok(InitialState::Delta(site))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DynamicsOutcome {
    pub average: AveragedTrace,
    pub statistic: Option<DynlocStatistic>,
    pub propagation: String,
}

/// Disorder-averaged second moments and Cesàro means.
pub fn dynamics(cfg: &RunConfig) -> Result<DynamicsOutcome> {
    let ens = ensemble(cfg)?;
    let d = ens.lattice.dimension();
    let init = initial_state(cfg, d)?;
    let cap = cfg.usize("operator", "matrix_cap")?;
    let tol = cfg.f64("dynamics", "chebyshev_tolerance")?;
    let mode = cfg.str("dynamics", "propagation").to_string();
    let spectral = match mode.as_str() {
        "spectral" => true,
        "chebyshev" => false,
        "auto" => ens.lattice.num_sites() <= cap,
        other => {
            return Err(Error::Config {
                line: 0,
                message: format!("unknown propagation '{other}'"),
            })
        }
    };
    let dt = cfg.f64("dynamics", "dt")?;
    let t_max = cfg.f64("dynamics", "t_max")?;
    let times = uniform_time_grid(t_max, dt)?;
    let t_values = geometric_grid(
        cfg.f64("dynamics", "cesaro_t_min")?,
        *times.last().unwrap(),
        cfg.usize("dynamics", "cesaro_per_decade")?,
    )?;
    let margin = cfg.u64("dynamics", "leak_margin")? as i64;
    let guard = (margin > 0).then_some(LeakGuard {
        margin,
        threshold: cfg.f64("dynamics", "leak_threshold")?,
    });
    let label = init.label();
    let traces = par_map_indexed(workers(cfg)?, ens.samples() as usize, |i| {
        let op = ens.operator(i as u64)?;
        let dec = if spectral {
            Some(diagonalize_with_cap(&op, cap)?)
        } else {
            None
        };
        let psi = init.prepare(&op, dec.as_ref(), tol)?;
        let prop = match &dec {
            Some(dd) => Propagation::Spectral(dd),
            None => Propagation::Chebyshev { tolerance: tol },
        };
        let mut trace = second_moment_trace(&op, prop, &psi, &times, &label, guard)?;
        trace.provenance = Some(ens.field(i as u64)?.provenance);
        cesaro(&trace, &t_values)
    })?;
    let average = disorder_average(&traces)?;
    let statistic = if average.cesaro_times.last().copied().unwrap_or(0.0) >= 1e3 {
        Some(dynloc_statistic(&average, cfg.f64("estimators", "stability_threshold")?)?)
    } else {
        None
    };
    Ok(DynamicsOutcome {
        average,
        statistic,
        propagation: if spectral { "spectral" } else { "chebyshev" }.into(),
    })
}

pub fn write_dynamics(cfg: &RunConfig, out: &DynamicsOutcome, art: &mut Artifacts) -> Result<()> {
    let a = &out.average;
    let rows: Vec<Vec<Cell>> = (0..a.times.len())
        .map(|j| vec![a.times[j].into(), a.mean_m[j].into(), a.se_m[j].into()])
        .collect();
    art.csv("dynamics_second_moment.csv", &["t", "mean_m", "se_m"], &rows)?;
    let rows: Vec<Vec<Cell>> = (0..a.cesaro_times.len())
        .map(|j| {
            vec![
                a.cesaro_times[j].into(),
                a.mean_c[j].into(),
                a.se_c[j].into(),
                a.min_c[j].into(),
                a.max_c[j].into(),
            ]
        })
        .collect();
    art.csv("dynamics_cesaro.csv", &["T", "mean_c", "se_c", "min_c", "max_c"], &rows)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        initial_state: &'a str,
        realizations: usize,
        propagation: &'a str,
        mean_sup_c: f64,
        se_sup_c: f64,
        statistic: &'a Option<DynlocStatistic>,
    }
    art.json(
        "dynamics.json",
        &Summary {
            initial_state: &a.initial_state,
            realizations: a.realizations,
            propagation: &out.propagation,
            mean_sup_c: a.mean_sup_c,
            se_sup_c: a.se_sup_c,
            statistic: &out.statistic,
        },
    )?;
    let tol = cfg.f64("estimators", "ballistic_tolerance")?;
    match cfg.str("dynamics", "expect") {
        "none" => {}
        "localized" => {
            let s = out.statistic.as_ref().ok_or_else(|| {
                Error::Grid("the localization verdict needs a T grid reaching 1e3".into())
            })?;
            art.verdict(
                "dynamics.localized.stability",
                s.localized,
                format!("stability ratio {:.6} vs {}", s.stability_ratio, s.ratio_threshold),
            );
            art.verdict(
                "dynamics.localized.slope",
                s.last_decade_slope.abs() <= 0.05,
                format!("last-decade slope {:.6}", s.last_decade_slope),
            );
        }
        "ballistic" => {
            let s = out.statistic.as_ref().ok_or_else(|| {
                Error::Grid("the ballistic verdict needs a T grid reaching 1e3".into())
            })?;
            art.verdict(
                "dynamics.ballistic.slope",
                (s.last_decade_slope - 2.0).abs() <= tol.max(0.05),
                format!("last-decade slope {:.6}", s.last_decade_slope),
            );
        }
        other => {
            return Err(Error::Config {
                line: 0,
                message: format!("dynamics.expect must be none, localized or ballistic, got '{other}'"),
            })
        }
    }
    Ok(())
}

pub fn fit_windows(cfg: &RunConfig, t_min: f64, t_max: f64) -> Result<Vec<Window>> {
    Window::sliding(
        cfg.f64("estimators", "fit_t_min")?.max(t_min),
        t_max,
        cfg.f64("estimators", "window_decades")?,
        cfg.f64("estimators", "window_step")?,
    )
}

pub fn bootstrap(cfg: &RunConfig) -> Result<Bootstrap> {
    Ok(Bootstrap {
        resamples: cfg.usize("estimators", "bootstrap_resamples")?,
        seed: cfg.u64("estimators", "bootstrap_seed")?,
    })
}

pub fn exponents(cfg: &RunConfig, avg: &AveragedTrace) -> Result<ExponentFit> {
    let t_min = avg.cesaro_times.first().copied().unwrap_or(0.0);
    let t_max = avg.cesaro_times.last().copied().unwrap_or(0.0);
    fit_exponents(avg, &fit_windows(cfg, t_min, t_max)?, &bootstrap(cfg)?)
}

pub fn write_exponents(cfg: &RunConfig, fit: &ExponentFit, art: &mut Artifacts) -> Result<()> {
    art.json("exponents.json", fit)?;
    let tol = cfg.f64("estimators", "ballistic_tolerance")?;
    art.verdict(
        "exponents.ballistic_ceiling",
        fit.sigma_plus <= 2.0 + tol,
        format!("sigma_plus {:.6} vs 2 + {tol}", fit.sigma_plus),
    );
    Ok(())
}

/// Abel functional of the filtered initial state on the `abel_epsilons` list.
pub fn abel(cfg: &RunConfig) -> Result<AbelTrend> {
    let n = cfg.u64("estimators", "abel_realizations")?;
    let ens = Ensemble::new(lattice(cfg)?, disorder_spec(cfg, n)?)?;
    let init = initial_state(cfg, ens.lattice.dimension())?;
    abel_trend(
        &ens,
        &init,
        &cfg.f64_list("estimators", "abel_epsilons")?,
        EngineChoice::Auto,
        cfg.f64("estimators", "abel_rtol")?,
        workers(cfg)?,
        n,
        &bootstrap(cfg)?,
    )
}

pub fn write_abel(a: &AbelTrend, art: &mut Artifacts) -> Result<()> {
    let rows: Vec<Vec<Cell>> = (0..a.epsilons.len())
        .map(|j| vec![a.epsilons[j].into(), a.mean[j].into(), a.se[j].into(), a.mean_eps[j].into()])
        .collect();
    art.csv("abel.csv", &["epsilon", "mean", "se", "mean_eps"], &rows)?;
    art.json("abel.json", a)?;
    art.verdict(
        "exponents.abel_vanishing",
        a.vanishing,
        format!("slope {:.4} ± {:.4}, strictly decreasing {}", a.slope, a.slope_se, a.strictly_decreasing),
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct GreRow {
    pub dimension: usize,
    pub instance: usize,
    pub radius: f64,
    pub energy: f64,
    pub epsilon: f64,
    pub residual: f64,
    pub control_residual: f64,
    /// Control residual divided by `|G(q′, q)|`.
    pub control_relative: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResiduumRow {
    pub pair: usize,
    pub epsilon: f64,
    pub lower: f64,
    pub upper: f64,
    pub sub_integral: f64,
    pub full_integral: f64,
    pub bound: f64,
    pub sub_pass: bool,
    pub full_relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GreenOutcome {
    pub gre: Vec<GreRow>,
    pub residuum: Vec<ResiduumRow>,
    pub regularity: Vec<dynloc::green::RegularityVerdict>,
}

fn gre_instances(cfg: &RunConfig, d: usize) -> Result<Vec<GreRow>> {
    let (n, extent, radius) = if d == 1 {
        (
            cfg.usize("green", "gre_instances_1d")?,
            cfg.usize("green", "gre_extent_1d")?,
            cfg.f64("green", "gre_radius_1d")?,
        )
    } else {
        (
            cfg.usize("green", "gre_instances_2d")?,
            cfg.usize("green", "gre_extent_2d")?,
            cfg.f64("green", "gre_radius_2d")?,
        )
    };
    let lat = LatticeSpec::new(d, extent)?;
    let spec = disorder_spec(cfg, n as u64)?;
    let ens = Ensemble::new(lat, spec)?;
    let r = radius.floor() as i64;
    let mut center: Site = [0; 3];
    center[0] = -(r + 2);
    let mut source = center;
    source[0] += (2.0 * radius).floor() as i64 + 1;
    let bx = LatticeBox::new(center, radius);
    let seed = seed(cfg)?;
    let bound = 2.0 * d as f64 + ens.disorder.value_bound();
    par_map_indexed(workers(cfg)?, n, |i| {
        let mut g = rng::stream(seed, &format!("gre-{d}d"), i as u64);
        let energy = g.random_range(-bound..bound);
        let epsilon = 10f64.powf(g.random_range(-3.0..0.0));
        let op = ens.operator(i as u64)?;
        let rep = gre_identity_residual(&op, &bx, &source, energy, epsilon)?;
        // negative control: drop the bond facing the source
        let mut pairs = boundary_pairs(&bx, op.lattice())?;
        let mut facing = center;
        facing[0] += r + 1;
        pairs.pairs.retain(|(_, up)| *up != facing);
        let control = gre_residual_with_pairs(&op, &bx, &pairs, &source, energy, epsilon)?;
        Ok(GreRow {
            dimension: d,
            instance: i,
            radius,
            energy,
            epsilon,
            residual: rep.residual,
            control_residual: control.residual,
            control_relative: control.residual / rep.full.0.hypot(rep.full.1),
            pairs: rep.pairs,
        })
    })
}

fn residuum_rows(cfg: &RunConfig) -> Result<Vec<ResiduumRow>> {
    let n = cfg.usize("green", "residuum_pairs")?;
    let lat = LatticeSpec::chain(cfg.usize("green", "residuum_extent")?)?;
    let ens = Ensemble::new(lat, disorder_spec(cfg, n as u64)?)?;
    let epsilons = cfg.f64_list("green", "residuum_epsilons")?;
    let tol = cfg.f64("green", "residuum_tolerance")?;
    let seed = seed(cfg)?;
    let rows = par_map_indexed(workers(cfg)?, n, |i| {
        let op = ens.operator(i as u64)?;
        let mut g = rng::stream(seed, "residuum", i as u64);
        let mut psi: Vec<f64> = (0..op.dim()).map(|_| g.random_range(-1.0..1.0)).collect();
        let norm = psi.iter().map(|v| v * v).sum::<f64>().sqrt();
        psi.iter_mut().for_each(|v| *v /= norm);
        let (lo, hi) = op.spectral_bounds();
        let mut out = Vec::new();
        for &eps in &epsilons {
            let a = g.random_range(lo..hi);
            let b = g.random_range(a..hi);
            let sub = residuum_check(&op, ResolventEngine::Banded, &psi, EnergyRange::Interval(a, b), eps, tol)?;
            let full = residuum_check(&op, ResolventEngine::Banded, &psi, EnergyRange::FullLine, eps, tol)?;
            out.push(ResiduumRow {
                pair: i,
                epsilon: eps,
                lower: a,
                upper: b,
                sub_integral: sub.integral.value,
                full_integral: full.integral.value,
                bound: PI / eps,
                sub_pass: sub.pass,
                full_relative_error: (full.integral.value - PI / eps).abs() / (PI / eps),
            });
        }
        Ok(out)
    })?;
    Ok(rows.into_iter().flatten().collect())
}

fn regularity_rows(cfg: &RunConfig) -> Result<Vec<dynloc::green::RegularityVerdict>> {
    let n = cfg.u64("green", "regularity_realizations")?;
    let ens = Ensemble::new(lattice(cfg)?, disorder_spec(cfg, n)?)?;
    let radius = cfg.f64("green", "regularity_radius")?;
    let mut q: Site = [0; 3];
    q[0] = m2_center_offset(radius);
    let mc = MonteCarlo {
        realizations: n,
        workers: workers(cfg)?,
        confidence: cfg.f64("msa", "confidence")?,
        probe: probe(cfg)?,
    };
    let rho = RhoSpec::Algebraic {
        m: -2.0 * cfg.f64("green", "regularity_threshold")?.ln() / radius.ln(),
    };
    m2_verdicts(&ens, &rho, radius, cfg.f64("green", "regularity_energy")?, q, &mc)
}

pub fn probe(cfg: &RunConfig) -> Result<EpsilonProbe> {
    Ok(EpsilonProbe {
        epsilon_min: cfg.f64("green", "epsilon_min")?,
        per_decade: cfg.usize("green", "probes_per_decade")?,
    })
}

pub fn green_checks(cfg: &RunConfig) -> Result<GreenOutcome> {
    let mut gre = gre_instances(cfg, 1)?;
    gre.extend(gre_instances(cfg, 2)?);
    Ok(GreenOutcome {
        gre,
        residuum: residuum_rows(cfg)?,
        regularity: regularity_rows(cfg)?,
    })
}

pub fn write_green(cfg: &RunConfig, out: &GreenOutcome, art: &mut Artifacts) -> Result<()> {
    let tol = cfg.f64("green", "gre_tolerance")?;
    let rows: Vec<Vec<Cell>> = out
        .gre
        .iter()
        .map(|r| {
            vec![
                r.dimension.into(),
                r.instance.into(),
                r.radius.into(),
                r.energy.into(),
                r.epsilon.into(),
                r.residual.into(),
                r.control_residual.into(),
                r.control_relative.into(),
                r.pairs.into(),
                (r.residual <= tol).into(),
            ]
        })
        .collect();
    art.csv(
        "green_gre.csv",
        &["d", "instance", "L", "energy", "epsilon", "residual", "control_residual", "control_relative", "pairs", "pass"],
        &rows,
    )?;
    for d in [1usize, 2] {
        let sel: Vec<&GreRow> = out.gre.iter().filter(|r| r.dimension == d).collect();
        if sel.is_empty() {
            continue;
        }
        let worst = sel.iter().map(|r| r.residual).fold(0.0, f64::max);
        art.verdict(
            &format!("green.gre.d{d}"),
            worst <= tol,
            format!("max residual {worst:.3e} over {} instances", sel.len()),
        );
        let weakest = sel.iter().map(|r| r.control_relative).fold(f64::INFINITY, f64::min);
        art.verdict(
            &format!("green.gre_control.d{d}"),
            weakest > 1e-2,
            format!("min relative residual without the facing bond {weakest:.3e}"),
        );
    }

    let rows: Vec<Vec<Cell>> = out
        .residuum
        .iter()
        .map(|r| {
            vec![
                r.pair.into(),
                r.epsilon.into(),
                r.lower.into(),
                r.upper.into(),
                r.sub_integral.into(),
                r.full_integral.into(),
                r.bound.into(),
                r.sub_pass.into(),
                r.full_relative_error.into(),
            ]
        })
        .collect();
    art.csv(
        "green_residuum.csv",
        &[
            "pair",
            "epsilon",
            "lower",
            "upper",
            "sub_integral",
            "full_integral",
            "bound",
            "sub_pass",
            "full_relative_error",
        ],
        &rows,
    )?;
    if !out.residuum.is_empty() {
        art.verdict(
            "green.residuum.subinterval",
            out.residuum.iter().all(|r| r.sub_pass),
            format!("{} sub-interval integrals against π/ε", out.residuum.len()),
        );
        let worst = out.residuum.iter().map(|r| r.full_relative_error).fold(0.0, f64::max);
        art.verdict(
            "green.residuum.full_line",
            worst <= 0.01,
            format!("max relative deviation from π/ε {worst:.3e}"),
        );
    }
    let rows: Vec<Vec<Cell>> = out
        .regularity
        .iter()
        .enumerate()
        .map(|(i, v)| regularity_row(i, &format!("{}", v.energy), v))
        .collect();
    art.csv("green_regularity.csv", &REGULARITY_HEADER, &rows)?;
    Ok(())
}

const REGULARITY_HEADER: [&str; 8] = [
    "realization",
    "E_or_window",
    "L",
    "q",
    "measured_norm",
    "threshold",
    "guard_distance",
    "pass",
];

fn site_label(q: &Site) -> String {
    format!("{} {} {}", q[0], q[1], q[2])
}

fn regularity_row(i: usize, e: &str, v: &dynloc::green::RegularityVerdict) -> Vec<Cell> {
    vec![
        i.into(),
        e.into(),
        v.radius.into(),
        site_label(&v.center).into(),
        v.measured_norm.into(),
        v.threshold.into(),
        v.guard_distance.into(),
        v.pass.into(),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct MsaOutcome {
    pub variant: MsaVariant,
    pub schedule: ScaleSchedule,
    pub params: MsaParams,
    pub hypotheses: HypothesisReport,
    pub per_scale: Vec<ScaleEstimate>,
    pub m1: Vec<M1Estimate>,
    pub infeasible_scales: Vec<f64>,
    /// `1 − p̂` per tested scale, strictly decreasing.
    pub failure_rate_decreasing: bool,
    #[serde(skip)]
    pub regularity: Vec<(f64, Vec<dynloc::green::RegularityVerdict>)>,
}

pub fn msa_params(cfg: &RunConfig) -> Result<MsaParams> {
    let variant = match cfg.str("msa", "variant") {
        "m1" => MsaVariant::M1,
        "m2" => MsaVariant::M2,
        other => {
            return Err(Error::Config {
                line: 0,
                message: format!("msa.variant must be m1 or m2, got '{other}'"),
            })
        }
    };
    let rho = match cfg.str("msa", "rho") {
        "exponential" => RhoSpec::Exponential {
            nu: cfg.f64("msa", "nu")?,
        },
        "algebraic" => RhoSpec::Algebraic {
            m: cfg.f64("msa", "m")?,
        },
        "algebraic-m1" => RhoSpec::AlgebraicM1 {
            n: cfg.f64("msa", "n")?,
            c_n: cfg.f64("msa", "c_n")?,
        },
        other => {
            return Err(Error::Config {
                line: 0,
                message: format!("unknown msa.rho '{other}'"),
            })
        }
    };
    Ok(MsaParams {
        variant,
        rho,
        p: cfg.f64("msa", "p")?,
        d: cfg.usize("lattice", "dimension")?,
        interval: (cfg.f64("msa", "interval_lower")?, cfg.f64("msa", "interval_upper")?),
        beta: cfg.f64("msa", "beta")?,
    })
}

pub fn msa(cfg: &RunConfig) -> Result<MsaOutcome> {
    let params = msa_params(cfg)?;
    let alpha = cfg.f64("msa", "alpha")?;
    let listed = cfg.f64_list("msa", "scales")?;
    let sched = if listed.is_empty() {
        schedule(cfg.f64("msa", "l0")?, alpha, cfg.usize("msa", "depth")?)?
    } else {
        ScaleSchedule {
            l0: listed[0],
            alpha,
            scales: listed,
        }
    };
    let n = cfg.u64("msa", "realizations")?;
    let ens = Ensemble::new(lattice(cfg)?, disorder_spec(cfg, n)?)?;
    let mc = MonteCarlo {
        realizations: n,
        workers: workers(cfg)?,
        confidence: cfg.f64("msa", "confidence")?,
        probe: probe(cfg)?,
    };
    let half = ens.lattice.half_extent();
    let mut per_scale = Vec::new();
    let mut m1 = Vec::new();
    let mut infeasible = Vec::new();
    let mut regularity = Vec::new();
    let energy = cfg.f64("msa", "energy")?;
    for &l in &sched.scales {
        let r = l.ceil() as i64;
        match params.variant {
            MsaVariant::M2 => {
                let off = m2_center_offset(l);
                if off + r + 1 > half {
                    infeasible.push(l);
                    continue;
                }
                let mut q: Site = [0; 3];
                q[0] = off;
                let v = m2_verdicts(&ens, &params.rho, l, energy, q, &mc)?;
                per_scale.push(summarize_scale(&v, l, params.p, mc.confidence)?);
                regularity.push((l, v));
            }
            MsaVariant::M1 => {
                let c = l.floor() as i64 + 1;
                if c + r + 1 > half {
                    infeasible.push(l);
                    continue;
                }
                let mut q: Site = [0; 3];
                q[0] = c;
                let mut qp: Site = [0; 3];
                qp[0] = -c;
                let (a, b) = params.interval;
                let grid = dynloc::green::energy_grid(a, b, mc.probe.epsilon_min / 4.0)?;
                let est = estimate_m1_probability(&ens, &params, l, &grid, q, qp, &mc)?;
                per_scale.push(est.uniform_choice.clone());
                m1.push(est);
            }
        }
    }
    let failure_rate_decreasing = per_scale.len() >= 2
        && per_scale
            .windows(2)
            .all(|w| 1.0 - w[1].pass_fraction < 1.0 - w[0].pass_fraction);
    Ok(MsaOutcome {
        variant: params.variant,
        hypotheses: params.hypotheses(alpha),
        schedule: sched,
        params,
        per_scale,
        m1,
        infeasible_scales: infeasible,
        failure_rate_decreasing,
        regularity,
    })
}

pub fn write_msa(out: &MsaOutcome, art: &mut Artifacts) -> Result<()> {
    art.json("msa.json", out)?;
    let rows: Vec<Vec<Cell>> = out
        .per_scale
        .iter()
        .map(|s| {
            vec![
                s.scale.into(),
                s.radius.into(),
                s.samples.into(),
                s.passes.into(),
                s.pass_fraction.into(),
                s.ci_low.into(),
                s.ci_high.into(),
                s.bound.into(),
                s.verdict.into(),
            ]
        })
        .collect();
    art.csv(
        "msa_scales.csv",
        &["L", "radius", "samples", "passes", "pass_fraction", "ci_low", "ci_high", "bound", "verdict"],
        &rows,
    )?;
    let mut rows = Vec::new();
    for (_, vs) in &out.regularity {
        for (i, v) in vs.iter().enumerate() {
            rows.push(regularity_row(i, &format!("{}", v.energy), v));
        }
    }
    if !rows.is_empty() {
        art.csv("msa_regularity.csv", &REGULARITY_HEADER, &rows)?;
    }
    for s in &out.per_scale {
        art.verdict(
            &format!("msa.scale.L{}", s.scale),
            s.verdict,
            format!(
                "Clopper-Pearson lower end {:.6} vs 1 - L^-p = {:.6} ({} / {})",
                s.ci_low, s.bound, s.passes, s.samples
            ),
        );
    }
    if out.per_scale.len() >= 2 {
        art.verdict(
            "msa.failure_rate_decreasing",
            out.failure_rate_decreasing,
            format!(
                "failure rates {:?}",
                out.per_scale
                    .iter()
                    .map(|s| format!("{:.4}", 1.0 - s.pass_fraction))
                    .collect::<Vec<_>>()
            ),
        );
    }
    Ok(())
}

pub fn wegner(cfg: &RunConfig) -> Result<WegnerResult> {
    let d = cfg.usize("lattice", "dimension")?;
    let s = cfg.usize("estimators", "wegner_box_sites")? as i64;
    let gap = cfg.usize("estimators", "wegner_separation")? as i64;
    if s < 1 {
        return Err(Error::Geometry("wegner_box_sites must be positive".into()));
    }
    let half = s + (gap + 1) / 2 + 1;
    let lat = LatticeSpec::new(d, (2 * half + 1) as usize)?;
    let mut lo: Site = [0; 3];
    let mut hi: Site = [0; 3];
    for j in 0..d {
        lo[j] = -(s / 2);
        hi[j] = lo[j] + s - 1;
    }
    lo[0] = -half;
    hi[0] = -half + s - 1;
    let b1 = Cuboid::new(lo, hi)?;
    let mut lo2 = lo;
    let mut hi2 = hi;
    lo2[0] += s + gap;
    hi2[0] += s + gap;
    let b2 = Cuboid::new(lo2, hi2)?;
    let n = cfg.u64("estimators", "wegner_realizations")?;
    let ens = Ensemble::new(lat, disorder_spec(cfg, n)?)?;
    wegner_pair(
        &ens,
        cfg.f64("estimators", "wegner_energy")?,
        &cfg.f64_list("estimators", "wegner_etas")?,
        &b1,
        &b2,
        gap,
        n,
        workers(cfg)?,
    )
}

pub fn write_wegner(cfg: &RunConfig, w: &WegnerResult, art: &mut Artifacts) -> Result<()> {
    let rows: Vec<Vec<Cell>> = (0..w.etas.len())
        .map(|j| {
            vec![
                w.etas[j].into(),
                w.estimates[j].into(),
                w.se[j].into(),
                w.bound_ratio[j].into(),
            ]
        })
        .collect();
    art.csv("wegner.csv", &["eta", "estimate", "se", "bound_ratio"], &rows)?;
    art.json("wegner.json", w)?;
    let tol = cfg.f64("estimators", "wegner_power_tolerance")?;
    let spread = cfg.f64("estimators", "wegner_max_spread")?;
    art.verdict(
        "wegner.power",
        (w.fitted_power - 2.0).abs() <= tol,
        format!("fitted power {:.4} ± {:.4}", w.fitted_power, w.fitted_power_se),
    );
    art.verdict(
        "wegner.bound_ratio",
        w.ratio_spread <= spread,
        format!("max/min bound ratio {:.4}", w.ratio_spread),
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct CertifyOutcome {
    pub deterministic: DeterministicCertificate,
    pub probabilistic: ProbabilisticCertificate,
    pub remark23: ExponentBound,
    pub remark23_inputs: (f64, usize, f64),
}

pub fn certificate_params(cfg: &RunConfig) -> Result<CertificateParams> {
    Ok(CertificateParams {
        alpha: cfg.f64("certificate", "alpha")?,
        m: cfg.f64("certificate", "m")?,
        w: cfg.f64("certificate", "w")?,
        s: cfg.u64("certificate", "s")? as u32,
        n: cfg.u64("certificate", "n")? as u32,
        d: cfg.usize("certificate", "d")?,
        k0: cfg.u64("certificate", "k0")? as u32,
        theta: cfg.f64("certificate", "theta")?,
        p: cfg.f64("certificate", "p")?,
        c_w: cfg.f64("certificate", "c_w")?,
        interval_len: cfg.f64("certificate", "interval_len")?,
        c_nsd: cfg.f64("certificate", "c_nsd")?,
        c_dn: cfg.f64("certificate", "c_dn")?,
        c_check: cfg.f64("certificate", "c_check")?,
    })
}

pub fn certify(cfg: &RunConfig) -> Result<CertifyOutcome> {
    let p = certificate_params(cfg)?;
    let n = cfg.f64("certificate", "remark_n")?;
    Ok(CertifyOutcome {
        deterministic: deterministic_certificate(&p, cfg.f64("certificate", "ell")?)?,
        probabilistic: probabilistic_certificate(&p, cfg.f64("certificate", "l0")?)?,
        remark23: remark23_bound(p.alpha, p.d, n),
        remark23_inputs: (p.alpha, p.d, n),
    })
}

pub fn write_certify(out: &CertifyOutcome, art: &mut Artifacts) -> Result<()> {
    art.json("certificate.json", out)?;
    let det = &out.deterministic;
    art.verdict(
        "certify.condition",
        det.condition,
        format!("(S-α)m = {} vs α(S+1)w + S(d-1)(α-1) = {}", det.condition_lhs, det.condition_rhs),
    );
    art.verdict(
        "certify.chain",
        det.chain_holds,
        format!(
            "ln chain {:.6} vs ln L^-m {:.6} at ℓ = {}, smallest ℓ {:?}",
            det.log_chain, det.log_target, det.ell, det.smallest_ell
        ),
    );
    let pr = &out.probabilistic;
    art.verdict(
        "certify.probabilistic",
        pr.pass,
        format!(
            "Wegner term {:.6e} + frame term {:.6e} vs L1^-p = {:.6e}",
            pr.wegner_term,
            pr.frame_term,
            1.0 - pr.target
        ),
    );
    art.verdict(
        "certify.remark23",
        out.remark23.hypothesis,
        format!("bound {:?}", out.remark23.bound),
    );
    Ok(())
}

/// Checks the geometry the dynamics run would use without running it.
pub fn validate(cfg: &RunConfig) -> Result<()> {
    let ens = ensemble(cfg)?;
    let op = assemble(&ens.lattice, &ens.field(0)?)?;
    let _ = initial_state(cfg, ens.lattice.dimension())?.prepare(&op, None, 1e-8)?;
    Ok(())
}
