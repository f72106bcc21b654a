//! Named verification suites over seeded band-limited random data.
//!
//! Every residual is a deterministic function of (suite, seed, samples,
//! tolerance table): per-case RNG streams are derived from the seed, the
//! property name, and the case index, and all reductions are ordered, so a
//! report is byte-reproducible. ISODRAST_THREADS caps the worker pool.

use crate::ambient::{poly_dictionary, AmbientSpace, HamiltonianFn};
use crate::band;
use crate::error::{Error, Result};
use crate::fd;
use crate::flows::{self, FlowField};
use crate::loops::{self, LoopEmbedding, TangentVector, Weighting};
use crate::metrics::{self, MetricField, MetricFunctional, MetricTangent, MomentumField};
use crate::moment_map;
use crate::pairings;
use crate::poisson::{self, IntegralFunctional};
use crate::report::{PropertyResult, SuiteReport};
use crate::spectral;
use crate::tol;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub seed: u64,
    pub samples: usize,
    pub fd_step: f64,
    pub overrides: BTreeMap<String, f64>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 42,
            samples: 128,
            fd_step: tol::FD_STEP,
            overrides: BTreeMap::new(),
        }
    }
}

const DEFAULT_GATES: &[(&str, f64)] = &[
    ("exactness_gate", tol::EXACTNESS_GATE),
    ("antisymmetry", tol::ANTISYMMETRY),
    ("bilinearity", tol::BILINEARITY),
    ("basicness", tol::BASICNESS),
    ("fd_form_residual", tol::FD_FORM_RESIDUAL),
    ("reduction_equivalence", tol::REDUCTION_EQUIVALENCE),
    ("moser_roundtrip", tol::MOSER_ROUNDTRIP),
    ("action_drift", tol::ACTION_DRIFT),
    ("action_circle", tol::ACTION_CIRCLE),
    ("harmonic_return", 1e-6),
    ("order_window", 4.0),
    ("moment_condition", tol::MOMENT_CONDITION),
    ("equivariance", tol::EQUIVARIANCE),
    ("equivariance_matched", 1e-8),
    ("kks_match", tol::KKS_MATCH),
    ("leibniz", tol::LEIBNIZ),
    ("jacobi_fd", tol::JACOBI_FD),
    ("leaf_tangency", tol::LEAF_TANGENCY),
    ("coord_bracket", tol::COORD_BRACKET),
    ("parseval", tol::PARSEVAL),
    ("metric_fd", tol::METRIC_FD),
    ("trace_index", tol::TRACE_INDEX),
    ("positivity_margin", 0.0),
];

struct Gates(BTreeMap<String, f64>);

impl Gates {
    fn resolve(overrides: &BTreeMap<String, f64>) -> Result<Gates> {
        let mut map: BTreeMap<String, f64> = DEFAULT_GATES
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        for (name, value) in overrides {
            if !map.contains_key(name) {
                return Err(Error::Config(format!("unknown tolerance name '{name}'")));
            }
            map.insert(name.clone(), *value);
        }
        Ok(Gates(map))
    }

    fn get(&self, name: &str) -> f64 {
        self.0[name]
    }
}

pub const SUITE_NAMES: &[&str] = &["pairings", "flows", "moment", "poisson", "metrics"];

/// Run one named suite (or `all`). Configuration problems surface as
/// errors; mathematical gate failures surface as failing properties in the
/// returned report.
pub fn run_suite(name: &str, cfg: &SuiteConfig) -> Result<SuiteReport> {
    let gates = Gates::resolve(&cfg.overrides)?;
    // validate the sampling rate through the loop constructor so the caller
    // sees the real invariant, not a suite-specific message
    checked_circle(1, cfg.samples)?;
    let pool = build_pool()?;
    let properties = pool.install(|| -> Result<Vec<PropertyResult>> {
        match name {
            "pairings" => pairings_suite(cfg, &gates),
            "flows" => flows_suite(cfg, &gates),
            "moment" => moment_suite(cfg, &gates),
            "poisson" => poisson_suite(cfg, &gates),
            "metrics" => metrics_suite(cfg, &gates),
            "all" => {
                let mut all = Vec::new();
                all.extend(pairings_suite(cfg, &gates)?);
                all.extend(flows_suite(cfg, &gates)?);
                all.extend(moment_suite(cfg, &gates)?);
                all.extend(poisson_suite(cfg, &gates)?);
                all.extend(metrics_suite(cfg, &gates)?);
                Ok(all)
            }
            other => Err(Error::UnknownSuite(other.to_string())),
        }
    })?;
    Ok(SuiteReport::new(
        name,
        cfg.seed,
        cfg.samples,
        gates.0.clone(),
        properties,
    ))
}

fn build_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("ISODRAST_THREADS") {
        let k: usize = raw
            .parse()
            .map_err(|_| Error::Config(format!("ISODRAST_THREADS='{raw}' is not a number")))?;
        if k == 0 {
            return Err(Error::Config("ISODRAST_THREADS must be positive".into()));
        }
        builder = builder.num_threads(k);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

fn checked_circle(half_dim: usize, n: usize) -> Result<LoopEmbedding> {
    let samples = spectral::grid(n)
        .into_iter()
        .map(|t| {
            let mut x = vec![0.0; 2 * half_dim];
            x[0] = t.cos();
            x[half_dim] = t.sin();
            x
        })
        .collect();
    LoopEmbedding::from_samples(AmbientSpace::new(half_dim), samples)
}

fn case_rng(seed: u64, property: &str, case: u64) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in property.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x100000001b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h ^ case.wrapping_mul(0x9E3779B97F4A7C15))
}

fn mode_budget(n: usize) -> usize {
    ((n - 2) / 10).clamp(1, 6)
}

/// Worst residual over seeded cases, evaluated in parallel, ordered fold.
fn max_over_cases(
    cfg: &SuiteConfig,
    property: &str,
    cases: u64,
    f: impl Fn(&mut ChaCha8Rng) -> f64 + Sync,
) -> f64 {
    (0..cases)
        .into_par_iter()
        .map(|c| {
            let mut rng = case_rng(cfg.seed, property, c);
            f(&mut rng)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max)
}

fn combine(a: f64, t1: &TangentVector, b: f64, t2: &TangentVector) -> TangentVector {
    let x =
        t1.x.iter()
            .zip(&t2.x)
            .map(|(u, v)| u.iter().zip(v).map(|(p, q)| a * p + b * q).collect())
            .collect();
    let vartheta = t1
        .vartheta
        .iter()
        .zip(&t2.vartheta)
        .map(|(p, q)| a * p + b * q)
        .collect();
    TangentVector { x, vartheta }
}

// degree-4 flows escape in finite time from large seeds (H = q^3 p gives
// dq/dt = q^3); max|x| <= 1/2 keeps every dictionary flow alive past T = 1
fn confined(lp: &LoopEmbedding, radius: f64) -> LoopEmbedding {
    let peak = lp
        .samples()
        .iter()
        .flatten()
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    let samples = lp
        .samples()
        .iter()
        .map(|row| row.iter().map(|v| v * radius / peak).collect())
        .collect();
    LoopEmbedding::from_samples(lp.ambient, samples).expect("scaling preserves immersion")
}

fn random_setup(
    rng: &mut ChaCha8Rng,
    n: usize,
) -> (LoopEmbedding, Weighting, TangentVector, TangentVector) {
    let modes = mode_budget(n);
    let lp = band::random_loop(rng, AmbientSpace::new(1), n, modes);
    let w = band::random_positive_weighting(rng, n, modes);
    let dict = poly_dictionary(1);
    let xi1 = band::exact_tangent(rng, &lp, &dict, 2, modes).tangent;
    let xi2 = band::exact_tangent(rng, &lp, &dict, 2, modes).tangent;
    (lp, w, xi1, xi2)
}

fn pairings_suite(cfg: &SuiteConfig, gates: &Gates) -> Result<Vec<PropertyResult>> {
    let n = cfg.samples;
    let mut props = Vec::new();

    let r = max_over_cases(cfg, "weighted_antisymmetry", 12, |rng| {
        let (lp, w, xi1, xi2) = random_setup(rng, n);
        (pairings::omega_weighted_raw(&lp, &w, &xi1, &xi2)
            + pairings::omega_weighted_raw(&lp, &w, &xi2, &xi1))
        .abs()
    });
    props.push(PropertyResult::new(
        "weighted_antisymmetry",
        r,
        gates.get("antisymmetry"),
    ));

    let r = max_over_cases(cfg, "weighted_bilinearity", 12, |rng| {
        let (lp, w, xi1, xi2) = random_setup(rng, n);
        let dict = poly_dictionary(1);
        let xi3 = band::exact_tangent(rng, &lp, &dict, 2, mode_budget(n)).tangent;
        let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let lhs = pairings::omega_weighted_raw(&lp, &w, &combine(a, &xi1, b, &xi2), &xi3);
        let rhs = a * pairings::omega_weighted_raw(&lp, &w, &xi1, &xi3)
            + b * pairings::omega_weighted_raw(&lp, &w, &xi2, &xi3);
        (lhs - rhs).abs()
    });
    props.push(PropertyResult::new(
        "weighted_bilinearity",
        r,
        gates.get("bilinearity"),
    ));

    let r = max_over_cases(cfg, "weighted_basicness", 12, |rng| {
        let (lp, w, xi1, xi2) = random_setup(rng, n);
        let y = band::band_series(rng, n, mode_budget(n), 0.8);
        let shifted = pairings::basicness_shift(&lp, &w, &xi1, &y);
        let with = pairings::omega_weighted_raw(&lp, &w, &shifted, &xi2);
        let without = pairings::omega_weighted_raw(&lp, &w, &xi1, &xi2);
        (with - without).abs()
    });
    props.push(PropertyResult::new(
        "weighted_basicness",
        r,
        gates.get("basicness"),
    ));

    let step = cfg.fd_step;
    let r = max_over_cases(cfg, "chart_closedness", 8, |rng| {
        let (lp, w, _, _) = random_setup(rng, n);
        let m = mode_budget(n);
        let data: Vec<(Vec<f64>, Vec<f64>)> = (0..3)
            .map(|_| {
                (
                    band::band_series(rng, n, m, 0.7),
                    band::random_variation(rng, n, m),
                )
            })
            .collect();
        pairings::fd_chart_closedness(
            &lp,
            &w,
            [
                (&data[0].0, &data[0].1),
                (&data[1].0, &data[1].1),
                (&data[2].0, &data[2].1),
            ],
            step,
        )
        .abs()
    });
    props.push(PropertyResult::new(
        "chart_closedness",
        r,
        gates.get("fd_form_residual"),
    ));

    let r = max_over_cases(cfg, "donaldson_closedness", 8, |rng| {
        let (lp, w, _, _) = random_setup(rng, n);
        let m = mode_budget(n);
        let dirs: Vec<TangentVector> = (0..3)
            .map(|_| TangentVector::zero_weight(band::random_field(rng, 2, n, m)))
            .collect();
        fd::fd_exterior_derivative_2form(
            |l, ww, a, b| pairings::omega_donaldson(l, &a.x, &b.x, ww),
            &lp,
            &w,
            [&dirs[0], &dirs[1], &dirs[2]],
            step,
        )
        .abs()
    });
    props.push(PropertyResult::new(
        "donaldson_closedness",
        r,
        gates.get("fd_form_residual"),
    ));

    let r = max_over_cases(cfg, "reduction_circle_split", 12, |rng| {
        let (lp, _, xi1, xi2) = random_setup(rng, n);
        let via_reduced = pairings::omega_reduced(&lp, &Weighting::uniform(n), &xi1.x, &xi2.x)
            .expect("exact representatives")
            .value;
        let via_split = pairings::omega_reduced_circle(&lp, &xi1.x, &xi2.x).expect("planar loop");
        (via_reduced - via_split).abs()
    });
    props.push(PropertyResult::new(
        "reduction_circle_split",
        r,
        gates.get("exactness_gate"),
    ));

    let r = max_over_cases(cfg, "fourier_equivalence", 12, |rng| {
        let m = mode_budget(n);
        let h1 = band::band_series(rng, n, m, 1.0);
        let h2 = band::band_series(rng, n, m, 1.0);
        let t1 = band::random_variation(rng, n, m);
        let t2 = band::random_variation(rng, n, m);
        (pairings::omega_local(&h1, &t1, &h2, &t2) - pairings::omega_fourier(&h1, &t1, &h2, &t2))
            .abs()
    });
    props.push(PropertyResult::new(
        "fourier_equivalence",
        r,
        gates.get("parseval"),
    ));

    let worst_margin = max_over_cases(cfg, "donaldson_nondegeneracy", 12, |rng| {
        let (lp, w, _, _) = random_setup(rng, n);
        let x1 = band::random_field(rng, 2, n, mode_budget(n));
        let jx1: Vec<Vec<f64>> = x1.iter().map(|v| lp.ambient.j_apply(v)).collect();
        let value = pairings::omega_donaldson(&lp, &x1, &jx1, &w);
        (-value).max(0.0)
    });
    props.push(PropertyResult::new(
        "donaldson_nondegeneracy",
        worst_margin,
        gates.get("positivity_margin"),
    ));

    let r = max_over_cases(cfg, "moser_roundtrip", 8, |rng| {
        let m = mode_budget(n);
        let lp = band::random_loop(rng, AmbientSpace::new(1), n, m);
        let w = band::random_positive_weighting(rng, n, m);
        let (_, _, a) = loops::moser_normalize(&lp, &w).expect("positive unit-mass input");
        spectral::grid(n)
            .iter()
            .zip(&w.values)
            .map(|(&t, &wk)| (a.deriv(t) / (2.0 * PI) - wk).abs())
            .fold(0.0, f64::max)
    });
    props.push(PropertyResult::new(
        "moser_roundtrip",
        r,
        gates.get("moser_roundtrip"),
    ));

    let r = max_over_cases(cfg, "moser_reduction_equivalence", 8, |rng| {
        let (lp, w, xi1, xi2) = random_setup(rng, n);
        let direct = pairings::omega_weighted_raw(&lp, &w, &xi1, &xi2);
        let (nl, nw, a) = loops::moser_normalize(&lp, &w).expect("positive unit-mass input");
        let f1 = loops::moser_pushforward(&lp, &w, &xi1, &a);
        let f2 = loops::moser_pushforward(&lp, &w, &xi2, &a);
        (direct - pairings::omega_donaldson(&nl, &f1, &f2, &nw)).abs()
    });
    props.push(PropertyResult::new(
        "moser_reduction_equivalence",
        r,
        gates.get("reduction_equivalence"),
    ));

    Ok(props)
}

fn flows_suite(cfg: &SuiteConfig, gates: &Gates) -> Result<Vec<PropertyResult>> {
    let n = cfg.samples;
    let mut props = Vec::new();

    let circle = checked_circle(1, n)?;
    let r = (flows::action_integral(&circle) + PI).abs();
    props.push(PropertyResult::new(
        "action_circle",
        r,
        gates.get("action_circle"),
    ));

    let r = max_over_cases(cfg, "action_drift", 3, |rng| {
        let m = mode_budget(n);
        let lp = confined(&band::random_loop(rng, AmbientSpace::new(1), n, m), 0.5);
        let dict = poly_dictionary(1);
        let h = dict[rng.gen_range(0..dict.len())].clone();
        let traj = flows::flow_loop(&lp, &FlowField::Hamiltonian(h), 0.5, 400)
            .expect("positive step count");
        flows::isodrast_drift(&traj)
    });
    props.push(PropertyResult::new(
        "action_drift",
        r,
        gates.get("action_drift"),
    ));

    let traj = flows::flow_loop(&circle, &FlowField::Radial, 0.4, 200)?;
    let drift = flows::isodrast_drift(&traj);
    props.push(PropertyResult::new(
        "radial_control_drifts",
        (0.05 - drift).max(0.0),
        gates.get("positivity_margin"),
    ));

    let pendulum = HamiltonianFn::from_expr("pendulum", "p^2/2 - cos(q)", 1)?;
    let reference = flows::flow_loop(
        &circle,
        &FlowField::Hamiltonian(pendulum.clone()),
        0.5,
        1024,
    )?;
    let endpoint_error = |steps: usize| -> Result<f64> {
        let t = flows::flow_loop(
            &circle,
            &FlowField::Hamiltonian(pendulum.clone()),
            0.5,
            steps,
        )?;
        let a = t.last().unwrap();
        let b = reference.last().unwrap();
        Ok(a.samples()
            .iter()
            .zip(b.samples())
            .flat_map(|(u, v)| u.iter().zip(v).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max))
    };
    let ratio = endpoint_error(16)? / endpoint_error(32)?.max(f64::MIN_POSITIVE);
    props.push(PropertyResult::new(
        "rk4_order",
        (ratio - 16.0).abs(),
        gates.get("order_window"),
    ));

    let harmonic = HamiltonianFn::from_expr("harmonic", "(q^2 + p^2)/2", 1)?;
    let traj = flows::flow_loop(&circle, &FlowField::Hamiltonian(harmonic), 2.0 * PI, 1200)?;
    let back = traj.last().unwrap();
    let r = back
        .samples()
        .iter()
        .zip(circle.samples())
        .flat_map(|(u, v)| u.iter().zip(v).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    props.push(PropertyResult::new(
        "harmonic_return",
        r,
        gates.get("harmonic_return"),
    ));

    let r = max_over_cases(cfg, "hamiltonian_tangent_exactness", 6, |rng| {
        let m = mode_budget(n);
        let lp = band::random_loop(rng, AmbientSpace::new(1), n, m);
        let dict = poly_dictionary(1);
        let h = &dict[rng.gen_range(0..dict.len())];
        flows::exactness_residual(&lp, &band::hamiltonian_field_along(&lp, h))
    });
    props.push(PropertyResult::new(
        "hamiltonian_tangent_exactness",
        r,
        gates.get("leaf_tangency"),
    ));

    Ok(props)
}

fn moment_suite(cfg: &SuiteConfig, gates: &Gates) -> Result<Vec<PropertyResult>> {
    let n = cfg.samples;
    let step = cfg.fd_step;
    let mut props = Vec::new();

    let r = max_over_cases(cfg, "moment_condition", 8, |rng| {
        let m = mode_budget(n);
        let lp = band::random_loop(rng, AmbientSpace::new(1), n, m);
        let w = band::random_positive_weighting(rng, n, m);
        let dict = poly_dictionary(1);
        let f = &dict[rng.gen_range(0..dict.len())];
        let xi = band::exact_tangent(rng, &lp, &dict, 2, m).tangent;
        moment_map::moment_condition_residual(&lp, &w, f, &xi, step)
    });
    props.push(PropertyResult::new(
        "moment_condition",
        r,
        gates.get("moment_condition"),
    ));

    let circle = checked_circle(1, n)?;
    let uniform = Weighting::uniform(n);
    let q = HamiltonianFn::from_expr("q", "q", 1)?;
    let p = HamiltonianFn::from_expr("p", "p", 1)?;
    let xi = TangentVector::zero_weight(band::hamiltonian_field_along(&circle, &p));
    let wrong = moment_map::moment_condition_residual_wrong_sign(&circle, &uniform, &q, &xi, step);
    props.push(PropertyResult::new(
        "moment_sign_control",
        (1e-2 - wrong).max(0.0),
        gates.get("positivity_margin"),
    ));

    let r = max_over_cases(cfg, "equivariance_matched", 2, |rng| {
        let m = mode_budget(n);
        let lp = confined(&band::random_loop(rng, AmbientSpace::new(1), n, m), 0.5);
        let w = band::random_positive_weighting(rng, n, m);
        let dict = poly_dictionary(1);
        let f = &dict[rng.gen_range(0..dict.len())];
        let h = &dict[rng.gen_range(0..dict.len())];
        moment_map::equivariance_residual(&lp, &w, f, h, 0.6, 400, 400)
            .expect("positive step count")
    });
    props.push(PropertyResult::new(
        "equivariance_matched",
        r,
        gates.get("equivariance_matched"),
    ));

    let r = max_over_cases(cfg, "equivariance_integrator", 2, |rng| {
        let m = mode_budget(n);
        let lp = confined(&band::random_loop(rng, AmbientSpace::new(1), n, m), 0.5);
        let w = band::random_positive_weighting(rng, n, m);
        let dict = poly_dictionary(1);
        let f = &dict[rng.gen_range(0..dict.len())];
        let h = &dict[rng.gen_range(0..dict.len())];
        moment_map::equivariance_residual(&lp, &w, f, h, 0.6, 500, 501)
            .expect("positive step count")
    });
    props.push(PropertyResult::new(
        "equivariance_integrator",
        r,
        gates.get("equivariance"),
    ));

    let r = max_over_cases(cfg, "kks_matches_weighted", 8, |rng| {
        let m = mode_budget(n);
        let lp = band::random_loop(rng, AmbientSpace::new(1), n, m);
        let w = band::random_positive_weighting(rng, n, m);
        let dict = poly_dictionary(1);
        let f1 = &dict[rng.gen_range(0..dict.len())];
        let f2 = &dict[rng.gen_range(0..dict.len())];
        let xi1 = TangentVector::zero_weight(band::hamiltonian_field_along(&lp, f1));
        let xi2 = TangentVector::zero_weight(band::hamiltonian_field_along(&lp, f2));
        (moment_map::kks_pairing(&lp, &w, f1, f2)
            - pairings::omega_weighted_raw(&lp, &w, &xi1, &xi2))
        .abs()
    });
    props.push(PropertyResult::new(
        "kks_matches_weighted",
        r,
        gates.get("kks_match"),
    ));

    let bump = Weighting::cosine_bump(n);
    let dict = poly_dictionary(1);
    let (_, gap) = moment_map::moment_separation(&circle, &uniform, &circle, &bump, &dict);
    props.push(PropertyResult::new(
        "moment_separates_weightings",
        (1e-6 - gap).max(0.0),
        gates.get("positivity_margin"),
    ));

    Ok(props)
}

fn random_functional(rng: &mut ChaCha8Rng, tag: usize) -> IntegralFunctional {
    let dict = poly_dictionary(1);
    let pick = |rng: &mut ChaCha8Rng| dict[rng.gen_range(0..dict.len())].clone();
    match tag % 3 {
        0 => IntegralFunctional::new("single", "y^2 + y", vec![pick(rng)]),
        1 => IntegralFunctional::new("sin", "sin(y)", vec![pick(rng)]),
        _ => IntegralFunctional::new("pair", "y1*y2", vec![pick(rng), pick(rng)]),
    }
    .expect("fixed outer maps parse")
}

fn poisson_suite(cfg: &SuiteConfig, gates: &Gates) -> Result<Vec<PropertyResult>> {
    let n = cfg.samples;
    let step = cfg.fd_step;
    let mut props = Vec::new();

    let r = max_over_cases(cfg, "field_defining_property", 6, |rng| {
        let m = mode_budget(n);
        let lp = band::random_loop(rng, AmbientSpace::new(1), n, m);
        let tag = rng.gen_range(0..3);
        let f = random_functional(rng, tag);
        let vf = poisson::hamiltonian_field_of(&f, &lp).expect("uniform reference");
        let x = band::random_field(rng, 2, n, m);
        let xi = TangentVector::zero_weight(x.clone());
        let deriv = fd::directional_derivative(
            |l, _| poisson::eval_functional(&f, l).expect("uniform reference"),
            &lp,
            &Weighting::uniform(n),
            &xi,
            step,
        );
        (deriv - pairings::omega_donaldson(&lp, &vf, &x, &Weighting::uniform(n))).abs()
    });
    props.push(PropertyResult::new(
        "field_defining_property",
        r,
        gates.get("fd_form_residual"),
    ));

    let circle = checked_circle(1, n)?;
    let fq = IntegralFunctional::new("Fq", "y", vec![HamiltonianFn::from_expr("q", "q", 1)?])?;
    let fp = IntegralFunctional::new("Fp", "y", vec![HamiltonianFn::from_expr("p", "p", 1)?])?;
    let fqp = IntegralFunctional::new("Fqp", "y", vec![HamiltonianFn::from_expr("qp", "q*p", 1)?])?;
    let r = (poisson::bracket(&fq, &fp, &circle)? + 1.0).abs();
    props.push(PropertyResult::new(
        "coordinate_bracket",
        r,
        gates.get("coord_bracket"),
    ));

    let r = max_over_cases(cfg, "bracket_leibniz", 6, |rng| {
        let m = mode_budget(n);
        let lp = band::random_loop(rng, AmbientSpace::new(1), n, m);
        let fa = random_functional(rng, 0);
        let fb = random_functional(rng, 2);
        let fc = random_functional(rng, 1);
        let prod = poisson::functional_product(&fa, &fb).expect("shared reference");
        let lhs = poisson::bracket(&prod, &fc, &lp).expect("shared reference");
        let rhs = poisson::eval_functional(&fa, &lp).unwrap()
            * poisson::bracket(&fb, &fc, &lp).unwrap()
            + poisson::bracket(&fa, &fc, &lp).unwrap()
                * poisson::eval_functional(&fb, &lp).unwrap();
        (lhs - rhs).abs()
    });
    props.push(PropertyResult::new(
        "bracket_leibniz",
        r,
        gates.get("leibniz"),
    ));

    let coord = poisson::jacobi_residual(&fq, &fp, &fqp, &circle, step)?;
    let random = max_over_cases(cfg, "bracket_jacobi", 1, |rng| {
        let m = mode_budget(n);
        let lp = band::random_loop(rng, AmbientSpace::new(1), n, m);
        let fa = random_functional(rng, 0);
        let fb = random_functional(rng, 1);
        let fc = random_functional(rng, 2);
        poisson::jacobi_residual(&fa, &fb, &fc, &lp, step).expect("shared reference")
    });
    props.push(PropertyResult::new(
        "bracket_jacobi",
        coord.max(random),
        gates.get("jacobi_fd"),
    ));

    let r = max_over_cases(cfg, "descent_under_rotation", 4, |rng| {
        let m = mode_budget(n);
        let lp = band::random_loop(rng, AmbientSpace::new(1), n, m);
        let tag = rng.gen_range(0..3);
        let f = random_functional(rng, tag);
        let before = poisson::eval_functional(&f, &lp).expect("uniform reference");
        let rot = loops::CircleDiffeo::rotation(rng.gen_range(0.1..6.0), n);
        let (moved, _) = loops::reparametrize(&lp, &Weighting::uniform(n), &rot).expect("rotation");
        (before - poisson::eval_functional(&f, &moved).unwrap()).abs()
    });
    props.push(PropertyResult::new(
        "descent_under_rotation",
        r,
        gates.get("leaf_tangency"),
    ));

    let r = max_over_cases(cfg, "leaf_tangency", 6, |rng| {
        let m = mode_budget(n);
        let lp = band::random_loop(rng, AmbientSpace::new(1), n, m);
        let tag = rng.gen_range(0..3);
        let f = random_functional(rng, tag);
        let vf = poisson::hamiltonian_field_of(&f, &lp).expect("uniform reference");
        flows::exactness_residual(&lp, &vf)
    });
    props.push(PropertyResult::new(
        "leaf_tangency",
        r,
        gates.get("leaf_tangency"),
    ));

    let r = max_over_cases(cfg, "presentation_uniqueness", 2, |rng| {
        let m = mode_budget(n);
        let lp = band::random_loop(rng, AmbientSpace::new(1), n, m);
        let one = IntegralFunctional::new(
            "F1",
            "y",
            vec![HamiltonianFn::from_expr("q", "q", 1).unwrap()],
        )
        .unwrap();
        let two = IntegralFunctional::new(
            "F2",
            "2*y",
            vec![HamiltonianFn::from_expr("q/2", "q/2", 1).unwrap()],
        )
        .unwrap();
        let v1 = poisson::hamiltonian_field_of(&one, &lp).unwrap();
        let v2 = poisson::hamiltonian_field_of(&two, &lp).unwrap();
        v1.iter()
            .zip(&v2)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v).abs()))
            .fold(0.0, f64::max)
    });
    props.push(PropertyResult::new(
        "presentation_uniqueness",
        r,
        gates.get("kks_match"),
    ));

    Ok(props)
}

fn metric_point(
    rng: &mut ChaCha8Rng,
    d: usize,
    signature: (usize, usize),
) -> (MetricField, MomentumField) {
    let grid = match d {
        1 => vec![2],
        2 => vec![2, 2],
        3 => vec![2, 1, 1],
        _ => vec![1, 1, 1, 1],
    };
    let g = metrics::random_metric_field(rng, d, grid, signature);
    let h = metrics::random_momentum_field(rng, &g, 0.8);
    (g, h)
}

fn metrics_suite(cfg: &SuiteConfig, gates: &Gates) -> Result<Vec<PropertyResult>> {
    let step = cfg.fd_step;
    let mut props = Vec::new();

    let r = max_over_cases(cfg, "theta_trace_vs_index", 6, |rng| {
        let (g, h) = metric_point(rng, 3, (3, 0));
        let xi = metrics::random_metric_tangent(rng, &g, 0.7);
        (metrics::theta_metric(&g, &h, &xi).unwrap()
            - metrics::theta_metric_indexed(&g, &h, &xi.k).unwrap())
        .abs()
    });
    props.push(PropertyResult::new(
        "theta_trace_vs_index",
        r,
        gates.get("trace_index"),
    ));

    let r = max_over_cases(cfg, "metric_antisymmetry", 6, |rng| {
        let (g, h) = metric_point(rng, 2, (2, 0));
        let a = metrics::random_metric_tangent(rng, &g, 0.6);
        let b = metrics::random_metric_tangent(rng, &g, 0.6);
        (metrics::omega_metric(&g, &h, &a, &b).unwrap()
            + metrics::omega_metric(&g, &h, &b, &a).unwrap())
        .abs()
    });
    props.push(PropertyResult::new(
        "metric_antisymmetry",
        r,
        gates.get("antisymmetry"),
    ));

    let r = max_over_cases(cfg, "metric_bilinearity", 6, |rng| {
        let (g, h) = metric_point(rng, 2, (2, 0));
        let a = metrics::random_metric_tangent(rng, &g, 0.6);
        let b = metrics::random_metric_tangent(rng, &g, 0.6);
        let c = metrics::random_metric_tangent(rng, &g, 0.6);
        let (s, t) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let combo = MetricTangent::linear_combination(s, &a, t, &b);
        let lhs = metrics::omega_metric(&g, &h, &combo, &c).unwrap();
        let rhs = s * metrics::omega_metric(&g, &h, &a, &c).unwrap()
            + t * metrics::omega_metric(&g, &h, &b, &c).unwrap();
        (lhs - rhs).abs()
    });
    props.push(PropertyResult::new(
        "metric_bilinearity",
        r,
        gates.get("bilinearity"),
    ));

    let r = max_over_cases(cfg, "theta_derivative", 4, |rng| {
        let case = rng.gen_range(0..4);
        let (g, h) = if case == 3 {
            metric_point(rng, 4, (1, 3))
        } else {
            metric_point(rng, case + 1, (case + 1, 0))
        };
        let xi1 = metrics::random_metric_tangent(rng, &g, 0.5);
        let xi2 = metrics::random_metric_tangent(rng, &g, 0.5);
        let fd_val = metrics::fd_theta_exterior(&g, &h, &xi1, &xi2, step).unwrap();
        (fd_val + metrics::omega_metric(&g, &h, &xi1, &xi2).unwrap()).abs()
    });
    props.push(PropertyResult::new(
        "theta_derivative",
        r,
        gates.get("metric_fd"),
    ));

    let r = max_over_cases(cfg, "metric_closedness", 3, |rng| {
        let (g, h) = metric_point(rng, 2, (2, 0));
        let dirs: Vec<MetricTangent> = (0..3)
            .map(|_| metrics::random_metric_tangent(rng, &g, 0.5))
            .collect();
        metrics::fd_closedness_metric(&g, &h, [&dirs[0], &dirs[1], &dirs[2]], step)
            .unwrap()
            .abs()
    });
    props.push(PropertyResult::new(
        "metric_closedness",
        r,
        gates.get("metric_fd"),
    ));

    let r = max_over_cases(cfg, "xi_defining_property", 4, |rng| {
        let case = rng.gen_range(0..4);
        let (g, h) = if case == 3 {
            metric_point(rng, 4, (1, 3))
        } else {
            metric_point(rng, case + 1, (case + 1, 0))
        };
        let r_field = metrics::random_momentum_field(rng, &g, 0.7);
        let field = metrics::xi_fr(&r_field, &g, &h).unwrap();
        let probe = metrics::random_metric_tangent(rng, &g, 0.5);
        let fd_val = metrics::fd_metric_derivative(
            |gg, hh| metrics::functional_fr(&r_field, gg, hh).unwrap(),
            &g,
            &h,
            &probe,
            step,
        )
        .unwrap();
        (fd_val - metrics::omega_metric(&g, &h, &field, &probe).unwrap()).abs()
    });
    props.push(PropertyResult::new(
        "xi_defining_property",
        r,
        gates.get("metric_fd"),
    ));

    let mut worst = 0.0f64;
    for d in 1..=4usize {
        let g = MetricField::euclidean(d, vec![1; d]);
        let h = MomentumField::identity(d, 1);
        let r_field = MomentumField::identity(d, 1);
        let xi = metrics::xi_fr(&r_field, &g, &h)?;
        let expected_l = DMatrix::identity(d, d) * (2.0 - d as f64);
        let dev_k = (&xi.k[0] - DMatrix::identity(d, d)).abs().max();
        let dev_l = (&xi.l[0] - expected_l).abs().max();
        worst = worst.max(dev_k).max(dev_l);
    }
    props.push(PropertyResult::new(
        "xi_identity_point",
        worst,
        gates.get("positivity_margin"),
    ));

    let r = max_over_cases(cfg, "metric_leibniz", 3, |rng| {
        let (g, h) = metric_point(rng, 2, (2, 0));
        let fa = MetricFunctional::basic("Fr", metrics::random_momentum_field(rng, &g, 0.7));
        let fb = MetricFunctional::basic("Fs", metrics::random_momentum_field(rng, &g, 0.7));
        let fc = MetricFunctional::basic("Ft", metrics::random_momentum_field(rng, &g, 0.7));
        let prod = metrics::metric_functional_product(&fa, &fb).unwrap();
        let lhs = metrics::metric_functional_bracket(&prod, &fc, &g, &h).unwrap();
        let rhs = fa.eval(&g, &h).unwrap()
            * metrics::metric_functional_bracket(&fb, &fc, &g, &h).unwrap()
            + metrics::metric_functional_bracket(&fa, &fc, &g, &h).unwrap()
                * fb.eval(&g, &h).unwrap();
        (lhs - rhs).abs()
    });
    props.push(PropertyResult::new(
        "metric_leibniz",
        r,
        gates.get("leibniz"),
    ));

    let r = max_over_cases(cfg, "metric_jacobi", 2, |rng| {
        let (g, h) = metric_point(rng, 2, (2, 0));
        let fa = MetricFunctional::basic("Fr", metrics::random_momentum_field(rng, &g, 0.7));
        let fb = MetricFunctional::basic("Fs", metrics::random_momentum_field(rng, &g, 0.7));
        let fc = MetricFunctional::basic("Ft", metrics::random_momentum_field(rng, &g, 0.7));
        metrics::metric_jacobi_residual(&fa, &fb, &fc, &g, &h, step).unwrap()
    });
    props.push(PropertyResult::new(
        "metric_jacobi",
        r,
        gates.get("jacobi_fd"),
    ));

    let worst_margin = max_over_cases(cfg, "metric_nondegeneracy", 4, |rng| {
        let lorentzian = rng.gen_range(0..2) == 1;
        let (g, h) = if lorentzian {
            metric_point(rng, 4, (1, 3))
        } else {
            metric_point(rng, 3, (3, 0))
        };
        let mut xi = metrics::random_metric_tangent(rng, &g, 0.6);
        xi.l = vec![DMatrix::zeros(g.base_dim, g.base_dim); g.n_cells()];
        let partner =
            metrics::nondegeneracy_witness_metric(&g, &xi).expect("nonzero tangent has a witness");
        let value = metrics::omega_metric(&g, &h, &xi, &partner).unwrap();
        (-value).max(0.0)
    });
    props.push(PropertyResult::new(
        "metric_nondegeneracy",
        worst_margin,
        gates.get("positivity_margin"),
    ));

    let g0 = MetricField::new(
        2,
        vec![1, 1],
        (2, 0),
        vec![DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.0, 1.0])],
    )?;
    let h0 = MomentumField::zeros(2, 1);
    let push = MomentumField::new(vec![DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.0])])?;
    let guard_fired = matches!(
        metrics::flow_metric(&g0, &h0, &push, 0.3, 1),
        Err(Error::SignatureBreach { .. }) | Err(Error::DegenerateMetric { .. })
    );
    props.push(PropertyResult::new(
        "signature_guard",
        if guard_fired { 0.0 } else { 1.0 },
        gates.get("positivity_margin"),
    ));

    Ok(props)
}
