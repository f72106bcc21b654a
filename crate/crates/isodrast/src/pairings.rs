//! Symplectic pairings on weighted and momentum-weighted loop spaces.
//!
//! Every pairing shares one integrand shape,
//!
//!   Ω(ξ₁, ξ₂) = ∮ [ω(X₁, X₂) ρ + h₁ ϑ₂ - h₂ ϑ₁] dt,
//!
//! where ρ is the reference density (a weighting w, the uniform density, or a
//! zero-mass momentum χ) and h_k is the primitive of α_{X_k}. The checked
//! entry points gate the exactness of both arguments and return a
//! `PairingReport`; the `_raw` entry points skip all gates, which is what
//! finite-difference callers need, since displaced base points leave the
//! exactness class by an amount proportional to the step.

use crate::error::{Error, Result};
use crate::fd;
use crate::loops::{alpha_of, primitive_of, LoopEmbedding, TangentVector, Weighting};
use crate::spectral::{self, quadrature};
use crate::tol;
use rustfft::num_complex::Complex64;
use std::collections::BTreeMap;

/// Value of a gated pairing plus the diagnostics that justified accepting it.
#[derive(Debug, Clone)]
pub struct PairingReport {
    pub value: f64,
    pub residuals: BTreeMap<String, f64>,
}

fn primitive_along(lp: &LoopEmbedding, x: &[Vec<f64>]) -> (Vec<f64>, f64) {
    primitive_of(&alpha_of(lp, x))
}

fn pair_core(
    lp: &LoopEmbedding,
    density: &[f64],
    xi1: &TangentVector,
    xi2: &TangentVector,
) -> (f64, f64, f64) {
    let (h1, r1) = primitive_along(lp, &xi1.x);
    let (h2, r2) = primitive_along(lp, &xi2.x);
    let n = lp.n_samples();
    let integrand: Vec<f64> = (0..n)
        .map(|k| {
            lp.ambient.omega(&xi1.x[k], &xi2.x[k]) * density[k] + h1[k] * xi2.vartheta[k]
                - h2[k] * xi1.vartheta[k]
        })
        .collect();
    (quadrature(&integrand), r1, r2)
}

fn gate_pair(value: f64, r1: f64, r2: f64, gate: f64) -> Result<PairingReport> {
    for r in [r1, r2] {
        if r > gate {
            return Err(Error::Exactness { residual: r, gate });
        }
    }
    let mut residuals = BTreeMap::new();
    residuals.insert("alpha1_period".to_string(), r1);
    residuals.insert("alpha2_period".to_string(), r2);
    Ok(PairingReport { value, residuals })
}

/// Ω on weighted loops, ungated.
pub fn omega_weighted_raw(
    lp: &LoopEmbedding,
    w: &Weighting,
    xi1: &TangentVector,
    xi2: &TangentVector,
) -> f64 {
    pair_core(lp, &w.values, xi1, xi2).0
}

pub fn omega_weighted_gated(
    lp: &LoopEmbedding,
    w: &Weighting,
    xi1: &TangentVector,
    xi2: &TangentVector,
    gate: f64,
) -> Result<PairingReport> {
    let (value, r1, r2) = pair_core(lp, &w.values, xi1, xi2);
    gate_pair(value, r1, r2, gate)
}

pub fn omega_weighted(
    lp: &LoopEmbedding,
    w: &Weighting,
    xi1: &TangentVector,
    xi2: &TangentVector,
) -> Result<PairingReport> {
    omega_weighted_gated(lp, w, xi1, xi2, tol::EXACTNESS_GATE)
}

/// Ω^D(X₁, X₂) = ∮ ω(X₁, X₂) w₀ dt on plain embeddings; defined for all
/// fields, no exactness involved.
pub fn omega_donaldson(
    lp: &LoopEmbedding,
    x1: &[Vec<f64>],
    x2: &[Vec<f64>],
    w0: &Weighting,
) -> f64 {
    let integrand: Vec<f64> = (0..lp.n_samples())
        .map(|k| lp.ambient.omega(&x1[k], &x2[k]) * w0.values[k])
        .collect();
    quadrature(&integrand)
}

/// The reduced form on exactness classes: Ω^D evaluated on any exact
/// representatives. Well-definedness (invariance under tangential shifts of
/// a representative) holds when w₀ is the uniform density.
pub fn omega_reduced(
    lp: &LoopEmbedding,
    w0: &Weighting,
    x1: &[Vec<f64>],
    x2: &[Vec<f64>],
) -> Result<PairingReport> {
    let (_, r1) = primitive_along(lp, x1);
    let (_, r2) = primitive_along(lp, x2);
    gate_pair(omega_donaldson(lp, x1, x2, w0), r1, r2, tol::EXACTNESS_GATE)
}

/// Planar evaluation of the reduced form through the normal/tangential
/// decomposition X_k = λ_k Jx' + c_k x':
///
///   Ω_red = (1/2π) ∮ [c₂ h₁' - c₁ h₂'] dt.
pub fn omega_reduced_circle(lp: &LoopEmbedding, x1: &[Vec<f64>], x2: &[Vec<f64>]) -> Result<f64> {
    let (_, c1) = crate::loops::normal_tangential_split(lp, x1)?;
    let (_, c2) = crate::loops::normal_tangential_split(lp, x2)?;
    let (h1, _) = primitive_along(lp, x1);
    let (h2, _) = primitive_along(lp, x2);
    let dh1 = spectral::spectral_derivative(&h1);
    let dh2 = spectral::spectral_derivative(&h2);
    let integrand: Vec<f64> = (0..lp.n_samples())
        .map(|k| c2[k] * dh1[k] - c1[k] * dh2[k])
        .collect();
    Ok(quadrature(&integrand) / (2.0 * std::f64::consts::PI))
}

/// Local-chart form ∮ (h₁ ϑ₂ - h₂ ϑ₁) dt, by plain quadrature.
pub fn omega_local(h1: &[f64], th1: &[f64], h2: &[f64], th2: &[f64]) -> f64 {
    let integrand: Vec<f64> = (0..h1.len())
        .map(|k| h1[k] * th2[k] - h2[k] * th1[k])
        .collect();
    quadrature(&integrand)
}

/// Same bilinear form evaluated through Fourier coefficients:
/// 2π Σ_m [ĥ₁(m) ϑ̂₂(-m) - ĥ₂(m) ϑ̂₁(-m)]. Equals `omega_local` by Parseval.
pub fn omega_fourier(h1: &[f64], th1: &[f64], h2: &[f64], th2: &[f64]) -> f64 {
    let n = h1.len() as i64;
    let ch1 = spectral::fourier_coefficients(h1);
    let ct1 = spectral::fourier_coefficients(th1);
    let ch2 = spectral::fourier_coefficients(h2);
    let ct2 = spectral::fourier_coefficients(th2);
    let mut acc = Complex64::new(0.0, 0.0);
    for m in -(n / 2 - 1)..=(n / 2 - 1) {
        acc += spectral::mode(&ch1, m) * spectral::mode(&ct2, -m)
            - spectral::mode(&ch2, m) * spectral::mode(&ct1, -m);
    }
    2.0 * std::f64::consts::PI * acc.re
}

/// Θ(ξ) = ∮ h_ξ χ dt on momentum-weighted loops, ungated. The zero total
/// mass of χ makes the value independent of the primitive's constant.
pub fn theta_momentum_raw(lp: &LoopEmbedding, chi: &Weighting, xi: &TangentVector) -> f64 {
    let (h, _) = primitive_along(lp, &xi.x);
    let integrand: Vec<f64> = h.iter().zip(&chi.values).map(|(a, b)| a * b).collect();
    quadrature(&integrand)
}

pub fn theta_momentum(
    lp: &LoopEmbedding,
    chi: &Weighting,
    xi: &TangentVector,
) -> Result<PairingReport> {
    let (h, r) = primitive_along(lp, &xi.x);
    if r > tol::EXACTNESS_GATE {
        return Err(Error::Exactness {
            residual: r,
            gate: tol::EXACTNESS_GATE,
        });
    }
    let integrand: Vec<f64> = h.iter().zip(&chi.values).map(|(a, b)| a * b).collect();
    let mut residuals = BTreeMap::new();
    residuals.insert("alpha_period".to_string(), r);
    residuals.insert("chi_mass".to_string(), quadrature(&chi.values).abs());
    Ok(PairingReport {
        value: quadrature(&integrand),
        residuals,
    })
}

/// Ω on momentum-weighted loops: the weighted formula with χ as density.
pub fn omega_momentum_raw(
    lp: &LoopEmbedding,
    chi: &Weighting,
    xi1: &TangentVector,
    xi2: &TangentVector,
) -> f64 {
    pair_core(lp, &chi.values, xi1, xi2).0
}

pub fn omega_momentum(
    lp: &LoopEmbedding,
    chi: &Weighting,
    xi1: &TangentVector,
    xi2: &TangentVector,
) -> Result<PairingReport> {
    let (value, r1, r2) = pair_core(lp, &chi.values, xi1, xi2);
    gate_pair(value, r1, r2, tol::EXACTNESS_GATE)
}

/// Realize chart coordinates (φ, ϑ) as the tangent (X, ϑ) with X = λ Jx'
/// normal and α_X = φ' exactly: λ = -φ'/|x'|².
pub fn chart_tangent(lp: &LoopEmbedding, phi: &[f64], vartheta: &[f64]) -> TangentVector {
    let dphi = spectral::spectral_derivative(phi);
    let x = lp
        .velocities()
        .iter()
        .zip(&dphi)
        .map(|(v, dp)| {
            let speed2: f64 = v.iter().map(|a| a * a).sum();
            let jv = lp.ambient.j_apply(v);
            jv.into_iter().map(|c| -dp / speed2 * c).collect()
        })
        .collect();
    TangentVector {
        x,
        vartheta: vartheta.to_vec(),
    }
}

/// ξ shifted by the vertical direction of a tangential field Y = y·x':
/// (X + y x', ϑ + (y w)'), the discrete Lie-derivative transport of the
/// density. A basic form must not see this shift.
pub fn basicness_shift(
    lp: &LoopEmbedding,
    w: &Weighting,
    xi: &TangentVector,
    y: &[f64],
) -> TangentVector {
    let n = lp.n_samples();
    let yw: Vec<f64> = y.iter().zip(&w.values).map(|(a, b)| a * b).collect();
    let lie = spectral::spectral_derivative(&yw);
    let x = (0..n)
        .map(|k| {
            xi.x[k]
                .iter()
                .zip(lp.velocity(k))
                .map(|(a, v)| a + y[k] * v)
                .collect()
        })
        .collect();
    let vartheta = (0..n).map(|k| xi.vartheta[k] + lie[k]).collect();
    TangentVector { x, vartheta }
}

/// Constructive weak nondegeneracy: a partner ξ₂ with Ω(ξ₁, ξ₂) > 0,
/// built from whichever component of ξ₁ is visible in the quotient.
/// Returns None when ξ₁ has constant h and zero ϑ (a pure gauge direction).
pub fn nondegeneracy_witness(lp: &LoopEmbedding, xi1: &TangentVector) -> Option<TangentVector> {
    let n = lp.n_samples();
    let (h1, _) = primitive_along(lp, &xi1.x);
    let mean = quadrature(&h1) / (2.0 * std::f64::consts::PI);
    let centered: Vec<f64> = h1.iter().map(|v| v - mean).collect();
    let h_norm = quadrature(&centered.iter().map(|v| v * v).collect::<Vec<_>>());
    if h_norm > 1e-18 {
        // ϑ₂ := h₁ - mean(h₁) gives Ω = ∮ (h₁ - mean)² dt
        return Some(TangentVector {
            x: vec![vec![0.0; lp.ambient.dim()]; n],
            vartheta: centered,
        });
    }
    let th_norm = quadrature(&xi1.vartheta.iter().map(|v| v * v).collect::<Vec<_>>());
    if th_norm > 1e-18 {
        // normal field with primitive -ϑ₁ gives Ω = ∮ ϑ₁² dt
        let neg: Vec<f64> = xi1.vartheta.iter().map(|v| -v).collect();
        return Some(chart_tangent(lp, &neg, &vec![0.0; n]));
    }
    None
}

/// FD exterior derivative of the weighted form in chart directions: each
/// direction is chart data (φ, ϑ) re-realized as a normal tangent at every
/// displaced base point, which is the flat extension of the chart.
pub fn fd_chart_closedness(
    lp: &LoopEmbedding,
    w: &Weighting,
    dirs: [(&[f64], &[f64]); 3],
    step: f64,
) -> f64 {
    let term = |a: usize, b: usize, c: usize, sign: f64| {
        let dir_a = chart_tangent(lp, dirs[a].0, dirs[a].1);
        sign * fd::directional_derivative(
            |l, ww| {
                let xb = chart_tangent(l, dirs[b].0, dirs[b].1);
                let xc = chart_tangent(l, dirs[c].0, dirs[c].1);
                omega_weighted_raw(l, ww, &xb, &xc)
            },
            lp,
            w,
            &dir_a,
            step,
        )
    };
    term(0, 1, 2, 1.0) + term(1, 0, 2, -1.0) + term(2, 0, 1, 1.0)
}

/// Deliberately non-closed control form ∮ ‖x‖² ω(X₁, X₂) w₀ dt.
pub fn non_closed_control(
    lp: &LoopEmbedding,
    w0: &Weighting,
    x1: &[Vec<f64>],
    x2: &[Vec<f64>],
) -> f64 {
    let integrand: Vec<f64> = (0..lp.n_samples())
        .map(|k| {
            let norm2: f64 = lp.point(k).iter().map(|a| a * a).sum();
            norm2 * lp.ambient.omega(&x1[k], &x2[k]) * w0.values[k]
        })
        .collect();
    quadrature(&integrand)
}

/// Analytic exterior derivative of the control form under constant
/// extensions: only the ‖x‖² coefficient varies, so
/// dΩ = ∮ 2[(x·X₀)ω(X₁,X₂) - (x·X₁)ω(X₀,X₂) + (x·X₂)ω(X₀,X₁)] w₀ dt.
pub fn non_closed_control_derivative(
    lp: &LoopEmbedding,
    w0: &Weighting,
    x0: &[Vec<f64>],
    x1: &[Vec<f64>],
    x2: &[Vec<f64>],
) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
    let integrand: Vec<f64> = (0..lp.n_samples())
        .map(|k| {
            let x = lp.point(k);
            let amb = &lp.ambient;
            2.0 * (dot(x, &x0[k]) * amb.omega(&x1[k], &x2[k])
                - dot(x, &x1[k]) * amb.omega(&x0[k], &x2[k])
                + dot(x, &x2[k]) * amb.omega(&x0[k], &x1[k]))
                * w0.values[k]
        })
        .collect();
    quadrature(&integrand)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::{poly_dictionary, AmbientSpace};
    use crate::band;
    use crate::fd::{fd_exterior_derivative_1form, fd_exterior_derivative_2form};
    use crate::loops::{reparametrize, reparametrize_tangent, WeightKind};
    use crate::spectral::grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn amb() -> AmbientSpace {
        AmbientSpace::new(1)
    }

    fn circle_setup(n: usize) -> (LoopEmbedding, Weighting) {
        (LoopEmbedding::circle(amb(), n), Weighting::uniform(n))
    }

    fn const_field(n: usize, v: [f64; 2]) -> TangentVector {
        TangentVector::zero_weight(vec![vec![v[0], v[1]]; n])
    }

    #[test]
    fn weighted_pairing_of_coordinate_fields_is_one() {
        let n = 64;
        let (lp, w) = circle_setup(n);
        // X for H = q is (0,-1); for H = p it is (1,0)
        let xi1 = const_field(n, [0.0, -1.0]);
        let xi2 = const_field(n, [1.0, 0.0]);
        let rep = omega_weighted(&lp, &w, &xi1, &xi2).unwrap();
        assert!((rep.value - 1.0).abs() < 1e-13);
        assert!(rep.residuals["alpha1_period"] < 1e-13);
        let same = omega_weighted(&lp, &w, &xi1, &xi1).unwrap();
        assert_eq!(same.value, 0.0);
    }

    #[test]
    fn weighted_pairing_sees_weight_variations_through_primitives() {
        let n = 64;
        let (lp, w) = circle_setup(n);
        let xi1 = const_field(n, [0.0, -1.0]); // h₁ = cos t - 1
        let vartheta: Vec<f64> = grid(n).into_iter().map(|t| t.cos() / (2.0 * PI)).collect();
        let xi2 = TangentVector {
            x: vec![vec![0.0, 0.0]; n],
            vartheta,
        };
        let rep = omega_weighted(&lp, &w, &xi1, &xi2).unwrap();
        assert!((rep.value - 0.5).abs() < 1e-13);
    }

    #[test]
    fn weighted_pairing_gates_non_exact_arguments() {
        let n = 64;
        let (lp, w) = circle_setup(n);
        // J x' has α = -|x'|², period -2π
        let jxp: Vec<Vec<f64>> = lp
            .velocities()
            .iter()
            .map(|v| lp.ambient.j_apply(v))
            .collect();
        let xi1 = TangentVector::zero_weight(jxp);
        let xi2 = const_field(n, [1.0, 0.0]);
        match omega_weighted(&lp, &w, &xi1, &xi2) {
            Err(Error::Exactness { residual, .. }) => {
                assert!((residual - 2.0 * PI).abs() < 1e-10)
            }
            other => panic!("expected exactness error, got {other:?}"),
        }
    }

    #[test]
    fn donaldson_examples_and_positivity_witness() {
        let n = 64;
        let (lp, w0) = circle_setup(n);
        let x1 = vec![vec![0.0, -1.0]; n];
        let x2 = vec![vec![1.0, 0.0]; n];
        assert!((omega_donaldson(&lp, &x1, &x2, &w0) - 1.0).abs() < 1e-13);
        let zero = vec![vec![0.0, 0.0]; n];
        assert_eq!(omega_donaldson(&lp, &x1, &zero, &w0), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let f = band::random_field(&mut rng, 2, n, 6);
            let jf: Vec<Vec<f64>> = f.iter().map(|v| lp.ambient.j_apply(v)).collect();
            let val = omega_donaldson(&lp, &f, &jf, &w0);
            assert!(val > 0.0);
        }
    }

    #[test]
    fn reduced_form_ignores_tangential_shifts_of_representatives() {
        let n = 128;
        let (lp, w0) = circle_setup(n);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let dict = poly_dictionary(1);
        for _ in 0..10 {
            let x1 = band::exact_tangent(&mut rng, &lp, &dict, 3, 6).tangent.x;
            let x2 = band::exact_tangent(&mut rng, &lp, &dict, 3, 6).tangent.x;
            let base = omega_reduced(&lp, &w0, &x1, &x2).unwrap().value;
            let shifted: Vec<Vec<f64>> = x2
                .iter()
                .zip(lp.velocities())
                .map(|(xi, v)| xi.iter().zip(v).map(|(a, b)| a + 0.7 * b).collect())
                .collect();
            let after = omega_reduced(&lp, &w0, &x1, &shifted).unwrap().value;
            assert!((base - after).abs() < 1e-10);
        }
    }

    #[test]
    fn reduced_form_matches_circle_decomposition_formula() {
        let n = 128;
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let dict = poly_dictionary(1);
        for _ in 0..10 {
            let lp = band::random_loop(&mut rng, amb(), n, 6);
            let w0 = Weighting::uniform(n);
            let x1 = band::exact_tangent(&mut rng, &lp, &dict, 3, 6).tangent.x;
            let x2 = band::exact_tangent(&mut rng, &lp, &dict, 3, 6).tangent.x;
            let direct = omega_donaldson(&lp, &x1, &x2, &w0);
            let reduced = omega_reduced_circle(&lp, &x1, &x2).unwrap();
            assert!(
                (direct - reduced).abs() < 1e-9,
                "decomposition residual {:.3e}",
                (direct - reduced).abs()
            );
        }
    }

    #[test]
    fn fourier_route_matches_quadrature_route() {
        let n = 64;
        let h1: Vec<f64> = grid(n).into_iter().map(f64::cos).collect();
        let th2: Vec<f64> = grid(n).into_iter().map(|t| t.cos() / (2.0 * PI)).collect();
        let zero = vec![0.0; n];
        let v = omega_fourier(&h1, &zero, &zero, &th2);
        assert!((v - 0.5).abs() < 1e-13);
        assert_eq!(omega_fourier(&zero, &zero, &zero, &zero), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for _ in 0..20 {
            let a = band::band_series(&mut rng, n, 10, 1.0);
            let b = band::band_series(&mut rng, n, 10, 1.0);
            let c = band::band_series(&mut rng, n, 10, 1.0);
            let d = band::band_series(&mut rng, n, 10, 1.0);
            let diff = omega_fourier(&a, &b, &c, &d) - omega_local(&a, &b, &c, &d);
            assert!(diff.abs() < 1e-12);
        }
    }

    #[test]
    fn theta_momentum_examples_and_constant_independence() {
        let n = 64;
        let lp = LoopEmbedding::circle(amb(), n);
        let chi_values: Vec<f64> = grid(n).into_iter().map(|t| t.cos() / (2.0 * PI)).collect();
        let chi = Weighting::new(WeightKind::ZeroMass, chi_values).unwrap();
        let xi = const_field(n, [0.0, -1.0]); // h = cos t - 1
        let rep = theta_momentum(&lp, &chi, &xi).unwrap();
        assert!((rep.value - 0.5).abs() < 1e-13);

        let zero_chi = Weighting::new(WeightKind::ZeroMass, vec![0.0; n]).unwrap();
        assert_eq!(theta_momentum_raw(&lp, &zero_chi, &xi), 0.0);

        // shifting the primitive by a constant cannot move the value
        let (h, _) = primitive_of(&alpha_of(&lp, &xi.x));
        let shifted: Vec<f64> = h.iter().map(|v| v + 5.0).collect();
        let direct = quadrature(
            &h.iter()
                .zip(&chi.values)
                .map(|(a, b)| a * b)
                .collect::<Vec<_>>(),
        );
        let moved = quadrature(
            &shifted
                .iter()
                .zip(&chi.values)
                .map(|(a, b)| a * b)
                .collect::<Vec<_>>(),
        );
        assert!((direct - moved).abs() < 1e-12);
    }

    #[test]
    fn momentum_pairing_orthogonality_example() {
        let n = 64;
        let lp = LoopEmbedding::circle(amb(), n);
        let chi = Weighting::new(WeightKind::ZeroMass, vec![0.0; n]).unwrap();
        let vartheta: Vec<f64> = grid(n).into_iter().map(|t| t.cos() / (2.0 * PI)).collect();
        let xi1 = TangentVector {
            x: vec![vec![0.0, -1.0]; n],
            vartheta,
        };
        let xi2 = const_field(n, [1.0, 0.0]);
        let rep = omega_momentum(&lp, &chi, &xi1, &xi2).unwrap();
        assert!(rep.value.abs() < 1e-13);
        assert_eq!(omega_momentum_raw(&lp, &chi, &xi1, &xi1), 0.0);
    }

    #[test]
    fn momentum_form_is_minus_d_theta() {
        let n = 128;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let dict = poly_dictionary(1);
        for _ in 0..5 {
            let lp = band::random_loop(&mut rng, amb(), n, 6);
            let chi = Weighting::new(WeightKind::ZeroMass, band::random_variation(&mut rng, n, 6))
                .unwrap();
            let xi1 = band::exact_tangent(&mut rng, &lp, &dict, 2, 6).tangent;
            let xi2 = band::exact_tangent(&mut rng, &lp, &dict, 2, 6).tangent;
            let omega = omega_momentum_raw(&lp, &chi, &xi1, &xi2);
            let d_theta = fd_exterior_derivative_1form(
                theta_momentum_raw,
                &lp,
                &chi,
                &xi1,
                &xi2,
                tol::FD_STEP,
            );
            assert!(
                (d_theta + omega).abs() < 1e-6,
                "dΘ + Ω = {:.3e}",
                (d_theta + omega).abs()
            );
        }
    }

    #[test]
    fn donaldson_form_is_closed_under_fd() {
        let n = 64;
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        let lp = band::random_loop(&mut rng, amb(), n, 6);
        let w0 = Weighting::uniform(n);
        let dirs: Vec<TangentVector> = (0..3)
            .map(|_| TangentVector::zero_weight(band::random_field(&mut rng, 2, n, 6)))
            .collect();
        let d = fd_exterior_derivative_2form(
            |l, ww, a, b| omega_donaldson(l, &a.x, &b.x, ww),
            &lp,
            &w0,
            [&dirs[0], &dirs[1], &dirs[2]],
            tol::FD_STEP,
        );
        assert!(d.abs() < 1e-6);
    }

    #[test]
    fn control_form_is_not_closed_and_matches_analytic_derivative() {
        // in the plane x♭∧ω vanishes, so the witness lives in R⁴
        let n = 64;
        let ambient = AmbientSpace::new(2);
        let lp = LoopEmbedding::circle(ambient, n);
        let w0 = Weighting::uniform(n);
        let e_q2 = vec![vec![0.0, 1.0, 0.0, 0.0]; n];
        let e_p2 = vec![vec![0.0, 0.0, 0.0, 1.0]; n];
        let cos_q1: Vec<Vec<f64>> = grid(n)
            .into_iter()
            .map(|t| vec![t.cos(), 0.0, 0.0, 0.0])
            .collect();
        let dirs = [
            TangentVector::zero_weight(e_q2),
            TangentVector::zero_weight(e_p2),
            TangentVector::zero_weight(cos_q1),
        ];
        let fd_val = fd_exterior_derivative_2form(
            |l, ww, a, b| non_closed_control(l, ww, &a.x, &b.x),
            &lp,
            &w0,
            [&dirs[0], &dirs[1], &dirs[2]],
            tol::FD_STEP,
        );
        let analytic = non_closed_control_derivative(&lp, &w0, &dirs[0].x, &dirs[1].x, &dirs[2].x);
        assert!((analytic - 1.0).abs() < 1e-12, "analytic {analytic}");
        assert!(fd_val.abs() > 1e-3);
        assert!((fd_val - analytic).abs() < 1e-9);
    }

    #[test]
    fn fd_derivative_converges_at_second_order_on_curved_target() {
        // cubic-coefficient form: FD error has a nonvanishing step² term
        let n = 64;
        let (lp, w0) = circle_setup(n);
        let cubic = |l: &LoopEmbedding, ww: &Weighting, a: &TangentVector, b: &TangentVector| {
            let vals: Vec<f64> = (0..l.n_samples())
                .map(|k| l.point(k)[0].powi(3) * l.ambient.omega(&a.x[k], &b.x[k]) * ww.values[k])
                .collect();
            quadrature(&vals)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let dirs: Vec<TangentVector> = (0..3)
            .map(|_| TangentVector::zero_weight(band::random_field(&mut rng, 2, n, 4)))
            .collect();
        let exact = {
            // analytic dΩ with coefficient q₁³: D coefficient = 3 q₁² X_{q₁}
            let dot_q = |f: &TangentVector, k: usize| f.x[k][0];
            let vals: Vec<f64> = (0..n)
                .map(|k| {
                    let q = lp.point(k)[0];
                    3.0 * q
                        * q
                        * (dot_q(&dirs[0], k) * lp.ambient.omega(&dirs[1].x[k], &dirs[2].x[k])
                            - dot_q(&dirs[1], k) * lp.ambient.omega(&dirs[0].x[k], &dirs[2].x[k])
                            + dot_q(&dirs[2], k) * lp.ambient.omega(&dirs[0].x[k], &dirs[1].x[k]))
                        * w0.values[k]
                })
                .collect();
            quadrature(&vals)
        };
        let residual = |step: f64| {
            fd_exterior_derivative_2form(cubic, &lp, &w0, [&dirs[0], &dirs[1], &dirs[2]], step)
                - exact
        };
        let ratio = fd::order_ratio(residual, 1e-2);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn chart_directions_certify_local_closedness() {
        let n = 128;
        let mut rng = ChaCha8Rng::seed_from_u64(111);
        let lp = band::random_loop(&mut rng, amb(), n, 6);
        let w = band::random_positive_weighting(&mut rng, n, 6);
        let phis: Vec<Vec<f64>> = (0..3)
            .map(|_| band::band_series(&mut rng, n, 6, 1.0))
            .collect();
        let ths: Vec<Vec<f64>> = (0..3)
            .map(|_| band::random_variation(&mut rng, n, 6))
            .collect();
        let d = fd_chart_closedness(
            &lp,
            &w,
            [
                (&phis[0], &ths[0]),
                (&phis[1], &ths[1]),
                (&phis[2], &ths[2]),
            ],
            tol::FD_STEP,
        );
        assert!(d.abs() < 1e-8, "chart dΩ = {d:.3e}");
    }

    #[test]
    fn antisymmetry_and_bilinearity_on_random_data() {
        let n = 128;
        let mut rng = ChaCha8Rng::seed_from_u64(121);
        let dict = poly_dictionary(1);
        let lp = band::random_loop(&mut rng, amb(), n, 6);
        let w = band::random_positive_weighting(&mut rng, n, 6);
        for _ in 0..20 {
            let a = band::exact_tangent(&mut rng, &lp, &dict, 2, 6).tangent;
            let b = band::exact_tangent(&mut rng, &lp, &dict, 2, 6).tangent;
            let c = band::exact_tangent(&mut rng, &lp, &dict, 2, 6).tangent;
            let anti = omega_weighted_raw(&lp, &w, &a, &b) + omega_weighted_raw(&lp, &w, &b, &a);
            assert!(anti.abs() < 1e-13);
            let combo = TangentVector {
                x: (0..n)
                    .map(|k| (0..2).map(|i| 2.0 * a.x[k][i] - 0.5 * b.x[k][i]).collect())
                    .collect(),
                vartheta: (0..n)
                    .map(|k| 2.0 * a.vartheta[k] - 0.5 * b.vartheta[k])
                    .collect(),
            };
            let lin = omega_weighted_raw(&lp, &w, &combo, &c)
                - 2.0 * omega_weighted_raw(&lp, &w, &a, &c)
                + 0.5 * omega_weighted_raw(&lp, &w, &b, &c);
            assert!(lin.abs() < 1e-12);
        }
    }

    #[test]
    fn basic_forms_ignore_vertical_shifts() {
        let n = 128;
        let mut rng = ChaCha8Rng::seed_from_u64(131);
        let dict = poly_dictionary(1);
        for _ in 0..10 {
            let lp = band::random_loop(&mut rng, amb(), n, 6);
            let w = band::random_positive_weighting(&mut rng, n, 6);
            let xi1 = band::exact_tangent(&mut rng, &lp, &dict, 2, 6).tangent;
            let xi2 = band::exact_tangent(&mut rng, &lp, &dict, 2, 6).tangent;
            let y = band::band_series(&mut rng, n, 6, 1.0);
            let shifted = basicness_shift(&lp, &w, &xi2, &y);
            let before = omega_weighted_raw(&lp, &w, &xi1, &xi2);
            let after = omega_weighted_raw(&lp, &w, &xi1, &shifted);
            assert!(
                (before - after).abs() < tol::BASICNESS,
                "shift defect {:.3e}",
                (before - after).abs()
            );
        }
    }

    #[test]
    fn pairing_is_reparametrization_invariant() {
        let n = 128;
        let mut rng = ChaCha8Rng::seed_from_u64(141);
        let dict = poly_dictionary(1);
        for _ in 0..5 {
            let lp = band::random_loop(&mut rng, amb(), n, 5);
            let w = band::random_positive_weighting(&mut rng, n, 5);
            let xi1 = band::exact_tangent(&mut rng, &lp, &dict, 2, 5).tangent;
            let xi2 = band::exact_tangent(&mut rng, &lp, &dict, 2, 5).tangent;
            let a = band::random_diffeo(&mut rng, n, 4);
            let before = omega_weighted_raw(&lp, &w, &xi1, &xi2);
            let (lp2, w2) = reparametrize(&lp, &w, &a).unwrap();
            let xi1t = reparametrize_tangent(&xi1, &a);
            let xi2t = reparametrize_tangent(&xi2, &a);
            let after = omega_weighted_raw(&lp2, &w2, &xi1t, &xi2t);
            assert!(
                (before - after).abs() < 1e-8,
                "reparam defect {:.3e}",
                (before - after).abs()
            );
        }
    }

    #[test]
    fn nondegeneracy_witness_covers_both_branches() {
        let n = 64;
        let (lp, w) = circle_setup(n);
        // branch 1: nonconstant h
        let xi = const_field(n, [0.0, -1.0]);
        let partner = nondegeneracy_witness(&lp, &xi).unwrap();
        assert!(omega_weighted_raw(&lp, &w, &xi, &partner) > 1e-6);
        // branch 2: zero field, pure weight direction
        let vartheta: Vec<f64> = grid(n).into_iter().map(f64::cos).collect();
        let xi_th = TangentVector {
            x: vec![vec![0.0, 0.0]; n],
            vartheta,
        };
        let partner2 = nondegeneracy_witness(&lp, &xi_th).unwrap();
        assert!(omega_weighted_raw(&lp, &w, &xi_th, &partner2) > 1e-6);
        // gauge direction: no witness
        let gauge = TangentVector::zero_weight(lp.velocities().to_vec());
        assert!(nondegeneracy_witness(&lp, &gauge).is_none());
    }
}
