//! Central finite differences on functionals of weighted loops.
//!
//! Directions are held constant while the base point moves: a tangent
//! (X, ϑ) perturbs a weighted loop to (i + sX, w + sϑ) with the same
//! (X, ϑ) reused at every base point. Under constant extensions the bracket
//! terms of the exterior-derivative formula vanish, so dΩ reduces to the
//! cyclic sum of directional derivatives of Ω's coefficients.
//!
//! Everything here must evaluate its target ungated: a perturbed loop
//! generally leaves the exactness class by O(s), which is far above any
//! exactness gate but is exactly what the difference quotient needs to see.

use crate::loops::{LoopEmbedding, TangentVector, Weighting};
use crate::tol;

/// One-dimensional central difference, O(step²).
pub fn central_diff(f: impl Fn(f64) -> f64, at: f64, step: f64) -> f64 {
    (f(at + step) - f(at - step)) / (2.0 * step)
}

/// The weighted loop shifted by s·(X, ϑ), with no validation: perturbed
/// data is allowed to be non-exact, non-unit-mass, and so on.
pub fn displace(
    lp: &LoopEmbedding,
    w: &Weighting,
    dir: &TangentVector,
    s: f64,
) -> (LoopEmbedding, Weighting) {
    let samples = lp
        .samples()
        .iter()
        .zip(&dir.x)
        .map(|(pt, xi)| pt.iter().zip(xi).map(|(a, b)| a + s * b).collect())
        .collect();
    let values = w
        .values
        .iter()
        .zip(&dir.vartheta)
        .map(|(a, b)| a + s * b)
        .collect();
    (
        LoopEmbedding::from_samples(lp.ambient, samples)
            .expect("finite-difference displacement broke the immersion; shrink the step"),
        Weighting {
            kind: w.kind,
            values,
        },
    )
}

/// Directional derivative D_ξ f at (lp, w) by central differences.
pub fn directional_derivative(
    f: impl Fn(&LoopEmbedding, &Weighting) -> f64,
    lp: &LoopEmbedding,
    w: &Weighting,
    dir: &TangentVector,
    step: f64,
) -> f64 {
    let (lp_plus, w_plus) = displace(lp, w, dir, step);
    let (lp_minus, w_minus) = displace(lp, w, dir, -step);
    (f(&lp_plus, &w_plus) - f(&lp_minus, &w_minus)) / (2.0 * step)
}

/// dΘ(ξ₁, ξ₂) at (lp, w) for a 1-form given by its evaluation function,
/// with constant extensions: dΘ = D_{ξ₁} Θ(ξ₂) - D_{ξ₂} Θ(ξ₁).
pub fn fd_exterior_derivative_1form(
    theta: impl Fn(&LoopEmbedding, &Weighting, &TangentVector) -> f64,
    lp: &LoopEmbedding,
    w: &Weighting,
    xi1: &TangentVector,
    xi2: &TangentVector,
    step: f64,
) -> f64 {
    directional_derivative(|l, ww| theta(l, ww, xi2), lp, w, xi1, step)
        - directional_derivative(|l, ww| theta(l, ww, xi1), lp, w, xi2, step)
}

/// dΩ(ξ₀, ξ₁, ξ₂) at (lp, w) for a 2-form given by its coefficient function
/// Ω(base, dir_a, dir_b), using constant extensions of the three directions:
///
///   dΩ = D_{ξ₀} Ω(ξ₁,ξ₂) - D_{ξ₁} Ω(ξ₀,ξ₂) + D_{ξ₂} Ω(ξ₀,ξ₁).
pub fn fd_exterior_derivative_2form(
    omega: impl Fn(&LoopEmbedding, &Weighting, &TangentVector, &TangentVector) -> f64,
    lp: &LoopEmbedding,
    w: &Weighting,
    dirs: [&TangentVector; 3],
    step: f64,
) -> f64 {
    let term = |a: usize, b: usize, c: usize, sign: f64| {
        sign * directional_derivative(|l, ww| omega(l, ww, dirs[b], dirs[c]), lp, w, dirs[a], step)
    };
    term(0, 1, 2, 1.0) + term(1, 0, 2, -1.0) + term(2, 0, 1, 1.0)
}

/// Richardson order probe: residuals of `f` at `step` and `step/2` should
/// shrink by ~4 for an O(step²) scheme. Returns the observed ratio.
pub fn order_ratio(f: impl Fn(f64) -> f64, step: f64) -> f64 {
    let coarse = f(step).abs();
    let fine = f(step * 0.5).abs();
    coarse / fine.max(f64::MIN_POSITIVE)
}

/// Default step re-exported so callers never hardcode it.
pub fn default_step() -> f64 {
    tol::FD_STEP
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::AmbientSpace;
    use crate::spectral::{grid, quadrature};
    use std::f64::consts::PI;

    #[test]
    fn central_diff_is_second_order() {
        let f = |x: f64| x.exp() * x.sin();
        let exact = |x: f64| x.exp() * (x.sin() + x.cos());
        let at = 0.7;
        let err = |h: f64| central_diff(f, at, h) - exact(at);
        let ratio = order_ratio(err, 1e-3);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn directional_derivative_of_mass_is_variation_mass() {
        // d/ds mass(w + s ϑ) = quadrature(ϑ), exactly linear in s
        let n = 64;
        let lp = LoopEmbedding::circle(AmbientSpace::new(1), n);
        let w = Weighting::uniform(n);
        let vartheta: Vec<f64> = grid(n).into_iter().map(|t| t.cos() + 0.3).collect();
        let dir = TangentVector {
            x: vec![vec![0.0, 0.0]; n],
            vartheta: vartheta.clone(),
        };
        let d = directional_derivative(|_, ww| quadrature(&ww.values), &lp, &w, &dir, 1e-4);
        assert!((d - quadrature(&vartheta)).abs() < 1e-10);
        assert!((quadrature(&vartheta) - 0.6 * PI).abs() < 1e-12);
    }

    #[test]
    fn exterior_derivative_of_constant_coefficient_form_vanishes() {
        // Ω(ξ,ζ) = quadrature(ω(X_ξ, X_ζ) w₀) with w₀ frozen is base-independent
        let n = 32;
        let lp = LoopEmbedding::circle(AmbientSpace::new(1), n);
        let w = Weighting::uniform(n);
        let field = |a: f64, b: f64| TangentVector::zero_weight(vec![vec![a, b]; n]);
        let dirs = [field(1.0, 0.0), field(0.0, 1.0), field(1.0, 1.0)];
        let form = |_: &LoopEmbedding, _: &Weighting, u: &TangentVector, v: &TangentVector| {
            let amb = AmbientSpace::new(1);
            let vals: Vec<f64> =
                u.x.iter()
                    .zip(&v.x)
                    .map(|(a, b)| amb.omega(a, b) * 0.5 / PI)
                    .collect();
            quadrature(&vals)
        };
        let d = fd_exterior_derivative_2form(form, &lp, &w, [&dirs[0], &dirs[1], &dirs[2]], 1e-4);
        assert!(d.abs() < 1e-12);
    }
}
