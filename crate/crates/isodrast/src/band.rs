//! Seeded generators of band-limited test data.
//!
//! Everything drawn here has a controlled Fourier band: loops and weightings
//! stay below `max_mode`, so integrands built from them and a degree-≤4
//! polynomial Hamiltonian stay below 4·max_mode, and the trapezoid rule is
//! exact on the grid whenever 4·max_mode < N/2. Keep that inequality in
//! mind when choosing parameters; the whole roundoff-level tolerance story
//! rests on it.

use crate::ambient::{hamiltonian_vector_field, HamiltonianFn};
use crate::loops::{CircleDiffeo, LoopEmbedding, TangentVector, WeightKind, Weighting};
use crate::spectral::grid;
use crate::AmbientSpace;
use rand::Rng;
use std::f64::consts::PI;

/// Random trigonometric polynomial with modes 1..=max_mode, scaled so that
/// both |f| and |f'| are bounded by `amp`.
pub fn band_series(rng: &mut impl Rng, n: usize, max_mode: usize, amp: f64) -> Vec<f64> {
    let coeffs: Vec<(f64, f64)> = (0..max_mode)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let weight: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(i, (a, b))| (i + 1) as f64 * (a.abs() + b.abs()))
        .sum();
    let scale = if weight > 0.0 { amp / weight } else { 0.0 };
    grid(n)
        .into_iter()
        .map(|t| {
            coeffs
                .iter()
                .enumerate()
                .map(|(i, (a, b))| {
                    let m = (i + 1) as f64;
                    scale * (a * (m * t).cos() + b * (m * t).sin())
                })
                .sum()
        })
        .collect()
}

/// Perturbed circle in the (q_1, p_1) plane with small band-limited motion in
/// every coordinate; the perturbation budget keeps |x'| ≥ 0.5, so the result
/// is always an immersion.
pub fn random_loop(
    rng: &mut impl Rng,
    ambient: AmbientSpace,
    n: usize,
    max_mode: usize,
) -> LoopEmbedding {
    let dim = ambient.dim();
    let half = ambient.half_dim;
    let mut tracks: Vec<Vec<f64>> = (0..dim)
        .map(|_| band_series(rng, n, max_mode, 0.4 / dim as f64))
        .collect();
    for (k, t) in grid(n).into_iter().enumerate() {
        tracks[0][k] += t.cos();
        tracks[half][k] += t.sin();
    }
    let samples = (0..n)
        .map(|k| tracks.iter().map(|tr| tr[k]).collect())
        .collect();
    LoopEmbedding::from_samples(ambient, samples).expect("perturbation budget keeps immersion")
}

/// Strictly positive unit-mass density: (1 + band)/2π with |band| ≤ 0.8.
pub fn random_positive_weighting(rng: &mut impl Rng, n: usize, max_mode: usize) -> Weighting {
    let band = band_series(rng, n, max_mode, 0.8);
    let values = band.iter().map(|b| (1.0 + b) / (2.0 * PI)).collect();
    Weighting::new(WeightKind::PositiveUnitMass, values)
        .expect("band bound keeps positivity and the DC term fixes the mass")
}

/// Zero-mass weight variation (no DC component by construction).
pub fn random_variation(rng: &mut impl Rng, n: usize, max_mode: usize) -> Vec<f64> {
    band_series(rng, n, max_mode, 1.0)
}

/// Independent band-limited components; generally a non-exact direction.
pub fn random_field(rng: &mut impl Rng, dim: usize, n: usize, max_mode: usize) -> Vec<Vec<f64>> {
    let tracks: Vec<Vec<f64>> = (0..dim)
        .map(|_| band_series(rng, n, max_mode, 1.0))
        .collect();
    (0..n)
        .map(|k| tracks.iter().map(|tr| tr[k]).collect())
        .collect()
}

/// X_H ∘ i sampled along a loop.
pub fn hamiltonian_field_along(lp: &LoopEmbedding, h: &HamiltonianFn) -> Vec<Vec<f64>> {
    lp.samples()
        .iter()
        .map(|x| hamiltonian_vector_field(h, x))
        .collect()
}

/// An exact tangent together with the data that witnesses its exactness:
/// X = Σ c_j X_{H_j} ∘ i, whose pairing 1-form is d/dt Σ c_j H_j(x(t)).
pub struct ExactTangent {
    pub tangent: TangentVector,
    pub terms: Vec<(f64, HamiltonianFn)>,
}

impl ExactTangent {
    /// Primitive of α_X with h(t_0) = 0, from the generating Hamiltonians.
    pub fn analytic_primitive(&self, lp: &LoopEmbedding) -> Vec<f64> {
        let combined = |x: &[f64]| self.terms.iter().map(|(c, h)| c * h.value(x)).sum::<f64>();
        let base = combined(lp.point(0));
        lp.samples().iter().map(|x| combined(x) - base).collect()
    }
}

/// Draw k polynomial-dictionary Hamiltonians with random coefficients and a
/// random zero-mass weight variation. Polynomial entries keep α_X band-limited.
pub fn exact_tangent(
    rng: &mut impl Rng,
    lp: &LoopEmbedding,
    dict: &[HamiltonianFn],
    k_terms: usize,
    max_mode: usize,
) -> ExactTangent {
    let n = lp.n_samples();
    let dim = lp.ambient.dim();
    let mut x = vec![vec![0.0; dim]; n];
    let mut terms = Vec::with_capacity(k_terms);
    for _ in 0..k_terms {
        let h = &dict[rng.gen_range(0..dict.len())];
        let c: f64 = rng.gen_range(-1.0..1.0);
        for (k, pt) in lp.samples().iter().enumerate() {
            let xh = hamiltonian_vector_field(h, pt);
            for i in 0..dim {
                x[k][i] += c * xh[i];
            }
        }
        terms.push((c, h.clone()));
    }
    let vartheta = random_variation(rng, n, max_mode);
    ExactTangent {
        tangent: TangentVector { x, vartheta },
        terms,
    }
}

/// Gentle random circle diffeomorphism: a' ≥ 0.5 by the band budget.
pub fn random_diffeo(rng: &mut impl Rng, n: usize, max_mode: usize) -> CircleDiffeo {
    let psi = band_series(rng, n, max_mode, 0.5);
    CircleDiffeo::from_periodic_part(psi).expect("band budget keeps monotonicity")
}
