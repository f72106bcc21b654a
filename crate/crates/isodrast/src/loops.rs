//! Discretized weighted loops in R^{2n} and circle reparametrizations.
//!
//! A loop is a closed immersed curve sampled at t_k = 2πk/N; a weighting is a
//! density w(t) dt along it. Tangent data at a weighted loop is a vector
//! field X along the curve plus a weight variation ϑ of zero total mass.
//! The pairing 1-form of X is α_X(t) = ω(X(t), x'(t)); loops whose tangents
//! have exact α stay inside one leaf of the foliation by exactness classes,
//! and most structure downstream is built from primitives of α.

use crate::ambient::AmbientSpace;
use crate::error::{Error, Result};
use crate::spectral::{self, TrigSeries};
use crate::tol;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const MIN_SAMPLES: usize = 16;

/// Closed curve samples with cached spectral velocity.
#[derive(Debug, Clone)]
pub struct LoopEmbedding {
    pub ambient: AmbientSpace,
    samples: Vec<Vec<f64>>,
    velocity: Vec<Vec<f64>>,
}

impl LoopEmbedding {
    pub fn from_samples(ambient: AmbientSpace, samples: Vec<Vec<f64>>) -> Result<LoopEmbedding> {
        let n = samples.len();
        if n < MIN_SAMPLES || !n.is_multiple_of(2) {
            return Err(Error::Invariant(format!(
                "loop needs an even sample count of at least {MIN_SAMPLES}, got {n}"
            )));
        }
        let dim = ambient.dim();
        if samples.iter().any(|s| s.len() != dim) {
            return Err(Error::Invariant(format!(
                "every sample must have {dim} coordinates"
            )));
        }
        let velocity = spectral_velocity(&samples, dim);
        let min_speed = velocity
            .iter()
            .map(|v| v.iter().map(|c| c * c).sum::<f64>().sqrt())
            .fold(f64::INFINITY, f64::min);
        if min_speed < tol::IMMERSION {
            return Err(Error::Invariant(format!(
                "samples do not describe an immersion: min |x'| = {min_speed:.3e}"
            )));
        }
        Ok(LoopEmbedding {
            ambient,
            samples,
            velocity,
        })
    }

    /// Unit circle in the (q_1, p_1) plane, traversed counterclockwise.
    pub fn circle(ambient: AmbientSpace, n_samples: usize) -> LoopEmbedding {
        let n = ambient.half_dim;
        let samples = spectral::grid(n_samples)
            .into_iter()
            .map(|t| {
                let mut x = vec![0.0; 2 * n];
                x[0] = t.cos();
                x[n] = t.sin();
                x
            })
            .collect();
        LoopEmbedding::from_samples(ambient, samples).expect("circle is immersed")
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.samples[k]
    }

    /// x'(t_k), computed spectrally once at construction.
    pub fn velocity(&self, k: usize) -> &[f64] {
        &self.velocity[k]
    }

    pub fn velocities(&self) -> &[Vec<f64>] {
        &self.velocity
    }

    /// Interpolants of each coordinate track, for off-grid evaluation.
    pub fn coordinate_series(&self) -> Vec<TrigSeries> {
        let dim = self.ambient.dim();
        (0..dim)
            .map(|i| {
                let track: Vec<f64> = self.samples.iter().map(|s| s[i]).collect();
                TrigSeries::from_samples(&track)
            })
            .collect()
    }

    /// Set distance between the continuous images: dense resampling of each
    /// curve's interpolant, nearest-sample search, then local refinement in
    /// the curve parameter. Parametrization-blind.
    pub fn hausdorff_distance(&self, other: &LoopEmbedding) -> f64 {
        let m = 16 * self.n_samples().max(other.n_samples());
        let sa = self.coordinate_series();
        let sb = other.coordinate_series();
        directed_curve_distance(&sa, &sb, m).max(directed_curve_distance(&sb, &sa, m))
    }
}

fn eval_series(series: &[TrigSeries], t: f64) -> Vec<f64> {
    series.iter().map(|c| c.eval(t)).collect()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

fn directed_curve_distance(from: &[TrigSeries], to: &[TrigSeries], m: usize) -> f64 {
    let params = spectral::grid(m);
    let to_pts: Vec<Vec<f64>> = params.iter().map(|&t| eval_series(to, t)).collect();
    let h = 2.0 * PI / m as f64;
    let mut worst: f64 = 0.0;
    for &t in &params {
        let y = eval_series(from, t);
        let mut best_j = 0;
        let mut best = f64::INFINITY;
        for (j, p) in to_pts.iter().enumerate() {
            let d = dist2(p, &y);
            if d < best {
                best = d;
                best_j = j;
            }
        }
        // golden-section refinement of the squared distance in the parameter
        let (mut lo, mut hi) = (params[best_j] - h, params[best_j] + h);
        let phi = 0.5 * (5.0f64.sqrt() - 1.0);
        let mut x1 = hi - phi * (hi - lo);
        let mut x2 = lo + phi * (hi - lo);
        let mut f1 = dist2(&eval_series(to, x1), &y);
        let mut f2 = dist2(&eval_series(to, x2), &y);
        for _ in 0..48 {
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = dist2(&eval_series(to, x1), &y);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = dist2(&eval_series(to, x2), &y);
            }
        }
        worst = worst.max(best.min(f1).min(f2).sqrt());
    }
    worst
}

fn spectral_velocity(samples: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let n = samples.len();
    let mut velocity = vec![vec![0.0; dim]; n];
    for i in 0..dim {
        let track: Vec<f64> = samples.iter().map(|s| s[i]).collect();
        let d = spectral::spectral_derivative(&track);
        for k in 0..n {
            velocity[k][i] = d[k];
        }
    }
    velocity
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    UnitMass,
    ZeroMass,
    PositiveUnitMass,
}

/// Density w(t) dt along a loop, sampled on the same grid.
#[derive(Debug, Clone)]
pub struct Weighting {
    pub kind: WeightKind,
    pub values: Vec<f64>,
}

impl Weighting {
    pub fn new(kind: WeightKind, values: Vec<f64>) -> Result<Weighting> {
        let mass = spectral::quadrature(&values);
        match kind {
            WeightKind::UnitMass | WeightKind::PositiveUnitMass => {
                if (mass - 1.0).abs() > tol::WEIGHT_MASS {
                    return Err(Error::Invariant(format!(
                        "unit-mass weighting has mass {mass:.12}"
                    )));
                }
            }
            WeightKind::ZeroMass => {
                if mass.abs() > tol::WEIGHT_MASS {
                    return Err(Error::Invariant(format!(
                        "zero-mass weighting has mass {mass:.3e}"
                    )));
                }
            }
        }
        if kind == WeightKind::PositiveUnitMass {
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            if min <= 0.0 {
                return Err(Error::Positivity { min });
            }
        }
        Ok(Weighting { kind, values })
    }

    /// Skips the mass gate: reparametrization preserves mass only up to
    /// spectral truncation of the composed density.
    fn from_raw(kind: WeightKind, values: Vec<f64>) -> Weighting {
        Weighting { kind, values }
    }

    /// w ≡ 1/(2π), the Moser normal form.
    pub fn uniform(n_samples: usize) -> Weighting {
        Weighting {
            kind: WeightKind::PositiveUnitMass,
            values: vec![0.5 / PI; n_samples],
        }
    }

    /// w(t) = (1 + cos t)/(2π): unit mass, nonnegative, vanishing at t = π.
    pub fn cosine_bump(n_samples: usize) -> Weighting {
        let values = spectral::grid(n_samples)
            .into_iter()
            .map(|t| (1.0 + t.cos()) / (2.0 * PI))
            .collect();
        Weighting {
            kind: WeightKind::UnitMass,
            values,
        }
    }

    pub fn mass(&self) -> f64 {
        spectral::quadrature(&self.values)
    }
}

/// Tangent data (X, ϑ) at a weighted loop: a field along the curve and a
/// mass-preserving weight variation.
#[derive(Debug, Clone)]
pub struct TangentVector {
    pub x: Vec<Vec<f64>>,
    pub vartheta: Vec<f64>,
}

impl TangentVector {
    pub fn new(x: Vec<Vec<f64>>, vartheta: Vec<f64>) -> Result<TangentVector> {
        if x.len() != vartheta.len() {
            return Err(Error::Invariant(
                "field and weight variation must share the sample grid".into(),
            ));
        }
        let mass = spectral::quadrature(&vartheta);
        if mass.abs() > tol::WEIGHT_MASS {
            return Err(Error::Invariant(format!(
                "weight variation must have zero mass, got {mass:.3e}"
            )));
        }
        Ok(TangentVector { x, vartheta })
    }

    pub fn zero_weight(x: Vec<Vec<f64>>) -> TangentVector {
        let n = x.len();
        TangentVector {
            x,
            vartheta: vec![0.0; n],
        }
    }

    pub fn zero(n_samples: usize, dim: usize) -> TangentVector {
        TangentVector {
            x: vec![vec![0.0; dim]; n_samples],
            vartheta: vec![0.0; n_samples],
        }
    }
}

/// Scalar 1-form α(t) dt on the circle, sampled on the grid.
#[derive(Debug, Clone)]
pub struct OneFormOnCircle {
    pub values: Vec<f64>,
}

/// α_X(t_k) = ω(X(t_k), x'(t_k)): the 1-form a field X induces along a loop.
pub fn alpha_of(lp: &LoopEmbedding, x: &[Vec<f64>]) -> OneFormOnCircle {
    let values = x
        .iter()
        .zip(lp.velocities())
        .map(|(xi, v)| lp.ambient.omega(xi, v))
        .collect();
    OneFormOnCircle { values }
}

/// Primitive h of α with h(t_0) = 0, plus the period residual |∮ α dt|.
/// When the residual is nonzero, h is the primitive of the mean-removed part.
pub fn primitive_of(alpha: &OneFormOnCircle) -> (Vec<f64>, f64) {
    let residual = spectral::quadrature(&alpha.values).abs();
    let p = spectral::mean_removed_antiderivative(&alpha.values);
    let p0 = p[0];
    (p.into_iter().map(|v| v - p0).collect(), residual)
}

/// Gated version of `primitive_of`; rejects 1-forms with a period above `gate`.
pub fn primitive_checked(alpha: &OneFormOnCircle, gate: f64) -> Result<Vec<f64>> {
    let (h, residual) = primitive_of(alpha);
    if residual > gate {
        return Err(Error::Exactness { residual, gate });
    }
    Ok(h)
}

/// Orientation-preserving diffeomorphism of the circle, a(t) = t + ψ(t) with
/// periodic ψ and a' > 0 on the grid.
#[derive(Debug, Clone)]
pub struct CircleDiffeo {
    psi: TrigSeries,
    psi_samples: Vec<f64>,
    /// index shift when a is exactly a grid rotation, for the exact path
    grid_shift: Option<usize>,
}

impl CircleDiffeo {
    /// Build from grid samples of a(t) - t.
    pub fn from_periodic_part(psi_samples: Vec<f64>) -> Result<CircleDiffeo> {
        let n = psi_samples.len();
        let psi = TrigSeries::from_samples(&psi_samples);
        let deriv = spectral::spectral_derivative(&psi_samples);
        let min_slope = deriv.iter().map(|d| 1.0 + d).fold(f64::INFINITY, f64::min);
        // non-strict: a' may touch zero at isolated points (inversion falls
        // back to bisection there), but a negative slope is not a circle map;
        // the margin absorbs spectral-derivative roundoff at touching points
        if min_slope < -1e-12 {
            return Err(Error::Invariant(format!(
                "circle map is not monotone: min a' = {min_slope:.3e}"
            )));
        }
        let grid_shift = detect_grid_rotation(&psi_samples, n);
        Ok(CircleDiffeo {
            psi,
            psi_samples,
            grid_shift,
        })
    }

    /// a(t) = t + c.
    pub fn rotation(c: f64, n_samples: usize) -> CircleDiffeo {
        CircleDiffeo::from_periodic_part(vec![c; n_samples]).expect("rotations are monotone")
    }

    pub fn n_samples(&self) -> usize {
        self.psi_samples.len()
    }

    pub fn eval(&self, t: f64) -> f64 {
        t + self.psi.eval(t)
    }

    pub fn deriv(&self, t: f64) -> f64 {
        1.0 + self.psi.deriv_eval(t)
    }

    /// Index j when a is the grid rotation t ↦ t + 2πj/N to roundoff.
    pub fn grid_shift(&self) -> Option<usize> {
        self.grid_shift
    }

    /// Solve a(t) = s by safeguarded Newton; a is strictly increasing, so the
    /// root is unique modulo 2π.
    pub fn eval_inverse(&self, s: f64) -> f64 {
        let bound = self.psi_samples.iter().fold(0.0f64, |m, &v| m.max(v.abs())) + 0.5;
        let (mut lo, mut hi) = (s - bound, s + bound);
        let mut t = s - self.psi.eval(s);
        for _ in 0..200 {
            let f = self.eval(t) - s;
            if f.abs() < tol::NEWTON_PARAM {
                return t;
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let slope = self.deriv(t);
            let newton = t - f / slope;
            t = if slope > 1e-6 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        t
    }
}

fn detect_grid_rotation(psi_samples: &[f64], n: usize) -> Option<usize> {
    let c = psi_samples[0];
    if psi_samples.iter().any(|&v| (v - c).abs() > 1e-14) {
        return None;
    }
    let step = 2.0 * PI / n as f64;
    let j = (c / step).round();
    if (c - j * step).abs() < 1e-14 * (1.0 + c.abs()) {
        Some((j as i64).rem_euclid(n as i64) as usize)
    } else {
        None
    }
}

/// Pull a weighted loop back along a: (i, w dt) ↦ (i ∘ a⁻¹, (a⁻¹)*(w dt)).
/// Grid rotations take the exact cyclic-shift path; everything else goes
/// through trigonometric interpolation.
pub fn reparametrize(
    lp: &LoopEmbedding,
    w: &Weighting,
    a: &CircleDiffeo,
) -> Result<(LoopEmbedding, Weighting)> {
    let n = lp.n_samples();
    if a.n_samples() != n {
        return Err(Error::Invariant(
            "circle map and loop must share the sample grid".into(),
        ));
    }
    if let Some(j) = a.grid_shift() {
        // i ∘ a⁻¹ (t_k) = i(t_{k-j}): pure reindexing, bitwise exact
        let samples = (0..n).map(|k| lp.point((k + n - j) % n).to_vec()).collect();
        let values = (0..n).map(|k| w.values[(k + n - j) % n]).collect();
        return Ok((
            LoopEmbedding::from_samples(lp.ambient, samples)?,
            Weighting::from_raw(w.kind, values),
        ));
    }
    let series = lp.coordinate_series();
    let w_series = TrigSeries::from_samples(&w.values);
    let mut samples = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for s in spectral::grid(n) {
        let t = a.eval_inverse(s);
        samples.push(series.iter().map(|c| c.eval(t)).collect());
        values.push(w_series.eval(t) / a.deriv(t));
    }
    Ok((
        LoopEmbedding::from_samples(lp.ambient, samples)?,
        Weighting::from_raw(w.kind, values),
    ))
}

/// Push tangent data along the same reparametrization: X transforms as a
/// field along the curve, ϑ as a density.
pub fn reparametrize_tangent(tv: &TangentVector, a: &CircleDiffeo) -> TangentVector {
    let n = tv.vartheta.len();
    if let Some(j) = a.grid_shift() {
        let x = (0..n).map(|k| tv.x[(k + n - j) % n].clone()).collect();
        let vartheta = (0..n).map(|k| tv.vartheta[(k + n - j) % n]).collect();
        return TangentVector { x, vartheta };
    }
    let dim = tv.x[0].len();
    let x_series: Vec<TrigSeries> = (0..dim)
        .map(|i| TrigSeries::from_samples(&tv.x.iter().map(|row| row[i]).collect::<Vec<_>>()))
        .collect();
    let th_series = TrigSeries::from_samples(&tv.vartheta);
    let mut x = Vec::with_capacity(n);
    let mut vartheta = Vec::with_capacity(n);
    for s in spectral::grid(n) {
        let t = a.eval_inverse(s);
        x.push(x_series.iter().map(|c| c.eval(t)).collect());
        vartheta.push(th_series.eval(t) / a.deriv(t));
    }
    TangentVector { x, vartheta }
}

/// Normalize a positively weighted loop to the uniform density 1/(2π) by the
/// unique reparametrization a with a' = 2π w and a(0) = 0. Returns the
/// normalized pair and the map a used.
pub fn moser_normalize(
    lp: &LoopEmbedding,
    w: &Weighting,
) -> Result<(LoopEmbedding, Weighting, CircleDiffeo)> {
    let min = w.values.iter().copied().fold(f64::INFINITY, f64::min);
    // isolated zeros are fine (a stays monotone and invertible by bisection);
    // genuinely negative density is not a reparametrization of anything
    if min < 0.0 {
        return Err(Error::Positivity { min });
    }
    let mass = w.mass();
    if (mass - 1.0).abs() > tol::WEIGHT_MASS {
        return Err(Error::Invariant(format!(
            "normalization needs unit mass, got {mass:.12}"
        )));
    }
    let n = lp.n_samples();
    // ψ = 2π P with P' = w - 1/(2π), pinned so a(0) = 0
    let p = spectral::mean_removed_antiderivative(&w.values);
    let psi: Vec<f64> = p.iter().map(|v| 2.0 * PI * (v - p[0])).collect();
    let a = CircleDiffeo::from_periodic_part(psi)?;
    let (new_loop, _) = reparametrize(lp, w, &a)?;
    // (a⁻¹)*(w dt) = dt/(2π) identically; write it down rather than divide
    Ok((new_loop, Weighting::uniform(n), a))
}

/// Pushforward of tangent data (X, ϑ) at (i, w) under the normalization map
/// (i, w) ↦ i ∘ a_w⁻¹: since a depends on w, the weight variation feeds back
/// into the field as a tangential correction,
///
///   X̃ = (X - x'·P_ϑ/w) ∘ a⁻¹,   P_ϑ(t) = ∫₀ᵗ ϑ.
///
/// The result represents the class of (X, ϑ) on the normalized loop.
pub fn moser_pushforward(
    lp: &LoopEmbedding,
    w: &Weighting,
    tv: &TangentVector,
    a: &CircleDiffeo,
) -> Vec<Vec<f64>> {
    let p = spectral::mean_removed_antiderivative(&tv.vartheta);
    let p0 = p[0];
    let corrected: Vec<Vec<f64>> = lp
        .velocities()
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let c = (p[k] - p0) / w.values[k];
            tv.x[k].iter().zip(v).map(|(xi, vi)| xi - c * vi).collect()
        })
        .collect();
    reparametrize_tangent(&TangentVector::zero_weight(corrected), a).x
}

/// Split a field along a planar loop into normal and tangential parts,
/// X = λ Jx' + c x'. Only defined for half_dim = 1, where {Jx', x'} frames
/// the plane at every point of an immersion.
pub fn normal_tangential_split(lp: &LoopEmbedding, x: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    if lp.ambient.half_dim != 1 {
        return Err(Error::Invariant(
            "normal/tangential split requires a planar loop".into(),
        ));
    }
    let mut lambda = Vec::with_capacity(x.len());
    let mut c = Vec::with_capacity(x.len());
    for (xi, v) in x.iter().zip(lp.velocities()) {
        let jv = lp.ambient.j_apply(v);
        let speed2: f64 = v.iter().map(|a| a * a).sum();
        lambda.push((xi[0] * jv[0] + xi[1] * jv[1]) / speed2);
        c.push((xi[0] * v[0] + xi[1] * v[1]) / speed2);
    }
    Ok((lambda, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{grid, quadrature};

    fn amb() -> AmbientSpace {
        AmbientSpace::new(1)
    }

    #[test]
    fn rejects_odd_or_short_grids_and_non_immersions() {
        let bad = LoopEmbedding::from_samples(amb(), vec![vec![0.0, 0.0]; 15]);
        assert!(matches!(bad, Err(Error::Invariant(_))));
        let constant = LoopEmbedding::from_samples(amb(), vec![vec![1.0, 2.0]; 32]);
        assert!(matches!(constant, Err(Error::Invariant(_))));
    }

    #[test]
    fn alpha_of_constant_downward_field_on_circle() {
        // X_H for H = q is (0, -1); against x' = (-sin, cos) this gives -sin t
        let lp = LoopEmbedding::circle(amb(), 64);
        let x = vec![vec![0.0, -1.0]; 64];
        let alpha = alpha_of(&lp, &x);
        for (k, t) in grid(64).into_iter().enumerate() {
            assert!((alpha.values[k] + t.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn alpha_of_tangential_field_vanishes() {
        let lp = LoopEmbedding::circle(amb(), 32);
        let x: Vec<Vec<f64>> = lp.velocities().to_vec();
        let alpha = alpha_of(&lp, &x);
        assert!(alpha.values.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn primitive_pins_base_point_and_reports_period() {
        let n = 64;
        let alpha = OneFormOnCircle {
            values: grid(n).into_iter().map(|t| -t.sin()).collect(),
        };
        let (h, residual) = primitive_of(&alpha);
        assert!(residual < 1e-14);
        for (k, t) in grid(n).into_iter().enumerate() {
            assert!((h[k] - (t.cos() - 1.0)).abs() < 1e-12);
        }

        let ones = OneFormOnCircle {
            values: vec![1.0; n],
        };
        let (h1, r1) = primitive_of(&ones);
        assert!((r1 - 2.0 * PI).abs() < 1e-12);
        assert!(h1.iter().all(|v| v.abs() < 1e-13));
        assert!(matches!(
            primitive_checked(&ones, tol::EXACTNESS_GATE),
            Err(Error::Exactness { .. })
        ));
    }

    #[test]
    fn moser_of_cosine_bump_is_t_plus_sin_t() {
        let n = 128;
        let lp = LoopEmbedding::circle(amb(), n);
        let w = Weighting::cosine_bump(n);
        let (normalized, wu, a) = moser_normalize(&lp, &w).unwrap();
        for t in grid(n) {
            assert!((a.eval(t) - (t + t.sin())).abs() < 1e-12);
        }
        assert!(wu.values.iter().all(|&v| v == 0.5 / PI));
        // every resampled point still sits on the unit circle
        for k in 0..n {
            let p = normalized.point(k);
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!((r - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn moser_is_identity_on_already_uniform_weightings() {
        let n = 64;
        let lp = LoopEmbedding::circle(amb(), n);
        let (normalized, _, a) = moser_normalize(&lp, &Weighting::uniform(n)).unwrap();
        assert_eq!(a.grid_shift(), Some(0));
        for k in 0..n {
            assert_eq!(normalized.point(k), lp.point(k));
        }
    }

    #[test]
    fn grid_rotation_reparametrizes_by_cyclic_shift() {
        let n = 32;
        let lp = LoopEmbedding::circle(amb(), n);
        let mut w = Weighting::cosine_bump(n);
        w.values[3] += 0.0; // keep as-is; only the shift matters
        let a = CircleDiffeo::rotation(2.0 * PI / n as f64, n);
        assert_eq!(a.grid_shift(), Some(1));
        let (shifted, ws) = reparametrize(&lp, &w, &a).unwrap();
        for k in 0..n {
            assert_eq!(shifted.point(k), lp.point((k + n - 1) % n));
            assert_eq!(ws.values[k], w.values[(k + n - 1) % n]);
        }
    }

    #[test]
    fn smooth_reparametrization_preserves_mass_spectrally() {
        let n = 128;
        let lp = LoopEmbedding::circle(amb(), n);
        let w = Weighting::cosine_bump(n);
        let psi: Vec<f64> = grid(n)
            .into_iter()
            .map(|t| 0.15 * (2.0 * t).sin())
            .collect();
        let a = CircleDiffeo::from_periodic_part(psi).unwrap();
        let (lp2, w2) = reparametrize(&lp, &w, &a).unwrap();
        assert!((w2.mass() - 1.0).abs() < 1e-10);
        assert!(lp2.hausdorff_distance(&lp) < 1e-6);
    }

    #[test]
    fn inverse_round_trip_hits_newton_gate() {
        let n = 64;
        let psi: Vec<f64> = grid(n)
            .into_iter()
            .map(|t| 0.3 * t.sin() - 0.1 * (3.0 * t).cos())
            .collect();
        let a = CircleDiffeo::from_periodic_part(psi).unwrap();
        for t in grid(n) {
            let s = a.eval(t);
            assert!((a.eval(a.eval_inverse(s)) - s).abs() < 1e-11);
        }
    }

    #[test]
    fn non_monotone_periodic_part_is_rejected() {
        let n = 32;
        let psi: Vec<f64> = grid(n).into_iter().map(|t| 1.5 * t.sin()).collect();
        assert!(matches!(
            CircleDiffeo::from_periodic_part(psi),
            Err(Error::Invariant(_))
        ));
    }

    #[test]
    fn split_reassembles_the_field() {
        let n = 64;
        let lp = LoopEmbedding::circle(amb(), n);
        let x: Vec<Vec<f64>> = grid(n)
            .into_iter()
            .map(|t| vec![0.7 * (2.0 * t).cos() - 0.2, 0.4 * t.sin() + 0.1])
            .collect();
        let (lambda, c) = normal_tangential_split(&lp, &x).unwrap();
        for k in 0..n {
            let v = lp.velocity(k);
            let jv = lp.ambient.j_apply(v);
            for i in 0..2 {
                let re = lambda[k] * jv[i] + c[k] * v[i];
                assert!((re - x[k][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn alpha_ignores_tangential_shifts() {
        let n = 64;
        let lp = LoopEmbedding::circle(amb(), n);
        let x: Vec<Vec<f64>> = grid(n)
            .into_iter()
            .map(|t| vec![t.sin(), (2.0 * t).cos()])
            .collect();
        let shifted: Vec<Vec<f64>> = x
            .iter()
            .zip(lp.velocities())
            .enumerate()
            .map(|(k, (xi, v))| {
                let y = 0.3 * (grid(n)[k]).cos();
                vec![xi[0] + y * v[0], xi[1] + y * v[1]]
            })
            .collect();
        let a1 = alpha_of(&lp, &x);
        let a2 = alpha_of(&lp, &shifted);
        for k in 0..n {
            assert!((a1.values[k] - a2.values[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn weighting_gates_mass_and_positivity() {
        let n = 32;
        assert!(Weighting::new(WeightKind::UnitMass, vec![0.5 / PI; n]).is_ok());
        assert!(matches!(
            Weighting::new(WeightKind::UnitMass, vec![1.0; n]),
            Err(Error::Invariant(_))
        ));
        let mut one_negative = vec![0.5 / PI; n];
        one_negative[0] = -0.5 / PI;
        one_negative[1] = 1.5 / PI;
        assert!(matches!(
            Weighting::new(WeightKind::PositiveUnitMass, one_negative),
            Err(Error::Positivity { .. })
        ));
        let zero = Weighting::new(
            WeightKind::ZeroMass,
            grid(n).iter().map(|t| t.sin()).collect(),
        );
        assert!(zero.is_ok());
    }

    #[test]
    fn tangent_vector_requires_zero_mass_variation() {
        let n = 32;
        let x = vec![vec![0.0, 0.0]; n];
        assert!(TangentVector::new(x.clone(), vec![1.0; n]).is_err());
        let theta: Vec<f64> = grid(n).into_iter().map(|t| t.cos()).collect();
        assert!(TangentVector::new(x, theta).is_ok());
    }

    #[test]
    fn moser_positivity_failure_reports_min() {
        let n = 64;
        let lp = LoopEmbedding::circle(amb(), n);
        // unit mass but dips below zero near t = π
        let values: Vec<f64> = grid(n)
            .into_iter()
            .map(|t| (1.0 + 1.2 * t.cos()) / (2.0 * PI))
            .collect();
        let w = Weighting::new(WeightKind::UnitMass, values).unwrap();
        match moser_normalize(&lp, &w) {
            Err(Error::Positivity { min }) => assert!(min < 0.0),
            other => panic!("expected positivity error, got {other:?}"),
        }
    }

    #[test]
    fn quadrature_mass_convention() {
        assert!((Weighting::uniform(48).mass() - 1.0).abs() < 1e-15);
        let w = Weighting::cosine_bump(48);
        assert!((quadrature(&w.values) - 1.0).abs() < 1e-14);
    }
}
