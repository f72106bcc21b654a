//! Hamiltonian dynamics of loops: point flows, variational (tangent) flows,
//! action integrals, and the exactness test for foliation membership.

use crate::ambient::{hamiltonian_vector_field, HamiltonianFn};
use crate::error::{Error, Result};
use crate::loops::{alpha_of, LoopEmbedding};
use crate::spectral::quadrature;
use rayon::prelude::*;

/// Velocity field driving a loop flow.
pub enum FlowField {
    Hamiltonian(HamiltonianFn),
    /// Knots (time, H) with the field interpolated linearly between them and
    /// clamped outside; adequate for desk-scale time-dependent families.
    TimeDependent(Vec<(f64, HamiltonianFn)>),
    /// ẋ = x. Not Hamiltonian; serves as the negative control that leaves
    /// the foliation.
    Radial,
}

impl FlowField {
    pub fn velocity(&self, t: f64, x: &[f64]) -> Vec<f64> {
        match self {
            FlowField::Hamiltonian(h) => hamiltonian_vector_field(h, x),
            FlowField::TimeDependent(knots) => {
                if knots.len() == 1 || t <= knots[0].0 {
                    return hamiltonian_vector_field(&knots[0].1, x);
                }
                let last = knots.len() - 1;
                if t >= knots[last].0 {
                    return hamiltonian_vector_field(&knots[last].1, x);
                }
                let i = knots.partition_point(|(tk, _)| *tk <= t) - 1;
                let (t0, h0) = &knots[i];
                let (t1, h1) = &knots[i + 1];
                let u = (t - t0) / (t1 - t0);
                let v0 = hamiltonian_vector_field(h0, x);
                let v1 = hamiltonian_vector_field(h1, x);
                v0.iter()
                    .zip(&v1)
                    .map(|(a, b)| (1.0 - u) * a + u * b)
                    .collect()
            }
            FlowField::Radial => x.to_vec(),
        }
    }

    pub fn is_hamiltonian(&self) -> bool {
        !matches!(self, FlowField::Radial)
    }
}

fn rk4_step(field: &FlowField, t: f64, h: f64, x: &[f64]) -> Vec<f64> {
    let add = |x: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        x.iter().zip(k).map(|(a, b)| a + s * b).collect()
    };
    let k1 = field.velocity(t, x);
    let k2 = field.velocity(t + 0.5 * h, &add(x, &k1, 0.5 * h));
    let k3 = field.velocity(t + 0.5 * h, &add(x, &k2, 0.5 * h));
    let k4 = field.velocity(t + h, &add(x, &k3, h));
    (0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Advance every sample point of a loop by classic fourth-order one-step
/// integration. The returned trajectory has steps+1 entries, the first being
/// the input loop. Points are independent, so the integration parallelizes
/// without affecting the result.
pub fn flow_loop(
    lp: &LoopEmbedding,
    field: &FlowField,
    t_final: f64,
    steps: usize,
) -> Result<Vec<LoopEmbedding>> {
    if steps == 0 {
        return Err(Error::Invariant("flow needs at least one step".into()));
    }
    let h = t_final / steps as f64;
    let paths: Vec<Vec<Vec<f64>>> = lp
        .samples()
        .par_iter()
        .map(|start| {
            let mut path = Vec::with_capacity(steps + 1);
            let mut x = start.clone();
            path.push(x.clone());
            for s in 0..steps {
                x = rk4_step(field, s as f64 * h, h, &x);
                path.push(x.clone());
            }
            path
        })
        .collect();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(lp.clone());
    for s in 1..=steps {
        let samples = paths.iter().map(|p| p[s].clone()).collect();
        out.push(LoopEmbedding::from_samples(lp.ambient, samples)?);
    }
    Ok(out)
}

/// The linearized flow matrix dX_H(x): for X_H = (H_p, -H_q) this is
/// S·Hess H with S(a, b) = (b, -a).
fn variational_matrix(h: &HamiltonianFn, x: &[f64]) -> Vec<Vec<f64>> {
    let hess = h.hessian(x);
    let n = x.len() / 2;
    let mut a = vec![vec![0.0; 2 * n]; 2 * n];
    for j in 0..2 * n {
        for i in 0..n {
            a[i][j] = hess[n + i][j];
            a[n + i][j] = -hess[i][j];
        }
    }
    a
}

/// Flow the loop and transport tangent fields along it by the variational
/// equation Ẏ = dX_H(x)·Y, integrated jointly with the base points. Returns
/// the loop trajectory and the fields at the final time.
#[allow(clippy::type_complexity)]
pub fn flow_loop_with_tangents(
    lp: &LoopEmbedding,
    fields: &[Vec<Vec<f64>>],
    h_fn: &HamiltonianFn,
    t_final: f64,
    steps: usize,
) -> Result<(Vec<LoopEmbedding>, Vec<Vec<Vec<f64>>>)> {
    if steps == 0 {
        return Err(Error::Invariant("flow needs at least one step".into()));
    }
    let dim = lp.ambient.dim();
    let m = fields.len();
    let h = t_final / steps as f64;
    let n_pts = lp.n_samples();

    struct PointResult {
        path: Vec<Vec<f64>>,
        finals: Vec<Vec<f64>>,
    }

    let per_point: Vec<PointResult> = (0..n_pts)
        .into_par_iter()
        .map(|k| {
            let mut x = lp.point(k).to_vec();
            let mut ys: Vec<Vec<f64>> = fields.iter().map(|f| f[k].clone()).collect();
            let mut path = Vec::with_capacity(steps + 1);
            path.push(x.clone());
            let apply = |mat: &[Vec<f64>], v: &[f64]| -> Vec<f64> {
                mat.iter()
                    .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
                    .collect()
            };
            for _ in 0..steps {
                // joint RK4 on (x, Y_1..Y_m)
                let stage = |xs: &Vec<f64>, yss: &Vec<Vec<f64>>| {
                    let vx = hamiltonian_vector_field(h_fn, xs);
                    let a = variational_matrix(h_fn, xs);
                    let vy: Vec<Vec<f64>> = yss.iter().map(|y| apply(&a, y)).collect();
                    (vx, vy)
                };
                let shift = |base_x: &Vec<f64>,
                             base_y: &Vec<Vec<f64>>,
                             kx: &Vec<f64>,
                             ky: &Vec<Vec<f64>>,
                             s: f64| {
                    let nx: Vec<f64> = base_x.iter().zip(kx).map(|(a, b)| a + s * b).collect();
                    let ny: Vec<Vec<f64>> = base_y
                        .iter()
                        .zip(ky)
                        .map(|(row, krow)| row.iter().zip(krow).map(|(a, b)| a + s * b).collect())
                        .collect();
                    (nx, ny)
                };
                let (k1x, k1y) = stage(&x, &ys);
                let (x2, y2) = shift(&x, &ys, &k1x, &k1y, 0.5 * h);
                let (k2x, k2y) = stage(&x2, &y2);
                let (x3, y3) = shift(&x, &ys, &k2x, &k2y, 0.5 * h);
                let (k3x, k3y) = stage(&x3, &y3);
                let (x4, y4) = shift(&x, &ys, &k3x, &k3y, h);
                let (k4x, k4y) = stage(&x4, &y4);
                for i in 0..dim {
                    x[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
                }
                for j in 0..m {
                    for i in 0..dim {
                        ys[j][i] +=
                            h / 6.0 * (k1y[j][i] + 2.0 * k2y[j][i] + 2.0 * k3y[j][i] + k4y[j][i]);
                    }
                }
                path.push(x.clone());
            }
            PointResult { path, finals: ys }
        })
        .collect();

    let mut traj = Vec::with_capacity(steps + 1);
    for s in 0..=steps {
        let samples = per_point.iter().map(|p| p.path[s].clone()).collect();
        traj.push(LoopEmbedding::from_samples(lp.ambient, samples)?);
    }
    let finals = (0..m)
        .map(|j| per_point.iter().map(|p| p.finals[j].clone()).collect())
        .collect();
    Ok((traj, finals))
}

/// A(i) = ∮ Σ_k p_k q_k' dt, the integral of the tautological form along
/// the loop.
pub fn action_integral(lp: &LoopEmbedding) -> f64 {
    let vals: Vec<f64> = lp
        .samples()
        .iter()
        .zip(lp.velocities())
        .map(|(x, v)| lp.ambient.beta(x, v))
        .collect();
    quadrature(&vals)
}

/// max_t |A(i_t) - A(i_0)| along a trajectory; vanishes (to integrator
/// accuracy) exactly when the deformation stays inside one leaf.
pub fn isodrast_drift(trajectory: &[LoopEmbedding]) -> f64 {
    let a0 = action_integral(&trajectory[0]);
    trajectory
        .iter()
        .map(|lp| (action_integral(lp) - a0).abs())
        .fold(0.0, f64::max)
}

/// |∮ α_X dt|: zero exactly for fields tangent to the foliation.
pub fn exactness_residual(lp: &LoopEmbedding, x: &[Vec<f64>]) -> f64 {
    quadrature(&alpha_of(lp, x).values).abs()
}
