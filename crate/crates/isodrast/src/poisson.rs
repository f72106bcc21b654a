//! Integral functionals on the space of loop embeddings and their Poisson
//! algebra: F(i) = A(∮ h₁(i) η₀, …, ∮ h_m(i) η₀) with a smooth outer map A,
//! the Hamiltonian field v_F = Σ_j ∂A/∂y_j · X_{h_j} ∘ i, and the bracket
//! {F, G} = −Ω^D(v_F, v_G).
//!
//! Evaluation descends to unparametrized weighted loops when η₀ is uniform
//! (rigid rotations leave the quadratures unchanged), and every v_F is an
//! exact field, so Hamiltonian flows of functionals stay on isodrasts.
//!
//! The field v_F is not the only field satisfying the defining property:
//! adding any multiple of the loop velocity changes nothing that the
//! functionals can see. The formula fixes the representative built purely
//! from the ambient Hamiltonian fields of the integrands.

use crate::ambient::HamiltonianFn;
use crate::band::hamiltonian_field_along;
use crate::error::{Error, Result};
use crate::expr::{self, Expr, OuterVars};
use crate::fd;
use crate::loops::{LoopEmbedding, TangentVector, WeightKind, Weighting};
use crate::pairings::omega_donaldson;
use crate::spectral::quadrature;

/// Fixed background density against which the inner integrals are taken.
#[derive(Clone, Debug, PartialEq)]
pub enum ReferenceWeighting {
    Uniform,
    Samples(Vec<f64>),
}

impl ReferenceWeighting {
    fn realize(&self, n: usize) -> Result<Weighting> {
        match self {
            ReferenceWeighting::Uniform => Ok(Weighting::uniform(n)),
            ReferenceWeighting::Samples(v) => {
                if v.len() != n {
                    return Err(Error::Config(format!(
                        "reference weighting has {} samples, loop has {n}",
                        v.len()
                    )));
                }
                Weighting::new(WeightKind::PositiveUnitMass, v.clone())
            }
        }
    }
}

/// F(i) = A(y₁(i), …, y_m(i)) with y_j(i) = ∮ h_j(i(t)) η₀.
#[derive(Clone)]
pub struct IntegralFunctional {
    pub name: String,
    outer: Expr,
    grad: Vec<Expr>,
    pub inner: Vec<HamiltonianFn>,
    pub eta0: ReferenceWeighting,
}

impl IntegralFunctional {
    /// Parses the outer map over variables y1..ym (bare `y` when m = 1),
    /// takes its gradient symbolically, and spot-checks the gradient by
    /// central differences at a few deterministic points.
    pub fn new(name: &str, outer_src: &str, inner: Vec<HamiltonianFn>) -> Result<Self> {
        if inner.is_empty() {
            return Err(Error::Config(format!(
                "functional {name} needs at least one integrand"
            )));
        }
        let dim = inner[0].dim();
        if inner.iter().any(|h| h.dim() != dim) {
            return Err(Error::Config(format!(
                "functional {name}: integrands live in different ambient spaces"
            )));
        }
        let m = inner.len();
        let outer = expr::parse(outer_src, &OuterVars { arity: m })?;
        Self::from_parts(name, outer, inner)
    }

    fn from_parts(name: &str, outer: Expr, inner: Vec<HamiltonianFn>) -> Result<Self> {
        let m = inner.len();
        let grad = outer.gradient(m);
        let f = IntegralFunctional {
            name: name.to_string(),
            outer,
            grad,
            inner,
            eta0: ReferenceWeighting::Uniform,
        };
        f.check_gradient()?;
        Ok(f)
    }

    fn check_gradient(&self) -> Result<()> {
        let m = self.arity();
        for trial in 0..3 {
            let y: Vec<f64> = (0..m)
                .map(|j| 0.3 + 0.17 * j as f64 - 0.4 * trial as f64)
                .collect();
            for j in 0..m {
                let fd_val = fd::central_diff(
                    |s| {
                        let mut yy = y.clone();
                        yy[j] = s;
                        self.outer.eval(&yy)
                    },
                    y[j],
                    1e-5,
                );
                let sym = self.grad[j].eval(&y);
                if (fd_val - sym).abs() > 1e-5 * (1.0 + sym.abs()) {
                    return Err(Error::Invariant(format!(
                        "outer gradient of {} fails a finite-difference check (component {j})",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn arity(&self) -> usize {
        self.inner.len()
    }

    pub fn half_dim(&self) -> usize {
        self.inner[0].dim() / 2
    }

    /// The vector of inner integrals y(i).
    pub fn integrals(&self, lp: &LoopEmbedding) -> Result<Vec<f64>> {
        let eta = self.eta0.realize(lp.n_samples())?;
        Ok(self
            .inner
            .iter()
            .map(|h| {
                let vals: Vec<f64> = lp
                    .samples()
                    .iter()
                    .zip(&eta.values)
                    .map(|(x, wk)| h.value(x) * wk)
                    .collect();
                quadrature(&vals)
            })
            .collect())
    }
}

pub fn eval_functional(f: &IntegralFunctional, lp: &LoopEmbedding) -> Result<f64> {
    Ok(f.outer.eval(&f.integrals(lp)?))
}

/// v_F(i) sampled along the loop: Σ_j ∂A/∂y_j(y(i)) · X_{h_j}(i(t_k)).
pub fn hamiltonian_field_of(f: &IntegralFunctional, lp: &LoopEmbedding) -> Result<Vec<Vec<f64>>> {
    let y = f.integrals(lp)?;
    let coeff: Vec<f64> = f.grad.iter().map(|g| g.eval(&y)).collect();
    let n = lp.n_samples();
    let dim = lp.ambient.dim();
    let mut field = vec![vec![0.0; dim]; n];
    for (c, h) in coeff.iter().zip(&f.inner) {
        if *c == 0.0 {
            continue;
        }
        let xh = hamiltonian_field_along(lp, h);
        for k in 0..n {
            for d in 0..dim {
                field[k][d] += c * xh[k][d];
            }
        }
    }
    Ok(field)
}

/// {F, G}(i) = −Ω^D(v_F, v_G) against the shared reference weighting.
pub fn bracket(f: &IntegralFunctional, g: &IntegralFunctional, lp: &LoopEmbedding) -> Result<f64> {
    if f.eta0 != g.eta0 {
        return Err(Error::Config(format!(
            "{} and {} use different reference weightings",
            f.name, g.name
        )));
    }
    let eta = f.eta0.realize(lp.n_samples())?;
    let vf = hamiltonian_field_of(f, lp)?;
    let vg = hamiltonian_field_of(g, lp)?;
    Ok(-omega_donaldson(lp, &vf, &vg, &eta))
}

/// The pointwise product FG as an integral functional: outer maps multiply
/// over the concatenated integrand lists.
pub fn functional_product(
    f: &IntegralFunctional,
    g: &IntegralFunctional,
) -> Result<IntegralFunctional> {
    if f.eta0 != g.eta0 {
        return Err(Error::Config(format!(
            "{} and {} use different reference weightings",
            f.name, g.name
        )));
    }
    if f.half_dim() != g.half_dim() {
        return Err(Error::Config(format!(
            "{} and {} live over different ambient spaces",
            f.name, g.name
        )));
    }
    let outer = Expr::Mul(
        Box::new(f.outer.clone()),
        Box::new(g.outer.shift_vars(f.arity())),
    );
    let mut inner = f.inner.clone();
    inner.extend(g.inner.iter().cloned());
    let name = format!("{}*{}", f.name, g.name);
    let mut prod = IntegralFunctional::from_parts(&name, outer, inner)?;
    prod.eta0 = f.eta0.clone();
    Ok(prod)
}

/// |{F,{G,H}} + {G,{H,F}} + {H,{F,G}}| at one loop. The outer bracket of a
/// functional with an already-evaluated bracket is realized as the central
/// difference of the inner bracket along the outer Hamiltonian field:
/// {F, K} = dK(v_F). Only first-order differences appear, so the error
/// budget is the usual O(step²) FD truncation on top of roundoff.
pub fn jacobi_residual(
    f: &IntegralFunctional,
    g: &IntegralFunctional,
    h: &IntegralFunctional,
    lp: &LoopEmbedding,
    step: f64,
) -> Result<f64> {
    let eta = f.eta0.realize(lp.n_samples())?;
    let nested =
        |a: &IntegralFunctional, b: &IntegralFunctional, c: &IntegralFunctional| -> Result<f64> {
            let va = TangentVector::zero_weight(hamiltonian_field_of(a, lp)?);
            bracket(b, c, lp)?;
            Ok(fd::directional_derivative(
                |l, _| bracket(b, c, l).expect("bracket is total on displaced loops"),
                lp,
                &eta,
                &va,
                step,
            ))
        };
    Ok((nested(f, g, h)? + nested(g, h, f)? + nested(h, f, g)?).abs())
}
