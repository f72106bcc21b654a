//! Flat phase space R^{2n} with coordinates (q_1..q_n, p_1..p_n).
//!
//! Fixed conventions used everywhere downstream:
//! ω(u, v) = Σ_k (u_{q_k} v_{p_k} - u_{p_k} v_{q_k}), β = Σ_k p_k dq_k with
//! dβ = -ω, J(q, p) = (-p, q), and X_H = (∂H/∂p, -∂H/∂q) so that
//! ι(X_H)ω = dH. The bracket is {F, G} = -ω(X_F, X_G), which gives
//! {q, p} = -1.

use crate::error::Result;
use crate::expr::{self, Expr, PhaseVars};
use crate::tol;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AmbientSpace {
    pub half_dim: usize,
}

impl AmbientSpace {
    pub fn new(half_dim: usize) -> AmbientSpace {
        AmbientSpace { half_dim }
    }

    pub fn dim(&self) -> usize {
        2 * self.half_dim
    }

    /// Constant symplectic form ω(u, v).
    pub fn omega(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = self.half_dim;
        let mut acc = 0.0;
        for k in 0..n {
            acc += u[k] * v[n + k] - u[n + k] * v[k];
        }
        acc
    }

    /// Tautological 1-form β_x(v) = Σ_k p_k v_{q_k}.
    pub fn beta(&self, x: &[f64], v: &[f64]) -> f64 {
        let n = self.half_dim;
        (0..n).map(|k| x[n + k] * v[k]).sum()
    }

    /// Compatible complex structure J(q, p) = (-p, q); J² = -id.
    pub fn j_apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.half_dim;
        let mut out = vec![0.0; 2 * n];
        for k in 0..n {
            out[k] = -v[n + k];
            out[n + k] = v[k];
        }
        out
    }

    /// g(u, v) = ω(u, Jv); reduces to the Euclidean dot product.
    pub fn metric(&self, u: &[f64], v: &[f64]) -> f64 {
        self.omega(u, &self.j_apply(v))
    }
}

type OpaqueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Symbolic {
        expr: Expr,
        grad: Vec<Expr>,
        hess: Vec<Vec<Expr>>,
    },
    Custom {
        f: OpaqueFn,
    },
}

/// A Hamiltonian on R^{2n}, either a parsed expression with exact symbolic
/// derivatives or an opaque closure differentiated by central differences.
#[derive(Clone)]
pub struct HamiltonianFn {
    pub name: String,
    dim: usize,
    kind: Kind,
}

impl std::fmt::Debug for HamiltonianFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HamiltonianFn")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("symbolic", &matches!(self.kind, Kind::Symbolic { .. }))
            .finish()
    }
}

impl HamiltonianFn {
    pub fn from_expr(name: &str, src: &str, half_dim: usize) -> Result<HamiltonianFn> {
        let expr = expr::parse(src, &PhaseVars { half_dim })?;
        Ok(Self::from_parsed(name, expr, half_dim))
    }

    pub fn from_parsed(name: &str, expr: Expr, half_dim: usize) -> HamiltonianFn {
        let dim = 2 * half_dim;
        let grad = expr.gradient(dim);
        let hess = expr.hessian(dim);
        HamiltonianFn {
            name: name.to_string(),
            dim,
            kind: Kind::Symbolic { expr, grad, hess },
        }
    }

    pub fn custom(
        name: &str,
        half_dim: usize,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> HamiltonianFn {
        HamiltonianFn {
            name: name.to_string(),
            dim: 2 * half_dim,
            kind: Kind::Custom { f: Arc::new(f) },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn uses_fd_gradient(&self) -> bool {
        matches!(self.kind, Kind::Custom { .. })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Symbolic { expr, .. } => expr.eval(x),
            Kind::Custom { f } => f(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::Symbolic { grad, .. } => grad.iter().map(|g| g.eval(x)).collect(),
            Kind::Custom { f } => {
                let mut out = vec![0.0; self.dim];
                let mut xs = x.to_vec();
                for i in 0..self.dim {
                    let h = tol::FD_STEP;
                    xs[i] = x[i] + h;
                    let plus = f(&xs);
                    xs[i] = x[i] - h;
                    let minus = f(&xs);
                    xs[i] = x[i];
                    out[i] = (plus - minus) / (2.0 * h);
                }
                out
            }
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        match &self.kind {
            Kind::Symbolic { hess, .. } => hess
                .iter()
                .map(|row| row.iter().map(|e| e.eval(x)).collect())
                .collect(),
            Kind::Custom { f } => {
                // nested central differences, symmetrized
                let h = tol::FD_STEP.sqrt() * 0.1;
                let mut out = vec![vec![0.0; self.dim]; self.dim];
                let mut xs = x.to_vec();
                let eval = |xs: &mut Vec<f64>, i: usize, j: usize, si: f64, sj: f64| {
                    xs[i] += si * h;
                    xs[j] += sj * h;
                    let v = f(xs);
                    xs[i] = x[i];
                    xs[j] = x[j];
                    v
                };
                #[allow(clippy::needless_range_loop)] // triangular fill, two indices per write
                for i in 0..self.dim {
                    for j in i..self.dim {
                        let v = (eval(&mut xs, i, j, 1.0, 1.0)
                            - eval(&mut xs, i, j, 1.0, -1.0)
                            - eval(&mut xs, i, j, -1.0, 1.0)
                            + eval(&mut xs, i, j, -1.0, -1.0))
                            / (4.0 * h * h);
                        out[i][j] = v;
                        out[j][i] = v;
                    }
                }
                out
            }
        }
    }
}

/// X_H(x) = (∂H/∂p, -∂H/∂q), the unique field with ι(X_H)ω = dH.
pub fn hamiltonian_vector_field(h: &HamiltonianFn, x: &[f64]) -> Vec<f64> {
    let grad = h.gradient(x);
    let n = grad.len() / 2;
    let mut out = vec![0.0; 2 * n];
    for k in 0..n {
        out[k] = grad[n + k];
        out[n + k] = -grad[k];
    }
    out
}

/// {F, G}(x) = -ω(X_F(x), X_G(x)); equals -Σ_k (∂F/∂q_k ∂G/∂p_k - ∂F/∂p_k ∂G/∂q_k).
pub fn poisson_bracket_ambient(
    ambient: &AmbientSpace,
    f: &HamiltonianFn,
    g: &HamiltonianFn,
    x: &[f64],
) -> f64 {
    -ambient.omega(
        &hamiltonian_vector_field(f, x),
        &hamiltonian_vector_field(g, x),
    )
}

fn monomial(exponents: &[u32]) -> Expr {
    let mut acc: Option<Expr> = None;
    for (i, &e) in exponents.iter().enumerate() {
        if e == 0 {
            continue;
        }
        let factor = if e == 1 {
            Expr::Var(i)
        } else {
            Expr::Pow(Box::new(Expr::Var(i)), e as i32)
        };
        acc = Some(match acc {
            None => factor,
            Some(a) => Expr::Mul(Box::new(a), Box::new(factor)),
        });
    }
    acc.unwrap_or(Expr::Const(1.0))
}

fn monomial_name(exponents: &[u32], half_dim: usize) -> String {
    let mut parts = Vec::new();
    for (i, &e) in exponents.iter().enumerate() {
        if e == 0 {
            continue;
        }
        let var = if i < half_dim {
            format!("q{}", i + 1)
        } else {
            format!("p{}", i + 1 - half_dim)
        };
        parts.push(if e == 1 { var } else { format!("{var}^{e}") });
    }
    parts.join("*")
}

fn multi_indices(dim: usize, max_total: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut current = vec![0u32; dim];
    fn rec(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, pos: usize, budget: u32) {
        if pos == current.len() {
            if current.iter().sum::<u32>() >= 1 {
                out.push(current.clone());
            }
            return;
        }
        for e in 0..=budget {
            current[pos] = e;
            rec(out, current, pos + 1, budget - e);
            current[pos] = 0;
        }
    }
    rec(&mut out, &mut current, 0, max_total);
    out
}

/// All coordinate monomials of total degree 1..=4. Polynomial entries keep
/// pulled-back integrands band-limited, so quadrature identities built from
/// this list hold to roundoff.
pub fn poly_dictionary(half_dim: usize) -> Vec<HamiltonianFn> {
    multi_indices(2 * half_dim, 4)
        .into_iter()
        .map(|exps| {
            HamiltonianFn::from_parsed(&monomial_name(&exps, half_dim), monomial(&exps), half_dim)
        })
        .collect()
}

/// Polynomial dictionary plus sin/cos of every coordinate.
pub fn dictionary(half_dim: usize) -> Vec<HamiltonianFn> {
    let mut out = poly_dictionary(half_dim);
    for i in 0..2 * half_dim {
        let var = if i < half_dim {
            format!("q{}", i + 1)
        } else {
            format!("p{}", i + 1 - half_dim)
        };
        out.push(HamiltonianFn::from_parsed(
            &format!("sin({var})"),
            Expr::Sin(Box::new(Expr::Var(i))),
            half_dim,
        ));
        out.push(HamiltonianFn::from_parsed(
            &format!("cos({var})"),
            Expr::Cos(Box::new(Expr::Var(i))),
            half_dim,
        ));
    }
    out
}
