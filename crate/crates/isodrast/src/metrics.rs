//! The exact symplectic phase space of momentum-weighted metrics on a
//! discretized flat torus [0,1)^d with trivialized tensor bundles.
//!
//! Every structure here is pointwise-algebraic integrated against the volume
//! density, so piecewise-constant fields on a cell grid represent the space
//! exactly; no connection or spatial derivative of g ever appears.
//!
//! With density ρ(g) = |det g| · cell volume the derivative identities
//! d/dt (g+tk)⁻¹ = −g⁻¹kg⁻¹ and Dρ(k) = Tr(g⁻¹k)·ρ make the chain exact:
//! Ω = −dΘ for the four-term two-form, and ι(ξ_{F_r})Ω = dF_r for
//! ξ_{F_r} = (r, rg⁻¹h + hg⁻¹r − Tr(g⁻¹r)h). A square-root density would
//! need halved trace terms in Ω; we keep the stated forms and the matching
//! density.

use crate::error::{Error, Result};
use crate::expr::{self, Expr, OuterVars};
use crate::tol;
use nalgebra::DMatrix;
use rand::Rng;

const SYMMETRY_GATE: f64 = 1e-14;

/// Fixed-order pairwise reduction; deterministic and cancellation-friendly.
fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => {
            let (a, b) = v.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    let d = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in (i + 1)..d {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn cofactor_det(m: &DMatrix<f64>) -> f64 {
    let d = m.nrows();
    match d {
        0 => 1.0,
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => {
            let mut acc = 0.0;
            for j in 0..d {
                let minor = minor_det(m, 0, j);
                let term = m[(0, j)] * minor;
                acc += if j % 2 == 0 { term } else { -term };
            }
            acc
        }
    }
}

fn minor_det(m: &DMatrix<f64>, row: usize, col: usize) -> f64 {
    let d = m.nrows();
    let sub = DMatrix::from_fn(d - 1, d - 1, |i, j| {
        m[(i + (i >= row) as usize, j + (j >= col) as usize)]
    });
    cofactor_det(&sub)
}

/// Inverse and determinant: explicit adjugate for d ≤ 4, LU beyond.
/// The inverse of a symmetric input is symmetrized to kill roundoff skew.
fn inverse_and_det(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let d = m.nrows();
    if d <= 4 {
        let det = cofactor_det(m);
        let mut adj = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let minor = minor_det(m, j, i);
                adj[(i, j)] = if (i + j) % 2 == 0 { minor } else { -minor };
            }
        }
        (symmetrize(&(adj / det)), det)
    } else {
        let det = m.determinant();
        let inv = m
            .clone()
            .try_inverse()
            .expect("determinant guard admits an inverse");
        (symmetrize(&inv), det)
    }
}

fn eigen_signature(m: &DMatrix<f64>) -> (usize, usize) {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let pos = eig.eigenvalues.iter().filter(|&&l| l > 0.0).count();
    let neg = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
    (pos, neg)
}

/// Piecewise-constant pseudo-Riemannian metric of fixed signature on a
/// uniform cell grid over [0,1)^d. Cell inverses and determinants are
/// computed once at construction.
#[derive(Clone, Debug)]
pub struct MetricField {
    pub base_dim: usize,
    pub grid: Vec<usize>,
    pub signature: (usize, usize),
    cells: Vec<DMatrix<f64>>,
    inv: Vec<DMatrix<f64>>,
    det: Vec<f64>,
}

impl MetricField {
    pub fn new(
        base_dim: usize,
        grid: Vec<usize>,
        signature: (usize, usize),
        cells: Vec<DMatrix<f64>>,
    ) -> Result<MetricField> {
        if base_dim == 0 || grid.len() != base_dim || grid.contains(&0) {
            return Err(Error::Invariant(format!(
                "grid {grid:?} does not describe a {base_dim}-dimensional torus"
            )));
        }
        if signature.0 + signature.1 != base_dim {
            return Err(Error::Invariant(format!(
                "signature ({}, {}) does not fill dimension {base_dim}",
                signature.0, signature.1
            )));
        }
        let n_cells: usize = grid.iter().product();
        if cells.len() != n_cells {
            return Err(Error::Invariant(format!(
                "expected {n_cells} cells, got {}",
                cells.len()
            )));
        }
        let mut inv = Vec::with_capacity(n_cells);
        let mut det = Vec::with_capacity(n_cells);
        for (c, m) in cells.iter().enumerate() {
            if m.nrows() != base_dim || m.ncols() != base_dim {
                return Err(Error::Invariant(format!(
                    "cell {c} is {}x{}, metric needs {base_dim}x{base_dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if symmetry_defect(m) > SYMMETRY_GATE {
                return Err(Error::Invariant(format!(
                    "cell {c} is not symmetric (defect {:.3e})",
                    symmetry_defect(m)
                )));
            }
            let (mi, d) = inverse_and_det(m);
            if d.abs() <= tol::DET_GUARD {
                return Err(Error::DegenerateMetric {
                    cell: c,
                    det: d.abs(),
                    guard: tol::DET_GUARD,
                });
            }
            let found = eigen_signature(m);
            if found != signature {
                return Err(Error::SignatureBreach {
                    cell: c,
                    expected: signature,
                    found,
                });
            }
            inv.push(mi);
            det.push(d);
        }
        Ok(MetricField {
            base_dim,
            grid,
            signature,
            cells,
            inv,
            det,
        })
    }

    /// Euclidean metric: identity in every cell.
    pub fn euclidean(base_dim: usize, grid: Vec<usize>) -> MetricField {
        let n: usize = grid.iter().product();
        let cells = vec![DMatrix::identity(base_dim, base_dim); n];
        MetricField::new(base_dim, grid, (base_dim, 0), cells)
            .expect("identity cells satisfy every invariant")
    }

    /// Demo configuration: d = 4 mostly-minus Lorentzian diag(1,−1,−1,−1),
    /// signature (1, 3).
    pub fn lorentzian(grid: Vec<usize>) -> MetricField {
        let n: usize = grid.iter().product();
        let cell =
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0, -1.0, -1.0]));
        MetricField::new(4, grid, (1, 3), vec![cell; n])
            .expect("diagonal Lorentzian cells satisfy every invariant")
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_volume(&self) -> f64 {
        1.0 / self.grid.iter().product::<usize>() as f64
    }

    pub fn cell(&self, c: usize) -> &DMatrix<f64> {
        &self.cells[c]
    }

    pub fn inverse(&self, c: usize) -> &DMatrix<f64> {
        &self.inv[c]
    }

    pub fn det(&self, c: usize) -> f64 {
        self.det[c]
    }

    /// ρ in cell c: |det g| times the cell volume.
    pub fn volume_density(&self, c: usize) -> f64 {
        self.det[c].abs() * self.cell_volume()
    }
}

/// Symmetric two-tensor paired with a metric: the momentum part of a phase
/// point, and also the parameter r of the basic functionals F_r.
#[derive(Clone, Debug)]
pub struct MomentumField {
    pub cells: Vec<DMatrix<f64>>,
}

impl MomentumField {
    pub fn new(cells: Vec<DMatrix<f64>>) -> Result<MomentumField> {
        for (c, m) in cells.iter().enumerate() {
            if symmetry_defect(m) > SYMMETRY_GATE {
                return Err(Error::Invariant(format!(
                    "momentum cell {c} is not symmetric (defect {:.3e})",
                    symmetry_defect(m)
                )));
            }
        }
        Ok(MomentumField { cells })
    }

    pub fn zeros(dim: usize, n_cells: usize) -> MomentumField {
        MomentumField {
            cells: vec![DMatrix::zeros(dim, dim); n_cells],
        }
    }

    pub fn identity(dim: usize, n_cells: usize) -> MomentumField {
        MomentumField {
            cells: vec![DMatrix::identity(dim, dim); n_cells],
        }
    }
}

/// Tangent vector (k, l) at a phase point (g, h): a variation of the metric
/// and a variation of the momentum, both cellwise symmetric.
#[derive(Clone, Debug)]
pub struct MetricTangent {
    pub k: Vec<DMatrix<f64>>,
    pub l: Vec<DMatrix<f64>>,
}

impl MetricTangent {
    pub fn new(k: Vec<DMatrix<f64>>, l: Vec<DMatrix<f64>>) -> Result<MetricTangent> {
        if k.len() != l.len() {
            return Err(Error::Invariant(
                "tangent components cover different cell counts".into(),
            ));
        }
        for (c, m) in k.iter().chain(l.iter()).enumerate() {
            if symmetry_defect(m) > SYMMETRY_GATE {
                return Err(Error::Invariant(format!(
                    "tangent entry {c} is not symmetric (defect {:.3e})",
                    symmetry_defect(m)
                )));
            }
        }
        Ok(MetricTangent { k, l })
    }

    pub fn zeros(dim: usize, n_cells: usize) -> MetricTangent {
        MetricTangent {
            k: vec![DMatrix::zeros(dim, dim); n_cells],
            l: vec![DMatrix::zeros(dim, dim); n_cells],
        }
    }

    /// a·ξ₁ + b·ξ₂ cellwise.
    pub fn linear_combination(
        a: f64,
        t1: &MetricTangent,
        b: f64,
        t2: &MetricTangent,
    ) -> MetricTangent {
        let comb = |x: &[DMatrix<f64>], y: &[DMatrix<f64>]| {
            x.iter().zip(y).map(|(m1, m2)| m1 * a + m2 * b).collect()
        };
        MetricTangent {
            k: comb(&t1.k, &t2.k),
            l: comb(&t1.l, &t2.l),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.k
            .iter()
            .chain(self.l.iter())
            .all(|m| m.iter().all(|&x| x == 0.0))
    }
}

fn check_cells(g: &MetricField, cells: &[DMatrix<f64>], what: &str) -> Result<()> {
    if cells.len() != g.n_cells() {
        return Err(Error::Invariant(format!(
            "{what} covers {} cells, metric has {}",
            cells.len(),
            g.n_cells()
        )));
    }
    for (c, m) in cells.iter().enumerate() {
        if m.nrows() != g.base_dim || m.ncols() != g.base_dim {
            return Err(Error::Invariant(format!(
                "{what} cell {c} has shape {}x{}, metric is {}-dimensional",
                m.nrows(),
                m.ncols(),
                g.base_dim
            )));
        }
    }
    Ok(())
}

fn check_point(g: &MetricField, h: &MomentumField) -> Result<()> {
    check_cells(g, &h.cells, "momentum field")
}

fn check_tangent(g: &MetricField, t: &MetricTangent, what: &str) -> Result<()> {
    check_cells(g, &t.k, what)?;
    check_cells(g, &t.l, what)
}

/// Θ_{(g,h)}(k, l) = Σ_cells Tr(g⁻¹ k g⁻¹ h) · ρ. The l component does not
/// enter: the primitive one-form only sees metric variations.
pub fn theta_metric(g: &MetricField, h: &MomentumField, xi: &MetricTangent) -> Result<f64> {
    check_point(g, h)?;
    check_tangent(g, xi, "tangent")?;
    let terms: Vec<f64> = (0..g.n_cells())
        .map(|c| {
            let gi = g.inverse(c);
            (gi * &xi.k[c] * gi * &h.cells[c]).trace() * g.volume_density(c)
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// The same pairing by explicit index summation g^{jr} k_{rq} g^{qp} h_{pj},
/// kept as an independent oracle for the matrix-product route.
pub fn theta_metric_indexed(g: &MetricField, h: &MomentumField, k: &[DMatrix<f64>]) -> Result<f64> {
    check_point(g, h)?;
    check_cells(g, k, "variation")?;
    let d = g.base_dim;
    let terms: Vec<f64> = (0..g.n_cells())
        .map(|c| {
            let gi = g.inverse(c);
            let hc = &h.cells[c];
            let kc = &k[c];
            let mut acc = 0.0;
            for j in 0..d {
                for r in 0..d {
                    for q in 0..d {
                        for p in 0..d {
                            acc += gi[(j, r)] * kc[(r, q)] * gi[(q, p)] * hc[(p, j)];
                        }
                    }
                }
            }
            acc * g.volume_density(c)
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// The symplectic form at (g, h):
/// Σ_cells [Tr(g⁻¹k₁g⁻¹h)Tr(g⁻¹k₂) − Tr(g⁻¹k₂g⁻¹h)Tr(g⁻¹k₁)
///          + Tr(g⁻¹k₁g⁻¹l₂) − Tr(g⁻¹k₂g⁻¹l₁)] · ρ.
pub fn omega_metric(
    g: &MetricField,
    h: &MomentumField,
    xi1: &MetricTangent,
    xi2: &MetricTangent,
) -> Result<f64> {
    check_point(g, h)?;
    check_tangent(g, xi1, "first tangent")?;
    check_tangent(g, xi2, "second tangent")?;
    let terms: Vec<f64> = (0..g.n_cells())
        .map(|c| {
            let gi = g.inverse(c);
            let hc = &h.cells[c];
            let pair = |a: &DMatrix<f64>, b: &DMatrix<f64>| (gi * a * gi * b).trace();
            let tr = |a: &DMatrix<f64>| (gi * a).trace();
            let swing = pair(&xi1.k[c], hc) * tr(&xi2.k[c]) - pair(&xi2.k[c], hc) * tr(&xi1.k[c]);
            let momentum = pair(&xi1.k[c], &xi2.l[c]) - pair(&xi2.k[c], &xi1.l[c]);
            (swing + momentum) * g.volume_density(c)
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// F_r(g, h) = Σ_cells Tr(g⁻¹ r g⁻¹ h) · ρ.
pub fn functional_fr(r: &MomentumField, g: &MetricField, h: &MomentumField) -> Result<f64> {
    check_cells(g, &r.cells, "functional parameter")?;
    theta_metric(
        g,
        h,
        &MetricTangent {
            k: r.cells.clone(),
            l: vec![DMatrix::zeros(g.base_dim, g.base_dim); r.cells.len()],
        },
    )
}

/// The Hamiltonian field of F_r:
/// ξ_{F_r}(g, h) = (r, rg⁻¹h + hg⁻¹r − Tr(g⁻¹r)·h) cellwise.
pub fn xi_fr(r: &MomentumField, g: &MetricField, h: &MomentumField) -> Result<MetricTangent> {
    check_point(g, h)?;
    check_cells(g, &r.cells, "functional parameter")?;
    let mut k = Vec::with_capacity(g.n_cells());
    let mut l = Vec::with_capacity(g.n_cells());
    for c in 0..g.n_cells() {
        let gi = g.inverse(c);
        let rc = &r.cells[c];
        let hc = &h.cells[c];
        let cross = rc * gi * hc + hc * gi * rc;
        let lc = symmetrize(&cross) - hc * (gi * rc).trace();
        k.push(rc.clone());
        l.push(lc);
    }
    Ok(MetricTangent { k, l })
}

/// {F_r, F_s}(g, h) = −Ω(ξ_{F_r}, ξ_{F_s}).
pub fn metric_bracket(
    r: &MomentumField,
    s: &MomentumField,
    g: &MetricField,
    h: &MomentumField,
) -> Result<f64> {
    let xr = xi_fr(r, g, h)?;
    let xs = xi_fr(s, g, h)?;
    Ok(-omega_metric(g, h, &xr, &xs)?)
}

/// For nonzero ξ₁ produce ξ₂ with Ω(ξ₁, ξ₂) ≠ 0, cellwise-positive terms.
/// Riemannian g pairs k₁ against l₂ = k₁ (the trace metric G_g); indefinite
/// g uses l₂ = g k₁ g so every cell contributes Tr(k₁²). A pure l₁ tangent
/// is caught through the k₂ slot the same way.
pub fn nondegeneracy_witness_metric(g: &MetricField, xi1: &MetricTangent) -> Option<MetricTangent> {
    let d = g.base_dim;
    let n = g.n_cells();
    let riemannian = g.signature.1 == 0;
    let image = |src: &[DMatrix<f64>]| -> Vec<DMatrix<f64>> {
        (0..n)
            .map(|c| {
                if riemannian {
                    src[c].clone()
                } else {
                    symmetrize(&(g.cell(c) * &src[c] * g.cell(c)))
                }
            })
            .collect()
    };
    if xi1.k.iter().any(|m| m.iter().any(|&x| x != 0.0)) {
        return Some(MetricTangent {
            k: vec![DMatrix::zeros(d, d); n],
            l: image(&xi1.k),
        });
    }
    if xi1.l.iter().any(|m| m.iter().any(|&x| x != 0.0)) {
        return Some(MetricTangent {
            k: image(&xi1.l),
            l: vec![DMatrix::zeros(d, d); n],
        });
    }
    None
}

/// (g + s·k, h + s·l) with full revalidation; finite-difference steps stay
/// inside the open signature stratum for any reasonable step size.
pub fn displace_metric(
    g: &MetricField,
    h: &MomentumField,
    xi: &MetricTangent,
    s: f64,
) -> Result<(MetricField, MomentumField)> {
    check_point(g, h)?;
    check_tangent(g, xi, "displacement")?;
    let cells: Vec<DMatrix<f64>> = (0..g.n_cells()).map(|c| g.cell(c) + &xi.k[c] * s).collect();
    let moved_g = MetricField::new(g.base_dim, g.grid.clone(), g.signature, cells)?;
    let moved_h = MomentumField::new(
        (0..g.n_cells())
            .map(|c| &h.cells[c] + &xi.l[c] * s)
            .collect(),
    )?;
    Ok((moved_g, moved_h))
}

/// Central difference of a scalar observable along ξ in the flat (g, h) chart.
pub fn fd_metric_derivative(
    f: impl Fn(&MetricField, &MomentumField) -> f64,
    g: &MetricField,
    h: &MomentumField,
    xi: &MetricTangent,
    step: f64,
) -> Result<f64> {
    let (gp, hp) = displace_metric(g, h, xi, step)?;
    let (gm, hm) = displace_metric(g, h, xi, -step)?;
    Ok((f(&gp, &hp) - f(&gm, &hm)) / (2.0 * step))
}

/// dΘ(ξ₁, ξ₂) by constant extensions: D_{ξ₁}Θ(ξ₂) − D_{ξ₂}Θ(ξ₁).
pub fn fd_theta_exterior(
    g: &MetricField,
    h: &MomentumField,
    xi1: &MetricTangent,
    xi2: &MetricTangent,
    step: f64,
) -> Result<f64> {
    let a = fd_metric_derivative(
        |gg, hh| theta_metric(gg, hh, xi2).expect("shapes fixed across displacement"),
        g,
        h,
        xi1,
        step,
    )?;
    let b = fd_metric_derivative(
        |gg, hh| theta_metric(gg, hh, xi1).expect("shapes fixed across displacement"),
        g,
        h,
        xi2,
        step,
    )?;
    Ok(a - b)
}

/// dΩ(ξ₁, ξ₂, ξ₃) by constant extensions, cyclic with alternating signs.
pub fn fd_closedness_metric(
    g: &MetricField,
    h: &MomentumField,
    dirs: [&MetricTangent; 3],
    step: f64,
) -> Result<f64> {
    let term = |a: usize, b: usize, c: usize| -> Result<f64> {
        fd_metric_derivative(
            |gg, hh| omega_metric(gg, hh, dirs[b], dirs[c]).expect("shapes fixed"),
            g,
            h,
            dirs[a],
            step,
        )
    };
    Ok(term(0, 1, 2)? - term(1, 0, 2)? + term(2, 0, 1)?)
}

/// Integrate d/dt (g, h) = ξ_{F_r}(g, h) with RK4. The metric component
/// moves linearly (the k part of ξ_{F_r} is the constant r); the momentum
/// component is genuinely nonlinear. Every accepted step re-checks the
/// determinant guard and the cellwise signature, so a flow that would cross
/// the degenerate locus fails loudly instead of continuing.
pub fn flow_metric(
    g0: &MetricField,
    h0: &MomentumField,
    r: &MomentumField,
    t_final: f64,
    steps: usize,
) -> Result<(MetricField, MomentumField)> {
    check_point(g0, h0)?;
    check_cells(g0, &r.cells, "functional parameter")?;
    if steps == 0 && t_final != 0.0 {
        return Err(Error::Invariant(
            "flow over a nonzero time needs at least one step".into(),
        ));
    }
    let d = g0.base_dim;
    let n = g0.n_cells();
    let mut g_cells: Vec<DMatrix<f64>> = (0..n).map(|c| g0.cell(c).clone()).collect();
    let mut h_cells = h0.cells.clone();
    let dt = if steps == 0 {
        0.0
    } else {
        t_final / steps as f64
    };

    let deriv = |gc: &[DMatrix<f64>], hc: &[DMatrix<f64>]| -> Result<Vec<DMatrix<f64>>> {
        (0..n)
            .map(|c| {
                let (gi, det) = inverse_and_det(&gc[c]);
                if det.abs() <= tol::DET_GUARD {
                    return Err(Error::DegenerateMetric {
                        cell: c,
                        det: det.abs(),
                        guard: tol::DET_GUARD,
                    });
                }
                let rc = &r.cells[c];
                let cross = rc * &gi * &hc[c] + &hc[c] * &gi * rc;
                Ok(symmetrize(&cross) - &hc[c] * (&gi * rc).trace())
            })
            .collect()
    };

    for _ in 0..steps {
        let k1 = deriv(&g_cells, &h_cells)?;
        let g_mid: Vec<DMatrix<f64>> = (0..n)
            .map(|c| &g_cells[c] + &r.cells[c] * (0.5 * dt))
            .collect();
        let h2: Vec<DMatrix<f64>> = (0..n).map(|c| &h_cells[c] + &k1[c] * (0.5 * dt)).collect();
        let k2 = deriv(&g_mid, &h2)?;
        let h3: Vec<DMatrix<f64>> = (0..n).map(|c| &h_cells[c] + &k2[c] * (0.5 * dt)).collect();
        let k3 = deriv(&g_mid, &h3)?;
        let g_end: Vec<DMatrix<f64>> = (0..n).map(|c| &g_cells[c] + &r.cells[c] * dt).collect();
        let h4: Vec<DMatrix<f64>> = (0..n).map(|c| &h_cells[c] + &k3[c] * dt).collect();
        let k4 = deriv(&g_end, &h4)?;
        for c in 0..n {
            h_cells[c] += (&k1[c] + &k2[c] * 2.0 + &k3[c] * 2.0 + &k4[c]) * (dt / 6.0);
        }
        g_cells = g_end;
        for (c, m) in g_cells.iter().enumerate() {
            let det = cofactor_or_lu_det(m);
            if det.abs() <= tol::DET_GUARD {
                return Err(Error::DegenerateMetric {
                    cell: c,
                    det: det.abs(),
                    guard: tol::DET_GUARD,
                });
            }
            let found = eigen_signature(m);
            if found != g0.signature {
                return Err(Error::SignatureBreach {
                    cell: c,
                    expected: g0.signature,
                    found,
                });
            }
        }
    }
    let g_final = MetricField::new(d, g0.grid.clone(), g0.signature, g_cells)?;
    let h_final = MomentumField::new(h_cells)?;
    Ok((g_final, h_final))
}

fn cofactor_or_lu_det(m: &DMatrix<f64>) -> f64 {
    if m.nrows() <= 4 {
        cofactor_det(m)
    } else {
        m.determinant()
    }
}

/// Composed functional A(F_{r₁}, …, F_{r_m}) on the metric phase space,
/// mirroring the integral functionals on loop space. Its Hamiltonian field
/// is the gradient-weighted combination Σ_j ∂A/∂y_j · ξ_{F_{r_j}}.
#[derive(Clone)]
pub struct MetricFunctional {
    pub name: String,
    outer: Expr,
    grad: Vec<Expr>,
    pub inner: Vec<MomentumField>,
}

impl MetricFunctional {
    pub fn new(name: &str, outer_src: &str, inner: Vec<MomentumField>) -> Result<MetricFunctional> {
        if inner.is_empty() {
            return Err(Error::Config(format!(
                "functional {name} needs at least one parameter field"
            )));
        }
        let m = inner.len();
        let outer = expr::parse(outer_src, &OuterVars { arity: m })?;
        Self::from_parts(name, outer, inner)
    }

    fn from_parts(name: &str, outer: Expr, inner: Vec<MomentumField>) -> Result<MetricFunctional> {
        let grad = outer.gradient(inner.len());
        Ok(MetricFunctional {
            name: name.to_string(),
            outer,
            grad,
            inner,
        })
    }

    /// The basic functional F_r itself.
    pub fn basic(name: &str, r: MomentumField) -> MetricFunctional {
        MetricFunctional::new(name, "y", vec![r]).expect("identity outer map always parses")
    }

    pub fn integrals(&self, g: &MetricField, h: &MomentumField) -> Result<Vec<f64>> {
        self.inner.iter().map(|r| functional_fr(r, g, h)).collect()
    }

    pub fn eval(&self, g: &MetricField, h: &MomentumField) -> Result<f64> {
        Ok(self.outer.eval(&self.integrals(g, h)?))
    }

    pub fn field(&self, g: &MetricField, h: &MomentumField) -> Result<MetricTangent> {
        let y = self.integrals(g, h)?;
        let mut acc = MetricTangent::zeros(g.base_dim, g.n_cells());
        for (gj, rj) in self.grad.iter().zip(&self.inner) {
            let c = gj.eval(&y);
            if c == 0.0 {
                continue;
            }
            let xi = xi_fr(rj, g, h)?;
            acc = MetricTangent::linear_combination(1.0, &acc, c, &xi);
        }
        Ok(acc)
    }
}

pub fn metric_functional_bracket(
    fa: &MetricFunctional,
    fb: &MetricFunctional,
    g: &MetricField,
    h: &MomentumField,
) -> Result<f64> {
    let va = fa.field(g, h)?;
    let vb = fb.field(g, h)?;
    Ok(-omega_metric(g, h, &va, &vb)?)
}

pub fn metric_functional_product(
    fa: &MetricFunctional,
    fb: &MetricFunctional,
) -> Result<MetricFunctional> {
    let outer = Expr::Mul(
        Box::new(fa.outer.clone()),
        Box::new(fb.outer.shift_vars(fa.inner.len())),
    );
    let mut inner = fa.inner.clone();
    inner.extend(fb.inner.iter().cloned());
    MetricFunctional::from_parts(&format!("{}*{}", fa.name, fb.name), outer, inner)
}

/// |{F,{G,H}} + {G,{H,F}} + {H,{F,G}}| with the outer brackets realized as
/// central differences of the inner bracket along the outer Hamiltonian
/// field, exactly as on loop space.
pub fn metric_jacobi_residual(
    fa: &MetricFunctional,
    fb: &MetricFunctional,
    fc: &MetricFunctional,
    g: &MetricField,
    h: &MomentumField,
    step: f64,
) -> Result<f64> {
    let nested =
        |a: &MetricFunctional, b: &MetricFunctional, c: &MetricFunctional| -> Result<f64> {
            let va = a.field(g, h)?;
            metric_functional_bracket(b, c, g, h)?;
            fd_metric_derivative(
                |gg, hh| {
                    metric_functional_bracket(b, c, gg, hh)
                        .expect("bracket is total on displaced phase points")
                },
                g,
                h,
                &va,
                step,
            )
        };
    Ok((nested(fa, fb, fc)? + nested(fb, fc, fa)? + nested(fc, fa, fb)?).abs())
}

fn random_symmetric(rng: &mut impl Rng, d: usize, amp: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = rng.gen_range(-amp..amp);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn random_orthogonal(rng: &mut impl Rng, d: usize) -> DMatrix<f64> {
    let raw = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
    raw.qr().q()
}

/// Random metric of the requested signature: Qᵀ diag(±λ) Q with
/// eigenvalue magnitudes in [0.6, 1.6], symmetrized exactly.
pub fn random_metric_field(
    rng: &mut impl Rng,
    base_dim: usize,
    grid: Vec<usize>,
    signature: (usize, usize),
) -> MetricField {
    let n: usize = grid.iter().product();
    let cells: Vec<DMatrix<f64>> = (0..n)
        .map(|_| {
            let q = random_orthogonal(rng, base_dim);
            let eig: Vec<f64> = (0..base_dim)
                .map(|i| {
                    let mag = rng.gen_range(0.6..1.6);
                    if i < signature.0 {
                        mag
                    } else {
                        -mag
                    }
                })
                .collect();
            let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eig));
            symmetrize(&(q.transpose() * diag * q))
        })
        .collect();
    MetricField::new(base_dim, grid, signature, cells)
        .expect("constructed eigenvalues respect the guard and signature")
}

pub fn random_momentum_field(rng: &mut impl Rng, g: &MetricField, amp: f64) -> MomentumField {
    MomentumField {
        cells: (0..g.n_cells())
            .map(|_| random_symmetric(rng, g.base_dim, amp))
            .collect(),
    }
}

pub fn random_metric_tangent(rng: &mut impl Rng, g: &MetricField, amp: f64) -> MetricTangent {
    MetricTangent {
        k: (0..g.n_cells())
            .map(|_| random_symmetric(rng, g.base_dim, amp))
            .collect(),
        l: (0..g.n_cells())
            .map(|_| random_symmetric(rng, g.base_dim, amp))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, 1, &[v])
    }

    fn riemannian_point(seed: u64, d: usize, grid: Vec<usize>) -> (MetricField, MomentumField) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_metric_field(&mut rng, d, grid, (d, 0));
        let h = random_momentum_field(&mut rng, &g, 0.8);
        (g, h)
    }

    #[test]
    fn volume_density_examples() {
        let g = MetricField::new(1, vec![1], (1, 0), vec![scalar(4.0)]).unwrap();
        assert_eq!(g.volume_density(0), 4.0);

        let e = MetricField::euclidean(3, vec![2, 2, 2]);
        assert_eq!(e.volume_density(5), 0.125);

        let minkowski =
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 1.0, 1.0, 1.0]));
        let lg = MetricField::new(4, vec![1, 1, 1, 1], (3, 1), vec![minkowski]).unwrap();
        assert_eq!(lg.volume_density(0), 1.0);
    }

    #[test]
    fn construction_guards_reject_bad_cells() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.2, 1.0]);
        assert!(matches!(
            MetricField::new(2, vec![1, 1], (2, 0), vec![asym]),
            Err(Error::Invariant(_))
        ));
        let tiny = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            MetricField::new(2, vec![1, 1], (2, 0), vec![tiny]),
            Err(Error::DegenerateMetric { cell: 0, .. })
        ));
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            MetricField::new(2, vec![1, 1], (2, 0), vec![indefinite]),
            Err(Error::SignatureBreach { found: (1, 1), .. })
        ));
    }

    #[test]
    fn theta_scalar_example_and_index_oracle() {
        let g = MetricField::new(1, vec![1], (1, 0), vec![scalar(4.0)]).unwrap();
        let h = MomentumField::new(vec![scalar(2.0)]).unwrap();
        let xi = MetricTangent::new(vec![scalar(1.0)], vec![scalar(9.0)]).unwrap();
        // (1/4)(1)(1/4)(2) · 4 = 1/2; the l entry is ignored
        assert!((theta_metric(&g, &h, &xi).unwrap() - 0.5).abs() < 1e-15);

        let zero = MetricTangent::zeros(1, 1);
        assert_eq!(theta_metric(&g, &h, &zero).unwrap(), 0.0);

        let (g3, h3) = riemannian_point(42, 3, vec![2, 2, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let xi3 = random_metric_tangent(&mut rng, &g3, 0.7);
        let via_trace = theta_metric(&g3, &h3, &xi3).unwrap();
        let via_index = theta_metric_indexed(&g3, &h3, &xi3.k).unwrap();
        assert!((via_trace - via_index).abs() < tol::TRACE_INDEX);
    }

    #[test]
    fn omega_scalar_example_antisymmetry_bilinearity() {
        let g = MetricField::new(1, vec![1], (1, 0), vec![scalar(1.0)]).unwrap();
        let h = MomentumField::zeros(1, 1);
        let xi1 = MetricTangent::new(vec![scalar(1.0)], vec![scalar(0.0)]).unwrap();
        let xi2 = MetricTangent::new(vec![scalar(0.0)], vec![scalar(1.0)]).unwrap();
        assert!((omega_metric(&g, &h, &xi1, &xi2).unwrap() - 1.0).abs() < 1e-15);

        let (g2, h2) = riemannian_point(7, 2, vec![2, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_metric_tangent(&mut rng, &g2, 0.6);
        let b = random_metric_tangent(&mut rng, &g2, 0.6);
        let c = random_metric_tangent(&mut rng, &g2, 0.6);
        assert_eq!(omega_metric(&g2, &h2, &a, &a).unwrap(), 0.0);
        let anti =
            omega_metric(&g2, &h2, &a, &b).unwrap() + omega_metric(&g2, &h2, &b, &a).unwrap();
        assert!(anti.abs() < tol::ANTISYMMETRY);
        let combo = MetricTangent::linear_combination(1.7, &a, -0.4, &b);
        let lhs = omega_metric(&g2, &h2, &combo, &c).unwrap();
        let rhs = 1.7 * omega_metric(&g2, &h2, &a, &c).unwrap()
            - 0.4 * omega_metric(&g2, &h2, &b, &c).unwrap();
        assert!((lhs - rhs).abs() < tol::BILINEARITY);
    }

    #[test]
    fn omega_is_minus_d_theta_riemannian_and_lorentzian() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (g, h) = riemannian_point(17, 3, vec![2, 1, 1]);
        let xi1 = random_metric_tangent(&mut rng, &g, 0.5);
        let xi2 = random_metric_tangent(&mut rng, &g, 0.5);
        let fd = fd_theta_exterior(&g, &h, &xi1, &xi2, tol::FD_STEP).unwrap();
        let direct = omega_metric(&g, &h, &xi1, &xi2).unwrap();
        assert!(
            (fd + direct).abs() < tol::METRIC_FD,
            "{:.3e}",
            (fd + direct).abs()
        );

        let lg = MetricField::lorentzian(vec![1, 1, 1, 1]);
        let lh = random_momentum_field(&mut rng, &lg, 0.8);
        let l1 = random_metric_tangent(&mut rng, &lg, 0.5);
        let l2 = random_metric_tangent(&mut rng, &lg, 0.5);
        let fd_l = fd_theta_exterior(&lg, &lh, &l1, &l2, tol::FD_STEP).unwrap();
        let direct_l = omega_metric(&lg, &lh, &l1, &l2).unwrap();
        assert!((fd_l + direct_l).abs() < tol::METRIC_FD);
    }

    #[test]
    fn omega_is_closed_with_second_order_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let (g, h) = riemannian_point(29, 2, vec![2, 2]);
        let d1 = random_metric_tangent(&mut rng, &g, 0.5);
        let d2 = random_metric_tangent(&mut rng, &g, 0.5);
        let d3 = random_metric_tangent(&mut rng, &g, 0.5);
        let r = fd_closedness_metric(&g, &h, [&d1, &d2, &d3], tol::FD_STEP).unwrap();
        assert!(r < tol::METRIC_FD, "closedness residual {r:.3e}");
        let ratio = crate::fd::order_ratio(
            |s| fd_closedness_metric(&g, &h, [&d1, &d2, &d3], s).unwrap(),
            1e-2,
        );
        assert!((ratio - 4.0).abs() < 0.5, "order ratio {ratio:.3}");
    }

    #[test]
    fn basic_functional_examples_and_defining_property() {
        let g = MetricField::euclidean(2, vec![1, 1]);
        let h = MomentumField::identity(2, 1);
        let r = MomentumField::identity(2, 1);
        assert_eq!(functional_fr(&r, &g, &h).unwrap(), 2.0);
        assert_eq!(
            functional_fr(&r, &g, &MomentumField::zeros(2, 1)).unwrap(),
            0.0
        );

        let xi = xi_fr(&r, &g, &h).unwrap();
        for c in 0..1 {
            assert_eq!(xi.k[c], DMatrix::identity(2, 2));
            assert_eq!(xi.l[c], DMatrix::zeros(2, 2));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (g3, h3) = riemannian_point(31, 3, vec![2, 1, 1]);
        let r3 = random_momentum_field(&mut rng, &g3, 0.7);
        let field = xi_fr(&r3, &g3, &h3).unwrap();
        for _ in 0..3 {
            let probe = random_metric_tangent(&mut rng, &g3, 0.5);
            let fd = fd_metric_derivative(
                |gg, hh| functional_fr(&r3, gg, hh).unwrap(),
                &g3,
                &h3,
                &probe,
                tol::FD_STEP,
            )
            .unwrap();
            let pairing = omega_metric(&g3, &h3, &field, &probe).unwrap();
            assert!(
                (fd - pairing).abs() < tol::METRIC_FD,
                "{:.3e}",
                (fd - pairing).abs()
            );
        }
    }

    #[test]
    fn xi_fr_at_the_identity_point_scales_with_dimension() {
        for d in 1..=4 {
            let g = MetricField::euclidean(d, vec![1; d]);
            let h = MomentumField::identity(d, 1);
            let r = MomentumField::identity(d, 1);
            let xi = xi_fr(&r, &g, &h).unwrap();
            let expected = DMatrix::identity(d, d) * (2.0 - d as f64);
            assert_eq!(xi.k[0], DMatrix::identity(d, d));
            assert_eq!(xi.l[0], expected);
        }
    }

    #[test]
    fn bracket_laws_on_the_metric_phase_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let (g, h) = riemannian_point(53, 2, vec![2, 1]);
        let r = random_momentum_field(&mut rng, &g, 0.7);
        let s = random_momentum_field(&mut rng, &g, 0.7);
        let t = random_momentum_field(&mut rng, &g, 0.7);
        assert_eq!(metric_bracket(&r, &r, &g, &h).unwrap(), 0.0);

        let fa = MetricFunctional::basic("Fr", r.clone());
        let fb = MetricFunctional::basic("Fs", s.clone());
        let fc = MetricFunctional::basic("Ft", t);
        assert!(
            (metric_functional_bracket(&fa, &fb, &g, &h).unwrap()
                - metric_bracket(&r, &s, &g, &h).unwrap())
            .abs()
                < 1e-15
        );

        let prod = metric_functional_product(&fa, &fb).unwrap();
        let lhs = metric_functional_bracket(&prod, &fc, &g, &h).unwrap();
        let rhs = fa.eval(&g, &h).unwrap() * metric_functional_bracket(&fb, &fc, &g, &h).unwrap()
            + metric_functional_bracket(&fa, &fc, &g, &h).unwrap() * fb.eval(&g, &h).unwrap();
        assert!(
            (lhs - rhs).abs() < tol::LEIBNIZ,
            "{:.3e}",
            (lhs - rhs).abs()
        );

        let jac = metric_jacobi_residual(&fa, &fb, &fc, &g, &h, tol::FD_STEP).unwrap();
        assert!(jac < tol::JACOBI_FD, "jacobi residual {jac:.3e}");
        let collapse = metric_jacobi_residual(&fa, &fa, &fb, &g, &h, tol::FD_STEP).unwrap();
        assert!(collapse < 1e-10);
    }

    #[test]
    fn nondegeneracy_witnesses_cover_both_signatures() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let (g, h) = riemannian_point(61, 3, vec![2, 1, 1]);
        let mut xi = random_metric_tangent(&mut rng, &g, 0.6);
        xi.l = vec![DMatrix::zeros(3, 3); g.n_cells()];
        let partner = nondegeneracy_witness_metric(&g, &xi).unwrap();
        assert!(omega_metric(&g, &h, &xi, &partner).unwrap() > 0.0);

        let lg = MetricField::lorentzian(vec![2, 1, 1, 1]);
        let lh = random_momentum_field(&mut rng, &lg, 0.8);
        let mut lxi = random_metric_tangent(&mut rng, &lg, 0.6);
        lxi.l = vec![DMatrix::zeros(4, 4); lg.n_cells()];
        let lpartner = nondegeneracy_witness_metric(&lg, &lxi).unwrap();
        assert!(omega_metric(&lg, &lh, &lxi, &lpartner).unwrap() > 0.0);

        let pure_l = MetricTangent {
            k: vec![DMatrix::zeros(3, 3); g.n_cells()],
            l: xi.k.clone(),
        };
        let lw = nondegeneracy_witness_metric(&g, &pure_l).unwrap();
        assert!(omega_metric(&g, &h, &pure_l, &lw).unwrap().abs() > 0.0);
        assert!(nondegeneracy_witness_metric(&g, &MetricTangent::zeros(3, g.n_cells())).is_none());
    }

    #[test]
    fn short_flows_preserve_signature_and_crossing_flows_fail() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let (g, h) = riemannian_point(71, 2, vec![2, 1]);
        let r = random_momentum_field(&mut rng, &g, 0.4);
        let (g1, h1) = flow_metric(&g, &h, &r, 0.05, 20).unwrap();
        assert_eq!(g1.signature, g.signature);
        assert_eq!(h1.cells.len(), h.cells.len());

        // g(t) = diag(0.2 − t, 1): positive-definite start, eigenvalue
        // crosses zero at t = 0.2
        let g0 = MetricField::new(
            2,
            vec![1, 1],
            (2, 0),
            vec![DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.0, 1.0])],
        )
        .unwrap();
        let h0 = MomentumField::zeros(2, 1);
        let push = MomentumField::new(vec![DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.0])])
            .unwrap();
        let err = flow_metric(&g0, &h0, &push, 0.3, 1).unwrap_err();
        assert!(matches!(
            err,
            Error::SignatureBreach { .. } | Error::DegenerateMetric { .. }
        ));
    }
}
