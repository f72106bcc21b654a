//! Central tolerance table.
//!
//! Every numerical gate in the library and in the verification suites reads
//! from here, so a tolerance is never duplicated as a magic number at a call
//! site. Constants are grouped by the mechanism that sets their scale:
//! machine-epsilon identities (quadratures of band-limited data), O(step^2)
//! finite-difference residuals, and O(N^-k) spectral truncation effects.

/// Gate on |∮ α dt| when a primitive of a 1-form is requested.
/// Exact integrands are band-limited here, so the period is pure roundoff.
pub const EXACTNESS_GATE: f64 = 1e-9;

/// Antisymmetry defect |Ω(a,b) + Ω(b,a)| for every pairing.
/// Algebraically zero; the gate only absorbs accumulated roundoff.
pub const ANTISYMMETRY: f64 = 1e-13;

/// Bilinearity defect |Ω(a + 2b, c) - Ω(a,c) - 2Ω(b,c)|.
pub const BILINEARITY: f64 = 1e-12;

/// Pairing residual against a tangential shift (Y, L_Y η).
/// The shifted integrand is a total derivative, killed exactly by the
/// trapezoid rule on band-limited data.
pub const BASICNESS: f64 = 1e-9;

/// Residual for finite-difference identities on 2-forms
/// (closedness, -dΘ = Ω, Hamiltonian-field defining property).
/// Central differences at `FD_STEP` leave O(step^2) ≈ 1e-8 per term.
pub const FD_FORM_RESIDUAL: f64 = 1e-6;

/// Default step for all central differences.
pub const FD_STEP: f64 = 1e-4;

/// |Ω(x_1, x_2) - Ω_red(x_1, x_2)| after Moser normalization, n = 1.
pub const REDUCTION_EQUIVALENCE: f64 = 1e-8;

/// Max pointwise defect of moser ∘ moser⁻¹ style round trips.
pub const MOSER_ROUNDTRIP: f64 = 1e-8;

/// Same, for weightings with a closed-form normalizing diffeomorphism.
pub const MOSER_ANALYTIC: f64 = 1e-10;

/// Drift of the action integral along a Hamiltonian loop flow, T = 1.
pub const ACTION_DRIFT: f64 = 1e-6;

/// |A(unit circle) + π|; the integrand is band-limited, so roundoff only.
pub const ACTION_CIRCLE: f64 = 1e-10;

/// Moment-map compatibility: FD directional derivative of the evaluation
/// versus the pairing against a Hamiltonian tangent.
pub const MOMENT_CONDITION: f64 = 1e-6;

/// Equivariance: flowed-then-evaluated versus evaluated-then-transported.
pub const EQUIVARIANCE: f64 = 1e-6;

/// |kks_pairing - omega_weighted| on Hamiltonian tangents with zero
/// weight-component. The two routes share every floating-point operation
/// except association order.
pub const KKS_MATCH: f64 = 1e-12;

/// Leibniz rule defect {FG, H} - F{G, H} - {F, H}G.
pub const LEIBNIZ: f64 = 1e-10;

/// Jacobi cyclic sum via nested finite differences.
pub const JACOBI_FD: f64 = 1e-5;

/// Exactness residual of a functional's Hamiltonian field (leaf tangency).
pub const LEAF_TANGENCY: f64 = 1e-10;

/// |{∫q dη, ∫p dη} + 1| on a unit-mass loop.
pub const COORD_BRACKET: f64 = 1e-12;

/// Quadrature versus Fourier-series route for the same pairing.
pub const PARSEVAL: f64 = 1e-12;

/// FD residuals in the metric-field phase space (same mechanism as
/// `FD_FORM_RESIDUAL`, kept separate so it can be overridden alone).
pub const METRIC_FD: f64 = 1e-6;

/// Trace-form versus explicit index-summation evaluation of metric pairings.
pub const TRACE_INDEX: f64 = 1e-13;

/// |det g| at or below this is treated as degenerate.
pub const DET_GUARD: f64 = 1e-10;

/// Minimum |x'(t_k)| for a sample set to count as an immersed loop.
pub const IMMERSION: f64 = 1e-8;

/// Newton / bisection stop for inverting circle diffeomorphisms.
pub const NEWTON_PARAM: f64 = 1e-12;

/// |∮ w dt - 1| for unit-mass weightings.
pub const WEIGHT_MASS: f64 = 1e-12;

/// Default gate for `isodrast_drift` in the flow CLI.
pub const DRIFT_GATE_DEFAULT: f64 = 1e-5;
