//! Numerical symplectic structures on spaces of weighted loops and
//! momentum-weighted metric fields, with verification suites that test the
//! defining identities by quadrature and finite differences.

pub mod ambient;
pub mod band;
pub mod error;
pub mod expr;
pub mod fd;
pub mod flows;
pub mod io;
pub mod loops;
pub mod metrics;
pub mod moment_map;
pub mod pairings;
pub mod poisson;
pub mod report;
pub mod spectral;
pub mod suites;
pub mod tol;

pub use ambient::{
    dictionary, hamiltonian_vector_field, poisson_bracket_ambient, poly_dictionary, AmbientSpace,
    HamiltonianFn,
};
pub use error::{Error, Result};
