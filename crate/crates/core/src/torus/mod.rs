//! Drift frequency, the small-denominator series `U` and the torus
//! conjugacy `ψ` with `θ(t) = νt + ψ(νt, ηνt)`.

mod conjugacy;
mod drift;
mod field;

pub use conjugacy::{
    build_g, build_u, conjugacy, psi_residual, reconstruct_theta, solve_psi, Conjugacy, COEFF_FLOOR, DENOM_FLOOR,
    ROOT_TOL,
};
pub use drift::{agm, drift_birkhoff, drift_elliptic, drift_quadrature, elliptic_k, DriftMethod, DriftResult};
pub use field::{TorusField, TorusSummary};
