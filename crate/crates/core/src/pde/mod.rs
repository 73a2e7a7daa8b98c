//! P1 finite elements for the degenerate Dirichlet problem
//! `div(w ∇u) = f` in `D`, `u = 0` on `∂D`, in the plane.

mod fem;
mod mesh;
mod sparse;

pub use fem::{
    assemble, convergence_rate, energy_error, l2_error, solvability_integral, solve_dirichlet, solve_dirichlet_checked,
    stiffness_full, weak_residual, FemSolution, LinearSystem, RateEstimate, SolveOptions,
};
pub use mesh::{triangulate, Mesh, MeshDomain};
pub use sparse::{pcg, CgOutcome, CsrMatrix};
