//! Autonomous contact flows on the unit cotangent bundle of the torus,
//! generated by Hamiltonians `F(p)` that are homogeneous of degree 1 and do
//! not depend on position or time.
//!
//! For this class the relative growth is an explicit maximum over the
//! sphere, `γ(f, g) = max G/F`, and the shape values are `r±(a, f) = F(a)`.

mod growth;
mod hamiltonian;
mod shape;
mod sphere;

pub use growth::{
    gamma_torus, growth_lower_bound, kappa_torus, zk_embed, TorusGroup, TorusGrowth, TorusKappa,
};
pub use hamiltonian::{HamiltonianExpr, HomogeneousHamiltonian, Term};
pub(crate) use hamiltonian::pairing;
pub use shape::{
    check_shape_properties, in_shape_minus, in_shape_plus, shape_values, MomentumPreserving,
    ShapeValues,
};
pub use sphere::{SphereGrid, SphereTable, DEFAULT_CIRCLE_POINTS, DEFAULT_LATTICE_RADIUS};
