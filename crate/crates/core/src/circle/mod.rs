//! Lifts of orientation-preserving circle diffeomorphisms.
//!
//! The cone is `{f : f(x) >= x}`, so `f >= g` means `f(x) >= g(x)` for
//! every `x`. The unit translation `e` is central and dominant, and the
//! relative growth of two dominants is a ratio of rotation numbers.

mod lift;
mod model;
mod rotation;

pub use lift::{CircleLift, Harmonic, Primitive, TAU_EVAL};
pub use model::{CircleGroup, CircleOrderSettings};
pub use rotation::{flow, gamma_exact, rotation_number, translation_e};
