//! Collision dynamics of the annular billiard: a unit circle with an eccentric
//! circular obstacle of radius `r` whose center sits at distance `delta` from
//! the origin.
//!
//! The crate is layered bottom-up:
//!
//! * [`phase`]: parameters, the two phase cylinders, the involution and the
//!   named regions and curves.
//! * [`flight`]: the billiard map, the free rotation on the outer circle and the
//!   first return map `G` to the obstacle.
//! * [`linearize`]: the closed-form tangent map `DG` and its finite-difference
//!   oracle.
//! * [`cones`]: sampled hyperbolicity certificates.
//! * [`normal`]: normal periodic orbits and the tangent-normal unfolding.
//! * [`strata`]: singular curves, strips, crossings and symmetric periodic
//!   points coded by words.
//! * [`tangency`]: invariant manifolds and homoclinic tangencies in `r`.

pub mod cones;
pub mod error;
pub mod flight;
pub mod linearize;
pub mod normal;
pub mod par;
pub mod phase;
pub mod polyline;
pub mod roots;
pub mod strata;
pub mod tangency;

pub use error::{Error, Result};
pub use flight::{first_return, g_map, map_inner_to_outer, map_outer, OrbitClass, ReturnRecord};
pub use linearize::{dg_analytic, dg_numeric, JacobianTerms};
pub use par::Execution;
pub use phase::{InnerState, OuterState, Params};
