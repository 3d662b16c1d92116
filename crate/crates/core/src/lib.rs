//! Stationary random integer vector fields on the square lattice whose
//! divergence is 1 with probability tending to one, built from recursive
//! spanning-tree fragments.
//!
//! * [`lattice`]: vertices, oriented edges, antisymmetric fields, divergence.
//! * [`fragment`]: the level-`n` fragments and their unit-source flows.
//! * [`ensemble`]: periodic tilings, the uniform shift ensemble `v_n`, and
//!   exact laws of divergence, edge values and finite windows.
//! * [`analysis`]: tail bounds, half moments, total-variation convergence
//!   diagnostics, and the one-dimensional impossibility check.
//! * [`smoothing`]: the field convolved with the unit-square indicator.
//!
//! ```
//! use divfield::{ensemble, fragment, lattice::Axis, Level};
//!
//! let frag = fragment::build_fragment(2).unwrap();
//! assert_eq!(ensemble::div_law(Level::new(2).unwrap()).to_string(), "{-8: 1/9, +1: 8/9}");
//! assert_eq!(ensemble::edge_law(&frag, Axis::H).to_string(), "{-3: 1/9, +0: 7/9, +3: 1/9}");
//! ```

pub mod analysis;
pub mod ensemble;
pub mod error;
pub mod fragment;
pub mod lattice;
pub mod law;
pub mod smoothing;

pub use error::{Error, Result};
pub use fragment::{FlowTree, Fragment, Level};
pub use law::{ExactDist, Rational, WindowLaw};
