//! Pointwise spray and Finsler curvature by truncated Taylor jets.
//!
//! Every geometric field is evaluated as a [`jet::Jet`] about a sampled
//! [`spray::TangentPoint`]; derivative operators (vertical, horizontal,
//! covariant) are algebra on those jets. On top of the base curvature stack
//! the crate builds volume forms and the S-curvature, the projective spray,
//! the Weyl and Berwald-Weyl curvatures, and a verification layer that
//! checks the identities relating them.

pub mod catalog;
pub mod error;
pub mod expr;
pub mod jet;
pub mod measures;
pub mod par;
pub mod projective;
pub mod spray;
pub mod tensor;
pub mod verify;

pub use error::{GeomError, Result};
pub use jet::{Jet, JetSpace, MultiIndex};
pub use spray::TangentPoint;

/// Default truncation degree for metric inputs.
///
/// The Berwald-Weyl curvature by definition takes five derivatives of the
/// geodesic coefficients, which are themselves second derivatives of `F²`.
pub const DEFAULT_DEGREE: usize = 7;
