//! Numerical laboratory for the generalized Ricci flow
//! `∂t g = −2 Ric + ½ H²`, `∂t H = −Δ_d H`.
//!
//! The crate is organised by reduction:
//!
//! * [`ode`]: adaptive Dormand–Prince 5(4) integration with dense output and
//!   event location, shared by every dynamic module.
//! * [`warped`]: curvature, torsion and soliton residuals for rotationally
//!   symmetric data `dr² + φ(r)² g_{S²}`, `H = h(r) dV`.
//! * [`shooter`]: the phase plane `u = φ^{3/2}` of the normalized soliton
//!   equation and its milestone certificate on the smooth-origin branch.
//! * [`cylinder`]: the homogeneous `S² × S¹` flow, its singularity, the blowup
//!   limit and the divergence of the torsion integral.
//! * [`entropy`]: conjugate heat weights, the shrinking entropy `W₋` and its
//!   derivative formula, plus pointwise identities on the explicit soliton.
//! * [`hodge`]: exterior calculus on flat periodic grids used to check the
//!   twisted codifferential identities numerically.

pub mod csv;
pub mod cylinder;
pub mod entropy;
mod error;
pub mod hodge;
pub mod ode;
pub mod shooter;
pub mod warped;

pub use error::{Error, Result};
