//! Exact toolkit for n-partite binary non-signaling boxes.
//!
//! Boxes are conditional distributions `P(a|x)` over `n` parties with one input bit
//! and one output bit each, stored as dense tables of exact rationals. On top of
//! that representation the crate provides
//!
//! * [`boxes`]: constructors for full-correlation, n-PR and even-parity boxes, mixing,
//!   non-signaling and marginal-uniformity checks;
//! * [`anf`]: Boolean functions in algebraic normal form and the derived monomial
//!   structure (degree-2+ monomials, connected components, exclusive-variable counts);
//! * [`wiring`]: exact composition of boxes under local adaptive wirings, the
//!   PR-box construction of arbitrary full-correlation boxes, party collapsing and
//!   Monte Carlo sampling;
//! * [`distill`]: the two-copy adaptive distillation round, the epsilon map and its
//!   fixed-point analysis;
//! * [`comm`]: one-way channel accounting, isolation plans and the partial
//!   communication distillation pipeline;
//! * [`localdist`]: local deterministic strategies and the exact L1 distance to the
//!   local polytope, solved by the rational simplex in [`lp`];
//! * [`doc`] and [`example`]: the JSON box document and the five-party reproduction
//!   report used by the command-line front end.
//!
//! Party indices are 1-based in every public type that names a party
//! ([`Party`], [`anf::Monomial`]); bit `i` of a packed input or output word belongs
//! to party `i + 1`.

pub mod anf;
pub mod boxes;
pub mod comm;
pub mod distill;
pub mod doc;
mod error;
pub mod example;
pub mod localdist;
pub mod lp;
pub mod rational;
pub mod wiring;

pub use crate::anf::{BooleanFunctionAnf, Monomial, MonomialStructure};
pub use crate::boxes::{ConditionalBox, NoiseFamilyMember, Party};
pub use crate::error::{Error, Result};
pub use crate::rational::Q;

/// Largest party count accepted by box constructors.
pub const MAX_PARTIES: usize = 8;
