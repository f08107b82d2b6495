//! Numerical library for one-shot quantum decoupling and coding bounds.
//!
//! The crate computes decoupling errors of a bipartite state sent through a
//! quantum channel after a random unitary, the achievability and
//! strong-converse exponent bounds governing them (built from sandwiched and
//! Petz Renyi conditional entropies), and the one-shot quantum coding error
//! terms derived from the same machinery. Exact Haar-twirling identities and
//! reproducible Monte Carlo estimation are included so every bound can be
//! checked against simulation at desk scale.
//!
//! Organization:
//!
//! - [`system`], [`op`], [`density`], [`spectral`]: dense complex
//!   multipartite linear algebra over labeled tensor factors.
//! - [`channel`]: CPTP maps in Kraus form, Choi states, Stinespring
//!   dilations, pinching, unitary operator bases.
//! - [`entropy`]: sandwiched/Petz Renyi conditional entropies with the inner
//!   optimization over conditioning states; all values in nats.
//! - [`haar`]: Haar sampling, seeded Monte Carlo streams, exact
//!   second-moment twirling formulas.
//! - [`decoupling`]: per-unitary and averaged decoupling errors,
//!   achievability/converse bounds, mother/father exponents, Fenchel check.
//! - [`coding`]: one-shot coding error terms and the achievable-region test.
//! - [`json`]: file formats used by the CLI.

#![forbid(unsafe_code)]
// negated comparisons like `!(x >= 0.0)` are NaN guards, not style slips
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod coding;
pub mod decoupling;
pub mod density;
pub mod entropy;
pub mod error;
pub mod haar;
pub mod json;
pub mod op;
pub mod spectral;
pub mod system;

pub use channel::{Channel, UnitaryBasis};
pub use density::{trace_distance, DensityOp};
pub use error::{Error, Result};
pub use op::{CMatrix, Op};
pub use system::SystemSpec;
