//! Rank-`r` structure of the full linear monoid `M_n(F_q)` and certified
//! presentations of the maximal subgroups of its free idempotent generated
//! semigroup.
//!
//! The pipeline: enumerate `Y_r`/`X_r` ([`enumeration`]), tabulate products
//! ([`tables`]), build the identity graph with its spanning tree and close
//! it under squares ([`deltagraph`]), connect equal labels by strong paths
//! ([`connectivity`]), then collapse the presentation and check every step
//! ([`presentation`], [`checker`]).

pub mod checker;
pub mod connectivity;
pub mod counts;
pub mod deltagraph;
pub mod dsu;
pub mod enumeration;
mod error;
pub mod gf;
pub mod matspace;
pub mod presentation;
pub mod squares;
pub mod tables;
pub mod textfmt;

pub use error::{Error, Result};
pub use gf::{make_field, Field, FieldCtx, FqElem};
pub use matspace::{Mat, SubsetR};
