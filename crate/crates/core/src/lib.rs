//! Lip-γ jets on finite point clouds.
//!
//! A jet stores a value and derivative levels at every point of a cloud. The
//! crate certifies its Lip-γ norm from Taylor remainders, and provides the
//! operations that preserve the class: embedding into a lower grade,
//! products, composition, local inverses, constant-rank normal forms, and
//! flows of vector fields.
//!
//! ```
//! use lipjet::jet::{certify, grid_1d, LipGrade, LipJet};
//! use lipjet::smooth::ExprMap;
//! use lipjet::tensor::NormFamily;
//!
//! let f = ExprMap::parse(1, &["x0^3"]).unwrap();
//! let jet = LipJet::from_map(&f, grid_1d(-1.0, 1.0, 9), LipGrade::new(2.5).unwrap()).unwrap();
//! let cert = certify(&jet, &NormFamily::ellinf()).unwrap();
//! assert!(cert.m >= 3.0);
//! ```

pub mod calculus;
pub mod cli;
pub mod error;
pub mod expr;
pub mod flow;
pub mod inverse;
pub mod jet;
pub mod linalg;
pub mod optimize;
pub mod poly;
pub mod smooth;
pub mod tensor;

pub use error::{LipError, Result};
