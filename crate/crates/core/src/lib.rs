//! Aberration and generalized resolution of orthogonal arrays with
//! qualitative factors.
//!
//! ```
//! use genres::{gwlp, resolution};
//!
//! let oa: genres::OrthogonalArray = "0 0 0\n0 1 1\n1 0 1\n1 1 0".parse().unwrap();
//! assert_eq!(gwlp::gwlp(&oa, 3).unwrap().resolution, Some(3));
//! assert!((resolution::gr(&oa).unwrap() - 3.0).abs() < 1e-12);
//! ```

pub mod array;
pub mod cancor;
pub mod coding;
pub mod error;
pub mod gwlp;
pub mod oracle;
pub mod report;
pub mod resolution;

pub use array::OrthogonalArray;
pub use coding::{Coding, ContrastSet, Scheme};
pub use error::{Error, Result};
