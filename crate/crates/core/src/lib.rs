//! Exact symbolic analysis of polynomial maps `F: K^n -> K^n` over the
//! rationals or a prime field: Pascal sequences, Pascal finiteness within a
//! bound, inversion by a truncated alternating series, and nilpotency tests
//! for the Jacobian of `H = F - X`.
//!
//! ```
//! use pascalis::{corpus, pascal};
//!
//! let f = corpus::nagata();
//! let status = pascal::pascal_check(&f, 10, pascal::Limits::default()).unwrap();
//! assert_eq!(status.index(), Some(3));
//! ```

pub mod analysis;
pub mod coeff;
pub mod corpus;
mod error;
pub mod mapfile;
pub mod nilpotency;
pub mod pascal;
pub mod poly;
pub mod polymap;

pub use coeff::{Coefficient, FieldSpec};
pub use error::{Error, Resource, Result};
pub use mapfile::{parse_map, serialize_map, MapFile, ParseError};
pub use poly::{Ambient, Budget, ExtDegree, Monomial, Poly, Truncation};
pub use polymap::{ConstMatrix, KellerStatus, NormalForm, PolyMap, PolyMatrix, Triangularity};
