pub mod berezin;
pub mod cpmap;
pub mod error;
pub mod fock;
pub mod harness;
pub mod linalg;
pub mod similarity;
pub mod symbol;
pub mod wold;

pub use error::{NcError, Result};
