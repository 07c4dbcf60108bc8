//! Numerical laboratory for the quantum–classical correspondence of the
//! rational gl(2) spin chain: Bethe roots, fused transfer-matrix eigenvalues,
//! the master T-operator as a Schur series, its Hirota equation, and the
//! Ruijsenaars–Schneider motion of its zeros.

pub mod bethe;
pub mod criteria;
pub mod exec;
pub mod fusion;
pub mod hirota;
pub mod linalg;
pub mod master;
pub mod poly;
pub mod rsflow;
pub mod spinchain;
pub mod symfun;

pub use exec::Execution;
pub use num_complex::Complex64 as C64;
pub use poly::{ComplexPolynomial, PolyError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
