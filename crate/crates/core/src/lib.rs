//! Canonical coordinate systems of the three- and N-body problems — Jacobi,
//! Delaunay and Deprit variables — together with a numerical engine that
//! certifies coordinate charts as symplectic.
//!
//! The library is organized around [`phasespace::Chart`], a named invertible
//! coordinate map with a domain predicate and a declared list of conjugate
//! pairs. The shipped charts (Cartesian → Jacobi, planar/spatial Delaunay,
//! Jacobi → Deprit for three and more bodies) are checked by
//! [`symcheck::certify_symplectic`], which differentiates the forward map
//! (central differences or exact dual numbers), forms the Poisson-bracket
//! matrix of the target coordinates and compares it against the canonical
//! pattern. The bracket of the vertical pair `(C_z, φ₂)` — the scalar the
//! invariant-form decomposition leaves undetermined — is reported by
//! [`symcheck::measure_d_factor`] and equals 1 on all shipped charts.
//!
//! Conventions are fixed once in [`phasespace`]: momenta/actions before
//! positions/angles, `{f, g} = Σ ∂f/∂P ∂g/∂Q − ∂f/∂Q ∂g/∂P`, angles in
//! `[0, 2π)`, gravitational constant 1. All types are immutable values and
//! all operations are pure functions; everything is safe to call from any
//! number of threads.

pub mod catalog;
pub mod deprit;
pub mod dual;
pub mod dynamics;
mod error;
pub mod jacobi;
pub mod kepler;
pub mod phasespace;
pub mod symcheck;

pub use error::{Error, Result};
pub use phasespace::{Body, Chart, PhaseState, Vec3};
