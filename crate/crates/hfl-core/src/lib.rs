//! Exact character theory and induction/restriction functors for finite
//! matrix groups over Z/p^l.
//!
//! The crate provides a finite-group engine (enumeration, cosets, classes),
//! exact cyclotomic character tables, explicit complex modules with
//! group-algebra idempotents, the induction/restriction functor pair realized
//! as images of intertwining operators, Clifford/orbit-method machinery for
//! abelian congruence kernels, the Sp4 case-study harness, and the Iwahori
//! composition-lattice factorization.

pub mod cache;
pub mod chartab;
pub mod clifford;
pub mod cyclotomic;
pub mod error;
pub mod group;
pub mod hcfun;
pub mod iwahori;
pub mod linalg;
pub mod repmod;
pub mod report;
pub mod sp4;
pub mod zmod;

pub use error::{GroupError, ModuleError, TableError};
pub use group::{CosetSide, FiniteGroup, GroupHom, IwahoriTriple};
pub use zmod::{Zmod, ZmodMatrix};
