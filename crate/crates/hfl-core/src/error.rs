//! Error types shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("generator or element is not invertible")]
    NotInvertible,
    #[error("element budget exceeded: group has more than {budget} elements")]
    BudgetExceeded { budget: usize },
    #[error("generators have mismatched size or modulus")]
    MixedGenerators,
    #[error("element does not belong to the group")]
    NotAMember,
    #[error("subgroup is not contained in the ambient group")]
    NotASubgroup,
    #[error("empty generating set needs explicit size and modulus")]
    EmptyGenerators,
    #[error("decomposition check failed: {0}")]
    DecompositionFailed(String),
    #[error("cache error: {0}")]
    Cache(String),
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("no auxiliary prime found below {bound} for exponent {exponent}")]
    NoAuxiliaryPrime { exponent: u64, bound: u64 },
    #[error("inner product is not an integer")]
    NonIntegralInnerProduct,
    #[error("character table internal check failed: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Error)]
pub enum ModuleError {
    #[error("rank decision is ambiguous: gap {gap:.3e} below required {required:.1e}")]
    RankAmbiguous { gap: f64, required: f64 },
    #[error("multiplicity {value} is not an integer within {tol:.1e}")]
    NonIntegralMultiplicity { value: f64, tol: f64 },
    #[error("operator does not commute with the group action (residual {0:.3e})")]
    NotEquivariant(f64),
    #[error("dimension budget exceeded: {needed} > {budget}")]
    DimBudget { needed: usize, budget: usize },
    #[error("no module model found for an irreducible character (degree {degree})")]
    ModelNotFound { degree: u64 },
    #[error("group is not a recognized direct product")]
    NotAProduct,
    #[error("eigenvalue {0} outside (0,1] beyond tolerance")]
    SpectrumOutOfRange(f64),
}
