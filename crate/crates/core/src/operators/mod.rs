//! Coupling operators built from jump systems.

pub mod generator;
pub mod kernel;
pub mod system;
pub mod test_function;

pub use generator::{check_lemma_bound, compare_operators, eval_generator, ComparisonCase, ComparisonRow, LemmaCheck, LemmaKind};
pub use kernel::{
    build_kernel, kernel_generator, marginal_generator, verify_marginality, verify_symmetry_condition,
    CouplingKernel, KernelAtom, MarginalityReport, PairFunction, SymmetryReport,
};
pub use system::{build_multiplicative_system, JumpSystem, Map, Q0Profile, Row, RowRate, Sigma, SubMeasure};
pub use test_function::TestFunction;
