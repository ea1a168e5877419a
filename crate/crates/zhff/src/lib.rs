//! Exact engine for a ZH-style graphical calculus over finite fields.
//!
//! The crate is organized bottom-up:
//!
//! - [`field`]: finite fields GF(p^t) presented on a power basis of a root κ
//!   of an irreducible monic polynomial, with the bilinear pairing and the
//!   multiplication/transpose matrices the calculus depends on.
//! - [`scalar`]: exact amplitudes in Z[ω, q^(-1/2)] with a decision procedure
//!   for equality.
//! - [`diagram`]: the port-graph representation of diagrams, generator and
//!   gadget constructors, composition and tensoring.
//! - [`tensor`]: evaluation of diagrams to dense tensors by hyperedge
//!   contraction, both exact and floating-point.
//! - [`rewrite`]: the rule library, matching, rewriting, and soundness
//!   checking.
//! - [`synth`]: synthesis of a diagram from an arbitrary matrix over the
//!   ring of entries, via pseudo-binary factoring and polynomial gadgets.
//! - [`interp`]: the polynomial interpolation pipeline built on the same
//!   machinery, with exact outcome distributions and query accounting.

pub mod diagram;
pub mod field;
pub mod interp;
pub mod rewrite;
pub mod scalar;
pub mod synth;
pub mod tensor;

pub use diagram::{Diagram, DiagramError, Node, NodeId, NodeKind, Phase, Port, Side};
pub use field::{FieldElement, FieldError, FieldSpec, FpMatrix};
pub use rewrite::{
    apply_at, check_soundness, find_matches, instantiate, rule_grid, simplify, soundness_sweep,
    Embedding, RewriteError, RuleId, RuleInstance, RuleParams, SweepRecord,
};
pub use interp::{
    build_u, classical_reduce, interpolate_pipeline, linear_part, oracle_unitary, reconstruct,
    run_interpolation, sample_runs, u_block, InterpError, InterpRun, LinearPoly, OracleBox,
    OutcomeDistribution, PipelineResult, Poly, Reduction, RunCounts, TwoRegisterState,
};
pub use scalar::{CycloInt, Scalar, ScalarError};
pub use synth::{
    formula_to_poly, indicator, phased_postselect, poly_to_diagram, position_formula,
    pseudo_binary_to_diagram, schur_decompose, synthesize, Formula, MultiPoly, PseudoBinary,
};
pub use tensor::{
    contract, contract_numeric, contract_with_strategy, equal_diagrams, generator_tensor,
    is_unitary, ExactTensor, NumTensor, Strategy, TensorError,
};

/// Numerical tolerance used wherever exact values are cross-checked against
/// floating-point evaluation. Overridable through `ZHFF_PRECISION`.
pub fn float_precision() -> f64 {
    static PRECISION: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
    *PRECISION.get_or_init(|| {
        std::env::var("ZHFF_PRECISION")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(1e-9)
    })
}
