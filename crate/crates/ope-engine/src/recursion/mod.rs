//! First-order coupling-constant recursion for OPE coefficients and the
//! quantum BRST and antibracket matrices.

pub mod integrand;
pub mod integrate;
pub mod interaction;
pub mod matrices;

pub use integrand::{recursion_integrand, recursion_integrand_symbolic, BoundIntegrand, SubtractedIntegrand};
pub use integrate::{integrate_bound, integrate_first_order, ir_tail, local_slopes, FirstOrderResult, SlopeReport, TailReport};
pub use interaction::{build_interaction_operator, is_total_derivative, ClosureWarning, InteractionOperator, LagrangianTerm};
pub use matrices::{
    bvq_recursion_step, stq_recursion_step, BMatrix, Entry, Increment, Layer, PerturbativeCoefficient, QMatrix, ReducedBMatrix,
};
