//! Free-theory OPE coefficients by Wick-graph enumeration.

pub mod expr;
pub mod graph;

pub use expr::{Atom, CoefficientRecord, CompiledCoefficient, Monomial, SymbolicCoefficient};
pub use graph::{enumerate_wick_graphs, for_each_wick_graph, free_ope_coefficient, WickGraph};
