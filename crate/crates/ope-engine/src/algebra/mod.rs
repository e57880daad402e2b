//! Fields, multi-indices, canonical monomials and operator bases.

pub mod basis;
pub mod field;
pub mod multi_index;
pub mod operator;

pub use basis::{dimension_gap, enumerate_basis, enumerate_basis_with, BasisOptions, OperatorBasis};
pub use field::{dim_to_f64, format_dim, parse_dim, BrstImage, BrstRule, Dim, FieldKind, FieldSpec, PairingKind, PairingRule, Theory};
pub use multi_index::MultiIndex;
pub use operator::{
    canonicalize, derivative_expand, parse_combination, parse_monomial, parse_operator, parse_rational, CompositeOperator, Factor,
    OperatorCombination,
};
