//! Interaction operator `O_I = Σ_E I^E O_E` from a classical Lagrangian.

use crate::algebra::{derivative_expand, enumerate_basis_with, BasisOptions, CompositeOperator, Dim, MultiIndex, OperatorCombination, Theory};
use crate::error::{OpeError, Result};
use crate::ward::apply_free_brst_combination;
use num::{BigInt, BigRational, One, Zero};
use std::collections::BTreeMap;

/// One Lagrangian term `coeff · g^power · O`.
#[derive(Clone, Debug)]
pub struct LagrangianTerm {
    pub operator: OperatorCombination,
    pub g_power: u32,
    pub coeff: BigRational,
}

/// `I^E` graded by the order in `g` at which it enters `O_I`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InteractionOperator {
    pub layers: BTreeMap<u32, OperatorCombination>,
}

impl InteractionOperator {
    pub fn zero() -> Self {
        InteractionOperator::default()
    }

    pub fn from_combination(c: OperatorCombination) -> Self {
        let mut layers = BTreeMap::new();
        if !c.is_zero() {
            layers.insert(0, c);
        }
        InteractionOperator { layers }
    }

    /// The order-`g⁰` coefficients, empty if absent.
    pub fn leading(&self) -> OperatorCombination {
        self.layers.get(&0).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.layers.values().all(|c| c.is_zero())
    }

    /// Adds `∂^a O` to the leading layer, expanded into monomials.
    pub fn with_total_derivative(&self, t: &Theory, a: &MultiIndex, o: &OperatorCombination) -> Self {
        let mut out = self.clone();
        let layer = out.layers.entry(0).or_default();
        for (op, c) in &o.terms {
            for (m, k) in derivative_expand(t, a, op) {
                layer.add_term(m, c * BigRational::from_integer(BigInt::from(k)));
            }
        }
        out
    }
}

/// Warning raised when `q̂ O_I` is not visibly a total derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosureWarning {
    pub order: u32,
    pub residual: String,
}

/// `O_I = ∂_g L`, layer by layer, dropping field-independent constants.
/// Every term must have dimension at most 4. The closure check runs only for
/// theories that declare a BRST differential.
pub fn build_interaction_operator(t: &Theory, lagrangian: &[LagrangianTerm]) -> Result<(InteractionOperator, Vec<ClosureWarning>)> {
    let mut out = InteractionOperator::zero();
    let four = Dim::from_integer(4);
    for term in lagrangian {
        for op in term.operator.terms.keys() {
            if op.dimension > four {
                return Err(OpeError::DimensionViolation(format!("Lagrangian term `{}` has dimension above 4", op.label(t))));
            }
        }
        if term.g_power == 0 {
            continue;
        }
        let layer = out.layers.entry(term.g_power - 1).or_default();
        let factor = &term.coeff * BigRational::from_integer(BigInt::from(term.g_power));
        for (op, c) in &term.operator.terms {
            if op.is_unit() {
                continue;
            }
            layer.add_term(op.clone(), c * &factor);
        }
    }
    out.layers.retain(|_, c| !c.is_zero());
    let mut warnings = Vec::new();
    if let Some(l0) = out.layers.get(&0).filter(|_| !t.brst.is_empty()) {
        let image = apply_free_brst_combination(t, l0)?;
        if !is_total_derivative(t, &image)? {
            warnings.push(ClosureWarning { order: 0, residual: image.label(t) });
        }
    }
    Ok((out, warnings))
}

/// Whether `r` lies in the span of `∂_a M` over monomials `M`, decided by
/// exact elimination within each field-content sector.
pub fn is_total_derivative(t: &Theory, r: &OperatorCombination) -> Result<bool> {
    if r.is_zero() {
        return Ok(true);
    }
    // Group by field content; derivatives map each sector into itself.
    let mut sectors: BTreeMap<Vec<(u16, [u8; 2])>, OperatorCombination> = BTreeMap::new();
    for (op, c) in &r.terms {
        let key: Vec<(u16, [u8; 2])> = op.factors.iter().map(|f| (f.field, f.idx)).collect();
        sectors.entry(key).or_default().add_term(op.clone(), c.clone());
    }
    for (content, part) in sectors {
        let dim = part.terms.keys().next().expect("non-empty sector").dimension;
        if dim < Dim::one() || part.terms.keys().any(|o| o.dimension != dim) {
            return Ok(false);
        }
        let lower = dim - Dim::one();
        let n = content.len();
        let opts = BasisOptions { factor_counts: Some(vec![n]), ..Default::default() };
        let basis = enumerate_basis_with(t, lower, &opts)?;
        let candidates: Vec<&CompositeOperator> = basis
            .operators
            .iter()
            .filter(|o| o.dimension == lower && o.factors.iter().map(|f| (f.field, f.idx)).collect::<Vec<_>>() == content)
            .collect();
        let mut columns: Vec<BTreeMap<CompositeOperator, BigRational>> = Vec::new();
        for m in candidates {
            for axis in 0..4 {
                let mut col = BTreeMap::new();
                for (op, k) in derivative_expand(t, &MultiIndex::unit(axis), m) {
                    col.insert(op, BigRational::from_integer(BigInt::from(k)));
                }
                if !col.is_empty() {
                    columns.push(col);
                }
            }
        }
        if !in_span(&columns, &part.terms) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn in_span(columns: &[BTreeMap<CompositeOperator, BigRational>], target: &BTreeMap<CompositeOperator, BigRational>) -> bool {
    let mut rows: Vec<CompositeOperator> = columns.iter().flat_map(|c| c.keys().cloned()).collect();
    rows.extend(target.keys().cloned());
    rows.sort();
    rows.dedup();
    let idx = |op: &CompositeOperator| rows.binary_search(op).expect("row present");
    let ncol = columns.len();
    // Augmented matrix [columns | target], eliminated row by row.
    let mut m: Vec<Vec<BigRational>> = vec![vec![BigRational::zero(); ncol + 1]; rows.len()];
    for (j, c) in columns.iter().enumerate() {
        for (op, v) in c {
            m[idx(op)][j] = v.clone();
        }
    }
    for (op, v) in target {
        m[idx(op)][ncol] = v.clone();
    }
    let mut r = 0;
    for col in 0..ncol {
        let Some(p) = (r..m.len()).find(|&i| !m[i][col].is_zero()) else { continue };
        m.swap(r, p);
        let inv = BigRational::one() / &m[r][col];
        for k in col..=ncol {
            m[r][k] = &m[r][k] * &inv;
        }
        for i in 0..m.len() {
            if i != r && !m[i][col].is_zero() {
                let f = m[i][col].clone();
                for k in col..=ncol {
                    let d = &f * &m[r][k];
                    m[i][k] -= d;
                }
            }
        }
        r += 1;
    }
    m[r..].iter().all(|row| row[ncol].is_zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{parse_combination, parse_operator};

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn phi4_coupling() {
        let t = Theory::scalar();
        let l = [LagrangianTerm { operator: parse_combination(&t, "phi^4").unwrap(), g_power: 1, coeff: q(1, 24) }];
        let (i, w) = build_interaction_operator(&t, &l).unwrap();
        assert!(w.is_empty());
        let l0 = i.leading();
        assert_eq!(l0.terms.len(), 1);
        assert_eq!(l0.terms[&parse_operator(&t, "phi^4").unwrap()], q(1, 24));
    }

    #[test]
    fn constants_dropped_and_powers_shift() {
        let t = Theory::scalar();
        let l = [
            LagrangianTerm { operator: parse_combination(&t, "1").unwrap(), g_power: 1, coeff: q(5, 1) },
            LagrangianTerm { operator: parse_combination(&t, "phi^4").unwrap(), g_power: 2, coeff: q(1, 1) },
        ];
        let (i, _) = build_interaction_operator(&t, &l).unwrap();
        assert!(i.layers.get(&0).is_none());
        assert_eq!(i.layers[&1].terms[&parse_operator(&t, "phi^4").unwrap()], q(2, 1));
    }

    #[test]
    fn dimension_guard() {
        let t = Theory::scalar();
        let l = [LagrangianTerm { operator: parse_combination(&t, "phi^5").unwrap(), g_power: 1, coeff: q(1, 1) }];
        assert!(matches!(build_interaction_operator(&t, &l), Err(OpeError::DimensionViolation(_))));
    }

    #[test]
    fn total_derivative_detection() {
        let t = Theory::scalar();
        assert!(is_total_derivative(&t, &parse_combination(&t, "phi*d1phi").unwrap()).unwrap());
        assert!(is_total_derivative(&t, &parse_combination(&t, "phi*d1d1phi + d1phi^2").unwrap()).unwrap());
        assert!(!is_total_derivative(&t, &parse_combination(&t, "phi*d1d1phi").unwrap()).unwrap());
        assert!(!is_total_derivative(&t, &parse_combination(&t, "phi^2").unwrap()).unwrap());
    }

    #[test]
    fn gauge_invariant_lagrangian_closes() {
        // ŝ₀ of the Maxwell-type density F₁₂F₁₂ vanishes; adding cbar∂A gives a derivative.
        let t = Theory::qed_free();
        let f2 = parse_combination(&t, "d1A2*d1A2 - 2*d1A2*d2A1 + d2A1*d2A1").unwrap();
        let l = [LagrangianTerm { operator: f2, g_power: 1, coeff: q(1, 1) }];
        let (_, w) = build_interaction_operator(&t, &l).unwrap();
        assert!(w.is_empty());
        let bad = [LagrangianTerm { operator: parse_combination(&t, "A1*A1").unwrap(), g_power: 1, coeff: q(1, 1) }];
        let (_, w) = build_interaction_operator(&t, &bad).unwrap();
        assert_eq!(w.len(), 1);
    }
}
