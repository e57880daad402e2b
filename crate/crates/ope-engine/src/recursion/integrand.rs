//! Subtracted first-order integrand over the insertion point `y`.
//!
//! Slot 0 is `y`, slots `1..=s` are `x_1..x_s`, and `x_s` is the expansion
//! point. Terms are grouped by their `y`-dependent atoms so that the
//! subtractions cancel before any floating-point evaluation.

use crate::algebra::{enumerate_basis, CompositeOperator, Dim, OperatorCombination, Theory};
use crate::covariance::CovarianceJet;
use crate::error::{OpeError, Result};
use crate::wick::{free_ope_coefficient, Atom, Monomial, SymbolicCoefficient};
use std::collections::BTreeMap;

/// Symbolic integrand, split into `(y-monomial, x-coefficient)` groups.
#[derive(Clone, Debug)]
pub struct SubtractedIntegrand {
    pub s: usize,
    pub mu: f64,
    pub groups: Vec<(Monomial, SymbolicCoefficient)>,
}

fn check_interaction(t: &Theory, i: &OperatorCombination) -> Result<()> {
    let (one, four) = (Dim::from_integer(1), Dim::from_integer(4));
    for e in i.terms.keys() {
        if e.dimension < one || e.dimension > four {
            return Err(OpeError::DimensionViolation(format!(
                "interaction term `{}` has dimension outside [1, 4]",
                e.label(t)
            )));
        }
        if e.parity(t) == 1 {
            return Err(OpeError::InvalidArgument(format!("interaction term `{}` is Grassmann-odd", e.label(t))));
        }
    }
    Ok(())
}

/// Operators of dimension at most `d` (strictly below if `strict`).
fn operators_below(t: &Theory, d: Dim, strict: bool) -> Result<Vec<CompositeOperator>> {
    if d < Dim::from_integer(0) {
        return Ok(vec![]);
    }
    let basis = enumerate_basis(t, d)?;
    Ok(basis.operators.into_iter().filter(|o| !strict || o.dimension < d).collect())
}

fn shift_map(s: usize) -> Vec<usize> {
    (0..s).map(|i| i + 1).collect()
}

/// Full symbolic integrand
/// `Σ_E I^E [ −C^B_{EA⃗}(y,x⃗) + Σ_{[C]<[B]} C^C_{A⃗}(x⃗) C^B_{EC}(y,x_s)
///           + Σ_k Σ_{[C]≤[A_k]} C^C_{EA_k}(y,x_k) C^B_{A_1…C…A_s}(x⃗) ]`.
pub fn recursion_integrand_symbolic(
    t: &Theory,
    a: &[CompositeOperator],
    b: &CompositeOperator,
    i: &OperatorCombination,
    mu: f64,
) -> Result<SymbolicCoefficient> {
    check_interaction(t, i)?;
    let s = a.len();
    if s == 0 {
        return Err(OpeError::InvalidArgument("need at least one operator in the product".into()));
    }
    let n = s + 1;
    let mut out = SymbolicCoefficient::zero(n, mu);
    if i.is_zero() {
        return Ok(out);
    }
    let below_b = operators_below(t, b.dimension, true)?;
    let below_a: Vec<Vec<CompositeOperator>> = a.iter().map(|ak| operators_below(t, ak.dimension, false)).collect::<Result<_>>()?;
    // C^C_{A⃗}(x⃗) and C^B_{…C…}(x⃗) do not depend on E; compute once.
    let mut lower_a: Vec<(CompositeOperator, SymbolicCoefficient)> = Vec::new();
    for c in &below_b {
        let v = free_ope_coefficient(t, a, c, mu)?;
        if !v.is_zero() {
            lower_a.push((c.clone(), v.remap(&shift_map(s), n)?));
        }
    }
    let mut replaced: Vec<Vec<(CompositeOperator, SymbolicCoefficient)>> = Vec::with_capacity(s);
    for k in 0..s {
        let mut row = Vec::new();
        for c in &below_a[k] {
            let mut list = a.to_vec();
            list[k] = c.clone();
            let v = free_ope_coefficient(t, &list, b, mu)?;
            if !v.is_zero() {
                row.push((c.clone(), v.remap(&shift_map(s), n)?));
            }
        }
        replaced.push(row);
    }
    let ident: Vec<usize> = (0..n).collect();
    for (e, ie) in &i.terms {
        let mut list = vec![e.clone()];
        list.extend_from_slice(a);
        let t1 = free_ope_coefficient(t, &list, b, mu)?.remap(&ident, n)?;
        out.add_scaled(&t1, &-ie.clone());
        for (c, ca) in &lower_a {
            let ceb = free_ope_coefficient(t, &[e.clone(), c.clone()], b, mu)?;
            if ceb.is_zero() {
                continue;
            }
            out.add_scaled(&ca.mul(&ceb.remap(&[0, s], n)?), ie);
        }
        for k in 0..s {
            for (c, cb) in &replaced[k] {
                let cea = free_ope_coefficient(t, &[e.clone(), a[k].clone()], c, mu)?;
                if cea.is_zero() {
                    continue;
                }
                out.add_scaled(&cea.remap(&[0, k + 1], n)?.mul(cb), ie);
            }
        }
    }
    Ok(out)
}

/// Splits each monomial into the atoms touching point 0 and the rest, and
/// sums the rest symbolically per `y`-monomial; vanishing groups are dropped.
pub fn split_y(e: &SymbolicCoefficient) -> Vec<(Monomial, SymbolicCoefficient)> {
    let mut groups: BTreeMap<Monomial, SymbolicCoefficient> = BTreeMap::new();
    for (m, c) in e.terms() {
        let (ym, xm): (Monomial, Monomial) = m.iter().partition(|(a, _)| a.points().0 == 0);
        groups
            .entry(ym)
            .or_insert_with(|| SymbolicCoefficient::zero(e.npoints, e.mu))
            .add_term(xm, c.clone());
    }
    groups.into_iter().filter(|(_, v)| !v.is_zero()).collect()
}

impl SubtractedIntegrand {
    pub fn build(t: &Theory, a: &[CompositeOperator], b: &CompositeOperator, i: &OperatorCombination, mu: f64) -> Result<Self> {
        let e = recursion_integrand_symbolic(t, a, b, i, mu)?;
        Ok(SubtractedIntegrand { s: a.len(), mu, groups: split_y(&e) })
    }

    pub fn from_expression(e: &SymbolicCoefficient) -> Self {
        SubtractedIntegrand { s: e.npoints - 1, mu: e.mu, groups: split_y(e) }
    }

    pub fn is_zero(&self) -> bool {
        self.groups.is_empty()
    }

    /// Every surviving group carries a covariance attached to `y`, so the
    /// integrand decays like `e^{−μ²y²/4}` at large `|y|`.
    pub fn is_ir_safe(&self) -> bool {
        self.groups
            .iter()
            .all(|(m, _)| m.iter().any(|(a, _)| matches!(a, Atom::Prop { .. })))
    }

    /// Largest derivative order on a `y`-covariance.
    pub fn max_y_order(&self) -> u32 {
        self.groups
            .iter()
            .flat_map(|(m, _)| m.iter())
            .filter_map(|(a, _)| match a {
                Atom::Prop { u, .. } => Some(u.order()),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Fixes `x⃗` (length `s`), evaluating every `x`-only coefficient once.
    pub fn bind(&self, x: &[[f64; 4]]) -> Result<BoundIntegrand> {
        if x.len() != self.s {
            return Err(OpeError::InvalidArgument(format!("expected {} points, got {}", self.s, x.len())));
        }
        for p in 0..x.len() {
            for q in p + 1..x.len() {
                if x[p] == x[q] {
                    return Err(OpeError::CoincidentPoints(p + 1, q + 1));
                }
            }
        }
        let mut pts = vec![[0.0; 4]];
        pts.extend_from_slice(x);
        let mut atoms: Vec<Atom> = Vec::new();
        let mut terms = Vec::with_capacity(self.groups.len());
        for (ym, xc) in &self.groups {
            let c = xc.evaluate(&pts)?;
            let mut t = Vec::with_capacity(ym.len());
            for (a, p) in ym {
                let id = match atoms.iter().position(|b| b == a) {
                    Some(i) => i,
                    None => {
                        atoms.push(*a);
                        atoms.len() - 1
                    }
                };
                t.push((id, *p as i32));
            }
            terms.push((c, t));
        }
        let mut orders = vec![0u32; self.s + 1];
        for a in &atoms {
            if let Atom::Prop { b, u, .. } = a {
                orders[*b as usize] = orders[*b as usize].max(u.order());
            }
        }
        Ok(BoundIntegrand { x: x.to_vec(), mu: self.mu, atoms, orders, terms })
    }

    pub fn evaluate(&self, y: &[f64; 4], x: &[[f64; 4]]) -> Result<f64> {
        self.bind(x)?.eval(y)
    }
}

/// The integrand at fixed `x⃗` as a function of `y` alone.
#[derive(Clone, Debug)]
pub struct BoundIntegrand {
    pub x: Vec<[f64; 4]>,
    pub mu: f64,
    atoms: Vec<Atom>,
    /// Highest covariance order needed between `y` and each slot.
    orders: Vec<u32>,
    terms: Vec<(f64, Vec<(usize, i32)>)>,
}

impl BoundIntegrand {
    pub fn eval(&self, y: &[f64; 4]) -> Result<f64> {
        let mut jets: Vec<Option<CovarianceJet>> = vec![None; self.orders.len()];
        let mut vals = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            let v = match *a {
                Atom::Prop { b, u, .. } => {
                    let b = b as usize;
                    if jets[b].is_none() {
                        let d = crate::wick::expr::sub(y, &self.x[b - 1]);
                        if d == [0.0; 4] {
                            return Err(OpeError::CoincidentPoints(0, b));
                        }
                        jets[b] = Some(CovarianceJet::new(&d, self.mu, self.orders[b])?);
                    }
                    jets[b].as_ref().expect("jet built").deriv(&u)
                }
                Atom::Coord { b, axis, .. } => y[axis as usize] - self.x[b as usize - 1][axis as usize],
            };
            vals.push(v);
        }
        Ok(self
            .terms
            .iter()
            .map(|(c, t)| t.iter().fold(*c, |acc, &(id, p)| acc * vals[id].powi(p)))
            .sum())
    }

    /// `eval`, with coincident points mapped to 0 (a measure-zero set for
    /// quadrature).
    pub fn eval_or_zero(&self, y: &[f64; 4]) -> f64 {
        self.eval(y).unwrap_or(0.0)
    }
}

/// Pointwise recursion integrand at `y` for points `x⃗`.
pub fn recursion_integrand(
    t: &Theory,
    a: &[CompositeOperator],
    b: &CompositeOperator,
    i: &OperatorCombination,
    y: &[f64; 4],
    x: &[[f64; 4]],
    mu: f64,
) -> Result<f64> {
    SubtractedIntegrand::build(t, a, b, i, mu)?.evaluate(y, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{parse_combination, parse_operator};
    use crate::covariance::eval_covariance;

    fn op(t: &Theory, s: &str) -> CompositeOperator {
        parse_operator(t, s).unwrap()
    }

    fn phi4(t: &Theory) -> OperatorCombination {
        parse_combination(t, "1/24*phi^4").unwrap()
    }

    const X1: [f64; 4] = [0.6, 0.2, -0.3, 0.4];
    const X2: [f64; 4] = [0.0; 4];

    #[test]
    fn empty_interaction_gives_zero() {
        let t = Theory::scalar();
        let e = recursion_integrand_symbolic(&t, &[op(&t, "phi"), op(&t, "phi")], &op(&t, "phi^2"), &OperatorCombination::default(), 1.0).unwrap();
        assert!(e.is_zero());
    }

    #[test]
    fn phi_phi_to_phi2_is_minus_half_product() {
        let t = Theory::scalar();
        let f = SubtractedIntegrand::build(&t, &[op(&t, "phi"), op(&t, "phi")], &op(&t, "phi^2"), &phi4(&t), 1.0).unwrap();
        assert!(f.is_ir_safe());
        let y = [0.1, -0.7, 0.25, 0.9];
        let v = f.evaluate(&y, &[X1, X2]).unwrap();
        let d1 = crate::wick::expr::sub(&y, &X1);
        let expect = -0.5 * eval_covariance(&d1, 1.0).unwrap() * eval_covariance(&y, 1.0).unwrap();
        assert!((v - expect).abs() <= 1e-14 * expect.abs(), "{v} vs {expect}");
    }

    #[test]
    fn unit_target_has_no_lower_sum() {
        // [B] = 0: the sum over [C] < [B] is empty, and without pairs to the
        // insertion the unit coefficient vanishes.
        let t = Theory::scalar();
        let e = recursion_integrand_symbolic(&t, &[op(&t, "phi"), op(&t, "phi")], &CompositeOperator::unit(), &phi4(&t), 1.0).unwrap();
        assert!(e.is_zero());
    }

    #[test]
    fn derivative_insertion_subtractions_cancel() {
        // E = φ∂₁∂₁φ gives ∂₁∂₁C(y − x_k) ~ |y − x_k|⁻⁴ in the first sum; the
        // third sum removes it exactly and nothing else survives.
        let t = Theory::scalar();
        let i = parse_combination(&t, "phi*d1d1phi").unwrap();
        let f = SubtractedIntegrand::build(&t, &[op(&t, "phi"), op(&t, "phi")], &op(&t, "phi^2"), &i, 1.0).unwrap();
        assert!(f.is_zero());
        let raw = recursion_integrand_symbolic(&t, &[op(&t, "phi")], &op(&t, "phi"), &i, 1.0).unwrap();
        assert!(raw.is_zero());
    }

    #[test]
    fn dimension_violation_rejected() {
        let t = Theory::scalar();
        let i = parse_combination(&t, "phi^5").unwrap();
        assert!(matches!(
            recursion_integrand_symbolic(&t, &[op(&t, "phi")], &op(&t, "phi"), &i, 1.0),
            Err(OpeError::DimensionViolation(_))
        ));
    }

    #[test]
    fn coincident_insertion_point_errors() {
        let t = Theory::scalar();
        let f = SubtractedIntegrand::build(&t, &[op(&t, "phi"), op(&t, "phi")], &op(&t, "phi^2"), &phi4(&t), 1.0).unwrap();
        let b = f.bind(&[X1, X2]).unwrap();
        assert_eq!(b.eval(&X1), Err(OpeError::CoincidentPoints(0, 1)));
        assert!(f.bind(&[X1, X1]).is_err());
    }
}
