//! Free BRST differential on composite operators and the gauge-invariance
//! functional `K` for OPE coefficients.

use crate::algebra::{canonicalize, BrstImage, CompositeOperator, Dim, Factor, MultiIndex, OperatorBasis, OperatorCombination, Theory};
use crate::error::{OpeError, Result};
use crate::wick::{free_ope_coefficient, SymbolicCoefficient};
use num::{BigInt, BigRational, One, Zero};
use std::collections::BTreeMap;

/// `ŝ₀` of one factor as `(sign, factor)`, or `None` if it is annihilated.
fn brst_factor(t: &Theory, f: &Factor) -> Result<Option<(i64, Factor)>> {
    let spec = t.field(f.field as usize);
    let image = t
        .brst_rule(f.field as usize)
        .ok_or_else(|| OpeError::UnknownField(format!("no BRST rule declared for `{}`", spec.name)))?;
    Ok(match image {
        BrstImage::Zero => None,
        BrstImage::Field { target, sign } => {
            let id = t.field_id(target)?;
            Some((*sign as i64, Factor::new(id, f.idx, f.deriv)))
        }
        BrstImage::Gradient { target } => {
            let id = t.field_id(target)?;
            let mu = f.idx[0];
            if mu == 0 {
                return Err(OpeError::InvalidArgument(format!("`{}` has no index for a gradient image", spec.name)));
            }
            Some((1, Factor::new(id, [0, 0], f.deriv.add(&MultiIndex::unit((mu - 1) as usize)))))
        }
    })
}

/// `ŝ₀ op` by the graded Leibniz rule, canonicalized.
pub fn apply_free_brst(t: &Theory, op: &CompositeOperator) -> Result<Vec<(CompositeOperator, BigRational)>> {
    let mut acc = OperatorCombination::default();
    let mut sign = 1i64;
    for (i, f) in op.factors.iter().enumerate() {
        if let Some((s, g)) = brst_factor(t, f)? {
            let mut factors = op.factors.clone();
            factors[i] = g;
            if let Some((c, cs)) = canonicalize(t, factors) {
                acc.add_term(c, BigRational::from_integer(BigInt::from(sign * s * cs)));
            }
        }
        if f.is_odd(t) {
            sign = -sign;
        }
    }
    Ok(acc.terms.into_iter().collect())
}

pub fn apply_free_brst_combination(t: &Theory, c: &OperatorCombination) -> Result<OperatorCombination> {
    let mut out = OperatorCombination::default();
    for (op, k) in &c.terms {
        for (img, v) in apply_free_brst(t, op)? {
            out.add_term(img, k * v);
        }
    }
    Ok(out)
}

/// `Q₀` on a basis: row `A` lists `(B, Q_A^B)`. Images outside the basis are
/// an error, so the basis must be closed under `ŝ₀` up to its cutoff.
#[derive(Clone, Debug)]
pub struct FreeBrstMatrix {
    pub rows: Vec<Vec<(usize, BigRational)>>,
    /// Transposed: for each `B`, the `(A, Q_A^B)` with nonzero entry.
    pub columns: Vec<Vec<(usize, BigRational)>>,
}

impl FreeBrstMatrix {
    pub fn new(basis: &OperatorBasis) -> Result<Self> {
        let t = &basis.theory;
        let n = basis.len();
        let mut rows = vec![Vec::new(); n];
        let mut columns = vec![Vec::new(); n];
        for (a, op) in basis.operators.iter().enumerate() {
            if op.dimension + Dim::one() > basis.d_max {
                // Images leave the basis; rows above the cutoff stay empty.
                continue;
            }
            for (img, v) in apply_free_brst(t, op)? {
                let b = basis
                    .position(&img)
                    .ok_or_else(|| OpeError::Missing(format!("`{}` not in basis", img.label(t))))?;
                rows[a].push((b, v.clone()));
                columns[b].push((a, v));
            }
        }
        Ok(FreeBrstMatrix { rows, columns })
    }

    /// Entries of `Q₀²` that fail to vanish, as `(A, B, value)`.
    pub fn square_residuals(&self) -> Vec<(usize, usize, BigRational)> {
        let mut bad = Vec::new();
        for (a, row) in self.rows.iter().enumerate() {
            let mut acc: BTreeMap<usize, BigRational> = BTreeMap::new();
            for (c, v) in row {
                for (b, w) in &self.rows[*c] {
                    *acc.entry(*b).or_insert_with(BigRational::zero) += v * w;
                }
            }
            bad.extend(acc.into_iter().filter(|(_, v)| !v.is_zero()).map(|(b, v)| (a, b, v)));
        }
        bad
    }
}

/// Labels and symbolic value of `K^B_{A⃗;D}` at distinct points.
#[derive(Clone, Debug)]
pub struct WardFunctional {
    pub b: CompositeOperator,
    pub a: Vec<CompositeOperator>,
    pub d: Dim,
    pub value: SymbolicCoefficient,
    /// Whether a contact term would contribute at coincident points; it is
    /// never included in pointwise values.
    pub has_contact_term: bool,
}

impl WardFunctional {
    pub fn evaluate(&self, points: &[[f64; 4]]) -> Result<f64> {
        self.value.evaluate(points)
    }
}

/// Free-theory `K^B_{A⃗;D}`:
/// `Σ_k ±Σ_C Q_{A_k}^C C^B_{A_1…C…A_s} − Σ_{[C]<D} Q_C^B C^C_{A⃗}`, the sign
/// being the Koszul sign of moving `ŝ₀` past `A_1…A_{k−1}`.
pub fn free_k_functional(
    basis: &OperatorBasis,
    q: &FreeBrstMatrix,
    b: &CompositeOperator,
    a: &[CompositeOperator],
    d: Dim,
    mu: f64,
) -> Result<WardFunctional> {
    let images = a.iter().map(|op| apply_free_brst(&basis.theory, op)).collect::<Result<Vec<_>>>()?;
    let value = k_value(basis, q, b, a, &images, d, mu)?;
    Ok(WardFunctional { b: b.clone(), a: a.to_vec(), d, value, has_contact_term: false })
}

/// `K` given the `ŝ₀` images of each `A_k`.
fn k_value(
    basis: &OperatorBasis,
    q: &FreeBrstMatrix,
    b: &CompositeOperator,
    a: &[CompositeOperator],
    images: &[Vec<(CompositeOperator, BigRational)>],
    d: Dim,
    mu: f64,
) -> Result<SymbolicCoefficient> {
    let t = &basis.theory;
    if d <= b.dimension - Dim::one() {
        return Err(OpeError::InvalidArgument("D must exceed [O_B] - 1".into()));
    }
    let bi = basis.position(b).ok_or_else(|| OpeError::Missing(format!("`{}` not in basis", b.label(t))))?;
    let mut value = SymbolicCoefficient::zero(a.len(), mu);
    let mut koszul = 1i64;
    for k in 0..a.len() {
        for (img, v) in &images[k] {
            let mut list = a.to_vec();
            list[k] = img.clone();
            let c = free_ope_coefficient(t, &list, b, mu)?;
            value.add_scaled(&c, &(v * BigRational::from_integer(BigInt::from(koszul))));
        }
        if a[k].parity(t) == 1 {
            koszul = -koszul;
        }
    }
    for (ci, v) in &q.columns[bi] {
        let c = &basis.operators[*ci];
        if c.dimension >= d {
            continue;
        }
        let coef = free_ope_coefficient(t, a, c, mu)?;
        value.add_scaled(&coef, &-v.clone());
    }
    Ok(value)
}

/// Whether `ŝ₀` annihilates the combination.
pub fn is_brst_closed(t: &Theory, c: &OperatorCombination) -> Result<bool> {
    Ok(apply_free_brst_combination(t, c)?.is_zero())
}

/// Ghost number and dimension both rise by one on every image monomial.
pub fn brst_grading_holds(t: &Theory, op: &CompositeOperator) -> Result<bool> {
    Ok(apply_free_brst(t, op)?
        .iter()
        .all(|(img, _)| img.ghost_number == op.ghost_number + 1 && img.dimension == op.dimension + Dim::one()))
}

/// Outcome of checking `K ≡ 0` over every `(A₁, A₂, B)` of a basis with
/// `gh(B) = gh(A₁) + gh(A₂) + 1`, at `D = [O_B]`.
#[derive(Clone, Debug, serde::Serialize)]
pub struct WardSurvey {
    pub triples: usize,
    pub nonzero: usize,
    /// Labels of the first few failing triples.
    pub examples: Vec<[String; 3]>,
    pub truncated: bool,
}

pub fn ward_survey(basis: &OperatorBasis, q: &FreeBrstMatrix, max_triples: Option<usize>, mu: f64) -> Result<WardSurvey> {
    use rayon::prelude::*;
    let t = &basis.theory;
    let ops = &basis.operators;
    let n = ops.len();
    let cap = max_triples.unwrap_or(usize::MAX);
    let mut pairs = Vec::new();
    let mut planned = 0usize;
    let mut truncated = false;
    'outer: for i in 0..n {
        for j in 0..n {
            let k = ops.iter().filter(|b| b.ghost_number == ops[i].ghost_number + ops[j].ghost_number + 1).count();
            if planned + k > cap {
                truncated = true;
                break 'outer;
            }
            planned += k;
            pairs.push((i, j));
        }
    }
    let images = ops.iter().map(|op| apply_free_brst(t, op)).collect::<Result<Vec<_>>>()?;
    let found = pairs
        .par_iter()
        .map(|&(i, j)| -> Result<(usize, Vec<[String; 3]>)> {
            let a = [ops[i].clone(), ops[j].clone()];
            let im = [images[i].clone(), images[j].clone()];
            let mut count = 0;
            let mut bad = Vec::new();
            for b in ops.iter().filter(|b| b.ghost_number == a[0].ghost_number + a[1].ghost_number + 1) {
                count += 1;
                if !k_value(basis, q, b, &a, &im, b.dimension, mu)?.is_zero() {
                    bad.push([a[0].label(t), a[1].label(t), b.label(t)]);
                }
            }
            Ok((count, bad))
        })
        .collect::<Result<Vec<_>>>()?;
    let triples = found.iter().map(|f| f.0).sum();
    let all_bad: Vec<[String; 3]> = found.into_iter().flat_map(|f| f.1).collect();
    Ok(WardSurvey { triples, nonzero: all_bad.len(), examples: all_bad.into_iter().take(8).collect(), truncated })
}

/// Product of two combinations, normal ordered.
pub fn combination_product(t: &Theory, a: &OperatorCombination, b: &OperatorCombination) -> OperatorCombination {
    let mut out = OperatorCombination::default();
    for (x, cx) in &a.terms {
        for (y, cy) in &b.terms {
            let factors = x.factors.iter().chain(&y.factors).copied().collect();
            if let Some((op, sign)) = canonicalize(t, factors) {
                out.add_term(op, cx * cy * BigRational::from_integer(BigInt::from(sign)));
            }
        }
    }
    out
}

/// `C^B_{A⃗}` for combinations `A_k`, expanded multilinearly.
pub fn free_coefficient_of_combinations(t: &Theory, a: &[OperatorCombination], b: &CompositeOperator, mu: f64) -> Result<SymbolicCoefficient> {
    let mut total = SymbolicCoefficient::zero(a.len(), mu);
    let mut pick: Vec<(CompositeOperator, BigRational)> = Vec::with_capacity(a.len());
    fn rec(
        t: &Theory,
        a: &[OperatorCombination],
        b: &CompositeOperator,
        mu: f64,
        pick: &mut Vec<(CompositeOperator, BigRational)>,
        total: &mut SymbolicCoefficient,
    ) -> Result<()> {
        let k = pick.len();
        if k == a.len() {
            let ops: Vec<CompositeOperator> = pick.iter().map(|p| p.0.clone()).collect();
            let c: BigRational = pick.iter().map(|p| p.1.clone()).product();
            total.add_scaled(&free_ope_coefficient(t, &ops, b, mu)?, &c);
            return Ok(());
        }
        for (op, c) in &a[k].terms {
            pick.push((op.clone(), c.clone()));
            rec(t, a, b, mu, pick, total)?;
            pick.pop();
        }
        Ok(())
    }
    rec(t, a, b, mu, &mut pick, &mut total)?;
    Ok(total)
}

/// `C^{∂_μA_ν}_{A⃗} + C^{∂_νA_μ}_{A⃗}` for the gauge field named `field`
/// (axes 1-based as in operator labels).
pub fn derivative_pair_sum(t: &Theory, a: &[OperatorCombination], field: &str, mu_axis: usize, nu_axis: usize, mu: f64) -> Result<SymbolicCoefficient> {
    let one = crate::algebra::parse_operator(t, &format!("d{mu_axis}{field}{nu_axis}"))?;
    let two = crate::algebra::parse_operator(t, &format!("d{nu_axis}{field}{mu_axis}"))?;
    let mut s = free_coefficient_of_combinations(t, a, &one, mu)?;
    s.add_scaled(&free_coefficient_of_combinations(t, a, &two, mu)?, &BigRational::one());
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{enumerate_basis, parse_combination, parse_operator};

    fn op(t: &Theory, s: &str) -> CompositeOperator {
        parse_operator(t, s).unwrap()
    }

    fn unit_rational() -> BigRational {
        BigRational::one()
    }

    #[test]
    fn single_field_images() {
        let t = Theory::qed_free();
        let r = apply_free_brst(&t, &op(&t, "d1A2")).unwrap();
        assert_eq!(r, vec![(op(&t, "d1d2c"), unit_rational())]);
        assert!(apply_free_brst(&t, &op(&t, "c")).unwrap().is_empty());
        assert_eq!(apply_free_brst(&t, &op(&t, "cbar")).unwrap(), vec![(op(&t, "B"), unit_rational())]);
        assert!(apply_free_brst(&t, &op(&t, "B")).unwrap().is_empty());
    }

    #[test]
    fn field_strength_closed() {
        let t = Theory::qed_free();
        assert!(is_brst_closed(&t, &parse_combination(&t, "d1A2 - d2A1").unwrap()).unwrap());
        assert!(!is_brst_closed(&t, &parse_combination(&t, "d1A2").unwrap()).unwrap());
    }

    #[test]
    fn undeclared_field_errors() {
        let t = Theory::scalar();
        assert!(matches!(apply_free_brst(&t, &op(&t, "phi")), Err(OpeError::UnknownField(_))));
    }

    #[test]
    fn graded_leibniz_sign() {
        // ŝ₀(cbar·c) = B·c, ŝ₀(c·... ) picks a minus when passing an odd factor.
        let t = Theory::qed_free();
        let r = apply_free_brst(&t, &op(&t, "cbar*c")).unwrap();
        assert_eq!(r, vec![(op(&t, "B*c"), unit_rational())]);
        // ŝ₀(cbar·A1) = B·A1 - cbar·d1c
        let r = apply_free_brst(&t, &op(&t, "A1*cbar")).unwrap();
        let m: BTreeMap<_, _> = r.into_iter().collect();
        assert_eq!(m[&op(&t, "A1*B")], unit_rational());
        assert_eq!(m[&op(&t, "cbar*d1c")], -unit_rational());
    }

    #[test]
    fn nilpotent_and_graded_small_basis() {
        let t = Theory::qed_free();
        let basis = enumerate_basis(&t, Dim::from_integer(2)).unwrap();
        let q = FreeBrstMatrix::new(&basis).unwrap();
        assert!(q.square_residuals().is_empty());
        for o in &basis.operators {
            assert!(brst_grading_holds(&t, o).unwrap());
        }
    }

    #[test]
    fn k_vanishes_for_simple_ward_identity() {
        let t = Theory::qed_free();
        let basis = enumerate_basis(&t, Dim::from_integer(3)).unwrap();
        let q = FreeBrstMatrix::new(&basis).unwrap();
        let a = [op(&t, "A1"), op(&t, "cbar")];
        for b in ["1", "d1c", "B", "c", "A1*c", "cbar*d1c"] {
            let b = op(&t, b);
            let k = free_k_functional(&basis, &q, &b, &a, b.dimension, 1.0).unwrap();
            assert!(k.value.is_zero(), "K for B = {}: {}", b.label(&t), k.value);
        }
    }

    #[test]
    fn small_survey_vanishes() {
        let t = Theory::qed_free();
        let basis = enumerate_basis(&t, Dim::from_integer(2)).unwrap();
        let q = FreeBrstMatrix::new(&basis).unwrap();
        let s = ward_survey(&basis, &q, None, 1.0).unwrap();
        assert!(s.triples > 100 && s.nonzero == 0 && !s.truncated, "{s:?}");
        let s = ward_survey(&basis, &q, Some(50), 1.0).unwrap();
        assert!(s.truncated && s.triples <= 50);
    }

    #[test]
    fn field_strength_pair_sum_vanishes() {
        let t = Theory::qed_free();
        let f12 = parse_combination(&t, "d1A2 - d2A1").unwrap();
        let f13 = parse_combination(&t, "d1A3 - d3A1").unwrap();
        let ff = combination_product(&t, &f12, &f13);
        assert_eq!(ff.terms.len(), 4);
        let a = [f12.clone(), ff];
        for (m, n) in [(1, 2), (1, 3), (2, 4)] {
            assert!(derivative_pair_sum(&t, &a, "A", m, n, 1.0).unwrap().is_zero());
        }
        // Without gauge invariance the sum survives.
        let single = [OperatorCombination::single(op(&t, "d1A2")), ff_free(&t)];
        assert!(!derivative_pair_sum(&t, &single, "A", 1, 2, 1.0).unwrap().is_zero());
    }

    fn ff_free(t: &Theory) -> OperatorCombination {
        OperatorCombination::single(op(t, "d1A2*d1A2"))
    }
}
