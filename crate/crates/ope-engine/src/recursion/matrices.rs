//! Graded BRST matrix `Q_A^B`, antibracket matrix `B^{C,w}_{AB}`, their
//! first-order recursion steps, and coefficients stored as graded layers.

use super::integrand::SubtractedIntegrand;
use super::integrate::{integrate_bound, FirstOrderResult};
use super::interaction::InteractionOperator;
use crate::algebra::{derivative_expand, CompositeOperator, Dim, MultiIndex, OperatorBasis, Theory};
use crate::error::{OpeError, Result};
use crate::ward::FreeBrstMatrix;
use crate::wick::{free_ope_coefficient, SymbolicCoefficient};
use num::{BigRational, ToPrimitive};
use std::collections::{BTreeMap, HashMap};
use std::sync::RwLock;

/// `(g-order, ħ-order)`.
pub type Grade = (u32, u32);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entry {
    pub value: f64,
    pub error: f64,
}

impl Entry {
    pub fn exact(value: f64) -> Self {
        Entry { value, error: 0.0 }
    }
}

fn to_f64(c: &BigRational) -> f64 {
    c.to_f64().unwrap_or(f64::NAN)
}

/// Sparse `Q_A^B`, keyed by grade and then `(A, B)`.
#[derive(Clone, Debug, Default)]
pub struct QMatrix {
    pub layers: BTreeMap<Grade, BTreeMap<(CompositeOperator, CompositeOperator), Entry>>,
}

impl QMatrix {
    /// The free differential as layer `(0, 0)`.
    pub fn free(basis: &OperatorBasis) -> Result<Self> {
        let q = FreeBrstMatrix::new(basis)?;
        let mut layer = BTreeMap::new();
        for (a, row) in q.rows.iter().enumerate() {
            for (b, v) in row {
                layer.insert((basis.operators[a].clone(), basis.operators[*b].clone()), Entry::exact(to_f64(v)));
            }
        }
        let mut layers = BTreeMap::new();
        layers.insert((0, 0), layer);
        Ok(QMatrix { layers })
    }

    /// Inserts an entry; `[O_B] ≤ [O_A] + 1` is enforced.
    pub fn insert(&mut self, grade: Grade, a: CompositeOperator, b: CompositeOperator, e: Entry) -> Result<()> {
        if b.dimension > a.dimension + Dim::from_integer(1) {
            return Err(OpeError::DimensionViolation("Q_A^B requires [O_B] <= [O_A] + 1".into()));
        }
        self.layers.entry(grade).or_default().insert((a, b), e);
        Ok(())
    }

    pub fn get(&self, grade: Grade, a: &CompositeOperator, b: &CompositeOperator) -> f64 {
        self.layers
            .get(&grade)
            .and_then(|l| l.get(&(a.clone(), b.clone())))
            .map_or(0.0, |e| e.value)
    }

    fn layer(&self, grade: Grade) -> impl Iterator<Item = (&(CompositeOperator, CompositeOperator), &Entry)> {
        self.layers.get(&grade).into_iter().flat_map(|l| l.iter())
    }

    pub fn is_zero(&self) -> bool {
        self.layers.values().all(|l| l.values().all(|e| e.value == 0.0))
    }
}

/// Key `(A_1, A_2, C, w)` of `B^{C,w}_{A_1A_2}`.
pub type BKey = (CompositeOperator, CompositeOperator, CompositeOperator, MultiIndex);

#[derive(Clone, Debug, Default)]
pub struct BMatrix {
    pub layers: BTreeMap<Grade, BTreeMap<BKey, Entry>>,
}

impl BMatrix {
    pub fn zero() -> Self {
        BMatrix::default()
    }

    /// Inserts `B^{C,w}_{A_1A_2}`, rejecting entries off the support
    /// `|w| = [O_{A_1}] + [O_{A_2}] − [O_C] − 3`.
    pub fn insert(&mut self, grade: Grade, key: BKey, e: Entry) -> Result<()> {
        let (a1, a2, c, w) = &key;
        if Dim::from_integer(w.order() as i64) != a1.dimension + a2.dimension - c.dimension - Dim::from_integer(3) {
            return Err(OpeError::DimensionViolation("B^{C,w}_{AB} needs |w| = [A]+[B]-[C]-3".into()));
        }
        self.layers.entry(grade).or_default().insert(key, e);
        Ok(())
    }

    /// `B̃^F_{A_1A_2} = Σ_{C,w} (−1)^{|w|} B^{C,w}_{A_1A_2} δ(O_F, ∂^w O_C)` at one grade.
    pub fn reduced(&self, t: &Theory, grade: Grade, f: &CompositeOperator, a1: &CompositeOperator, a2: &CompositeOperator) -> f64 {
        let mut acc = 0.0;
        for ((b1, b2, c, w), e) in self.layers.get(&grade).into_iter().flat_map(|l| l.iter()) {
            if b1 != a1 || b2 != a2 || c.dimension + Dim::from_integer(w.order() as i64) != f.dimension {
                continue;
            }
            for (m, k) in derivative_expand(t, w, c) {
                if &m == f {
                    acc += w.sign() as f64 * k as f64 * e.value;
                }
            }
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.layers.values().all(|l| l.values().all(|e| e.value == 0.0))
    }
}

/// Reduced antibracket increments `B̃^F_{A_1A_2}`.
#[derive(Clone, Debug, Default)]
pub struct ReducedBMatrix {
    pub layers: BTreeMap<Grade, BTreeMap<(CompositeOperator, CompositeOperator, CompositeOperator), Entry>>,
}

impl ReducedBMatrix {
    pub fn get(&self, grade: Grade, f: &CompositeOperator, a1: &CompositeOperator, a2: &CompositeOperator) -> f64 {
        self.layers
            .get(&grade)
            .and_then(|l| l.get(&(f.clone(), a1.clone(), a2.clone())))
            .map_or(0.0, |e| e.value)
    }

    pub fn from_full(t: &Theory, b: &BMatrix, basis: &OperatorBasis) -> Self {
        let mut out = ReducedBMatrix::default();
        for (g, layer) in &b.layers {
            let mut pairs: Vec<(&CompositeOperator, &CompositeOperator)> = layer.keys().map(|(a1, a2, _, _)| (a1, a2)).collect();
            pairs.sort();
            pairs.dedup();
            for (a1, a2) in pairs {
                for f in &basis.operators {
                    let v = b.reduced(t, *g, f, a1, a2);
                    if v != 0.0 {
                        out.layers.entry(*g).or_default().insert((f.clone(), a1.clone(), a2.clone()), Entry::exact(v));
                    }
                }
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.layers.values().all(|l| l.values().all(|e| e.value == 0.0))
    }
}

/// Only the first step (`g⁰` inputs) has free coefficients available.
fn require_first_order(order: u32) -> Result<()> {
    match order {
        0 => Err(OpeError::InvalidArgument("recursion steps produce orders >= 1".into())),
        1 => Ok(()),
        n => Err(OpeError::Missing(format!(
            "order {n} needs interacting coefficients at g-order {}, which are not computed",
            n - 1
        ))),
    }
}

/// Two-point free coefficient `C^C_{EA}(y, 0)` in slots `(0 = y, 1 = origin)`.
fn two_point(t: &Theory, e: &CompositeOperator, a: &CompositeOperator, c: &CompositeOperator, mu: f64) -> Result<SymbolicCoefficient> {
    free_ope_coefficient(t, &[e.clone(), a.clone()], c, mu)
}

fn integrate_two_point(e: &SymbolicCoefficient, tol: f64) -> Result<FirstOrderResult> {
    let f = SubtractedIntegrand::from_expression(e);
    // Two-point expressions are evaluated with the origin as the only centre;
    // a dummy far point is never needed since slot 1 is the expansion point.
    integrate_bound(&f, &[[0.0; 4]], tol)
}

/// One first-order increment of a matrix element: the `y`-integral term and
/// the contact term.
#[derive(Clone, Debug)]
pub struct Increment {
    pub integral: FirstOrderResult,
    pub contact: f64,
}

/// `ħ∂_g Q_A^B` at order `g⁰` for each requested `(A, B)`. The integral term
/// is stored at grade `(order, 0)` and the contact term `Σ_E I^E B̃^B_{EA}`
/// at `(order, 1)`; only grade `(0, ·)` inputs are read.
#[allow(clippy::too_many_arguments)]
pub fn stq_recursion_step(
    basis: &OperatorBasis,
    q: &QMatrix,
    i: &InteractionOperator,
    btilde: &ReducedBMatrix,
    entries: &[(CompositeOperator, CompositeOperator)],
    order: u32,
    mu: f64,
    tol: f64,
) -> Result<(QMatrix, BTreeMap<(CompositeOperator, CompositeOperator), Increment>)> {
    require_first_order(order)?;
    let t = &basis.theory;
    let ie = i.leading();
    let q0: BTreeMap<_, _> = q.layer((0, 0)).map(|(k, e)| (k.clone(), e.value)).collect();
    let mut out = QMatrix::default();
    let mut detail = BTreeMap::new();
    let one = Dim::from_integer(1);
    for (a, b) in entries {
        if b.dimension > a.dimension + one {
            return Err(OpeError::DimensionViolation("Q_A^B requires [O_B] <= [O_A] + 1".into()));
        }
        let mut expr = SymbolicCoefficient::zero(2, mu);
        let mut contact = 0.0;
        for (e, coeff) in &ie.terms {
            let c_e = to_f64(coeff);
            // Σ_{[C]≤[A]} C^C_{EA}(y,0) Q_C^B
            for ((c, bb), v) in &q0 {
                if bb != b || c.dimension > a.dimension {
                    continue;
                }
                let term = two_point(t, e, a, c, mu)?;
                expr.add_scaled(&term, &(coeff * rational(*v)?));
            }
            // − Σ_{[B]≤[C]≤[A]+1} Q_A^C C^B_{EC}(y,0)
            for ((aa, c), v) in &q0 {
                if aa != a || c.dimension < b.dimension || c.dimension > a.dimension + one {
                    continue;
                }
                let term = two_point(t, e, c, b, mu)?;
                expr.add_scaled(&term, &-(coeff * rational(*v)?));
            }
            contact += c_e * btilde.get((0, 0), b, e, a);
        }
        let integral = integrate_two_point(&expr, tol)?;
        if integral.value != 0.0 {
            out.insert((order, 0), a.clone(), b.clone(), Entry { value: integral.value, error: integral.quad_error })?;
        }
        if contact != 0.0 {
            out.insert((order, 1), a.clone(), b.clone(), Entry::exact(contact))?;
        }
        detail.insert((a.clone(), b.clone()), Increment { integral, contact });
    }
    Ok((out, detail))
}

/// `ħ∂_g B̃^B_{A_1A_2}` at order `g⁰`:
/// `∫ Σ_E I^E [ Σ_{[C]≤[A_1]} B̃^B_{CA_2} C^C_{EA_1}(y,0) + Σ_{[C]≤[A_2]} B̃^B_{A_1C} C^C_{EA_2}(y,0)
///              − Σ_{[C]=[A_1]+[A_2]−3} B̃^C_{A_1A_2} C^B_{EC}(y,0) ]`.
#[allow(clippy::too_many_arguments)]
pub fn bvq_recursion_step(
    basis: &OperatorBasis,
    btilde: &ReducedBMatrix,
    i: &InteractionOperator,
    entries: &[(CompositeOperator, CompositeOperator, CompositeOperator)],
    order: u32,
    mu: f64,
    tol: f64,
) -> Result<(ReducedBMatrix, Vec<Increment>)> {
    require_first_order(order)?;
    let t = &basis.theory;
    let ie = i.leading();
    let b0: Vec<(&(CompositeOperator, CompositeOperator, CompositeOperator), f64)> = btilde
        .layers
        .get(&(0, 0))
        .into_iter()
        .flat_map(|l| l.iter())
        .map(|(k, e)| (k, e.value))
        .filter(|(_, v)| *v != 0.0)
        .collect();
    let three = Dim::from_integer(3);
    let mut out = ReducedBMatrix::default();
    let mut details = Vec::new();
    for (bop, a1, a2) in entries {
        let mut expr = SymbolicCoefficient::zero(2, mu);
        for (e, coeff) in &ie.terms {
            for ((f, x1, x2), v) in &b0 {
                let w = coeff * rational(*v)?;
                if f == bop && x2 == a2 && x1.dimension <= a1.dimension {
                    expr.add_scaled(&two_point(t, e, a1, x1, mu)?, &w);
                }
                if f == bop && x1 == a1 && x2.dimension <= a2.dimension {
                    expr.add_scaled(&two_point(t, e, a2, x2, mu)?, &w);
                }
                if x1 == a1 && x2 == a2 && f.dimension == a1.dimension + a2.dimension - three {
                    expr.add_scaled(&two_point(t, e, f, bop, mu)?, &-w);
                }
            }
        }
        let integral = integrate_two_point(&expr, tol)?;
        if integral.value != 0.0 {
            out.layers
                .entry((order, 0))
                .or_default()
                .insert((bop.clone(), a1.clone(), a2.clone()), Entry { value: integral.value, error: integral.quad_error });
        }
        details.push(Increment { integral, contact: 0.0 });
    }
    Ok((out, details))
}

fn rational(v: f64) -> Result<BigRational> {
    BigRational::from_float(v).ok_or_else(|| OpeError::InvalidArgument("non-finite matrix entry".into()))
}

/// Quadrature-backed layer: values cached per point configuration.
#[derive(Debug)]
pub struct QuadratureLayer {
    pub integrand: SubtractedIntegrand,
    pub tol: f64,
    cache: RwLock<HashMap<Vec<u64>, (f64, f64)>>,
}

impl QuadratureLayer {
    pub fn evaluate(&self, x: &[[f64; 4]]) -> Result<(f64, f64)> {
        let key: Vec<u64> = x.iter().flat_map(|p| p.iter().map(|v| v.to_bits())).collect();
        if let Some(v) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let r = integrate_bound(&self.integrand, x, self.tol)?;
        let v = (r.value, r.quad_error);
        self.cache.write().expect("cache lock").insert(key, v);
        Ok(v)
    }

    pub fn cached(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }
}

#[derive(Debug)]
pub enum Layer {
    Symbolic(SymbolicCoefficient),
    Quadrature(QuadratureLayer),
}

/// `C^B_{A⃗}` as a power series in `g` and `ħ`.
#[derive(Debug)]
pub struct PerturbativeCoefficient {
    pub a: Vec<CompositeOperator>,
    pub b: CompositeOperator,
    pub mu: f64,
    pub layers: BTreeMap<Grade, Layer>,
}

impl PerturbativeCoefficient {
    pub fn free(t: &Theory, a: &[CompositeOperator], b: &CompositeOperator, mu: f64) -> Result<Self> {
        let mut layers = BTreeMap::new();
        layers.insert((0, 0), Layer::Symbolic(free_ope_coefficient(t, a, b, mu)?));
        Ok(PerturbativeCoefficient { a: a.to_vec(), b: b.clone(), mu, layers })
    }

    /// Adds the `(1, 0)` layer from the leading interaction.
    pub fn with_first_order(mut self, t: &Theory, i: &InteractionOperator, tol: f64) -> Result<Self> {
        if !self.layers.contains_key(&(0, 0)) {
            return Err(OpeError::Missing("free layer required before first order".into()));
        }
        let integrand = SubtractedIntegrand::build(t, &self.a, &self.b, &i.leading(), self.mu)?;
        self.layers.insert((1, 0), Layer::Quadrature(QuadratureLayer { integrand, tol, cache: RwLock::new(HashMap::new()) }));
        Ok(self)
    }

    /// Value and error of one layer at `x⃗`.
    pub fn layer_value(&self, grade: Grade, x: &[[f64; 4]]) -> Result<(f64, f64)> {
        match self.layers.get(&grade) {
            None => Err(OpeError::Missing(format!("layer {grade:?} not computed"))),
            Some(Layer::Symbolic(s)) => Ok((s.evaluate(x)?, 0.0)),
            Some(Layer::Quadrature(q)) => q.evaluate(x),
        }
    }

    /// `Σ g^n ħ^m C_{(n,m)}` summed over the available layers.
    pub fn evaluate(&self, g: f64, hbar: f64, x: &[[f64; 4]]) -> Result<(f64, f64)> {
        let mut v = 0.0;
        let mut err = 0.0;
        for &(n, m) in self.layers.keys() {
            let (a, e) = self.layer_value((n, m), x)?;
            let w = g.powi(n as i32) * hbar.powi(m as i32);
            v += w * a;
            err += w.abs() * e;
        }
        Ok((v, err))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{enumerate_basis, parse_combination, parse_operator};

    fn op(t: &Theory, s: &str) -> CompositeOperator {
        parse_operator(t, s).unwrap()
    }

    fn qed() -> (Theory, OperatorBasis) {
        let t = Theory::qed_free();
        let b = enumerate_basis(&t, Dim::from_integer(2)).unwrap();
        (t, b)
    }

    #[test]
    fn free_q_entries() {
        let (t, basis) = qed();
        let q = QMatrix::free(&basis).unwrap();
        assert_eq!(q.get((0, 0), &op(&t, "A2"), &op(&t, "d2c")), 1.0);
        assert_eq!(q.get((0, 0), &op(&t, "cbar"), &op(&t, "B")), 1.0);
        for b in &basis.operators {
            assert_eq!(q.get((0, 0), &op(&t, "c"), b), 0.0);
            assert_eq!(q.get((0, 0), &op(&t, "B"), b), 0.0);
        }
    }

    #[test]
    fn zero_interaction_zero_increment() {
        let (t, basis) = qed();
        let q = QMatrix::free(&basis).unwrap();
        let entries = vec![(op(&t, "A1"), op(&t, "d1c")), (op(&t, "cbar"), op(&t, "B"))];
        let (inc, _) = stq_recursion_step(&basis, &q, &InteractionOperator::zero(), &ReducedBMatrix::default(), &entries, 1, 1.0, 1e-6).unwrap();
        assert!(inc.is_zero());
    }

    #[test]
    fn stq_ignores_higher_input_layers_and_orders() {
        let (t, basis) = qed();
        let mut q = QMatrix::free(&basis).unwrap();
        let i = InteractionOperator::from_combination(parse_combination(&t, "A1*A1").unwrap());
        let entries = vec![(op(&t, "A1"), op(&t, "d1c"))];
        let (r1, _) = stq_recursion_step(&basis, &q, &i, &ReducedBMatrix::default(), &entries, 1, 1.0, 1e-6).unwrap();
        q.insert((1, 0), op(&t, "A1"), op(&t, "d1c"), Entry::exact(123.0)).unwrap();
        let (r2, _) = stq_recursion_step(&basis, &q, &i, &ReducedBMatrix::default(), &entries, 1, 1.0, 1e-6).unwrap();
        assert_eq!(r1.layers.len(), r2.layers.len());
        for (g, l) in &r1.layers {
            for (k, e) in l {
                assert_eq!(r2.layers[g][k], *e);
            }
        }
        assert!(matches!(
            stq_recursion_step(&basis, &q, &i, &ReducedBMatrix::default(), &entries, 2, 1.0, 1e-6),
            Err(OpeError::Missing(_))
        ));
    }

    #[test]
    fn photon_mass_breaks_brst_by_covariance_integral() {
        // I = A₁A₁: only C^{A1}_{EA1}(y,0) = 2C(y) survives, and ∫C d⁴y = μ⁻².
        let (t, basis) = qed();
        let q = QMatrix::free(&basis).unwrap();
        let i = InteractionOperator::from_combination(parse_combination(&t, "A1*A1").unwrap());
        let entries = vec![(op(&t, "A1"), op(&t, "d1c")), (op(&t, "A2"), op(&t, "d2c"))];
        for mu in [1.0, 2.0] {
            let (inc, _) = stq_recursion_step(&basis, &q, &i, &ReducedBMatrix::default(), &entries, 1, mu, 1e-8).unwrap();
            let v = inc.get((1, 0), &op(&t, "A1"), &op(&t, "d1c"));
            assert!((v - 2.0 / (mu * mu)).abs() < 1e-6, "{v}");
            assert_eq!(inc.get((1, 0), &op(&t, "A2"), &op(&t, "d2c")), 0.0);
        }
    }

    #[test]
    fn bvq_zero_input() {
        let (t, basis) = qed();
        let i = InteractionOperator::from_combination(parse_combination(&t, "A1*A1").unwrap());
        let entries = vec![(op(&t, "c"), op(&t, "A1"), op(&t, "A1"))];
        let (inc, _) = bvq_recursion_step(&basis, &ReducedBMatrix::default(), &i, &entries, 1, 1.0, 1e-6).unwrap();
        assert!(inc.is_zero());
    }

    #[test]
    fn b_support_rejected() {
        let (t, _) = qed();
        let mut b = BMatrix::zero();
        let ok = (op(&t, "A1*A2"), op(&t, "A1*A2"), op(&t, "c"), MultiIndex::ZERO);
        assert!(b.insert((0, 0), ok, Entry::exact(1.0)).is_ok());
        let bad = (op(&t, "A1*A2"), op(&t, "A1*A2"), op(&t, "c"), MultiIndex::unit(0));
        assert!(matches!(b.insert((0, 0), bad, Entry::exact(1.0)), Err(OpeError::DimensionViolation(_))));
    }

    #[test]
    fn reduced_contracts_derivatives_with_sign() {
        let t = Theory::scalar();
        let mut b = BMatrix::zero();
        let phi2 = op(&t, "phi^2");
        let phi3 = op(&t, "phi^3");
        // |w| = 3 + 3 − 2 − 3 = 1
        b.insert((0, 0), (phi3.clone(), phi3.clone(), phi2.clone(), MultiIndex::unit(1)), Entry::exact(0.5)).unwrap();
        assert_eq!(b.reduced(&t, (0, 0), &op(&t, "phi*d2phi"), &phi3, &phi3), -1.0);
        assert_eq!(b.reduced(&t, (0, 0), &op(&t, "phi*d1phi"), &phi3, &phi3), 0.0);
    }

    #[test]
    fn perturbative_layers() {
        let t = Theory::scalar();
        let a = [op(&t, "phi"), op(&t, "phi")];
        let c = PerturbativeCoefficient::free(&t, &a, &op(&t, "phi^2"), 1.0).unwrap();
        let x = [[0.6, 0.2, -0.3, 0.4], [0.0; 4]];
        assert_eq!(c.layer_value((0, 0), &x).unwrap(), (1.0, 0.0));
        assert!(matches!(c.layer_value((1, 0), &x), Err(OpeError::Missing(_))));
        let i = InteractionOperator::from_combination(parse_combination(&t, "1/24*phi^4").unwrap());
        let c = c.with_first_order(&t, &i, 1e-6).unwrap();
        let (v1, _) = c.layer_value((1, 0), &x).unwrap();
        assert!(v1 < 0.0);
        let (v2, _) = c.layer_value((1, 0), &x).unwrap();
        assert_eq!(v1, v2);
        if let Layer::Quadrature(q) = &c.layers[&(1, 0)] {
            assert_eq!(q.cached(), 1);
        }
        let (s, _) = c.evaluate(0.1, 1.0, &x).unwrap();
        assert!((s - (1.0 + 0.1 * v1)).abs() < 1e-15);
    }
}
