//! Wick-graph enumeration and assembly of free-theory OPE coefficients.
//!
//! Vertices `0..s` carry the operators `A_1…A_s` at `x_1…x_s`; the target
//! monomial `O_B` sits at the expansion point `x_s` (vertex `s−1`). Every
//! factor of every `A_k` is either contracted with a factor at another vertex
//! or routed to one factor type of `O_B`. A factor `∂^v φ(x_k)` routed to the
//! jet `∂^w φ` contributes `(x_k − x_s)^{w−v}/(w−v)!` (zero unless `v ≤ w`,
//! and only `w = v` at `x_s` itself). A contraction of `∂^v φ(x_a)` with
//! `∂^{v'} φ'(x_b)` contributes `κ (−1)^{|v'|} (∂^{v+v'+e} C)(x_a − x_b)`, with
//! `κ`, `e` from the theory's pairing rules. The coefficient multiplies the
//! monomial `O_B` itself, so repeated jets carry no extra factorial.

use super::expr::{Atom, SymbolicCoefficient};
use crate::algebra::{CompositeOperator, Factor, MultiIndex, Theory};
use crate::error::{OpeError, Result};
use num::{BigInt, BigRational};
use serde::Serialize;

pub const DEFAULT_GRAPH_LIMIT: usize = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FactorRef {
    pub vertex: usize,
    pub factor: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PropagatorEdge {
    pub from: FactorRef,
    pub to: FactorRef,
    pub sign: i64,
    /// Total derivative on the covariance, `v + v' + e`.
    pub derivative: MultiIndex,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TargetEdge {
    pub from: FactorRef,
    /// Index into the distinct factors of `O_B`.
    pub target: usize,
    /// Taylor order `w − v`.
    pub shift: MultiIndex,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WickGraph {
    pub propagators: Vec<PropagatorEdge>,
    pub targets: Vec<TargetEdge>,
    /// Grassmann sign of the reordering.
    pub sign: i64,
}

struct Flat {
    vertex: usize,
    index: usize,
    factor: Factor,
    odd: bool,
}

struct Enumerator<'a> {
    theory: &'a Theory,
    flat: Vec<Flat>,
    /// Distinct target jets with multiplicities.
    types: Vec<(Factor, usize)>,
    last_vertex: usize,
    limit: usize,
    count: usize,
}

/// Distinct factors of `b` with multiplicities, in canonical order.
fn target_types(b: &CompositeOperator) -> Vec<(Factor, usize)> {
    let mut types: Vec<(Factor, usize)> = Vec::new();
    for f in &b.factors {
        match types.last_mut() {
            Some((g, m)) if g == f => *m += 1,
            _ => types.push((*f, 1)),
        }
    }
    types
}

/// Quick necessary condition: field-component counts of `O_B` must be
/// coverable by the factors of the `A_k`.
fn feasible(a: &[CompositeOperator], b: &CompositeOperator) -> bool {
    let total: usize = a.iter().map(|o| o.factors.len()).sum();
    if total < b.factors.len() || (total - b.factors.len()) % 2 == 1 {
        return false;
    }
    let mut have = std::collections::BTreeMap::new();
    for o in a {
        for (k, n) in o.component_counts() {
            *have.entry(k).or_insert(0usize) += n;
        }
    }
    b.component_counts().into_iter().all(|(k, n)| have.get(&k).copied().unwrap_or(0) >= n)
}

impl<'a> Enumerator<'a> {
    fn new(theory: &'a Theory, a: &[CompositeOperator], b: &CompositeOperator, limit: usize) -> Self {
        let mut flat = Vec::new();
        for (v, op) in a.iter().enumerate() {
            for (i, f) in op.factors.iter().enumerate() {
                flat.push(Flat { vertex: v, index: i, factor: *f, odd: f.is_odd(theory) });
            }
        }
        Enumerator { theory, flat, types: target_types(b), last_vertex: a.len() - 1, limit, count: 0 }
    }

    fn run<F: FnMut(&WickGraph)>(&mut self, emit: &mut F) -> Result<()> {
        let n = self.flat.len();
        let mut used = vec![false; n];
        let mut left: Vec<usize> = self.types.iter().map(|t| t.1).collect();
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        let mut routed: Vec<(usize, usize)> = Vec::new();
        self.step(&mut used, &mut left, &mut pairs, &mut routed, emit)
    }

    fn step<F: FnMut(&WickGraph)>(
        &mut self,
        used: &mut Vec<bool>,
        left: &mut Vec<usize>,
        pairs: &mut Vec<(usize, usize)>,
        routed: &mut Vec<(usize, usize)>,
        emit: &mut F,
    ) -> Result<()> {
        let Some(i) = used.iter().position(|u| !u) else {
            if left.iter().all(|&m| m == 0) {
                self.count += 1;
                if self.count > self.limit {
                    return Err(OpeError::TooManyGraphs { limit: self.limit });
                }
                let g = self.build(pairs, routed);
                emit(&g);
            }
            return Ok(());
        };
        let fi = self.flat[i].factor;
        let vi = self.flat[i].vertex;
        used[i] = true;
        for t in 0..self.types.len() {
            if left[t] == 0 {
                continue;
            }
            let tf = self.types[t].0;
            if !tf.same_component(&fi) || !fi.deriv.le(&tf.deriv) {
                continue;
            }
            if vi == self.last_vertex && fi.deriv != tf.deriv {
                continue;
            }
            left[t] -= 1;
            routed.push((i, t));
            self.step(used, left, pairs, routed, emit)?;
            routed.pop();
            left[t] += 1;
        }
        for j in i + 1..self.flat.len() {
            if used[j] || self.flat[j].vertex == vi {
                continue;
            }
            let fj = self.flat[j].factor;
            if self.theory.contraction(fi.field as usize, &fi.idx, fj.field as usize, &fj.idx).is_none() {
                continue;
            }
            used[j] = true;
            pairs.push((i, j));
            self.step(used, left, pairs, routed, emit)?;
            pairs.pop();
            used[j] = false;
        }
        used[i] = false;
        Ok(())
    }

    fn build(&self, pairs: &[(usize, usize)], routed: &[(usize, usize)]) -> WickGraph {
        let fref = |k: usize| FactorRef { vertex: self.flat[k].vertex, factor: self.flat[k].index };
        let mut arrangement: Vec<usize> = Vec::with_capacity(self.flat.len());
        let mut propagators = Vec::with_capacity(pairs.len());
        for &(i, j) in pairs {
            arrangement.push(i);
            arrangement.push(j);
            let (fi, fj) = (self.flat[i].factor, self.flat[j].factor);
            let c = self
                .theory
                .contraction(fi.field as usize, &fi.idx, fj.field as usize, &fj.idx)
                .expect("pairing checked during enumeration");
            propagators.push(PropagatorEdge {
                from: fref(i),
                to: fref(j),
                sign: c.sign * fj.deriv.sign(),
                derivative: fi.deriv.add(&fj.deriv).add(&c.extra),
            });
        }
        let mut sorted_routes = routed.to_vec();
        sorted_routes.sort_by_key(|&(i, t)| (t, i));
        let mut targets = Vec::with_capacity(routed.len());
        for &(i, t) in &sorted_routes {
            arrangement.push(i);
            let shift = self.types[t].0.deriv.checked_sub(&self.flat[i].factor.deriv).expect("v ≤ w checked");
            targets.push(TargetEdge { from: fref(i), target: t, shift });
        }
        let odd: Vec<usize> = arrangement.into_iter().filter(|&k| self.flat[k].odd).collect();
        let mut inversions = 0;
        for x in 0..odd.len() {
            for y in x + 1..odd.len() {
                if odd[x] > odd[y] {
                    inversions += 1;
                }
            }
        }
        WickGraph { propagators, targets, sign: if inversions % 2 == 0 { 1 } else { -1 } }
    }
}

/// Calls `emit` on every Wick graph of `(A⃗; B)`.
pub fn for_each_wick_graph<F: FnMut(&WickGraph)>(
    theory: &Theory,
    a: &[CompositeOperator],
    b: &CompositeOperator,
    limit: usize,
    mut emit: F,
) -> Result<usize> {
    if a.is_empty() {
        return Err(OpeError::InvalidArgument("need at least one operator".into()));
    }
    if !feasible(a, b) {
        return Ok(0);
    }
    let mut e = Enumerator::new(theory, a, b, limit);
    e.run(&mut emit)?;
    Ok(e.count)
}

pub fn enumerate_wick_graphs(theory: &Theory, a: &[CompositeOperator], b: &CompositeOperator) -> Result<Vec<WickGraph>> {
    let mut out = Vec::new();
    for_each_wick_graph(theory, a, b, DEFAULT_GRAPH_LIMIT, |g| out.push(g.clone()))?;
    Ok(out)
}

/// Value of one graph as a signed monomial over points `0..s`.
pub fn graph_term(g: &WickGraph, last_vertex: usize) -> (Vec<(Atom, u16)>, BigRational) {
    let mut sign = g.sign;
    let mut denom: u64 = 1;
    let mut mono = Vec::with_capacity(g.propagators.len() + g.targets.len());
    for p in &g.propagators {
        sign *= p.sign;
        mono.push((Atom::Prop { a: p.from.vertex as u8, b: p.to.vertex as u8, u: p.derivative }, 1));
    }
    for t in &g.targets {
        if t.shift.is_zero() {
            continue;
        }
        denom *= t.shift.factorial();
        for axis in 0..4 {
            let n = t.shift.0[axis];
            if n > 0 {
                mono.push((Atom::Coord { a: t.from.vertex as u8, b: last_vertex as u8, axis: axis as u8 }, n as u16));
            }
        }
    }
    (mono, BigRational::new(BigInt::from(sign), BigInt::from(denom)))
}

/// Free-theory OPE coefficient `C^B_{A⃗}(x_1,…,x_s)` with `x_s` the expansion
/// point; points are labelled `0..s`.
pub fn free_ope_coefficient(theory: &Theory, a: &[CompositeOperator], b: &CompositeOperator, mu: f64) -> Result<SymbolicCoefficient> {
    free_ope_coefficient_limited(theory, a, b, mu, DEFAULT_GRAPH_LIMIT)
}

pub fn free_ope_coefficient_limited(
    theory: &Theory,
    a: &[CompositeOperator],
    b: &CompositeOperator,
    mu: f64,
    limit: usize,
) -> Result<SymbolicCoefficient> {
    let mut e = SymbolicCoefficient::zero(a.len(), mu);
    let last = a.len().saturating_sub(1);
    for_each_wick_graph(theory, a, b, limit, |g| {
        let (m, c) = graph_term(g, last);
        e.add_term(m, c);
    })?;
    Ok(e)
}
