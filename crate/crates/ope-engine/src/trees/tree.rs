//! Weighted trees, their line momenta and weight factors.

use super::kinematics::{add, eta_bar_i, eta_i, norm, subset_sup, sum, Momentum};
use crate::algebra::MultiIndex;
use crate::error::{OpeError, Result};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Vertex {
    /// External vertex of the given dimension, in `[1, 3]`.
    External(f64),
    Internal,
    /// Vertex without momentum conservation.
    Special,
}

/// A tree with external, internal and at most one special vertex. External
/// vertices are numbered in the order they appear in `vertices`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightedTree {
    vertices: Vec<Vertex>,
    edges: Vec<(usize, usize)>,
    /// Derivative multi-index per external vertex.
    pub w: Vec<MultiIndex>,
    /// Particular dimension.
    pub vp: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relevance {
    Relevant,
    Marginal,
    Irrelevant,
}

/// Product of powers `∏ base^exp`, kept in log form. Zero bases are collected
/// separately: they all stand for `sup(0, Λ)` with `Λ = 0`, so only the sum of
/// their exponents matters.
#[derive(Clone, Copy, Debug, Default)]
struct LogProduct {
    log: f64,
    zero_exp: f64,
}

impl LogProduct {
    fn push(&mut self, base: f64, exp: f64) {
        if exp == 0.0 {
            return;
        }
        if base == 0.0 {
            self.zero_exp += exp;
        } else {
            self.log += exp * base.ln();
        }
    }

    fn ln(&self) -> f64 {
        if self.zero_exp.abs() < 1e-12 {
            self.log
        } else if self.zero_exp > 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    }
}

impl WeightedTree {
    pub fn new(vertices: Vec<Vertex>, edges: Vec<(usize, usize)>, w: Vec<MultiIndex>, vp: f64) -> Result<Self> {
        let t = WeightedTree { vertices, edges, w, vp };
        t.validate()?;
        Ok(t)
    }

    /// Builds without validation; callers must validate.
    pub(crate) fn raw(vertices: Vec<Vertex>, edges: Vec<(usize, usize)>, w: Vec<MultiIndex>, vp: f64) -> Self {
        WeightedTree { vertices, edges, w, vp }
    }

    /// One internal or special centre with the given external dimensions attached.
    pub fn star(dims: &[f64], special: bool, vp: f64) -> Result<Self> {
        let mut vertices = vec![if special { Vertex::Special } else { Vertex::Internal }];
        let mut edges = Vec::new();
        for &d in dims {
            edges.push((0, vertices.len()));
            vertices.push(Vertex::External(d));
        }
        WeightedTree::new(vertices, edges, vec![MultiIndex::default(); dims.len()], vp)
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Vertex ids of the external vertices, in numbering order.
    pub fn externals(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| matches!(self.vertices[v], Vertex::External(_))).collect()
    }

    pub fn n_external(&self) -> usize {
        self.externals().len()
    }

    pub fn n_internal(&self) -> usize {
        self.vertices.iter().filter(|v| **v == Vertex::Internal).count()
    }

    pub fn special(&self) -> Option<usize> {
        self.vertices.iter().position(|v| *v == Vertex::Special)
    }

    pub fn has_special(&self) -> bool {
        self.special().is_some()
    }

    pub fn external_dim(&self, i: usize) -> f64 {
        match self.vertices[self.externals()[i]] {
            Vertex::External(d) => d,
            _ => unreachable!("externals() only lists external vertices"),
        }
    }

    pub fn valence(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    pub(crate) fn neighbours(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| if a == v { Some(b) } else if b == v { Some(a) } else { None })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(OpeError::InvalidArgument(m));
        let n = self.vertices.len();
        let specials = self.vertices.iter().filter(|v| **v == Vertex::Special).count();
        if specials > 1 {
            return bad("more than one special vertex".into());
        }
        let ext = self.externals();
        if specials == 0 && (ext.is_empty() || self.n_internal() == 0) {
            return bad("a tree without special vertex needs an external and an internal vertex".into());
        }
        if n == 0 {
            return bad("empty tree".into());
        }
        if self.edges.len() + 1 != n {
            return bad(format!("{} vertices need {} lines, found {}", n, n - 1, self.edges.len()));
        }
        if self.edges.iter().any(|&(a, b)| a >= n || b >= n || a == b) {
            return bad("line with invalid endpoints".into());
        }
        // Connected with n − 1 lines ⇒ acyclic.
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for u in self.neighbours(v) {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return bad("tree is not connected".into());
        }
        for (v, kind) in self.vertices.iter().enumerate() {
            let k = self.valence(v);
            match kind {
                Vertex::External(d) => {
                    if k != 1 {
                        return bad(format!("external vertex {v} has valence {k}"));
                    }
                    if !(1.0..=3.0).contains(d) {
                        return bad(format!("external dimension {d} outside [1, 3]"));
                    }
                    if matches!(self.vertices[self.neighbours(v)[0]], Vertex::External(_)) {
                        return bad(format!("external vertex {v} attached to an external vertex"));
                    }
                }
                Vertex::Internal => {
                    if !(1..=4).contains(&k) {
                        return bad(format!("internal vertex {v} has valence {k}"));
                    }
                }
                Vertex::Special => {}
            }
        }
        if self.w.len() != ext.len() {
            return bad(format!("{} derivative indices for {} external vertices", self.w.len(), ext.len()));
        }
        if specials == 0 && self.w.last().is_some_and(|w| w.order() != 0) {
            return bad("the last external vertex of a tree without special vertex carries no derivatives".into());
        }
        if !self.vp.is_finite() {
            return bad("particular dimension must be finite".into());
        }
        Ok(())
    }

    /// `|w⃗|`, the total derivative order.
    pub fn w_order(&self) -> u32 {
        self.w.iter().map(|w| w.order()).sum()
    }

    /// `[T]` as the sum of all weight exponents.
    pub fn dimension(&self) -> f64 {
        let mut d = self.vp - 2.0 * self.edges.len() as f64 - self.w_order() as f64;
        for (v, kind) in self.vertices.iter().enumerate() {
            let k = self.valence(v) as f64;
            d += match kind {
                Vertex::External(dim) => 3.0 - dim,
                Vertex::Internal => 4.0 - k,
                Vertex::Special => -k,
            };
        }
        d
    }

    /// `[T]` in closed form: `4·[no special] + [v_p] − Σ[v_e] − |w⃗|`.
    pub fn dimension_closed_form(&self) -> f64 {
        let base = if self.has_special() { 0.0 } else { 4.0 };
        let dims: f64 = (0..self.n_external()).map(|i| self.external_dim(i)).sum();
        base + self.vp - dims - self.w_order() as f64
    }

    pub fn relevance(&self) -> Relevance {
        let d = self.dimension();
        if d > 1e-9 {
            Relevance::Relevant
        } else if d < -1e-9 {
            Relevance::Irrelevant
        } else {
            Relevance::Marginal
        }
    }

    fn check_momenta(&self, q: &[Momentum]) -> Result<()> {
        let n = self.n_external();
        if q.len() != n {
            return Err(OpeError::InconsistentMomentum(format!("{} momenta for {n} external vertices", q.len())));
        }
        if q.iter().flatten().any(|v| !v.is_finite()) {
            return Err(OpeError::InconsistentMomentum("non-finite momentum".into()));
        }
        if !self.has_special() {
            let scale: f64 = q.iter().map(norm).sum();
            let total = norm(&sum(q));
            if total > 1e-9 * scale.max(f64::MIN_POSITIVE) {
                return Err(OpeError::InconsistentMomentum(format!("momenta sum to {total:e} without a special vertex")));
            }
        }
        Ok(())
    }

    /// Norm of the momentum on each line (same order as `edges()`): the sum of
    /// external momenta behind the line, seen from the special vertex if any.
    pub fn line_momenta(&self, q: &[Momentum]) -> Result<Vec<f64>> {
        self.check_momenta(q)?;
        let n = self.vertices.len();
        let ext = self.externals();
        let mut ext_index = vec![usize::MAX; n];
        for (i, &v) in ext.iter().enumerate() {
            ext_index[v] = i;
        }
        let root = self.special().unwrap_or(0);
        // Iterative DFS; behind[v] = momentum sum of externals in v's subtree.
        let mut parent = vec![usize::MAX; n];
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![root];
        parent[root] = root;
        while let Some(v) = stack.pop() {
            order.push(v);
            for u in self.neighbours(v) {
                if parent[u] == usize::MAX {
                    parent[u] = v;
                    stack.push(u);
                }
            }
        }
        let mut behind = vec![[0.0; 4]; n];
        for &v in order.iter().rev() {
            if ext_index[v] != usize::MAX {
                behind[v] = add(&behind[v], &q[ext_index[v]]);
            }
            if v != root {
                let p = parent[v];
                behind[p] = add(&behind[p], &behind[v]);
            }
        }
        Ok(self
            .edges
            .iter()
            .map(|&(a, b)| if parent[b] == a { norm(&behind[b]) } else { norm(&behind[a]) })
            .collect())
    }

    /// Momentum of each internal vertex: the largest incident line momentum,
    /// ties going to the earliest line. Returns `(vertex, line)` pairs.
    pub fn internal_momenta(&self, lines: &[f64]) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (v, kind) in self.vertices.iter().enumerate() {
            if *kind != Vertex::Internal {
                continue;
            }
            let mut best: Option<usize> = None;
            for (l, &(a, b)) in self.edges.iter().enumerate() {
                if (a == v || b == v) && best.is_none_or(|m| lines[l] > lines[m]) {
                    best = Some(l);
                }
            }
            out.push((v, best.expect("internal vertices have at least one line")));
        }
        out
    }

    /// `ln G^{T,w⃗}(q⃗; μ, Λ)`; `±∞` when `Λ = 0` and a zero momentum appears.
    pub fn ln_weight(&self, q: &[Momentum], mu: f64, lambda: f64) -> Result<f64> {
        if !(mu > 0.0) || !(lambda >= 0.0) {
            return Err(OpeError::InvalidArgument(format!("need μ > 0 and Λ ≥ 0, got μ = {mu}, Λ = {lambda}")));
        }
        let lines = self.line_momenta(q)?;
        let sup = |x: f64| x.max(lambda);
        let mut p = LogProduct::default();
        for &l in &lines {
            p.push(sup(l), -2.0);
        }
        for (i, &v) in self.externals().iter().enumerate() {
            let line = self.edges.iter().position(|&(a, b)| a == v || b == v).expect("external has a line");
            p.push(sup(lines[line]), 3.0 - self.external_dim(i));
        }
        for (v, l) in self.internal_momenta(&lines) {
            p.push(sup(lines[l]), 4.0 - self.valence(v) as f64);
        }
        if let Some(s) = self.special() {
            p.push(mu.max(lambda), -(self.valence(s) as f64));
        }
        p.push(subset_sup(q)?.max(mu).max(lambda), self.vp);
        let special = self.has_special();
        for (i, w) in self.w.iter().enumerate() {
            if w.order() == 0 {
                continue;
            }
            let e = if special { eta_bar_i(q, i)? } else { eta_i(q, i)? };
            p.push(sup(e), -(w.order() as f64));
        }
        Ok(p.ln())
    }

    /// `G^{T,w⃗}(q⃗; μ, Λ)`.
    pub fn weight(&self, q: &[Momentum], mu: f64, lambda: f64) -> Result<f64> {
        Ok(self.ln_weight(q, mu, lambda)?.exp())
    }
}

/// Free-function form of [`WeightedTree::weight`].
pub fn weight_factor(t: &WeightedTree, q: &[Momentum], mu: f64, lambda: f64) -> Result<f64> {
    t.weight(q, mu, lambda)
}

pub fn tree_dimension(t: &WeightedTree) -> f64 {
    t.dimension()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(axis: usize, v: f64) -> Momentum {
        let mut q = [0.0; 4];
        q[axis] = v;
        q
    }

    #[test]
    fn dimensions_of_small_trees() {
        let t = WeightedTree::star(&[1.0], true, 0.0).unwrap();
        assert_eq!(t.dimension(), -1.0);
        assert_eq!(t.relevance(), Relevance::Irrelevant);
        let t = WeightedTree::star(&[1.0, 1.0], false, 0.0).unwrap();
        assert_eq!(t.dimension(), 2.0);
        assert_eq!(t.dimension_closed_form(), 2.0);
        assert_eq!(t.relevance(), Relevance::Relevant);
    }

    #[test]
    fn single_line_weight() {
        // ext(dim 3)–special: line |q|⁻², external |q|⁰, special μ⁻¹.
        let t = WeightedTree::star(&[3.0], true, 0.0).unwrap();
        let q = [e(2, 4.0)];
        let g = t.weight(&q, 1.0, 0.0).unwrap();
        assert!((g - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn lone_special_vertex_has_unit_weight() {
        let t = WeightedTree::new(vec![Vertex::Special], vec![], vec![], 0.0).unwrap();
        assert_eq!(t.weight(&[], 3.0, 0.5).unwrap(), 1.0);
        assert_eq!(t.dimension(), 0.0);
    }

    #[test]
    fn conservation_enforced() {
        let t = WeightedTree::star(&[1.0, 1.0], false, 0.0).unwrap();
        assert!(matches!(t.weight(&[e(0, 1.0), e(0, 2.0)], 1.0, 0.0), Err(OpeError::InconsistentMomentum(_))));
        assert!(t.weight(&[e(0, 1.0), e(0, -1.0)], 1.0, 0.0).is_ok());
        assert!(matches!(t.weight(&[e(0, 1.0)], 1.0, 0.0), Err(OpeError::InconsistentMomentum(_))));
    }

    #[test]
    fn invalid_structures_rejected() {
        use Vertex::*;
        // external–external
        assert!(WeightedTree::new(vec![External(1.0), External(1.0)], vec![(0, 1)], vec![MultiIndex::default(); 2], 0.0).is_err());
        // internal of valence 5
        let mut v = vec![Internal];
        let mut ed = vec![];
        for i in 1..=5 {
            v.push(External(1.0));
            ed.push((0, i));
        }
        assert!(WeightedTree::new(v, ed, vec![MultiIndex::default(); 5], 0.0).is_err());
        // cycle
        assert!(WeightedTree::new(vec![Internal, Internal, Internal], vec![(0, 1), (1, 2), (2, 0)], vec![], 0.0).is_err());
        // derivative on the last external without special vertex
        let w = vec![MultiIndex::default(), MultiIndex::unit(0)];
        assert!(WeightedTree::new(vec![Internal, External(1.0), External(1.0)], vec![(0, 1), (0, 2)], w, 0.0).is_err());
    }

    #[test]
    fn line_momenta_follow_conservation() {
        use Vertex::*;
        // e0, e1 – i – i' – e2, e3
        let t = WeightedTree::new(
            vec![Internal, Internal, External(1.0), External(1.0), External(1.0), External(1.0)],
            vec![(0, 2), (0, 3), (0, 1), (1, 4), (1, 5)],
            vec![MultiIndex::default(); 4],
            0.0,
        )
        .unwrap();
        let q = [e(0, 1.0), e(1, 2.0), e(0, -3.0), [2.0, -2.0, 0.0, 0.0]];
        let l = t.line_momenta(&q).unwrap();
        assert!((l[2] - 5f64.sqrt()).abs() < 1e-14);
        assert_eq!(l[0], 1.0);
        assert_eq!(l[1], 2.0);
    }

    #[test]
    fn large_cutoff_scaling() {
        let t = WeightedTree::star(&[1.0, 2.0, 1.5], true, 2.5).unwrap();
        let q = [e(0, 1.0), e(1, 0.3), e(3, -2.0)];
        let lam = 1e6;
        let r = t.ln_weight(&q, 1.0, lam).unwrap() - t.dimension() * lam.ln();
        assert!(r.abs() < 1e-12);
    }
}
