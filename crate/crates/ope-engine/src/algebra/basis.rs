//! Enumeration of all canonical monomials up to a dimension cutoff.

use super::field::{format_dim, rational_gcd, Dim, Theory};
use super::multi_index::MultiIndex;
use super::operator::{CompositeOperator, Factor, OperatorRecord};
use crate::error::{OpeError, Result};
use num::{One, Zero};
use serde::Serialize;
use std::collections::HashMap;

pub const DEFAULT_BASIS_LIMIT: usize = 100_000;

#[derive(Clone, Debug)]
pub struct BasisOptions {
    pub max_size: usize,
    /// Only keep monomials with at most this many factors.
    pub max_factors: Option<usize>,
    /// Only keep monomials with exactly these factor counts.
    pub factor_counts: Option<Vec<usize>>,
}

impl Default for BasisOptions {
    fn default() -> Self {
        BasisOptions { max_size: DEFAULT_BASIS_LIMIT, max_factors: None, factor_counts: None }
    }
}

/// Every canonical monomial of dimension at most `d_max`, sorted by
/// dimension and then factor order; the unit operator sits at index 0.
#[derive(Clone, Debug)]
pub struct OperatorBasis {
    pub theory: Theory,
    pub d_max: Dim,
    pub operators: Vec<CompositeOperator>,
    pub delta: Dim,
    index: HashMap<CompositeOperator, usize>,
}

#[derive(Serialize)]
struct BasisRecord<'a> {
    theory: &'a str,
    d_max: String,
    delta: String,
    operators: Vec<OperatorRecord>,
}

impl OperatorBasis {
    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn position(&self, op: &CompositeOperator) -> Option<usize> {
        self.index.get(op).copied()
    }

    pub fn contains(&self, op: &CompositeOperator) -> bool {
        self.index.contains_key(op)
    }

    /// Operators with dimension in `[lo, hi]`.
    pub fn in_range(&self, lo: Dim, hi: Dim) -> impl Iterator<Item = &CompositeOperator> {
        self.operators.iter().filter(move |o| o.dimension >= lo && o.dimension <= hi)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rec = BasisRecord {
            theory: &self.theory.name,
            d_max: format_dim(&self.d_max),
            delta: format_dim(&self.delta),
            operators: self.operators.iter().map(|o| o.record(&self.theory)).collect(),
        };
        serde_json::to_value(rec).expect("basis record serializes")
    }
}

/// Minimal dimension gap of the operator algebra generated by the fields and
/// derivatives: the rational gcd of 1 and every field dimension.
pub fn dimension_gap(t: &Theory) -> Dim {
    t.fields.iter().fold(Dim::one(), |g, f| rational_gcd(g, f.dimension))
}

pub fn enumerate_basis(t: &Theory, d_max: Dim) -> Result<OperatorBasis> {
    enumerate_basis_with(t, d_max, &BasisOptions::default())
}

pub fn enumerate_basis_with(t: &Theory, d_max: Dim, opts: &BasisOptions) -> Result<OperatorBasis> {
    t.validate()?;
    if d_max < Dim::zero() {
        return Err(OpeError::InvalidArgument("d_max must be non-negative".into()));
    }
    let jets = jet_variables(t, d_max);
    let jet_dims: Vec<Dim> = jets.iter().map(|j| j.dimension(t)).collect();
    let jet_odd: Vec<bool> = jets.iter().map(|j| j.is_odd(t)).collect();
    let cap = opts.max_factors.or_else(|| opts.factor_counts.as_ref().and_then(|v| v.iter().max().copied()));

    let mut ops = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    struct Ctx<'a> {
        t: &'a Theory,
        jets: &'a [Factor],
        dims: &'a [Dim],
        odd: &'a [bool],
        cap: Option<usize>,
        counts: Option<&'a [usize]>,
        limit: usize,
    }
    fn dfs(c: &Ctx, start: usize, left: Dim, stack: &mut Vec<usize>, out: &mut Vec<CompositeOperator>) -> Result<()> {
        let keep = c.counts.map_or(true, |v| v.contains(&stack.len()));
        if keep {
            if out.len() >= c.limit {
                return Err(OpeError::BasisTooLarge { limit: c.limit });
            }
            let f: Vec<Factor> = stack.iter().map(|&i| c.jets[i]).collect();
            out.push(CompositeOperator::from_sorted(c.t, f));
        }
        if c.cap.is_some_and(|m| stack.len() >= m) {
            return Ok(());
        }
        for i in start..c.jets.len() {
            if c.dims[i] > left {
                continue;
            }
            stack.push(i);
            let next = if c.odd[i] { i + 1 } else { i };
            dfs(c, next, left - c.dims[i], stack, out)?;
            stack.pop();
        }
        Ok(())
    }
    let ctx = Ctx {
        t,
        jets: &jets,
        dims: &jet_dims,
        odd: &jet_odd,
        cap,
        counts: opts.factor_counts.as_deref(),
        limit: opts.max_size,
    };
    dfs(&ctx, 0, d_max, &mut stack, &mut ops)?;
    ops.sort();
    let index = ops.iter().enumerate().map(|(i, o)| (o.clone(), i)).collect();
    Ok(OperatorBasis { theory: t.clone(), d_max, operators: ops, delta: dimension_gap(t), index })
}

/// All single factors of dimension ≤ `d_max`, in canonical order.
pub fn jet_variables(t: &Theory, d_max: Dim) -> Vec<Factor> {
    let mut jets = Vec::new();
    for (fid, f) in t.fields.iter().enumerate() {
        if f.dimension > d_max {
            continue;
        }
        let room = (d_max - f.dimension).floor().to_integer() as u32;
        let idx_sets: Vec<[u8; 2]> = match f.lorentz_arity {
            0 => vec![[0, 0]],
            1 => (1..=4).map(|a| [a, 0]).collect(),
            _ => (1..=4).flat_map(|a| (1..=4).map(move |b| [a, b])).collect(),
        };
        for idx in idx_sets {
            for w in MultiIndex::all_up_to(room) {
                jets.push(Factor::new(fid, idx, w));
            }
        }
    }
    jets.sort();
    jets
}
