//! Canonical composite-operator monomials, their linear combinations, the
//! Leibniz expansion and a small text syntax.
//!
//! Text syntax: a monomial is a `*`-separated list of factors, each written as
//! `d<axis>…<field><index…>[^power]`, e.g. `phi^2`, `phi*d1d1phi`, `d2A1`,
//! `cbar*c`. The unit operator is `1`. Linear combinations join monomials with
//! `+`/`-` and accept rational prefactors, e.g. `d1A2 - d2A1` or `1/24*phi^4`.

use super::field::{dim_serde, format_dim, Dim, Theory};
use super::multi_index::MultiIndex;
use crate::error::{OpeError, Result};
use num::{BigInt, BigRational, One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;

/// One derivative of one field component at a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Factor {
    /// Index into the theory's field list.
    pub field: u16,
    /// Lorentz indices 1..=4; unused slots are 0.
    pub idx: [u8; 2],
    pub deriv: MultiIndex,
}

impl Factor {
    pub fn new(field: usize, idx: [u8; 2], deriv: MultiIndex) -> Self {
        Factor { field: field as u16, idx, deriv }
    }

    pub fn scalar(field: usize) -> Self {
        Factor::new(field, [0, 0], MultiIndex::ZERO)
    }

    pub fn dimension(&self, t: &Theory) -> Dim {
        t.field(self.field as usize).dimension + Dim::from_integer(self.deriv.order() as i64)
    }

    pub fn is_odd(&self, t: &Theory) -> bool {
        t.field(self.field as usize).is_odd()
    }

    /// Same field component, derivative dropped.
    pub fn same_component(&self, o: &Factor) -> bool {
        self.field == o.field && self.idx == o.idx
    }

    pub fn label(&self, t: &Theory) -> String {
        let f = t.field(self.field as usize);
        let mut s = self.deriv.to_string();
        s.push_str(&f.name);
        for i in 0..f.lorentz_arity as usize {
            s.push(char::from(b'0' + self.idx[i]));
        }
        s
    }
}

/// Canonically ordered monomial. Equality and ordering only look at the
/// factor list; dimension and ghost number are derived data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompositeOperator {
    pub factors: Vec<Factor>,
    #[serde(with = "dim_serde")]
    pub dimension: Dim,
    pub ghost_number: i32,
}

impl PartialEq for CompositeOperator {
    fn eq(&self, o: &Self) -> bool {
        self.factors == o.factors
    }
}
impl Eq for CompositeOperator {}
impl std::hash::Hash for CompositeOperator {
    fn hash<H: std::hash::Hasher>(&self, h: &mut H) {
        self.factors.hash(h)
    }
}
impl Ord for CompositeOperator {
    fn cmp(&self, o: &Self) -> Ordering {
        self.dimension.cmp(&o.dimension).then_with(|| self.factors.cmp(&o.factors))
    }
}
impl PartialOrd for CompositeOperator {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl CompositeOperator {
    pub fn unit() -> Self {
        CompositeOperator { factors: vec![], dimension: Dim::zero(), ghost_number: 0 }
    }

    pub fn is_unit(&self) -> bool {
        self.factors.is_empty()
    }

    /// Builds from factors already in canonical order.
    pub fn from_sorted(t: &Theory, factors: Vec<Factor>) -> Self {
        let dimension = factors.iter().map(|f| f.dimension(t)).sum();
        let ghost_number = factors.iter().map(|f| t.field(f.field as usize).ghost_number).sum();
        CompositeOperator { factors, dimension, ghost_number }
    }

    pub fn parity(&self, t: &Theory) -> u8 {
        (self.factors.iter().filter(|f| f.is_odd(t)).count() % 2) as u8
    }

    pub fn label(&self, t: &Theory) -> String {
        if self.factors.is_empty() {
            return "1".into();
        }
        let mut parts: Vec<String> = Vec::new();
        let mut i = 0;
        while i < self.factors.len() {
            let mut j = i + 1;
            while j < self.factors.len() && self.factors[j] == self.factors[i] {
                j += 1;
            }
            let l = self.factors[i].label(t);
            parts.push(if j - i > 1 { format!("{l}^{}", j - i) } else { l });
            i = j;
        }
        parts.join("*")
    }

    pub fn record(&self, t: &Theory) -> OperatorRecord {
        OperatorRecord {
            label: self.label(t),
            factors: self
                .factors
                .iter()
                .map(|f| FactorRecord {
                    field: t.field(f.field as usize).name.clone(),
                    indices: f.idx[..t.field(f.field as usize).lorentz_arity as usize].to_vec(),
                    derivative: f.deriv.0,
                })
                .collect(),
            dimension: format_dim(&self.dimension),
            ghost_number: self.ghost_number,
        }
    }

    /// Count of factors per field component (field, indices), ignoring derivatives.
    pub fn component_counts(&self) -> BTreeMap<(u16, [u8; 2]), usize> {
        let mut m = BTreeMap::new();
        for f in &self.factors {
            *m.entry((f.field, f.idx)).or_insert(0) += 1;
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorRecord {
    pub field: String,
    pub indices: Vec<u8>,
    pub derivative: [u8; 4],
}

/// Named, human-readable form used in JSON output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorRecord {
    pub label: String,
    pub factors: Vec<FactorRecord>,
    pub dimension: String,
    pub ghost_number: i32,
}

/// Sorts `factors` canonically. Returns `None` for the zero operator (an odd
/// factor repeated) and otherwise the operator with the sign of the
/// permutation restricted to odd factors.
pub fn canonicalize(t: &Theory, mut factors: Vec<Factor>) -> Option<(CompositeOperator, i64)> {
    let mut sign = 1i64;
    for i in 1..factors.len() {
        let mut j = i;
        while j > 0 && factors[j - 1] > factors[j] {
            if factors[j - 1].is_odd(t) && factors[j].is_odd(t) {
                sign = -sign;
            }
            factors.swap(j - 1, j);
            j -= 1;
        }
    }
    for w in factors.windows(2) {
        if w[0] == w[1] && w[0].is_odd(t) {
            return None;
        }
    }
    Some((CompositeOperator::from_sorted(t, factors), sign))
}

/// Leibniz expansion of `∂^w op` into canonical monomials with integer
/// multiplicities. Terms are returned in canonical order.
pub fn derivative_expand(t: &Theory, w: &MultiIndex, op: &CompositeOperator) -> Vec<(CompositeOperator, i64)> {
    if w.is_zero() {
        return vec![(op.clone(), 1)];
    }
    if op.is_unit() {
        return vec![];
    }
    let mut acc = BTreeMap::new();
    expand_exact(t, op, w, &mut acc);
    acc.into_iter().filter(|(_, m)| *m != 0).collect()
}

fn expand_exact(t: &Theory, op: &CompositeOperator, w: &MultiIndex, acc: &mut BTreeMap<CompositeOperator, i64>) {
    // Enumerate every way to split each axis count among the factors and
    // weight it by the multinomial coefficient of that split.
    let n = op.factors.len();
    let mut splits: Vec<Vec<(Vec<u8>, i64)>> = Vec::with_capacity(4);
    for axis in 0..4 {
        let mut out = Vec::new();
        let mut cur = vec![0u8; n];
        compositions(w.0[axis], 0, &mut cur, &mut out);
        splits.push(
            out.into_iter()
                .map(|c| {
                    let denom: u64 = c.iter().map(|&k| super::multi_index::factorial(k as u32)).product();
                    let m = super::multi_index::factorial(w.0[axis] as u32) / denom;
                    (c, m as i64)
                })
                .collect(),
        );
    }
    for (c0, m0) in &splits[0] {
        for (c1, m1) in &splits[1] {
            for (c2, m2) in &splits[2] {
                for (c3, m3) in &splits[3] {
                    let factors: Vec<Factor> = (0..n)
                        .map(|i| {
                            let f = op.factors[i];
                            Factor { deriv: f.deriv.add(&MultiIndex([c0[i], c1[i], c2[i], c3[i]])), ..f }
                        })
                        .collect();
                    if let Some((c, s)) = canonicalize(t, factors) {
                        *acc.entry(c).or_insert(0) += s * m0 * m1 * m2 * m3;
                    }
                }
            }
        }
    }
}

fn compositions(left: u8, pos: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if pos + 1 == cur.len() {
        cur[pos] = left;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    for k in 0..=left {
        cur[pos] = k;
        compositions(left - k, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

/// Formal linear combination of canonical monomials with exact coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OperatorCombination {
    pub terms: BTreeMap<CompositeOperator, BigRational>,
}

impl OperatorCombination {
    pub fn single(op: CompositeOperator) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(op, BigRational::one());
        OperatorCombination { terms }
    }

    pub fn add_term(&mut self, op: CompositeOperator, c: BigRational) {
        let e = self.terms.entry(op.clone()).or_insert_with(BigRational::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&op);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn label(&self, t: &Theory) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut s = String::new();
        for (i, (op, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            if i > 0 {
                s.push_str(if neg { " - " } else { " + " });
            } else if neg {
                s.push('-');
            }
            let a = c.abs();
            if !a.is_one() {
                s.push_str(&format!("{a}*"));
            }
            s.push_str(&op.label(t));
        }
        s
    }
}

fn parse_factor(t: &Theory, tok: &str) -> Result<(Factor, usize)> {
    let bad = || OpeError::Parse(format!("bad factor `{tok}`"));
    let (body, power) = match tok.split_once('^') {
        Some((b, p)) => (b, p.parse::<usize>().map_err(|_| bad())?),
        None => (tok, 1),
    };
    let bytes = body.as_bytes();
    let mut deriv = [0u8; 4];
    let mut i = 0;
    while i + 1 < bytes.len() && bytes[i] == b'd' && (b'1'..=b'4').contains(&bytes[i + 1]) {
        deriv[(bytes[i + 1] - b'1') as usize] += 1;
        i += 2;
    }
    let rest = &body[i..];
    let (fid, name_len) = t
        .fields
        .iter()
        .enumerate()
        .filter(|(_, f)| rest.starts_with(f.name.as_str()))
        .map(|(k, f)| (k, f.name.len()))
        .max_by_key(|&(_, l)| l)
        .ok_or_else(|| OpeError::UnknownField(rest.to_string()))?;
    let idx_str = &rest[name_len..];
    let arity = t.field(fid).lorentz_arity as usize;
    if idx_str.len() != arity || !idx_str.bytes().all(|b| (b'1'..=b'4').contains(&b)) {
        return Err(OpeError::Parse(format!("factor `{tok}` needs {arity} index digit(s) in 1..4")));
    }
    let mut idx = [0u8; 2];
    for (k, b) in idx_str.bytes().enumerate() {
        idx[k] = b - b'0';
    }
    if power == 0 {
        return Err(bad());
    }
    Ok((Factor::new(fid, idx, MultiIndex(deriv)), power))
}

/// Parses a monomial, returning the canonical operator and the reordering
/// sign, or `None` if it vanishes identically.
pub fn parse_monomial(t: &Theory, s: &str) -> Result<Option<(CompositeOperator, i64)>> {
    let s = s.trim();
    if s == "1" || s.is_empty() {
        return Ok(Some((CompositeOperator::unit(), 1)));
    }
    let mut factors = Vec::new();
    for tok in s.split(|c: char| c == '*' || c.is_whitespace()).filter(|x| !x.is_empty()) {
        let (f, p) = parse_factor(t, tok)?;
        for _ in 0..p {
            factors.push(f);
        }
    }
    Ok(canonicalize(t, factors))
}

/// Parses a monomial that must not vanish and must already be written with a
/// positive reordering sign.
pub fn parse_operator(t: &Theory, s: &str) -> Result<CompositeOperator> {
    match parse_monomial(t, s)? {
        Some((op, 1)) => Ok(op),
        Some((op, _)) => Err(OpeError::Parse(format!(
            "`{s}` is minus the canonical monomial `{}`; write it in canonical order",
            op.label(t)
        ))),
        None => Err(OpeError::Parse(format!("`{s}` vanishes identically"))),
    }
}

/// Parses a linear combination such as `d1A2 - d2A1` or `1/24*phi^4`.
pub fn parse_combination(t: &Theory, s: &str) -> Result<OperatorCombination> {
    let mut out = OperatorCombination::default();
    let mut chunks: Vec<(bool, String)> = Vec::new();
    let mut cur = String::new();
    let mut neg = false;
    for ch in s.chars() {
        if (ch == '+' || ch == '-') && !cur.trim().is_empty() && !cur.trim_end().ends_with('^') {
            chunks.push((neg, std::mem::take(&mut cur)));
            neg = ch == '-';
        } else if (ch == '+' || ch == '-') && cur.trim().is_empty() {
            if ch == '-' {
                neg = !neg;
            }
        } else {
            cur.push(ch);
        }
    }
    chunks.push((neg, cur));
    for (neg, chunk) in chunks {
        let chunk = chunk.trim();
        if chunk.is_empty() {
            return Err(OpeError::Parse(format!("empty term in `{s}`")));
        }
        let mut coeff = BigRational::one();
        let mut mono = chunk;
        if let Some((head, tail)) = chunk.split_once('*') {
            if let Some(c) = parse_rational(head.trim()) {
                coeff = c;
                mono = tail;
            }
        } else if let Some(c) = parse_rational(chunk) {
            if chunk != "1" {
                coeff = c;
                mono = "1";
            }
        }
        if neg {
            coeff = -coeff;
        }
        if let Some((op, sign)) = parse_monomial(t, mono)? {
            out.add_term(op, coeff * BigRational::from_integer(BigInt::from(sign)));
        }
    }
    Ok(out)
}

/// Parses `p`, `p/q` or a short decimal into an exact rational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let d = super::field::parse_dim(s).ok()?;
    Some(BigRational::new(BigInt::from(*d.numer()), BigInt::from(*d.denom())))
}
