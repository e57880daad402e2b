//! Exact symbolic coefficients: rational linear combinations of products of
//! covariance derivatives `(∂^u C)(x_a − x_b)` and displacement components
//! `(x_a − x_b)^i`, with `a < b` point labels.

use crate::algebra::MultiIndex;
use crate::covariance::CovarianceJet;
use crate::error::{OpeError, Result};
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Atom {
    /// `(∂^u C)(x_a − x_b)`.
    Prop { a: u8, b: u8, u: MultiIndex },
    /// Component `axis` (0-based) of `x_a − x_b`.
    Coord { a: u8, b: u8, axis: u8 },
}

impl Atom {
    pub fn points(&self) -> (usize, usize) {
        match *self {
            Atom::Prop { a, b, .. } | Atom::Coord { a, b, .. } => (a as usize, b as usize),
        }
    }

    /// Scaling degree at μ = 0.
    pub fn degree(&self) -> i64 {
        match self {
            Atom::Prop { u, .. } => -(2 + u.order() as i64),
            Atom::Coord { .. } => 1,
        }
    }

    /// Relabels points; returns the re-oriented atom and the sign picked up,
    /// or `None` if a displacement collapses to zero.
    fn remap(&self, map: &[usize]) -> Result<Option<(Atom, i64)>> {
        let (a, b) = self.points();
        let (ma, mb) = (map[a], map[b]);
        match *self {
            Atom::Prop { u, .. } => {
                if ma == mb {
                    return Err(OpeError::CoincidentPoints(ma, mb));
                }
                Ok(Some(if ma < mb {
                    (Atom::Prop { a: ma as u8, b: mb as u8, u }, 1)
                } else {
                    (Atom::Prop { a: mb as u8, b: ma as u8, u }, u.sign())
                }))
            }
            Atom::Coord { axis, .. } => {
                if ma == mb {
                    return Ok(None);
                }
                Ok(Some(if ma < mb {
                    (Atom::Coord { a: ma as u8, b: mb as u8, axis }, 1)
                } else {
                    (Atom::Coord { a: mb as u8, b: ma as u8, axis }, -1)
                }))
            }
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Prop { a, b, u } if u.is_zero() => write!(f, "C(x{a}-x{b})"),
            Atom::Prop { a, b, u } => write!(f, "{u}C(x{a}-x{b})"),
            Atom::Coord { a, b, axis } => write!(f, "(x{a}-x{b})_{}", axis + 1),
        }
    }
}

/// Product of atoms with positive powers, sorted by atom.
pub type Monomial = Vec<(Atom, u16)>;

fn normalize(mut m: Monomial) -> Monomial {
    m.sort_by(|x, y| x.0.cmp(&y.0));
    let mut out: Monomial = Vec::with_capacity(m.len());
    for (a, p) in m {
        match out.last_mut() {
            Some((b, q)) if *b == a => *q += p,
            _ => out.push((a, p)),
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymbolicCoefficient {
    pub npoints: usize,
    pub mu: f64,
    terms: BTreeMap<Monomial, BigRational>,
}

impl SymbolicCoefficient {
    pub fn zero(npoints: usize, mu: f64) -> Self {
        SymbolicCoefficient { npoints, mu, terms: BTreeMap::new() }
    }

    pub fn constant(npoints: usize, mu: f64, c: BigRational) -> Self {
        let mut e = Self::zero(npoints, mu);
        e.add_term(Vec::new(), c);
        e
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    /// Adds `c · monomial`; the monomial need not be normalized.
    pub fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let m = normalize(m);
        let e = self.terms.entry(m.clone()).or_insert_with(BigRational::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn add_scaled(&mut self, other: &SymbolicCoefficient, c: &BigRational) {
        if c.is_zero() {
            return;
        }
        for (m, v) in &other.terms {
            let e = self.terms.entry(m.clone()).or_insert_with(BigRational::zero);
            *e += v * c;
            if e.is_zero() {
                self.terms.remove(m);
            }
        }
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        let mut out = Self::zero(self.npoints, self.mu);
        out.add_scaled(self, c);
        out
    }

    pub fn mul(&self, other: &SymbolicCoefficient) -> Self {
        let mut out = Self::zero(self.npoints.max(other.npoints), self.mu);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let mut m = m1.clone();
                m.extend_from_slice(m2);
                out.add_term(m, c1 * c2);
            }
        }
        out
    }

    /// Relabels point `i` as `map[i]`, in an expression over `npoints` points.
    /// Fails if a covariance would be evaluated at coincident points.
    pub fn remap(&self, map: &[usize], npoints: usize) -> Result<Self> {
        if map.len() < self.npoints {
            return Err(OpeError::InvalidArgument("point map shorter than expression arity".into()));
        }
        let mut out = Self::zero(npoints, self.mu);
        'terms: for (m, c) in &self.terms {
            let mut sign = 1i64;
            let mut nm = Vec::with_capacity(m.len());
            for (a, p) in m {
                match a.remap(map)? {
                    None => continue 'terms,
                    Some((na, s)) => {
                        if s < 0 && p % 2 == 1 {
                            sign = -sign;
                        }
                        nm.push((na, *p));
                    }
                }
            }
            out.add_term(nm, if sign < 0 { -c.clone() } else { c.clone() });
        }
        Ok(out)
    }

    /// Scaling degree at μ = 0 of every term.
    pub fn term_degrees(&self) -> Vec<i64> {
        self.terms
            .keys()
            .map(|m| m.iter().map(|(a, p)| a.degree() * *p as i64).sum())
            .collect()
    }

    /// Whether every term contains a covariance linking point `p` to another point.
    pub fn every_term_links(&self, p: usize) -> bool {
        self.terms.keys().all(|m| {
            m.iter().any(|(a, _)| matches!(a, Atom::Prop { .. }) && {
                let (x, y) = a.points();
                x == p || y == p
            })
        })
    }

    pub fn max_derivative_order(&self) -> u32 {
        self.terms
            .keys()
            .flat_map(|m| m.iter())
            .filter_map(|(a, _)| match a {
                Atom::Prop { u, .. } => Some(u.order()),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn compile(&self) -> CompiledCoefficient {
        CompiledCoefficient::new(self)
    }

    pub fn evaluate(&self, points: &[[f64; 4]]) -> Result<f64> {
        self.compile().evaluate(points)
    }

    pub fn to_record(&self) -> CoefficientRecord {
        CoefficientRecord {
            npoints: self.npoints,
            mu: self.mu,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| TermRecord {
                    coeff: c.to_string(),
                    atoms: m.iter().map(|(a, p)| AtomPower { atom: *a, power: *p }).collect(),
                })
                .collect(),
        }
    }

    pub fn from_record(r: &CoefficientRecord) -> Result<Self> {
        let mut e = Self::zero(r.npoints, r.mu);
        for t in &r.terms {
            let c: BigRational = parse_big_rational(&t.coeff)?;
            e.add_term(t.atoms.iter().map(|ap| (ap.atom, ap.power)).collect(), c);
        }
        Ok(e)
    }
}

fn parse_big_rational(s: &str) -> Result<BigRational> {
    let bad = || OpeError::Parse(format!("bad rational `{s}`"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.parse().map_err(|_| bad())?;
            let d: BigInt = d.parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(n, d))
        }
        None => Ok(BigRational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

impl fmt::Display for SymbolicCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            if i > 0 {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            } else if neg {
                write!(f, "-")?;
            }
            let a = c.abs();
            let mut parts: Vec<String> = Vec::new();
            if !a.is_one() || m.is_empty() {
                parts.push(a.to_string());
            }
            for (at, p) in m {
                parts.push(if *p > 1 { format!("{at}^{p}") } else { at.to_string() });
            }
            write!(f, "{}", parts.join("*"))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomPower {
    #[serde(flatten)]
    pub atom: Atom,
    pub power: u16,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub coeff: String,
    pub atoms: Vec<AtomPower>,
}

/// Serialized coefficient: a term list with atom descriptors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRecord {
    pub npoints: usize,
    pub mu: f64,
    pub terms: Vec<TermRecord>,
}

/// Interned, floating-point form of a coefficient for repeated evaluation.
#[derive(Clone, Debug)]
pub struct CompiledCoefficient {
    pub npoints: usize,
    pub mu: f64,
    /// Distinct point pairs carrying covariance atoms, with their maximal order.
    pairs: Vec<(usize, usize, u32)>,
    atoms: Vec<AtomSlot>,
    terms: Vec<(f64, Vec<(u32, i32)>)>,
}

#[derive(Clone, Copy, Debug)]
enum AtomSlot {
    Prop { pair: usize, u: MultiIndex },
    Coord { a: usize, b: usize, axis: usize },
}

impl CompiledCoefficient {
    fn new(e: &SymbolicCoefficient) -> Self {
        let mut table: HashMap<Atom, u32> = HashMap::new();
        let mut atoms = Vec::new();
        let mut pairs: Vec<(usize, usize, u32)> = Vec::new();
        let mut terms = Vec::with_capacity(e.terms.len());
        for (m, c) in &e.terms {
            let mut t = Vec::with_capacity(m.len());
            for (a, p) in m {
                let id = *table.entry(*a).or_insert_with(|| {
                    let slot = match *a {
                        Atom::Prop { a, b, u } => {
                            let (a, b) = (a as usize, b as usize);
                            let pair = match pairs.iter().position(|q| q.0 == a && q.1 == b) {
                                Some(i) => {
                                    pairs[i].2 = pairs[i].2.max(u.order());
                                    i
                                }
                                None => {
                                    pairs.push((a, b, u.order()));
                                    pairs.len() - 1
                                }
                            };
                            AtomSlot::Prop { pair, u }
                        }
                        Atom::Coord { a, b, axis } => AtomSlot::Coord { a: a as usize, b: b as usize, axis: axis as usize },
                    };
                    atoms.push(slot);
                    (atoms.len() - 1) as u32
                });
                t.push((id, *p as i32));
            }
            terms.push((c.to_f64().unwrap_or(f64::NAN), t));
        }
        CompiledCoefficient { npoints: e.npoints, mu: e.mu, pairs, atoms, terms }
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn evaluate(&self, points: &[[f64; 4]]) -> Result<f64> {
        if points.len() < self.npoints {
            return Err(OpeError::InvalidArgument(format!("need {} points, got {}", self.npoints, points.len())));
        }
        let mut jets = Vec::with_capacity(self.pairs.len());
        for &(a, b, order) in &self.pairs {
            let d = sub(&points[a], &points[b]);
            if d == [0.0; 4] {
                return Err(OpeError::CoincidentPoints(a, b));
            }
            jets.push(CovarianceJet::new(&d, self.mu, order)?);
        }
        let vals: Vec<f64> = self
            .atoms
            .iter()
            .map(|s| match *s {
                AtomSlot::Prop { pair, u } => jets[pair].deriv(&u),
                AtomSlot::Coord { a, b, axis } => points[a][axis] - points[b][axis],
            })
            .collect();
        Ok(self
            .terms
            .iter()
            .map(|(c, t)| t.iter().fold(*c, |acc, &(id, p)| acc * vals[id as usize].powi(p)))
            .sum())
    }
}

pub(crate) fn sub(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}
