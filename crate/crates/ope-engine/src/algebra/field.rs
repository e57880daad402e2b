//! Field content of a theory: dimensions, gradings, free pairings and the
//! free BRST differential.

use crate::error::{OpeError, Result};
use num::rational::Ratio;
use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

/// Exact engineering dimension.
pub type Dim = Ratio<i64>;

/// Parses `"3"`, `"3/2"` or a decimal with at most six fractional digits.
pub fn parse_dim(s: &str) -> Result<Dim> {
    let t = s.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| OpeError::Parse(format!("bad rational `{s}`")))?;
        let d: i64 = d.trim().parse().map_err(|_| OpeError::Parse(format!("bad rational `{s}`")))?;
        if d == 0 {
            return Err(OpeError::Parse(format!("zero denominator in `{s}`")));
        }
        return Ok(Ratio::new(n, d));
    }
    if let Ok(n) = t.parse::<i64>() {
        return Ok(Ratio::from_integer(n));
    }
    if let Some((ip, fp)) = t.split_once('.') {
        if fp.len() <= 6 && fp.chars().all(|c| c.is_ascii_digit()) {
            let neg = ip.starts_with('-');
            let ipv: i64 = if ip.is_empty() || ip == "-" { 0 } else { ip.parse().map_err(|_| OpeError::Parse(format!("bad number `{s}`")))? };
            let den = 10i64.pow(fp.len() as u32);
            let fv: i64 = if fp.is_empty() { 0 } else { fp.parse().unwrap() };
            let mag = ipv.abs() * den + fv;
            return Ok(Ratio::new(if neg { -mag } else { mag }, den));
        }
    }
    Err(OpeError::Parse(format!("bad dimension `{s}`")))
}

pub fn format_dim(d: &Dim) -> String {
    if d.is_integer() {
        d.numer().to_string()
    } else {
        format!("{}/{}", d.numer(), d.denom())
    }
}

pub fn dim_to_f64(d: &Dim) -> f64 {
    *d.numer() as f64 / *d.denom() as f64
}

pub(crate) mod dim_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Dim, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_dim(d))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Dim, D::Error> {
        let s = String::deserialize(d)?;
        parse_dim(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Boson,
    Fermion,
    Ghost,
    Antighost,
    Auxiliary,
    Antifield,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    #[serde(with = "dim_serde")]
    pub dimension: Dim,
    /// 0 even, 1 odd.
    pub parity: u8,
    pub ghost_number: i32,
    /// Number of spacetime indices, each valued in 1..=4.
    pub lorentz_arity: u8,
}

impl FieldSpec {
    pub fn new(name: &str, kind: FieldKind, dimension: Dim, parity: u8, ghost_number: i32, lorentz_arity: u8) -> Self {
        FieldSpec { name: name.to_string(), kind, dimension, parity, ghost_number, lorentz_arity }
    }

    pub fn is_odd(&self) -> bool {
        self.parity == 1
    }
}

/// How two factors contract under the free covariance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingKind {
    /// `κ·δ_{μν}·C`, or `κ·C` for index-free fields.
    Diagonal,
    /// `κ·∂_μ C` with `μ` the index carried by the left factor.
    GradientLeft,
    /// `κ·∂_μ C` with `μ` the index carried by the right factor.
    GradientRight,
}

/// `⟨left(x) right(y)⟩ = sign · (kind)(x − y)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairingRule {
    pub left: String,
    pub right: String,
    pub sign: i8,
    pub kind: PairingKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BrstImage {
    /// `ŝ₀ φ = sign · target` (same indices and derivatives).
    Field { target: String, sign: i8 },
    /// `ŝ₀ A_μ = ∂_μ target`.
    Gradient { target: String },
    Zero,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BrstRule {
    pub field: String,
    pub image: BrstImage,
}

/// Resolved pairing for a concrete pair of factors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Contraction {
    pub sign: i64,
    /// Extra derivative acting on the covariance.
    pub extra: super::MultiIndex,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Theory {
    pub name: String,
    pub fields: Vec<FieldSpec>,
    #[serde(default)]
    pub pairings: Vec<PairingRule>,
    #[serde(default)]
    pub brst: Vec<BrstRule>,
}

impl Theory {
    /// Validates dimensions and that every rule names a declared field.
    pub fn validate(&self) -> Result<()> {
        if self.fields.is_empty() {
            return Err(OpeError::InvalidArgument("theory has no fields".into()));
        }
        for f in &self.fields {
            if f.dimension < Dim::one() {
                return Err(OpeError::InvalidArgument(format!("field `{}` has dimension below 1", f.name)));
            }
            if f.parity > 1 || f.lorentz_arity > 2 {
                return Err(OpeError::InvalidArgument(format!("field `{}` has unsupported grading or arity", f.name)));
            }
        }
        for (i, f) in self.fields.iter().enumerate() {
            if self.fields[..i].iter().any(|g| g.name == f.name) {
                return Err(OpeError::InvalidArgument(format!("duplicate field `{}`", f.name)));
            }
        }
        for p in &self.pairings {
            let l = self.field_id(&p.left)?;
            let r = self.field_id(&p.right)?;
            let (fl, fr) = (&self.fields[l], &self.fields[r]);
            let ok = match p.kind {
                PairingKind::Diagonal => fl.lorentz_arity == fr.lorentz_arity,
                PairingKind::GradientLeft => fl.lorentz_arity == 1 && fr.lorentz_arity == 0,
                PairingKind::GradientRight => fl.lorentz_arity == 0 && fr.lorentz_arity == 1,
            };
            if !ok || fl.parity != fr.parity {
                return Err(OpeError::InvalidArgument(format!("pairing {}-{} is inconsistent", p.left, p.right)));
            }
        }
        for b in &self.brst {
            let f = self.field_id(&b.field)?;
            match &b.image {
                BrstImage::Field { target, .. } => {
                    let t = self.field_id(target)?;
                    if self.fields[t].lorentz_arity != self.fields[f].lorentz_arity {
                        return Err(OpeError::InvalidArgument(format!("BRST image of `{}` changes index structure", b.field)));
                    }
                }
                BrstImage::Gradient { target } => {
                    let t = self.field_id(target)?;
                    if self.fields[f].lorentz_arity != 1 || self.fields[t].lorentz_arity != 0 {
                        return Err(OpeError::InvalidArgument(format!("gradient BRST image of `{}` needs a vector field", b.field)));
                    }
                }
                BrstImage::Zero => {}
            }
        }
        Ok(())
    }

    pub fn field_id(&self, name: &str) -> Result<usize> {
        self.fields
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| OpeError::UnknownField(name.to_string()))
    }

    pub fn field(&self, id: usize) -> &FieldSpec {
        &self.fields[id]
    }

    /// Contraction of `left` (indices `il`) at x with `right` (indices `ir`)
    /// at y, or `None` if the pair does not contract.
    pub fn contraction(&self, left: usize, il: &[u8; 2], right: usize, ir: &[u8; 2]) -> Option<Contraction> {
        let (ln, rn) = (&self.fields[left].name, &self.fields[right].name);
        let rule = self.pairings.iter().find(|p| &p.left == ln && &p.right == rn)?;
        let sign = rule.sign as i64;
        match rule.kind {
            PairingKind::Diagonal => (il == ir).then_some(Contraction { sign, extra: super::MultiIndex::ZERO }),
            PairingKind::GradientLeft => Some(Contraction { sign, extra: super::MultiIndex::unit(il[0] as usize - 1) }),
            PairingKind::GradientRight => Some(Contraction { sign, extra: super::MultiIndex::unit(ir[0] as usize - 1) }),
        }
    }

    pub fn brst_rule(&self, field: usize) -> Option<&BrstImage> {
        let n = &self.fields[field].name;
        self.brst.iter().find(|b| &b.field == n).map(|b| &b.image)
    }

    /// Minimal field dimension; used as a fallback for Δ.
    pub fn min_field_dim(&self) -> Dim {
        self.fields.iter().map(|f| f.dimension).min().unwrap_or_else(Dim::one)
    }

    /// One real scalar of dimension 1.
    pub fn scalar() -> Theory {
        Theory {
            name: "scalar".into(),
            fields: vec![FieldSpec::new("phi", FieldKind::Boson, Dim::one(), 0, 0, 0)],
            pairings: vec![PairingRule { left: "phi".into(), right: "phi".into(), sign: 1, kind: PairingKind::Diagonal }],
            brst: vec![],
        }
    }

    /// Free Maxwell field with Nakanishi-Lautrup field and ghosts in Feynman
    /// gauge. The position-space pairings are chosen so that the free
    /// differential `ŝ₀A = ∂c, ŝ₀c̄ = B, ŝ₀B = ŝ₀c = 0` annihilates every
    /// two-point function.
    pub fn qed_free() -> Theory {
        let one = Dim::one();
        Theory {
            name: "qed_free".into(),
            fields: vec![
                FieldSpec::new("A", FieldKind::Boson, one, 0, 0, 1),
                FieldSpec::new("B", FieldKind::Auxiliary, Dim::from_integer(2), 0, 0, 0),
                FieldSpec::new("cbar", FieldKind::Antighost, one, 1, -1, 0),
                FieldSpec::new("c", FieldKind::Ghost, one, 1, 1, 0),
            ],
            pairings: vec![
                PairingRule { left: "A".into(), right: "A".into(), sign: 1, kind: PairingKind::Diagonal },
                PairingRule { left: "A".into(), right: "B".into(), sign: -1, kind: PairingKind::GradientLeft },
                PairingRule { left: "B".into(), right: "A".into(), sign: 1, kind: PairingKind::GradientRight },
                PairingRule { left: "c".into(), right: "cbar".into(), sign: 1, kind: PairingKind::Diagonal },
                PairingRule { left: "cbar".into(), right: "c".into(), sign: -1, kind: PairingKind::Diagonal },
            ],
            brst: vec![
                BrstRule { field: "A".into(), image: BrstImage::Gradient { target: "c".into() } },
                BrstRule { field: "B".into(), image: BrstImage::Zero },
                BrstRule { field: "cbar".into(), image: BrstImage::Field { target: "B".into(), sign: 1 } },
                BrstRule { field: "c".into(), image: BrstImage::Zero },
            ],
        }
    }

    /// A Dirac pair of dimension 3/2 with a four-valued spinor index. Only the
    /// operator algebra is supported for it; no pairings are declared.
    pub fn dirac() -> Theory {
        let d = Dim::new(3, 2);
        Theory {
            name: "dirac".into(),
            fields: vec![
                FieldSpec::new("psi", FieldKind::Fermion, d, 1, 0, 1),
                FieldSpec::new("psibar", FieldKind::Fermion, d, 1, 0, 1),
            ],
            pairings: vec![],
            brst: vec![],
        }
    }

    pub fn preset(name: &str) -> Result<Theory> {
        match name {
            "scalar" | "phi4" => Ok(Theory::scalar()),
            "qed" | "qed_free" | "maxwell" => Ok(Theory::qed_free()),
            "dirac" => Ok(Theory::dirac()),
            other => Err(OpeError::InvalidArgument(format!("unknown theory preset `{other}`"))),
        }
    }
}

impl Default for Theory {
    fn default() -> Self {
        Theory::scalar()
    }
}

/// `gcd` of two positive rationals.
pub fn rational_gcd(a: Dim, b: Dim) -> Dim {
    if a.is_zero() {
        return b.abs();
    }
    if b.is_zero() {
        return a.abs();
    }
    let l = num::integer::lcm(*a.denom(), *b.denom());
    let an = (a * Dim::from_integer(l)).to_integer();
    let bn = (b * Dim::from_integer(l)).to_integer();
    Dim::new(num::integer::gcd(an, bn), l)
}
