//! Four-component derivative multi-indices.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;

/// Derivative multi-index `w = (w¹,…,w⁴)`; `∂^w = ∏ ∂_a^{w^a}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct MultiIndex(pub [u8; 4]);

impl MultiIndex {
    pub const ZERO: MultiIndex = MultiIndex([0; 4]);

    /// Unit index along `axis` (0-based).
    pub fn unit(axis: usize) -> Self {
        let mut c = [0u8; 4];
        c[axis] = 1;
        MultiIndex(c)
    }

    pub fn order(&self) -> u32 {
        self.0.iter().map(|&c| c as u32).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 4]
    }

    pub fn factorial(&self) -> u64 {
        self.0.iter().map(|&c| factorial(c as u32)).product()
    }

    /// `(-1)^{|w|}`.
    pub fn sign(&self) -> i64 {
        if self.order() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn add(&self, o: &MultiIndex) -> MultiIndex {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(o.0) {
            *a += b;
        }
        MultiIndex(c)
    }

    pub fn checked_sub(&self, o: &MultiIndex) -> Option<MultiIndex> {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(o.0) {
            *a = a.checked_sub(b)?;
        }
        Some(MultiIndex(c))
    }

    /// Componentwise `self ≤ o`.
    pub fn le(&self, o: &MultiIndex) -> bool {
        self.0.iter().zip(o.0).all(|(a, b)| *a <= b)
    }

    /// `x^w` for a 4-vector.
    pub fn monomial(&self, x: &[f64; 4]) -> f64 {
        let mut p = 1.0;
        for a in 0..4 {
            p *= x[a].powi(self.0[a] as i32);
        }
        p
    }

    /// Binomial `(w choose v) = w!/(v!(w−v)!)`, zero unless `v ≤ w`.
    pub fn binomial(&self, v: &MultiIndex) -> u64 {
        match self.checked_sub(v) {
            None => 0,
            Some(d) => self.factorial() / (v.factorial() * d.factorial()),
        }
    }

    /// All multi-indices of order exactly `n`, ascending.
    pub fn all_of_order(n: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for a in 0..=n {
            for b in 0..=n - a {
                for c in 0..=n - a - b {
                    let d = n - a - b - c;
                    out.push(MultiIndex([a as u8, b as u8, c as u8, d as u8]));
                }
            }
        }
        out.sort();
        out
    }

    /// All multi-indices of order at most `n`, ascending.
    pub fn all_up_to(n: u32) -> Vec<MultiIndex> {
        (0..=n).flat_map(MultiIndex::all_of_order).collect()
    }

    /// All `v ≤ self` componentwise.
    pub fn sub_indices(&self) -> Vec<MultiIndex> {
        let w = self.0;
        let mut out = Vec::new();
        for a in 0..=w[0] {
            for b in 0..=w[1] {
                for c in 0..=w[2] {
                    for d in 0..=w[3] {
                        out.push(MultiIndex([a, b, c, d]));
                    }
                }
            }
        }
        out
    }
}

pub fn factorial(n: u32) -> u64 {
    (1..=n as u64).product()
}

/// Ordered by total order first, then lexicographically with higher powers of
/// earlier axes first, so `∂₁ < ∂₂ < … < ∂₁∂₁ < ∂₁∂₂`.
impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Renders as the list of axes, e.g. `d1d1d3`; the zero index renders empty.
impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in 0..4 {
            for _ in 0..self.0[a] {
                write!(f, "d{}", a + 1)?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{:?}", self.0)
    }
}
