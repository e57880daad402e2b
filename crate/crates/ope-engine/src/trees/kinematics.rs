//! Subset-sum kinematic functions of a list of momenta.

use crate::error::{OpeError, Result};

pub type Momentum = [f64; 4];

/// Largest list handled by the exhaustive subset scans.
pub const MAX_MOMENTA: usize = 12;

pub fn norm(q: &Momentum) -> f64 {
    q.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn add(a: &Momentum, b: &Momentum) -> Momentum {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

pub fn neg(a: &Momentum) -> Momentum {
    [-a[0], -a[1], -a[2], -a[3]]
}

pub fn sum(qs: &[Momentum]) -> Momentum {
    qs.iter().fold([0.0; 4], |acc, q| add(&acc, q))
}

fn guard(n: usize) -> Result<()> {
    if n > MAX_MOMENTA {
        return Err(OpeError::InvalidArgument(format!("{n} momenta exceed the subset-scan limit {MAX_MOMENTA}")));
    }
    Ok(())
}

/// Infimum of `|q_i + Σ_{Q} q|` over subsets `Q` of `pool` (indices, `i` excluded).
fn inf_with(qs: &[Momentum], i: usize, pool: &[usize]) -> f64 {
    let pool: Vec<usize> = pool.iter().copied().filter(|&j| j != i).collect();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << pool.len()) {
        let mut s = qs[i];
        for (b, &j) in pool.iter().enumerate() {
            if mask & (1 << b) != 0 {
                s = add(&s, &qs[j]);
            }
        }
        best = best.min(norm(&s));
    }
    best
}

/// `|q⃗|`: the largest norm of a sub-sum; `0` for no momenta.
pub fn subset_sup(qs: &[Momentum]) -> Result<f64> {
    guard(qs.len())?;
    let mut best: f64 = 0.0;
    for mask in 1u32..(1 << qs.len()) {
        let mut s = [0.0; 4];
        for (j, q) in qs.iter().enumerate() {
            if mask & (1 << j) != 0 {
                s = add(&s, q);
            }
        }
        best = best.max(norm(&s));
    }
    Ok(best)
}

/// `η_{q_i}`: sub-sums containing `q_i` built from all momenta but the last.
/// For a single momentum this is its norm.
pub fn eta_i(qs: &[Momentum], i: usize) -> Result<f64> {
    guard(qs.len())?;
    check_index(qs, i)?;
    if qs.len() == 1 {
        return Ok(norm(&qs[0]));
    }
    let pool: Vec<usize> = (0..qs.len() - 1).collect();
    Ok(inf_with(qs, i, &pool))
}

/// `η̄_{q_i}`: as [`eta_i`] but sub-sums may use every momentum.
pub fn eta_bar_i(qs: &[Momentum], i: usize) -> Result<f64> {
    guard(qs.len())?;
    check_index(qs, i)?;
    let pool: Vec<usize> = (0..qs.len()).collect();
    Ok(inf_with(qs, i, &pool))
}

/// `η = inf_{i < n} η_{q_i}`; `0` for no momenta and `|q|` for one.
pub fn eta(qs: &[Momentum]) -> Result<f64> {
    match qs.len() {
        0 => Ok(0.0),
        1 => Ok(norm(&qs[0])),
        n => (0..n - 1).map(|i| eta_i(qs, i)).try_fold(f64::INFINITY, |m, v| Ok(m.min(v?))),
    }
}

/// `η̄ = inf_i η̄_{q_i}`; `μ` for no momenta.
pub fn eta_bar(qs: &[Momentum], mu: f64) -> Result<f64> {
    if qs.is_empty() {
        return Ok(mu);
    }
    (0..qs.len()).map(|i| eta_bar_i(qs, i)).try_fold(f64::INFINITY, |m, v| Ok(m.min(v?)))
}

fn check_index(qs: &[Momentum], i: usize) -> Result<()> {
    if i >= qs.len() {
        return Err(OpeError::InvalidArgument(format!("momentum index {i} out of range for {} momenta", qs.len())));
    }
    Ok(())
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
    fn empty_and_single() {
        assert_eq!(subset_sup(&[]).unwrap(), 0.0);
        assert_eq!(eta(&[]).unwrap(), 0.0);
        assert_eq!(eta_bar(&[], 2.5).unwrap(), 2.5);
        let q = [e(1, 3.0)];
        assert_eq!(eta_i(&q, 0).unwrap(), 3.0);
        assert_eq!(eta(&q).unwrap(), 3.0);
    }

    #[test]
    fn exceptional_configuration() {
        // q1 + q2 = 0 makes the set exceptional for η̄ but η only sees q1, q2.
        let qs = [e(0, 1.0), e(0, -1.0), e(1, 2.0)];
        assert_eq!(eta_bar(&qs, 1.0).unwrap(), 0.0);
        assert_eq!(eta(&qs).unwrap(), 0.0);
        let qs = [e(0, 1.0), e(1, 2.0), e(0, -1.0)];
        assert_eq!(eta(&qs).unwrap(), 1.0);
        assert_eq!(eta_bar(&qs, 1.0).unwrap(), 0.0);
        assert!((subset_sup(&qs).unwrap() - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn guarded_size() {
        let qs = vec![e(0, 1.0); MAX_MOMENTA + 1];
        assert!(subset_sup(&qs).is_err());
    }
}
