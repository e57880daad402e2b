//! Position-space factors `Ξ` and `ϗΞ` controlling the short-distance behaviour
//! of bounds with several insertions.

use crate::error::{OpeError, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiVariant {
    /// Piecewise `Ξ^{Λ,Λ₁}_{p,p′}`.
    Xi,
    Xi1,
    Xi2,
    /// Piecewise `ϗΞ^{Λ,Λ₁}_{s′,p}`.
    VarXi,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct XiParams {
    pub p: f64,
    /// `p′` for `Ξ`; ignored by `ϗΞ`.
    #[serde(default)]
    pub p_prime: f64,
    /// Split point `s′` for `ϗΞ` (points `1..=s′` versus the rest).
    #[serde(default)]
    pub s_prime: usize,
    #[serde(default)]
    pub rho: f64,
    pub lambda: f64,
    pub lambda1: f64,
    pub mu: f64,
}

fn dist(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check(x: &[[f64; 4]], params: &XiParams) -> Result<()> {
    if x.len() < 2 {
        return Err(OpeError::InvalidArgument("Ξ needs at least two points".into()));
    }
    if x.last().is_some_and(|p| p.iter().any(|v| *v != 0.0)) {
        return Err(OpeError::InvalidArgument("the last point must be the origin".into()));
    }
    if !(params.lambda1 > 0.0 && params.lambda1 <= params.mu) {
        return Err(OpeError::InvalidArgument("need 0 < Λ₁ ≤ μ".into()));
    }
    if params.rho < 0.0 || params.lambda < 0.0 {
        return Err(OpeError::InvalidArgument("need ρ ≥ 0 and Λ ≥ 0".into()));
    }
    Ok(())
}

/// `(sup_i |x_i − x_s|, inf_{k<k′} |x_k − x_k′|)`.
fn spread(x: &[[f64; 4]]) -> Result<(f64, f64)> {
    let s = x.len() - 1;
    let outer = x.iter().map(|p| dist(p, &x[s])).fold(0.0, f64::max);
    let mut inner = f64::INFINITY;
    for k in 0..x.len() {
        for kp in k + 1..x.len() {
            let d = dist(&x[k], &x[kp]);
            if d == 0.0 {
                return Err(OpeError::CoincidentPoints(k, kp));
            }
            inner = inner.min(d);
        }
    }
    Ok((outer, inner))
}

pub fn xi1(params: &XiParams, x: &[[f64; 4]]) -> Result<f64> {
    check(x, params)?;
    let (outer, inner) = spread(x)?;
    let e = params.p_prime + params.rho;
    Ok((outer / inner).powf(params.p) * (params.mu * inner).powf(-e) * (params.mu / params.lambda1).powf(e))
}

pub fn xi2(params: &XiParams, x: &[[f64; 4]]) -> Result<f64> {
    check(x, params)?;
    let (outer, _) = spread(x)?;
    Ok((params.mu * outer).max(1.0).powf(params.p))
}

pub fn xi(params: &XiParams, x: &[[f64; 4]]) -> Result<f64> {
    let a = xi1(params, x)?;
    if params.lambda >= params.lambda1 {
        Ok(a)
    } else {
        Ok(a.max(xi2(params, x)?))
    }
}

/// `(μ/Λ₁)^{p+ρ} sup_{k ≤ s′ < k′} (μ|x_k − x_k′|)^{−p−ρ}`.
pub fn varxi1(params: &XiParams, x: &[[f64; 4]]) -> Result<f64> {
    check(x, params)?;
    let sp = params.s_prime;
    if sp == 0 || sp >= x.len() {
        return Err(OpeError::InvalidArgument(format!("split s′ = {sp} must lie in 1..{}", x.len())));
    }
    let e = params.p + params.rho;
    let mut best = f64::NEG_INFINITY;
    for k in 0..sp {
        for kp in sp..x.len() {
            let d = dist(&x[k], &x[kp]);
            if d == 0.0 {
                return Err(OpeError::CoincidentPoints(k, kp));
            }
            best = best.max((params.mu * d).powf(-e));
        }
    }
    Ok((params.mu / params.lambda1).powf(e) * best)
}

pub fn varxi(params: &XiParams, x: &[[f64; 4]]) -> Result<f64> {
    let a = varxi1(params, x)?;
    Ok(if params.lambda >= params.lambda1 { a } else { a.max(1.0) })
}

pub fn evaluate(variant: XiVariant, params: &XiParams, x: &[[f64; 4]]) -> Result<f64> {
    match variant {
        XiVariant::Xi => xi(params, x),
        XiVariant::Xi1 => xi1(params, x),
        XiVariant::Xi2 => xi2(params, x),
        XiVariant::VarXi => varxi(params, x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(p: f64, pp: f64, lambda: f64) -> XiParams {
        XiParams { p, p_prime: pp, s_prime: 1, rho: 0.0, lambda, lambda1: 0.5, mu: 1.0 }
    }

    #[test]
    fn trivial_exponents_give_one() {
        let x = [[1.0, 2.0, 0.0, 0.0], [0.0, 0.3, 0.0, 0.0], [0.0; 4]];
        assert!((xi1(&params(0.0, 0.0, 1.0), &x).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn branch_above_lambda1_ignores_xi2() {
        let x = [[30.0, 0.0, 0.0, 0.0], [0.0; 4]];
        let hi = params(2.0, 0.0, 0.6);
        let lo = params(2.0, 0.0, 0.1);
        assert_eq!(xi(&hi, &x).unwrap(), xi1(&hi, &x).unwrap());
        assert_eq!(xi(&lo, &x).unwrap(), 900.0);
    }

    #[test]
    fn scaling_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let s = rng.gen_range(2..5);
            let mut x: Vec<[f64; 4]> = (0..s - 1).map(|_| std::array::from_fn(|_| rng.gen_range(-3.0..3.0))).collect();
            x.push([0.0; 4]);
            let p = params(rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0), rng.gen_range(0.0..1.0));
            let tau: f64 = rng.gen_range(0.01..1.0);
            let xt: Vec<[f64; 4]> = x.iter().map(|v| v.map(|c| c * tau)).collect();
            let lhs = xi(&p, &xt).unwrap();
            let rhs = tau.powf(-p.p_prime) * xi(&p, &x).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-12), "{lhs} > {rhs}");
        }
    }

    #[test]
    fn degenerate_points_rejected() {
        let x = [[1.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [0.0; 4]];
        assert!(matches!(xi1(&params(1.0, 1.0, 1.0), &x), Err(OpeError::CoincidentPoints(0, 1))));
    }

    #[test]
    fn varxi_branches() {
        let x = [[3.0, 0.0, 0.0, 0.0], [0.0; 4]];
        let mut p = params(1.0, 0.0, 1.0);
        let v = varxi(&p, &x).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
        p.lambda = 0.1;
        assert_eq!(varxi(&p, &x).unwrap(), 1.0);
    }
}
