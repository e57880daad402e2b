//! IR-regulated massless covariance `C(x) = e^{−μ²x²/4}/(4π²x²)`, its exact
//! derivatives, the exponential regulator and the momentum-space covariance
//! matrix of the Maxwell-ghost sector.
//!
//! Derivatives use `C = F(x²)/(4π²)` with `F(s) = e^{−as}/s`, `a = μ²/4`:
//! `∂^u F(|x|²) = Σ_{2j≤u} ∏_i u_i!/(j_i!(u_i−2j_i)!) (2x_i)^{u_i−2j_i} F^{(|u|−|j|)}(s)`
//! and `F^{(k)}(s) = e^{−as} Σ_j C(k,j) (−a)^{k−j} (−1)^j j! s^{−j−1}`.

use crate::algebra::MultiIndex;
use crate::error::{OpeError, Result};
use crate::quadrature::gauss_kronrod;
use std::f64::consts::PI;

pub const FOUR_PI_SQ: f64 = 4.0 * PI * PI;

/// Highest derivative order supported by default.
pub const DEFAULT_MAX_ORDER: u32 = 8;

/// `R^Λ(p) = exp(−p²/Λ²)` with the limits `R⁰ = 0` and `R^∞ = 1`.
pub fn regulator(p2: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        0.0
    } else if lambda.is_infinite() {
        1.0
    } else {
        (-p2 / (lambda * lambda)).exp()
    }
}

/// `∂_Λ R^Λ(p) = 2p²Λ⁻³ exp(−p²/Λ²)`.
pub fn regulator_lambda_derivative(p2: f64, lambda: f64) -> f64 {
    if lambda == 0.0 || lambda.is_infinite() {
        return 0.0;
    }
    2.0 * p2 / lambda.powi(3) * (-p2 / (lambda * lambda)).exp()
}

fn norm2(x: &[f64; 4]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn eval_covariance(x: &[f64; 4], mu: f64) -> Result<f64> {
    let s = norm2(x);
    if s == 0.0 {
        return Err(OpeError::Singular("covariance at x = 0".into()));
    }
    Ok((-0.25 * mu * mu * s).exp() / (FOUR_PI_SQ * s))
}

/// Radial derivatives `F^{(k)}(s)/(4π²)` for `k ≤ max_order`.
fn radial_derivatives(s: f64, mu: f64, max_order: u32, out: &mut Vec<f64>) {
    let a = 0.25 * mu * mu;
    let e = (-a * s).exp() / FOUR_PI_SQ;
    out.clear();
    let inv = 1.0 / s;
    for k in 0..=max_order {
        // Σ_j C(k,j) (−a)^{k−j} (−1)^j j! s^{−j−1}
        let mut sum = 0.0;
        let mut binom = 1.0;
        let mut fact = 1.0;
        let mut spow = inv;
        for j in 0..=k {
            if j > 0 {
                binom *= (k - j + 1) as f64 / j as f64;
                fact *= j as f64;
                spow *= inv;
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sum += binom * (-a).powi((k - j) as i32) * sign * fact * spow;
        }
        out.push(e * sum);
    }
}

/// Cached derivative evaluator at a fixed separation; all `∂^u C(x)` with
/// `|u| ≤ max_order` share one set of radial derivatives.
#[derive(Clone, Debug)]
pub struct CovarianceJet {
    radial: Vec<f64>,
    /// `(2x_i)^n` for `n ≤ max_order`.
    pow2x: [Vec<f64>; 4],
    max_order: u32,
}

impl CovarianceJet {
    pub fn new(x: &[f64; 4], mu: f64, max_order: u32) -> Result<Self> {
        let s = norm2(x);
        if s == 0.0 {
            return Err(OpeError::Singular("covariance derivative at x = 0".into()));
        }
        let mut radial = Vec::with_capacity(max_order as usize + 1);
        radial_derivatives(s, mu, max_order, &mut radial);
        let pow2x = std::array::from_fn(|i| {
            let mut v = Vec::with_capacity(max_order as usize + 1);
            let mut p = 1.0;
            for _ in 0..=max_order {
                v.push(p);
                p *= 2.0 * x[i];
            }
            v
        });
        Ok(CovarianceJet { radial, pow2x, max_order })
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    /// `∂^u C(x)`; panics if `|u|` exceeds the order the jet was built for.
    pub fn deriv(&self, u: &MultiIndex) -> f64 {
        assert!(u.order() <= self.max_order, "derivative order above jet order");
        let uo = u.order();
        let u = u.0;
        let mut total = 0.0;
        for j0 in 0..=u[0] / 2 {
            let c0 = hermite_coeff(u[0], j0) * self.pow2x[0][(u[0] - 2 * j0) as usize];
            for j1 in 0..=u[1] / 2 {
                let c1 = c0 * hermite_coeff(u[1], j1) * self.pow2x[1][(u[1] - 2 * j1) as usize];
                for j2 in 0..=u[2] / 2 {
                    let c2 = c1 * hermite_coeff(u[2], j2) * self.pow2x[2][(u[2] - 2 * j2) as usize];
                    for j3 in 0..=u[3] / 2 {
                        let c3 = c2 * hermite_coeff(u[3], j3) * self.pow2x[3][(u[3] - 2 * j3) as usize];
                        let jj = (j0 + j1 + j2 + j3) as u32;
                        total += c3 * self.radial[(uo - jj) as usize];
                    }
                }
            }
        }
        total
    }
}

/// `n!/(j!(n−2j)!)`.
fn hermite_coeff(n: u8, j: u8) -> f64 {
    const F: [f64; 17] = [
        1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0, 5040.0, 40320.0, 362880.0, 3628800.0, 39916800.0, 479001600.0,
        6227020800.0, 87178291200.0, 1307674368000.0, 20922789888000.0,
    ];
    F[n as usize] / (F[j as usize] * F[(n - 2 * j) as usize])
}

pub fn eval_covariance_deriv(u: &MultiIndex, x: &[f64; 4], mu: f64) -> Result<f64> {
    if u.order() > 16 {
        return Err(OpeError::InvalidArgument("derivative order above 16".into()));
    }
    Ok(CovarianceJet::new(x, mu, u.order())?.deriv(u))
}

/// `(4/x²)^{(|u|+δ)/2+1} Γ(|u|+δ+1)/(4π²μ^δ)`.
pub fn covariance_deriv_bound(order: u32, x2: f64, mu: f64, delta: f64) -> f64 {
    let n = order as f64;
    (4.0 / x2).powf((n + delta) / 2.0 + 1.0) * statrs::function::gamma::gamma(n + delta + 1.0)
        / (FOUR_PI_SQ * mu.powf(delta))
}

/// Heat-kernel form `∫₀^{μ⁻²} t⁻² e^{−x²/4t} dt / (16π²)` by adaptive
/// Gauss–Kronrod quadrature, split at the peak `t = x²/8`.
pub fn heat_kernel_covariance(x: &[f64; 4], mu: f64) -> Result<f64> {
    let s = norm2(x);
    if s == 0.0 {
        return Err(OpeError::Singular("heat kernel at x = 0".into()));
    }
    let tmax = 1.0 / (mu * mu);
    let f = |t: f64| if t <= 0.0 { 0.0 } else { (-(s / (4.0 * t))).exp() / (t * t) };
    let peak = (s / 8.0).min(tmax);
    let mut total = 0.0;
    let mut lo = 0.0;
    for hi in [peak * 0.25, peak, (peak * 4.0).min(tmax), tmax] {
        if hi > lo {
            total += gauss_kronrod(&f, lo, hi, 1e-15, 1e-13, 4000).value;
            lo = hi;
        }
    }
    Ok(total / (16.0 * PI * PI))
}

/// Field ordering of the momentum-space matrix.
pub const MOMENTUM_COMPONENTS: [&str; 7] = ["A1", "A2", "A3", "A4", "B", "cbar", "c"];

/// Engineering dimensions in the order of [`MOMENTUM_COMPONENTS`].
pub const MOMENTUM_DIMS: [f64; 7] = [1.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0];

/// Regularised Maxwell-ghost covariance matrix in momentum space, components
/// ordered as [`MOMENTUM_COMPONENTS`].
pub fn covariance_matrix_momentum(p: &[f64; 4], xi: f64, lambda: f64, lambda0: f64, allow_zero: bool) -> Result<[[f64; 7]; 7]> {
    let p2 = norm2(p);
    if !(xi > 0.0) {
        return Err(OpeError::InvalidArgument("gauge parameter must be positive".into()));
    }
    if lambda < 0.0 || lambda > lambda0 {
        return Err(OpeError::InvalidArgument("cutoffs must satisfy 0 ≤ Λ ≤ Λ₀".into()));
    }
    if p2 == 0.0 && lambda == 0.0 {
        return Err(OpeError::Singular("p = 0 with Λ = 0".into()));
    }
    if lambda == lambda0 && !allow_zero {
        return Err(OpeError::Singular("degenerate cutoff Λ = Λ₀".into()));
    }
    let x = if p2 == 0.0 {
        // (R^{Λ₀} − R^Λ)/p² → Λ⁻² − Λ₀⁻² as p → 0.
        let inv = |l: f64| if l.is_infinite() { 0.0 } else { 1.0 / (l * l) };
        inv(lambda) - inv(lambda0)
    } else {
        (regulator(p2, lambda0) - regulator(p2, lambda)) / p2
    };
    Ok(structure_matrix(p, xi, x, p2))
}

fn structure_matrix(p: &[f64; 4], xi: f64, x: f64, p2: f64) -> [[f64; 7]; 7] {
    let mut m = [[0.0; 7]; 7];
    for mu in 0..4 {
        for nu in 0..4 {
            let delta = if mu == nu { 1.0 } else { 0.0 };
            let long = if p2 > 0.0 { (1.0 / xi - 1.0) * p[mu] * p[nu] / p2 } else { 0.0 };
            m[mu][nu] = (delta + long) * x;
        }
    }
    m[4][4] = p2 * x;
    m[5][6] = -x;
    m[6][5] = x;
    m
}

/// `∂_Λ` of the regularised matrix: `−2Λ⁻³ e^{−p²/Λ²}` times the structure matrix.
pub fn covariance_matrix_lambda_derivative(p: &[f64; 4], xi: f64, lambda: f64) -> [[f64; 7]; 7] {
    let p2 = norm2(p);
    let x = -2.0 / lambda.powi(3) * (-p2 / (lambda * lambda)).exp();
    structure_matrix(p, xi, x, p2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_value() {
        let x = [2.0, 0.0, 0.0, 0.0];
        let v = eval_covariance(&x, 1.0).unwrap();
        let expect = (-1.0f64).exp() / (16.0 * PI * PI);
        assert!((v - expect).abs() < 1e-15);
        assert!((expect - 2.329624e-3).abs() < 1e-9);
        assert!(eval_covariance(&[0.0; 4], 1.0).is_err());
    }

    #[test]
    fn small_mu_limit() {
        let v = eval_covariance(&[0.0, 1.0, 0.0, 0.0], 1e-9).unwrap();
        assert!((v - 1.0 / FOUR_PI_SQ).abs() < 1e-15);
    }

    #[test]
    fn first_derivative_matches_hand_formula() {
        // ∂₁C = 2x₁ F'(s)/(4π²), F'(s) = −e^{−as}(a/s + 1/s²)
        let x = [0.3, -0.7, 0.2, 1.1];
        let mu = 1.3;
        let s: f64 = x.iter().map(|v| v * v).sum();
        let a = mu * mu / 4.0;
        let expect = 2.0 * x[0] * (-(-a * s).exp() * (a / s + 1.0 / (s * s))) / FOUR_PI_SQ;
        let got = eval_covariance_deriv(&MultiIndex::unit(0), &x, mu).unwrap();
        assert!((got - expect).abs() < 1e-14 * expect.abs());
    }

    #[test]
    fn odd_derivative_along_untouched_axis_vanishes() {
        let x = [0.0, 0.0, 1.5, 0.0];
        for u in [MultiIndex([1, 0, 0, 0]), MultiIndex([0, 3, 0, 0]), MultiIndex([1, 2, 1, 0])] {
            assert_eq!(eval_covariance_deriv(&u, &x, 1.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn heat_kernel_agrees() {
        for x in [[2.0, 0.0, 0.0, 0.0], [0.1, 0.2, 0.0, 0.05], [3.0, 1.0, -2.0, 0.5]] {
            let a = eval_covariance(&x, 1.0).unwrap();
            let b = heat_kernel_covariance(&x, 1.0).unwrap();
            assert!(((a - b) / a).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn momentum_matrix_examples() {
        let p = [0.3, 0.4, 1.0, -0.2];
        let z = covariance_matrix_momentum(&p, 1.0, 2.0, 2.0, true).unwrap();
        assert!(z.iter().flatten().all(|v| *v == 0.0));
        assert!(covariance_matrix_momentum(&p, 1.0, 2.0, 2.0, false).is_err());
        let m = covariance_matrix_momentum(&p, 1.0, 0.5, 10.0, false).unwrap();
        let p2: f64 = p.iter().map(|v| v * v).sum();
        let x = (regulator(p2, 10.0) - regulator(p2, 0.5)) / p2;
        for mu in 0..4 {
            for nu in 0..4 {
                let e = if mu == nu { x } else { 0.0 };
                assert!((m[mu][nu] - e).abs() < 1e-15);
            }
        }
        assert_eq!(m[5][6], -x);
        assert_eq!(m[6][5], x);
    }

    #[test]
    fn regulator_limits() {
        assert_eq!(regulator(1.0, 0.0), 0.0);
        assert_eq!(regulator(1.0, f64::INFINITY), 1.0);
        assert!(regulator(1.0, 1.0) < regulator(1.0, 2.0));
    }
}
