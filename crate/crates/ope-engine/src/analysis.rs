//! Short-distance scaling fits and associativity residuals for free coefficients.

use crate::algebra::{dim_to_f64, enumerate_basis_with, BasisOptions, CompositeOperator, Dim, OperatorBasis, Theory};
use crate::error::{OpeError, Result};
use crate::wick::free_ope_coefficient;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Values below this magnitude are treated as underflowed.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;
pub const MIN_FIT_POINTS: usize = 6;
pub const DEFAULT_GRID_POINTS: usize = 12;
pub const DEFAULT_FIT_POINTS: usize = 8;
const RESIDUAL_FLOOR: f64 = 1e-30;

/// Log-log fit of `|f(τx⃗)|` against `τ`.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingFit {
    pub tau_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    /// 95% confidence interval for the slope.
    pub ci95: (f64, f64),
    pub points_used: usize,
    /// Some value on the fit window was below [`UNDERFLOW_FLOOR`] and was dropped.
    pub underflow: bool,
}

impl ScalingFit {
    /// `slope ≥ expected − margin`.
    pub fn satisfies(&self, expected: f64, margin: f64) -> bool {
        self.slope >= expected - margin
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("tau,value\n");
        for (t, v) in self.tau_grid.iter().zip(&self.values) {
            s.push_str(&format!("{t:e},{v:e}\n"));
        }
        s
    }
}

/// `n` points geometric from 1 down to `tau_min`.
pub fn tau_grid(n: usize, tau_min: f64) -> Vec<f64> {
    let step = tau_min.ln() / (n - 1) as f64;
    (0..n).map(|i| (step * i as f64).exp()).collect()
}

pub fn default_tau_grid() -> Vec<f64> {
    tau_grid(DEFAULT_GRID_POINTS, 1e-3)
}

/// Fits the slope of `ln|f(τx⃗)|` over the `fit_points` smallest `τ` of `grid`.
pub fn scaling_degree<F>(f: F, x: &[[f64; 4]], grid: &[f64], fit_points: usize) -> Result<ScalingFit>
where
    F: Fn(&[[f64; 4]]) -> Result<f64>,
{
    if grid.len() < MIN_FIT_POINTS || fit_points < MIN_FIT_POINTS {
        return Err(OpeError::InvalidArgument(format!("a scaling fit needs at least {MIN_FIT_POINTS} points")));
    }
    if grid.iter().any(|&t| !(t > 0.0 && t <= 1.0)) || grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(OpeError::InvalidArgument("τ grid must be strictly decreasing in (0, 1]".into()));
    }
    let values = grid
        .iter()
        .map(|&tau| {
            let pts: Vec<[f64; 4]> = x.iter().map(|p| p.map(|c| c * tau)).collect();
            f(&pts)
        })
        .collect::<Result<Vec<f64>>>()?;
    let start = grid.len().saturating_sub(fit_points);
    let mut underflow = false;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (t, v) in grid[start..].iter().zip(&values[start..]) {
        if !v.is_finite() {
            return Err(OpeError::Singular(format!("coefficient is not finite at τ = {t:e}")));
        }
        if v.abs() < UNDERFLOW_FLOOR {
            underflow = true;
            continue;
        }
        xs.push(t.ln());
        ys.push(v.abs().ln());
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(OpeError::Singular(format!("only {} representable values in the fit window", xs.len())));
    }
    let (slope, intercept, stderr) = least_squares(&xs, &ys);
    let q = StudentsT::new(0.0, 1.0, (xs.len() - 2) as f64).expect("positive degrees of freedom").inverse_cdf(0.975);
    Ok(ScalingFit {
        tau_grid: grid.to_vec(),
        values,
        slope,
        intercept,
        stderr,
        ci95: (slope - q * stderr, slope + q * stderr),
        points_used: xs.len(),
        underflow,
    })
}

/// `(slope, intercept, standard error of the slope)`.
fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let stderr = if x.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, intercept, stderr)
}

/// One nonzero two-point coefficient in a survey.
#[derive(Clone, Debug, Serialize)]
pub struct SurveyEntry {
    pub a: [String; 2],
    pub b: String,
    /// `[O_B] − [O_A₁] − [O_A₂]`.
    pub expected: f64,
    pub fit: ScalingFit,
    pub passed: bool,
}

/// Fits every nonzero `C^B_{A₁A₂}` with all three operators in `basis`.
pub fn scaling_survey(basis: &OperatorBasis, x: &[[f64; 4]; 2], grid: &[f64], fit_points: usize, margin: f64, mu: f64) -> Result<Vec<SurveyEntry>> {
    let t = &basis.theory;
    let ops = &basis.operators;
    let n = ops.len();
    let found = (0..n * n)
        .into_par_iter()
        .map(|k| -> Result<Vec<SurveyEntry>> {
            let pair = [ops[k / n].clone(), ops[k % n].clone()];
            let mut out = Vec::new();
            for b in ops {
                let c = free_ope_coefficient(t, &pair, b, mu)?;
                if c.is_zero() {
                    continue;
                }
                let compiled = c.compile();
                let fit = scaling_degree(|p| compiled.evaluate(p), x, grid, fit_points)?;
                let expected = dim_to_f64(&(b.dimension - pair[0].dimension - pair[1].dimension));
                out.push(SurveyEntry {
                    a: [pair[0].label(t), pair[1].label(t)],
                    b: b.label(t),
                    expected,
                    passed: fit.satisfies(expected, margin),
                    fit,
                });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(found.into_iter().flatten().collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct AssociativityCheck {
    #[serde(with = "crate::algebra::field::dim_serde")]
    pub d_trunc: Dim,
    /// `C^B_{A₁A₂A₃}(x₁,x₂,x₃)`.
    pub lhs: f64,
    /// `Σ_C C^C_{A₁A₂}(x₁,x₂) C^B_{CA₃}(x₂,x₃)` over `[O_C] ≤ d_trunc`.
    pub rhs: f64,
    pub residual: f64,
    /// Residual over the larger of `|lhs|`, `|rhs|`, floored at 10⁻³⁰.
    pub relative: f64,
    /// Intermediate operators with a nonzero first factor.
    pub contributing: usize,
}

fn dist(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

/// Compares the three-point coefficient with the nested expansion of `A₁A₂`
/// around `x₂`, requiring `|x₁ − x₂| < |x₃ − x₂|`.
pub fn check_associativity(
    t: &Theory,
    a: &[CompositeOperator; 3],
    b: &CompositeOperator,
    x: &[[f64; 4]; 3],
    d_trunc: Dim,
    mu: f64,
) -> Result<AssociativityCheck> {
    let (inner, outer) = (dist(&x[0], &x[1]), dist(&x[2], &x[1]));
    if !(inner < outer) {
        return Err(OpeError::Domain(format!("need |x₁−x₂| < |x₃−x₂|, got {inner:e} and {outer:e}")));
    }
    let lhs = free_ope_coefficient(t, a, b, mu)?.evaluate(x)?;
    let factors = a[0].factors.len() + a[1].factors.len();
    let basis = enumerate_basis_with(t, d_trunc, &BasisOptions { max_factors: Some(factors), ..BasisOptions::default() })?;
    let terms = basis
        .operators
        .par_iter()
        .map(|c| -> Result<Option<f64>> {
            let first = free_ope_coefficient(t, &a[..2], c, mu)?;
            if first.is_zero() {
                return Ok(None);
            }
            let second = free_ope_coefficient(t, &[c.clone(), a[2].clone()], b, mu)?;
            Ok(Some(first.evaluate(&x[..2])? * second.evaluate(&x[1..])?))
        })
        .collect::<Result<Vec<_>>>()?;
    let contributing = terms.iter().flatten().count();
    let rhs: f64 = terms.iter().flatten().sum();
    let residual = (lhs - rhs).abs();
    let relative = residual / lhs.abs().max(rhs.abs()).max(RESIDUAL_FLOOR);
    Ok(AssociativityCheck { d_trunc, lhs, rhs, residual, relative, contributing })
}

/// Runs [`check_associativity`] at each truncation.
pub fn associativity_sweep(
    t: &Theory,
    a: &[CompositeOperator; 3],
    b: &CompositeOperator,
    x: &[[f64; 4]; 3],
    truncations: &[Dim],
    mu: f64,
) -> Result<Vec<AssociativityCheck>> {
    truncations.iter().map(|&d| check_associativity(t, a, b, x, d, mu)).collect()
}

/// Residuals never increase along the sweep.
pub fn is_monotone(sweep: &[AssociativityCheck]) -> bool {
    sweep.windows(2).all(|w| w[1].residual <= w[0].residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::parse_operator;
    use crate::covariance::eval_covariance;

    fn op(t: &Theory, s: &str) -> CompositeOperator {
        parse_operator(t, s).unwrap()
    }

    const X: [[f64; 4]; 2] = [[0.31, -0.12, 0.27, 0.05], [0.0; 4]];

    #[test]
    fn grid_shape() {
        let g = default_tau_grid();
        assert_eq!(g.len(), 12);
        assert_eq!(g[0], 1.0);
        assert!((g[11] - 1e-3).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn covariance_slope() {
        let f = scaling_degree(|p| eval_covariance(&[p[0][0] - p[1][0], p[0][1] - p[1][1], p[0][2] - p[1][2], p[0][3] - p[1][3]], 1.0), &X, &default_tau_grid(), 8).unwrap();
        assert!((f.slope + 2.0).abs() < 0.02, "{}", f.slope);
        assert!(f.ci95.0 <= f.slope && f.slope <= f.ci95.1);
        assert!(!f.underflow);
    }

    #[test]
    fn constant_slope() {
        let f = scaling_degree(|_| Ok(3.5), &X, &default_tau_grid(), 8).unwrap();
        assert!(f.slope.abs() < 1e-12);
        assert!(f.satisfies(0.0, 0.05));
    }

    #[test]
    fn quadratic_fluctuation_slope() {
        let t = Theory::scalar();
        let c = free_ope_coefficient(&t, &[op(&t, "phi^2"), op(&t, "phi^2")], &op(&t, "phi^2"), 1.0).unwrap();
        let f = scaling_degree(|p| c.evaluate(p), &X, &default_tau_grid(), 8).unwrap();
        assert!((f.slope + 2.0).abs() < 0.05, "{}", f.slope);
    }

    #[test]
    fn underflow_is_flagged() {
        let grid = default_tau_grid();
        let f = scaling_degree(|p| Ok(if p[0][0].abs() < 1e-2 { 0.0 } else { p[0][0] }), &X, &grid, 12).unwrap();
        assert!(f.underflow);
        assert!(scaling_degree(|_| Ok(0.0), &X, &grid, 8).is_err());
    }

    #[test]
    fn bad_grids_rejected() {
        assert!(scaling_degree(|_| Ok(1.0), &X, &[1.0, 0.5, 0.6, 0.1, 0.05, 0.01], 6).is_err());
        assert!(scaling_degree(|_| Ok(1.0), &X, &[1.0, 0.5, 0.1], 3).is_err());
    }

    fn assoc_points() -> [[f64; 4]; 3] {
        [[0.06, 0.08, 0.0, 0.0], [0.0; 4], [0.0, 0.0, 6.0, 8.0]]
    }

    #[test]
    fn unit_operators_are_exact() {
        let t = Theory::scalar();
        let one = CompositeOperator::unit();
        let r = check_associativity(&t, &[one.clone(), one.clone(), one.clone()], &one, &assoc_points(), Dim::from_integer(2), 1.0).unwrap();
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.lhs, 1.0);
    }

    #[test]
    fn scalar_three_point_converges() {
        let t = Theory::scalar();
        let a = [op(&t, "phi"), op(&t, "phi"), op(&t, "phi^2")];
        let dims: Vec<Dim> = [2, 4, 6].iter().map(|&d| Dim::from_integer(d)).collect();
        let sweep = associativity_sweep(&t, &a, &CompositeOperator::unit(), &assoc_points(), &dims, 1.0).unwrap();
        assert!(is_monotone(&sweep), "{sweep:?}");
        assert!(sweep[2].relative < 1e-4, "{sweep:?}");
    }

    #[test]
    fn domain_violation() {
        let t = Theory::scalar();
        let a = [op(&t, "phi"), op(&t, "phi"), op(&t, "phi^2")];
        let x = [[5.0, 0.0, 0.0, 0.0], [0.0; 4], [1.0, 0.0, 0.0, 0.0]];
        let e = check_associativity(&t, &a, &CompositeOperator::unit(), &x, Dim::from_integer(4), 1.0).unwrap_err();
        assert_eq!(e.code(), "DOMAIN_VIOLATION");
    }
}
