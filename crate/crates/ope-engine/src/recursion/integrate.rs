//! First-order OPE coefficients by multicentre quadrature of the subtracted
//! integrand, plus the local and asymptotic diagnostics used to certify it.

use super::integrand::{BoundIntegrand, SubtractedIntegrand};
use super::interaction::InteractionOperator;
use crate::algebra::{CompositeOperator, Theory};
use crate::error::{OpeError, Result};
use crate::quadrature::{integrate_exterior, integrate_multicenter, regions_containing, uv_radius, IntegrationReport, QuadratureOptions, Region};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct FirstOrderResult {
    pub value: f64,
    pub quad_error: f64,
    pub converged: bool,
    /// The sums over intermediate operators run over the complete set that
    /// can contribute, so nothing is truncated.
    pub truncation_estimate: f64,
    pub report: IntegrationReport,
}

/// Shifts so the expansion point is the origin.
pub fn centred(x: &[[f64; 4]]) -> Vec<[f64; 4]> {
    let o = *x.last().expect("at least one point");
    x.iter().map(|p| [p[0] - o[0], p[1] - o[1], p[2] - o[2], p[3] - o[3]]).collect()
}

fn check_points(x: &[[f64; 4]]) -> Result<()> {
    for p in 0..x.len() {
        if x[p].iter().any(|v| !v.is_finite()) {
            return Err(OpeError::InvalidArgument("non-finite point".into()));
        }
        for q in p + 1..x.len() {
            if x[p] == x[q] {
                return Err(OpeError::CoincidentPoints(p, q));
            }
        }
    }
    Ok(())
}

/// Integrates a prepared integrand over `y ∈ ℝ⁴` at points `x⃗`.
pub fn integrate_bound(f: &SubtractedIntegrand, x: &[[f64; 4]], tol: f64) -> Result<FirstOrderResult> {
    if !(tol > 0.0) {
        return Err(OpeError::InvalidArgument("tolerance must be positive".into()));
    }
    check_points(x)?;
    let xs = centred(x);
    if f.is_zero() {
        return Ok(zero_result());
    }
    if !f.is_ir_safe() {
        return Err(OpeError::NotIrSafe("a term of the integrand has no covariance attached to the insertion point".into()));
    }
    let bound = f.bind(&xs)?;
    let opts = QuadratureOptions { rel_tol: tol, ..Default::default() };
    let report = integrate_multicenter(&|y: &[f64; 4]| bound.eval_or_zero(y), &xs, 1.0 / f.mu, &opts);
    Ok(FirstOrderResult {
        value: report.value,
        quad_error: report.error,
        converged: report.converged,
        truncation_estimate: 0.0,
        report,
    })
}

fn zero_result() -> FirstOrderResult {
    FirstOrderResult {
        value: 0.0,
        quad_error: 0.0,
        converged: true,
        truncation_estimate: 0.0,
        report: IntegrationReport {
            value: 0.0,
            error: 0.0,
            converged: true,
            levels: vec![],
            cells: vec![],
            cell_changes: vec![],
            worst_cell: 0,
            evaluations: 0,
        },
    }
}

/// `∂_g C^B_{A⃗}(x⃗)` at `g = 0`, using the leading layer of `I`.
pub fn integrate_first_order(
    t: &Theory,
    a: &[CompositeOperator],
    b: &CompositeOperator,
    i: &InteractionOperator,
    x: &[[f64; 4]],
    mu: f64,
    tol: f64,
) -> Result<FirstOrderResult> {
    if x.len() != a.len() {
        return Err(OpeError::InvalidArgument(format!("{} operators but {} points", a.len(), x.len())));
    }
    check_points(x)?;
    let f = SubtractedIntegrand::build(t, a, b, &i.leading(), mu)?;
    integrate_bound(&f, x, tol)
}

/// Log-log slope of `max_dir |f(x_k + r·n)|` over `r` geometric in
/// `[r_min, r_max]`, by least squares. `None` if every sample vanishes.
pub fn radial_slope(f: &BoundIntegrand, centre: &[f64; 4], r_min: f64, r_max: f64, samples: usize) -> Option<f64> {
    let dirs: [[f64; 4]; 6] = [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.5, 0.5, 0.5, 0.5],
        [0.5, -0.5, 0.5, -0.5],
        [0.6, 0.0, -0.8, 0.0],
        [0.0, 0.28, 0.0, -0.96],
    ];
    let mut pts = Vec::new();
    for j in 0..samples {
        let r = r_min * (r_max / r_min).powf(j as f64 / (samples - 1) as f64);
        let m = dirs
            .iter()
            .map(|d| {
                let y = [centre[0] + r * d[0], centre[1] + r * d[1], centre[2] + r * d[2], centre[3] + r * d[3]];
                f.eval_or_zero(&y).abs()
            })
            .fold(0.0, f64::max);
        if m > 0.0 {
            pts.push((r.ln(), m.ln()));
        }
    }
    if pts.len() < 2 {
        return None;
    }
    Some(least_squares_slope(&pts))
}

pub fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Local singularity check at every `x_k`.
#[derive(Clone, Debug, Serialize)]
pub struct SlopeReport {
    /// Fitted slope per point; `None` when the integrand vanishes nearby.
    pub slopes: Vec<Option<f64>>,
    pub integrable: bool,
}

/// Fits the radial slope over `r ∈ [10⁻⁴, 10⁻²]·d_min` at each point and
/// requires it to exceed `−4`.
pub fn local_slopes(f: &SubtractedIntegrand, x: &[[f64; 4]]) -> Result<SlopeReport> {
    let xs = centred(x);
    let bound = f.bind(&xs)?;
    let d = uv_radius(&xs) * 2.0;
    let slopes: Vec<Option<f64>> = xs.iter().map(|c| radial_slope(&bound, c, 1e-4 * d, 1e-2 * d, 9)).collect();
    let integrable = slopes.iter().all(|s| s.map_or(true, |v| v > -4.0));
    Ok(SlopeReport { slopes, integrable })
}

/// Exterior contributions `∫_{|y|>R}` for each `R`.
#[derive(Clone, Debug, Serialize)]
pub struct TailReport {
    pub radii: Vec<f64>,
    pub tails: Vec<f64>,
    /// Log-log slopes between consecutive radii (`-inf` once a tail vanishes).
    pub slopes: Vec<f64>,
    /// Slopes steepen and are already below `−4` at the first step.
    pub super_polynomial: bool,
}

pub fn ir_tail(f: &SubtractedIntegrand, x: &[[f64; 4]], radii_over_mu: &[f64]) -> Result<TailReport> {
    let xs = centred(x);
    let bound = f.bind(&xs)?;
    let length = 1.0 / f.mu;
    let radii: Vec<f64> = radii_over_mu.iter().map(|r| r * length).collect();
    let tails: Vec<f64> = radii
        .iter()
        .map(|&r| integrate_exterior(&|y: &[f64; 4]| bound.eval_or_zero(y), &[0.0; 4], r, length, 16, 12).abs())
        .collect();
    let slopes: Vec<f64> = radii
        .windows(2)
        .zip(tails.windows(2))
        .map(|(r, v)| {
            if v[1] == 0.0 {
                f64::NEG_INFINITY
            } else {
                (v[1] / v[0]).ln() / (r[1] / r[0]).ln()
            }
        })
        .collect();
    let steepening = slopes.windows(2).all(|s| s[1] <= s[0]);
    let super_polynomial = !slopes.is_empty() && slopes[0] < -4.0 && steepening;
    Ok(TailReport { radii, tails, slopes, super_polynomial })
}

/// Which integration regions a point belongs to, for diagnostics.
pub fn region_of(y: &[f64; 4], x: &[[f64; 4]]) -> Vec<Region> {
    regions_containing(y, &centred(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{parse_combination, parse_operator};
    use crate::covariance::FOUR_PI_SQ;
    use crate::quadrature::gauss_kronrod;

    fn op(t: &Theory, s: &str) -> CompositeOperator {
        parse_operator(t, s).unwrap()
    }

    /// `∫ C(y−x₁)C(y−x₂) d⁴y` from the heat-kernel form of `C`:
    /// `∫₀^{2T} min(τ, 2T−τ) e^{−r²/4τ} / (16π²τ²) dτ`, `T = μ⁻²`.
    fn convolution_oracle(r: f64, mu: f64) -> f64 {
        let tt = 1.0 / (mu * mu);
        let f = |tau: f64| {
            if tau <= 0.0 {
                0.0
            } else {
                tau.min(2.0 * tt - tau) * (-(r * r) / (4.0 * tau)).exp() / (4.0 * FOUR_PI_SQ * tau * tau)
            }
        };
        gauss_kronrod(&f, 0.0, tt, 1e-16, 1e-13, 2000).value + gauss_kronrod(&f, tt, 2.0 * tt, 1e-16, 1e-13, 2000).value
    }

    #[test]
    fn zero_interaction() {
        let t = Theory::scalar();
        let r = integrate_first_order(
            &t,
            &[op(&t, "phi"), op(&t, "phi")],
            &op(&t, "phi^2"),
            &InteractionOperator::zero(),
            &[[1.0, 0.0, 0.0, 0.0], [0.0; 4]],
            1.0,
            1e-6,
        )
        .unwrap();
        assert_eq!((r.value, r.quad_error), (0.0, 0.0));
    }

    #[test]
    fn phi4_phi_phi_matches_heat_kernel_convolution() {
        let t = Theory::scalar();
        let i = InteractionOperator::from_combination(parse_combination(&t, "1/24*phi^4").unwrap());
        let x1 = [0.6, 0.2, -0.3, 0.4];
        let r = integrate_first_order(&t, &[op(&t, "phi"), op(&t, "phi")], &op(&t, "phi^2"), &i, &[x1, [0.0; 4]], 1.0, 1e-7).unwrap();
        let d = x1.iter().map(|v| v * v).sum::<f64>().sqrt();
        let expect = -0.5 * convolution_oracle(d, 1.0);
        assert!(r.converged);
        assert!((r.value - expect).abs() < 1e-6 * expect.abs(), "{} vs {expect}", r.value);
    }

    #[test]
    fn translation_invariance() {
        let t = Theory::scalar();
        let i = InteractionOperator::from_combination(parse_combination(&t, "1/24*phi^4").unwrap());
        let a = [op(&t, "phi"), op(&t, "phi")];
        let b = op(&t, "phi^2");
        let r1 = integrate_first_order(&t, &a, &b, &i, &[[0.5, 0.0, 0.0, 0.0], [0.0; 4]], 1.0, 1e-7).unwrap();
        let r2 = integrate_first_order(&t, &a, &b, &i, &[[1.5, 1.0, 1.0, 1.0], [1.0; 4]], 1.0, 1e-7).unwrap();
        assert!((r1.value - r2.value).abs() < 1e-12 * r1.value.abs());
    }

    #[test]
    fn slopes_and_tail() {
        let t = Theory::scalar();
        let i = parse_combination(&t, "1/24*phi^4").unwrap();
        let f = SubtractedIntegrand::build(&t, &[op(&t, "phi"), op(&t, "phi")], &op(&t, "phi^2"), &i, 1.0).unwrap();
        let x = [[0.6, 0.2, -0.3, 0.4], [0.0; 4]];
        let s = local_slopes(&f, &x).unwrap();
        for v in s.slopes.iter().flatten() {
            assert!((v + 2.0).abs() < 0.05, "slope {v}");
        }
        let tail = ir_tail(&f, &x, &[10.0, 20.0, 40.0]).unwrap();
        assert!(tail.super_polynomial, "{tail:?}");
    }

    #[test]
    fn coincident_points_rejected() {
        let t = Theory::scalar();
        let i = InteractionOperator::from_combination(parse_combination(&t, "1/24*phi^4").unwrap());
        let r = integrate_first_order(&t, &[op(&t, "phi"), op(&t, "phi")], &op(&t, "phi^2"), &i, &[[0.0; 4], [0.0; 4]], 1.0, 1e-6);
        assert!(matches!(r, Err(OpeError::CoincidentPoints(0, 1))));
    }
}
