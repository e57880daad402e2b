//! Numerical integration: Gauss–Legendre nodes, adaptive Gauss–Kronrod on an
//! interval, product rules on S³ and a multi-centre integrator over ℝ⁴.
//!
//! The ℝ⁴ integrator splits the integrand with a smooth partition of unity
//! attached to the singular points (Becke cells). Each cell is integrated in
//! 4D spherical coordinates about its centre, with Gauss–Legendre panels in
//! the radius and a mapped tail `r = R/t`. Accuracy is controlled by a ladder
//! of global refinement levels; the error estimate is the difference between
//! the last two levels.

use rayon::prelude::*;
use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [−1, 1], by Newton iteration on the
/// three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    thread_local! {
        static CACHE: RefCell<HashMap<usize, (Vec<f64>, Vec<f64>)>> = RefCell::new(HashMap::new());
    }
    CACHE.with(|c| c.borrow_mut().entry(n).or_insert_with(|| compute_gauss_legendre(n)).clone())
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

#[derive(Clone, Copy, Debug)]
pub struct GkResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Globally adaptive 7/15-point Gauss–Kronrod quadrature on `[a, b]`.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64, rel_tol: f64, max_intervals: usize) -> GkResult {
    let (v, e) = gk15(f, a, b);
    let mut parts = vec![(a, b, v, e)];
    loop {
        let value: f64 = parts.iter().map(|p| p.2).sum();
        let error: f64 = parts.iter().map(|p| p.3).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) || parts.len() >= max_intervals {
            return GkResult { value, error, intervals: parts.len() };
        }
        let (i, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = parts.swap_remove(i);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

/// `∫_a^∞ f` via `x = a + t/(1−t)`.
pub fn gauss_kronrod_semi_infinite<F: Fn(f64) -> f64>(f: &F, a: f64, abs_tol: f64, rel_tol: f64) -> GkResult {
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let u = 1.0 - t;
        f(a + t / u) / (u * u)
    };
    gauss_kronrod(&g, 0.0, 1.0, abs_tol, rel_tol, 5000)
}

/// Product rule on the unit 3-sphere with total weight `2π²`: Chebyshev of
/// the second kind in `cos χ`, Gauss–Legendre in `cos θ`, trapezoid in `φ`
/// with `2n` nodes. Exact for polynomials of degree `< 2n` in the embedding
/// coordinates and symmetric under `ω → −ω`.
pub fn sphere_rule(n: usize) -> Vec<([f64; 4], f64)> {
    let (ct, wt) = gauss_legendre(n);
    let nphi = 2 * n;
    let mut out = Vec::with_capacity(n * n * nphi);
    for i in 1..=n {
        let a = i as f64 * PI / (n as f64 + 1.0);
        let (cchi, schi) = (a.cos(), a.sin());
        let wchi = PI / (n as f64 + 1.0) * schi * schi;
        for (cth, wth) in ct.iter().zip(&wt) {
            let sth = (1.0 - cth * cth).max(0.0).sqrt();
            for k in 0..nphi {
                let ph = 2.0 * PI * (k as f64 + 0.5) / nphi as f64;
                let w = wchi * wth * 2.0 * PI / nphi as f64;
                out.push(([cchi, schi * cth, schi * sth * ph.cos(), schi * sth * ph.sin()], w));
            }
        }
    }
    out
}

fn dist(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Smooth partition of unity attached to `centers`; `out[k]` is the weight of
/// cell `k` at `y`, proportional to `∏_{j≠k} |y − x_j|^{2P}`. Near another
/// centre the weight is a polynomial of degree `2P` in `y − x_j`, which absorbs
/// integrable poles there and keeps the cell integrand smooth.
pub fn partition_weights(y: &[f64; 4], centers: &[[f64; 4]], out: &mut [f64]) {
    const P: i32 = 5;
    let n = centers.len();
    let mut r2 = [0.0f64; 16];
    for k in 0..n {
        r2[k] = centers[k].iter().zip(y).map(|(c, v)| (c - v) * (c - v)).sum();
    }
    if let Some(k) = (0..n).find(|&k| r2[k] == 0.0) {
        out[..n].fill(0.0);
        out[k] = 1.0;
        return;
    }
    for k in 0..n {
        // 1 / Σ_i (r_k / r_i)^{2P}
        let s: f64 = (0..n).map(|i| (r2[k] / r2[i]).powi(P)).sum();
        out[k] = 1.0 / s;
    }
}

/// Sharp region decomposition used in the analysis: `Ω_k` (k ≥ 1) is the open
/// ball around `x_k` of radius half the minimal pairwise distance, `Ω₀` the rest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Uv(usize),
    Ir,
}

pub fn uv_radius(centers: &[[f64; 4]]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            m = m.min(dist(&centers[i], &centers[j]));
        }
    }
    0.5 * m
}

/// Regions of `y`; more than one entry means the decomposition overlaps.
pub fn regions_containing(y: &[f64; 4], centers: &[[f64; 4]]) -> Vec<Region> {
    let r0 = uv_radius(centers);
    let uv: Vec<Region> = centers
        .iter()
        .enumerate()
        .filter(|(_, c)| dist(y, c) < r0)
        .map(|(k, _)| Region::Uv(k))
        .collect();
    if uv.is_empty() {
        vec![Region::Ir]
    } else {
        uv
    }
}

#[derive(Clone, Debug)]
pub struct QuadratureOptions {
    /// Relative tolerance on the total.
    pub rel_tol: f64,
    /// Absolute floor for the tolerance.
    pub abs_tol: f64,
    /// Refinement levels tried, in order.
    pub max_level: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { rel_tol: 1e-6, abs_tol: 1e-14, max_level: LEVELS.len() - 1 }
    }
}

/// (radial nodes per panel, angular order).
pub const LEVELS: [(usize, usize); 7] = [(6, 4), (8, 6), (12, 8), (16, 10), (20, 14), (26, 18), (32, 22)];

#[derive(Clone, Debug, serde::Serialize)]
pub struct IntegrationReport {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
    /// Total at each level computed.
    pub levels: Vec<f64>,
    /// Per-cell contributions at the final level.
    pub cells: Vec<f64>,
    /// Per-cell change between the last two levels.
    pub cell_changes: Vec<f64>,
    pub worst_cell: usize,
    pub evaluations: usize,
}

/// Radial panel breakpoints for the cell around `centers[k]`; the last
/// breakpoint starts the mapped tail.
fn breakpoints(centers: &[[f64; 4]], k: usize, length: f64) -> Vec<f64> {
    let mut dmin = f64::INFINITY;
    let mut dmax: f64 = 0.0;
    for (j, c) in centers.iter().enumerate() {
        if j != k {
            let d = dist(c, &centers[k]);
            dmin = dmin.min(d);
            dmax = dmax.max(d);
        }
    }
    if !dmin.is_finite() {
        dmin = length;
    }
    let far = dmax + 14.0 * length;
    let mut b = vec![0.0];
    for f in [0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0] {
        b.push(f * dmin);
    }
    let mut r = *b.last().unwrap();
    while r < far {
        r += (0.5 * r).min(1.5 * length);
        b.push(r);
    }
    b
}

fn integrate_cell<F>(f: &F, centers: &[[f64; 4]], k: usize, length: f64, level: (usize, usize)) -> (f64, usize)
where
    F: Fn(&[f64; 4]) -> f64 + Sync,
{
    let (nr, na) = level;
    let (gx, gw) = gauss_legendre(nr);
    let sphere = sphere_rule(na);
    let b = breakpoints(centers, k, length);
    let c = centers[k];
    // (radius, radial weight including r³)
    let mut radial: Vec<(f64, f64)> = Vec::new();
    for p in b.windows(2) {
        let (lo, hi) = (p[0], p[1]);
        let h = 0.5 * (hi - lo);
        for (x, w) in gx.iter().zip(&gw) {
            let r = lo + h * (1.0 + x);
            radial.push((r, w * h * r * r * r));
        }
    }
    let rt = *b.last().unwrap();
    for (x, w) in gx.iter().zip(&gw) {
        let t = 0.5 * (1.0 + x);
        let r = rt / t;
        radial.push((r, 0.5 * w * rt / (t * t) * r * r * r));
    }
    let n = centers.len();
    let chunks: Vec<(f64, usize)> = radial
        .par_iter()
        .map(|&(r, wr)| {
            let mut wb = vec![0.0; n];
            let mut acc = 0.0;
            let mut evals = 0;
            for (om, wa) in &sphere {
                let y = [c[0] + r * om[0], c[1] + r * om[1], c[2] + r * om[2], c[3] + r * om[3]];
                partition_weights(&y, centers, &mut wb);
                if wb[k] < 1e-300 {
                    continue;
                }
                evals += 1;
                acc += wa * wb[k] * f(&y);
            }
            (acc * wr, evals)
        })
        .collect();
    chunks.iter().fold((0.0, 0), |(a, e), (v, n)| (a + v, e + n))
}

/// Integrates `f` over ℝ⁴. `f` may be singular (but integrable) at the
/// centres; `length` is the scale beyond which `f` decays (e.g. `1/μ`).
pub fn integrate_multicenter<F>(f: &F, centers: &[[f64; 4]], length: f64, opts: &QuadratureOptions) -> IntegrationReport
where
    F: Fn(&[f64; 4]) -> f64 + Sync,
{
    let mut levels = Vec::new();
    let mut prev_cells: Option<Vec<f64>> = None;
    let mut evaluations = 0;
    let mut last = IntegrationReport {
        value: 0.0,
        error: f64::INFINITY,
        converged: false,
        levels: vec![],
        cells: vec![],
        cell_changes: vec![],
        worst_cell: 0,
        evaluations: 0,
    };
    for (li, &lev) in LEVELS.iter().enumerate().take(opts.max_level + 1) {
        let mut cells = Vec::with_capacity(centers.len());
        for k in 0..centers.len() {
            let (v, e) = integrate_cell(f, centers, k, length, lev);
            evaluations += e;
            cells.push(v);
        }
        let total: f64 = cells.iter().sum();
        levels.push(total);
        if let Some(prev) = &prev_cells {
            let changes: Vec<f64> = cells.iter().zip(prev).map(|(a, b)| (a - b).abs()).collect();
            let worst = changes
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            let error = (total - levels[li - 1]).abs().max(f64::EPSILON * total.abs());
            let converged = error <= opts.abs_tol.max(opts.rel_tol * total.abs());
            last = IntegrationReport {
                value: total,
                error,
                converged,
                levels: levels.clone(),
                cells: cells.clone(),
                cell_changes: changes,
                worst_cell: worst,
                evaluations,
            };
            if converged {
                return last;
            }
        }
        prev_cells = Some(cells);
    }
    last
}

/// `∫_{|y−origin|>R} f` by spherical product rules; panels of width ≤ `length`
/// out to `R + 14·length`, then a mapped tail.
pub fn integrate_exterior<F>(f: &F, origin: &[f64; 4], radius: f64, length: f64, nr: usize, na: usize) -> f64
where
    F: Fn(&[f64; 4]) -> f64 + Sync,
{
    let (gx, gw) = gauss_legendre(nr);
    let sphere = sphere_rule(na);
    let mut b = vec![radius];
    let far = radius + 14.0 * length;
    let mut r = radius;
    while r < far {
        r += length;
        b.push(r);
    }
    let mut radial = Vec::new();
    for p in b.windows(2) {
        let h = 0.5 * (p[1] - p[0]);
        for (x, w) in gx.iter().zip(&gw) {
            let r = p[0] + h * (1.0 + x);
            radial.push((r, w * h * r.powi(3)));
        }
    }
    for (x, w) in gx.iter().zip(&gw) {
        let t = 0.5 * (1.0 + x);
        let r = far / t;
        radial.push((r, 0.5 * w * far / (t * t) * r.powi(3)));
    }
    radial
        .par_iter()
        .map(|&(r, wr)| {
            let mut acc = 0.0;
            for (om, wa) in &sphere {
                let y = [origin[0] + r * om[0], origin[1] + r * om[1], origin[2] + r * om[2], origin[3] + r * om[3]];
                acc += wa * f(&y);
            }
            acc * wr
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((m - 2.0 / 13.0).abs() < 1e-14);
    }

    #[test]
    fn kronrod_on_smooth_and_peaked() {
        let r = gauss_kronrod(&|x: f64| x.exp(), 0.0, 1.0, 1e-14, 1e-14, 100);
        assert!((r.value - (1f64.exp() - 1.0)).abs() < 1e-13);
        let r = gauss_kronrod_semi_infinite(&|x: f64| (-x).exp(), 0.0, 1e-13, 1e-12);
        assert!((r.value - 1.0).abs() < 1e-11);
    }

    #[test]
    fn sphere_rule_moments() {
        let rule = sphere_rule(6);
        let area: f64 = rule.iter().map(|p| p.1).sum();
        assert!((area - 2.0 * PI * PI).abs() < 1e-12);
        // ⟨ω₁²⟩ = 1/4 and ⟨ω₁²ω₂²⟩ = 1/24 on S³.
        let m2: f64 = rule.iter().map(|(o, w)| w * o[2] * o[2]).sum::<f64>() / area;
        let m22: f64 = rule.iter().map(|(o, w)| w * o[0] * o[0] * o[3] * o[3]).sum::<f64>() / area;
        assert!((m2 - 0.25).abs() < 1e-13);
        assert!((m22 - 1.0 / 24.0).abs() < 1e-13);
    }

    #[test]
    fn partition_of_unity() {
        let centers = [[0.0; 4], [1.0, 0.0, 0.0, 0.0], [0.0, 2.0, 0.5, 0.0]];
        let mut w = [0.0; 3];
        for y in [[0.1, 0.2, 0.3, 0.4], [5.0, -1.0, 0.0, 2.0], [0.5, 0.0, 0.0, 0.0]] {
            partition_weights(&y, &centers, &mut w);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
        partition_weights(&[0.0; 4], &centers, &mut w);
        assert!(w[0] > 0.999);
    }

    #[test]
    fn gaussian_integral_two_centres() {
        // ∫ e^{−|y|²} d⁴y = π²
        let f = |y: &[f64; 4]| (-(y.iter().map(|v| v * v).sum::<f64>())).exp();
        let centers = [[0.0; 4], [0.7, 0.1, 0.0, -0.2]];
        let r = integrate_multicenter(&f, &centers, 1.0, &QuadratureOptions { rel_tol: 1e-9, ..Default::default() });
        assert!(r.converged, "{:?}", r.levels);
        assert!((r.value - PI * PI).abs() < 1e-8 * PI * PI, "{}", r.value);
    }

    #[test]
    fn singular_but_integrable() {
        // ∫ e^{−|y|²}/|y|³ d⁴y = 2π² ∫ e^{−r²} dr = π^{5/2}
        let f = |y: &[f64; 4]| {
            let r2: f64 = y.iter().map(|v| v * v).sum();
            (-r2).exp() / r2.powf(1.5)
        };
        let r = integrate_multicenter(&f, &[[0.0; 4]], 1.0, &QuadratureOptions { rel_tol: 1e-10, ..Default::default() });
        let exact = PI.powf(2.5);
        assert!((r.value - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn exterior_integral() {
        // ∫_{|y|>R} e^{−|y|²} = π² (1 + R²) e^{−R²}
        let f = |y: &[f64; 4]| (-(y.iter().map(|v| v * v).sum::<f64>())).exp();
        let v = integrate_exterior(&f, &[0.0; 4], 1.5, 1.0, 16, 4);
        let exact = PI * PI * (1.0 + 2.25) * (-2.25f64).exp();
        assert!((v - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn regions_are_disjoint() {
        let centers = [[0.0; 4], [1.0, 0.0, 0.0, 0.0]];
        assert_eq!(regions_containing(&[0.1, 0.0, 0.0, 0.0], &centers), vec![Region::Uv(0)]);
        assert_eq!(regions_containing(&[0.5, 0.0, 0.0, 0.0], &centers), vec![Region::Ir]);
    }
}
