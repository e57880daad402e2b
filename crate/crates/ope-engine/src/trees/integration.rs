//! Numerical checks of the cutoff- and momentum-integration lemmas. The
//! polynomials in those lemmas have unspecified coefficients, so each check
//! fits `c` in `lhs ≤ c · base · (1 + L₁ + L₂)^d` over random draws and
//! reports it; a finite `c` is the pass condition.

use super::kinematics::{eta_bar_i, eta_i, subset_sup, Momentum};
use super::random::random_momentum;
use crate::quadrature::{gauss_kronrod, integrate_multicenter, QuadratureOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    pub name: &'static str,
    pub samples: usize,
    /// Degree of the fitted polynomial in the logarithms.
    pub degree: u32,
    /// Smallest constant that bounds every draw.
    pub fitted_constant: f64,
    pub worst_case: Option<String>,
}

impl FitReport {
    pub fn passed(&self) -> bool {
        self.fitted_constant.is_finite() && self.fitted_constant > 0.0
    }

    fn push(&mut self, ratio: f64, desc: impl FnOnce() -> String) {
        self.samples += 1;
        if ratio > self.fitted_constant || ratio.is_nan() {
            self.fitted_constant = if ratio.is_nan() { f64::NAN } else { ratio };
            self.worst_case = Some(desc());
        }
    }
}

fn ln_plus(x: f64) -> f64 {
    x.max(1.0).ln()
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.gen_range(lo..=hi))
}

/// `∫_a^b f` for `0 ≤ a < b`, in `ln x` with panels split at `breaks`.
fn integrate_1d<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, breaks: &[f64]) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut total = 0.0;
    let mut lo = a;
    if a == 0.0 {
        let first = breaks.iter().copied().filter(|&x| x > 0.0).fold(b, f64::min) * 1e-3;
        total += gauss_kronrod(f, 0.0, first, 0.0, 1e-10, 400).value;
        lo = first;
    }
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&x| x > lo && x < b).collect();
    pts.push(lo);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let g = |u: f64| {
        let x = u.exp();
        f(x) * x
    };
    for p in pts.windows(2) {
        total += gauss_kronrod(&g, p[0].ln(), p[1].ln(), 0.0, 1e-10, 400).value;
    }
    total
}

/// `∫_{a₀}^{a₁} sup(A,x)^m ln₊^k(K/x) ln₊^l(x/L) dx` against
/// `sup(A,a₀)^{m+1} 𝒫(ln₊(sup(K,A)/sup(a₀,inf(A,L))), ln₊(a₀/L))`, `m < −1`.
pub fn cutoff_integral_steep(samples: usize, seed: u64) -> FitReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = FitReport { name: "lambdaint", samples: 0, degree: 0, fitted_constant: 0.0, worst_case: None };
    let (kmax, lmax) = (2u32, 2u32);
    rep.degree = kmax + lmax + 1;
    while rep.samples < samples {
        let m = -rng.gen_range(1.1..4.0);
        let (k, l) = (rng.gen_range(0..=kmax), rng.gen_range(0..=lmax));
        let a_cap = log_uniform(&mut rng, -2.0, 2.0);
        let a0 = if rng.gen_bool(0.2) { 0.0 } else { log_uniform(&mut rng, -3.0, 2.0) };
        let a1 = a0.max(1e-3) * log_uniform(&mut rng, 0.0, 4.0);
        let kk = log_uniform(&mut rng, -2.0, 3.0);
        let ll = log_uniform(&mut rng, -3.0, 2.0);
        let f = |x: f64| a_cap.max(x).powf(m) * ln_plus(kk / x).powi(k as i32) * ln_plus(x / ll).powi(l as i32);
        let lhs = integrate_1d(&f, a0, a1, &[a_cap, kk, ll]);
        let x1 = ln_plus(kk.max(a_cap) / a0.max(a_cap.min(ll)));
        let x2 = if a0 == 0.0 { 0.0 } else { ln_plus(a0 / ll) };
        let rhs = a_cap.max(a0).powf(m + 1.0) * (1.0 + x1 + x2).powi(rep.degree as i32);
        rep.push(lhs / rhs, || format!("m={m:.3} k={k} l={l} A={a_cap:.3e} a0={a0:.3e} a1={a1:.3e} K={kk:.3e} L={ll:.3e}"));
    }
    rep
}

/// `∫_{a₀}^{a₁} sup(x,b)^m ln₊^k(K/x) ln₊^l(x/L) dx` against
/// `sup(c,a₁)^{m+1} 𝒫(ln₊(K/sup(c,a₁)), ln₊(a₁/L))`, `m > −1`, `c ≥ b`.
pub fn cutoff_integral_shallow(samples: usize, seed: u64) -> FitReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = FitReport { name: "lambdaint2", samples: 0, degree: 0, fitted_constant: 0.0, worst_case: None };
    let (kmax, lmax) = (2u32, 2u32);
    rep.degree = kmax + lmax + 1;
    while rep.samples < samples {
        let m = rng.gen_range(-0.9..3.0);
        let (k, l) = (rng.gen_range(0..=kmax), rng.gen_range(0..=lmax));
        let a0 = if rng.gen_bool(0.2) { 0.0 } else { log_uniform(&mut rng, -3.0, 2.0) };
        let a1 = a0.max(1e-3) * log_uniform(&mut rng, 0.0, 4.0);
        let b = if rng.gen_bool(0.2) { 0.0 } else { log_uniform(&mut rng, -2.0, 2.0) };
        let c = b.max(1e-3) * log_uniform(&mut rng, 0.0, 2.0);
        let kk = log_uniform(&mut rng, -2.0, 3.0);
        let ll = log_uniform(&mut rng, -3.0, 2.0);
        let f = |x: f64| x.max(b).powf(m) * ln_plus(kk / x).powi(k as i32) * ln_plus(x / ll).powi(l as i32);
        let lhs = integrate_1d(&f, a0, a1, &[b, kk, ll]);
        let s = c.max(a1);
        let rhs = s.powf(m + 1.0) * (1.0 + ln_plus(kk / s) + ln_plus(a1 / ll)).powi(rep.degree as i32);
        rep.push(lhs / rhs, || format!("m={m:.3} k={k} l={l} a0={a0:.3e} a1={a1:.3e} b={b:.3e} c={c:.3e} K={kk:.3e} L={ll:.3e}"));
    }
    rep
}

/// `∫_a^b ln₊^k(K/x)/sup(c,x) dx` against `𝒫(ln₊(sup(K,b)/sup(c,a)))`.
pub fn cutoff_integral_log(samples: usize, seed: u64) -> FitReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kmax = 3u32;
    let mut rep = FitReport { name: "lambdaint3", samples: 0, degree: kmax + 1, fitted_constant: 0.0, worst_case: None };
    while rep.samples < samples {
        let k = rng.gen_range(0..=kmax);
        let c = log_uniform(&mut rng, -2.0, 2.0);
        let a = if rng.gen_bool(0.2) { 0.0 } else { log_uniform(&mut rng, -3.0, 2.0) };
        let b = a.max(1e-3) * log_uniform(&mut rng, 0.0, 5.0);
        let kk = log_uniform(&mut rng, -2.0, 4.0);
        let f = |x: f64| ln_plus(kk / x).powi(k as i32) / c.max(x);
        let lhs = integrate_1d(&f, a, b, &[c, kk]);
        let rhs = (1.0 + ln_plus(kk.max(b) / c.max(a))).powi(rep.degree as i32);
        rep.push(lhs / rhs, || format!("k={k} a={a:.3e} b={b:.3e} c={c:.3e} K={kk:.3e}"));
    }
    rep
}

fn dist(x: &[f64; 4], a: &[f64; 4]) -> f64 {
    x.iter().zip(a).map(|(u, v)| (u + v) * (u + v)).sum::<f64>().sqrt()
}

fn quad4<F: Fn(&[f64; 4]) -> f64 + Sync>(f: &F, shifts: &[[f64; 4]], alpha: f64) -> f64 {
    let mut centres = vec![[0.0; 4]];
    centres.extend(shifts.iter().map(|a| a.map(|c| -c)).filter(|c| c.iter().any(|v| v.abs() < 10.0 / alpha.sqrt())));
    let opts = QuadratureOptions { rel_tol: 1e-3, abs_tol: 0.0, max_level: 3 };
    integrate_multicenter(f, &centres, 1.0 / alpha.sqrt(), &opts).value
}

/// `∫ e^{−α|x|²} f(x) ∏ sup(|x+a_i|,β_i)^{m_i} d⁴x` against `∏ sup(|a_i|,β_i)^{m_i}`,
/// with `f(x) = 1 + |x|²`.
pub fn momentum_integral(samples: usize, seed: u64) -> FitReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = FitReport { name: "pint", samples: 0, degree: 0, fitted_constant: 0.0, worst_case: None };
    while rep.samples < samples {
        let alpha = log_uniform(&mut rng, -1.0, 1.0);
        let n = rng.gen_range(1..=3);
        let a: Vec<[f64; 4]> = (0..n).map(|_| random_momentum(&mut rng, -2.0, 3.0)).collect();
        let beta: Vec<f64> = (0..n).map(|_| log_uniform(&mut rng, 0.0, 2.0)).collect();
        let m: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let f = |x: &[f64; 4]| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            let mut v = (-alpha * r2).exp() * (1.0 + r2);
            for i in 0..n {
                v *= dist(x, &a[i]).max(beta[i]).powf(m[i]);
            }
            v
        };
        let lhs = quad4(&f, &a, alpha);
        let rhs: f64 = (0..n).map(|i| super::kinematics::norm(&a[i]).max(beta[i]).powf(m[i])).product();
        rep.push(lhs / rhs, || format!("α={alpha:.3} a={a:?} β={beta:?} m={m:?}"));
    }
    rep
}

/// Adds large-momentum and exceptionality factors of `(b⃗, x, −x)` and `(d⃗, x, −x)`
/// to [`momentum_integral`]; `η` or `η̄` alternate between draws.
pub fn momentum_integral_kinematic(samples: usize, seed: u64) -> FitReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = FitReport { name: "pint2", samples: 0, degree: 0, fitted_constant: 0.0, worst_case: None };
    while rep.samples < samples {
        let alpha = log_uniform(&mut rng, -1.0, 1.0);
        let bar = rep.samples % 2 == 1;
        let bs: Vec<Momentum> = (0..rng.gen_range(1..=3)).map(|_| random_momentum(&mut rng, -2.0, 2.0)).collect();
        let ds: Vec<Momentum> = (0..rng.gen_range(1..=3)).map(|_| random_momentum(&mut rng, -2.0, 2.0)).collect();
        let j = rng.gen_range(0..ds.len());
        let a = random_momentum(&mut rng, -2.0, 2.0);
        let beta = log_uniform(&mut rng, 0.0, 1.0);
        let m = rng.gen_range(-3.0..3.0);
        let (g1, g2) = (log_uniform(&mut rng, 0.0, 1.0), log_uniform(&mut rng, 0.0, 1.0));
        let (d1, d2) = (rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0));
        let ext = |set: &[Momentum], x: &[f64; 4]| -> Vec<Momentum> {
            let mut v = set.to_vec();
            v.push(*x);
            v.push(x.map(|c| -c));
            v
        };
        let exc = |qs: &[Momentum]| if bar { eta_bar_i(qs, j).unwrap() } else { eta_i(qs, j).unwrap() };
        let f = |x: &[f64; 4]| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            (-alpha * r2).exp()
                * subset_sup(&ext(&bs, x)).unwrap().max(g1).powf(d1)
                * exc(&ext(&ds, x)).max(g2).powf(-d2)
                * dist(x, &a).max(beta).powf(m)
        };
        let lhs = quad4(&f, &[a], alpha);
        let rhs = subset_sup(&bs).unwrap().max(g1).powf(d1) * exc(&ds).max(g2).powf(-d2) * super::kinematics::norm(&a).max(beta).powf(m);
        rep.push(lhs / rhs, || format!("α={alpha:.3} η̄={bar} b={bs:?} d={ds:?} j={j} a={a:?} β={beta:.3} m={m:.3}"));
    }
    rep
}

pub fn all(samples_1d: usize, samples_4d: usize, seed: u64) -> Vec<FitReport> {
    vec![
        cutoff_integral_steep(samples_1d, seed),
        cutoff_integral_shallow(samples_1d, seed + 1),
        cutoff_integral_log(samples_1d, seed + 2),
        momentum_integral(samples_4d, seed + 3),
        momentum_integral_kinematic(samples_4d, seed + 4),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_helper() {
        // ∫_0^2 x dx and ∫_1^e 1/x dx
        assert!((integrate_1d(&|x| x, 0.0, 2.0, &[1.0]) - 2.0).abs() < 1e-9);
        assert!((integrate_1d(&|x| 1.0 / x, 1.0, std::f64::consts::E, &[]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fitted_constants_finite() {
        for rep in all(200, 8, 21) {
            assert!(rep.passed(), "{}: {} at {:?}", rep.name, rep.fitted_constant, rep.worst_case);
        }
    }
}
