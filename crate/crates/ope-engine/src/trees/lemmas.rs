//! Randomised checks of the tree-weight inequalities.

use super::kinematics::{eta, eta_bar, neg, norm, sum, Momentum, MAX_MOMENTA};
use super::ops::{amputate, fuse_line, fuse_special, reduce};
use super::random::{random_momenta, random_momentum, random_tree, TreeShape};
use super::tree::WeightedTree;
use crate::algebra::MultiIndex;
use crate::error::OpeError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Relative slack on `ln lhs ≤ ln rhs` that absorbs rounding.
const LN_SLACK: f64 = 1e-9;
const SHARD: usize = 1000;

/// Result of sampling one inequality `lhs ≤ rhs`.
#[derive(Clone, Debug, Serialize)]
pub struct LemmaReport {
    pub name: String,
    pub samples: usize,
    pub violations: usize,
    /// Largest `lhs / rhs` seen.
    pub worst_ratio: f64,
    /// The sample with the largest ratio.
    pub worst_case: Option<String>,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// One drawn instance: `(ln lhs, ln rhs, description)`, or `None` to redraw.
type Draw = Option<(f64, f64, String)>;

fn shard_rng(seed: u64, k: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn violates(lhs: f64, rhs: f64) -> bool {
    let excess = if lhs == rhs { 0.0 } else { lhs - rhs };
    excess > LN_SLACK * rhs.abs().max(1.0) || excess.is_nan()
}

fn run<F>(name: &str, samples: usize, seed: u64, draw: F) -> LemmaReport
where
    F: Fn(&mut ChaCha8Rng) -> Draw + Sync,
{
    let shards = samples.div_ceil(SHARD);
    let parts: Vec<(usize, usize, f64, Option<String>)> = (0..shards)
        .into_par_iter()
        .map(|k| {
            let mut rng = shard_rng(seed, k);
            let n = SHARD.min(samples - k * SHARD);
            let (mut done, mut bad, mut worst, mut case) = (0, 0, f64::NEG_INFINITY, None);
            while done < n {
                let Some((lhs, rhs, desc)) = draw(&mut rng) else { continue };
                done += 1;
                let excess = if lhs == rhs { 0.0 } else { lhs - rhs };
                if violates(lhs, rhs) {
                    bad += 1;
                }
                if excess > worst || (excess.is_nan() && !worst.is_nan()) {
                    worst = excess;
                    case = Some(desc);
                }
            }
            (done, bad, worst, case)
        })
        .collect();
    let mut rep = LemmaReport { name: name.into(), samples: 0, violations: 0, worst_ratio: 0.0, worst_case: None };
    let mut worst = f64::NEG_INFINITY;
    for (done, bad, w, case) in parts {
        rep.samples += done;
        rep.violations += bad;
        if w > worst || (w.is_nan() && !worst.is_nan()) {
            worst = w;
            rep.worst_case = case;
        }
    }
    rep.worst_ratio = worst.exp();
    rep
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.gen_range(lo..=hi))
}

/// A tree with `[T]` set to `target` through its particular dimension.
/// The estimates are stated for the fully reduced trees that appear in the bounds, with
/// particular dimension `[v_p] ≥ 0`.
fn reduced_tree<R: Rng>(rng: &mut R, special: bool) -> WeightedTree {
    let mut t = reduce(&random_tree(rng, &TreeShape::default(), special));
    t.vp = rng.gen_range(0.0..=6.0);
    t
}

fn describe(t: &WeightedTree, q: &[Momentum], extra: String) -> String {
    format!(
        "{} externals, {} internal, special: {}, [T] = {:.3}, |w| = {}, |q⃗| ≤ {:.3e}; {extra}",
        t.n_external(),
        t.n_internal(),
        t.has_special(),
        t.dimension(),
        t.w_order(),
        q.iter().map(norm).fold(0.0, f64::max),
    )
}

fn exceptionality(t: &WeightedTree, q: &[Momentum], mu: f64) -> f64 {
    if t.has_special() {
        eta_bar(q, mu).expect("bounded size")
    } else {
        eta(q).expect("bounded size")
    }
}

/// One draw of the irrelevant-tree cutoff estimate.
#[derive(Clone, Debug, Serialize)]
pub struct CutoffGainCase {
    pub mu: f64,
    pub lambda: f64,
    pub lambda_raised: f64,
    /// `inf(μ, η)`.
    pub scale: f64,
    pub epsilon: f64,
    /// `ln lhs − ln rhs`.
    pub excess: f64,
    /// `G(λ) ≤ G(Λ)`: the weight alone does not grow with the cutoff.
    pub weight_non_increasing: bool,
}

fn draw_cutoff_gain(rng: &mut ChaCha8Rng) -> Option<(WeightedTree, Vec<Momentum>, CutoffGainCase, f64, f64)> {
    let special = rng.gen_bool(0.5);
    let t = reduced_tree(rng, special);
    if t.dimension() > 0.0 {
        return None;
    }
    let q = random_momenta(rng, t.n_external(), !special);
    let mu = log_uniform(rng, -1.0, 1.0);
    let lam = log_uniform(rng, -2.0, 2.0);
    let lam2 = lam * log_uniform(rng, 0.0, 3.0);
    let eps = rng.gen_range(0.0..=-t.dimension());
    let e = exceptionality(&t, &q, mu).min(mu);
    let lhs = t.ln_weight(&q, mu, lam2).ok()?;
    let base = t.ln_weight(&q, mu, lam).ok()?;
    let rhs = eps * (e.max(lam).ln() - e.max(lam2).ln()) + base;
    let case = CutoffGainCase { mu, lambda: lam, lambda_raised: lam2, scale: e, epsilon: eps, excess: lhs - rhs, weight_non_increasing: !violates(lhs, base) };
    Some((t, q, case, lhs, rhs))
}

/// Raising the cutoff on an irrelevant tree gains `(sup(inf(μ,η),Λ)/sup(inf(μ,η),λ))^ε`.
pub fn irrelevant_cutoff_gain(samples: usize, seed: u64) -> LemmaReport {
    run("t_irr_ineq2", samples, seed, |rng| {
        let (t, q, c, lhs, rhs) = draw_cutoff_gain(rng)?;
        Some((lhs, rhs, describe(&t, &q, format!("μ = {:.3e}, Λ = {:.3e}, λ = {:.3e}, ε = {:.3}", c.mu, c.lambda, c.lambda_raised, c.epsilon))))
    })
}

/// The violating draws of [`irrelevant_cutoff_gain`] with the same seed.
pub fn irrelevant_cutoff_gain_violations(samples: usize, seed: u64) -> Vec<CutoffGainCase> {
    let shards = samples.div_ceil(SHARD);
    (0..shards)
        .into_par_iter()
        .flat_map_iter(|k| {
            let mut rng = shard_rng(seed, k);
            let n = SHARD.min(samples - k * SHARD);
            let mut out = Vec::new();
            let mut done = 0;
            while done < n {
                let Some((_, _, c, lhs, rhs)) = draw_cutoff_gain(&mut rng) else { continue };
                done += 1;
                if violates(lhs, rhs) {
                    out.push(c);
                }
            }
            out
        })
        .collect()
}

/// Scaling all momenta down does not increase a relevant or marginal tree at `μ = Λ`.
pub fn relevant_momentum_scaling(samples: usize, seed: u64) -> LemmaReport {
    run("t_rel_ineq1", samples, seed, |rng| {
        let special = rng.gen_bool(0.5);
        let t = reduced_tree(rng, special);
        if t.dimension() < 0.0 {
            return None;
        }
        let q = random_momenta(rng, t.n_external(), !special);
        let lam = log_uniform(rng, -2.0, 2.0);
        let s: f64 = rng.gen_range(0.0..=1.0);
        let qs: Vec<Momentum> = q.iter().map(|v| v.map(|c| c * s)).collect();
        let lhs = t.ln_weight(&qs, lam, lam).ok()?;
        let rhs = t.ln_weight(&q, lam, lam).ok()?;
        Some((lhs, rhs, describe(&t, &q, format!("Λ = {lam:.3e}, t = {s:.3}"))))
    })
}

/// For special trees with `[T] ≥ 0`, raising the cutoff below `μ` does not increase the weight.
pub fn relevant_special_cutoff(samples: usize, seed: u64) -> LemmaReport {
    run("t_rel_ineq3", samples, seed, |rng| {
        let t = reduced_tree(rng, true);
        if t.dimension() < 0.0 {
            return None;
        }
        let q = random_momenta(rng, t.n_external(), false);
        let mu = log_uniform(rng, -1.0, 1.0);
        let lam = mu * log_uniform(rng, -3.0, 0.0);
        let lam2 = lam * (mu / lam).powf(rng.gen_range(0.0..=1.0));
        let lhs = t.ln_weight(&q, mu, lam2).ok()?;
        let rhs = t.ln_weight(&q, mu, lam).ok()?;
        Some((lhs, rhs, describe(&t, &q, format!("μ = {mu:.3e}, Λ = {lam:.3e}, λ = {lam2:.3e}"))))
    })
}

/// Merging special vertices: `G₁ G₂ ≤ G_fused`.
pub fn special_fusion(samples: usize, seed: u64) -> LemmaReport {
    run("gw_fused_1_est", samples, seed, |rng| {
        let t1 = reduced_tree(rng, true);
        let t2 = reduced_tree(rng, true);
        if t1.n_external() + t2.n_external() > MAX_MOMENTA {
            return None;
        }
        let q1 = random_momenta(rng, t1.n_external(), false);
        let q2 = random_momenta(rng, t2.n_external(), false);
        let mu = log_uniform(rng, -1.0, 1.0);
        let lam = log_uniform(rng, -2.0, 2.0);
        let f = fuse_special(&t1, &t2).ok()?;
        let q: Vec<Momentum> = q1.iter().chain(&q2).copied().collect();
        let lhs = t1.ln_weight(&q1, mu, lam).ok()? + t2.ln_weight(&q2, mu, lam).ok()?;
        let rhs = f.ln_weight(&q, mu, lam).ok()?;
        Some((lhs, rhs, describe(&f, &q, format!("μ = {mu:.3e}, Λ = {lam:.3e}"))))
    })
}

fn clear_w(t: &mut WeightedTree, i: usize) {
    t.w[i] = MultiIndex::default();
}

/// Joining legs `−k`, `k`: `G₁ G₂ ≤ G_fused / sup(|k|,Λ)^{[v_M]+[v_N]−4}`.
pub fn line_fusion(samples: usize, seed: u64) -> LemmaReport {
    run("gw_fused_2_est", samples, seed, |rng| {
        // k is the sum of the other momenta of T₁, so T₁ conserves momentum.
        let (s1, s2) = (false, rng.gen_bool(0.5));
        let mut t1 = reduced_tree(rng, s1);
        let mut t2 = reduced_tree(rng, s2);
        if t1.n_external() == 0 || t2.n_external() == 0 || (!s2 && t2.n_external() < 2) {
            return None;
        }
        if t1.n_external() + t2.n_external() - 2 > MAX_MOMENTA {
            return None;
        }
        let q1 = random_momenta(rng, t1.n_external(), !s1);
        let v1 = if s1 { rng.gen_range(0..t1.n_external()) } else { t1.n_external() - 1 };
        clear_w(&mut t1, v1);
        let k = neg(&q1[v1]);
        let n2 = t2.n_external();
        let v2 = if s2 { rng.gen_range(0..n2) } else { 0 };
        clear_w(&mut t2, v2);
        let mut q2: Vec<Momentum> = (0..n2).map(|_| random_momentum(rng, -2.0, 2.0)).collect();
        q2[v2] = k;
        if !s2 {
            q2[n2 - 1] = neg(&sum(&q2[..n2 - 1]));
        }
        let mu = log_uniform(rng, -1.0, 1.0);
        let lam = log_uniform(rng, -2.0, 2.0);
        let (dm, dn) = (t1.external_dim(v1), t2.external_dim(v2));
        let (f, q) = fuse_line(&t1, &q1, v1, &t2, &q2, v2).ok()?;
        let lhs = t1.ln_weight(&q1, mu, lam).ok()? + t2.ln_weight(&q2, mu, lam).ok()?;
        let rhs = f.ln_weight(&q, mu, lam).ok()? - (dm + dn - 4.0) * norm(&k).max(lam).ln();
        Some((lhs, rhs, describe(&f, &q, format!("μ = {mu:.3e}, Λ = {lam:.3e}, |k| = {:.3e}", norm(&k)))))
    })
}

/// Removing a zero-momentum leg: `G^T ≤ Λ^{1−[v]} / sup(inf(μ,η),Λ) · G^{T′}`.
pub fn amputation(samples: usize, seed: u64) -> LemmaReport {
    run("amputate", samples, seed, |rng| {
        let special = rng.gen_bool(0.5);
        let mut t = reduced_tree(rng, special);
        let n = t.n_external();
        let choices = if special { n } else { n.saturating_sub(1) };
        if choices == 0 {
            return None;
        }
        let v = rng.gen_range(0..choices);
        clear_w(&mut t, v);
        let mut q: Vec<Momentum> = (0..n).map(|_| random_momentum(rng, -2.0, 2.0)).collect();
        q[v] = [0.0; 4];
        if !special {
            q[n - 1] = neg(&sum(&q[..n - 1]));
        }
        let mu = log_uniform(rng, -1.0, 1.0);
        let lam = log_uniform(rng, -2.0, 2.0);
        let dv = t.external_dim(v);
        let (ta, qa) = match amputate(&t, &q, v) {
            Ok(r) => r,
            Err(OpeError::Incompatible(_)) => return None,
            Err(e) => panic!("amputation sample: {e}"),
        };
        let e = exceptionality(&ta, &qa, mu).min(mu);
        let lhs = t.ln_weight(&q, mu, lam).ok()?;
        let rhs = (1.0 - dv) * lam.ln() - e.max(lam).ln() + ta.ln_weight(&qa, mu, lam).ok()?;
        Some((lhs, rhs, describe(&t, &q, format!("μ = {mu:.3e}, Λ = {lam:.3e}, [v] = {dv}"))))
    })
}

/// Full reduction never lowers the weight: `G^T ≤ G^{T′}`.
pub fn reduction(samples: usize, seed: u64) -> LemmaReport {
    let shape = TreeShape::default();
    run("reduction", samples, seed, |rng| {
        let special = rng.gen_bool(0.5);
        let mut t = random_tree(rng, &shape, special);
        t.vp = rng.gen_range(-2.0..=6.0);
        let q = random_momenta(rng, t.n_external(), !special);
        let mu = log_uniform(rng, -1.0, 1.0);
        let lam = log_uniform(rng, -2.0, 2.0);
        let r = reduce(&t);
        let lhs = t.ln_weight(&q, mu, lam).ok()?;
        let rhs = r.ln_weight(&q, mu, lam).ok()?;
        Some((lhs, rhs, describe(&t, &q, format!("μ = {mu:.3e}, Λ = {lam:.3e}"))))
    })
}

/// Largest `|G Λ^{−[T]} − 1|` at `Λ = 10⁶ μ` over random trees with momenta up to `100 μ`.
pub fn large_cutoff_scaling(samples: usize, seed: u64) -> LemmaReport {
    let shape = TreeShape::default();
    let rep = run("tree_scaling", samples, seed, |rng| {
        let special = rng.gen_bool(0.5);
        let mut t = random_tree(rng, &shape, special);
        t.vp = rng.gen_range(-2.0..=6.0);
        let q = random_momenta(rng, t.n_external(), !special);
        let mu = log_uniform(rng, -1.0, 1.0);
        let lam = 1e6 * mu;
        let dev = (t.ln_weight(&q, mu, lam).ok()? - t.dimension() * lam.ln()).exp_m1().abs();
        // Reported as dev ≤ 10⁻³.
        Some((dev.ln(), 1e-3f64.ln(), describe(&t, &q, format!("μ = {mu:.3e}, deviation = {dev:.3e}"))))
    });
    LemmaReport { worst_ratio: rep.worst_ratio * 1e-3, ..rep }
}

pub fn all(samples: usize, seed: u64) -> Vec<LemmaReport> {
    vec![
        irrelevant_cutoff_gain(samples, seed),
        relevant_momentum_scaling(samples, seed + 1),
        relevant_special_cutoff(samples, seed + 2),
        special_fusion(samples, seed + 3),
        line_fusion(samples, seed + 4),
        amputation(samples, seed + 5),
        reduction(samples, seed + 6),
        large_cutoff_scaling(samples, seed + 7),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structural_estimates_hold_on_small_samples() {
        for rep in [
            relevant_momentum_scaling(500, 11),
            relevant_special_cutoff(500, 12),
            special_fusion(500, 13),
            line_fusion(500, 14),
            amputation(500, 15),
            reduction(500, 16),
            large_cutoff_scaling(500, 17),
        ] {
            assert_eq!(rep.samples, 500);
            assert!(rep.passed(), "{}: {:?} ratio {}", rep.name, rep.worst_case, rep.worst_ratio);
        }
    }

    #[test]
    fn dimension_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shape = TreeShape::default();
        for i in 0..2000 {
            let mut t = random_tree(&mut rng, &shape, i % 2 == 1);
            t.vp = rng.gen_range(-3.0..3.0);
            assert!((t.dimension() - t.dimension_closed_form()).abs() < 1e-12);
        }
    }

    #[test]
    fn shards_are_deterministic() {
        let a = reduction(1500, 5);
        let b = reduction(1500, 5);
        assert_eq!(a.worst_case, b.worst_case);
        assert_eq!(a.worst_ratio, b.worst_ratio);
    }
}
