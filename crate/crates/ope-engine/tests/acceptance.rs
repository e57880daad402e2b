//! Acceptance criteria 1–9. Runs without the libtest harness so every
//! criterion prints exactly one `PASS`/`FAIL` line; the process fails only if
//! a criterion fails in a way not recorded as a known limitation.
//!
//! Run a subset with `cargo test --test acceptance -- 3 8`.

use num::{BigInt, BigRational, One, Signed, Zero};
use ope_engine::algebra::{enumerate_basis, parse_combination, parse_operator, CompositeOperator, Dim, MultiIndex, OperatorCombination, Theory};
use ope_engine::analysis::{associativity_sweep, default_tau_grid, is_monotone, scaling_survey, DEFAULT_FIT_POINTS};
use ope_engine::covariance::{covariance_deriv_bound, eval_covariance_deriv};
use ope_engine::recursion::{integrate_bound, ir_tail, local_slopes, InteractionOperator, SubtractedIntegrand};
use ope_engine::trees::{lemmas, GsScan};
use ope_engine::ward::{combination_product, derivative_pair_sum, ward_survey, FreeBrstMatrix};
use ope_engine::wick::{for_each_wick_graph, free_ope_coefficient, Atom, Monomial};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::time::{Duration, Instant};

// Pinned tolerances and budgets.
const C1_BUDGET: Duration = Duration::from_secs(60);
const C2_SAMPLES: usize = 1_000;
const C2_BUDGET: Duration = Duration::from_secs(10);
const C3_MARGIN: f64 = 0.05;
const C3_BUDGET: Duration = Duration::from_secs(300);
const C4_BUDGET: Duration = Duration::from_secs(120);
const C5_SAMPLES: usize = 10_000;
const C5_SCALING_TOL: f64 = 1e-3;
const C5_BUDGET: Duration = Duration::from_secs(120);
const C6_TOL: f64 = 1e-6;
const C6_SLOPE_FLOOR: f64 = -4.0;
const C6_TAIL_RADII: [f64; 3] = [10.0, 20.0, 40.0];
const C6_BUDGET: Duration = Duration::from_secs(600);
const C7_TOL: f64 = 1e-6;
const C7_BUDGET: Duration = Duration::from_secs(600);
const C8_REL_AT_6: f64 = 1e-4;
const C8_BUDGET: Duration = Duration::from_secs(300);
const C9_BUDGET: Duration = Duration::from_secs(10);

/// Outcome of one criterion.
struct Outcome {
    passed: bool,
    /// A failure whose cause is understood and asserted below.
    expected_failure: bool,
    detail: String,
}

impl Outcome {
    fn pass_if(passed: bool, detail: String) -> Self {
        Outcome { passed, expected_failure: false, detail }
    }
}

fn timed(budget: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    o.detail = format!("{}; {:.1} s (budget {} s)", o.detail, took.as_secs_f64(), budget.as_secs());
    if took > budget {
        o.passed = false;
        o.expected_failure = false;
    }
    o
}

fn op(t: &Theory, s: &str) -> CompositeOperator {
    parse_operator(t, s).unwrap()
}

// ---------------------------------------------------------------------------
// 1. Wick oracle

/// Independent brute-force enumerator for two operators of the free scalar.
/// Every subset of factors of size `|B|` is routed to `B`; the rest is
/// perfectly matched across the two points; the routed factors are assigned
/// to the slots of `B` by every bijection, divided by the slot symmetry.
fn oracle(a1: &CompositeOperator, a2: &CompositeOperator, b: &CompositeOperator) -> BTreeMap<Monomial, BigRational> {
    let flat: Vec<(u8, [u8; 4])> =
        a1.factors.iter().map(|f| (0u8, f.deriv.0)).chain(a2.factors.iter().map(|f| (1u8, f.deriv.0))).collect();
    let slots: Vec<[u8; 4]> = b.factors.iter().map(|f| f.deriv.0).collect();
    let mut out: BTreeMap<Monomial, BigRational> = BTreeMap::new();
    let (n, k) = (flat.len(), slots.len());
    if n < k || (n - k) % 2 == 1 {
        return out;
    }
    let mut symmetry = 1u64;
    let mut counts: BTreeMap<[u8; 4], u64> = BTreeMap::new();
    for s in &slots {
        *counts.entry(*s).or_default() += 1;
    }
    for &m in counts.values() {
        symmetry *= (1..=m).product::<u64>();
    }
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let routed: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let left: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 0 && flat[*i].0 == 0).collect();
        let right: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 0 && flat[*i].0 == 1).collect();
        if left.len() != right.len() {
            continue;
        }
        for matching in permutations(right.len()) {
            let mut sign = 1i64;
            let mut atoms: Vec<Atom> = Vec::new();
            for (i, &l) in left.iter().enumerate() {
                let (v, w) = (flat[l].1, flat[right[matching[i]]].1);
                // ∂^v_{x₁} ∂^w_{x₂} C(x₁ − x₂) = (−1)^{|w|} (∂^{v+w} C)(x₁ − x₂)
                if w.iter().map(|&c| c as u32).sum::<u32>() % 2 == 1 {
                    sign = -sign;
                }
                atoms.push(Atom::Prop { a: 0, b: 1, u: MultiIndex(std::array::from_fn(|c| v[c] + w[c])) });
            }
            'assign: for sigma in permutations(k) {
                let mut denom = symmetry;
                let mut coords = [0u16; 4];
                for (j, &f) in routed.iter().enumerate() {
                    let (vertex, v) = flat[f];
                    let w = slots[sigma[j]];
                    if (0..4).any(|c| v[c] > w[c]) || (vertex == 1 && v != w) {
                        continue 'assign;
                    }
                    for c in 0..4 {
                        let shift = (w[c] - v[c]) as u64;
                        denom *= (1..=shift).product::<u64>();
                        coords[c] += shift as u16;
                    }
                }
                let mut mono: Vec<(Atom, u16)> = Vec::new();
                for &a in &atoms {
                    match mono.iter_mut().find(|(b, _)| *b == a) {
                        Some((_, p)) => *p += 1,
                        None => mono.push((a, 1)),
                    }
                }
                for (axis, &p) in coords.iter().enumerate() {
                    if p > 0 {
                        mono.push((Atom::Coord { a: 0, b: 1, axis: axis as u8 }, p));
                    }
                }
                mono.sort();
                let c = BigRational::new(BigInt::from(sign), BigInt::from(denom));
                *out.entry(mono).or_insert_with(BigRational::zero) += c;
            }
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

fn criterion_1() -> Outcome {
    let t = Theory::scalar();
    let basis = enumerate_basis(&t, Dim::from_integer(4)).unwrap();
    let ops = &basis.operators;
    let (mut checked, mut nonzero, mut mismatches) = (0usize, 0usize, Vec::new());
    for a1 in ops {
        for a2 in ops {
            for b in ops {
                let engine = free_ope_coefficient(&t, &[a1.clone(), a2.clone()], b, 1.0).unwrap();
                let got: BTreeMap<Monomial, BigRational> = engine.terms().map(|(m, c)| (m.clone(), c.clone())).collect();
                let want = oracle(a1, a2, b);
                checked += 1;
                nonzero += usize::from(!want.is_empty());
                if got != want && mismatches.len() < 3 {
                    mismatches.push(format!("({}, {}) → {}", a1.label(&t), a2.label(&t), b.label(&t)));
                }
            }
        }
    }
    let mut counts = Vec::new();
    let mut counts_ok = true;
    for n in 1..=5u32 {
        let phin = op(&t, &format!("phi^{n}"));
        let c = for_each_wick_graph(&t, &[phin.clone(), phin], &CompositeOperator::unit(), usize::MAX, |_| {}).unwrap();
        let factorial: usize = (1..=n as usize).product();
        counts_ok &= c == factorial;
        counts.push(c);
    }
    Outcome::pass_if(
        mismatches.is_empty() && counts_ok && nonzero > 0,
        format!(
            "{checked} triples over {} operators, {nonzero} nonzero, mismatches {:?}; graph counts n = 1..5: {counts:?}",
            ops.len(),
            mismatches
        ),
    )
}

// ---------------------------------------------------------------------------
// 2. Covariance derivative bound

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    let deltas = [0.0, 0.5, 1.0];
    for _ in 0..C2_SAMPLES {
        let r = 10f64.powf(rng.gen_range(-1.0..=1.0));
        let dir: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x: [f64; 4] = std::array::from_fn(|i| r * dir[i] / norm);
        let order = rng.gen_range(0..=4u8);
        let mut u = [0u8; 4];
        for _ in 0..order {
            u[rng.gen_range(0..4)] += 1;
        }
        let delta = deltas[rng.gen_range(0..3)];
        let value = eval_covariance_deriv(&MultiIndex(u), &x, 1.0).unwrap().abs();
        let bound = covariance_deriv_bound(order as u32, r * r, 1.0, delta);
        worst = worst.max(value / bound);
        if value > bound {
            violations += 1;
        }
    }
    Outcome::pass_if(violations == 0, format!("{C2_SAMPLES} samples, {violations} violations, max |∂^u C|/bound = {worst:.3e}"))
}

// ---------------------------------------------------------------------------
// 3. Scaling degree

fn criterion_3() -> Outcome {
    let basis = enumerate_basis(&Theory::scalar(), Dim::from_integer(4)).unwrap();
    let x = [[0.31, -0.12, 0.27, 0.05], [0.0; 4]];
    let survey = scaling_survey(&basis, &x, &default_tau_grid(), DEFAULT_FIT_POINTS, C3_MARGIN, 1.0).unwrap();
    let failed: Vec<_> = survey.iter().filter(|e| !e.passed).collect();
    let margin = survey.iter().map(|e| e.fit.slope - e.expected).fold(f64::INFINITY, f64::min);
    Outcome::pass_if(
        !survey.is_empty() && failed.is_empty(),
        format!("{} nonzero coefficients, {} below [B]−[A]−{C3_MARGIN}, min slope − expected = {margin:.2e}", survey.len(), failed.len()),
    )
}

// ---------------------------------------------------------------------------
// 4. Free Ward identity

fn criterion_4() -> Outcome {
    let t = Theory::qed_free();
    let basis = enumerate_basis(&t, Dim::from_integer(3)).unwrap();
    let q = FreeBrstMatrix::new(&basis).unwrap();
    let survey = ward_survey(&basis, &q, None, 1.0).unwrap();

    let f = |m: usize, n: usize| parse_combination(&t, &format!("d{m}A{n} - d{n}A{m}")).unwrap();
    let planes: Vec<(usize, usize)> = (1..=4).flat_map(|m| (m + 1..=4).map(move |n| (m, n))).collect();
    let (mut sums, mut nonzero_sums) = (0, 0);
    for &(m1, n1) in &planes {
        for &(m2, n2) in &planes {
            let inputs = [
                vec![f(m1, n1), f(m2, n2)],
                vec![f(m1, n1), combination_product(&t, &f(m1, n1), &f(m2, n2))],
            ];
            for a in &inputs {
                for mu in 1..=4 {
                    for nu in mu..=4 {
                        sums += 1;
                        if !derivative_pair_sum(&t, a, "A", mu, nu, 1.0).unwrap().is_zero() {
                            nonzero_sums += 1;
                        }
                    }
                }
            }
        }
    }
    // A gauge-variant input must break the antisymmetry.
    let control = [OperatorCombination::single(op(&t, "d1A2")), OperatorCombination::single(op(&t, "d1A2*d1A2"))];
    let control_detects = !derivative_pair_sum(&t, &control, "A", 1, 2, 1.0).unwrap().is_zero();
    Outcome::pass_if(
        survey.nonzero == 0 && !survey.truncated && survey.triples > 0 && nonzero_sums == 0 && control_detects,
        format!(
            "K: {} triples, {} nonzero; antisymmetry: {sums} field-strength sums, {nonzero_sums} nonzero; gauge-variant control nonzero: {control_detects}",
            survey.triples, survey.nonzero
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. Tree lemmas

fn criterion_5() -> Outcome {
    let reports = lemmas::all(C5_SAMPLES, 5);
    let gs = GsScan::default().all();
    let mut lines = Vec::new();
    let mut clean = true;
    let mut known = true;
    for r in &reports {
        let ok = if r.name == "tree_scaling" { r.violations == 0 && r.worst_ratio <= C5_SCALING_TOL } else { r.passed() };
        lines.push(format!("{} {}/{}", r.name, r.violations, r.samples));
        if !ok {
            clean = false;
            // Known: the irrelevant-tree cutoff estimate. Every violation must raise the
            // cutoff above inf(μ,η) while the weight itself stays non-increasing.
            if r.name == "t_irr_ineq2" {
                let v = lemmas::irrelevant_cutoff_gain_violations(C5_SAMPLES, 5);
                let characterised = v.len() == r.violations && v.iter().all(|c| c.lambda_raised > c.scale && c.weight_non_increasing);
                known &= characterised;
                lines.push(format!("(t_irr_ineq2 violations characterised: {characterised})"));
            } else {
                known = false;
            }
        }
    }
    for g in &gs {
        lines.push(format!("{} {}/{}", g.name, g.violations, g.cases));
        if !g.passed() {
            clean = false;
            // Known: the product property fails only when a factor has r = 0, s = 1.
            let characterised = g.name == "gs_prop_3" && g.violations_with_positive_r == 0;
            known &= characterised;
            if characterised {
                lines.push("(gs_prop_3 violations all have a factor with r = 0, s = 1)".into());
            }
        }
    }
    let scaling = reports.iter().find(|r| r.name == "tree_scaling").map_or(f64::NAN, |r| r.worst_ratio);
    Outcome {
        passed: clean,
        expected_failure: !clean && known,
        detail: format!("{}; tree scaling max deviation {scaling:.2e} (tol {C5_SCALING_TOL:e})", lines.join(", ")),
    }
}

// ---------------------------------------------------------------------------
// 6 and 7. First-order recursion integrals

const X: [[f64; 4]; 2] = [[0.6, 0.2, -0.3, 0.4], [0.0; 4]];

fn phi4(t: &Theory) -> InteractionOperator {
    InteractionOperator::from_combination(parse_combination(t, "1/24*phi^4").unwrap())
}

fn desk_cases(t: &Theory) -> Vec<(Vec<CompositeOperator>, CompositeOperator)> {
    vec![
        (vec![op(t, "phi^2"), op(t, "phi^2")], CompositeOperator::unit()),
        (vec![op(t, "phi^2"), op(t, "phi")], op(t, "phi")),
        (vec![op(t, "phi"), op(t, "phi")], op(t, "phi^2")),
    ]
}

fn criterion_6() -> Outcome {
    let t = Theory::scalar();
    let i = phi4(&t);
    let mut ok = true;
    let mut parts = Vec::new();
    for (a, b) in desk_cases(&t) {
        let f = SubtractedIntegrand::build(&t, &a, &b, &i.leading(), 1.0).unwrap();
        let slopes = local_slopes(&f, &X).unwrap();
        let tail = ir_tail(&f, &X, &C6_TAIL_RADII).unwrap();
        let full = integrate_bound(&f, &X, C6_TOL).unwrap();
        let half = integrate_bound(&f, &X, C6_TOL / 2.0).unwrap();
        let change = (full.value - half.value).abs();
        let slopes_ok = slopes.slopes.iter().all(|s| s.map_or(true, |v| v > C6_SLOPE_FLOOR));
        let converged = full.converged && half.converged && change <= full.quad_error && full.value != 0.0;
        ok &= slopes_ok && tail.super_polynomial && converged;
        let label: Vec<String> = a.iter().map(|o| o.label(&t)).collect();
        parts.push(format!(
            "({}) → {}: value {:.6e} ± {:.1e}, halving change {change:.1e}, slopes {:?}, tail slopes {:?}",
            label.join(", "),
            b.label(&t),
            full.value,
            full.quad_error,
            slopes.slopes.iter().map(|s| s.map(|v| (v * 100.0).round() / 100.0)).collect::<Vec<_>>(),
            tail.slopes.iter().map(|v| (v * 10.0).round() / 10.0).collect::<Vec<_>>(),
        ));
    }
    Outcome::pass_if(ok, parts.join("; "))
}

fn criterion_7() -> Outcome {
    let t = Theory::scalar();
    let i = phi4(&t);
    let phi2 = parse_combination(&t, "phi^2").unwrap();
    // ∂₂∂₂φ² and ∂₁∂₂φ²: [O] = 2 ≤ 4 − |a|.
    let insertions = [MultiIndex([0, 2, 0, 0]), MultiIndex([1, 1, 0, 0])];
    let mut ok = true;
    let mut parts = Vec::new();
    for (a, b) in desk_cases(&t).into_iter().take(2) {
        let base = integrate_bound(&SubtractedIntegrand::build(&t, &a, &b, &i.leading(), 1.0).unwrap(), &X, C7_TOL).unwrap();
        for w in &insertions {
            let shifted = i.with_total_derivative(&t, w, &phi2);
            let f = SubtractedIntegrand::build(&t, &a, &b, &shifted.leading(), 1.0).unwrap();
            let r = integrate_bound(&f, &X, C7_TOL).unwrap();
            let rel = (r.value - base.value).abs() / base.value.abs();
            ok &= r.converged && base.converged && rel <= 2.0 * C7_TOL;
            parts.push(format!("{}+∂^{w}φ²: relative change {rel:.1e}", b.label(&t)));
        }
    }
    Outcome::pass_if(ok, format!("{} (tol 2·{C7_TOL:e})", parts.join(", ")))
}

// ---------------------------------------------------------------------------
// 8. Associativity

fn criterion_8() -> Outcome {
    let t = Theory::scalar();
    let a = [op(&t, "phi"), op(&t, "phi"), op(&t, "phi^2")];
    let x = [[0.06, 0.08, 0.0, 0.0], [0.0; 4], [0.0, 0.0, 6.0, 8.0]];
    let sweep = associativity_sweep(&t, &a, &CompositeOperator::unit(), &x, &[2, 4, 6, 8].map(Dim::from_integer), 1.0).unwrap();
    let at6 = sweep.iter().find(|c| c.d_trunc == Dim::from_integer(6)).unwrap().relative;
    let rel: Vec<String> = sweep.iter().map(|c| format!("{:.1e}", c.relative)).collect();
    Outcome::pass_if(is_monotone(&sweep) && at6 < C8_REL_AT_6, format!("relative residuals d = 2,4,6,8: [{}]; at 6 below {C8_REL_AT_6:e}", rel.join(", ")))
}

// ---------------------------------------------------------------------------
// 9. Nilpotency

fn criterion_9() -> Outcome {
    let basis = enumerate_basis(&Theory::qed_free(), Dim::from_integer(3)).unwrap();
    let q = FreeBrstMatrix::new(&basis).unwrap();
    let entries: usize = q.rows.iter().map(Vec::len).sum();
    let bad = q.square_residuals();
    let unit = BigRational::one();
    let nontrivial = q.rows.iter().flatten().any(|(_, v)| v.abs() == unit);
    Outcome::pass_if(bad.is_empty() && entries > 0 && nontrivial, format!("{} operators, {entries} nonzero Q₀ entries, {} nonzero entries of Q₀²", basis.len(), bad.len()))
}

fn main() {
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, Duration, fn() -> Outcome); 9] = [
        (1, "Wick oracle", C1_BUDGET, criterion_1),
        (2, "covariance bound", C2_BUDGET, criterion_2),
        (3, "scaling degree", C3_BUDGET, criterion_3),
        (4, "free Ward identity", C4_BUDGET, criterion_4),
        (5, "tree lemmas", C5_BUDGET, criterion_5),
        (6, "recursion integrability", C6_BUDGET, criterion_6),
        (7, "total-derivative invariance", C7_BUDGET, criterion_7),
        (8, "associativity", C8_BUDGET, criterion_8),
        (9, "nilpotency", C9_BUDGET, criterion_9),
    ];
    let mut unexpected = 0;
    for (n, name, budget, run) in criteria {
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let o = timed(budget, run);
        let status = if o.passed { "PASS" } else { "FAIL" };
        let note = if !o.passed && o.expected_failure { " [known limitation]" } else { "" };
        println!("criterion {n} ({name}): {status}{note}: {}", o.detail);
        if !o.passed && !o.expected_failure {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        eprintln!("{unexpected} criteria failed unexpectedly");
        std::process::exit(1);
    }
}
