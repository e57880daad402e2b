//! Subcommand bodies. Each returns the result files; nothing here touches the
//! output directory.

use super::cache::Cache;
use super::config::{operator, operators, Format, RunConfig};
use super::{Artifact, CliError, Command};
use crate::algebra::{enumerate_basis, format_dim, parse_dim, CompositeOperator, Dim};
use crate::analysis::{associativity_sweep, is_monotone, scaling_survey, tau_grid, AssociativityCheck};
use crate::recursion::{build_interaction_operator, integrate_bound, ir_tail, local_slopes, SubtractedIntegrand};
use crate::trees::{integration, lemmas, GsScan};
use crate::ward::{ward_survey, FreeBrstMatrix};
use crate::wick::{free_ope_coefficient, CoefficientRecord, SymbolicCoefficient};
use serde::{Deserialize, Serialize};

pub fn dispatch(cmd: Command, cfg: &RunConfig, cache: &mut Cache) -> Result<Vec<Artifact>, CliError> {
    match cmd {
        Command::Basis => basis(cfg),
        Command::FreeOpe => free_ope(cfg, cache),
        Command::Recursion => recursion(cfg, cache),
        Command::Ward => ward(cfg),
        Command::Scaling => scaling(cfg),
        Command::Assoc => assoc(cfg),
        Command::TreesCheck => trees_check(cfg),
    }
}

fn json<T: Serialize>(name: &str, value: &T) -> Artifact {
    let mut bytes = serde_json::to_vec_pretty(value).expect("results serialize");
    bytes.push(b'\n');
    Artifact { name: format!("{name}.json"), bytes }
}

fn csv<R: Serialize>(name: &str, rows: &[R]) -> Result<Artifact, CliError> {
    let mut w = ::csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError { code: "CSV_ERROR".into(), message: e.to_string(), exit: 1 })?;
    }
    let bytes = w.into_inner().map_err(|e| CliError { code: "CSV_ERROR".into(), message: e.to_string(), exit: 1 })?;
    Ok(Artifact { name: format!("{name}.csv"), bytes })
}

fn missing_section(name: &str) -> CliError {
    CliError::config("CONFIG_INVALID", format!("this subcommand needs a [{name}] section"))
}

#[derive(Serialize)]
struct BasisRow {
    index: usize,
    label: String,
    dimension: String,
    ghost_number: i32,
    factors: usize,
}

fn basis(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let t = cfg.theory()?;
    let b = enumerate_basis(&t, cfg.d_max()?)?;
    Ok(vec![match cfg.format {
        Format::Json => json("basis", &b.to_json()),
        Format::Csv => {
            let rows: Vec<BasisRow> = b
                .operators
                .iter()
                .enumerate()
                .map(|(index, o)| BasisRow {
                    index,
                    label: o.label(&t),
                    dimension: format_dim(&o.dimension),
                    ghost_number: o.ghost_number,
                    factors: o.factors.len(),
                })
                .collect();
            csv("basis", &rows)?
        }
    }])
}

/// Distinct sample points with the expansion point at the origin.
fn default_points(n: usize) -> Vec<[f64; 4]> {
    (0..n)
        .map(|k| {
            let s = (n - 1 - k) as f64;
            [0.37 * s, -0.21 * s, 0.13 * s * s, 0.29 * s]
        })
        .collect()
}

#[derive(Serialize)]
struct Sample {
    points: Vec<[f64; 4]>,
    value: f64,
}

#[derive(Serialize)]
struct FreeOpeOutput {
    theory: String,
    a: Vec<String>,
    b: String,
    mu: f64,
    term_count: usize,
    coefficient: CoefficientRecord,
    samples: Vec<Sample>,
}

#[derive(Serialize)]
struct SampleRow {
    sample: usize,
    value: f64,
}

/// Cache key of a free coefficient.
pub fn free_key(theory: &crate::algebra::Theory, a: &[CompositeOperator], b: &CompositeOperator, mu: f64) -> String {
    let labels: Vec<String> = a.iter().map(|o| o.label(theory)).collect();
    Cache::key(&("free-ope", theory, labels, b.label(theory), 0u32, mu.to_bits()))
}

/// Free coefficient through the cache.
pub fn cached_free_coefficient(
    cache: &mut Cache,
    theory: &crate::algebra::Theory,
    a: &[CompositeOperator],
    b: &CompositeOperator,
    mu: f64,
) -> Result<SymbolicCoefficient, CliError> {
    let rec: CoefficientRecord = cache.get_or_insert_with(&free_key(theory, a, b, mu), || {
        free_ope_coefficient(theory, a, b, mu).map(|c| c.to_record()).map_err(CliError::from)
    })?;
    Ok(SymbolicCoefficient::from_record(&rec)?)
}

fn free_ope(cfg: &RunConfig, cache: &mut Cache) -> Result<Vec<Artifact>, CliError> {
    let sec = cfg.free_ope.as_ref().ok_or_else(|| missing_section("free_ope"))?;
    let t = cfg.theory()?;
    let a = operators(&t, &sec.a)?;
    let b = operator(&t, &sec.b)?;
    let c = cached_free_coefficient(cache, &t, &a, &b, cfg.mu)?;
    let point_sets = if sec.samples.is_empty() { vec![default_points(a.len())] } else { sec.samples.clone() };
    let samples = point_sets
        .into_iter()
        .map(|points| Ok(Sample { value: c.evaluate(&points)?, points }))
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(vec![match cfg.format {
        Format::Json => json(
            "free_ope",
            &FreeOpeOutput {
                theory: t.name.clone(),
                a: sec.a.clone(),
                b: sec.b.clone(),
                mu: cfg.mu,
                term_count: c.len(),
                coefficient: c.to_record(),
                samples,
            },
        ),
        Format::Csv => {
            let rows: Vec<SampleRow> = samples.iter().enumerate().map(|(sample, s)| SampleRow { sample, value: s.value }).collect();
            csv("free_ope", &rows)?
        }
    }])
}

/// Cached first-order result; non-finite slopes are stored as `None`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecursionRecord {
    pub value: f64,
    pub quad_error: f64,
    pub converged: bool,
    pub levels: Vec<f64>,
    pub evaluations: usize,
    pub local_slopes: Vec<Option<f64>>,
    pub integrable: bool,
    pub tail_radii: Vec<f64>,
    pub tails: Vec<f64>,
    pub tail_slopes: Vec<Option<f64>>,
    pub super_polynomial_tail: bool,
}

#[derive(Serialize)]
struct RecursionOutput {
    theory: String,
    a: Vec<String>,
    b: String,
    interaction: String,
    closure_warnings: Vec<String>,
    points: Vec<[f64; 4]>,
    mu: f64,
    rel_tol: f64,
    #[serde(flatten)]
    result: RecursionRecord,
}

#[derive(Serialize)]
struct RecursionRow {
    value: f64,
    quad_error: f64,
    converged: bool,
    integrable: bool,
    super_polynomial_tail: bool,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn recursion(cfg: &RunConfig, cache: &mut Cache) -> Result<Vec<Artifact>, CliError> {
    let sec = cfg.recursion.as_ref().ok_or_else(|| missing_section("recursion"))?;
    let t = cfg.theory()?;
    let a = operators(&t, &sec.a)?;
    let b = operator(&t, &sec.b)?;
    if sec.points.len() != a.len() {
        return Err(CliError::config("CONFIG_INVALID", format!("{} operators but {} points", a.len(), sec.points.len())));
    }
    let (i, warnings) = build_interaction_operator(&t, &cfg.lagrangian(&t)?)?;
    let lead = i.leading();
    let tol = cfg.quadrature.rel_tol;
    let labels: Vec<String> = a.iter().map(|o| o.label(&t)).collect();
    let bits = |v: &[[f64; 4]]| v.iter().flat_map(|p| p.map(f64::to_bits)).collect::<Vec<u64>>();
    let key = Cache::key(&(
        "recursion",
        &t,
        &labels,
        b.label(&t),
        1u32,
        cfg.mu.to_bits(),
        lead.label(&t),
        bits(&sec.points),
        tol.to_bits(),
        sec.tail_radii.iter().map(|r| r.to_bits()).collect::<Vec<_>>(),
    ));
    let record: RecursionRecord = cache.get_or_insert_with(&key, || -> Result<_, CliError> {
        let f = SubtractedIntegrand::build(&t, &a, &b, &lead, cfg.mu)?;
        let r = integrate_bound(&f, &sec.points, tol)?;
        let (slopes, tail) = if f.is_zero() {
            (None, None)
        } else {
            (Some(local_slopes(&f, &sec.points)?), Some(ir_tail(&f, &sec.points, &sec.tail_radii)?))
        };
        Ok(RecursionRecord {
            value: r.value,
            quad_error: r.quad_error,
            converged: r.converged,
            levels: r.report.levels.clone(),
            evaluations: r.report.evaluations,
            local_slopes: slopes.as_ref().map_or_else(|| vec![None; a.len()], |s| s.slopes.clone()),
            integrable: slopes.as_ref().is_none_or(|s| s.integrable),
            tail_radii: tail.as_ref().map_or_else(Vec::new, |t| t.radii.clone()),
            tails: tail.as_ref().map_or_else(Vec::new, |t| t.tails.clone()),
            tail_slopes: tail.as_ref().map_or_else(Vec::new, |t| t.slopes.iter().map(|&s| finite(s)).collect()),
            super_polynomial_tail: tail.as_ref().is_none_or(|t| t.super_polynomial),
        })
    })?;
    Ok(vec![match cfg.format {
        Format::Json => json(
            "recursion",
            &RecursionOutput {
                theory: t.name.clone(),
                a: sec.a.clone(),
                b: sec.b.clone(),
                interaction: lead.label(&t),
                closure_warnings: warnings.iter().map(|w| w.residual.clone()).collect(),
                points: sec.points.clone(),
                mu: cfg.mu,
                rel_tol: tol,
                result: record,
            },
        ),
        Format::Csv => csv(
            "recursion",
            &[RecursionRow {
                value: record.value,
                quad_error: record.quad_error,
                converged: record.converged,
                integrable: record.integrable,
                super_polynomial_tail: record.super_polynomial_tail,
            }],
        )?,
    }])
}

#[derive(Serialize)]
struct WardOutput {
    theory: String,
    d_max: String,
    basis_size: usize,
    q_entries: usize,
    q_squared_nonzero: usize,
    q_squared_examples: Vec<[String; 3]>,
    k_triples: usize,
    k_nonzero: usize,
    k_examples: Vec<[String; 3]>,
    k_truncated: bool,
}

fn ward(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let t = cfg.theory()?;
    let basis = enumerate_basis(&t, cfg.d_max()?)?;
    let q = FreeBrstMatrix::new(&basis)?;
    let sq = q.square_residuals();
    let max_triples = cfg.ward.as_ref().and_then(|w| w.max_triples);
    let survey = ward_survey(&basis, &q, max_triples, cfg.mu)?;
    let label = |i: usize| basis.operators[i].label(&t);
    let out = WardOutput {
        theory: t.name.clone(),
        d_max: format_dim(&basis.d_max),
        basis_size: basis.len(),
        q_entries: q.rows.iter().map(Vec::len).sum(),
        q_squared_nonzero: sq.len(),
        q_squared_examples: sq.iter().take(8).map(|(a, b, v)| [label(*a), label(*b), v.to_string()]).collect(),
        k_triples: survey.triples,
        k_nonzero: survey.nonzero,
        k_examples: survey.examples,
        k_truncated: survey.truncated,
    };
    Ok(vec![match cfg.format {
        Format::Json => json("ward", &out),
        Format::Csv => {
            #[derive(Serialize)]
            struct Row<'a> {
                theory: &'a str,
                d_max: &'a str,
                basis_size: usize,
                q_squared_nonzero: usize,
                k_triples: usize,
                k_nonzero: usize,
            }
            csv(
                "ward",
                &[Row {
                    theory: &out.theory,
                    d_max: &out.d_max,
                    basis_size: out.basis_size,
                    q_squared_nonzero: out.q_squared_nonzero,
                    k_triples: out.k_triples,
                    k_nonzero: out.k_nonzero,
                }],
            )?
        }
    }])
}

#[derive(Serialize)]
struct ScalingRow {
    a1: String,
    a2: String,
    b: String,
    expected: f64,
    slope: f64,
    ci_low: f64,
    ci_high: f64,
    underflow: bool,
    passed: bool,
}

#[derive(Serialize)]
struct CurveRow<'a> {
    a1: &'a str,
    a2: &'a str,
    b: &'a str,
    tau: f64,
    value: f64,
}

#[derive(Serialize)]
struct ScalingOutput {
    d_max: String,
    points: [[f64; 4]; 2],
    tau_grid: Vec<f64>,
    fit_points: usize,
    margin: f64,
    total: usize,
    failed: usize,
    entries: Vec<ScalingRow>,
}

fn scaling(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let sec = &cfg.scaling;
    let t = cfg.theory()?;
    let basis = enumerate_basis(&t, cfg.d_max()?)?;
    if sec.grid_points < 2 || !(sec.tau_min > 0.0 && sec.tau_min < 1.0) {
        return Err(CliError::config("CONFIG_INVALID", "scaling grid needs at least two points and 0 < tau_min < 1"));
    }
    let grid = tau_grid(sec.grid_points, sec.tau_min);
    let survey = scaling_survey(&basis, &sec.points, &grid, sec.fit_points, sec.margin, cfg.mu)?;
    let rows: Vec<ScalingRow> = survey
        .iter()
        .map(|e| ScalingRow {
            a1: e.a[0].clone(),
            a2: e.a[1].clone(),
            b: e.b.clone(),
            expected: e.expected,
            slope: e.fit.slope,
            ci_low: e.fit.ci95.0,
            ci_high: e.fit.ci95.1,
            underflow: e.fit.underflow,
            passed: e.passed,
        })
        .collect();
    let mut out = Vec::new();
    match cfg.format {
        Format::Json => out.push(json(
            "scaling",
            &ScalingOutput {
                d_max: format_dim(&basis.d_max),
                points: sec.points,
                tau_grid: grid.clone(),
                fit_points: sec.fit_points,
                margin: sec.margin,
                total: rows.len(),
                failed: rows.iter().filter(|r| !r.passed).count(),
                entries: rows,
            },
        )),
        Format::Csv => out.push(csv("scaling", &rows)?),
    }
    if sec.curves {
        let curves: Vec<CurveRow> = survey
            .iter()
            .flat_map(|e| {
                e.fit.tau_grid.iter().zip(&e.fit.values).map(move |(&tau, &value)| CurveRow { a1: &e.a[0], a2: &e.a[1], b: &e.b, tau, value })
            })
            .collect();
        out.push(csv("scaling_curves", &curves)?);
    }
    Ok(out)
}

#[derive(Serialize)]
struct AssocOutput {
    a: [String; 3],
    b: String,
    points: [[f64; 4]; 3],
    monotone: bool,
    checks: Vec<AssociativityCheck>,
}

#[derive(Serialize)]
struct AssocRow {
    d_trunc: String,
    lhs: f64,
    rhs: f64,
    residual: f64,
    relative: f64,
    contributing: usize,
}

fn assoc(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let sec = cfg.assoc.as_ref().ok_or_else(|| missing_section("assoc"))?;
    let t = cfg.theory()?;
    let a = operators(&t, &sec.a)?;
    let a: [CompositeOperator; 3] = a.try_into().expect("three operators");
    let b = operator(&t, &sec.b)?;
    let dims = sec
        .d_trunc
        .iter()
        .map(|d| parse_dim(d).map_err(|e| CliError::config("CONFIG_INVALID", format!("assoc.d_trunc: {e}"))))
        .collect::<Result<Vec<Dim>, _>>()?;
    let checks = associativity_sweep(&t, &a, &b, &sec.points, &dims, cfg.mu)?;
    Ok(vec![match cfg.format {
        Format::Json => json(
            "assoc",
            &AssocOutput { a: sec.a.clone(), b: sec.b.clone(), points: sec.points, monotone: is_monotone(&checks), checks },
        ),
        Format::Csv => {
            let rows: Vec<AssocRow> = checks
                .iter()
                .map(|c| AssocRow {
                    d_trunc: format_dim(&c.d_trunc),
                    lhs: c.lhs,
                    rhs: c.rhs,
                    residual: c.residual,
                    relative: c.relative,
                    contributing: c.contributing,
                })
                .collect();
            csv("assoc", &rows)?
        }
    }])
}

#[derive(Serialize)]
struct CheckRow {
    group: &'static str,
    name: String,
    samples: usize,
    violations: usize,
    /// Worst ratio for inequalities, fitted constant for integration checks.
    statistic: f64,
    passed: bool,
}

#[derive(Serialize)]
struct TreesOutput {
    seed: u64,
    all_passed: bool,
    checks: Vec<CheckRow>,
    lemmas: Vec<lemmas::LemmaReport>,
    gs: Vec<crate::trees::GsReport>,
    integration: Vec<integration::FitReport>,
}

fn trees_check(cfg: &RunConfig) -> Result<Vec<Artifact>, CliError> {
    let sec = &cfg.trees;
    let lem = lemmas::all(sec.samples, cfg.seed);
    let gs = GsScan::default().all();
    let int = integration::all(sec.integration_samples_1d, sec.integration_samples_4d, cfg.seed);
    let mut rows = Vec::new();
    for r in &lem {
        rows.push(CheckRow { group: "tree", name: r.name.clone(), samples: r.samples, violations: r.violations, statistic: r.worst_ratio, passed: r.passed() });
    }
    for r in &gs {
        rows.push(CheckRow { group: "gs", name: r.name.to_string(), samples: r.cases as usize, violations: r.violations as usize, statistic: r.worst_excess, passed: r.passed() });
    }
    for r in &int {
        rows.push(CheckRow {
            group: "integration",
            name: r.name.to_string(),
            samples: r.samples,
            violations: usize::from(!r.passed()),
            statistic: r.fitted_constant,
            passed: r.passed(),
        });
    }
    Ok(vec![match cfg.format {
        Format::Json => json(
            "trees",
            &TreesOutput { seed: cfg.seed, all_passed: rows.iter().all(|r| r.passed), checks: rows, lemmas: lem, gs, integration: int },
        ),
        Format::Csv => csv("trees", &rows)?,
    }])
}
