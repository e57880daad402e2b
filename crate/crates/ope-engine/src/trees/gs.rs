//! Large-momentum exponent `g^(s)([O], r, |w|)` and exhaustive property scans.

use serde::Serialize;

/// `([O]+s)(r+3s−3) + sup([O]+s−|w|, 0)`.
pub fn gs(s: u32, dim: f64, r: u32, w: u32) -> f64 {
    let a = dim + s as f64;
    a * (r as f64 + 3.0 * s as f64 - 3.0) + (a - w as f64).max(0.0)
}

/// Scan ranges: dimensions `0, ½, …, dim_max`, `r ≤ r_max`, `|w| ≤ w_max`, `1 ≤ s ≤ s_max`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GsScan {
    pub dim_max: f64,
    pub r_max: u32,
    pub w_max: u32,
    pub s_max: u32,
}

impl Default for GsScan {
    fn default() -> Self {
        GsScan { dim_max: 8.0, r_max: 10, w_max: 8, s_max: 4 }
    }
}

/// Outcome of one property scan.
#[derive(Clone, Debug, Serialize)]
pub struct GsReport {
    pub name: &'static str,
    pub cases: u64,
    pub violations: u64,
    /// Largest `lhs − rhs` seen (≤ 0 when the property holds).
    pub worst_excess: f64,
    pub first_violation: Option<String>,
    /// Violations with `r + 3s − 3 ≥ 1` for both factors (only meaningful for the product rule).
    pub violations_with_positive_r: u64,
}

impl GsReport {
    fn new(name: &'static str) -> Self {
        GsReport { name, cases: 0, violations: 0, worst_excess: f64::NEG_INFINITY, first_violation: None, violations_with_positive_r: 0 }
    }

    fn record(&mut self, lhs: f64, rhs: f64, describe: impl FnOnce() -> String) -> bool {
        self.cases += 1;
        let excess = lhs - rhs;
        self.worst_excess = self.worst_excess.max(excess);
        if excess > 1e-9 {
            self.violations += 1;
            if self.first_violation.is_none() {
                self.first_violation = Some(describe());
            }
            return true;
        }
        false
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

impl GsScan {
    fn dims(&self) -> Vec<f64> {
        (0..=(2.0 * self.dim_max).round() as u32).map(|k| k as f64 / 2.0).collect()
    }

    /// `g(r,|v|) ≤ g(r+1,|w|)` for `|v| ≤ |w|`.
    pub fn monotone_in_r(&self) -> GsReport {
        let mut rep = GsReport::new("gs_prop_1");
        for s in 1..=self.s_max {
            for &d in &self.dims() {
                for r in 0..=self.r_max {
                    for w in 0..=self.w_max {
                        for v in 0..=w {
                            rep.record(gs(s, d, r, v), gs(s, d, r + 1, w), || format!("s={s} [O]={d} r={r} |v|={v} |w|={w}"));
                        }
                    }
                }
            }
        }
        rep
    }

    /// `g(r,|w|) ≤ g(r,|v|)` for `|v| ≤ |w|`.
    pub fn decreasing_in_w(&self) -> GsReport {
        let mut rep = GsReport::new("gs_prop_1a");
        for s in 1..=self.s_max {
            for &d in &self.dims() {
                for r in 0..=self.r_max {
                    for w in 0..=self.w_max {
                        for v in 0..=w {
                            rep.record(gs(s, d, r, w), gs(s, d, r, v), || format!("s={s} [O]={d} r={r} |v|={v} |w|={w}"));
                        }
                    }
                }
            }
        }
        rep
    }

    /// `g(r,|w|+1) + 1 ≤ g(r,|w|)` for `|w| ≤ [O]+s−1`.
    pub fn unit_step(&self) -> GsReport {
        let mut rep = GsReport::new("gs_prop_2");
        for s in 1..=self.s_max {
            for &d in &self.dims() {
                for r in 0..=self.r_max {
                    for w in 0..=self.w_max {
                        if w as f64 > d + s as f64 - 1.0 {
                            continue;
                        }
                        rep.record(gs(s, d, r, w + 1) + 1.0, gs(s, d, r, w), || format!("s={s} [O]={d} r={r} |w|={w}"));
                    }
                }
            }
        }
        rep
    }

    /// `g(r,|w|) ≤ g(r+r′,|w|) − r′([O]+s)`.
    pub fn linear_in_r(&self) -> GsReport {
        let mut rep = GsReport::new("gs_prop_2a");
        for s in 1..=self.s_max {
            for &d in &self.dims() {
                for r in 0..=self.r_max {
                    for rp in 0..=self.r_max {
                        for w in 0..=self.w_max {
                            let rhs = gs(s, d, r + rp, w) - rp as f64 * (d + s as f64);
                            rep.record(gs(s, d, r, w), rhs, || format!("s={s} [O]={d} r={r} r'={rp} |w|={w}"));
                        }
                    }
                }
            }
        }
        rep
    }

    /// `g^(s)(O,r,|u|) + g^(s′)(O′,r′,|v|) ≤ g^(s+s′)(O+O′, r+r′−2, |w′|) − (O+O′+s+s′)`
    /// with `r + r′ ≥ 2`, so that the right side is defined.
    pub fn product_rule(&self) -> GsReport {
        let mut rep = GsReport::new("gs_prop_3");
        let dims = self.dims();
        for s in 1..=self.s_max {
            for sp in 1..=self.s_max {
                for &d in &dims {
                    for &dp in &dims {
                        for r in 0..=self.r_max {
                            for rp in 0..=self.r_max {
                                if r + rp < 2 {
                                    continue;
                                }
                                let positive = r + 3 * s >= 4 && rp + 3 * sp >= 4;
                                let tail = d + dp + (s + sp) as f64;
                                for wp in 0..=self.w_max {
                                    let rhs = gs(s + sp, d + dp, r + rp - 2, wp) - tail;
                                    for u in 0..=self.w_max {
                                        let gu = gs(s, d, r, u);
                                        for v in 0..=self.w_max {
                                            let bad = rep.record(gu + gs(sp, dp, rp, v), rhs, || {
                                                format!("s={s} s'={sp} [O]={d} [O']={dp} r={r} r'={rp} |u|={u} |v|={v} |w'|={wp}")
                                            });
                                            if bad && positive {
                                                rep.violations_with_positive_r += 1;
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        rep
    }

    pub fn all(&self) -> Vec<GsReport> {
        vec![self.monotone_in_r(), self.decreasing_in_w(), self.unit_step(), self.linear_in_r(), self.product_rule()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        // (4+1)(2+0) + 5
        assert_eq!(gs(1, 4.0, 2, 0), 15.0);
        assert_eq!(gs(1, 4.0, 0, 0), 5.0);
        // sup-term clamps once |w| ≥ [O]+s
        assert_eq!(gs(2, 1.0, 1, 3), 3.0 * 4.0);
        assert_eq!(gs(2, 1.0, 1, 7), 3.0 * 4.0);
    }

    #[test]
    fn small_scan_single_factor_properties() {
        let scan = GsScan { dim_max: 3.0, r_max: 4, w_max: 4, s_max: 2 };
        for rep in [scan.monotone_in_r(), scan.decreasing_in_w(), scan.unit_step(), scan.linear_in_r()] {
            assert!(rep.passed(), "{}: {:?}", rep.name, rep.first_violation);
        }
    }

    #[test]
    fn product_rule_fails_only_without_positive_r() {
        let scan = GsScan { dim_max: 2.0, r_max: 3, w_max: 3, s_max: 2 };
        let rep = scan.product_rule();
        assert!(rep.violations > 0);
        assert_eq!(rep.violations_with_positive_r, 0);
    }
}
