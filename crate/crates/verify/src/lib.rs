//! Verification suite for `fraccd`: independent oracles, the acceptance
//! criteria and the per-module invariant checks run by `fraccd verify`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::time::Instant;

pub mod criteria;
pub mod invariants;
pub mod oracles;

/// `Ok(detail)` on pass, `Err(detail)` on failure.
pub type Outcome = Result<String, String>;

#[derive(Debug, Clone, Copy)]
pub struct Check {
    pub name: &'static str,
    pub module: &'static str,
    pub run: fn() -> Outcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub module: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed_s: f64,
}

/// Modules that own at least one check.
pub const MODULES: [&str; 7] = ["core", "data", "scalar", "cd", "problems", "baselines", "stationarity"];

/// Name of the kinked-example golden check, the one acceptance criterion
/// that is part of the default suite.
pub const GOLDEN_CHECK: &str = "criterion-1-kinked-golden";

/// Every check, grouped by module in [`MODULES`] order.
pub fn registry() -> Vec<Check> {
    suite(true)
}

/// The invariant checks and the golden check, plus the remaining acceptance
/// criteria when `acceptance` is set (those take minutes).
pub fn suite(acceptance: bool) -> Vec<Check> {
    let mut all = invariants::checks();
    all.extend(criteria::checks().into_iter().filter(|c| acceptance || c.name == GOLDEN_CHECK));
    all.sort_by_key(|c| MODULES.iter().position(|m| *m == c.module).unwrap_or(MODULES.len()));
    all
}

/// Checks of one module, or all of them.
pub fn select(only: Option<&str>, acceptance: bool) -> Result<Vec<Check>, String> {
    let all = suite(acceptance);
    match only {
        None => Ok(all),
        Some(m) if MODULES.contains(&m) => Ok(all.into_iter().filter(|c| c.module == m).collect()),
        Some(m) => Err(format!("unknown module '{m}', expected one of {}", MODULES.join(", "))),
    }
}

pub fn run_check(check: &Check) -> CheckResult {
    let start = Instant::now();
    let outcome = (check.run)();
    let elapsed_s = start.elapsed().as_secs_f64();
    let (passed, detail) = match outcome {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    CheckResult {
        name: check.name,
        module: check.module,
        passed,
        detail,
        elapsed_s,
    }
}

/// `Ok` when `cond` holds, with the same message either way.
pub fn outcome(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn module_filter() {
        let only = select(Some("stationarity"), false).unwrap();
        assert!(!only.is_empty());
        assert!(only.iter().all(|c| c.module == "stationarity"));
        assert!(only.iter().any(|c| c.name == GOLDEN_CHECK));
        assert!(select(Some("nope"), false).is_err());
        assert_eq!(select(None, true).unwrap().len(), registry().len());
        let quick = select(None, false).unwrap();
        assert_eq!(quick.len(), invariants::checks().len() + 1);
    }

    #[test]
    fn check_names_are_unique() {
        let mut names: Vec<_> = registry().iter().map(|c| c.name).collect();
        names.sort();
        let before = names.len();
        names.dedup();
        assert_eq!(names.len(), before);
    }

    #[test]
    fn slope_of_a_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 2.0 * x).collect();
        assert!((ls_slope(&xs, &ys) + 2.0).abs() < 1e-12);
    }
}
