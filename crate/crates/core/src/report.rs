//! Suite results and their serializations: the fixed-schema CSV and the
//! single-line key=value records the CLI prints.

use crate::error::Result;
use crate::group::{fmt_float, Group};
use std::path::Path;

/// What kind of claim a row checks.
///
/// `Identity` rows hold up to floating-point roundoff, `AnalyticBound` rows
/// follow from a derivation with explicit slack, `Regression` rows pin
/// previously observed constants, and `Diagnostic` rows must *exceed* their
/// bound (they certify that a counterexample misbehaves).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckClass {
    Identity,
    AnalyticBound,
    Regression,
    Diagnostic,
}

impl CheckClass {
    pub fn name(self) -> &'static str {
        match self {
            CheckClass::Identity => "identity",
            CheckClass::AnalyticBound => "analytic_bound",
            CheckClass::Regression => "regression",
            CheckClass::Diagnostic => "diagnostic",
        }
    }

    /// Pass decision for a value against a bound under this class.
    pub fn passes(self, value: f64, bound: f64) -> bool {
        match self {
            CheckClass::Diagnostic => value >= bound,
            _ => value <= bound,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub suite: String,
    pub group: Group,
    pub class: CheckClass,
    pub beta: f64,
    pub p: f64,
    pub q: f64,
    pub lambda: f64,
    pub mu: f64,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
    pub runtime_ms: u64,
    /// Free-form context (symbol and test-function ids, witnesses); kept out
    /// of the CSV.
    pub detail: String,
    /// Stable key for matching the same check across lattices; never
    /// serialized.
    pub tag: String,
}

impl CheckReport {
    pub fn tagged(mut self, tag: &str) -> CheckReport {
        self.tag = tag.to_string();
        self
    }

    pub fn record_line(&self) -> String {
        format!(
            "suite={} group={} class={} beta={} p={} q={} lambda={} mu={} value={} bound={} pass={} detail={}",
            self.suite,
            self.group.name(),
            self.class.name(),
            fmt_float(self.beta),
            fmt_float(self.p),
            fmt_float(self.q),
            fmt_float(self.lambda),
            fmt_float(self.mu),
            fmt_float(self.value),
            fmt_float(self.bound),
            self.pass,
            self.detail,
        )
    }

    /// Self-contained record, one key=value field per line. Records are
    /// separated by blank lines in report files.
    pub fn record_block(&self) -> String {
        format!(
            "suite={}\ngroup={}\nclass={}\nbeta={}\np={}\nq={}\nlambda={}\nmu={}\nvalue={}\nbound={}\npass={}\nruntime_ms={}\ndetail={}\n",
            self.suite,
            self.group.name(),
            self.class.name(),
            fmt_float(self.beta),
            fmt_float(self.p),
            fmt_float(self.q),
            fmt_float(self.lambda),
            fmt_float(self.mu),
            fmt_float(self.value),
            fmt_float(self.bound),
            self.pass,
            self.runtime_ms,
            self.detail,
        )
    }
}

pub const CSV_HEADER: &str = "suite,group,beta,p,q,lambda,mu,value,bound,pass,runtime_ms";

pub fn csv_string(reports: &[CheckReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.suite,
            r.group.name(),
            fmt_float(r.beta),
            fmt_float(r.p),
            fmt_float(r.q),
            fmt_float(r.lambda),
            fmt_float(r.mu),
            fmt_float(r.value),
            fmt_float(r.bound),
            r.pass,
            r.runtime_ms,
        ));
    }
    out
}

pub fn write_csv(path: &Path, reports: &[CheckReport]) -> Result<()> {
    std::fs::write(path, csv_string(reports))?;
    Ok(())
}

/// One line of the `norm` subcommand output.
pub fn norm_record(name: &str, value: f64, family: &str, exhaustive: bool) -> String {
    format!(
        "name={name} value={} family={family} exhaustive={exhaustive}",
        fmt_float(value)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> CheckReport {
        CheckReport {
            suite: "pointwise_domination".to_string(),
            group: Group::Heisenberg1,
            class: CheckClass::AnalyticBound,
            beta: 0.5,
            p: 0.0,
            q: 0.0,
            lambda: 0.0,
            mu: 0.0,
            value: 0.75,
            tag: String::new(),
            bound: 1.0,
            pass: true,
            runtime_ms: 12,
            detail: "symbol=power_gauge(beta=0.5)".to_string(),
        }
    }

    #[test]
    fn csv_has_the_fixed_header_and_one_row_per_report() {
        let text = csv_string(&[sample_report()]);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let row = lines.next().unwrap();
        assert!(row.starts_with("pointwise_domination,heisenberg1,"));
        assert!(row.ends_with(",true,12"));
        assert_eq!(row.split(',').count(), 11);
        assert!(lines.next().is_none());
    }

    #[test]
    fn diagnostic_rows_pass_by_exceeding_the_bound() {
        assert!(CheckClass::Diagnostic.passes(5.0, 4.0));
        assert!(!CheckClass::Diagnostic.passes(3.0, 4.0));
        assert!(CheckClass::Identity.passes(0.0, 1e-13));
        assert!(!CheckClass::Regression.passes(2.0, 1.0));
    }

    #[test]
    fn norm_record_shape() {
        let line = norm_record("lp", 1.5, "dyadic(r0=0.5,k=1)", true);
        assert_eq!(
            line,
            format!("name=lp value={} family=dyadic(r0=0.5,k=1) exhaustive=true", fmt_float(1.5))
        );
    }
}
