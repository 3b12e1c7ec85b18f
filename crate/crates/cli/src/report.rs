// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Check tables: a fixed-order CSV plus a text summary.

use thiserror::Error;

use crate::output::real;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("report needs at least one check row")]
    Empty,
}

/// One measured quantity compared against its threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    /// Property name, e.g. `kernel_symmetry`.
    pub check: String,
    /// The scenario or sweep point the value belongs to.
    pub scenario: String,
    pub value: f64,
    pub threshold: f64,
    /// Comparison applied, e.g. `<=`.
    pub relation: &'static str,
    pub passed: bool,
}

impl CheckRow {
    /// `value <= threshold`.
    pub fn at_most(check: &str, scenario: &str, value: f64, threshold: f64) -> Self {
        CheckRow {
            check: check.into(),
            scenario: scenario.into(),
            value,
            threshold,
            relation: "<=",
            passed: value <= threshold,
        }
    }

    /// `value > threshold`.
    pub fn above(check: &str, scenario: &str, value: f64, threshold: f64) -> Self {
        CheckRow {
            check: check.into(),
            scenario: scenario.into(),
            value,
            threshold,
            relation: ">",
            passed: value > threshold,
        }
    }

    /// Boolean property encoded as value 1 (holds) or 0.
    pub fn holds(check: &str, scenario: &str, ok: bool) -> Self {
        CheckRow {
            check: check.into(),
            scenario: scenario.into(),
            value: if ok { 1.0 } else { 0.0 },
            threshold: 1.0,
            relation: "==",
            passed: ok,
        }
    }
}

pub const REPORT_HEADER: [&str; 6] = ["check", "scenario", "value", "relation", "threshold", "passed"];

/// CSV records and summary text for `rows`, in the given order.
pub fn report(rows: &[CheckRow]) -> Result<(Vec<Vec<String>>, String), ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let records = rows
        .iter()
        .map(|r| {
            vec![
                r.check.clone(),
                r.scenario.clone(),
                real(r.value),
                r.relation.into(),
                real(r.threshold),
                r.passed.to_string(),
            ]
        })
        .collect();
    let mut text = String::new();
    for r in rows {
        text.push_str(&format!(
            "{} {} [{}] value={} {} {}\n",
            if r.passed { "PASS" } else { "FAIL" },
            r.check,
            r.scenario,
            real(r.value),
            r.relation,
            real(r.threshold)
        ));
    }
    let failed: Vec<&CheckRow> = rows.iter().filter(|r| !r.passed).collect();
    if failed.is_empty() {
        text.push_str("ALL CHECKS PASSED\n");
    } else {
        text.push_str(&format!("{} OF {} CHECKS FAILED:", failed.len(), rows.len()));
        for r in failed {
            text.push_str(&format!(" {}@{}", r.check, r.scenario));
        }
        text.push('\n');
    }
    Ok((records, text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_pass_summary() {
        let rows = vec![
            CheckRow::at_most("kernel_symmetry", "K2", 1e-12, 1e-8),
            CheckRow::holds("global_envelope", "alpha=0.05", true),
        ];
        let (csv, text) = report(&rows).unwrap();
        assert_eq!(csv.len(), 2);
        assert!(text.ends_with("ALL CHECKS PASSED\n"));
    }

    #[test]
    fn failure_names_check_and_point() {
        let rows = vec![
            CheckRow::at_most("kernel_symmetry", "tree:d=3,r=6,mu=unit", 1e-3, 1e-8),
            CheckRow::above("kernel_positivity", "K2", 0.1, 0.0),
        ];
        let (_, text) = report(&rows).unwrap();
        assert!(text.contains("FAIL kernel_symmetry [tree:d=3,r=6,mu=unit]"));
        assert!(text.ends_with("1 OF 2 CHECKS FAILED: kernel_symmetry@tree:d=3,r=6,mu=unit\n"));
    }

    #[test]
    fn empty_rows_rejected() {
        assert_eq!(report(&[]), Err(ReportError::Empty));
    }
}
