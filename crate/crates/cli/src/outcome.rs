//! What an experiment produces: verdicts, ladders, diagnostics and data files.

use serde::Serialize;
use serde_json::{Map, Value};

use fallgas::stats::{KsResult, LadderReport};

/// How `statistic` is compared with `target` and `tolerance`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// `|statistic - target| <= tolerance`
    Abs,
    /// `|statistic - target| <= tolerance * |target|`
    Rel,
    /// `statistic <= tolerance`
    AtMost,
    /// `statistic >= tolerance`
    AtLeast,
    /// `statistic < tolerance`
    Below,
    /// `statistic > tolerance`
    Above,
}

impl Rule {
    pub fn check(self, statistic: f64, target: f64, tolerance: f64) -> bool {
        match self {
            Rule::Abs => (statistic - target).abs() <= tolerance,
            Rule::Rel => (statistic - target).abs() <= tolerance * target.abs(),
            Rule::AtMost => statistic <= tolerance,
            Rule::AtLeast => statistic >= tolerance,
            Rule::Below => statistic < tolerance,
            Rule::Above => statistic > tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub criterion: String,
    pub statistic: f64,
    pub target: f64,
    pub tolerance: f64,
    pub rule: Rule,
    pub pass: bool,
}

impl Verdict {
    pub fn new(criterion: impl Into<String>, statistic: f64, target: f64, tolerance: f64, rule: Rule) -> Self {
        let pass = rule.check(statistic, target, tolerance);
        Verdict { criterion: criterion.into(), statistic, target, tolerance, rule, pass }
    }

    /// KS statistic against its critical value.
    pub fn ks(criterion: impl Into<String>, ks: &KsResult) -> Self {
        Self::new(criterion, ks.statistic, 0.0, ks.critical, Rule::AtMost)
    }

    /// KS statistic expected to exceed its critical value.
    pub fn ks_reject(criterion: impl Into<String>, ks: &KsResult) -> Self {
        Self::new(criterion, ks.statistic, 0.0, ks.critical, Rule::Above)
    }

    /// Counts ladder steps that fail to strictly decrease.
    pub fn decreasing(criterion: impl Into<String>, values: &[f64]) -> Self {
        let ups = values.windows(2).filter(|w| !(w[1] < w[0])).count();
        Self::new(criterion, ups as f64, 0.0, 0.0, Rule::AtMost)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LadderRow {
    pub rung: f64,
    pub statistic: f64,
    pub target: f64,
    pub se: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ladder {
    pub label: String,
    pub rows: Vec<LadderRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub verdicts: Vec<Verdict>,
    pub diagnostics: Map<String, Value>,
    pub ladders: Vec<Ladder>,
    pub artifacts: Vec<Artifact>,
}

impl Outcome {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn verdict(&mut self, v: Verdict) {
        self.verdicts.push(v);
    }

    pub fn diag(&mut self, key: impl Into<String>, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.diagnostics.insert(key.into(), v);
    }

    pub fn ladder(&mut self, label: impl Into<String>, rows: Vec<LadderRow>) {
        self.ladders.push(Ladder { label: label.into(), rows });
    }

    pub fn ladder_report(&mut self, prefix: &str, r: &LadderReport) {
        let rows = r
            .rungs
            .iter()
            .map(|g| LadderRow { rung: g.rung, statistic: g.statistic, target: g.target, se: g.se, error: g.error() })
            .collect();
        self.ladder(format!("{prefix}{}", r.label), rows);
    }

    pub fn artifact(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.artifacts.push(Artifact { name: name.into(), bytes });
    }

    /// Serializes `rows` as CSV with a header from the field names.
    pub fn csv<T: Serialize>(&mut self, name: impl Into<String>, rows: &[T]) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?;
        self.artifact(name, bytes);
        Ok(())
    }

    /// One JSON object per line.
    pub fn jsonl<T: Serialize>(&mut self, name: impl Into<String>, rows: &[T]) -> anyhow::Result<()> {
        let mut out = Vec::new();
        for r in rows {
            serde_json::to_writer(&mut out, r)?;
            out.push(b'\n');
        }
        self.artifact(name, out);
        Ok(())
    }

    pub fn find_verdict(&self, criterion: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.criterion == criterion)
    }
}

/// Relative error, or the absolute error for a zero target.
pub fn rel_err(x: f64, target: f64) -> f64 {
    if target == 0.0 {
        x.abs()
    } else {
        (x - target).abs() / target.abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules() {
        assert!(Rule::Abs.check(1.05, 1.0, 0.05 + 1e-12));
        assert!(!Rule::Rel.check(1.05, 1.0, 0.01));
        assert!(Rule::AtMost.check(0.0, 5.0, 0.0));
        assert!(!Rule::Below.check(0.0, 5.0, 0.0));
        assert!(Rule::Above.check(0.2, 0.0, 0.1));
    }

    #[test]
    fn decreasing_counts_ties() {
        assert!(Verdict::decreasing("x", &[3.0, 2.0, 1.0]).pass);
        let v = Verdict::decreasing("x", &[3.0, 3.0, 1.0]);
        assert_eq!(v.statistic, 1.0);
        assert!(!v.pass);
    }

    #[test]
    fn csv_header_and_rows() {
        #[derive(Serialize)]
        struct R {
            a: u32,
            b: f64,
        }
        let mut o = Outcome::default();
        o.csv("t.csv", &[R { a: 1, b: 0.5 }]).unwrap();
        assert_eq!(String::from_utf8(o.artifacts[0].bytes.clone()).unwrap(), "a,b\n1,0.5\n");
    }
}
