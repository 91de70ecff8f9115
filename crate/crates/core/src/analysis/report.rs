use std::fmt::Write as _;

use crate::dynamics::StatSeries;
use crate::error::{Error, Result};
use crate::measures::fmt_f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckOp {
    Le,
    Ge,
}

impl CheckOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CheckOp::Le => "<=",
            CheckOp::Ge => ">=",
        }
    }

    fn key(self) -> &'static str {
        match self {
            CheckOp::Le => "le",
            CheckOp::Ge => "ge",
        }
    }
}

/// One numeric criterion: `value op threshold`. Skipped checks (e.g. a
/// vacuous bound) are reported but excluded from the verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub op: CheckOp,
    pub threshold: f64,
    pub skipped: bool,
}

impl Check {
    pub fn le(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, op: CheckOp::Le, threshold, skipped: false }
    }

    pub fn ge(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, op: CheckOp::Ge, threshold, skipped: false }
    }

    pub fn skip(mut self) -> Self {
        self.skipped = true;
        self
    }

    pub fn passed(&self) -> bool {
        match self.op {
            CheckOp::Le => self.value <= self.threshold,
            CheckOp::Ge => self.value >= self.threshold,
        }
    }

    /// Signed distance to the threshold, positive when passing.
    pub fn margin(&self) -> f64 {
        match self.op {
            CheckOp::Le => self.threshold - self.value,
            CheckOp::Ge => self.value - self.threshold,
        }
    }
}

/// A self-contained experiment record: everything needed to recompute the
/// verdict is stored alongside it.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    pub game: String,
    pub parameters: Vec<(String, String)>,
    pub measured: Vec<(String, f64)>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    /// Raw series the checks were derived from (not part of the summary file).
    pub series: Vec<StatSeries>,
    pub passed: bool,
}

fn clean(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}

impl ExperimentReport {
    pub fn new(name: &str, game: &str) -> Self {
        Self {
            name: name.into(),
            game: game.into(),
            parameters: Vec::new(),
            measured: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            series: Vec::new(),
            passed: true,
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.parameters.push((key.into(), value.to_string()));
        self
    }

    pub fn measure(&mut self, key: &str, value: f64) -> &mut Self {
        self.measured.push((key.into(), value));
        self
    }

    pub fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.notes.push(text.into());
        self
    }

    pub fn check(&mut self, c: Check) -> &mut Self {
        self.checks.push(c);
        self
    }

    pub fn parameter(&self, key: &str) -> Option<&str> {
        self.parameters.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn measured(&self, key: &str) -> Option<f64> {
        self.measured.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn series(&self, label: &str) -> Option<&StatSeries> {
        self.series.iter().find(|s| s.label == label)
    }

    /// The verdict implied by the stored checks.
    pub fn verdict(&self) -> bool {
        self.checks.iter().filter(|c| !c.skipped).all(Check::passed)
    }

    pub(crate) fn finish(mut self) -> Self {
        self.passed = self.verdict();
        self
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment: {}", self.name);
        let _ = writeln!(s, "game:       {}", self.game);
        if !self.parameters.is_empty() {
            let _ = writeln!(s, "parameters:");
            for (k, v) in &self.parameters {
                let _ = writeln!(s, "  {k} = {v}");
            }
        }
        if !self.measured.is_empty() {
            let _ = writeln!(s, "measured:");
            for (k, v) in &self.measured {
                let _ = writeln!(s, "  {k} = {v:.6e}");
            }
        }
        let _ = writeln!(s, "checks:");
        for c in &self.checks {
            let status = if c.skipped {
                "SKIP"
            } else if c.passed() {
                "PASS"
            } else {
                "FAIL"
            };
            let _ = writeln!(
                s,
                "  [{status}] {}: {:.6e} {} {:.6e} (margin {:+.3e})",
                c.name,
                c.value,
                c.op.symbol(),
                c.threshold,
                c.margin()
            );
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        let _ = writeln!(s, "verdict: {}", if self.passed { "PASS" } else { "FAIL" });
        s
    }

    /// Line-oriented `key=value` summary.
    pub fn to_summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name={}", clean(&self.name));
        let _ = writeln!(s, "game={}", clean(&self.game));
        for (k, v) in &self.parameters {
            let _ = writeln!(s, "param.{}={}", clean(k), clean(v));
        }
        for (k, v) in &self.measured {
            let _ = writeln!(s, "measured.{}={}", clean(k), fmt_f64(*v));
        }
        for (i, c) in self.checks.iter().enumerate() {
            let _ = writeln!(s, "check.{i}.name={}", clean(&c.name));
            let _ = writeln!(s, "check.{i}.value={}", fmt_f64(c.value));
            let _ = writeln!(s, "check.{i}.op={}", c.op.key());
            let _ = writeln!(s, "check.{i}.threshold={}", fmt_f64(c.threshold));
            let _ = writeln!(s, "check.{i}.skipped={}", c.skipped);
            let _ = writeln!(s, "check.{i}.passed={}", c.passed());
        }
        for n in &self.notes {
            let _ = writeln!(s, "note={}", clean(n));
        }
        let _ = writeln!(s, "verdict={}", if self.passed { "pass" } else { "fail" });
        s
    }

    /// Parses a summary back; raw series are not part of the summary.
    pub fn from_summary(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidArgument(format!("summary: {msg}"));
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad(format!("'{v}' is not a number")));
        let mut r = ExperimentReport::new("", "");
        let mut verdict = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("line without '=': {line}")))?;
            if let Some(p) = k.strip_prefix("param.") {
                r.parameters.push((p.into(), v.into()));
            } else if let Some(m) = k.strip_prefix("measured.") {
                r.measured.push((m.into(), num(v)?));
            } else if let Some(c) = k.strip_prefix("check.") {
                let (idx, field) = c.split_once('.').ok_or_else(|| bad(format!("bad check key {k}")))?;
                let idx: usize = idx.parse().map_err(|_| bad(format!("bad check index in {k}")))?;
                if idx == r.checks.len() {
                    r.checks.push(Check::le("", 0.0, 0.0));
                } else if idx > r.checks.len() {
                    return Err(bad(format!("check index {idx} out of order")));
                }
                let ch = &mut r.checks[idx];
                match field {
                    "name" => ch.name = v.into(),
                    "value" => ch.value = num(v)?,
                    "threshold" => ch.threshold = num(v)?,
                    "op" => {
                        ch.op = match v {
                            "le" => CheckOp::Le,
                            "ge" => CheckOp::Ge,
                            _ => return Err(bad(format!("unknown op {v}"))),
                        }
                    }
                    "skipped" => ch.skipped = v == "true",
                    "passed" => {}
                    _ => return Err(bad(format!("unknown check field {field}"))),
                }
            } else {
                match k {
                    "name" => r.name = v.into(),
                    "game" => r.game = v.into(),
                    "note" => r.notes.push(v.into()),
                    "verdict" => verdict = Some(v == "pass"),
                    _ => return Err(bad(format!("unknown key {k}"))),
                }
            }
        }
        r.passed = verdict.ok_or_else(|| bad("missing verdict".into()))?;
        Ok(r)
    }
}
