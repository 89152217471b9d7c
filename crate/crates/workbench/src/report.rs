//! Check records and their JSON and CSV renderings.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::io;

use num_complex::Complex64;
use serde::Serialize;

use crate::config::{ProblemConfig, Settings};

/// One numerical comparison. `error` is `|value − reference|`, divided by `|reference|` when
/// `relative` is set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub check_id: String,
    /// The identity being tested, in words.
    pub paper_ref: String,
    pub value: Complex64,
    pub reference: Complex64,
    pub error: f64,
    pub tolerance: f64,
    pub relative: bool,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn absolute(id: impl Into<String>, statement: impl Into<String>, value: Complex64, reference: Complex64, tolerance: f64) -> Self {
        let error = (value - reference).norm();
        Check::finish(id, statement, value, reference, error, tolerance, false)
    }

    pub fn relative(id: impl Into<String>, statement: impl Into<String>, value: Complex64, reference: Complex64, tolerance: f64) -> Self {
        let error = (value - reference).norm() / reference.norm();
        Check::finish(id, statement, value, reference, error, tolerance, true)
    }

    /// `|value| ≤ tolerance`.
    pub fn vanishes(id: impl Into<String>, statement: impl Into<String>, value: Complex64, tolerance: f64) -> Self {
        Check::absolute(id, statement, value, Complex64::new(0.0, 0.0), tolerance)
    }

    /// A check whose computation failed.
    pub fn failed(id: impl Into<String>, statement: impl Into<String>, tolerance: f64, err: impl Display) -> Self {
        let nan = Complex64::new(f64::NAN, f64::NAN);
        let mut c = Check::finish(id, statement, nan, nan, f64::NAN, tolerance, false);
        c.note = Some(err.to_string());
        c
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    fn finish(
        id: impl Into<String>,
        statement: impl Into<String>,
        value: Complex64,
        reference: Complex64,
        error: f64,
        tolerance: f64,
        relative: bool,
    ) -> Self {
        Check {
            check_id: id.into(),
            paper_ref: statement.into(),
            value,
            reference,
            error,
            tolerance,
            relative,
            pass: error <= tolerance,
            note: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub suite: String,
    pub settings: Settings,
    /// Problem files by name; empty for the built-in criteria.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub configs: BTreeMap<String, ProblemConfig>,
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(suite: impl Into<String>, settings: Settings, configs: BTreeMap<String, ProblemConfig>, checks: Vec<Check>) -> Self {
        let passed = checks.iter().filter(|c| c.pass).count();
        Report { suite: suite.into(), settings, configs, passed, failed: checks.len() - passed, checks }
    }

    pub fn all_pass(&self) -> bool {
        self.failed == 0
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("check_id,paper_ref,value,reference,tolerance,pass\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                csv_field(&c.check_id),
                csv_field(&c.paper_ref),
                complex_text(c.value),
                complex_text(c.reference),
                float_text(c.tolerance),
                c.pass
            ));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Seventeen significant digits.
pub fn float_text(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub fn complex_text(v: Complex64) -> String {
    if !v.re.is_finite() || !v.im.is_finite() {
        return "NaN".to_string();
    }
    let im = float_text(v.im);
    let sign = if im.starts_with('-') { "" } else { "+" };
    format!("{}{sign}{im}i", float_text(v.re))
}

/// Compact JSON writer printing every float with seventeen significant digits.
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter);
    value.serialize(&mut ser).expect("report serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}
