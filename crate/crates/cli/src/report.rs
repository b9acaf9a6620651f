use std::fmt::Write as _;

use sepvar::geometry::Residual;
use sepvar::scalar::{Scalar, Tag};
use serde::{Deserialize, Serialize};

pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecRef {
    pub path: String,
    /// SHA-256 of the spec in its canonical JSON serialisation.
    pub sha256: String,
}

/// The largest residual of one suite and where it occurred.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualLine {
    pub name: String,
    pub value: String,
    pub magnitude: f64,
    /// Largest cancelled term, zero when the suite does not track one.
    pub scale: f64,
    pub index: Vec<usize>,
    /// Coordinates of the sample point where the maximum was reached.
    pub point: Option<Vec<String>>,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub report_version: u32,
    pub command: String,
    pub specs: Vec<SpecRef>,
    pub seed: u64,
    pub samples: usize,
    pub tag: Tag,
    pub tolerance: f64,
    pub ok: bool,
    pub residuals: Vec<ResidualLine>,
    #[serde(default)]
    pub data: serde_json::Value,
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}: {}", self.command, if self.ok { "ok" } else { "FAILED" });
        for s in &self.specs {
            let _ = writeln!(out, "spec {} sha256 {}", s.path, s.sha256);
        }
        for r in &self.residuals {
            let at = r.point.as_ref().map(|p| format!(" at ({})", p.join(", "))).unwrap_or_default();
            let flag = if r.ok { "" } else { "  <-- exceeds tolerance" };
            let _ = writeln!(out, "{:<28} {}{at}{flag}", r.name, r.value);
        }
        if !self.data.is_null() {
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&self.data).expect("data serializes"));
        }
        out
    }
}

/// Exact values as fractions, floats in exponent form without a zero
/// imaginary part.
pub fn show<S: Scalar + std::fmt::Display>(v: &S) -> String {
    match S::TAG {
        Tag::Exact => v.to_string(),
        Tag::Float => {
            let c = v.to_c64();
            if c.im == 0.0 {
                format!("{:e}", c.re)
            } else {
                format!("{:e}", c)
            }
        }
    }
}

/// Running maximum of one residual suite over the sample points.
pub struct Sweep<S> {
    pub name: String,
    pub worst: Residual<S>,
    pub point: Option<Vec<String>>,
}

impl<S: Scalar + std::fmt::Display> Sweep<S> {
    pub fn new(name: &str) -> Self {
        Sweep { name: name.into(), worst: Residual::default(), point: None }
    }

    pub fn update(&mut self, r: Residual<S>, point: &[S]) {
        let before = (self.worst.magnitude, self.worst.is_zero());
        let first = self.point.is_none();
        self.worst.merge(r);
        if first || (self.worst.magnitude, self.worst.is_zero()) != before {
            self.point = Some(point.iter().map(show).collect());
        }
    }

    pub fn line(&self, tol: f64) -> ResidualLine {
        let ok = match S::TAG {
            Tag::Exact => self.worst.is_zero(),
            Tag::Float => self.worst.relative() <= tol,
        };
        ResidualLine {
            name: self.name.clone(),
            value: show(&self.worst.worst),
            magnitude: self.worst.magnitude,
            scale: self.worst.scale,
            index: self.worst.index.clone(),
            point: self.point.clone(),
            ok,
        }
    }
}
