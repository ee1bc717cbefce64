//! Cross-method comparison of a result set.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{RegimeTag, Tolerances};
use crate::harness::run::{Method, ResultRow, ResultSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub quantity: String,
    pub bound: f64,
    pub horizon: Option<f64>,
    pub reference: String,
    pub reference_value: f64,
    pub other: String,
    pub other_value: f64,
    pub delta: f64,
    pub combined_stderr: f64,
    pub allowed: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub comparisons: Vec<Comparison>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.comparisons.iter().all(|c| c.pass)
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<14} {:>7} {:>8} {:<28} {:<28} {:>10} {:>10} {}",
            "quantity", "bound", "horizon", "reference", "other", "delta", "allowed", "verdict"
        );
        for c in &self.comparisons {
            let _ = writeln!(
                s,
                "{:<14} {:>7} {:>8} {:<28} {:<28} {:>10.6} {:>10.6} {}",
                c.quantity,
                c.bound,
                c.horizon.map(|h| h.to_string()).unwrap_or_default(),
                format!("{} {:.6}", c.reference, c.reference_value),
                format!("{} {:.6}", c.other, c.other_value),
                c.delta,
                c.allowed,
                if c.pass { "pass" } else { "FAIL" }
            );
        }
        s
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "quantity,bound,horizon,reference,reference_value,other,other_value,delta,combined_stderr,allowed,pass")?;
        for c in &self.comparisons {
            writeln!(
                w,
                "{},{:.16e},{},{},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                c.quantity,
                c.bound,
                c.horizon.map(|h| format!("{h:.16e}")).unwrap_or_default(),
                c.reference,
                c.reference_value,
                c.other,
                c.other_value,
                c.delta,
                c.combined_stderr,
                c.allowed,
                c.pass
            )?;
        }
        Ok(())
    }
}

fn tag(r: &ResultRow) -> String {
    if r.estimator == r.method.tag().to_ascii_lowercase() {
        r.method.tag().to_string()
    } else {
        format!("{}/{}", r.method.tag(), r.estimator)
    }
}

fn rank(r: &ResultRow) -> (u8, bool) {
    let m = match r.method {
        Method::Pde => 0,
        Method::Sup => 1,
        Method::Mc => 2,
    };
    (m, r.estimator != r.method.tag().to_ascii_lowercase())
}

/// Pairs rows of the same quantity, bound, family and (for transient
/// quantities) horizon that come from different estimators. The reference
/// of a pair is the PDE row if there is one, then SUP, then direct MC.
pub fn compare_report(results: &ResultSet, tolerances: &Tolerances) -> Result<Report> {
    let same_point = |a: &ResultRow, b: &ResultRow| {
        a.quantity == b.quantity
            && a.family == b.family
            && a.bound == b.bound
            && a.regime == b.regime
            && (a.regime == RegimeTag::LongRun || a.horizon == b.horizon)
    };
    let mut comparisons = vec![];
    for (i, a) in results.rows.iter().enumerate() {
        for b in &results.rows[i + 1..] {
            if !same_point(a, b) || tag(a) == tag(b) {
                continue;
            }
            let (r, o) = if rank(a) <= rank(b) { (a, b) } else { (b, a) };
            let se = (r.stderr.unwrap_or(0.0).powi(2) + o.stderr.unwrap_or(0.0).powi(2)).sqrt();
            let tol = tolerances.for_quantity(&r.quantity);
            let delta = (r.value - o.value).abs();
            let allowed = tol.allowed(r.value, se);
            comparisons.push(Comparison {
                quantity: r.quantity.clone(),
                bound: r.bound,
                horizon: if r.regime == RegimeTag::Transient { r.horizon } else { None },
                reference: tag(r),
                reference_value: r.value,
                other: tag(o),
                other_value: o.value,
                delta,
                combined_stderr: se,
                allowed,
                pass: delta <= allowed,
            });
        }
    }
    if comparisons.is_empty() {
        return Err(Error::NoComparablePairs);
    }
    Ok(Report { comparisons })
}
