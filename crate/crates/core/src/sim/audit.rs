//! Statistical audit of opened protocol values.
//!
//! Every masked opening the protocols perform is supposed to look uniform
//! over the ring; anything else would leak input-dependent structure to the
//! observing parties. The audit bins the low byte of each tagged opened
//! word into 256 buckets and applies a chi-square goodness-of-fit test
//! against the uniform distribution.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mpc::{OpeningKind, Transcript};

/// Chi-square statistic of `counts` against a uniform expectation.
///
/// Returns 0 for an empty sample: no openings means nothing to flag.
pub fn chi_square_stat(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let expected = total as f64 / counts.len() as f64;
    counts
        .iter()
        .map(|&obs| {
            let diff = obs as f64 - expected;
            diff * diff / expected
        })
        .sum()
}

/// Upper critical value of the chi-square distribution with `df` degrees of
/// freedom at significance `alpha`, via the Wilson-Hilferty cube
/// approximation (accurate to well under 0.1% at df >= 100).
///
/// Supported alpha levels: 0.05, 0.01, 0.001.
pub fn chi_square_critical(df: u64, alpha: f64) -> f64 {
    let z = match (alpha * 1000.0).round() as i64 {
        50 => 1.644854,
        10 => 2.326348,
        1 => 3.090232,
        _ => panic!("unsupported alpha {alpha}; use 0.05, 0.01 or 0.001"),
    };
    let df = df as f64;
    let t = 2.0 / (9.0 * df);
    df * (1.0 - t + z * t.sqrt()).powi(3)
}

/// Chi-square verdict for one opening kind (or the pooled histogram).
#[derive(Clone, Copy, Debug)]
pub struct KindAudit {
    pub kind: Option<OpeningKind>,
    pub count: u64,
    pub stat: f64,
    pub critical: f64,
    pub passed: bool,
}

/// Uniformity audit over a transcript's masked openings.
#[derive(Clone, Debug)]
pub struct AuditReport {
    pub alpha: f64,
    /// Per-kind verdicts for every masked kind that actually appeared.
    pub kinds: Vec<KindAudit>,
    /// Verdict over all masked openings pooled together.
    pub pooled: KindAudit,
    pub passed: bool,
}

impl AuditReport {
    /// Human-readable table, one line per kind plus the pooled verdict.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:>12} {:>12} {:>12}  verdict",
            "opening kind", "samples", "chi2", "critical"
        );
        for k in self.kinds.iter().chain([&self.pooled]) {
            let name = match k.kind {
                Some(kind) => format!("{kind:?}"),
                None => "all masked".into(),
            };
            let _ = writeln!(
                out,
                "{:<16} {:>12} {:>12.2} {:>12.2}  {}",
                name,
                k.count,
                k.stat,
                k.critical,
                if k.passed { "pass" } else { "FAIL" }
            );
        }
        let _ = writeln!(
            out,
            "overall: {} at alpha {}",
            if self.passed { "pass" } else { "FAIL" },
            self.alpha
        );
        out
    }
}

/// Audit every masked opening kind in `t` at significance `alpha`
/// (0.05, 0.01 or 0.001). Kinds with no samples are skipped; the report
/// fails if any present kind, or the pooled histogram, fails.
pub fn audit_transcript(t: &Transcript, alpha: f64) -> Result<AuditReport> {
    if ![0.05, 0.01, 0.001]
        .iter()
        .any(|a| (a - alpha).abs() < 1e-12)
    {
        return Err(Error::Config(format!(
            "unsupported significance {alpha}; use 0.05, 0.01 or 0.001"
        )));
    }
    let critical = chi_square_critical(255, alpha);
    let verdict = |kind: Option<OpeningKind>, count: u64, hist: &[u64; 256]| {
        let stat = chi_square_stat(hist);
        KindAudit {
            kind,
            count,
            stat,
            critical,
            passed: stat < critical,
        }
    };
    let mut kinds = Vec::new();
    for kind in [
        OpeningKind::BeaverDelta,
        OpeningKind::BeaverEpsilon,
        OpeningKind::TruncMask,
        OpeningKind::CompareMask,
    ] {
        let count = t.count(kind);
        if count == 0 {
            continue;
        }
        let hist = t.kind_histogram(kind).expect("masked kind has a histogram");
        kinds.push(verdict(Some(kind), count, hist));
    }
    let pooled = verdict(None, t.total_masked(), &t.masked_histogram());
    let passed = pooled.passed && kinds.iter().all(|k| k.passed);
    Ok(AuditReport {
        alpha,
        kinds,
        pooled,
        passed,
    })
}
