//! Result serialization: a fixed-format CSV of per-round metrics and a
//! JSON manifest mirroring the config plus a build identifier and the
//! final metrics.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use crate::error::Result;
use crate::sim::config::SimConfig;
use crate::sim::run::{RoundMetrics, RunOutput};

pub const CSV_HEADER: &str =
    "round,mean_acc,min_acc,max_acc,loss,rejected_count,t_cosine_ms,t_compare_ms,t_norm_ms";

/// Build identifier baked in at compile time; "unknown" outside a git
/// checkout.
pub fn build_id() -> &'static str {
    option_env!("GIT_DESCRIBE").unwrap_or("unknown")
}

/// Render metrics rows with fixed column formatting, so identical runs
/// produce byte-identical files.
pub fn csv_string(rounds: &[RoundMetrics]) -> String {
    let mut out = String::with_capacity(64 * (rounds.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for m in rounds {
        out.push_str(&format!(
            "{},{:.4},{:.4},{:.4},{:.6},{},{:.3},{:.3},{:.3}\n",
            m.round,
            m.mean_acc,
            m.min_acc,
            m.max_acc,
            m.loss,
            m.rejected_count,
            m.t_cosine_ms,
            m.t_compare_ms,
            m.t_norm_ms
        ));
    }
    out
}

pub fn write_csv(rounds: &[RoundMetrics], path: &Path) -> Result<()> {
    fs::write(path, csv_string(rounds))?;
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a SimConfig,
    seed: u64,
    build: &'static str,
    rounds_completed: usize,
    #[serde(rename = "final")]
    final_metrics: serde_json::Value,
}

pub fn json_string(out: &RunOutput) -> Result<String> {
    let f = out.final_metrics();
    let manifest = Manifest {
        config: &out.config,
        seed: out.config.seed,
        build: build_id(),
        rounds_completed: out.rounds.len(),
        final_metrics: json!({
            "mean_acc": f.mean_acc,
            "min_acc": f.min_acc,
            "max_acc": f.max_acc,
            "loss": f.loss,
            "rejected_count": f.rejected_count,
        }),
    };
    Ok(serde_json::to_string_pretty(&manifest)?)
}

pub fn write_json(out: &RunOutput, path: &Path) -> Result<()> {
    fs::write(path, json_string(out)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(round: usize) -> RoundMetrics {
        RoundMetrics {
            round,
            mean_acc: 0.52349,
            min_acc: 0.5,
            max_acc: 0.55,
            loss: 1.2345678,
            rejected_count: 3,
            t_cosine_ms: 12.3456,
            t_compare_ms: 0.789,
            t_norm_ms: 45.0,
        }
    }

    #[test]
    fn csv_has_the_documented_schema() {
        let text = csv_string(&[row(0), row(1)]);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(
            lines.next().unwrap(),
            "0,0.5235,0.5000,0.5500,1.234568,3,12.346,0.789,45.000"
        );
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn csv_is_reproducible() {
        let rows = vec![row(0), row(1), row(2)];
        assert_eq!(csv_string(&rows), csv_string(&rows));
    }

    #[test]
    fn json_mirrors_config_and_final_metrics() {
        let cfg = SimConfig::default();
        let out = RunOutput {
            config: cfg.clone(),
            rounds: vec![row(0)],
            final_models: Vec::new(),
            transcript: None,
        };
        let text = json_string(&out).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["seed"], cfg.seed);
        assert_eq!(v["config"]["clients"], cfg.clients);
        assert_eq!(v["final"]["rejected_count"], 3);
        assert!(v["build"].is_string());
        let back: SimConfig = serde_json::from_value(v["config"].clone()).unwrap();
        assert_eq!(back, cfg);
    }
}
