//! Simulation harness: configuration, round loop, metric emission,
//! primitive benchmarks and transcript auditing.

pub mod audit;
pub mod bench;
pub mod config;
pub mod emit;
pub mod run;

pub use audit::{audit_transcript, AuditReport, KindAudit};
pub use bench::{bench_ops, BenchRow};
pub use config::{DatasetChoice, Rule, SimConfig};
pub use emit::{csv_string, json_string, write_csv, write_json};
pub use run::{load_data, mnist_dir, run, run_streaming, run_with_data, RoundMetrics, RunOutput};
