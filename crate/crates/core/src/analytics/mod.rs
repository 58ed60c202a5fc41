//! Sample-efficiency metrics, rank tests and reports over multi-seed experiments.

pub mod metrics;
pub mod report;
pub mod stats;

pub use metrics::{bin_generations, improvement_ratio, otp, sample_efficiency, GenerationSeries};
pub use report::{build_report, load_runs, write_report, Report};
pub use stats::{friedman, nemenyi, studentized_range_sf, wilcoxon_greater, StatTestResult};
