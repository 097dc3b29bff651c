//! The six-mode ablation driver.
//!
//! Each (mode, seed) run lives in `<out>/<run_name>/`. `accuracy.csv` is
//! written last, so its presence marks a finished run and a rerun picks
//! it up instead of training again.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{Mode, TrainConfig};
use super::emit::{accuracy_csv, iterations_csv, parse_accuracy_csv};
use crate::error::{Error, Result};
use crate::stats::{mean, std_dev};
use crate::trainer::{train, DomainAccuracy};

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub mode: Mode,
    pub domain: String,
    pub is_source: bool,
    pub seed: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub mode: Mode,
    pub domain: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Debug)]
pub struct RunFailure {
    pub mode: Mode,
    pub seed: u64,
    pub error: Error,
}

#[derive(Debug, Default)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    /// Runs reused from an earlier invocation.
    pub resumed: usize,
    pub failures: Vec<RunFailure>,
}

/// Pseudo-domain in the summary averaging every target domain per seed.
pub const TARGET_MEAN: &str = "target_mean";

impl AblationReport {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    /// Per-seed mean over target domains, in seed order.
    pub fn target_means(&self, mode: Mode) -> Vec<f64> {
        let mut seeds: Vec<u64> = self.rows.iter().filter(|r| r.mode == mode).map(|r| r.seed).collect();
        seeds.dedup();
        seeds
            .iter()
            .map(|&s| {
                let t: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.mode == mode && r.seed == s && !r.is_source)
                    .map(|r| r.accuracy)
                    .collect();
                mean(&t)
            })
            .collect()
    }

    pub fn mean_target_accuracy(&self, mode: Mode) -> f64 {
        mean(&self.target_means(mode))
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut out = Vec::new();
        for mode in Mode::ABLATION {
            let mut domains: Vec<&str> = Vec::new();
            for r in self.rows.iter().filter(|r| r.mode == mode) {
                if !domains.contains(&r.domain.as_str()) {
                    domains.push(&r.domain);
                }
            }
            for d in domains {
                let acc: Vec<f64> =
                    self.rows.iter().filter(|r| r.mode == mode && r.domain == d).map(|r| r.accuracy).collect();
                out.push(SummaryRow {
                    mode,
                    domain: d.to_string(),
                    mean: mean(&acc),
                    std: std_dev(&acc),
                    n: acc.len(),
                });
            }
            let t = self.target_means(mode);
            if !t.is_empty() {
                out.push(SummaryRow { mode, domain: TARGET_MEAN.into(), mean: mean(&t), std: std_dev(&t), n: t.len() });
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("mode,domain,seed,accuracy\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.mode, r.domain, r.seed, r.accuracy);
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("mode,domain,mean,std,n\n");
        for r in self.summary() {
            let _ = writeln!(s, "{},{},{},{},{}", r.mode, r.domain, r.mean, r.std, r.n);
        }
        s
    }
}

pub fn run_dir(out_dir: &Path, cfg: &TrainConfig) -> PathBuf {
    out_dir.join(cfg.run_name())
}

/// Train one run (or reuse a finished one) and write its directory.
/// Returns the accuracies and whether they were reused.
pub fn run_or_resume(cfg: &TrainConfig, out_dir: &Path) -> Result<(Vec<DomainAccuracy>, bool)> {
    let dir = run_dir(out_dir, cfg);
    let acc_path = dir.join("accuracy.csv");
    if acc_path.exists() {
        return Ok((parse_accuracy_csv(&fs::read_to_string(&acc_path)?)?, true));
    }
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.txt"), cfg.to_kv_text())?;
    let result = train(cfg)?;
    fs::write(dir.join("iterations.csv"), iterations_csv(&result.iterations))?;
    let tmp = dir.join("accuracy.csv.tmp");
    fs::write(&tmp, accuracy_csv(&result.accuracies))?;
    fs::rename(&tmp, &acc_path)?;
    Ok((result.accuracies, false))
}

/// Run every ablation mode for every seed, writing `ablation.csv` and
/// `ablation_summary.csv` into `out_dir`. Failed runs are collected in the
/// report and the remaining runs still execute.
pub fn run_ablation(base: &TrainConfig, seeds: &[u64], out_dir: &Path) -> Result<AblationReport> {
    if seeds.is_empty() {
        return Err(Error::config("seeds", "at least one seed is required"));
    }
    let mut report = AblationReport::default();
    for mode in Mode::ABLATION {
        for &seed in seeds {
            let mut cfg = base.clone();
            cfg.mode = mode;
            cfg.seed = seed;
            cfg.data.seed = seed;
            match run_or_resume(&cfg, out_dir) {
                Ok((acc, resumed)) => {
                    report.resumed += usize::from(resumed);
                    report.rows.extend(acc.into_iter().map(|a| AblationRow {
                        mode,
                        domain: a.domain,
                        is_source: a.is_source,
                        seed,
                        accuracy: a.accuracy,
                    }));
                }
                Err(error) => report.failures.push(RunFailure { mode, seed, error }),
            }
        }
    }
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("ablation.csv"), report.to_csv())?;
    fs::write(out_dir.join("ablation_summary.csv"), report.summary_csv())?;
    Ok(report)
}
