//! CSV and SVG emission for runs, the flow-channel plot and loss curves.
//!
//! Floats are written with Rust's shortest round-trip formatting, so the
//! same run always produces the same bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::svg::{line_plot, ramp_scatter, Plot, Series};
use crate::error::{Error, Result};
use crate::stats::trailing_mean;
use crate::trainer::{DomainAccuracy, IterationSummary, MetricsRecord};

pub const FLOW_WINDOW: usize = 50;
pub const LOSS_SMOOTHING: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowWindow {
    pub window_start_iter: usize,
    pub mean_m_c: f64,
    pub mean_degree: f64,
    pub mean_applied_rate: f64,
}

/// Consecutive windows of `window` iterations; a trailing partial window is kept.
pub fn flow_windows(log: &[IterationSummary], window: usize) -> Result<Vec<FlowWindow>> {
    if log.is_empty() {
        return Err(Error::Format("flow channel needs a non-empty iteration log".into()));
    }
    if window == 0 {
        return Err(Error::invalid("window must be positive"));
    }
    Ok(log
        .chunks(window)
        .map(|c| {
            let n = c.len() as f64;
            FlowWindow {
                window_start_iter: c[0].iter,
                mean_m_c: c.iter().map(|i| i.m_c).sum::<f64>() / n,
                mean_degree: c.iter().map(|i| i.mean_degree).sum::<f64>() / n,
                mean_applied_rate: c.iter().map(|i| i.applied_rate).sum::<f64>() / n,
            }
        })
        .collect())
}

pub fn flow_channel_csv(rows: &[FlowWindow]) -> String {
    let mut s = String::from("window_start_iter,mean_m_c,mean_degree,mean_applied_rate\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.window_start_iter, r.mean_m_c, r.mean_degree, r.mean_applied_rate);
    }
    s
}

/// Write `flow_channel.csv` and `flow_channel.svg` into `dir`.
pub fn emit_flow_channel(dir: &Path, log: &[IterationSummary], timestamp: Option<String>) -> Result<Vec<FlowWindow>> {
    let rows = flow_windows(log, FLOW_WINDOW)?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("flow_channel.csv"), flow_channel_csv(&rows))?;
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.mean_m_c, r.mean_applied_rate)).collect();
    let svg = ramp_scatter(
        &Plot {
            title: "Capability vs augmentation rate (red: early, blue: late)",
            x_label: "mean capability M_c",
            y_label: "mean applied augmentation rate",
            timestamp,
        },
        &pts,
    );
    fs::write(dir.join("flow_channel.svg"), svg)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossCurveRow {
    pub iter: usize,
    pub loss_no_da: f64,
    pub loss_modify: f64,
    pub loss_strong_da: f64,
}

fn losses(log: &[IterationSummary]) -> Vec<f64> {
    log.iter().map(|i| i.mean_loss).collect()
}

/// Trailing-mean smoothed per-iteration losses of three runs of equal length.
pub fn loss_curves(
    no_da: &[IterationSummary],
    modify: &[IterationSummary],
    strong_da: &[IterationSummary],
    window: usize,
) -> Result<Vec<LossCurveRow>> {
    if no_da.len() != modify.len() || modify.len() != strong_da.len() {
        return Err(Error::Format(format!(
            "loss curves need equal-length runs, got {}, {} and {} iterations",
            no_da.len(),
            modify.len(),
            strong_da.len()
        )));
    }
    let (a, b, c) = (
        trailing_mean(&losses(no_da), window),
        trailing_mean(&losses(modify), window),
        trailing_mean(&losses(strong_da), window),
    );
    Ok((0..a.len())
        .map(|i| LossCurveRow { iter: no_da[i].iter, loss_no_da: a[i], loss_modify: b[i], loss_strong_da: c[i] })
        .collect())
}

pub fn loss_curves_csv(rows: &[LossCurveRow]) -> String {
    let mut s = String::from("iter,loss_no_da,loss_modify,loss_strong_da\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.iter, r.loss_no_da, r.loss_modify, r.loss_strong_da);
    }
    s
}

/// Write `loss_curves.csv` and `loss_curves.svg` into `dir`.
pub fn emit_loss_curves(
    dir: &Path,
    no_da: &[IterationSummary],
    modify: &[IterationSummary],
    strong_da: &[IterationSummary],
    timestamp: Option<String>,
) -> Result<Vec<LossCurveRow>> {
    let rows = loss_curves(no_da, modify, strong_da, LOSS_SMOOTHING)?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("loss_curves.csv"), loss_curves_csv(&rows))?;
    let pick =
        |f: fn(&LossCurveRow) -> f64| -> Vec<(f64, f64)> { rows.iter().map(|r| (r.iter as f64, f(r))).collect() };
    let (a, b, c) = (pick(|r| r.loss_no_da), pick(|r| r.loss_modify), pick(|r| r.loss_strong_da));
    let svg = line_plot(
        &Plot { title: "Smoothed source training loss", x_label: "iteration", y_label: "cross-entropy", timestamp },
        &[
            Series { label: "no DA", color: "#1f77b4", points: &a },
            Series { label: "MoDify", color: "#2ca02c", points: &b },
            Series { label: "strong DA", color: "#d62728", points: &c },
        ],
    );
    fs::write(dir.join("loss_curves.svg"), svg)?;
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-sample log; bank-less modes leave `loss_da`, `d_da`, `d_no` empty.
pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut s = String::from("iter,epoch,sample_id,loss_da,loss_no,d_da,d_no,degree,applied,w,m_c,lr\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.iter,
            r.epoch,
            r.sample_id,
            opt(r.loss_da),
            r.loss_no,
            opt(r.d_da),
            opt(r.d_no),
            r.degree,
            u8::from(r.applied),
            r.w,
            r.m_c,
            r.lr
        );
    }
    s
}

pub fn iterations_csv(log: &[IterationSummary]) -> String {
    let mut s = String::from("iter,epoch,batch,mean_loss,mean_degree,applied_rate,admitted_rate,m_c,lr,stepped\n");
    for i in log {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            i.iter,
            i.epoch,
            i.batch,
            i.mean_loss,
            i.mean_degree,
            i.applied_rate,
            i.admitted_rate,
            i.m_c,
            i.lr,
            u8::from(i.stepped)
        );
    }
    s
}

/// Inverse of [`iterations_csv`].
pub fn parse_iterations_csv(text: &str) -> Result<Vec<IterationSummary>> {
    let mut lines = text.lines();
    if lines.next() != Some("iter,epoch,batch,mean_loss,mean_degree,applied_rate,admitted_rate,m_c,lr,stepped") {
        return Err(Error::Format("iteration log has an unexpected header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let bad = || Error::Format(format!("malformed iteration row {l:?}"));
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 10 {
                return Err(bad());
            }
            let u = |i: usize| f[i].parse::<usize>().map_err(|_| bad());
            let x = |i: usize| f[i].parse::<f64>().map_err(|_| bad());
            Ok(IterationSummary {
                iter: u(0)?,
                epoch: u(1)?,
                batch: u(2)?,
                mean_loss: x(3)?,
                mean_degree: x(4)?,
                applied_rate: x(5)?,
                admitted_rate: x(6)?,
                m_c: x(7)?,
                lr: x(8)?,
                stepped: u(9)? == 1,
            })
        })
        .collect()
}

pub fn accuracy_csv(acc: &[DomainAccuracy]) -> String {
    let mut s = String::from("domain,domain_id,is_source,accuracy\n");
    for a in acc {
        let _ = writeln!(s, "{},{},{},{}", a.domain, a.domain_id, u8::from(a.is_source), a.accuracy);
    }
    s
}

/// Inverse of [`accuracy_csv`].
pub fn parse_accuracy_csv(text: &str) -> Result<Vec<DomainAccuracy>> {
    let mut lines = text.lines();
    if lines.next() != Some("domain,domain_id,is_source,accuracy") {
        return Err(Error::Format("accuracy file has an unexpected header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let bad = || Error::Format(format!("malformed accuracy row {l:?}"));
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(DomainAccuracy {
                domain: f[0].to_string(),
                domain_id: f[1].parse().map_err(|_| bad())?,
                is_source: match f[2] {
                    "1" => true,
                    "0" => false,
                    _ => return Err(bad()),
                },
                accuracy: f[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(n: usize) -> Vec<IterationSummary> {
        (0..n)
            .map(|i| IterationSummary {
                iter: i,
                epoch: 0,
                batch: 4,
                mean_loss: (i as f64 * 0.37).sin().abs(),
                mean_degree: 0.5,
                applied_rate: (i % 4) as f64 / 4.0,
                admitted_rate: 1.0,
                m_c: i as f64 / n as f64,
                lr: 0.1,
                stepped: true,
            })
            .collect()
    }

    #[test]
    fn window_cardinality() {
        assert_eq!(flow_windows(&log(3000), 50).unwrap().len(), 60);
        assert_eq!(flow_windows(&log(101), 50).unwrap().len(), 3);
        let w = flow_windows(&log(100), 50).unwrap();
        assert_eq!(w[1].window_start_iter, 50);
        // twelve full cycles of 0, 1/4, 1/2, 3/4 then 0 and 1/4
        assert!((w[0].mean_applied_rate - 18.25 / 50.0).abs() < 1e-12);
    }

    #[test]
    fn empty_log_is_a_data_error() {
        let e = flow_windows(&[], 50).unwrap_err();
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn smoothing_window_one_reproduces_raw_losses() {
        let l = log(30);
        let rows = loss_curves(&l, &l, &l, 1).unwrap();
        assert_eq!(rows.len(), 30);
        for (r, i) in rows.iter().zip(&l) {
            assert_eq!(r.loss_modify, i.mean_loss);
        }
    }

    #[test]
    fn mismatched_lengths_are_a_data_error() {
        let e = loss_curves(&log(3), &log(4), &log(3), 1).unwrap_err();
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn iteration_log_round_trips() {
        let l = log(7);
        assert_eq!(parse_iterations_csv(&iterations_csv(&l)).unwrap(), l);
        assert!(parse_iterations_csv("iter\n1\n").is_err());
    }

    #[test]
    fn accuracy_rows_round_trip() {
        let acc = vec![
            DomainAccuracy { domain: "source".into(), domain_id: 0, is_source: true, accuracy: 0.998 },
            DomainAccuracy { domain: "target1".into(), domain_id: 1, is_source: false, accuracy: 1.0 / 3.0 },
        ];
        assert_eq!(parse_accuracy_csv(&accuracy_csv(&acc)).unwrap(), acc);
        assert!(parse_accuracy_csv("nope\n").is_err());
    }
}
