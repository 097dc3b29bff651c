//! Acceptance suite behind `modify verify` and the `acceptance` test target.
//!
//! Each criterion pairs the production code with an oracle written
//! independently here (brute-force sorting, finite differences, explicit
//! pixel indexing, a nearest-centroid classifier) or with the directional
//! claims checked on real training runs.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::augment::{maybe_augment, rgb_shuffle, ChannelPermutation};
use crate::cli::ablation::run_ablation;
use crate::cli::config::{Mode, TrainConfig};
use crate::cli::emit::{flow_windows, FLOW_WINDOW, LOSS_SMOOTHING};
use crate::error::Result;
use crate::image::Image;
use crate::lossbank::{DifficultyDegree, LossBank};
use crate::numerics::{backward, cross_entropy, forward, Matrix, ParameterSet};
use crate::scheduler::{no_gate, GateThresholds};
use crate::stats::{mean, spearman, trailing_mean};
use crate::synthdata::{generate_dataset, DataConfig, Sample};
use crate::trainer::{train, Trainer};

/// Learning rate for the desk-scale experiment runs. The reference rate of
/// 2.5e-4 barely moves this small network within 30 epochs.
pub const DESK_LR: f64 = 0.01;
pub const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
/// Batch size for the flow-channel run, giving 3000 iterations (60 windows).
pub const FLOW_BATCH: usize = 20;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} criterion {:>2} {}: {} ({:.2} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

fn outcome(id: u8, name: &'static str, start: Instant, checks: Vec<(bool, String)>) -> Outcome {
    Outcome {
        id,
        name,
        passed: checks.iter().all(|c| c.0),
        detail: checks.into_iter().map(|c| c.1).collect::<Vec<_>>().join("; "),
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn failed(id: u8, name: &'static str, start: Instant, err: impl fmt::Display) -> Outcome {
    outcome(id, name, start, vec![(false, format!("error: {err}"))])
}

fn budget(start: Instant, limit: f64) -> (bool, String) {
    let s = start.elapsed().as_secs_f64();
    (s < limit, format!("runtime {s:.2} s < {limit} s"))
}

/// Default configuration with the desk-scale learning rate.
pub fn desk_config(mode: Mode, seed: u64) -> TrainConfig {
    let mut c = TrainConfig::new(mode);
    c.base_lr = DESK_LR;
    c.seed = seed;
    c.data.seed = seed;
    c
}

pub fn momentum_update() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let prev = rng.gen_range(-10.0..10.0);
        let lambda = rng.gen_range(0.0..1.0);
        let loss = rng.gen_range(0.0..10.0);
        let mut bank = LossBank::new(1, prev, lambda).unwrap();
        bank.update(0, loss).unwrap();
        worst = worst.max((bank.values()[0] - (lambda * prev + (1.0 - lambda) * loss)).abs());
    }
    let mut worst_conv = 0.0f64;
    for _ in 0..20 {
        let alpha = rng.gen_range(0.0..5.0);
        let c = rng.gen_range(0.0..5.0);
        let lambda: f64 = rng.gen_range(0.0..1.0);
        let mut bank = LossBank::new(1, alpha, lambda).unwrap();
        for t in 1..=100 {
            bank.update(0, c).unwrap();
            let want = lambda.powi(t) * (alpha - c).abs();
            worst_conv = worst_conv.max(((bank.values()[0] - c).abs() - want).abs());
        }
    }
    let b = budget(start, 1.0);
    outcome(
        1,
        "momentum bank update",
        start,
        vec![
            (worst <= 1e-12, format!("update max err {worst:.1e} <= 1e-12")),
            (worst_conv <= 1e-12, format!("convergence max err {worst_conv:.1e} <= 1e-12")),
            b,
        ],
    )
}

/// Brute force: sort, then walk the sorted list counting entries below `q`.
fn sort_and_count(values: &[f64], q: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut n = 0usize;
    for v in &s {
        if *v < q {
            n += 1;
        } else {
            break;
        }
    }
    n as f64 / s.len() as f64
}

fn random_bank(rng: &mut ChaCha8Rng, n: usize) -> LossBank {
    let mut bank = LossBank::new(n, 4f64.ln(), 0.0).unwrap();
    // coarse grids force ties, fine values do not
    let grid = [0.0, 0.5, 0.01][rng.gen_range(0..3)];
    for id in 0..n {
        let v: f64 = rng.gen_range(0.0..3.0);
        let v = if grid > 0.0 { (v / grid).round() * grid } else { v };
        bank.update(id, v).unwrap();
    }
    bank
}

pub fn difficulty_rank() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut mismatches = 0usize;
    let mut queries = 0usize;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=5000);
        let bank = random_bank(&mut rng, n);
        let sorted = bank.sorted_index();
        let existing = bank.values()[rng.gen_range(0..n)];
        for q in [existing, rng.gen_range(-0.5..3.5), -1.0, 10.0] {
            queries += 1;
            let want = sort_and_count(bank.values(), q);
            let scan = bank.difficulty(q).unwrap().value();
            let fast = sorted.difficulty(q).unwrap().value();
            if scan != want || fast != want {
                mismatches += 1;
            }
        }
    }
    let mut violations = 0usize;
    for _ in 0..100 {
        let bank = random_bank(&mut rng, 1000);
        for _ in 0..1000 {
            let a: f64 = rng.gen_range(-0.5..3.5);
            let b: f64 = rng.gen_range(-0.5..3.5);
            let (lo, hi) = (a.min(b), a.max(b));
            if bank.difficulty(lo).unwrap().value() > bank.difficulty(hi).unwrap().value() {
                violations += 1;
            }
        }
    }
    let b = budget(start, 5.0);
    outcome(
        2,
        "difficulty rank",
        start,
        vec![
            (mismatches == 0, format!("{mismatches}/{queries} queries differ from sort-and-count")),
            (violations == 0, format!("{violations}/100000 monotonicity violations")),
            b,
        ],
    )
}

pub fn loss_gate() -> Outcome {
    let start = Instant::now();
    let th = GateThresholds::new(0.05, 0.95).unwrap();
    let mut mismatches = 0;
    for i in 0..=1000 {
        let d = i as f64 / 1000.0;
        let want = (0.05 < d && d < 0.95) as u8 as f64;
        if no_gate(DifficultyDegree::new(d).unwrap(), th).value() != want {
            mismatches += 1;
        }
    }
    let at = |d: f64| no_gate(DifficultyDegree::new(d).unwrap(), th).value();
    let edges = at(0.05) == 0.0 && at(0.95) == 0.0 && at(0.051) == 1.0 && at(0.949) == 1.0;
    outcome(
        3,
        "open-interval loss gate",
        start,
        vec![
            (mismatches == 0, format!("{mismatches}/1001 grid points differ")),
            (edges, "w = 0 at d = 0.05 and d = 0.95".into()),
        ],
    )
}

fn gated_loss(p: &ParameterSet, x: &Matrix, labels: &[usize], w: &[f64]) -> f64 {
    let l = cross_entropy(&forward(p, x).unwrap(), labels).unwrap();
    l.iter().zip(w).map(|(l, w)| l * w).sum::<f64>() / l.len() as f64
}

pub fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let shapes: [&[usize]; 3] = [&[12, 7, 3], &[20, 10, 6, 4], &[768, 16, 4]];
    let (eps, tol) = (1e-5, 1e-4);
    let mut checked = 0;
    let mut worst = 0.0f64;
    for sizes in shapes {
        let batch = 8;
        let mut params = ParameterSet::init(sizes, &mut rng).unwrap();
        for l in params.layers_mut() {
            for b in &mut l.bias {
                *b = rng.gen_range(-0.1..0.1);
            }
        }
        let x = Matrix::from_vec(batch, sizes[0], (0..batch * sizes[0]).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap();
        let classes = *sizes.last().unwrap();
        let labels: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..classes)).collect();
        let mut w: Vec<f64> = (0..batch).map(|_| rng.gen_range(0..2) as f64).collect();
        w[0] = 1.0;
        w[1] = 0.0;
        let analytic = backward(&params, &x, &labels, &w).unwrap().flatten();
        for _ in 0..40 {
            let k = rng.gen_range(0..params.num_params());
            let orig = params.flatten()[k];
            *params.flat_mut(k).unwrap() = orig + eps;
            let up = gated_loss(&params, &x, &labels, &w);
            *params.flat_mut(k).unwrap() = orig - eps;
            let down = gated_loss(&params, &x, &labels, &w);
            *params.flat_mut(k).unwrap() = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-7);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    let b = budget(start, 10.0);
    outcome(
        4,
        "gradient check",
        start,
        vec![
            (worst <= tol, format!("max relative error {worst:.2e} <= {tol:.0e} over {checked} coordinates, 3 shapes")),
            b,
        ],
    )
}

fn striped() -> Image {
    let data = (0..4 * 4 * 3).map(|i| ((i * 7) % 11) as f64 / 10.0).collect();
    Image::new(4, 4, 3, data).unwrap()
}

/// Independent definition: output channel `c` of each pixel is input channel `perm[c]`.
fn shuffle_oracle(img: &Image, perm: [u8; 3]) -> Image {
    let mut out = img.clone();
    for y in 0..img.height() {
        for x in 0..img.width() {
            let src = img.pixel(y, x).to_vec();
            let dst = out.pixel_mut(y, x);
            for c in 0..3 {
                dst[c] = src[perm[c] as usize];
            }
        }
    }
    out
}

pub fn augmentation_statistics() -> Outcome {
    let start = Instant::now();
    let img = striped();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let trials = 100_000;
    let mut applied = 0usize;
    let mut identity_applied = 0usize;
    for _ in 0..trials {
        let (out, dec) = maybe_augment(&img, 0.3, &mut rng).unwrap();
        if dec.applied {
            applied += 1;
            if dec.permutation.is_identity() || out == img {
                identity_applied += 1;
            }
        } else if out != img {
            identity_applied += 1;
        }
    }
    let rate = applied as f64 / trials as f64;

    let all = ChannelPermutation::ALL;
    let sh = |x: &Image, p: ChannelPermutation| rgb_shuffle(x, p).unwrap();
    let mut law_failures = 0;
    for p in all {
        if sh(&img, p) != shuffle_oracle(&img, p.as_array()) {
            law_failures += 1;
        }
        if sh(&sh(&img, p), p.inverse()) != img || p.compose(p.inverse()) != ChannelPermutation::IDENTITY {
            law_failures += 1;
        }
        if p.compose(ChannelPermutation::IDENTITY) != p || ChannelPermutation::IDENTITY.compose(p) != p {
            law_failures += 1;
        }
        for q in all {
            let pq = p.compose(q);
            if !all.contains(&pq) || sh(&sh(&img, q), p) != sh(&img, pq) {
                law_failures += 1;
            }
            for r in all {
                if p.compose(q).compose(r) != p.compose(q.compose(r)) {
                    law_failures += 1;
                }
            }
        }
    }
    outcome(
        5,
        "augmentation statistics",
        start,
        vec![
            ((rate - 0.3).abs() <= 0.01, format!("applied rate {rate:.4} within 0.3 +/- 0.01")),
            (identity_applied == 0, format!("{identity_applied} applied-as-identity or altered-when-skipped")),
            (law_failures == 0, format!("{law_failures} group-law failures over 6 permutations")),
        ],
    )
}

fn mean_color(s: &Sample) -> [f64; 3] {
    let m = s.image.channel_means();
    [m[0], m[1], m[2]]
}

/// Nearest class centroid of mean image color, fitted on source training data.
pub struct CentroidClassifier {
    centroids: Vec<[f64; 3]>,
}

impl CentroidClassifier {
    pub fn fit(train: &[Sample], classes: usize) -> Self {
        let mut sums = vec![[0.0; 3]; classes];
        let mut counts = vec![0usize; classes];
        for s in train {
            let c = mean_color(s);
            for k in 0..3 {
                sums[s.label][k] += c[k];
            }
            counts[s.label] += 1;
        }
        let centroids =
            sums.iter().zip(&counts).map(|(s, &n)| [s[0] / n as f64, s[1] / n as f64, s[2] / n as f64]).collect();
        CentroidClassifier { centroids }
    }

    pub fn predict(&self, s: &Sample) -> usize {
        let c = mean_color(s);
        let dist = |m: &[f64; 3]| (0..3).map(|k| (c[k] - m[k]).powi(2)).sum::<f64>();
        (0..self.centroids.len())
            .min_by(|&a, &b| dist(&self.centroids[a]).total_cmp(&dist(&self.centroids[b])))
            .unwrap()
    }

    pub fn accuracy(&self, samples: &[Sample]) -> f64 {
        samples.iter().filter(|s| self.predict(s) == s.label).count() as f64 / samples.len() as f64
    }
}

pub fn synthdata_construct() -> Outcome {
    let start = Instant::now();
    let data = match generate_dataset(&DataConfig::default()) {
        Ok(d) => d,
        Err(e) => return failed(6, "synthdata construct validity", start, e),
    };
    let clf = CentroidClassifier::fit(&data.train, data.n_classes);
    let mut checks = Vec::new();
    for d in &data.eval {
        let acc = clf.accuracy(&d.samples);
        checks.push(if d.spec.is_source() {
            (acc >= 0.99, format!("{} {acc:.3} >= 0.99", d.spec.name))
        } else {
            (acc <= 0.35, format!("{} {acc:.3} <= 0.35", d.spec.name))
        });
    }
    checks.push(budget(start, 5.0));
    outcome(6, "synthdata construct validity", start, checks)
}

#[derive(Debug, Clone, Copy)]
pub struct RunStats {
    pub target_accuracy: f64,
    pub terminal_loss: f64,
    pub seconds: f64,
}

/// Mean over the last 10% of iterations of the trailing-mean smoothed
/// per-iteration mean loss.
pub fn terminal_loss(per_iter: &[f64]) -> f64 {
    let s = trailing_mean(per_iter, LOSS_SMOOTHING);
    let tail = (s.len() / 10).max(1);
    mean(&s[s.len() - tail..])
}

/// Desk-scale runs shared between the ablation and loss-ordering criteria.
#[derive(Default)]
pub struct ExperimentRuns {
    cache: HashMap<(Mode, u64), RunStats>,
}

impl ExperimentRuns {
    pub fn get(&mut self, mode: Mode, seed: u64) -> Result<RunStats> {
        if let Some(s) = self.cache.get(&(mode, seed)) {
            return Ok(*s);
        }
        let r = train(&desk_config(mode, seed))?;
        let losses: Vec<f64> = r.iterations.iter().map(|i| i.mean_loss).collect();
        let stats = RunStats {
            target_accuracy: r.mean_target_accuracy(),
            terminal_loss: terminal_loss(&losses),
            seconds: r.seconds,
        };
        self.cache.insert((mode, seed), stats);
        Ok(stats)
    }

    fn sweep(&mut self, mode: Mode) -> Result<Vec<RunStats>> {
        SEEDS.iter().map(|&s| self.get(mode, s)).collect()
    }
}

fn cpu_budget(runs: &[&[RunStats]], limit: f64) -> (bool, String) {
    let s: f64 = runs.iter().flat_map(|r| r.iter()).map(|r| r.seconds).sum();
    (s < limit, format!("training time {s:.1} s < {limit} s"))
}

pub fn ablation_ordering(runs: &mut ExperimentRuns) -> Outcome {
    let start = Instant::now();
    let name = "ablation ordering";
    let (base, shuf, full) = match (|| {
        Ok::<_, crate::Error>((runs.sweep(Mode::Baseline)?, runs.sweep(Mode::ShuffleAlways)?, runs.sweep(Mode::Full)?))
    })() {
        Ok(v) => v,
        Err(e) => return failed(7, name, start, e),
    };
    let m = |r: &[RunStats]| mean(&r.iter().map(|s| s.target_accuracy).collect::<Vec<_>>());
    let (b, s, f) = (m(&base), m(&shuf), m(&full));
    outcome(
        7,
        name,
        start,
        vec![
            (f >= s, format!("FULL {f:.3} >= SHUFFLE_ALWAYS {s:.3}")),
            (s >= b, format!("SHUFFLE_ALWAYS {s:.3} >= BASELINE {b:.3}")),
            (f - b >= 0.15, format!("FULL - BASELINE {:.3} >= 0.15", f - b)),
            (s - b >= 0.10, format!("SHUFFLE_ALWAYS - BASELINE {:.3} >= 0.10", s - b)),
            cpu_budget(&[&base, &shuf, &full], 600.0),
        ],
    )
}

pub fn flow_channel() -> Outcome {
    let start = Instant::now();
    let mut cfg = desk_config(Mode::Full, 0);
    cfg.batch_size = FLOW_BATCH;
    let r = match train(&cfg) {
        Ok(r) => r,
        Err(e) => return failed(8, "flow channel", start, e),
    };
    let w = flow_windows(&r.iterations, FLOW_WINDOW).expect("non-empty log");
    let mc: Vec<f64> = w.iter().map(|w| w.mean_m_c).collect();
    let ar: Vec<f64> = w.iter().map(|w| w.mean_applied_rate).collect();
    let rho = spearman(&mc, &ar);
    let b = budget(start, 120.0);
    outcome(
        8,
        "flow channel",
        start,
        vec![
            (rho > 0.3, format!("Spearman(M_c, applied rate) {rho:.3} > 0.3")),
            (w.len() >= 60, format!("{} windows >= 60", w.len())),
            b,
        ],
    )
}

pub fn misfitting_ordering(runs: &mut ExperimentRuns) -> Outcome {
    let start = Instant::now();
    let name = "misfitting loss ordering";
    let (base, full, strong) = match (|| {
        Ok::<_, crate::Error>((runs.sweep(Mode::Baseline)?, runs.sweep(Mode::Full)?, runs.sweep(Mode::StrongDa)?))
    })() {
        Ok(v) => v,
        Err(e) => return failed(9, name, start, e),
    };
    let m = |r: &[RunStats]| mean(&r.iter().map(|s| s.terminal_loss).collect::<Vec<_>>());
    let (b, f, s) = (m(&base), m(&full), m(&strong));
    outcome(
        9,
        name,
        start,
        vec![
            (b < f, format!("NO_DA {b:.4} < FULL {f:.4}")),
            (f < s, format!("FULL {f:.4} < STRONG_DA {s:.4}")),
            cpu_budget(&[&base, &full, &strong], 360.0),
        ],
    )
}

fn bits(p: &ParameterSet) -> Vec<u64> {
    p.flatten().iter().map(|v| v.to_bits()).collect()
}

pub fn zero_gate_and_determinism(scratch: &Path) -> Outcome {
    let start = Instant::now();
    let name = "zero-gate no-op and determinism";
    let run = || -> Result<Vec<(bool, String)>> {
        // no difficulty lies in (0, 1e-9) for a bank of 2000 entries
        let mut cfg = desk_config(Mode::Full, 0);
        cfg.thresholds = GateThresholds::new(0.0, 1e-9)?;
        let mut t = Trainer::new(&cfg)?;
        let order = t.epoch_order(0);
        let before = bits(t.params());
        let recs = t.train_batch(&order[..cfg.batch_size])?;
        let closed = recs.iter().all(|r| r.w == 0.0);
        let same = bits(t.params()) == before;

        let base = desk_config(Mode::Baseline, 0);
        let (a, b) = (scratch.join("determinism_a"), scratch.join("determinism_b"));
        for d in [&a, &b] {
            if d.exists() {
                fs::remove_dir_all(d)?;
            }
            let rep = run_ablation(&base, &[0], d)?;
            if !rep.is_complete() {
                return Err(rep.failures.into_iter().next().unwrap().error);
            }
        }
        let identical = ["ablation.csv", "ablation_summary.csv"]
            .iter()
            .map(|f| Ok(fs::read(a.join(f))? == fs::read(b.join(f))?))
            .collect::<Result<Vec<bool>>>()?
            .into_iter()
            .all(|x| x);
        Ok(vec![
            (closed && same, format!("all-closed step leaves parameters bit-identical: {}", closed && same)),
            (identical, format!("two ablation runs give byte-identical CSVs: {identical}")),
        ])
    };
    match run() {
        Ok(checks) => outcome(10, name, start, checks),
        Err(e) => failed(10, name, start, e),
    }
}

/// Run every criterion in order, calling `report` as each one finishes.
pub fn run_all(scratch: &Path, mut report: impl FnMut(&Outcome)) -> Vec<Outcome> {
    let scratch: PathBuf = scratch.to_path_buf();
    let mut runs = ExperimentRuns::default();
    let mut out = Vec::new();
    let mut push = |o: Outcome| {
        report(&o);
        out.push(o);
    };
    push(momentum_update());
    push(difficulty_rank());
    push(loss_gate());
    push(gradient_check());
    push(augmentation_statistics());
    push(synthdata_construct());
    push(ablation_ordering(&mut runs));
    push(flow_channel());
    push(misfitting_ordering(&mut runs));
    push(zero_gate_and_determinism(&scratch));
    out
}
