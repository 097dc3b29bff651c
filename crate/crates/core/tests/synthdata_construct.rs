//! The benchmark plants a color shortcut that fails on targets while shape
//! alone still determines the label.

use std::collections::HashMap;

use modify_core::cli::config::{Mode, TrainConfig};
use modify_core::synthdata::{generate_dataset, DataConfig, DatasetSplit, Sample};
use modify_core::trainer::Trainer;

/// Colors quantized to 1/10 so that pixel noise collapses into one bin.
fn quantize(px: &[f64]) -> [u8; 3] {
    [0, 1, 2].map(|c| (px[c] * 10.0).round() as u8)
}

/// The most common quantized color among bright pixels. Background channels
/// never exceed 0.3 while every foreground color has a channel at 1.0.
fn foreground(s: &Sample) -> [u8; 3] {
    let mut hist: HashMap<[u8; 3], usize> = HashMap::new();
    for px in s.image.data().chunks_exact(3).filter(|px| px.iter().cloned().fold(0.0, f64::max) > 0.65) {
        *hist.entry(quantize(px)).or_default() += 1;
    }
    let mut bins: Vec<_> = hist.into_iter().collect();
    bins.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    bins.first().map_or([0; 3], |b| b.0)
}

struct HistogramClassifier(HashMap<[u8; 3], usize>);

impl HistogramClassifier {
    fn fit(train: &[Sample]) -> Self {
        let mut votes: HashMap<[u8; 3], Vec<usize>> = HashMap::new();
        for s in train {
            votes.entry(foreground(s)).or_default().push(s.label);
        }
        HistogramClassifier(
            votes
                .into_iter()
                .map(|(k, v)| {
                    let mut count = [0usize; 16];
                    v.iter().for_each(|&l| count[l] += 1);
                    (k, (0..16).max_by_key(|&l| count[l]).unwrap())
                })
                .collect(),
        )
    }

    fn accuracy(&self, samples: &[Sample]) -> f64 {
        let hits = samples.iter().filter(|s| self.0.get(&foreground(s)) == Some(&s.label)).count();
        hits as f64 / samples.len() as f64
    }
}

#[test]
fn three_targets_give_four_eval_domains() {
    let d = generate_dataset(&DataConfig { n_train: 40, n_eval: 8, ..DataConfig::default() }).unwrap();
    assert_eq!(d.eval.len(), 4);
    assert!(d.eval[0].spec.is_source());
    assert_eq!(d.targets().count(), 3);
}

#[test]
fn color_histogram_classifier_is_perfect_on_source_and_fails_on_targets() {
    let d = generate_dataset(&DataConfig::default()).unwrap();
    let clf = HistogramClassifier::fit(&d.train);
    assert_eq!(clf.accuracy(&d.eval[0].samples), 1.0);
    for t in d.targets() {
        let acc = clf.accuracy(&t.samples);
        assert!(acc <= 0.25 + 0.05, "{}: {acc}", t.spec.name);
    }
}

fn grayscale(d: &DatasetSplit) -> DatasetSplit {
    let mut g = d.clone();
    for s in g.train.iter_mut().chain(g.eval.iter_mut().flat_map(|e| e.samples.iter_mut())) {
        s.image = s.image.to_grayscale();
    }
    g
}

#[test]
fn shape_alone_determines_the_label() {
    let mut cfg = TrainConfig::new(Mode::Baseline);
    cfg.base_lr = 0.01;
    let data = grayscale(&generate_dataset(&cfg.data).unwrap());
    let r = Trainer::with_dataset(&cfg, data).unwrap().run().unwrap();
    for a in &r.accuracies {
        assert!(a.accuracy >= 0.9, "{}: {}", a.domain, a.accuracy);
    }
}
