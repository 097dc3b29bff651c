use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use modify_core::cli::config::{Mode, TrainConfig};
use modify_core::image::Image;
use modify_core::numerics::{Layer, Matrix, ParameterSet};
use modify_core::synthdata::{generate_dataset, DataConfig, Sample};
use modify_core::trainer::{evaluate, train, Trainer};

fn noise_samples(n: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| Sample {
            id: i as u32,
            image: Image::new(4, 4, 3, (0..48).map(|_| rng.gen()).collect()).unwrap(),
            label: i % 4,
            domain: 0,
        })
        .collect()
}

#[test]
fn constant_class_zero_scores_one_over_c() {
    let d = generate_dataset(&DataConfig { n_train: 40, n_eval: 100, ..DataConfig::default() }).unwrap();
    let layer = Layer { weight: Matrix::zeros(768, 4), bias: vec![1.0, 0.0, 0.0, 0.0] };
    let p = ParameterSet::from_layers(vec![layer]).unwrap();
    for e in &d.eval {
        assert_eq!(evaluate(&p, &e.samples).unwrap(), 0.25);
    }
}

#[test]
fn label_blind_predictions_score_near_chance() {
    for seed in 0..5 {
        let samples = noise_samples(500, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let p = ParameterSet::init(&[48, 16, 4], &mut rng).unwrap();
        let acc = evaluate(&p, &samples).unwrap();
        assert!((acc - 0.25).abs() <= 0.06, "seed {seed}: {acc}");
    }
}

#[test]
fn memorized_training_set_scores_one() {
    let mut cfg = TrainConfig::new(Mode::Baseline);
    cfg.data.n_train = 40;
    cfg.data.n_eval = 8;
    cfg.epochs = 60;
    cfg.batch_size = 8;
    cfg.base_lr = 0.05;
    let r = train(&cfg).unwrap();
    assert_eq!(evaluate(&r.params, &generate_dataset(&cfg.data).unwrap().train).unwrap(), 1.0);
}

#[test]
fn untrained_network_is_at_chance_on_targets() {
    let mut cfg = TrainConfig::new(Mode::Full);
    cfg.epochs = 0;
    let r = Trainer::new(&cfg).unwrap().run().unwrap();
    let t = r.mean_target_accuracy();
    assert!((t - 0.25).abs() <= 0.05, "{t}");
    assert!(r.iterations.is_empty());
}

#[test]
fn baseline_learns_the_color_shortcut() {
    // reference hyper-parameters, no desk-scale learning rate
    let r = train(&TrainConfig::new(Mode::Baseline)).unwrap();
    assert!(r.source_accuracy() >= 0.95, "{}", r.source_accuracy());
    assert!(r.mean_target_accuracy() <= 0.45, "{}", r.mean_target_accuracy());
}
