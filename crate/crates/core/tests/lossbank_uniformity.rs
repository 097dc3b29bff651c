use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use modify_core::lossbank::LossBank;
use modify_core::stats::ks_uniform;

/// One exact write per slot (lambda = 0) from an exponential loss law, then
/// fresh draws ranked against it.
#[test]
fn fresh_draws_rank_near_uniformly() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut draw = || -(1.0 - rng.gen::<f64>()).ln();
    let n = 2000;
    let mut bank = LossBank::new(n, 4f64.ln(), 0.0).unwrap();
    for id in 0..n {
        bank.update(id, draw()).unwrap();
    }
    let sorted = bank.sorted_index();
    let d: Vec<f64> = (0..10_000).map(|_| sorted.difficulty(draw()).unwrap().value()).collect();
    let ks = ks_uniform(&d);
    assert!(ks < 0.05, "KS {ks}");
}
