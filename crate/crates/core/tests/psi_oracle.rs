use blender_core::affine::{Chart, ChartPoint};
use blender_core::center::psi;
use blender_core::cycle::{Itinerary, SimpleCycle};
use blender_core::perturbation::UnfoldedCycle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Oracle: push a single point through the word one symbol at a time.
fn traced_center(model: &UnfoldedCycle<f64>, m: usize, n: usize, y: f64) -> f64 {
    let p = ChartPoint::new(Chart::P, vec![0.0], y, vec![0.0]);
    let trace = model.model.trace(&p, &Itinerary::cycle_pass(m, n)).unwrap();
    trace.last().unwrap().y
}

#[test]
fn psi_matches_traced_center_on_1000_samples() {
    let base = SimpleCycle::<f64>::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let m = rng.random_range(0..=20);
        let n = rng.random_range(0..=20);
        let t = rng.random_range(-0.1..=0.1);
        let y = rng.random_range(-1.0..=1.0);
        let model = UnfoldedCycle::new(base.clone(), t);
        let d = (psi(&model, m, n, y) - traced_center(&model, m, n, y)).abs();
        worst = worst.max(d);
    }
    assert!(worst <= 1e-10, "worst {worst:e}");
}

#[test]
fn psi_matches_composed_map() {
    let base = SimpleCycle::<f64>::reference();
    let model = UnfoldedCycle::new(base, 3.0 * 2f64.powi(-9));
    let g = model
        .model
        .compose_word(Chart::P, &Itinerary::cycle_pass(8, 9))
        .unwrap();
    assert_eq!(g.apply_center(1.0), psi(&model, 8, 9, 1.0));
    assert_eq!(psi(&model, 8, 9, 1.0), 1.0);
    assert_eq!(psi(&model, 9, 8, 1.0), 1.0);
}

#[test]
fn long_words_use_log_space_without_overflow() {
    let model = UnfoldedCycle::new(SimpleCycle::<f64>::reference(), 0.0);
    // mu^n lambda^m = 1 when n = m
    let v = psi(&model, 700, 700, 0.5);
    assert!((v - psi(&model, 0, 0, 0.5)).abs() <= 1e-9, "{v}");
}
