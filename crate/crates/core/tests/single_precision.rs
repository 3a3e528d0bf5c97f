use blender_core::affine::{Chart, ChartPoint};
use blender_core::blender::{verify_covering, BlenderRegion};
use blender_core::center::solve_parameters;
use blender_core::cycle::{Itinerary, SimpleCycle};
use blender_core::{Interval, SplittingDims};

#[test]
fn reference_model_runs_in_f32() {
    let c = SimpleCycle::<f32>::reference();
    assert!(c.validate().passed(), "{}", c.validate());
    let start = ChartPoint::new(Chart::P, vec![0.0f32], 1.0, vec![1.0 / 32.0]);
    let itin: Itinerary = "T_out,B,T_in,A,A".parse().unwrap();
    let ys: Vec<f32> = c
        .trace(&start, &itin)
        .unwrap()
        .iter()
        .map(|p| p.y)
        .collect();
    assert_eq!(ys, vec![1.0, -1.0, -0.5, -0.5, -1.0, -2.0]);
}

#[test]
fn solver_and_covering_in_f32() {
    let base = SimpleCycle::<f32>::reference();
    let s = solve_parameters(&base, 0.01, 64).unwrap();
    // single precision accepts residuals up to 1e-4, so a shorter pair may win
    assert!(s.m <= 8);
    s.verify(&base, 0.01).unwrap();
    let dims = SplittingDims::new(1, 1).unwrap();
    let r =
        BlenderRegion::<f32>::synthetic(dims, &[(1.5, 0.0), (1.5, -0.5)], Interval::new(0.0, 1.0));
    assert_eq!(verify_covering(&r).margin, 0.5);
}
