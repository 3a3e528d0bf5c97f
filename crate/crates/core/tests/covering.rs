use blender_core::affine::{Chart, ChartPoint};
use blender_core::blender::{
    random_strip, strip_intersect_ws, verify_covering, BlenderRegion, StableTarget,
};
use blender_core::{Interval, SplittingDims};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn region(c1: f64, b1: f64, c2: f64, b2: f64) -> BlenderRegion<f64> {
    let dims = SplittingDims::new(1, 1).unwrap();
    BlenderRegion::synthetic(dims, &[(c1, b1), (c2, b2)], Interval::new(0.0, 1.0))
}

fn ulp(v: f64) -> f64 {
    (v.abs().max(f64::MIN_POSITIVE)).next_up() - v.abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn margin_matches_endpoint_recomputation(
        c1 in 1.2..3.0f64, c2 in 1.2..3.0f64, b1 in -1.0..0.5f64, b2 in -2.0..0.0f64,
    ) {
        let r = region(c1, b1, c2, b2);
        let cert = verify_covering(&r);
        let (lo, hi) = (0.0, 1.0);
        let mut imgs = [(b1, c1 + b1), (b2, c2 + b2)];
        imgs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let overlap = imgs[0].1.min(imgs[1].1).min(hi) - imgs[1].0.max(lo);
        let low = lo - imgs[0].0;
        let high = imgs[0].1.max(imgs[1].1) - hi;
        let oracle = overlap.min(low).min(high);
        prop_assert!(cert.margin <= oracle);
        prop_assert!(oracle - cert.margin <= 2.0 * ulp(oracle) + 4.0 * f64::EPSILON, "{} vs {}", cert.margin, oracle);
        let covered = imgs[0].0 <= lo && imgs[1].0 <= imgs[0].1 && imgs[0].1.max(imgs[1].1) >= hi;
        if cert.certified() {
            prop_assert!(covered);
        }
    }

    #[test]
    fn certified_cover_has_preimages(
        c1 in 1.2..3.0f64, c2 in 1.2..3.0f64, b1 in -0.5..0.0f64, b2 in -2.0..-0.5f64,
        y in 0.0..=1.0f64,
    ) {
        let r = region(c1, b1, c2, b2);
        prop_assume!(verify_covering(&r).certified());
        let pre = [(y - b1) / c1, (y - b2) / c2];
        prop_assert!(pre.iter().any(|&p| (-1e-15..=1.0 + 1e-15).contains(&p)));
    }
}

#[test]
fn strips_shrink_by_at_least_the_weakest_branch() {
    let r = region(1.5, 0.0, 2.5, -1.5);
    let cert = verify_covering(&r);
    assert!(cert.certified());
    let target = StableTarget::point(0.0, vec![0.0], "g1 fixed point");
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..300 {
        let s = random_strip(&r, 0.1, &mut rng);
        let w = strip_intersect_ws(&r, Some(&cert), &s, &target, 80).unwrap();
        assert!(w.distance <= 1e-8);
        assert!(w.min_factor >= 1.5 * (1.0 - 1e-9));
        assert_eq!(w.rank, 3);
        assert_eq!(w.widths.len(), w.depth + 1);
        let on_strip = s.point(
            w.point.y - s.base.y - s.l[0] * (w.point.z[0] - s.base.z[0]),
            &[w.point.z[0] - s.base.z[0]],
        );
        assert!(on_strip.dist(&w.point) <= 1e-12);
        assert_eq!(w.point.chart, Chart::P);
    }
}

#[test]
fn strip_base_outside_region_is_rejected() {
    let r = region(1.5, 0.0, 1.5, -0.5);
    let cert = verify_covering(&r);
    let s = blender_core::blender::Strip::flat(
        ChartPoint::new(Chart::P, vec![3.0], 0.5, vec![0.0]),
        100.0,
        0.1,
    );
    let target = StableTarget::point(0.0, vec![0.0], "g1");
    assert!(strip_intersect_ws(&r, Some(&cert), &s, &target, 10).is_err());
}
