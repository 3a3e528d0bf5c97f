//! Acceptance criteria on the reference model. One PASS/FAIL line each,
//! with the measured value, the tolerance and the wall time against its
//! budget. Exits nonzero when any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use blender_core::affine::{Chart, ChartPoint};
use blender_core::blender::{
    partner_target, random_strip, robustness_test, strip_intersect_ws, verify_covering,
    BlenderRegion, StableTarget,
};
use blender_core::center::{psi, solve_parameters};
use blender_core::cycle::{CycleParams, Itinerary, SimpleCycle};
use blender_core::linalg::Mat;
use blender_core::periodic::{find_periodic, homoclinic_relation, strong_homoclinic_certificate};
use blender_core::perturbation::UnfoldedCycle;
use blender_core::pipeline::{run_pipeline, PipelineConfig, PipelineRun, RobustnessConfig};
use blender_core::{Interval, SplittingDims};
use blender_forge::{parse_config, run, Command};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        ok,
        detail: detail.into(),
    }
}

fn criterion(id: usize, name: &str, budget: Duration, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        verdict(false, format!("panicked: {msg}"))
    });
    let took = start.elapsed();
    let in_time = took <= budget;
    let ok = v.ok && in_time;
    println!(
        "{} [{id}] {name}: {} ({:.3} s, budget {} s{})",
        if ok { "PASS" } else { "FAIL" },
        v.detail,
        took.as_secs_f64(),
        budget.as_secs(),
        if in_time { "" } else { ", over budget" }
    );
    ok
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn reference_run() -> PipelineRun<f64> {
    run_pipeline(&SimpleCycle::reference(), &PipelineConfig::default()).expect("reference pipeline")
}

// smallest m with 3 * 2^-(m+1) < eps
fn closed_form_m(eps: f64) -> usize {
    (0..)
        .find(|&m| 3.0 * 2f64.powi(-(m as i32 + 1)) < eps)
        .unwrap()
}

fn grid_model(lambda: f64, mu: f64) -> SimpleCycle<f64> {
    let mut p = CycleParams::<f64>::reference();
    p.mu = mu;
    p.a_u = Mat::scalar(1, 1.5 * mu);
    p.a_s = Mat::scalar(1, 1.0 / (1.5 * mu * mu));
    p.lambda = lambda;
    p.b_s = Mat::scalar(1, lambda / 2.0);
    p.b_u = Mat::scalar(1, 2.0 / (lambda * lambda));
    p.build().expect("grid model")
}

fn conservation() -> Verdict {
    let run = reference_run();
    let worst = run.audit.worst().cloned().unwrap_or_default();
    verdict(
        run.audit.passed(1e-12),
        format!(
            "{} maps, max volume defect {:e} ({}) <= 1e-12",
            run.audit.entries.len(),
            worst.1,
            worst.0
        ),
    )
}

fn psi_oracle() -> Verdict {
    let base = SimpleCycle::<f64>::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let m = rng.random_range(0..=20);
        let n = rng.random_range(0..=20);
        let t = rng.random_range(-0.1..=0.1);
        let y = rng.random_range(-1.0..=1.0);
        let model = UnfoldedCycle::new(base.clone(), t);
        let p = ChartPoint::new(Chart::P, vec![0.0], y, vec![0.0]);
        let traced = model
            .model
            .trace(&p, &Itinerary::cycle_pass(m, n))
            .unwrap()
            .last()
            .unwrap()
            .y;
        worst = worst.max((psi(&model, m, n, y) - traced).abs());
    }
    verdict(
        worst <= 1e-10,
        format!("1000 samples, max |psi - traced center| = {worst:e} <= 1e-10"),
    )
}

fn solver() -> Verdict {
    let base = SimpleCycle::<f64>::reference();
    let m = closed_form_m(0.01);
    let s = solve_parameters(&base, 0.01, 64).unwrap();
    let t = 3.0 * 2f64.powi(-(m as i32 + 1));
    let expansion = s.mu0.powi(s.nprime as i32) * s.lambda0.powi(s.m as i32);
    let reference_ok = s.lambda0 == 0.5
        && s.mu0 == 2.0
        && (s.m, s.n, s.nprime) == (m, m, m + 1)
        && s.t == t
        && s.residuals.0.abs() <= 1e-10
        && s.residuals.1.abs() <= 1e-10
        && expansion == 2.0;
    let start = Instant::now();
    let mut grid_worst = 0.0f64;
    let mut grid_ok = 0;
    for i in 0..5 {
        for j in 0..5 {
            let g = grid_model(0.3 + 0.1 * i as f64, 1.5 + 0.25 * j as f64);
            if let Ok(sol) = solve_parameters(&g, 0.01, 64) {
                let model = sol.unfold(&g).unwrap();
                let y = g.y_plus;
                let r = (psi(&model, sol.m + 1, sol.n, y) - y)
                    .abs()
                    .max((psi(&model, sol.m, sol.nprime, y) - y).abs());
                grid_worst = grid_worst.max(r);
                if r <= 1e-10 {
                    grid_ok += 1;
                }
            }
        }
    }
    let grid_time = start.elapsed();
    verdict(
        reference_ok && grid_ok == 25 && grid_time <= secs(60),
        format!(
            "reference m = n = {} (closed-form smallest m = {m}), n' = {}, t = 3*2^-{}, lambda0 = {}, mu0 = {}, \
             residuals {:e}/{:e}, mu0^n' lambda0^m = {expansion}; grid {grid_ok}/25 solved, max residual {grid_worst:e} \
             in {:.3} s",
            s.m,
            s.nprime,
            s.m + 1,
            s.lambda0,
            s.mu0,
            s.residuals.0,
            s.residuals.1,
            grid_time.as_secs_f64()
        ),
    )
}

fn periodic() -> Verdict {
    let base = SimpleCycle::<f64>::reference();
    let m = closed_form_m(0.01);
    let model = UnfoldedCycle::new(base, 3.0 * 2f64.powi(-(m as i32 + 1)));
    let a = find_periodic(&model, m, m + 1).unwrap();
    let b = find_periodic(&model, m + 1, m).unwrap();
    let residual = a.fixed_residual.max(b.fixed_residual);
    let sep = a.point.dist(&b.point);
    let markov = a
        .markov_slack
        .0
        .min(a.markov_slack.1)
        .min(b.markov_slack.0)
        .min(b.markov_slack.1);
    verdict(
        residual <= 1e-10 && a.center_eigenvalue() == 2.0 && b.center_eigenvalue() == 0.5 && sep >= 1e-10 && markov > 0.0,
        format!(
            "{} and {}: residual {residual:e}, center eigenvalues {} and {}, separation {sep:e}, min Markov slack {markov:e}",
            a.label(),
            b.label(),
            a.center_eigenvalue(),
            b.center_eigenvalue()
        ),
    )
}

fn homoclinic() -> Verdict {
    let m = closed_form_m(0.01);
    let model = UnfoldedCycle::new(SimpleCycle::reference(), 3.0 * 2f64.powi(-(m as i32 + 1)));
    let a = find_periodic(&model, m, m + 1).unwrap();
    let b = find_periodic(&model, m + 1, m).unwrap();
    let (ab, ba) = homoclinic_relation(&a, &b).unwrap();
    // the cross points swap strong coordinates
    let exact = ab == ChartPoint::new(Chart::P, a.point.x.clone(), a.point.y, b.point.z.clone())
        && ba == ChartPoint::new(Chart::P, b.point.x.clone(), b.point.y, a.point.z.clone());
    let c = strong_homoclinic_certificate(&model, &a, &b, 1e-8, 200).unwrap();
    verdict(
        exact && c.max_residual() <= 1e-8 && c.steps <= 200 && c.quasi_rank + 1 == c.n,
        format!(
            "cross points exact: {exact}; residual {:e} <= 1e-8 after {} steps; quasi-transverse rank {} = n - 1 = {}",
            c.max_residual(),
            c.steps,
            c.quasi_rank,
            c.n - 1
        ),
    )
}

fn covering() -> Verdict {
    let run = run_pipeline(
        &SimpleCycle::reference(),
        &PipelineConfig {
            robustness: None,
            ..PipelineConfig::default()
        },
    )
    .unwrap();
    let cert = &run.covering;
    let ic = run.region.center_interval;
    // images enclose the plain floating-point endpoint images
    let enclosed = run.region.branches.iter().zip(&cert.images).all(|(b, im)| {
        let (p, q) = (b.map.c * ic.lo + b.map.by, b.map.c * ic.hi + b.map.by);
        im.contains(p) && im.contains(q)
    });
    let mut e: Vec<Interval<f64>> = cert.images.clone();
    e.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let recomputed = (e[0].hi.min(e[1].hi).min(ic.hi) - e[1].lo.max(ic.lo))
        .min(ic.lo - e[0].lo)
        .min(e[0].hi.max(e[1].hi) - ic.hi);
    let ulp = recomputed.abs().next_up() - recomputed.abs();
    let exactness = (recomputed - cert.margin).abs() <= 2.0 * ulp;

    let dims = SplittingDims::new(1, 1).unwrap();
    let synthetic =
        BlenderRegion::synthetic(dims, &[(1.5, 0.0), (1.5, -0.5)], Interval::new(0.0, 1.0));
    let sc = verify_covering(&synthetic);
    verdict(
        cert.certified() && enclosed && exactness && sc.certified() && sc.margin == 0.5,
        format!(
            "reference delta_cov = {:e} on I_c = [{}, {}], images {:?}, endpoint recomputation within 2 ulp: {exactness}; \
             synthetic margin {}",
            cert.margin,
            ic.lo,
            ic.hi,
            cert.images.iter().map(|i| (i.lo, i.hi)).collect::<Vec<_>>(),
            sc.margin
        ),
    )
}

fn strips() -> Verdict {
    let run = reference_run();
    let r = &run.region;
    let target = StableTarget::from_record(&run.owner, r.center_interval);
    let n = r.dims().n();
    let kappa = r.min_multiplier();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst, mut worst_forward, mut min_factor, mut deepest, mut found) =
        (0.0f64, 0.0f64, f64::INFINITY, 0, 0);
    let mut rank_ok = true;
    for _ in 0..1000 {
        let s = random_strip(r, 0.1, &mut rng);
        let Ok(w) = strip_intersect_ws(r, Some(&run.covering), &s, &target, 200) else {
            continue;
        };
        found += 1;
        worst = worst.max(w.distance);
        min_factor = min_factor.min(w.min_factor);
        deepest = deepest.max(w.depth);
        rank_ok &= w.rank == n;
        // oracle: invert the composed word map directly and pull the target back
        let pre = w
            .map
            .invert()
            .unwrap()
            .apply(&ChartPoint::new(
                Chart::P,
                w.point.x.clone(),
                run.owner.point.y,
                run.owner.point.z.clone(),
            ))
            .unwrap();
        let d = (pre.y - w.point.y)
            .abs()
            .max((pre.z[0] - w.point.z[0]).abs());
        worst_forward = worst_forward.max(d);
    }
    let factors_ok = min_factor >= kappa * (1.0 - 1e-9);
    verdict(
        found == 1000 && worst <= 1e-8 && worst_forward <= 1e-8 && rank_ok && factors_ok,
        format!(
            "{found}/1000 witnesses, max distance {worst:e}, direct preimage check {worst_forward:e}, full rank {rank_ok}, \
             depth <= {deepest}, min width factor {min_factor} >= {kappa}"
        ),
    )
}

fn robustness() -> Verdict {
    let run = reference_run();
    let r = &run.region;
    let rc = RobustnessConfig::default();
    let rep = robustness_test(r, 1e-3, 100, rc.seed, rc.strips_per_sample, rc.max_depth);
    let floor = rep.base_margin - 10.0 * 1e-3 * r.center_interval.width();
    let cfg = parse_config("[blender]\nsamples = 100\n").unwrap();
    let bytes = |c| run_cli_bytes(c, &cfg);
    let (first, second) = (bytes(Command::Robust), bytes(Command::Robust));
    let reproducible = first.is_some() && first == second;
    verdict(
        rep.pass_fraction() == 1.0 && rep.worst_margin >= floor && reproducible,
        format!(
            "pass fraction {} over {} samples (seed {}), worst margin {:e} >= {:e}, report byte-reproducible: {reproducible}",
            rep.pass_fraction(),
            rep.samples,
            rep.seed,
            rep.worst_margin,
            floor
        ),
    )
}

fn run_cli_bytes(cmd: Command, cfg: &blender_forge::RunConfig) -> Option<String> {
    let (out, err) = run(cmd, cfg);
    err.is_none().then(|| out.report.to_kv())
}

fn transfer() -> Verdict {
    let run = reference_run();
    let r = &run.region;
    let owner_target = StableTarget::from_record(&run.owner, r.center_interval);
    let partner = match partner_target(&run.unfolded, r, &run.partner) {
        Ok(t) => t,
        Err(e) => return verdict(false, format!("partner leaf: {e}")),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut both, mut worst) = (0, 0.0f64);
    for _ in 0..100 {
        let s = random_strip(r, 0.1, &mut rng);
        let a = strip_intersect_ws(r, Some(&run.covering), &s, &owner_target, 200);
        let b = strip_intersect_ws(r, Some(&run.covering), &s, &partner, 200);
        if let (Ok(a), Ok(b)) = (a, b) {
            if a.distance <= 1e-8 && b.distance <= 1e-8 && b.rank == r.dims().n() {
                both += 1;
                worst = worst.max(b.distance);
            }
        }
    }
    verdict(
        both == 100,
        format!(
            "{both}/100 strips meet W^s of both {} and {}, partner distance <= {worst:e}",
            run.owner.label(),
            run.partner.label()
        ),
    )
}

fn main() -> ExitCode {
    let results = [
        criterion(1, "conservation audit", secs(1), conservation),
        criterion(2, "psi oracle equivalence", secs(5), psi_oracle),
        criterion(3, "two-itinerary solver ground truth", secs(60), solver),
        criterion(4, "periodic points", secs(1), periodic),
        criterion(5, "strong homoclinic certificate", secs(5), homoclinic),
        criterion(6, "blender covering certificate", secs(1), covering),
        criterion(7, "strip intersection", secs(30), strips),
        criterion(8, "robustness", secs(60), robustness),
        criterion(9, "homoclinic-relation transfer", secs(10), transfer),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
