//! Command dispatch and report assembly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use blender_core::blender::{
    random_strip, robustness_test, strip_intersect_ws, BlenderCertificate, BlenderRegion,
    RobustnessReport, StableTarget,
};
use blender_core::center::{solve_parameters, ParameterSolution};
use blender_core::cycle::CycleError;
use blender_core::periodic::{
    find_periodic, strong_homoclinic_certificate, PeriodicOrbitRecord, StrongHomoclinicCertificate,
};
use blender_core::perturbation::UnfoldedCycle;
use blender_core::pipeline::{run_pipeline, run_to_blender, PipelineError, Stage, VolumeAudit};
use blender_core::{AxisBox, ChartPoint, Itinerary};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::report::{Report, Section};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Validate,
    Orbit,
    Solve,
    Periodic,
    Homoclinic,
    Blender,
    Robust,
    Pipeline,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Orbit => "orbit",
            Command::Solve => "solve",
            Command::Periodic => "periodic",
            Command::Homoclinic => "homoclinic",
            Command::Blender => "blender",
            Command::Robust => "robust",
            Command::Pipeline => "pipeline",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: String, message: String },
    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage { .. } => 3,
            CliError::Io { .. } => 4,
        }
    }

    fn stage(stage: impl ToString, e: impl ToString) -> Self {
        CliError::Stage {
            stage: stage.to_string(),
            message: e.to_string(),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::stage(e.stage, e.message)
    }
}

/// What a command produced. On a stage failure the partial report is still
/// returned together with the error.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: Report,
    pub trace: Option<String>,
}

fn point(s: &mut Section, key: &str, p: &ChartPoint<f64>) {
    s.push(format!("{key}.chart"), p.chart.to_string());
    s.push(format!("{key}.x"), p.x.clone());
    s.push(format!("{key}.y"), p.y);
    s.push(format!("{key}.z"), p.z.clone());
}

fn boxed(s: &mut Section, key: &str, b: &AxisBox<f64>) {
    let flat =
        |v: &[blender_core::Interval<f64>]| v.iter().flat_map(|i| [i.lo, i.hi]).collect::<Vec<_>>();
    s.push(format!("{key}.chart"), b.chart.to_string());
    s.push(format!("{key}.x"), flat(&b.x));
    s.push(format!("{key}.y"), vec![b.y.lo, b.y.hi]);
    s.push(format!("{key}.z"), flat(&b.z));
}

fn model_section(cfg: &RunConfig) -> Section {
    let c = &cfg.cycle;
    Section::new("model")
        .with("s", c.dims.s())
        .with("u", c.dims.u())
        .with("mu", c.mu())
        .with("lambda", c.lambda())
        .with("delta_y", c.delta_y())
        .with("y_plus", c.y_plus)
        .with("y_minus", c.y_minus)
}

fn solution_section(s: &ParameterSolution<f64>) -> Section {
    Section::new("solution")
        .with("lambda0", s.lambda0)
        .with("mu0", s.mu0)
        .with("t", s.t)
        .with("m", s.m)
        .with("n", s.n)
        .with("nprime", s.nprime)
        .with("residual_m1_n", s.residuals.0)
        .with("residual_m_nprime", s.residuals.1)
        .with("expansion", s.expansion)
        .with("strategy", s.strategy.to_string())
}

fn periodic_section(name: &str, r: &PeriodicOrbitRecord<f64>) -> Section {
    let mut s = Section::new(name)
        .with("label", r.label())
        .with("m", r.return_map.m)
        .with("n", r.return_map.n);
    s.push("period", r.return_map.period);
    point(&mut s, "point", &r.point);
    s.push("center_eigenvalue", r.center_eigenvalue());
    s.push("stable_moduli", r.spectrum.stable.clone());
    s.push("unstable_moduli", r.spectrum.unstable.clone());
    s.push("delta", r.delta);
    s.push("fixed_residual", r.fixed_residual);
    s.push("markov_slack_u", r.markov_slack.0);
    s.push("markov_slack_s", r.markov_slack.1);
    boxed(&mut s, "cyl_u", &r.cyl_u);
    boxed(&mut s, "cyl_s", &r.cyl_s);
    s
}

fn homoclinic_section(c: &StrongHomoclinicCertificate<f64>) -> Section {
    let mut s = Section::new("homoclinic")
        .with("owner", c.owner.label())
        .with("partner", c.partner.label());
    point(&mut s, "cross_ab", &c.cross_intersections.0);
    point(&mut s, "cross_ba", &c.cross_intersections.1);
    point(&mut s, "shadow", &c.shadow_point);
    s.push("residual_z", c.shadow_residuals.0);
    s.push("residual_x", c.shadow_residuals.1);
    s.push("max_residual", c.max_residual());
    s.push("steps", c.steps);
    s.push("log_accumulation", c.log_accumulation);
    s.push("separation", c.separation);
    s.push("quasi_rank", c.quasi_rank);
    s.push("n", c.n);
    s
}

fn blender_sections(r: &BlenderRegion<f64>, cert: &BlenderCertificate<f64>) -> Vec<Section> {
    let mut s = Section::new("blender");
    boxed(&mut s, "region", &r.region);
    s.push("radius", r.radius());
    s.push(
        "center_interval",
        vec![r.center_interval.lo, r.center_interval.hi],
    );
    s.push("window", vec![r.window.0, r.window.1]);
    s.push("power_i", r.powers.0);
    s.push("power_j", r.powers.1);
    s.push("power_k", r.powers.2);
    s.push("alpha_uu", r.cones.alpha_uu);
    s.push("alpha_cu", r.cones.alpha_cu);
    s.push("strip_radius_ratio", r.strip_radius_ratio);
    let mut out = vec![s];
    for (i, b) in r.branches.iter().enumerate() {
        out.push(
            Section::new(format!("blender.branch.{}", i + 1))
                .with("label", b.label.clone())
                .with("center_multiplier", b.map.c)
                .with("center_translation", b.map.by)
                .with("shift", b.shift)
                .with("word_length", b.word.len())
                .with("volume_defect", b.map.volume_defect()),
        );
    }
    let mut c = Section::new("covering")
        .with("covered", cert.covered)
        .with("certified", cert.certified())
        .with("margin", cert.margin)
        .with("slack_overlap", cert.slacks[0])
        .with("slack_lower", cert.slacks[1])
        .with("slack_upper", cert.slacks[2])
        .with("weakest_point", cert.weakest_point);
    for (i, im) in cert.images.iter().enumerate() {
        c.push(format!("image_{}", i + 1), vec![im.lo, im.hi]);
    }
    if let Some(g) = cert.gap {
        c.push("gap", vec![g.lo, g.hi]);
    }
    out.push(c);
    out
}

fn robustness_section(rep: &RobustnessReport<f64>) -> Section {
    let mut s = Section::new("robustness")
        .with("samples", rep.samples)
        .with("delta", rep.delta)
        .with("seed", rep.seed)
        .with("strips_per_sample", rep.strips_per_sample)
        .with("passed", rep.passed)
        .with("pass_fraction", rep.pass_fraction())
        .with("base_margin", rep.base_margin)
        .with("worst_margin", rep.worst_margin)
        .with("max_volume_defect", rep.max_volume_defect);
    for (i, why) in &rep.failures {
        s.push(format!("failure.{i}"), why.clone());
    }
    s
}

fn audit_section(a: &VolumeAudit) -> Section {
    let mut s = Section::new("audit")
        .with("max_volume_defect", a.max_defect())
        .with("passed", a.passed(1e-12));
    for (name, d) in &a.entries {
        s.push(format!("defect.{name}"), *d);
    }
    s
}

/// Strip batch against `W^s(owner)`.
fn strip_section(
    cfg: &RunConfig,
    region: &BlenderRegion<f64>,
    cert: &BlenderCertificate<f64>,
    owner: &PeriodicOrbitRecord<f64>,
) -> (Section, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.blender.seed);
    let target = StableTarget::from_record(owner, region.center_interval);
    let (mut found, mut worst_distance, mut max_depth, mut full_rank) =
        (0usize, 0.0f64, 0usize, true);
    let mut errors = Vec::new();
    for k in 0..cfg.blender.strips {
        let strip = random_strip(region, cfg.blender.strip_tilt, &mut rng);
        match strip_intersect_ws(region, Some(cert), &strip, &target, cfg.blender.max_depth) {
            Ok(w) => {
                found += 1;
                worst_distance = worst_distance.max(w.distance);
                max_depth = max_depth.max(w.depth);
                full_rank &= w.rank == region.dims().n();
            }
            Err(e) => errors.push(format!("strip {k}: {e}")),
        }
    }
    let mut s = Section::new("strips")
        .with("count", cfg.blender.strips)
        .with("found", found)
        .with("worst_distance", worst_distance)
        .with("max_depth", max_depth)
        .with("full_rank", full_rank)
        .with("seed", cfg.blender.seed);
    if let Some(e) = errors.first() {
        s.push("first_error", e.clone());
    }
    (s, found)
}

fn solve(cfg: &RunConfig) -> Result<(ParameterSolution<f64>, UnfoldedCycle<f64>), CliError> {
    let sol = solve_parameters(&cfg.cycle, cfg.solver.eps, cfg.solver.m_max)
        .map_err(|e| CliError::stage(Stage::Solve, e))?;
    let model = sol
        .unfold(&cfg.cycle)
        .map_err(|e| CliError::stage(Stage::Solve, e))?;
    Ok((sol, model))
}

/// `p_{m,n'}` (expanding center) and `p_{m+1,n}`.
fn pair(
    sol: &ParameterSolution<f64>,
    model: &UnfoldedCycle<f64>,
) -> Result<[PeriodicOrbitRecord<f64>; 2], CliError> {
    let find = |m, n| find_periodic(model, m, n).map_err(|e| CliError::stage(Stage::Periodic, e));
    Ok([find(sol.m, sol.nprime)?, find(sol.m + 1, sol.n)?])
}

/// Runs `cmd`. A stage failure comes back as `Err` together with whatever
/// report was assembled before it.
pub fn run(cmd: Command, cfg: &RunConfig) -> (Outcome, Option<CliError>) {
    let mut report = Report::new(cmd.name());
    let mut trace = None;
    let err = dispatch(cmd, cfg, &mut report, &mut trace).err();
    if let Some(e) = &err {
        let (stage, message) = match e {
            CliError::Stage { stage, message } => (stage.clone(), message.clone()),
            other => (cmd.name().to_string(), other.to_string()),
        };
        report.add(
            Section::new("failure")
                .with("stage", stage)
                .with("message", message),
        );
    }
    (Outcome { report, trace }, err)
}

fn dispatch(
    cmd: Command,
    cfg: &RunConfig,
    report: &mut Report,
    trace: &mut Option<String>,
) -> Result<(), CliError> {
    report.add(model_section(cfg));
    match cmd {
        Command::Validate => {
            let v = cfg.cycle.validate();
            let mut s = Section::new("validation")
                .with("passed", v.passed())
                .with("strict_gap", v.strict_gap);
            for c in &v.checks {
                s.push(format!("check.{}", c.name), c.passed);
                s.push(format!("detail.{}", c.name), c.detail.clone());
            }
            report.add(s);
            let q = cfg.cycle.quasi_transverse_check();
            report.add(
                Section::new("transversality")
                    .with("quasi_rank", q.quasi_rank)
                    .with("quasi_dims", q.quasi_dims)
                    .with("transverse_rank", q.transverse_rank)
                    .with("n", q.n)
                    .with("passed", q.passed()),
            );
            if !q.passed() {
                return Err(CliError::stage(
                    Stage::Validate,
                    "heteroclinic intersections are not (quasi-)transverse",
                ));
            }
        }
        Command::Orbit => {
            let model = UnfoldedCycle::new(cfg.cycle.clone(), cfg.t);
            let itin = &cfg.output.itinerary;
            let mut s = Section::new("orbit")
                .with("itinerary", itin.to_string())
                .with("t", cfg.t);
            point(&mut s, "start", &cfg.output.start);
            let result = model.model.orbit(&cfg.output.start, itin);
            let pts = match &result {
                Ok(p) => p.clone(),
                // the checked prefix before the failing step is still written
                Err(CycleError::Escape { step, .. } | CycleError::Inconsistent { step, .. }) => {
                    model
                        .model
                        .trace(&cfg.output.start, &Itinerary(itin.0[..*step].to_vec()))
                        .unwrap_or_default()
                }
                Err(_) => Vec::new(),
            };
            *trace = Some(orbit_csv(&pts, cfg));
            s.push("steps", pts.len());
            if let Some(last) = pts.last() {
                point(&mut s, "end", last);
            }
            report.add(s);
            result.map_err(|e| CliError::stage("orbit", e))?;
        }
        Command::Solve => {
            let (sol, _) = solve(cfg)?;
            report.add(solution_section(&sol));
        }
        Command::Periodic => {
            let (sol, model) = solve(cfg)?;
            report.add(solution_section(&sol));
            match (cfg.solver.m, cfg.solver.n) {
                (Some(m), Some(n)) => {
                    let r = find_periodic(&model, m, n)
                        .map_err(|e| CliError::stage(Stage::Periodic, e))?;
                    report.add(periodic_section("periodic", &r));
                }
                (None, None) => {
                    let [a, b] = pair(&sol, &model)?;
                    report.add(periodic_section("periodic.owner", &a));
                    report.add(periodic_section("periodic.partner", &b));
                }
                _ => {
                    return Err(ConfigError::Dimension(
                        "periodic needs both m and n in [solver], or neither".into(),
                    )
                    .into())
                }
            }
        }
        Command::Homoclinic => {
            let (sol, model) = solve(cfg)?;
            report.add(solution_section(&sol));
            let [a, b] = pair(&sol, &model)?;
            report.add(periodic_section("periodic.owner", &a));
            report.add(periodic_section("periodic.partner", &b));
            let c = strong_homoclinic_certificate(
                &model,
                &a,
                &b,
                cfg.solver.homoclinic_tol,
                cfg.solver.max_steps,
            )
            .map_err(|e| CliError::stage(Stage::Homoclinic, e))?;
            report.add(homoclinic_section(&c));
        }
        Command::Blender | Command::Robust => {
            let mut audit = VolumeAudit::default();
            let run = run_to_blender(&cfg.cycle, &cfg.pipeline(), &mut audit)?;
            report.add(solution_section(&run.solution));
            report.add(homoclinic_section(&run.certificate));
            for s in blender_sections(&run.region, &run.covering) {
                report.add(s);
            }
            if cmd == Command::Blender {
                let (s, found) = strip_section(cfg, &run.region, &run.covering, &run.owner);
                let missing = cfg.blender.strips - found;
                report.add(s);
                if missing > 0 {
                    return Err(CliError::stage(
                        Stage::Blender,
                        format!("{missing} strips found no witness"),
                    ));
                }
            } else {
                let rc = cfg.robustness();
                let rep = robustness_test(
                    &run.region,
                    rc.delta,
                    rc.samples,
                    rc.seed,
                    rc.strips_per_sample,
                    rc.max_depth,
                );
                report.add(robustness_section(&rep));
                if rep.passed != rep.samples {
                    return Err(CliError::stage(
                        Stage::Robust,
                        format!(
                            "{} of {} samples failed",
                            rep.samples - rep.passed,
                            rep.samples
                        ),
                    ));
                }
            }
        }
        Command::Pipeline => {
            let run = run_pipeline(&cfg.cycle, &cfg.pipeline())?;
            let mut v = Section::new("validation").with("passed", run.validation.passed());
            v.push("strict_gap", run.validation.strict_gap);
            report.add(v);
            report.add(solution_section(&run.solution));
            report.add(periodic_section("periodic.owner", &run.owner));
            report.add(periodic_section("periodic.partner", &run.partner));
            report.add(homoclinic_section(&run.certificate));
            for s in blender_sections(&run.region, &run.covering) {
                report.add(s);
            }
            if let Some(rep) = &run.robustness {
                report.add(robustness_section(rep));
            }
            report.add(audit_section(&run.audit));
            report.add(Section::new("stages").with(
                "completed",
                "validate,solve,periodic,homoclinic,blender,robust",
            ));
        }
    }
    Ok(())
}

/// CSV with columns `step, chart, x.., y, z..`.
pub fn orbit_csv(points: &[ChartPoint<f64>], cfg: &RunConfig) -> String {
    let (s, u) = (cfg.cycle.dims.s(), cfg.cycle.dims.u());
    let mut out = String::from("step,chart");
    for i in 0..s {
        let _ = write!(out, ",x{i}");
    }
    out.push_str(",y");
    for i in 0..u {
        let _ = write!(out, ",z{i}");
    }
    out.push('\n');
    for (k, p) in points.iter().enumerate() {
        let _ = write!(out, "{k},{}", p.chart);
        for v in p.coords() {
            let _ = write!(out, ",{v:.16e}");
        }
        out.push('\n');
    }
    out
}

/// Writes `report.<cmd>.kv`, `report.<cmd>.txt` and, for orbits, `trace.csv`.
pub fn write_outcome(dir: &Path, outcome: &Outcome) -> Result<Vec<PathBuf>, CliError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let cmd = &outcome.report.command;
    let mut files = vec![
        (dir.join(format!("report.{cmd}.kv")), outcome.report.to_kv()),
        (
            dir.join(format!("report.{cmd}.txt")),
            outcome.report.to_text(),
        ),
    ];
    if let Some(t) = &outcome.trace {
        files.push((dir.join("trace.csv"), t.clone()));
    }
    for (path, body) in &files {
        fs::write(path, body).map_err(io(path))?;
    }
    Ok(files.into_iter().map(|f| f.0).collect())
}
