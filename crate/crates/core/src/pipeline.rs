//! All stages in order: validate, solve, periodic points, homoclinic
//! certificate, blender, robustness. Every map built along the way is
//! recorded in a volume audit.

use std::fmt;

use crate::affine::BlockAffineMap;
use crate::blender::{
    build_blender, robustness_test, verify_covering, BlenderCertificate, BlenderOptions,
    BlenderRegion, RobustnessReport,
};
use crate::center::{solve_parameters, ParameterSolution};
use crate::cycle::{SimpleCycle, ValidationReport};
use crate::periodic::{
    find_periodic, strong_homoclinic_certificate, PeriodicOrbitRecord, StrongHomoclinicCertificate,
};
use crate::perturbation::UnfoldedCycle;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Validate,
    Solve,
    Periodic,
    Homoclinic,
    Blender,
    Robust,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Validate => "validate",
            Stage::Solve => "solve",
            Stage::Periodic => "periodic",
            Stage::Homoclinic => "homoclinic",
            Stage::Blender => "blender",
            Stage::Robust => "robust",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("stage {stage} failed: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

fn fail<E: fmt::Display>(stage: Stage) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError {
        stage,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig<T> {
    pub eps: T,
    pub m_max: usize,
    pub homoclinic_tol: T,
    pub max_steps: usize,
    pub blender: BlenderOptions<T>,
    /// `None` skips the robustness stage.
    pub robustness: Option<RobustnessConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessConfig {
    pub delta: f64,
    pub samples: usize,
    pub seed: u64,
    pub strips_per_sample: usize,
    pub max_depth: usize,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            delta: 1e-3,
            samples: 100,
            seed: 2024,
            strips_per_sample: 10,
            max_depth: 200,
        }
    }
}

impl<T: Scalar> Default for PipelineConfig<T> {
    fn default() -> Self {
        Self {
            eps: T::lit(0.01),
            m_max: 64,
            homoclinic_tol: T::lit(1e-8),
            max_steps: 200,
            blender: BlenderOptions::default(),
            robustness: Some(RobustnessConfig::default()),
        }
    }
}

/// Volume defect of every map built in a run, in construction order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VolumeAudit {
    pub entries: Vec<(String, f64)>,
}

impl VolumeAudit {
    pub fn record<T: Scalar>(&mut self, name: impl Into<String>, map: &BlockAffineMap<T>) {
        self.entries
            .push((name.into(), map.volume_defect().as_f64()));
    }

    pub fn record_cycle<T: Scalar>(&mut self, prefix: &str, cycle: &SimpleCycle<T>) {
        for (name, m) in cycle.named_maps() {
            self.record(format!("{prefix}.{name}"), m);
        }
    }

    pub fn max_defect(&self) -> f64 {
        self.entries.iter().map(|e| e.1).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&(String, f64)> {
        self.entries.iter().max_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.entries.iter().all(|e| e.1 <= tol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun<T> {
    pub validation: ValidationReport,
    pub solution: ParameterSolution<T>,
    pub unfolded: UnfoldedCycle<T>,
    /// `p_{m,n'}`, expanding center.
    pub owner: PeriodicOrbitRecord<T>,
    /// `p_{m+1,n}`, contracting center.
    pub partner: PeriodicOrbitRecord<T>,
    pub certificate: StrongHomoclinicCertificate<T>,
    pub region: BlenderRegion<T>,
    pub covering: BlenderCertificate<T>,
    pub robustness: Option<RobustnessReport<T>>,
    pub audit: VolumeAudit,
}

/// Stages up to and including the blender covering certificate.
pub fn run_to_blender<T: Scalar>(
    base: &SimpleCycle<T>,
    cfg: &PipelineConfig<T>,
    audit: &mut VolumeAudit,
) -> Result<PipelineRun<T>, PipelineError> {
    let validation = base.validate();
    audit.record_cycle("model", base);
    if !validation.passed() {
        return Err(PipelineError {
            stage: Stage::Validate,
            message: validation
                .failures()
                .map(|c| format!("{}: {}", c.name, c.detail))
                .collect::<Vec<_>>()
                .join("; "),
        });
    }

    let solution = solve_parameters(base, cfg.eps, cfg.m_max).map_err(fail(Stage::Solve))?;
    let unfolded = solution.unfold(base).map_err(fail(Stage::Solve))?;
    audit.record_cycle("retuned", &unfolded.base);
    audit.record_cycle("unfolded", &unfolded.model);

    let owner =
        find_periodic(&unfolded, solution.m, solution.nprime).map_err(fail(Stage::Periodic))?;
    let partner =
        find_periodic(&unfolded, solution.m + 1, solution.n).map_err(fail(Stage::Periodic))?;
    audit.record(format!("return {}", owner.label()), &owner.return_map.g);
    audit.record(format!("return {}", partner.label()), &partner.return_map.g);

    let certificate = strong_homoclinic_certificate(
        &unfolded,
        &owner,
        &partner,
        cfg.homoclinic_tol,
        cfg.max_steps,
    )
    .map_err(fail(Stage::Homoclinic))?;

    let region = build_blender(&unfolded, &owner, &certificate, &cfg.blender)
        .map_err(fail(Stage::Blender))?;
    for br in &region.branches {
        audit.record(format!("branch {}", br.label), &br.map);
    }
    let covering = verify_covering(&region);
    if !covering.certified() {
        return Err(PipelineError {
            stage: Stage::Blender,
            message: format!("covering not certified, margin {:e}", covering.margin),
        });
    }
    Ok(PipelineRun {
        validation,
        solution,
        unfolded,
        owner,
        partner,
        certificate,
        region,
        covering,
        robustness: None,
        audit: audit.clone(),
    })
}

/// Every stage, stopping at the first failure.
pub fn run_pipeline<T: Scalar>(
    base: &SimpleCycle<T>,
    cfg: &PipelineConfig<T>,
) -> Result<PipelineRun<T>, PipelineError> {
    let mut audit = VolumeAudit::default();
    let mut run = run_to_blender(base, cfg, &mut audit)?;
    if let Some(rc) = &cfg.robustness {
        let rep = robustness_test(
            &run.region,
            rc.delta,
            rc.samples,
            rc.seed,
            rc.strips_per_sample,
            rc.max_depth,
        );
        audit.entries.push((
            "robustness perturbations (max)".into(),
            rep.max_volume_defect.as_f64(),
        ));
        let ok = rep.passed == rep.samples;
        let first = rep.failures.first().cloned();
        run.robustness = Some(rep);
        if !ok {
            let (i, why) = first.unwrap_or_default();
            return Err(PipelineError {
                stage: Stage::Robust,
                message: format!("sample {i}: {why}"),
            });
        }
    }
    run.audit = audit;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_pipeline_passes_with_clean_audit() {
        let cfg = PipelineConfig {
            robustness: Some(RobustnessConfig {
                samples: 5,
                ..RobustnessConfig::default()
            }),
            ..PipelineConfig::default()
        };
        let run = run_pipeline(&SimpleCycle::<f64>::reference(), &cfg).unwrap();
        assert_eq!((run.solution.m, run.solution.nprime), (8, 9));
        assert!(run.covering.margin > 0.0);
        assert!(run.audit.passed(1e-12), "{:?}", run.audit.worst());
        assert_eq!(run.audit.entries.len(), 4 * 3 + 2 + 2 + 1);
    }

    #[test]
    fn failure_names_the_stage() {
        let cfg = PipelineConfig::<f64> {
            m_max: 2,
            ..PipelineConfig::default()
        };
        let err = run_pipeline(&SimpleCycle::reference(), &cfg).unwrap_err();
        assert_eq!(err.stage, Stage::Solve);
        assert!(err.to_string().starts_with("stage solve failed"));
    }
}
