//! Line-based run configuration.
//!
//! ```text
//! # comment
//! [model]
//! mu = 2.0
//! x0 = 1.0, 0.5
//! [output]
//! itinerary = "T_out,B,B,T_in,A"
//! ```
//!
//! Sections are `[model]`, `[solver]`, `[blender]` and `[output]`. Every key
//! is optional and defaults to the reference model.

use std::collections::HashMap;
use std::path::PathBuf;

use blender_core::blender::{BlenderOptions, ConeParams};
use blender_core::cycle::{CycleParams, Itinerary, SimpleCycle};
use blender_core::pipeline::{PipelineConfig, RobustnessConfig};
use blender_core::{Chart, ChartPoint, Mat, SplittingDims};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {message}")]
    Value { line: usize, message: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("model fails validation:\n{0}")]
    Invalid(String),
}

const SECTIONS: [(&str, &[&str]); 4] = [
    (
        "model",
        &[
            "s",
            "u",
            "mu",
            "lambda",
            "a_s",
            "a_u",
            "b_s",
            "b_u",
            "out_s",
            "out_c",
            "out_u",
            "in_s",
            "in_c",
            "in_u",
            "y_plus",
            "y_minus",
            "x0",
            "z0",
            "chart_radius",
            "v_radius",
            "w_radius",
            "l",
            "r",
            "eps_seg",
            "t",
        ],
    ),
    (
        "solver",
        &["eps", "m_max", "m", "n", "homoclinic_tol", "max_steps"],
    ),
    (
        "blender",
        &[
            "threshold",
            "alpha_uu",
            "alpha_cu",
            "ratio",
            "strip_tilt",
            "strips",
            "max_depth",
            "delta",
            "samples",
            "seed",
            "strips_per_sample",
        ],
    ),
    ("output", &["dir", "itinerary", "start", "start_chart"]),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub eps: f64,
    pub m_max: usize,
    /// Itinerary lengths for `periodic`; the solver's pair when absent.
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub homoclinic_tol: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlenderConfig {
    pub threshold: f64,
    pub alpha_uu: f64,
    pub alpha_cu: f64,
    pub ratio: f64,
    pub strip_tilt: f64,
    pub strips: usize,
    pub max_depth: usize,
    pub delta: f64,
    pub samples: usize,
    pub seed: u64,
    pub strips_per_sample: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub itinerary: Itinerary,
    pub start: ChartPoint<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: CycleParams<f64>,
    pub cycle: SimpleCycle<f64>,
    /// Unfolding parameter used by `orbit`.
    pub t: f64,
    pub solver: SolverConfig,
    pub blender: BlenderConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn reference() -> Self {
        parse_config("").expect("reference model is valid")
    }

    pub fn pipeline(&self) -> PipelineConfig<f64> {
        PipelineConfig {
            eps: self.solver.eps,
            m_max: self.solver.m_max,
            homoclinic_tol: self.solver.homoclinic_tol,
            max_steps: self.solver.max_steps,
            blender: self.blender_options(),
            robustness: Some(self.robustness()),
        }
    }

    pub fn blender_options(&self) -> BlenderOptions<f64> {
        BlenderOptions {
            threshold: self.blender.threshold,
            cones: ConeParams {
                alpha_uu: self.blender.alpha_uu,
                alpha_cu: self.blender.alpha_cu,
            },
            strip_radius_ratio: self.blender.ratio,
            ..BlenderOptions::default()
        }
    }

    pub fn robustness(&self) -> RobustnessConfig {
        RobustnessConfig {
            delta: self.blender.delta,
            samples: self.blender.samples,
            seed: self.blender.seed,
            strips_per_sample: self.blender.strips_per_sample,
            max_depth: self.blender.max_depth,
        }
    }
}

struct Entry {
    line: usize,
    value: String,
}

struct Raw(HashMap<(&'static str, &'static str), Entry>);

impl Raw {
    fn get(&self, section: &'static str, key: &'static str) -> Option<&Entry> {
        self.0.get(&(section, key))
    }

    fn parsed<V: std::str::FromStr>(
        &self,
        section: &'static str,
        key: &'static str,
        default: V,
    ) -> Result<V, ConfigError>
    where
        V::Err: std::fmt::Display,
    {
        match self.get(section, key) {
            None => Ok(default),
            Some(e) => e.value.parse().map_err(|err| ConfigError::Value {
                line: e.line,
                message: format!("{key}: cannot parse `{}`: {err}", e.value),
            }),
        }
    }

    fn list(
        &self,
        section: &'static str,
        key: &'static str,
    ) -> Result<Option<(usize, Vec<f64>)>, ConfigError> {
        let Some(e) = self.get(section, key) else {
            return Ok(None);
        };
        let body = e.value.trim();
        let body = body
            .strip_prefix('[')
            .and_then(|b| b.strip_suffix(']'))
            .unwrap_or(body);
        let vals = body
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|err| ConfigError::Value {
                line: e.line,
                message: format!("{key}: bad number list `{}`: {err}", e.value),
            })?;
        Ok(Some((e.line, vals)))
    }

    /// A single value is a multiple of the identity; otherwise a row-major
    /// `dim x dim` list.
    fn block(
        &self,
        key: &'static str,
        dim: usize,
        default: &Mat<f64>,
    ) -> Result<Mat<f64>, ConfigError> {
        let Some((line, vals)) = self.list("model", key)? else {
            return Ok(Mat::scalar(dim, default[(0, 0)]));
        };
        match vals.len() {
            1 => Ok(Mat::scalar(dim, vals[0])),
            k if k == dim * dim => Ok(Mat::from_row_major(vals).expect("square length")),
            k => Err(ConfigError::Dimension(format!(
                "line {line}: {key} has {k} entries, expected 1 or {}",
                dim * dim
            ))),
        }
    }

    fn vector(&self, key: &'static str, dim: usize, default: f64) -> Result<Vec<f64>, ConfigError> {
        match self.list("model", key)? {
            None => Ok(vec![default; dim]),
            Some((_, v)) if v.len() == 1 => Ok(vec![v[0]; dim]),
            Some((_, v)) if v.len() == dim => Ok(v),
            Some((line, v)) => Err(ConfigError::Dimension(format!(
                "line {line}: {key} has {} entries, expected {dim}",
                v.len()
            ))),
        }
    }
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(v)
}

fn tokenize(text: &str) -> Result<Raw, ConfigError> {
    let mut raw = HashMap::new();
    let mut section: Option<(&'static str, &'static [&'static str])> = None;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |message: String| ConfigError::Syntax {
            line: lineno,
            message,
        };
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| syntax(format!("unterminated section header `{line}`")))?
                .trim();
            section = Some(
                *SECTIONS
                    .iter()
                    .find(|s| s.0 == name)
                    .ok_or_else(|| syntax(format!("unknown section [{name}]")))?,
            );
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| syntax(format!("expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), unquote(value.trim()).to_string());
        let (sec, keys) =
            section.ok_or_else(|| syntax(format!("key `{key}` before any section header")))?;
        let key = *keys
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| syntax(format!("unknown key `{key}` in [{sec}]")))?;
        if value.is_empty() {
            return Err(syntax(format!("empty value for `{key}`")));
        }
        if let Some(prev) = raw.insert(
            (sec, key),
            Entry {
                line: lineno,
                value,
            },
        ) {
            return Err(syntax(format!("`{key}` already set on line {}", prev.line)));
        }
    }
    Ok(Raw(raw))
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw = tokenize(text)?;
    let r = CycleParams::<f64>::reference();
    let s = raw.parsed("model", "s", 1usize)?;
    let u = raw.parsed("model", "u", 1usize)?;
    let dims = SplittingDims::new(s, u).map_err(|e| ConfigError::Dimension(e.to_string()))?;
    let params = CycleParams {
        dims,
        a_s: raw.block("a_s", s, &r.a_s)?,
        mu: raw.parsed("model", "mu", r.mu)?,
        a_u: raw.block("a_u", u, &r.a_u)?,
        b_s: raw.block("b_s", s, &r.b_s)?,
        lambda: raw.parsed("model", "lambda", r.lambda)?,
        b_u: raw.block("b_u", u, &r.b_u)?,
        out_s: raw.block("out_s", s, &r.out_s)?,
        out_c: raw.parsed("model", "out_c", r.out_c)?,
        out_u: raw.block("out_u", u, &r.out_u)?,
        in_s: raw.block("in_s", s, &r.in_s)?,
        in_c: raw.parsed("model", "in_c", r.in_c)?,
        in_u: raw.block("in_u", u, &r.in_u)?,
        y_plus: raw.parsed("model", "y_plus", r.y_plus)?,
        y_minus: raw.parsed("model", "y_minus", r.y_minus)?,
        x0: raw.vector("x0", s, r.x0[0])?,
        z0: raw.vector("z0", u, r.z0[0])?,
        chart_radius: raw.parsed("model", "chart_radius", r.chart_radius)?,
        v_radius: raw.parsed("model", "v_radius", r.v_radius)?,
        w_radius: raw.parsed("model", "w_radius", r.w_radius)?,
        l: raw.parsed("model", "l", r.l)?,
        r: raw.parsed("model", "r", r.r)?,
        eps_seg: raw.parsed("model", "eps_seg", r.eps_seg)?,
    };
    let cycle = params
        .build()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let report = cycle.validate();
    if !report.passed() {
        return Err(ConfigError::Invalid(report.to_string()));
    }

    let solver = SolverConfig {
        eps: raw.parsed("solver", "eps", 0.01)?,
        m_max: raw.parsed("solver", "m_max", 64)?,
        m: raw
            .get("solver", "m")
            .map(|_| raw.parsed("solver", "m", 0))
            .transpose()?,
        n: raw
            .get("solver", "n")
            .map(|_| raw.parsed("solver", "n", 0))
            .transpose()?,
        homoclinic_tol: raw.parsed("solver", "homoclinic_tol", 1e-8)?,
        max_steps: raw.parsed("solver", "max_steps", 200)?,
    };
    let rc = RobustnessConfig::default();
    let bo = BlenderOptions::<f64>::default();
    let blender = BlenderConfig {
        threshold: raw.parsed("blender", "threshold", bo.threshold)?,
        alpha_uu: raw.parsed("blender", "alpha_uu", bo.cones.alpha_uu)?,
        alpha_cu: raw.parsed("blender", "alpha_cu", bo.cones.alpha_cu)?,
        ratio: raw.parsed("blender", "ratio", bo.strip_radius_ratio)?,
        strip_tilt: raw.parsed("blender", "strip_tilt", 0.1)?,
        strips: raw.parsed("blender", "strips", 100)?,
        max_depth: raw.parsed("blender", "max_depth", rc.max_depth)?,
        delta: raw.parsed("blender", "delta", rc.delta)?,
        samples: raw.parsed("blender", "samples", rc.samples)?,
        seed: raw.parsed("blender", "seed", rc.seed)?,
        strips_per_sample: raw.parsed("blender", "strips_per_sample", rc.strips_per_sample)?,
    };
    if blender.ratio.is_nan() || blender.ratio < 10.0 {
        let line = raw.get("blender", "ratio").map_or(0, |e| e.line);
        return Err(ConfigError::Value {
            line,
            message: format!("ratio must be at least 10, got {}", blender.ratio),
        });
    }

    let itinerary: Itinerary = raw.parsed(
        "output",
        "itinerary",
        "T_out,B,B,T_in,A".parse().expect("valid word"),
    )?;
    let chart = match raw.get("output", "start_chart") {
        None => Chart::P,
        Some(e) => match e.value.as_str() {
            "P" => Chart::P,
            "Q" => Chart::Q,
            other => {
                return Err(ConfigError::Value {
                    line: e.line,
                    message: format!("start_chart must be P or Q, got `{other}`"),
                })
            }
        },
    };
    let start = match raw.list("output", "start")? {
        None => ChartPoint::new(chart, vec![0.0; s], 1.0, {
            let mut z = vec![0.0; u];
            z[0] = 1.0 / 32.0;
            z
        }),
        Some((_, v)) if v.len() == s + 1 + u => {
            ChartPoint::new(chart, v[..s].to_vec(), v[s], v[s + 1..].to_vec())
        }
        Some((line, v)) => {
            return Err(ConfigError::Dimension(format!(
                "line {line}: start has {} coordinates, expected {}",
                v.len(),
                s + 1 + u
            )))
        }
    };
    let output = OutputConfig {
        dir: PathBuf::from(raw.get("output", "dir").map_or("out", |e| e.value.as_str())),
        itinerary,
        start,
    };
    Ok(RunConfig {
        params,
        cycle,
        t: raw.parsed("model", "t", 0.0)?,
        solver,
        blender,
        output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_reference_model() {
        let c = parse_config("").unwrap();
        assert_eq!(c.cycle, SimpleCycle::reference());
        assert_eq!(c.solver.eps, 0.01);
        assert_eq!(c.output.itinerary.to_string(), "T_out,B,B,T_in,A");
    }

    #[test]
    fn explicit_reference_values_match() {
        let doc = "# reference\n[model]\nmu = 2.0\nlambda = 0.5\ny_plus = 1.0\ny_minus = -1.0\n";
        assert_eq!(parse_config(doc).unwrap().cycle, SimpleCycle::reference());
    }

    #[test]
    fn lists_may_be_bracketed() {
        let a = parse_config("[output]\nstart = [0, 1, 0.5]\n").unwrap();
        let b = parse_config("[output]\nstart = 0, 1, 0.5\n").unwrap();
        assert_eq!(a.output.start, b.output.start);
        assert_eq!(a.output.start.y, 1.0);
    }

    #[test]
    fn expanding_lambda_is_rejected() {
        assert!(matches!(
            parse_config("[model]\nlambda = 1.5\n"),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let e = parse_config("[model]\n\nmu = 2\nbogus = 1\n").unwrap_err();
        assert_eq!(
            e,
            ConfigError::Syntax {
                line: 4,
                message: "unknown key `bogus` in [model]".into()
            }
        );
        let e = parse_config("[solver]\neps = abc\n").unwrap_err();
        assert!(matches!(e, ConfigError::Value { line: 2, .. }));
        assert!(matches!(
            parse_config("mu = 2\n"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_config("[plots]\n"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_config("[model]\nmu = 2\nmu = 2\n"),
            Err(ConfigError::Syntax { line: 3, .. })
        ));
    }

    #[test]
    fn matrices_must_fit_the_dimensions() {
        let e = parse_config("[model]\ns = 2\na_s = 0.25, 0, 0\n").unwrap_err();
        assert!(matches!(e, ConfigError::Dimension(_)), "{e}");
        // conservative s = 2 model
        let doc = "[model]\ns = 2\na_s = 0.5, 0, 0, 0.5\nb_s = 0.5\nb_u = 8\nout_s = 0.5\nout_u = 4\nin_s = 0.5\n";
        let c = parse_config(doc).unwrap();
        assert_eq!(c.cycle.dims.s(), 2);
        assert_eq!(c.params.b_s[(1, 1)], 0.5);
        assert_eq!(c.output.start.x.len(), 2);
    }

    #[test]
    fn orbit_settings() {
        let c = parse_config(
            "[output]\nitinerary = \"A, A\"\nstart = 0.5, 0.25, 0.125\ndir = runs/a\n",
        )
        .unwrap();
        assert_eq!(c.output.itinerary.to_string(), "A,A");
        assert_eq!(
            c.output.start,
            ChartPoint::new(Chart::P, vec![0.5], 0.25, vec![0.125])
        );
        assert_eq!(c.output.dir, PathBuf::from("runs/a"));
    }
}
