//! Run-spec documents (TOML) describing a complete experiment.
//!
//! ```toml
//! experiment = "sweep"          # sweep | point | invert | scatter
//! profile = "desk"              # desk | paper: default grids and sizes
//! distribution = "selective"    # selective | non-selective | custom (+ proportions)
//! relationship = "exponential"  # exponential | linear
//! master_seed = 42              # required
//! set2_mean_min = 1
//! set2_mean_max = 40
//! set2_mean_step = 1
//! ```
//!
//! Every key is optional except `master_seed`; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::citation::{
    CalibrationCache, Calibrator, MeanConvention, DEFAULT_CALIBRATION_N, DEFAULT_CALIBRATION_SEED,
};
use crate::engine::{Engine, Execution, SubsetParams, SweepGrid};
use crate::error::{Error, Result};
use crate::quality::{DistributionKind, QualityDistribution, RelationshipShape};
use crate::seed::Seed;

pub const MIN_CALIBRATION_N: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Sweep,
    Point,
    Invert,
    Scatter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// n = 1000, 20 iterations, coarse grids.
    #[default]
    Desk,
    /// n = 5000, 100 iterations, rho 0.1..0.9 by 0.1, set-2 mean 1..40 by 1.
    Paper,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRunSpec {
    experiment: Option<ExperimentKind>,
    profile: Option<Profile>,
    distribution: Option<String>,
    proportions: Option<Vec<f64>>,
    relationship: Option<String>,
    mean_convention: Option<String>,
    master_seed: Option<u64>,
    iterations: Option<usize>,
    n: Option<usize>,
    set1_mean: Option<f64>,
    set1_rho: Option<f64>,
    set1_rhos: Option<Vec<f64>>,
    set1_n: Option<usize>,
    set2_mean: Option<f64>,
    set2_means: Option<Vec<f64>>,
    set2_mean_min: Option<f64>,
    set2_mean_max: Option<f64>,
    set2_mean_step: Option<f64>,
    set2_rho: Option<f64>,
    set2_rhos: Option<Vec<f64>>,
    set2_n: Option<usize>,
    calibration_n: Option<usize>,
    calibration_seed: Option<u64>,
    calibration_cache: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    execution: Option<Execution>,
    jitter_seed: Option<u64>,
    inversion_iterations: Option<usize>,
    inversion_tolerance: Option<f64>,
}

/// Fully resolved and validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSpec {
    pub experiment: Option<ExperimentKind>,
    pub profile: Profile,
    pub distribution: QualityDistribution,
    pub relationship: RelationshipShape,
    pub mean_convention: MeanConvention,
    pub master_seed: Seed,
    pub iterations: usize,
    pub set1_mean: f64,
    pub set1_n: usize,
    pub set1_rhos: Vec<f64>,
    pub set2_n: usize,
    pub set2_means: Vec<f64>,
    pub set2_rhos: Vec<f64>,
    pub calibration_n: usize,
    pub calibration_seed: Seed,
    pub calibration_cache: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub execution: Execution,
    pub jitter_seed: Seed,
    pub inversion_iterations: usize,
    pub inversion_tolerance: f64,
}

fn field_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::RunSpec(format!("field `{field}`: {msg}"))
}

fn tenths() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

/// `min, min + step, ..., <= max`.
pub fn mean_range(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(field_err("set2_mean_step", "must be positive"));
    }
    if !(min > 0.0 && max >= min) {
        return Err(field_err(
            "set2_mean_min",
            format!("range {min}..{max} must be positive and ascending"),
        ));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| min + k as f64 * step).collect())
}

fn check_rho(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(field_err(field, format!("{v} outside (0, 1)")))
    }
}

fn check_mean(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(field_err(field, format!("{v} must be positive")))
    }
}

fn single_or_list(
    single_key: &str,
    single: Option<f64>,
    list_key: &str,
    list: Option<Vec<f64>>,
) -> Result<Option<Vec<f64>>> {
    match (single, list) {
        (Some(_), Some(_)) => Err(field_err(
            list_key,
            format!("conflicts with `{single_key}`; give one"),
        )),
        (Some(v), None) => Ok(Some(vec![v])),
        (None, Some(l)) if l.is_empty() => Err(field_err(list_key, "must not be empty")),
        (None, l) => Ok(l),
    }
}

/// Parse and validate a run-spec document.
pub fn parse_runspec(text: &str) -> Result<RunSpec> {
    let raw: RawRunSpec = toml::from_str(text).map_err(|e| Error::RunSpec(e.to_string()))?;
    resolve(raw)
}

pub fn load_runspec(path: &Path) -> Result<RunSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_runspec(&text).map_err(|e| match e {
        Error::RunSpec(m) => Error::format(path, m),
        other => other,
    })
}

fn resolve(raw: RawRunSpec) -> Result<RunSpec> {
    let master_seed = raw
        .master_seed
        .ok_or_else(|| field_err("master_seed", "is required"))?;
    let profile = raw.profile.unwrap_or_default();
    let (def_n, def_iter, def_r1, def_r2, def_m2) = match profile {
        Profile::Desk => (
            1000,
            20,
            vec![0.1, 0.5, 0.9],
            vec![0.1, 0.3, 0.5, 0.7, 0.9],
            vec![1.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0],
        ),
        Profile::Paper => (5000, 100, tenths(), tenths(), mean_range(1.0, 40.0, 1.0)?),
    };

    let distribution = match (raw.distribution.as_deref(), raw.proportions) {
        (Some("custom"), Some(p)) => {
            let arr: [f64; 5] = p
                .try_into()
                .map_err(|_| field_err("proportions", "needs exactly 5 values"))?;
            QualityDistribution::custom(arr).map_err(|e| field_err("proportions", e))?
        }
        (Some("custom"), None) => return Err(field_err("proportions", "required for custom")),
        (_, Some(_)) => {
            return Err(field_err(
                "proportions",
                "only valid with distribution = \"custom\"",
            ))
        }
        (name, None) => {
            let kind: DistributionKind = name
                .unwrap_or("selective")
                .parse()
                .map_err(|e| field_err("distribution", e))?;
            QualityDistribution::preset(kind).map_err(|e| field_err("distribution", e))?
        }
    };
    let relationship: RelationshipShape = raw
        .relationship
        .as_deref()
        .unwrap_or("exponential")
        .parse()
        .map_err(|e| field_err("relationship", e))?;
    let mean_convention: MeanConvention = raw
        .mean_convention
        .as_deref()
        .unwrap_or("arithmetic")
        .parse()
        .map_err(|e| field_err("mean_convention", e))?;

    let iterations = raw.iterations.unwrap_or(def_iter);
    if iterations < 2 {
        return Err(field_err("iterations", "must be at least 2"));
    }
    let set1_n = raw.set1_n.or(raw.n).unwrap_or(def_n);
    let set2_n = raw.set2_n.or(raw.n).unwrap_or(def_n);
    for (k, v) in [("set1_n", set1_n), ("set2_n", set2_n)] {
        if v < 2 {
            return Err(field_err(k, "must be at least 2"));
        }
    }
    let set1_mean = raw.set1_mean.unwrap_or(20.0);
    check_mean("set1_mean", set1_mean)?;

    let set1_rhos =
        single_or_list("set1_rho", raw.set1_rho, "set1_rhos", raw.set1_rhos)?.unwrap_or(def_r1);
    let set2_rhos =
        single_or_list("set2_rho", raw.set2_rho, "set2_rhos", raw.set2_rhos)?.unwrap_or(def_r2);
    for &r in &set1_rhos {
        check_rho("set1_rhos", r)?;
    }
    for &r in &set2_rhos {
        check_rho("set2_rhos", r)?;
    }

    let range_keys = [raw.set2_mean_min, raw.set2_mean_max, raw.set2_mean_step];
    let ranged = match range_keys {
        [None, None, None] => None,
        [Some(a), Some(b), Some(s)] => Some(mean_range(a, b, s)?),
        _ => {
            return Err(field_err(
                "set2_mean_min",
                "set2_mean_min, set2_mean_max and set2_mean_step go together",
            ))
        }
    };
    let listed = single_or_list("set2_mean", raw.set2_mean, "set2_means", raw.set2_means)?;
    let set2_means = match (listed, ranged) {
        (Some(_), Some(_)) => {
            return Err(field_err(
                "set2_means",
                "conflicts with the set2_mean_* range",
            ))
        }
        (Some(l), None) | (None, Some(l)) => l,
        (None, None) => def_m2,
    };
    for &m in &set2_means {
        check_mean("set2_means", m)?;
    }

    let calibration_n = raw.calibration_n.unwrap_or(DEFAULT_CALIBRATION_N);
    if calibration_n < MIN_CALIBRATION_N {
        return Err(field_err(
            "calibration_n",
            format!("must be at least {MIN_CALIBRATION_N}"),
        ));
    }
    let inversion_tolerance = raw.inversion_tolerance.unwrap_or(0.01);
    if inversion_tolerance.is_nan() || inversion_tolerance < crate::citation::CALIBRATION_TOLERANCE
    {
        return Err(field_err("inversion_tolerance", "must be at least 0.005"));
    }
    let inversion_iterations = raw
        .inversion_iterations
        .unwrap_or(crate::inversion::DEFAULT_FORWARD_ITERATIONS);
    if inversion_iterations < 2 {
        return Err(field_err("inversion_iterations", "must be at least 2"));
    }

    Ok(RunSpec {
        experiment: raw.experiment,
        profile,
        distribution,
        relationship,
        mean_convention,
        master_seed,
        iterations,
        set1_mean,
        set1_n,
        set1_rhos,
        set2_n,
        set2_means,
        set2_rhos,
        calibration_n,
        calibration_seed: raw.calibration_seed.unwrap_or(DEFAULT_CALIBRATION_SEED),
        calibration_cache: raw.calibration_cache,
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        execution: raw.execution.unwrap_or_default(),
        jitter_seed: raw
            .jitter_seed
            .unwrap_or_else(|| crate::seed::derive(master_seed, crate::seed::STREAM_JITTER)),
        inversion_iterations,
        inversion_tolerance,
    })
}

impl RunSpec {
    /// Error unless the document's `experiment` (if given) matches `kind`.
    pub fn expect_kind(&self, kind: ExperimentKind) -> Result<()> {
        match self.experiment {
            Some(k) if k != kind => Err(field_err(
                "experiment",
                format!("document describes {k:?}, command runs {kind:?}"),
            )),
            _ => Ok(()),
        }
    }

    fn template(&self, mean: f64, rho: f64, n: usize) -> SubsetParams {
        SubsetParams {
            dist: self.distribution,
            shape: self.relationship,
            mean,
            rho,
            n,
        }
    }

    pub fn sweep_grid(&self) -> SweepGrid {
        SweepGrid {
            set1: self.template(self.set1_mean, self.set1_rhos[0], self.set1_n),
            set2_n: self.set2_n,
            set1_rhos: self.set1_rhos.clone(),
            set2_rhos: self.set2_rhos.clone(),
            set2_means: self.set2_means.clone(),
            iterations: self.iterations,
            master_seed: self.master_seed,
        }
    }

    fn single(field: &str, values: &[f64]) -> Result<f64> {
        match values {
            [v] => Ok(*v),
            _ => Err(field_err(
                field,
                format!("needs exactly one value here, found {}", values.len()),
            )),
        }
    }

    /// The two subsets of a point (or scatter) experiment.
    pub fn point_subsets(&self) -> Result<[SubsetParams; 2]> {
        Ok([
            self.template(
                self.set1_mean,
                Self::single("set1_rho", &self.set1_rhos)?,
                self.set1_n,
            ),
            self.template(
                Self::single("set2_mean", &self.set2_means)?,
                Self::single("set2_rho", &self.set2_rhos)?,
                self.set2_n,
            ),
        ])
    }

    pub fn set2_mean(&self) -> Result<f64> {
        Self::single("set2_mean", &self.set2_means)
    }

    /// Engine configured from this spec, with the calibration cache loaded if set.
    pub fn engine(&self) -> Result<Engine> {
        let mut cal = Calibrator::new(self.calibration_n, self.mean_convention);
        cal.seed = self.calibration_seed;
        if let Some(path) = &self.calibration_cache {
            cal = cal.with_cache(CalibrationCache::load(path)?);
        }
        Ok(Engine::new(cal, self.execution))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_profile_defaults() {
        let spec = parse_runspec("experiment = \"sweep\"\nprofile = \"paper\"\nmaster_seed = 1\n")
            .unwrap();
        assert_eq!(spec.iterations, 100);
        assert_eq!((spec.set1_n, spec.set2_n), (5000, 5000));
        assert_eq!(spec.set2_means.len(), 40);
        assert_eq!(spec.set2_means[0], 1.0);
        assert_eq!(spec.set2_means[39], 40.0);
        assert_eq!(spec.set1_rhos, tenths());
        assert_eq!(spec.sweep_grid().len(), 9 * 9 * 40);
        assert_eq!(spec.set1_mean, 20.0);
    }

    #[test]
    fn explicit_mean_range() {
        let spec = parse_runspec(
            "master_seed = 3\nset2_mean_min = 1\nset2_mean_max = 40\nset2_mean_step = 1\n",
        )
        .unwrap();
        assert_eq!(spec.set2_means, (1..=40).map(f64::from).collect::<Vec<_>>());
        let half = parse_runspec(
            "master_seed = 3\nset2_mean_min = 1\nset2_mean_max = 3\nset2_mean_step = 0.5\n",
        )
        .unwrap();
        assert_eq!(half.set2_means, vec![1.0, 1.5, 2.0, 2.5, 3.0]);
    }

    #[test]
    fn seed_is_mandatory() {
        let err = parse_runspec("experiment = \"sweep\"\n").unwrap_err();
        assert!(err.to_string().contains("master_seed"), "{err}");
    }

    #[test]
    fn unknown_keys_are_errors_with_location() {
        let err = parse_runspec("master_seed = 1\niteratons = 5\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("iteratons"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn range_violations_named() {
        for (doc, field) in [
            ("master_seed = 1\nset1_rho = 1.5\n", "set1_rhos"),
            ("master_seed = 1\nset2_mean = -1\n", "set2_means"),
            ("master_seed = 1\niterations = 1\n", "iterations"),
            ("master_seed = 1\ncalibration_n = 10\n", "calibration_n"),
            (
                "master_seed = 1\ndistribution = \"weird\"\n",
                "distribution",
            ),
            (
                "master_seed = 1\nset2_mean = 3\nset2_means = [1, 2]\n",
                "set2_means",
            ),
            ("master_seed = 1\nset2_mean_min = 3\n", "set2_mean_min"),
            (
                "master_seed = 1\ndistribution = \"custom\"\n",
                "proportions",
            ),
        ] {
            let err = parse_runspec(doc).unwrap_err().to_string();
            assert!(err.contains(field), "{doc:?} -> {err}");
        }
    }

    #[test]
    fn custom_distribution_and_point_subsets() {
        let spec = parse_runspec(
            r#"
experiment = "point"
master_seed = 9
distribution = "custom"
proportions = [0.1, 0.2, 0.3, 0.2, 0.2]
relationship = "linear"
mean_convention = "log_median"
set1_rho = 0.5
set2_mean = 25
set2_rho = 0.9
n = 300
"#,
        )
        .unwrap();
        let [a, b] = spec.point_subsets().unwrap();
        assert_eq!(a.dist.kind(), DistributionKind::Custom);
        assert_eq!((a.mean, a.rho, a.n), (20.0, 0.5, 300));
        assert_eq!((b.mean, b.rho, b.n), (25.0, 0.9, 300));
        assert_eq!(spec.mean_convention, MeanConvention::LogMedian);
        assert!(spec.expect_kind(ExperimentKind::Point).is_ok());
        assert!(spec.expect_kind(ExperimentKind::Sweep).is_err());
    }

    #[test]
    fn point_needs_single_values() {
        let spec = parse_runspec("master_seed = 1\n").unwrap();
        assert!(spec.point_subsets().is_err());
    }
}
