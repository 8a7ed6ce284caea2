//! Merge experiments at single grid points and over parameter sweeps.
//!
//! Seeds are derived from the master seed by position only:
//! cell `c` uses `derive(master, c)`, and inside a point iteration `i`
//! subset `s` uses `derive_path(point_seed, [i, s])`. Results therefore
//! do not depend on how work is scheduled across threads.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::citation::{sample_citation_counts, CalibratedSet, Calibrator};
use crate::error::{Error, Result};
use crate::quality::{QualityDistribution, QualityLevel, RelationshipShape};
use crate::seed::{self, Seed, STREAM_CITATIONS, STREAM_QUALITY};
use crate::stats::{self, IntervalEstimate};

pub const CI_LEVEL: f64 = 0.95;

/// One constituent article set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetParams {
    pub dist: QualityDistribution,
    pub shape: RelationshipShape,
    pub mean: f64,
    pub rho: f64,
    pub n: usize,
}

impl SubsetParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!(
                "subset needs at least 2 articles, got {}",
                self.n
            )));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "subset correlation must lie in (0, 1), got {}",
                self.rho
            )));
        }
        if !(self.mean.is_finite() && self.mean > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "subset mean must be positive, got {}",
                self.mean
            )));
        }
        Ok(())
    }

    pub fn with_rho(self, rho: f64) -> Self {
        Self { rho, ..self }
    }

    pub fn with_mean(self, mean: f64) -> Self {
        Self { mean, ..self }
    }
}

/// Simulated articles: one quality score and one citation count each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArticleSet {
    pub qualities: Vec<QualityLevel>,
    pub citations: Vec<u64>,
}

impl ArticleSet {
    pub fn len(&self) -> usize {
        self.qualities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qualities.is_empty()
    }

    /// Spearman correlation between quality and citations within this set.
    pub fn spearman(&self) -> Result<f64> {
        let (q, c) = self.as_f64();
        stats::spearman(&q, &c)
    }

    pub fn mean_citations(&self) -> f64 {
        self.citations.iter().sum::<u64>() as f64 / self.len() as f64
    }

    fn as_f64(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.qualities.iter().map(|q| q.value() as f64).collect(),
            self.citations.iter().map(|&c| c as f64).collect(),
        )
    }

    /// Concatenate sets into one merged sample.
    pub fn merged<'a>(sets: impl IntoIterator<Item = &'a ArticleSet>) -> ArticleSet {
        let mut out = ArticleSet {
            qualities: Vec::new(),
            citations: Vec::new(),
        };
        for s in sets {
            out.qualities.extend_from_slice(&s.qualities);
            out.citations.extend_from_slice(&s.citations);
        }
        out
    }
}

pub fn generate_set(
    params: &SubsetParams,
    calibrated: &CalibratedSet,
    seed: Seed,
) -> Result<ArticleSet> {
    params.validate()?;
    if (calibrated.target_rho - params.rho).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "calibration targets rho {} but subset asks for {}",
            calibrated.target_rho, params.rho
        )));
    }
    let qualities = params
        .dist
        .sample_quality_vector(params.n, seed::derive(seed, STREAM_QUALITY));
    let citations = sample_citation_counts(
        &qualities,
        &calibrated.spec,
        seed::derive(seed, STREAM_CITATIONS),
    );
    Ok(ArticleSet {
        qualities,
        citations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    /// A subset's target correlation could not be calibrated.
    SkippedUnreachable,
    /// Some merged sample had constant citations, so rho was undefined.
    Degenerate,
}

impl PointStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::SkippedUnreachable => "skipped_unreachable",
            PointStatus::Degenerate => "degenerate",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ok" => Some(Self::Ok),
            "skipped_unreachable" => Some(Self::SkippedUnreachable),
            "degenerate" => Some(Self::Degenerate),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub params: Vec<SubsetParams>,
    pub iterations: usize,
    pub combined_rho: Option<IntervalEstimate>,
    pub per_iteration_rhos: Vec<f64>,
    pub status: PointStatus,
    pub diagnostic: Option<String>,
}

impl PointResult {
    fn not_ok(
        params: &[SubsetParams],
        iterations: usize,
        status: PointStatus,
        why: String,
    ) -> Self {
        Self {
            params: params.to_vec(),
            iterations,
            combined_rho: None,
            per_iteration_rhos: Vec::new(),
            status,
            diagnostic: Some(why),
        }
    }

    pub fn mean(&self) -> Option<f64> {
        self.combined_rho.map(|c| c.mean)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Serial,
    /// Uses rayon when the `parallel` feature is on; serial otherwise.
    #[default]
    Parallel,
}

fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Two-subset parameter grid: set 1 is a template whose rho varies,
/// set 2 shares its distribution and shape and varies in mean and rho.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub set1: SubsetParams,
    pub set2_n: usize,
    pub set1_rhos: Vec<f64>,
    pub set2_rhos: Vec<f64>,
    pub set2_means: Vec<f64>,
    pub iterations: usize,
    pub master_seed: Seed,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.set1_rhos.is_empty() || self.set2_rhos.is_empty() || self.set2_means.is_empty() {
            return Err(Error::InvalidParameter(
                "sweep grid axes must be non-empty".into(),
            ));
        }
        if self.iterations < 2 {
            return Err(Error::InvalidParameter(
                "at least 2 iterations are needed for a confidence interval".into(),
            ));
        }
        for (i, _) in self.cells().enumerate() {
            let [a, b] = self.cell(i);
            a.validate()?;
            b.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.set1_rhos.len() * self.set2_rhos.len() * self.set2_means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.set1_rhos.iter().flat_map(move |&r1| {
            self.set2_rhos
                .iter()
                .flat_map(move |&r2| self.set2_means.iter().map(move |&m2| (r1, r2, m2)))
        })
    }

    /// Subset parameters for cell `index` (set-1 rho major, set-2 mean minor).
    pub fn cell(&self, index: usize) -> [SubsetParams; 2] {
        let per_r1 = self.set2_rhos.len() * self.set2_means.len();
        let r1 = self.set1_rhos[index / per_r1];
        let rest = index % per_r1;
        let r2 = self.set2_rhos[rest / self.set2_means.len()];
        let m2 = self.set2_means[rest % self.set2_means.len()];
        let set1 = self.set1.with_rho(r1);
        let set2 = SubsetParams {
            mean: m2,
            rho: r2,
            n: self.set2_n,
            ..self.set1
        };
        [set1, set2]
    }

    pub fn cell_seed(&self, index: usize) -> Seed {
        seed::derive(self.master_seed, index as u64)
    }
}

/// Runs experiments against a shared calibrator.
#[derive(Debug, Default)]
pub struct Engine {
    pub calibrator: Calibrator,
    pub execution: Execution,
}

impl Engine {
    pub fn new(calibrator: Calibrator, execution: Execution) -> Self {
        Self {
            calibrator,
            execution,
        }
    }

    pub fn calibrate(&self, params: &SubsetParams) -> Result<CalibratedSet> {
        self.calibrator
            .calibrate(&params.dist, params.shape, params.mean, params.rho)
    }

    /// Generate one subset by calibrating (cached) and sampling.
    pub fn simulate_set(&self, params: &SubsetParams, seed: Seed) -> Result<ArticleSet> {
        let cal = self.calibrate(params)?;
        generate_set(params, &cal, seed)
    }

    /// Merge `sets` for each iteration and aggregate the combined correlations.
    pub fn run_point(
        &self,
        sets: &[SubsetParams],
        iterations: usize,
        master_seed: Seed,
    ) -> Result<PointResult> {
        if sets.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "a merge needs at least 2 subsets, got {}",
                sets.len()
            )));
        }
        if iterations < 2 {
            return Err(Error::InvalidParameter(
                "at least 2 iterations are needed for a confidence interval".into(),
            ));
        }
        for s in sets {
            s.validate()?;
        }

        let mut calibrated = Vec::with_capacity(sets.len());
        for s in sets {
            match self.calibrate(s) {
                Ok(c) => calibrated.push(c),
                Err(e) if e.is_unreachable() => {
                    return Ok(PointResult::not_ok(
                        sets,
                        iterations,
                        PointStatus::SkippedUnreachable,
                        format!("mean {} rho {}: {e}", s.mean, s.rho),
                    ));
                }
                Err(e) => return Err(e),
            }
        }

        let rhos: Vec<Result<f64>> = map_indexed(self.execution, iterations, |it| {
            let generated = sets
                .iter()
                .zip(&calibrated)
                .enumerate()
                .map(|(s, (p, c))| {
                    generate_set(p, c, seed::derive_path(master_seed, &[it as u64, s as u64]))
                })
                .collect::<Result<Vec<_>>>()?;
            ArticleSet::merged(&generated).spearman()
        });

        let mut per_iteration = Vec::with_capacity(iterations);
        for r in rhos {
            match r {
                Ok(v) => per_iteration.push(v),
                Err(Error::DegenerateInput(why)) => {
                    return Ok(PointResult::not_ok(
                        sets,
                        iterations,
                        PointStatus::Degenerate,
                        why.to_string(),
                    ))
                }
                Err(e) => return Err(e),
            }
        }
        let ci = stats::mean_and_ci(&per_iteration, CI_LEVEL)?;
        Ok(PointResult {
            params: sets.to_vec(),
            iterations,
            combined_rho: Some(ci),
            per_iteration_rhos: per_iteration,
            status: PointStatus::Ok,
            diagnostic: None,
        })
    }

    /// Calibrate every distinct subset configuration of the grid up front.
    fn prime_calibrations(&self, grid: &SweepGrid) {
        let mut distinct: BTreeSet<(u64, u64)> = BTreeSet::new();
        for i in 0..grid.len() {
            for p in grid.cell(i) {
                distinct.insert((p.mean.to_bits(), p.rho.to_bits()));
            }
        }
        let distinct: Vec<_> = distinct.into_iter().collect();
        let template = grid.set1;
        map_indexed(self.execution, distinct.len(), |i| {
            let (m, r) = distinct[i];
            let p = template
                .with_mean(f64::from_bits(m))
                .with_rho(f64::from_bits(r));
            // outcome lands in the cache; failures are reported per cell
            let _ = self.calibrate(&p);
        });
    }

    /// One result per cell, in cell order.
    pub fn run_sweep(&self, grid: &SweepGrid) -> Result<Vec<PointResult>> {
        grid.validate()?;
        self.prime_calibrations(grid);
        log::info!(
            "sweep: {} cells, {} iterations each",
            grid.len(),
            grid.iterations
        );
        map_indexed(self.execution, grid.len(), |i| {
            let cell = grid.cell(i);
            let r = self.run_point(&cell, grid.iterations, grid.cell_seed(i));
            log::debug!("cell {i} done");
            r
        })
        .into_iter()
        .collect()
    }
}
