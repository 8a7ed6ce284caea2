//! Discretised lognormal citation counts and sigma calibration.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::RwLock;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quality::{
    resolve_level_means, LevelMeans, QualityDistribution, QualityLevel, RelationshipShape,
};
use crate::seed::{self, Seed, STREAM_CITATIONS, STREAM_QUALITY};
use crate::stats;

pub const SIGMA_MIN: f64 = 1e-3;
pub const SIGMA_MAX: f64 = 6.0;
pub const CALIBRATION_TOLERANCE: f64 = 0.005;
pub const MAX_BISECTION_STEPS: usize = 60;
pub const DEFAULT_CALIBRATION_N: usize = 200_000;
pub const DEFAULT_CALIBRATION_SEED: Seed = 0x05EE_DCA1_1B8A_7E01;

/// Offset added to each level mean before truncation.
pub const TRUNCATION_OFFSET: f64 = 0.5;

/// How a level mean maps onto the lognormal location parameter.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum MeanConvention {
    /// `mu = ln(m + 0.5) - sigma^2 / 2`: the arithmetic mean is sigma-invariant.
    #[default]
    Arithmetic,
    /// `mu = ln(m + 0.5)`: the median is fixed instead.
    LogMedian,
}

impl MeanConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            MeanConvention::Arithmetic => "arithmetic",
            MeanConvention::LogMedian => "log_median",
        }
    }
}

impl fmt::Display for MeanConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MeanConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arithmetic" => Ok(Self::Arithmetic),
            "log_median" | "log-median" => Ok(Self::LogMedian),
            other => Err(Error::InvalidParameter(format!(
                "unknown mean convention '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormalSpec {
    pub level_means: LevelMeans,
    pub sigma: f64,
    pub mean_convention: MeanConvention,
}

impl LognormalSpec {
    pub fn new(
        level_means: LevelMeans,
        sigma: f64,
        mean_convention: MeanConvention,
    ) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self {
            level_means,
            sigma,
            mean_convention,
        })
    }

    /// Log-scale location for one quality level.
    pub fn location(&self, level: QualityLevel) -> f64 {
        let shifted = (self.level_means.means[level.index()] + TRUNCATION_OFFSET).ln();
        match self.mean_convention {
            MeanConvention::Arithmetic => shifted - 0.5 * self.sigma * self.sigma,
            MeanConvention::LogMedian => shifted,
        }
    }

    fn locations(&self) -> [f64; 5] {
        std::array::from_fn(|i| self.location(QualityLevel::new(i as u8).expect("level")))
    }
}

fn truncate(log_value: f64) -> u64 {
    // saturating float-to-int cast; negative/NaN cannot occur for exp()
    log_value.exp().floor() as u64
}

/// One discretised lognormal count per article: `floor(exp(mu_level + sigma * z))`.
pub fn sample_citation_counts(
    qualities: &[QualityLevel],
    spec: &LognormalSpec,
    seed: Seed,
) -> Vec<u64> {
    let locations = spec.locations();
    let mut rng = seed::rng(seed);
    qualities
        .iter()
        .map(|q| {
            let z: f64 = rng.sample(StandardNormal);
            truncate(locations[q.index()] + spec.sigma * z)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedSet {
    pub spec: LognormalSpec,
    pub target_rho: f64,
    pub achieved_rho: f64,
    pub calibration_sample_size: usize,
}

/// Fixed calibration sample: quality ranks plus one standard normal per article.
///
/// Every trial sigma reuses the same normals, so the achieved correlation is
/// a deterministic, nearly monotone function of sigma.
struct CalibrationSample {
    qualities: Vec<QualityLevel>,
    quality_ranks: Vec<f64>,
    normals: Vec<f64>,
}

impl CalibrationSample {
    fn new(dist: &QualityDistribution, n: usize, seed: Seed) -> Self {
        let qualities = dist.sample_quality_vector(n, seed::derive(seed, STREAM_QUALITY));
        let qf: Vec<f64> = qualities.iter().map(|q| q.value() as f64).collect();
        let quality_ranks = stats::average_ranks(&qf);
        let mut rng = seed::rng(seed::derive(seed, STREAM_CITATIONS));
        let normals = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        Self {
            qualities,
            quality_ranks,
            normals,
        }
    }

    fn rho(&self, spec: &LognormalSpec) -> f64 {
        let locations = spec.locations();
        let counts: Vec<f64> = self
            .qualities
            .iter()
            .zip(&self.normals)
            .map(|(q, z)| truncate(locations[q.index()] + spec.sigma * z) as f64)
            .collect();
        let ranks = stats::average_ranks(&counts);
        // all-zero counts carry no rank information
        stats::pearson(&self.quality_ranks, &ranks).unwrap_or(0.0)
    }
}

/// Bisection (in log sigma) for the spread that gives `target_rho`.
pub fn calibrate_sigma(
    dist: &QualityDistribution,
    shape: RelationshipShape,
    target_mean: f64,
    target_rho: f64,
    calib_n: usize,
    convention: MeanConvention,
    seed: Seed,
) -> Result<CalibratedSet> {
    if !(target_rho > 0.0 && target_rho < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target correlation must lie in (0, 1), got {target_rho}"
        )));
    }
    if calib_n < 2 {
        return Err(Error::InvalidParameter(
            "calibration sample needs at least 2 articles".into(),
        ));
    }
    let level_means = resolve_level_means(dist, shape, target_mean)?;
    let sample = CalibrationSample::new(dist, calib_n, seed);
    let spec_at = |sigma: f64| LognormalSpec {
        level_means,
        sigma,
        mean_convention: convention,
    };
    let done = |sigma: f64, achieved: f64| CalibratedSet {
        spec: spec_at(sigma),
        target_rho,
        achieved_rho: achieved,
        calibration_sample_size: calib_n,
    };

    let ceiling = sample.rho(&spec_at(SIGMA_MIN));
    if (ceiling - target_rho).abs() <= CALIBRATION_TOLERANCE {
        return Ok(done(SIGMA_MIN, ceiling));
    }
    if ceiling < target_rho {
        return Err(Error::UnreachableTarget {
            target: target_rho,
            ceiling,
        });
    }
    let floor = sample.rho(&spec_at(SIGMA_MAX));
    if (floor - target_rho).abs() <= CALIBRATION_TOLERANCE {
        return Ok(done(SIGMA_MAX, floor));
    }
    if floor > target_rho {
        return Err(Error::NonBracketing {
            target: target_rho,
            floor,
        });
    }

    let (mut lo, mut hi) = (SIGMA_MIN.ln(), SIGMA_MAX.ln());
    let mut best = (SIGMA_MIN, ceiling);
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let sigma = mid.exp();
        let achieved = sample.rho(&spec_at(sigma));
        if (achieved - target_rho).abs() < (best.1 - target_rho).abs() {
            best = (sigma, achieved);
        }
        if (achieved - target_rho).abs() <= CALIBRATION_TOLERANCE {
            return Ok(done(sigma, achieved));
        }
        // larger spread lowers the correlation
        if achieved > target_rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::CalibrationStalled {
        target: target_rho,
        sigma: best.0,
        achieved: best.1,
    })
}

/// Cache key; floats are stored by bit pattern.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheKey {
    pub dist: String,
    pub shape: RelationshipShape,
    pub mean_bits: u64,
    pub target_bits: u64,
    pub calib_n: usize,
    pub convention: MeanConvention,
}

impl CacheKey {
    pub fn new(
        dist: &QualityDistribution,
        shape: RelationshipShape,
        mean: f64,
        target_rho: f64,
        calib_n: usize,
        convention: MeanConvention,
    ) -> Self {
        Self {
            dist: dist.label(),
            shape,
            mean_bits: mean.to_bits(),
            target_bits: target_rho.to_bits(),
            calib_n,
            convention,
        }
    }

    pub fn mean(&self) -> f64 {
        f64::from_bits(self.mean_bits)
    }

    pub fn target_rho(&self) -> f64 {
        f64::from_bits(self.target_bits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CachedOutcome {
    Calibrated { sigma: f64, achieved_rho: f64 },
    Unreachable,
}

const CACHE_HEADER: &str = "dist,shape,mean,target_rho,calib_n,convention,sigma,achieved_rho";

/// Thread-safe calibration memo, optionally persisted to a text file.
#[derive(Debug, Default)]
pub struct CalibrationCache {
    entries: RwLock<HashMap<CacheKey, CachedOutcome>>,
}

impl CalibrationCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &CacheKey) -> Option<CachedOutcome> {
        self.entries.read().expect("cache lock").get(key).copied()
    }

    pub fn insert(&self, key: CacheKey, outcome: CachedOutcome) {
        self.entries
            .write()
            .expect("cache lock")
            .insert(key, outcome);
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    /// Snapshot of all entries, sorted by key.
    pub fn entries(&self) -> Vec<(CacheKey, CachedOutcome)> {
        let mut all: Vec<_> = self
            .entries
            .read()
            .expect("cache lock")
            .iter()
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        all.sort_by(|a, b| a.0.cmp(&b.0));
        all
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Load records written by [`save`](Self::save). Missing files yield an empty cache.
    pub fn load(path: &Path) -> Result<Self> {
        let cache = Self::new();
        let file = match std::fs::File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(cache),
            Err(e) => return Err(Error::io(path, e)),
        };
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if line.is_empty() || line == CACHE_HEADER {
                continue;
            }
            let (key, outcome) = parse_cache_record(line)
                .map_err(|m| Error::format(path, format!("line {}: {m}", lineno + 1)))?;
            cache.insert(key, outcome);
        }
        Ok(cache)
    }

    /// Write successful calibrations, sorted by key, one per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let entries = self.entries.read().expect("cache lock");
        let mut rows: Vec<_> = entries
            .iter()
            .filter_map(|(k, v)| match v {
                CachedOutcome::Calibrated {
                    sigma,
                    achieved_rho,
                } => Some((k, *sigma, *achieved_rho)),
                CachedOutcome::Unreachable => None,
            })
            .collect();
        rows.sort_by(|a, b| a.0.cmp(b.0));
        let mut out = Vec::new();
        writeln!(out, "{CACHE_HEADER}").expect("vec write");
        for (k, sigma, achieved) in rows {
            writeln!(
                out,
                "{},{},{:?},{:?},{},{},{:?},{:?}",
                k.dist,
                k.shape,
                k.mean(),
                k.target_rho(),
                k.calib_n,
                k.convention,
                sigma,
                achieved
            )
            .expect("vec write");
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn parse_cache_record(line: &str) -> std::result::Result<(CacheKey, CachedOutcome), String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 8 {
        return Err(format!("expected 8 fields, found {}", fields.len()));
    }
    let num = |i: usize| -> std::result::Result<f64, String> {
        fields[i]
            .parse::<f64>()
            .map_err(|e| format!("field {}: {e}", i + 1))
    };
    let dist = QualityDistribution::from_label(fields[0]).map_err(|e| e.to_string())?;
    let shape: RelationshipShape = fields[1].parse().map_err(|e: Error| e.to_string())?;
    let calib_n = fields[4]
        .parse::<usize>()
        .map_err(|e| format!("field 5: {e}"))?;
    let convention: MeanConvention = fields[5].parse().map_err(|e: Error| e.to_string())?;
    let key = CacheKey::new(&dist, shape, num(2)?, num(3)?, calib_n, convention);
    Ok((
        key,
        CachedOutcome::Calibrated {
            sigma: num(6)?,
            achieved_rho: num(7)?,
        },
    ))
}

/// Calibration settings plus a shared cache.
#[derive(Debug)]
pub struct Calibrator {
    pub calib_n: usize,
    pub convention: MeanConvention,
    pub seed: Seed,
    pub cache: CalibrationCache,
}

impl Default for Calibrator {
    fn default() -> Self {
        Self::new(DEFAULT_CALIBRATION_N, MeanConvention::Arithmetic)
    }
}

impl Calibrator {
    pub fn new(calib_n: usize, convention: MeanConvention) -> Self {
        Self {
            calib_n,
            convention,
            seed: DEFAULT_CALIBRATION_SEED,
            cache: CalibrationCache::new(),
        }
    }

    pub fn with_cache(mut self, cache: CalibrationCache) -> Self {
        self.cache = cache;
        self
    }

    pub fn key(
        &self,
        dist: &QualityDistribution,
        shape: RelationshipShape,
        mean: f64,
        rho: f64,
    ) -> CacheKey {
        CacheKey::new(dist, shape, mean, rho, self.calib_n, self.convention)
    }

    /// Cached [`calibrate_sigma`]. Unreachable targets are remembered too.
    pub fn calibrate(
        &self,
        dist: &QualityDistribution,
        shape: RelationshipShape,
        mean: f64,
        rho: f64,
    ) -> Result<CalibratedSet> {
        let key = self.key(dist, shape, mean, rho);
        match self.cache.get(&key) {
            Some(CachedOutcome::Calibrated {
                sigma,
                achieved_rho,
            }) => {
                let level_means = resolve_level_means(dist, shape, mean)?;
                return Ok(CalibratedSet {
                    spec: LognormalSpec::new(level_means, sigma, self.convention)?,
                    target_rho: rho,
                    achieved_rho,
                    calibration_sample_size: self.calib_n,
                });
            }
            Some(CachedOutcome::Unreachable) => {
                // reproduce the diagnostic; the uncached path is deterministic
            }
            None => {}
        }
        let result = calibrate_sigma(
            dist,
            shape,
            mean,
            rho,
            self.calib_n,
            self.convention,
            self.seed,
        );
        match &result {
            Ok(c) => self.cache.insert(
                key,
                CachedOutcome::Calibrated {
                    sigma: c.spec.sigma,
                    achieved_rho: c.achieved_rho,
                },
            ),
            Err(e) if e.is_unreachable() => self.cache.insert(key, CachedOutcome::Unreachable),
            Err(_) => {}
        }
        result
    }
}
