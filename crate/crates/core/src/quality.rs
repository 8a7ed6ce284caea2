//! Quality-score distributions and per-level citation means.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, Seed};

pub const LEVELS: usize = 5;

/// A quality rating on the 0..=4 star scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct QualityLevel(u8);

impl QualityLevel {
    pub fn new(value: u8) -> Result<Self> {
        if (value as usize) < LEVELS {
            Ok(Self(value))
        } else {
            Err(Error::InvalidParameter(format!(
                "quality level {value} outside 0..={}",
                LEVELS - 1
            )))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl TryFrom<u8> for QualityLevel {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Self::new(v)
    }
}

impl From<QualityLevel> for u8 {
    fn from(q: QualityLevel) -> u8 {
        q.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionKind {
    /// REF 2014-like, skewed toward 3* and 4*.
    Selective,
    /// Equal share at every level.
    NonSelective,
    Custom,
}

impl DistributionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DistributionKind::Selective => "selective",
            DistributionKind::NonSelective => "non-selective",
            DistributionKind::Custom => "custom",
        }
    }
}

impl fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistributionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "selective" => Ok(Self::Selective),
            "non-selective" | "non_selective" => Ok(Self::NonSelective),
            "custom" => Ok(Self::Custom),
            other => Err(Error::InvalidParameter(format!(
                "unknown distribution '{other}' (expected selective, non-selective or custom)"
            ))),
        }
    }
}

/// Share of articles at each quality level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityDistribution {
    kind: DistributionKind,
    proportions: [f64; LEVELS],
}

impl QualityDistribution {
    pub fn preset(kind: DistributionKind) -> Result<Self> {
        let proportions = match kind {
            DistributionKind::Selective => [0.006, 0.035, 0.240, 0.495, 0.224],
            DistributionKind::NonSelective => [0.2; LEVELS],
            DistributionKind::Custom => {
                return Err(Error::InvalidParameter(
                    "custom distributions need explicit proportions".into(),
                ))
            }
        };
        Ok(Self { kind, proportions })
    }

    pub fn selective() -> Self {
        Self::preset(DistributionKind::Selective).expect("preset")
    }

    pub fn non_selective() -> Self {
        Self::preset(DistributionKind::NonSelective).expect("preset")
    }

    pub fn custom(proportions: [f64; LEVELS]) -> Result<Self> {
        if proportions.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "proportions must be finite and non-negative: {proportions:?}"
            )));
        }
        let sum: f64 = proportions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "proportions sum to {sum}, expected 1"
            )));
        }
        Ok(Self {
            kind: DistributionKind::Custom,
            proportions,
        })
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn proportions(&self) -> &[f64; LEVELS] {
        &self.proportions
    }

    /// Stable identifier used in tables and cache keys.
    pub fn label(&self) -> String {
        match self.kind {
            DistributionKind::Custom => {
                let parts: Vec<String> = self.proportions.iter().map(|p| p.to_string()).collect();
                format!("custom:{}", parts.join("/"))
            }
            k => k.as_str().to_string(),
        }
    }

    /// Inverse of [`label`](Self::label).
    pub fn from_label(label: &str) -> Result<Self> {
        if let Some(rest) = label.strip_prefix("custom:") {
            let parsed: std::result::Result<Vec<f64>, _> =
                rest.split('/').map(str::parse::<f64>).collect();
            let values = parsed
                .map_err(|e| Error::InvalidParameter(format!("bad custom label '{label}': {e}")))?;
            let arr: [f64; LEVELS] = values.try_into().map_err(|_| {
                Error::InvalidParameter(format!("custom label '{label}' needs {LEVELS} values"))
            })?;
            return Self::custom(arr);
        }
        Self::preset(label.parse()?)
    }

    /// Largest-remainder apportionment of `n` articles over the levels.
    ///
    /// Leftover articles go to the largest fractional parts, lower level
    /// first on ties.
    pub fn level_counts(&self, n: usize) -> [usize; LEVELS] {
        let exact: Vec<f64> = self.proportions.iter().map(|p| p * n as f64).collect();
        let mut counts = [0usize; LEVELS];
        for (c, e) in counts.iter_mut().zip(&exact) {
            *c = e.floor() as usize;
        }
        let assigned: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..LEVELS).collect();
        order.sort_by(|&a, &b| {
            let fa = exact[a] - exact[a].floor();
            let fb = exact[b] - exact[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for &i in order.iter().take(n.saturating_sub(assigned)) {
            counts[i] += 1;
        }
        counts
    }

    /// `n` quality scores with exact largest-remainder counts, shuffled by `seed`.
    pub fn sample_quality_vector(&self, n: usize, seed: Seed) -> Vec<QualityLevel> {
        let counts = self.level_counts(n);
        let mut out = Vec::with_capacity(n);
        for (level, &count) in counts.iter().enumerate() {
            out.extend(std::iter::repeat_n(QualityLevel(level as u8), count));
        }
        out.shuffle(&mut seed::rng(seed));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationshipShape {
    /// Level means in ratio 1:2:4:8:16.
    Exponential,
    /// Level means in ratio 1:2:3:4:5.
    Linear,
}

impl RelationshipShape {
    pub fn ratios(self) -> [f64; LEVELS] {
        match self {
            RelationshipShape::Exponential => [1.0, 2.0, 4.0, 8.0, 16.0],
            RelationshipShape::Linear => [1.0, 2.0, 3.0, 4.0, 5.0],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelationshipShape::Exponential => "exponential",
            RelationshipShape::Linear => "linear",
        }
    }
}

impl fmt::Display for RelationshipShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationshipShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential" => Ok(Self::Exponential),
            "linear" => Ok(Self::Linear),
            other => Err(Error::InvalidParameter(format!(
                "unknown relationship '{other}' (expected exponential or linear)"
            ))),
        }
    }
}

/// Expected citations per level: a common multiplier times the shape ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelMeans {
    pub multiplier: f64,
    pub means: [f64; LEVELS],
}

/// Choose the multiplier so the distribution-weighted mean equals `target_mean`.
pub fn resolve_level_means(
    dist: &QualityDistribution,
    shape: RelationshipShape,
    target_mean: f64,
) -> Result<LevelMeans> {
    if !(target_mean.is_finite() && target_mean > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "target mean must be positive, got {target_mean}"
        )));
    }
    let ratios = shape.ratios();
    let weighted: f64 = dist
        .proportions()
        .iter()
        .zip(&ratios)
        .map(|(p, r)| p * r)
        .sum();
    let multiplier = target_mean / weighted;
    Ok(LevelMeans {
        multiplier,
        means: ratios.map(|r| multiplier * r),
    })
}
