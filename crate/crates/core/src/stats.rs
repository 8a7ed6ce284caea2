//! Tie-corrected Spearman correlation and iteration aggregates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Paired (quality, citation) observations of equal length.
#[derive(Debug, Clone, Copy)]
pub struct PairedSample<'a> {
    x: &'a [f64],
    y: &'a [f64],
}

impl<'a> PairedSample<'a> {
    pub fn new(x: &'a [f64], y: &'a [f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidParameter(format!(
                "paired sample lengths differ ({} vs {})",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::InvalidParameter(
                "paired sample needs at least 2 observations".into(),
            ));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Ranks `1..=n`, with each tied group receiving the mean of the ranks it spans.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_unstable_by(|&a, &b| values[a].total_cmp(&values[b]));

    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let v = values[order[start]];
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == v {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation of two equal-length slices.
///
/// Fails with [`Error::DegenerateInput`] when either side is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateInput("first variable is constant"));
    }
    if syy == 0.0 {
        return Err(Error::DegenerateInput("second variable is constant"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman's rho as the Pearson correlation of average ranks.
pub fn spearman_rho(sample: PairedSample<'_>) -> Result<f64> {
    let rx = average_ranks(sample.x);
    let ry = average_ranks(sample.y);
    pearson(&rx, &ry)
}

/// Convenience wrapper over [`spearman_rho`] for raw slices.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    spearman_rho(PairedSample::new(x, y)?)
}

/// Mean with a normal-approximation confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub mean: f64,
    pub half_width: f64,
    pub level: f64,
}

fn z_for_level(level: f64) -> Option<f64> {
    const TABLE: [(f64, f64); 3] = [(0.90, 1.644854), (0.95, 1.959964), (0.99, 2.575829)];
    TABLE
        .iter()
        .find(|(l, _)| (l - level).abs() < 1e-9)
        .map(|&(_, z)| z)
}

/// `mean ± z · sd / √n` using the sample (n − 1) standard deviation.
pub fn mean_and_ci(values: &[f64], level: f64) -> Result<IntervalEstimate> {
    if values.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "confidence interval needs at least 2 values, got {}",
            values.len()
        )));
    }
    let z = z_for_level(level)
        .ok_or_else(|| Error::InvalidParameter(format!("unsupported confidence level {level}")))?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(IntervalEstimate {
        mean,
        half_width: z * var.sqrt() / n.sqrt(),
        level,
    })
}
