//! Recover constituent-subset correlations from an observed combined
//! correlation, by forward simulation or by interpolating a sweep table.
//!
//! A single observed scalar identifies one unknown, so only two cases are
//! supported: all subsets share one correlation, or the first subset's
//! correlation is known and the rest share the unknown.

use serde::{Deserialize, Serialize};

use crate::citation::CALIBRATION_TOLERANCE;
use crate::engine::{Engine, PointStatus, SubsetParams};
use crate::error::{Error, Result};
use crate::quality::{QualityDistribution, RelationshipShape};
use crate::results::ResultRow;
use crate::seed::{self, Seed};

pub const SEARCH_MIN: f64 = 0.01;
pub const SEARCH_MAX: f64 = 0.99;
pub const MAX_STEPS: usize = 40;
pub const DEFAULT_FORWARD_ITERATIONS: usize = 20;

/// A subset whose correlation is unknown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetShape {
    pub dist: QualityDistribution,
    pub shape: RelationshipShape,
    pub mean: f64,
    pub n: usize,
}

impl SubsetShape {
    fn with_rho(&self, rho: f64) -> SubsetParams {
        SubsetParams {
            dist: self.dist,
            shape: self.shape,
            mean: self.mean,
            rho,
            n: self.n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    EqualRhos,
    FixedRho1(f64),
}

impl std::str::FromStr for Assumption {
    type Err = Error;

    /// `equal` or `fixed:R1`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "equal" {
            return Ok(Self::EqualRhos);
        }
        if let Some(v) = s.strip_prefix("fixed:") {
            let r: f64 = v
                .parse()
                .map_err(|e| Error::InvalidParameter(format!("bad fixed rho '{v}': {e}")))?;
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "fixed rho must lie in (0, 1), got {r}"
                )));
            }
            return Ok(Self::FixedRho1(r));
        }
        Err(Error::InvalidParameter(format!(
            "unknown assumption '{s}' (expected equal or fixed:R1)"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionProblem {
    pub observed_combined_rho: f64,
    pub subsets: Vec<SubsetShape>,
    pub assumption: Assumption,
}

impl InversionProblem {
    fn validate(&self) -> Result<()> {
        if self.subsets.len() < 2 {
            return Err(Error::InvalidParameter(
                "inversion needs at least 2 subsets".into(),
            ));
        }
        if !(self.observed_combined_rho > -1.0 && self.observed_combined_rho < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "observed correlation must lie in (-1, 1), got {}",
                self.observed_combined_rho
            )));
        }
        Ok(())
    }

    /// Per-subset correlations when the unknown takes value `rho`.
    pub fn rhos_for(&self, rho: f64) -> Vec<f64> {
        (0..self.subsets.len())
            .map(|i| match self.assumption {
                Assumption::FixedRho1(r1) if i == 0 => r1,
                _ => rho,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionEstimate {
    pub rhos: Vec<f64>,
    /// The free parameter: the common rho, or the rho shared by subsets 2..N.
    pub unknown_rho: f64,
    pub residual: f64,
    pub iterations_used: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct InversionOptions {
    pub forward_iterations: usize,
    pub max_steps: usize,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            forward_iterations: DEFAULT_FORWARD_ITERATIONS,
            max_steps: MAX_STEPS,
        }
    }
}

/// Combined correlation as a function of the unknown; `None` when a subset
/// target cannot be calibrated.
struct Forward<'a> {
    engine: &'a Engine,
    problem: &'a InversionProblem,
    iterations: usize,
    seed: Seed,
    evaluations: usize,
}

impl Forward<'_> {
    fn eval(&mut self, rho: f64) -> Result<Option<f64>> {
        self.evaluations += 1;
        let params: Vec<SubsetParams> = self
            .problem
            .subsets
            .iter()
            .zip(self.problem.rhos_for(rho))
            .map(|(s, r)| s.with_rho(r))
            .collect();
        let point = self.engine.run_point(&params, self.iterations, self.seed)?;
        Ok(match point.status {
            PointStatus::Ok => point.mean(),
            _ => None,
        })
    }

    /// First attainable value scanning `candidates` in order.
    fn endpoint(&mut self, candidates: &[f64]) -> Result<Option<(f64, f64)>> {
        for &c in candidates {
            if let Some(v) = self.eval(c)? {
                return Ok(Some((c, v)));
            }
        }
        Ok(None)
    }
}

/// Bisection on the unknown rho using simulated merges as the forward model.
pub fn estimate_subset_correlations(
    engine: &Engine,
    problem: &InversionProblem,
    tolerance: f64,
    master_seed: Seed,
    options: InversionOptions,
) -> Result<InversionEstimate> {
    problem.validate()?;
    if tolerance.is_nan() || tolerance < CALIBRATION_TOLERANCE {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tolerance} is below the simulation noise floor {CALIBRATION_TOLERANCE}"
        )));
    }
    let observed = problem.observed_combined_rho;
    let mut fwd = Forward {
        engine,
        problem,
        iterations: options.forward_iterations,
        seed: seed::derive(master_seed, 0),
        evaluations: 0,
    };

    let probes = [0.1, 0.5, 0.9];
    let mut probe_values = Vec::with_capacity(3);
    for p in probes {
        probe_values.push(fwd.eval(p)?.ok_or_else(|| {
            Error::NoConvergence(format!("forward model unattainable at rho {p}"))
        })?);
    }
    if !probe_values.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::NoConvergence(format!(
            "forward model not increasing over {probes:?}: {probe_values:?}"
        )));
    }

    let (mut lo, f_lo) = fwd
        .endpoint(&[SEARCH_MIN, 0.02, 0.05, 0.1])?
        .expect("0.1 probe succeeded");
    let (mut hi, f_hi) = fwd
        .endpoint(&[SEARCH_MAX, 0.98, 0.95, 0.9])?
        .expect("0.9 probe succeeded");
    let finish = |rho: f64, value: f64, evals: usize| InversionEstimate {
        rhos: problem.rhos_for(rho),
        unknown_rho: rho,
        residual: (value - observed).abs(),
        iterations_used: evals,
    };
    if (f_lo - observed).abs() <= tolerance {
        return Ok(finish(lo, f_lo, fwd.evaluations));
    }
    if (f_hi - observed).abs() <= tolerance {
        return Ok(finish(hi, f_hi, fwd.evaluations));
    }
    if observed < f_lo || observed > f_hi {
        return Err(Error::OutOfRange {
            observed,
            min: f_lo,
            max: f_hi,
        });
    }

    for _ in 0..options.max_steps {
        let mid = 0.5 * (lo + hi);
        let v = fwd.eval(mid)?.ok_or_else(|| {
            Error::NoConvergence(format!("forward model unattainable at rho {mid}"))
        })?;
        if (v - observed).abs() <= tolerance {
            return Ok(finish(mid, v, fwd.evaluations));
        }
        if v < observed {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence(format!(
        "{} bisection steps without reaching tolerance {tolerance}",
        options.max_steps
    )))
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1.0)
}

/// Interpolate the unknown rho from a precomputed two-subset sweep table.
pub fn estimate_from_table(
    problem: &InversionProblem,
    rows: &[ResultRow],
) -> Result<InversionEstimate> {
    problem.validate()?;
    let [s1, s2] = problem.subsets.as_slice() else {
        return Err(Error::InvalidParameter(
            "table inversion supports exactly 2 subsets".into(),
        ));
    };
    let dist = s1.dist.label();
    let shape = s1.shape.to_string();
    let mut curve: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| {
            r.distribution == dist
                && r.relationship == shape
                && same(r.set1_mean, s1.mean)
                && same(r.set2_mean, s2.mean)
                && match problem.assumption {
                    Assumption::EqualRhos => same(r.set1_rho, r.set2_rho),
                    Assumption::FixedRho1(r1) => same(r.set1_rho, r1),
                }
        })
        .filter_map(|r| r.combined_rho_mean.map(|v| (r.set2_rho, v)))
        .collect();
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    if curve.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "table holds {} usable cells for this configuration; need at least 2",
            curve.len()
        )));
    }
    if !curve.windows(2).all(|w| w[0].1 < w[1].1) {
        return Err(Error::NoConvergence(
            "tabulated combined correlation is not increasing".into(),
        ));
    }
    let observed = problem.observed_combined_rho;
    let (first, last) = (curve[0], curve[curve.len() - 1]);
    if observed < first.1 || observed > last.1 {
        return Err(Error::OutOfRange {
            observed,
            min: first.1,
            max: last.1,
        });
    }
    let seg = curve
        .windows(2)
        .find(|w| observed <= w[1].1)
        .expect("observed within curve range");
    let (a, b) = (seg[0], seg[1]);
    let rho = a.0 + (observed - a.1) / (b.1 - a.1) * (b.0 - a.0);
    Ok(InversionEstimate {
        rhos: problem.rhos_for(rho),
        unknown_rho: rho,
        residual: 0.0,
        iterations_used: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::citation::{Calibrator, MeanConvention};
    use crate::engine::Execution;

    fn shape(mean: f64) -> SubsetShape {
        SubsetShape {
            dist: QualityDistribution::selective(),
            shape: RelationshipShape::Exponential,
            mean,
            n: 1000,
        }
    }

    fn engine() -> Engine {
        Engine::new(
            Calibrator::new(30_000, MeanConvention::Arithmetic),
            Execution::Parallel,
        )
    }

    #[test]
    fn assumption_parsing() {
        assert_eq!(
            "equal".parse::<Assumption>().unwrap(),
            Assumption::EqualRhos
        );
        assert_eq!(
            "fixed:0.3".parse::<Assumption>().unwrap(),
            Assumption::FixedRho1(0.3)
        );
        assert!("fixed:1.2".parse::<Assumption>().is_err());
        assert!("both".parse::<Assumption>().is_err());
    }

    #[test]
    fn rhos_follow_assumption() {
        let mut p = InversionProblem {
            observed_combined_rho: 0.4,
            subsets: vec![shape(20.0), shape(10.0), shape(5.0)],
            assumption: Assumption::EqualRhos,
        };
        assert_eq!(p.rhos_for(0.6), vec![0.6, 0.6, 0.6]);
        p.assumption = Assumption::FixedRho1(0.2);
        assert_eq!(p.rhos_for(0.6), vec![0.2, 0.6, 0.6]);
    }

    #[test]
    fn rejects_tight_tolerance_and_bad_problems() {
        let e = engine();
        let p = InversionProblem {
            observed_combined_rho: 0.4,
            subsets: vec![shape(20.0), shape(25.0)],
            assumption: Assumption::EqualRhos,
        };
        assert!(estimate_subset_correlations(&e, &p, 0.001, 1, Default::default()).is_err());
        let single = InversionProblem {
            subsets: vec![shape(20.0)],
            ..p.clone()
        };
        assert!(estimate_subset_correlations(&e, &single, 0.01, 1, Default::default()).is_err());
        let wild = InversionProblem {
            observed_combined_rho: 1.0,
            ..p
        };
        assert!(estimate_subset_correlations(&e, &wild, 0.01, 1, Default::default()).is_err());
    }

    #[test]
    fn equal_means_recover_observed() {
        let e = engine();
        let p = InversionProblem {
            observed_combined_rho: 0.7,
            subsets: vec![shape(20.0), shape(20.0)],
            assumption: Assumption::EqualRhos,
        };
        let est = estimate_subset_correlations(&e, &p, 0.01, 5, Default::default()).unwrap();
        assert!((est.unknown_rho - 0.7).abs() <= 0.03, "{est:?}");
        assert!(est.residual <= 0.01);
        let again = estimate_subset_correlations(&e, &p, 0.01, 5, Default::default()).unwrap();
        assert_eq!(est, again);
    }

    #[test]
    fn fixed_rho1_round_trip() {
        let e = engine();
        let params = [shape(20.0).with_rho(0.3), shape(10.0).with_rho(0.7)];
        let observed = e.run_point(&params, 20, 99).unwrap().mean().unwrap();
        let p = InversionProblem {
            observed_combined_rho: observed,
            subsets: vec![shape(20.0), shape(10.0)],
            assumption: Assumption::FixedRho1(0.3),
        };
        let est = estimate_subset_correlations(&e, &p, 0.005, 5, Default::default()).unwrap();
        assert_eq!(est.rhos[0], 0.3);
        assert!((est.rhos[1] - 0.7).abs() <= 0.05, "{est:?}");
    }

    #[test]
    fn unattainable_high_observation_is_out_of_range() {
        let e = engine();
        let p = InversionProblem {
            observed_combined_rho: 0.99,
            subsets: vec![shape(20.0), shape(1.0)],
            assumption: Assumption::EqualRhos,
        };
        let err = estimate_subset_correlations(&e, &p, 0.01, 5, Default::default()).unwrap_err();
        assert!(matches!(err, Error::OutOfRange { .. }), "{err}");
    }

    fn table_row(r1: f64, r2: f64, v: Option<f64>) -> ResultRow {
        ResultRow {
            distribution: "selective".into(),
            relationship: "exponential".into(),
            set1_mean: 20.0,
            set1_rho: r1,
            set2_mean: 25.0,
            set2_rho: r2,
            combined_rho_mean: v,
            ci_half_width: v.map(|_| 0.001),
            iterations: 20,
            status: if v.is_some() {
                PointStatus::Ok
            } else {
                PointStatus::SkippedUnreachable
            },
        }
    }

    #[test]
    fn table_interpolation() {
        let rows = vec![
            table_row(0.1, 0.1, Some(0.08)),
            table_row(0.5, 0.5, Some(0.40)),
            table_row(0.9, 0.9, Some(0.80)),
            table_row(0.1, 0.9, Some(0.30)),
        ];
        let p = InversionProblem {
            observed_combined_rho: 0.6,
            subsets: vec![shape(20.0), shape(25.0)],
            assumption: Assumption::EqualRhos,
        };
        let est = estimate_from_table(&p, &rows).unwrap();
        assert!((est.unknown_rho - 0.7).abs() < 1e-12);
        let above = InversionProblem {
            observed_combined_rho: 0.85,
            ..p.clone()
        };
        assert!(matches!(
            estimate_from_table(&above, &rows),
            Err(Error::OutOfRange { .. })
        ));
        let fixed = InversionProblem {
            observed_combined_rho: 0.2,
            assumption: Assumption::FixedRho1(0.1),
            ..p
        };
        let est = estimate_from_table(&fixed, &rows).unwrap();
        assert!((est.unknown_rho - (0.1 + 0.12 / 0.22 * 0.8)).abs() < 1e-12);
    }
}
