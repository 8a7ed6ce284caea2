//! Command implementations behind the `citecorr` binary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::engine::{Engine, PointResult};
use crate::error::{Error, Result};
use crate::inversion::{
    estimate_from_table, estimate_subset_correlations, Assumption, InversionEstimate,
    InversionOptions, InversionProblem, SubsetShape,
};
use crate::results::{self, format_sig6, ResultRow};
use crate::runspec::{ExperimentKind, RunSpec};
use crate::seed;
use crate::svg;

fn save_cache(spec: &RunSpec, engine: &Engine) -> Result<()> {
    if let Some(path) = &spec.calibration_cache {
        engine.calibrator.cache.save(path)?;
    }
    Ok(())
}

#[derive(Debug)]
pub struct SweepOutput {
    pub csv: PathBuf,
    pub figures: Vec<PathBuf>,
    pub rows: Vec<ResultRow>,
}

/// Run the grid, write `results.csv`/`results.json` and one figure per set-1 rho.
pub fn sweep(spec: &RunSpec) -> Result<SweepOutput> {
    spec.expect_kind(ExperimentKind::Sweep)?;
    let engine = spec.engine()?;
    let points = engine.run_sweep(&spec.sweep_grid())?;
    save_cache(spec, &engine)?;
    let mut rows = results::rows_from_points(&points)?;
    results::sort_rows(&mut rows);
    let csv = spec.output_dir.join("results.csv");
    results::write_results(&rows, spec, &csv)?;
    let figures = emit_figures(&rows, &spec.output_dir.join("figures"))?;
    Ok(SweepOutput { csv, figures, rows })
}

/// Run one merge, write `point.csv`/`point.json`.
pub fn point(spec: &RunSpec) -> Result<PointResult> {
    spec.expect_kind(ExperimentKind::Point)?;
    let engine = spec.engine()?;
    let result = engine.run_point(&spec.point_subsets()?, spec.iterations, spec.master_seed)?;
    save_cache(spec, &engine)?;
    let row = ResultRow::from_point(&result)?;
    results::write_results(&[row], spec, &spec.output_dir.join("point.csv"))?;
    Ok(result)
}

#[derive(Debug, Serialize)]
pub struct InversionReport<'a> {
    pub runspec: &'a RunSpec,
    pub problem: InversionProblem,
    pub mode: &'static str,
    pub estimate: InversionEstimate,
}

/// Estimate subset correlations consistent with `observed`, writing `inversion.json`.
///
/// With `table`, the estimate interpolates a sweep CSV instead of simulating.
pub fn invert(
    spec: &RunSpec,
    observed: f64,
    assumption: Assumption,
    table: Option<&Path>,
) -> Result<InversionEstimate> {
    spec.expect_kind(ExperimentKind::Invert)?;
    let shape = |mean, n| SubsetShape {
        dist: spec.distribution,
        shape: spec.relationship,
        mean,
        n,
    };
    let problem = InversionProblem {
        observed_combined_rho: observed,
        subsets: vec![
            shape(spec.set1_mean, spec.set1_n),
            shape(spec.set2_mean()?, spec.set2_n),
        ],
        assumption,
    };
    let (estimate, mode) = match table {
        Some(path) => (
            estimate_from_table(&problem, &results::read_results(path)?)?,
            "table",
        ),
        None => {
            let engine = spec.engine()?;
            let options = InversionOptions {
                forward_iterations: spec.inversion_iterations,
                ..Default::default()
            };
            let est = estimate_subset_correlations(
                &engine,
                &problem,
                spec.inversion_tolerance,
                spec.master_seed,
                options,
            )?;
            save_cache(spec, &engine)?;
            (est, "simulation")
        }
    };
    let report = InversionReport {
        runspec: spec,
        problem,
        mode,
        estimate: estimate.clone(),
    };
    let path = spec.output_dir.join("inversion.json");
    std::fs::create_dir_all(&spec.output_dir).map_err(|e| Error::io(&spec.output_dir, e))?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::format(&path, e))?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(estimate)
}

/// Simulate the two configured sets and plot them to `scatter.svg`.
pub fn scatter(spec: &RunSpec) -> Result<PathBuf> {
    spec.expect_kind(ExperimentKind::Scatter)?;
    let engine = spec.engine()?;
    let subsets = spec.point_subsets()?;
    let mut sets = Vec::with_capacity(2);
    for (i, p) in subsets.iter().enumerate() {
        sets.push(engine.simulate_set(p, seed::derive_path(spec.master_seed, &[0, i as u64]))?);
    }
    save_cache(spec, &engine)?;
    let labels: Vec<String> = subsets
        .iter()
        .map(|p| format!("mean {}, rho {}", format_sig6(p.mean), format_sig6(p.rho)))
        .collect();
    let path = spec.output_dir.join("scatter.svg");
    svg::emit_scatter_figure(
        &sets[0],
        &sets[1],
        [&labels[0], &labels[1]],
        spec.jitter_seed,
        &path,
    )?;
    Ok(path)
}

fn file_stem_part(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '-'
            }
        })
        .collect()
}

/// One line figure per (distribution, relationship, set-1 mean, set-1 rho) slice.
pub fn emit_figures(rows: &[ResultRow], outdir: &Path) -> Result<Vec<PathBuf>> {
    let mut groups: BTreeMap<(String, String, u64, u64), Vec<ResultRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((
                r.distribution.clone(),
                r.relationship.clone(),
                r.set1_mean.to_bits(),
                r.set1_rho.to_bits(),
            ))
            .or_default()
            .push(r.clone());
    }
    let mut written = Vec::with_capacity(groups.len());
    for ((dist, rel, m1, r1), slice) in groups {
        let name = format!(
            "{}_{}_mean{}_rho{}.svg",
            file_stem_part(&dist),
            file_stem_part(&rel),
            format_sig6(f64::from_bits(m1)),
            format_sig6(f64::from_bits(r1))
        );
        let path = outdir.join(name);
        svg::emit_line_figure(&slice, &path)?;
        written.push(path);
    }
    Ok(written)
}

/// `figures` subcommand: regenerate line figures from a results CSV.
pub fn figures_from_csv(csv: &Path, outdir: &Path) -> Result<Vec<PathBuf>> {
    emit_figures(&results::read_results(csv)?, outdir)
}
