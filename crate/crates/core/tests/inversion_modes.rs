use citecorr::citation::{Calibrator, MeanConvention};
use citecorr::engine::{Engine, Execution, SubsetParams, SweepGrid};
use citecorr::inversion::{
    estimate_from_table, estimate_subset_correlations, Assumption, InversionProblem, SubsetShape,
};
use citecorr::quality::{QualityDistribution, RelationshipShape};
use citecorr::results::{parse_csv, rows_from_points, to_csv};

const N: usize = 1000;

fn shape(mean: f64) -> SubsetShape {
    SubsetShape {
        dist: QualityDistribution::selective(),
        shape: RelationshipShape::Exponential,
        mean,
        n: N,
    }
}

fn params(mean: f64, rho: f64) -> SubsetParams {
    SubsetParams {
        dist: QualityDistribution::selective(),
        shape: RelationshipShape::Exponential,
        mean,
        rho,
        n: N,
    }
}

#[test]
fn simulation_and_table_modes_agree_on_round_trips() {
    let engine = Engine::new(
        Calibrator::new(50_000, MeanConvention::Arithmetic),
        Execution::Parallel,
    );
    let tenths: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let grid = SweepGrid {
        set1: params(20.0, 0.1),
        set2_n: N,
        set1_rhos: tenths.clone(),
        set2_rhos: tenths,
        set2_means: vec![25.0],
        iterations: 20,
        master_seed: 31,
    };
    let rows = rows_from_points(&engine.run_sweep(&grid).unwrap()).unwrap();
    // go through the CSV so the table sees emitted precision
    let table = parse_csv(&to_csv(&rows), std::path::Path::new("table")).unwrap();

    for truth in [0.2, 0.5, 0.8] {
        let observed = engine
            .run_point(&[params(20.0, truth), params(25.0, truth)], 20, 1234)
            .unwrap()
            .mean()
            .unwrap();
        let problem = InversionProblem {
            observed_combined_rho: observed,
            subsets: vec![shape(20.0), shape(25.0)],
            assumption: Assumption::EqualRhos,
        };
        let sim =
            estimate_subset_correlations(&engine, &problem, 0.005, 77, Default::default()).unwrap();
        let tab = estimate_from_table(&problem, &table).unwrap();
        assert!(
            (sim.unknown_rho - truth).abs() <= 0.05,
            "sim {truth}: {sim:?}"
        );
        assert!(
            (tab.unknown_rho - truth).abs() <= 0.05,
            "table {truth}: {tab:?}"
        );
        assert!((sim.unknown_rho - tab.unknown_rho).abs() <= 0.05);
    }
}
