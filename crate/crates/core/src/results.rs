//! Result tables: CSV for diffing, JSON with the run spec echoed alongside.

use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{PointResult, PointStatus};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 10] = [
    "distribution",
    "relationship",
    "set1_mean",
    "set1_rho",
    "set2_mean",
    "set2_rho",
    "combined_rho_mean",
    "ci_half_width",
    "iterations",
    "status",
];

/// One grid cell of a two-subset experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub distribution: String,
    pub relationship: String,
    pub set1_mean: f64,
    pub set1_rho: f64,
    pub set2_mean: f64,
    pub set2_rho: f64,
    pub combined_rho_mean: Option<f64>,
    pub ci_half_width: Option<f64>,
    pub iterations: usize,
    pub status: PointStatus,
}

impl ResultRow {
    /// Flatten a two-subset point result. Extra subsets are not representable.
    pub fn from_point(point: &PointResult) -> Result<Self> {
        let [a, b] = point.params.as_slice() else {
            return Err(Error::InvalidParameter(format!(
                "result rows describe 2-subset merges, got {} subsets",
                point.params.len()
            )));
        };
        Ok(Self {
            distribution: a.dist.label(),
            relationship: a.shape.to_string(),
            set1_mean: a.mean,
            set1_rho: a.rho,
            set2_mean: b.mean,
            set2_rho: b.rho,
            combined_rho_mean: point.combined_rho.map(|c| c.mean),
            ci_half_width: point.combined_rho.map(|c| c.half_width),
            iterations: point.iterations,
            status: point.status,
        })
    }

    /// Round numeric fields to the precision written to CSV.
    pub fn rounded(&self) -> Self {
        let r = |v: f64| round_sig(v, 6);
        Self {
            set1_mean: r(self.set1_mean),
            set1_rho: r(self.set1_rho),
            set2_mean: r(self.set2_mean),
            set2_rho: r(self.set2_rho),
            combined_rho_mean: self.combined_rho_mean.map(r),
            ci_half_width: self.ci_half_width.map(r),
            ..self.clone()
        }
    }

    fn order(&self, other: &Self) -> Ordering {
        (self.distribution.as_str(), self.relationship.as_str())
            .cmp(&(other.distribution.as_str(), other.relationship.as_str()))
            .then(self.set1_mean.total_cmp(&other.set1_mean))
            .then(self.set1_rho.total_cmp(&other.set1_rho))
            .then(self.set2_rho.total_cmp(&other.set2_rho))
            .then(self.set2_mean.total_cmp(&other.set2_mean))
    }
}

pub fn rows_from_points(points: &[PointResult]) -> Result<Vec<ResultRow>> {
    points.iter().map(ResultRow::from_point).collect()
}

/// Sort by configuration, then set-1 rho, set-2 rho and set-2 mean ascending.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| a.order(b));
}

pub fn round_sig(v: f64, digits: usize) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.*e}", digits - 1, v)
        .parse()
        .expect("float repr")
}

/// Six significant digits, shortest representation (`20`, `0.5`, `0.283457`).
pub fn format_sig6(v: f64) -> String {
    let r = round_sig(v, 6);
    if r == r.trunc() && r.abs() < 1e15 {
        format!("{}", r as i64)
    } else {
        format!("{r}")
    }
}

fn record(row: &ResultRow) -> [String; 10] {
    let opt = |v: Option<f64>| v.map(format_sig6).unwrap_or_default();
    [
        row.distribution.clone(),
        row.relationship.clone(),
        format_sig6(row.set1_mean),
        format_sig6(row.set1_rho),
        format_sig6(row.set2_mean),
        format_sig6(row.set2_rho),
        opt(row.combined_rho_mean),
        opt(row.ci_half_width),
        row.iterations.to_string(),
        row.status.as_str().to_string(),
    ]
}

/// Render rows as CSV text in canonical order.
pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory csv");
    for row in &sorted {
        w.write_record(record(row)).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
}

pub fn json_path_for(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

#[derive(Serialize)]
struct JsonDocument<'a, S: Serialize> {
    runspec: &'a S,
    rows: Vec<ResultRow>,
}

/// Write `rows` to `path` as CSV and to the sibling `.json` with `runspec` echoed.
pub fn write_results<S: Serialize>(rows: &[ResultRow], runspec: &S, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, to_csv(rows)).map_err(|e| Error::io(path, e))?;

    let mut sorted: Vec<ResultRow> = rows.iter().map(ResultRow::rounded).collect();
    sort_rows(&mut sorted);
    let doc = JsonDocument {
        runspec,
        rows: sorted,
    };
    let json_path = json_path_for(path);
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::format(&json_path, e))?;
    std::fs::write(&json_path, text + "\n").map_err(|e| Error::io(&json_path, e))
}

pub fn parse_csv(text: &str, origin: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::format(origin, e))?
        .clone();
    if headers.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::format(
            origin,
            format!(
                "unexpected header '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::format(origin, e))?;
        let bad = |field: &str, msg: String| {
            Error::format(origin, format!("line {line}, field {field}: {msg}"))
        };
        let num = |idx: usize| -> Result<f64> {
            rec[idx]
                .parse::<f64>()
                .map_err(|e| bad(CSV_HEADER[idx], e.to_string()))
        };
        let opt = |idx: usize| -> Result<Option<f64>> {
            if rec[idx].is_empty() {
                Ok(None)
            } else {
                num(idx).map(Some)
            }
        };
        let status = PointStatus::parse(&rec[9])
            .ok_or_else(|| bad("status", format!("unknown status '{}'", &rec[9])))?;
        let row = ResultRow {
            distribution: rec[0].to_string(),
            relationship: rec[1].to_string(),
            set1_mean: num(2)?,
            set1_rho: num(3)?,
            set2_mean: num(4)?,
            set2_rho: num(5)?,
            combined_rho_mean: opt(6)?,
            ci_half_width: opt(7)?,
            iterations: rec[8]
                .parse()
                .map_err(|e: std::num::ParseIntError| bad("iterations", e.to_string()))?,
            status,
        };
        if (status == PointStatus::Ok) != row.combined_rho_mean.is_some() {
            return Err(bad(
                "combined_rho_mean",
                "must be present exactly when status is ok".into(),
            ));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(set2_mean: f64, set2_rho: f64, value: Option<f64>) -> ResultRow {
        ResultRow {
            distribution: "selective".into(),
            relationship: "exponential".into(),
            set1_mean: 20.0,
            set1_rho: 0.5,
            set2_mean,
            set2_rho,
            combined_rho_mean: value,
            ci_half_width: value.map(|_| 0.00123456789),
            iterations: 20,
            status: if value.is_some() {
                PointStatus::Ok
            } else {
                PointStatus::SkippedUnreachable
            },
        }
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(20.0), "20");
        assert_eq!(format_sig6(0.5), "0.5");
        assert_eq!(format_sig6(0.283456789), "0.283457");
        assert_eq!(format_sig6(0.00123456789), "0.00123457");
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(1234567.0), "1234570");
    }

    #[test]
    fn empty_table_is_header_only() {
        assert_eq!(to_csv(&[]), CSV_HEADER.join(",") + "\n");
    }

    #[test]
    fn skipped_rows_leave_combined_fields_empty() {
        let csv = to_csv(&[row(1.0, 0.9, None)]);
        let line = csv.lines().nth(1).unwrap();
        assert_eq!(
            line,
            "selective,exponential,20,0.5,1,0.9,,,20,skipped_unreachable"
        );
    }

    #[test]
    fn canonical_row_order() {
        let rows = vec![
            row(10.0, 0.9, Some(0.3)),
            row(1.0, 0.9, Some(0.4)),
            row(40.0, 0.1, Some(0.2)),
        ];
        let parsed = parse_csv(&to_csv(&rows), Path::new("mem")).unwrap();
        let keys: Vec<(f64, f64)> = parsed.iter().map(|r| (r.set2_rho, r.set2_mean)).collect();
        assert_eq!(keys, vec![(0.1, 40.0), (0.9, 1.0), (0.9, 10.0)]);
    }

    #[test]
    fn rejects_foreign_header_and_bad_status() {
        assert!(parse_csv("a,b\n1,2\n", Path::new("mem")).is_err());
        let mut text = to_csv(&[row(1.0, 0.9, Some(0.4))]);
        text = text.replace(",ok", ",maybe");
        let err = parse_csv(&text, Path::new("mem")).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn writes_csv_and_json_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/results.csv");
        let spec = serde_json::json!({"master_seed": 7});
        write_results(&[row(5.0, 0.5, Some(0.41))], &spec, &path).unwrap();
        assert_eq!(read_results(&path).unwrap().len(), 1);
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(json_path_for(&path)).unwrap()).unwrap();
        assert_eq!(json["runspec"]["master_seed"], 7);
        assert_eq!(json["rows"][0]["set2_mean"], 5.0);
    }

    proptest! {
        #[test]
        fn csv_round_trip_at_emitted_precision(
            cells in proptest::collection::vec(
                (0.1f64..100.0, 0.01f64..0.99, proptest::option::of(-1.0f64..1.0)), 0..30)
        ) {
            let rows: Vec<ResultRow> = cells.into_iter().map(|(m, r, v)| row(m, r, v)).collect();
            let mut expected: Vec<ResultRow> = rows.iter().map(ResultRow::rounded).collect();
            sort_rows(&mut expected);
            let parsed = parse_csv(&to_csv(&rows), Path::new("mem")).unwrap();
            prop_assert_eq!(parsed, expected);
        }
    }
}
