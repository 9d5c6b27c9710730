//! CSV artefacts. Floats are written with 17 significant digits, so every
//! table parses back to bit-identical values.

use std::fs;
use std::path::Path;

use crate::baselines::ToySweepRow;
use crate::crossval::{CvCell, CvSummary};
use crate::error::{Error, Result};
use crate::metrics::MetricRow;
use crate::points::PointSet;
use crate::solver::{SolverTrace, StepRecord};

/// `v` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str, origin: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Csv {
        path: origin.into(),
        message: format!("not a number: {s:?}"),
    })
}

fn csv_err(origin: &str, e: impl std::fmt::Display) -> Error {
    Error::Csv {
        path: origin.into(),
        message: e.to_string(),
    }
}

fn to_csv(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// Records of `text`; the first line is treated as a header when it has a
/// non-numeric field.
fn records(text: &str, origin: &str) -> Result<(Option<Vec<String>>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut all = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(origin, e))?;
        all.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
    }
    let has_header = all
        .first()
        .is_some_and(|first| first.iter().any(|f| f.trim().parse::<f64>().is_err()));
    if has_header {
        let header = all.remove(0);
        Ok((Some(header), all))
    } else {
        Ok((None, all))
    }
}

fn numbered(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    (1..=d).map(move |i| format!("{prefix}_{i}"))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// One row per point, columns `x_1..x_d`.
pub fn points_to_csv(points: &PointSet) -> String {
    let header: Vec<String> = numbered("x", points.dim()).collect();
    to_csv(&header, points.rows().map(|r| r.iter().map(|v| fmt_f64(*v)).collect()))
}

/// Parses a point table; a header line is optional.
pub fn parse_points(text: &str, origin: &str) -> Result<PointSet> {
    let (_, rows) = records(text, origin)?;
    if rows.is_empty() {
        return Err(csv_err(origin, "no data rows"));
    }
    let d = rows[0].len();
    let mut data = Vec::with_capacity(rows.len() * d);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != d {
            return Err(csv_err(origin, format!("row {} has {} columns, expected {d}", i + 1, r.len())));
        }
        for f in r {
            data.push(parse_f64(f, origin)?);
        }
    }
    PointSet::new(d, data)
}

pub fn read_points(path: &Path) -> Result<PointSet> {
    parse_points(&read_text(path)?, &path.display().to_string())
}

const TRACE_FIXED: [&str; 7] = [
    "step",
    "g_hat",
    "data_term",
    "kl_term",
    "drift_mean",
    "drift_max",
    "taming_max",
];

pub fn trace_to_csv(trace: &SolverTrace, dim: usize) -> String {
    let header: Vec<String> = TRACE_FIXED
        .iter()
        .map(|s| s.to_string())
        .chain(numbered("mean", dim))
        .chain(numbered("var", dim))
        .collect();
    to_csv(
        &header,
        trace.records.iter().map(|r| {
            let mut row = vec![r.step.to_string()];
            row.extend(
                [r.g_hat, r.data_term, r.kl_term, r.drift_mean, r.drift_max, r.taming_max]
                    .iter()
                    .chain(&r.mean)
                    .chain(&r.var)
                    .map(|v| fmt_f64(*v)),
            );
            row
        }),
    )
}

pub fn parse_trace(text: &str, origin: &str) -> Result<SolverTrace> {
    let (_, rows) = records(text, origin)?;
    let mut trace = SolverTrace::default();
    for r in rows {
        if r.len() < TRACE_FIXED.len() || (r.len() - TRACE_FIXED.len()) % 2 != 0 {
            return Err(csv_err(origin, "trace row has the wrong number of columns"));
        }
        let d = (r.len() - TRACE_FIXED.len()) / 2;
        let v: Vec<f64> = r[1..].iter().map(|f| parse_f64(f, origin)).collect::<Result<_>>()?;
        trace.records.push(StepRecord {
            step: r[0].trim().parse().map_err(|_| csv_err(origin, "bad step"))?,
            g_hat: v[0],
            data_term: v[1],
            kl_term: v[2],
            drift_mean: v[3],
            drift_max: v[4],
            taming_max: v[5],
            mean: v[6..6 + d].to_vec(),
            var: v[6 + d..].to_vec(),
        });
    }
    Ok(trace)
}

/// Node coordinates `x_1..x_d` followed by one value column.
pub fn grid_to_csv(nodes: &PointSet, values: &[f64], value_name: &str) -> String {
    let header: Vec<String> = numbered("x", nodes.dim())
        .chain(std::iter::once(value_name.to_string()))
        .collect();
    to_csv(
        &header,
        nodes.rows().zip(values).map(|(x, v)| {
            x.iter().chain(std::iter::once(v)).map(|f| fmt_f64(*f)).collect()
        }),
    )
}

/// Inverse of [`grid_to_csv`].
pub fn parse_grid(text: &str, origin: &str) -> Result<(PointSet, Vec<f64>)> {
    let table = parse_points(text, origin)?;
    let d = table.dim();
    if d < 2 {
        return Err(csv_err(origin, "grid table needs coordinates and a value column"));
    }
    let mut nodes = Vec::with_capacity(table.len() * (d - 1));
    let mut values = Vec::with_capacity(table.len());
    for r in table.rows() {
        nodes.extend_from_slice(&r[..d - 1]);
        values.push(r[d - 1]);
    }
    Ok((PointSet::new(d - 1, nodes)?, values))
}

pub fn metrics_to_csv(rows: &[MetricRow]) -> String {
    let header: Vec<String> = ["experiment", "method", "N", "M", "seed", "metric", "value"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    to_csv(
        &header,
        rows.iter().map(|r| {
            vec![
                r.experiment.clone(),
                r.method.clone(),
                r.n.to_string(),
                r.m.to_string(),
                r.seed.to_string(),
                r.metric.clone(),
                fmt_f64(r.value),
            ]
        }),
    )
}

pub fn parse_metrics(text: &str, origin: &str) -> Result<Vec<MetricRow>> {
    let (_, rows) = records(text, origin)?;
    rows.into_iter()
        .map(|r| {
            if r.len() != 7 {
                return Err(csv_err(origin, "metric row needs 7 columns"));
            }
            let int = |s: &str| s.trim().parse::<u64>().map_err(|_| csv_err(origin, "bad integer"));
            Ok(MetricRow {
                experiment: r[0].clone(),
                method: r[1].clone(),
                n: int(&r[2])? as usize,
                m: int(&r[3])? as usize,
                seed: int(&r[4])?,
                metric: r[5].clone(),
                value: parse_f64(&r[6], origin)?,
            })
        })
        .collect()
}

pub fn cv_cells_to_csv(cells: &[CvCell]) -> String {
    let header: Vec<String> = ["alpha", "fold", "g_hat", "status"].iter().map(|s| s.to_string()).collect();
    to_csv(
        &header,
        cells.iter().map(|c| {
            vec![fmt_f64(c.alpha), c.fold.to_string(), fmt_f64(c.g_hat), c.status.clone()]
        }),
    )
}

pub fn cv_summary_to_csv(summary: &[CvSummary], best: Option<f64>) -> String {
    let header: Vec<String> = ["alpha", "mean_g_hat", "folds_ok", "selected"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    to_csv(
        &header,
        summary.iter().map(|s| {
            vec![
                fmt_f64(s.alpha),
                fmt_f64(s.mean_g_hat),
                s.folds_ok.to_string(),
                (Some(s.alpha) == best).to_string(),
            ]
        }),
    )
}

pub fn toy_sweep_to_csv(rows: &[ToySweepRow]) -> String {
    let header: Vec<String> = ["alpha", "beta", "g"].iter().map(|s| s.to_string()).collect();
    to_csv(
        &header,
        rows.iter().map(|r| vec![fmt_f64(r.alpha), fmt_f64(r.beta), fmt_f64(r.g)]),
    )
}

pub fn parse_toy_sweep(text: &str, origin: &str) -> Result<Vec<ToySweepRow>> {
    let t = parse_points(text, origin)?;
    if t.dim() != 3 {
        return Err(csv_err(origin, "toy sweep needs 3 columns"));
    }
    Ok(t.rows().map(|r| ToySweepRow { alpha: r[0], beta: r[1], g: r[2] }).collect())
}
