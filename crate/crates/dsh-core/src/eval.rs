//! Retrieval evaluation: ground truth, average precision, PR curves, and
//! the benchmark report.
//!
//! A database point counts as a true neighbor of a query when it lies in
//! the top `percentile` (default 0.02) of the database by exact Euclidean
//! distance. Rankings produced by the codes module are scored with average
//! precision over the full ranking and with precision-recall curves;
//! per-query curves are averaged at 21 fixed recall levels by linear
//! interpolation.

use std::io::{self, Write};
use std::time::Instant;

use rayon::prelude::*;

use crate::codes;
use crate::data::Dataset;
use crate::dsh::{HashMethod, HashModel};
use crate::error::{Error, Result};

/// True-neighbor sets for a batch of queries.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Per query, the database indices of its true neighbors, ascending.
    pub per_query: Vec<Vec<u32>>,
    pub percentile: f64,
}

impl GroundTruth {
    /// Common size of the per-query truth sets.
    pub fn truth_size(&self) -> usize {
        self.per_query.first().map_or(0, Vec::len)
    }
}

/// A precision-recall curve sampled at every rank of a ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    /// `(recall, precision)` at rank 1, 2, ..., n. Recall is non-decreasing.
    pub points: Vec<(f64, f64)>,
}

/// Number of true neighbors for a database of `n` points: `ceil(percentile
/// * n)`, guarded against binary rounding of products that are exactly
/// integral in decimal.
fn truth_count(n: usize, percentile: f64) -> usize {
    (((percentile * n as f64) - 1e-9).ceil().max(1.0)) as usize
}

/// Exact Euclidean ground truth: for each query, the `ceil(percentile * n)`
/// closest database points, with distance ties at the cutoff broken by
/// ascending index. Parallel over queries; output order is fixed.
pub fn ground_truth(db: &Dataset, queries: &Dataset, percentile: f64) -> Result<GroundTruth> {
    if db.dim() != queries.dim() {
        return Err(Error::Data(format!(
            "database dimension {} does not match query dimension {}",
            db.dim(),
            queries.dim()
        )));
    }
    if !(percentile > 0.0 && percentile < 1.0) {
        return Err(Error::Param(format!(
            "percentile must be strictly between 0 and 1, got {percentile}"
        )));
    }
    let n = db.n();
    let m = truth_count(n, percentile);
    let per_query: Vec<Vec<u32>> = (0..queries.n())
        .into_par_iter()
        .map(|qi| {
            let q = queries.row(qi);
            let mut dists: Vec<(f64, u32)> = (0..n)
                .map(|i| {
                    let mut s = 0f64;
                    for (&a, &b) in q.iter().zip(db.row(i)) {
                        let diff = a as f64 - b as f64;
                        s += diff * diff;
                    }
                    (s, i as u32)
                })
                .collect();
            if m < n {
                dists.select_nth_unstable_by(m - 1, |a, b| {
                    a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1))
                });
            }
            let mut truth: Vec<u32> = dists[..m].iter().map(|&(_, i)| i).collect();
            truth.sort_unstable();
            truth
        })
        .collect();
    Ok(GroundTruth {
        per_query,
        percentile,
    })
}

/// Marks `truth` membership in a mask sized to the ranking and checks that
/// every truth index is in range.
fn truth_mask(ranking_len: usize, truth: &[u32]) -> Result<Vec<bool>> {
    if truth.is_empty() {
        return Err(Error::Param("truth set must be non-empty".into()));
    }
    let mut mask = vec![false; ranking_len];
    for &t in truth {
        let idx = t as usize;
        if idx >= ranking_len {
            return Err(Error::Data(format!(
                "truth index {t} outside the ranking of length {ranking_len}"
            )));
        }
        mask[idx] = true;
    }
    Ok(mask)
}

/// Average precision of a full ranking against a truth set:
/// `(1/|T|) * sum over hits at rank p of hits_so_far(p) / p`.
///
/// The ranking must cover every truth index (it normally covers the whole
/// database).
pub fn average_precision(ranking: &[(u32, u32)], truth: &[u32]) -> Result<f64> {
    let mask = truth_mask(ranking.len(), truth)?;
    let mut hits = 0usize;
    let mut sum = 0f64;
    for (pos, &(idx, _)) in ranking.iter().enumerate() {
        if mask[idx as usize] {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    if hits != truth.len() {
        return Err(Error::Data(format!(
            "ranking covers {hits} of {} true neighbors; a full ranking is required",
            truth.len()
        )));
    }
    Ok(sum / truth.len() as f64)
}

/// Arithmetic mean of per-query average precision.
pub fn mean_average_precision(rankings: &[Vec<(u32, u32)>], truths: &[Vec<u32>]) -> Result<f64> {
    if rankings.is_empty() || rankings.len() != truths.len() {
        return Err(Error::Param(format!(
            "need matching non-empty rankings and truths, got {} and {}",
            rankings.len(),
            truths.len()
        )));
    }
    let mut sum = 0f64;
    for (ranking, truth) in rankings.iter().zip(truths) {
        sum += average_precision(ranking, truth)?;
    }
    Ok(sum / rankings.len() as f64)
}

/// Precision-recall pairs at every rank of the ranking.
pub fn pr_curve(ranking: &[(u32, u32)], truth: &[u32]) -> Result<PrCurve> {
    let mask = truth_mask(ranking.len(), truth)?;
    let t = truth.len() as f64;
    let mut hits = 0usize;
    let mut points = Vec::with_capacity(ranking.len());
    for (pos, &(idx, _)) in ranking.iter().enumerate() {
        if mask[idx as usize] {
            hits += 1;
        }
        points.push((hits as f64 / t, hits as f64 / (pos + 1) as f64));
    }
    Ok(PrCurve { points })
}

/// First-occurrence (hit-rank) subsequence of a per-rank curve, with the
/// conventional `(0, 1)` anchor prepended: the vertices actually used for
/// interpolation. Recalls are strictly increasing.
fn interpolation_vertices(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut kept = Vec::with_capacity(points.len() + 1);
    kept.push((0.0, 1.0));
    let mut last = 0.0f64;
    for &(r, p) in points {
        if r > last {
            kept.push((r, p));
            last = r;
        }
    }
    kept
}

fn interp_at(vertices: &[(f64, f64)], level: f64) -> Result<f64> {
    debug_assert!(!vertices.is_empty());
    if level <= vertices[0].0 {
        return Ok(vertices[0].1);
    }
    let last = vertices[vertices.len() - 1];
    if level > last.0 {
        return Err(Error::Param(format!(
            "recall level {level} beyond the curve's maximum recall {}",
            last.0
        )));
    }
    // First vertex with recall >= level; its predecessor brackets the level.
    let hi = vertices.partition_point(|&(r, _)| r < level);
    let (r1, p1) = vertices[hi];
    if r1 == level {
        return Ok(p1);
    }
    let (r0, p0) = vertices[hi - 1];
    Ok(p0 + (p1 - p0) * (level - r0) / (r1 - r0))
}

/// Precision of a curve at each requested recall level, linearly
/// interpolated between the precision values at the earliest rank reaching
/// each recall, with precision 1 at recall 0.
pub fn precision_at_levels(curve: &PrCurve, levels: &[f64]) -> Result<Vec<f64>> {
    let vertices = interpolation_vertices(&curve.points);
    levels.iter().map(|&l| {
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::Param(format!("recall level {l} outside [0, 1]")));
        }
        interp_at(&vertices, l)
    }).collect()
}

/// The 21 fixed recall levels 0.00, 0.05, ..., 1.00.
pub fn standard_recall_levels() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

/// One benchmark report row.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: HashMethod,
    pub bits: usize,
    pub map: f64,
    /// Mean interpolated precision at each of the report's recall levels.
    pub avg_precision: Vec<f64>,
    pub train_seconds: f64,
    /// Mean wall time of encoding one query and ranking the database.
    pub test_seconds_per_query: f64,
}

/// Benchmark results for a set of trained models over one query workload.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub recall_levels: Vec<f64>,
    pub n_database: usize,
    pub n_queries: usize,
    pub truth_size: usize,
}

/// Scores each trained model (paired with its training wall time) against
/// the same database, queries, and ground truth.
///
/// Per model: the database is encoded, then every query is encoded, ranked
/// against the stored codes (this pair of steps is what the per-query time
/// measures), and scored. All metric fields are deterministic; only the
/// timing fields vary between runs.
pub fn benchmark(
    db: &Dataset,
    queries: &Dataset,
    models: &[(HashModel, f64)],
    truth: &GroundTruth,
) -> Result<BenchReport> {
    if models.is_empty() {
        return Err(Error::Param("benchmark needs at least one model".into()));
    }
    if truth.per_query.len() != queries.n() {
        return Err(Error::Data(format!(
            "ground truth covers {} queries but {} were given",
            truth.per_query.len(),
            queries.n()
        )));
    }
    let levels = standard_recall_levels();
    let mut rows = Vec::with_capacity(models.len());
    for (model, train_seconds) in models {
        let store = codes::encode(model, db)?;
        let per_query: Vec<(f64, f64, Vec<f64>)> = (0..queries.n())
            .into_par_iter()
            .map(|qi| -> Result<(f64, f64, Vec<f64>)> {
                let started = Instant::now();
                let code = codes::encode_query(model, queries.row(qi))?;
                let ranking = codes::rank_all(&code, &store);
                let seconds = started.elapsed().as_secs_f64();

                let truth_set = &truth.per_query[qi];
                let ap = average_precision(&ranking, truth_set)?;
                let curve = pr_curve(&ranking, truth_set)?;
                let prec = precision_at_levels(&curve, &levels)?;
                Ok((seconds, ap, prec))
            })
            .collect::<Result<_>>()?;

        let q = queries.n() as f64;
        let mut map = 0f64;
        let mut test_seconds = 0f64;
        let mut avg_precision = vec![0f64; levels.len()];
        for (seconds, ap, prec) in &per_query {
            test_seconds += seconds;
            map += ap;
            for (acc, &p) in avg_precision.iter_mut().zip(prec) {
                *acc += p;
            }
        }
        for p in &mut avg_precision {
            *p /= q;
        }
        rows.push(BenchRow {
            method: model.method,
            bits: model.bits(),
            map: map / q,
            avg_precision,
            train_seconds: *train_seconds,
            test_seconds_per_query: test_seconds / q,
        });
    }
    Ok(BenchReport {
        rows,
        recall_levels: levels,
        n_database: db.n(),
        n_queries: queries.n(),
        truth_size: truth.truth_size(),
    })
}

/// Writes the main report CSV: one row per (method, L).
pub fn write_report_csv(report: &BenchReport, writer: &mut (impl Write + ?Sized)) -> io::Result<()> {
    writeln!(writer, "method,L,map,train_seconds,test_seconds_per_query")?;
    for row in &report.rows {
        writeln!(
            writer,
            "{},{},{},{},{}",
            row.method.name(),
            row.bits,
            row.map,
            row.train_seconds,
            row.test_seconds_per_query
        )?;
    }
    Ok(())
}

/// Writes the averaged PR curves as a long-format CSV: one row per
/// (method, L, recall level).
pub fn write_pr_csv(report: &BenchReport, writer: &mut (impl Write + ?Sized)) -> io::Result<()> {
    writeln!(writer, "method,L,recall,precision")?;
    for row in &report.rows {
        for (&recall, &precision) in report.recall_levels.iter().zip(&row.avg_precision) {
            writeln!(writer, "{},{},{},{}", row.method.name(), row.bits, recall, precision)?;
        }
    }
    Ok(())
}

/// Renders the report as an aligned human-readable table.
pub fn format_report_table(report: &BenchReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "database: {} points, queries: {}, true neighbors per query: {}\n",
        report.n_database, report.n_queries, report.truth_size
    ));
    out.push_str(&format!(
        "{:<6} {:>5} {:>8} {:>14} {:>22}\n",
        "method", "L", "MAP", "train_seconds", "test_seconds_per_query"
    ));
    for row in &report.rows {
        out.push_str(&format!(
            "{:<6} {:>5} {:>8.4} {:>14.4} {:>22.9}\n",
            row.method.name(),
            row.bits,
            row.map,
            row.train_seconds,
            row.test_seconds_per_query
        ));
    }
    out
}
