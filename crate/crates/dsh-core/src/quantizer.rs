//! Iteration-capped k-means quantization.
//!
//! The quantizer partitions a dataset into `k` groups with Lloyd's
//! algorithm, seeded by the D²-weighted (k-means++) scheme so that a small
//! iteration cap suffices in practice. Every stage is deterministic for a
//! given seed: assignment ties go to the lowest center index, empty groups
//! are reseeded by a fixed rule, and all accumulation happens in f64 in a
//! fixed order.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Result of a k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantization {
    /// Group centers, row-major `k * dim`, each the f64 mean of its group.
    pub centers: Vec<f64>,
    pub k: usize,
    pub dim: usize,
    /// Group index of every point, length `n`.
    pub assignment: Vec<u32>,
    /// Points per group, length `k`, every entry at least 1.
    pub group_sizes: Vec<usize>,
    /// Sum of squared distances of points to their group centers.
    pub sse: f64,
    /// Lloyd iterations executed before the cap or convergence.
    pub iterations_run: usize,
    /// SSE after each executed iteration's center update; non-increasing.
    pub sse_trace: Vec<f64>,
}

impl Quantization {
    /// Center of group `g` as a slice of `dim` components.
    pub fn center(&self, g: usize) -> &[f64] {
        &self.centers[g * self.dim..(g + 1) * self.dim]
    }
}

/// Number of quantizer groups for a code of `bits` bits with oversampling
/// factor `alpha`: `max(2, round(alpha * bits))`.
pub fn group_count_for(bits: usize, alpha: f64) -> Result<usize> {
    if bits < 1 {
        return Err(Error::Param("bit count must be at least 1".into()));
    }
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::Param("group count factor must be finite and positive".into()));
    }
    Ok(((alpha * bits as f64).round() as usize).max(2))
}

fn dist2_to_center(row: &[f32], center: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&x, &c) in row.iter().zip(center) {
        let diff = x as f64 - c;
        s += diff * diff;
    }
    s
}

fn dist2_rows(a: &[f32], b: &[f32]) -> f64 {
    let mut s = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let diff = x as f64 - y as f64;
        s += diff * diff;
    }
    s
}

/// D²-weighted initial centers: the first is drawn uniformly, each later one
/// with probability proportional to the squared distance from the nearest
/// chosen center. When every remaining point coincides with a chosen center,
/// the lowest unchosen index is taken.
fn init_centers(ds: &Dataset, k: usize, seed: u64) -> Vec<f64> {
    let (n, d) = (ds.n(), ds.dim());
    let mut rng = StdRng::seed_from_u64(seed);
    let mut chosen = vec![false; n];
    let mut centers = Vec::with_capacity(k * d);

    let first = rng.random_range(0..n);
    chosen[first] = true;
    centers.extend(ds.row(first).iter().map(|&v| v as f64));

    let mut d2: Vec<f64> = (0..n).map(|i| dist2_rows(ds.row(i), ds.row(first))).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can push the cumulative sum past every weight; fall
            // back to the last point with positive weight.
            pick.unwrap_or_else(|| (0..n).rev().find(|&i| d2[i] > 0.0).unwrap())
        } else {
            (0..n).find(|&i| !chosen[i]).unwrap()
        };
        chosen[next] = true;
        centers.extend(ds.row(next).iter().map(|&v| v as f64));
        let next_row = ds.row(next);
        for (i, w) in d2.iter_mut().enumerate() {
            let dd = dist2_rows(ds.row(i), next_row);
            if dd < *w {
                *w = dd;
            }
        }
    }
    centers
}

/// Nearest center per point (ties to the lowest center index) plus the
/// squared distance to it. Parallel over points; output order is fixed.
fn assign(ds: &Dataset, centers: &[f64]) -> (Vec<u32>, Vec<f64>) {
    let d = ds.dim();
    (0..ds.n())
        .into_par_iter()
        .map(|i| {
            let row = ds.row(i);
            let mut best = 0u32;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.chunks_exact(d).enumerate() {
                let dd = dist2_to_center(row, center);
                if dd < best_d {
                    best_d = dd;
                    best = c as u32;
                }
            }
            (i, best, best_d)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|(_, a, dd)| (a, dd))
        .unzip()
}

/// Reseeds every empty group (ascending group index) to the point farthest
/// from its assigned center, ties to the lowest point index. Points already
/// taken and points whose group would become empty are excluded, so all
/// groups end up non-empty.
fn repair_empty(assignment: &mut [u32], d2s: &[f64], k: usize) {
    let mut sizes = vec![0usize; k];
    for &a in assignment.iter() {
        sizes[a as usize] += 1;
    }
    let mut taken = vec![false; assignment.len()];
    for g in 0..k {
        if sizes[g] > 0 {
            continue;
        }
        let mut best: Option<(f64, usize)> = None;
        for (i, &dd) in d2s.iter().enumerate() {
            if taken[i] || sizes[assignment[i] as usize] < 2 {
                continue;
            }
            if best.map_or(true, |(bd, _)| dd > bd) {
                best = Some((dd, i));
            }
        }
        let (_, i) = best.expect("a donor group with at least two points exists");
        sizes[assignment[i] as usize] -= 1;
        assignment[i] = g as u32;
        sizes[g] = 1;
        taken[i] = true;
    }
}

/// Group means in f64, serial accumulation in point order.
fn update_centers(ds: &Dataset, assignment: &[u32], k: usize) -> Vec<f64> {
    let d = ds.dim();
    let mut centers = vec![0f64; k * d];
    let mut sizes = vec![0usize; k];
    for (i, &a) in assignment.iter().enumerate() {
        let g = a as usize;
        sizes[g] += 1;
        let acc = &mut centers[g * d..(g + 1) * d];
        for (s, &v) in acc.iter_mut().zip(ds.row(i)) {
            *s += v as f64;
        }
    }
    for (g, &size) in sizes.iter().enumerate() {
        debug_assert!(size > 0, "group {g} empty after repair");
        for s in &mut centers[g * d..(g + 1) * d] {
            *s /= size as f64;
        }
    }
    centers
}

fn sse_of(ds: &Dataset, assignment: &[u32], centers: &[f64]) -> f64 {
    let d = ds.dim();
    let terms: Vec<f64> = (0..ds.n())
        .into_par_iter()
        .map(|i| dist2_to_center(ds.row(i), &centers[assignment[i] as usize * d..][..d]))
        .collect();
    terms.iter().sum()
}

/// Runs k-means for at most `iterations` Lloyd iterations.
///
/// Each iteration assigns points to their nearest center, repairs empty
/// groups, and recomputes centers as group means; the loop stops early when
/// an iteration leaves the (repaired) assignment unchanged. The recorded SSE
/// trace is non-increasing, and the final centers are exactly the means of
/// the final assignment.
pub fn kmeans(ds: &Dataset, k: usize, iterations: usize, seed: u64) -> Result<Quantization> {
    if k < 1 {
        return Err(Error::Param("group count k must be at least 1".into()));
    }
    if k >= ds.n() {
        return Err(Error::Param(format!(
            "group count k = {k} must be less than the number of points {}",
            ds.n()
        )));
    }
    if iterations < 1 {
        return Err(Error::Param("iteration cap must be at least 1".into()));
    }

    let mut centers = init_centers(ds, k, seed);
    let mut assignment: Vec<u32> = Vec::new();
    let mut trace = Vec::new();
    for _ in 0..iterations {
        let (mut new_assignment, d2s) = assign(ds, &centers);
        repair_empty(&mut new_assignment, &d2s, k);
        if new_assignment == assignment {
            break;
        }
        assignment = new_assignment;
        centers = update_centers(ds, &assignment, k);
        let sse = sse_of(ds, &assignment, &centers);
        if let Some(&prev) = trace.last() {
            debug_assert!(sse <= prev * (1.0 + 1e-12) + 1e-9, "SSE rose: {prev} -> {sse}");
        }
        trace.push(sse);
    }

    let mut group_sizes = vec![0usize; k];
    for &a in &assignment {
        group_sizes[a as usize] += 1;
    }
    Ok(Quantization {
        k,
        dim: ds.dim(),
        sse: *trace.last().expect("at least one iteration runs"),
        iterations_run: trace.len(),
        centers,
        assignment,
        group_sizes,
        sse_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_gaussian_mixture, MixtureSpec};

    #[test]
    fn group_count_examples() {
        assert_eq!(group_count_for(64, 1.5).unwrap(), 96);
        assert_eq!(group_count_for(2, 1.0).unwrap(), 2);
        assert_eq!(group_count_for(1, 0.5).unwrap(), 2);
        assert!(matches!(group_count_for(0, 1.5), Err(Error::Param(_))));
        assert!(matches!(group_count_for(8, 0.0), Err(Error::Param(_))));
        assert!(matches!(group_count_for(8, f64::NAN), Err(Error::Param(_))));
    }

    #[test]
    fn rejects_bad_parameters() {
        let ds = Dataset::from_vec(1, vec![0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(kmeans(&ds, 0, 5, 0), Err(Error::Param(_))));
        assert!(matches!(kmeans(&ds, 3, 5, 0), Err(Error::Param(_))));
        assert!(matches!(kmeans(&ds, 4, 5, 0), Err(Error::Param(_))));
        assert!(matches!(kmeans(&ds, 2, 0, 0), Err(Error::Param(_))));
    }

    #[test]
    fn separable_pair_any_seed() {
        let ds = Dataset::from_vec(1, vec![0.0, 0.0, 10.0, 10.0]).unwrap();
        for seed in 0..20 {
            let q = kmeans(&ds, 2, 10, seed).unwrap();
            assert_eq!(q.sse, 0.0, "seed {seed}");
            let mut centers = vec![q.centers[0], q.centers[1]];
            centers.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(centers, vec![0.0, 10.0], "seed {seed}");
            assert_eq!(q.group_sizes.iter().sum::<usize>(), 4);
        }
    }

    /// Brute-force minimum SSE over all assignments of points to k
    /// non-empty groups, scoring each group by its mean.
    fn brute_force_sse(ds: &Dataset, k: usize) -> f64 {
        let n = ds.n();
        let mut best = f64::INFINITY;
        let mut labels = vec![0usize; n];
        loop {
            let mut sizes = vec![0usize; k];
            for &l in &labels {
                sizes[l] += 1;
            }
            if sizes.iter().all(|&s| s > 0) {
                let centers = update_centers(ds, &labels.iter().map(|&l| l as u32).collect::<Vec<_>>(), k);
                let sse = sse_of(ds, &labels.iter().map(|&l| l as u32).collect::<Vec<_>>(), &centers);
                if sse < best {
                    best = sse;
                }
            }
            // Next labeling in base-k.
            let mut i = 0;
            loop {
                if i == n {
                    return best;
                }
                labels[i] += 1;
                if labels[i] < k {
                    break;
                }
                labels[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn four_points_reach_global_optimum() {
        let ds = Dataset::from_vec(2, vec![0.0, 0.0, 0.0, 1.0, 10.0, 0.0, 10.0, 1.0]).unwrap();
        let oracle = brute_force_sse(&ds, 2);
        assert!((oracle - 1.0).abs() < 1e-12, "oracle {oracle}");
        let q = kmeans(&ds, 2, 5, 1).unwrap();
        assert!((q.sse - oracle).abs() <= 1e-9, "sse {} vs oracle {oracle}", q.sse);
        let mut xs: Vec<f64> = (0..2).map(|g| q.center(g)[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(xs, vec![0.0, 10.0]);
        assert_eq!(q.center(0)[1], 0.5);
        assert_eq!(q.center(1)[1], 0.5);
    }

    #[test]
    fn trace_is_monotone_and_invariants_hold_on_random_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(9);
        for case in 0..20 {
            let n = rng.random_range(30..150);
            let d = rng.random_range(2..6);
            let k = rng.random_range(2..8);
            let values: Vec<f32> = (0..n * d).map(|_| rng.random_range(-5.0f32..5.0)).collect();
            let ds = Dataset::from_vec(d, values).unwrap();
            let q = kmeans(&ds, k, 10, case).unwrap();

            assert_eq!(q.assignment.len(), n);
            assert!(q.assignment.iter().all(|&a| (a as usize) < k));
            assert_eq!(q.group_sizes.len(), k);
            assert!(q.group_sizes.iter().all(|&s| s >= 1), "case {case}");
            assert_eq!(q.group_sizes.iter().sum::<usize>(), n);
            assert_eq!(q.sse_trace.len(), q.iterations_run);
            assert!(q.iterations_run >= 1 && q.iterations_run <= 10);
            for w in q.sse_trace.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-9, "case {case}: {:?}", q.sse_trace);
            }

            // Centers are the means of their groups.
            let expect = update_centers(&ds, &q.assignment, k);
            for (a, b) in q.centers.iter().zip(&expect) {
                assert!((a - b).abs() <= 1e-5);
            }
            // Reported SSE matches a direct recomputation.
            let direct = sse_of(&ds, &q.assignment, &q.centers);
            assert!((q.sse - direct).abs() <= 1e-8 * direct.max(1.0));
        }
    }

    #[test]
    fn same_seed_same_result() {
        let spec = MixtureSpec {
            num_clusters: 5,
            points_per_cluster: 60,
            dim: 4,
            cluster_std: 0.3,
            center_box_half_width: 8.0,
            seed: 2,
        };
        let (ds, _) = generate_gaussian_mixture(&spec).unwrap();
        let a = kmeans(&ds, 7, 8, 33).unwrap();
        let b = kmeans(&ds, 7, 8, 33).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_points_trigger_empty_group_repair() {
        let mut values = Vec::new();
        for _ in 0..5 {
            values.extend_from_slice(&[0.0, 0.0]);
        }
        values.extend_from_slice(&[10.0, 10.0]);
        let ds = Dataset::from_vec(2, values).unwrap();
        let q = kmeans(&ds, 3, 10, 0).unwrap();
        assert_eq!(q.sse, 0.0);
        let mut sizes = q.group_sizes.clone();
        sizes.sort();
        assert_eq!(sizes, vec![1, 1, 4]);
        for g in 0..3 {
            let c = q.center(g);
            assert!(c == [0.0, 0.0] || c == [10.0, 10.0]);
        }
    }

    #[test]
    fn well_separated_mixture_recovers_clusters() {
        let spec = MixtureSpec {
            num_clusters: 4,
            points_per_cluster: 50,
            dim: 3,
            cluster_std: 0.05,
            center_box_half_width: 10.0,
            seed: 5,
        };
        let (ds, labels) = generate_gaussian_mixture(&spec).unwrap();
        let q = kmeans(&ds, 4, 10, 17).unwrap();
        // Every true cluster maps to exactly one k-means group.
        let mut map = [u32::MAX; 4];
        for (i, &l) in labels.iter().enumerate() {
            let g = q.assignment[i];
            if map[l as usize] == u32::MAX {
                map[l as usize] = g;
            }
            assert_eq!(map[l as usize], g, "cluster {l} split");
        }
        let mut groups: Vec<u32> = map.to_vec();
        groups.sort();
        groups.dedup();
        assert_eq!(groups.len(), 4);
    }
}
