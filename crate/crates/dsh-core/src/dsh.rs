//! Density-sensitive hash training.
//!
//! Training proceeds in three stages. A capped k-means run summarizes the
//! data as `k ≈ alpha * bits` group centers. Every pair of adjacent groups
//! (mutual or one-sided membership in each other's r-nearest-neighbor lists)
//! proposes the plane through the midpoint of the two centers and orthogonal
//! to their difference — a boundary that locally separates two dense
//! regions. Each candidate plane is scored by the entropy of the split it
//! induces, computed over group centers weighted by group population, and
//! the `bits` highest-entropy planes become the hash functions.
//!
//! The trained [`HashModel`] also records the training mean so that raw
//! (uncentered) vectors can be hashed consistently later.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;

use crate::data::{self, Dataset, MAX_DIM};
use crate::error::{Error, Result};
use crate::quantizer::{self, Quantization};

/// Magic bytes at the start of every model file.
pub const MODEL_MAGIC: &[u8; 4] = b"DSH1";

/// Hard cap on the number of projections a model file may declare.
const MAX_BITS: usize = 1 << 20;

/// Hashing family a model was trained with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HashMethod {
    Dsh,
    Lsh,
    Pcah,
}

impl HashMethod {
    fn to_u8(self) -> u8 {
        match self {
            HashMethod::Dsh => 0,
            HashMethod::Lsh => 1,
            HashMethod::Pcah => 2,
        }
    }

    fn from_u8(b: u8) -> Option<HashMethod> {
        match b {
            0 => Some(HashMethod::Dsh),
            1 => Some(HashMethod::Lsh),
            2 => Some(HashMethod::Pcah),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HashMethod::Dsh => "dsh",
            HashMethod::Lsh => "lsh",
            HashMethod::Pcah => "pcah",
        }
    }
}

impl std::str::FromStr for HashMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<HashMethod> {
        match s.to_ascii_lowercase().as_str() {
            "dsh" => Ok(HashMethod::Dsh),
            "lsh" => Ok(HashMethod::Lsh),
            "pcah" => Ok(HashMethod::Pcah),
            other => Err(Error::Config(format!(
                "unknown hash method {other:?}; expected dsh, lsh, or pcah"
            ))),
        }
    }
}

/// One hash function: bit = 1 iff `w . x >= t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub w: Vec<f64>,
    pub t: f64,
}

impl Projection {
    /// Hash bit of a centered vector. Panics on dimension mismatch.
    pub fn hash_bit(&self, x: &[f32]) -> bool {
        assert_eq!(self.w.len(), x.len(), "projection/vector dimension mismatch");
        let mut dot = 0f64;
        for (&wj, &xj) in self.w.iter().zip(x) {
            dot += wj * xj as f64;
        }
        dot >= self.t
    }

    /// Same hash rule for an f64 vector (used for group centers).
    pub fn side_f64(&self, x: &[f64]) -> bool {
        assert_eq!(self.w.len(), x.len(), "projection/vector dimension mismatch");
        let mut dot = 0f64;
        for (&wj, &xj) in self.w.iter().zip(x) {
            dot += wj * xj;
        }
        dot >= self.t
    }
}

/// A trained hashing model: `bits()` projections over centered vectors of
/// dimension `dim`, plus the training mean subtracted from raw input.
#[derive(Debug, Clone, PartialEq)]
pub struct HashModel {
    pub method: HashMethod,
    pub dim: usize,
    pub projections: Vec<Projection>,
    /// Per-column mean of the raw training data; all zeros when the model
    /// was trained on data centered elsewhere with an unknown mean.
    pub training_mean: Vec<f64>,
}

impl HashModel {
    /// Code length in bits.
    pub fn bits(&self) -> usize {
        self.projections.len()
    }

    /// Replaces the stored training mean (used to attach the data mean to a
    /// data-independent model such as LSH).
    pub fn with_training_mean(mut self, mean: Vec<f64>) -> Result<HashModel> {
        if mean.len() != self.dim {
            return Err(Error::Data(format!(
                "training mean has {} components but the model dimension is {}",
                mean.len(),
                self.dim
            )));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Data("training mean has a non-finite component".into()));
        }
        self.training_mean = mean;
        Ok(self)
    }
}

/// Training parameters for [`train_dsh`].
#[derive(Debug, Clone, PartialEq)]
pub struct DshParams {
    /// Cap on k-means Lloyd iterations.
    pub iterations: usize,
    /// Oversampling factor: the quantizer uses `max(2, round(alpha * bits))`
    /// groups.
    pub alpha: f64,
    /// Adjacency radius: groups are adjacent when either is among the
    /// other's `radius` nearest groups.
    pub radius: usize,
}

impl Default for DshParams {
    fn default() -> Self {
        DshParams {
            iterations: 3,
            alpha: 1.5,
            radius: 3,
        }
    }
}

/// A scored candidate hash function and the group pair that proposed it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionCandidate {
    pub projection: Projection,
    /// Indices of the adjacent groups whose median plane this is, `i < j`.
    pub source_pair: (u32, u32),
    /// Weighted entropy of the split induced on the group centers.
    pub entropy: f64,
}

/// Pairs of adjacent groups under the r-nearest-neighbor relation.
///
/// Group `i` and `j` are adjacent when `i` is among the `r` nearest other
/// groups of `j` (by center distance, ties to the lower index) or vice
/// versa. Pairs are returned with `i < j`, in ascending `(i, j)` order.
pub fn adjacent_groups(q: &Quantization, r: usize) -> Result<Vec<(u32, u32)>> {
    let k = q.k;
    if r < 1 || r >= k {
        return Err(Error::Param(format!(
            "adjacency radius r = {r} must satisfy 1 <= r < k = {k}"
        )));
    }
    let mut adjacent = vec![false; k * k];
    let mut dists: Vec<(f64, u32)> = Vec::with_capacity(k - 1);
    for i in 0..k {
        dists.clear();
        let ci = q.center(i);
        for j in 0..k {
            if j == i {
                continue;
            }
            let mut s = 0f64;
            for (&a, &b) in ci.iter().zip(q.center(j)) {
                s += (a - b) * (a - b);
            }
            dists.push((s, j as u32));
        }
        dists.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, j) in dists.iter().take(r) {
            let (a, b) = (i.min(j as usize), i.max(j as usize));
            adjacent[a * k + b] = true;
        }
    }
    let mut pairs = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            if adjacent[i * k + j] {
                pairs.push((i as u32, j as u32));
            }
        }
    }
    Ok(pairs)
}

/// The plane through the midpoint of two centers, orthogonal to their
/// difference: `w = mu1 - mu2`, `t = ((mu1 + mu2) / 2) . w`. Points hashing
/// to 1 are on the `mu1` side. Coincident centers are rejected.
pub fn median_plane(mu1: &[f64], mu2: &[f64]) -> Result<Projection> {
    if mu1.len() != mu2.len() {
        return Err(Error::Param(format!(
            "center dimensions differ: {} vs {}",
            mu1.len(),
            mu2.len()
        )));
    }
    let w: Vec<f64> = mu1.iter().zip(mu2).map(|(&a, &b)| a - b).collect();
    if w.iter().all(|&x| x == 0.0) {
        return Err(Error::CoincidentCenters);
    }
    let mut t = 0f64;
    for ((&a, &b), &wj) in mu1.iter().zip(mu2).zip(&w) {
        t += 0.5 * (a + b) * wj;
    }
    Ok(Projection { w, t })
}

fn entropy_of_split(p0: f64, p1: f64) -> f64 {
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    term(p0) + term(p1)
}

/// Entropy of the split a candidate plane induces on the quantizer's group
/// centers, each center weighted by its share of the points. 1.0 is a
/// perfectly balanced split, 0.0 leaves every center on one side.
pub fn candidate_entropy(p: &Projection, q: &Quantization) -> f64 {
    let n: usize = q.group_sizes.iter().sum();
    let mut p1 = 0f64;
    for g in 0..q.k {
        if p.side_f64(q.center(g)) {
            p1 += q.group_sizes[g] as f64 / n as f64;
        }
    }
    entropy_of_split(1.0 - p1, p1)
}

/// Entropy of the split over the actual data points. The center-weighted
/// [`candidate_entropy`] approximates this and coincides with it as clusters
/// tighten.
pub fn exact_entropy(p: &Projection, ds: &Dataset) -> f64 {
    let ones = (0..ds.n())
        .into_par_iter()
        .filter(|&i| p.hash_bit(ds.row(i)))
        .count();
    let p1 = ones as f64 / ds.n() as f64;
    entropy_of_split(1.0 - p1, p1)
}

/// Builds the scored candidate list from every adjacent group pair, in
/// ascending pair order. Pairs with coincident centers contribute nothing.
pub fn generate_candidates(q: &Quantization, r: usize) -> Result<Vec<ProjectionCandidate>> {
    let pairs = adjacent_groups(q, r)?;
    let mut candidates = Vec::with_capacity(pairs.len());
    for (i, j) in pairs {
        match median_plane(q.center(i as usize), q.center(j as usize)) {
            Ok(projection) => {
                let entropy = candidate_entropy(&projection, q);
                candidates.push(ProjectionCandidate {
                    projection,
                    source_pair: (i, j),
                    entropy,
                });
            }
            Err(Error::CoincidentCenters) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(candidates)
}

/// The `bits` highest-entropy candidates, sorted by non-increasing entropy.
/// The sort is stable, so equal-entropy candidates keep their ascending
/// source-pair order.
pub fn select_projections(
    candidates: &[ProjectionCandidate],
    bits: usize,
) -> Result<Vec<ProjectionCandidate>> {
    if candidates.len() < bits {
        return Err(Error::TooFewCandidates {
            available: candidates.len(),
            requested: bits,
        });
    }
    let mut sorted: Vec<ProjectionCandidate> = candidates.to_vec();
    sorted.sort_by(|a, b| b.entropy.partial_cmp(&a.entropy).unwrap());
    sorted.truncate(bits);
    Ok(sorted)
}

/// Trains a density-sensitive hash model producing `bits`-bit codes.
///
/// The input may be raw (it is centered internally) or already centered
/// with its mean recorded; either way the returned model stores the mean of
/// the raw data so queries can be centered consistently. The run is
/// deterministic for a given dataset, parameter set, and seed.
pub fn train_dsh(ds: &Dataset, bits: usize, params: &DshParams, seed: u64) -> Result<HashModel> {
    if bits < 1 {
        return Err(Error::Param("bit count must be at least 1".into()));
    }
    if params.iterations < 1 {
        return Err(Error::Param("iteration cap must be at least 1".into()));
    }
    if params.radius < 1 {
        return Err(Error::Param("adjacency radius must be at least 1".into()));
    }
    let k = quantizer::group_count_for(bits, params.alpha)?;

    let centered_owned;
    let centered = if ds.is_centered() {
        ds
    } else {
        centered_owned = data::center(ds)?;
        &centered_owned
    };
    let training_mean = centered
        .mean()
        .expect("centered dataset records its mean")
        .to_vec();

    let q = quantizer::kmeans(centered, k, params.iterations, seed)?;
    let candidates = generate_candidates(&q, params.radius)?;
    let selected = select_projections(&candidates, bits)?;
    Ok(HashModel {
        method: HashMethod::Dsh,
        dim: ds.dim(),
        projections: selected.into_iter().map(|c| c.projection).collect(),
        training_mean,
    })
}

fn io_err(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, offset: u64, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset,
        message: message.into(),
    }
}

/// Serializes a model: magic `DSH1`, method byte, bit count u32, dimension
/// u32, training mean (d f64), then each projection as d+1 f64 (w, then t).
/// All integers and floats are little-endian.
pub fn save_model_to(model: &HashModel, writer: &mut (impl Write + ?Sized)) -> io::Result<()> {
    writer.write_all(MODEL_MAGIC)?;
    writer.write_u8(model.method.to_u8())?;
    writer.write_u32::<LittleEndian>(model.bits() as u32)?;
    writer.write_u32::<LittleEndian>(model.dim as u32)?;
    for &m in &model.training_mean {
        writer.write_f64::<LittleEndian>(m)?;
    }
    for p in &model.projections {
        for &wj in &p.w {
            writer.write_f64::<LittleEndian>(wj)?;
        }
        writer.write_f64::<LittleEndian>(p.t)?;
    }
    Ok(())
}

fn validate_model(model: &HashModel) -> Result<()> {
    if model.bits() < 1 || model.bits() > MAX_BITS {
        return Err(Error::Data(format!(
            "model must have 1..={MAX_BITS} projections, has {}",
            model.bits()
        )));
    }
    if model.dim < 1 || model.dim > MAX_DIM {
        return Err(Error::Data(format!(
            "model dimension {} outside 1..={MAX_DIM}",
            model.dim
        )));
    }
    if model.training_mean.len() != model.dim {
        return Err(Error::Data("training mean length differs from model dimension".into()));
    }
    for p in &model.projections {
        if p.w.len() != model.dim {
            return Err(Error::Data("projection dimension differs from model dimension".into()));
        }
        if !p.t.is_finite() || p.w.iter().any(|w| !w.is_finite()) {
            return Err(Error::Data("model contains a non-finite value".into()));
        }
    }
    if model.training_mean.iter().any(|m| !m.is_finite()) {
        return Err(Error::Data("model contains a non-finite value".into()));
    }
    Ok(())
}

/// Saves a model to `path` in the format of [`save_model_to`].
pub fn save_model(model: &HashModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    validate_model(model)?;
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = BufWriter::new(file);
    save_model_to(model, &mut writer).map_err(|e| io_err(path, e))?;
    writer.flush().map_err(|e| io_err(path, e))
}

fn read_f64s(
    reader: &mut impl Read,
    count: usize,
    base_offset: u64,
    what: &str,
    path: &Path,
) -> Result<Vec<f64>> {
    let mut buf = vec![0f64; count];
    reader
        .read_f64_into::<LittleEndian>(&mut buf)
        .map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => {
                format_err(path, base_offset, format!("truncated while reading {what}"))
            }
            _ => io_err(path, e),
        })?;
    if let Some(j) = buf.iter().position(|v| !v.is_finite()) {
        return Err(format_err(
            path,
            base_offset + 8 * j as u64,
            format!("non-finite value in {what}"),
        ));
    }
    Ok(buf)
}

/// Loads a model saved by [`save_model`], validating magic, method, bounds,
/// finiteness, and that the file has exactly the declared size.
pub fn load_model(path: impl AsRef<Path>) -> Result<HashModel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let file_len = file.metadata().map_err(|e| io_err(path, e))?.len();
    let mut reader = BufReader::new(file);

    let mut magic = [0u8; 4];
    reader
        .read_exact(&mut magic)
        .map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => format_err(path, 0, "file too short for magic bytes"),
            _ => io_err(path, e),
        })?;
    if &magic != MODEL_MAGIC {
        return Err(format_err(path, 0, "bad magic bytes; not a model file"));
    }
    let method_byte = reader.read_u8().map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => format_err(path, 4, "truncated header"),
        _ => io_err(path, e),
    })?;
    let method = HashMethod::from_u8(method_byte)
        .ok_or_else(|| format_err(path, 4, format!("unknown method byte {method_byte}")))?;
    let bits = reader
        .read_u32::<LittleEndian>()
        .map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => format_err(path, 5, "truncated header"),
            _ => io_err(path, e),
        })? as usize;
    let dim = reader
        .read_u32::<LittleEndian>()
        .map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => format_err(path, 9, "truncated header"),
            _ => io_err(path, e),
        })? as usize;
    if bits < 1 || bits > MAX_BITS {
        return Err(format_err(path, 5, format!("bit count {bits} outside 1..={MAX_BITS}")));
    }
    if dim < 1 || dim > MAX_DIM {
        return Err(format_err(path, 9, format!("dimension {dim} outside 1..={MAX_DIM}")));
    }
    let expected_len = 13 + 8 * dim as u64 + bits as u64 * (8 * dim as u64 + 8);
    if file_len < expected_len {
        return Err(format_err(
            path,
            file_len,
            format!("truncated model file: {file_len} bytes, expected {expected_len}"),
        ));
    }
    if file_len > expected_len {
        return Err(format_err(
            path,
            expected_len,
            format!("trailing data after model: {file_len} bytes, expected {expected_len}"),
        ));
    }

    let mut offset = 13u64;
    let training_mean = read_f64s(&mut reader, dim, offset, "training mean", path)?;
    offset += 8 * dim as u64;
    let mut projections = Vec::with_capacity(bits);
    for p in 0..bits {
        let w = read_f64s(&mut reader, dim, offset, &format!("projection {p} direction"), path)?;
        offset += 8 * dim as u64;
        let t = read_f64s(&mut reader, 1, offset, &format!("projection {p} threshold"), path)?[0];
        offset += 8;
        projections.push(Projection { w, t });
    }
    Ok(HashModel {
        method,
        dim,
        projections,
        training_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_gaussian_mixture, MixtureSpec};
    use rand::{Rng, SeedableRng};

    /// Quantization with given centers and sizes; assignment filled to match.
    fn quant(centers: Vec<Vec<f64>>, sizes: Vec<usize>) -> Quantization {
        let k = centers.len();
        let dim = centers[0].len();
        let mut assignment = Vec::new();
        for (g, &s) in sizes.iter().enumerate() {
            assignment.extend(std::iter::repeat(g as u32).take(s));
        }
        Quantization {
            centers: centers.into_iter().flatten().collect(),
            k,
            dim,
            assignment,
            group_sizes: sizes,
            sse: 0.0,
            iterations_run: 1,
            sse_trace: vec![0.0],
        }
    }

    #[test]
    fn adjacency_of_two_groups() {
        let q = quant(vec![vec![0.0], vec![1.0]], vec![1, 1]);
        assert_eq!(adjacent_groups(&q, 1).unwrap(), vec![(0, 1)]);
    }

    #[test]
    fn adjacency_is_one_sided_union() {
        // 2 is far from both, but 1 is still its nearest neighbor.
        let q = quant(vec![vec![0.0], vec![1.0], vec![10.0]], vec![1, 1, 1]);
        assert_eq!(adjacent_groups(&q, 1).unwrap(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn adjacency_rejects_bad_radius() {
        let q = quant(vec![vec![0.0], vec![1.0], vec![2.0]], vec![1, 1, 1]);
        assert!(matches!(adjacent_groups(&q, 0), Err(Error::Param(_))));
        assert!(matches!(adjacent_groups(&q, 3), Err(Error::Param(_))));
        assert!(adjacent_groups(&q, 2).is_ok());
    }

    #[test]
    fn adjacency_matches_brute_force() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(12);
        for case in 0..10 {
            let k = 20;
            let r = 3;
            let centers: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..3).map(|_| rng.random_range(-10.0..10.0)).collect())
                .collect();
            let q = quant(centers.clone(), vec![1; k]);
            let pairs = adjacent_groups(&q, r).unwrap();

            // Brute force: full distance matrix, r-NN lists, union relation.
            let d2 = |a: &[f64], b: &[f64]| -> f64 {
                a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
            };
            let mut expect = Vec::new();
            let nn: Vec<Vec<usize>> = (0..k)
                .map(|i| {
                    let mut ds: Vec<(f64, usize)> = (0..k)
                        .filter(|&j| j != i)
                        .map(|j| (d2(&centers[i], &centers[j]), j))
                        .collect();
                    ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    ds.into_iter().take(r).map(|(_, j)| j).collect()
                })
                .collect();
            for i in 0..k {
                for j in i + 1..k {
                    if nn[i].contains(&j) || nn[j].contains(&i) {
                        expect.push((i as u32, j as u32));
                    }
                }
            }
            assert_eq!(pairs, expect, "case {case}");

            // Every group appears in at least r pairs; pair count is within
            // [k*r/2, k*r].
            for i in 0..k as u32 {
                let deg = pairs.iter().filter(|&&(a, b)| a == i || b == i).count();
                assert!(deg >= r, "group {i} in only {deg} pairs");
            }
            assert!(pairs.len() >= k * r / 2 && pairs.len() <= k * r);
        }
    }

    #[test]
    fn median_plane_of_symmetric_pair() {
        let p = median_plane(&[2.0, 2.0], &[0.0, 0.0]).unwrap();
        assert_eq!(p.w, vec![2.0, 2.0]);
        assert_eq!(p.t, 4.0);
        // Midpoint sits exactly on the plane and hashes to 1 (boundary).
        assert!(p.side_f64(&[1.0, 1.0]));
        assert!(p.side_f64(&[2.0, 2.0]));
        assert!(!p.side_f64(&[0.0, 0.0]));
    }

    #[test]
    fn median_plane_separates_its_centers() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(77);
        for _ in 0..1000 {
            let d = rng.random_range(1..8);
            let mu1: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
            let mut mu2: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
            if mu1 == mu2 {
                mu2[0] += 1.0;
            }
            let p = median_plane(&mu1, &mu2).unwrap();
            let dot = |x: &[f64]| -> f64 { x.iter().zip(&p.w).map(|(a, b)| a * b).sum() };
            assert!(dot(&mu1) > p.t);
            assert!(dot(&mu2) < p.t);
            // The midpoint lies on the plane.
            let mid: Vec<f64> = mu1.iter().zip(&mu2).map(|(a, b)| 0.5 * (a + b)).collect();
            let scale = p.w.iter().map(|w| w * w).sum::<f64>().max(1.0);
            assert!((dot(&mid) - p.t).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn median_plane_rejects_coincident_centers() {
        assert!(matches!(
            median_plane(&[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::CoincidentCenters)
        ));
        assert!(matches!(
            median_plane(&[1.0], &[1.0, 2.0]),
            Err(Error::Param(_))
        ));
    }

    #[test]
    fn hash_bit_examples() {
        let p = Projection { w: vec![2.0, 0.0], t: 0.0 };
        assert!(p.hash_bit(&[0.5, 3.0]));
        assert!(p.hash_bit(&[0.0, 0.0])); // boundary hashes to 1
        assert!(!p.hash_bit(&[-0.5, 3.0]));
    }

    #[test]
    fn hash_bit_is_scale_invariant_off_boundary() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        let p = Projection { w: vec![1.0, -2.0, 0.5], t: 0.3 };
        let scaled = Projection {
            w: p.w.iter().map(|w| w * 7.0).collect(),
            t: p.t * 7.0,
        };
        for _ in 0..200 {
            let x: Vec<f32> = (0..3).map(|_| rng.random_range(-4.0f32..4.0)).collect();
            assert_eq!(p.hash_bit(&x), scaled.hash_bit(&x));
        }
    }

    #[test]
    #[should_panic(expected = "dimension mismatch")]
    fn hash_bit_panics_on_dimension_mismatch() {
        let p = Projection { w: vec![1.0, 2.0], t: 0.0 };
        p.hash_bit(&[1.0]);
    }

    #[test]
    fn candidate_entropy_examples() {
        // Centers at -1 and +1 with a plane at 0.
        let plane = Projection { w: vec![1.0], t: 0.0 };
        let balanced = quant(vec![vec![-1.0], vec![1.0]], vec![50, 50]);
        assert_eq!(candidate_entropy(&plane, &balanced), 1.0);

        let skewed = quant(vec![vec![-1.0], vec![1.0]], vec![25, 75]);
        assert!((candidate_entropy(&plane, &skewed) - 0.811278).abs() <= 1e-6);

        let one_sided = quant(vec![vec![1.0], vec![2.0]], vec![30, 70]);
        assert_eq!(candidate_entropy(&plane, &one_sided), 0.0);
    }

    #[test]
    fn exact_entropy_of_singleton_split() {
        let ds = Dataset::from_vec(1, vec![-1.0, -1.0, -1.0, 1.0]).unwrap();
        let plane = Projection { w: vec![1.0], t: 0.0 };
        // 1 of 4 points on the positive side.
        assert!((exact_entropy(&plane, &ds) - 0.811278).abs() <= 1e-6);
        let all_neg = Projection { w: vec![1.0], t: 10.0 };
        assert_eq!(exact_entropy(&all_neg, &ds), 0.0);
    }

    #[test]
    fn candidate_entropy_tracks_exact_entropy_on_tight_clusters() {
        let spec = MixtureSpec {
            num_clusters: 6,
            points_per_cluster: 200,
            dim: 4,
            cluster_std: 0.05,
            center_box_half_width: 10.0,
            seed: 21,
        };
        let (ds, _) = generate_gaussian_mixture(&spec).unwrap();
        let centered = crate::data::center(&ds).unwrap();
        let q = crate::quantizer::kmeans(&centered, 6, 10, 3).unwrap();
        let candidates = generate_candidates(&q, 3).unwrap();
        assert!(!candidates.is_empty());
        for c in &candidates {
            let exact = exact_entropy(&c.projection, &centered);
            assert!(
                (c.entropy - exact).abs() <= 0.05,
                "pair {:?}: candidate {} vs exact {}",
                c.source_pair,
                c.entropy,
                exact
            );
        }
    }

    #[test]
    fn selection_orders_by_entropy_and_keeps_sources() {
        let spec = MixtureSpec {
            num_clusters: 8,
            points_per_cluster: 40,
            dim: 3,
            cluster_std: 0.2,
            center_box_half_width: 6.0,
            seed: 9,
        };
        let (ds, _) = generate_gaussian_mixture(&spec).unwrap();
        let centered = crate::data::center(&ds).unwrap();
        let q = crate::quantizer::kmeans(&centered, 8, 10, 1).unwrap();
        let candidates = generate_candidates(&q, 3).unwrap();
        let bits = 4;
        assert!(candidates.len() > bits);
        let selected = select_projections(&candidates, bits).unwrap();

        assert_eq!(selected.len(), bits);
        for w in selected.windows(2) {
            assert!(w[0].entropy >= w[1].entropy);
        }
        let min_selected = selected.last().unwrap().entropy;
        for c in &candidates {
            if !selected.iter().any(|s| s.source_pair == c.source_pair) {
                assert!(c.entropy <= min_selected);
            }
        }
        // Each selected projection is exactly the median plane of its pair.
        for s in &selected {
            let (i, j) = s.source_pair;
            let p = median_plane(q.center(i as usize), q.center(j as usize)).unwrap();
            assert_eq!(s.projection, p);
        }
    }

    #[test]
    fn selection_requires_enough_candidates() {
        let candidates = vec![];
        match select_projections(&candidates, 3) {
            Err(Error::TooFewCandidates { available, requested }) => {
                assert_eq!((available, requested), (0, 3));
            }
            other => panic!("expected too-few-candidates, got {other:?}"),
        }
    }

    /// Four tight Gaussians at the corners of a square: the canonical case
    /// where two median planes can isolate every cluster.
    fn square_mixture(points_per: usize, std: f64, seed: u64) -> (Dataset, Vec<u32>) {
        use rand::{Rng as _, SeedableRng as _};
        let centers = [[-2.0, -2.0], [2.0, -2.0], [-2.0, 2.0], [2.0, 2.0]];
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let mut values = Vec::with_capacity(points_per * 4 * 2);
        let mut labels = Vec::with_capacity(points_per * 4);
        for (l, c) in centers.iter().enumerate() {
            for _ in 0..points_per {
                for coord in c {
                    let z: f64 = rng.sample(rand_distr::StandardNormal);
                    values.push((coord + std * z) as f32);
                }
                labels.push(l as u32);
            }
        }
        (Dataset::from_vec(2, values).unwrap(), labels)
    }

    #[test]
    fn train_separates_four_clusters() {
        let (ds, labels) = square_mixture(100, 0.15, 31);
        let params = DshParams {
            iterations: 3,
            alpha: 2.0,
            radius: 2,
        };
        let model = train_dsh(&ds, 2, &params, 7).unwrap();
        assert_eq!(model.bits(), 2);
        assert_eq!(model.method, HashMethod::Dsh);

        // Codes must be constant within each cluster and distinct across.
        let centered = crate::data::center(&ds).unwrap();
        let code_of = |i: usize| -> u8 {
            let row = centered.row(i);
            let mut c = 0u8;
            for (b, p) in model.projections.iter().enumerate() {
                if p.hash_bit(row) {
                    c |= 1 << b;
                }
            }
            c
        };
        let mut cluster_codes = [None::<u8>; 4];
        for i in 0..ds.n() {
            let l = labels[i] as usize;
            let c = code_of(i);
            match cluster_codes[l] {
                None => cluster_codes[l] = Some(c),
                Some(expect) => assert_eq!(c, expect, "cluster {l} impure"),
            }
        }
        let mut codes: Vec<u8> = cluster_codes.iter().map(|c| c.unwrap()).collect();
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), 4, "clusters share codes: {cluster_codes:?}");
    }

    #[test]
    fn train_on_centered_input_matches_raw_input() {
        let spec = MixtureSpec {
            num_clusters: 3,
            points_per_cluster: 40,
            dim: 3,
            cluster_std: 0.2,
            center_box_half_width: 5.0,
            seed: 8,
        };
        let (raw, _) = generate_gaussian_mixture(&spec).unwrap();
        let centered = crate::data::center(&raw).unwrap();
        let params = DshParams::default();
        let from_raw = train_dsh(&raw, 4, &params, 11).unwrap();
        let from_centered = train_dsh(&centered, 4, &params, 11).unwrap();
        assert_eq!(from_raw, from_centered);
        assert_eq!(from_raw.training_mean, centered.mean().unwrap());
    }

    #[test]
    fn train_reports_too_few_candidates() {
        let spec = MixtureSpec {
            num_clusters: 2,
            points_per_cluster: 30,
            dim: 2,
            cluster_std: 0.3,
            center_box_half_width: 5.0,
            seed: 2,
        };
        let (ds, _) = generate_gaussian_mixture(&spec).unwrap();
        // alpha 0.4 with 5 bits gives k = 2, so r = 1 yields one candidate.
        let params = DshParams {
            iterations: 3,
            alpha: 0.4,
            radius: 1,
        };
        match train_dsh(&ds, 5, &params, 0) {
            Err(Error::TooFewCandidates { available, requested }) => {
                assert_eq!((available, requested), (1, 5));
            }
            other => panic!("expected too-few-candidates, got {other:?}"),
        }
    }

    #[test]
    fn train_is_deterministic() {
        let spec = MixtureSpec {
            num_clusters: 5,
            points_per_cluster: 50,
            dim: 4,
            cluster_std: 0.2,
            center_box_half_width: 8.0,
            seed: 13,
        };
        let (ds, _) = generate_gaussian_mixture(&spec).unwrap();
        let params = DshParams::default();
        let a = train_dsh(&ds, 8, &params, 5).unwrap();
        let b = train_dsh(&ds, 8, &params, 5).unwrap();
        assert_eq!(a, b);
        let c = train_dsh(&ds, 8, &params, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn model_round_trip_is_exact() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let dir = tempfile::tempdir().unwrap();
        for (idx, method) in [HashMethod::Dsh, HashMethod::Lsh, HashMethod::Pcah]
            .into_iter()
            .enumerate()
        {
            let d = 5;
            let model = HashModel {
                method,
                dim: d,
                projections: (0..3)
                    .map(|_| Projection {
                        w: (0..d).map(|_| rng.random_range(-2.0..2.0)).collect(),
                        t: rng.random_range(-1.0..1.0),
                    })
                    .collect(),
                training_mean: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            };
            let path = dir.path().join(format!("m{idx}.dsh"));
            save_model(&model, &path).unwrap();
            let loaded = load_model(&path).unwrap();
            assert_eq!(loaded, model);

            let expected = 13 + 8 * d as u64 + 3 * (8 * d as u64 + 8);
            assert_eq!(std::fs::metadata(&path).unwrap().len(), expected);
        }
    }

    #[test]
    fn model_load_rejects_corruption() {
        let model = HashModel {
            method: HashMethod::Dsh,
            dim: 2,
            projections: vec![Projection { w: vec![1.0, 2.0], t: 0.5 }],
            training_mean: vec![0.0, 0.0],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.dsh");
        save_model(&model, &path).unwrap();
        let good = std::fs::read(&path).unwrap();

        // Bad magic.
        let mut bad = good.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Format { offset: 0, .. })));

        // Unknown method byte.
        let mut bad = good.clone();
        bad[4] = 9;
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Format { offset: 4, .. })));

        // Truncation.
        let mut bad = good.clone();
        bad.truncate(bad.len() - 3);
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Format { .. })));

        // Trailing garbage.
        let mut bad = good.clone();
        bad.push(0);
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Format { .. })));

        // Non-finite projection value.
        let mut bad = good.clone();
        let w0_offset = 13 + 16;
        bad[w0_offset..w0_offset + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Format { .. })));

        std::fs::write(&path, &good).unwrap();
        assert!(load_model(&path).is_ok());
    }
}
