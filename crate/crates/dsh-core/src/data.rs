//! In-memory datasets, vector file I/O, centering, and synthetic data.
//!
//! Vectors are stored row-major as `f32` with a fixed dimension per dataset.
//! Two on-disk layouts are supported, both little-endian with one record per
//! vector and no global header:
//!
//! * fvecs: `[i32 dimension][dimension x f32 components]`
//! * bvecs: `[i32 dimension][dimension x u8 components]` (widened to f32,
//!   values 0.0 through 255.0)
//!
//! Malformed files (dimension outside `1..=MAX_DIM`, mismatched dimensions
//! across records, truncated records, non-finite components) are rejected
//! with the byte offset of the offending record.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Largest accepted vector dimension in the file formats.
pub const MAX_DIM: usize = 100_000;

/// A dense set of `n` vectors of dimension `d`, stored row-major.
///
/// `mean` is present once the dataset has been centered and holds the
/// per-column mean (in f64) that was subtracted.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    values: Vec<f32>,
    centered: bool,
    mean: Option<Vec<f64>>,
}

impl Dataset {
    /// Builds a dataset from a flat row-major buffer of `n * d` components.
    ///
    /// Rejects an empty buffer, a length that is not a multiple of `d`, and
    /// non-finite components.
    pub fn from_vec(d: usize, values: Vec<f32>) -> Result<Dataset> {
        if d < 1 {
            return Err(Error::Data("vector dimension must be at least 1".into()));
        }
        if values.is_empty() {
            return Err(Error::Data("dataset must contain at least one vector".into()));
        }
        if values.len() % d != 0 {
            return Err(Error::Data(format!(
                "buffer of {} components is not a multiple of dimension {}",
                values.len(),
                d
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite component at flat index {pos}"
            )));
        }
        Ok(Dataset {
            n: values.len() / d,
            d,
            values,
            centered: false,
            mean: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Flat row-major component buffer of length `n * d`.
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Row `i` as a slice of `d` components. Panics if `i >= n`.
    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// Per-column mean subtracted during centering, if any.
    pub fn mean(&self) -> Option<&[f64]> {
        self.mean.as_deref()
    }
}

enum VecFormat {
    F32,
    U8,
}

impl VecFormat {
    fn component_size(&self) -> usize {
        match self {
            VecFormat::F32 => 4,
            VecFormat::U8 => 1,
        }
    }
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

/// Reads exactly four header bytes, or reports a clean end of file when no
/// byte of the header is present. A partial header yields `UnexpectedEof`.
fn read_dim_header(reader: &mut impl Read) -> io::Result<Option<[u8; 4]>> {
    let mut buf = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        match reader.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => {
                return Err(io::Error::new(
                    io::ErrorKind::UnexpectedEof,
                    "incomplete dimension header",
                ))
            }
            Ok(k) => filled += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(Some(buf))
}

fn load_vecs(path: &Path, format: VecFormat) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let file_len = file.metadata().map_err(|e| io_err(path, e))?.len();
    let mut reader = BufReader::new(file);

    let mut values: Vec<f32> = Vec::new();
    let mut f32_buf: Vec<f32> = Vec::new();
    let mut u8_buf: Vec<u8> = Vec::new();
    let mut offset: u64 = 0;
    let mut expected_d: Option<usize> = None;
    let mut record = 0usize;

    loop {
        let record_start = offset;
        let header = match read_dim_header(&mut reader) {
            Ok(Some(h)) => h,
            Ok(None) => break,
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => {
                return Err(format_err(
                    path,
                    record_start,
                    format!("truncated record {record}: incomplete dimension header"),
                ));
            }
            Err(e) => return Err(io_err(path, e)),
        };
        offset += 4;
        let d_raw = i32::from_le_bytes(header);
        if d_raw < 1 || d_raw as usize > MAX_DIM {
            return Err(format_err(
                path,
                record_start,
                format!("record {record} has invalid dimension {d_raw}"),
            ));
        }
        let d = d_raw as usize;
        match expected_d {
            None => {
                expected_d = Some(d);
                // One allocation up front, sized from the file length.
                let record_bytes = (4 + d * format.component_size()) as u64;
                values.reserve(((file_len / record_bytes) as usize).saturating_mul(d));
            }
            Some(d0) if d0 != d => {
                return Err(format_err(
                    path,
                    record_start,
                    format!("record {record} has dimension {d} but record 0 has dimension {d0}"),
                ));
            }
            Some(_) => {}
        }

        match format {
            VecFormat::F32 => {
                f32_buf.resize(d, 0.0);
                match reader.read_f32_into::<LittleEndian>(&mut f32_buf) {
                    Ok(()) => {}
                    Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => {
                        return Err(format_err(
                            path,
                            record_start,
                            format!("truncated record {record}: expected {} payload bytes", 4 * d),
                        ));
                    }
                    Err(e) => return Err(io_err(path, e)),
                }
                if let Some(j) = f32_buf.iter().position(|v| !v.is_finite()) {
                    return Err(format_err(
                        path,
                        record_start + 4 + 4 * j as u64,
                        format!("record {record} has a non-finite component at index {j}"),
                    ));
                }
                values.extend_from_slice(&f32_buf);
            }
            VecFormat::U8 => {
                u8_buf.resize(d, 0);
                match reader.read_exact(&mut u8_buf) {
                    Ok(()) => {}
                    Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => {
                        return Err(format_err(
                            path,
                            record_start,
                            format!("truncated record {record}: expected {d} payload bytes"),
                        ));
                    }
                    Err(e) => return Err(io_err(path, e)),
                }
                values.extend(u8_buf.iter().map(|&b| b as f32));
            }
        }
        offset += (d * format.component_size()) as u64;
        record += 1;
    }

    if record == 0 {
        return Err(format_err(path, 0, "file contains no records"));
    }
    Dataset::from_vec(expected_d.unwrap(), values)
}

/// Loads an fvecs file: little-endian `[i32 d][d x f32]` records.
pub fn load_fvecs(path: impl AsRef<Path>) -> Result<Dataset> {
    load_vecs(path.as_ref(), VecFormat::F32)
}

/// Loads a bvecs file: little-endian `[i32 d][d x u8]` records, each byte
/// widened to an f32 in 0.0..=255.0.
pub fn load_bvecs(path: impl AsRef<Path>) -> Result<Dataset> {
    load_vecs(path.as_ref(), VecFormat::U8)
}

/// Writes the dataset in fvecs layout to `writer`.
pub fn write_fvecs_to(ds: &Dataset, writer: &mut (impl Write + ?Sized)) -> io::Result<()> {
    for i in 0..ds.n() {
        writer.write_i32::<LittleEndian>(ds.dim() as i32)?;
        for &v in ds.row(i) {
            writer.write_f32::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

/// Writes the dataset in fvecs layout to `path`. Loading the result yields a
/// byte-identical file when written again.
pub fn write_fvecs(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = BufWriter::new(file);
    write_fvecs_to(ds, &mut writer).map_err(|e| io_err(path, e))?;
    writer.flush().map_err(|e| io_err(path, e))
}

/// Per-column means, accumulated in f64 in row order.
pub fn column_means(ds: &Dataset) -> Vec<f64> {
    let (n, d) = (ds.n(), ds.dim());
    let mut mean = vec![0f64; d];
    for i in 0..n {
        for (m, &v) in mean.iter_mut().zip(ds.row(i)) {
            *m += v as f64;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    mean
}

/// Returns a centered copy of `ds`: the per-column mean (accumulated in f64)
/// is subtracted from every component, and the mean is recorded on the
/// result. Centering an already centered dataset is an error.
pub fn center(ds: &Dataset) -> Result<Dataset> {
    if ds.is_centered() {
        return Err(Error::Data("dataset is already centered".into()));
    }
    let (n, d) = (ds.n(), ds.dim());
    let mean = column_means(ds);
    let mut values = Vec::with_capacity(n * d);
    for i in 0..n {
        for (j, &v) in ds.row(i).iter().enumerate() {
            values.push((v as f64 - mean[j]) as f32);
        }
    }
    Ok(Dataset {
        n,
        d,
        values,
        centered: true,
        mean: Some(mean),
    })
}

/// Parameters for [`generate_gaussian_mixture`].
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub num_clusters: usize,
    pub points_per_cluster: usize,
    pub dim: usize,
    /// Per-coordinate standard deviation of each spherical cluster.
    pub cluster_std: f64,
    /// Cluster centers are drawn uniformly from `[-half_width, half_width]^dim`.
    pub center_box_half_width: f64,
    pub seed: u64,
}

impl MixtureSpec {
    fn validate(&self) -> Result<()> {
        if self.num_clusters < 1 {
            return Err(Error::Param("mixture needs at least one cluster".into()));
        }
        if self.points_per_cluster < 1 {
            return Err(Error::Param(
                "mixture needs at least one point per cluster".into(),
            ));
        }
        if self.dim < 1 || self.dim > MAX_DIM {
            return Err(Error::Param(format!(
                "mixture dimension must be in 1..={MAX_DIM}"
            )));
        }
        if !(self.cluster_std.is_finite() && self.cluster_std > 0.0) {
            return Err(Error::Param("cluster std must be finite and positive".into()));
        }
        if !(self.center_box_half_width.is_finite() && self.center_box_half_width > 0.0) {
            return Err(Error::Param(
                "center box half width must be finite and positive".into(),
            ));
        }
        Ok(())
    }
}

/// Draws a spherical Gaussian mixture: cluster centers uniform in a box,
/// then `points_per_cluster` points per center. Returns the dataset together
/// with the cluster label of each point, grouped by cluster in order.
///
/// Generation is deterministic for a given spec: centers are drawn first
/// (cluster by cluster, coordinate by coordinate), then points in the same
/// order.
pub fn generate_gaussian_mixture(spec: &MixtureSpec) -> Result<(Dataset, Vec<u32>)> {
    spec.validate()?;
    let mut rng = StdRng::seed_from_u64(spec.seed);
    let (c, p, d) = (spec.num_clusters, spec.points_per_cluster, spec.dim);
    let hw = spec.center_box_half_width;

    let mut centers = Vec::with_capacity(c * d);
    for _ in 0..c * d {
        centers.push(rng.random_range(-hw..hw));
    }

    let mut values = Vec::with_capacity(c * p * d);
    let mut labels = Vec::with_capacity(c * p);
    for ci in 0..c {
        let center = &centers[ci * d..(ci + 1) * d];
        for _ in 0..p {
            for &cj in center {
                let noise: f64 = rng.sample(StandardNormal);
                values.push((cj + spec.cluster_std * noise) as f32);
            }
            labels.push(ci as u32);
        }
    }
    Ok((Dataset::from_vec(d, values)?, labels))
}
