//! Bit-packed binary codes: encoding, Hamming distance, ranking, storage.
//!
//! A code of `bits` bits occupies `ceil(bits / 64)` little-endian u64
//! words; bit `b` lives at word `b / 64`, position `b % 64`, and unused
//! high bits of the last word are always zero. Hamming distances reduce to
//! XOR plus popcount over words.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;

use crate::data::Dataset;
use crate::dsh::HashModel;
use crate::error::{Error, Result};

/// Magic bytes at the start of every code file.
pub const CODES_MAGIC: &[u8; 4] = b"DSHC";

/// Hard cap on the declared bit width of a code file.
const MAX_BITS: usize = 1 << 20;

/// Packed binary codes for `n` vectors at a fixed bit width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeStore {
    n: usize,
    bits: usize,
    words_per_code: usize,
    words: Vec<u64>,
}

impl CodeStore {
    /// Wraps raw packed words. `words.len()` must equal
    /// `n * ceil(bits / 64)` and unused high bits must be zero.
    pub fn from_words(n: usize, bits: usize, words: Vec<u64>) -> Result<CodeStore> {
        if n < 1 {
            return Err(Error::Data("code store must hold at least one code".into()));
        }
        if bits < 1 || bits > MAX_BITS {
            return Err(Error::Data(format!("bit width must be in 1..={MAX_BITS}")));
        }
        let wpc = bits.div_ceil(64);
        if words.len() != n * wpc {
            return Err(Error::Data(format!(
                "expected {} words for {n} codes of {bits} bits, got {}",
                n * wpc,
                words.len()
            )));
        }
        if bits % 64 != 0 {
            let pad_mask = !0u64 << (bits % 64);
            for (i, chunk) in words.chunks_exact(wpc).enumerate() {
                if chunk[wpc - 1] & pad_mask != 0 {
                    return Err(Error::Data(format!("code {i} has nonzero padding bits")));
                }
            }
        }
        Ok(CodeStore {
            n,
            bits,
            words_per_code: wpc,
            words,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn words_per_code(&self) -> usize {
        self.words_per_code
    }

    /// Packed code of vector `i`. Panics if `i >= n`.
    pub fn code(&self, i: usize) -> &[u64] {
        &self.words[i * self.words_per_code..(i + 1) * self.words_per_code]
    }

    /// All packed words, row-major.
    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

/// Packs one vector's bits; `centered` must already have the training mean
/// subtracted.
fn encode_centered_row(model: &HashModel, centered: &[f32], out: &mut [u64]) {
    out.fill(0);
    for (b, p) in model.projections.iter().enumerate() {
        if p.hash_bit(centered) {
            out[b / 64] |= 1u64 << (b % 64);
        }
    }
}

fn check_dim(model: &HashModel, dim: usize) -> Result<()> {
    if model.dim != dim {
        return Err(Error::Data(format!(
            "model dimension {} does not match data dimension {dim}",
            model.dim
        )));
    }
    Ok(())
}

/// Encodes every vector of `ds` with `model`.
///
/// Raw datasets have the model's training mean subtracted first (in f64,
/// rounded back to f32); datasets already centered must carry a mean equal
/// to the model's, and their values are hashed as stored. Both paths
/// produce bit-identical codes for the same underlying raw data.
pub fn encode(model: &HashModel, ds: &Dataset) -> Result<CodeStore> {
    check_dim(model, ds.dim())?;
    if ds.is_centered() {
        let mean = ds.mean().expect("centered dataset records its mean");
        let drift = mean
            .iter()
            .zip(&model.training_mean)
            .map(|(a, b)| (a - b).abs())
            .fold(0f64, f64::max);
        if drift > 1e-12 {
            return Err(Error::Data(format!(
                "dataset was centered with a different mean (max drift {drift:e})"
            )));
        }
    }

    let wpc = model.bits().div_ceil(64);
    let rows: Vec<Vec<u64>> = (0..ds.n())
        .into_par_iter()
        .map(|i| {
            let mut code = vec![0u64; wpc];
            if ds.is_centered() {
                encode_centered_row(model, ds.row(i), &mut code);
            } else {
                let centered: Vec<f32> = ds
                    .row(i)
                    .iter()
                    .zip(&model.training_mean)
                    .map(|(&v, &m)| (v as f64 - m) as f32)
                    .collect();
                encode_centered_row(model, &centered, &mut code);
            }
            code
        })
        .collect();
    let mut words = Vec::with_capacity(ds.n() * wpc);
    for row in rows {
        words.extend(row);
    }
    CodeStore::from_words(ds.n(), model.bits(), words)
}

/// Encodes one raw query vector: the training mean is subtracted, then the
/// bits are packed exactly as in [`encode`].
pub fn encode_query(model: &HashModel, query: &[f32]) -> Result<Vec<u64>> {
    check_dim(model, query.len())?;
    if let Some(pos) = query.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("query has a non-finite component at index {pos}")));
    }
    let centered: Vec<f32> = query
        .iter()
        .zip(&model.training_mean)
        .map(|(&v, &m)| (v as f64 - m) as f32)
        .collect();
    let mut code = vec![0u64; model.bits().div_ceil(64)];
    encode_centered_row(model, &centered, &mut code);
    Ok(code)
}

/// Hamming distance between two packed codes of equal word length.
pub fn hamming(a: &[u64], b: &[u64]) -> u32 {
    assert_eq!(a.len(), b.len(), "code word lengths differ");
    a.iter().zip(b).map(|(&x, &y)| (x ^ y).count_ones()).sum()
}

/// Ranks every stored code by Hamming distance from `query_code`:
/// `(index, distance)` pairs sorted by distance, ties by ascending index.
pub fn rank_all(query_code: &[u64], store: &CodeStore) -> Vec<(u32, u32)> {
    assert_eq!(
        query_code.len(),
        store.words_per_code(),
        "query code width differs from store"
    );
    let mut ranked: Vec<(u32, u32)> = (0..store.n())
        .map(|i| (i as u32, hamming(query_code, store.code(i))))
        .collect();
    ranked.sort_unstable_by_key(|&(i, d)| (d, i));
    ranked
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

/// Serializes a code store: magic `DSHC`, record count u64, bit width u32,
/// then each code's words, all little-endian. The file size is exactly
/// `16 + n * ceil(bits / 64) * 8` bytes.
pub fn save_codes_to(store: &CodeStore, writer: &mut (impl Write + ?Sized)) -> io::Result<()> {
    writer.write_all(CODES_MAGIC)?;
    writer.write_u64::<LittleEndian>(store.n() as u64)?;
    writer.write_u32::<LittleEndian>(store.bits() as u32)?;
    for &w in store.words() {
        writer.write_u64::<LittleEndian>(w)?;
    }
    Ok(())
}

/// Saves a code store to `path` in the format of [`save_codes_to`].
pub fn save_codes(store: &CodeStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = BufWriter::new(file);
    save_codes_to(store, &mut writer).map_err(|e| io_err(path, e))?;
    writer.flush().map_err(|e| io_err(path, e))
}

/// Loads a code store saved by [`save_codes`], validating magic, bounds,
/// exact file size, and zero padding bits.
pub fn load_codes(path: impl AsRef<Path>) -> Result<CodeStore> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let file_len = file.metadata().map_err(|e| io_err(path, e))?.len();
    let mut reader = BufReader::new(file);

    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => format_err(path, 0, "file too short for magic bytes"),
        _ => io_err(path, e),
    })?;
    if &magic != CODES_MAGIC {
        return Err(format_err(path, 0, "bad magic bytes; not a code file"));
    }
    let n = reader.read_u64::<LittleEndian>().map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => format_err(path, 4, "truncated header"),
        _ => io_err(path, e),
    })?;
    let bits = reader.read_u32::<LittleEndian>().map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => format_err(path, 12, "truncated header"),
        _ => io_err(path, e),
    })? as usize;
    if n < 1 {
        return Err(format_err(path, 4, "code file declares zero records"));
    }
    if bits < 1 || bits > MAX_BITS {
        return Err(format_err(path, 12, format!("bit width {bits} outside 1..={MAX_BITS}")));
    }
    let wpc = bits.div_ceil(64) as u64;
    let expected_len = n
        .checked_mul(wpc)
        .and_then(|w| w.checked_mul(8))
        .and_then(|b| b.checked_add(16))
        .ok_or_else(|| format_err(path, 4, format!("implausible record count {n}")))?;
    if file_len < expected_len {
        return Err(format_err(
            path,
            file_len,
            format!("truncated code file: {file_len} bytes, expected {expected_len}"),
        ));
    }
    if file_len > expected_len {
        return Err(format_err(
            path,
            expected_len,
            format!("trailing data after codes: {file_len} bytes, expected {expected_len}"),
        ));
    }
    let total_words = (n * wpc) as usize;
    let mut words = vec![0u64; total_words];
    reader
        .read_u64_into::<LittleEndian>(&mut words)
        .map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => format_err(path, 16, "truncated code words"),
            _ => io_err(path, e),
        })?;
    CodeStore::from_words(n as usize, bits, words).map_err(|e| match e {
        Error::Data(message) => format_err(path, 16, message),
        other => other,
    })
}
