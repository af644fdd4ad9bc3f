//! C interface to the hashing library.
//!
//! The API hands out opaque pointers to three kinds of objects — datasets,
//! trained hash models, and packed code stores — and exposes the training,
//! encoding, and Hamming-search entry points over them. Every fallible
//! function returns a [`DshStatus`]; on any status other than `DSH_OK` a
//! human-readable message is recorded for [`dsh_last_error`] and the
//! out-parameters are left untouched. Each handle must be released exactly
//! once with its matching `*_free` function; all `*_free` functions and all
//! getters tolerate null handles.
//!
//! Handles are immutable after creation, so sharing one across threads for
//! concurrent reads is safe. The error message store is per-thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use dsh_core::codes::{self, CodeStore};
use dsh_core::data::{self, Dataset};
use dsh_core::dsh::{self, DshParams, HashMethod, HashModel};
use dsh_core::{baselines, Error, ErrorKind};

/// Status code returned by every fallible call.
#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DshStatus {
    /// The call succeeded and its out-parameters are valid.
    DSH_OK = 0,
    /// A malformed argument: null pointer, bad encoding, out-of-range value.
    DSH_USAGE = 1,
    /// Malformed or inconsistent input data or artifact files.
    DSH_DATA = 2,
    /// Training failed: infeasible parameters or degenerate geometry.
    DSH_TRAINING = 3,
    /// An unexpected internal failure was caught at the library boundary.
    DSH_INTERNAL = 4,
}

/// Opaque handle to an in-memory dataset of float vectors.
pub struct DshDataset {
    _private: [u8; 0],
}

/// Opaque handle to a trained hash model.
pub struct DshModel {
    _private: [u8; 0],
}

/// Opaque handle to a store of packed binary codes.
pub struct DshCodes {
    _private: [u8; 0],
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean: String = msg
        .chars()
        .map(|c| if c == '\0' { ' ' } else { c })
        .collect();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(clean).expect("NULs were stripped"));
}

fn usage(msg: &str) -> DshStatus {
    set_error(msg);
    DshStatus::DSH_USAGE
}

fn fail(e: Error) -> DshStatus {
    set_error(&e.to_string());
    match e.kind() {
        ErrorKind::Usage => DshStatus::DSH_USAGE,
        ErrorKind::Data => DshStatus::DSH_DATA,
        ErrorKind::Training => DshStatus::DSH_TRAINING,
    }
}

fn lift<T>(r: dsh_core::Result<T>) -> Result<T, DshStatus> {
    r.map_err(fail)
}

/// Runs an API body, converting any panic into `DSH_INTERNAL` instead of
/// letting it unwind across the C boundary.
fn guarded(body: impl FnOnce() -> DshStatus) -> DshStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal error: a panic was caught at the library boundary");
            DshStatus::DSH_INTERNAL
        }
    }
}

macro_rules! ffi_try {
    ($expr:expr) => {
        match $expr {
            Ok(value) => value,
            Err(status) => return status,
        }
    };
}

fn into_handle<T, H>(value: T) -> *mut H {
    Box::into_raw(Box::new(value)).cast()
}

unsafe fn handle_ref<'a, T, H>(handle: *const H) -> Option<&'a T> {
    handle.cast::<T>().as_ref()
}

unsafe fn free_handle<T, H>(handle: *mut H) {
    if !handle.is_null() {
        drop(Box::from_raw(handle.cast::<T>()));
    }
}

unsafe fn path_arg(ptr: *const c_char, what: &str) -> Result<PathBuf, DshStatus> {
    if ptr.is_null() {
        return Err(usage(&format!("{what} is null")));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => Err(usage(&format!("{what} is not valid UTF-8"))),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dsh_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message from the most recent failing call on the current thread, as a
/// NUL-terminated UTF-8 string. Empty until something fails. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dsh_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Builds a dataset from a row-major buffer of `n` vectors with `dim`
/// floats each. The buffer is copied; the caller keeps ownership of
/// `values`. On `DSH_OK`, `*out` receives a new handle.
#[no_mangle]
pub unsafe extern "C" fn dsh_dataset_from_buffer(
    values: *const f32,
    n: usize,
    dim: usize,
    out: *mut *mut DshDataset,
) -> DshStatus {
    guarded(|| {
        if out.is_null() {
            return usage("out is null");
        }
        if values.is_null() {
            return usage("values is null");
        }
        let len = match n.checked_mul(dim) {
            Some(len) => len,
            None => return usage("n * dim overflows"),
        };
        let rows = unsafe { slice::from_raw_parts(values, len) }.to_vec();
        let ds = ffi_try!(lift(Dataset::from_vec(dim, rows)));
        unsafe { *out = into_handle(ds) };
        DshStatus::DSH_OK
    })
}

/// Loads a dataset from an `.fvecs` file.
#[no_mangle]
pub unsafe extern "C" fn dsh_dataset_load_fvecs(
    path: *const c_char,
    out: *mut *mut DshDataset,
) -> DshStatus {
    guarded(|| {
        if out.is_null() {
            return usage("out is null");
        }
        let path = ffi_try!(unsafe { path_arg(path, "path") });
        let ds = ffi_try!(lift(data::load_fvecs(path)));
        unsafe { *out = into_handle(ds) };
        DshStatus::DSH_OK
    })
}

/// Loads a dataset from a `.bvecs` file, widening each byte to a float.
#[no_mangle]
pub unsafe extern "C" fn dsh_dataset_load_bvecs(
    path: *const c_char,
    out: *mut *mut DshDataset,
) -> DshStatus {
    guarded(|| {
        if out.is_null() {
            return usage("out is null");
        }
        let path = ffi_try!(unsafe { path_arg(path, "path") });
        let ds = ffi_try!(lift(data::load_bvecs(path)));
        unsafe { *out = into_handle(ds) };
        DshStatus::DSH_OK
    })
}

/// Number of vectors in the dataset, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dsh_dataset_n(ds: *const DshDataset) -> usize {
    unsafe { handle_ref::<Dataset, _>(ds) }.map_or(0, |d| d.n())
}

/// Dimensionality of the dataset, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dsh_dataset_dim(ds: *const DshDataset) -> usize {
    unsafe { handle_ref::<Dataset, _>(ds) }.map_or(0, |d| d.dim())
}

/// Releases a dataset handle. A null pointer is ignored.
#[no_mangle]
pub unsafe extern "C" fn dsh_dataset_free(ds: *mut DshDataset) {
    unsafe { free_handle::<Dataset, _>(ds) }
}

/// Trains a density-sensitive model with `bits` hash functions.
///
/// `iterations`, `alpha`, and `radius` control the quantization sweep
/// count, the group-count factor, and the adjacency radius; pass 0 (or 0.0
/// for `alpha`) to use the defaults. Training is deterministic for a given
/// dataset, parameter set, and `seed`.
#[no_mangle]
pub unsafe extern "C" fn dsh_train_dsh(
    ds: *const DshDataset,
    bits: usize,
    iterations: usize,
    alpha: f64,
    radius: usize,
    seed: u64,
    out: *mut *mut DshModel,
) -> DshStatus {
    guarded(|| {
        if out.is_null() {
            return usage("out is null");
        }
        let ds = match unsafe { handle_ref::<Dataset, _>(ds) } {
            Some(d) => d,
            None => return usage("dataset is null"),
        };
        let defaults = DshParams::default();
        let params = DshParams {
            iterations: if iterations == 0 {
                defaults.iterations
            } else {
                iterations
            },
            alpha: if alpha == 0.0 { defaults.alpha } else { alpha },
            radius: if radius == 0 { defaults.radius } else { radius },
        };
        let model = ffi_try!(lift(dsh::train_dsh(ds, bits, &params, seed)));
        unsafe { *out = into_handle(model) };
        DshStatus::DSH_OK
    })
}

/// Trains a random-hyperplane baseline sized for `ds`, remembering the
/// dataset's column means so later queries are centered consistently.
#[no_mangle]
pub unsafe extern "C" fn dsh_train_lsh(
    ds: *const DshDataset,
    bits: usize,
    seed: u64,
    out: *mut *mut DshModel,
) -> DshStatus {
    guarded(|| {
        if out.is_null() {
            return usage("out is null");
        }
        let ds = match unsafe { handle_ref::<Dataset, _>(ds) } {
            Some(d) => d,
            None => return usage("dataset is null"),
        };
        let model = ffi_try!(lift(baselines::train_lsh(ds.dim(), bits, seed)
            .and_then(|m| m.with_training_mean(data::column_means(ds)))));
        unsafe { *out = into_handle(model) };
        DshStatus::DSH_OK
    })
}

/// Trains a PCA hashing baseline on `ds`. `bits` may not exceed the data
/// dimensionality.
#[no_mangle]
pub unsafe extern "C" fn dsh_train_pcah(
    ds: *const DshDataset,
    bits: usize,
    out: *mut *mut DshModel,
) -> DshStatus {
    guarded(|| {
        if out.is_null() {
            return usage("out is null");
        }
        let ds = match unsafe { handle_ref::<Dataset, _>(ds) } {
            Some(d) => d,
            None => return usage("dataset is null"),
        };
        let model = ffi_try!(lift(baselines::train_pcah(ds, bits)));
        unsafe { *out = into_handle(model) };
        DshStatus::DSH_OK
    })
}

/// Writes a model to `path` in the library's binary format.
#[no_mangle]
pub unsafe extern "C" fn dsh_model_save(model: *const DshModel, path: *const c_char) -> DshStatus {
    guarded(|| {
        let model = match unsafe { handle_ref::<HashModel, _>(model) } {
            Some(m) => m,
            None => return usage("model is null"),
        };
        let path = ffi_try!(unsafe { path_arg(path, "path") });
        ffi_try!(lift(dsh::save_model(model, path)));
        DshStatus::DSH_OK
    })
}

/// Loads a model previously written by `dsh_model_save` or the CLI.
#[no_mangle]
pub unsafe extern "C" fn dsh_model_load(path: *const c_char, out: *mut *mut DshModel) -> DshStatus {
    guarded(|| {
        if out.is_null() {
            return usage("out is null");
        }
        let path = ffi_try!(unsafe { path_arg(path, "path") });
        let model = ffi_try!(lift(dsh::load_model(path)));
        unsafe { *out = into_handle(model) };
        DshStatus::DSH_OK
    })
}

/// Number of hash functions in the model, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dsh_model_bits(model: *const DshModel) -> usize {
    unsafe { handle_ref::<HashModel, _>(model) }.map_or(0, |m| m.bits())
}

/// Input dimensionality the model expects, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dsh_model_dim(model: *const DshModel) -> usize {
    unsafe { handle_ref::<HashModel, _>(model) }.map_or(0, |m| m.dim)
}

/// Number of 64-bit words each code occupies, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dsh_model_words_per_code(model: *const DshModel) -> usize {
    unsafe { handle_ref::<HashModel, _>(model) }.map_or(0, |m| m.bits().div_ceil(64))
}

/// Hashing family of the model: 0 for density-sensitive, 1 for random
/// hyperplanes, 2 for PCA. Returns -1 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dsh_model_method(model: *const DshModel) -> i32 {
    match unsafe { handle_ref::<HashModel, _>(model) } {
        Some(m) => match m.method {
            HashMethod::Dsh => 0,
            HashMethod::Lsh => 1,
            HashMethod::Pcah => 2,
        },
        None => -1,
    }
}

/// Releases a model handle. A null pointer is ignored.
#[no_mangle]
pub unsafe extern "C" fn dsh_model_free(model: *mut DshModel) {
    unsafe { free_handle::<HashModel, _>(model) }
}

/// Encodes every vector of `ds` with `model` into a new code store.
#[no_mangle]
pub unsafe extern "C" fn dsh_encode(
    model: *const DshModel,
    ds: *const DshDataset,
    out: *mut *mut DshCodes,
) -> DshStatus {
    guarded(|| {
        if out.is_null() {
            return usage("out is null");
        }
        let model = match unsafe { handle_ref::<HashModel, _>(model) } {
            Some(m) => m,
            None => return usage("model is null"),
        };
        let ds = match unsafe { handle_ref::<Dataset, _>(ds) } {
            Some(d) => d,
            None => return usage("dataset is null"),
        };
        let store = ffi_try!(lift(codes::encode(model, ds)));
        unsafe { *out = into_handle(store) };
        DshStatus::DSH_OK
    })
}

/// Writes a code store to `path` in the library's binary format.
#[no_mangle]
pub unsafe extern "C" fn dsh_codes_save(store: *const DshCodes, path: *const c_char) -> DshStatus {
    guarded(|| {
        let store = match unsafe { handle_ref::<CodeStore, _>(store) } {
            Some(s) => s,
            None => return usage("codes is null"),
        };
        let path = ffi_try!(unsafe { path_arg(path, "path") });
        ffi_try!(lift(codes::save_codes(store, path)));
        DshStatus::DSH_OK
    })
}

/// Loads a code store previously written by `dsh_codes_save` or the CLI.
#[no_mangle]
pub unsafe extern "C" fn dsh_codes_load(path: *const c_char, out: *mut *mut DshCodes) -> DshStatus {
    guarded(|| {
        if out.is_null() {
            return usage("out is null");
        }
        let path = ffi_try!(unsafe { path_arg(path, "path") });
        let store = ffi_try!(lift(codes::load_codes(path)));
        unsafe { *out = into_handle(store) };
        DshStatus::DSH_OK
    })
}

/// Number of codes in the store, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dsh_codes_n(store: *const DshCodes) -> usize {
    unsafe { handle_ref::<CodeStore, _>(store) }.map_or(0, |s| s.n())
}

/// Bits per code in the store, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dsh_codes_bits(store: *const DshCodes) -> usize {
    unsafe { handle_ref::<CodeStore, _>(store) }.map_or(0, |s| s.bits())
}

/// Number of 64-bit words each stored code occupies, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dsh_codes_words_per_code(store: *const DshCodes) -> usize {
    unsafe { handle_ref::<CodeStore, _>(store) }.map_or(0, |s| s.words_per_code())
}

/// Releases a code store handle. A null pointer is ignored.
#[no_mangle]
pub unsafe extern "C" fn dsh_codes_free(store: *mut DshCodes) {
    unsafe { free_handle::<CodeStore, _>(store) }
}

/// Encodes one query vector of `query_len` floats.
///
/// `out_words` must hold at least `dsh_model_words_per_code(model)` words;
/// `out_words_len` is its capacity in words. Bits are packed
/// least-significant-first within each word, matching the stored codes.
#[no_mangle]
pub unsafe extern "C" fn dsh_encode_query(
    model: *const DshModel,
    query: *const f32,
    query_len: usize,
    out_words: *mut u64,
    out_words_len: usize,
) -> DshStatus {
    guarded(|| {
        let model = match unsafe { handle_ref::<HashModel, _>(model) } {
            Some(m) => m,
            None => return usage("model is null"),
        };
        if query.is_null() {
            return usage("query is null");
        }
        if out_words.is_null() {
            return usage("out_words is null");
        }
        let needed = model.bits().div_ceil(64);
        if out_words_len < needed {
            return usage(&format!(
                "out_words holds {out_words_len} words but the code needs {needed}"
            ));
        }
        let q = unsafe { slice::from_raw_parts(query, query_len) };
        let words = ffi_try!(lift(codes::encode_query(model, q)));
        unsafe { ptr::copy_nonoverlapping(words.as_ptr(), out_words, needed) };
        DshStatus::DSH_OK
    })
}

/// Encodes a query and ranks every code in `store` by Hamming distance to
/// it, best first, ties broken by lower database index.
///
/// Writes up to `top` results into `out_indices` and `out_distances`,
/// which must each hold `top` entries; `*out_written` receives the number
/// actually written (the smaller of `top` and the store size). The model
/// must produce codes of the same width as the store.
#[no_mangle]
pub unsafe extern "C" fn dsh_search(
    model: *const DshModel,
    store: *const DshCodes,
    query: *const f32,
    query_len: usize,
    top: usize,
    out_indices: *mut u32,
    out_distances: *mut u32,
    out_written: *mut usize,
) -> DshStatus {
    guarded(|| {
        let model = match unsafe { handle_ref::<HashModel, _>(model) } {
            Some(m) => m,
            None => return usage("model is null"),
        };
        let store = match unsafe { handle_ref::<CodeStore, _>(store) } {
            Some(s) => s,
            None => return usage("codes is null"),
        };
        if query.is_null() {
            return usage("query is null");
        }
        if out_indices.is_null() || out_distances.is_null() || out_written.is_null() {
            return usage("result buffers may not be null");
        }
        if top == 0 {
            return usage("top must be at least 1");
        }
        if model.bits() != store.bits() {
            return fail(Error::Data(format!(
                "model produces {}-bit codes but the store holds {}-bit codes",
                model.bits(),
                store.bits()
            )));
        }
        let q = unsafe { slice::from_raw_parts(query, query_len) };
        let code = ffi_try!(lift(codes::encode_query(model, q)));
        let ranked = codes::rank_all(&code, store);
        let written = top.min(ranked.len());
        for (i, (index, distance)) in ranked[..written].iter().enumerate() {
            unsafe {
                *out_indices.add(i) = *index;
                *out_distances.add(i) = *distance;
            }
        }
        unsafe { *out_written = written };
        DshStatus::DSH_OK
    })
}
