//! C ABI over navseg.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns a
//! [`NavsegStatus`] and writes its result through an out pointer; the
//! message of the last failure on the calling thread is available from
//! [`navseg_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use navseg::codec::DctCodec;
use navseg::partition::{lloyd_optimize, select_num_segments, CostParams, LloydOptions, Partition};
use navseg::{Dataset, Error};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NavsegStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    InvalidArgument = 4,
    OutOfRange = 5,
    Malformed = 6,
    Failure = 7,
    Panic = 8,
}

/// A scene with its navigation domain and rendered views.
pub struct NavsegDataset(Dataset);

/// A partition of a dataset's domain into segments.
pub struct NavsegPartition(Partition);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> NavsegStatus {
    match e {
        Error::Io(_) => NavsegStatus::Io,
        Error::IndexOutOfRange { .. } | Error::TooManySegments { .. } | Error::UnknownSegment(_) => {
            NavsegStatus::OutOfRange
        }
        Error::InvalidParameter(_) | Error::InvalidScene(_) | Error::InvalidDomain(_) => NavsegStatus::InvalidArgument,
        Error::Json(_) | Error::Bitstream(_) => NavsegStatus::Malformed,
        _ => NavsegStatus::Failure,
    }
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), NavsegStatus>) -> NavsegStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NavsegStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            NavsegStatus::Panic
        }
    }
}

fn fail(e: Error) -> NavsegStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(what: &str) -> NavsegStatus {
    set_error(format!("{what} is null"));
    NavsegStatus::NullPointer
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a str, NavsegStatus> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path).to_str().map_err(|_| {
        set_error("path is not valid UTF-8");
        NavsegStatus::InvalidUtf8
    })
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, NavsegStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), NavsegStatus> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `len`) and returns its full length, or 0 when
/// there is none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn navseg_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Builds a scene from a JSON file and renders every view of its domain.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn navseg_dataset_load(path: *const c_char, out: *mut *mut NavsegDataset) -> NavsegStatus {
    guard(|| {
        let path = path_arg(path)?;
        let ds = Dataset::load(path).map_err(fail)?;
        write(out, Box::into_raw(Box::new(NavsegDataset(ds))))
    })
}

/// # Safety
/// `ds` must be null or a handle from [`navseg_dataset_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn navseg_dataset_free(ds: *mut NavsegDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// # Safety
/// `ds` must be a live dataset handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn navseg_dataset_view_count(ds: *const NavsegDataset, out: *mut usize) -> NavsegStatus {
    guard(|| write(out, handle(ds, "dataset")?.0.len()))
}

/// # Safety
/// `ds` must be a live dataset handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn navseg_dataset_voxel_count(ds: *const NavsegDataset, out: *mut usize) -> NavsegStatus {
    guard(|| write(out, handle(ds, "dataset")?.0.scene.voxel_count()))
}

/// Number of voxels seen by both views `a` and `b`.
///
/// # Safety
/// `ds` must be a live dataset handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn navseg_similarity(ds: *const NavsegDataset, a: usize, b: usize, out: *mut usize) -> NavsegStatus {
    guard(|| {
        let ds = &handle(ds, "dataset")?.0;
        ds.domain.check_index(a).map_err(fail)?;
        ds.domain.check_index(b).map_err(fail)?;
        write(out, ds.similarity(a, b))
    })
}

/// Best number of segments for rate weight `mu` and navigation period `nt`.
///
/// # Safety
/// `ds` must be a live dataset handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn navseg_select_num_segments(
    ds: *const NavsegDataset,
    mu: f64,
    nt: usize,
    q: u32,
    out: *mut usize,
) -> NavsegStatus {
    guard(|| {
        let ds = &handle(ds, "dataset")?.0;
        let params = CostParams::new(&ds.domain, 0.0, mu, q).map_err(fail)?;
        let sel = select_num_segments(&ds.domain, &ds.sets, &params, &DctCodec::new(ds, q), nt).map_err(fail)?;
        write(out, sel.best_nv)
    })
}

/// Runs the partition optimizer with `nv` segments.
///
/// # Safety
/// `ds` must be a live dataset handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn navseg_partition_optimize(
    ds: *const NavsegDataset,
    nv: usize,
    lambda: f64,
    q: u32,
    nt: usize,
    out: *mut *mut NavsegPartition,
) -> NavsegStatus {
    guard(|| {
        let ds = &handle(ds, "dataset")?.0;
        let params = CostParams::new(&ds.domain, lambda, 0.0, q).map_err(fail)?;
        let options = LloydOptions { nt, ..LloydOptions::default() };
        let p = lloyd_optimize(&ds.domain, &ds.sets, nv, &params, &DctCodec::new(ds, q), &options).map_err(fail)?;
        write(out, Box::into_raw(Box::new(NavsegPartition(p))))
    })
}

/// Reads a partition JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn navseg_partition_load(path: *const c_char, out: *mut *mut NavsegPartition) -> NavsegStatus {
    guard(|| {
        let p = Partition::load(path_arg(path)?).map_err(fail)?;
        write(out, Box::into_raw(Box::new(NavsegPartition(p))))
    })
}

/// Writes a partition as JSON.
///
/// # Safety
/// `p` must be a live partition handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn navseg_partition_save(p: *const NavsegPartition, path: *const c_char) -> NavsegStatus {
    guard(|| {
        let p = handle(p, "partition")?;
        p.0.save(path_arg(path)?).map_err(fail)
    })
}

/// # Safety
/// `p` must be null or a partition handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn navseg_partition_free(p: *mut NavsegPartition) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live partition handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn navseg_partition_segment_count(p: *const NavsegPartition, out: *mut usize) -> NavsegStatus {
    guard(|| write(out, handle(p, "partition")?.0.segments.len()))
}

/// Reference view of segment `segment`.
///
/// # Safety
/// `p` must be a live partition handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn navseg_partition_reference(
    p: *const NavsegPartition,
    segment: usize,
    out: *mut usize,
) -> NavsegStatus {
    guard(|| {
        let p = &handle(p, "partition")?.0;
        let seg = p.segments.get(segment).ok_or_else(|| fail(Error::UnknownSegment(segment)))?;
        write(out, seg.reference)
    })
}

/// Segment containing view `view`.
///
/// # Safety
/// `p` must be a live partition handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn navseg_partition_segment_of(
    p: *const NavsegPartition,
    view: usize,
    out: *mut usize,
) -> NavsegStatus {
    guard(|| {
        let p = &handle(p, "partition")?.0;
        let s = p.segment_of(view).ok_or_else(|| fail(Error::IndexOutOfRange { index: view, len: p.n_views }))?;
        write(out, s)
    })
}

/// Storage, expected rate and objective in bits.
///
/// # Safety
/// `p` must be a live partition handle; each out pointer must be valid.
#[no_mangle]
pub unsafe extern "C" fn navseg_partition_costs(
    p: *const NavsegPartition,
    storage: *mut f64,
    rate: *mut f64,
    objective: *mut f64,
) -> NavsegStatus {
    guard(|| {
        let c = handle(p, "partition")?.0.costs;
        write(storage, c.storage)?;
        write(rate, c.rate)?;
        write(objective, c.objective)
    })
}
