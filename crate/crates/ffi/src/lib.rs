//! C ABI over the limsup engine.
//!
//! Every object crosses the boundary as an opaque handle owned by the caller
//! and released with the matching `*_free` function. Every fallible call
//! returns a [`LimsupStatus`]; the message of the last failure on the calling
//! thread is available through [`limsup_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use limsup::covering::BallSequence;
use limsup::dimension::{hausdorff_content_upper, natural_cover_critical_exponent, CoverItem, CoverShape, CriticalOptions};
use limsup::experiments::gen_farey;
use limsup::extraction::{extract_weakly_redundant, ExtractionResult};
use limsup::geometry::{Aabb, Ball, OpenSet};
use limsup::measure::SelfSimilarMeasure;
use limsup::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimsupStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Budget = 4,
    Refused = 5,
    Parse = 6,
    Io = 7,
    /// A string argument was not valid UTF-8.
    Utf8 = 8,
    /// The output buffer is too small; the required size was written.
    BufferTooSmall = 9,
    /// An internal panic was caught at the boundary.
    Panic = 10,
}

/// Opaque ball sequence.
pub struct LimsupSequence(BallSequence);

/// Opaque self-similar measure.
pub struct LimsupMeasure(SelfSimilarMeasure);

/// Opaque extraction result.
pub struct LimsupExtraction(ExtractionResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LimsupStatus {
    match e {
        Error::InvalidArgument(_) => LimsupStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => LimsupStatus::DimensionMismatch,
        Error::Budget(_) => LimsupStatus::Budget,
        Error::Refused(_) => LimsupStatus::Refused,
        Error::Parse { .. } => LimsupStatus::Parse,
        Error::Io(_) => LimsupStatus::Io,
    }
}

/// Runs `f` with panics and errors mapped to status codes.
fn guard(f: impl FnOnce() -> Result<(), LimsupStatus>) -> LimsupStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LimsupStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            LimsupStatus::Panic
        }
    }
}

fn lift<T>(r: limsup::Result<T>) -> Result<T, LimsupStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn null() -> LimsupStatus {
    set_error("null pointer argument".into());
    LimsupStatus::NullPointer
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, LimsupStatus> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p).to_str().map_err(|e| {
        set_error(format!("invalid UTF-8: {e}"));
        LimsupStatus::Utf8
    })
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize) -> Result<&'a [T], LimsupStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn put<T>(out: *mut *mut T, v: T) -> Result<(), LimsupStatus> {
    if out.is_null() {
        return Err(null());
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), LimsupStatus> {
    if out.is_null() {
        return Err(null());
    }
    *out = v;
    Ok(())
}

unsafe fn get<'a, T>(p: *const T) -> Result<&'a T, LimsupStatus> {
    p.as_ref().ok_or_else(null)
}

/// Copies the last error message of this thread into `buf` (nul-terminated)
/// and returns its length without the terminator, or -1 when none is set.
/// The message is truncated to `cap - 1` bytes when `buf` is too small.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn limsup_last_error(buf: *mut c_char, cap: usize) -> i64 {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => -1,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && cap > 0 {
                let n = bytes.len().min(cap - 1);
                std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
                *buf.add(n) = 0;
            }
            bytes.len() as i64
        }
    })
}

/// Creates an empty sequence of balls in `R^dim`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn limsup_sequence_new(dim: usize, out: *mut *mut LimsupSequence) -> LimsupStatus {
    guard(|| put(out, LimsupSequence(lift(BallSequence::new(dim, "ffi"))?)))
}

/// Parses the text format with one `d c_1 .. c_d r` line per ball.
///
/// # Safety
/// `text` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn limsup_sequence_parse(text: *const c_char, out: *mut *mut LimsupSequence) -> LimsupStatus {
    guard(|| {
        let t = str_arg(text)?;
        put(out, LimsupSequence(lift(BallSequence::parse(t, "ffi"))?))
    })
}

/// The Farey sequence of balls `B(p/q, 1/q^2)` for `q <= q_max`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn limsup_sequence_farey(q_max: u64, out: *mut *mut LimsupSequence) -> LimsupStatus {
    guard(|| put(out, LimsupSequence(lift(gen_farey(q_max))?)))
}

/// Appends a ball; `center` holds `dim` coordinates.
///
/// # Safety
/// `seq` must be a live handle and `center` must point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn limsup_sequence_push(
    seq: *mut LimsupSequence,
    center: *const f64,
    dim: usize,
    radius: f64,
) -> LimsupStatus {
    guard(|| {
        let s = seq.as_mut().ok_or_else(null)?;
        if dim != s.0.dim() {
            set_error(format!("dimension mismatch: expected {}, got {dim}", s.0.dim()));
            return Err(LimsupStatus::DimensionMismatch);
        }
        let c = slice_arg(center, dim)?;
        lift(s.0.push(c, radius))
    })
}

/// Number of balls, or 0 for a null handle.
///
/// # Safety
/// `seq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn limsup_sequence_len(seq: *const LimsupSequence) -> usize {
    seq.as_ref().map_or(0, |s| s.0.len())
}

/// Ambient dimension, or 0 for a null handle.
///
/// # Safety
/// `seq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn limsup_sequence_dim(seq: *const LimsupSequence) -> usize {
    seq.as_ref().map_or(0, |s| s.0.dim())
}

/// Radius of ball `i`.
///
/// # Safety
/// `seq` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn limsup_sequence_radius(seq: *const LimsupSequence, i: usize, out: *mut f64) -> LimsupStatus {
    guard(|| {
        let s = get(seq)?;
        if i >= s.0.len() {
            set_error(format!("index {i} out of range for {} balls", s.0.len()));
            return Err(LimsupStatus::InvalidArgument);
        }
        write(out, s.0.radius(i))
    })
}

/// Releases a sequence. Null is ignored.
///
/// # Safety
/// `seq` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn limsup_sequence_free(seq: *mut LimsupSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// Lebesgue measure on `[0,1]^dim`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn limsup_measure_lebesgue(dim: usize, out: *mut *mut LimsupMeasure) -> LimsupStatus {
    guard(|| put(out, LimsupMeasure(lift(SelfSimilarMeasure::lebesgue(dim))?)))
}

/// Middle-thirds Cantor measure with weight `p` on the left map.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn limsup_measure_cantor(p: f64, out: *mut *mut LimsupMeasure) -> LimsupStatus {
    guard(|| put(out, LimsupMeasure(lift(SelfSimilarMeasure::cantor(p))?)))
}

/// Parses the measure text format.
///
/// # Safety
/// `text` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn limsup_measure_parse(text: *const c_char, out: *mut *mut LimsupMeasure) -> LimsupStatus {
    guard(|| {
        let t = str_arg(text)?;
        put(out, LimsupMeasure(lift(SelfSimilarMeasure::parse(t))?))
    })
}

/// Certified enclosure `[lo, hi]` of the measure of the closed ball
/// `B(center, radius)` with width at most `tol`.
///
/// # Safety
/// `mu` must be a live handle, `center` must point to `dim` doubles and
/// `lo`, `hi` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn limsup_measure_eval(
    mu: *const LimsupMeasure,
    center: *const f64,
    dim: usize,
    radius: f64,
    tol: f64,
    lo: *mut f64,
    hi: *mut f64,
) -> LimsupStatus {
    guard(|| {
        let m = get(mu)?;
        let c = slice_arg(center, dim)?;
        let b = lift(Ball::new(c.to_vec(), radius))?;
        let v = lift(m.0.eval(&b, tol))?;
        write(lo, v.lo)?;
        write(hi, v.hi)
    })
}

/// Dimension of an exact-dimensional measure.
///
/// # Safety
/// `mu` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn limsup_measure_dimension(mu: *const LimsupMeasure, out: *mut f64) -> LimsupStatus {
    guard(|| write(out, lift(get(mu)?.0.dimension())?))
}

/// Releases a measure. Null is ignored.
///
/// # Safety
/// `mu` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn limsup_measure_free(mu: *mut LimsupMeasure) {
    if !mu.is_null() {
        drop(Box::from_raw(mu));
    }
}

/// Weakly redundant extraction over scale buckets `0..=k_max`, each bucket
/// covering at least `target` of the measure of its open set.
///
/// # Safety
/// `seq`, `mu` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn limsup_extract_weakly_redundant(
    seq: *const LimsupSequence,
    mu: *const LimsupMeasure,
    k_max: u32,
    target: f64,
    tol: f64,
    out: *mut *mut LimsupExtraction,
) -> LimsupStatus {
    guard(|| {
        let r = lift(extract_weakly_redundant(&get(seq)?.0, &get(mu)?.0, k_max, target, tol))?;
        put(out, LimsupExtraction(r))
    })
}

/// Number of kept balls.
///
/// # Safety
/// `ex` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn limsup_extraction_len(ex: *const LimsupExtraction) -> usize {
    ex.as_ref().map_or(0, |e| e.0.kept.len())
}

/// Number of flags attached to the result.
///
/// # Safety
/// `ex` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn limsup_extraction_flag_count(ex: *const LimsupExtraction) -> usize {
    ex.as_ref().map_or(0, |e| e.0.flags.len())
}

/// Copies the parent indices of the kept balls into `buf`. Writes the count
/// to `len` and returns `BufferTooSmall` when `cap` is insufficient.
///
/// # Safety
/// `ex` must be a live handle, `buf` must point to `cap` writable values and
/// `len` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn limsup_extraction_indices(
    ex: *const LimsupExtraction,
    buf: *mut usize,
    cap: usize,
    len: *mut usize,
) -> LimsupStatus {
    guard(|| {
        let idx = get(ex)?.0.indices();
        write(len, idx.len())?;
        if idx.len() > cap {
            set_error(format!("buffer holds {cap} indices, {} needed", idx.len()));
            return Err(LimsupStatus::BufferTooSmall);
        }
        if !idx.is_empty() {
            if buf.is_null() {
                return Err(null());
            }
            std::ptr::copy_nonoverlapping(idx.as_ptr(), buf, idx.len());
        }
        Ok(())
    })
}

/// Whether every family in the result carries a verified disjointness
/// certificate (1) or not (0).
///
/// # Safety
/// `ex` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn limsup_extraction_verified(ex: *const LimsupExtraction, out: *mut i32) -> LimsupStatus {
    guard(|| {
        let e = get(ex)?;
        write(out, e.0.certificate.iter().all(|c| c.verified) as i32)
    })
}

/// Releases an extraction. Null is ignored.
///
/// # Safety
/// `ex` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn limsup_extraction_free(ex: *mut LimsupExtraction) {
    if !ex.is_null() {
        drop(Box::from_raw(ex));
    }
}

/// Critical exponent of the natural cover by the shrunk balls
/// `B(c, r^delta)`. Writes NaN when too few scales are present.
///
/// # Safety
/// `seq` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn limsup_critical_exponent(seq: *const LimsupSequence, delta: f64, out: *mut f64) -> LimsupStatus {
    guard(|| {
        let s = &get(seq)?.0;
        if !(delta >= 1.0 && delta.is_finite()) {
            set_error(format!("delta must be at least 1, got {delta}"));
            return Err(LimsupStatus::InvalidArgument);
        }
        let items: Vec<CoverItem> =
            s.radii().iter().map(|&r| CoverItem { radius: r.powf(delta), mass: f64::NAN, weight: 1.0 }).collect();
        let rep = lift(natural_cover_critical_exponent(&items, &CoverShape::Ball, &CriticalOptions::new(s.dim() as f64)))?;
        write(out, rep.estimate.unwrap_or(f64::NAN))
    })
}

/// Upper estimate of the `s`-dimensional Hausdorff content of a union of
/// `n` boxes in `R^dim`. `lo` and `hi` hold `n * dim` corner coordinates,
/// box by box. A non-positive or infinite `t` means no scale bound.
///
/// # Safety
/// `lo`, `hi` must point to `n * dim` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn limsup_content_upper(
    lo: *const f64,
    hi: *const f64,
    n: usize,
    dim: usize,
    s: f64,
    t: f64,
    depth: u32,
    out: *mut f64,
) -> LimsupStatus {
    guard(|| {
        let total = n.checked_mul(dim).ok_or_else(|| {
            set_error("box array size overflows".into());
            LimsupStatus::InvalidArgument
        })?;
        let (lo, hi) = (slice_arg(lo, total)?, slice_arg(hi, total)?);
        let boxes = (0..n)
            .map(|i| lift(Aabb::new(lo[i * dim..(i + 1) * dim].to_vec(), hi[i * dim..(i + 1) * dim].to_vec())))
            .collect::<Result<Vec<_>, _>>()?;
        let set = lift(OpenSet::new(boxes))?;
        let t = (t > 0.0 && t.is_finite()).then_some(t);
        write(out, lift(hausdorff_content_upper(&set, s, t, depth))?.value_upper)
    })
}
