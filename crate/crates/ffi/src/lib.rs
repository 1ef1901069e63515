//! C interface to `prbp-core`.
//!
//! Codes are opaque `PrbpCode` handles. Every fallible call returns a
//! `PrbpStatus`; on failure `prbp_last_error` describes the problem. Panics
//! never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use prbp_core::baseline::{sum_product_decode, turbo_equalize, Trellis, TurboSchedule};
use prbp_core::channel::{compute_couplings, Convention, NoiseSpec, PrTarget};
use prbp_core::ldpc::{derive_generator, parse_alist, read_alist, GeneratorSpec, ParityCheckMatrix};
use prbp_core::prbp::{build_graph, PrbpDecoder, PrbpOptions};
use prbp_core::sim::{predicted_ops, resolve_fixture, DecoderChoice};
use prbp_core::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrbpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    LengthMismatch = 4,
    Io = 5,
    Numeric = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrbpDecoderKind {
    Prbp = 0,
    Turbo = 1,
    /// sum-product on the ISI-free channel; `target` is ignored
    SumProduct = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrbpConvention {
    Paper = 0,
    Exact = 1,
}

/// Decoder settings. `prbp_decode_options_default` fills in the defaults.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct PrbpDecodeOptions {
    pub decoder: PrbpDecoderKind,
    /// NUL-terminated polynomial such as "1-D"
    pub target: *const c_char,
    /// channel SNR in dB (no rate penalty applied)
    pub snr_db: f64,
    pub convention: PrbpConvention,
    /// iteration cap for PR-BP and sum-product
    pub max_iter: u32,
    pub turbo_outer: u32,
    pub turbo_inner: u32,
    /// padding symbol, +1 or -1
    pub pad: f64,
}

/// Summary of one decode.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct PrbpDecodeResult {
    pub iterations: u32,
    pub trellis_passes: u32,
    /// 1 if the hard decision satisfies every check
    pub converged: u8,
}

/// A parsed parity-check matrix and its encoder.
pub struct PrbpCode {
    h: ParityCheckMatrix,
    generator: GeneratorSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> PrbpStatus {
    match e {
        Error::Alist { .. } | Error::Json(_) => PrbpStatus::Parse,
        Error::LengthMismatch { .. } => PrbpStatus::LengthMismatch,
        Error::Target(_) | Error::InvalidArgument(_) | Error::TooLarge { .. } => PrbpStatus::InvalidArgument,
        Error::Io { .. } => PrbpStatus::Io,
        Error::NonFinite | Error::ZeroSupport => PrbpStatus::Numeric,
    }
}

struct Fail(PrbpStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PrbpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PrbpStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PrbpStatus::Internal
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(PrbpStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(PrbpStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn expect_len(got: usize, expected: usize) -> Result<(), Fail> {
    if got == expected {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got }.into())
    }
}

unsafe fn code_ref<'a>(code: *const PrbpCode) -> Result<&'a PrbpCode, Fail> {
    code.as_ref().ok_or_else(|| null("code"))
}

fn wrap(h: ParityCheckMatrix) -> Box<PrbpCode> {
    let generator = derive_generator(&h);
    Box::new(PrbpCode { h, generator })
}

unsafe fn store(out: *mut *mut PrbpCode, h: ParityCheckMatrix) {
    *out = Box::into_raw(wrap(h));
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn prbp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parse alist text.
///
/// # Safety
/// `alist` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn prbp_code_from_alist(alist: *const c_char, out: *mut *mut PrbpCode) -> PrbpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let h = parse_alist(text(alist, "alist")?)?;
        store(out, h);
        Ok(())
    })
}

/// Load an alist file, or a bundled fixture by name such as "code_2640_1320".
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn prbp_code_load(name: *const c_char, out: *mut *mut PrbpCode) -> PrbpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let h = read_alist(resolve_fixture(text(name, "name")?)?)?;
        store(out, h);
        Ok(())
    })
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `code` must come from `prbp_code_from_alist`/`prbp_code_load` and not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn prbp_code_free(code: *mut PrbpCode) {
    if !code.is_null() {
        drop(Box::from_raw(code));
    }
}

/// Block length N, or 0 for a null handle.
///
/// # Safety
/// `code` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn prbp_code_n(code: *const PrbpCode) -> usize {
    code.as_ref().map_or(0, |c| c.h.n_vars())
}

/// Number of parity checks M.
///
/// # Safety
/// `code` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn prbp_code_m(code: *const PrbpCode) -> usize {
    code.as_ref().map_or(0, |c| c.h.n_checks())
}

/// Message length K = N - rank(H).
///
/// # Safety
/// `code` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn prbp_code_k(code: *const PrbpCode) -> usize {
    code.as_ref().map_or(0, |c| c.generator.k())
}

/// Encode `k` message bits (0/1) into `n` codeword bits.
///
/// # Safety
/// `msg` must hold `k` bytes and `codeword` have room for `n` bytes.
#[no_mangle]
pub unsafe extern "C" fn prbp_code_encode(
    code: *const PrbpCode,
    msg: *const u8,
    k: usize,
    codeword: *mut u8,
    n: usize,
) -> PrbpStatus {
    guard(|| {
        let c = code_ref(code)?;
        expect_len(n, c.h.n_vars())?;
        let x = c.generator.encode(slice(msg, k, "msg")?)?;
        slice_mut(codeword, n, "codeword")?.copy_from_slice(&x);
        Ok(())
    })
}

/// Number of unsatisfied checks of `n` hard bits.
///
/// # Safety
/// `bits` must hold `n` bytes and `weight` be writable.
#[no_mangle]
pub unsafe extern "C" fn prbp_code_syndrome_weight(
    code: *const PrbpCode,
    bits: *const u8,
    n: usize,
    weight: *mut usize,
) -> PrbpStatus {
    guard(|| {
        let c = code_ref(code)?;
        if weight.is_null() {
            return Err(null("weight"));
        }
        expect_len(n, c.h.n_vars())?;
        *weight = c.h.syndrome_weight(slice(bits, n, "bits")?);
        Ok(())
    })
}

/// Default options: PR-BP on 1-D at 3 dB, paper convention, 20 iterations,
/// turbo 3x6, padding +1.
#[no_mangle]
pub extern "C" fn prbp_decode_options_default() -> PrbpDecodeOptions {
    static DICODE: &CStr = c"1-D";
    PrbpDecodeOptions {
        decoder: PrbpDecoderKind::Prbp,
        target: DICODE.as_ptr(),
        snr_db: 3.0,
        convention: PrbpConvention::Paper,
        max_iter: 20,
        turbo_outer: 3,
        turbo_inner: 6,
        pad: 1.0,
    }
}

unsafe fn target_of(opts: &PrbpDecodeOptions) -> Result<PrTarget, Fail> {
    if opts.decoder == PrbpDecoderKind::SumProduct {
        return Ok(PrTarget::memoryless());
    }
    Ok(text(opts.target, "target")?.parse()?)
}

/// Decode received samples `y` (N + L values for an ISI target with memory
/// L). Writes N hard bits to `bits` and, when `lambdas` is non-null, N
/// likelihood fields.
///
/// # Safety
/// `opts` must be readable, `y` hold `y_len` doubles, `bits` (and `lambdas`
/// when non-null) have room for N entries, and `result` be null or writable.
#[no_mangle]
pub unsafe extern "C" fn prbp_decode(
    code: *const PrbpCode,
    opts: *const PrbpDecodeOptions,
    y: *const f64,
    y_len: usize,
    bits: *mut u8,
    lambdas: *mut f64,
    result: *mut PrbpDecodeResult,
) -> PrbpStatus {
    guard(|| {
        let c = code_ref(code)?;
        let opts = opts.as_ref().ok_or_else(|| null("opts"))?;
        let target = target_of(opts)?;
        let n = c.h.n_vars();
        let y = slice(y, y_len, "y")?;
        expect_len(y_len, n + target.isi_len())?;
        if opts.pad != 1.0 && opts.pad != -1.0 {
            return Err(Fail(PrbpStatus::InvalidArgument, "pad must be +1 or -1".into()));
        }
        if !opts.snr_db.is_finite() {
            return Err(Fail(PrbpStatus::InvalidArgument, "snr_db is not finite".into()));
        }
        let conv = match opts.convention {
            PrbpConvention::Paper => Convention::Paper,
            PrbpConvention::Exact => Convention::Exact,
        };
        let noise = NoiseSpec::from_snr_db(&target, opts.snr_db);
        let res = match opts.decoder {
            PrbpDecoderKind::Prbp => {
                let cp = compute_couplings(y, &target, &noise, opts.pad, conv)?;
                let o = PrbpOptions::with_max_iter(opts.max_iter as usize);
                PrbpDecoder::new(build_graph(&c.h, &target), o).decode(&cp)
            }
            PrbpDecoderKind::Turbo => {
                let sched = TurboSchedule::new(opts.turbo_outer as usize, opts.turbo_inner as usize)?;
                let trellis = Trellis::new(&target, opts.pad)?;
                turbo_equalize(&c.h, &trellis, y, noise.precision(conv), sched)?
            }
            PrbpDecoderKind::SumProduct => {
                let cp = compute_couplings(y, &target, &noise, opts.pad, conv)?;
                sum_product_decode(&c.h, &cp.u, opts.max_iter as usize)?
            }
        };
        slice_mut(bits, n, "bits")?.copy_from_slice(&res.hard_bits);
        if !lambdas.is_null() {
            slice_mut(lambdas, n, "lambdas")?.copy_from_slice(&res.lambdas);
        }
        if let Some(r) = result.as_mut() {
            *r = PrbpDecodeResult {
                iterations: res.iterations_used as u32,
                trellis_passes: res.trellis_passes as u32,
                converged: u8::from(res.converged),
            };
        }
        Ok(())
    })
}

/// Closed-form per-symbol multiplications and additions of a full decode on
/// a (q, p)-regular code.
///
/// # Safety
/// `target` must be a NUL-terminated string; `multiplies` and `adds` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn prbp_predict_ops(
    q: u64,
    p: u64,
    target: *const c_char,
    decoder: PrbpDecoderKind,
    iterations: u32,
    turbo_outer: u32,
    turbo_inner: u32,
    multiplies: *mut u64,
    adds: *mut u64,
) -> PrbpStatus {
    guard(|| {
        if multiplies.is_null() || adds.is_null() {
            return Err(null("output"));
        }
        if p < 2 {
            return Err(Fail(PrbpStatus::InvalidArgument, "p must be at least 2".into()));
        }
        let target: PrTarget = text(target, "target")?.parse()?;
        let sched = TurboSchedule::new(turbo_outer as usize, turbo_inner as usize)?;
        let choice = match decoder {
            PrbpDecoderKind::Prbp => DecoderChoice::Prbp,
            PrbpDecoderKind::Turbo => DecoderChoice::Turbo,
            PrbpDecoderKind::SumProduct => DecoderChoice::SumproductMemoryless,
        };
        let ops = predicted_ops(q, p, &target, choice, iterations as usize, sched);
        *multiplies = ops.multiplies;
        *adds = ops.adds;
        Ok(())
    })
}
