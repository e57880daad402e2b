//! C ABI for the free-theory coefficient engine and the covariance.
//!
//! Every fallible function returns an [`OpeStatus`]; on failure the message is
//! available from [`ope_last_error_message`] until the next call on the same
//! thread. Handles are created by `*_new` functions and released by the
//! matching `*_free`; passing null to a `*_free` is a no-op.

use ope_engine::algebra::{parse_operator, MultiIndex, Theory};
use ope_engine::covariance::{eval_covariance, eval_covariance_deriv};
use ope_engine::wick::{free_ope_coefficient, CompiledCoefficient};
use ope_engine::OpeError;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    DomainViolation = 4,
    CoincidentPoints = 5,
    InvalidArgument = 6,
    LimitExceeded = 7,
    Internal = 8,
    Panic = 9,
    SingularInput = 10,
}

/// Theory handle.
pub struct OpeTheory(Theory);

/// Free OPE coefficient compiled for evaluation.
pub struct OpeCoefficient(CompiledCoefficient);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &OpeError) -> OpeStatus {
    match e {
        OpeError::Parse(_) | OpeError::UnknownField(_) => OpeStatus::ParseError,
        OpeError::Domain(_) => OpeStatus::DomainViolation,
        OpeError::CoincidentPoints(..) => OpeStatus::CoincidentPoints,
        OpeError::BasisTooLarge { .. } | OpeError::TooManyGraphs { .. } => OpeStatus::LimitExceeded,
        OpeError::Singular(_) => OpeStatus::SingularInput,
        OpeError::InvalidArgument(_) | OpeError::Missing(_) => OpeStatus::InvalidArgument,
        _ => OpeStatus::Internal,
    }
}

struct Failure(OpeStatus, String);

impl From<OpeError> for Failure {
    fn from(e: OpeError) -> Self {
        Failure(status_of(&e), format!("{}: {e}", e.code()))
    }
}

fn null(what: &str) -> Failure {
    Failure(OpeStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any error or panic, and converts it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OpeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            OpeStatus::Ok
        }
        Ok(Err(Failure(s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            OpeStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(OpeStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn read_point(p: *const f64, what: &str) -> Result<[f64; 4], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::array::from_fn(|i| *p.add(i)))
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(v);
    Ok(())
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn ope_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ope_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Massive covariance `C(x)` with mass scale `mu`.
///
/// # Safety
/// `x` points to 4 doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ope_covariance(x: *const f64, mu: f64, out: *mut f64) -> OpeStatus {
    guard(|| {
        let x = read_point(x, "x")?;
        write(out, eval_covariance(&x, mu)?)
    })
}

/// Derivative `∂^u C(x)` for the multi-index `u` (4 entries).
///
/// # Safety
/// `u` points to 4 unsigned ints, `x` to 4 doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ope_covariance_deriv(u: *const u32, x: *const f64, mu: f64, out: *mut f64) -> OpeStatus {
    guard(|| {
        if u.is_null() {
            return Err(null("u"));
        }
        let mut idx = [0u8; 4];
        for (i, slot) in idx.iter_mut().enumerate() {
            *slot = u8::try_from(*u.add(i)).map_err(|_| Failure(OpeStatus::InvalidArgument, "derivative order too large".into()))?;
        }
        let x = read_point(x, "x")?;
        write(out, eval_covariance_deriv(&MultiIndex(idx), &x, mu)?)
    })
}

/// Large-momentum exponent `g^(s)(dim, r, w)`.
#[no_mangle]
pub extern "C" fn ope_gs(s: u32, dim: f64, r: u32, w: u32) -> f64 {
    ope_engine::trees::gs(s, dim, r, w)
}

/// Creates a theory from a preset name (`scalar`, `qed_free`, `dirac`).
///
/// # Safety
/// `name` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ope_theory_new(name: *const c_char, out: *mut *mut OpeTheory) -> OpeStatus {
    guard(|| {
        let name = read_str(name, "name")?;
        let t = Theory::preset(name)?;
        write(out, Box::into_raw(Box::new(OpeTheory(t))))
    })
}

/// # Safety
/// `t` is null or a handle from [`ope_theory_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ope_theory_free(t: *mut OpeTheory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Free-theory coefficient of `B` in the product of `n` operators.
///
/// # Safety
/// `theory` is a live handle; `ops` points to `n` NUL-terminated strings;
/// `b` is NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ope_coefficient_new(
    theory: *const OpeTheory,
    ops: *const *const c_char,
    n: usize,
    b: *const c_char,
    mu: f64,
    out: *mut *mut OpeCoefficient,
) -> OpeStatus {
    guard(|| {
        let t = &theory.as_ref().ok_or_else(|| null("theory"))?.0;
        if ops.is_null() {
            return Err(null("ops"));
        }
        let a = (0..n)
            .map(|i| Ok(parse_operator(t, read_str(*ops.add(i), "operator")?)?))
            .collect::<Result<Vec<_>, Failure>>()?;
        let b = parse_operator(t, read_str(b, "b")?)?;
        let c = free_ope_coefficient(t, &a, &b, mu)?;
        let h = OpeCoefficient(c.compile());
        write(out, Box::into_raw(Box::new(h)))
    })
}

/// Number of monomials in the coefficient.
///
/// # Safety
/// `c` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn ope_coefficient_term_count(c: *const OpeCoefficient) -> usize {
    c.as_ref().map_or(0, |c| c.0.term_count())
}

/// Evaluates at one point per operator, stored as `4·npoints` doubles; the
/// last operator sits at the expansion point.
///
/// # Safety
/// `c` is a live handle; `points` holds `4·npoints` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ope_coefficient_evaluate(c: *const OpeCoefficient, points: *const f64, npoints: usize, out: *mut f64) -> OpeStatus {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("coefficient"))?;
        if points.is_null() {
            return Err(null("points"));
        }
        if npoints != c.0.npoints {
            return Err(Failure(OpeStatus::InvalidArgument, format!("expected {} points, got {npoints}", c.0.npoints)));
        }
        let pts: Vec<[f64; 4]> = (0..npoints).map(|i| std::array::from_fn(|k| *points.add(4 * i + k))).collect();
        write(out, c.0.evaluate(&pts)?)
    })
}

/// # Safety
/// `c` is null or a handle from [`ope_coefficient_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ope_coefficient_free(c: *mut OpeCoefficient) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}
