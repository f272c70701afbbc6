//! C ABI over the chargekit core.
//!
//! Configurations live behind an opaque `CkConfig` handle created by
//! [`ck_config_new`] or [`ck_construct_gon`] and released with
//! [`ck_config_free`]. Every fallible function returns a [`CkStatus`];
//! on failure the message is available from [`ck_last_error_message`]
//! on the same thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use chargekit::{equilibrium, fields, moments, onsager};
use chargekit::{ChargeConfiguration, Error, InteractionLaw, KernelSpec};

/// Result code of every fallible call. `CK_STATUS_OK` is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CkStatus {
    Ok = 0,
    NullPointer = 1,
    Panic = 2,
    DuplicatePosition = 10,
    ZeroCharge = 11,
    DimensionMismatch = 12,
    InvalidInput = 13,
    EvaluationOnCharge = 14,
    OverlappingSpheres = 15,
    UnsupportedDimension = 16,
    SingleCharge = 17,
    NonUnitCharge = 18,
    SingularJacobian = 20,
    NoConvergence = 21,
    DegenerateSystem = 22,
    PointTooClose = 23,
    NotCritical = 24,
    SeedNotDegenerate = 25,
    CorrectorDiverged = 26,
    NoCrossing = 27,
    NoPositiveSupport = 28,
    Precondition = 29,
}

impl From<&Error> for CkStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DuplicatePosition { .. } => Self::DuplicatePosition,
            Error::ZeroCharge { .. } => Self::ZeroCharge,
            Error::DimensionMismatch { .. } => Self::DimensionMismatch,
            Error::InvalidInput(_) => Self::InvalidInput,
            Error::EvaluationOnCharge { .. } => Self::EvaluationOnCharge,
            Error::OverlappingSpheres { .. } => Self::OverlappingSpheres,
            Error::UnsupportedDimension(_) => Self::UnsupportedDimension,
            Error::SingleCharge => Self::SingleCharge,
            Error::NonUnitCharge { .. } => Self::NonUnitCharge,
            Error::SingularJacobian => Self::SingularJacobian,
            Error::NoConvergence { .. } => Self::NoConvergence,
            Error::DegenerateSystem { .. } => Self::DegenerateSystem,
            Error::PointTooClose { .. } => Self::PointTooClose,
            Error::NotCritical { .. } => Self::NotCritical,
            Error::SeedNotDegenerate { .. } => Self::SeedNotDegenerate,
            Error::CorrectorDiverged { .. } => Self::CorrectorDiverged,
            Error::NoCrossing => Self::NoCrossing,
            Error::NoPositiveSupport => Self::NoPositiveSupport,
            Error::Precondition(_) => Self::Precondition,
        }
    }
}

/// Pairwise interaction law selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CkLaw {
    /// `-ln r`.
    Log = 0,
    /// The Newtonian kernel of the configuration's dimension.
    Newtonian = 1,
    /// `r^-k` with the exponent passed alongside.
    Riesz = 2,
}

/// Opaque charge configuration.
pub struct CkConfig(ChargeConfiguration);

/// Both sides of the Onsager inequality.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CkOnsager {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, recording errors and converting panics.
fn guard<F>(f: F) -> CkStatus
where
    F: FnOnce() -> Result<(), CkError>,
{
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CkStatus::Ok,
        Ok(Err(CkError::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            CkStatus::NullPointer
        }
        Ok(Err(CkError::Core(e))) => {
            set_error(e.to_string());
            CkStatus::from(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            CkStatus::Panic
        }
    }
}

enum CkError {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for CkError {
    fn from(e: Error) -> Self {
        Self::Core(e)
    }
}

unsafe fn config<'a>(p: *const CkConfig) -> Result<&'a ChargeConfiguration, CkError> {
    p.as_ref().map(|c| &c.0).ok_or(CkError::Null("config"))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], CkError> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(CkError::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, CkError> {
    p.as_mut().ok_or(CkError::Null(what))
}

unsafe fn output_slice<'a>(p: *mut f64, len: usize, what: &'static str) -> Result<&'a mut [f64], CkError> {
    if p.is_null() {
        return Err(CkError::Null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn law(kind: CkLaw, riesz_k: f64, dimension: usize) -> Result<InteractionLaw, CkError> {
    Ok(match kind {
        CkLaw::Log => InteractionLaw::log(),
        CkLaw::Newtonian => InteractionLaw::newtonian(dimension),
        CkLaw::Riesz => InteractionLaw::riesz(riesz_k)?,
    })
}

fn box_config(cfg: ChargeConfiguration, out: &mut *mut CkConfig) {
    *out = Box::into_raw(Box::new(CkConfig(cfg)));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ck_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated,
/// always NUL-terminated when `len > 0`). Returns the full message length
/// excluding the terminator, or 0 when there is no error.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null.
#[no_mangle]
pub unsafe extern "C" fn ck_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            0
        }
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Builds a configuration from `n` charges; `positions` holds `n * dimension`
/// coordinates, charge-major.
///
/// # Safety
/// `positions` and `charges` must be valid for the stated lengths; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_config_new(
    dimension: usize,
    n: usize,
    positions: *const f64,
    charges: *const f64,
    out: *mut *mut CkConfig,
) -> CkStatus {
    guard(|| {
        let out = output(out, "out")?;
        *out = ptr::null_mut();
        let pos = input(positions, n * dimension, "positions")?;
        let q = input(charges, n, "charges")?;
        let entries = (0..n)
            .map(|i| (pos[i * dimension..(i + 1) * dimension].to_vec(), q[i]))
            .collect();
        box_config(ChargeConfiguration::new(dimension, entries)?, out);
        Ok(())
    })
}

/// Releases a handle; null is a no-op.
///
/// # Safety
/// `cfg` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ck_config_free(cfg: *mut CkConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Number of charges, 0 for null.
///
/// # Safety
/// `cfg` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ck_config_len(cfg: *const CkConfig) -> usize {
    cfg.as_ref().map_or(0, |c| c.0.len())
}

/// Ambient dimension, 0 for null.
///
/// # Safety
/// `cfg` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ck_config_dimension(cfg: *const CkConfig) -> usize {
    cfg.as_ref().map_or(0, |c| c.0.dimension())
}

/// Copies positions (`len * dimension` values) and charges (`len` values)
/// out of a handle. Either output may be null to skip it.
///
/// # Safety
/// Non-null outputs must be valid for the sizes above.
#[no_mangle]
pub unsafe extern "C" fn ck_config_get(cfg: *const CkConfig, positions: *mut f64, charges: *mut f64) -> CkStatus {
    guard(|| {
        let c = config(cfg)?;
        let d = c.dimension();
        if !positions.is_null() {
            let out = output_slice(positions, c.len() * d, "positions")?;
            for i in 0..c.len() {
                out[i * d..(i + 1) * d].copy_from_slice(c.position(i));
            }
        }
        if !charges.is_null() {
            output_slice(charges, c.len(), "charges")?.copy_from_slice(&c.charge_values());
        }
        Ok(())
    })
}

/// Potential `sum q_i K(|x - x_i|)` at `x` (`dimension` values).
///
/// # Safety
/// `x` must hold `dimension` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_potential(cfg: *const CkConfig, normalized: bool, x: *const f64, out: *mut f64) -> CkStatus {
    guard(|| {
        let c = config(cfg)?;
        let k = KernelSpec::new(c.dimension(), normalized)?;
        *output(out, "out")? = fields::potential_at(c, &k, input(x, c.dimension(), "x")?)?;
        Ok(())
    })
}

/// Gradient of the potential at `x`, written to `out` (`dimension` values).
///
/// # Safety
/// `x` and `out` must hold `dimension` values.
#[no_mangle]
pub unsafe extern "C" fn ck_gradient(cfg: *const CkConfig, normalized: bool, x: *const f64, out: *mut f64) -> CkStatus {
    guard(|| {
        let c = config(cfg)?;
        let k = KernelSpec::new(c.dimension(), normalized)?;
        let g = fields::field_at(c, &k, input(x, c.dimension(), "x")?)?;
        output_slice(out, g.len(), "out")?.copy_from_slice(&g);
        Ok(())
    })
}

/// Hessian of the potential at `x`, row-major into `out`
/// (`dimension * dimension` values).
///
/// # Safety
/// `x` must hold `dimension` values and `out` `dimension^2`.
#[no_mangle]
pub unsafe extern "C" fn ck_hessian(cfg: *const CkConfig, normalized: bool, x: *const f64, out: *mut f64) -> CkStatus {
    guard(|| {
        let c = config(cfg)?;
        let d = c.dimension();
        let k = KernelSpec::new(d, normalized)?;
        let h = fields::hessian_at(c, &k, input(x, d, "x")?)?;
        let out = output_slice(out, d * d, "out")?;
        for r in 0..d {
            for s in 0..d {
                out[r * d + s] = h[(r, s)];
            }
        }
        Ok(())
    })
}

/// Pairwise energy over ordered pairs, `sum_{i != j} q_i q_j Phi(r_ij)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_energy(cfg: *const CkConfig, kind: CkLaw, riesz_k: f64, out: *mut f64) -> CkStatus {
    guard(|| {
        let c = config(cfg)?;
        let l = law(kind, riesz_k, c.dimension())?;
        *output(out, "out")? = fields::pairwise_energy(c, &l);
        Ok(())
    })
}

/// Both sides of the Onsager inequality (dimension >= 3).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_onsager(cfg: *const CkConfig, out: *mut CkOnsager) -> CkStatus {
    guard(|| {
        let r = onsager::onsager_check(config(cfg)?)?;
        *output(out, "out")? = CkOnsager {
            lhs: r.lhs,
            rhs: r.rhs,
            margin: r.margin,
        };
        Ok(())
    })
}

/// Largest net-force norm over all charges under the given law.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_equilibrium_residual(
    cfg: *const CkConfig,
    kind: CkLaw,
    riesz_k: f64,
    out: *mut f64,
) -> CkStatus {
    guard(|| {
        let c = config(cfg)?;
        let l = law(kind, riesz_k, c.dimension())?;
        *output(out, "out")? = equilibrium::residual(c, &l).max_norm;
        Ok(())
    })
}

/// Damped Newton towards an equilibrium; the converged configuration is
/// returned as a new handle. Non-convergence yields `CK_STATUS_NO_CONVERGENCE`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_equilibrium_solve(
    cfg: *const CkConfig,
    kind: CkLaw,
    riesz_k: f64,
    out: *mut *mut CkConfig,
) -> CkStatus {
    guard(|| {
        let out = output(out, "out")?;
        *out = ptr::null_mut();
        let c = config(cfg)?;
        let l = law(kind, riesz_k, c.dimension())?;
        let report = equilibrium::newton_solve(c, &l, &[], &Default::default())?;
        box_config(report.positions, out);
        Ok(())
    })
}

/// Planar log-law equilibrium: `n - 1` charges `q` on the unit circle
/// and a balancing charge at the origin.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_construct_gon(n: usize, q: f64, out: *mut *mut CkConfig) -> CkStatus {
    guard(|| {
        let out = output(out, "out")?;
        *out = ptr::null_mut();
        box_config(equilibrium::construct_gon(n, q)?, out);
        Ok(())
    })
}

/// `|sum q_i^2 - (sum q_i)^2|` for
/// `n` charges; NaN when `charges` is null and `n > 0`.
///
/// # Safety
/// `charges` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn ck_abanov_residual(charges: *const f64, n: usize) -> f64 {
    match input(charges, n, "charges") {
        Ok(q) => moments::abanov_residual(q),
        Err(_) => f64::NAN,
    }
}
