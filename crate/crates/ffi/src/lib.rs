//! C interface to `parimplode`.
//!
//! Every function returns a [`PiStatus`]; outputs go through pointer
//! arguments. Handles are opaque and must be released with their `*_free`
//! function. On failure, [`pi_last_error_message`] describes the error for the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use parimplode::lab::{self, LabConfig, RatePoint};
use parimplode::mobius::{self, Complex, EvalRegion, MoebiusCoeffs};
use parimplode::recurrences::{self, PerturbationSequences, QrsTriple, RecurrenceOptions};
use parimplode::schedules::{self, ScheduleSpec};
use parimplode::{random_lab, Error};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidSpec = 2,
    InvalidUtf8 = 3,
    OutOfRange = 4,
    PoleProximity = 5,
    DegenerateMap = 6,
    DegenerateNormalization = 7,
    AllPointsSkipped = 8,
    Overflow = 9,
    ScheduleMismatch = 10,
    IdentityViolation = 11,
    OracleMismatch = 12,
    NonPositiveValue = 13,
    Panic = 99,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PiComplex {
    pub re: f64,
    pub im: f64,
}

/// `z -> (a z + b) / (c z + d)`
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PiMoebius {
    pub a: PiComplex,
    pub b: PiComplex,
    pub c: PiComplex,
    pub d: PiComplex,
}

/// Square grid on a disk; points within `pole_guard` of a pole are skipped.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PiRegion {
    pub center: PiComplex,
    pub radius: f64,
    pub grid_points: usize,
    pub pole_guard: f64,
    /// Chain cross-check runs for `N <= oracle_limit`; 0 disables it.
    pub oracle_limit: usize,
    pub compensated: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PiRatePoint {
    pub n: u64,
    pub coeff_err: f64,
    pub sup_err: f64,
    pub q_n_abs: f64,
    pub q_n1_err: f64,
    pub r_n_err: f64,
    pub r_n1_err: f64,
    pub wronskian_resid: f64,
    pub skipped_points: u64,
}

pub struct PiSchedule(ScheduleSpec);
pub struct PiSequences(PerturbationSequences);
pub struct PiTriple(QrsTriple);

impl From<PiComplex> for Complex {
    fn from(z: PiComplex) -> Self {
        Complex::new(z.re, z.im)
    }
}

impl From<Complex> for PiComplex {
    fn from(z: Complex) -> Self {
        PiComplex { re: z.re, im: z.im }
    }
}

impl From<MoebiusCoeffs> for PiMoebius {
    fn from(m: MoebiusCoeffs) -> Self {
        PiMoebius {
            a: m.a.into(),
            b: m.b.into(),
            c: m.c.into(),
            d: m.d.into(),
        }
    }
}

impl PiMoebius {
    fn checked(&self) -> Result<MoebiusCoeffs, Error> {
        MoebiusCoeffs::new(self.a.into(), self.b.into(), self.c.into(), self.d.into())
    }
}

impl From<RatePoint> for PiRatePoint {
    fn from(p: RatePoint) -> Self {
        PiRatePoint {
            n: p.n as u64,
            coeff_err: p.coeff_err,
            sup_err: p.sup_err,
            q_n_abs: p.q_n_abs,
            q_n1_err: p.q_n1_err,
            r_n_err: p.r_n_err,
            r_n1_err: p.r_n1_err,
            wronskian_resid: p.wronskian_resid,
            skipped_points: p.skipped_points as u64,
        }
    }
}

fn status_of(e: &Error) -> PiStatus {
    match e.root() {
        Error::InvalidSpec { .. } => PiStatus::InvalidSpec,
        Error::PoleProximity { .. } => PiStatus::PoleProximity,
        Error::DegenerateMap { .. } => PiStatus::DegenerateMap,
        Error::DegenerateNormalization(_) => PiStatus::DegenerateNormalization,
        Error::AllPointsSkipped(_) => PiStatus::AllPointsSkipped,
        Error::Overflow { .. } => PiStatus::Overflow,
        Error::ScheduleMismatch(_) => PiStatus::ScheduleMismatch,
        Error::IdentityViolation { .. } => PiStatus::IdentityViolation,
        Error::OracleMismatch { .. } => PiStatus::OracleMismatch,
        Error::NonPositiveValue { .. } => PiStatus::NonPositiveValue,
        Error::AtPoint { .. } | Error::Sweep(_) => PiStatus::InvalidSpec,
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
}

enum Fail {
    Status(PiStatus, String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn null(what: &str) -> Fail {
    Fail::Status(PiStatus::NullPointer, format!("{what} is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> PiStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => PiStatus::Ok,
        Ok(Err(Fail::Status(status, msg))) => {
            set_error(msg);
            status
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            PiStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn give<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(Box::into_raw(Box::new(value)));
    Ok(())
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pi_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pi_schedule_from_json(json: *const c_char, out: *mut *mut PiSchedule) -> PiStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Fail::Status(PiStatus::InvalidUtf8, e.to_string()))?;
        let spec = ScheduleSpec::from_json(text)?;
        give(out, PiSchedule(spec))
    })
}

fn new_schedule(spec: ScheduleSpec, out: *mut *mut PiSchedule) -> PiStatus {
    guard(|| {
        spec.validate()?;
        unsafe { give(out, PiSchedule(spec)) }
    })
}

/// Rotation-regime schedule, `case` in 1..=3.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pi_schedule_theorem_a(case: u8, out: *mut *mut PiSchedule) -> PiStatus {
    new_schedule(ScheduleSpec::theorem_a(case), out)
}

/// Combined multiplier/additive schedule, `case` in 1..=5.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pi_schedule_theorem_b(case: u8, out: *mut *mut PiSchedule) -> PiStatus {
    new_schedule(ScheduleSpec::theorem_b(case), out)
}

/// # Safety
/// `schedule` must come from a `pi_schedule_*` constructor, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn pi_schedule_free(schedule: *mut PiSchedule) {
    if !schedule.is_null() {
        drop(Box::from_raw(schedule));
    }
}

/// Sequences `rho_0..=rho_N`, `eps_0^2..=eps_N^2` for the given N.
///
/// # Safety
/// `schedule` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pi_materialize(schedule: *const PiSchedule, n: usize, out: *mut *mut PiSequences) -> PiStatus {
    guard(|| {
        let spec = &deref(schedule, "schedule")?.0;
        let seqs = schedules::materialize(spec, n)?;
        give(out, PiSequences(seqs))
    })
}

/// Sequences from caller arrays, each of length `n + 1`.
///
/// # Safety
/// `rho` and `eps_sq` must point to `n + 1` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pi_sequences_from_arrays(
    n: usize,
    rho: *const PiComplex,
    eps_sq: *const PiComplex,
    out: *mut *mut PiSequences,
) -> PiStatus {
    guard(|| {
        if rho.is_null() {
            return Err(null("rho"));
        }
        if eps_sq.is_null() {
            return Err(null("eps_sq"));
        }
        let len = n.checked_add(1).ok_or_else(|| Fail::Status(PiStatus::OutOfRange, "n too large".into()))?;
        let rho = std::slice::from_raw_parts(rho, len).iter().map(|&z| z.into()).collect();
        let eps_sq = std::slice::from_raw_parts(eps_sq, len).iter().map(|&z| z.into()).collect();
        let seqs = PerturbationSequences::new(n, rho, eps_sq)?;
        give(out, PiSequences(seqs))
    })
}

/// # Safety
/// `seqs` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn pi_sequences_free(seqs: *mut PiSequences) {
    if !seqs.is_null() {
        drop(Box::from_raw(seqs));
    }
}

/// Step map `f_k`, `k` in 1..=N.
///
/// # Safety
/// `seqs` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pi_sequences_step_map(seqs: *const PiSequences, k: usize, out: *mut PiMoebius) -> PiStatus {
    guard(|| {
        let seqs = &deref(seqs, "seqs")?.0;
        if k == 0 || k > seqs.n() {
            return Err(Fail::Status(PiStatus::OutOfRange, format!("step {k} outside 1..={}", seqs.n())));
        }
        write(out, seqs.step_map(k).into(), "out")
    })
}

/// # Safety
/// `seqs` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pi_run_recurrences(
    seqs: *const PiSequences,
    compensated: bool,
    out: *mut *mut PiTriple,
) -> PiStatus {
    guard(|| {
        let seqs = &deref(seqs, "seqs")?.0;
        let triple = recurrences::run_recurrences_with(seqs, RecurrenceOptions { compensated })?;
        give(out, PiTriple(triple))
    })
}

/// # Safety
/// `triple` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn pi_triple_free(triple: *mut PiTriple) {
    if !triple.is_null() {
        drop(Box::from_raw(triple));
    }
}

/// N of the sequences the triple was computed from; 0 for NULL.
///
/// # Safety
/// `triple` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn pi_triple_n(triple: *const PiTriple) -> usize {
    triple.as_ref().map_or(0, |t| t.0.n())
}

unsafe fn triple_entry(triple: *const PiTriple, k: usize, out: *mut PiComplex, pick: fn(&QrsTriple) -> &[Complex]) -> PiStatus {
    guard(|| {
        let values = pick(&deref(triple, "triple")?.0);
        let z = values
            .get(k)
            .ok_or_else(|| Fail::Status(PiStatus::OutOfRange, format!("index {k} outside 0..{}", values.len())))?;
        write(out, (*z).into(), "out")
    })
}

/// `q_k`, `k` in 0..=N+1.
///
/// # Safety
/// `triple` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pi_triple_q(triple: *const PiTriple, k: usize, out: *mut PiComplex) -> PiStatus {
    triple_entry(triple, k, out, |t| &t.q)
}

/// `r_k`, `k` in 0..=N+1.
///
/// # Safety
/// `triple` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pi_triple_r(triple: *const PiTriple, k: usize, out: *mut PiComplex) -> PiStatus {
    triple_entry(triple, k, out, |t| &t.r)
}

/// `s_k`, `k` in 0..=N.
///
/// # Safety
/// `triple` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pi_triple_s(triple: *const PiTriple, k: usize, out: *mut PiComplex) -> PiStatus {
    triple_entry(triple, k, out, |t| &t.s)
}

/// Coefficients of `f_k o ... o f_1` from the recurrences, `k` in 1..=N.
///
/// # Safety
/// `triple` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pi_triple_coefficients(triple: *const PiTriple, k: usize, out: *mut PiMoebius) -> PiStatus {
    guard(|| {
        let t = &deref(triple, "triple")?.0;
        if k == 0 || k > t.n() {
            return Err(Fail::Status(PiStatus::OutOfRange, format!("step {k} outside 1..={}", t.n())));
        }
        write(out, recurrences::coefficients_from_qr(t, k)?.into(), "out")
    })
}

/// # Safety
/// `triple` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pi_triple_wronskian_residual(triple: *const PiTriple, out: *mut f64) -> PiStatus {
    guard(|| {
        let t = &deref(triple, "triple")?.0;
        write(out, t.wronskian_residual(), "out")
    })
}

/// `outer o inner`
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pi_moebius_compose(
    outer: *const PiMoebius,
    inner: *const PiMoebius,
    out: *mut PiMoebius,
) -> PiStatus {
    guard(|| {
        let outer = deref(outer, "outer")?.checked()?;
        let inner = deref(inner, "inner")?.checked()?;
        write(out, mobius::compose(&outer, &inner)?.into(), "out")
    })
}

/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pi_moebius_evaluate(map: *const PiMoebius, z: PiComplex, out: *mut PiComplex) -> PiStatus {
    guard(|| {
        let map = deref(map, "map")?.checked()?;
        write(out, mobius::evaluate(&map, z.into())?.into(), "out")
    })
}

/// Distance of `map` from the identity after normalizing `d = 1`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pi_projective_coeff_error(map: *const PiMoebius, out: *mut f64) -> PiStatus {
    guard(|| {
        let map = deref(map, "map")?.checked()?;
        write(out, mobius::projective_coeff_error(&map)?, "out")
    })
}

/// Library defaults for [`pi_run_point`].
#[no_mangle]
pub extern "C" fn pi_region_default() -> PiRegion {
    let c = LabConfig::default();
    PiRegion {
        center: c.region.center.into(),
        radius: c.region.radius,
        grid_points: c.region.grid_points,
        pole_guard: c.region.pole_guard,
        oracle_limit: c.oracle_limit,
        compensated: c.compensated,
    }
}

/// Errors of one schedule at one N. `region` may be NULL for the defaults.
///
/// # Safety
/// `schedule` must be a live handle, `region` valid or NULL, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pi_run_point(
    schedule: *const PiSchedule,
    n: usize,
    region: *const PiRegion,
    out: *mut PiRatePoint,
) -> PiStatus {
    guard(|| {
        let spec = &deref(schedule, "schedule")?.0;
        let r = region.as_ref().copied().unwrap_or_else(|| pi_region_default());
        let config = LabConfig {
            region: EvalRegion::new(r.center.into(), r.radius, r.grid_points, r.pole_guard)?,
            oracle_limit: r.oracle_limit,
            compensated: r.compensated,
        };
        write(out, lab::run_point_with(spec, n, &config)?.into(), "out")
    })
}

/// `exp(-lambda^2 N^(2+2 delta) / (2 M^2 n))`
#[no_mangle]
pub extern "C" fn pi_azuma_tail_bound(lambda: f64, n: usize, big_n: usize, delta: f64, m: f64) -> f64 {
    random_lab::azuma_tail_bound(lambda, n, big_n, delta, m)
}
