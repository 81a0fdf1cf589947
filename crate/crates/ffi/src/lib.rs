//! C interface to the simulator.
//!
//! Every function returns an [`HeStatus`]; results come back through out
//! pointers. On failure the message is available from [`he_last_error`] on
//! the same thread. Objects handed out as pointers are owned by the caller
//! and released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use hyperepp::epp::{run_epp, Mode, NoiseModel, PurificationReport};
use hyperepp::nbsa::{nbsa_classify, NbsaInput};
use hyperepp::state::polarization_fidelity;
use hyperepp::{BellLabel, Complex64, DensityMatrix, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeStatus {
    Ok = 0,
    InvalidState = 1,
    InvalidArgument = 2,
    ContractViolation = 3,
    ClassificationUndefined = 4,
    NonPurifiable = 5,
    Io = 6,
    NullPointer = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeBell {
    PhiPlus = 0,
    PhiMinus = 1,
    PsiPlus = 2,
    PsiMinus = 3,
}

impl From<BellLabel> for HeBell {
    fn from(l: BellLabel) -> Self {
        match l {
            BellLabel::PhiPlus => HeBell::PhiPlus,
            BellLabel::PhiMinus => HeBell::PhiMinus,
            BellLabel::PsiPlus => HeBell::PsiPlus,
            BellLabel::PsiMinus => HeBell::PsiMinus,
        }
    }
}

impl From<HeBell> for BellLabel {
    fn from(l: HeBell) -> Self {
        match l {
            HeBell::PhiPlus => BellLabel::PhiPlus,
            HeBell::PhiMinus => BellLabel::PhiMinus,
            HeBell::PsiPlus => BellLabel::PsiPlus,
            HeBell::PsiMinus => BellLabel::PsiMinus,
        }
    }
}

/// Result of a purification run.
pub struct HeReport(PurificationReport);

/// A 64×64 density matrix.
pub struct HeState(DensityMatrix);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(HeStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidState(_) => HeStatus::InvalidState,
            Error::InvalidArgument(_) | Error::Json(_) | Error::Csv(_) => HeStatus::InvalidArgument,
            Error::ContractViolation(_) => HeStatus::ContractViolation,
            Error::ClassificationUndefined(_) => HeStatus::ClassificationUndefined,
            Error::NonPurifiable(_) => HeStatus::NonPurifiable,
            Error::Io(_) => HeStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(HeStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            HeStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HeStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(HeStatus::InvalidState, "string contains a nul byte".into()))
}

/// Message for the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn he_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Runs the purification protocol. `trials == 0` enumerates every branch;
/// otherwise `trials` trajectories are sampled from `seed`.
///
/// # Safety
/// `out_report` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn he_run_epp(
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    dphi_s: f64,
    dphi_f: f64,
    seed: u64,
    trials: u64,
    out_report: *mut *mut HeReport,
) -> HeStatus {
    guard(|| {
        let slot = out(out_report, "out_report")?;
        let n = NoiseModel::new(a, b, c, d)?.with_dispersion(dphi_s, dphi_f);
        let mode = if trials == 0 {
            Mode::Exhaustive
        } else {
            Mode::Sampled { seed, trials }
        };
        *slot = Box::into_raw(Box::new(HeReport(run_epp(&n, mode)?)));
        Ok(())
    })
}

unsafe fn report<'a>(r: *const HeReport) -> Result<&'a PurificationReport, Failure> {
    r.as_ref().map(|r| &r.0).ok_or_else(|| null("report"))
}

/// # Safety
/// `r` must come from [`he_run_epp`]; `out_count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn he_report_branch_count(r: *const HeReport, out_count: *mut usize) -> HeStatus {
    guard(|| {
        *out(out_count, "out_count")? = report(r)?.branches.len();
        Ok(())
    })
}

/// # Safety
/// `r` must come from [`he_run_epp`]; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn he_report_total_probability(r: *const HeReport, out_value: *mut f64) -> HeStatus {
    guard(|| {
        *out(out_value, "out_value")? = report(r)?.total_probability;
        Ok(())
    })
}

/// Smallest and largest final fidelity over the branches.
///
/// # Safety
/// `r` must come from [`he_run_epp`]; both out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn he_report_fidelity_range(
    r: *const HeReport,
    out_min: *mut f64,
    out_max: *mut f64,
) -> HeStatus {
    guard(|| {
        let rep = report(r)?;
        *out(out_min, "out_min")? = rep.min_final_fidelity;
        *out(out_max, "out_max")? = rep.max_final_fidelity;
        Ok(())
    })
}

/// JSON rendering of the report. Free the string with [`he_string_free`].
///
/// # Safety
/// `r` must come from [`he_run_epp`]; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn he_report_to_json(r: *const HeReport, out_json: *mut *mut c_char) -> HeStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        *slot = into_c_string(report(r)?.to_json()?)?;
        Ok(())
    })
}

/// # Safety
/// `r` must come from [`he_run_epp`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn he_report_free(r: *mut HeReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// # Safety
/// `s` must be a string returned by this library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn he_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The ideal hyperentangled source state.
///
/// # Safety
/// `out_state` must be writable.
#[no_mangle]
pub unsafe extern "C" fn he_source_state(out_state: *mut *mut HeState) -> HeStatus {
    guard(|| {
        *out(out_state, "out_state")? = Box::into_raw(Box::new(HeState(hyperepp::epp::source_state())));
        Ok(())
    })
}

/// Parses a `{basis, re, im}` dump. Wrong sizes and invalid matrices fail.
///
/// # Safety
/// `json` must be a nul-terminated string; `out_state` must be writable.
#[no_mangle]
pub unsafe extern "C" fn he_state_from_json(json: *const c_char, out_state: *mut *mut HeState) -> HeStatus {
    guard(|| {
        let slot = out(out_state, "out_state")?;
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| Failure(HeStatus::InvalidArgument, "json is not utf-8".into()))?;
        *slot = Box::into_raw(Box::new(HeState(DensityMatrix::from_json(text)?)));
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn he_state_to_json(s: *const HeState, out_json: *mut *mut c_char) -> HeStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        let state = s.as_ref().ok_or_else(|| null("state"))?;
        *slot = into_c_string(state.0.to_json()?)?;
        Ok(())
    })
}

/// Fidelity of the polarization marginal to a Bell state.
///
/// # Safety
/// `s` must come from this library; `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn he_state_polarization_fidelity(
    s: *const HeState,
    target: HeBell,
    out_value: *mut f64,
) -> HeStatus {
    guard(|| {
        let state = s.as_ref().ok_or_else(|| null("state"))?;
        *out(out_value, "out_value")? = polarization_fidelity(&state.0, target.into());
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn he_state_free(s: *mut HeState) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// `[1 + (a+c−b−d)·cos Δφ_s]/2`.
///
/// # Safety
/// `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn he_bitflip_fidelity_formula(
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    dphi_s: f64,
    out_value: *mut f64,
) -> HeStatus {
    guard(|| {
        *out(out_value, "out_value")? = hyperepp::practical::bitflip_fidelity_formula(a, b, c, d, dphi_s)?;
        Ok(())
    })
}

/// One round of recursive purification: new fidelity and success probability.
///
/// # Safety
/// Both out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn he_pan_purify_round(f: f64, out_fidelity: *mut f64, out_probability: *mut f64) -> HeStatus {
    guard(|| {
        let (next, p) = hyperepp::baseline::pan_purify_round(f)?;
        *out(out_fidelity, "out_fidelity")? = next;
        *out(out_probability, "out_probability")? = p;
        Ok(())
    })
}

/// Classifies a polarization state given by four amplitudes over
/// HH, HV, VH, VV.
///
/// # Safety
/// `re` and `im` must each point to four doubles; `out_label` must be writable.
#[no_mangle]
pub unsafe extern "C" fn he_nbsa_classify(re: *const f64, im: *const f64, out_label: *mut HeBell) -> HeStatus {
    guard(|| {
        let slot = out(out_label, "out_label")?;
        if re.is_null() || im.is_null() {
            return Err(null("amplitudes"));
        }
        let (re, im) = (std::slice::from_raw_parts(re, 4), std::slice::from_raw_parts(im, 4));
        let amps: [Complex64; 4] = std::array::from_fn(|k| Complex64::new(re[k], im[k]));
        *slot = nbsa_classify(NbsaInput::State(amps))?.label.into();
        Ok(())
    })
}
