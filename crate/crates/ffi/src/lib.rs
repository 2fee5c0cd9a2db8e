//! C ABI over the `fracreg` library.
//!
//! Every fallible function returns a [`FracregStatus`] and writes its result
//! through an out pointer. On failure the message is kept per thread and read
//! back with [`fracreg_last_error_message`]. Objects are opaque handles that
//! the caller releases with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fracreg::fbm::{build_generator, fbm_covariance, fgn_autocovariance, PathGenerator};
use fracreg::kernels::{chaos_eval, heat_kernel, kernel_l2_norm, ChaosSeries};
use fracreg::localtime::expected_local_time;
use fracreg::montecarlo::{
    run_bracket_experiment, run_conditional_experiment, run_limit_experiment,
    run_riemann_experiment, run_variance_experiment, seeded_substream, ExperimentPlan, StreamRole,
};
use fracreg::statistics::{
    admissible_region, c1_constant, compute_statistic, exact_diagonal, exact_offdiagonal,
};
use fracreg::{FbmPath, FracregError, GeneratorKind, HurstParam, ModelConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FracregStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Dimension = 4,
    Config = 5,
    Region = 6,
    Factorization = 7,
    Embedding = 8,
    Resource = 9,
    Io = 10,
    Json = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FracregGeneratorKind {
    Circulant = 0,
    Cholesky = 1,
}

/// Path sampler bound to one step count and Hurst index.
pub struct FracregGenerator {
    inner: Box<dyn PathGenerator>,
}

/// Statistic, bracket and conditional variance of one path pair, raw and normalized.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FracregStatistic {
    pub s_n: f64,
    pub bracket: f64,
    pub a_n: f64,
    pub s_n_normalized: f64,
    pub bracket_normalized: f64,
}

/// Open interval `(lower, upper)` of admissible bandwidth exponents.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FracregRegion {
    pub lower: f64,
    pub upper: f64,
    pub nonempty: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn status_of(err: &FracregError) -> FracregStatus {
    match err {
        FracregError::Domain(_) => FracregStatus::Domain,
        FracregError::Dimension { .. } => FracregStatus::Dimension,
        FracregError::Config(_) => FracregStatus::Config,
        FracregError::Region(_) => FracregStatus::Region,
        FracregError::Factorization { .. } => FracregStatus::Factorization,
        FracregError::Embedding { .. } => FracregStatus::Embedding,
        FracregError::Resource(_) => FracregStatus::Resource,
        FracregError::Io(_) => FracregStatus::Io,
        FracregError::Json(_) => FracregStatus::Json,
    }
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Library(FracregError),
}

impl From<FracregError> for Failure {
    fn from(err: FracregError) -> Self {
        Failure::Library(err)
    }
}

/// Runs `body`, translating errors and panics into a status code.
fn guarded(body: impl FnOnce() -> Result<(), Failure>) -> FracregStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            FracregStatus::Ok
        }
        Ok(Err(Failure::Null(name))) => {
            set_last_error(format!("null pointer passed as {name}"));
            FracregStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(message))) => {
            set_last_error(message);
            FracregStatus::InvalidArgument
        }
        Ok(Err(Failure::Library(err))) => {
            set_last_error(err.to_string());
            status_of(&err)
        }
        Err(_) => {
            set_last_error("internal panic".to_owned());
            FracregStatus::Panic
        }
    }
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn slice_in<'a>(
    data: *const f64,
    len: usize,
    name: &'static str,
) -> Result<&'a [f64], Failure> {
    if data.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

fn hurst(value: f64) -> Result<HurstParam, Failure> {
    Ok(HurstParam::new(value)?)
}

fn model(h1: f64, h2: f64, alpha: f64, n: usize, x0: f64) -> Result<ModelConfig, Failure> {
    Ok(ModelConfig::new(h1, h2, alpha, n)?.with_x0(x0))
}

/// Message of the last failed call on this thread, or null after a success.
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn fracreg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn fracreg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fracreg_fbm_covariance(
    t: f64,
    s: f64,
    h: f64,
    out: *mut f64,
) -> FracregStatus {
    guarded(|| write_out(out, fbm_covariance(t, s, hurst(h)?)?, "out"))
}

/// # Safety
/// `out` must be null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fracreg_fgn_autocovariance(
    lag: u64,
    h: f64,
    out: *mut f64,
) -> FracregStatus {
    guarded(|| write_out(out, fgn_autocovariance(lag, hurst(h)?), "out"))
}

/// # Safety
/// `out` must be null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fracreg_heat_kernel(x: f64, eps: f64, out: *mut f64) -> FracregStatus {
    guarded(|| write_out(out, heat_kernel(x, eps)?, "out"))
}

/// `∫K² = 1/(2√π)`.
#[no_mangle]
pub extern "C" fn fracreg_kernel_l2_norm() -> f64 {
    kernel_l2_norm()
}

/// # Safety
/// `out` must be null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fracreg_c1_constant(h1: f64, out: *mut f64) -> FracregStatus {
    guarded(|| write_out(out, c1_constant(hurst(h1)?), "out"))
}

/// # Safety
/// `out` must be null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fracreg_expected_local_time(h: f64, out: *mut f64) -> FracregStatus {
    guarded(|| write_out(out, expected_local_time(hurst(h)?), "out"))
}

/// # Safety
/// `out` must be null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fracreg_admissible_region(
    h1: f64,
    h2: f64,
    out: *mut FracregRegion,
) -> FracregStatus {
    guarded(|| {
        let r = admissible_region(hurst(h1)?, hurst(h2)?);
        write_out(
            out,
            FracregRegion {
                lower: r.lower,
                upper: r.upper,
                nonempty: !r.is_empty(),
            },
            "out",
        )
    })
}

/// Order-`order` chaos partial sum of `p_eps` at `z`.
///
/// # Safety
/// `out` must be null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fracreg_chaos_eval(
    z: f64,
    eps: f64,
    phi_norm_sq: f64,
    order: usize,
    out: *mut f64,
) -> FracregStatus {
    guarded(|| {
        let series = ChaosSeries::new(eps, phi_norm_sq, order)?;
        write_out(out, chaos_eval(z, &series), "out")
    })
}

/// Exact `E Σ K²(n^α(B_i − x0))`.
///
/// # Safety
/// `out` must be null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fracreg_exact_diagonal(
    h1: f64,
    h2: f64,
    alpha: f64,
    n: usize,
    out: *mut f64,
) -> FracregStatus {
    guarded(|| write_out(out, exact_diagonal(&model(h1, h2, alpha, n, 0.0)?)?, "out"))
}

/// Exact off-diagonal part of `E S_n²`; O(n²).
///
/// # Safety
/// `out` must be null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fracreg_exact_offdiagonal(
    h1: f64,
    h2: f64,
    alpha: f64,
    n: usize,
    out: *mut f64,
) -> FracregStatus {
    guarded(|| {
        write_out(
            out,
            exact_offdiagonal(&model(h1, h2, alpha, n, 0.0)?)?,
            "out",
        )
    })
}

/// Statistic of two paths of `len = n + 1` points each, starting at zero.
///
/// # Safety
/// `path1` and `path2` must each be null or point to `len` readable doubles;
/// `out` must be null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fracreg_compute_statistic(
    h1: f64,
    h2: f64,
    alpha: f64,
    x0: f64,
    path1: *const f64,
    path2: *const f64,
    len: usize,
    out: *mut FracregStatistic,
) -> FracregStatus {
    guarded(|| {
        if len < 2 {
            return Err(Failure::Invalid(format!(
                "paths need at least 2 points, got {len}"
            )));
        }
        let config = model(h1, h2, alpha, len - 1, x0)?;
        let p1 = FbmPath::new(config.h1, slice_in(path1, len, "path1")?.to_vec())?;
        let p2 = FbmPath::new(config.h2, slice_in(path2, len, "path2")?.to_vec())?;
        let s = compute_statistic(&p1, &p2, &config)?;
        write_out(
            out,
            FracregStatistic {
                s_n: s.s_n,
                bracket: s.bracket,
                a_n: s.a_n,
                s_n_normalized: s.s_n_normalized,
                bracket_normalized: s.bracket_normalized,
            },
            "out",
        )
    })
}

/// Builds a generator for `n`-step paths. `kind` is a
/// [`FracregGeneratorKind`] value.
///
/// # Safety
/// `out` must be null or valid for one write. The handle written there must
/// be released with [`fracreg_generator_free`].
#[no_mangle]
pub unsafe extern "C" fn fracreg_generator_new(
    kind: i32,
    n: usize,
    h: f64,
    out: *mut *mut FracregGenerator,
) -> FracregStatus {
    guarded(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let kind = match kind {
            k if k == FracregGeneratorKind::Circulant as i32 => GeneratorKind::Circulant,
            k if k == FracregGeneratorKind::Cholesky as i32 => GeneratorKind::Cholesky,
            other => return Err(Failure::Invalid(format!("unknown generator kind {other}"))),
        };
        let inner = build_generator(kind, n, hurst(h)?)?;
        out.write(Box::into_raw(Box::new(FracregGenerator { inner })));
        Ok(())
    })
}

/// # Safety
/// `generator` must be null or a handle from [`fracreg_generator_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fracreg_generator_free(generator: *mut FracregGenerator) {
    if !generator.is_null() {
        drop(Box::from_raw(generator));
    }
}

/// Step count `n` of the generator, or 0 for a null handle.
///
/// # Safety
/// `generator` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fracreg_generator_steps(generator: *const FracregGenerator) -> usize {
    generator.as_ref().map_or(0, |g| g.inner.steps())
}

/// Samples the path of `replicate` under `master_seed` into `out`, which
/// holds `len = n + 1` doubles. Same inputs give the same path.
///
/// # Safety
/// `generator` must be null or a live handle; `out` must be null or valid
/// for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn fracreg_generator_sample(
    generator: *const FracregGenerator,
    master_seed: u64,
    replicate: u64,
    out: *mut f64,
    len: usize,
) -> FracregStatus {
    guarded(|| {
        let g = generator.as_ref().ok_or(Failure::Null("generator"))?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let n = g.inner.steps();
        if len != n + 1 {
            return Err(Failure::Invalid(format!(
                "buffer holds {len} values, path has {}",
                n + 1
            )));
        }
        let path = g.inner.sample(&mut seeded_substream(
            master_seed,
            replicate,
            StreamRole::Path1,
        ));
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(path.values());
        Ok(())
    })
}

/// Runs one experiment (`variance`, `bracket`, `limit`, `conditional` or
/// `riemann`) from a JSON plan and returns the JSON report. The report
/// string must be released with [`fracreg_string_free`].
///
/// # Safety
/// `experiment` and `plan_json` must be null or NUL-terminated strings;
/// `out_json` must be null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fracreg_run_experiment(
    experiment: *const c_char,
    plan_json: *const c_char,
    out_json: *mut *mut c_char,
) -> FracregStatus {
    guarded(|| {
        if out_json.is_null() {
            return Err(Failure::Null("out_json"));
        }
        let text = |p: *const c_char, name: &'static str| -> Result<&str, Failure> {
            if p.is_null() {
                return Err(Failure::Null(name));
            }
            CStr::from_ptr(p)
                .to_str()
                .map_err(|_| Failure::Invalid(format!("{name} is not valid UTF-8")))
        };
        let plan: ExperimentPlan =
            serde_json::from_str(text(plan_json, "plan_json")?).map_err(FracregError::from)?;
        let report = match text(experiment, "experiment")? {
            "variance" => run_variance_experiment(&plan)?,
            "bracket" => run_bracket_experiment(&plan)?,
            "limit" => run_limit_experiment(&plan)?,
            "conditional" => run_conditional_experiment(&plan)?,
            "riemann" => run_riemann_experiment(&plan)?,
            other => return Err(Failure::Invalid(format!("unknown experiment {other:?}"))),
        };
        let json = CString::new(report.to_json()?).expect("JSON has no NUL bytes");
        out_json.write(json.into_raw());
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fracreg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
