//! C ABI for the LFM sketch, the per-prefix detector and the Monte Carlo
//! threshold.
//!
//! Every call returns a [`CpdStatus`]. Sketches and detectors are opaque heap
//! handles released with their `_free` function. After a failed call the
//! message is available from [`cpd_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cpadetect::detector::{Alarm, Detector, DetectorConfig, LfmFactory};
use cpadetect::{mc_threshold, DistinctSketch, Error, LfmSketch, MonitorHistory, SketchConfig, ThresholdConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidConfig = 2,
    InvalidArgument = 3,
    InsufficientHistory = 4,
    InvalidObservation = 5,
    InvalidUtf8 = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CpdSketchConfig {
    pub hash_bits: u32,
    pub substrings: u32,
    pub bitmaps: usize,
    pub hash_seed: u32,
    pub pattern_seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CpdThresholdConfig {
    pub alpha: f64,
    pub sample_size: usize,
    pub resamples: usize,
    pub growth_step: f64,
    pub rng_seed: u64,
}

/// One alarm of the most recent epoch. `prefix` stays valid until the next
/// `cpd_detector_end_epoch` or `cpd_detector_free` on the same detector.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CpdAlarm {
    pub epoch_index: u64,
    pub statistic: f64,
    pub threshold: f64,
    pub wall_time: f64,
    pub prefix: *const c_char,
}

pub struct CpdLfm {
    inner: LfmSketch,
}

pub struct CpdDetector {
    inner: Detector<LfmFactory>,
    alarms: Vec<Alarm>,
    prefixes: Vec<CString>,
}

impl From<CpdSketchConfig> for SketchConfig {
    fn from(c: CpdSketchConfig) -> Self {
        SketchConfig {
            hash_bits: c.hash_bits,
            substrings: c.substrings,
            bitmaps: c.bitmaps,
            hash_seed: c.hash_seed,
            pattern_seed: c.pattern_seed,
        }
    }
}

impl From<SketchConfig> for CpdSketchConfig {
    fn from(c: SketchConfig) -> Self {
        CpdSketchConfig {
            hash_bits: c.hash_bits,
            substrings: c.substrings,
            bitmaps: c.bitmaps,
            hash_seed: c.hash_seed,
            pattern_seed: c.pattern_seed,
        }
    }
}

impl From<CpdThresholdConfig> for ThresholdConfig {
    fn from(c: CpdThresholdConfig) -> Self {
        ThresholdConfig {
            alpha: c.alpha,
            sample_size: c.sample_size,
            resamples: c.resamples,
            growth_step: c.growth_step,
            rng_seed: c.rng_seed,
        }
    }
}

impl From<ThresholdConfig> for CpdThresholdConfig {
    fn from(c: ThresholdConfig) -> Self {
        CpdThresholdConfig {
            alpha: c.alpha,
            sample_size: c.sample_size,
            resamples: c.resamples,
            growth_step: c.growth_step,
            rng_seed: c.rng_seed,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CpdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Config(_) => CpdStatus::InvalidConfig,
            Error::InsufficientHistory { .. } => CpdStatus::InsufficientHistory,
            Error::InvalidObservation(_) => CpdStatus::InvalidObservation,
            _ => CpdStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CpdStatus::NullPointer, format!("{what} is null"))
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn call<F>(f: F) -> CpdStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CpdStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside cpadetect".into());
            CpdStatus::Internal
        }
    }
}

unsafe fn handle<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn out_slot<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null("output pointer"))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cpd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn cpd_status_message(status: CpdStatus) -> *const c_char {
    let s: &'static CStr = match status {
        CpdStatus::Ok => c"ok",
        CpdStatus::NullPointer => c"null pointer argument",
        CpdStatus::InvalidConfig => c"invalid configuration",
        CpdStatus::InvalidArgument => c"invalid argument",
        CpdStatus::InsufficientHistory => c"insufficient history",
        CpdStatus::InvalidObservation => c"invalid observation",
        CpdStatus::InvalidUtf8 => c"name is not valid UTF-8",
        CpdStatus::Internal => c"internal error",
    };
    s.as_ptr()
}

#[no_mangle]
pub extern "C" fn cpd_sketch_config_default() -> CpdSketchConfig {
    SketchConfig::default().into()
}

#[no_mangle]
pub extern "C" fn cpd_threshold_config_default() -> CpdThresholdConfig {
    ThresholdConfig::default().into()
}

/// Create a sketch. A null `config` selects the defaults.
///
/// # Safety
/// `config` must be null or point to a valid config; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpd_lfm_new(config: *const CpdSketchConfig, out: *mut *mut CpdLfm) -> CpdStatus {
    call(|| {
        let slot = out_slot(out)?;
        let cfg = config.as_ref().map_or_else(SketchConfig::default, |c| (*c).into());
        let inner = LfmSketch::new(cfg)?;
        *slot = Box::into_raw(Box::new(CpdLfm { inner }));
        Ok(())
    })
}

/// # Safety
/// `sketch` must come from `cpd_lfm_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cpd_lfm_free(sketch: *mut CpdLfm) {
    if !sketch.is_null() {
        drop(Box::from_raw(sketch));
    }
}

/// # Safety
/// `sketch` must be a live handle; `item` must point to `len` readable bytes
/// (it may be null when `len` is 0).
#[no_mangle]
pub unsafe extern "C" fn cpd_lfm_insert(sketch: *mut CpdLfm, item: *const u8, len: usize) -> CpdStatus {
    call(|| {
        let s = handle(sketch, "sketch")?;
        let bytes = if len == 0 {
            &[][..]
        } else if item.is_null() {
            return Err(null("item"));
        } else {
            std::slice::from_raw_parts(item, len)
        };
        s.inner.insert(bytes);
        Ok(())
    })
}

/// # Safety
/// `sketch` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cpd_lfm_estimate(sketch: *const CpdLfm, out: *mut f64) -> CpdStatus {
    call(|| {
        let s = sketch.as_ref().ok_or_else(|| null("sketch"))?;
        *out_slot(out)? = s.inner.estimate();
        Ok(())
    })
}

/// Harmonic mean of the registers' leftmost-zero indices.
///
/// # Safety
/// `sketch` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cpd_lfm_statistic(sketch: *const CpdLfm, out: *mut f64) -> CpdStatus {
    call(|| {
        let s = sketch.as_ref().ok_or_else(|| null("sketch"))?;
        *out_slot(out)? = s.inner.harmonic_statistic();
        Ok(())
    })
}

/// # Safety
/// `sketch` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cpd_lfm_insert_count(sketch: *const CpdLfm, out: *mut u64) -> CpdStatus {
    call(|| {
        let s = sketch.as_ref().ok_or_else(|| null("sketch"))?;
        *out_slot(out)? = s.inner.insert_count();
        Ok(())
    })
}

/// Copy the `N` registers, bit 0 of each in its most significant used bit.
/// `len` must equal the sketch's bitmap count.
///
/// # Safety
/// `sketch` must be a live handle and `out` must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn cpd_lfm_registers(sketch: *const CpdLfm, out: *mut u64, len: usize) -> CpdStatus {
    call(|| {
        let s = sketch.as_ref().ok_or_else(|| null("sketch"))?;
        let regs = s.inner.bitmaps();
        if len != regs.len() {
            return Err(Failure(
                CpdStatus::InvalidArgument,
                format!("buffer holds {len} registers, sketch has {}", regs.len()),
            ));
        }
        if out.is_null() {
            return Err(null("output buffer"));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(regs);
        Ok(())
    })
}

/// # Safety
/// `sketch` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cpd_lfm_reset(sketch: *mut CpdLfm) -> CpdStatus {
    call(|| {
        handle(sketch, "sketch")?.inner.reset();
        Ok(())
    })
}

/// Create an ELDA detector. Null configs select the defaults.
///
/// # Safety
/// Config pointers must be null or valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cpd_detector_new(
    sketch: *const CpdSketchConfig,
    threshold: *const CpdThresholdConfig,
    out: *mut *mut CpdDetector,
) -> CpdStatus {
    call(|| {
        let slot = out_slot(out)?;
        let mut cfg = DetectorConfig::default();
        if let Some(s) = sketch.as_ref() {
            cfg.sketch = (*s).into();
        }
        if let Some(t) = threshold.as_ref() {
            cfg.threshold = (*t).into();
        }
        let inner = Detector::elda(cfg)?.without_trace();
        *slot = Box::into_raw(Box::new(CpdDetector {
            inner,
            alarms: Vec::new(),
            prefixes: Vec::new(),
        }));
        Ok(())
    })
}

/// # Safety
/// `detector` must come from `cpd_detector_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cpd_detector_free(detector: *mut CpdDetector) {
    if !detector.is_null() {
        drop(Box::from_raw(detector));
    }
}

/// Feed one interest name (NUL-terminated UTF-8). Names without a `/`
/// prefix component are ignored.
///
/// # Safety
/// `detector` must be a live handle and `name` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn cpd_detector_observe(detector: *mut CpdDetector, name: *const c_char) -> CpdStatus {
    call(|| {
        let d = handle(detector, "detector")?;
        if name.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|e| Failure(CpdStatus::InvalidUtf8, e.to_string()))?;
        d.inner.observe_interest(name);
        Ok(())
    })
}

/// Close the current epoch; writes the number of alarms raised to `count`.
///
/// # Safety
/// `detector` must be a live handle and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn cpd_detector_end_epoch(detector: *mut CpdDetector, count: *mut usize) -> CpdStatus {
    call(|| {
        let d = handle(detector, "detector")?;
        let slot = out_slot(count)?;
        d.alarms = d.inner.end_epoch();
        d.prefixes = d
            .alarms
            .iter()
            .map(|a| CString::new(a.prefix.replace('\0', " ")).expect("interior NULs removed"))
            .collect();
        *slot = d.alarms.len();
        Ok(())
    })
}

/// # Safety
/// `detector` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cpd_detector_alarm(detector: *const CpdDetector, index: usize, out: *mut CpdAlarm) -> CpdStatus {
    call(|| {
        let d = detector.as_ref().ok_or_else(|| null("detector"))?;
        let slot = out_slot(out)?;
        let a = d.alarms.get(index).ok_or_else(|| {
            Failure(
                CpdStatus::InvalidArgument,
                format!("alarm index {index} out of range ({} alarms)", d.alarms.len()),
            )
        })?;
        *slot = CpdAlarm {
            epoch_index: a.epoch_index,
            statistic: a.statistic,
            threshold: a.threshold,
            wall_time: a.wall_time,
            prefix: d.prefixes[index].as_ptr(),
        };
        Ok(())
    })
}

/// Threshold for the next statistic given the `len` most recent values.
/// A null `config` selects the defaults.
///
/// # Safety
/// `values` must point to `len` readable doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn cpd_mc_threshold(
    values: *const f64,
    len: usize,
    config: *const CpdThresholdConfig,
    out: *mut f64,
) -> CpdStatus {
    call(|| {
        let slot = out_slot(out)?;
        let window = if len == 0 {
            &[][..]
        } else if values.is_null() {
            return Err(null("values"));
        } else {
            std::slice::from_raw_parts(values, len)
        };
        let cfg = config.as_ref().map_or_else(ThresholdConfig::default, |c| (*c).into());
        let history = MonitorHistory::from_values(len.max(1), window)?;
        *slot = mc_threshold(&history, &cfg)?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_messages_are_static() {
        for s in [CpdStatus::Ok, CpdStatus::NullPointer, CpdStatus::Internal] {
            let m = unsafe { CStr::from_ptr(cpd_status_message(s)) };
            assert!(!m.to_bytes().is_empty());
        }
    }

    #[test]
    fn config_conversions_round_trip() {
        let c: SketchConfig = cpd_sketch_config_default().into();
        assert_eq!(c, SketchConfig::default());
        let t: ThresholdConfig = cpd_threshold_config_default().into();
        assert_eq!(t, ThresholdConfig::default());
    }

    #[test]
    fn errors_map_to_codes() {
        let f: Failure = Error::config("x").into();
        assert_eq!(f.0, CpdStatus::InvalidConfig);
        let f: Failure = Error::InsufficientHistory { needed: 2, available: 0 }.into();
        assert_eq!(f.0, CpdStatus::InsufficientHistory);
        let f: Failure = Error::InvalidObservation(-1.0).into();
        assert_eq!(f.0, CpdStatus::InvalidObservation);
    }
}
