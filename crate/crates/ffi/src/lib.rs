// SPDX-License-Identifier: Apache-2.0

//! C ABI over the s3diff library.
//!
//! Modules and reports are opaque handles owned by the caller and released
//! with their `_free` function. Every fallible call returns an
//! [`S3Status`]; on failure [`s3_last_error`] describes the cause until the
//! next call on the same thread. Strings returned by the library are
//! released with [`s3_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use s3diff::mir::{parse_ir, Module};
use s3diff::s3::{score_function, S3Report as Report, ScoreConfig};
use s3diff::symexec::{execute, ExecConfig};
use s3diff::symgraph::{align_result, to_kquery, AlignedSide, AlignmentSpec};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum S3Status {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    NotFound = 4,
    ExecError = 5,
    SerializeError = 6,
    Panic = 7,
}

/// A parsed mini-IR module.
pub struct S3Module {
    inner: Module,
}

/// The score of one function pair.
pub struct S3Report {
    inner: Report,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    // interior NULs cannot cross the boundary
    let c = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: S3Status, msg: impl Into<String>) -> S3Status {
    set_error(msg.into());
    status
}

/// Runs `f`, turning a panic into [`S3Status::Panic`].
fn guarded(f: impl FnOnce() -> S3Status) -> S3Status {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        fail(S3Status::Panic, msg)
    })
}

/// # Safety
/// `s` is null or a NUL-terminated string valid for reads.
unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, S3Status> {
    if s.is_null() {
        return Err(fail(S3Status::NullArgument, format!("{what} is null")));
    }
    // SAFETY: non-null and NUL-terminated per the caller contract.
    unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|e| fail(S3Status::InvalidUtf8, format!("{what}: {e}")))
}

fn into_c_string(s: String) -> Result<*mut c_char, S3Status> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|e| fail(S3Status::SerializeError, e.to_string()))
}

/// Last error message of this thread, or null. The pointer stays valid
/// until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn s3_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn s3_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses and validates mini-IR text into `*out`.
///
/// # Safety
/// `source` is a NUL-terminated string; `out` is valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn s3_module_parse(
    source: *const c_char,
    out: *mut *mut S3Module,
) -> S3Status {
    guarded(|| {
        if out.is_null() {
            return fail(S3Status::NullArgument, "out is null");
        }
        // SAFETY: forwarded caller contract.
        let src = match unsafe { text(source, "source") } {
            Ok(s) => s,
            Err(st) => return st,
        };
        match parse_ir(src) {
            Ok(inner) => {
                // SAFETY: `out` is non-null and writable per the contract.
                unsafe { *out = Box::into_raw(Box::new(S3Module { inner })) };
                S3Status::Ok
            }
            Err(e) => fail(S3Status::ParseError, e.to_string()),
        }
    })
}

/// Number of functions in a module; 0 for null.
///
/// # Safety
/// `module` is null or a live handle from [`s3_module_parse`].
#[no_mangle]
pub unsafe extern "C" fn s3_module_function_count(module: *const S3Module) -> usize {
    // SAFETY: null or live per the contract.
    unsafe { module.as_ref() }.map_or(0, |m| m.inner.functions.len())
}

/// # Safety
/// `module` is null or a handle from [`s3_module_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn s3_module_free(module: *mut S3Module) {
    if !module.is_null() {
        // SAFETY: allocated by `Box::into_raw` and released once.
        drop(unsafe { Box::from_raw(module) });
    }
}

fn side(
    m: &Module,
    name: &str,
    dialect: &str,
) -> Result<(s3diff::symexec::ExecResult, AlignedSide), S3Status> {
    let f = m.function(name).ok_or_else(|| {
        fail(
            S3Status::NotFound,
            format!("{dialect} module has no function {name}"),
        )
    })?;
    let r = execute(f, &m.records, &ExecConfig::default())
        .map_err(|e| fail(S3Status::ExecError, format!("{dialect}: {e}")))?;
    let aligned = align_result(&r, &AlignmentSpec::for_function(f, &m.records));
    Ok((r, aligned))
}

/// Executes `name` in both modules with default limits and scores the pair.
///
/// # Safety
/// Both modules are live handles, `name` is NUL-terminated and `out` is
/// valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn s3_score_pair(
    c_module: *const S3Module,
    rust_module: *const S3Module,
    name: *const c_char,
    out: *mut *mut S3Report,
) -> S3Status {
    guarded(|| {
        // SAFETY: null or live per the contract.
        let (Some(c), Some(r)) = (unsafe { c_module.as_ref() }, unsafe {
            rust_module.as_ref()
        }) else {
            return fail(S3Status::NullArgument, "module is null");
        };
        if out.is_null() {
            return fail(S3Status::NullArgument, "out is null");
        }
        // SAFETY: forwarded caller contract.
        let name = match unsafe { text(name, "name") } {
            Ok(s) => s,
            Err(st) => return st,
        };
        let sides =
            side(&c.inner, name, "c").and_then(|a| side(&r.inner, name, "rust").map(|b| (a, b)));
        match sides {
            Ok(((_, cs), (_, rs))) => {
                let inner = score_function(&cs, &rs, name, &ScoreConfig::default());
                // SAFETY: `out` is non-null and writable per the contract.
                unsafe { *out = Box::into_raw(Box::new(S3Report { inner })) };
                S3Status::Ok
            }
            Err(st) => st,
        }
    })
}

/// Summed distance over all outputs; `u32::MAX` for null.
///
/// # Safety
/// `report` is null or a live handle from [`s3_score_pair`].
#[no_mangle]
pub unsafe extern "C" fn s3_report_distance(report: *const S3Report) -> u32 {
    // SAFETY: null or live per the contract.
    unsafe { report.as_ref() }.map_or(u32::MAX, |r| r.inner.distance)
}

/// Whether every output is equivalent; false for null.
///
/// # Safety
/// `report` is null or a live handle from [`s3_score_pair`].
#[no_mangle]
pub unsafe extern "C" fn s3_report_equivalent(report: *const S3Report) -> bool {
    // SAFETY: null or live per the contract.
    unsafe { report.as_ref() }.is_some_and(|r| r.inner.equivalent)
}

/// Writes the report as JSON to `*out`; free it with [`s3_string_free`].
///
/// # Safety
/// `report` is a live handle and `out` is valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn s3_report_json(
    report: *const S3Report,
    out: *mut *mut c_char,
) -> S3Status {
    guarded(|| {
        // SAFETY: null or live per the contract.
        let Some(r) = (unsafe { report.as_ref() }) else {
            return fail(S3Status::NullArgument, "report is null");
        };
        if out.is_null() {
            return fail(S3Status::NullArgument, "out is null");
        }
        let json = serde_json::to_string_pretty(&r.inner);
        match json
            .map_err(|e| fail(S3Status::SerializeError, e.to_string()))
            .and_then(into_c_string)
        {
            Ok(p) => {
                // SAFETY: `out` is non-null and writable per the contract.
                unsafe { *out = p };
                S3Status::Ok
            }
            Err(st) => st,
        }
    })
}

/// # Safety
/// `report` is null or a handle from [`s3_score_pair`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn s3_report_free(report: *mut S3Report) {
    if !report.is_null() {
        // SAFETY: allocated by `Box::into_raw` and released once.
        drop(unsafe { Box::from_raw(report) });
    }
}

/// Executes `name` and writes its path summaries in KQuery form, one
/// query per line, to `*out`; free it with [`s3_string_free`].
///
/// # Safety
/// `module` is a live handle, `name` is NUL-terminated and `out` is valid
/// for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn s3_module_kquery(
    module: *const S3Module,
    name: *const c_char,
    out: *mut *mut c_char,
) -> S3Status {
    guarded(|| {
        // SAFETY: null or live per the contract.
        let Some(m) = (unsafe { module.as_ref() }) else {
            return fail(S3Status::NullArgument, "module is null");
        };
        if out.is_null() {
            return fail(S3Status::NullArgument, "out is null");
        }
        // SAFETY: forwarded caller contract.
        let name = match unsafe { text(name, "name") } {
            Ok(s) => s,
            Err(st) => return st,
        };
        let text = side(&m.inner, name, "module").map(|(r, _)| {
            r.summaries
                .iter()
                .map(to_kquery)
                .collect::<Vec<_>>()
                .join("\n")
        });
        match text.and_then(into_c_string) {
            Ok(p) => {
                // SAFETY: `out` is non-null and writable per the contract.
                unsafe { *out = p };
                S3Status::Ok
            }
            Err(st) => st,
        }
    })
}

/// Releases a string returned by this library; null is ignored.
///
/// # Safety
/// `s` is null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn s3_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: produced by `CString::into_raw` and released once.
        drop(unsafe { CString::from_raw(s) });
    }
}
