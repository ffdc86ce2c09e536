//! C ABI over `arearemap`.
//!
//! Every function returns an [`ArStatus`]; on failure the message is kept per
//! thread and read with [`ar_last_error`]. Objects are opaque handles created
//! by `*_new`/producer calls and released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use arearemap::areafn::AreaFunction;
use arearemap::experiment::{run_experiment, ExperimentConfig};
use arearemap::rearrange::{build_table, rank_project, SortedValueTable};
use arearemap::relabel::relabel_project;
use arearemap::schemes::{jacobian, solve_poisson};
use arearemap::{AreaConfig, Error, Grid, JacobianKind, ScalarField};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Input = 3,
    Numeric = 4,
    NoConvergence = 5,
    Parse = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArJacobian {
    Arakawa = 0,
    Central = 1,
}

/// Vertex field on a uniform grid over the unit square.
pub struct ArField(ScalarField);

/// Tabulated area function.
pub struct ArAreaFunction(AreaFunction);

/// Sorted initial values for rank projection.
pub struct ArRankTable(SortedValueTable);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> ArStatus {
    match err {
        Error::Config(_) => ArStatus::Config,
        Error::Input(_) => ArStatus::Input,
        Error::Numeric { .. } => ArStatus::Numeric,
        Error::NoConvergence(_) => ArStatus::NoConvergence,
        Error::Parse { .. } => ArStatus::Parse,
        Error::Io(_) => ArStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> ArStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => ArStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            ArStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            ArStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    *out = value;
    Ok(())
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Lib(Error::Input(format!("{what} is not UTF-8"))))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn ar_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a field from `nx * ny` row-major values (x fastest).
///
/// # Safety
/// `values` must point to `nx * ny` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ar_field_new(
    nx: usize,
    ny: usize,
    values: *const f64,
    out: *mut *mut ArField,
) -> ArStatus {
    guard(|| {
        let grid = Grid::new(nx, ny)?;
        if values.is_null() {
            return Err(Failure::Null("values"));
        }
        let v = std::slice::from_raw_parts(values, grid.len()).to_vec();
        store(out, ArField(ScalarField::from_values(grid, v)?), "out")
    })
}

/// # Safety
/// `field` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ar_field_free(field: *mut ArField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ar_field_dims(
    field: *const ArField,
    nx: *mut usize,
    ny: *mut usize,
) -> ArStatus {
    guard(|| {
        let f = borrow(field, "field")?;
        write(nx, f.0.grid().nx(), "nx")?;
        write(ny, f.0.grid().ny(), "ny")
    })
}

/// Copies the values into `out`, which holds `len` doubles; `len` must equal
/// `nx * ny`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ar_field_values(
    field: *const ArField,
    out: *mut f64,
    len: usize,
) -> ArStatus {
    guard(|| {
        let f = borrow(field, "field")?;
        let v = f.0.values();
        if len != v.len() {
            return Err(
                Error::Input(format!("buffer holds {len} values, field has {}", v.len())).into(),
            );
        }
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(v);
        Ok(())
    })
}

/// Discrete Jacobian `J(a, b)`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ar_jacobian(
    kind: ArJacobian,
    a: *const ArField,
    b: *const ArField,
    out: *mut *mut ArField,
) -> ArStatus {
    guard(|| {
        let kind = match kind {
            ArJacobian::Arakawa => JacobianKind::Arakawa,
            ArJacobian::Central => JacobianKind::Central,
        };
        let j = jacobian(kind, &borrow(a, "a")?.0, &borrow(b, "b")?.0)?;
        store(out, ArField(j), "out")
    })
}

/// Stream function with `laplacian(psi) = -omega`, zero on the boundary.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ar_poisson(omega: *const ArField, out: *mut *mut ArField) -> ArStatus {
    guard(|| {
        let psi = solve_poisson(&borrow(omega, "omega")?.0)?;
        store(out, ArField(psi), "out")
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ar_area_tabulate(
    field: *const ArField,
    budget: usize,
    richardson: bool,
    out: *mut *mut ArAreaFunction,
) -> ArStatus {
    guard(|| {
        let cfg = AreaConfig { budget, richardson };
        cfg.validate()?;
        let a = cfg.tabulate(&borrow(field, "field")?.0);
        store(out, ArAreaFunction(a), "out")
    })
}

/// # Safety
/// `area` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ar_area_free(area: *mut ArAreaFunction) {
    if !area.is_null() {
        drop(Box::from_raw(area));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ar_area_len(area: *const ArAreaFunction, out: *mut usize) -> ArStatus {
    guard(|| write(out, borrow(area, "area")?.0.len(), "out"))
}

/// Area enclosed by the level-`c` contour.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ar_area_evaluate(
    area: *const ArAreaFunction,
    c: f64,
    out: *mut f64,
) -> ArStatus {
    guard(|| write(out, borrow(area, "area")?.0.evaluate(c), "out"))
}

/// Smallest level whose enclosed area does not exceed `a`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ar_area_invert(
    area: *const ArAreaFunction,
    a: f64,
    out: *mut f64,
) -> ArStatus {
    guard(|| write(out, borrow(area, "area")?.0.invert(a), "out"))
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ar_rank_table_new(
    initial: *const ArField,
    out: *mut *mut ArRankTable,
) -> ArStatus {
    guard(|| {
        store(
            out,
            ArRankTable(build_table(&borrow(initial, "initial")?.0)),
            "out",
        )
    })
}

/// # Safety
/// `table` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ar_rank_table_free(table: *mut ArRankTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ar_rank_project(
    field: *const ArField,
    table: *const ArRankTable,
    out: *mut *mut ArField,
) -> ArStatus {
    guard(|| {
        let p = rank_project(&borrow(field, "field")?.0, &borrow(table, "table")?.0)?;
        store(out, ArField(p), "out")
    })
}

/// Relabels `field` so its contours enclose the areas of `initial`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ar_relabel(
    field: *const ArField,
    initial: *const ArAreaFunction,
    budget: usize,
    richardson: bool,
    out: *mut *mut ArField,
) -> ArStatus {
    guard(|| {
        let r = relabel_project(
            &borrow(field, "field")?.0,
            &borrow(initial, "initial")?.0,
            budget,
            richardson,
        )?;
        store(out, ArField(r), "out")
    })
}

/// Runs an experiment described by config text, writing artifacts to `out_dir`.
///
/// # Safety
/// Both strings must be valid NUL-terminated C strings.
#[no_mangle]
pub unsafe extern "C" fn ar_run_experiment(
    config_text: *const c_char,
    out_dir: *const c_char,
) -> ArStatus {
    guard(|| {
        let cfg = ExperimentConfig::parse(text(config_text, "config_text")?)?;
        let dir = text(out_dir, "out_dir")?;
        run_experiment(&cfg, Path::new(dir))?;
        Ok(())
    })
}
