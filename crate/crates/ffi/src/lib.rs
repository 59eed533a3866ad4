//! C ABI over the ion-dmet pipeline.
//!
//! Conventions: every fallible call returns an [`IonDmetStatus`]; results go
//! through caller-provided out-pointers that are written only on success.
//! Objects are opaque handles created by `*_new`/`*_load`/`*_parse` and released
//! with the matching `*_free` (NULL is accepted there). The message of the last
//! failure on the calling thread is available from [`ion_dmet_last_error`].
//! Panics never cross the boundary; they surface as `ION_DMET_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use ion_dmet::dmet::qubit_ground_state;
use ion_dmet::pauli::PauliSum;
use ion_dmet::pipeline::{cmd_compile, cmd_entropy, exact_expectations};
use ion_dmet::qcc::qcc_energy;
use ion_dmet::reference::ReferenceData;
use ion_dmet::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IonDmetStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Numerical = 4,
    Io = 5,
    NotFound = 6,
    Internal = 7,
}

/// Checksummed reference data set (opaque).
pub struct IonDmetReference {
    inner: ReferenceData,
}

/// Qubit Hamiltonian as a real Pauli sum (opaque).
pub struct IonDmetHamiltonian {
    inner: PauliSum,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> IonDmetStatus {
    match e {
        Error::Parse { .. } => IonDmetStatus::Parse,
        Error::Io(_) | Error::Checksum { .. } => IonDmetStatus::Io,
        Error::UnknownBondLength(_) => IonDmetStatus::NotFound,
        Error::NonHermitian(_)
        | Error::NotNormalized(_)
        | Error::NonOrthogonal(_)
        | Error::PurificationDiverged { .. }
        | Error::ChemicalPotential { .. } => IonDmetStatus::Numerical,
        _ => IonDmetStatus::InvalidArgument,
    }
}

/// Runs `f`, mapping errors and panics to a status and recording the message.
fn guard<F: FnOnce() -> Result<(), (IonDmetStatus, String)>>(f: F) -> IonDmetStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IonDmetStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            IonDmetStatus::Internal
        }
    }
}

fn lift(e: Error) -> (IonDmetStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (IonDmetStatus, String) {
    (IonDmetStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (IonDmetStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (IonDmetStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Static description of a status code. Never NULL.
#[no_mangle]
pub extern "C" fn ion_dmet_status_string(status: IonDmetStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        IonDmetStatus::Ok => b"ok\0",
        IonDmetStatus::NullPointer => b"null pointer argument\0",
        IonDmetStatus::InvalidArgument => b"invalid argument\0",
        IonDmetStatus::Parse => b"parse error\0",
        IonDmetStatus::Numerical => b"numerical failure\0",
        IonDmetStatus::Io => b"i/o or checksum failure\0",
        IonDmetStatus::NotFound => b"not found\0",
        IonDmetStatus::Internal => b"internal error\0",
    };
    s.as_ptr().cast()
}

/// Copies the last error message (NUL-terminated, truncated to `len`) into
/// `buf` and returns the full message length excluding the NUL; 0 if none.
///
/// # Safety
/// `buf` must be valid for `len` bytes or be NULL (then only the length is returned).
#[no_mangle]
pub unsafe extern "C" fn ion_dmet_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Loads and verifies the reference data. `dir` may be NULL for the default location.
///
/// # Safety
/// `dir` is NULL or a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ion_dmet_reference_load(dir: *const c_char, out: *mut *mut IonDmetReference) -> IonDmetStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let data = if dir.is_null() {
            ReferenceData::load_default()
        } else {
            ReferenceData::load(&PathBuf::from(c_str(dir, "dir")?))
        }
        .map_err(lift)?;
        *out = Box::into_raw(Box::new(IonDmetReference { inner: data }));
        Ok(())
    })
}

/// # Safety
/// `handle` is NULL or came from [`ion_dmet_reference_load`] and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ion_dmet_reference_free(handle: *mut IonDmetReference) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of stored bond lengths.
///
/// # Safety
/// `handle` is a live reference handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ion_dmet_reference_count(handle: *const IonDmetReference, out: *mut usize) -> IonDmetStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = h.inner.points.len();
        Ok(())
    })
}

/// Bond length number `index` (angstrom).
///
/// # Safety
/// `handle` is a live reference handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ion_dmet_reference_bond_length(
    handle: *const IonDmetReference,
    index: usize,
    out: *mut f64,
) -> IonDmetStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let p = h
            .inner
            .points
            .get(index)
            .ok_or((IonDmetStatus::NotFound, format!("no bond length at index {index}")))?;
        *out = p.r;
        Ok(())
    })
}

/// Embedding-problem energy of the stored optimal ansatz at bond length `r`.
///
/// # Safety
/// `handle` is a live reference handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ion_dmet_qcc_energy(handle: *const IonDmetReference, r: f64, out: *mut f64) -> IonDmetStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let p = h.inner.point(r).map_err(lift)?;
        *out = qcc_energy(&p.hamiltonian(), &p.ansatz()).map_err(lift)?;
        Ok(())
    })
}

/// Per-atom energy of the stored optimal ansatz at bond length `r` (hartree).
///
/// # Safety
/// `handle` is a live reference handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ion_dmet_energy_per_atom(
    handle: *const IonDmetReference,
    r: f64,
    out: *mut f64,
) -> IonDmetStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let p = h.inner.point(r).map_err(lift)?;
        let fp = h.inner.fragment(r).map_err(lift)?;
        let exps = exact_expectations(p).map_err(lift)?;
        *out = fp.energy_expression.evaluate_on(&exps).map_err(lift)?;
        Ok(())
    })
}

/// MO-basis and fragment–bath entanglement entropies (bits) of the optimal state.
///
/// # Safety
/// `handle` is a live reference handle; both out-pointers valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ion_dmet_entropies(
    handle: *const IonDmetReference,
    r: f64,
    mo_out: *mut f64,
    fragment_bath_out: *mut f64,
) -> IonDmetStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let mo = mo_out.as_mut().ok_or_else(|| null("mo_out"))?;
        let fb = fragment_bath_out.as_mut().ok_or_else(|| null("fragment_bath_out"))?;
        let rep = cmd_entropy(&h.inner, r, None).map_err(lift)?;
        *mo = rep.mo;
        *fb = rep.fragment_bath;
        Ok(())
    })
}

/// Compiles the measurement circuit for `basis` (`"ZZ"`, `"XZ"`, `"XX"`, `"YY"`)
/// and reports native gate counts plus the total-variation distance to the
/// uncompiled circuit.
///
/// # Safety
/// `handle` is a live reference handle; `basis` NUL-terminated; out-pointers valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ion_dmet_compile(
    handle: *const IonDmetReference,
    r: f64,
    basis: *const c_char,
    single_qubit_out: *mut usize,
    two_qubit_out: *mut usize,
    total_variation_out: *mut f64,
) -> IonDmetStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let basis = c_str(basis, "basis")?;
        let one = single_qubit_out.as_mut().ok_or_else(|| null("single_qubit_out"))?;
        let two = two_qubit_out.as_mut().ok_or_else(|| null("two_qubit_out"))?;
        let tv = total_variation_out.as_mut().ok_or_else(|| null("total_variation_out"))?;
        let o = cmd_compile(&h.inner, r, basis).map_err(lift)?;
        *one = o.compiled.post.single_qubit_count();
        *two = o.compiled.post.two_qubit_count();
        *tv = o.compiled.tv_to_pre;
        Ok(())
    })
}

/// Parses a Pauli-sum text (`<coeff> <letters>` per line).
///
/// # Safety
/// `text` NUL-terminated; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ion_dmet_hamiltonian_parse(
    text: *const c_char,
    out: *mut *mut IonDmetHamiltonian,
) -> IonDmetStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let sum = PauliSum::parse_text(c_str(text, "text")?).map_err(lift)?;
        *out = Box::into_raw(Box::new(IonDmetHamiltonian { inner: sum }));
        Ok(())
    })
}

/// # Safety
/// `handle` is NULL or came from [`ion_dmet_hamiltonian_parse`] and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ion_dmet_hamiltonian_free(handle: *mut IonDmetHamiltonian) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` is a live Hamiltonian handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ion_dmet_hamiltonian_qubits(
    handle: *const IonDmetHamiltonian,
    out: *mut usize,
) -> IonDmetStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = h.inner.n_qubits();
        Ok(())
    })
}

/// Lowest eigenvalue by dense diagonalization (at most 10 qubits).
///
/// # Safety
/// `handle` is a live Hamiltonian handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ion_dmet_hamiltonian_ground_energy(
    handle: *const IonDmetHamiltonian,
    out: *mut f64,
) -> IonDmetStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if h.inner.n_qubits() > 10 {
            return Err((IonDmetStatus::InvalidArgument, "dense diagonalization limited to 10 qubits".into()));
        }
        *out = qubit_ground_state(&h.inner).map_err(lift)?.0;
        Ok(())
    })
}
