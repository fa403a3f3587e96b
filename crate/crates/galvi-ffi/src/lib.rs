//! C ABI for the galvi integrators.
//!
//! Handles are opaque pointers created and destroyed by the paired
//! `*_new`/`*_free` functions; every fallible call returns a [`GalviStatus`]
//! and writes its result through out-pointers. The generated header lives in
//! `include/galvi.h`.

use std::panic::{catch_unwind, AssertUnwindSafe};

use galvi::analysis;
use galvi::basis::ControlScheme;
use galvi::galerkin::{self, IntegratorSpec, Trajectory};
use galvi::models::{LagrangianSystem, PhasePoint};
use galvi::quadrature::{QuadratureKind, QuadratureRule};
use galvi::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GalviStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Validation = 3,
    Singularity = 4,
    NonConvergence = 5,
    Internal = 6,
}

/// Quadrature family selector.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GalviQuadrature {
    Gauss = 0,
    Lobatto = 1,
}

/// Opaque Lagrangian system handle.
pub struct GalviSystem(LagrangianSystem);

/// Opaque integrator handle.
pub struct GalviSpec(IntegratorSpec);

/// Opaque trajectory handle.
pub struct GalviTrajectory(Trajectory);

fn status_of(err: &Error) -> GalviStatus {
    match err {
        Error::InvalidArgument(_) => GalviStatus::InvalidArgument,
        Error::Validation(_) | Error::Config(_) => GalviStatus::Validation,
        Error::Singularity(_) => GalviStatus::Singularity,
        Error::NonConvergence { .. } | Error::StepFailed { .. } | Error::SingularSystem(_) => {
            GalviStatus::NonConvergence
        }
        Error::Io(_) => GalviStatus::Internal,
    }
}

fn guarded<F: FnOnce() -> GalviStatus>(f: F) -> GalviStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(GalviStatus::Internal)
}

/// Create a harmonic oscillator system (`dim` 1 or 2, frequency `omega`).
#[no_mangle]
pub extern "C" fn galvi_system_harmonic(
    dim: usize,
    omega: f64,
    out: *mut *mut GalviSystem,
) -> GalviStatus {
    guarded(|| {
        if out.is_null() {
            return GalviStatus::NullPointer;
        }
        match LagrangianSystem::harmonic_oscillator(dim, omega) {
            Ok(system) => {
                unsafe { *out = Box::into_raw(Box::new(GalviSystem(system))) };
                GalviStatus::Ok
            }
            Err(err) => status_of(&err),
        }
    })
}

/// Create a planar Kepler system with force constant `k`.
#[no_mangle]
pub extern "C" fn galvi_system_kepler(k: f64, out: *mut *mut GalviSystem) -> GalviStatus {
    guarded(|| {
        if out.is_null() {
            return GalviStatus::NullPointer;
        }
        match LagrangianSystem::kepler(k) {
            Ok(system) => {
                unsafe { *out = Box::into_raw(Box::new(GalviSystem(system))) };
                GalviStatus::Ok
            }
            Err(err) => status_of(&err),
        }
    })
}

/// Configuration dimension of a system.
#[no_mangle]
pub extern "C" fn galvi_system_dim(system: *const GalviSystem) -> usize {
    if system.is_null() {
        return 0;
    }
    unsafe { &*system }.0.dim()
}

/// Destroy a system handle. Null is ignored.
#[no_mangle]
pub extern "C" fn galvi_system_free(system: *mut GalviSystem) {
    if !system.is_null() {
        drop(unsafe { Box::from_raw(system) });
    }
}

/// Create a `PsNrQu` integrator with equispaced control points and the given
/// Newton tolerance (pass 0 for the default, 1e-12).
#[no_mangle]
pub extern "C" fn galvi_spec_new(
    s: usize,
    r: usize,
    quadrature: GalviQuadrature,
    residual_tol: f64,
    out: *mut *mut GalviSpec,
) -> GalviStatus {
    guarded(|| {
        if out.is_null() {
            return GalviStatus::NullPointer;
        }
        let kind = match quadrature {
            GalviQuadrature::Gauss => QuadratureKind::Gauss,
            GalviQuadrature::Lobatto => QuadratureKind::Lobatto,
        };
        let built = QuadratureRule::new(kind, r).and_then(|rule| {
            IntegratorSpec::new(s, rule, ControlScheme::Equispaced)
        });
        match built {
            Ok(mut spec) => {
                if residual_tol > 0.0 {
                    spec.solver.residual_tol = residual_tol;
                }
                unsafe { *out = Box::into_raw(Box::new(GalviSpec(spec))) };
                GalviStatus::Ok
            }
            Err(err) => status_of(&err),
        }
    })
}

/// Canonical name (`P2N3Q4Lob` style), NUL-terminated, truncated to `len`.
/// Returns the full name length (excluding the terminator).
#[no_mangle]
pub extern "C" fn galvi_spec_name(
    spec: *const GalviSpec,
    buffer: *mut core::ffi::c_char,
    len: usize,
) -> usize {
    if spec.is_null() {
        return 0;
    }
    let name = unsafe { &*spec }.0.name().as_bytes();
    if !buffer.is_null() && len > 0 {
        let n = name.len().min(len - 1);
        unsafe {
            std::ptr::copy_nonoverlapping(name.as_ptr() as *const core::ffi::c_char, buffer, n);
            *buffer.add(n) = 0;
        }
    }
    name.len()
}

/// False when the quadrature order is below `2s - 1` (stage equations have
/// no uniqueness guarantee).
#[no_mangle]
pub extern "C" fn galvi_spec_is_well_posed(spec: *const GalviSpec) -> bool {
    !spec.is_null() && unsafe { &*spec }.0.is_well_posed()
}

/// Destroy a spec handle. Null is ignored.
#[no_mangle]
pub extern "C" fn galvi_spec_free(spec: *mut GalviSpec) {
    if !spec.is_null() {
        drop(unsafe { Box::from_raw(spec) });
    }
}

/// Integrate `steps` macro steps of size `h` from `(q0, p0)` (both of length
/// `dim`, which must match the system).
#[no_mangle]
pub extern "C" fn galvi_integrate(
    spec: *const GalviSpec,
    system: *const GalviSystem,
    q0: *const f64,
    p0: *const f64,
    dim: usize,
    h: f64,
    steps: usize,
    out: *mut *mut GalviTrajectory,
) -> GalviStatus {
    guarded(|| {
        if spec.is_null() || system.is_null() || q0.is_null() || p0.is_null() || out.is_null() {
            return GalviStatus::NullPointer;
        }
        let spec = unsafe { &*spec };
        let system = unsafe { &*system };
        if dim != system.0.dim() {
            return GalviStatus::InvalidArgument;
        }
        let start = PhasePoint::new(
            unsafe { std::slice::from_raw_parts(q0, dim) }.to_vec(),
            unsafe { std::slice::from_raw_parts(p0, dim) }.to_vec(),
        );
        match galerkin::integrate(&spec.0, &system.0, &start, h, steps) {
            Ok(trajectory) => {
                unsafe { *out = Box::into_raw(Box::new(GalviTrajectory(trajectory))) };
                GalviStatus::Ok
            }
            Err(err) => status_of(&err),
        }
    })
}

/// Number of macro steps in a trajectory.
#[no_mangle]
pub extern "C" fn galvi_trajectory_steps(trajectory: *const GalviTrajectory) -> usize {
    if trajectory.is_null() {
        return 0;
    }
    unsafe { &*trajectory }.0.steps()
}

/// Copy the k-th phase point (`k` in `0..=steps`) into `q_out`/`p_out`,
/// each of length `dim`.
#[no_mangle]
pub extern "C" fn galvi_trajectory_state(
    trajectory: *const GalviTrajectory,
    k: usize,
    q_out: *mut f64,
    p_out: *mut f64,
    dim: usize,
) -> GalviStatus {
    guarded(|| {
        if trajectory.is_null() || q_out.is_null() || p_out.is_null() {
            return GalviStatus::NullPointer;
        }
        let trajectory = &unsafe { &*trajectory }.0;
        let Some(point) = trajectory.phase_points.get(k) else {
            return GalviStatus::InvalidArgument;
        };
        if point.dim() != dim {
            return GalviStatus::InvalidArgument;
        }
        unsafe {
            std::ptr::copy_nonoverlapping(point.q.as_ptr(), q_out, dim);
            std::ptr::copy_nonoverlapping(point.p.as_ptr(), p_out, dim);
        }
        GalviStatus::Ok
    })
}

/// Destroy a trajectory handle. Null is ignored.
#[no_mangle]
pub extern "C" fn galvi_trajectory_free(trajectory: *mut GalviTrajectory) {
    if !trajectory.is_null() {
        drop(unsafe { Box::from_raw(trajectory) });
    }
}

/// The 2x2 iteration matrix of the scheme on the scalar harmonic oscillator
/// in `(p, w q)` coordinates, written row-major into `out` (length 4).
#[no_mangle]
pub extern "C" fn galvi_stability_matrix(
    spec: *const GalviSpec,
    h_omega: f64,
    out: *mut f64,
) -> GalviStatus {
    guarded(|| {
        if spec.is_null() || out.is_null() {
            return GalviStatus::NullPointer;
        }
        match analysis::stability_matrix(&unsafe { &*spec }.0, h_omega) {
            Ok(m) => {
                let flat = [m[0][0], m[0][1], m[1][0], m[1][1]];
                unsafe { std::ptr::copy_nonoverlapping(flat.as_ptr(), out, 4) };
                GalviStatus::Ok
            }
            Err(err) => status_of(&err),
        }
    })
}

/// Max-norm defect of a forward step followed by a backward step from
/// `(q0, p0)`; near zero for time-reversible schemes.
#[no_mangle]
pub extern "C" fn galvi_reversibility_defect(
    spec: *const GalviSpec,
    system: *const GalviSystem,
    q0: *const f64,
    p0: *const f64,
    dim: usize,
    h: f64,
    out: *mut f64,
) -> GalviStatus {
    guarded(|| {
        if spec.is_null() || system.is_null() || q0.is_null() || p0.is_null() || out.is_null() {
            return GalviStatus::NullPointer;
        }
        let system = unsafe { &*system };
        if dim != system.0.dim() {
            return GalviStatus::InvalidArgument;
        }
        let point = PhasePoint::new(
            unsafe { std::slice::from_raw_parts(q0, dim) }.to_vec(),
            unsafe { std::slice::from_raw_parts(p0, dim) }.to_vec(),
        );
        match analysis::reversibility_defect(&unsafe { &*spec }.0, &system.0, &point, h) {
            Ok(defect) => {
                unsafe { *out = defect };
                GalviStatus::Ok
            }
            Err(err) => status_of(&err),
        }
    })
}
