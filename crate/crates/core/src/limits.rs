//! Numerical tolerances and dimension caps.

use std::sync::atomic::{AtomicUsize, Ordering};

/// Construction tolerance for hermiticity, positivity, trace, norm and POVM completeness.
pub const TOL: f64 = 1e-9;

/// Default cap on the ambient dimension of density-matrix operations.
pub const DENSITY_DIM_CAP: usize = 256;

/// Default cap on the ambient dimension of pure-state operations.
pub const PURE_DIM_CAP: usize = 4096;

// 0 means "use the default"; set once by front ends (`--dim-cap`).
static DENSITY_CAP_OVERRIDE: AtomicUsize = AtomicUsize::new(0);
static PURE_CAP_OVERRIDE: AtomicUsize = AtomicUsize::new(0);

/// Overrides the density-matrix cap for the whole process. The pure-state cap is
/// raised to at least the square of the new value's dimension budget.
pub fn set_dim_cap_override(density_cap: usize) {
    DENSITY_CAP_OVERRIDE.store(density_cap, Ordering::Relaxed);
    PURE_CAP_OVERRIDE.store(
        density_cap.saturating_mul(16).max(PURE_DIM_CAP),
        Ordering::Relaxed,
    );
}

pub fn density_cap() -> usize {
    match DENSITY_CAP_OVERRIDE.load(Ordering::Relaxed) {
        0 => DENSITY_DIM_CAP,
        v => v,
    }
}

pub fn pure_cap() -> usize {
    match PURE_CAP_OVERRIDE.load(Ordering::Relaxed) {
        0 => PURE_DIM_CAP,
        v => v,
    }
}

pub fn check_density_dim(what: &'static str, dim: usize) -> crate::Result<()> {
    let cap = density_cap();
    if dim > cap {
        return Err(crate::Error::DimensionCap { what, dim, cap });
    }
    Ok(())
}

pub fn check_pure_dim(what: &'static str, dim: usize) -> crate::Result<()> {
    let cap = pure_cap();
    if dim > cap {
        return Err(crate::Error::DimensionCap { what, dim, cap });
    }
    Ok(())
}
