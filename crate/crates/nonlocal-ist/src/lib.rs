//! Inverse scattering for the nonlocal reverse space-time sine-Gordon,
//! sinh-Gordon and NLS equations on a nonzero background.
//!
//! The pipeline runs `model_config` → `spectral_plane` → `direct_scattering`
//! → `scattering_data` → `inverse_reflectionless`, with `closed_form`
//! providing explicit solutions and `verify` checking everything against the
//! governing equations.

pub mod closed_form;
pub mod direct_scattering;
pub mod error;
pub mod inverse_reflectionless;
pub mod model_config;
mod quad;
pub mod scattering_data;
pub mod spectral_plane;
pub mod verify;

pub use error::{IstError, Result};
pub use num_complex::Complex64 as C64;

pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Cap rayon parallelism from `NONLOCAL_IST_THREADS` (0 or unset = auto).
pub fn init_threads_from_env() {
    if let Ok(v) = std::env::var("NONLOCAL_IST_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}
