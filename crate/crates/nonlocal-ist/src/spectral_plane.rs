//! Uniformized spectral plane: z ↦ (k, λ), regions and the involution.
//!
//! RealCut: branch points ±q0, λ² = k² − q0². ImaginaryCut: ±iq0,
//! λ² = k² + q0². All computation stays in z; the two-sheeted square root
//! is never evaluated.

use serde::{Deserialize, Serialize};

use crate::error::{IstError, Result};
use crate::model_config::{EquationSpec, SymmetryCase};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CutTopology {
    RealCut,
    ImaginaryCut,
}

impl CutTopology {
    pub fn for_case(case: SymmetryCase) -> Self {
        match case {
            SymmetryCase::Sinh0 | SymmetryCase::SinePi => CutTopology::RealCut,
            SymmetryCase::SinhPi | SymmetryCase::Sine0 => CutTopology::ImaginaryCut,
        }
    }

    /// k² − λ² = ±q0² as the sign ±1.
    pub fn kappa_sign(self) -> f64 {
        match self {
            CutTopology::RealCut => 1.0,
            CutTopology::ImaginaryCut => -1.0,
        }
    }
}

pub fn topology_for(spec: &EquationSpec) -> Result<CutTopology> {
    Ok(CutTopology::for_case(spec.case()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionTag {
    UpperAnalytic,
    LowerAnalytic,
    Contour,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub z: C64,
    pub q0: f64,
    pub topology: CutTopology,
}

/// (k, λ) without constructing a point; callers guarantee z ≠ 0.
#[inline]
pub fn k_lambda_raw(z: C64, q0: f64, topology: CutTopology) -> (C64, C64) {
    let w = q0 * q0 / z;
    match topology {
        CutTopology::RealCut => ((z + w) * 0.5, (z - w) * 0.5),
        CutTopology::ImaginaryCut => ((z - w) * 0.5, (z + w) * 0.5),
    }
}

#[inline]
pub fn involution_raw(z: C64, q0: f64, topology: CutTopology) -> C64 {
    match topology {
        CutTopology::RealCut => q0 * q0 / z,
        CutTopology::ImaginaryCut => -q0 * q0 / z,
    }
}

/// Region of z by geometry, with tolerance 1e-12·max(1,|z|) on the contour.
pub fn region_of(z: C64, q0: f64, topology: CutTopology) -> RegionTag {
    let tol = 1e-12 * z.norm().max(1.0);
    let (_, lam) = k_lambda_raw(z, q0, topology);
    let on_contour = match topology {
        CutTopology::RealCut => z.im.abs() <= tol,
        CutTopology::ImaginaryCut => z.im.abs() <= tol || (z.norm() - q0).abs() <= tol,
    };
    if on_contour || lam.im.abs() <= tol {
        RegionTag::Contour
    } else if lam.im > 0.0 {
        RegionTag::UpperAnalytic
    } else {
        RegionTag::LowerAnalytic
    }
}

impl SpectralPoint {
    pub fn new(z: C64, q0: f64, topology: CutTopology) -> Result<Self> {
        if z == C64::new(0.0, 0.0) || !z.is_finite() {
            return Err(IstError::ZeroSpectralPoint);
        }
        Ok(SpectralPoint { z, q0, topology })
    }

    pub fn k_lambda(&self) -> (C64, C64) {
        k_lambda_raw(self.z, self.q0, self.topology)
    }

    pub fn k(&self) -> C64 {
        self.k_lambda().0
    }

    pub fn lambda(&self) -> C64 {
        self.k_lambda().1
    }

    pub fn classify(&self) -> RegionTag {
        region_of(self.z, self.q0, self.topology)
    }

    pub fn involution(&self) -> SpectralPoint {
        SpectralPoint { z: involution_raw(self.z, self.q0, self.topology), ..*self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_config::{EquationSpec, PhaseSum};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn pt(re: f64, im: f64, q0: f64, top: CutTopology) -> SpectralPoint {
        SpectralPoint::new(C64::new(re, im), q0, top).unwrap()
    }

    #[test]
    fn topology_table() {
        let s = EquationSpec::sinh_gordon(2.0, 1.0, 1.0);
        assert_eq!(topology_for(&s).unwrap(), CutTopology::RealCut);
        let s = EquationSpec::sinh_gordon_pi(2.0, PI / 2.0, 1.0);
        assert_eq!(topology_for(&s).unwrap(), CutTopology::ImaginaryCut);
        let s = EquationSpec::sine_gordon(2.0, 1.0, 1.0);
        assert_eq!(topology_for(&s).unwrap(), CutTopology::RealCut);
        let s = EquationSpec::rst_nls(-1, 2.0, 0.0, PhaseSum::Zero);
        assert_eq!(topology_for(&s).unwrap(), CutTopology::ImaginaryCut);
    }

    #[test]
    fn k_lambda_examples() {
        let (k, l) = pt(2.0, 0.0, 2.0, CutTopology::RealCut).k_lambda();
        assert!((k - C64::from(2.0)).norm() < 1e-15 && l.norm() < 1e-15);
        let (k, l) = pt(0.0, 2.0, 2.0, CutTopology::RealCut).k_lambda();
        assert!(k.norm() < 1e-15 && (l - C64::new(0.0, 2.0)).norm() < 1e-15);
        let (k, l) = pt(0.0, 2.0, 2.0, CutTopology::ImaginaryCut).k_lambda();
        assert!((k - C64::new(0.0, 2.0)).norm() < 1e-15 && l.norm() < 1e-15);
        assert!(SpectralPoint::new(C64::new(0.0, 0.0), 1.0, CutTopology::RealCut).is_err());
    }

    #[test]
    fn classify_examples() {
        assert_eq!(pt(0.0, 2.0, 1.0, CutTopology::RealCut).classify(), RegionTag::UpperAnalytic);
        let z = C64::from_polar(0.5, PI / 4.0);
        assert_eq!(pt(z.re, z.im, 1.0, CutTopology::ImaginaryCut).classify(), RegionTag::LowerAnalytic);
        assert_eq!(pt(3.0, 0.0, 1.0, CutTopology::RealCut).classify(), RegionTag::Contour);
        let c = C64::from_polar(2.0, 1.0);
        assert_eq!(pt(c.re, c.im, 2.0, CutTopology::ImaginaryCut).classify(), RegionTag::Contour);
    }

    #[test]
    fn involution_examples() {
        let z = C64::from_polar(2.0, 0.7);
        let p = pt(z.re, z.im, 2.0, CutTopology::RealCut).involution();
        assert!((p.z - C64::from_polar(2.0, -0.7)).norm() < 1e-15);
        let p = pt(0.0, 4.0, 2.0, CutTopology::ImaginaryCut).involution();
        assert!((p.z - C64::new(0.0, 1.0)).norm() < 1e-15);
    }

    fn top_strategy() -> impl Strategy<Value = CutTopology> {
        prop_oneof![Just(CutTopology::RealCut), Just(CutTopology::ImaginaryCut)]
    }

    proptest! {
        #[test]
        fn involution_preserves_k_flips_lambda(r in 0.05f64..20.0, a in -3.1f64..3.1, q0 in 0.2f64..5.0, top in top_strategy()) {
            let p = SpectralPoint::new(C64::from_polar(r * q0, a), q0, top).unwrap();
            let (k, l) = p.k_lambda();
            let (ki, li) = p.involution().k_lambda();
            let scale = k.norm().max(l.norm()).max(1e-300);
            prop_assert!((k - ki).norm() <= 1e-14 * scale.max(q0));
            prop_assert!((l + li).norm() <= 1e-14 * scale.max(q0));
            prop_assert!((p.involution().involution().z - p.z).norm() <= 1e-14 * p.z.norm());
        }

        #[test]
        fn uniformization_identities(r in 0.05f64..20.0, a in -3.1f64..3.1, q0 in 0.2f64..5.0, top in top_strategy()) {
            let p = SpectralPoint::new(C64::from_polar(r * q0, a), q0, top).unwrap();
            let (k, l) = p.k_lambda();
            prop_assert!((k + l - p.z).norm() <= 1e-14 * p.z.norm().max(q0));
            let lhs = k * k - l * l;
            prop_assert!((lhs - top.kappa_sign() * q0 * q0).norm() <= 1e-12 * (k.norm_sqr() + l.norm_sqr()).max(q0 * q0));
        }

        #[test]
        fn region_sign_matches_lambda(r in 0.05f64..20.0, a in -3.1f64..3.1, q0 in 0.2f64..5.0, top in top_strategy()) {
            let p = SpectralPoint::new(C64::from_polar(r * q0, a), q0, top).unwrap();
            let tag = p.classify();
            let l = p.lambda();
            match tag {
                RegionTag::UpperAnalytic => prop_assert!(l.im > 0.0),
                RegionTag::LowerAnalytic => prop_assert!(l.im < 0.0),
                RegionTag::Contour => {}
            }
            let ti = p.involution().classify();
            match (tag, ti) {
                (RegionTag::UpperAnalytic, t) => prop_assert_eq!(t, RegionTag::LowerAnalytic),
                (RegionTag::LowerAnalytic, t) => prop_assert_eq!(t, RegionTag::UpperAnalytic),
                _ => {}
            }
        }
    }
}
