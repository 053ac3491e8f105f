//! Equation selection, boundary data and the asymptotic matrices Q±(t).

use std::f64::consts::{PI, TAU};

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{IstError, Result};
use crate::{C64, I};

const PHASE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquationKind {
    #[serde(alias = "sinh", alias = "sinh-gordon", alias = "SinhGordon")]
    SinhGordon,
    #[serde(alias = "sine", alias = "sine-gordon", alias = "SineGordon")]
    SineGordon,
    #[serde(alias = "nls", alias = "rst-nls", alias = "RstNls")]
    RstNls,
}

impl EquationKind {
    pub fn name(self) -> &'static str {
        match self {
            EquationKind::SinhGordon => "sinh_gordon",
            EquationKind::SineGordon => "sine_gordon",
            EquationKind::RstNls => "rst_nls",
        }
    }

    pub fn is_gordon(self) -> bool {
        !matches!(self, EquationKind::RstNls)
    }

    fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "sinh_gordon" | "sinh" | "sinhgordon" => Ok(EquationKind::SinhGordon),
            "sine_gordon" | "sine" | "sinegordon" => Ok(EquationKind::SineGordon),
            "rst_nls" | "nls" | "rstnls" => Ok(EquationKind::RstNls),
            other => Err(IstError::Parse(format!("unknown kind '{other}'"))),
        }
    }
}

/// Which side of the line a background refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

/// θ₊+θ₋ reduced mod 2π.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseSum {
    Zero,
    Pi,
}

/// The four (σ, θ₊+θ₋) combinations; each fixes the cut topology, the
/// involution and the discrete-data symmetry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetryCase {
    /// σ = +1, θ₊+θ₋ = 0
    Sinh0,
    /// σ = +1, θ₊+θ₋ = π
    SinhPi,
    /// σ = −1, θ₊+θ₋ = π
    SinePi,
    /// σ = −1, θ₊+θ₋ = 0
    Sine0,
}

impl SymmetryCase {
    pub fn from_parts(sigma: i8, sum: PhaseSum) -> Self {
        match (sigma > 0, sum) {
            (true, PhaseSum::Zero) => SymmetryCase::Sinh0,
            (true, PhaseSum::Pi) => SymmetryCase::SinhPi,
            (false, PhaseSum::Pi) => SymmetryCase::SinePi,
            (false, PhaseSum::Zero) => SymmetryCase::Sine0,
        }
    }

    pub fn sigma(self) -> i8 {
        match self {
            SymmetryCase::Sinh0 | SymmetryCase::SinhPi => 1,
            SymmetryCase::SinePi | SymmetryCase::Sine0 => -1,
        }
    }

    pub fn phase_sum(self) -> PhaseSum {
        match self {
            SymmetryCase::Sinh0 | SymmetryCase::Sine0 => PhaseSum::Zero,
            SymmetryCase::SinhPi | SymmetryCase::SinePi => PhaseSum::Pi,
        }
    }

    /// θ₋ implied by θ₊, normalized into [0, 2π).
    pub fn theta_minus(self, theta_plus: f64) -> f64 {
        match self.phase_sum() {
            PhaseSum::Zero => normalize_phase(-theta_plus),
            PhaseSum::Pi => normalize_phase(PI - theta_plus),
        }
    }

    /// Sinh-type cases have b_j² = −1, sine-type b_j² = +1.
    pub fn is_sinh_type(self) -> bool {
        self.sigma() > 0
    }

    pub fn name(self) -> &'static str {
        match self {
            SymmetryCase::Sinh0 => "sinh0",
            SymmetryCase::SinhPi => "sinhpi",
            SymmetryCase::SinePi => "sinepi",
            SymmetryCase::Sine0 => "sine0",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sinh0" => Ok(SymmetryCase::Sinh0),
            "sinhpi" => Ok(SymmetryCase::SinhPi),
            "sinepi" => Ok(SymmetryCase::SinePi),
            "sine0" => Ok(SymmetryCase::Sine0),
            other => Err(IstError::Parse(format!("unknown case '{other}'"))),
        }
    }
}

pub fn normalize_phase(th: f64) -> f64 {
    let r = th.rem_euclid(TAU);
    if (TAU - r).abs() < PHASE_TOL { 0.0 } else { r }
}

/// Classify a phase sum mod 2π, or `None` outside {0, π}.
pub fn classify_phase_sum(sum: f64) -> Option<PhaseSum> {
    let r = normalize_phase(sum);
    if r.abs() < PHASE_TOL || (TAU - r).abs() < PHASE_TOL {
        Some(PhaseSum::Zero)
    } else if (r - PI).abs() < PHASE_TOL {
        Some(PhaseSum::Pi)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquationSpec {
    pub kind: EquationKind,
    pub sigma: i8,
    pub q0: f64,
    pub theta_plus: f64,
    pub theta_minus: f64,
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticMatrices {
    pub q_plus: Matrix2<C64>,
    pub q_minus: Matrix2<C64>,
}

impl AsymptoticMatrices {
    /// J = diag(−1, 1).
    pub fn j() -> Matrix2<C64> {
        Matrix2::new(C64::from(-1.0), C64::from(0.0), C64::from(0.0), C64::from(1.0))
    }
}

impl EquationSpec {
    pub fn sinh_gordon(q0: f64, theta_plus: f64, alpha: f64) -> Self {
        EquationSpec {
            kind: EquationKind::SinhGordon,
            sigma: 1,
            q0,
            theta_plus: normalize_phase(theta_plus),
            theta_minus: normalize_phase(-theta_plus),
            alpha,
            beta: 0.0,
        }
    }

    /// Sinh-Gordon with θ₊+θ₋ = π.
    pub fn sinh_gordon_pi(q0: f64, theta_plus: f64, alpha: f64) -> Self {
        EquationSpec { theta_minus: normalize_phase(PI - theta_plus), ..Self::sinh_gordon(q0, theta_plus, alpha) }
    }

    pub fn sine_gordon(q0: f64, theta_plus: f64, alpha: f64) -> Self {
        EquationSpec {
            kind: EquationKind::SineGordon,
            sigma: -1,
            q0,
            theta_plus: normalize_phase(theta_plus),
            theta_minus: normalize_phase(PI - theta_plus),
            alpha,
            beta: 0.0,
        }
    }

    /// Sine-Gordon with θ₊+θ₋ = 0.
    pub fn sine_gordon_zero(q0: f64, theta_plus: f64, alpha: f64) -> Self {
        EquationSpec { theta_minus: normalize_phase(-theta_plus), ..Self::sine_gordon(q0, theta_plus, alpha) }
    }

    /// RST-NLS with α fixed by the background law.
    pub fn rst_nls(sigma: i8, q0: f64, theta_plus: f64, sum: PhaseSum) -> Self {
        let case = SymmetryCase::from_parts(sigma, sum);
        let s = f64::from(sigma.signum());
        let alpha = match sum {
            PhaseSum::Zero => 2.0 * s * q0 * q0,
            PhaseSum::Pi => -2.0 * s * q0 * q0,
        };
        EquationSpec {
            kind: EquationKind::RstNls,
            sigma: sigma.signum(),
            q0,
            theta_plus: normalize_phase(theta_plus),
            theta_minus: case.theta_minus(theta_plus),
            alpha,
            beta: 0.0,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn sigma_f(&self) -> f64 {
        f64::from(self.sigma)
    }

    pub fn phase_sum(&self) -> Result<PhaseSum> {
        let sum = self.theta_plus + self.theta_minus;
        classify_phase_sum(sum).ok_or(IstError::PhaseSumError(normalize_phase(sum)))
    }

    pub fn case(&self) -> Result<SymmetryCase> {
        Ok(SymmetryCase::from_parts(self.sigma, self.phase_sum()?))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q0.is_finite() && self.q0 > 0.0) {
            return Err(IstError::InvalidParameter(format!("q0 = {} must be > 0", self.q0)));
        }
        for (name, v) in [
            ("theta_plus", self.theta_plus),
            ("theta_minus", self.theta_minus),
            ("alpha", self.alpha),
            ("beta", self.beta),
        ] {
            if !v.is_finite() {
                return Err(IstError::InvalidParameter(format!("{name} is not finite")));
            }
        }
        if self.sigma != 1 && self.sigma != -1 {
            return Err(IstError::InvalidParameter(format!("sigma = {} must be ±1", self.sigma)));
        }
        match self.kind {
            EquationKind::SinhGordon if self.sigma != 1 => {
                return Err(IstError::SigmaMismatch { kind: "sinh_gordon", expected: 1, got: self.sigma })
            }
            EquationKind::SineGordon if self.sigma != -1 => {
                return Err(IstError::SigmaMismatch { kind: "sine_gordon", expected: -1, got: self.sigma })
            }
            _ => {}
        }
        let sum = self.phase_sum()?;
        if self.kind == EquationKind::RstNls {
            let s = self.sigma_f();
            let expected = match sum {
                PhaseSum::Zero => 2.0 * s * self.q0 * self.q0,
                PhaseSum::Pi => -2.0 * s * self.q0 * self.q0,
            };
            if (self.alpha - expected).abs() > 1e-10 * expected.abs().max(1.0) {
                return Err(IstError::AlphaMismatch { got: self.alpha, expected });
            }
            // C0 = q+(t) q-(-t) = q0² e^{i(θ₊+θ₋)} must be real.
            let c0 = self.q0 * self.q0 * C64::from_polar(1.0, self.theta_plus + self.theta_minus);
            if c0.im.abs() > 1e-10 * self.q0 * self.q0 {
                return Err(IstError::PhaseSumError(normalize_phase(self.theta_plus + self.theta_minus)));
            }
        }
        Ok(())
    }

    pub fn background(&self, side: Side, t: f64) -> C64 {
        let th = match side {
            Side::Plus => self.theta_plus,
            Side::Minus => self.theta_minus,
        };
        C64::from_polar(self.q0, self.alpha * t + th)
    }

    pub fn q_plus(&self, t: f64) -> C64 {
        self.background(Side::Plus, t)
    }

    pub fn q_minus(&self, t: f64) -> C64 {
        self.background(Side::Minus, t)
    }

    /// (2,1) entry of Q₊(t): σ q0 e^{i(−αt+θ₋)}.
    pub fn r_plus(&self, t: f64) -> C64 {
        self.sigma_f() * C64::from_polar(self.q0, -self.alpha * t + self.theta_minus)
    }

    /// (2,1) entry of Q₋(t): σ q0 e^{i(−αt+θ₊)}.
    pub fn r_minus(&self, t: f64) -> C64 {
        self.sigma_f() * C64::from_polar(self.q0, -self.alpha * t + self.theta_plus)
    }

    pub fn asymptotic(&self, t: f64) -> AsymptoticMatrices {
        let z = C64::from(0.0);
        AsymptoticMatrices {
            q_plus: Matrix2::new(z, self.q_plus(t), self.r_plus(t), z),
            q_minus: Matrix2::new(z, self.q_minus(t), self.r_minus(t), z),
        }
    }

    /// σ q0² e^{i(θ₊+θ₋)}: the product of off-diagonal entries of Q±.
    pub fn offdiag_product(&self) -> C64 {
        self.sigma_f() * self.q0 * self.q0 * (I * (self.theta_plus + self.theta_minus)).exp()
    }

    /// Parse the flat `key = value` format (also accepts `key: value`;
    /// `#` starts a comment). θ₋ defaults from the phase-sum key `phase_sum`
    /// (0 or pi) when absent; σ defaults from the kind for Gordon equations.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut sigma = None;
        let mut q0 = None;
        let mut tp = None;
        let mut tm = None;
        let mut alpha = None;
        let mut beta = 0.0;
        let mut phase_sum = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| IstError::Parse(format!("line {}: expected key = value", lineno + 1)))?;
            let key = k.trim().to_ascii_lowercase();
            let val = v.trim();
            let num = |s: &str| parse_real(s).map_err(|e| IstError::Parse(format!("line {}: {e}", lineno + 1)));
            match key.as_str() {
                "kind" => kind = Some(EquationKind::parse(val)?),
                "sigma" => sigma = Some(num(val)? as i8),
                "q0" => q0 = Some(num(val)?),
                "theta_plus" => tp = Some(num(val)?),
                "theta_minus" => tm = Some(num(val)?),
                "alpha" => alpha = Some(num(val)?),
                "beta" => beta = num(val)?,
                "phase_sum" => phase_sum = Some(num(val)?),
                other => return Err(IstError::Parse(format!("line {}: unknown key '{other}'", lineno + 1))),
            }
        }
        let kind = kind.ok_or_else(|| IstError::Parse("missing key 'kind'".into()))?;
        let sigma = match (sigma, kind) {
            (Some(s), _) => s,
            (None, EquationKind::SinhGordon) => 1,
            (None, EquationKind::SineGordon) => -1,
            (None, EquationKind::RstNls) => return Err(IstError::Parse("missing key 'sigma'".into())),
        };
        let q0 = q0.ok_or_else(|| IstError::Parse("missing key 'q0'".into()))?;
        let tp = tp.ok_or_else(|| IstError::Parse("missing key 'theta_plus'".into()))?;
        let tm = match (tm, phase_sum) {
            (Some(t), _) => t,
            (None, Some(s)) => s - tp,
            (None, None) => match kind {
                EquationKind::SinhGordon => -tp,
                EquationKind::SineGordon => PI - tp,
                EquationKind::RstNls => return Err(IstError::Parse("missing key 'theta_minus'".into())),
            },
        };
        let alpha = match alpha {
            Some(a) => a,
            None if kind == EquationKind::RstNls => {
                let sum = classify_phase_sum(tp + tm).ok_or(IstError::PhaseSumError(normalize_phase(tp + tm)))?;
                EquationSpec::rst_nls(sigma, q0, tp, sum).alpha
            }
            None => return Err(IstError::Parse("missing key 'alpha'".into())),
        };
        let spec = EquationSpec {
            kind,
            sigma,
            q0,
            theta_plus: normalize_phase(tp),
            theta_minus: normalize_phase(tm),
            alpha,
            beta,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut spec: EquationSpec = serde_json::from_str(text).map_err(|e| IstError::Parse(e.to_string()))?;
        spec.theta_plus = normalize_phase(spec.theta_plus);
        spec.theta_minus = normalize_phase(spec.theta_minus);
        spec.validate()?;
        Ok(spec)
    }

    /// Dispatch on content: a leading `{` means JSON.
    pub fn from_config_str(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') { Self::from_json(text) } else { Self::from_kv(text) }
    }
}

/// Real literal with optional `pi` forms: `pi`, `pi/3`, `2pi/3`, `2*pi/3`.
pub fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim().to_ascii_lowercase().replace(' ', "");
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    if let Some(pos) = t.find("pi") {
        let (pre, post) = (&t[..pos], &t[pos + 2..]);
        let pre = pre.trim_end_matches('*');
        let coef = match pre {
            "" => 1.0,
            "-" => -1.0,
            p => p.parse::<f64>().map_err(|_| format!("bad number '{s}'"))?,
        };
        let div = match post {
            "" => 1.0,
            p => p
                .strip_prefix('/')
                .and_then(|d| d.parse::<f64>().ok())
                .ok_or_else(|| format!("bad number '{s}'"))?,
        };
        return Ok(coef * PI / div);
    }
    Err(format!("bad number '{s}'"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nls_case1_spec_validates() {
        let spec = EquationSpec {
            kind: EquationKind::RstNls,
            sigma: 1,
            q0: 2.0,
            theta_plus: PI / 3.0,
            theta_minus: normalize_phase(-PI / 3.0),
            alpha: 8.0,
            beta: 0.0,
        };
        assert!(spec.validate().is_ok());
        assert_eq!(EquationSpec::rst_nls(1, 2.0, PI / 3.0, PhaseSum::Zero).alpha, 8.0);
    }

    #[test]
    fn sinh_with_negative_sigma_rejected() {
        let mut spec = EquationSpec::sinh_gordon(2.0, 1.0, 1.0);
        spec.sigma = -1;
        assert!(matches!(spec.validate(), Err(IstError::SigmaMismatch { .. })));
    }

    #[test]
    fn bad_phase_sum_rejected() {
        let spec = EquationSpec {
            kind: EquationKind::RstNls,
            sigma: 1,
            q0: 2.0,
            theta_plus: PI / 4.0,
            theta_minus: PI / 4.0,
            alpha: 8.0,
            beta: 0.0,
        };
        assert!(matches!(spec.validate(), Err(IstError::PhaseSumError(_))));
    }

    #[test]
    fn alpha_mismatch_rejected() {
        let mut spec = EquationSpec::rst_nls(-1, 2.0, 0.0, PhaseSum::Zero);
        assert_eq!(spec.alpha, -8.0);
        spec.alpha = 8.0;
        assert!(matches!(spec.validate(), Err(IstError::AlphaMismatch { .. })));
    }

    #[test]
    fn backgrounds() {
        let spec = EquationSpec::sinh_gordon(2.0, PI / 3.0, 1.0);
        assert!((spec.background(Side::Plus, 0.0) - C64::from_polar(2.0, PI / 3.0)).norm() < 1e-15);
        assert!((spec.background(Side::Minus, 0.0) - C64::from_polar(2.0, -PI / 3.0)).norm() < 1e-15);
        assert!((spec.background(Side::Plus, PI) - C64::from_polar(2.0, PI + PI / 3.0)).norm() < 1e-14);
    }

    #[test]
    fn cases_from_specs() {
        assert_eq!(EquationSpec::sinh_gordon(2.0, 1.0, 1.0).case().unwrap(), SymmetryCase::Sinh0);
        assert_eq!(EquationSpec::sinh_gordon_pi(2.0, PI / 2.0, 1.0).case().unwrap(), SymmetryCase::SinhPi);
        assert_eq!(EquationSpec::sine_gordon(2.0, 1.0, 1.0).case().unwrap(), SymmetryCase::SinePi);
        assert_eq!(EquationSpec::sine_gordon_zero(2.0, 0.0, 1.0).case().unwrap(), SymmetryCase::Sine0);
    }

    #[test]
    fn kv_and_json_agree() {
        let kv = "kind = rst_nls\nsigma = 1\nq0 = 2\ntheta_plus = pi/3\ntheta_minus = -pi/3 # comment\nalpha = 8\n";
        let a = EquationSpec::from_kv(kv).unwrap();
        let js = format!(
            r#"{{"kind":"rst_nls","sigma":1,"q0":2.0,"theta_plus":{},"theta_minus":{},"alpha":8.0}}"#,
            PI / 3.0,
            -PI / 3.0
        );
        let b = EquationSpec::from_json(&js).unwrap();
        assert_eq!(a.kind, b.kind);
        assert!((a.theta_minus - b.theta_minus).abs() < 1e-15);
        assert!(EquationSpec::from_config_str(&js).is_ok());
    }

    #[test]
    fn kv_rejects_unknown_key() {
        assert!(EquationSpec::from_kv("kind = sinh\nfoo = 1\n").is_err());
    }

    #[test]
    fn offdiag_product_matches_matrices() {
        let spec = EquationSpec::sine_gordon(2.0, 0.7, 1.3);
        for t in [-1.0, 0.0, 2.5] {
            let m = spec.asymptotic(t);
            for q in [m.q_plus, m.q_minus] {
                assert!((q[(0, 1)] * q[(1, 0)] - spec.offdiag_product()).norm() < 1e-13);
            }
        }
        assert!((spec.offdiag_product() - C64::from(4.0)).norm() < 1e-13);
    }

    fn gordon_spec(which: usize, q0: f64, th: f64, alpha: f64) -> EquationSpec {
        match which {
            0 => EquationSpec::sinh_gordon(q0, th, alpha),
            1 => EquationSpec::sinh_gordon_pi(q0, th, alpha),
            2 => EquationSpec::sine_gordon(q0, th, alpha),
            _ => EquationSpec::sine_gordon_zero(q0, th, alpha),
        }
    }

    proptest! {
        #[test]
        fn offdiag_product_is_real_constant(
            q0 in 0.1f64..5.0, th in 0.05f64..6.2, alpha in -3.0f64..3.0, t in -10.0f64..10.0, which in 0usize..4
        ) {
            let spec = gordon_spec(which, q0, th, alpha);
            prop_assume!(spec.validate().is_ok());
            let want = spec.sigma_f() * q0 * q0 * C64::from_polar(1.0, spec.theta_plus + spec.theta_minus);
            prop_assert!(want.im.abs() <= 1e-12 * q0 * q0);
            prop_assert!((want.re.abs() - q0 * q0).abs() <= 1e-12 * q0 * q0);
            let m = spec.asymptotic(t);
            for q in [m.q_plus, m.q_minus] {
                prop_assert!((q[(0, 1)] * q[(1, 0)] - want).norm() <= 1e-12 * q0 * q0);
            }
        }

        #[test]
        fn validate_is_idempotent(
            q0 in -1.0f64..5.0, th in -1.0f64..7.0, tm in -1.0f64..7.0, alpha in -3.0f64..3.0, sigma in -1i8..=1, which in 0usize..3
        ) {
            let kind = [EquationKind::SinhGordon, EquationKind::SineGordon, EquationKind::RstNls][which];
            let spec = EquationSpec { kind, sigma, q0, theta_plus: th, theta_minus: tm, alpha, beta: 0.0 };
            let before = spec;
            let first = spec.validate();
            prop_assert_eq!(first, spec.validate());
            prop_assert_eq!(spec, before);
        }
    }
}
