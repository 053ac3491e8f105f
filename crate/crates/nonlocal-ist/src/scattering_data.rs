//! Scattering data: discrete eigenvalues with norming constants, optional
//! reflection coefficient on the contour Σ, trace formulas for a and ā, the
//! reflectionless constraint, and time evolution.
//!
//! Σ is oriented as the boundary of the upper analytic region: the real
//! axis left to right, and for the imaginary cut additionally the segment
//! [−q0, q0] from q0 to −q0, the upper half circle clockwise and the lower
//! half circle anticlockwise.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::closed_form::SolutionId;
use crate::direct_scattering::{extract_b, find_eigenvalues, PotentialSample, SearchRegion};
use crate::error::{IstError, Result};
use crate::model_config::{normalize_phase, EquationKind, EquationSpec, PhaseSum, SymmetryCase};
use crate::quad;
use crate::spectral_plane::{involution_raw, k_lambda_raw, region_of, CutTopology, RegionTag, SpectralPoint};
use crate::{C64, I};

/// Relative tolerance of the reflectionless constraint.
pub const CONSTRAINT_TOL: f64 = 1e-10;
const QUAD_TOL: f64 = 1e-13;

pub type ReflectionFn = Arc<dyn Fn(C64) -> C64 + Send + Sync>;

#[derive(Clone, Default)]
pub enum Reflection {
    #[default]
    None,
    /// Real-axis samples [ξ, Re b, Im b] sorted by ξ, and circle samples
    /// [φ, Re b, Im b] with φ ∈ [0, 2π) sorted by φ (imaginary cut only).
    /// b is linearly interpolated and vanishes outside the sampled range.
    Sampled { real: Vec<[f64; 3]>, circle: Vec<[f64; 3]> },
    /// b(ξ) for ξ on Σ.
    Analytic(ReflectionFn),
}

impl std::fmt::Debug for Reflection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Reflection::None => write!(f, "None"),
            Reflection::Sampled { real, circle } => write!(f, "Sampled({} real, {} circle)", real.len(), circle.len()),
            Reflection::Analytic(_) => write!(f, "Analytic"),
        }
    }
}

impl Reflection {
    pub fn is_none(&self) -> bool {
        match self {
            Reflection::None => true,
            Reflection::Sampled { real, circle } => real.is_empty() && circle.is_empty(),
            Reflection::Analytic(_) => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScatteringData {
    pub case: SymmetryCase,
    pub q0: f64,
    pub theta_plus: f64,
    /// Time the norming constants refer to.
    pub t: f64,
    /// z_j in the upper analytic region.
    pub zeros: Vec<C64>,
    /// z̄_j = ι(z_j) in the lower analytic region.
    pub zeros_bar: Vec<C64>,
    pub b: Vec<C64>,
    pub bbar: Vec<C64>,
    pub reflection: Reflection,
}

/// Which sign of the product constraint ∏ z_j = ±T holds, and the relative
/// defect of that branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintReport {
    pub sign: i8,
    pub defect: f64,
}

/// b_j for δ = +1: i for sinh-type cases, 1 for sine-type.
pub fn unit_norming(case: SymmetryCase) -> C64 {
    if case.is_sinh_type() { I } else { C64::from(1.0) }
}

/// a(ι(z)) = ε e^{2iθ₊} ā(z): ε = +1 for sum 0, −1 for sum π.
pub fn involution_sign(case: SymmetryCase) -> f64 {
    match case.phase_sum() {
        PhaseSum::Zero => 1.0,
        PhaseSum::Pi => -1.0,
    }
}

/// Exponent ω(z) with b(z, t) = b(z, 0) e^{ω(z) t}; b̄ evolves with −ω(z̄).
pub fn evolution_exponent(spec: &EquationSpec, z: C64) -> Result<C64> {
    let top = CutTopology::for_case(spec.case()?);
    let (k, lam) = k_lambda_raw(z, spec.q0, top);
    let scale = spec.q0.max(1.0);
    match spec.kind {
        EquationKind::SinhGordon | EquationKind::SineGordon => {
            let a = spec.alpha;
            if a == 0.0 {
                return Ok(C64::from(0.0));
            }
            if spec.beta == 0.0 {
                if k.norm() < 1e-12 * scale {
                    return Err(IstError::KPole(format!("{z}")));
                }
                Ok(-I * (a - a * lam / k))
            } else {
                let d = k - spec.beta / 2.0;
                if d.norm() < 1e-12 * scale.max(spec.beta.abs()) {
                    return Err(IstError::KPole(format!("{z}")));
                }
                Ok(-I * a * (2.0 * k - 2.0 * lam - spec.beta) / (2.0 * d))
            }
        }
        EquationKind::RstNls => {
            let sgn = involution_sign(spec.case()?);
            let s = spec.sigma_f() * spec.q0 * spec.q0 * sgn;
            Ok(-2.0 * I * (s + 2.0 * lam * k))
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Wire {
    case: String,
    q0: f64,
    theta_plus: f64,
    #[serde(default)]
    t: f64,
    eigenvalues: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eigenvalues_bar: Option<Vec<[f64; 2]>>,
    b: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bbar: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    reflection: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    reflection_circle: Vec<[f64; 3]>,
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

fn unpair(p: &[f64; 2]) -> C64 {
    C64::new(p[0], p[1])
}

/// Linear interpolation in sorted samples [s, Re, Im]; zero outside unless
/// `periodic` (period 2π).
fn interp(samples: &[[f64; 3]], s: f64, periodic: bool) -> C64 {
    let n = samples.len();
    if n == 0 {
        return C64::from(0.0);
    }
    let val = |i: usize| C64::new(samples[i][1], samples[i][2]);
    let first = samples[0][0];
    let last = samples[n - 1][0];
    if periodic {
        let s = (s - first).rem_euclid(TAU) + first;
        if s > last || n == 1 {
            let span = first + TAU - last;
            if n == 1 || span <= 0.0 {
                return val(n - 1);
            }
            let w = (s - last) / span;
            return val(n - 1) * (1.0 - w) + val(0) * w;
        }
        return interp(samples, s, false);
    }
    if s < first || s > last {
        return C64::from(0.0);
    }
    let i = samples.partition_point(|p| p[0] <= s).clamp(1, n - 1);
    let (s0, s1) = (samples[i - 1][0], samples[i][0]);
    if s1 == s0 {
        return val(i);
    }
    let w = (s - s0) / (s1 - s0);
    val(i - 1) * (1.0 - w) + val(i) * w
}

impl ScatteringData {
    /// Data with z̄_j = ι(z_j) and b̄_j from the eigenvalue symmetry:
    /// b̄_j = −b_j (sinh-type) or b_j (sine-type).
    pub fn new(case: SymmetryCase, q0: f64, theta_plus: f64, zeros: Vec<C64>, b: Vec<C64>) -> Result<Self> {
        if !(q0 > 0.0 && q0.is_finite()) {
            return Err(IstError::InvalidParameter(format!("q0 = {q0}")));
        }
        if zeros.len() != b.len() {
            return Err(IstError::InvalidParameter(format!("{} eigenvalues but {} norming constants", zeros.len(), b.len())));
        }
        if zeros.iter().any(|z| *z == C64::from(0.0)) {
            return Err(IstError::ZeroSpectralPoint);
        }
        let top = CutTopology::for_case(case);
        let zeros_bar = zeros.iter().map(|&z| involution_raw(z, q0, top)).collect();
        let s = if case.is_sinh_type() { -1.0 } else { 1.0 };
        let bbar = b.iter().map(|&v| s * v).collect();
        Ok(ScatteringData {
            case,
            q0,
            theta_plus: normalize_phase(theta_plus),
            t: 0.0,
            zeros,
            zeros_bar,
            b,
            bbar,
            reflection: Reflection::None,
        })
    }

    /// Discrete data of a closed-form family at t = 0.
    pub fn for_solution(id: &SolutionId, spec: &EquationSpec) -> Result<Self> {
        let case = spec.case()?;
        let q0 = spec.q0;
        let u = unit_norming(case);
        let f = id.family;
        if f.case() != case {
            return Err(IstError::InvalidParameter(format!("family {} lives in case {}", f.slug(), f.case().name())));
        }
        if f.is_two_soliton() {
            let q1 = id.q1.ok_or_else(|| IstError::InvalidParameter("two-soliton needs q1".into()))?;
            if !(q1 > q0) {
                return Err(IstError::ParameterDomain(format!("q1 = {q1} must exceed q0 = {q0}")));
            }
            let zs = vec![C64::new(0.0, q1), C64::new(0.0, -q0 * q0 / q1)];
            let bs = vec![f64::from(id.d1) * u, f64::from(id.d2) * u];
            return ScatteringData::new(case, q0, spec.theta_plus, zs, bs);
        }
        let th = spec.theta_plus;
        let z = match case {
            SymmetryCase::Sinh0 => C64::from_polar(q0, th),
            SymmetryCase::SinePi => C64::from_polar(q0, th + PI / 2.0),
            _ => unreachable!("1-soliton families are real-cut"),
        };
        let d = f.fixed_delta().unwrap_or(id.d1);
        ScatteringData::new(case, q0, th, vec![z], vec![f64::from(d) * u])
    }

    /// Discrete data measured from a potential at t = 0: zeros of a in the
    /// default search region and b_j from the Jost functions; z̄_j and b̄_j
    /// follow from the symmetries.
    pub fn from_potential(p: &PotentialSample) -> Result<Self> {
        let region = SearchRegion::default_for(p.spec.q0, p.topology);
        let zs = find_eigenvalues(p, 0.0, &region)?;
        let bs = zs
            .iter()
            .map(|&z| extract_b(p, &SpectralPoint::new(z, p.spec.q0, p.topology)?, 0.0))
            .collect::<Result<Vec<_>>>()?;
        ScatteringData::new(p.spec.case()?, p.spec.q0, p.spec.theta_plus, zs, bs)
    }

    pub fn topology(&self) -> CutTopology {
        CutTopology::for_case(self.case)
    }

    pub fn len(&self) -> usize {
        self.zeros.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeros.is_empty()
    }

    pub fn is_reflectionless(&self) -> bool {
        self.reflection.is_none()
    }

    /// max_j |b_j² ∓ 1| against b² = −1 (sinh) or +1 (sine).
    pub fn b_square_defect(&self) -> f64 {
        let target = if self.case.is_sinh_type() { -1.0 } else { 1.0 };
        self.b.iter().map(|b| (b * b - target).norm()).fold(0.0, f64::max)
    }

    /// max_j |b_j ± b̄_j|: b̄ = −b for sinh-type, b̄ = b for sine-type.
    pub fn pairing_defect(&self) -> f64 {
        let s = if self.case.is_sinh_type() { 1.0 } else { -1.0 };
        self.b.iter().zip(&self.bbar).map(|(b, bb)| (b + s * bb).norm()).fold(0.0, f64::max)
    }

    /// T in ∏ z_j = ±T.
    pub fn constraint_target(&self) -> C64 {
        let j = self.len() as i32;
        let base = C64::from_polar(self.q0.powi(j), self.theta_plus);
        match self.case {
            SymmetryCase::Sinh0 => base,
            SymmetryCase::SinhPi => C64::from_polar(1.0, PI * f64::from(j + 1) / 2.0) * base,
            SymmetryCase::SinePi => I * base,
            SymmetryCase::Sine0 => I.powi(j) * base,
        }
    }

    /// Structural checks (pairing, regions, distinctness) and the
    /// reflectionless constraint.
    pub fn validate(&self) -> Result<ConstraintReport> {
        let n = self.len();
        if self.zeros_bar.len() != n || self.b.len() != n || self.bbar.len() != n {
            return Err(IstError::InvalidParameter("eigenvalue and norming-constant counts differ".into()));
        }
        let top = self.topology();
        if top == CutTopology::ImaginaryCut && n == 1 {
            return Err(IstError::ImproperEigenvalue(
                "a single eigenvalue cannot satisfy the constraint with an imaginary cut".into(),
            ));
        }
        for (j, (&z, &zb)) in self.zeros.iter().zip(&self.zeros_bar).enumerate() {
            if z == C64::from(0.0) || !z.is_finite() {
                return Err(IstError::ZeroSpectralPoint);
            }
            if top == CutTopology::ImaginaryCut && (z.norm() - self.q0).abs() <= 1e-9 * self.q0 {
                return Err(IstError::ImproperEigenvalue(format!("z_{j} = {z} lies on |z| = q0")));
            }
            if region_of(z, self.q0, top) != RegionTag::UpperAnalytic {
                return Err(IstError::ImproperEigenvalue(format!("z_{j} = {z} is not in the upper analytic region")));
            }
            if (zb - involution_raw(z, self.q0, top)).norm() > 1e-10 * zb.norm().max(self.q0) {
                return Err(IstError::ImproperEigenvalue(format!("z̄_{j} = {zb} is not ι(z_{j})")));
            }
            for (l, &zl) in self.zeros.iter().enumerate().take(j) {
                if (z - zl).norm() <= 1e-12 * z.norm() {
                    return Err(IstError::RepeatedZero(l.max(j)));
                }
            }
        }
        self.constraint()
    }

    /// ∏ z_j = ±T with relative tolerance [`CONSTRAINT_TOL`].
    pub fn constraint(&self) -> Result<ConstraintReport> {
        if !self.is_reflectionless() {
            return Err(IstError::NotReflectionless);
        }
        let p: C64 = self.zeros.iter().product();
        let t = self.constraint_target();
        let dp = (p - t).norm() / t.norm();
        let dm = (p + t).norm() / t.norm();
        let (sign, defect) = if dp <= dm { (1, dp) } else { (-1, dm) };
        if defect > CONSTRAINT_TOL {
            return Err(IstError::ConstraintViolated(defect));
        }
        Ok(ConstraintReport { sign, defect })
    }

    fn contour_distance(&self, z: C64) -> f64 {
        match self.topology() {
            CutTopology::RealCut => z.im.abs(),
            CutTopology::ImaginaryCut => z.im.abs().min((z.norm() - self.q0).abs()),
        }
    }

    fn log_jump(&self, b: C64, at: f64) -> Result<C64> {
        let s = if self.case.is_sinh_type() { 1.0 } else { -1.0 };
        let w = 1.0 + s * b * b;
        if w.norm() < 1e-300 {
            return Err(IstError::LogBranch(at));
        }
        Ok(w.ln())
    }

    /// Principal logs of 1 ± b² at the samples; consecutive values on
    /// opposite sides of the negative real axis raise LogBranch.
    fn sample_logs(&self, samples: &[[f64; 3]]) -> Result<Vec<[f64; 3]>> {
        let s = if self.case.is_sinh_type() { 1.0 } else { -1.0 };
        let mut prev: Option<C64> = None;
        let mut out = Vec::with_capacity(samples.len());
        for p in samples {
            let b = C64::new(p[1], p[2]);
            let w = 1.0 + s * b * b;
            if let Some(pw) = prev {
                if (w.re < 0.0 || pw.re < 0.0) && (w.im.signum() != pw.im.signum() || w.im == 0.0) {
                    return Err(IstError::LogBranch(p[0]));
                }
            }
            let l = self.log_jump(b, p[0])?;
            out.push([p[0], l.re, l.im]);
            prev = Some(w);
        }
        Ok(out)
    }

    /// R(z) = (1/2πi) ∫_Σ log(1 ± b²(ξ)) / (ξ − z) dξ; a = ∏·e^{R}, ā = ∏·e^{−R}.
    pub fn reflection_exponent(&self, z: C64) -> Result<C64> {
        if self.is_reflectionless() {
            return Ok(C64::from(0.0));
        }
        let dist = self.contour_distance(z);
        if dist <= 1e-9 * z.norm().max(1.0) {
            return Err(IstError::ContourPole(dist));
        }
        let q0 = self.q0;
        let imag = self.topology() == CutTopology::ImaginaryCut;
        let total = match &self.reflection {
            Reflection::None => C64::from(0.0),
            Reflection::Sampled { real, circle } => {
                let lr = self.sample_logs(real)?;
                let mut acc = real_segments(&lr, z, if imag { Some(q0) } else { None });
                if imag && !circle.is_empty() {
                    let lc = self.sample_logs(circle)?;
                    let f = |phi: f64| {
                        let xi = C64::from_polar(q0, phi);
                        interp(&lc, phi, true) * I * xi / (xi - z)
                    };
                    let upper: Vec<f64> = lc.iter().map(|p| p[0]).filter(|&p| p > 0.0 && p < PI).collect();
                    let lower: Vec<f64> = lc.iter().map(|p| p[0]).filter(|&p| p > PI && p < TAU).collect();
                    acc -= quad::integrate(f, 0.0, PI, &upper, QUAD_TOL)?;
                    acc += quad::integrate(f, PI, TAU, &lower, QUAD_TOL)?;
                }
                acc
            }
            Reflection::Analytic(bf) => {
                let bad = std::cell::Cell::new(None::<f64>);
                let jump = |xi: C64, at: f64| match self.log_jump(bf(xi), at) {
                    Ok(l) => l,
                    Err(_) => {
                        bad.set(Some(at));
                        C64::from(0.0)
                    }
                };
                let fr = |x: f64| jump(C64::from(x), x) / (x - z);
                let acc = if imag {
                    let fc = |phi: f64| {
                        let xi = C64::from_polar(q0, phi);
                        jump(xi, phi) * I * xi / (xi - z)
                    };
                    quad::integrate(fr, f64::NEG_INFINITY, -q0, &[], QUAD_TOL)?
                        + quad::integrate(fr, q0, f64::INFINITY, &[], QUAD_TOL)?
                        - quad::integrate(fr, -q0, q0, &[], QUAD_TOL)?
                        - quad::integrate(fc, 0.0, PI, &[], QUAD_TOL)?
                        + quad::integrate(fc, PI, TAU, &[], QUAD_TOL)?
                } else {
                    quad::integrate(fr, f64::NEG_INFINITY, z.re, &[], QUAD_TOL)?
                        + quad::integrate(fr, z.re, f64::INFINITY, &[], QUAD_TOL)?
                };
                if let Some(at) = bad.get() {
                    return Err(IstError::LogBranch(at));
                }
                acc
            }
        };
        Ok(total / (2.0 * PI * I))
    }

    fn product_a(&self, z: C64) -> C64 {
        self.zeros.iter().zip(&self.zeros_bar).map(|(&zj, &zb)| (z - zj) / (z - zb)).product()
    }

    /// a(z) = ∏ (z − z_j)/(z − z̄_j) · e^{R(z)}.
    pub fn trace_a(&self, z: C64) -> Result<C64> {
        Ok(self.product_a(z) * self.reflection_exponent(z)?.exp())
    }

    /// ā(z) = ∏ (z − z̄_j)/(z − z_j) · e^{−R(z)}.
    pub fn trace_abar(&self, z: C64) -> Result<C64> {
        let p: C64 = self.zeros.iter().zip(&self.zeros_bar).map(|(&zj, &zb)| (z - zb) / (z - zj)).product();
        Ok(p * (-self.reflection_exponent(z)?).exp())
    }

    fn check_distinct(&self) -> Result<()> {
        for j in 0..self.len() {
            for l in 0..j {
                if (self.zeros[j] - self.zeros[l]).norm() <= 1e-12 * self.zeros[j].norm() {
                    return Err(IstError::RepeatedZero(j));
                }
            }
        }
        Ok(())
    }

    /// a′(z_j) from the product formula.
    pub fn a_prime(&self, j: usize) -> Result<C64> {
        if j >= self.len() {
            return Err(IstError::MissingDerivative(j));
        }
        self.check_distinct()?;
        let zj = self.zeros[j];
        let mut v = 1.0 / (zj - self.zeros_bar[j]);
        for (l, (&zl, &zb)) in self.zeros.iter().zip(&self.zeros_bar).enumerate() {
            if l != j {
                v *= (zj - zl) / (zj - zb);
            }
        }
        Ok(v * self.reflection_exponent(zj)?.exp())
    }

    /// ā′(z̄_j) from the product formula.
    pub fn abar_prime(&self, j: usize) -> Result<C64> {
        if j >= self.len() {
            return Err(IstError::MissingDerivative(j));
        }
        self.check_distinct()?;
        let zb = self.zeros_bar[j];
        let mut v = 1.0 / (zb - self.zeros[j]);
        for (l, (&zl, &zbl)) in self.zeros.iter().zip(&self.zeros_bar).enumerate() {
            if l != j {
                v *= (zb - zbl) / (zb - zl);
            }
        }
        Ok(v * (-self.reflection_exponent(zb)?).exp())
    }

    pub fn a_primes(&self) -> Result<Vec<C64>> {
        (0..self.len()).map(|j| self.a_prime(j)).collect()
    }

    pub fn abar_primes(&self) -> Result<Vec<C64>> {
        (0..self.len()).map(|j| self.abar_prime(j)).collect()
    }

    /// Norming constants carried to time t under the equation in `spec`.
    pub fn evolve(&self, spec: &EquationSpec, t: f64) -> Result<Self> {
        let case = spec.case()?;
        if case != self.case || (spec.q0 - self.q0).abs() > 1e-12 * self.q0 {
            return Err(IstError::InvalidParameter("evolution spec does not match the data".into()));
        }
        let dt = t - self.t;
        let mut out = self.clone();
        out.t = t;
        for j in 0..self.len() {
            out.b[j] = self.b[j] * (evolution_exponent(spec, self.zeros[j])? * dt).exp();
            out.bbar[j] = self.bbar[j] * (-evolution_exponent(spec, self.zeros_bar[j])? * dt).exp();
        }
        let sp = *spec;
        let q0 = self.q0;
        out.reflection = match &self.reflection {
            Reflection::None => Reflection::None,
            Reflection::Sampled { real, circle } => {
                let ev = |xi: C64, re: f64, im: f64| -> Result<[f64; 2]> {
                    let v = C64::new(re, im) * (evolution_exponent(&sp, xi)? * dt).exp();
                    Ok([v.re, v.im])
                };
                let real = real
                    .iter()
                    .map(|p| ev(C64::from(p[0]), p[1], p[2]).map(|v| [p[0], v[0], v[1]]))
                    .collect::<Result<Vec<_>>>()?;
                let circle = circle
                    .iter()
                    .map(|p| ev(C64::from_polar(q0, p[0]), p[1], p[2]).map(|v| [p[0], v[0], v[1]]))
                    .collect::<Result<Vec<_>>>()?;
                Reflection::Sampled { real, circle }
            }
            Reflection::Analytic(f) => {
                let f = f.clone();
                Reflection::Analytic(Arc::new(move |xi| {
                    f(xi) * (evolution_exponent(&sp, xi).unwrap_or(C64::from(0.0)) * dt).exp()
                }))
            }
        };
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        let (reflection, reflection_circle) = match &self.reflection {
            Reflection::None => (Vec::new(), Vec::new()),
            Reflection::Sampled { real, circle } => (real.clone(), circle.clone()),
            Reflection::Analytic(_) => {
                return Err(IstError::InvalidParameter("analytic reflection cannot be serialized".into()))
            }
        };
        let w = Wire {
            case: self.case.name().to_string(),
            q0: self.q0,
            theta_plus: self.theta_plus,
            t: self.t,
            eigenvalues: self.zeros.iter().map(|&z| pair(z)).collect(),
            eigenvalues_bar: Some(self.zeros_bar.iter().map(|&z| pair(z)).collect()),
            b: self.b.iter().map(|&z| pair(z)).collect(),
            bbar: Some(self.bbar.iter().map(|&z| pair(z)).collect()),
            reflection,
            reflection_circle,
        };
        serde_json::to_string_pretty(&w).map_err(|e| IstError::Parse(e.to_string()))
    }

    /// Missing `eigenvalues_bar` and `bbar` are filled in from the symmetries.
    pub fn from_json(text: &str) -> Result<Self> {
        let w: Wire = serde_json::from_str(text).map_err(|e| IstError::Parse(e.to_string()))?;
        let case = SymmetryCase::parse(&w.case)?;
        let zs = w.eigenvalues.iter().map(unpair).collect();
        let bs = w.b.iter().map(unpair).collect();
        let mut d = ScatteringData::new(case, w.q0, w.theta_plus, zs, bs)?;
        d.t = w.t;
        if let Some(zb) = w.eigenvalues_bar {
            d.zeros_bar = zb.iter().map(unpair).collect();
        }
        if let Some(bb) = w.bbar {
            d.bbar = bb.iter().map(unpair).collect();
        }
        if d.zeros_bar.len() != d.len() || d.bbar.len() != d.len() {
            return Err(IstError::Parse("eigenvalue and norming-constant counts differ".into()));
        }
        if !w.reflection.is_empty() || !w.reflection_circle.is_empty() {
            let mut real = w.reflection;
            let mut circle = w.reflection_circle;
            real.sort_by(|a, b| a[0].total_cmp(&b[0]));
            for p in circle.iter_mut() {
                p[0] = p[0].rem_euclid(TAU);
            }
            circle.sort_by(|a, b| a[0].total_cmp(&b[0]));
            d.reflection = Reflection::Sampled { real, circle };
        }
        Ok(d)
    }
}

/// Σ over real-axis segments of ∫ L/(ξ − z) for piecewise-linear L, exact
/// per segment. With `cut = Some(q0)` the part |ξ| < q0 carries weight −1.
fn real_segments(logs: &[[f64; 3]], z: C64, cut: Option<f64>) -> C64 {
    let mut acc = C64::from(0.0);
    let seg = |x0: f64, l0: C64, x1: f64, l1: C64| -> C64 {
        let s = (l1 - l0) / (x1 - x0);
        s * (x1 - x0) + (l0 + s * (z - x0)) * ((x1 - z).ln() - (x0 - z).ln())
    };
    for w in logs.windows(2) {
        let (x0, l0) = (w[0][0], C64::new(w[0][1], w[0][2]));
        let (x1, l1) = (w[1][0], C64::new(w[1][1], w[1][2]));
        if x1 <= x0 {
            continue;
        }
        let mut cuts = vec![x0];
        if let Some(q0) = cut {
            for c in [-q0, q0] {
                if c > x0 && c < x1 {
                    cuts.push(c);
                }
            }
        }
        cuts.push(x1);
        let at = |x: f64| l0 + (l1 - l0) * ((x - x0) / (x1 - x0));
        for p in cuts.windows(2) {
            let (a, b) = (p[0], p[1]);
            let weight = match cut {
                Some(q0) if (0.5 * (a + b)).abs() < q0 => -1.0,
                _ => 1.0,
            };
            acc += weight * seg(a, at(a), b, at(b));
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::Family;
    use proptest::prelude::*;

    fn sinh0(th: f64, d: f64) -> ScatteringData {
        ScatteringData::new(SymmetryCase::Sinh0, 2.0, th, vec![C64::from_polar(2.0, th)], vec![d * I]).unwrap()
    }

    fn case2(q0: f64, q1: f64) -> ScatteringData {
        let zs = vec![C64::new(0.0, q1), C64::new(0.0, -q0 * q0 / q1)];
        ScatteringData::new(SymmetryCase::SinhPi, q0, PI / 2.0, zs, vec![I, -I]).unwrap()
    }

    fn fd(f: impl Fn(C64) -> C64, z: C64, h: f64) -> C64 {
        (f(z - 2.0 * h) - 8.0 * f(z - h) + 8.0 * f(z + h) - f(z + 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn a_prime_closed_forms() {
        let d = sinh0(PI / 3.0, 1.0);
        // 1/(z1 − z̄1) = 1/(2i q0 sin θ)
        let want = 1.0 / (2.0 * I * 2.0 * (PI / 3.0).sin());
        assert!((d.a_prime(0).unwrap() - want).norm() < 1e-12);
        assert!((d.abar_prime(0).unwrap() + want).norm() < 1e-12);
        let (q0, q1) = (2.0, 4.0);
        let c = case2(q0, q1);
        let want = -I * (q1 * q1 + q0 * q0) / (2.0 * q1 * (q1 * q1 - q0 * q0));
        assert!((c.a_prime(0).unwrap() - want).norm() < 1e-12);
    }

    #[test]
    fn fd_derivative_of_trace() {
        for d in [sinh0(1.0, 1.0), case2(2.0, 4.0), case2(1.0, 3.0)] {
            for j in 0..d.len() {
                let g = fd(|z| d.trace_a(z).unwrap(), d.zeros[j], 1e-3);
                assert!((g - d.a_prime(j).unwrap()).norm() < 1e-9, "{g} vs {}", d.a_prime(j).unwrap());
                let gb = fd(|z| d.trace_abar(z).unwrap(), d.zeros_bar[j], 1e-3);
                assert!((gb - d.abar_prime(j).unwrap()).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn constraints() {
        let r = sinh0(PI / 3.0, 1.0).validate().unwrap();
        assert_eq!(r.sign, 1);
        let mut neg = sinh0(PI / 3.0, 1.0);
        neg.zeros[0] = -neg.zeros[0];
        neg.zeros_bar[0] = -neg.zeros_bar[0];
        // −q0 e^{iθ} leaves the upper half plane
        assert!(matches!(neg.validate(), Err(IstError::ImproperEigenvalue(_))));
        assert_eq!(case2(2.0, 4.0).validate().unwrap().sign, 1);
        let sine = ScatteringData::new(SymmetryCase::SinePi, 2.0, 0.4, vec![C64::from_polar(2.0, 0.4 + PI / 2.0)], vec![C64::from(1.0)]).unwrap();
        assert!(sine.validate().is_ok());
        let s0 = ScatteringData::new(SymmetryCase::Sine0, 2.0, 0.0, vec![C64::new(0.0, 4.0), C64::new(0.0, -1.0)], vec![C64::from(1.0); 2]).unwrap();
        assert!(s0.validate().is_ok());
        let off = ScatteringData::new(SymmetryCase::Sinh0, 2.0, 1.0, vec![C64::from_polar(2.5, 1.0)], vec![I]).unwrap();
        assert!(matches!(off.validate(), Err(IstError::ConstraintViolated(_))));
        let one = ScatteringData::new(SymmetryCase::SinhPi, 2.0, PI / 2.0, vec![C64::new(0.0, 4.0)], vec![I]).unwrap();
        assert!(matches!(one.validate(), Err(IstError::ImproperEigenvalue(_))));
        let rep = ScatteringData::new(SymmetryCase::SinhPi, 2.0, PI / 2.0, vec![C64::new(0.0, 4.0); 2], vec![I; 2]).unwrap();
        assert!(matches!(rep.validate(), Err(IstError::RepeatedZero(_))));
    }

    #[test]
    fn sinh0_constraint_sign_recorded() {
        // θ₊ = 0 with no eigenvalues: the uniform background, sign +1
        let d = ScatteringData::new(SymmetryCase::Sinh0, 1.0, 0.0, vec![], vec![]).unwrap();
        assert_eq!(d.validate().unwrap().sign, 1);
        let d = ScatteringData::new(SymmetryCase::Sinh0, 1.0, PI, vec![], vec![]).unwrap();
        assert_eq!(d.validate().unwrap().sign, -1);
    }

    #[test]
    fn family_data() {
        let id = SolutionId::one(Family::SinhDark1);
        let spec = id.spec(2.0, 1.0, 1.0, 0.0);
        let d = ScatteringData::for_solution(&id, &spec).unwrap();
        assert!((d.b[0] - I).norm() < 1e-15 && d.b_square_defect() < 1e-15 && d.pairing_defect() == 0.0);
        let id = SolutionId::two(Family::SineTwoSoliton, 1, -1, 4.0);
        let d = ScatteringData::for_solution(&id, &id.spec(2.0, 0.0, 1.0, 0.0)).unwrap();
        assert!(d.validate().is_ok() && d.b_square_defect() < 1e-15);
    }

    #[test]
    fn evolution_matches_closed_form_exponents() {
        let (q0, th, al, t) = (2.0, PI / 3.0, 1.0, 0.7);
        let spec = EquationSpec::sinh_gordon(q0, th, al);
        let d = sinh0(th, 1.0).evolve(&spec, t).unwrap();
        let want = I * (-(I * al * t / th.cos()) * C64::from_polar(1.0, -th)).exp();
        assert!((d.b[0] - want).norm() < 1e-12);
        let spec = EquationSpec::sinh_gordon_pi(q0, PI / 2.0, al);
        let c = case2(q0, 4.0).evolve(&spec, t).unwrap();
        for j in 0..2 {
            let z = c.zeros[j];
            let want = case2(q0, 4.0).b[j] * (2.0 * al * q0 * q0 * I * t / (z * z - q0 * q0)).exp();
            assert!((c.b[j] - want).norm() < 1e-12);
        }
        let spec = EquationSpec::rst_nls(1, q0, th, PhaseSum::Zero);
        let n = sinh0(th, 1.0).evolve(&spec, t).unwrap();
        let want = I * (-2.0 * I * q0 * q0 * (1.0 + I * (2.0 * th).sin()) * t).exp();
        assert!((n.b[0] - want).norm() < 1e-12);
    }

    #[test]
    fn k_pole() {
        // k(z) = 0 at z = ±i q0 for the real cut
        let spec = EquationSpec::sinh_gordon(2.0, 1.0, 1.0);
        assert!(matches!(evolution_exponent(&spec, C64::new(0.0, 2.0)), Err(IstError::KPole(_))));
    }

    /// log(1 + b²) = ε/(1 + ξ²)²; the Cauchy transform follows from the
    /// residue at ξ = ∓i.
    fn rational_reflection(eps: f64) -> ScatteringData {
        let mut d = ScatteringData::new(SymmetryCase::Sinh0, 1.0, 0.0, vec![], vec![]).unwrap();
        d.reflection = Reflection::Analytic(Arc::new(move |xi: C64| {
            let l = eps / (1.0 + xi * xi).powi(2);
            (l.exp() - 1.0).sqrt()
        }));
        d
    }

    fn rational_exponent(eps: f64, z: C64) -> C64 {
        if z.im > 0.0 {
            eps * (0.25 * I / (z + I) - 0.25 / ((z + I) * (z + I)))
        } else {
            eps * (0.25 * I / (z - I) + 0.25 / ((z - I) * (z - I)))
        }
    }

    #[test]
    fn cauchy_transform_of_rational_jump() {
        let d = rational_reflection(0.5);
        for z in [C64::new(0.3, 0.8), C64::new(-1.5, 2.0), C64::new(0.7, -0.4)] {
            let r = d.reflection_exponent(z).unwrap();
            assert!((r - rational_exponent(0.5, z)).norm() < 1e-11, "{z}: {r}");
        }
        assert!(matches!(d.reflection_exponent(C64::new(1.0, 0.0)), Err(IstError::ContourPole(_))));
    }

    #[test]
    fn sampled_matches_analytic() {
        let eps = 0.5;
        let real: Vec<[f64; 3]> = (0..=8000)
            .map(|i| {
                let x = -40.0 + 0.01 * i as f64;
                let b = ((eps / (1.0 + x * x).powi(2)).exp() - 1.0).sqrt();
                [x, b, 0.0]
            })
            .collect();
        let mut d = ScatteringData::new(SymmetryCase::Sinh0, 1.0, 0.0, vec![], vec![]).unwrap();
        d.reflection = Reflection::Sampled { real, circle: vec![] };
        let z = C64::new(0.3, 0.8);
        assert!((d.reflection_exponent(z).unwrap() - rational_exponent(eps, z)).norm() < 1e-5);
        let back = ScatteringData::from_json(&d.to_json().unwrap()).unwrap();
        assert!((back.reflection_exponent(z).unwrap() - d.reflection_exponent(z).unwrap()).norm() < 1e-15);
    }

    #[test]
    fn plemelj_imaginary_cut() {
        // smooth b on all of Σ; the jump of a·ā across Σ is 1 + b²
        let mut d = case2(1.0, 2.0);
        d.reflection = Reflection::Analytic(Arc::new(|xi: C64| C64::from(0.3 * (-(xi * xi - 2.0).norm_sqr() / 4.0).exp())));
        let eps = 1e-4;
        for (xi, n) in [(C64::from(2.5), I), (C64::from(0.4), -I), (C64::from_polar(1.0, 0.9), C64::from_polar(1.0, 0.9))] {
            let plus = xi + eps * n;
            let minus = xi - eps * n;
            let prod = d.trace_a(plus).unwrap() * d.trace_abar(minus).unwrap();
            let b = 0.3 * (-(xi * xi - 2.0).norm_sqr() / 4.0).exp();
            assert!((prod - (1.0 + b * b)).norm() < 1e-3, "{xi}: {prod}");
        }
    }

    #[test]
    fn log_branch_detected() {
        let mut d = ScatteringData::new(SymmetryCase::Sinh0, 1.0, 0.0, vec![], vec![]).unwrap();
        // 1 + b² crosses the negative axis where b ≈ 1.5i e^{±i small}
        let real = vec![[0.0, 0.05, 1.5], [1.0, -0.05, 1.5]];
        d.reflection = Reflection::Sampled { real, circle: vec![] };
        assert!(matches!(d.trace_a(C64::new(0.0, 1.0)), Err(IstError::LogBranch(_))));
    }

    #[test]
    fn json_round_trip() {
        let d = case2(2.0, 4.0);
        let text = d.to_json().unwrap();
        assert!(text.contains("\"case\": \"sinhpi\"") && text.contains("eigenvalues"));
        let back = ScatteringData::from_json(&text).unwrap();
        assert_eq!(back.zeros, d.zeros);
        assert_eq!(back.bbar, d.bbar);
        let minimal = r#"{"case":"sinh0","q0":2,"theta_plus":1.0,"eigenvalues":[[1.0806046117362795,1.682941969615793]],"b":[[0,1]]}"#;
        let m = ScatteringData::from_json(minimal).unwrap();
        assert!(m.validate().is_ok());
        assert!((m.bbar[0] + I).norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn involution_relation_of_trace(r in 1.2f64..4.0, a in 0.2f64..2.9, q1 in 2.5f64..6.0) {
            // a(ι(z)) = ε e^{2iθ₊} ā(z) for constraint-satisfying data
            let d = case2(2.0, q1);
            let z = C64::from_polar(r * 2.0, -a);
            let lhs = d.trace_a(involution_raw(z, 2.0, d.topology())).unwrap();
            let rhs = involution_sign(d.case) * C64::from_polar(1.0, 2.0 * d.theta_plus) * d.trace_abar(z).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
            let s = sinh0(0.3 + a / 1.2, 1.0);
            let lhs = s.trace_a(involution_raw(z, 2.0, s.topology())).unwrap();
            let rhs = involution_sign(s.case) * C64::from_polar(1.0, 2.0 * s.theta_plus) * s.trace_abar(z).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
        }

        #[test]
        fn evolution_composes(t1 in -2.0f64..2.0, t2 in -2.0f64..2.0, th in 0.2f64..1.3) {
            let spec = EquationSpec::sinh_gordon(2.0, th, 1.0);
            let d = sinh0(th, 1.0);
            let a = d.evolve(&spec, t1).unwrap().evolve(&spec, t1 + t2).unwrap();
            let b = d.evolve(&spec, t1 + t2).unwrap();
            prop_assert!((a.b[0] - b.b[0]).norm() <= 1e-12 * b.b[0].norm());
            prop_assert!((a.bbar[0] - b.bbar[0]).norm() <= 1e-12 * b.bbar[0].norm());
        }
    }

    proptest! {
        #[test]
        fn trace_vanishes_at_stored_zeros(q1 in 2.5f64..6.0, th in 0.2f64..1.3) {
            for d in [case2(2.0, q1), sinh0(th, 1.0)] {
                for (&z, &zb) in d.zeros.iter().zip(&d.zeros_bar) {
                    prop_assert!(d.trace_a(z).unwrap().norm() <= 1e-10);
                    prop_assert!(d.trace_abar(zb).unwrap().norm() <= 1e-10);
                }
            }
        }

        #[test]
        fn norming_modulus_follows_exponent(t in -3.0f64..3.0, th in 0.2f64..1.3) {
            let spec = EquationSpec::rst_nls(1, 2.0, th, PhaseSum::Zero);
            let d = sinh0(th, 1.0);
            let e = d.evolve(&spec, t).unwrap();
            let w = evolution_exponent(&spec, d.zeros[0]).unwrap();
            let wb = evolution_exponent(&spec, d.zeros_bar[0]).unwrap();
            let want = d.b[0].norm() * (w.re * t).exp();
            let want_bar = d.bbar[0].norm() * (-wb.re * t).exp();
            prop_assert!((e.b[0].norm() - want).abs() <= 1e-12 * want);
            prop_assert!((e.bbar[0].norm() - want_bar).abs() <= 1e-12 * want_bar);
        }
    }
}
