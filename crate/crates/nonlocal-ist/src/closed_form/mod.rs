//! Explicit solutions: nonlocal sinh/sine-Gordon 1- and 2-solitons, RST-NLS
//! cases 1–4, spatially modulated backgrounds, and their singular variants.
//!
//! Two-soliton Gordon solutions are stored in the exponential basis of
//! [`exp_basis`]; everything else uses the hyperbolic form directly.

pub mod exp_basis;

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{IstError, Result};
use crate::model_config::{EquationKind, EquationSpec, Side, SymmetryCase};
use crate::{C64, I};
pub use exp_basis::{ExpRatio, ExpTerm};

const ANGLE_TOL: f64 = 1e-12;
/// Within this distance of a removable set the Taylor fallback is used.
pub const REMOVABLE_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    SinhDark1,
    SinhBright1Singular,
    SinhTwoSoliton,
    SineDark1,
    SineBright1Singular,
    SineTwoSoliton,
    NlsCase1Dark,
    NlsCase1Singular,
    NlsCase2Two,
    NlsCase3Dark,
    NlsCase3Singular,
    NlsCase4Two,
    SpatialBcSinh,
    SpatialBcSine,
}

impl Family {
    pub const ALL: [Family; 14] = [
        Family::SinhDark1,
        Family::SinhBright1Singular,
        Family::SinhTwoSoliton,
        Family::SineDark1,
        Family::SineBright1Singular,
        Family::SineTwoSoliton,
        Family::NlsCase1Dark,
        Family::NlsCase1Singular,
        Family::NlsCase2Two,
        Family::NlsCase3Dark,
        Family::NlsCase3Singular,
        Family::NlsCase4Two,
        Family::SpatialBcSinh,
        Family::SpatialBcSine,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            Family::SinhDark1 => "sinh-dark1",
            Family::SinhBright1Singular => "sinh-bright1",
            Family::SinhTwoSoliton => "sinh-two",
            Family::SineDark1 => "sine-dark1",
            Family::SineBright1Singular => "sine-bright1",
            Family::SineTwoSoliton => "sine-two",
            Family::NlsCase1Dark => "nls-case1-dark",
            Family::NlsCase1Singular => "nls-case1-singular",
            Family::NlsCase2Two => "nls-case2-two",
            Family::NlsCase3Dark => "nls-case3-dark",
            Family::NlsCase3Singular => "nls-case3-singular",
            Family::NlsCase4Two => "nls-case4-two",
            Family::SpatialBcSinh => "spatial-sinh",
            Family::SpatialBcSine => "spatial-sine",
        }
    }

    pub fn from_slug(s: &str) -> Result<Self> {
        Family::ALL
            .iter()
            .copied()
            .find(|f| f.slug() == s.trim())
            .ok_or_else(|| IstError::Parse(format!("unknown family '{s}'")))
    }

    pub fn is_two_soliton(self) -> bool {
        matches!(self, Family::SinhTwoSoliton | Family::SineTwoSoliton | Family::NlsCase2Two | Family::NlsCase4Two)
    }

    pub fn kind(self) -> EquationKind {
        match self {
            Family::SinhDark1
            | Family::SinhBright1Singular
            | Family::SinhTwoSoliton
            | Family::SpatialBcSinh => EquationKind::SinhGordon,
            Family::SineDark1
            | Family::SineBright1Singular
            | Family::SineTwoSoliton
            | Family::SpatialBcSine => EquationKind::SineGordon,
            _ => EquationKind::RstNls,
        }
    }

    /// Symmetry case the family lives in.
    pub fn case(self) -> SymmetryCase {
        match self {
            Family::SinhDark1 | Family::SinhBright1Singular | Family::SpatialBcSinh => SymmetryCase::Sinh0,
            Family::NlsCase1Dark | Family::NlsCase1Singular => SymmetryCase::Sinh0,
            Family::SinhTwoSoliton | Family::NlsCase2Two => SymmetryCase::SinhPi,
            Family::SineDark1 | Family::SineBright1Singular | Family::SpatialBcSine => SymmetryCase::SinePi,
            Family::NlsCase3Dark | Family::NlsCase3Singular => SymmetryCase::SinePi,
            Family::SineTwoSoliton | Family::NlsCase4Two => SymmetryCase::Sine0,
        }
    }

    /// θ₊ forced by the family (two-solitons), otherwise `None`.
    pub fn fixed_theta(self) -> Option<f64> {
        match self {
            Family::SinhTwoSoliton | Family::NlsCase2Two => Some(FRAC_PI_2),
            Family::SineTwoSoliton | Family::NlsCase4Two => Some(0.0),
            _ => None,
        }
    }

    /// δ of the 1-soliton families, fixed by the family.
    pub fn fixed_delta(self) -> Option<i8> {
        match self {
            Family::SinhDark1 | Family::NlsCase1Dark | Family::SpatialBcSinh => Some(1),
            Family::SinhBright1Singular | Family::NlsCase1Singular => Some(-1),
            Family::SineDark1 | Family::NlsCase3Dark | Family::SpatialBcSine => Some(-1),
            Family::SineBright1Singular | Family::NlsCase3Singular => Some(1),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionId {
    pub family: Family,
    /// δ-signs; only `d1` is used by 1-soliton families (and it is fixed).
    pub d1: i8,
    pub d2: i8,
    pub q1: Option<f64>,
}

impl SolutionId {
    pub fn one(family: Family) -> Self {
        SolutionId { family, d1: family.fixed_delta().unwrap_or(1), d2: 1, q1: None }
    }

    pub fn two(family: Family, d1: i8, d2: i8, q1: f64) -> Self {
        SolutionId { family, d1, d2, q1: Some(q1) }
    }

    pub fn is_singular(&self) -> bool {
        match self.family {
            Family::SinhBright1Singular
            | Family::SineBright1Singular
            | Family::NlsCase1Singular
            | Family::NlsCase3Singular => true,
            f if f.is_two_soliton() => self.d1 * self.d2 == 1,
            _ => false,
        }
    }

    /// Equation spec matching the family at the given background data.
    /// θ₊ is overridden for the two-soliton families and α for RST-NLS.
    pub fn spec(&self, q0: f64, theta_plus: f64, alpha: f64, beta: f64) -> EquationSpec {
        let th = self.family.fixed_theta().unwrap_or(theta_plus);
        let case = self.family.case();
        let base = match self.family.kind() {
            EquationKind::SinhGordon | EquationKind::SineGordon => EquationSpec {
                kind: self.family.kind(),
                sigma: case.sigma(),
                q0,
                theta_plus: crate::model_config::normalize_phase(th),
                theta_minus: case.theta_minus(th),
                alpha,
                beta: 0.0,
            },
            EquationKind::RstNls => EquationSpec::rst_nls(case.sigma(), q0, th, case.phase_sum()),
        };
        if matches!(self.family, Family::SpatialBcSinh | Family::SpatialBcSine) {
            base.with_beta(beta)
        } else {
            base
        }
    }
}

/// Singular or removable locus in the (x, t) plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SingularSet {
    /// a·x + b·t = c
    Line { a: f64, b: f64, c: f64 },
    /// (x0, t0 + n·period), n ∈ ℤ
    PointLattice { x0: f64, t0: f64, period: f64 },
}

impl SingularSet {
    pub fn distance(&self, x: f64, t: f64) -> f64 {
        match *self {
            SingularSet::Line { a, b, c } => (a * x + b * t - c).abs() / a.hypot(b),
            SingularSet::PointLattice { x0, t0, period } => {
                let n = ((t - t0) / period).round();
                (x - x0).hypot(t - t0 - n * period)
            }
        }
    }

    /// x on the locus at time t, when the locus is a graph over t.
    pub fn x_at(&self, t: f64) -> Option<f64> {
        match *self {
            SingularSet::Line { a, b, c } if a != 0.0 => Some((c - b * t) / a),
            _ => None,
        }
    }

    /// Points of the locus inside the rectangle [−X, X]×[−T, T]: for lines,
    /// sampled at the given t values; for lattices, every lattice point.
    pub fn points_in(&self, x_max: f64, t_values: &[f64]) -> Vec<(f64, f64)> {
        match *self {
            SingularSet::Line { .. } => t_values
                .iter()
                .filter_map(|&t| self.x_at(t).filter(|x| x.abs() <= x_max).map(|x| (x, t)))
                .collect(),
            SingularSet::PointLattice { x0, t0, period } => {
                let (lo, hi) = t_values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
                if x0.abs() > x_max || !lo.is_finite() {
                    return Vec::new();
                }
                let n0 = ((lo - t0) / period).ceil() as i64;
                let n1 = ((hi - t0) / period).floor() as i64;
                (n0..=n1).map(|n| (x0, t0 + n as f64 * period)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Params {
    q0: f64,
    th: f64,
    alpha: f64,
    beta: f64,
    q1: f64,
    d1: i8,
    d2: i8,
}

/// An evaluable solution q(x, t), with s(x, t) where a closed form exists.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSolution {
    pub spec: EquationSpec,
    pub id: SolutionId,
    pub singular_sets: Vec<SingularSet>,
    pub removable_sets: Vec<SingularSet>,
    p: Params,
    exp: Option<ExpRatio>,
}

fn near(a: f64, b: f64) -> bool {
    let d = (a - b).rem_euclid(TAU);
    d < ANGLE_TOL || TAU - d < ANGLE_TOL
}

fn check_spec(spec: &EquationSpec, family: Family) -> Result<()> {
    spec.validate()?;
    if spec.kind != family.kind() {
        return Err(IstError::ParameterDomain(format!(
            "family {} needs kind {}, got {}",
            family.slug(),
            family.kind().name(),
            spec.kind.name()
        )));
    }
    let case = spec.case()?;
    if case != family.case() {
        return Err(IstError::ParameterDomain(format!(
            "family {} lives in case {}, spec is {}",
            family.slug(),
            family.case().name(),
            case.name()
        )));
    }
    let spatial = matches!(family, Family::SpatialBcSinh | Family::SpatialBcSine);
    if !spatial && spec.beta != 0.0 {
        return Err(IstError::ParameterDomain("β ≠ 0 is only supported by the spatial-BC families".into()));
    }
    Ok(())
}

/// Guards shared by the sinh-type 1-solitons (sech/coth in q0 x sinθ + αt tanθ/2).
fn check_sinh_phase(spec: &EquationSpec) -> Result<()> {
    let th = spec.theta_plus;
    if near(th, 0.0) || near(th, PI) {
        return Err(IstError::DegeneratePhase(th));
    }
    if spec.alpha != 0.0 && (near(th, FRAC_PI_2) || near(th, 3.0 * FRAC_PI_2)) {
        return Err(IstError::TanPole);
    }
    Ok(())
}

/// Guards shared by the sine-type 1-solitons (q0 x cosθ − αt cotθ/2).
fn check_sine_phase(spec: &EquationSpec) -> Result<()> {
    let th = spec.theta_plus;
    if near(th, FRAC_PI_2) || near(th, 3.0 * FRAC_PI_2) {
        return Err(IstError::DegeneratePhase(th));
    }
    if spec.alpha != 0.0 && (near(th, 0.0) || near(th, PI)) {
        return Err(IstError::CotPole);
    }
    Ok(())
}

fn params(spec: &EquationSpec, id: &SolutionId) -> Params {
    Params {
        q0: spec.q0,
        th: spec.theta_plus,
        alpha: spec.alpha,
        beta: spec.beta,
        q1: id.q1.unwrap_or(0.0),
        d1: id.d1,
        d2: id.d2,
    }
}

/// tan θ with α tan θ taken as 0 when α = 0.
fn alpha_tan(alpha: f64, th: f64) -> f64 {
    if alpha == 0.0 { 0.0 } else { alpha * th.tan() }
}

fn alpha_cot(alpha: f64, th: f64) -> f64 {
    if alpha == 0.0 { 0.0 } else { alpha / th.tan() }
}

fn solution(spec: &EquationSpec, id: SolutionId, sing: Vec<SingularSet>, rem: Vec<SingularSet>, exp: Option<ExpRatio>) -> FieldSolution {
    FieldSolution { spec: *spec, id, singular_sets: sing, removable_sets: rem, p: params(spec, &id), exp }
}

pub fn make_sinh_dark1(spec: &EquationSpec) -> Result<FieldSolution> {
    check_spec(spec, Family::SinhDark1)?;
    check_sinh_phase(spec)?;
    Ok(solution(spec, SolutionId::one(Family::SinhDark1), vec![], vec![], None))
}

pub fn make_sinh_bright1_singular(spec: &EquationSpec) -> Result<FieldSolution> {
    check_spec(spec, Family::SinhBright1Singular)?;
    check_sinh_phase(spec)?;
    let th = spec.theta_plus;
    let line = SingularSet::Line { a: spec.q0 * th.sin(), b: 0.5 * alpha_tan(spec.alpha, th), c: 0.0 };
    Ok(solution(spec, SolutionId::one(Family::SinhBright1Singular), vec![line], vec![], None))
}

pub fn make_sine_dark1(spec: &EquationSpec) -> Result<FieldSolution> {
    check_spec(spec, Family::SineDark1)?;
    check_sine_phase(spec)?;
    Ok(solution(spec, SolutionId::one(Family::SineDark1), vec![], vec![], None))
}

pub fn make_sine_bright1_singular(spec: &EquationSpec) -> Result<FieldSolution> {
    check_spec(spec, Family::SineBright1Singular)?;
    check_sine_phase(spec)?;
    let th = spec.theta_plus;
    let line = SingularSet::Line { a: spec.q0 * th.cos(), b: -0.5 * alpha_cot(spec.alpha, th), c: 0.0 };
    Ok(solution(spec, SolutionId::one(Family::SineBright1Singular), vec![line], vec![], None))
}

fn check_deltas(d1: i8, d2: i8) -> Result<()> {
    if d1.abs() != 1 || d2.abs() != 1 {
        return Err(IstError::ParameterDomain(format!("δ-signs must be ±1, got ({d1}, {d2})")));
    }
    Ok(())
}

fn check_q1(q0: f64, q1: f64) -> Result<()> {
    if !(q1.is_finite() && q1 > q0) {
        return Err(IstError::ParameterDomain(format!("two-soliton families need q1 > q0, got q1 = {q1}, q0 = {q0}")));
    }
    Ok(())
}

/// Numerator signs (s3, s6, s7, s8, s9) and the denominator sign d3 of the
/// two-soliton Gordon formulas, for the given case and δ-signs.
fn gordon_two_signs(case: SymmetryCase, d1: i8, d2: i8) -> ([f64; 5], f64) {
    use SymmetryCase::*;
    match (case, d1, d2) {
        (SinhPi, 1, -1) => ([-1.0, 1.0, 1.0, 1.0, 1.0], 1.0),
        (SinhPi, -1, 1) => ([-1.0, -1.0, -1.0, -1.0, -1.0], 1.0),
        (Sine0, 1, -1) => ([-1.0, -1.0, -1.0, -1.0, -1.0], 1.0),
        (Sine0, -1, 1) => ([-1.0, 1.0, 1.0, 1.0, 1.0], 1.0),
        (SinhPi, 1, 1) => ([1.0, 1.0, -1.0, -1.0, 1.0], -1.0),
        (SinhPi, _, _) => ([1.0, -1.0, 1.0, 1.0, -1.0], -1.0),
        (Sine0, 1, 1) => ([1.0, -1.0, 1.0, 1.0, -1.0], -1.0),
        (Sine0, _, _) => ([1.0, 1.0, -1.0, -1.0, 1.0], -1.0),
        _ => unreachable!("two-soliton Gordon families live in sinhpi / sine0"),
    }
}

/// Exponential-basis form of the two-soliton Gordon solutions.
pub fn gordon_two_exp(case: SymmetryCase, q0: f64, q1: f64, alpha: f64, d1: i8, d2: i8) -> ExpRatio {
    let (s, d3) = gordon_two_signs(case, d1, d2);
    let a = q0 * q0 + q1 * q1;
    let r = q0 * q0 / q1;
    let it = |w: f64| C64::new(0.0, w * alpha);
    let re = C64::from;
    // (x-rate, t-rate) of E1..E9
    let ex = [
        (re(2.0 * r + 2.0 * q1), it(4.0 * q1 * q1 / a)),
        (re(2.0 * r + 2.0 * q1), it(4.0 * q0 * q0 / a)),
        (re(2.0 * r + 2.0 * q1), it(2.0)),
        (re(4.0 * r), it(2.0)),
        (re(4.0 * q1), it(2.0)),
        (re(r + 3.0 * q1), it((q0 * q0 + 3.0 * q1 * q1) / a)),
        (re(3.0 * r + q1), it(1.0 + 2.0 * q1 * q1 / a)),
        (re(r + 3.0 * q1), it((q1 * q1 + 3.0 * q0 * q0) / a)),
        (re(3.0 * r + q1), it((3.0 * q0 * q0 + q1 * q1) / a)),
    ];
    let p = 2.0 * q0 * q0 * (q0.powi(4) - q1.powi(4));
    let rr = 2.0 * q1 * q1 * (q1.powi(4) - q0.powi(4));
    let dd = (q0 * q0 - q1 * q1).powi(2);
    let nc = [
        -4.0 * q0.powi(5) * q1,
        -4.0 * q0 * q1.powi(5),
        s[0] * 2.0 * q0 * q1 * dd,
        q0 * q1 * a * a,
        q0 * q1 * a * a,
        s[1] * p,
        s[2] * p,
        s[3] * rr,
        s[4] * rr,
    ];
    let dc = [-4.0 * q0 * q0 * q1 * q1, -4.0 * q0 * q0 * q1 * q1, d3 * 2.0 * dd, a * a, a * a];
    let lead = if case == SymmetryCase::SinhPi { I } else { C64::from(1.0) };
    ExpRatio {
        pref: ExpTerm::new(lead / q1, C64::from(0.0), it(1.0)),
        num: nc.iter().zip(ex.iter()).map(|(&c, &(ax, bt))| ExpTerm::new(C64::from(c), ax, bt)).collect(),
        den: dc.iter().zip(ex.iter()).map(|(&c, &(ax, bt))| ExpTerm::new(C64::from(c), ax, bt)).collect(),
    }
}

fn make_gordon_two(spec: &EquationSpec, family: Family, d1: i8, d2: i8, q1: f64) -> Result<FieldSolution> {
    check_spec(spec, family)?;
    check_deltas(d1, d2)?;
    check_q1(spec.q0, q1)?;
    let th0 = family.fixed_theta().unwrap_or(0.0);
    if !near(spec.theta_plus, th0) {
        return Err(IstError::ParameterDomain(format!("{} requires θ₊ = {th0}", family.slug())));
    }
    let case = family.case();
    let exp = gordon_two_exp(case, spec.q0, q1, spec.alpha, d1, d2);
    let id = SolutionId::two(family, d1, d2, q1);
    let sing = if d1 * d2 == 1 {
        let a = spec.q0 * spec.q0 + q1 * q1;
        let omega = 2.0 * spec.alpha * (q1 * q1 - spec.q0 * spec.q0) / a;
        if omega == 0.0 {
            vec![SingularSet::Line { a: 1.0, b: 0.0, c: 0.0 }]
        } else {
            vec![SingularSet::PointLattice { x0: 0.0, t0: 0.0, period: TAU / omega.abs() }]
        }
    } else {
        vec![]
    };
    Ok(solution(spec, id, sing, vec![], Some(exp)))
}

pub fn make_sinh_two(spec: &EquationSpec, d1: i8, d2: i8, q1: f64) -> Result<FieldSolution> {
    make_gordon_two(spec, Family::SinhTwoSoliton, d1, d2, q1)
}

pub fn make_sine_two(spec: &EquationSpec, d1: i8, d2: i8, q1: f64) -> Result<FieldSolution> {
    make_gordon_two(spec, Family::SineTwoSoliton, d1, d2, q1)
}

/// The δ₁ = δ₂ Gordon two-solitons, singular at isolated space-time points.
pub fn make_gordon_two_singular(spec: &EquationSpec, delta: i8, q1: f64) -> Result<FieldSolution> {
    let family = match spec.kind {
        EquationKind::SinhGordon => Family::SinhTwoSoliton,
        EquationKind::SineGordon => Family::SineTwoSoliton,
        EquationKind::RstNls => return Err(IstError::ParameterDomain("Gordon kind required".into())),
    };
    make_gordon_two(spec, family, delta, delta, q1)
}

/// NLS case 1 (σ = 1, θ₊+θ₋ = 0): δ = 1 dark, δ = −1 singular.
pub fn make_nls_case1(spec: &EquationSpec, delta: i8) -> Result<FieldSolution> {
    let family = if delta == 1 { Family::NlsCase1Dark } else { Family::NlsCase1Singular };
    check_spec(spec, family)?;
    check_deltas(delta, 1)?;
    let th = spec.theta_plus;
    if near(th, 0.0) || near(th, PI) {
        return Err(IstError::DegeneratePhase(th));
    }
    let sing = if delta == 1 {
        vec![]
    } else {
        vec![SingularSet::Line { a: 1.0, b: -2.0 * spec.q0 * th.cos(), c: 0.0 }]
    };
    Ok(solution(spec, SolutionId::one(family), sing, vec![], None))
}

/// NLS case 3 (σ = −1, θ₊+θ₋ = π): δ = −1 dark, δ = 1 singular.
pub fn make_nls_case3(spec: &EquationSpec, delta: i8) -> Result<FieldSolution> {
    let family = if delta == -1 { Family::NlsCase3Dark } else { Family::NlsCase3Singular };
    check_spec(spec, family)?;
    check_deltas(delta, 1)?;
    let th = spec.theta_plus;
    if near(th, FRAC_PI_2) || near(th, 3.0 * FRAC_PI_2) {
        return Err(IstError::DegeneratePhase(th));
    }
    let sing = if delta == -1 {
        vec![]
    } else {
        vec![SingularSet::Line { a: 1.0, b: 2.0 * spec.q0 * th.sin(), c: 0.0 }]
    };
    Ok(solution(spec, SolutionId::one(family), sing, vec![], None))
}

fn make_nls_two(spec: &EquationSpec, family: Family, d1: i8, d2: i8, q1: f64) -> Result<FieldSolution> {
    check_spec(spec, family)?;
    check_deltas(d1, d2)?;
    check_q1(spec.q0, q1)?;
    let th0 = family.fixed_theta().unwrap_or(0.0);
    if !near(spec.theta_plus, th0) {
        return Err(IstError::ParameterDomain(format!("{} requires θ₊ = {th0}", family.slug())));
    }
    let w = (spec.q0.powi(4) - q1.powi(4)) / (q1 * q1);
    let sing = if d1 * d2 == 1 {
        vec![SingularSet::PointLattice { x0: 0.0, t0: 0.0, period: PI / w.abs() }]
    } else {
        vec![]
    };
    Ok(solution(spec, SolutionId::two(family, d1, d2, q1), sing, vec![], None))
}

/// NLS case 2 (σ = 1, θ₊+θ₋ = π, θ₊ = π/2).
pub fn make_nls_case2(spec: &EquationSpec, d1: i8, d2: i8, q1: f64) -> Result<FieldSolution> {
    make_nls_two(spec, Family::NlsCase2Two, d1, d2, q1)
}

/// NLS case 4 (σ = −1, θ₊+θ₋ = 0, θ₊ = 0).
pub fn make_nls_case4(spec: &EquationSpec, d1: i8, d2: i8, q1: f64) -> Result<FieldSolution> {
    make_nls_two(spec, Family::NlsCase4Two, d1, d2, q1)
}

/// Gordon dark 1-soliton on the background q0 e^{i(αt+βx+θ±)}.
pub fn make_spatial_bc(spec: &EquationSpec) -> Result<FieldSolution> {
    let family = match spec.kind {
        EquationKind::SinhGordon => Family::SpatialBcSinh,
        EquationKind::SineGordon => Family::SpatialBcSine,
        EquationKind::RstNls => return Err(IstError::ParameterDomain("spatial BC families are Gordon-only".into())),
    };
    check_spec(spec, family)?;
    let (q0, th, al, be) = (spec.q0, spec.theta_plus, spec.alpha, spec.beta);
    match family {
        Family::SpatialBcSinh => {
            if near(th, 0.0) || near(th, PI) {
                return Err(IstError::DegeneratePhase(th));
            }
            let d = be - 2.0 * q0 * th.cos();
            if d.abs() < 1e-12 {
                return Err(IstError::VelocityPole(d));
            }
            Ok(solution(spec, SolutionId::one(family), vec![], vec![], None))
        }
        _ => {
            if near(th, FRAC_PI_2) || near(th, 3.0 * FRAC_PI_2) {
                return Err(IstError::DegeneratePhase(th));
            }
            let d = be + 2.0 * q0 * th.sin();
            if d.abs() < 1e-12 {
                return Err(IstError::VelocityPole(d));
            }
            let e = C64::from_polar(1.0, th);
            let c = th.cos();
            let zero = C64::from(0.0);
            let tail = al * (2.0 * q0 * e + I * be) / d;
            let num = vec![
                ExpTerm::new(-e, zero, C64::new(2.0 * q0 * al * c / d, al)),
                ExpTerm::new(e, C64::from(4.0 * q0 * c), C64::new(-2.0 * q0 * c * al / d, al)),
                ExpTerm::new(C64::from(-2.0 * c), C64::from(2.0 * q0 * c), C64::new(0.0, al)),
                ExpTerm::new(C64::from(2.0 * c), zero, tail),
            ];
            let den = vec![
                ExpTerm::new(C64::from(-1.0), zero, tail),
                ExpTerm::new(C64::from(1.0), C64::from(4.0 * q0 * c), C64::new(-2.0 * q0 * c * al / d, al)),
            ];
            let exp = ExpRatio { pref: ExpTerm::new(C64::from(q0), C64::new(0.0, be), C64::new(0.0, al)), num, den };
            let rem = vec![SingularSet::Line { a: 1.0, b: -al / d, c: 0.0 }];
            Ok(solution(spec, SolutionId::one(family), vec![], rem, Some(exp)))
        }
    }
}

/// Build any family from its id and spec.
pub fn make(id: &SolutionId, spec: &EquationSpec) -> Result<FieldSolution> {
    let q1 = || id.q1.ok_or_else(|| IstError::ParameterDomain("q1 required".into()));
    match id.family {
        Family::SinhDark1 => make_sinh_dark1(spec),
        Family::SinhBright1Singular => make_sinh_bright1_singular(spec),
        Family::SineDark1 => make_sine_dark1(spec),
        Family::SineBright1Singular => make_sine_bright1_singular(spec),
        Family::SinhTwoSoliton => make_sinh_two(spec, id.d1, id.d2, q1()?),
        Family::SineTwoSoliton => make_sine_two(spec, id.d1, id.d2, q1()?),
        Family::NlsCase1Dark => make_nls_case1(spec, 1),
        Family::NlsCase1Singular => make_nls_case1(spec, -1),
        Family::NlsCase3Dark => make_nls_case3(spec, -1),
        Family::NlsCase3Singular => make_nls_case3(spec, 1),
        Family::NlsCase2Two => make_nls_case2(spec, id.d1, id.d2, q1()?),
        Family::NlsCase4Two => make_nls_case4(spec, id.d1, id.d2, q1()?),
        Family::SpatialBcSinh | Family::SpatialBcSine => make_spatial_bc(spec),
    }
}

fn sech(x: f64) -> f64 {
    if x.abs() > 700.0 { 0.0 } else { 1.0 / x.cosh() }
}

fn coth(x: f64) -> f64 {
    1.0 / x.tanh()
}

impl FieldSolution {
    pub fn family(&self) -> Family {
        self.id.family
    }

    pub fn is_singular(&self) -> bool {
        self.id.is_singular()
    }

    pub fn exp_ratio(&self) -> Option<&ExpRatio> {
        self.exp.as_ref()
    }

    /// Argument of the sech/coth in the sinh-type Gordon 1-solitons.
    fn x_sinh(&self, x: f64, t: f64) -> f64 {
        self.p.q0 * x * self.p.th.sin() + 0.5 * alpha_tan(self.p.alpha, self.p.th) * t
    }

    /// Argument of the tanh/coth in the sine-type Gordon 1-solitons.
    fn y_sine(&self, x: f64, t: f64) -> f64 {
        self.p.q0 * x * self.p.th.cos() - 0.5 * alpha_cot(self.p.alpha, self.p.th) * t
    }

    fn nls_two_parts(&self) -> (f64, f64, f64, f64, f64) {
        let (q0, q1) = (self.p.q0, self.p.q1);
        let w = (q0.powi(4) - q1.powi(4)) / (q1 * q1);
        let k = (q0 * q0 - q1 * q1) / q1;
        (q0, q1, w, k, q0 * q0 + q1 * q1)
    }

    pub fn eval_q(&self, x: f64, t: f64) -> C64 {
        let Params { q0, th, alpha, beta, .. } = self.p;
        let phase = C64::from_polar(1.0, alpha * t);
        match self.id.family {
            Family::SinhDark1 => {
                let xs = self.x_sinh(x, t);
                if xs.abs() > 300.0 {
                    return q0 * phase * (C64::from(th.cos()) + I * th.sin() * xs.signum());
                }
                let arg = C64::new(th, -q0 * x * th.sin() - 0.5 * alpha_tan(alpha, th) * t);
                q0 * phase * arg.cos() * sech(xs)
            }
            Family::SinhBright1Singular => {
                q0 * phase * (C64::from(th.cos()) + I * coth(self.x_sinh(x, t)) * th.sin())
            }
            Family::SineDark1 => q0 * phase * (I * th.sin() + th.cos() * self.y_sine(x, t).tanh()),
            Family::SineBright1Singular => {
                let e2 = C64::from_polar(1.0, 2.0 * th);
                0.5 * q0
                    * C64::from_polar(1.0, alpha * t - th)
                    * (e2 - 1.0 + (e2 + 1.0) * coth(self.y_sine(x, t)))
            }
            Family::SinhTwoSoliton | Family::SineTwoSoliton => self.exp.as_ref().unwrap().eval(x, t),
            Family::NlsCase1Dark => {
                let a = 2.0 * q0 * x * th.sin();
                let b = 2.0 * q0 * q0 * t * (2.0 * th).sin();
                let m = a.max(b);
                let (ea, eb) = ((a - m).exp(), (b - m).exp());
                let num = C64::from_polar(ea, th) + C64::from_polar(eb, -th);
                q0 * C64::from_polar(1.0, 2.0 * q0 * q0 * t) * num / (ea + eb)
            }
            Family::NlsCase1Singular => {
                let z = q0 * (x - 2.0 * q0 * t * th.cos()) * th.sin();
                q0 * C64::from_polar(1.0, 2.0 * q0 * q0 * t) * (C64::from(th.cos()) + I * th.sin() * coth(z))
            }
            Family::NlsCase3Dark => {
                let z = q0 * th.cos() * (x + 2.0 * q0 * t * th.sin());
                q0 * C64::from_polar(1.0, 2.0 * q0 * q0 * t) * (I * th.sin() + th.cos() * z.tanh())
            }
            Family::NlsCase3Singular => {
                let u = 2.0 * q0 * th.cos() * (x + 2.0 * q0 * t * th.sin());
                let ph = q0 * C64::from_polar(1.0, 2.0 * q0 * q0 * t);
                if u > 0.0 {
                    let f = (-u).exp();
                    ph * ((f * f + 1.0 + 2.0 * f) * th.cos() + I * th.sin() * (1.0 - f * f)) / (1.0 - f * f)
                } else {
                    let e = u.exp();
                    ph * ((1.0 + e * e + 2.0 * e) * th.cos() + I * th.sin() * (e * e - 1.0)) / (e * e - 1.0)
                }
            }
            Family::NlsCase2Two | Family::NlsCase4Two => self.eval_nls_two(x, t),
            Family::SpatialBcSinh => {
                let v = alpha / (beta - 2.0 * q0 * th.cos());
                let arg = q0 * th.sin() * (x - v * t);
                q0 * C64::from_polar(1.0, alpha * t + beta * x) * (C64::from(th.cos()) + I * th.sin() * arg.tanh())
            }
            Family::SpatialBcSine => {
                let e = self.exp.as_ref().unwrap();
                let line = self.removable_sets[0];
                if line.distance(x, t) < REMOVABLE_RADIUS {
                    if let Some(x0) = line.x_at(t) {
                        return e.eval_removable(x0, x, t);
                    }
                }
                e.eval(x, t)
            }
        }
    }

    fn eval_nls_two(&self, x: f64, t: f64) -> C64 {
        let (q0, q1, w, k, a) = self.nls_two_parts();
        let (d1, d2) = (self.p.d1, self.p.d2);
        let pre = C64::from_polar(1.0, -2.0 * q0 * q0 * t);
        let (q04, q14) = (q0.powi(4), q1.powi(4));
        let (cw, sw) = ((w * t).cos(), (w * t).sin());
        let ew = C64::from_polar(1.0, w * t);
        let emw = C64::from_polar(1.0, -w * t);
        let (ch, sh) = ((k * x).cosh(), (k * x).sinh());
        let num_den = match (self.id.family, d1, d2) {
            (Family::NlsCase2Two, 1, -1) => (
                I * (q04 + q14) * cw + I * q0 * q1 * a * ch + (q04 - q14) * sw,
                C64::from(q1 * (2.0 * q0 * q1 * cw + a * ch)),
            ),
            (Family::NlsCase2Two, -1, 1) => (
                -I * (q04 + q14) * cw + I * q0 * q1 * a * ch + (q14 - q04) * sw,
                C64::from(q1 * (-2.0 * q0 * q1 * cw + a * ch)),
            ),
            (Family::NlsCase2Two, 1, 1) => (
                I * (-q04 * emw + q14 * ew + q0 * q1 * a * sh),
                q1 * (2.0 * I * q0 * q1 * sw + a * sh),
            ),
            (Family::NlsCase2Two, _, _) => (
                I * (q04 - q14) * cw + I * q0 * q1 * a * sh + (q04 + q14) * sw,
                q1 * (-2.0 * I * q0 * q1 * sw + a * sh),
            ),
            (_, 1, -1) => (
                -q04 * emw - q14 * ew + q0 * q1 * a * ch,
                C64::from(q1 * (-2.0 * q0 * q1 * cw + a * ch)),
            ),
            (_, -1, 1) => (
                q04 * emw + q14 * ew + q0 * q1 * a * ch,
                C64::from(q1 * (2.0 * q0 * q1 * cw + a * ch)),
            ),
            (_, 1, 1) => (
                q04 * emw - q14 * ew + q0 * q1 * a * sh,
                q1 * (-2.0 * I * q0 * q1 * sw + a * sh),
            ),
            (_, _, _) => (
                -q04 * emw + q14 * ew + q0 * q1 * a * sh,
                q1 * (2.0 * I * q0 * q1 * sw + a * sh),
            ),
        };
        pre * num_den.0 / num_den.1
    }

    /// Companion field s(x, t) where a closed form exists.
    pub fn eval_s(&self, x: f64, t: f64) -> Option<C64> {
        let Params { q0, th, alpha, .. } = self.p;
        let v = match self.id.family {
            Family::SinhDark1 => {
                0.5 * q0 * alpha * sech(self.x_sinh(x, t)).powi(2) * th.sin() * alpha_tan(1.0, th)
            }
            Family::SinhBright1Singular => {
                let c = 0.5 * q0 * alpha * th.sin() * alpha_tan(1.0, th);
                -c * coth(self.x_sinh(x, t)).powi(2) + c
            }
            Family::SineDark1 => {
                -0.5 * q0 * alpha * th.cos() * alpha_cot(1.0, th) * sech(self.y_sine(x, t)).powi(2)
            }
            Family::SineBright1Singular => {
                let c = 0.5 * q0 * alpha * th.cos() * alpha_cot(1.0, th);
                c * coth(self.y_sine(x, t)).powi(2) - c
            }
            _ => return None,
        };
        Some(C64::from(v))
    }

    pub fn has_closed_s(&self) -> bool {
        matches!(
            self.id.family,
            Family::SinhDark1 | Family::SinhBright1Singular | Family::SineDark1 | Family::SineBright1Singular
        )
    }

    /// Exact (q, q_x, q_t) for the exponential-basis families.
    pub fn eval_with_derivs(&self, x: f64, t: f64) -> Option<(C64, C64, C64)> {
        if !self.removable_sets.is_empty() && self.removable_sets.iter().any(|r| r.distance(x, t) < 1e-4) {
            return None;
        }
        self.exp.as_ref().map(|e| e.eval_with_derivs(x, t))
    }

    /// Limit of s as |x| → ∞.
    pub fn s_infinity(&self) -> f64 {
        0.5 * self.p.alpha * self.p.beta
    }

    /// Asymptotic background including the e^{iβx} factor.
    pub fn background_at(&self, side: Side, x: f64, t: f64) -> C64 {
        self.spec.background(side, t) * C64::from_polar(1.0, self.p.beta * x)
    }

    /// Exponential rate at which q approaches its background.
    pub fn decay_rate(&self) -> f64 {
        let Params { q0, th, q1, .. } = self.p;
        match self.id.family {
            Family::SinhDark1 | Family::SinhBright1Singular | Family::NlsCase1Dark | Family::NlsCase1Singular => {
                2.0 * q0 * th.sin().abs()
            }
            Family::SpatialBcSinh => 2.0 * q0 * th.sin().abs(),
            Family::SineDark1 | Family::SineBright1Singular | Family::NlsCase3Dark | Family::NlsCase3Singular => {
                2.0 * q0 * th.cos().abs()
            }
            Family::SpatialBcSine => 2.0 * q0 * th.cos().abs(),
            Family::SinhTwoSoliton | Family::SineTwoSoliton | Family::NlsCase2Two | Family::NlsCase4Two => {
                (q1 * q1 - q0 * q0) / q1
            }
        }
    }

    /// Half-width beyond which q sits on its background to about e^{−25}.
    pub fn half_width(&self) -> f64 {
        (25.0 / self.p.q0).max(25.0 / self.decay_rate())
    }

    /// Scale-free denominator whose zero set is the singular set.
    pub fn denominator(&self, x: f64, t: f64) -> C64 {
        let Params { q0, th, .. } = self.p;
        let ratio_cosh = |z: f64| C64::from(1.0 + (-2.0 * z.abs()).exp());
        let ratio_sinh = |z: f64| C64::from(z.signum() * (1.0 - (-2.0 * z.abs()).exp()));
        match self.id.family {
            Family::SinhDark1 => ratio_cosh(self.x_sinh(x, t)),
            Family::SinhBright1Singular => ratio_sinh(self.x_sinh(x, t)),
            Family::SineDark1 => ratio_cosh(self.y_sine(x, t)),
            Family::SineBright1Singular => ratio_sinh(self.y_sine(x, t)),
            Family::NlsCase1Dark => {
                let a = 2.0 * q0 * x * th.sin();
                let b = 2.0 * q0 * q0 * t * (2.0 * th).sin();
                C64::from(1.0 + (-(a - b).abs()).exp())
            }
            Family::NlsCase1Singular => ratio_sinh(q0 * (x - 2.0 * q0 * t * th.cos()) * th.sin()),
            Family::NlsCase3Dark => ratio_cosh(q0 * th.cos() * (x + 2.0 * q0 * t * th.sin())),
            Family::NlsCase3Singular => ratio_sinh(q0 * th.cos() * (x + 2.0 * q0 * t * th.sin())),
            Family::SinhTwoSoliton | Family::SineTwoSoliton => self.exp.as_ref().unwrap().den_relative_to(2, x, t),
            Family::NlsCase2Two | Family::NlsCase4Two => {
                let (q0, q1, w, k, a) = self.nls_two_parts();
                let (cw, sw) = ((w * t).cos(), (w * t).sin());
                let (ch, sh) = ((k * x).cosh(), (k * x).sinh());
                match (self.id.family, self.p.d1, self.p.d2) {
                    (Family::NlsCase2Two, 1, -1) | (Family::NlsCase4Two, -1, 1) => C64::from(2.0 * q0 * q1 * cw + a * ch),
                    (Family::NlsCase2Two, -1, 1) | (Family::NlsCase4Two, 1, -1) => C64::from(-2.0 * q0 * q1 * cw + a * ch),
                    (Family::NlsCase2Two, 1, 1) | (Family::NlsCase4Two, -1, -1) => 2.0 * I * q0 * q1 * sw + a * sh,
                    _ => -2.0 * I * q0 * q1 * sw + a * sh,
                }
            }
            Family::SpatialBcSinh => {
                let v = self.p.alpha / (self.p.beta - 2.0 * q0 * th.cos());
                ratio_cosh(q0 * th.sin() * (x - v * t))
            }
            Family::SpatialBcSine => {
                C64::from(self.exp.as_ref().unwrap().den_relative_size(x, t))
            }
        }
    }

    /// Proven positive lower bound on |denominator| for the nonsingular
    /// families, when one is available.
    pub fn denominator_lower_bound(&self) -> Option<f64> {
        let Params { q0, q1, d1, d2, .. } = self.p;
        match self.id.family {
            Family::SinhDark1 | Family::SineDark1 | Family::NlsCase1Dark | Family::NlsCase3Dark | Family::SpatialBcSinh => Some(1.0),
            Family::SinhTwoSoliton | Family::SineTwoSoliton if d1 * d2 == -1 => {
                Some(4.0 * (q1 * q1 - q0 * q0).powi(2))
            }
            Family::NlsCase2Two | Family::NlsCase4Two if d1 * d2 == -1 => Some((q1 - q0).powi(2)),
            _ => None,
        }
    }

    /// Distance from (x, t) to the nearest declared singular set.
    pub fn singular_distance(&self, x: f64, t: f64) -> f64 {
        self.singular_sets.iter().map(|s| s.distance(x, t)).fold(f64::INFINITY, f64::min)
    }
}
