//! Reflectionless inverse problem: the closed J×J system for N₁(x, z_j),
//! recovery of q(x, t), and the cross-check routes through N̄₁ and N₂.
//!
//! With E_l = e^{2iλ(z_l)x}, Ē_j = e^{−2iλ(z̄_j)x},
//!   c_mj = z_m b̄_j Ē_j / ((z_m − z̄_j) z̄_j ā′_j),
//!   d_jl = z̄_j b_l E_l / ((z̄_j − z_l) z_l a′_l),
//! the system is (I − CD) N₁ = −iq₊ + C z̄ and
//! q = q₊ [1 + Σ b_j E_j N₁_j / (−z_j² a′_j)].

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{IstError, Result};
use crate::model_config::{normalize_phase, EquationSpec, Side};
use crate::scattering_data::{ConstraintReport, ScatteringData};
use crate::spectral_plane::{k_lambda_raw, CutTopology};
use crate::{C64, I};

/// |det A| relative to its term magnitudes below which a point is treated
/// as a zero of det A.
pub const DET_RATIO_TOL: f64 = 1e-5;
/// Numerator ratio below which a zero of det A counts as removable.
const NUM_RATIO_TOL: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    pub j: usize,
    /// A = I − CD
    pub a: DMatrix<C64>,
    pub c: DMatrix<C64>,
    pub d: DMatrix<C64>,
    /// −iq₊ + C z̄
    pub rhs: DVector<C64>,
    /// z + C·(i r₊), right-hand side of the N₂ system
    pub rhs2: DVector<C64>,
    /// w_l = b_l E_l / (−z_l² a′_l), so q = q₊ (1 + wᵀN₁)
    pub w: DVector<C64>,
    pub e: Vec<C64>,
    pub ebar: Vec<C64>,
    pub q_plus: C64,
    pub r_plus: C64,
    /// Σ of entry magnitudes of A row by row (identity plus |C||D|)
    mag_a: DMatrix<f64>,
    mag_rhs: DVector<f64>,
    zeros: Vec<C64>,
    zeros_bar: Vec<C64>,
    b: Vec<C64>,
    bbar: Vec<C64>,
    ap: Vec<C64>,
    abp: Vec<C64>,
}

fn hadamard(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.norm()).product()
}

impl DiscreteSystem {
    pub fn det(&self) -> C64 {
        if self.j == 0 { C64::from(1.0) } else { self.a.clone().lu().determinant() }
    }

    /// |det A| / ∏ row norms of the term-magnitude matrix, in [0, 1].
    pub fn det_ratio(&self) -> f64 {
        if self.j == 0 {
            return 1.0;
        }
        self.det().norm() / hadamard(&self.mag_a)
    }

    /// det(A + rhs·wᵀ) = det A (1 + wᵀA⁻¹rhs), relative to its term magnitudes.
    pub fn numerator_ratio(&self) -> f64 {
        if self.j == 0 {
            return 1.0;
        }
        let m = &self.a + &self.rhs * self.w.transpose();
        let mag = &self.mag_a + &self.mag_rhs * self.w.map(|v| v.norm()).transpose();
        m.lu().determinant().norm() / hadamard(&mag)
    }

    fn solve(&self, rhs: &DVector<C64>, x: f64, t: f64) -> Result<DVector<C64>> {
        if self.j == 0 {
            return Ok(DVector::zeros(0));
        }
        if self.det_ratio() < DET_RATIO_TOL {
            return Err(IstError::SingularPoint { x, t });
        }
        self.a.clone().lu().solve(rhs).ok_or(IstError::SingularPoint { x, t })
    }

    pub fn n1(&self, x: f64, t: f64) -> Result<DVector<C64>> {
        self.solve(&self.rhs, x, t)
    }

    pub fn q_from_n1(&self, n1: &DVector<C64>) -> C64 {
        self.q_plus * (C64::from(1.0) + self.w.dot(n1))
    }

    /// q from the large-z expansion of N̄: N̄₁(z̄_j) = z̄_j + Σ d_jl N₁_l.
    pub fn q_from_nbar(&self, n1: &DVector<C64>) -> C64 {
        let nb1 = DVector::from_vec(self.zeros_bar.clone()) + &self.d * n1;
        let mut s = -I * self.q_plus;
        for j in 0..self.j {
            s += self.bbar[j] * self.ebar[j] * nb1[j] / (self.zeros_bar[j] * self.abp[j]);
        }
        I * s
    }

    /// r(x, t) = σq(−x, −t) from the N₂ system.
    pub fn r_from_n2(&self, x: f64, t: f64) -> Result<C64> {
        let n2 = self.solve(&self.rhs2, x, t)?;
        let mut s = I * self.r_plus;
        for l in 0..self.j {
            s += self.b[l] * self.e[l] * n2[l] / (self.zeros[l] * self.ap[l]);
        }
        Ok(-I * s)
    }
}

/// Validated reflectionless data with the time-independent parts (a′, ā′,
/// λ(z_j)) precomputed.
#[derive(Debug, Clone)]
pub struct Reconstructor {
    pub spec: EquationSpec,
    pub data: ScatteringData,
    pub constraint: ConstraintReport,
    topology: CutTopology,
    ap: Vec<C64>,
    abp: Vec<C64>,
    lam: Vec<C64>,
    lam_bar: Vec<C64>,
    /// x-step of the removable-point extrapolation
    h_rich: f64,
}

impl Reconstructor {
    pub fn new(data: &ScatteringData, spec: &EquationSpec) -> Result<Self> {
        spec.validate()?;
        if !data.is_reflectionless() {
            return Err(IstError::NotReflectionless);
        }
        let case = spec.case()?;
        let dth = (normalize_phase(spec.theta_plus) - normalize_phase(data.theta_plus)).abs();
        if case != data.case || (spec.q0 - data.q0).abs() > 1e-12 * data.q0 || dth.min(std::f64::consts::TAU - dth) > 1e-9 {
            return Err(IstError::InvalidParameter("scattering data and equation spec disagree".into()));
        }
        let constraint = data.validate()?;
        let ap = data.a_primes().map_err(|_| IstError::MissingDerivative(0))?;
        let abp = data.abar_primes().map_err(|_| IstError::MissingDerivative(0))?;
        let topology = data.topology();
        let lam: Vec<C64> = data.zeros.iter().map(|&z| k_lambda_raw(z, data.q0, topology).1).collect();
        let lam_bar = data.zeros_bar.iter().map(|&z| k_lambda_raw(z, data.q0, topology).1).collect();
        let rate = lam.iter().map(|l| 2.0 * l.im.abs()).fold(1.0, f64::max);
        Ok(Reconstructor {
            spec: *spec,
            data: data.clone(),
            constraint,
            topology,
            ap,
            abp,
            lam,
            lam_bar,
            h_rich: 1e-3 / rate,
        })
    }

    pub fn topology(&self) -> CutTopology {
        self.topology
    }

    pub fn assemble(&self, x: f64, t: f64) -> Result<DiscreteSystem> {
        let ev = self.data.evolve(&self.spec, t)?;
        let n = ev.len();
        let (zs, zbs) = (&ev.zeros, &ev.zeros_bar);
        let e: Vec<C64> = self.lam.iter().map(|l| (2.0 * I * l * x).exp()).collect();
        let ebar: Vec<C64> = self.lam_bar.iter().map(|l| (-2.0 * I * l * x).exp()).collect();
        let c = DMatrix::from_fn(n, n, |m, j| zs[m] * ev.bbar[j] * ebar[j] / ((zs[m] - zbs[j]) * zbs[j] * self.abp[j]));
        let d = DMatrix::from_fn(n, n, |j, l| zbs[j] * ev.b[l] * e[l] / ((zbs[j] - zs[l]) * zs[l] * self.ap[l]));
        let a = DMatrix::<C64>::identity(n, n) - &c * &d;
        let mag_a = DMatrix::<f64>::identity(n, n) + c.map(|v| v.norm()) * d.map(|v| v.norm());
        let q_plus = self.spec.q_plus(t);
        let r_plus = self.spec.r_plus(t);
        let zbv = DVector::from_vec(zbs.clone());
        let rhs = DVector::from_element(n, -I * q_plus) + &c * &zbv;
        let mag_rhs = DVector::from_element(n, q_plus.norm()) + c.map(|v| v.norm()) * zbv.map(|v| v.norm());
        let rhs2 = DVector::from_vec(zs.clone()) + &c * DVector::from_element(n, I * r_plus);
        let w = DVector::from_fn(n, |l, _| ev.b[l] * e[l] / (-zs[l] * zs[l] * self.ap[l]));
        Ok(DiscreteSystem {
            j: n,
            a,
            c,
            d,
            rhs,
            rhs2,
            w,
            e,
            ebar,
            q_plus,
            r_plus,
            mag_a,
            mag_rhs,
            zeros: zs.clone(),
            zeros_bar: zbs.clone(),
            b: ev.b.clone(),
            bbar: ev.bbar.clone(),
            ap: self.ap.clone(),
            abp: self.abp.clone(),
        })
    }

    fn spatial_factor(&self, x: f64) -> C64 {
        if self.spec.beta == 0.0 { C64::from(1.0) } else { C64::from_polar(1.0, self.spec.beta * x) }
    }

    /// q by direct solve; SingularPoint wherever det A is numerically zero.
    pub fn q_direct(&self, x: f64, t: f64) -> Result<C64> {
        let sys = self.assemble(x, t)?;
        let n1 = sys.n1(x, t)?;
        Ok(sys.q_from_n1(&n1) * self.spatial_factor(x))
    }

    /// q(x, t). At a joint zero of det A and the recovery numerator (a
    /// removable point) the value is extrapolated from x ± h, x ± 2h.
    pub fn q(&self, x: f64, t: f64) -> Result<C64> {
        let sys = self.assemble(x, t)?;
        if sys.det_ratio() >= DET_RATIO_TOL {
            let n1 = sys.n1(x, t)?;
            return Ok(sys.q_from_n1(&n1) * self.spatial_factor(x));
        }
        if sys.numerator_ratio() > NUM_RATIO_TOL {
            return Err(IstError::SingularPoint { x, t });
        }
        let h = self.h_rich;
        let m = |h: f64| -> Result<C64> { Ok(0.5 * (self.q_direct(x + h, t)? + self.q_direct(x - h, t)?)) };
        Ok((4.0 * m(h)? - m(2.0 * h)?) / 3.0)
    }

    /// q through N̄₁ (the large-z expansion of the barred eigenfunction).
    /// The expansion cancels against the background as x → −∞, so this
    /// route loses relative accuracy there (about 1e-7 at x = −4 for q1 = 6).
    pub fn q_nbar(&self, x: f64, t: f64) -> Result<C64> {
        let sys = self.assemble(x, t)?;
        let n1 = sys.n1(x, t)?;
        Ok(sys.q_from_nbar(&n1) * self.spatial_factor(x))
    }

    /// r(x, t) through the N₂ system; equals σq(−x, −t).
    pub fn r_right(&self, x: f64, t: f64) -> Result<C64> {
        let sys = self.assemble(x, t)?;
        Ok(sys.r_from_n2(x, t)? * self.spatial_factor(-x))
    }

    /// det A / term magnitude at (x, t); zero sets of this locate the
    /// singular lines.
    pub fn det_ratio(&self, x: f64, t: f64) -> Result<f64> {
        Ok(self.assemble(x, t)?.det_ratio())
    }

    /// |q(±x, t) − q±(t)e^{±iβx}|, the larger of the two.
    pub fn boundary_defect(&self, x: f64, t: f64) -> Result<f64> {
        let dp = (self.q(x, t)? - self.spec.background(Side::Plus, t) * self.spatial_factor(x)).norm();
        let dm = (self.q(-x, t)? - self.spec.background(Side::Minus, t) * self.spatial_factor(-x)).norm();
        Ok(dp.max(dm))
    }

    /// q on the tensor grid xs × ts, row-major in t.
    pub fn q_grid(&self, xs: &[f64], ts: &[f64]) -> Vec<Result<C64>> {
        let pts: Vec<(f64, f64)> = ts.iter().flat_map(|&t| xs.iter().map(move |&x| (x, t))).collect();
        pts.par_iter().map(|&(x, t)| self.q(x, t)).collect()
    }
}

pub fn assemble(data: &ScatteringData, spec: &EquationSpec, x: f64, t: f64) -> Result<DiscreteSystem> {
    Reconstructor::new(data, spec)?.assemble(x, t)
}

pub fn recover_q(data: &ScatteringData, spec: &EquationSpec, x: f64, t: f64) -> Result<C64> {
    Reconstructor::new(data, spec)?.q(x, t)
}

/// s on xs × ts (row-major in t) by quadrature of its defining integral
/// applied to the reconstructed q. Gordon equations only.
pub fn recover_s(data: &ScatteringData, spec: &EquationSpec, xs: &[f64], ts: &[f64]) -> Result<Vec<C64>> {
    if !spec.kind.is_gordon() {
        return Err(IstError::ParameterDomain("s is defined for the Gordon equations".into()));
    }
    let r = Reconstructor::new(data, spec)?;
    if r.data.is_empty() {
        return Ok(vec![C64::from(0.5 * spec.alpha * spec.beta); xs.len() * ts.len()]);
    }
    let rate = r.lam.iter().map(|l| 2.0 * l.im.abs()).fold(f64::INFINITY, f64::min);
    let x_edge = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let x_max = x_edge.max(crate::verify::tail_width(spec.q0, rate));
    let q = |x: f64, t: f64| r.q(x, t);
    let rows: Vec<Result<Vec<C64>>> = ts
        .par_iter()
        .map(|&t| crate::verify::s_profile(&q, spec, xs, t, x_max, rate, None))
        .collect();
    let mut out = Vec::with_capacity(xs.len() * ts.len());
    for row in rows {
        out.extend(row?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::closed_form::{make, Family, SolutionId};
    use crate::model_config::PhaseSum;
    use std::f64::consts::PI;

    fn recon(id: SolutionId, spec: EquationSpec) -> (Reconstructor, crate::closed_form::FieldSolution) {
        let d = ScatteringData::for_solution(&id, &spec).unwrap();
        (Reconstructor::new(&d, &spec).unwrap(), make(&id, &spec).unwrap())
    }

    #[test]
    fn empty_data_is_background() {
        let spec = EquationSpec::sinh_gordon(2.0, 0.0, 1.0);
        let d = ScatteringData::new(spec.case().unwrap(), 2.0, 0.0, vec![], vec![]).unwrap();
        for (x, t) in [(0.0, 0.0), (-3.0, 1.2), (7.0, -2.0)] {
            assert!((recover_q(&d, &spec, x, t).unwrap() - spec.q_plus(t)).norm() < 1e-15);
        }
    }

    #[test]
    fn one_soliton_n1_display() {
        let (q0, th, al, x, t) = (2.0, PI / 3.0, 1.0, 0.4, 0.3);
        let spec = EquationSpec::sinh_gordon(q0, th, al);
        let id = SolutionId::one(Family::SinhDark1);
        let (r, _) = recon(id, spec);
        let sys = r.assemble(x, t).unwrap();
        let n1 = sys.n1(x, t).unwrap()[0];
        let ev = r.data.evolve(&spec, t).unwrap();
        let (b, bb) = (ev.b[0], ev.bbar[0]);
        let e1 = (-2.0 * q0 * x * th.sin()).exp();
        let want = (-I * q0 * C64::from_polar(1.0, al * t + th) - bb * C64::from_polar(q0, th) * e1) / (1.0 - b * bb * e1 * e1);
        assert!((n1 - want).norm() < 1e-13, "{n1} vs {want}");
        let far = r.assemble(40.0, t).unwrap().n1(40.0, t).unwrap()[0];
        assert!((far + I * spec.q_plus(t)).norm() < 1e-13);
    }

    #[test]
    fn dark_families_match_closed_forms() {
        let cases = [
            (SolutionId::one(Family::SinhDark1), EquationSpec::sinh_gordon(2.0, PI / 3.0, 1.0)),
            (SolutionId::one(Family::SineDark1), EquationSpec::sine_gordon(2.0, PI / 3.0, 1.0)),
            (SolutionId::one(Family::NlsCase1Dark), EquationSpec::rst_nls(1, 2.0, PI / 3.0, PhaseSum::Zero)),
            (SolutionId::one(Family::NlsCase3Dark), EquationSpec::rst_nls(-1, 2.0, PI / 3.0, PhaseSum::Pi)),
        ];
        for (id, spec) in cases {
            let (r, sol) = recon(id, spec);
            let mut worst = 0.0f64;
            for i in 0..41 {
                for k in 0..9 {
                    let (x, t) = (-2.0 + 0.1 * i as f64, -1.0 + 0.25 * k as f64);
                    worst = worst.max((r.q(x, t).unwrap() - sol.eval_q(x, t)).norm());
                }
            }
            assert!(worst < 1e-10, "{}: {worst:e}", id.family.slug());
        }
    }

    #[test]
    fn removable_point_on_centre_line() {
        let spec = EquationSpec::sinh_gordon(2.0, PI / 3.0, 1.0);
        let (r, sol) = recon(SolutionId::one(Family::SinhDark1), spec);
        // the dark centre line passes through the origin
        let sys = r.assemble(0.0, 0.0).unwrap();
        assert!(sys.det_ratio() < 1e-12);
        assert!(matches!(r.q_direct(0.0, 0.0), Err(IstError::SingularPoint { .. })));
        assert!((r.q(0.0, 0.0).unwrap() - sol.eval_q(0.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn singular_family_reports_points() {
        let spec = EquationSpec::sinh_gordon(2.0, PI / 3.0, 1.0);
        let (r, _) = recon(SolutionId::one(Family::SinhBright1Singular), spec);
        assert!(matches!(r.q(0.0, 0.0), Err(IstError::SingularPoint { .. })));
        assert!(r.q(0.5, 0.0).is_ok());
    }

    #[test]
    fn alternative_routes_agree() {
        let spec = EquationSpec::sinh_gordon_pi(2.0, PI / 2.0, 1.0);
        let (r, _) = recon(SolutionId::two(Family::SinhTwoSoliton, 1, -1, 4.0), spec);
        for (x, t) in [(0.3, 0.2), (-0.7, 0.5), (1.5, -1.0)] {
            let q = r.q(x, t).unwrap();
            assert!((r.q_nbar(x, t).unwrap() - q).norm() < 1e-12);
            let qr = r.q(-x, -t).unwrap();
            assert!((r.r_right(x, t).unwrap() - spec.sigma_f() * qr).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_mismatch_and_reflection() {
        let spec = EquationSpec::sinh_gordon(2.0, PI / 3.0, 1.0);
        let d = ScatteringData::for_solution(&SolutionId::one(Family::SinhDark1), &spec).unwrap();
        let other = EquationSpec::sinh_gordon(2.0, 1.0, 1.0);
        assert!(Reconstructor::new(&d, &other).is_err());
        let mut refl = d.clone();
        refl.reflection = crate::scattering_data::Reflection::Sampled { real: vec![[0.0, 0.1, 0.0]], circle: vec![] };
        assert!(matches!(Reconstructor::new(&refl, &spec), Err(IstError::NotReflectionless)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn reconstruction_meets_backgrounds(t in -3.0f64..3.0, th in 0.2f64..1.3, which in 0usize..4) {
            let family = [Family::SinhDark1, Family::SineDark1, Family::NlsCase1Dark, Family::NlsCase3Dark][which];
            let id = SolutionId::one(family);
            let (r, _) = recon(id, id.spec(2.0, th, 1.0, 0.0));
            for (x, side) in [(40.0, Side::Plus), (-40.0, Side::Minus)] {
                let d = (r.q(x, t).unwrap() - r.spec.background(side, t)).norm();
                prop_assert!(d <= 1e-10, "x = {}: {:e}", x, d);
            }
        }

        #[test]
        fn q_routes_agree(x in -2.0f64..5.0, t in -3.0f64..3.0, q1 in 2.5f64..6.0, which in 0usize..2) {
            let family = [Family::SinhTwoSoliton, Family::NlsCase4Two][which];
            let id = SolutionId::two(family, 1, -1, q1);
            let (r, sol) = recon(id, id.spec(2.0, 0.0, 1.0, 0.0));
            let (a, b) = (r.q(x, t).unwrap(), r.q_nbar(x, t).unwrap());
            prop_assert!((a - b).norm() <= 1e-9 * a.norm().max(1.0), "{:e}", (a - b).norm());
            prop_assert!((a - sol.eval_q(x, t)).norm() <= 1e-8 * a.norm().max(1.0));
        }
    }
}
