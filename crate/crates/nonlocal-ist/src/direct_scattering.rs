//! Direct scattering: Jost eigenfunctions by ODE integration in the bounded
//! gauge, Wronskian scattering coefficients, discrete eigenvalue search and
//! norming-constant extraction, plus a Green's-function fixed-point oracle.
//!
//! Gauge: M = e^{iλx}φ, M̄ = e^{−iλx}φ̄ (from −L), N = e^{−iλx}ψ,
//! N̄ = e^{iλx}ψ̄ (from +L). At x = 0 the gauge factors are 1.

use std::sync::Arc;

use nalgebra::Matrix2;
use ode_solvers::{Dop853, OutputType, SVector, System};
use rayon::prelude::*;

use crate::closed_form::FieldSolution;
use crate::error::{IstError, Result};
use crate::model_config::{EquationSpec, Side};
use crate::spectral_plane::{region_of, CutTopology, RegionTag, SpectralPoint};
use crate::{C64, I};

pub type PotentialFn = Arc<dyn Fn(f64, f64) -> C64 + Send + Sync>;

/// (Re u, Im u, Re v, Im v, s): the travel variable is carried as a state so
/// the system is autonomous and the stage abscissae never enter.
type State = SVector<f64, 5>;
type Vec2 = [C64; 2];

/// A potential q(x, t) on [−L, L] with its background data. The lower-left
/// entry r(x, t) = σ q(−x, −t) is always built from q.
#[derive(Clone)]
pub struct PotentialSample {
    q: PotentialFn,
    pub spec: EquationSpec,
    pub topology: CutTopology,
    pub half_width: f64,
    pub eps_tail: f64,
}

impl std::fmt::Debug for PotentialSample {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PotentialSample")
            .field("spec", &self.spec)
            .field("half_width", &self.half_width)
            .field("eps_tail", &self.eps_tail)
            .finish()
    }
}

impl PotentialSample {
    /// Wrap q; the tail defect at ±L (sampled over a few times) must not
    /// exceed `eps_tail`.
    pub fn new(q: PotentialFn, spec: EquationSpec, half_width: f64, eps_tail: f64) -> Result<Self> {
        spec.validate()?;
        if spec.beta != 0.0 {
            return Err(IstError::ParameterDomain("direct scattering assumes β = 0".into()));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(IstError::InvalidParameter(format!("half width {half_width}")));
        }
        let topology = CutTopology::for_case(spec.case()?);
        let p = PotentialSample { q, spec, topology, half_width, eps_tail };
        let defect = p.tail_defect(&[-1.0, 0.0, 1.0]);
        if defect > eps_tail {
            return Err(IstError::InvalidParameter(format!(
                "tail defect {defect:.3e} at |x| = {half_width} exceeds {eps_tail:.3e}"
            )));
        }
        Ok(p)
    }

    /// Potential of a closed-form solution on its natural domain; `eps_tail`
    /// is set to the measured tail defect.
    pub fn from_solution(sol: &FieldSolution) -> Result<Self> {
        Self::from_solution_with_width(sol, sol.half_width())
    }

    pub fn from_solution_with_width(sol: &FieldSolution, half_width: f64) -> Result<Self> {
        let s = sol.clone();
        let q: PotentialFn = Arc::new(move |x, t| s.eval_q(x, t));
        let mut p = PotentialSample::new(q, sol.spec, half_width, f64::INFINITY)?;
        p.eps_tail = p.tail_defect(&[-1.0, 0.0, 1.0]);
        Ok(p)
    }

    /// Constant potential q0 e^{i(αt+θ₊)}; needs θ₊ = θ₋.
    pub fn uniform_background(spec: EquationSpec, half_width: f64) -> Result<Self> {
        let d = (spec.theta_plus - spec.theta_minus).rem_euclid(std::f64::consts::TAU);
        if d > 1e-12 && std::f64::consts::TAU - d > 1e-12 {
            return Err(IstError::ParameterDomain("uniform background needs θ₊ = θ₋".into()));
        }
        let q: PotentialFn = Arc::new(move |_, t| spec.background(Side::Plus, t));
        PotentialSample::new(q, spec, half_width, 0.0)
    }

    pub fn q(&self, x: f64, t: f64) -> C64 {
        (self.q)(x, t)
    }

    pub fn r(&self, x: f64, t: f64) -> C64 {
        self.spec.sigma_f() * (self.q)(-x, -t)
    }

    /// max over the sample times of |q(±L, t) − q±(t)|.
    pub fn tail_defect(&self, times: &[f64]) -> f64 {
        let l = self.half_width;
        times
            .iter()
            .map(|&t| {
                let dp = (self.q(l, t) - self.spec.background(Side::Plus, t)).norm();
                let dm = (self.q(-l, t) - self.spec.background(Side::Minus, t)).norm();
                dp.max(dm)
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryVectors {
    pub w: Vec2,
    pub wbar: Vec2,
    pub v: Vec2,
    pub vbar: Vec2,
}

/// w, w̄ (left) and v, v̄ (right) normalizations at (k, λ) and time t.
pub fn boundary_vectors(spec: &EquationSpec, k: C64, lam: C64, t: f64) -> BoundaryVectors {
    let s = lam + k;
    BoundaryVectors {
        w: [s, I * spec.r_minus(t)],
        wbar: [-I * spec.q_minus(t), s],
        v: [-I * spec.q_plus(t), s],
        vbar: [s, I * spec.r_plus(t)],
    }
}

#[derive(Debug, Clone, Copy)]
pub struct JostOptions {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for JostOptions {
    fn default() -> Self {
        JostOptions { rtol: 1e-12, atol: 1e-14 }
    }
}

/// Bounded-gauge Lax system in the travel variable s ≥ 0, x = x0 + dir·s.
struct Lax<'a> {
    p: &'a PotentialSample,
    k: C64,
    shift: C64,
    t: f64,
    x0: f64,
    dir: f64,
}

impl System<f64, State> for Lax<'_> {
    fn system(&self, _s: f64, y: &State, dy: &mut State) {
        let x = self.x0 + self.dir * y[4];
        let q = self.p.q(x, self.t);
        let r = self.p.r(x, self.t);
        let u = C64::new(y[0], y[1]);
        let v = C64::new(y[2], y[3]);
        let du = (self.shift - I * self.k) * u + q * v;
        let dv = r * u + (self.shift + I * self.k) * v;
        dy[0] = self.dir * du.re;
        dy[1] = self.dir * du.im;
        dy[2] = self.dir * dv.re;
        dy[3] = self.dir * dv.im;
        dy[4] = 1.0;
    }
}

fn pack(v: Vec2, s: f64) -> State {
    State::new(v[0].re, v[0].im, v[1].re, v[1].im, s)
}

fn unpack(y: &State) -> Vec2 {
    [C64::new(y[0], y[1]), C64::new(y[2], y[3])]
}

fn step_segment(sys: Lax<'_>, init: Vec2, s0: f64, s1: f64, opts: &JostOptions) -> Result<Vec2> {
    let scale = init[0].norm().max(init[1].norm()).max(1e-300);
    let span = s1 - s0;
    // oscillatory, never stiff: the stiffness heuristic only produces false alarms
    let mut solver = Dop853::from_param(
        sys,
        s0,
        s1,
        span,
        pack(init, s0),
        opts.rtol,
        opts.atol * scale,
        0.9,
        0.0,
        0.333,
        6.0,
        span,
        0.0,
        1_000_000,
        u32::MAX,
        OutputType::Sparse,
    );
    solver.integrate().map_err(|e| IstError::IntegratorFailure(e.to_string()))?;
    let y = solver.y_out().last().ok_or_else(|| IstError::IntegratorFailure("no output".into()))?;
    Ok(unpack(y))
}

/// Integrate the bounded-gauge system from x0 to x1 (either direction).
/// With `n_out > 0` returns n_out + 1 equally spaced samples (one restart
/// per cell), else only the endpoint.
#[allow(clippy::too_many_arguments)]
fn propagate(
    p: &PotentialSample,
    k: C64,
    shift: C64,
    t: f64,
    init: Vec2,
    x0: f64,
    x1: f64,
    n_out: usize,
    opts: &JostOptions,
) -> Result<Vec<(f64, Vec2)>> {
    let dir = if x1 >= x0 { 1.0 } else { -1.0 };
    let span = (x1 - x0).abs();
    if span == 0.0 {
        return Ok(vec![(x0, init)]);
    }
    let sys = || Lax { p, k, shift, t, x0, dir };
    if n_out == 0 {
        return Ok(vec![(x1, step_segment(sys(), init, 0.0, span, opts)?)]);
    }
    let ds = span / n_out as f64;
    let mut out = Vec::with_capacity(n_out + 1);
    out.push((x0, init));
    let mut y = init;
    for i in 0..n_out {
        let (s0, s1) = (i as f64 * ds, if i + 1 == n_out { span } else { (i + 1) as f64 * ds });
        y = step_segment(sys(), y, s0, s1, opts)?;
        out.push((x0 + dir * s1, y));
    }
    Ok(out)
}

fn check_point(z: &SpectralPoint) -> Result<(C64, C64)> {
    let (k, lam) = z.k_lambda();
    if lam.norm() <= 1e-8 * z.q0.max(1.0) {
        return Err(IstError::BranchPointProximity(lam.norm()));
    }
    Ok((k, lam))
}

/// The four Jost solutions at x = 0 together with their normalizations.
#[derive(Debug, Clone, Copy)]
pub struct JostPair {
    pub z: SpectralPoint,
    pub t: f64,
    pub bv: BoundaryVectors,
    pub phi: Vec2,
    pub phibar: Vec2,
    pub psi: Vec2,
    pub psibar: Vec2,
}

pub fn integrate_jost(p: &PotentialSample, z: &SpectralPoint, t: f64) -> Result<JostPair> {
    integrate_jost_with(p, z, t, &JostOptions::default())
}

pub fn integrate_jost_with(p: &PotentialSample, z: &SpectralPoint, t: f64, opts: &JostOptions) -> Result<JostPair> {
    let (k, lam) = check_point(z)?;
    let bv = boundary_vectors(&p.spec, k, lam, t);
    let l = p.half_width;
    let end = |v: Vec<(f64, Vec2)>| v.last().unwrap().1;
    let phi = end(propagate(p, k, I * lam, t, bv.w, -l, 0.0, 0, opts)?);
    let phibar = end(propagate(p, k, -I * lam, t, bv.wbar, -l, 0.0, 0, opts)?);
    let psi = end(propagate(p, k, -I * lam, t, bv.v, l, 0.0, 0, opts)?);
    let psibar = end(propagate(p, k, I * lam, t, bv.vbar, l, 0.0, 0, opts)?);
    Ok(JostPair { z: *z, t, bv, phi, phibar, psi, psibar })
}

/// det[u, v]
pub fn wronskian(u: Vec2, v: Vec2) -> C64 {
    u[0] * v[1] - u[1] * v[0]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WronskianData {
    pub a: C64,
    pub abar: C64,
    pub b: C64,
    pub bbar: C64,
    /// |aā − bb̄ − 1|
    pub unitarity_defect: f64,
}

impl JostPair {
    pub fn normalizer(&self) -> C64 {
        let (k, lam) = self.z.k_lambda();
        2.0 * lam * (lam + k)
    }

    pub fn coefficients(&self) -> Result<WronskianData> {
        let w0 = self.normalizer();
        if w0.norm() < 1e-14 * self.z.q0.max(self.z.z.norm()).powi(2) {
            return Err(IstError::DegenerateNormalizer);
        }
        let a = wronskian(self.phi, self.psi) / w0;
        let b = wronskian(self.psibar, self.phi) / w0;
        let abar = wronskian(self.psibar, self.phibar) / w0;
        let bbar = wronskian(self.phibar, self.psi) / w0;
        Ok(WronskianData { a, abar, b, bbar, unitarity_defect: (a * abar - b * bbar - 1.0).norm() })
    }
}

pub fn scattering_coeffs(p: &PotentialSample, z: &SpectralPoint, t: f64) -> Result<WronskianData> {
    integrate_jost(p, z, t)?.coefficients()
}

/// a(z) alone, from the two solutions that stay bounded for Im λ ≥ 0.
pub fn a_coeff(p: &PotentialSample, z: &SpectralPoint, t: f64, opts: &JostOptions) -> Result<C64> {
    let (k, lam) = check_point(z)?;
    let bv = boundary_vectors(&p.spec, k, lam, t);
    let l = p.half_width;
    let m = propagate(p, k, I * lam, t, bv.w, -l, 0.0, 0, opts)?[0].1;
    let n = propagate(p, k, -I * lam, t, bv.v, l, 0.0, 0, opts)?[0].1;
    Ok(wronskian(m, n) / (2.0 * lam * (lam + k)))
}

/// ā(z) alone, from the solutions that stay bounded for Im λ ≤ 0.
pub fn abar_coeff(p: &PotentialSample, z: &SpectralPoint, t: f64, opts: &JostOptions) -> Result<C64> {
    let (k, lam) = check_point(z)?;
    let bv = boundary_vectors(&p.spec, k, lam, t);
    let l = p.half_width;
    let mb = propagate(p, k, -I * lam, t, bv.wbar, -l, 0.0, 0, opts)?[0].1;
    let nb = propagate(p, k, I * lam, t, bv.vbar, l, 0.0, 0, opts)?[0].1;
    Ok(wronskian(nb, mb) / (2.0 * lam * (lam + k)))
}

/// Parallel map of `scattering_coeffs` over a batch of spectral points.
pub fn scattering_coeffs_batch(p: &PotentialSample, zs: &[SpectralPoint], t: f64) -> Vec<Result<WronskianData>> {
    zs.par_iter().map(|z| scattering_coeffs(p, z, t)).collect()
}

/// Bounded-gauge profiles on a uniform grid covering [−L, L].
#[derive(Debug, Clone)]
pub struct JostProfile {
    pub x: Vec<f64>,
    pub m: Vec<Vec2>,
    pub mbar: Vec<Vec2>,
    pub n: Vec<Vec2>,
    pub nbar: Vec<Vec2>,
}

/// Integrate all four solutions across the whole domain (meaningful on the
/// contour, where every gauge factor is bounded).
pub fn jost_profile(p: &PotentialSample, z: &SpectralPoint, t: f64, n_cells: usize) -> Result<JostProfile> {
    let (k, lam) = check_point(z)?;
    let opts = JostOptions::default();
    let bv = boundary_vectors(&p.spec, k, lam, t);
    let l = p.half_width;
    let fwd = |shift, init| propagate(p, k, shift, t, init, -l, l, n_cells, &opts);
    let bwd = |shift, init| propagate(p, k, shift, t, init, l, -l, n_cells, &opts);
    let m = fwd(I * lam, bv.w)?;
    let mbar = fwd(-I * lam, bv.wbar)?;
    let mut n = bwd(-I * lam, bv.v)?;
    let mut nbar = bwd(I * lam, bv.vbar)?;
    n.reverse();
    nbar.reverse();
    Ok(JostProfile {
        x: m.iter().map(|s| s.0).collect(),
        m: m.into_iter().map(|s| s.1).collect(),
        mbar: mbar.into_iter().map(|s| s.1).collect(),
        n: n.into_iter().map(|s| s.1).collect(),
        nbar: nbar.into_iter().map(|s| s.1).collect(),
    })
}

impl JostProfile {
    /// max over x of |W(x) − W(0)| / |W(0)| for W(φ, φ̄) and W(φ, ψ).
    /// Gauge factors cancel in both, so the bounded-gauge values are used.
    pub fn wronskian_drift(&self) -> f64 {
        let mid = self.x.len() / 2;
        let w1: Vec<C64> = self.m.iter().zip(&self.mbar).map(|(a, b)| wronskian(*a, *b)).collect();
        let w2: Vec<C64> = self.m.iter().zip(&self.n).map(|(a, b)| wronskian(*a, *b)).collect();
        let drift = |w: &[C64]| {
            let r = w[mid];
            w.iter().map(|v| (v - r).norm()).fold(0.0, f64::max) / r.norm().max(1e-300)
        };
        drift(&w1).max(drift(&w2))
    }
}

/// Reflection taking M(−x) to N(x) at t = 0.
pub fn x_reflection(spec: &EquationSpec) -> Matrix2<C64> {
    let one = C64::from(1.0);
    let zero = C64::from(0.0);
    if spec.sigma > 0 {
        Matrix2::new(zero, -one, one, zero)
    } else {
        Matrix2::new(zero, one, one, zero)
    }
}

/// max_x |N(x) − R·M(−x)| / max|N| over [−x_max, x_max] at t = 0.
pub fn x_symmetry_defect(p: &PotentialSample, z: &SpectralPoint, x_max: f64, n_cells: usize) -> Result<f64> {
    let (k, lam) = check_point(z)?;
    let opts = JostOptions::default();
    let bv = boundary_vectors(&p.spec, k, lam, 0.0);
    let l = p.half_width;
    let m0 = propagate(p, k, I * lam, 0.0, bv.w, -l, -x_max, 0, &opts)?[0].1;
    let m_grid = propagate(p, k, I * lam, 0.0, m0, -x_max, x_max, n_cells, &opts)?;
    let n0 = propagate(p, k, -I * lam, 0.0, bv.v, l, x_max, 0, &opts)?[0].1;
    let mut n_grid = propagate(p, k, -I * lam, 0.0, n0, x_max, -x_max, n_cells, &opts)?;
    n_grid.reverse();
    let r = x_reflection(&p.spec);
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for (i, (_, nv)) in n_grid.iter().enumerate() {
        let mv = m_grid[n_cells - i].1;
        let rm = [r[(0, 0)] * mv[0] + r[(0, 1)] * mv[1], r[(1, 0)] * mv[0] + r[(1, 1)] * mv[1]];
        worst = worst.max((nv[0] - rm[0]).norm()).max((nv[1] - rm[1]).norm());
        scale = scale.max(nv[0].norm()).max(nv[1].norm());
    }
    Ok(worst / scale.max(1e-300))
}

/// Annular sectors (r_lo, r_hi, angle_lo, angle_hi) forming the search region.
#[derive(Debug, Clone)]
pub struct SearchRegion {
    pub sectors: Vec<(f64, f64, f64, f64)>,
    pub n_r: usize,
    pub n_theta: usize,
}

impl SearchRegion {
    /// The annulus 0.05 q0 < |z| < 20 q0 within the upper analytic region,
    /// kept 1e-3 (relative) away from the contour.
    pub fn default_for(q0: f64, topology: CutTopology) -> Self {
        let m = 1e-3;
        use std::f64::consts::PI;
        let sectors = match topology {
            CutTopology::RealCut => vec![(0.05 * q0, 20.0 * q0, m, PI - m)],
            CutTopology::ImaginaryCut => vec![
                (q0 * (1.0 + m), 20.0 * q0, m, PI - m),
                (0.05 * q0, q0 * (1.0 - m), PI + m, 2.0 * PI - m),
            ],
        };
        SearchRegion { sectors, n_r: 24, n_theta: 24 }
    }

    fn contains(&self, z: C64) -> bool {
        let r = z.norm();
        let a = z.im.atan2(z.re).rem_euclid(std::f64::consts::TAU);
        self.sectors.iter().any(|&(r0, r1, a0, a1)| r >= r0 && r <= r1 && a >= a0 && a <= a1)
    }
}

const ACCEPT_ABS_A: f64 = 1e-9;
const DEDUPE: f64 = 1e-7;
const CLUSTER: f64 = 1e-6;

fn secant(f: &dyn Fn(C64) -> Result<C64>, z0: C64, region: &SearchRegion) -> Option<C64> {
    let mut za = z0;
    let mut zb = z0 * C64::new(1.0 + 1e-4, 1e-4);
    let mut fa = f(za).ok()?;
    let mut fb = f(zb).ok()?;
    for _ in 0..60 {
        if fb.norm() < ACCEPT_ABS_A * 1e-2 {
            break;
        }
        let den = fb - fa;
        if den.norm() == 0.0 {
            break;
        }
        let zn = zb - fb * (zb - za) / den;
        if !zn.is_finite() || !region.contains(zn) {
            return None;
        }
        za = zb;
        fa = fb;
        zb = zn;
        fb = f(zb).ok()?;
        if (zb - za).norm() < 1e-15 * zb.norm() {
            break;
        }
    }
    (fb.norm() < ACCEPT_ABS_A).then_some(zb)
}

/// Zeros of a(z) in the region: grid scan (local minima of |a| and cells
/// with nonzero winding), then secant refinement to |a| < 1e-9.
pub fn find_eigenvalues(p: &PotentialSample, t: f64, region: &SearchRegion) -> Result<Vec<C64>> {
    let fine = JostOptions { rtol: 1e-12, atol: 1e-15 };
    let coarse = JostOptions { rtol: 1e-8, atol: 1e-12 };
    let q0 = p.spec.q0;
    let top = p.topology;
    let a_with = |z: C64, opts: &JostOptions| -> Result<C64> {
        let sp = SpectralPoint::new(z, q0, top)?;
        a_coeff(p, &sp, t, opts)
    };
    let a_of = |z: C64| a_with(z, &fine);
    let mut seeds: Vec<(C64, bool)> = Vec::new();
    for &(r0, r1, a0, a1) in &region.sectors {
        let (nr, na) = (region.n_r, region.n_theta);
        let node_f = |i: f64, j: f64| {
            let r = r0 * (r1 / r0).powf(i / (nr - 1) as f64);
            let a = a0 + (a1 - a0) * j / (na - 1) as f64;
            C64::from_polar(r, a)
        };
        let node = |i: usize, j: usize| node_f(i as f64, j as f64);
        let vals: Vec<Option<C64>> =
            (0..nr * na).into_par_iter().map(|idx| a_with(node(idx / na, idx % na), &coarse).ok()).collect();
        let at = |i: usize, j: usize| vals[i * na + j];
        for i in 1..nr - 1 {
            for j in 1..na - 1 {
                let Some(c) = at(i, j) else { continue };
                let mut is_min = true;
                for di in [-1i64, 0, 1] {
                    for dj in [-1i64, 0, 1] {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        if let Some(v) = at((i as i64 + di) as usize, (j as i64 + dj) as usize) {
                            if v.norm() <= c.norm() {
                                is_min = false;
                            }
                        }
                    }
                }
                if is_min {
                    seeds.push((node(i, j), false));
                }
            }
        }
        for i in 0..nr - 1 {
            for j in 0..na - 1 {
                let corners = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
                if corners.iter().any(|c| c.is_none()) {
                    continue;
                }
                let c: Vec<C64> = corners.iter().map(|c| c.unwrap()).collect();
                let mut wind = 0.0;
                for m in 0..4 {
                    wind += (c[(m + 1) % 4] / c[m]).arg();
                }
                if (wind / std::f64::consts::TAU).round() != 0.0 {
                    let centre = node_f(i as f64 + 0.5, j as f64 + 0.5);
                    seeds.push((centre, true));
                }
            }
        }
    }
    let refined: Vec<(Option<C64>, bool, C64)> = seeds
        .par_iter()
        .map(|&(s, wind)| (secant(&a_of, s, region), wind, s))
        .collect();
    let mut found: Vec<C64> = Vec::new();
    for (z, wind, s) in refined {
        match z {
            Some(z) => {
                if !found.iter().any(|f| (f - z).norm() < DEDUPE * z.norm().max(1.0)) {
                    found.push(z);
                }
            }
            None if wind => {
                return Err(IstError::NoConvergence(format!("winding cell near {s} did not refine")));
            }
            None => {}
        }
    }
    let mut clustered = Vec::new();
    for i in 0..found.len() {
        for j in i + 1..found.len() {
            if (found[i] - found[j]).norm() < CLUSTER {
                clustered.push((found[i].re, found[i].im));
                clustered.push((found[j].re, found[j].im));
            }
        }
    }
    if !clustered.is_empty() {
        return Err(IstError::ClusteredZeros(clustered));
    }
    found.sort_by(|a, b| b.im.partial_cmp(&a.im).unwrap().then(a.re.partial_cmp(&b.re).unwrap()));
    Ok(found)
}

/// b(z_j) from M(x, z_j) = b e^{2iλx} N(x, z_j), averaged over the window
/// [−1, 1] where |N| > 0.1 max|N|.
pub fn extract_b(p: &PotentialSample, zj: &SpectralPoint, t: f64) -> Result<C64> {
    let (k, lam) = check_point(zj)?;
    let opts = JostOptions::default();
    let bv = boundary_vectors(&p.spec, k, lam, t);
    let l = p.half_width;
    let xr = 1.0f64.min(0.5 * l);
    let cells = 40;
    let m0 = propagate(p, k, I * lam, t, bv.w, -l, -xr, 0, &opts)?[0].1;
    let m = propagate(p, k, I * lam, t, m0, -xr, xr, cells, &opts)?;
    let n0 = propagate(p, k, -I * lam, t, bv.v, l, xr, 0, &opts)?[0].1;
    let mut n = propagate(p, k, -I * lam, t, n0, xr, -xr, cells, &opts)?;
    n.reverse();
    let nmax = n.iter().flat_map(|(_, v)| [v[0].norm(), v[1].norm()]).fold(0.0, f64::max);
    let mut acc = C64::from(0.0);
    let mut count = 0usize;
    for ((x, mv), (_, nv)) in m.iter().zip(n.iter()) {
        let e = (2.0 * I * lam * x).exp();
        for c in 0..2 {
            if nv[c].norm() > 0.1 * nmax {
                acc += mv[c] / (e * nv[c]);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(IstError::DegenerateNormalizer);
    }
    Ok(acc / count as f64)
}

/// Fixed-point iterates of the Green's-function integral equations: M on
/// [−L, 0] (from −∞) and N on [0, L] (from +∞), trapezoid rule with
/// step h. Q − Q∓ does not decay on the far half-line, so each function is
/// iterated only on the half-line adjacent to its normalization.
#[derive(Debug, Clone)]
pub struct NeumannResult {
    pub x_m: Vec<f64>,
    pub m: Vec<Vec2>,
    pub x_n: Vec<f64>,
    pub n: Vec<Vec2>,
    pub iterations: usize,
    pub last_update: f64,
}

fn mat_vec(a: &Matrix2<C64>, v: Vec2) -> Vec2 {
    [a[(0, 0)] * v[0] + a[(0, 1)] * v[1], a[(1, 0)] * v[0] + a[(1, 1)] * v[1]]
}

fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

fn scale(s: C64, a: Vec2) -> Vec2 {
    [s * a[0], s * a[1]]
}

/// One-sided iteration for u(x) = u0 + (1/2λ)∫ [P + e^{2iλ|x−x′|}R] F(x′) dx′
/// over x′ between the far end and x, with F = (Q − Q∞) u.
fn neumann_half(
    xs: &[f64],
    dq: &[Matrix2<C64>],
    u0: Vec2,
    p: Matrix2<C64>,
    r: Matrix2<C64>,
    lam: C64,
    sign: f64,
    n_iter: usize,
) -> Result<(Vec<Vec2>, usize, f64)> {
    let n = xs.len();
    let h = (xs[1] - xs[0]).abs();
    let decay = (2.0 * I * lam * h).exp();
    let mut u = vec![u0; n];
    let u0n = u0[0].norm().max(u0[1].norm());
    let mut last = f64::INFINITY;
    let mut it = 0;
    while it < n_iter {
        it += 1;
        let f: Vec<Vec2> = (0..n).map(|i| mat_vec(&dq[i], u[i])).collect();
        let mut plain = [C64::from(0.0); 2];
        let mut osc = [C64::from(0.0); 2];
        let mut next = vec![u0; n];
        for i in 1..n {
            let half = 0.5 * h;
            plain = add(plain, scale(C64::from(half), add(f[i - 1], f[i])));
            osc = add(scale(decay, osc), scale(C64::from(half), add(scale(decay, f[i - 1]), f[i])));
            let corr = add(mat_vec(&p, plain), mat_vec(&r, osc));
            next[i] = add(u0, scale(C64::from(sign) / (2.0 * lam), corr));
        }
        let upd = u
            .iter()
            .zip(&next)
            .map(|(a, b)| (a[0] - b[0]).norm().max((a[1] - b[1]).norm()))
            .fold(0.0, f64::max);
        let size = next.iter().map(|v| v[0].norm().max(v[1].norm())).fold(0.0, f64::max);
        u = next;
        if !size.is_finite() || size > 1e8 * u0n {
            return Err(IstError::Divergence(size / u0n));
        }
        if it > 3 && upd > 2.0 * last && upd > 1e-3 * u0n {
            return Err(IstError::Divergence(upd));
        }
        last = upd;
        if upd <= 1e-14 * u0n {
            break;
        }
    }
    Ok((u, it, last))
}

pub fn neumann_oracle(p: &PotentialSample, z: &SpectralPoint, t: f64, h: f64, n_iter: usize) -> Result<NeumannResult> {
    let (k, lam) = check_point(z)?;
    if n_iter == 0 || n_iter > 50 {
        return Err(IstError::InvalidParameter(format!("n_iter = {n_iter} (1..=50)")));
    }
    let bv = boundary_vectors(&p.spec, k, lam, t);
    let l = p.half_width;
    let cells = (l / h).round().max(2.0) as usize;
    let hh = l / cells as f64;
    let asy = p.spec.asymptotic(t);
    let jk = Matrix2::new(-I * k, C64::from(0.0), C64::from(0.0), I * k);
    let am = jk + asy.q_minus;
    let ap = jk + asy.q_plus;
    let id = Matrix2::identity();
    let qmat = |x: f64| Matrix2::new(C64::from(0.0), p.q(x, t), p.r(x, t), C64::from(0.0));

    // M: x from −L up to 0
    let x_m: Vec<f64> = (0..=cells).map(|i| -l + i as f64 * hh).collect();
    let dq_m: Vec<Matrix2<C64>> = x_m.iter().map(|&x| qmat(x) - asy.q_minus).collect();
    let pm = id * lam + am * I;
    let rm = id * lam - am * I;
    let (m, it_m, up_m) = neumann_half(&x_m, &dq_m, bv.w, pm, rm, lam, 1.0, n_iter)?;

    // N: x from +L down to 0, same recursion in the reflected variable
    let x_n: Vec<f64> = (0..=cells).map(|i| l - i as f64 * hh).collect();
    let dq_n: Vec<Matrix2<C64>> = x_n.iter().map(|&x| qmat(x) - asy.q_plus).collect();
    let pn = id * lam - ap * I;
    let rn = id * lam + ap * I;
    let (n, it_n, up_n) = neumann_half(&x_n, &dq_n, bv.v, pn, rn, lam, -1.0, n_iter)?;

    Ok(NeumannResult { x_m, m, x_n, n, iterations: it_m.max(it_n), last_update: up_m.max(up_n) })
}

impl NeumannResult {
    /// sup-norm distance to the ODE solutions on the same nodes.
    pub fn compare_ode(&self, p: &PotentialSample, z: &SpectralPoint, t: f64) -> Result<f64> {
        let (k, lam) = check_point(z)?;
        let opts = JostOptions::default();
        let bv = boundary_vectors(&p.spec, k, lam, t);
        let cells = self.x_m.len() - 1;
        let l = p.half_width;
        let m = propagate(p, k, I * lam, t, bv.w, -l, 0.0, cells, &opts)?;
        let n = propagate(p, k, -I * lam, t, bv.v, l, 0.0, cells, &opts)?;
        let d = |a: &[Vec2], b: &[(f64, Vec2)]| {
            a.iter().zip(b).map(|(u, (_, v))| (u[0] - v[0]).norm().max((u[1] - v[1]).norm())).fold(0.0, f64::max)
        };
        Ok(d(&self.m, &m).max(d(&self.n, &n)))
    }
}

/// Region tag shortcut for raw z.
pub fn region(p: &PotentialSample, z: C64) -> RegionTag {
    region_of(z, p.spec.q0, p.topology)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::make_sinh_dark1;
    use std::f64::consts::{FRAC_PI_3, PI};

    fn sinh_dark() -> PotentialSample {
        let spec = EquationSpec::sinh_gordon(2.0, FRAC_PI_3, 1.0);
        PotentialSample::from_solution(&make_sinh_dark1(&spec).unwrap()).unwrap()
    }

    #[test]
    fn uniform_background_is_free() {
        let spec = EquationSpec::sinh_gordon(2.0, 0.0, 1.0);
        let p = PotentialSample::uniform_background(spec, 10.0).unwrap();
        let z = SpectralPoint::new(C64::new(3.0, 0.0), 2.0, p.topology).unwrap();
        let d = scattering_coeffs(&p, &z, 0.3).unwrap();
        assert!((d.a - 1.0).norm() < 1e-10 && d.b.norm() < 1e-10, "{d:?}");
        let prof = jost_profile(&p, &z, 0.3, 20).unwrap();
        let bv = boundary_vectors(&spec, z.k(), z.lambda(), 0.3);
        for m in &prof.m {
            assert!((m[0] - bv.w[0]).norm() < 1e-10 && (m[1] - bv.w[1]).norm() < 1e-10);
        }
    }

    #[test]
    fn dark_potential_unitarity_and_symmetry() {
        let p = sinh_dark();
        for xi in [-7.0, -2.5, 2.3, 5.0] {
            let z = SpectralPoint::new(C64::new(xi, 0.0), 2.0, p.topology).unwrap();
            let d = scattering_coeffs(&p, &z, 0.0).unwrap();
            assert!(d.unitarity_defect < 1e-8, "{xi}: {d:?}");
            assert!((d.b - d.bbar).norm() < 1e-8);
        }
    }

    #[test]
    fn a_vanishes_at_dark_eigenvalue() {
        let p = sinh_dark();
        let z = SpectralPoint::new(C64::from_polar(2.0, FRAC_PI_3), 2.0, p.topology).unwrap();
        let a = a_coeff(&p, &z, 0.0, &JostOptions::default()).unwrap();
        assert!(a.norm() < 1e-9, "{a}");
        let b = extract_b(&p, &z, 0.0).unwrap();
        assert!((b * b + 1.0).norm() < 1e-6, "{b}");
    }

    #[test]
    fn reflection_of_m_gives_n() {
        let p = sinh_dark();
        let z = SpectralPoint::new(C64::from_polar(3.0, 0.4 * PI), 2.0, p.topology).unwrap();
        assert!(x_symmetry_defect(&p, &z, 2.0, 40).unwrap() < 1e-8);
    }

    #[test]
    fn near_branch_point_rejected() {
        let p = sinh_dark();
        let z = SpectralPoint::new(C64::new(2.0, 0.0), 2.0, p.topology).unwrap();
        assert!(matches!(integrate_jost(&p, &z, 0.0), Err(IstError::BranchPointProximity(_))));
    }
}
