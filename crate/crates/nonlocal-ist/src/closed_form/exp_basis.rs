//! Ratios of exponential sums, q = P·Σ cᵢ e^{aᵢx+bᵢt} / Σ dⱼ e^{fⱼx+gⱼt}.
//!
//! Every term is shifted by the largest real exponent before summing, so
//! evaluation does not overflow for |x| in the tens. Derivatives in x and t
//! are exact.

use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub c: C64,
    /// coefficient of x in the exponent
    pub ax: C64,
    /// coefficient of t in the exponent
    pub bt: C64,
}

impl ExpTerm {
    pub fn new(c: C64, ax: C64, bt: C64) -> Self {
        ExpTerm { c, ax, bt }
    }

    #[inline]
    fn exponent(&self, x: f64, t: f64) -> C64 {
        self.ax * x + self.bt * t
    }
}

/// Sum and its first/second derivatives, all scaled by e^{−shift}.
#[derive(Debug, Clone, Copy, Default)]
struct Scaled {
    v: C64,
    vx: C64,
    vt: C64,
    vxx: C64,
    mag: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpRatio {
    pub pref: ExpTerm,
    pub num: Vec<ExpTerm>,
    pub den: Vec<ExpTerm>,
}

impl ExpRatio {
    fn shift(&self, x: f64, t: f64) -> f64 {
        self.num
            .iter()
            .chain(self.den.iter())
            .map(|e| e.exponent(x, t).re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn sum(terms: &[ExpTerm], x: f64, t: f64, shift: f64) -> Scaled {
        let mut s = Scaled::default();
        for e in terms {
            let w = e.c * (e.exponent(x, t) - shift).exp();
            s.v += w;
            s.vx += w * e.ax;
            s.vt += w * e.bt;
            s.vxx += w * e.ax * e.ax;
            s.mag += w.norm();
        }
        s
    }

    fn pref(&self, x: f64, t: f64) -> C64 {
        self.pref.c * self.pref.exponent(x, t).exp()
    }

    pub fn eval(&self, x: f64, t: f64) -> C64 {
        let sh = self.shift(x, t);
        let n = Self::sum(&self.num, x, t, sh);
        let d = Self::sum(&self.den, x, t, sh);
        self.pref(x, t) * n.v / d.v
    }

    /// (q, q_x, q_t).
    pub fn eval_with_derivs(&self, x: f64, t: f64) -> (C64, C64, C64) {
        let sh = self.shift(x, t);
        let n = Self::sum(&self.num, x, t, sh);
        let d = Self::sum(&self.den, x, t, sh);
        let p = self.pref(x, t);
        let r = n.v / d.v;
        let rx = (n.vx * d.v - n.v * d.vx) / (d.v * d.v);
        let rt = (n.vt * d.v - n.v * d.vt) / (d.v * d.v);
        (p * r, p * (self.pref.ax * r + rx), p * (self.pref.bt * r + rt))
    }

    /// Value at a point where numerator and denominator vanish together,
    /// from the second-order Taylor ratio at x0 (the zero) evaluated at x.
    pub fn eval_removable(&self, x0: f64, x: f64, t: f64) -> C64 {
        let sh = self.shift(x0, t);
        let n = Self::sum(&self.num, x0, t, sh);
        let d = Self::sum(&self.den, x0, t, sh);
        let dx = x - x0;
        let nn = n.v + n.vx * dx + 0.5 * n.vxx * dx * dx;
        let dd = d.v + d.vx * dx + 0.5 * d.vxx * dx * dx;
        let r = if dd.norm() > 1e-13 * d.mag {
            nn / dd
        } else {
            (n.vx + 0.5 * n.vxx * dx) / (d.vx + 0.5 * d.vxx * dx)
        };
        self.pref(x, t) * r
    }

    /// Denominator divided by e^{exponent of den[k]}: a scale-free quantity
    /// whose zero set is the singular set.
    pub fn den_relative_to(&self, k: usize, x: f64, t: f64) -> C64 {
        let sh = self.den[k].exponent(x, t);
        self.den.iter().map(|e| e.c * (e.exponent(x, t) - sh).exp()).sum()
    }

    /// |Σ den| / Σ |den terms|, in [0, 1].
    pub fn den_relative_size(&self, x: f64, t: f64) -> f64 {
        let sh = self.shift(x, t);
        let d = Self::sum(&self.den, x, t, sh);
        if d.mag == 0.0 { 0.0 } else { d.v.norm() / d.mag }
    }

    pub fn num_relative_size(&self, x: f64, t: f64) -> f64 {
        let sh = self.shift(x, t);
        let n = Self::sum(&self.num, x, t, sh);
        if n.mag == 0.0 { 0.0 } else { n.v.norm() / n.mag }
    }
}
