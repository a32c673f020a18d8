use serde::Serialize;

use crate::error::{Error, Result};

/// Samples per axis in profile checks.
pub const HOLDER_SAMPLES: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum HolderKind {
    /// `2l + c|x|^α`.
    PowerHump { c: f64 },
    /// Piecewise linear through `(x, φ(x))`, covering `[−5l/2, 5l/2]`.
    Tabulated { xs: Vec<f64>, ys: Vec<f64> },
}

/// Graph profile `φ` over `(−5l/2, 5l/2)` with Hölder exponent `α` and
/// constant `K_φ`. The domain is `{|x| < l/2, 0 < y < φ(x)}` in the plane.
#[derive(Debug, Clone, Serialize)]
pub struct HolderProfile {
    pub kind: HolderKind,
    pub alpha: f64,
    pub k_phi: f64,
    pub l: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderCheck {
    pub samples: usize,
    /// Largest sampled `|φ(x) − φ(x′)| / |x − x′|^α`.
    pub holder_ratio: f64,
    pub min: f64,
    pub k_ok: bool,
    /// `φ ≥ 2l`.
    pub floor_ok: bool,
    /// `min φ < 3l`.
    pub ceiling_ok: bool,
}

impl HolderCheck {
    pub fn passed(&self) -> bool {
        self.k_ok && self.floor_ok && self.ceiling_ok
    }
}

impl HolderProfile {
    /// `2l + c|x|^α` with `K_φ = c`.
    pub fn power_hump(alpha: f64, c: f64, l: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::MalformedProfile(format!("hump coefficient must be ≥ 0, got {c}")));
        }
        Self::new(HolderKind::PowerHump { c }, alpha, c.max(f64::MIN_POSITIVE), l)
    }

    pub fn tabulated(xs: Vec<f64>, ys: Vec<f64>, alpha: f64, k_phi: f64, l: f64) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::MalformedProfile("tabulated graph needs matching abscissae and values, at least two".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::MalformedProfile("tabulated abscissae must increase strictly".into()));
        }
        let reach = 2.5 * l;
        if xs[0] > -reach || *xs.last().unwrap() < reach {
            return Err(Error::MalformedProfile(format!("tabulated graph must cover [−{reach}, {reach}]")));
        }
        Self::new(HolderKind::Tabulated { xs, ys }, alpha, k_phi, l)
    }

    fn new(kind: HolderKind, alpha: f64, k_phi: f64, l: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::MalformedProfile(format!("α must lie in (0, 1], got {alpha}")));
        }
        if !(l > 0.0 && l <= 1.0) {
            return Err(Error::MalformedProfile(format!("scale l must lie in (0, 1], got {l}")));
        }
        if !(k_phi > 0.0 && k_phi.is_finite()) {
            return Err(Error::MalformedProfile(format!("K_φ must be positive, got {k_phi}")));
        }
        Ok(Self { kind, alpha, k_phi, l })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            HolderKind::PowerHump { c } => 2.0 * self.l + c * x.abs().powf(self.alpha),
            HolderKind::Tabulated { xs, ys } => {
                let k = xs.partition_point(|&t| t <= x);
                if k == 0 {
                    ys[0]
                } else if k == xs.len() {
                    *ys.last().unwrap()
                } else {
                    let s = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
                    ys[k - 1] + s * (ys[k] - ys[k - 1])
                }
            }
        }
    }

    /// Exact `min φ` over `[lo, hi]`.
    pub fn min_on(&self, lo: f64, hi: f64) -> f64 {
        match &self.kind {
            HolderKind::PowerHump { .. } => {
                let nearest = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { lo.abs().min(hi.abs()) };
                self.eval(nearest)
            }
            HolderKind::Tabulated { xs, ys } => {
                let inner = xs.iter().zip(ys).filter(|(x, _)| **x > lo && **x < hi).map(|(_, y)| *y);
                inner.fold(self.eval(lo).min(self.eval(hi)), f64::min)
            }
        }
    }

    /// Largest sampled value over `[−l/2, l/2]`.
    pub fn max_over_base(&self) -> f64 {
        let h = 0.5 * self.l;
        let mut m = (0..=HOLDER_SAMPLES).map(|k| self.eval(-h + self.l * k as f64 / HOLDER_SAMPLES as f64)).fold(0.0, f64::max);
        if let HolderKind::Tabulated { xs, ys } = &self.kind {
            m = xs.iter().zip(ys).filter(|(x, _)| x.abs() <= h).map(|(_, y)| *y).fold(m, f64::max);
        }
        m
    }

    /// Sampled Hölder quotient over `[−5l/2, 5l/2]`, `φ ≥ 2l` and `min φ < 3l`.
    pub fn check(&self, samples: usize) -> HolderCheck {
        let reach = 2.5 * self.l;
        let xs: Vec<f64> = (0..=samples).map(|k| -reach + 2.0 * reach * k as f64 / samples as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| self.eval(x)).collect();
        let mut ratio = 0.0f64;
        for i in 0..xs.len() {
            for j in i + 1..xs.len() {
                ratio = ratio.max((ys[j] - ys[i]).abs() / (xs[j] - xs[i]).powf(self.alpha));
            }
        }
        let min = self.min_on(-reach, reach);
        let tol = 1e-12 * self.l;
        HolderCheck {
            samples,
            holder_ratio: ratio,
            min,
            k_ok: ratio <= self.k_phi * (1.0 + 1e-9),
            floor_ok: min >= 2.0 * self.l - tol,
            ceiling_ok: min < 3.0 * self.l,
        }
    }

    pub fn validate(&self) -> Result<HolderCheck> {
        let c = self.check(HOLDER_SAMPLES);
        if !c.k_ok {
            return Err(Error::ProfileViolation(format!("sampled Hölder quotient {} exceeds K_φ = {}", c.holder_ratio, self.k_phi)));
        }
        if !c.floor_ok {
            return Err(Error::MalformedProfile(format!("φ must stay ≥ 2l = {}, reaches {}", 2.0 * self.l, c.min)));
        }
        if !c.ceiling_ok {
            return Err(Error::MalformedProfile(format!("min φ = {} must be below 3l = {}", c.min, 3.0 * self.l)));
        }
        Ok(c)
    }
}
