use serde::Serialize;

use crate::error::{Error, Result};

/// Number of sample points in profile checks.
pub const PROFILE_SAMPLES: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ProfileKind {
    /// `x^γ`.
    Power { gamma: f64 },
    /// `e^{−1/x²}`.
    ExpCusp,
    /// `x^γ (2 + sin x^{1−γ})`.
    Oscillating { gamma: f64 },
    /// Piecewise linear through `(x, φ(x))`, first abscissa 0.
    Tabulated { xs: Vec<f64>, ys: Vec<f64> },
}

/// Cusp profile `φ` on `[0, a]` with declared Lipschitz bound `K₁` and
/// quasi-monotonicity bound `K₂`.
#[derive(Debug, Clone, Serialize)]
pub struct CuspProfile {
    pub kind: ProfileKind,
    pub a: f64,
    pub k1: f64,
    pub k2: f64,
    /// False when `K₁, K₂` are sampled estimates rather than known bounds.
    pub verified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileCheck {
    pub samples: usize,
    /// Largest sampled `|φ(x′) − φ(x)| / |x′ − x|`.
    pub lipschitz: f64,
    /// Largest sampled `(φ(t)/t) / (φ(r)/r)` over `t < r`.
    pub quasi_monotone: f64,
    pub k1_ok: bool,
    pub k2_ok: bool,
    pub verified: bool,
}

impl CuspProfile {
    /// `x^γ` on `[0, a]`: `K₁ = γ a^{γ−1}`, `K₂ = 1`.
    pub fn power(gamma: f64, a: f64) -> Result<Self> {
        if !(gamma > 1.0) {
            return Err(Error::MalformedProfile(format!("power profile needs γ > 1, got {gamma}")));
        }
        Self::new(ProfileKind::Power { gamma }, a, gamma * a.powf(gamma - 1.0), 1.0)
    }

    /// `e^{−1/x²}` on `[0, a]`, `a ≤ √2`: `K₁ = sup φ′`, `K₂ = 1`.
    pub fn exp_cusp(a: f64) -> Result<Self> {
        if a > 2f64.sqrt() {
            return Err(Error::MalformedProfile(format!("exp-cusp profile needs a ≤ √2, got {a}")));
        }
        let peak = (2.0f64 / 3.0).sqrt().min(a);
        let k1 = 2.0 / peak.powi(3) * (-1.0 / (peak * peak)).exp();
        Self::new(ProfileKind::ExpCusp, a, k1, 1.0)
    }

    /// `x^γ (2 + sin x^{1−γ})` with `K₁, K₂` estimated by sampling and
    /// marked unverified.
    pub fn oscillating(gamma: f64, a: f64) -> Result<Self> {
        if !(gamma > 1.0) {
            return Err(Error::MalformedProfile(format!("oscillating profile needs γ > 1, got {gamma}")));
        }
        let mut p = Self::new(ProfileKind::Oscillating { gamma }, a, f64::INFINITY, f64::INFINITY)?;
        let check = p.check(PROFILE_SAMPLES)?;
        p.k1 = 1.1 * check.lipschitz;
        p.k2 = 1.1 * check.quasi_monotone;
        p.verified = false;
        Ok(p)
    }

    pub fn tabulated(xs: Vec<f64>, ys: Vec<f64>, k1: f64, k2: f64) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::MalformedProfile("tabulated profile needs matching abscissae and values, at least two".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::MalformedProfile("tabulated abscissae must increase strictly".into()));
        }
        if xs[0] != 0.0 {
            return Err(Error::MalformedProfile(format!("tabulated profile must start at x = 0, got {}", xs[0])));
        }
        let a = *xs.last().unwrap();
        Self::new(ProfileKind::Tabulated { xs, ys }, a, k1, k2)
    }

    fn new(kind: ProfileKind, a: f64, k1: f64, k2: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::MalformedProfile(format!("interval end a must be positive, got {a}")));
        }
        if !(k1 > 0.0) || !(k2 >= 1.0) {
            return Err(Error::MalformedProfile(format!("need K₁ > 0 and K₂ ≥ 1, got K₁ = {k1}, K₂ = {k2}")));
        }
        Ok(Self { kind, a, k1, k2, verified: true })
    }

    /// Overrides the declared constants.
    pub fn with_constants(mut self, k1: f64, k2: f64) -> Self {
        self.k1 = k1;
        self.k2 = k2;
        self
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            ProfileKind::Power { gamma } => x.powf(*gamma),
            ProfileKind::ExpCusp => (-1.0 / (x * x)).exp(),
            ProfileKind::Oscillating { gamma } => x.powf(*gamma) * (2.0 + x.powf(1.0 - gamma).sin()),
            ProfileKind::Tabulated { xs, ys } => {
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

    /// `ϖ = φ(x)/x`.
    pub fn varpi(&self, x: f64) -> f64 {
        self.eval(x) / x
    }

    /// Largest `φ` over the samples, used for the bounding box.
    pub fn sampled_max(&self) -> f64 {
        (0..=PROFILE_SAMPLES).map(|k| self.eval(self.a * k as f64 / PROFILE_SAMPLES as f64)).fold(0.0, f64::max)
    }

    /// Sampled checks of `φ(0) = 0`, `φ > 0`, `|φ′| ≤ K₁` and
    /// `φ(t)/t ≤ K₂ φ(r)/r`; positivity and the origin are hard errors.
    pub fn check(&self, samples: usize) -> Result<ProfileCheck> {
        if let ProfileKind::Tabulated { ys, .. } = &self.kind {
            if ys[0] != 0.0 {
                return Err(Error::ProfileViolation(format!("φ(0) must be 0, got {}", ys[0])));
            }
        }
        let xs: Vec<f64> = (1..=samples).map(|k| self.a * k as f64 / samples as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| self.eval(x)).collect();
        // Analytic profiles may underflow to zero near the tip; only tabulated
        // zeros are real violations.
        let tabulated = matches!(self.kind, ProfileKind::Tabulated { .. });
        if let Some(k) = ys.iter().position(|&y| !(y.is_finite() && (y > 0.0 || (y == 0.0 && !tabulated)))) {
            return Err(Error::ProfileViolation(format!("φ must be positive on (0, a]; φ({}) = {}", xs[k], ys[k])));
        }
        let mut lipschitz = ys[0] / xs[0];
        for k in 1..samples {
            lipschitz = lipschitz.max((ys[k] - ys[k - 1]).abs() / (xs[k] - xs[k - 1]));
        }
        let mut running = 0.0f64;
        let mut quasi = 1.0f64;
        for k in 0..samples {
            let psi = ys[k] / xs[k];
            if psi == 0.0 {
                continue;
            }
            if k > 0 {
                quasi = quasi.max(running / psi);
            }
            running = running.max(psi);
        }
        let slack = 1.0 + 1e-9;
        Ok(ProfileCheck {
            samples,
            lipschitz,
            quasi_monotone: quasi,
            k1_ok: lipschitz <= self.k1 * slack,
            k2_ok: quasi <= self.k2 * slack,
            verified: self.verified,
        })
    }

    /// [`check`](Self::check) with violations of the declared constants as errors.
    pub fn validate(&self) -> Result<ProfileCheck> {
        let c = self.check(PROFILE_SAMPLES)?;
        if !c.k1_ok {
            return Err(Error::ProfileViolation(format!("sampled |φ′| reaches {} > K₁ = {}", c.lipschitz, self.k1)));
        }
        if !c.k2_ok {
            return Err(Error::ProfileViolation(format!("sampled (φ(t)/t)/(φ(r)/r) reaches {} > K₂ = {}", c.quasi_monotone, self.k2)));
        }
        Ok(c)
    }
}
