//! The PP04 glacial-cycle model written as a forced piecewise-linear
//! Filippov system `Ẋ = L X + b± + I(t) e` with switching function
//! `F(X) = c·X + d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg3::{eigen_decompose, resolvent_apply, EigenDecomp, Mat3, Vec3};

/// State `(V, A, C)`: total ice volume, Antarctic ice, CO2.
pub type StateVec = Vec3;

/// Physical constants of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "tau_V")]
    pub tau_v: f64,
    #[serde(rename = "tau_A")]
    pub tau_a: f64,
    #[serde(rename = "tau_C")]
    pub tau_c: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub a: f64,
    pub b: f64,
    pub d: f64,
    /// Steepness of the tanh smoothing of the Heaviside switch.
    pub eta: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            tau_v: 15.0,
            tau_a: 12.0,
            tau_c: 5.0,
            x: 1.3,
            y: 0.5,
            z: 0.8,
            alpha: 0.15,
            beta: 0.5,
            gamma: 0.7,
            delta: 0.4,
            a: 0.3,
            b: 0.7,
            d: 0.27,
            eta: 1500.0,
        }
    }
}

impl ModelParams {
    /// Names and current values, in the canonical (config file) order.
    pub fn entries(&self) -> [(&'static str, f64); 14] {
        [
            ("tau_V", self.tau_v),
            ("tau_A", self.tau_a),
            ("tau_C", self.tau_c),
            ("x", self.x),
            ("y", self.y),
            ("z", self.z),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("a", self.a),
            ("b", self.b),
            ("d", self.d),
            ("eta", self.eta),
        ]
    }

    /// Mutable slot for a named parameter, `None` for unknown names.
    pub fn slot_mut(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "tau_V" => &mut self.tau_v,
            "tau_A" => &mut self.tau_a,
            "tau_C" => &mut self.tau_c,
            "x" => &mut self.x,
            "y" => &mut self.y,
            "z" => &mut self.z,
            "alpha" => &mut self.alpha,
            "beta" => &mut self.beta,
            "gamma" => &mut self.gamma,
            "delta" => &mut self.delta,
            "a" => &mut self.a,
            "b" => &mut self.b,
            "d" => &mut self.d,
            "eta" => &mut self.eta,
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.entries() {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be finite")));
            }
        }
        for (name, v) in [("tau_V", self.tau_v), ("tau_A", self.tau_a), ("tau_C", self.tau_c), ("eta", self.eta)] {
            if v <= 0.0 {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn operator(&self) -> Mat3 {
        Mat3([
            [-1.0 / self.tau_v, 0.0, -self.x / self.tau_v],
            [1.0 / self.tau_a, -1.0 / self.tau_a, 0.0],
            [-self.beta / self.tau_c, 0.0, -1.0 / self.tau_c],
        ])
    }

    pub fn forcing_vector(&self) -> Vec3 {
        Vec3::new(-self.y / self.tau_v, 0.0, self.alpha / self.tau_c)
    }

    /// Constant drive in the glacial region (no ventilation).
    pub fn b_plus(&self) -> Vec3 {
        Vec3::new(self.z / self.tau_v, 0.0, self.delta / self.tau_c)
    }

    /// Constant drive in the interglacial region (CO2 ventilation on).
    pub fn b_minus(&self) -> Vec3 {
        Vec3::new(self.z / self.tau_v, 0.0, (self.delta + self.gamma) / self.tau_c)
    }

    pub fn switching_normal(&self) -> Vec3 {
        Vec3::new(self.a, -self.b, 0.0)
    }
}

/// One sinusoidal insolation term `mu · sin(omega t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingTerm {
    pub mu: f64,
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Forcing {
    pub terms: Vec<ForcingTerm>,
}

impl Forcing {
    pub fn none() -> Self {
        Forcing { terms: Vec::new() }
    }

    pub fn single(mu: f64, omega: f64) -> Self {
        Forcing { terms: vec![ForcingTerm { mu, omega, phase: 0.0 }] }
    }

    pub fn two(mu1: f64, omega1: f64, mu2: f64, omega2: f64) -> Self {
        Forcing {
            terms: vec![
                ForcingTerm { mu: mu1, omega: omega1, phase: 0.0 },
                ForcingTerm { mu: mu2, omega: omega2, phase: 0.0 },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (k, t) in self.terms.iter().enumerate() {
            if !(t.omega > 0.0 && t.omega.is_finite()) {
                return Err(Error::InvalidInput(format!("forcing term {k}: omega must be positive")));
            }
            if !t.mu.is_finite() || !t.phase.is_finite() {
                return Err(Error::InvalidInput(format!("forcing term {k}: non-finite amplitude or phase")));
            }
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        self.terms.iter().map(|f| f.mu * (f.omega * t + f.phase).sin()).sum()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.terms.iter().map(|f| f.mu * f.omega * (f.omega * t + f.phase).cos()).sum()
    }

    pub fn max_omega(&self) -> Option<f64> {
        self.terms.iter().map(|f| f.omega).reduce(f64::max)
    }

    /// Stroboscopic period `2π/ω` of the first term, when there is one.
    pub fn period(&self) -> Option<f64> {
        self.terms.first().map(|f| 2.0 * std::f64::consts::PI / f.omega)
    }

    /// Forcing with vanishing amplitude everywhere (terms kept).
    pub fn is_silent(&self) -> bool {
        self.terms.iter().all(|f| f.mu == 0.0)
    }
}

/// Which side of the switching surface a state lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionLabel {
    /// Glacial, `F > 0`.
    Plus,
    /// Interglacial, `F < 0`.
    Minus,
}

impl RegionLabel {
    pub fn sign(self) -> f64 {
        match self {
            RegionLabel::Plus => 1.0,
            RegionLabel::Minus => -1.0,
        }
    }

    pub fn other(self) -> Self {
        match self {
            RegionLabel::Plus => RegionLabel::Minus,
            RegionLabel::Minus => RegionLabel::Plus,
        }
    }

    pub fn of_value(f: f64) -> Self {
        if f >= 0.0 {
            RegionLabel::Plus
        } else {
            RegionLabel::Minus
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RegionLabel::Plus => "plus",
            RegionLabel::Minus => "minus",
        }
    }
}

/// Closed-form response `p cos(θ) + q sin(θ)`, `θ = ωt + φ`, to one forcing term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub omega: f64,
    pub phase: f64,
    pub p: Vec3,
    pub q: Vec3,
    /// `c·p` and `c·q`: the harmonic's contribution to `F`.
    pub cp: f64,
    pub cq: f64,
}

impl Harmonic {
    fn eval(&self, t: f64) -> (f64, f64) {
        (self.omega * t + self.phase).sin_cos()
    }
}

/// Fully derived linear data of the Filippov system for fixed parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemReal {
    pub params: ModelParams,
    pub forcing: Forcing,
    pub l: Mat3,
    pub e: Vec3,
    pub b_plus: Vec3,
    pub b_minus: Vec3,
    pub c: Vec3,
    pub d: f64,
    pub eigen: EigenDecomp,
    pub harmonics: Vec<Harmonic>,
    /// `−L⁻¹ b⁺`: rest point of the unforced glacial dynamics.
    pub r_plus_vec: Vec3,
    /// `−L⁻¹ b⁻`.
    pub r_minus_vec: Vec3,
    /// `cᵀ M` with `M` the slow-mode projector.
    pub n: Vec3,
    /// `cᵀU`, cached for the per-segment exponential sums.
    pub c_modes: Vec3,
}

/// Assemble the system for `params` and `forcing`.
pub fn build_system(params: &ModelParams, forcing: &Forcing) -> Result<SystemReal> {
    params.validate()?;
    forcing.validate()?;
    let l = params.operator();
    let eigen = eigen_decompose(&l)?;
    let e = params.forcing_vector();
    let b_plus = params.b_plus();
    let b_minus = params.b_minus();
    let c = params.switching_normal();
    let l_inv = l.inverse().ok_or(Error::ComplexOrRepeatedEigenvalues)?;

    let mut harmonics = Vec::with_capacity(forcing.terms.len());
    for term in &forcing.terms {
        // μ (iω − L)⁻¹ e = u + i v solves the complex-exponential problem;
        // the sine response is Im[(u + iv) e^{iθ}] = v cos θ + u sin θ.
        let (re, im) = resolvent_apply(&l, term.omega, e)?;
        let (p, q) = (im.scale(term.mu), re.scale(term.mu));
        harmonics.push(Harmonic { omega: term.omega, phase: term.phase, p, q, cp: c.dot(&p), cq: c.dot(&q) });
    }

    let n = eigen.slow_projector().left_mul(c);
    let c_modes = eigen.u.left_mul(c);
    Ok(SystemReal {
        params: *params,
        forcing: forcing.clone(),
        l,
        e,
        b_plus,
        b_minus,
        c,
        d: params.d,
        eigen,
        harmonics,
        r_plus_vec: -(l_inv * b_plus),
        r_minus_vec: -(l_inv * b_minus),
        n,
        c_modes,
    })
}

impl SystemReal {
    pub fn switching_value(&self, x: &StateVec) -> f64 {
        self.c.dot(x) + self.d
    }

    pub fn b(&self, region: RegionLabel) -> Vec3 {
        match region {
            RegionLabel::Plus => self.b_plus,
            RegionLabel::Minus => self.b_minus,
        }
    }

    pub fn rest_offset(&self, region: RegionLabel) -> Vec3 {
        match region {
            RegionLabel::Plus => self.r_plus_vec,
            RegionLabel::Minus => self.r_minus_vec,
        }
    }

    /// Slowest decay rate λ₁.
    pub fn lambda1(&self) -> f64 {
        self.eigen.lambda[0]
    }

    /// Forced particular solution `Σ p cos θ + q sin θ`.
    pub fn particular(&self, t: f64) -> Vec3 {
        let mut out = Vec3::ZERO;
        for h in &self.harmonics {
            let (s, c) = h.eval(t);
            out += h.p.scale(c) + h.q.scale(s);
        }
        out
    }

    pub fn particular_dot(&self, t: f64) -> Vec3 {
        let mut out = Vec3::ZERO;
        for h in &self.harmonics {
            let (s, c) = h.eval(t);
            out += (h.q.scale(c) - h.p.scale(s)).scale(h.omega);
        }
        out
    }

    pub fn particular_ddot(&self, t: f64) -> Vec3 {
        let mut out = Vec3::ZERO;
        for h in &self.harmonics {
            let (s, c) = h.eval(t);
            out += (h.p.scale(c) + h.q.scale(s)).scale(-h.omega * h.omega);
        }
        out
    }

    /// `f(t) = −L⁻¹b± + particular(t)`, the forced attractor of one region.
    pub fn offset(&self, region: RegionLabel, t: f64) -> Vec3 {
        self.rest_offset(region) + self.particular(t)
    }

    /// Right-hand side of the region's linear ODE.
    pub fn rhs(&self, region: RegionLabel, t: f64, x: &StateVec) -> Vec3 {
        self.l * *x + self.b(region) + self.e.scale(self.forcing.value(t))
    }

    /// `Ḟ` along the region's flow.
    pub fn f_dot(&self, region: RegionLabel, t: f64, x: &StateVec) -> f64 {
        self.c.dot(&self.rhs(region, t, x))
    }

    /// `F̈` along the region's flow.
    pub fn f_ddot(&self, region: RegionLabel, t: f64, x: &StateVec) -> f64 {
        let xdot = self.rhs(region, t, x);
        self.c.dot(&(self.l * xdot + self.e.scale(self.forcing.derivative(t))))
    }

    /// Jump `F̈⁺ − F̈⁻ = cᵀL(b⁺ − b⁻)` of the second derivative across Σ.
    pub fn f_ddot_jump(&self) -> f64 {
        self.c.dot(&(self.l * (self.b_plus - self.b_minus)))
    }

    /// Smoothed right-hand side with `H_η(F) = ½(1 + tanh(ηF))`.
    pub fn rhs_smoothed(&self, t: f64, x: &StateVec, eta: f64) -> Vec3 {
        let h = smooth_heaviside(eta, self.switching_value(x));
        self.l * *x + self.b_minus + (self.b_plus - self.b_minus).scale(h) + self.e.scale(self.forcing.value(t))
    }

    /// Asymptotic F-values `r± = −cᵀL⁻¹b± + d` of the unforced flow in each region.
    pub fn virtual_limits(&self) -> (f64, f64) {
        (self.c.dot(&self.r_plus_vec) + self.d, self.c.dot(&self.r_minus_vec) + self.d)
    }

    pub fn forcing_period(&self) -> Option<f64> {
        self.forcing.period()
    }

    /// `n` scaled to unit Euclidean length.
    pub fn unit_normal(&self) -> Vec3 {
        let n = self.n.norm();
        if n > 0.0 {
            self.n.scale(1.0 / n)
        } else {
            self.n
        }
    }
}

pub fn smooth_heaviside(eta: f64, f: f64) -> f64 {
    0.5 * (1.0 + (eta * f).tanh())
}

/// Switching function evaluated without a built system.
pub fn switching_value(sys: &SystemReal, x: &StateVec) -> f64 {
    sys.switching_value(x)
}

pub fn virtual_limits(sys: &SystemReal) -> (f64, f64) {
    sys.virtual_limits()
}
