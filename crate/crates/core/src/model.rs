//! Physical parameters, complex frequencies, incident fields and causal
//! time signals shared by the rest of the crate.

use std::f64::consts::{FRAC_PI_2, PI};

use errorfunctions::{ComplexErrorFunctions, RealErrorFunctions};
use nalgebra::Vector3;
use num_complex::Complex64;

use crate::error::{FsiError, Result};

pub type Vec3 = Vector3<f64>;

/// Homogeneous isotropic solid immersed in a compressible inviscid fluid.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialSystem {
    /// Solid mass density.
    pub rho_e: f64,
    pub lame_lambda: f64,
    pub lame_mu: f64,
    /// Fluid rest density.
    pub rho_0: f64,
    pub sound_speed: f64,
    /// Time horizon of the simulation.
    pub horizon: f64,
}

impl MaterialSystem {
    pub fn new(
        rho_e: f64,
        lame_lambda: f64,
        lame_mu: f64,
        rho_0: f64,
        sound_speed: f64,
        horizon: f64,
    ) -> Result<Self> {
        let m = MaterialSystem {
            rho_e,
            lame_lambda,
            lame_mu,
            rho_0,
            sound_speed,
            horizon,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.rho_e,
            self.lame_lambda,
            self.lame_mu,
            self.rho_0,
            self.sound_speed,
            self.horizon,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(FsiError::InvalidMaterial("non-finite constant".into()));
        }
        // mu = 0 would leave the rigid-body-free part of the elastic form
        // without Korn coercivity.
        if self.lame_mu <= 0.0 {
            return Err(FsiError::InvalidMaterial(format!(
                "shear modulus must be positive (got {}); mu = 0 is unsupported",
                self.lame_mu
            )));
        }
        if 3.0 * self.lame_lambda + 2.0 * self.lame_mu < 0.0 {
            return Err(FsiError::InvalidMaterial(
                "3*lambda + 2*mu must be non-negative".into(),
            ));
        }
        for (name, v) in [
            ("rho_e", self.rho_e),
            ("rho_0", self.rho_0),
            ("sound_speed", self.sound_speed),
            ("horizon", self.horizon),
        ] {
            if v <= 0.0 {
                return Err(FsiError::InvalidMaterial(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// All constants equal to one.
    pub fn unit(horizon: f64) -> Self {
        MaterialSystem {
            rho_e: 1.0,
            lame_lambda: 1.0,
            lame_mu: 1.0,
            rho_0: 1.0,
            sound_speed: 1.0,
            horizon,
        }
    }

    /// Steel (E = 200 GPa, nu = 0.3, 7850 kg/m^3) in water (1000 kg/m^3,
    /// 1480 m/s), scaled by the water density, sound speed and a unit length.
    pub fn steel_in_water(horizon: f64) -> Self {
        let (young, poisson, rho_steel) = (200.0e9, 0.3, 7850.0);
        let (rho_water, c_water) = (1000.0, 1480.0);
        let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
        let mu = young / (2.0 * (1.0 + poisson));
        let stress = rho_water * c_water * c_water;
        MaterialSystem {
            rho_e: rho_steel / rho_water,
            lame_lambda: lambda / stress,
            lame_mu: mu / stress,
            rho_0: 1.0,
            sound_speed: 1.0,
            horizon,
        }
    }

    /// Fastest elastic wave speed in the solid.
    pub fn pressure_wave_speed(&self) -> f64 {
        ((self.lame_lambda + 2.0 * self.lame_mu) / self.rho_e).sqrt()
    }
}

/// A point of the open right half-plane together with the quantities the
/// operator estimates are phrased in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexFrequency {
    s: Complex64,
    sigma: f64,
    sigma_bar: f64,
    theta: f64,
}

impl ComplexFrequency {
    pub fn new(s: Complex64) -> Result<Self> {
        if !(s.re > 0.0) || !s.im.is_finite() || !s.re.is_finite() {
            return Err(FsiError::NotInRightHalfPlane(s));
        }
        let theta = s.arg();
        debug_assert!(theta.abs() < FRAC_PI_2);
        Ok(ComplexFrequency {
            s,
            sigma: s.re,
            sigma_bar: s.re.min(1.0),
            theta,
        })
    }

    pub fn from_parts(re: f64, im: f64) -> Result<Self> {
        Self::new(Complex64::new(re, im))
    }

    #[inline]
    pub fn s(&self) -> Complex64 {
        self.s
    }
    #[inline]
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    #[inline]
    pub fn sigma_bar(&self) -> f64 {
        self.sigma_bar
    }
    /// Principal argument of `s`.
    #[inline]
    pub fn theta(&self) -> f64 {
        self.theta
    }
    #[inline]
    pub fn modulus(&self) -> f64 {
        self.s.norm()
    }

    pub fn conj(&self) -> Self {
        ComplexFrequency {
            s: self.s.conj(),
            theta: -self.theta,
            ..*self
        }
    }

    /// `e^{i theta}`.
    pub fn phase(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.theta)
    }
}

/// Smooth pulse profiles. Both vanish to round-off for `t` well before
/// `center - 9 * width`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Pulse {
    /// `A exp(-(t-t_c)^2 / (2 w^2)) sin(omega (t - t_c))`
    GaussianSine {
        center: f64,
        width: f64,
        carrier: f64,
        amplitude: f64,
    },
    /// Twice-integrated Gaussian: `A w (x Phi(x) + phi(x))` with
    /// `x = (t - t_c) / w`, `Phi`/`phi` the standard normal cdf/pdf. Its
    /// derivative is a smooth step of height `A`.
    SmoothRamp {
        center: f64,
        width: f64,
        amplitude: f64,
    },
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

impl Pulse {
    pub fn gaussian_sine(center: f64, width: f64, carrier: f64) -> Self {
        Pulse::GaussianSine {
            center,
            width,
            carrier,
            amplitude: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (center, width) = match *self {
            Pulse::GaussianSine { center, width, .. } | Pulse::SmoothRamp { center, width, .. } => {
                (center, width)
            }
        };
        if !(width > 0.0) || !center.is_finite() {
            return Err(FsiError::InvalidIncident("pulse width must be positive".into()));
        }
        Ok(())
    }

    pub fn center(&self) -> f64 {
        match *self {
            Pulse::GaussianSine { center, .. } | Pulse::SmoothRamp { center, .. } => center,
        }
    }

    pub fn width(&self) -> f64 {
        match *self {
            Pulse::GaussianSine { width, .. } | Pulse::SmoothRamp { width, .. } => width,
        }
    }

    /// Earliest time at which the profile is distinguishable from zero.
    pub fn onset(&self) -> f64 {
        self.center() - 9.0 * self.width()
    }

    pub fn with_amplitude(self, a: f64) -> Self {
        match self {
            Pulse::GaussianSine {
                center,
                width,
                carrier,
                ..
            } => Pulse::GaussianSine {
                center,
                width,
                carrier,
                amplitude: a,
            },
            Pulse::SmoothRamp { center, width, .. } => Pulse::SmoothRamp {
                center,
                width,
                amplitude: a,
            },
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Pulse::GaussianSine {
                center,
                width,
                carrier,
                amplitude,
            } => {
                let tau = t - center;
                amplitude * (-0.5 * (tau / width).powi(2)).exp() * (carrier * tau).sin()
            }
            Pulse::SmoothRamp {
                center,
                width,
                amplitude,
            } => {
                let x = (t - center) / width;
                amplitude * width * (x * normal_cdf(x) + normal_pdf(x))
            }
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Pulse::GaussianSine {
                center,
                width,
                carrier,
                amplitude,
            } => {
                let tau = t - center;
                let g = (-0.5 * (tau / width).powi(2)).exp();
                amplitude
                    * g
                    * (carrier * (carrier * tau).cos() - tau / (width * width) * (carrier * tau).sin())
            }
            Pulse::SmoothRamp {
                center,
                width,
                amplitude,
            } => amplitude * normal_cdf((t - center) / width),
        }
    }

    /// One-sided Laplace transform `int_0^inf e^{-st} psi(t) dt` in closed
    /// form (scaled complementary error function).
    pub fn laplace(&self, s: Complex64) -> Complex64 {
        match *self {
            Pulse::GaussianSine {
                center,
                width,
                carrier,
                amplitude,
            } => {
                let plus = gaussian_exponential_transform(s, center, width, carrier);
                let minus = gaussian_exponential_transform(s, center, width, -carrier);
                amplitude * (plus - minus) / Complex64::new(0.0, 2.0)
            }
            Pulse::SmoothRamp {
                center,
                width,
                amplitude,
            } => {
                // psi'' is a normalized Gaussian; L{psi} = (L{psi''} + s psi(0) + psi'(0)) / s^2.
                let second = amplitude * INV_SQRT_2PI / width
                    * gaussian_exponential_transform(s, center, width, 0.0);
                (second + s * self.value(0.0) + self.derivative(0.0)) / (s * s)
            }
        }
    }
}

fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * RealErrorFunctions::erfc(-x / std::f64::consts::SQRT_2)
}

/// `int_0^inf e^{-st} exp(-(t-c)^2/(2w^2)) e^{i omega (t-c)} dt`.
fn gaussian_exponential_transform(s: Complex64, center: f64, width: f64, omega: f64) -> Complex64 {
    let a = s - Complex64::new(0.0, omega);
    let z = (a * width * width - center) / (width * std::f64::consts::SQRT_2);
    let prefactor = width * (PI / 2.0).sqrt();
    let e = Complex64::new(-center * center / (2.0 * width * width), -omega * center);
    if z.re >= 0.0 {
        prefactor * e.exp() * ComplexErrorFunctions::erfcx(z)
    } else {
        // erfcx(z) = 2 exp(z^2) - erfcx(-z); the exponent is combined first
        // to avoid overflow for large |z|.
        prefactor * (2.0 * (z * z + e).exp() - e.exp() * ComplexErrorFunctions::erfcx(-z))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IncidentKind {
    /// `phi_inc(x,t) = psi(t - d.x / c)` with unit direction `d`.
    PlaneWave { direction: Vec3 },
    /// `phi_inc(x,t) = psi(t - |x-x0|/c) / (4 pi |x-x0|)`.
    PointSource { source: Vec3 },
}

/// The given incident potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IncidentField {
    pub kind: IncidentKind,
    pub pulse: Pulse,
    pub sound_speed: f64,
}

impl IncidentField {
    pub fn plane_wave(direction: Vec3, pulse: Pulse, sound_speed: f64) -> Result<Self> {
        let n = direction.norm();
        if !(n > 0.0) {
            return Err(FsiError::InvalidIncident("zero propagation direction".into()));
        }
        pulse.validate()?;
        Ok(IncidentField {
            kind: IncidentKind::PlaneWave {
                direction: direction / n,
            },
            pulse,
            sound_speed,
        })
    }

    pub fn point_source(source: Vec3, pulse: Pulse, sound_speed: f64) -> Result<Self> {
        pulse.validate()?;
        Ok(IncidentField {
            kind: IncidentKind::PointSource { source },
            pulse,
            sound_speed,
        })
    }

    /// Incident field with the pulse amplitude set to zero.
    pub fn silent(self) -> Self {
        IncidentField {
            pulse: self.pulse.with_amplitude(0.0),
            ..self
        }
    }

    /// Value and normal derivative of the incident potential at `x`, time `t`.
    pub fn eval_trace(&self, x: &Vec3, normal: &Vec3, t: f64) -> Result<(f64, f64)> {
        let c = self.sound_speed;
        match self.kind {
            IncidentKind::PlaneWave { direction } => {
                let tau = t - direction.dot(x) / c;
                let value = self.pulse.value(tau);
                let dn = -direction.dot(normal) / c * self.pulse.derivative(tau);
                Ok((value, dn))
            }
            IncidentKind::PointSource { source } => {
                let d = x - source;
                let r = d.norm();
                if r < 1e-12 {
                    return Err(FsiError::SingularPoint);
                }
                let tau = t - r / c;
                let four_pi_r = 4.0 * PI * r;
                let value = self.pulse.value(tau) / four_pi_r;
                let dr = -self.pulse.derivative(tau) / (four_pi_r * c) - self.pulse.value(tau) / (four_pi_r * r);
                Ok((value, dr * d.dot(normal) / r))
            }
        }
    }

    /// Time derivative of the incident potential at `x`.
    pub fn eval_rate(&self, x: &Vec3, t: f64) -> Result<f64> {
        let c = self.sound_speed;
        match self.kind {
            IncidentKind::PlaneWave { direction } => Ok(self.pulse.derivative(t - direction.dot(x) / c)),
            IncidentKind::PointSource { source } => {
                let r = (x - source).norm();
                if r < 1e-12 {
                    return Err(FsiError::SingularPoint);
                }
                Ok(self.pulse.derivative(t - r / c) / (4.0 * PI * r))
            }
        }
    }

    /// Earliest time the incident field is distinguishable from zero at `x`.
    pub fn arrival_time(&self, x: &Vec3) -> f64 {
        let c = self.sound_speed;
        let delay = match self.kind {
            IncidentKind::PlaneWave { direction } => direction.dot(x) / c,
            IncidentKind::PointSource { source } => (x - source).norm() / c,
        };
        self.pulse.onset() + delay
    }

    /// Laplace transform of the incident potential and of its normal
    /// derivative at `x`.
    pub fn laplace_trace(&self, s: Complex64, x: &Vec3, normal: &Vec3) -> Result<(Complex64, Complex64)> {
        let c = self.sound_speed;
        let psi = self.pulse.laplace(s);
        match self.kind {
            IncidentKind::PlaneWave { direction } => {
                let value = psi * (-s * direction.dot(x) / c).exp();
                Ok((value, -s * direction.dot(normal) / c * value))
            }
            IncidentKind::PointSource { source } => {
                let d = x - source;
                let r = d.norm();
                if r < 1e-12 {
                    return Err(FsiError::SingularPoint);
                }
                let green = (-s * r / c).exp() / (4.0 * PI * r);
                let value = psi * green;
                let dr = -value * (1.0 + s * r / c) / r;
                Ok((value, dr * d.dot(normal) / r))
            }
        }
    }

    /// Laplace transform of the incident potential (validated frequency).
    pub fn laplace_of_incident(
        &self,
        s: &ComplexFrequency,
        x: &Vec3,
        normal: &Vec3,
    ) -> Result<(Complex64, Complex64)> {
        self.laplace_trace(s.s(), x, normal)
    }
}

/// Samples `g(t_n)`, `t_n = n dt`, `n = 0..=N`, each sample a vector of
/// fixed width. Row `n` holds the sample at `t_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSignal {
    dt: f64,
    width: usize,
    samples: Vec<f64>,
}

impl TimeSignal {
    pub fn zeros(dt: f64, n_steps: usize, width: usize) -> Self {
        TimeSignal {
            dt,
            width,
            samples: vec![0.0; (n_steps + 1) * width],
        }
    }

    pub fn from_fn(dt: f64, n_steps: usize, width: usize, mut f: impl FnMut(f64, &mut [f64])) -> Self {
        let mut sig = Self::zeros(dt, n_steps, width);
        for n in 0..=n_steps {
            let t = n as f64 * dt;
            f(t, sig.row_mut(n));
        }
        sig
    }

    pub fn scalar(dt: f64, values: Vec<f64>) -> Self {
        assert!(!values.is_empty());
        TimeSignal {
            dt,
            width: 1,
            samples: values,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn n_steps(&self) -> usize {
        self.samples.len() / self.width - 1
    }
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }
    pub fn row(&self, n: usize) -> &[f64] {
        &self.samples[n * self.width..(n + 1) * self.width]
    }
    pub fn row_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.samples[n * self.width..(n + 1) * self.width]
    }
    /// Component `k` as a time series.
    pub fn component(&self, k: usize) -> Vec<f64> {
        (0..=self.n_steps()).map(|n| self.row(n)[k]).collect()
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.samples
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Whether the sample at `t = 0` vanishes to `tol` times the peak.
    pub fn is_causal(&self, tol: f64) -> bool {
        let peak = self.max_abs();
        self.row(0).iter().all(|v| v.abs() <= tol * peak)
    }

    /// The listed components as a new signal.
    pub fn columns(&self, cols: &[usize]) -> Self {
        let mut out = TimeSignal::zeros(self.dt, self.n_steps(), cols.len());
        for n in 0..=self.n_steps() {
            let row = self.row(n);
            for (j, &c) in cols.iter().enumerate() {
                out.row_mut(n)[j] = row[c];
            }
        }
        out
    }

    pub fn scaled(&self, a: f64) -> Self {
        TimeSignal {
            samples: self.samples.iter().map(|v| a * v).collect(),
            ..self.clone()
        }
    }

    pub fn axpy(&self, a: f64, other: &TimeSignal) -> Self {
        assert_eq!(self.samples.len(), other.samples.len());
        TimeSignal {
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(x, y)| x + a * y)
                .collect(),
            ..self.clone()
        }
    }
}
