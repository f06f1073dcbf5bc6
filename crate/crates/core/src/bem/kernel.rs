use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{FsiError, Result};
use crate::model::ComplexFrequency;
use crate::quadrature::MAX_ORDER;

/// Gauss orders used by the boundary element assembly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureConfig {
    /// Points per direction of the collapsed Gauss rule for well separated
    /// panel pairs; closer pairs get more.
    pub regular_order: usize,
    /// Points per hypercube direction for touching panel pairs.
    pub singular_order: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            regular_order: 3,
            singular_order: 5,
        }
    }
}

impl QuadratureConfig {
    pub const MIN_REGULAR: usize = 2;
    pub const MIN_SINGULAR: usize = 3;
    pub const MAX_SINGULAR: usize = 12;

    pub fn validate(&self) -> Result<()> {
        if self.regular_order < Self::MIN_REGULAR || self.regular_order > MAX_ORDER {
            return Err(FsiError::Quadrature(format!(
                "regular order {} outside {}..={}",
                self.regular_order,
                Self::MIN_REGULAR,
                MAX_ORDER
            )));
        }
        if self.singular_order < Self::MIN_SINGULAR || self.singular_order > Self::MAX_SINGULAR {
            return Err(FsiError::Quadrature(format!(
                "singular order {} outside {}..={}",
                self.singular_order,
                Self::MIN_SINGULAR,
                Self::MAX_SINGULAR
            )));
        }
        Ok(())
    }
}

/// Wavenumber of the transformed wave operator together with the
/// quadrature configuration.
#[derive(Clone, Copy, Debug)]
pub struct KernelParams {
    pub kappa: Complex64,
    pub quadrature: QuadratureConfig,
}

impl KernelParams {
    pub fn new(s: &ComplexFrequency, sound_speed: f64, quadrature: QuadratureConfig) -> Result<Self> {
        quadrature.validate()?;
        if !(sound_speed > 0.0) {
            return Err(FsiError::InvalidMaterial("sound speed must be positive".into()));
        }
        Ok(KernelParams {
            kappa: s.s() / sound_speed,
            quadrature,
        })
    }

    /// Same configuration with a directly specified wavenumber; `Re kappa`
    /// may be zero for the Laplace limit.
    pub fn with_kappa(kappa: Complex64, quadrature: QuadratureConfig) -> Result<Self> {
        quadrature.validate()?;
        if kappa.re < 0.0 || !kappa.re.is_finite() || !kappa.im.is_finite() {
            return Err(FsiError::NotInRightHalfPlane(kappa));
        }
        Ok(KernelParams { kappa, quadrature })
    }

    /// `e^{-kappa r} / (4 pi r)`.
    #[inline]
    pub fn green(&self, r: f64) -> Complex64 {
        (-self.kappa * r).exp() / (4.0 * PI * r)
    }

    /// `(E, E (1 + kappa r) / r^2)`; the second factor times `n . (x - y)`
    /// gives the normal derivative in `y`.
    #[inline]
    pub fn green_and_gradient_factor(&self, r: f64) -> (Complex64, Complex64) {
        let e = self.green(r);
        (e, e * (1.0 + self.kappa * r) / (r * r))
    }
}
