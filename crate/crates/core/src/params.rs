use crate::error::{Error, Result};

/// Decay `theta` (days) and bandwidth scale `h` (km).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub theta: f64,
    pub h: f64,
}

impl ModelParams {
    pub fn new(theta: f64, h: f64) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::InvalidParameter("theta must be positive and finite"));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParameter("h must be positive and finite"));
        }
        Ok(Self { theta, h })
    }
}

/// Compact support of the parameter prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBox {
    pub theta_min: f64,
    pub theta_max: f64,
    pub h_min: f64,
    pub h_max: f64,
}

impl Default for ParamBox {
    fn default() -> Self {
        Self { theta_min: 1.0, theta_max: 500.0, h_min: 0.5, h_max: 50.0 }
    }
}

impl ParamBox {
    pub fn new(theta_min: f64, theta_max: f64, h_min: f64, h_max: f64) -> Result<Self> {
        let b = Self { theta_min, theta_max, h_min, h_max };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |lo: f64, hi: f64| lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi;
        if !ok(self.theta_min, self.theta_max) || !ok(self.h_min, self.h_max) {
            return Err(Error::InvalidParameter("parameter box needs 0 < min < max on both axes"));
        }
        Ok(())
    }

    pub fn contains(&self, p: &ModelParams) -> bool {
        (self.theta_min..=self.theta_max).contains(&p.theta) && (self.h_min..=self.h_max).contains(&p.h)
    }

    /// Map into the unit square, (theta', h').
    pub fn to_unit(&self, p: &ModelParams) -> (f64, f64) {
        (
            (p.theta - self.theta_min) / (self.theta_max - self.theta_min),
            (p.h - self.h_min) / (self.h_max - self.h_min),
        )
    }

    /// Inverse of [`ParamBox::to_unit`], clamped so rounding cannot leave the box.
    pub fn from_unit(&self, theta_u: f64, h_u: f64) -> ModelParams {
        let theta = self.theta_min + theta_u.clamp(0.0, 1.0) * (self.theta_max - self.theta_min);
        let h = self.h_min + h_u.clamp(0.0, 1.0) * (self.h_max - self.h_min);
        ModelParams {
            theta: theta.clamp(self.theta_min, self.theta_max),
            h: h.clamp(self.h_min, self.h_max),
        }
    }
}
