use crate::boxfilter::WindowSpec;
use crate::error::{Error, Result};
use crate::guidance::PolynomialSpec;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterParams {
    lambda: f64,
    window: WindowSpec,
    poly: PolynomialSpec,
}

impl FilterParams {
    /// Smallest regularization weight accepted; smaller positive values are
    /// raised to it.
    pub const MIN_LAMBDA: f64 = 1e-6;

    pub const DEFAULT_LAMBDA: f64 = 0.05;
    pub const DEFAULT_RADIUS: usize = 7;
    pub const DEFAULT_DEGREE: usize = 2;

    pub fn new(lambda: f64, radius: usize, degree: usize) -> Result<Self> {
        Ok(Self {
            lambda: validate_lambda(lambda)?,
            window: WindowSpec::new(radius)?,
            poly: PolynomialSpec::new(degree)?,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn window(&self) -> WindowSpec {
        self.window
    }

    pub fn radius(&self) -> usize {
        self.window.radius()
    }

    pub fn poly(&self) -> PolynomialSpec {
        self.poly
    }

    pub fn with_lambda(self, lambda: f64) -> Result<Self> {
        Ok(Self {
            lambda: validate_lambda(lambda)?,
            ..self
        })
    }
}

impl Default for FilterParams {
    fn default() -> Self {
        Self::new(Self::DEFAULT_LAMBDA, Self::DEFAULT_RADIUS, Self::DEFAULT_DEGREE)
            .expect("defaults are valid")
    }
}

pub(crate) fn validate_lambda(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    Ok(lambda.max(FilterParams::MIN_LAMBDA))
}
