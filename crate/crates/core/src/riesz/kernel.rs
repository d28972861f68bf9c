use crate::error::{Error, Result};

/// `x / |x|^{s+1}`.
pub fn riesz_kernel(x: &[f64], s: f64) -> Result<Vec<f64>> {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    if r2 == 0.0 {
        return Err(Error::Singular("kernel evaluated at the origin".into()));
    }
    let f = Power::new(s).factor(r2);
    Ok(x.iter().map(|v| v * f).collect())
}

/// `|x|^{-(s+1)}` as a function of `|x|²`, with fast paths for common `s`.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Power {
    One,
    Two,
    Other(f64),
}

impl Power {
    pub(crate) fn new(s: f64) -> Self {
        if s == 1.0 {
            Power::One
        } else if s == 2.0 {
            Power::Two
        } else {
            Power::Other(-0.5 * (s + 1.0))
        }
    }

    #[inline(always)]
    pub(crate) fn factor(self, r2: f64) -> f64 {
        match self {
            Power::One => 1.0 / r2,
            Power::Two => 1.0 / (r2 * r2.sqrt()),
            Power::Other(e) => r2.powf(e),
        }
    }
}
