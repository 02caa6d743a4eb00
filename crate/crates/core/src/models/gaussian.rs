use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One coordinate of a Gaussian product pair: `N(mu, sigma²)` under ℙ and
/// `N(mu_q, sigma_q²)` under ℙ'.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianCoordinate {
    pub mu: f64,
    pub mu_q: f64,
    pub sigma: f64,
    pub sigma_q: f64,
}

impl GaussianCoordinate {
    pub fn new(mu: f64, mu_q: f64, sigma: f64, sigma_q: f64) -> Self {
        GaussianCoordinate {
            mu,
            mu_q,
            sigma,
            sigma_q,
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        for (name, v) in [("mu", self.mu), ("mu_q", self.mu_q)] {
            if !v.is_finite() {
                return Err(Error::validation(format!("{field}.{name}"), "must be finite"));
            }
        }
        for (name, v) in [("sigma", self.sigma), ("sigma_q", self.sigma_q)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(
                    format!("{field}.{name}"),
                    "must be finite and positive",
                ));
            }
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.mu == self.mu_q && self.sigma == self.sigma_q
    }

    pub fn mean_gap(&self) -> f64 {
        self.mu_q - self.mu
    }

    /// `ln ρ = ½ ln(2σσ'/(σ²+σ'²)) − Δ²/(4(σ²+σ'²))`.
    pub fn log_affinity(&self) -> f64 {
        let (s, t) = (self.sigma, self.sigma_q);
        let var_sum = s * s + t * t;
        let d = self.mean_gap();
        let scale = if s == t {
            0.0
        } else {
            0.5 * (2.0 * s * t / var_sum).ln()
        };
        scale - d * d / (4.0 * var_sum)
    }

    pub fn affinity(&self) -> f64 {
        self.log_affinity().exp()
    }

    /// `1 − ρ` without cancellation.
    pub fn hellinger_increment(&self) -> f64 {
        -self.log_affinity().exp_m1()
    }

    /// `ln φ(x) = ln(dN(mu_q, sigma_q²)/dN(mu, sigma²))(x)`.
    pub fn log_ratio(&self, x: f64) -> f64 {
        if self.sigma == self.sigma_q {
            let var = self.sigma * self.sigma;
            self.mean_gap() / var * (x - 0.5 * (self.mu + self.mu_q))
        } else {
            let zp = (x - self.mu) / self.sigma;
            let zq = (x - self.mu_q) / self.sigma_q;
            (self.sigma / self.sigma_q).ln() + 0.5 * (zp * zp - zq * zq)
        }
    }
}
