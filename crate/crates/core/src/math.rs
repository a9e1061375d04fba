//! Small scalar math helpers shared across the crate.
//!
//! Everything routes through `libm` so results are identical on every
//! platform, which the determinism contracts rely on.

/// Standard normal CDF via the exact erf form.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / core::f64::consts::SQRT_2))
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * core::f64::consts::PI)
}

/// Exact-erf GELU: x·Φ(x).
pub fn gelu(x: f64) -> f64 {
    x * normal_cdf(x)
}

/// d/dx [x·Φ(x)] = Φ(x) + x·φ(x).
pub fn gelu_derivative(x: f64) -> f64 {
    normal_cdf(x) + x * normal_pdf(x)
}
