//! Standard normal distribution function.

use libm::erfc;

/// Φ(x), the standard normal CDF.
///
/// Evaluated as `erfc(-x/√2)/2`, which keeps full relative precision in the
/// lower tail. `erfc` is the msun implementation, accurate to within one ulp.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}
