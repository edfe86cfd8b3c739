// Float helpers backed by libm so results do not depend on the platform's
// libm and the crate builds without std.

pub(crate) use core::f64::consts::PI;

/// Speed of light in m/s.
pub(crate) const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub(crate) fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub(crate) fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn hypot(x: f64, y: f64) -> f64 {
    libm::hypot(x, y)
}

#[inline]
pub(crate) fn log10(x: f64) -> f64 {
    libm::log10(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub(crate) fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub(crate) fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

#[inline]
pub(crate) fn to_rad(deg: f64) -> f64 {
    deg * PI / 180.0
}

#[inline]
pub(crate) fn to_deg(rad: f64) -> f64 {
    rad * 180.0 / PI
}

/// Wraps an angle in degrees into (-180, 180].
pub(crate) fn wrap_deg(deg: f64) -> f64 {
    let mut a = deg - 360.0 * floor((deg + 180.0) / 360.0);
    if a <= -180.0 {
        a += 360.0;
    }
    a
}

/// Euclidean remainder that stays in [0, m) for positive m.
#[inline]
pub(crate) fn rem_euclid(x: f64, m: f64) -> f64 {
    let r = x - m * floor(x / m);
    if r >= m {
        0.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_stays_in_half_open_range() {
        assert_eq!(wrap_deg(180.0), 180.0);
        assert_eq!(wrap_deg(-180.0), 180.0);
        assert!((wrap_deg(370.0) - 10.0).abs() < 1e-12);
        assert!((wrap_deg(-190.0) - 170.0).abs() < 1e-12);
    }

    #[test]
    fn rem_euclid_handles_negatives() {
        assert!((rem_euclid(-0.5, 2.0) - 1.5).abs() < 1e-12);
        assert_eq!(rem_euclid(2.0, 2.0), 0.0);
    }
}
