// Thin wrappers so the no_std build does not depend on std float methods.

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub(crate) fn hypot(x: f64, y: f64) -> f64 {
    libm::hypot(x, y)
}

#[inline]
pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub(crate) fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}

/// `x` reduced into `[0, 2π)`.
pub(crate) fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * core::f64::consts::PI;
    let mut r = x - two_pi * floor(x / two_pi);
    if r >= two_pi {
        r -= two_pi;
    }
    if r < 0.0 {
        r = 0.0;
    }
    r
}

/// Distance between two phases on the circle.
pub(crate) fn phase_distance(a: f64, b: f64) -> f64 {
    let two_pi = 2.0 * core::f64::consts::PI;
    let d = wrap_phase(a - b);
    if d > two_pi - d {
        two_pi - d
    } else {
        d
    }
}
