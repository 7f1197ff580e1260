//! Angle helpers. All angles are radians.

use core::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;

/// Wraps an angle into `(-π, π]`.
pub fn wrap_pi(theta: f64) -> f64 {
    let wrapped = theta - TWO_PI * libm::ceil((theta - PI) / TWO_PI);
    // ceil can land one period low for values a hair above -π
    if wrapped <= -PI {
        wrapped + TWO_PI
    } else {
        wrapped
    }
}

pub fn deg_to_rad(deg: f64) -> f64 {
    deg * PI / 180.0
}

pub fn rad_to_deg(rad: f64) -> f64 {
    rad * 180.0 / PI
}
