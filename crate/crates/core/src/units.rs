//! Degree/radian conversions. Everything inside the crate is SI radians;
//! degrees only appear at I/O boundaries.

pub const DEG: f64 = std::f64::consts::PI / 180.0;

#[inline]
pub fn deg_to_rad(deg: f64) -> f64 {
    deg * DEG
}

#[inline]
pub fn rad_to_deg(rad: f64) -> f64 {
    rad / DEG
}

/// deg/h → rad/s
#[inline]
pub fn deg_per_hour_to_rad_per_sec(v: f64) -> f64 {
    v * DEG / 3600.0
}
