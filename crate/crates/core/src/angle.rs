//! Angle helpers. Headings live in (-pi, pi] everywhere in this crate.

use std::f64::consts::PI;

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI); // [0, 2*pi)
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Shortest signed difference `a - b`, wrapped to (-pi, pi].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn wraps_into_half_open_interval() {
        assert_relative_eq!(wrap_angle(0.0), 0.0);
        assert_relative_eq!(wrap_angle(PI), PI);
        assert_relative_eq!(wrap_angle(-PI), PI);
        assert_relative_eq!(wrap_angle(3.0 * PI), PI);
        assert_relative_eq!(wrap_angle(2.0 * PI), 0.0);
        assert_relative_eq!(wrap_angle(-0.5 * PI), -0.5 * PI);
    }

    #[test]
    fn diff_takes_short_way_around() {
        assert_relative_eq!(angle_diff(3.0, -3.0), 6.0 - 2.0 * PI, epsilon = 1e-12);
        assert_relative_eq!(angle_diff(0.1, -0.1), 0.2, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn wrap_is_idempotent_and_in_range(a in -50.0f64..50.0) {
            let w = wrap_angle(a);
            prop_assert!(w > -PI && w <= PI);
            prop_assert!((wrap_angle(w) - w).abs() < 1e-12);
            // Same direction on the unit circle.
            prop_assert!((w.cos() - a.cos()).abs() < 1e-9);
            prop_assert!((w.sin() - a.sin()).abs() < 1e-9);
        }
    }
}
