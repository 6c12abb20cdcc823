//! Azimuth/elevation aiming geometry and rate-limited slewing.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::scenario::EffectorSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kinematic {
    Chasing,
    Tracking,
}

/// Unit aiming vector for azimuth `az` (from +x toward +y) and elevation
/// `el` (above the ground plane).
pub fn aim_direction(az: f64, el: f64) -> Vec3 {
    let (sa, ca) = az.sin_cos();
    let (se, ce) = el.sin_cos();
    Vec3::new(ce * ca, ce * sa, se)
}

/// Wrap an angle into `(-PI, PI]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Angle between two aiming directions, robust near zero.
pub fn angle_between(u: Vec3, v: Vec3) -> f64 {
    u.cross(v).norm().atan2(u.dot(v))
}

/// Distance from `point` to the ray `origin + t * dir`, `t >= 0`.
/// `dir` must be unit length.
pub fn miss_distance(origin: Vec3, dir: Vec3, point: Vec3) -> f64 {
    let rel = point - origin;
    let t = rel.dot(dir).max(0.0);
    (rel - dir * t).norm()
}

/// Azimuth and elevation that point `spec`'s barrel at `target`, clamped
/// into its limits.
pub fn desired_angles(spec: &EffectorSpec, target: Vec3) -> (f64, f64) {
    let v = target - spec.position;
    let mut az = v.y.atan2(v.x);
    if !spec.az_wraps() {
        az = az.clamp(spec.az_limits[0], spec.az_limits[1]);
    }
    let el =
        v.z.atan2(v.x.hypot(v.y))
            .clamp(spec.el_limits[0], spec.el_limits[1]);
    (az, el)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlewOutcome {
    pub azimuth: f64,
    pub elevation: f64,
    pub kinematic: Kinematic,
    /// Angle between the new aim and the desired aim.
    pub error: f64,
}

fn step_toward(current: f64, delta: f64, max_step: f64) -> f64 {
    if delta.abs() <= max_step {
        current + delta
    } else {
        current + max_step.copysign(delta)
    }
}

/// Move one timestep toward `(desired_az, desired_el)` at the effector's
/// maximum angular rates. Azimuth takes the shortest wrapped arc when the
/// limits span a full turn.
pub fn slew_effector(
    azimuth: f64,
    elevation: f64,
    desired_az: f64,
    desired_el: f64,
    dt: f64,
    spec: &EffectorSpec,
) -> SlewOutcome {
    let az_step = spec.az_rate_max * dt;
    let el_step = spec.el_rate_max * dt;

    let new_az = if spec.az_wraps() {
        let delta = wrap_angle(desired_az - azimuth);
        if delta.abs() <= az_step {
            desired_az
        } else {
            wrap_angle(azimuth + az_step.copysign(delta))
        }
    } else {
        step_toward(azimuth, desired_az - azimuth, az_step)
            .clamp(spec.az_limits[0], spec.az_limits[1])
    };
    let new_el = step_toward(elevation, desired_el - elevation, el_step)
        .clamp(spec.el_limits[0], spec.el_limits[1]);

    let error = angle_between(
        aim_direction(new_az, new_el),
        aim_direction(desired_az, desired_el),
    );
    let kinematic = if error <= spec.track_tolerance {
        Kinematic::Tracking
    } else {
        Kinematic::Chasing
    };
    SlewOutcome {
        azimuth: new_az,
        elevation: new_el,
        kinematic,
        error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioConfig;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn spec() -> EffectorSpec {
        ScenarioConfig::default().effectors[0].clone()
    }

    fn close(a: Vec3, b: Vec3) -> bool {
        (a - b).norm() < 1e-15
    }

    #[test]
    fn aim_axis_cases() {
        assert!(close(aim_direction(0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)));
        assert!(close(
            aim_direction(FRAC_PI_2, 0.0),
            Vec3::new(0.0, 1.0, 0.0)
        ));
        for az in [-3.0, -1.0, 0.0, 0.7, 2.5] {
            assert!(close(
                aim_direction(az, FRAC_PI_2),
                Vec3::new(0.0, 0.0, 1.0)
            ));
        }
    }

    #[test]
    fn slew_is_rate_limited() {
        let s = slew_effector(0.0, 0.0, PI, 0.0, 0.1, &spec());
        assert!((s.azimuth - 0.05 * PI).abs() < 1e-15);
        assert_eq!(s.kinematic, Kinematic::Chasing);
    }

    #[test]
    fn slew_takes_shortest_wrapped_arc() {
        let s = slew_effector(3.1, 0.0, -3.1, 0.0, 0.1, &spec());
        assert_eq!(s.azimuth, -3.1);
        assert_eq!(s.kinematic, Kinematic::Tracking);

        // Far side of the wrap, not reachable in one step: move the short way.
        let s = slew_effector(3.0, 0.0, -2.5, 0.0, 0.1, &spec());
        assert!((s.azimuth - wrap_angle(3.0 + 0.05 * PI)).abs() < 1e-12);
        assert!(s.azimuth < 0.0);
    }

    #[test]
    fn zero_error_is_tracking() {
        let s = slew_effector(0.4, 0.2, 0.4, 0.2, 0.1, &spec());
        assert_eq!(s.kinematic, Kinematic::Tracking);
        assert_eq!(s.error, 0.0);
    }

    #[test]
    fn bounded_azimuth_does_not_wrap() {
        let mut sp = spec();
        sp.az_limits = [-1.0, 1.0];
        let s = slew_effector(0.9, 0.0, -0.9, 0.0, 0.1, &sp);
        assert!((s.azimuth - (0.9 - 0.05 * PI)).abs() < 1e-12);
    }

    #[test]
    fn elevation_clamped_to_limits() {
        let sp = spec();
        let (_, el) = desired_angles(&sp, sp.position + Vec3::new(10.0, 0.0, -5.0));
        assert_eq!(el, 0.0);
    }

    #[test]
    fn miss_distance_cases() {
        let o = Vec3::ZERO;
        let u = Vec3::new(1.0, 0.0, 0.0);
        assert_eq!(miss_distance(o, u, Vec3::new(10.0, 0.0, 0.0)), 0.0);
        assert_eq!(miss_distance(o, u, Vec3::new(10.0, 3.0, 0.0)), 3.0);
        assert_eq!(miss_distance(o, u, Vec3::new(-5.0, 0.0, 0.0)), 5.0);
    }

    proptest! {
        #[test]
        fn aim_is_unit(az in -10.0f64..10.0, el in -2.0f64..2.0) {
            prop_assert!((aim_direction(az, el).norm() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn wrap_lands_in_half_open_interval(a in -100.0f64..100.0) {
            let w = wrap_angle(a);
            prop_assert!(w > -PI && w <= PI);
            prop_assert!(((a - w) / (2.0 * PI)).fract().abs() < 1e-9
                || (1.0 - ((a - w) / (2.0 * PI)).fract().abs()) < 1e-9);
        }

        #[test]
        fn slew_never_exceeds_rates(
            az in -PI..PI, el in 0.0f64..FRAC_PI_2,
            daz in -PI..PI, del in 0.0f64..FRAC_PI_2,
        ) {
            let sp = spec();
            let s = slew_effector(az, el, daz, del, 0.1, &sp);
            prop_assert!(wrap_angle(s.azimuth - az).abs() <= sp.az_rate_max * 0.1 + 1e-12);
            prop_assert!((s.elevation - el).abs() <= sp.el_rate_max * 0.1 + 1e-12);
        }
    }
}
