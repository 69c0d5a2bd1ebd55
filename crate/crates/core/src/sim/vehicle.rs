//! Kinematic bicycle model.

use serde::{Deserialize, Serialize};

use crate::geometry::OrientedBox;
use crate::math::{cos, sin, tan, wrap_angle, Vec2};

/// Actuator limits of the kinematic bicycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleLimits {
    /// Maximum road-wheel steering angle (rad).
    pub max_steer: f64,
    /// Acceleration at full throttle (m/s^2).
    pub max_accel: f64,
    /// Deceleration at full brake (m/s^2).
    pub max_brake: f64,
    /// Largest integration step; longer steps are split.
    pub max_dt: f64,
}

impl Default for VehicleLimits {
    fn default() -> Self {
        Self { max_steer: 0.6, max_accel: 3.0, max_brake: 8.0, max_dt: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Control {
    pub throttle: f64,
    pub brake: f64,
    pub steer: f64,
}

impl Control {
    pub fn clamped(self) -> Self {
        let c = Self {
            throttle: clamp_finite(self.throttle, 0.0, 1.0),
            brake: clamp_finite(self.brake, 0.0, 1.0),
            steer: clamp_finite(self.steer, -1.0, 1.0),
        };
        if c != self {
            log::debug!("control clamped from {self:?} to {c:?}");
        }
        c
    }
}

fn clamp_finite(v: f64, lo: f64, hi: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub accel: f64,
    /// Road-wheel angle (rad).
    pub steer: f64,
    pub wheelbase: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl VehicleState {
    pub fn new(position: Vec2, heading: f64, speed: f64) -> Self {
        Self {
            position,
            heading,
            speed: speed.max(0.0),
            accel: 0.0,
            steer: 0.0,
            wheelbase: 2.7,
            half_length: 2.4,
            half_width: 1.0,
        }
    }

    pub fn footprint(&self) -> OrientedBox {
        OrientedBox::new(self.position, self.heading, self.half_length, self.half_width)
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::from_angle(self.heading) * self.speed
    }
}

/// Advances the bicycle model by `dt` seconds.
///
/// Steps longer than `limits.max_dt` are split into equal sub-steps; a
/// non-positive `dt` leaves the state unchanged.
pub fn step_vehicle(state: &VehicleState, control: Control, dt: f64, limits: &VehicleLimits) -> VehicleState {
    if !(dt > 0.0) {
        log::debug!("step_vehicle ignored non-positive dt {dt}");
        return *state;
    }
    let c = control.clamped();
    let steer = c.steer * limits.max_steer;
    let accel = c.throttle * limits.max_accel - c.brake * limits.max_brake;
    let substeps = crate::math::ceil(dt / limits.max_dt).max(1.0) as usize;
    let h = dt / substeps as f64;

    let mut s = *state;
    s.steer = steer;
    let yaw_gain = tan(steer) / s.wheelbase;
    for _ in 0..substeps {
        let v = s.speed;
        s.position.x += v * cos(s.heading) * h;
        s.position.y += v * sin(s.heading) * h;
        s.heading = wrap_angle(s.heading + v * yaw_gain * h);
        s.speed = (v + accel * h).max(0.0);
    }
    // realised acceleration, which is zero once braking has stopped the car
    s.accel = (s.speed - state.speed) / dt;
    s
}
