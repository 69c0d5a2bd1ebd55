//! PID tracking with a finite integral window.

use alloc::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::planner::TrajectorySample;
use crate::math::{wrap_angle, Vec2};
use crate::sim::vehicle::{Control, VehicleState};

pub const PID_BUFFER: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    pub const LONGITUDINAL: PidGains = PidGains { kp: 1.95, ki: 0.05, kd: 0.2 };
    pub const LATERAL: PidGains = PidGains { kp: 1.0, ki: 0.05, kd: 0.0 };
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pid {
    pub gains: PidGains,
    buffer: VecDeque<f64>,
    capacity: usize,
}

impl Pid {
    pub fn new(gains: PidGains) -> Self {
        Self { gains, buffer: VecDeque::with_capacity(PID_BUFFER), capacity: PID_BUFFER }
    }

    pub fn buffer(&self) -> &VecDeque<f64> {
        &self.buffer
    }

    pub fn reset(&mut self) {
        self.buffer.clear();
    }

    /// One controller update. The integral runs over the last ten errors and
    /// the derivative is zero until a previous error exists.
    pub fn step(&mut self, error: f64, dt: f64) -> f64 {
        let derivative = match self.buffer.back() {
            Some(prev) if dt > 0.0 => (error - prev) / dt,
            _ => 0.0,
        };
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(error);
        let integral: f64 = self.buffer.iter().map(|e| e * dt).sum();
        self.gains.kp * error + self.gains.ki * integral + self.gains.kd * derivative
    }
}

/// Paired longitudinal and lateral PID loops producing actuator commands.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracker {
    pub longitudinal: Pid,
    pub lateral: Pid,
    /// Brake per unit of negative output, so that one unit of output asks
    /// for the same deceleration as one unit of throttle gives acceleration
    /// (max throttle accel / max brake decel).
    pub brake_scale: f64,
}

impl Default for Tracker {
    fn default() -> Self {
        let limits = crate::sim::vehicle::VehicleLimits::default();
        Self::new(limits.max_accel / limits.max_brake)
    }
}

impl Tracker {
    pub fn new(brake_scale: f64) -> Self {
        Self { longitudinal: Pid::new(PidGains::LONGITUDINAL), lateral: Pid::new(PidGains::LATERAL), brake_scale }
    }

    /// Speed loop only; steer is left at zero.
    pub fn speed_control(&mut self, target_speed: f64, speed: f64, dt: f64) -> Control {
        let u = self.longitudinal.step(target_speed - speed, dt);
        Control { throttle: u.clamp(0.0, 1.0), brake: (-u * self.brake_scale).clamp(0.0, 1.0), steer: 0.0 }
    }

    /// Tracks `target` from `ego`. Close to the target the heading error is
    /// taken against the target's heading instead of the bearing to it.
    pub fn control(&mut self, ego: &VehicleState, target_speed: f64, target: &TrajectorySample, dt: f64) -> Control {
        let mut c = self.speed_control(target_speed, ego.speed, dt);
        let to: Vec2 = target.position - ego.position;
        let desired = if to.norm() < 1.0 { target.heading } else { to.angle() };
        let err = wrap_angle(desired - ego.heading);
        c.steer = self.lateral.step(err, dt).clamp(-1.0, 1.0);
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_error_zero_output() {
        let mut p = Pid::new(PidGains::LONGITUDINAL);
        assert_eq!(p.step(0.0, 0.05), 0.0);
    }

    #[test]
    fn proportional_only() {
        let mut p = Pid::new(PidGains { kp: 1.95, ki: 0.0, kd: 0.0 });
        assert_eq!(p.step(0.5, 0.05), 0.975);
    }

    #[test]
    fn two_equal_errors() {
        let mut p = Pid::new(PidGains::LONGITUDINAL);
        p.step(0.1, 0.05);
        let out = p.step(0.1, 0.05);
        // P + I (two buffered samples) + D (no change)
        let expected = 1.95 * 0.1 + 0.05 * (0.1 * 0.05 + 0.1 * 0.05) + 0.2 * 0.0;
        assert!((out - expected).abs() < 1e-12);
        assert!((out - 0.1955).abs() < 1e-12);
    }

    #[test]
    fn buffer_is_bounded() {
        let mut p = Pid::new(PidGains::LATERAL);
        for i in 0..25 {
            p.step(i as f64, 0.05);
        }
        assert_eq!(p.buffer().len(), 10);
        assert_eq!(p.buffer()[0], 15.0);
    }
}
