use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{RigidTransform, Vec3};
use crate::mpm::{RigidMotion, RigidState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionKind {
    Press,
    Slip,
    Rotate,
}

impl MotionKind {
    pub const ALL: [MotionKind; 3] = [MotionKind::Press, MotionKind::Slip, MotionKind::Rotate];
}

impl fmt::Display for MotionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MotionKind::Press => "press",
            MotionKind::Slip => "slip",
            MotionKind::Rotate => "rotate",
        })
    }
}

/// Scripted indenter motion: descend by `press_depth`, hold for
/// `dwell_steps`, then slip or rotate. Slip and rotate always start with the
/// press.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    pub kind: MotionKind,
    /// Meters, along −z.
    pub press_depth: f64,
    /// Translational speed of the press and slip phases, m/s.
    pub speed: f64,
    /// Horizontal slip displacement, meters.
    #[serde(default)]
    pub slip: [f64; 2],
    /// Rotation about the vertical axis through the indenter, radians.
    #[serde(default)]
    pub rotate_angle: f64,
    /// rad/s.
    #[serde(default)]
    pub angular_speed: f64,
    #[serde(default)]
    pub dwell_steps: u64,
}

impl Trajectory {
    pub fn press(press_depth: f64, speed: f64) -> Self {
        Self {
            kind: MotionKind::Press,
            press_depth,
            speed,
            slip: [0.0; 2],
            rotate_angle: 0.0,
            angular_speed: 0.0,
            dwell_steps: 0,
        }
    }

    /// Field name and message of the first violated constraint.
    pub fn check(&self) -> Result<(), (&'static str, String)> {
        if !(self.press_depth > 0.0 && self.press_depth.is_finite()) {
            return Err(("press_depth", format!("must be positive, got {}", self.press_depth)));
        }
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return Err(("speed", format!("must be non-negative, got {}", self.speed)));
        }
        if !(self.angular_speed >= 0.0 && self.angular_speed.is_finite()) {
            return Err(("angular_speed", format!("must be non-negative, got {}", self.angular_speed)));
        }
        if !self.slip.iter().all(|s| s.is_finite()) || !self.rotate_angle.is_finite() {
            return Err(("slip", "must be finite".into()));
        }
        match self.kind {
            MotionKind::Slip if self.slip == [0.0; 2] => Err(("slip", "a slip trajectory needs a nonzero slip vector".into())),
            MotionKind::Rotate if self.rotate_angle == 0.0 => Err(("rotate_angle", "a rotate trajectory needs a nonzero angle".into())),
            MotionKind::Rotate if self.angular_speed == 0.0 && self.speed > 0.0 => {
                Err(("angular_speed", "must be positive for a rotate trajectory".into()))
            }
            _ => Ok(()),
        }
    }

    fn press_time(&self) -> f64 {
        if self.speed > 0.0 {
            self.press_depth / self.speed
        } else {
            f64::INFINITY
        }
    }

    fn second_phase_time(&self) -> f64 {
        let (amount, rate) = match self.kind {
            MotionKind::Press => return 0.0,
            MotionKind::Slip => (self.slip[0].hypot(self.slip[1]), self.speed),
            MotionKind::Rotate => (self.rotate_angle.abs(), self.angular_speed),
        };
        if rate > 0.0 {
            amount / rate
        } else {
            f64::INFINITY
        }
    }

    /// Engine steps until the motion is complete (dwell included).
    pub fn total_steps(&self, dt: f64) -> Option<u64> {
        let t = self.press_time() + self.second_phase_time();
        t.is_finite().then(|| (t / dt - 1e-9).ceil() as u64 + self.dwell_steps)
    }
}

/// Indenter state at `step`, relative to its rest placement. `pivot` is the
/// rest position of a point on the rotation axis.
pub fn trajectory_pose(traj: &Trajectory, step: u64, dt: f64, pivot: Vec3) -> RigidState {
    let t = step as f64 * dt;
    let t_press = traj.press_time();
    let dwell = traj.dwell_steps as f64 * dt;
    let t_second = traj.second_phase_time();

    let down = Vec3::new(0.0, 0.0, -1.0);
    let (depth, press_v) = if t < t_press {
        (traj.speed * t, down * traj.speed)
    } else {
        (traj.press_depth, Vec3::zeros())
    };
    // time spent in the second phase, clamped to its duration
    let tau = (t - t_press - dwell).clamp(0.0, t_second);
    let moving = t >= t_press + dwell && t < t_press + dwell + t_second;

    let mut offset = down * depth;
    let mut velocity = press_v;
    let mut angle = 0.0;
    let mut omega = Vec3::zeros();
    match traj.kind {
        MotionKind::Press => {}
        MotionKind::Slip => {
            let s = Vec3::new(traj.slip[0], traj.slip[1], 0.0);
            let dir = s / s.norm();
            offset += dir * (traj.speed * tau).min(s.norm());
            if moving {
                velocity = dir * traj.speed;
            }
        }
        MotionKind::Rotate => {
            let sign = traj.rotate_angle.signum();
            angle = sign * (traj.angular_speed * tau).min(traj.rotate_angle.abs());
            if moving {
                omega = Vec3::new(0.0, 0.0, sign * traj.angular_speed);
            }
        }
    }
    RigidState {
        pose: RigidTransform::rotation_about_z(angle, pivot, offset),
        velocity,
        angular_velocity: omega,
        pivot: pivot + offset,
    }
}

/// A trajectory bound to a step size and rotation axis.
#[derive(Debug, Clone, Copy)]
pub struct IndenterMotion {
    pub trajectory: Trajectory,
    pub dt: f64,
    pub pivot: Vec3,
}

impl RigidMotion for IndenterMotion {
    fn state(&self, step: u64) -> RigidState {
        trajectory_pose(&self.trajectory, step, self.dt, self.pivot)
    }
}
