//! Feature sources and ego-state vectors.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{exp, Vec2, PI};
use crate::sim::scenario::{AgentKind, LightPhase, NavManeuver};
use crate::sim::world::WorldSnapshot;

/// Intent one-hot width plus one speed entry.
pub const INTENTS: usize = 8;
pub const EGO_DIM: usize = INTENTS + 1;
/// Speed is fed to the network in units of 10 m/s.
pub const SPEED_SCALE: f64 = 0.1;

/// One-hot slot of a navigation maneuver. Slots 5..8 are unused by the
/// built-in navigation but accepted in datasets.
pub fn intent_index(m: NavManeuver) -> usize {
    match m {
        NavManeuver::Straight => 0,
        NavManeuver::Left => 1,
        NavManeuver::Right => 2,
        NavManeuver::LaneChangeLeft => 3,
        NavManeuver::LaneChangeRight => 4,
    }
}

pub fn ego_vector(intent: usize, speed: f64) -> [f64; EGO_DIM] {
    let mut v = [0.0; EGO_DIM];
    v[intent.min(INTENTS - 1)] = 1.0;
    v[INTENTS] = speed * SPEED_SCALE;
    v
}

/// Produces an N x C feature grid (row-major) for a snapshot.
pub trait FeatureSource {
    fn shape(&self) -> (usize, usize);
    fn features(&self, snapshot: &WorldSnapshot) -> Vec<f64>;
}

const CLASSES: usize = 8;
const RANGE_CENTERS: [f64; 6] = [0.0, 5.0, 10.0, 20.0, 35.0, 60.0];
const RANGE_WIDTHS: [f64; 6] = [2.5, 2.5, 3.5, 6.0, 9.0, 15.0];

/// Polar occupancy grid around the ego: one row per angular sector, and per
/// object class a set of radial basis range channels plus the relative
/// velocity (radial, tangential) of the nearest object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rasterizer {
    pub sectors: usize,
    pub max_range: f64,
    pub velocity_scale: f64,
}

impl Default for Rasterizer {
    fn default() -> Self {
        Self { sectors: 16, max_range: 80.0, velocity_scale: 0.1 }
    }
}

impl Rasterizer {
    pub const CHANNELS: usize = CLASSES * RANGE_CENTERS.len() + CLASSES * 2;

    fn splat(&self, grid: &mut [f64], nearest: &mut [f64], local: Vec2, v_rel: Vec2, class: usize) {
        let r = local.norm();
        if r > self.max_range {
            return;
        }
        let c = Self::CHANNELS;
        let ang = local.angle();
        let sector = (((ang + PI) / (2.0 * PI)) * self.sectors as f64) as usize % self.sectors;
        let row = &mut grid[sector * c..(sector + 1) * c];
        for (b, (&mu, &w)) in RANGE_CENTERS.iter().zip(&RANGE_WIDTHS).enumerate() {
            let d = (r - mu) / w;
            let ch = class * RANGE_CENTERS.len() + b;
            row[ch] = row[ch].max(exp(-0.5 * d * d));
        }
        let slot = sector * CLASSES + class;
        if r < nearest[slot] {
            nearest[slot] = r;
            let radial = if r > 1e-9 { local * (1.0 / r) } else { Vec2::new(1.0, 0.0) };
            let base = CLASSES * RANGE_CENTERS.len() + class * 2;
            row[base] = -v_rel.dot(radial) * self.velocity_scale;
            row[base + 1] = v_rel.cross(radial) * self.velocity_scale;
        }
    }
}

impl FeatureSource for Rasterizer {
    fn shape(&self) -> (usize, usize) {
        (self.sectors, Self::CHANNELS)
    }

    fn features(&self, snap: &WorldSnapshot) -> Vec<f64> {
        let mut grid = vec![0.0; self.sectors * Self::CHANNELS];
        let mut nearest = vec![f64::INFINITY; self.sectors * CLASSES];
        let ego = &snap.ego;
        let to_local = |p: Vec2| (p - ego.position).rotate(-ego.heading);
        let ego_v = ego.velocity();
        for a in &snap.actors {
            let class = match a.kind {
                AgentKind::Vehicle => 0,
                AgentKind::Cyclist => 1,
                AgentKind::Pedestrian => 2,
                AgentKind::Static => 3,
            };
            let v_rel = (a.velocity() - ego_v).rotate(-ego.heading);
            self.splat(&mut grid, &mut nearest, to_local(a.position), v_rel, class);
        }
        let still = (Vec2::ZERO - ego_v).rotate(-ego.heading);
        for l in &snap.lights {
            let class = match l.phase {
                LightPhase::Red => 4,
                LightPhase::Yellow => 5,
                LightPhase::Green => 6,
            };
            self.splat(&mut grid, &mut nearest, to_local(l.stop_point), still, class);
        }
        for s in &snap.stop_signs {
            self.splat(&mut grid, &mut nearest, to_local(s.stop_point), still, 7);
        }
        grid
    }
}
