use std::fmt;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::stl::ObstacleLookup;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ZoneMode {
    Standard,
    Corridor,
    Crowded,
}

impl ZoneMode {
    pub fn name(self) -> &'static str {
        match self {
            ZoneMode::Standard => "standard",
            ZoneMode::Corridor => "corridor",
            ZoneMode::Crowded => "crowded",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "standard" => Some(ZoneMode::Standard),
            "corridor" => Some(ZoneMode::Corridor),
            "crowded" => Some(ZoneMode::Crowded),
            _ => None,
        }
    }
}

impl fmt::Display for ZoneMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Rect { min: [f64; 2], max: [f64; 2] },
    Circle { center: [f64; 2], radius: f64 },
}

impl Shape {
    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            Shape::Rect { min, max } => {
                p[0] >= min[0] && p[0] <= max[0] && p[1] >= min[1] && p[1] <= max[1]
            }
            Shape::Circle { center, radius } => {
                (p[0] - center[0]).hypot(p[1] - center[1]) <= *radius
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub name: String,
    pub shape: Shape,
    pub mode: ZoneMode,
    /// Overrides the mode's default cap inside this zone.
    pub v_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Motion {
    Static {
        center: [f64; 2],
    },
    /// Rose-curve path `c + A cos(k w t + phase) (cos(w t + phase), sin(w t + phase))`.
    Rhodonea {
        center: [f64; 2],
        amplitude: f64,
        petals: f64,
        rate: f64,
        phase: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: String,
    pub radius: f64,
    pub safe_distance: f64,
    pub motion: Motion,
}

pub const DEFAULT_OBSTACLE_RADIUS: f64 = 0.3;
pub const DEFAULT_SAFETY_MARGIN: f64 = 0.25;

/// Position and velocity of an obstacle at time `t`.
pub fn obstacle_state(o: &Obstacle, t: f64) -> (Vector2<f64>, Vector2<f64>) {
    match o.motion {
        Motion::Static { center } => (Vector2::from(center), Vector2::zeros()),
        Motion::Rhodonea {
            center,
            amplitude,
            petals,
            rate,
            phase,
        } => {
            let s = rate * t + phase;
            let q = petals * rate * t + phase;
            let r = amplitude * q.cos();
            let dr = -amplitude * petals * rate * q.sin();
            let dir = Vector2::new(s.cos(), s.sin());
            let ddir = Vector2::new(-s.sin(), s.cos()) * rate;
            (Vector2::from(center) + dir * r, dir * dr + ddir * r)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedCaps {
    pub standard: f64,
    pub crowded: f64,
    pub corridor: f64,
    /// Distance to an obstacle surface under which the crowded cap applies.
    pub proximity: f64,
}

impl Default for SpeedCaps {
    fn default() -> Self {
        SpeedCaps {
            standard: 1.5,
            crowded: 1.05,
            corridor: 3.0,
            proximity: 1.5,
        }
    }
}

impl SpeedCaps {
    pub fn for_mode(&self, mode: ZoneMode) -> f64 {
        match mode {
            ZoneMode::Standard => self.standard,
            ZoneMode::Corridor => self.corridor,
            ZoneMode::Crowded => self.crowded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct World {
    pub zones: Vec<Zone>,
    pub obstacles: Vec<Obstacle>,
    pub caps: SpeedCaps,
}

impl World {
    pub fn obstacle(&self, id: &str) -> Option<&Obstacle> {
        self.obstacles.iter().find(|o| o.id == id)
    }

    /// Speed cap and mode at `position`. Crowded beats corridor beats
    /// standard; among zones of the winning mode the lowest cap applies.
    pub fn vmax_at(&self, position: &[f64], t: f64) -> (f64, ZoneMode) {
        let near_obstacle = self.obstacles.iter().any(|o| {
            let (c, _) = obstacle_state(o, t);
            (position[0] - c.x).hypot(position[1] - c.y) - o.radius <= self.caps.proximity
        });
        let mut best = (self.caps.standard, ZoneMode::Standard);
        if near_obstacle {
            best = (self.caps.crowded, ZoneMode::Crowded);
        }
        for z in self.zones.iter().filter(|z| z.shape.contains(position)) {
            let cap = z.v_max.unwrap_or_else(|| self.caps.for_mode(z.mode));
            if z.mode > best.1 || (z.mode == best.1 && cap < best.0) {
                best = (cap, z.mode);
            }
        }
        best
    }
}

impl ObstacleLookup for World {
    fn obstacle_state(&self, id: &str, t: f64) -> Option<(Vector2<f64>, Vector2<f64>)> {
        self.obstacle(id).map(|o| obstacle_state(o, t))
    }
}
