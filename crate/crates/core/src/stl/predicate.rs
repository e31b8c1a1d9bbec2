use nalgebra::Vector2;
use thiserror::Error;

use super::Predicate;

/// Source of obstacle positions for `Clearance` predicates.
pub trait ObstacleLookup {
    /// Position and velocity of obstacle `id` at time `t`.
    fn obstacle_state(&self, id: &str, t: f64) -> Option<(Vector2<f64>, Vector2<f64>)>;
}

/// World with no obstacles; every clearance lookup fails.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoObstacles;

impl ObstacleLookup for NoObstacles {
    fn obstacle_state(&self, _id: &str, _t: f64) -> Option<(Vector2<f64>, Vector2<f64>)> {
        None
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredicateError {
    #[error("state has {state} components but the predicate reads {needed}")]
    DimensionMismatch { state: usize, needed: usize },
    #[error("unknown obstacle id `{0}`")]
    UnknownObstacle(String),
}

/// Gradient of `h` with respect to the full state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PredicateGradient {
    pub grad: Vec<f64>,
    /// Set when the gradient is undefined (ball center) and zero was returned.
    pub degenerate: bool,
}

fn check_dim(p: &Predicate, state: &[f64]) -> Result<usize, PredicateError> {
    let needed = p.position_dim();
    if state.len() < needed {
        return Err(PredicateError::DimensionMismatch {
            state: state.len(),
            needed,
        });
    }
    Ok(needed)
}

fn obstacle_offset(
    id: &str,
    state: &[f64],
    t: f64,
    world: &dyn ObstacleLookup,
) -> Result<(Vector2<f64>, Vector2<f64>), PredicateError> {
    let (pos, vel) = world
        .obstacle_state(id, t)
        .ok_or_else(|| PredicateError::UnknownObstacle(id.to_string()))?;
    Ok((Vector2::new(state[0] - pos.x, state[1] - pos.y), vel))
}

pub fn eval_predicate(
    p: &Predicate,
    state: &[f64],
    t: f64,
    world: &dyn ObstacleLookup,
) -> Result<f64, PredicateError> {
    let dim = check_dim(p, state)?;
    Ok(match p {
        Predicate::BallReach { center, epsilon } => {
            let dist = state[..dim]
                .iter()
                .zip(center)
                .map(|(x, c)| (x - c) * (x - c))
                .sum::<f64>()
                .sqrt();
            epsilon - dist
        }
        Predicate::Clearance {
            obstacle,
            safe_distance,
        } => {
            let (d, _) = obstacle_offset(obstacle, state, t, world)?;
            d.norm_squared() - safe_distance * safe_distance
        }
        Predicate::Halfspace { normal, offset } => {
            offset
                - state[..dim]
                    .iter()
                    .zip(normal)
                    .map(|(x, n)| x * n)
                    .sum::<f64>()
        }
    })
}

pub fn predicate_gradient(
    p: &Predicate,
    state: &[f64],
    t: f64,
    world: &dyn ObstacleLookup,
) -> Result<PredicateGradient, PredicateError> {
    let dim = check_dim(p, state)?;
    let mut grad = vec![0.0; state.len()];
    let mut degenerate = false;
    match p {
        Predicate::BallReach { center, .. } => {
            let diff: Vec<f64> = state[..dim]
                .iter()
                .zip(center)
                .map(|(x, c)| x - c)
                .collect();
            let dist = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
            if dist > 0.0 {
                for (g, d) in grad.iter_mut().zip(&diff) {
                    *g = -d / dist;
                }
            } else {
                degenerate = true;
            }
        }
        Predicate::Clearance { obstacle, .. } => {
            let (d, _) = obstacle_offset(obstacle, state, t, world)?;
            grad[0] = 2.0 * d.x;
            grad[1] = 2.0 * d.y;
        }
        Predicate::Halfspace { normal, .. } => {
            for (g, n) in grad.iter_mut().zip(normal) {
                *g = -n;
            }
        }
    }
    Ok(PredicateGradient { grad, degenerate })
}

/// Partial derivative of `h` with respect to time (non-zero only for moving
/// obstacles).
pub fn predicate_time_derivative(
    p: &Predicate,
    state: &[f64],
    t: f64,
    world: &dyn ObstacleLookup,
) -> Result<f64, PredicateError> {
    check_dim(p, state)?;
    match p {
        Predicate::Clearance { obstacle, .. } => {
            let (d, vel) = obstacle_offset(obstacle, state, t, world)?;
            Ok(-2.0 * d.dot(&vel))
        }
        _ => Ok(0.0),
    }
}
