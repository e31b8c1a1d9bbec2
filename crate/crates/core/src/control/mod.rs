//! Per-step safety filter: assembles the barrier QP for the current state and
//! solves it exactly.

mod dynamics;
mod qp;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub use dynamics::{integrate_step, wrap_angle, Dynamics};
pub use qp::{
    kkt_residual, solve_qp, ActiveSet, QpError, QpOutcome, QpProblem, QpSolution, KKT_TOLERANCE,
};

use crate::barrier::{composite_eval, BarrierError, BarrierEval, CompositeBarrier};
use crate::stl::ObstacleLookup;

/// Linear class-K gain `alpha(b) = kappa b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaFn {
    pub kappa: f64,
}

impl Default for AlphaFn {
    fn default() -> Self {
        AlphaFn { kappa: 1.0 }
    }
}

impl AlphaFn {
    pub fn apply(&self, b: f64) -> f64 {
        self.kappa * b
    }
}

/// Builds `a . u >= beta` from `db/dx (f + g u) + db/dt >= -alpha(b)` and the
/// planar speed cap.
pub fn assemble_qp(
    be: &BarrierEval,
    dyn_: &Dynamics,
    x: &[f64],
    v_max: f64,
    q: &Matrix3<f64>,
    alpha: &AlphaFn,
) -> QpProblem {
    let grad = Vector3::new(be.grad_x[0], be.grad_x[1], be.grad_x[2]);
    let g = dyn_.input_matrix(x);
    QpProblem {
        q: *q,
        a: g.transpose() * grad,
        beta: -alpha.apply(be.value) - be.d_dt - grad.dot(&dyn_.drift(x)),
        s: dyn_.planar_rows(x),
        v_max,
    }
}

/// Input of minimum norm that pushes the barrier row as far as the speed cap
/// allows; used when a tick has no feasible QP.
pub fn fallback_input(qp: &QpProblem) -> Vector3<f64> {
    let sst = qp.s * qp.s.transpose();
    let Some(inv) = sst.try_inverse() else {
        return Vector3::zeros();
    };
    let c = inv * (qp.s * qp.a);
    let n = c.norm();
    if n == 0.0 || !n.is_finite() {
        return Vector3::zeros();
    }
    qp.s.transpose() * (inv * (c * (qp.v_max / n)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlConfig {
    pub q: Matrix3<f64>,
    pub alpha: AlphaFn,
    pub v_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlOutcome {
    Solved {
        u: Vector3<f64>,
        /// Realized state velocity `f(x) + g(x) u`.
        velocity: Vector3<f64>,
        /// Planar speed of `velocity`.
        speed: f64,
        barrier: BarrierEval,
        solution: QpSolution,
    },
    Infeasible {
        barrier: BarrierEval,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error(transparent)]
    Qp(#[from] QpError),
}

pub fn control_step(
    x: &[f64],
    t: f64,
    cb: &CompositeBarrier,
    dyn_: &Dynamics,
    world: &dyn ObstacleLookup,
    cfg: &ControlConfig,
) -> Result<ControlOutcome, ControlError> {
    let barrier = composite_eval(cb, x, t, world)?;
    let qp = assemble_qp(&barrier, dyn_, x, cfg.v_max, &cfg.q, &cfg.alpha);
    Ok(match solve_qp(&qp)? {
        QpOutcome::Solved(solution) => {
            let velocity = dyn_.velocity(x, &solution.u);
            ControlOutcome::Solved {
                u: solution.u,
                velocity,
                speed: velocity.fixed_rows::<2>(0).norm(),
                barrier,
                solution,
            }
        }
        QpOutcome::Infeasible => ControlOutcome::Infeasible { barrier },
    })
}
