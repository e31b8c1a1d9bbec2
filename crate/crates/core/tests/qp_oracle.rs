mod common;

use nalgebra::{Matrix2x3, Matrix3, Vector3};
use proptest::prelude::*;

use stlnav::control::{kkt_residual, solve_qp, Dynamics, QpOutcome, QpProblem, KKT_TOLERANCE};

#[test]
fn solutions_match_grid_search() {
    let mut rng = common::rng(31);
    let (mut solved, mut infeasible) = (0, 0);
    for _ in 0..200 {
        let qp = common::random_qp(&mut rng);
        let oracle = common::grid_qp_cost(&qp);
        match solve_qp(&qp).unwrap() {
            QpOutcome::Solved(sol) => {
                solved += 1;
                assert!(kkt_residual(&qp, &sol) <= KKT_TOLERANCE);
                let best = oracle.expect("oracle finds a feasible point");
                let cost = sol.cost(&qp.q);
                assert!(
                    (cost - best).abs() <= 1e-4 * best.max(1.0),
                    "{qp:?}: {cost} vs {best}"
                );
            }
            QpOutcome::Infeasible => {
                infeasible += 1;
                assert!(oracle.is_none(), "{qp:?}");
            }
        }
    }
    assert!(solved > 100 && infeasible > 5, "{solved} {infeasible}");
}

proptest! {
    #[test]
    fn omni_solutions_are_feasible_and_certified(
        theta in -3.2f64..3.2,
        g in prop::array::uniform2(-3.0f64..3.0),
        beta in -5.0f64..5.0,
        v_max in 0.1f64..3.0,
        q in prop::array::uniform3(0.1f64..5.0),
    ) {
        let d = Dynamics::default();
        let x = [0.0, 0.0, theta];
        let gm = d.input_matrix(&x);
        let qp = QpProblem {
            q: Matrix3::from_diagonal(&Vector3::from(q)),
            a: gm.transpose() * Vector3::new(g[0], g[1], 0.0),
            beta,
            s: d.planar_rows(&x),
            v_max,
        };
        match solve_qp(&qp).unwrap() {
            QpOutcome::Solved(sol) => {
                prop_assert!(sol.kkt_residual <= KKT_TOLERANCE);
                prop_assert!(qp.a.dot(&sol.u) >= beta - 1e-9 * beta.abs().max(1.0));
                prop_assert!((qp.s * sol.u).norm() <= v_max * (1.0 + 1e-9));
            }
            QpOutcome::Infeasible => {
                // the best the cap allows still misses the barrier row
                let reach = v_max * (g[0] * g[0] + g[1] * g[1]).sqrt();
                prop_assert!(beta >= reach * (1.0 - 1e-9));
            }
        }
    }

    #[test]
    fn scaling_the_cost_keeps_the_minimizer(
        a in prop::array::uniform3(-2.0f64..2.0),
        beta in 0.01f64..1.0,
        scale in 0.1f64..10.0,
    ) {
        let base = QpProblem {
            q: Matrix3::identity(),
            a: Vector3::from(a),
            beta,
            s: Matrix2x3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0),
            v_max: 10.0,
        };
        let scaled = QpProblem { q: Matrix3::identity() * scale, ..base.clone() };
        match (solve_qp(&base).unwrap(), solve_qp(&scaled).unwrap()) {
            (QpOutcome::Solved(x), QpOutcome::Solved(y)) => {
                prop_assert!((x.u - y.u).norm() <= 1e-9 * x.u.norm().max(1.0));
            }
            (QpOutcome::Infeasible, QpOutcome::Infeasible) => {}
            other => prop_assert!(false, "{other:?}"),
        }
    }
}
