//! Generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{Matrix2x3, Matrix3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use stlnav::barrier::{CompositeBarrier, Literal, SafetyBarrier, TaskBarrier, TaskOperator};
use stlnav::control::QpProblem;
use stlnav::sim::{Motion, Obstacle, World};
use stlnav::stl::{Formula, Interval, Predicate, Signal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- QP oracle

/// A speed-capped QP with identity cost and identity planar rows.
pub fn random_qp(rng: &mut ChaCha8Rng) -> QpProblem {
    loop {
        let a = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            if rng.gen_bool(0.4) {
                0.0
            } else {
                let m: f64 = rng.gen_range(0.05..1.0);
                if rng.gen_bool(0.5) {
                    m
                } else {
                    -m
                }
            },
        );
        let qp = QpProblem {
            q: Matrix3::identity(),
            a,
            beta: rng.gen_range(-1.0..2.0),
            s: Matrix2x3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0),
            v_max: rng.gen_range(0.2..1.0),
        };
        // Keep away from the tangent case, where a grid cannot decide
        // feasibility.
        let reach = qp.v_max * a.xy().norm();
        if a.z != 0.0 || (qp.beta - reach).abs() > 0.01 {
            return qp;
        }
    }
}

/// Smallest cost over the planar disk with the turn rate minimized exactly
/// for each planar point. `None` when no grid point is feasible.
pub fn grid_qp_cost(qp: &QpProblem) -> Option<f64> {
    let (ax, ay, aw) = (qp.a.x, qp.a.y, qp.a.z);
    let v = qp.v_max;
    // cost and feasibility at polar point (rho, phi)
    let eval = |rho: f64, phi: f64| -> Option<f64> {
        let (px, py) = (rho * phi.cos(), rho * phi.sin());
        let lin = ax * px + ay * py;
        let planar = px * px + py * py;
        if aw == 0.0 {
            (lin >= qp.beta).then_some(planar)
        } else {
            let w = (qp.beta - lin).max(0.0) / aw.abs();
            Some(planar + w * w)
        }
    };
    let tau = std::f64::consts::TAU;
    if aw == 0.0 {
        return scan_directions(qp);
    }
    let mut best: Option<(f64, f64, f64)> = None;
    let (nr, np) = (400, 720);
    for i in 0..=nr {
        let rho = v * i as f64 / nr as f64;
        for j in 0..np {
            let phi = tau * j as f64 / np as f64;
            if let Some(c) = eval(rho, phi) {
                if best.is_none_or(|b| c < b.0) {
                    best = Some((c, rho, phi));
                }
            }
        }
    }
    let (mut cost, mut rho0, mut phi0) = best?;
    let (mut dr, mut dp) = (v / nr as f64, tau / np as f64);
    let mut rounds = 0;
    while (dr > 1e-7 || dp > 1e-7) && rounds < 500 {
        rounds += 1;
        let (lo_r, hi_r) = ((rho0 - 3.0 * dr).max(0.0), (rho0 + 3.0 * dr).min(v));
        let (lo_p, hi_p) = (phi0 - 3.0 * dp, phi0 + 3.0 * dp);
        let n = 60;
        let mut moved = false;
        for i in 0..=n {
            let rho = lo_r + (hi_r - lo_r) * i as f64 / n as f64;
            for j in 0..=n {
                let phi = lo_p + (hi_p - lo_p) * j as f64 / n as f64;
                if let Some(c) = eval(rho, phi) {
                    if c < cost {
                        (cost, rho0, phi0) = (c, rho, phi);
                        moved = true;
                    }
                }
            }
        }
        // along a slanted constraint boundary the best point can drift out
        // of the window, so only zoom in once it stays put
        if !moved {
            dr /= 10.0;
            dp /= 10.0;
        }
    }
    Some(cost)
}

/// Without a turn-rate term the cheapest point along each direction is the
/// smallest radius meeting the barrier row, so only directions are scanned.
fn scan_directions(qp: &QpProblem) -> Option<f64> {
    if qp.beta <= 0.0 {
        return Some(0.0);
    }
    let tau = std::f64::consts::TAU;
    let eval = |phi: f64| {
        let d = qp.a.x * phi.cos() + qp.a.y * phi.sin();
        let rho = qp.beta / d;
        (d > 0.0 && rho <= qp.v_max).then_some(rho * rho)
    };
    let n = 200_000;
    let mut best: Option<(f64, f64)> = None;
    for j in 0..n {
        let phi = tau * j as f64 / n as f64;
        if let Some(c) = eval(phi) {
            if best.is_none_or(|b| c < b.0) {
                best = Some((c, phi));
            }
        }
    }
    let (mut cost, mut phi0) = best?;
    let mut dp = tau / n as f64;
    while dp > 1e-12 {
        for j in -50..=50 {
            let phi = phi0 + dp * j as f64 / 25.0;
            if let Some(c) = eval(phi) {
                if c < cost {
                    (cost, phi0) = (c, phi);
                }
            }
        }
        dp /= 10.0;
    }
    Some(cost)
}

// ------------------------------------------------------ barrier generators

pub fn rose_world(rng: &mut ChaCha8Rng, n: usize) -> World {
    let obstacles = (0..n)
        .map(|k| Obstacle {
            id: format!("o{k}"),
            radius: 0.3,
            safe_distance: 0.55,
            motion: Motion::Rhodonea {
                center: [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)],
                amplitude: rng.gen_range(0.0..1.5),
                petals: rng.gen_range(1..4) as f64,
                rate: rng.gen_range(0.05..0.3),
                phase: rng.gen_range(0.0..6.0),
            },
        })
        .collect();
    World {
        obstacles,
        ..World::default()
    }
}

fn random_literal(rng: &mut ChaCha8Rng, n_obstacles: usize) -> Literal {
    match rng.gen_range(0..4) {
        0 | 1 => Literal::positive(
            Predicate::ball(
                vec![rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0)],
                rng.gen_range(0.1..0.5),
            )
            .unwrap(),
        ),
        2 => {
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            Literal::positive(
                Predicate::halfspace(vec![phi.cos(), phi.sin()], rng.gen_range(-3.0..3.0)).unwrap(),
            )
        }
        _ if n_obstacles > 0 => Literal::positive(
            Predicate::clearance(format!("o{}", rng.gen_range(0..n_obstacles)), 0.55).unwrap(),
        ),
        _ => Literal::negative(Predicate::ball(vec![rng.gen_range(-6.0..6.0), 0.0], 0.3).unwrap()),
    }
}

/// A composite of 1 to 5 task members plus a safety member per obstacle,
/// with deadlines somewhere in `[2, 8]`.
pub fn random_composite(rng: &mut ChaCha8Rng, eta: f64) -> (CompositeBarrier, World) {
    let n_obs = rng.gen_range(0..3);
    let world = rose_world(rng, n_obs);
    let mut cb = CompositeBarrier::new(eta);
    for k in 0..rng.gen_range(1..=5) {
        let g0: f64 = rng.gen_range(-4.0..0.0);
        cb.tasks.push(TaskBarrier {
            literal: random_literal(rng, n_obs),
            operator: TaskOperator::Eventually,
            interval: Interval::new(0.0, 10.0).unwrap(),
            t_star: rng.gen_range(2.0..8.0),
            gamma0: g0,
            gamma_inf: g0 + rng.gen_range(0.0..3.0),
            r: 0.05,
            active: true,
            t_origin: 0.0,
            group: k,
            label: format!("t{k}"),
        });
    }
    for o in &world.obstacles {
        cb.safety
            .push(SafetyBarrier::new(o.id.clone(), o.safe_distance).unwrap());
    }
    (cb, world)
}

/// A state that keeps clear of ball centers, where `|p - c|` has no
/// derivative.
pub fn random_state(rng: &mut ChaCha8Rng, cb: &CompositeBarrier) -> [f64; 3] {
    loop {
        let x = [
            rng.gen_range(-7.0..7.0),
            rng.gen_range(-7.0..7.0),
            rng.gen_range(-3.0..3.0),
        ];
        let clear = cb.tasks.iter().all(|tb| match &tb.literal.predicate {
            Predicate::BallReach { center, .. } => {
                (x[0] - center[0]).hypot(x[1] - center[1]) > 0.05
            }
            _ => true,
        });
        if clear {
            return x;
        }
    }
}

// ------------------------------------------------------- monitor generators

pub fn random_predicate(rng: &mut ChaCha8Rng) -> Predicate {
    match rng.gen_range(0..3) {
        0 => Predicate::ball(
            vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
            rng.gen_range(0.3..2.0),
        )
        .unwrap(),
        1 => {
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            Predicate::halfspace(vec![phi.cos(), phi.sin()], rng.gen_range(-1.0..1.0)).unwrap()
        }
        _ => Predicate::clearance("o0", rng.gen_range(0.3..1.0)).unwrap(),
    }
}

pub fn random_state_formula(rng: &mut ChaCha8Rng) -> Formula {
    let lit = |rng: &mut ChaCha8Rng| {
        let p = random_predicate(rng);
        if rng.gen_bool(0.3) {
            Formula::Not(p)
        } else {
            Formula::Pred(p)
        }
    };
    match rng.gen_range(0..5) {
        0 => Formula::and(lit(rng), lit(rng)),
        1 if rng.gen_bool(0.2) => Formula::True,
        _ => lit(rng),
    }
}

/// Interval with grid-aligned ends (multiples of 0.1).
pub fn random_interval(rng: &mut ChaCha8Rng) -> Interval {
    let a = rng.gen_range(0..30) as f64 / 10.0;
    let len = rng.gen_range(0..30) as f64 / 10.0;
    Interval::new(a, a + len).unwrap()
}

pub fn random_task_formula(rng: &mut ChaCha8Rng) -> Formula {
    let mut f = None;
    for _ in 0..rng.gen_range(1..=3) {
        let iv = random_interval(rng);
        let task = match rng.gen_range(0..3) {
            0 => Formula::eventually(iv, random_state_formula(rng)),
            1 => Formula::always(iv, random_state_formula(rng)),
            _ => Formula::until(iv, random_state_formula(rng), random_state_formula(rng)),
        };
        f = Some(match f {
            None => task,
            Some(prev) => Formula::and(prev, task),
        });
    }
    f.unwrap()
}

/// Random walk sampled every 0.1 s over `[0, duration]`.
pub fn random_signal(rng: &mut ChaCha8Rng, duration: f64) -> Signal {
    let n = (duration / 0.1).round() as usize;
    let mut p = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
    let samples = (0..=n)
        .map(|k| {
            p[0] += rng.gen_range(-0.3..0.3);
            p[1] += rng.gen_range(-0.3..0.3);
            (k as f64 / 10.0, vec![p[0], p[1], 0.0])
        })
        .collect();
    Signal::new(samples).unwrap()
}

pub fn one_static_obstacle() -> World {
    World {
        obstacles: vec![Obstacle {
            id: "o0".into(),
            radius: 0.2,
            safe_distance: 0.3,
            motion: Motion::Static {
                center: [0.5, -0.5],
            },
        }],
        ..World::default()
    }
}
