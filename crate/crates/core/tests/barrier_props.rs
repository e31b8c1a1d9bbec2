mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stlnav::barrier::{
    composite_eval, gamma, gamma_dot, smooth_min, BarrierParams, Literal, TaskBarrier, TaskOperator,
};
use stlnav::stl::{Interval, NoObstacles, Predicate};

fn value(cb: &stlnav::barrier::CompositeBarrier, x: &[f64], t: f64, w: &stlnav::sim::World) -> f64 {
    composite_eval(cb, x, t, w).unwrap().value
}

#[test]
fn composite_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let h = 1e-6;
    for _ in 0..200 {
        let (cb, world) = common::random_composite(&mut rng, 10.0);
        let x = common::random_state(&mut rng, &cb);
        let t = loop {
            let t: f64 = rng.gen_range(0.0..10.0);
            if cb.tasks.iter().all(|tb| (t - tb.t_star).abs() > 1e-3) {
                break t;
            }
        };
        let e = composite_eval(&cb, &x, t, &world).unwrap();
        let mut fd = [0.0; 3];
        for i in 0..3 {
            let (mut xp, mut xm) = (x, x);
            xp[i] += h;
            xm[i] -= h;
            fd[i] = (value(&cb, &xp, t, &world) - value(&cb, &xm, t, &world)) / (2.0 * h);
        }
        let err = (0..3)
            .map(|i| (fd[i] - e.grad_x[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = e.grad_x.iter().map(|g| g * g).sum::<f64>().sqrt().max(1.0);
        assert!(err / scale < 1e-5, "grad {:?} fd {fd:?}", e.grad_x);
        assert_eq!(e.grad_x[2], 0.0);

        let dt = (value(&cb, &x, t + h, &world) - value(&cb, &x, t - h, &world)) / (2.0 * h);
        assert!(
            (dt - e.d_dt).abs() / e.d_dt.abs().max(1.0) < 1e-5,
            "d_dt {} fd {dt}",
            e.d_dt
        );
    }
}

#[test]
fn smooth_min_gap_shrinks_with_sharpness() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..500 {
        let n = rng.gen_range(2..8);
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let m = v.iter().copied().fold(f64::INFINITY, f64::min);
        let gaps: Vec<f64> = [1.0, 10.0, 100.0]
            .iter()
            .map(|&eta| m - smooth_min(&v, eta))
            .collect();
        assert!(
            gaps[0] >= gaps[1] && gaps[1] >= gaps[2] && gaps[2] >= 0.0,
            "{gaps:?}"
        );
        // gap never exceeds ln(n)/eta
        assert!(gaps[1] <= (n as f64).ln() / 10.0 + 1e-12);
    }
}

fn reach(center: [f64; 2]) -> Literal {
    Literal::positive(Predicate::ball(center.to_vec(), 0.2).unwrap())
}

#[test]
fn built_gamma_is_monotone_with_matching_slope() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let iv = Interval::new(0.0, 20.0).unwrap();
    for _ in 0..200 {
        let x = [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), 0.0];
        let t0 = rng.gen_range(0.0..5.0);
        let t_star = t0 + rng.gen_range(0.5..15.0);
        let tb = TaskBarrier::build(
            reach([0.0, 0.0]),
            TaskOperator::Eventually,
            iv,
            t0,
            t_star,
            &x,
            &NoObstacles,
            &BarrierParams::default(),
        )
        .unwrap();
        // barrier starts positive and its final level leaves the goal ball
        assert!(-gamma(&tb, t0) + tb.literal.h(&x, t0, &NoObstacles).unwrap() > 0.0);
        assert!(tb.gamma_inf >= tb.r && tb.gamma_inf < 0.2);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=400 {
            let t = t0 + (t_star - t0 + 3.0) * k as f64 / 400.0;
            let g = gamma(&tb, t);
            assert!(g >= prev);
            prev = g;
            if (t - t_star).abs() > 1e-3 {
                let h = 1e-4;
                let fd = (gamma(&tb, t + h) - gamma(&tb, t - h)) / (2.0 * h);
                assert!((fd - gamma_dot(&tb, t)).abs() < 1e-8);
            }
        }
        assert_eq!(gamma(&tb, t_star + 1.0), tb.gamma_inf);
    }
}

proptest! {
    #[test]
    fn composite_is_below_every_member(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (cb, world) = common::random_composite(&mut rng, 10.0);
        let x = common::random_state(&mut rng, &cb);
        let t = rng.gen_range(0.0..10.0);
        let members = cb.member_evals(&x, t, &world).unwrap();
        let b = composite_eval(&cb, &x, t, &world).unwrap().value;
        for m in members {
            prop_assert!(b <= m.value);
        }
    }

    #[test]
    fn single_member_is_exact(v in -1e3f64..1e3, eta in 0.1f64..100.0) {
        prop_assert_eq!(smooth_min(&[v], eta), v);
    }

    #[test]
    fn weights_form_a_convex_combination(seed in any::<u64>()) {
        // the composite gradient of parallel halfspaces equals their shared
        // normal, whatever the softmin weights are
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cb = stlnav::barrier::CompositeBarrier::new(10.0);
        for k in 0..3 {
            let lit = Literal::positive(Predicate::halfspace(vec![0.6, 0.8], rng.gen_range(-2.0..2.0)).unwrap());
            cb.tasks.push(TaskBarrier {
                literal: lit,
                operator: TaskOperator::Always,
                interval: Interval::new(0.0, 5.0).unwrap(),
                t_star: 0.0,
                gamma0: 0.0,
                gamma_inf: 0.0,
                r: 0.0,
                active: true,
                t_origin: 0.0,
                group: k,
                label: String::new(),
            });
        }
        let e = composite_eval(&cb, &[0.3, 0.1, 0.0], 1.0, &NoObstacles).unwrap();
        prop_assert!((e.grad_x[0] + 0.6).abs() < 1e-12);
        prop_assert!((e.grad_x[1] + 0.8).abs() < 1e-12);
    }
}
