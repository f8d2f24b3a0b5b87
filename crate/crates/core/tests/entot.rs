mod common;

use madom::adom::{derive_params, run, DualOracle};
use madom::entot::{
    cost_matrix, dual_grad, dual_value, exact_ot, exact_plan, floor_histogram, k_bound, sinkhorn, CostMatrix, Histogram,
    WbDualOracle, SINKHORN_MAX_ITER, SINKHORN_TOL,
};
use madom::netgraph::{spectral_bounds, NetworkSchedule, Topology};
use ndarray::{array, Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_histogram(rng: &mut ChaCha8Rng, d: usize) -> Histogram {
    Histogram::from_weights(Array1::from_shape_fn(d, |_| rng.random::<f64>() + 0.02)).unwrap()
}

fn random_cost(rng: &mut ChaCha8Rng, d: usize) -> CostMatrix {
    let pts = Array2::from_shape_fn((d, 2), |_| rng.random::<f64>());
    cost_matrix(pts.view(), true).unwrap()
}

/// `max_p ⟨z,p⟩ − W_γ(p, q)` on a coarse simplex grid refined around its best point.
fn grid_conjugate(q: &[f64], m: &CostMatrix, gamma: f64, z: &Array1<f64>) -> (f64, [f64; 2]) {
    let objective = |a: f64, b: f64| {
        let p = [a, b, 1.0 - a - b];
        if p.iter().any(|v| *v <= 0.0) {
            return f64::NEG_INFINITY;
        }
        z[0] * p[0] + z[1] * p[1] + z[2] * p[2] - common::plain_sinkhorn(&p, q, m.view(), gamma)
    };
    let n = 300;
    let mut best = (f64::NEG_INFINITY, [0.0, 0.0]);
    for i in 1..n {
        for j in 1..(n - i) {
            let (a, b) = (i as f64 / n as f64, j as f64 / n as f64);
            let v = objective(a, b);
            if v > best.0 {
                best = (v, [a, b]);
            }
        }
    }
    let (h, span) = (1e-4, 2.0 / n as f64);
    let steps = (span / h) as i64;
    let [ca, cb] = best.1;
    for i in -steps..=steps {
        for j in -steps..=steps {
            let (a, b) = (ca + i as f64 * h, cb + j as f64 * h);
            let v = objective(a, b);
            if v > best.0 {
                best = (v, [a, b]);
            }
        }
    }
    best
}

#[test]
fn dual_value_matches_simplex_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let d = 3;
    let q = random_histogram(&mut rng, d);
    let m = random_cost(&mut rng, d);
    let gamma = 0.2;
    let z = Array1::from_shape_fn(d, |_| rng.random::<f64>() - 0.5);
    let (grid, _) = grid_conjugate(q.mass().as_slice().unwrap(), &m, gamma, &z);
    let exact = dual_value(&q, &m, gamma, z.view()).unwrap();
    assert!(grid <= exact + 1e-10, "grid {grid} exceeds {exact}");
    assert!(exact - grid < 1e-6, "grid {grid} vs {exact}");
}

/// The minimizer of `W_γ(·, q)` over the simplex is `∇W*(0)`, and a
/// two-node run with equal inputs settles there.
#[test]
fn single_measure_minimizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d = 3;
    let q = floor_histogram(&random_histogram(&mut rng, d), 1e-3).unwrap();
    let m = random_cost(&mut rng, d);
    let gamma = 0.2;
    let (neg_min, arg) = grid_conjugate(q.mass().as_slice().unwrap(), &m, gamma, &Array1::zeros(d));
    let at_zero = dual_grad(&q, &m, gamma, Array1::zeros(d).view()).unwrap();
    let grid_p = array![arg[0], arg[1], 1.0 - arg[0] - arg[1]];
    assert!((&at_zero.mass() - &grid_p).iter().all(|v| v.abs() < 2e-3), "{at_zero:?} vs {grid_p}");
    assert!((dual_value(&q, &m, gamma, Array1::zeros(d).view()).unwrap() - neg_min).abs() < 1e-6);

    let oracle = WbDualOracle::new(&[q.clone(), q.clone()], m, gamma, 1e-3).unwrap();
    let schedule = NetworkSchedule::fixed(Topology::Complete, 2, 0).unwrap();
    let params = derive_params(0.01, gamma, spectral_bounds(&schedule, 1).unwrap()).unwrap();
    let t = run(&schedule, &oracle, &params, 200, 50).unwrap();
    let x = &t.last().unwrap().x;
    for row in x.rows() {
        assert!((&row - &at_zero.mass()).iter().all(|v| v.abs() < 1e-12), "{row}");
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let d = 5;
        let q = random_histogram(&mut rng, d);
        let m = random_cost(&mut rng, d);
        let gamma = 0.02 + 0.5 * rng.random::<f64>();
        let z = Array1::from_shape_fn(d, |_| rng.random::<f64>() - 0.5);
        let g = dual_grad(&q, &m, gamma, z.view()).unwrap();
        let fd = common::finite_diff(|z| dual_value(&q, &m, gamma, z.view()).unwrap(), &z, 1e-4 * gamma);
        let err = (&fd - &g.mass()).iter().map(|v| v.abs()).fold(0.0, f64::max);
        let scale = g.mass().iter().copied().fold(0.0, f64::max);
        assert!(err <= 1e-6 * scale, "{err}");
    }
}

#[test]
fn entropic_sandwich() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for d in [2, 4, 7] {
        for gamma in [0.5, 0.05, 0.01] {
            let p = random_histogram(&mut rng, d);
            let q = random_histogram(&mut rng, d);
            let m = random_cost(&mut rng, d);
            let w = exact_ot(&p, &q, &m).unwrap();
            let out = sinkhorn(&p, &q, &m, gamma, SINKHORN_TOL, SINKHORN_MAX_ITER).unwrap();
            assert!(out.converged);
            let gap = 2.0 * gamma * (d as f64).ln();
            assert!(out.value <= w + 1e-9, "d={d} γ={gamma}: {} > {w}", out.value);
            assert!(out.value >= w - gap - 1e-9);
            assert!(out.plan.marginal_error(&p, &q) <= SINKHORN_TOL);
        }
    }
}

#[test]
fn fenchel_young() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let d = 4;
    let gamma = 0.1;
    let q = random_histogram(&mut rng, d);
    let m = random_cost(&mut rng, d);
    for _ in 0..20 {
        let z = Array1::from_shape_fn(d, |_| 2.0 * rng.random::<f64>() - 1.0);
        let wstar = dual_value(&q, &m, gamma, z.view()).unwrap();
        let p = random_histogram(&mut rng, d);
        let wg = sinkhorn(&p, &q, &m, gamma, 1e-12, 100_000).unwrap().value;
        assert!(wg + wstar >= z.dot(&p.mass()) - 1e-10);
        let best = dual_grad(&q, &m, gamma, z.view()).unwrap();
        let wb = sinkhorn(&best, &q, &m, gamma, 1e-13, 100_000).unwrap().value;
        assert!((wb + wstar - z.dot(&best.mass())).abs() < 1e-8);
    }
}

#[test]
fn exact_ot_matches_lp() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for d in [2, 3, 6, 8] {
        for _ in 0..5 {
            let p = random_histogram(&mut rng, d);
            let q = random_histogram(&mut rng, d);
            let m = random_cost(&mut rng, d);
            let got = exact_ot(&p, &q, &m).unwrap();
            let want = common::lp_transport(p.mass().as_slice().unwrap(), q.mass().as_slice().unwrap(), m.view());
            assert!((got - want).abs() <= 1e-9 * want.abs().max(1e-12), "d={d}: {got} vs {want}");
        }
    }
}

#[test]
fn exact_plan_at_scale_is_a_coupling() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let d = 200;
    let p = random_histogram(&mut rng, d);
    let q = random_histogram(&mut rng, d);
    let m = random_cost(&mut rng, d);
    let plan = exact_plan(&p, &q, &m).unwrap();
    assert!(plan.marginal_error(&p, &q) < 1e-12);
    assert!(plan.entries().iter().all(|v| *v >= 0.0));
    // no coupling beats it: compare with the entropic plan's cost
    let ent = sinkhorn(&p, &q, &m, 0.01, 1e-9, 10_000).unwrap();
    assert!(plan.cost(&m) <= ent.plan.cost(&m) + 1e-9);
}

#[test]
fn k_bound_three_by_three() {
    // inf_i sup_l |M_jl − M_il| is zero for every j (take i = j), so each
    // summand is (2γ ln 3 − γ ln(δ/2))²; with γ = 0.1, δ = 0.1:
    // 3 · (0.2 ln 3 − 0.1 ln 0.05)² = 3 · (0.21972245773 + 0.29957322736)² ≈ 0.80900403
    let m = cost_matrix(array![[0.0], [1.0], [2.0]].view(), false).unwrap();
    let k2 = k_bound(&m, 0.1, 0.1, None).unwrap();
    assert!((k2 - 0.809_004_025_656_227_4).abs() < 1e-12, "{k2}");
    // explicit ρ replaces δ/2
    let k2 = k_bound(&m, 0.1, 0.1, Some(0.05)).unwrap();
    assert!((k2 - 0.809_004_025_656_227_4).abs() < 1e-12);
}

#[test]
fn barycenter_lower_bound_on_converged_runs() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let (m_nodes, d, gamma, delta) = (3, 5, 0.1, 1e-3);
    let qs: Vec<Histogram> =
        (0..m_nodes).map(|_| floor_histogram(&random_histogram(&mut rng, d), delta).unwrap()).collect();
    let bound = qs.iter().map(|q| q.min()).fold(1.0 / std::f64::consts::E, f64::min);
    let oracle = WbDualOracle::new(&qs, random_cost(&mut rng, d), gamma, delta).unwrap();
    let schedule = NetworkSchedule::fixed(Topology::Complete, m_nodes, 0).unwrap();
    let params = derive_params(1e-3, gamma, spectral_bounds(&schedule, 1).unwrap()).unwrap();
    let t = run(&schedule, &oracle, &params, 20_000, 20_000).unwrap();
    let mut p = Array1::zeros(d);
    for i in 0..m_nodes {
        oracle.grad_conj(i, t.final_state.z_g.row(i), p.view_mut());
        assert!(p.iter().all(|v| *v >= bound), "{p} vs {bound}");
    }
    assert!(t.last().unwrap().consensus < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_on_simplex_and_shift_invariant(
        seed in 0u64..1000, d in 2usize..12, gamma in 0.005f64..1.0, shift in -50.0f64..50.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_histogram(&mut rng, d);
        let m = random_cost(&mut rng, d);
        let z = Array1::from_shape_fn(d, |_| 4.0 * rng.random::<f64>() - 2.0);
        let g = dual_grad(&q, &m, gamma, z.view()).unwrap();
        prop_assert!((g.mass().sum() - 1.0).abs() <= 1e-10);
        prop_assert!(g.mass().iter().all(|v| *v >= 0.0));
        let zs = &z + shift;
        let gs = dual_grad(&q, &m, gamma, zs.view()).unwrap();
        prop_assert!(g.l1_distance(&gs) < 1e-10);
        let v = dual_value(&q, &m, gamma, z.view()).unwrap();
        let vs = dual_value(&q, &m, gamma, zs.view()).unwrap();
        prop_assert!((vs - v - shift).abs() < 1e-9 * (1.0 + v.abs() + shift.abs()));
    }

    #[test]
    fn gradient_is_lipschitz(seed in 0u64..1000, d in 2usize..10, gamma in 0.01f64..1.0, scale in 1e-3f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_histogram(&mut rng, d);
        let m = random_cost(&mut rng, d);
        let z = Array1::from_shape_fn(d, |_| rng.random::<f64>() - 0.5);
        let w = &z + &Array1::from_shape_fn(d, |_| scale * (rng.random::<f64>() - 0.5));
        let a = dual_grad(&q, &m, gamma, z.view()).unwrap();
        let b = dual_grad(&q, &m, gamma, w.view()).unwrap();
        let lhs = (&a.mass() - &b.mass()).mapv(|v| v * v).sum().sqrt();
        let rhs = (&z - &w).mapv(|v| v * v).sum().sqrt() / gamma;
        prop_assert!(lhs <= rhs * (1.0 + 1e-8));
    }

    #[test]
    fn floor_keeps_unit_mass(seed in 0u64..1000, d in 2usize..50, frac in 0.0f64..0.99) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_histogram(&mut rng, d);
        let delta = frac / d as f64;
        prop_assume!(delta > 0.0);
        let f = floor_histogram(&q, delta).unwrap();
        prop_assert!((f.mass().sum() - 1.0).abs() <= 1e-12);
        prop_assert!(f.min() >= delta * (1.0 - 1e-12));
    }

    #[test]
    fn cost_is_symmetric_with_zero_diagonal(seed in 0u64..1000, d in 2usize..20, k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = Array2::from_shape_fn((d, k), |_| rng.random::<f64>());
        let m = cost_matrix(pts.view(), true).unwrap();
        let e = m.entries();
        prop_assert_eq!(e, &e.t().to_owned());
        prop_assert!((0..d).all(|i| e[[i, i]] == 0.0));
        prop_assert!(e.iter().all(|v| *v >= 0.0));
    }
}
