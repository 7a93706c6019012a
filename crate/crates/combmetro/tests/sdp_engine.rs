use combmetro::linalg::{self, c64, CMat};
use combmetro::sdp_engine::{
    entry_functional, solve, sparse_from_dense, SdpProblem, SdpSettings, SdpStatus, Sense,
};
use combmetro::tensor_algebra::realify;
use faer::Mat;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_herm(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let a = Mat::from_fn(n, n, |_, _| {
        c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    linalg::hermitize(&a)
}

fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let h = random_herm(rng, n);
    linalg::herm_fn(&h, |x| c64::new(x.cos(), x.sin()))
}

/// `min λ` s.t. `λI − A ⪰ 0`, written with `X = λI − A`.
fn eigen_problem(a: &CMat) -> SdpProblem {
    let n = a.nrows();
    let mut p = SdpProblem::new(Sense::Min);
    let blk = p.add_block(n);
    let lam = p.add_free(1.0);
    for i in 0..n {
        for j in i..n {
            if i == j {
                p.add_row(
                    blk,
                    entry_functional(i, i, true),
                    vec![(lam, -1.0)],
                    -a[(i, i)].re,
                );
            } else {
                p.add_row(blk, entry_functional(i, j, true), vec![], -a[(i, j)].re);
                p.add_row(blk, entry_functional(i, j, false), vec![], -a[(i, j)].im);
            }
        }
    }
    p
}

/// `max Tr(ρH)` over density matrices.
fn state_problem(h: &CMat) -> SdpProblem {
    let n = h.nrows();
    let mut p = SdpProblem::new(Sense::Max);
    let blk = p.add_block(n);
    p.set_cost(blk, sparse_from_dense(h, 0.0));
    p.add_row(
        blk,
        sparse_from_dense(&linalg::identity(n), 0.0),
        vec![],
        1.0,
    );
    p
}

#[test]
fn eigenvalue_via_free_variable() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in [2, 4, 6] {
        let a = random_herm(&mut rng, n);
        let sol = solve(&eigen_problem(&a), &SdpSettings::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!(
            (sol.objective - linalg::max_eig(&a)).abs() < 1e-7,
            "{} vs {}",
            sol.objective,
            linalg::max_eig(&a)
        );
        assert!(sol.complementarity < 1e-6);
    }
}

#[test]
fn max_expectation_over_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for n in [2, 3, 5] {
        let h = random_herm(&mut rng, n);
        let sol = solve(&state_problem(&h), &SdpSettings::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.objective - linalg::max_eig(&h)).abs() < 1e-7);
        assert!((sol.dual_objective - sol.objective).abs() < 1e-7);
        assert!((linalg::trace(&sol.x[0]).re - 1.0).abs() < 1e-8);
        assert!(linalg::min_eig(&sol.x[0]) > -1e-9);
    }
}

/// `min Tr(CX)` s.t. `Tr X = 1`, `Tr(A_k X) = b_k`, `X ⪰ 0`.
fn constrained(c: &CMat, a: &[CMat], b: &[f64]) -> SdpProblem {
    let n = c.nrows();
    let mut p = SdpProblem::new(Sense::Min);
    let blk = p.add_block(n);
    p.set_cost(blk, sparse_from_dense(c, 0.0));
    p.add_row(
        blk,
        sparse_from_dense(&linalg::identity(n), 0.0),
        vec![],
        1.0,
    );
    for (ak, bk) in a.iter().zip(b) {
        p.add_row(blk, sparse_from_dense(ak, 0.0), vec![], *bk);
    }
    p
}

fn ternary(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Lagrangian dual `max_s λ_min(C − Σ s_k A_k) + s·b`, concave in `s`, by nested ternary search.
fn dual_oracle(c: &CMat, a: &[CMat], b: &[f64]) -> f64 {
    let g = |s1: f64, s2: f64| {
        let m = c - linalg::scale_re(&a[0], s1) - linalg::scale_re(&a[1], s2);
        linalg::min_eig(&m) + s1 * b[0] + s2 * b[1]
    };
    ternary(-30.0, 30.0, |s1| ternary(-30.0, 30.0, |s2| g(s1, s2)).1).1
}

#[test]
fn random_six_by_six_matches_independent_dual_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..3 {
        let n = 6;
        let c = random_herm(&mut rng, n);
        let a: Vec<CMat> = (0..2).map(|_| random_herm(&mut rng, n)).collect();
        // b taken from a strictly positive state keeps the problem strictly feasible.
        let v = random_herm(&mut rng, n);
        let rho0 = {
            let e = linalg::herm_fn(&v, |x| c64::new(x.exp(), 0.0));
            let t = linalg::trace(&e).re;
            linalg::scale_re(&e, 1.0 / t)
        };
        let b: Vec<f64> = a.iter().map(|ak| linalg::inner_re(ak, &rho0)).collect();
        let sol = solve(&constrained(&c, &a, &b), &SdpSettings::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        let oracle = dual_oracle(&c, &a, &b);
        assert!(
            (sol.objective - oracle).abs() < 1e-6,
            "{} vs {}",
            sol.objective,
            oracle
        );
    }
}

/// Embeds a complex problem as a real symmetric one of twice the size, tying the copies.
fn real_embedding(p: &SdpProblem) -> SdpProblem {
    let mut q = SdpProblem::new(p.sense);
    for (j, &n) in p.blocks.iter().enumerate() {
        let blk = q.add_block(2 * n);
        let c = dense_op(&p.cost[j], n);
        q.set_cost(blk, half(sparse_from_dense(&real_to_c(&realify(&c)), 0.0)));
        for a in 0..n {
            for b in a..n {
                // Diagonal copies agree; off-diagonal copies are opposite.
                for (p1, q1, p2, q2, sgn) in [(a, b, a + n, b + n, -1.0), (a, b + n, b, a + n, 1.0)]
                {
                    let mut op = entry_functional(p1, q1, true);
                    op.extend(
                        entry_functional(p2, q2, true)
                            .into_iter()
                            .map(|(i, k, v)| (i, k, v * sgn)),
                    );
                    q.add_row(blk, op, vec![], 0.0);
                }
            }
        }
    }
    for _ in 0..p.n_free() {
        q.add_free(0.0);
    }
    q.cost_free = p.cost_free.clone();
    for r in &p.rows {
        let n = p.blocks[r.block];
        let f = realify(&dense_op(&r.op, n));
        q.add_row(
            r.block,
            half(sparse_from_dense(&real_to_c(&f), 0.0)),
            r.free.clone(),
            r.rhs,
        );
    }
    q
}

fn dense_op(op: &[(usize, usize, c64)], n: usize) -> CMat {
    let mut m = linalg::zeros(n, n);
    for &(i, j, v) in op {
        m[(i, j)] += v;
    }
    m
}

fn real_to_c(r: &linalg::RMat) -> CMat {
    Mat::from_fn(r.nrows(), r.ncols(), |i, j| linalg::cr(r[(i, j)]))
}

fn half(op: Vec<(usize, usize, c64)>) -> Vec<(usize, usize, c64)> {
    op.into_iter().map(|(i, k, v)| (i, k, v * 0.5)).collect()
}

#[test]
fn realification_round_trip_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let n = rng.random_range(2..5);
        let h = random_herm(&mut rng, n);
        let p = state_problem(&h);
        let direct = solve(&p, &SdpSettings::default()).unwrap();
        let real = solve(&real_embedding(&p), &SdpSettings::default()).unwrap();
        assert_eq!(direct.status, SdpStatus::Optimal);
        assert_eq!(real.status, SdpStatus::Optimal);
        assert!(
            (direct.objective - real.objective).abs() < 1e-6,
            "{} vs {}",
            direct.objective,
            real.objective
        );
    }
}

#[test]
fn weak_duality_on_feasible_iterates() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..5 {
        let a = random_herm(&mut rng, 5);
        let sol = solve(&eigen_problem(&a), &SdpSettings::default()).unwrap();
        let mut checked = 0;
        for it in &sol.history {
            if it.pinf <= 1e-9 && it.dinf <= 1e-9 {
                assert!(
                    it.pobj - it.dobj >= -1e-9,
                    "pobj {} < dobj {}",
                    it.pobj,
                    it.dobj
                );
                checked += 1;
            }
        }
        assert!(checked > 0);
    }
}

#[test]
fn invariant_under_block_unitary_reparametrization() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let settings = SdpSettings::default();
    for _ in 0..5 {
        let c = random_herm(&mut rng, 5);
        let a: Vec<CMat> = (0..2).map(|_| random_herm(&mut rng, 5)).collect();
        let b = vec![linalg::trace(&a[0]).re / 5.0, linalg::trace(&a[1]).re / 5.0];
        let base = solve(&constrained(&c, &a, &b), &settings).unwrap();
        let u = random_unitary(&mut rng, 5);
        let rot = |m: &CMat| &u * m * u.adjoint();
        let rotated = solve(
            &constrained(&rot(&c), &a.iter().map(rot).collect::<Vec<_>>(), &b),
            &settings,
        )
        .unwrap();
        assert!(
            (base.objective - rotated.objective).abs()
                <= 2.0 * settings.gap_tol * (1.0 + base.objective.abs()) + 1e-9
        );
    }
}

#[test]
fn infeasible_problem_is_flagged() {
    // Tr X = -1 with X ⪰ 0 has no solution.
    let mut p = SdpProblem::new(Sense::Min);
    let blk = p.add_block(2);
    p.add_row(
        blk,
        sparse_from_dense(&linalg::identity(2), 0.0),
        vec![],
        -1.0,
    );
    let sol = solve(&p, &SdpSettings::default()).unwrap();
    assert_ne!(sol.status, SdpStatus::Optimal);
}

#[test]
fn json_dump_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let p = eigen_problem(&random_herm(&mut rng, 3));
    let back = SdpProblem::from_json(&p.to_json()).unwrap();
    let a = solve(&p, &SdpSettings::default()).unwrap();
    let b = solve(&back, &SdpSettings::default()).unwrap();
    assert!((a.objective - b.objective).abs() < 1e-12);
}

#[test]
fn malformed_inputs_are_rejected() {
    assert!(SdpProblem::from_json("{}").is_err());
    assert!(SdpProblem::from_json("not json").is_err());
    let bad = r#"{"schema_version":1,"sense":"min","blocks":[2],"cost":[[]],"cost_free":[],
        "rows":[{"block":0,"entries":[[0,1,[1.0,0.0]]],"rhs":1.0}]}"#;
    assert!(
        SdpProblem::from_json(bad).is_err(),
        "non-Hermitian row must be refused"
    );
    let oob = r#"{"schema_version":1,"sense":"min","blocks":[2],"cost":[[]],"cost_free":[],
        "rows":[{"block":3,"entries":[],"rhs":1.0}]}"#;
    assert!(SdpProblem::from_json(oob).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn eigen_sdp_matches_spectrum(seed in any::<u64>(), n in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_herm(&mut rng, n);
        let sol = solve(&eigen_problem(&a), &SdpSettings::default()).unwrap();
        prop_assert_eq!(sol.status, SdpStatus::Optimal);
        prop_assert!((sol.objective - linalg::max_eig(&a)).abs() < 1e-6);
    }
}
