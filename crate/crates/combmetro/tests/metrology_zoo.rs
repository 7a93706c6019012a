mod common;

use combmetro::comb_algebra::{
    choi_from_kraus, choi_from_kraus_labeled, validate_comb, KrausChannel,
};
use combmetro::linalg::{self, c64, CMat, I};
use combmetro::metrology_zoo::{
    amplitude_damping, bit_flip, compose, control_free_qfi, expm_with_derivative, nmr_relaxation,
    nonidentical_pair, nonmarkovian_swap_comb, phase_flip, rx, rz, uz, ChannelSpec, Order,
};
use combmetro::strategy_spaces::{StrategyKind, StrategySetSpec};
use combmetro::task_qfi::{product_comb, task_qfi};
use combmetro::tensor_algebra::{self as ta, herm_expm};
use common::*;
use std::f64::consts::{FRAC_PI_2, PI};

fn solve(fc: &combmetro::comb_algebra::FactorizedComb, kind: StrategyKind, n: usize) -> f64 {
    task_qfi(fc, &StrategySetSpec::uniform(kind, n, 2))
        .unwrap()
        .value
}

fn choi(ch: &KrausChannel) -> CMat {
    choi_from_kraus(ch).unwrap().1.into_matrix()
}

fn bf_rz(p: f64) -> KrausChannel {
    compose(
        &rz(FRAC_PI_2),
        &bit_flip(p).unwrap(),
        Order::SignalAfterNoise,
    )
    .unwrap()
}

/// Second route for NMR relaxation: the closed-form `K3`, `K4` coefficients.
fn nmr_closed_form(t: f64, t1: f64, t2: f64, a0: f64) -> Vec<CMat> {
    let e1 = (-t / t1).exp();
    let (a, b, g) = (
        (1.0 - a0) * e1 + a0,
        a0 * e1 + 1.0 - a0,
        2.0 * (-t / t2).exp(),
    );
    let s = (g * g + (a - b).powi(2)).sqrt();
    let k = |sign: f64| {
        let top = a - b + sign * s;
        let c = ((a + b + sign * s) / (g * g + top * top)).sqrt() / 2f64.sqrt();
        linalg::from_real_rows(&[&[c * top, 0.0], &[0.0, c * g]])
    };
    vec![
        linalg::from_real_rows(&[&[0.0, 0.0], &[(1.0 - a).sqrt(), 0.0]]),
        linalg::from_real_rows(&[&[0.0, (1.0 - b).sqrt()], &[0.0, 0.0]]),
        k(-1.0),
        k(1.0),
    ]
}

fn random_qubit_state(seed: u64) -> CMat {
    let mut r = rng(seed);
    let m = random_psd(&mut r, 2, 2);
    linalg::scale_re(&m, 1.0 / linalg::trace(&m).re)
}

#[test]
fn constructors_are_trace_preserving_with_consistent_derivatives() {
    let mut chans = vec![rz(0.3), rx(-1.1), uz(2.0, 0.7), KrausChannel::identity(2)];
    for p in [0.0, 0.25, 0.5, 1.0] {
        chans.push(amplitude_damping(p).unwrap());
        chans.push(bit_flip(p).unwrap());
        chans.push(phase_flip(p).unwrap());
        chans.push(
            compose(
                &rz(0.4),
                &amplitude_damping(p).unwrap(),
                Order::SignalAfterNoise,
            )
            .unwrap(),
        );
    }
    chans.push(nmr_relaxation(0.8, 3.2, 1.1, 0.5).unwrap());
    for ch in &chans {
        assert!(ch.tp_defect() < 1e-10);
        assert!(ch.dtp_defect() < 1e-10);
    }
    for bad in [-0.1, 1.1, f64::NAN] {
        assert!(amplitude_damping(bad).is_err());
        assert!(bit_flip(bad).is_err());
        assert!(phase_flip(bad).is_err());
    }
    assert!(nmr_relaxation(1.0, -1.0, 1.0, 0.5).is_err());
    assert!(nmr_relaxation(1.0, 1.0, 1.0, 1.5).is_err());
}

#[test]
fn constructor_examples() {
    assert!(
        dist(
            &choi(&amplitude_damping(0.0).unwrap()),
            &choi(&KrausChannel::identity(2))
        ) < 1e-15
    );
    let bf = bit_flip(0.5).unwrap();
    let h = 0.5f64.sqrt();
    assert!(dist(&bf.kraus()[0], &linalg::scale_re(&linalg::identity(2), h)) < 1e-15);
    assert!(dist(&bf.kraus()[1], &linalg::scale_re(&pauli_x(), h)) < 1e-15);
    let r0 = rz(0.0);
    assert!(dist(&r0.kraus()[0], &linalg::identity(2)) < 1e-15);
    assert!(
        dist(
            &r0.dkraus()[0],
            &linalg::scale(&pauli_z(), c64::new(0.0, -0.5))
        ) < 1e-15
    );
    assert!(bit_flip(0.2)
        .unwrap()
        .dkraus()
        .iter()
        .all(|d| linalg::frob(d) == 0.0));
    // The frequency derivative carries the evolution time.
    let u = uz(3.0, 0.7);
    assert!(
        dist(
            &u.dkraus()[0],
            &linalg::scale(&(pauli_z() * &u.kraus()[0]), c64::new(0.0, -0.35))
        ) < 1e-15
    );
}

#[test]
fn nmr_matches_closed_form_and_relaxation_dynamics() {
    for &(t, t1, t2, a0) in &[
        (0.5, 3.2, 1.1, 0.5),
        (2.0, 3.2, 1.1, 0.3),
        (0.1, 1.0, 1.5, 0.8),
        (4.0, 2.0, 0.7, 0.0),
    ] {
        let ch = nmr_relaxation(t, t1, t2, a0).unwrap();
        let closed = KrausChannel::constant(nmr_closed_form(t, t1, t2, a0)).unwrap();
        assert!(dist(&choi(&ch), &choi(&closed)) < 1e-10, "t = {t}");
        for seed in 0..5 {
            let rho = random_qubit_state(seed);
            let (a, b) = (rho[(0, 0)].re, rho[(0, 1)]);
            let (e1, e2) = ((-t / t1).exp(), (-t / t2).exp());
            let expected = linalg::from_rows(&[
                &[linalg::cr((a - a0) * e1 + a0), b * e2],
                &[b.conj() * e2, linalg::cr((a0 - a) * e1 + 1.0 - a0)],
            ]);
            assert!(dist(&ch.apply(&rho), &expected) < 1e-10);
        }
    }
}

#[test]
fn nmr_limits() {
    assert!(
        dist(
            &choi(&nmr_relaxation(0.0, 3.2, 1.1, 0.5).unwrap()),
            &choi(&KrausChannel::identity(2))
        ) < 1e-12
    );
    let late = nmr_relaxation(200.0, 3.2, 1.1, 0.5).unwrap();
    let out = late.apply(&random_qubit_state(9));
    assert!(dist(&out, &linalg::scale_re(&linalg::identity(2), 0.5)) < 1e-12);
    // α = β and γ = 0: the closed form is 0/0 here.
    let degenerate = nmr_relaxation(500.0, 1.0, 1.0, 0.5).unwrap();
    assert!(degenerate.tp_defect() < 1e-10);
}

#[test]
fn composition_examples() {
    let s = rz(0.6);
    let c = compose(&s, &KrausChannel::identity(2), Order::SignalAfterNoise).unwrap();
    assert!(dist(&choi(&c), &choi(&s)) < 1e-15);
    let ad = amplitude_damping(0.3).unwrap();
    let a = compose(&rx(0.6), &ad, Order::SignalAfterNoise).unwrap();
    let b = compose(&rx(0.6), &ad, Order::NoiseAfterSignal).unwrap();
    assert!(dist(&choi(&a), &choi(&b)) > 1e-2);
    // Leibniz rule against a finite difference in φ.
    let family = |phi: f64| choi(&compose(&rx(phi), &ad, Order::SignalAfterNoise).unwrap());
    let fd = linalg::scale_re(&(family(0.6 + 1e-5) - family(0.6 - 1e-5)), 0.5e5);
    let (fc, _) = choi_from_kraus(&a).unwrap();
    assert!(dist(fc.dchoi().matrix(), &fd) < 1e-8);
}

#[test]
fn channel_spec_roundtrip_and_order() {
    let spec = ChannelSpec::with_noise(
        ChannelSpec::Rz { phi: 0.4 },
        ChannelSpec::AmplitudeDamping { p: 0.2 },
        Order::SignalAfterNoise,
    );
    let json = serde_json::to_string(&spec).unwrap();
    let back: ChannelSpec = serde_json::from_str(&json).unwrap();
    assert_eq!(back, spec);
    let built = spec.build().unwrap();
    let direct = compose(
        &rz(0.4),
        &amplitude_damping(0.2).unwrap(),
        Order::SignalAfterNoise,
    )
    .unwrap();
    assert!(dist(&choi(&built), &choi(&direct)) < 1e-15);
    for bad in [
        r#"{"kind":"rz"}"#,
        r#"{"kind":"bit_flip","p":0.1,"q":2}"#,
        r#"{"kind":"teleport"}"#,
        r#"{"kind":"composed","channels":[]}"#,
    ] {
        let parsed: Result<ChannelSpec, _> = serde_json::from_str(bad);
        assert!(
            parsed
                .map_err(|_| ())
                .and_then(|s| s.build().map_err(|_| ()))
                .is_err(),
            "{bad}"
        );
    }
    let nmr: ChannelSpec =
        serde_json::from_str(r#"{"kind":"nmr_relaxation","t":1.0,"t1":3.2,"t2":1.1,"a0":0.5}"#)
            .unwrap();
    assert!(nmr.build().unwrap().tp_defect() < 1e-10);
}

#[test]
fn spectral_derivative_matches_finite_difference() {
    let mut r = rng(3);
    for n in [2, 4] {
        let h = random_herm(&mut r, n);
        let dh = random_herm(&mut r, n);
        let tau = 0.9;
        let (u, du) = expm_with_derivative(&h, &dh, tau);
        let layout = &[("s", n)];
        let at = |x: f64| {
            herm_expm(&labeled(layout, &h + linalg::scale_re(&dh, x)), tau)
                .unwrap()
                .into_matrix()
        };
        assert!(dist(&u, &at(0.0)) < 1e-12);
        let eps = 1e-5;
        let fd = linalg::scale_re(&(at(eps) - at(-eps)), 0.5 / eps);
        assert!(dist(&du, &fd) < 1e-8 * linalg::frob(&du).max(1.0));
    }
    // Degenerate spectrum exercises the confluent branch.
    let h = linalg::identity(2);
    let (_, du) = expm_with_derivative(&h, &pauli_z(), 0.5);
    let expected = linalg::scale(
        &pauli_z(),
        c64::new(0.0, -0.5) * c64::new(0.5f64.cos(), -0.5f64.sin()),
    );
    assert!(dist(&du, &expected) < 1e-12);
}

#[test]
fn noiseless_channels_reach_heisenberg_limit() {
    for noisy in [amplitude_damping(0.0).unwrap(), bit_flip(0.0).unwrap()] {
        let fc = product_comb(
            &compose(&rz(FRAC_PI_2), &noisy, Order::SignalAfterNoise).unwrap(),
            2,
        )
        .unwrap();
        for kind in StrategyKind::ALL {
            assert!((solve(&fc, kind, 2) - 4.0).abs() < 1e-6, "{kind}");
        }
    }
    let fc = product_comb(
        &compose(
            &rz(FRAC_PI_2),
            &amplitude_damping(0.0).unwrap(),
            Order::SignalAfterNoise,
        )
        .unwrap(),
        3,
    )
    .unwrap();
    for kind in [StrategyKind::Par, StrategyKind::Seq] {
        assert!((solve(&fc, kind, 3) - 9.0).abs() < 1e-6, "{kind}");
    }
}

#[test]
fn bit_flip_is_reflection_symmetric_for_causal_sets() {
    for p in [0.1, 0.3] {
        let a = product_comb(&bf_rz(p), 2).unwrap();
        let b = product_comb(&bf_rz(1.0 - p), 2).unwrap();
        for kind in [
            StrategyKind::Par,
            StrategyKind::Seq,
            StrategyKind::Sup,
            StrategyKind::Ico,
        ] {
            let (x, y) = (solve(&a, kind, 2), solve(&b, kind, 2));
            assert!(
                (x - y).abs() <= 1e-6 * x.max(1.0),
                "{kind} p = {p}: {x} vs {y}"
            );
        }
    }
}

#[test]
fn switch_bit_flip_values_match_effective_channel_computation() {
    // Frozen from an independent computation of the switched channel's QFI.
    for (p, expected) in [
        (0.1, 3.5604867),
        (0.2, 3.0494127),
        (0.8, 0.6494122),
        (0.9, 0.3604885),
    ] {
        let v = solve(&product_comb(&bf_rz(p), 2).unwrap(), StrategyKind::Swi, 2);
        assert!((v - expected).abs() < 1e-5, "p = {p}: {v}");
    }
}

#[test]
fn nonidentical_pair_examples() {
    let equal = nonidentical_pair(0.3, 0.3, FRAC_PI_2).unwrap();
    let product = product_comb(
        &compose(
            &rz(FRAC_PI_2),
            &amplitude_damping(0.3).unwrap(),
            Order::SignalAfterNoise,
        )
        .unwrap(),
        2,
    )
    .unwrap();
    assert!(dist(equal.choi().matrix(), product.choi().matrix()) < 1e-14);

    let fc = nonidentical_pair(0.4, 0.2, FRAC_PI_2).unwrap();
    let v: Vec<f64> = StrategyKind::ALL
        .iter()
        .map(|&k| solve(&fc, k, 2))
        .collect();
    let (par, seq, swi, sup, ico) = (v[0], v[1], v[2], v[3], v[4]);
    assert!(par < seq && seq < swi && swi < sup && sup < ico, "{v:?}");

    // Querying slot 2 first is the forward order on the swapped pair.
    let reversed = StrategySetSpec::seq_with_order(2, vec![2; 4], vec![1, 0]);
    let seq_rev = task_qfi(&fc, &reversed).unwrap().value;
    let swapped = nonidentical_pair(0.2, 0.4, FRAC_PI_2).unwrap();
    assert!((seq_rev - solve(&swapped, StrategyKind::Seq, 2)).abs() < 1e-6 * seq_rev);
    assert!(seq.max(seq_rev) < swi);
    assert!((solve(&swapped, StrategyKind::Ico, 2) - ico).abs() < 1e-6 * ico);
}

#[test]
fn uncoupled_environment_gives_identical_variants() {
    for t in [0.3, 1.7] {
        let phi = 0.4;
        let nm = nonmarkovian_swap_comb(phi, 0.0, t, false).unwrap();
        let mk = nonmarkovian_swap_comb(phi, 0.0, t, true).unwrap();
        assert!(dist(nm.choi().matrix(), mk.choi().matrix()) < 1e-10);
        assert!(dist(nm.dchoi().matrix(), mk.dchoi().matrix()) < 1e-10);
        let step = uz(phi, t);
        let (_, c1) = choi_from_kraus_labeled(&step, "1", "2").unwrap();
        let (_, c2) = choi_from_kraus_labeled(&step, "3", "4").unwrap();
        let both = ta::tensor(&c1, &c2).unwrap();
        assert!(dist(nm.choi().matrix(), both.matrix()) < 1e-12);
    }
}

#[test]
fn swap_coupling_exchanges_system_and_environment() {
    let fc = nonmarkovian_swap_comb(0.0, 1.0, FRAC_PI_2, false).unwrap();
    let c = fc.choi();
    assert!(validate_comb(&c, &[("1", "2"), ("3", "4")]).unwrap().pass);
    // Output 2 is the fresh environment; output 4 carries input 1; input 3 is discarded.
    let wire = labeled(
        &[("1", 2), ("4", 2)],
        proj(&combmetro::tensor_algebra::max_entangled(2)),
    );
    let zero = labeled(&[("2", 2)], proj(&ket(2, 0)));
    let discard = labeled(&[("3", 2)], linalg::identity(2));
    let expected = ta::tensor(&ta::tensor(&wire, &zero).unwrap(), &discard).unwrap();
    let expected = ta::permute(&expected, &["1", "2", "3", "4"]).unwrap();
    assert!(dist(c.matrix(), expected.matrix()) < 1e-12);
    let markov = nonmarkovian_swap_comb(0.0, 1.0, FRAC_PI_2, true).unwrap();
    assert!(
        validate_comb(&markov.choi(), &[("1", "2"), ("3", "4")])
            .unwrap()
            .pass
    );
}

#[test]
fn zoo_combs_are_valid() {
    let pairs = [("1", "2"), ("3", "4")];
    for fc in [
        nonidentical_pair(0.4, 0.2, 0.3).unwrap(),
        nonmarkovian_swap_comb(0.2, 1.0, 0.9, false).unwrap(),
        nonmarkovian_swap_comb(0.2, 1.0, 0.9, true).unwrap(),
        product_comb(&bf_rz(0.3), 2).unwrap(),
    ] {
        assert!(validate_comb(&fc.choi(), &pairs).unwrap().pass);
        // The normalization Tr_{4,3,2} C = 2·I_1 does not depend on φ.
        let rest = ta::partial_trace(&fc.dchoi(), &["4", "3", "2"]).unwrap();
        assert!(linalg::frob(rest.matrix()) < 1e-10);
    }
}

#[test]
fn memory_helps_sequential_strategies_and_control_helps_memory() {
    let mut excess: f64 = 0.0;
    for t in [0.6, 1.2, 2.0] {
        let nm = nonmarkovian_swap_comb(0.0, 1.0, t, false).unwrap();
        let mk = nonmarkovian_swap_comb(0.0, 1.0, t, true).unwrap();
        let (a, b) = (
            solve(&nm, StrategyKind::Seq, 2),
            solve(&mk, StrategyKind::Seq, 2),
        );
        assert!(a >= b - 1e-8, "t = {t}: {a} < {b}");
        excess = excess.max(a - b);
        let cf = control_free_qfi(&nm).unwrap().value;
        assert!(cf <= a + 1e-6, "t = {t}: control-free {cf} above {a}");
    }
    assert!(excess > 1e-3);
    let idle = product_comb(&KrausChannel::identity(2), 2).unwrap();
    assert!(control_free_qfi(&idle).unwrap().value.abs() < 1e-7);
    assert!(control_free_qfi(&product_comb(&rz(0.1), 1).unwrap()).is_err());
    let _ = (PI, I);
}
