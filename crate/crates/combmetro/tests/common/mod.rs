#![allow(dead_code)]

use combmetro::comb_algebra::KrausChannel;
use combmetro::linalg::{self, c64, CMat, I, ONE, ZERO};
use combmetro::tensor_algebra::{LabeledMatrix, SubsystemLayout};
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
    Mat::from_fn(r, c, |_, _| {
        c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

pub fn random_herm(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    linalg::hermitize(&random_matrix(rng, n, n))
}

/// `AA†` for an `n × rank` Gaussian-like `A`.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> CMat {
    let a = random_matrix(rng, n, rank);
    &a * a.adjoint()
}

pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let h = random_herm(rng, n);
    linalg::herm_fn(&h, |x| c64::new((3.0 * x).cos(), (3.0 * x).sin()))
}

/// Channel `d_in → d_out` with `k` Kraus operators read off a random unitary.
pub fn random_channel(rng: &mut ChaCha8Rng, d_in: usize, d_out: usize, k: usize) -> KrausChannel {
    let u = random_unitary(rng, d_out * k);
    let kraus = (0..k)
        .map(|a| Mat::from_fn(d_out, d_in, |i, j| u[(a * d_out + i, j)]))
        .collect();
    KrausChannel::constant(kraus).expect("isometry blocks are trace preserving")
}

/// Channel with `K_a(φ) = U(φ) K_a` for `U(φ) = exp(−iφG)`, evaluated at `φ = 0`.
pub fn random_rotated_channel(rng: &mut ChaCha8Rng, d: usize, k: usize) -> KrausChannel {
    let base = random_channel(rng, d, d, k);
    let g = random_herm(rng, d);
    let dk = base
        .kraus()
        .iter()
        .map(|m| linalg::scale(&(&g * m), -I))
        .collect();
    KrausChannel::new(base.kraus().to_vec(), dk).expect("rotation keeps trace preservation")
}

pub fn pauli_x() -> CMat {
    linalg::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

pub fn pauli_y() -> CMat {
    linalg::from_rows(&[&[ZERO, -I], &[I, ZERO]])
}

pub fn pauli_z() -> CMat {
    linalg::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])
}

pub fn layout(factors: &[(&str, usize)]) -> SubsystemLayout {
    SubsystemLayout::new(factors.iter().map(|&(l, d)| (l, d))).unwrap()
}

pub fn labeled(factors: &[(&str, usize)], m: CMat) -> LabeledMatrix {
    LabeledMatrix::new(layout(factors), m).unwrap()
}

pub fn dist(a: &CMat, b: &CMat) -> f64 {
    linalg::frob(&(a - b))
}

/// `|v⟩⟨v|` for a column vector.
pub fn proj(v: &[c64]) -> CMat {
    linalg::outer(v, v)
}

pub fn ket(d: usize, i: usize) -> Vec<c64> {
    (0..d).map(|k| if k == i { ONE } else { ZERO }).collect()
}

pub fn random_state(rng: &mut ChaCha8Rng, d: usize, rank: usize) -> CMat {
    let p = random_psd(rng, d, rank);
    linalg::scale_re(&p, 1.0 / linalg::trace(&p).re)
}

/// Choi of a random channel from `ins` to `outs`, laid out as `ins` followed by `outs`.
pub fn random_choi(
    rng: &mut ChaCha8Rng,
    ins: &[(&str, usize)],
    outs: &[(&str, usize)],
    k: usize,
) -> LabeledMatrix {
    let din: usize = ins.iter().map(|x| x.1).product();
    let dout: usize = outs.iter().map(|x| x.1).product();
    let ch = random_channel(rng, din, dout, k);
    let m = combmetro::comb_algebra::choi_from_kraus(&ch)
        .unwrap()
        .1
        .into_matrix();
    let all: Vec<(&str, usize)> = ins.iter().chain(outs).copied().collect();
    labeled(&all, m)
}

fn time_labels(order: &[usize]) -> Vec<String> {
    order
        .iter()
        .flat_map(|&c| [(2 * c + 1).to_string(), (2 * c + 2).to_string()])
        .collect()
}

fn sorted(m: &LabeledMatrix, n: usize) -> LabeledMatrix {
    let labels: Vec<String> = (1..=2 * n).map(|i| i.to_string()).collect();
    combmetro::tensor_algebra::permute(m, &labels).unwrap()
}

/// Marginal of a random sequential strategy querying channels in `order`, with ancilla dimension `a`.
pub fn random_tester(rng: &mut ChaCha8Rng, order: &[usize], d: usize, a: usize) -> LabeledMatrix {
    use combmetro::comb_algebra::link_product;
    let n = order.len();
    let t = time_labels(order);
    let anc = |k: usize| format!("A{k}");
    let mut acc = if n == 1 {
        labeled(&[(t[0].as_str(), d)], random_state(rng, d, d))
    } else {
        labeled(
            &[(t[0].as_str(), d), (anc(0).as_str(), a)],
            random_state(rng, d * a, 1),
        )
    };
    for k in 1..n {
        let (out, inp, a_in, a_out) =
            (t[2 * k - 1].as_str(), t[2 * k].as_str(), anc(k - 1), anc(k));
        let step = if k + 1 < n {
            random_choi(
                rng,
                &[(out, d), (a_in.as_str(), a)],
                &[(inp, d), (a_out.as_str(), a)],
                2,
            )
        } else {
            random_choi(rng, &[(out, d), (a_in.as_str(), a)], &[(inp, d)], 2)
        };
        acc = link_product(&acc, &step).unwrap();
    }
    let last = labeled(&[(t[2 * n - 1].as_str(), d)], linalg::identity(d));
    sorted(&combmetro::tensor_algebra::tensor(&acc, &last).unwrap(), n)
}

/// Random comb of channels used in `order`, with memory dimension `a`.
pub fn random_process(rng: &mut ChaCha8Rng, order: &[usize], d: usize, a: usize) -> LabeledMatrix {
    use combmetro::comb_algebra::link_product;
    let n = order.len();
    let t = time_labels(order);
    let anc = |k: usize| format!("M{k}");
    if n == 1 {
        return sorted(
            &random_choi(rng, &[(t[0].as_str(), d)], &[(t[1].as_str(), d)], 3),
            1,
        );
    }
    let mut acc = random_choi(
        rng,
        &[(t[0].as_str(), d)],
        &[(t[1].as_str(), d), (anc(0).as_str(), a)],
        2,
    );
    for k in 1..n {
        let (inp, out, m_in, m_out) =
            (t[2 * k].as_str(), t[2 * k + 1].as_str(), anc(k - 1), anc(k));
        let step = if k + 1 < n {
            random_choi(
                rng,
                &[(inp, d), (m_in.as_str(), a)],
                &[(out, d), (m_out.as_str(), a)],
                2,
            )
        } else {
            random_choi(rng, &[(inp, d), (m_in.as_str(), a)], &[(out, d)], 2)
        };
        acc = link_product(&acc, &step).unwrap();
    }
    sorted(&acc, n)
}

use combmetro::comb_algebra::choi_from_kraus_labeled;
use combmetro::strategy_spaces::{
    dual_space, label, lift, permutations, primal_space, wired_rest, AffineSpace, Constraint,
    StrategyKind, StrategySetSpec,
};
use combmetro::tensor_algebra as ta;

/// `Tr(QS)`.
pub fn pair(q: &LabeledMatrix, s: &LabeledMatrix) -> f64 {
    linalg::trace(&(q.matrix() * s.matrix())).re
}

pub fn mix(rng: &mut ChaCha8Rng, parts: &[LabeledMatrix]) -> LabeledMatrix {
    let w: Vec<f64> = parts.iter().map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    let mut m = linalg::zeros(parts[0].dim(), parts[0].dim());
    for (p, wk) in parts.iter().zip(&w) {
        m = m + linalg::scale_re(p.matrix(), wk / total);
    }
    LabeledMatrix::new(parts[0].layout().clone(), m).unwrap()
}

/// `ρ_first ⊗ wires ⊗ I_last` on a wired switch branch.
pub fn switch_element(rng: &mut ChaCha8Rng, sp: &AffineSpace) -> LabeledMatrix {
    let Some(Constraint::Wired { first, links, last }) = sp
        .constraints
        .iter()
        .find(|c| matches!(c, Constraint::Wired { .. }))
    else {
        panic!("switch primal spaces are wired");
    };
    let rest = wired_rest(&sp.layout, first, links, last);
    lift(&random_state(rng, 2, 2), first, &rest, &sp.layout)
}

/// Operator whose last-output partial trace vanishes; it leaves any sandwich untouched.
pub fn sandwich_null(rng: &mut ChaCha8Rng, order: &[usize]) -> LabeledMatrix {
    let n = order.len();
    let last = label(2 * order[n - 1] + 2);
    let others: Vec<(String, usize)> = (1..=2 * n)
        .map(label)
        .filter(|l| *l != last)
        .map(|l| (l, 2))
        .collect();
    let others: Vec<(&str, usize)> = others.iter().map(|(l, d)| (l.as_str(), *d)).collect();
    let rest = labeled(&others, random_herm(rng, 1 << (2 * n - 1)));
    let z = labeled(&[(last.as_str(), 2)], pauli_z());
    let all: Vec<String> = (1..=2 * n).map(label).collect();
    ta::permute(&ta::tensor(&rest, &z).unwrap(), &all)
        .unwrap()
        .scaled(0.1)
}

/// Random feasible primal elements, one list per branch.
pub fn primal_samples(
    rng: &mut ChaCha8Rng,
    kind: StrategyKind,
    n: usize,
    samples: usize,
) -> Vec<Vec<LabeledMatrix>> {
    let sp = StrategySetSpec::uniform(kind, n, 2);
    let spaces = primal_space(&sp);
    let ident: Vec<usize> = (0..n).collect();
    spaces
        .iter()
        .map(|space| {
            (0..samples)
                .map(|_| match kind {
                    StrategyKind::Par => {
                        let ins: Vec<String> = (0..n).map(|c| label(2 * c + 1)).collect();
                        let outs: Vec<String> = (0..n).map(|c| label(2 * c + 2)).collect();
                        let fi: Vec<(&str, usize)> = ins.iter().map(|l| (l.as_str(), 2)).collect();
                        let fo: Vec<(&str, usize)> = outs.iter().map(|l| (l.as_str(), 2)).collect();
                        let rho = labeled(&fi, random_state(rng, 1 << n, 1 << n));
                        let id = labeled(&fo, linalg::identity(1 << n));
                        let all: Vec<String> = (1..=2 * n).map(label).collect();
                        ta::permute(&ta::tensor(&rho, &id).unwrap(), &all).unwrap()
                    }
                    StrategyKind::Seq | StrategyKind::Sup => {
                        let order = space.branch.clone().unwrap_or_else(|| ident.clone());
                        random_tester(rng, &order, 2, 2)
                    }
                    StrategyKind::Swi | StrategyKind::ControlFree => switch_element(rng, space),
                    StrategyKind::Ico => {
                        let parts: Vec<LabeledMatrix> = permutations(n)
                            .iter()
                            .map(|o| random_tester(rng, o, 2, 2))
                            .collect();
                        mix(rng, &parts)
                    }
                })
                .collect()
        })
        .collect()
}

/// Random feasible dual elements, one list per branch.
pub fn dual_samples(
    rng: &mut ChaCha8Rng,
    kind: StrategyKind,
    n: usize,
    samples: usize,
) -> Vec<Vec<LabeledMatrix>> {
    let sp = StrategySetSpec::uniform(kind, n, 2);
    let spaces = dual_space(&sp);
    let ident: Vec<usize> = (0..n).collect();
    spaces
        .iter()
        .map(|space| {
            (0..samples)
                .map(|_| match kind {
                    StrategyKind::Par => {
                        let ins: Vec<String> = (0..n).map(|c| label(2 * c + 1)).collect();
                        let outs: Vec<String> = (0..n).map(|c| label(2 * c + 2)).collect();
                        let fi: Vec<(&str, usize)> = ins.iter().map(|l| (l.as_str(), 2)).collect();
                        let fo: Vec<(&str, usize)> = outs.iter().map(|l| (l.as_str(), 2)).collect();
                        let c = random_choi(rng, &fi, &fo, 3);
                        let all: Vec<String> = (1..=2 * n).map(label).collect();
                        ta::permute(&c, &all).unwrap()
                    }
                    StrategyKind::Seq | StrategyKind::Sup => {
                        let order = space.branch.clone().unwrap_or_else(|| ident.clone());
                        random_process(rng, &order, 2, 2)
                    }
                    StrategyKind::Swi | StrategyKind::ControlFree => {
                        let order = space.branch.clone().unwrap();
                        let base = random_process(rng, &order, 2, 2);
                        let extra = sandwich_null(rng, &order);
                        LabeledMatrix::new(base.layout().clone(), base.matrix() + extra.matrix())
                            .unwrap()
                    }
                    StrategyKind::Ico => {
                        let parts: Vec<LabeledMatrix> = (0..3)
                            .map(|_| {
                                let mut acc: Option<LabeledMatrix> = None;
                                for c in 0..n {
                                    let e = random_channel(rng, 2, 2, 2);
                                    let (_, m) = choi_from_kraus_labeled(
                                        &e,
                                        &label(2 * c + 1),
                                        &label(2 * c + 2),
                                    )
                                    .unwrap();
                                    acc = Some(match acc {
                                        None => m,
                                        Some(a) => ta::tensor(&a, &m).unwrap(),
                                    });
                                }
                                acc.unwrap()
                            })
                            .collect();
                        mix(rng, &parts)
                    }
                })
                .collect()
        })
        .collect()
}
