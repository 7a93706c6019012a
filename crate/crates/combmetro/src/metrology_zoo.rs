//! Parametrized qubit processes: signal rotations, noise channels, NMR relaxation,
//! non-identical channel pairs and the two-step SWAP-coupling comb.

use crate::comb_algebra::{
    choi_from_kraus_labeled, double_ket, CombError, FactorizedComb, KrausChannel,
};
use crate::linalg::{self, c64, CMat, I, ZERO};
use crate::strategy_spaces::{label, StrategyKind, StrategySetSpec};
use crate::task_qfi::{self, QfiError, QfiResult};
use crate::tensor_algebra::SubsystemLayout;
use faer::Mat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ZooError {
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error(transparent)]
    Comb(#[from] CombError),
    #[error(transparent)]
    Tensor(#[from] crate::tensor_algebra::TensorError),
}

fn pauli_x() -> CMat {
    linalg::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

fn pauli_z() -> CMat {
    linalg::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])
}

fn pauli_y() -> CMat {
    linalg::from_rows(&[&[ZERO, -I], &[I, ZERO]])
}

fn check_prob(name: &str, p: f64) -> Result<(), ZooError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ZooError::OutOfRange(format!(
            "{name} = {p} must lie in [0, 1]"
        )))
    }
}

/// `exp(−iθG/2)` with derivative `−i(rate/2)G·exp(−iθG/2)` for an involutory `G`.
fn pauli_rotation(g: &CMat, theta: f64, rate: f64) -> KrausChannel {
    let k = linalg::scale_re(&linalg::identity(2), (theta / 2.0).cos())
        - linalg::scale(g, c64::new(0.0, (theta / 2.0).sin()));
    let dk = linalg::scale(&(g * &k), c64::new(0.0, -rate / 2.0));
    KrausChannel::unchecked(vec![k], vec![dk]).expect("single 2x2 operator")
}

/// `R_z(φ) = exp(−iφZ/2)`, derivative in `φ`.
pub fn rz(phi: f64) -> KrausChannel {
    pauli_rotation(&pauli_z(), phi, 1.0)
}

/// `R_x(φ) = exp(−iφX/2)`, derivative in `φ`.
pub fn rx(phi: f64) -> KrausChannel {
    pauli_rotation(&pauli_x(), phi, 1.0)
}

/// `U_z(ω) = exp(−iωtZ/2)`, derivative in `ω`.
pub fn uz(omega: f64, t: f64) -> KrausChannel {
    pauli_rotation(&pauli_z(), omega * t, t)
}

pub fn amplitude_damping(p: f64) -> Result<KrausChannel, ZooError> {
    check_prob("p", p)?;
    let k1 = linalg::from_real_rows(&[&[1.0, 0.0], &[0.0, (1.0 - p).sqrt()]]);
    let k2 = linalg::from_real_rows(&[&[0.0, p.sqrt()], &[0.0, 0.0]]);
    Ok(KrausChannel::constant(vec![k1, k2])?)
}

pub fn bit_flip(p: f64) -> Result<KrausChannel, ZooError> {
    check_prob("p", p)?;
    Ok(KrausChannel::constant(vec![
        linalg::scale_re(&linalg::identity(2), (1.0 - p).sqrt()),
        linalg::scale_re(&pauli_x(), p.sqrt()),
    ])?)
}

pub fn phase_flip(p: f64) -> Result<KrausChannel, ZooError> {
    check_prob("p", p)?;
    Ok(KrausChannel::constant(vec![
        linalg::scale_re(&linalg::identity(2), (1.0 - p).sqrt()),
        linalg::scale_re(&pauli_z(), p.sqrt()),
    ])?)
}

/// Unit eigenvectors of `[[a, c], [c, b]]`, ascending eigenvalues.
fn sym2_eigen(a: f64, b: f64, c: f64) -> [(f64, [f64; 2]); 2] {
    let s = ((a - b).powi(2) + 4.0 * c * c).sqrt();
    let mid = 0.5 * (a + b);
    let vec_for = |mu: f64| {
        let u = [c, mu - a];
        let v = [mu - b, c];
        let (nu, nv) = (u[0].hypot(u[1]), v[0].hypot(v[1]));
        if nu.max(nv) < 1e-300 {
            return None;
        }
        Some(if nu >= nv {
            [u[0] / nu, u[1] / nu]
        } else {
            [v[0] / nv, v[1] / nv]
        })
    };
    let lo = mid - 0.5 * s;
    let hi = mid + 0.5 * s;
    match (vec_for(lo), vec_for(hi)) {
        (Some(x), Some(_)) if s > 1e-12 => [(lo, x), (hi, [-x[1], x[0]])],
        _ => [(lo, [1.0, 0.0]), (hi, [0.0, 1.0])],
    }
}

/// Relaxation with times `T1`, `T2` and equilibrium population `a0`, after time `t`.
///
/// `K3`, `K4` are `√μ·diag(v)` for the eigenpairs `(μ, v)` of `[[α, γ/2], [γ/2, β]]`.
pub fn nmr_relaxation(t: f64, t1: f64, t2: f64, a0: f64) -> Result<KrausChannel, ZooError> {
    if !(t >= 0.0 && t1 > 0.0 && t2 > 0.0) {
        return Err(ZooError::OutOfRange(format!(
            "need t ≥ 0, T1 > 0, T2 > 0 (got {t}, {t1}, {t2})"
        )));
    }
    check_prob("a0", a0)?;
    let e1 = (-t / t1).exp();
    let alpha = (1.0 - a0) * e1 + a0;
    let beta = a0 * e1 + 1.0 - a0;
    let gamma = 2.0 * (-t / t2).exp();
    let eig = sym2_eigen(alpha, beta, gamma / 2.0);
    if eig[0].0 < -1e-12 {
        return Err(ZooError::OutOfRange(format!(
            "αβ < e^(−2t/T2): T2 = {t2} too long for T1 = {t1}"
        )));
    }
    let k1 = linalg::from_real_rows(&[&[0.0, 0.0], &[(1.0 - alpha).max(0.0).sqrt(), 0.0]]);
    let k2 = linalg::from_real_rows(&[&[0.0, (1.0 - beta).max(0.0).sqrt()], &[0.0, 0.0]]);
    let diag_k = |(mu, v): (f64, [f64; 2])| {
        let s = mu.max(0.0).sqrt();
        linalg::from_real_rows(&[&[s * v[0], 0.0], &[0.0, s * v[1]]])
    };
    Ok(KrausChannel::constant(vec![
        k1,
        k2,
        diag_k(eig[0]),
        diag_k(eig[1]),
    ])?)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    /// `E = S ∘ N`.
    #[default]
    SignalAfterNoise,
    /// `E = N ∘ S`.
    NoiseAfterSignal,
}

pub fn compose(
    signal: &KrausChannel,
    noise: &KrausChannel,
    order: Order,
) -> Result<KrausChannel, ZooError> {
    Ok(match order {
        Order::SignalAfterNoise => signal.after(noise)?,
        Order::NoiseAfterSignal => noise.after(signal)?,
    })
}

/// A single-qubit channel description. `composed` lists channels applied right to left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    Rz { phi: f64 },
    Rx { phi: f64 },
    Uz { omega: f64, t: f64 },
    Identity,
    AmplitudeDamping { p: f64 },
    BitFlip { p: f64 },
    PhaseFlip { p: f64 },
    NmrRelaxation { t: f64, t1: f64, t2: f64, a0: f64 },
    Composed { channels: Vec<ChannelSpec> },
}

impl ChannelSpec {
    pub fn build(&self) -> Result<KrausChannel, ZooError> {
        let finite = |xs: &[f64]| {
            if xs.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(ZooError::OutOfRange("non-finite parameter".into()))
            }
        };
        match self {
            Self::Rz { phi } => finite(&[*phi]).map(|_| rz(*phi)),
            Self::Rx { phi } => finite(&[*phi]).map(|_| rx(*phi)),
            Self::Uz { omega, t } => finite(&[*omega, *t]).map(|_| uz(*omega, *t)),
            Self::Identity => Ok(KrausChannel::identity(2)),
            Self::AmplitudeDamping { p } => amplitude_damping(*p),
            Self::BitFlip { p } => bit_flip(*p),
            Self::PhaseFlip { p } => phase_flip(*p),
            Self::NmrRelaxation { t, t1, t2, a0 } => nmr_relaxation(*t, *t1, *t2, *a0),
            Self::Composed { channels } => {
                let mut it = channels.iter().rev();
                let first = it
                    .next()
                    .ok_or_else(|| ZooError::OutOfRange("empty composition".into()))?;
                let mut acc = first.build()?;
                for c in it {
                    acc = c.build()?.after(&acc)?;
                }
                Ok(acc)
            }
        }
    }

    /// `signal ∘ noise` or `noise ∘ signal`.
    pub fn with_noise(signal: ChannelSpec, noise: ChannelSpec, order: Order) -> Self {
        match order {
            Order::SignalAfterNoise => Self::Composed {
                channels: vec![signal, noise],
            },
            Order::NoiseAfterSignal => Self::Composed {
                channels: vec![noise, signal],
            },
        }
    }
}

/// `E^(1) ⊗ E^(2)` with `E^(k) = R_z(φ) ∘ AD(p_k)` on slots `(1,2)` and `(3,4)`.
pub fn nonidentical_pair(p1: f64, p2: f64, phi: f64) -> Result<FactorizedComb, ZooError> {
    let e1 = compose(&rz(phi), &amplitude_damping(p1)?, Order::SignalAfterNoise)?;
    let e2 = compose(&rz(phi), &amplitude_damping(p2)?, Order::SignalAfterNoise)?;
    let c1 = choi_from_kraus_labeled(&e1, &label(1), &label(2))?.0;
    let c2 = choi_from_kraus_labeled(&e2, &label(3), &label(4))?.0;
    Ok(c1.tensor(&c2)?)
}

/// `exp(−iτH)` and its derivative along `dH`, via divided differences in `H`'s eigenbasis.
pub fn expm_with_derivative(h: &CMat, dh: &CMat, tau: f64) -> (CMat, CMat) {
    let (w, v) = linalg::eigh(h);
    let n = w.len();
    let f = |x: f64| c64::new((tau * x).cos(), -(tau * x).sin());
    let u = {
        let fv = Mat::from_fn(n, n, |i, j| v[(i, j)] * f(w[j]));
        &fv * v.adjoint()
    };
    let dhat = v.adjoint() * dh * &v;
    let kernel = Mat::from_fn(n, n, |k, l| {
        let gap = w[k] - w[l];
        let dd = if gap.abs() > 1e-9 {
            (f(w[k]) - f(w[l])) / gap
        } else {
            c64::new(0.0, -tau) * f(0.5 * (w[k] + w[l]))
        };
        dd * dhat[(k, l)]
    });
    (u, &v * kernel * v.adjoint())
}

/// Two-step system-environment process with `H = φ Z⊗I + g(XX + YY + ZZ)` applied for `t/2` per step.
///
/// `t` is the total duration. The environment starts in `|0⟩`; in the Markovian variant it is
/// traced out and re-prepared in `|0⟩` between the steps.
pub fn nonmarkovian_swap_comb(
    phi: f64,
    g: f64,
    t: f64,
    markovian: bool,
) -> Result<FactorizedComb, ZooError> {
    let z = pauli_z();
    let id = linalg::identity(2);
    let coupling = linalg::kron(&pauli_x(), &pauli_x())
        + linalg::kron(&pauli_y(), &pauli_y())
        + linalg::kron(&z, &z);
    let h = linalg::scale_re(&linalg::kron(&z, &id), phi) + linalg::scale_re(&coupling, g);
    let (u, du) = expm_with_derivative(&h, &linalg::kron(&z, &id), t / 2.0);
    // Entry (m, n) of ⟨e|U|·⟩|e'⟩ on the system.
    let block =
        |m: &CMat, e: usize, e2: usize| Mat::from_fn(2, 2, |a, b| m[(2 * a + e, 2 * b + e2)]);
    let layout = SubsystemLayout::new((1..=4).map(|i| (label(i), 2)))?;
    let mut cols: Vec<(Vec<c64>, Vec<c64>)> = Vec::new();
    let kron_vec = |a: &[c64], b: &[c64]| -> Vec<c64> {
        a.iter()
            .flat_map(|x| b.iter().map(move |y| x * y))
            .collect()
    };
    let add = |x: &mut Vec<c64>, y: Vec<c64>| x.iter_mut().zip(y).for_each(|(a, b)| *a += b);
    if markovian {
        for e1 in 0..2 {
            for e2 in 0..2 {
                let (a, da) = (
                    double_ket(&block(&u, e1, 0)),
                    double_ket(&block(&du, e1, 0)),
                );
                let (b, db) = (
                    double_ket(&block(&u, e2, 0)),
                    double_ket(&block(&du, e2, 0)),
                );
                let mut dv = kron_vec(&da, &b);
                add(&mut dv, kron_vec(&a, &db));
                cols.push((kron_vec(&a, &b), dv));
            }
        }
    } else {
        for e in 0..2 {
            let mut v = vec![ZERO; 16];
            let mut dv = vec![ZERO; 16];
            for mid in 0..2 {
                let (a, da) = (
                    double_ket(&block(&u, mid, 0)),
                    double_ket(&block(&du, mid, 0)),
                );
                let (b, db) = (
                    double_ket(&block(&u, e, mid)),
                    double_ket(&block(&du, e, mid)),
                );
                add(&mut v, kron_vec(&a, &b));
                add(&mut dv, kron_vec(&da, &b));
                add(&mut dv, kron_vec(&a, &db));
            }
            cols.push((v, dv));
        }
    }
    let r = cols.len();
    let vectors = Mat::from_fn(16, r, |i, c| cols[c].0[i]);
    let dvectors = Mat::from_fn(16, r, |i, c| cols[c].1[i]);
    Ok(FactorizedComb::new(layout, vectors, dvectors)?)
}

/// Task QFI of a two-step comb with the middle tooth fixed to an identity wire.
pub fn control_free_qfi(fc: &FactorizedComb) -> Result<QfiResult, QfiError> {
    let dims = fc.layout().dims();
    if dims.len() != 4 {
        return Err(QfiError::Dimension(
            "control-free strategies need a two-step comb".into(),
        ));
    }
    task_qfi::task_qfi(
        fc,
        &StrategySetSpec::new(StrategyKind::ControlFree, 2, dims),
    )
}
