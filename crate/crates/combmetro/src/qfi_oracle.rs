//! Independent state-level check: the output state of a strategy on a process,
//! its SLD quantum Fisher information, and classical Fisher information of measurements.

use crate::comb_algebra::{richardson_derivative, CombError, FactorizedComb};
use crate::linalg::{self, CMat};
use crate::strategy_synthesis::{purify_strategy, StrategyChoi, SynthesisError};
use crate::tensor_algebra::{self as ta, LabeledMatrix, TensorError};
use faer::Mat;
use serde::Serialize;
use thiserror::Error;

/// Eigenvalue-pair cutoff below which an SLD entry is set to zero.
const KERNEL_TOL: f64 = 1e-12;
/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("derivative has weight {0:.3e} between kernel vectors of the state")]
    RankInstability(f64),
    #[error("outcome {index} has vanishing probability {q:.3e} but derivative {dq:.3e}")]
    Divergent { index: usize, q: f64, dq: f64 },
    #[error("not a valid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Comb(#[from] CombError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMethod {
    Analytic,
    FiniteDifference,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleResiduals {
    pub trace: f64,
    pub derivative_trace: f64,
    /// `‖ρ̇ − (Lρ + ρL)/2‖_F`.
    pub lyapunov: f64,
}

#[derive(Clone, Debug)]
pub struct OracleReport {
    pub j_sld: f64,
    pub sld: CMat,
    /// CFI of the measurement in the eigenbasis of the SLD.
    pub measurement_cfi: f64,
    pub derivative_method: DerivativeMethod,
    pub residuals: OracleResiduals,
}

/// Classical Fisher information `Σ q̇²/q` of `(q, q̇)` pairs.
pub fn cfi(probs: &[(f64, f64)]) -> Result<f64, OracleError> {
    let total: f64 = probs.iter().map(|p| p.0).sum();
    let drift: f64 = probs.iter().map(|p| p.1).sum();
    if probs
        .iter()
        .any(|p| !p.0.is_finite() || !p.1.is_finite() || p.0 < -1e-12)
    {
        return Err(OracleError::Invalid(
            "probabilities must be finite and non-negative".into(),
        ));
    }
    if (total - 1.0).abs() > 1e-8 || drift.abs() > 1e-8 {
        return Err(OracleError::Invalid(format!(
            "Σq = {total:.12}, Σq̇ = {drift:.3e}"
        )));
    }
    let mut f = 0.0;
    for (index, &(q, dq)) in probs.iter().enumerate() {
        if q <= KERNEL_TOL {
            if dq.abs() > 1e-10 {
                return Err(OracleError::Divergent { index, q, dq });
            }
            continue;
        }
        f += dq * dq / q;
    }
    Ok(f)
}

/// SLD quantum Fisher information, with the SLD set to zero on the kernel of `ρ`.
pub fn state_qfi_sld(rho: &CMat, drho: &CMat) -> Result<OracleReport, OracleError> {
    state_qfi_sld_with(rho, drho, DerivativeMethod::Analytic)
}

pub fn state_qfi_sld_with(
    rho: &CMat,
    drho: &CMat,
    method: DerivativeMethod,
) -> Result<OracleReport, OracleError> {
    let n = rho.nrows();
    if rho.ncols() != n || drho.nrows() != n || drho.ncols() != n {
        return Err(OracleError::Invalid(
            "state and derivative must be square of equal size".into(),
        ));
    }
    let trace = (linalg::trace(rho).re - 1.0).abs();
    let derivative_trace = linalg::trace(drho).re.abs();
    if trace > 1e-8
        || derivative_trace > 1e-8
        || linalg::herm_defect(rho) > 1e-8
        || linalg::herm_defect(drho) > 1e-8
    {
        return Err(OracleError::Invalid(format!(
            "trace defect {trace:.3e}, derivative trace {derivative_trace:.3e}"
        )));
    }
    let (w, u) = linalg::eigh(rho);
    if w[0] < -1e-8 {
        return Err(OracleError::Invalid(format!(
            "state has eigenvalue {:.3e}",
            w[0]
        )));
    }
    let w: Vec<f64> = w.into_iter().map(|x| x.max(0.0)).collect();
    let r = u.adjoint() * linalg::hermitize(drho) * &u;
    let scale = linalg::frob(&r).max(1e-300);
    let mut leak = 0.0f64;
    let mut l_eig = linalg::zeros(n, n);
    let mut j = 0.0;
    for a in 0..n {
        for b in 0..n {
            let s = w[a] + w[b];
            if s <= KERNEL_TOL {
                leak = leak.max(r[(a, b)].norm());
                continue;
            }
            l_eig[(a, b)] = r[(a, b)] * (2.0 / s);
            j += 2.0 * r[(a, b)].norm_sqr() / s;
        }
    }
    if leak > 1e-8 * scale.max(1.0) {
        return Err(OracleError::RankInstability(leak));
    }
    let sld = linalg::hermitize(&(&u * &l_eig * u.adjoint()));
    let lyapunov = linalg::frob(&(drho - linalg::scale_re(&(&sld * rho + rho * &sld), 0.5)));

    let (_, v) = linalg::eigh(&sld);
    let probs: Vec<(f64, f64)> = (0..n)
        .map(|m| {
            let col = Mat::from_fn(n, 1, |i, _| v[(i, m)]);
            let q = (col.adjoint() * rho * &col)[(0, 0)].re;
            let dq = (col.adjoint() * drho * &col)[(0, 0)].re;
            (q.max(0.0), dq)
        })
        .collect();
    let measurement_cfi = cfi(&probs)?;
    Ok(OracleReport {
        j_sld: j,
        sld,
        measurement_cfi,
        derivative_method: method,
        residuals: OracleResiduals {
            trace,
            derivative_trace,
            lyapunov,
        },
    })
}

fn purified(p: &StrategyChoi) -> Result<StrategyChoi, OracleError> {
    match p.purification {
        Some(_) => Ok(p.clone()),
        None => Ok(purify_strategy(p)?),
    }
}

/// `Pᵀ X P̄` for the reshaped purification `P`, after matching `x` to the strategy layout.
fn contract(p: &StrategyChoi, x: &LabeledMatrix) -> Result<CMat, OracleError> {
    let pur = p.purification.as_ref().expect("purified");
    let order: Vec<&str> = p.marginal.layout().labels().collect();
    let x = ta::permute(x, &order)?;
    if x.layout() != p.marginal.layout() {
        return Err(OracleError::Invalid(
            "process and strategy layouts differ".into(),
        ));
    }
    let pm = pur.as_matrix();
    Ok(linalg::transpose(&pm) * x.matrix() * linalg::conj(&pm))
}

/// Output state `P * C` on the global future.
pub fn output_state(p: &StrategyChoi, choi: &LabeledMatrix) -> Result<CMat, OracleError> {
    let p = purified(p)?;
    Ok(linalg::hermitize(&contract(&p, choi)?))
}

/// `(ρ, ρ̇)` from the Choi operator and its analytic derivative.
pub fn output_state_with_derivative(
    p: &StrategyChoi,
    fc: &FactorizedComb,
) -> Result<(CMat, CMat), OracleError> {
    let p = purified(p)?;
    let rho = contract(&p, &fc.choi())?;
    let drho = contract(&p, &fc.dchoi())?;
    Ok((linalg::hermitize(&rho), linalg::hermitize(&drho)))
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub j_sld: f64,
    pub lambda_claimed: f64,
    /// `|J_sld − λ| / max(λ, 1e-6)`.
    pub gap: f64,
    pub oracle: OracleReport,
}

fn finish(oracle: OracleReport, lambda: f64) -> VerifyReport {
    let gap = (oracle.j_sld - lambda).abs() / lambda.max(1e-6);
    VerifyReport {
        j_sld: oracle.j_sld,
        lambda_claimed: lambda,
        gap,
        oracle,
    }
}

/// Oracle QFI of a strategy on the process `fc` with analytic derivatives.
pub fn verify_strategy(
    p: &StrategyChoi,
    fc: &FactorizedComb,
    lambda: f64,
) -> Result<VerifyReport, OracleError> {
    let (rho, drho) = output_state_with_derivative(p, fc)?;
    Ok(finish(
        state_qfi_sld_with(&rho, &drho, DerivativeMethod::Analytic)?,
        lambda,
    ))
}

/// Oracle QFI from Choi operators of the family at `φ` and `φ ± δ`, `φ ± 2δ`.
pub fn verify_strategy_family<E>(
    p: &StrategyChoi,
    family: impl Fn(f64) -> Result<LabeledMatrix, E>,
    phi: f64,
    lambda: f64,
) -> Result<VerifyReport, OracleError>
where
    OracleError: From<E>,
{
    let p = purified(p)?;
    let rho = contract(&p, &family(phi)?)?;
    let err = std::cell::RefCell::new(None);
    let drho = richardson_derivative(
        |t| match family(t)
            .map_err(OracleError::from)
            .and_then(|c| contract(&p, &c))
        {
            Ok(m) => m,
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                linalg::zeros(rho.nrows(), rho.ncols())
            }
        },
        phi,
        FD_STEP,
    );
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    let oracle = state_qfi_sld_with(
        &linalg::hermitize(&rho),
        &linalg::hermitize(&drho),
        DerivativeMethod::FiniteDifference,
    )?;
    Ok(finish(oracle, lambda))
}
