//! Task QFI of a parametrized comb over a strategy family, as one semidefinite program.
//!
//! Each branch contributes a block `[[λ/4·I_r, W̄†], [W̄, Q^i]]` with `W̄ = conj(𝐂̇ − i𝐂h)`
//! and `Q^i` in the branch's dual space. `λ` and the gauge `h` are shared free variables.

use crate::comb_algebra::{choi_from_kraus_labeled, CombError, FactorizedComb, KrausChannel};
use crate::linalg::{self, c64, CMat, I, ONE, ZERO};
use crate::sdp_engine::{self, entry_functional, SdpProblem, SdpSettings, SdpStatus, Sense};
use crate::strategy_spaces::{dual_space, label, StrategySetSpec};
use crate::tensor_algebra::{self as ta, LabeledMatrix, SparseOp, SubsystemLayout};
use faer::Mat;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QfiError {
    #[error(transparent)]
    Comb(#[from] CombError),
    #[error(transparent)]
    Tensor(#[from] crate::tensor_algebra::TensorError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("solver stopped with status {status:?} (gap {gap:.3e}, primal residual {pinf:.3e}, dual residual {dinf:.3e})")]
    Solver {
        status: SdpStatus,
        gap: f64,
        pinf: f64,
        dinf: f64,
    },
    #[error("malformed problem: {0}")]
    Problem(#[from] sdp_engine::SdpError),
}

/// Hermitian `r×r` gauge generator.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianGauge(pub CMat);

impl HermitianGauge {
    pub fn zero(r: usize) -> Self {
        Self(linalg::zeros(r, r))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverStats {
    pub status: SdpStatus,
    pub iterations: usize,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Smallest eigenvalue over branches of `λQ^i − Ω(h_opt)`.
    pub recheck_min_eig: f64,
}

#[derive(Clone, Debug)]
pub struct QfiResult {
    pub value: f64,
    pub h_opt: HermitianGauge,
    pub q_opt: Vec<LabeledMatrix>,
    pub strategy_set: StrategySetSpec,
    pub stats: SolverStats,
    /// Branch strategies read off the dual slack, normalized to total trace `Π d_{2i}`.
    pub dual_strategies: Vec<LabeledMatrix>,
    /// Comb after rank reduction and layout alignment; `h_opt` refers to its columns.
    pub comb: FactorizedComb,
}

#[derive(Clone, Copy, Debug)]
pub struct QfiSettings {
    pub sdp: SdpSettings,
}

impl Default for QfiSettings {
    fn default() -> Self {
        Self {
            sdp: SdpSettings {
                gap_tol: 1e-9,
                feas_tol: 1e-9,
                max_iter: 200,
            },
        }
    }
}

/// `𝐂̇ − i𝐂h`.
fn shifted(fc: &FactorizedComb, h: &HermitianGauge) -> Result<CMat, QfiError> {
    if h.dim() != fc.rank() {
        return Err(QfiError::Dimension(format!(
            "gauge is {}x{}, comb rank is {}",
            h.dim(),
            h.dim(),
            fc.rank()
        )));
    }
    Ok(fc.dvectors() - linalg::scale(&(fc.vectors() * &h.0), I))
}

/// `Ω = 4[(𝐂̇ − i𝐂h)(𝐂̇ − i𝐂h)†]ᵀ`.
pub fn performance_operator(
    fc: &FactorizedComb,
    h: &HermitianGauge,
) -> Result<LabeledMatrix, QfiError> {
    let w = linalg::conj(&shifted(fc, h)?);
    let omega = linalg::scale_re(&(&w * w.adjoint()), 4.0);
    Ok(LabeledMatrix::hermitian(fc.layout().clone(), omega)?)
}

/// `[[λ/4·I_r, W̄†], [W̄, Q]]` with `W̄ = conj(𝐂̇ − i𝐂h)`, as a single-factor matrix.
pub fn schur_block(
    lambda: f64,
    fc: &FactorizedComb,
    h: &HermitianGauge,
    q: &LabeledMatrix,
) -> Result<LabeledMatrix, QfiError> {
    let w = linalg::conj(&shifted(fc, h)?);
    let r = fc.rank();
    let d = fc.dim();
    if q.dim() != d {
        return Err(QfiError::Dimension(format!(
            "Q is {}-dimensional, comb is {d}-dimensional",
            q.dim()
        )));
    }
    let qm = q.matrix();
    let m = Mat::from_fn(r + d, r + d, |i, j| match (i < r, j < r) {
        (true, true) => {
            if i == j {
                linalg::cr(lambda / 4.0)
            } else {
                ZERO
            }
        }
        (true, false) => w[(j - r, i)].conj(),
        (false, true) => w[(i - r, j)],
        (false, false) => qm[(i - r, j - r)],
    });
    let layout = SubsystemLayout::new([("schur", r + d)])?;
    Ok(LabeledMatrix::new(layout, m)?)
}

/// `E^{⊗N}` on labels `1..2N` with product-rule derivatives, without rank reduction.
pub fn product_comb(ch: &KrausChannel, n: usize) -> Result<FactorizedComb, QfiError> {
    if n == 0 {
        return Err(QfiError::Dimension("N must be at least 1".into()));
    }
    let mut fc = choi_from_kraus_labeled(ch, &label(1), &label(2))?.0;
    for k in 1..n {
        let next = choi_from_kraus_labeled(ch, &label(2 * k + 1), &label(2 * k + 2))?.0;
        fc = fc.tensor(&next)?;
    }
    Ok(fc)
}

/// Reorders the rows of `fc` into `target`'s factor order.
pub fn align(fc: &FactorizedComb, target: &SubsystemLayout) -> Result<FactorizedComb, QfiError> {
    if fc.layout() == target {
        return Ok(fc.clone());
    }
    let mut mine: Vec<(String, usize)> = fc.layout().factors().to_vec();
    let mut theirs: Vec<(String, usize)> = target.factors().to_vec();
    mine.sort();
    theirs.sort();
    if mine != theirs {
        return Err(QfiError::Dimension(
            "comb layout does not match the strategy family".into(),
        ));
    }
    let remap = |m: &CMat| -> Result<CMat, QfiError> {
        let mut out = linalg::zeros(m.nrows(), m.ncols());
        for c in 0..m.ncols() {
            let v = ta::permute_vector(&linalg::column(m, c), fc.layout(), target)?;
            for (i, x) in v.into_iter().enumerate() {
                out[(i, c)] = x;
            }
        }
        Ok(out)
    };
    Ok(FactorizedComb::new(
        target.clone(),
        remap(fc.vectors())?,
        remap(fc.dvectors())?,
    )?)
}

/// Hermitian basis `τ_k` of `r×r` matrices: `E_pp`, `E_pq + E_qp`, `i(E_pq − E_qp)`.
pub fn gauge_basis(r: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(r * r);
    for p in 0..r {
        for q in p..r {
            if p == q {
                let mut e = linalg::zeros(r, r);
                e[(p, p)] = ONE;
                out.push(e);
            } else {
                let mut e = linalg::zeros(r, r);
                e[(p, q)] = ONE;
                e[(q, p)] = ONE;
                out.push(e);
                let mut f = linalg::zeros(r, r);
                f[(p, q)] = I;
                f[(q, p)] = -I;
                out.push(f);
            }
        }
    }
    out
}

fn shift_op(op: &SparseOp, off: usize) -> SparseOp {
    op.iter().map(|&(i, j, v)| (i + off, j + off, v)).collect()
}

/// Builds the program; free variable 0 is `λ`, then the gauge coordinates.
pub fn build_problem(fc: &FactorizedComb, spec: &StrategySetSpec) -> Result<SdpProblem, QfiError> {
    let r = fc.rank();
    let d = fc.dim();
    let duals = dual_space(spec);
    let basis = gauge_basis(r);
    let mut p = SdpProblem::new(Sense::Min);
    let lam = p.add_free(1.0);
    let hvars: Vec<usize> = basis.iter().map(|_| p.add_free(0.0)).collect();

    // W̄ = conj(𝐂̇) + Σ_k h_k · i·conj(𝐂 τ_k).
    let w0 = linalg::conj(fc.dvectors());
    let g: Vec<CMat> = basis
        .iter()
        .map(|t| linalg::scale(&linalg::conj(&(fc.vectors() * t)), I))
        .collect();

    for space in &duals {
        let blk = p.add_block(r + d);
        for a in 0..r {
            for b in a..r {
                if a == b {
                    p.add_row(blk, entry_functional(a, a, true), vec![(lam, -0.25)], 0.0);
                } else {
                    p.add_row(blk, entry_functional(a, b, true), vec![], 0.0);
                    p.add_row(blk, entry_functional(a, b, false), vec![], 0.0);
                }
            }
        }
        for a in 0..d {
            for c in 0..r {
                for re in [true, false] {
                    let part = |z: c64| if re { z.re } else { z.im };
                    let free: Vec<(usize, f64)> = hvars
                        .iter()
                        .zip(&g)
                        .map(|(&k, gk)| (k, -part(gk[(a, c)])))
                        .filter(|(_, x)| *x != 0.0)
                        .collect();
                    p.add_row(blk, entry_functional(r + a, c, re), free, part(w0[(a, c)]));
                }
            }
        }
        let rows = space
            .rows()
            .ok_or_else(|| QfiError::Dimension("dual space has no row description".into()))?;
        for (op, rhs) in rows {
            p.add_row(blk, shift_op(&op, r), vec![], rhs);
        }
    }
    Ok(p)
}

/// Minimizer of `h ↦ Tr[P̃ Ω(h)]` near `h0`.
///
/// Stationarity reads `Gh + hG = −i(B − B†)` with `G = 𝐂†P̃ᵀ𝐂`, `B = 𝐂†P̃ᵀ𝐂̇`;
/// components on the kernel of `G` keep their value from `h0`.
pub fn polish_gauge(fc: &FactorizedComb, marginal: &CMat, h0: &CMat) -> CMat {
    let a = linalg::transpose(marginal);
    let ca = fc.vectors().adjoint() * &a;
    let g = linalg::hermitize(&(&ca * fc.vectors()));
    let b = &ca * fc.dvectors();
    let k = linalg::scale(&(&b - b.adjoint()), -I);
    let (gam, v) = linalg::eigh(&g);
    let gmax = gam.iter().fold(0.0f64, |x, &y| x.max(y.abs()));
    let kt = v.adjoint() * k * &v;
    let h0t = v.adjoint() * h0 * &v;
    let r = gam.len();
    let ht = Mat::from_fn(r, r, |i, j| {
        let s = gam[i] + gam[j];
        if s > 1e-9 * gmax {
            kt[(i, j)] / s
        } else {
            h0t[(i, j)]
        }
    });
    linalg::hermitize(&(&v * ht * v.adjoint()))
}

/// Solves for the task QFI of `fc` over the family `spec`.
pub fn task_qfi(fc: &FactorizedComb, spec: &StrategySetSpec) -> Result<QfiResult, QfiError> {
    task_qfi_with(fc, spec, &QfiSettings::default())
}

pub fn task_qfi_with(
    fc: &FactorizedComb,
    spec: &StrategySetSpec,
    settings: &QfiSettings,
) -> Result<QfiResult, QfiError> {
    let layout = spec.layout();
    let fc = align(fc, &layout)?.reduced()?;
    let r = fc.rank();
    let d = fc.dim();
    let problem = build_problem(&fc, spec)?;
    let sol = sdp_engine::solve(&problem, &settings.sdp)?;
    let acceptable = sol.is_optimal()
        || (sol.status == SdpStatus::NumericalLimit
            && sol.gap <= 1e-7
            && sol.primal_residual <= 1e-7
            && sol.dual_residual <= 1e-7);
    if !acceptable {
        return Err(QfiError::Solver {
            status: sol.status,
            gap: sol.gap,
            pinf: sol.primal_residual,
            dinf: sol.dual_residual,
        });
    }
    let value = sol.u[0].max(0.0);
    let basis = gauge_basis(r);
    let mut h = linalg::zeros(r, r);
    for (k, t) in basis.iter().enumerate() {
        h = &h + linalg::scale_re(t, sol.u[1 + k]);
    }
    let sub = |m: &CMat| Mat::from_fn(d, d, |i, j| m[(r + i, r + j)]);
    let raw: Vec<CMat> = sol.s.iter().map(|s| linalg::hermitize(&sub(s))).collect();
    let total: f64 = raw.iter().map(|m| linalg::trace(m).re).sum();
    let target = spec.output_product();
    let dual_strategies = raw
        .into_iter()
        .map(|m| {
            LabeledMatrix::hermitian(
                layout.clone(),
                linalg::scale_re(&m, if total > 0.0 { target / total } else { 0.0 }),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let h_opt = HermitianGauge(linalg::hermitize(&h));
    let omega = performance_operator(&fc, &h_opt)?;
    let mut q_opt = Vec::new();
    let mut recheck = f64::INFINITY;
    for x in &sol.x {
        let q = LabeledMatrix::hermitian(layout.clone(), sub(x))?;
        let gapm = linalg::scale_re(q.matrix(), sol.u[0]) - omega.matrix();
        recheck = recheck.min(linalg::min_eig(&gapm));
        q_opt.push(q);
    }
    Ok(QfiResult {
        value,
        h_opt,
        q_opt,
        strategy_set: spec.clone(),
        stats: SolverStats {
            status: sol.status,
            iterations: sol.iterations,
            gap: sol.gap,
            primal_residual: sol.primal_residual,
            dual_residual: sol.dual_residual,
            recheck_min_eig: recheck,
        },
        dual_strategies,
        comb: fc,
    })
}
