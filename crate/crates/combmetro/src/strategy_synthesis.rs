//! Optimal strategies for a solved task, their purifications, and isometry
//! decompositions of definite-order combs.
//!
//! The saddle program maximizes `Tr[P̃ Ω(h_opt)]` over the primal family with the
//! extra linear condition that `𝐂†P̃ᵀ(𝐂̇ − i𝐂h_opt)` is Hermitian.

use crate::comb_algebra::{purify, CombError, FactorizedComb};
use crate::linalg::{self, c64, CMat, I, ZERO};
use crate::sdp_engine::{self, SdpError, SdpProblem, SdpSettings, SdpStatus, Sense};
use crate::strategy_spaces::{
    lift, primal_space, AffineSpace, Parametrization, StrategyKind, StrategySetSpec,
};
use crate::task_qfi::{
    align, performance_operator, polish_gauge, HermitianGauge, QfiError, QfiResult,
};
use crate::tensor_algebra::{LabeledMatrix, ProductBasis, SparseOp, SubsystemLayout, TensorError};
use faer::Mat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative eigenvalue cutoff for supports and pseudo-inverses.
const SUPPORT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Qfi(#[from] QfiError),
    #[error(transparent)]
    Comb(#[from] CombError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(
        "no saddle-point strategy: objective {objective:.10} vs λ {lambda:.10}, saddle residual {saddle:.3e}, membership residual {membership:.3e}"
    )]
    SaddleMismatch {
        objective: f64,
        lambda: f64,
        saddle: f64,
        membership: f64,
    },
    #[error("invalid comb: {0}")]
    InvalidComb(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("malformed strategy document: {0}")]
    Format(String),
}

/// One query order of a multi-order strategy, `P̃ = Σ_π q^π P^π`.
#[derive(Clone, Debug)]
pub struct Branch {
    pub order: Vec<usize>,
    pub weight: f64,
    /// Normalized to trace `Π d_{2i}`.
    pub operator: LabeledMatrix,
}

/// Purification vector on `system ⊗ future`.
#[derive(Clone, Debug)]
pub struct Purification {
    /// System labels in strategy order, then the future factors.
    pub layout: SubsystemLayout,
    pub future: Vec<String>,
    pub vector: Vec<c64>,
}

impl Purification {
    pub fn future_dim(&self) -> usize {
        self.future
            .iter()
            .map(|l| self.layout.dim_of(l).expect("future label present"))
            .product()
    }

    /// `|P⟩` reshaped to a `D × dim F` matrix.
    pub fn as_matrix(&self) -> CMat {
        let f = self.future_dim();
        let d = self.vector.len() / f;
        Mat::from_fn(d, f, |i, j| self.vector[i * f + j])
    }
}

#[derive(Clone, Debug)]
pub struct StrategyChoi {
    pub spec: StrategySetSpec,
    pub marginal: LabeledMatrix,
    pub branches: Vec<Branch>,
    pub purification: Option<Purification>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    SaddleProgram,
    DualSlack,
}

/// Figures of merit for both synthesis routes; the chosen one comes first.
#[derive(Clone, Debug, Serialize)]
pub struct SynthesisReport {
    pub route: Route,
    pub lambda: f64,
    pub objective: f64,
    pub saddle_residual: f64,
    pub membership_residual: f64,
    /// `(objective, saddle residual)` of the other route, when it produced a candidate.
    pub alternate: Option<(f64, f64)>,
    pub solver_status: Option<SdpStatus>,
    /// Gauge the saddle condition refers to.
    #[serde(skip)]
    pub gauge: HermitianGauge,
    /// True when `gauge` is the stationary point against the dual-slack strategy rather than the solver's `h`.
    pub gauge_polished: bool,
}

#[derive(Clone, Debug)]
pub struct Synthesis {
    pub strategy: StrategyChoi,
    pub report: SynthesisReport,
}

/// `𝐂†Pᵀ𝐖` for sparse `P`.
fn saddle_matrix_sparse(op: &SparseOp, c: &CMat, w: &CMat) -> CMat {
    let mut ptw = linalg::zeros(w.nrows(), w.ncols());
    for &(r, col, v) in op {
        for k in 0..w.ncols() {
            ptw[(col, k)] += v * w[(r, k)];
        }
    }
    c.adjoint() * ptw
}

fn shifted(fc: &FactorizedComb, h: &HermitianGauge) -> Result<CMat, SynthesisError> {
    if h.dim() != fc.rank() {
        return Err(SynthesisError::Dimension(format!(
            "gauge is {0}x{0}, comb rank is {1}",
            h.dim(),
            fc.rank()
        )));
    }
    Ok(fc.dvectors() - linalg::scale(&(fc.vectors() * &h.0), I))
}

/// `‖M − M†‖_F` for `M = 𝐂†P̃ᵀ(𝐂̇ − i𝐂h)`.
pub fn saddle_residual(
    p: &LabeledMatrix,
    fc: &FactorizedComb,
    h: &HermitianGauge,
) -> Result<f64, SynthesisError> {
    let fc = align(fc, p.layout())?;
    let w = shifted(&fc, h)?;
    let m = fc.vectors().adjoint() * linalg::transpose(p.matrix()) * w;
    Ok(linalg::frob(&(&m - m.adjoint())))
}

/// Real functionals of an anti-Hermitian `r×r` matrix: `Im A_pp`, `Re A_pq`, `Im A_pq` for `p < q`.
fn antihermitian_parts(a: &CMat) -> Vec<f64> {
    let r = a.nrows();
    let mut out = Vec::with_capacity(r * r);
    for p in 0..r {
        out.push(a[(p, p)].im);
        for q in p + 1..r {
            out.push(a[(p, q)].re);
            out.push(a[(p, q)].im);
        }
    }
    out
}

/// Elements spanning one branch of the primal family.
struct BranchBasis {
    /// Block dimension.
    n: usize,
    /// Sparse operators on the block.
    ops: Vec<SparseOp>,
    /// Maps a block operator to the full strategy operator.
    embed: Embed,
}

enum Embed {
    Identity,
    Lifted {
        first: String,
        rest: LabeledMatrix,
        layout: SubsystemLayout,
    },
}

impl BranchBasis {
    fn new(space: &AffineSpace) -> Result<Self, SynthesisError> {
        match space.parametrization() {
            Some(Parametrization::Coordinates(sup)) => {
                let ids = std::iter::once(0).chain(sup.free.iter().copied());
                let ops = ids.map(|id| sup.basis.element(id)).collect();
                Ok(Self {
                    n: sup.basis.total_dim(),
                    ops,
                    embed: Embed::Identity,
                })
            }
            Some(Parametrization::Lifted { first, rest, .. }) => {
                let d = space.layout.dim_of(&first)?;
                let basis = ProductBasis::new(&SubsystemLayout::new([(first.as_str(), d)])?);
                let ops = (0..basis.len()).map(|id| basis.element(id)).collect();
                Ok(Self {
                    n: d,
                    ops,
                    embed: Embed::Lifted {
                        first,
                        rest,
                        layout: space.layout.clone(),
                    },
                })
            }
            None => Err(SynthesisError::Dimension(
                "primal family has no parametrization".into(),
            )),
        }
    }

    fn full(&self, block: &CMat) -> CMat {
        match &self.embed {
            Embed::Identity => block.clone(),
            Embed::Lifted {
                first,
                rest,
                layout,
            } => lift(block, first, rest, layout).into_matrix(),
        }
    }

    fn full_sparse(&self, op: &SparseOp) -> SparseOp {
        match &self.embed {
            Embed::Identity => op.clone(),
            Embed::Lifted { .. } => {
                let mut m = linalg::zeros(self.n, self.n);
                for &(r, c, v) in op {
                    m[(r, c)] += v;
                }
                sdp_engine::sparse_from_dense(&self.full(&m), 0.0)
            }
        }
    }
}

fn sparse_trace(op: &SparseOp) -> f64 {
    op.iter().filter(|e| e.0 == e.1).map(|e| e.2.re).sum()
}

/// `Re Tr(σ Ω)`.
fn sparse_pairing(op: &SparseOp, omega: &CMat) -> f64 {
    op.iter().map(|&(r, c, v)| (v * omega[(c, r)]).re).sum()
}

/// Branch operators of the saddle program, unnormalized, with the solver status.
fn saddle_program(
    fc: &FactorizedComb,
    spaces: &[AffineSpace],
    omega: &CMat,
    w: &CMat,
    total: f64,
    settings: &SdpSettings,
) -> Result<(Vec<CMat>, SdpStatus), SynthesisError> {
    let r = fc.rank();
    let bases = spaces
        .iter()
        .map(BranchBasis::new)
        .collect::<Result<Vec<_>, _>>()?;
    let mut p = SdpProblem::new(Sense::Min);
    let tr_var = p.add_free(total);
    let saddle_vars: Vec<usize> = (0..r * r).map(|_| p.add_free(0.0)).collect();
    for b in &bases {
        let blk = p.add_block(b.n);
        for op in &b.ops {
            let full = b.full_sparse(op);
            let mut free = vec![(tr_var, sparse_trace(&full))];
            let parts = antihermitian_parts(&{
                let m = saddle_matrix_sparse(&full, fc.vectors(), w);
                &m - m.adjoint()
            });
            free.extend(
                saddle_vars
                    .iter()
                    .zip(parts)
                    .filter(|(_, x)| x.abs() > 1e-14)
                    .map(|(&k, x)| (k, x)),
            );
            free.retain(|(_, x)| *x != 0.0);
            let neg: SparseOp = op.iter().map(|&(i, j, v)| (i, j, -v)).collect();
            p.add_row(blk, neg, free, sparse_pairing(&full, omega));
        }
    }
    let sol = sdp_engine::solve(&p, settings)?;
    let ok = sol.is_optimal()
        || (sol.status == SdpStatus::NumericalLimit
            && sol.gap <= 1e-6
            && sol.dual_residual <= 1e-7);
    if !ok {
        return Err(QfiError::Solver {
            status: sol.status,
            gap: sol.gap,
            pinf: sol.primal_residual,
            dinf: sol.dual_residual,
        }
        .into());
    }
    let ops = bases
        .iter()
        .zip(&sol.s)
        .map(|(b, s)| b.full(&linalg::hermitize(s)))
        .collect();
    Ok((ops, sol.status))
}

struct Candidate {
    ops: Vec<CMat>,
    objective: f64,
    saddle: f64,
    membership: f64,
}

fn assess(
    mut ops: Vec<CMat>,
    spaces: &[AffineSpace],
    fc: &FactorizedComb,
    omega: &CMat,
    w: &CMat,
    total: f64,
) -> Candidate {
    let t: f64 = ops.iter().map(|m| linalg::trace(m).re).sum();
    if t > 0.0 {
        ops = ops.iter().map(|m| linalg::scale_re(m, total / t)).collect();
    }
    let sum = ops.iter().skip(1).fold(ops[0].clone(), |a, b| &a + b);
    let objective = linalg::inner_re(&sum, omega);
    let m = fc.vectors().adjoint() * linalg::transpose(&sum) * w;
    let saddle = linalg::frob(&(&m - m.adjoint()));
    let membership = ops
        .iter()
        .zip(spaces)
        .map(|(op, sp)| {
            let tr = linalg::trace(op).re;
            if tr <= 0.0 {
                return 0.0;
            }
            let scaled = linalg::scale_re(op, sp.trace().unwrap_or(total) / tr);
            sp.residual(&scaled)
        })
        .fold(0.0, f64::max);
    Candidate {
        ops,
        objective,
        saddle,
        membership,
    }
}

/// Saddle-point strategy for a solved task; falls back to the dual slack of the task program.
pub fn optimal_strategy(
    fc: &FactorizedComb,
    spec: &StrategySetSpec,
    result: &QfiResult,
) -> Result<Synthesis, SynthesisError> {
    optimal_strategy_with(
        fc,
        spec,
        result,
        &SdpSettings {
            gap_tol: 1e-9,
            feas_tol: 1e-9,
            max_iter: 200,
        },
    )
}

pub fn optimal_strategy_with(
    fc: &FactorizedComb,
    spec: &StrategySetSpec,
    result: &QfiResult,
    settings: &SdpSettings,
) -> Result<Synthesis, SynthesisError> {
    if *spec != result.strategy_set {
        return Err(SynthesisError::Dimension(
            "result was computed for a different strategy family".into(),
        ));
    }
    let layout = spec.layout();
    let comb = &result.comb;
    let given = align(fc, &layout)?;
    let drift = linalg::frob(&(given.choi().matrix() - comb.choi().matrix()));
    if drift > 1e-8 * linalg::frob(comb.choi().matrix()).max(1.0) {
        return Err(SynthesisError::Dimension(format!(
            "comb differs from the solved one by {drift:.3e}"
        )));
    }
    let lambda = result.value;
    let spaces = primal_space(spec);
    let total = spec.output_product();
    let obj_tol = 1e-5 * lambda.max(1e-3);
    let passes = |c: &Candidate| {
        (c.objective - lambda).abs() <= obj_tol && c.saddle <= 1e-6 && c.membership <= 1e-7
    };
    let slack: Vec<CMat> = result
        .dual_strategies
        .iter()
        .map(|m| m.matrix().clone())
        .collect();

    let mut last: Option<Candidate> = None;
    let mut found = None;
    let mut gauges = vec![(result.h_opt.clone(), false)];
    let slack_sum = slack.iter().skip(1).fold(slack[0].clone(), |a, b| &a + b);
    gauges.push((
        HermitianGauge(polish_gauge(comb, &slack_sum, &result.h_opt.0)),
        true,
    ));
    for (h, polished) in gauges {
        let omega = performance_operator(comb, &h)?.into_matrix();
        let w = shifted(comb, &h)?;
        let primary = saddle_program(comb, &spaces, &omega, &w, total, settings)
            .map(|(ops, status)| (assess(ops, &spaces, comb, &omega, &w, total), status));
        let fallback = assess(slack.clone(), &spaces, comb, &omega, &w, total);
        let pick = match primary {
            Ok((c, status)) if passes(&c) => {
                let alt = Some((fallback.objective, fallback.saddle));
                Some((c, Route::SaddleProgram, alt, Some(status)))
            }
            Ok((c, status)) if passes(&fallback) => {
                let alt = Some((c.objective, c.saddle));
                Some((fallback, Route::DualSlack, alt, Some(status)))
            }
            Err(_) if passes(&fallback) => Some((fallback, Route::DualSlack, None, None)),
            Ok((c, _)) => {
                last = Some(c);
                None
            }
            Err(_) => {
                last = Some(fallback);
                None
            }
        };
        if let Some(p) = pick {
            found = Some((p, h, polished));
            break;
        }
    }
    let Some(((chosen, route, alternate, status), gauge, polished)) = found else {
        let c = last.expect("at least one gauge tried");
        return Err(SynthesisError::SaddleMismatch {
            objective: c.objective,
            lambda,
            saddle: c.saddle,
            membership: c.membership,
        });
    };

    let strategy = strategy_from_branches(spec, &layout, chosen.ops, total)?;
    Ok(Synthesis {
        strategy,
        report: SynthesisReport {
            route,
            lambda,
            objective: chosen.objective,
            saddle_residual: chosen.saddle,
            membership_residual: chosen.membership,
            alternate,
            solver_status: status,
            gauge,
            gauge_polished: polished,
        },
    })
}

fn strategy_from_branches(
    spec: &StrategySetSpec,
    layout: &SubsystemLayout,
    ops: Vec<CMat>,
    total: f64,
) -> Result<StrategyChoi, SynthesisError> {
    let sum = ops.iter().skip(1).fold(ops[0].clone(), |a, b| &a + b);
    let marginal = LabeledMatrix::hermitian(layout.clone(), sum)?;
    let branches = if matches!(spec.kind, StrategyKind::Swi | StrategyKind::Sup) {
        spec.branches()
            .into_iter()
            .zip(ops)
            .map(|(order, op)| {
                let t = linalg::trace(&op).re.max(0.0);
                let weight = t / total;
                let operator = if t > 0.0 {
                    linalg::scale_re(&op, total / t)
                } else {
                    op
                };
                Ok(Branch {
                    order,
                    weight,
                    operator: LabeledMatrix::hermitian(layout.clone(), operator)?,
                })
            })
            .collect::<Result<Vec<_>, SynthesisError>>()?
    } else {
        Vec::new()
    };
    Ok(StrategyChoi {
        spec: spec.clone(),
        marginal,
        branches,
        purification: None,
    })
}

/// Fills the purification: any purification of `P̃` for one-branch families, and
/// `Σ_π √q^π |P^π⟩|π⟩_C` with private branch futures for multi-branch ones.
pub fn purify_strategy(s: &StrategyChoi) -> Result<StrategyChoi, SynthesisError> {
    let layout = s.marginal.layout().clone();
    let mut out = s.clone();
    if s.branches.is_empty() {
        let (vector, f) = purify(&s.marginal)?;
        let mut factors = layout.factors().to_vec();
        factors.push(("F".into(), f));
        out.purification = Some(Purification {
            layout: SubsystemLayout::new(factors)?,
            future: vec!["F".into()],
            vector,
        });
        return Ok(out);
    }
    let parts = s
        .branches
        .iter()
        .map(|b| {
            if b.weight > 0.0 {
                purify(&b.operator).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let f = parts.iter().flatten().map(|(_, f)| *f).max().unwrap_or(1);
    let k = s.branches.len();
    let d = layout.total_dim();
    let mut vector = vec![ZERO; d * f * k];
    for (c, (b, part)) in s.branches.iter().zip(&parts).enumerate() {
        let Some((psi, fb)) = part else { continue };
        let amp = b.weight.sqrt();
        for i in 0..d {
            for j in 0..*fb {
                vector[(i * f + j) * k + c] = psi[i * fb + j] * amp;
            }
        }
    }
    let mut factors = layout.factors().to_vec();
    factors.push(("F".into(), f));
    factors.push(("C".into(), k));
    out.purification = Some(Purification {
        layout: SubsystemLayout::new(factors)?,
        future: vec!["F".into(), "C".into()],
        vector,
    });
    Ok(out)
}

/// One isometry `V: in ⊗ A_{k-1} → out ⊗ A_k`; an empty label is a trivial space.
#[derive(Clone, Debug)]
pub struct IsometryStep {
    pub input: (String, usize),
    pub output: (String, usize),
    pub ancilla_in: usize,
    pub ancilla_out: usize,
    /// Rows `out·ancilla_out + b`, columns `in·ancilla_in + a`.
    pub matrix: CMat,
}

impl IsometryStep {
    /// `‖V†V − I‖_F`.
    pub fn isometry_defect(&self) -> f64 {
        let g = self.matrix.adjoint() * &self.matrix;
        linalg::frob(&(g - linalg::identity(self.matrix.ncols())))
    }
}

#[derive(Clone, Debug)]
pub struct IsometrySequence {
    pub steps: Vec<IsometryStep>,
}

impl IsometrySequence {
    pub fn ancilla_dims(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.ancilla_out).collect()
    }
}

/// Partial trace over the trailing factor of dimension `t`.
fn trace_trailing(m: &CMat, t: usize) -> CMat {
    let n = m.nrows() / t;
    Mat::from_fn(n, n, |i, j| (0..t).map(|k| m[(i * t + k, j * t + k)]).sum())
}

/// Support of a PSD matrix: `(eigenvalues, eigenvectors)` above the relative cutoff.
fn support(m: &CMat) -> (Vec<f64>, CMat) {
    let (w, u) = linalg::eigh(m);
    let wmax = w.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let keep: Vec<usize> = (0..w.len())
        .rev()
        .filter(|&k| w[k] > SUPPORT_TOL * wmax)
        .collect();
    let vals = keep.iter().map(|&k| w[k]).collect();
    let vecs = Mat::from_fn(m.nrows(), keep.len(), |i, j| u[(i, keep[j])]);
    (vals, vecs)
}

fn pair_dim(layout: &SubsystemLayout, label: &str) -> Result<usize, SynthesisError> {
    if label.is_empty() {
        Ok(1)
    } else {
        Ok(layout.dim_of(label)?)
    }
}

/// `V(V†V)^{-1/2}`; removes round-off amplified by small pseudo-inverse eigenvalues.
fn polar(v: &CMat) -> CMat {
    let g = linalg::hermitize(&(v.adjoint() * v));
    let (w, u) = linalg::eigh(&g);
    let n = w.len();
    let inv = Mat::from_fn(n, n, |i, j| {
        u[(i, j)] * linalg::cr(if w[j] > 0.0 { w[j].powf(-0.5) } else { 0.0 })
    });
    v * (inv * u.adjoint())
}

/// Isometries with minimal ancillas realizing the comb `c` for time-ordered `(in, out)` pairs.
pub fn comb_to_isometries<S: AsRef<str>>(
    c: &LabeledMatrix,
    io_pairs: &[(S, S)],
) -> Result<IsometrySequence, SynthesisError> {
    let layout = c.layout();
    let mut order: Vec<&str> = Vec::new();
    let mut dims = Vec::with_capacity(io_pairs.len());
    for (i, o) in io_pairs {
        let (i, o) = (i.as_ref(), o.as_ref());
        dims.push((pair_dim(layout, i)?, pair_dim(layout, o)?));
        order.extend([i, o].into_iter().filter(|l| !l.is_empty()));
    }
    if order.len() != layout.len() {
        return Err(SynthesisError::Dimension(
            "io pairs must cover every factor exactly once".into(),
        ));
    }
    let c = crate::tensor_algebra::permute(c, &order)?;
    let scale = linalg::frob(c.matrix()).max(1.0);
    let min_eig = linalg::min_eig(c.matrix());
    if min_eig < -1e-9 * scale {
        return Err(SynthesisError::InvalidComb(format!(
            "negative eigenvalue {min_eig:.3e}"
        )));
    }

    // C^(k) for k = N..0; C^(0) must be the scalar 1.
    let n = io_pairs.len();
    let mut tower = vec![linalg::zeros(1, 1); n + 1];
    tower[n] = c.matrix().clone();
    for k in (1..=n).rev() {
        let (di, dout) = dims[k - 1];
        let reduced = trace_trailing(&tower[k], dout);
        let prev = linalg::scale_re(&trace_trailing(&reduced, di), 1.0 / di as f64);
        let expect = linalg::kron(&prev, &linalg::identity(di));
        let res = linalg::frob(&(&reduced - &expect));
        if res > 1e-8 * scale {
            return Err(SynthesisError::InvalidComb(format!(
                "causality residual {res:.3e} at step {k}"
            )));
        }
        tower[k - 1] = prev;
    }
    if (tower[0][(0, 0)].re - 1.0).abs() > 1e-8 {
        return Err(SynthesisError::InvalidComb(format!(
            "normalization {:.6} instead of 1",
            tower[0][(0, 0)].re
        )));
    }

    let mut steps = Vec::with_capacity(n);
    let mut prev_pinv = Mat::from_fn(1, 1, |_, _| linalg::cr(1.0 / tower[0][(0, 0)].re.sqrt()));
    for k in 1..=n {
        let (di, dout) = dims[k - 1];
        let (vals, vecs) = support(&linalg::conj(&tower[k]));
        let rk = vals.len();
        let rprev = prev_pinv.ncols();
        let dprev = prev_pinv.nrows();
        // W_k = diag(√λ) U† maps the primed copy onto the ancilla coordinates.
        let wk = Mat::from_fn(rk, vecs.nrows(), |b, x| {
            vecs[(x, b)].conj() * vals[b].sqrt()
        });
        let mut v = linalg::zeros(dout * rk, di * rprev);
        for i in 0..di {
            for a in 0..rprev {
                for j in 0..dout {
                    for b in 0..rk {
                        let mut acc = ZERO;
                        for x in 0..dprev {
                            let p = prev_pinv[(x, a)];
                            if p != ZERO {
                                acc += wk[(b, (x * di + i) * dout + j)] * p;
                            }
                        }
                        v[(j * rk + b, i * rprev + a)] = acc;
                    }
                }
            }
        }
        let (ilab, olab) = (io_pairs[k - 1].0.as_ref(), io_pairs[k - 1].1.as_ref());
        let v = polar(&v);
        steps.push(IsometryStep {
            input: (ilab.to_string(), di),
            output: (olab.to_string(), dout),
            ancilla_in: rprev,
            ancilla_out: rk,
            matrix: v,
        });
        prev_pinv = Mat::from_fn(vecs.nrows(), rk, |x, b| vecs[(x, b)] / vals[b].sqrt());
    }
    Ok(IsometrySequence { steps })
}

/// Choi operator of the chained isometries with the final ancilla traced out.
pub fn isometries_to_comb(seq: &IsometrySequence) -> Result<LabeledMatrix, SynthesisError> {
    let mut psi = vec![linalg::cr(1.0)];
    let mut anc = 1;
    let mut factors: Vec<(String, usize)> = Vec::new();
    for (k, s) in seq.steps.iter().enumerate() {
        let (di, dout) = (s.input.1, s.output.1);
        if s.ancilla_in != anc
            || s.matrix.nrows() != dout * s.ancilla_out
            || s.matrix.ncols() != di * anc
        {
            return Err(SynthesisError::Dimension(format!(
                "step {} does not chain with its predecessor",
                k + 1
            )));
        }
        let sys = psi.len() / anc;
        let rk = s.ancilla_out;
        let mut next = vec![ZERO; sys * di * dout * rk];
        for x in 0..sys {
            for i in 0..di {
                for j in 0..dout {
                    for b in 0..rk {
                        let mut acc = ZERO;
                        for a in 0..anc {
                            acc += s.matrix[(j * rk + b, i * anc + a)] * psi[x * anc + a];
                        }
                        next[((x * di + i) * dout + j) * rk + b] = acc;
                    }
                }
            }
        }
        psi = next;
        anc = rk;
        for (l, d) in [&s.input, &s.output] {
            if !l.is_empty() {
                factors.push((l.clone(), *d));
            }
        }
    }
    let layout = SubsystemLayout::new(factors)?;
    let dim = psi.len() / anc;
    let m = Mat::from_fn(dim, anc, |i, b| psi[i * anc + b]);
    Ok(LabeledMatrix::hermitian(layout, &m * m.adjoint())?)
}

/// Time-ordered pairs of a strategy marginal for one query order: `(∅, in π1), (out π1, in π2), …, (out πN, ∅)`.
pub fn strategy_io_pairs(order: &[usize]) -> Vec<(String, String)> {
    let mut pairs = Vec::with_capacity(order.len() + 1);
    let mut prev = String::new();
    for &c in order {
        pairs.push((prev, (2 * c + 1).to_string()));
        prev = (2 * c + 2).to_string();
    }
    pairs.push((prev, String::new()));
    pairs
}

/// Isometry sequences of a synthesized strategy: one for definite-order families, one per branch otherwise.
pub fn strategy_isometries(
    s: &StrategyChoi,
) -> Result<Vec<(Vec<usize>, IsometrySequence)>, SynthesisError> {
    match s.spec.kind {
        StrategyKind::Par | StrategyKind::Seq => {
            let order = s.spec.branches().remove(0);
            let seq = comb_to_isometries(&s.marginal, &strategy_io_pairs(&order))?;
            Ok(vec![(order, seq)])
        }
        StrategyKind::Swi | StrategyKind::Sup => s
            .branches
            .iter()
            .filter(|b| b.weight > 0.0)
            .map(|b| {
                Ok((
                    b.order.clone(),
                    comb_to_isometries(&b.operator, &strategy_io_pairs(&b.order))?,
                ))
            })
            .collect(),
        _ => Err(SynthesisError::Dimension(format!(
            "{} strategies have no definite-order decomposition",
            s.spec.kind
        ))),
    }
}

/// Largest constraint violation of a strategy against its family.
pub fn membership_residual(s: &StrategyChoi) -> f64 {
    let spaces = primal_space(&s.spec);
    if s.branches.is_empty() {
        return spaces[0].residual(s.marginal.matrix());
    }
    let total = s.spec.output_product();
    let mut worst = 0.0f64;
    let mut sum = linalg::zeros(s.marginal.dim(), s.marginal.dim());
    for (b, sp) in s.branches.iter().zip(&spaces) {
        if b.weight > 0.0 {
            worst = worst.max(sp.residual(b.operator.matrix()));
        }
        sum = &sum + linalg::scale_re(b.operator.matrix(), b.weight);
    }
    let weights: f64 = s.branches.iter().map(|b| b.weight).sum();
    worst = worst.max((weights - 1.0).abs() * total);
    worst.max(linalg::frob(&(&sum - s.marginal.matrix())))
}

/// Largest total dimension a strategy document may declare.
const MAX_DOC_DIM: usize = 1 << 12;

/// Square matrix, entries row-major as `[re, im]` pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDoc {
    pub layout: SubsystemLayout,
    pub entries: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchDoc {
    pub order: Vec<usize>,
    pub weight: f64,
    pub operator: MatrixDoc,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PurificationDoc {
    pub layout: SubsystemLayout,
    pub future: Vec<String>,
    pub vector: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepDoc {
    pub input: (String, usize),
    pub output: (String, usize),
    pub ancilla_in: usize,
    pub ancilla_out: usize,
    /// Row-major, `output·ancilla_out` rows by `input·ancilla_in` columns.
    pub entries: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsometryChainDoc {
    pub order: Vec<usize>,
    pub steps: Vec<StepDoc>,
}

/// Versioned JSON form of a synthesized strategy.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyDoc {
    pub schema_version: u32,
    pub strategy_set: StrategySetSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub marginal: MatrixDoc,
    #[serde(default)]
    pub branches: Vec<BranchDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purification: Option<PurificationDoc>,
    #[serde(default)]
    pub isometries: Vec<IsometryChainDoc>,
}

/// A strategy read back from its document.
#[derive(Clone, Debug)]
pub struct ParsedStrategy {
    pub strategy: StrategyChoi,
    pub lambda: Option<f64>,
    pub isometries: Vec<(Vec<usize>, IsometrySequence)>,
}

fn pairs(m: &CMat) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    out
}

fn matrix_doc(m: &LabeledMatrix) -> MatrixDoc {
    MatrixDoc {
        layout: m.layout().clone(),
        entries: pairs(m.matrix()),
    }
}

fn format_err(msg: impl Into<String>) -> SynthesisError {
    SynthesisError::Format(msg.into())
}

fn checked_layout(l: &SubsystemLayout) -> Result<SubsystemLayout, SynthesisError> {
    let mut total: usize = 1;
    for (_, d) in l.factors() {
        total = total
            .checked_mul(*d)
            .filter(|&t| t <= MAX_DOC_DIM)
            .ok_or_else(|| format_err("declared dimension too large"))?;
    }
    Ok(SubsystemLayout::new(l.factors().to_vec())?)
}

fn dense(rows: usize, cols: usize, entries: &[[f64; 2]]) -> Result<CMat, SynthesisError> {
    if entries.len() != rows * cols {
        return Err(format_err(format!(
            "expected {} entries, found {}",
            rows * cols,
            entries.len()
        )));
    }
    if entries.iter().flatten().any(|x| !x.is_finite()) {
        return Err(format_err("non-finite entry"));
    }
    Ok(Mat::from_fn(rows, cols, |i, j| {
        let [re, im] = entries[i * cols + j];
        c64::new(re, im)
    }))
}

fn read_matrix(
    doc: &MatrixDoc,
    expected: &SubsystemLayout,
) -> Result<LabeledMatrix, SynthesisError> {
    let layout = checked_layout(&doc.layout)?;
    if &layout != expected {
        return Err(format_err("matrix layout differs from the strategy family"));
    }
    let n = layout.total_dim();
    let m = dense(n, n, &doc.entries)?;
    let defect = linalg::herm_defect(&m);
    if defect > 1e-8 * linalg::frob(&m).max(1.0) {
        return Err(format_err(format!(
            "operator is not Hermitian (defect {defect:.3e})"
        )));
    }
    Ok(LabeledMatrix::hermitian(layout, m)?)
}

fn check_spec(spec: &StrategySetSpec) -> Result<(), SynthesisError> {
    if spec.n == 0 || spec.n > 3 {
        return Err(format_err("strategy families are supported for 1 ≤ N ≤ 3"));
    }
    if spec.dims.len() != 2 * spec.n || spec.dims.iter().any(|&d| d == 0 || d > 8) {
        return Err(format_err("need 2N dimensions between 1 and 8"));
    }
    if let Some(o) = &spec.order {
        let mut s = o.clone();
        s.sort_unstable();
        if s != (0..spec.n).collect::<Vec<_>>() {
            return Err(format_err(
                "order must be a permutation of the channel indices",
            ));
        }
    }
    checked_layout(&spec.layout())?;
    Ok(())
}

impl StrategyDoc {
    pub fn new(
        s: &StrategyChoi,
        lambda: Option<f64>,
        isometries: &[(Vec<usize>, IsometrySequence)],
    ) -> Self {
        Self {
            schema_version: 1,
            strategy_set: s.spec.clone(),
            lambda,
            marginal: matrix_doc(&s.marginal),
            branches: s
                .branches
                .iter()
                .map(|b| BranchDoc {
                    order: b.order.clone(),
                    weight: b.weight,
                    operator: matrix_doc(&b.operator),
                })
                .collect(),
            purification: s.purification.as_ref().map(|p| PurificationDoc {
                layout: p.layout.clone(),
                future: p.future.clone(),
                vector: p.vector.iter().map(|z| [z.re, z.im]).collect(),
            }),
            isometries: isometries
                .iter()
                .map(|(order, seq)| IsometryChainDoc {
                    order: order.clone(),
                    steps: seq
                        .steps
                        .iter()
                        .map(|st| StepDoc {
                            input: st.input.clone(),
                            output: st.output.clone(),
                            ancilla_in: st.ancilla_in,
                            ancilla_out: st.ancilla_out,
                            entries: pairs(&st.matrix),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("strategy documents serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, SynthesisError> {
        serde_json::from_str(s).map_err(|e| format_err(e.to_string()))
    }

    /// Validates shapes and rebuilds the in-memory strategy.
    pub fn into_strategy(self) -> Result<ParsedStrategy, SynthesisError> {
        if self.schema_version != 1 {
            return Err(format_err(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        let spec = self.strategy_set;
        check_spec(&spec)?;
        let layout = spec.layout();
        let marginal = read_matrix(&self.marginal, &layout)?;
        let expected_orders = spec.branches();
        let branches = if matches!(spec.kind, StrategyKind::Swi | StrategyKind::Sup) {
            if self.branches.len() != expected_orders.len() {
                return Err(format_err(format!(
                    "expected {} branches, found {}",
                    expected_orders.len(),
                    self.branches.len()
                )));
            }
            self.branches
                .iter()
                .zip(&expected_orders)
                .map(|(b, order)| {
                    if &b.order != order {
                        return Err(format_err(
                            "branch orders must follow the lexicographic permutation order",
                        ));
                    }
                    if !b.weight.is_finite() || b.weight < -1e-12 {
                        return Err(format_err("branch weights must be non-negative"));
                    }
                    Ok(Branch {
                        order: b.order.clone(),
                        weight: b.weight.max(0.0),
                        operator: read_matrix(&b.operator, &layout)?,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?
        } else if self.branches.is_empty() {
            Vec::new()
        } else {
            return Err(format_err(format!(
                "{} strategies carry no branches",
                spec.kind
            )));
        };
        let purification = match self.purification {
            None => None,
            Some(p) => {
                let full = checked_layout(&p.layout)?;
                let sys: Vec<(String, usize)> = full
                    .factors()
                    .iter()
                    .filter(|(l, _)| !p.future.contains(l))
                    .cloned()
                    .collect();
                if sys.as_slice() != layout.factors() || p.future.iter().any(|l| !full.contains(l))
                {
                    return Err(format_err(
                        "purification layout must be the strategy layout followed by the future",
                    ));
                }
                if full.factors()[..layout.len()] != *layout.factors() {
                    return Err(format_err("future factors must follow the system factors"));
                }
                let v = dense(full.total_dim(), 1, &p.vector)?;
                Some(Purification {
                    layout: full,
                    future: p.future,
                    vector: linalg::column(&v, 0),
                })
            }
        };
        let mut isometries = Vec::with_capacity(self.isometries.len());
        for chain in self.isometries {
            let mut steps = Vec::with_capacity(chain.steps.len());
            for st in chain.steps {
                let rows = st
                    .output
                    .1
                    .checked_mul(st.ancilla_out)
                    .filter(|&x| x <= MAX_DOC_DIM);
                let cols = st
                    .input
                    .1
                    .checked_mul(st.ancilla_in)
                    .filter(|&x| x <= MAX_DOC_DIM);
                let (Some(rows), Some(cols)) = (rows, cols) else {
                    return Err(format_err("isometry dimensions too large"));
                };
                if rows
                    .checked_mul(cols)
                    .is_none_or(|x| x > MAX_DOC_DIM * MAX_DOC_DIM / 4)
                {
                    return Err(format_err("isometry dimensions too large"));
                }
                let matrix = dense(rows, cols, &st.entries)?;
                steps.push(IsometryStep {
                    input: st.input,
                    output: st.output,
                    ancilla_in: st.ancilla_in,
                    ancilla_out: st.ancilla_out,
                    matrix,
                });
            }
            isometries.push((chain.order, IsometrySequence { steps }));
        }
        if let Some(l) = self.lambda {
            if !l.is_finite() {
                return Err(format_err("lambda must be finite"));
            }
        }
        Ok(ParsedStrategy {
            strategy: StrategyChoi {
                spec,
                marginal,
                branches,
                purification,
            },
            lambda: self.lambda,
            isometries,
        })
    }
}

/// Parses and validates a strategy document.
pub fn parse_strategy(json: &str) -> Result<ParsedStrategy, SynthesisError> {
    StrategyDoc::from_json(json)?.into_strategy()
}
