//! Primal-dual interior-point solver for complex-Hermitian semidefinite programs.
//!
//! Standard form, with PSD blocks `X_j` and free scalars `u`:
//!
//! ```text
//!   min  Σ_j Re Tr(C_j X_j) + c_u·u
//!   s.t. Re Tr(F_k X_{j(k)}) + Σ_l B_kl u_l = b_k,   X_j ⪰ 0
//! ```
//!
//! Dual: `max b·y` with `S_j = C_j − Σ_{k∈j} y_k F_k ⪰ 0` and `Bᵀy = c_u`.
//! Each row acts on exactly one block, so the Schur matrix is block diagonal.
//! Nesterov–Todd scaling with Mehrotra predictor-corrector steps.

use crate::linalg::{self, c64, CMat, RMat, ZERO};
use crate::tensor_algebra::SparseOp;
use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SdpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("invalid JSON: {0}")]
    Json(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

/// One equality `Re Tr(F X_block) + Σ coef·u = rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub block: usize,
    /// Hermitian `F`, every entry stored explicitly.
    pub op: SparseOp,
    pub free: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpProblem {
    pub sense: Sense,
    pub blocks: Vec<usize>,
    /// Objective operator per block; empty means zero.
    pub cost: Vec<SparseOp>,
    pub cost_free: Vec<f64>,
    pub rows: Vec<Row>,
}

impl SdpProblem {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            blocks: Vec::new(),
            cost: Vec::new(),
            cost_free: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn add_block(&mut self, n: usize) -> usize {
        self.blocks.push(n);
        self.cost.push(Vec::new());
        self.blocks.len() - 1
    }

    pub fn add_free(&mut self, cost: f64) -> usize {
        self.cost_free.push(cost);
        self.cost_free.len() - 1
    }

    pub fn set_cost(&mut self, block: usize, op: SparseOp) {
        self.cost[block] = op;
    }

    pub fn add_row(
        &mut self,
        block: usize,
        op: SparseOp,
        free: Vec<(usize, f64)>,
        rhs: f64,
    ) -> usize {
        self.rows.push(Row {
            block,
            op,
            free,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn n_free(&self) -> usize {
        self.cost_free.len()
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        let bad = |m: String| Err(SdpError::Malformed(m));
        if self.cost.len() != self.blocks.len() {
            return bad("one cost operator per block required".into());
        }
        if let Some(j) = self.blocks.iter().position(|&n| n == 0) {
            return bad(format!("block {j} has size zero"));
        }
        if self.cost_free.iter().any(|c| !c.is_finite()) {
            return bad("non-finite free cost".into());
        }
        for (j, op) in self.cost.iter().enumerate() {
            check_op(op, self.blocks[j])
                .map_err(|e| SdpError::Malformed(format!("cost of block {j}: {e}")))?;
        }
        for (k, r) in self.rows.iter().enumerate() {
            if r.block >= self.blocks.len() {
                return bad(format!("row {k} references block {}", r.block));
            }
            if !r.rhs.is_finite() {
                return bad(format!("row {k} has a non-finite right-hand side"));
            }
            check_op(&r.op, self.blocks[r.block])
                .map_err(|e| SdpError::Malformed(format!("row {k}: {e}")))?;
            for &(l, c) in &r.free {
                if l >= self.n_free() || !c.is_finite() {
                    return bad(format!("row {k} has an invalid free coefficient"));
                }
            }
        }
        Ok(())
    }

    pub fn to_dump(&self) -> SdpDump {
        let ent = |op: &SparseOp| {
            let mut v: Vec<DumpEntry> = merge(op)
                .into_iter()
                .map(|(i, j, z)| DumpEntry(i, j, [z.re, z.im]))
                .collect();
            v.sort_by_key(|e| (e.0, e.1));
            v
        };
        SdpDump {
            schema_version: 1,
            sense: self.sense,
            blocks: self.blocks.clone(),
            cost: self.cost.iter().map(ent).collect(),
            cost_free: self.cost_free.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| DumpRow {
                    block: r.block,
                    entries: ent(&r.op),
                    free: r.free.clone(),
                    rhs: r.rhs,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_dump()).expect("dump is serializable")
    }

    pub fn from_json(s: &str) -> Result<Self, SdpError> {
        let d: SdpDump = serde_json::from_str(s).map_err(|e| SdpError::Json(e.to_string()))?;
        Self::from_dump(d)
    }

    pub fn from_dump(d: SdpDump) -> Result<Self, SdpError> {
        if d.schema_version != 1 {
            return Err(SdpError::Malformed(format!(
                "unsupported schema_version {}",
                d.schema_version
            )));
        }
        let op = |v: Vec<DumpEntry>| {
            v.into_iter()
                .map(|DumpEntry(i, j, [re, im])| (i, j, c64::new(re, im)))
                .collect()
        };
        let p = Self {
            sense: d.sense,
            blocks: d.blocks,
            cost: d.cost.into_iter().map(op).collect(),
            cost_free: d.cost_free,
            rows: d
                .rows
                .into_iter()
                .map(|r| Row {
                    block: r.block,
                    op: op(r.entries),
                    free: r.free,
                    rhs: r.rhs,
                })
                .collect(),
        };
        p.validate()?;
        Ok(p)
    }
}

/// JSON form of a problem. Entries are `[row, col, [re, im]]`, sorted row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdpDump {
    pub schema_version: u32,
    pub sense: Sense,
    pub blocks: Vec<usize>,
    pub cost: Vec<Vec<DumpEntry>>,
    pub cost_free: Vec<f64>,
    pub rows: Vec<DumpRow>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DumpEntry(pub usize, pub usize, pub [f64; 2]);

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpRow {
    pub block: usize,
    pub entries: Vec<DumpEntry>,
    #[serde(default)]
    pub free: Vec<(usize, f64)>,
    pub rhs: f64,
}

fn merge(op: &SparseOp) -> Vec<(usize, usize, c64)> {
    let mut m: BTreeMap<(usize, usize), c64> = BTreeMap::new();
    for &(i, j, v) in op {
        *m.entry((i, j)).or_insert(ZERO) += v;
    }
    m.into_iter()
        .filter(|(_, v)| v.norm_sqr() > 0.0)
        .map(|((i, j), v)| (i, j, v))
        .collect()
}

fn check_op(op: &SparseOp, n: usize) -> Result<(), String> {
    let m: BTreeMap<(usize, usize), c64> =
        merge(op).into_iter().map(|(i, j, v)| ((i, j), v)).collect();
    for (&(i, j), &v) in &m {
        if i >= n || j >= n {
            return Err(format!("entry ({i},{j}) outside block of size {n}"));
        }
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err("non-finite entry".into());
        }
        let t = m.get(&(j, i)).copied().unwrap_or(ZERO);
        if (t.conj() - v).norm() > 1e-12 * (1.0 + v.norm()) {
            return Err(format!("operator is not Hermitian at ({i},{j})"));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    NumericalLimit,
}

#[derive(Clone, Copy, Debug)]
pub struct SdpSettings {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct IterateStats {
    /// Objectives of the internal minimization form.
    pub pobj: f64,
    pub dobj: f64,
    pub pinf: f64,
    pub dinf: f64,
    pub mu: f64,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// Primal objective in the caller's sense.
    pub objective: f64,
    /// Dual bound in the caller's sense.
    pub dual_objective: f64,
    pub x: Vec<CMat>,
    pub u: Vec<f64>,
    /// Dual multipliers of the internal minimization form.
    pub y: Vec<f64>,
    pub s: Vec<CMat>,
    /// `|pobj − dobj| / (1 + |pobj| + |dobj|)`.
    pub gap: f64,
    pub complementarity: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub history: Vec<IterateStats>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }
}

struct Data {
    n: Vec<usize>,
    c: Vec<CMat>,
    cu: Vec<f64>,
    ops: Vec<Vec<(usize, usize, c64)>>,
    block_rows: Vec<Vec<usize>>,
    /// Dense `B`, row-major `m × p`.
    b_mat: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Data {
    fn m(&self) -> usize {
        self.b.len()
    }

    fn p(&self) -> usize {
        self.cu.len()
    }

    fn a_op(&self, x: &[CMat]) -> Vec<f64> {
        let mut out = vec![0.0; self.m()];
        for (j, rows) in self.block_rows.iter().enumerate() {
            for &k in rows {
                out[k] = apply_row(&self.ops[k], &x[j]);
            }
        }
        out
    }

    fn a_adj(&self, y: &[f64]) -> Vec<CMat> {
        let mut out: Vec<CMat> = self.n.iter().map(|&n| linalg::zeros(n, n)).collect();
        for (j, rows) in self.block_rows.iter().enumerate() {
            for &k in rows {
                for &(p, q, v) in &self.ops[k] {
                    out[j][(p, q)] += v * y[k];
                }
            }
        }
        out
    }

    fn bu(&self, u: &[f64]) -> Vec<f64> {
        self.b_mat
            .iter()
            .map(|r| r.iter().zip(u).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn bt(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.p()];
        for (k, r) in self.b_mat.iter().enumerate() {
            for (l, a) in r.iter().enumerate() {
                out[l] += a * y[k];
            }
        }
        out
    }
}

fn apply_row(op: &[(usize, usize, c64)], x: &CMat) -> f64 {
    op.iter().map(|&(p, q, v)| (v * x[(q, p)]).re).sum()
}

fn dense(op: &SparseOp, n: usize) -> CMat {
    let mut m = linalg::zeros(n, n);
    for &(i, j, v) in op {
        m[(i, j)] += v;
    }
    m
}

struct Scaling {
    g: CMat,
    w: CMat,
    v: Vec<f64>,
}

fn nt_scaling(x: &CMat, s: &CMat) -> Option<Scaling> {
    let l = linalg::hermitize(x).llt(Side::Lower).ok()?.L().to_owned();
    let m = l.adjoint() * s * &l;
    let (lam, u) = linalg::eigh(&m);
    if lam[0] <= 0.0 || !lam.iter().all(|x| x.is_finite()) {
        return None;
    }
    let n = lam.len();
    let q = Mat::from_fn(n, n, |i, j| u[(i, j)] * lam[j].powf(-0.25));
    let g = &l * &q;
    let w = &g * g.adjoint();
    Some(Scaling {
        g,
        w,
        v: lam.iter().map(|x| x.sqrt()).collect(),
    })
}

/// Largest `α ≤ cap` with `V + αΔ ⪰ 0`, `V` diagonal positive.
fn max_step(v: &[f64], d: &CMat) -> f64 {
    let n = v.len();
    let z = Mat::from_fn(n, n, |i, j| d[(i, j)] / (v[i] * v[j]).sqrt());
    let lmin = linalg::min_eig(&z);
    if lmin < 0.0 {
        -1.0 / lmin
    } else {
        f64::INFINITY
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Symmetric positive definite solve with diagonal shifts on failure.
struct SpdFactor {
    llt: faer::linalg::solvers::Llt<f64>,
}

impl SpdFactor {
    fn new(m: &RMat) -> Option<Self> {
        let scale = (0..m.nrows())
            .map(|i| m[(i, i)].abs())
            .fold(0.0, f64::max)
            .max(1e-300);
        let mut shift = 0.0;
        for _ in 0..8 {
            let shifted = Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
                m[(i, j)] + if i == j { shift } else { 0.0 }
            });
            if let Ok(llt) = shifted.llt(Side::Lower) {
                return Some(Self { llt });
            }
            shift = if shift == 0.0 {
                1e-14 * scale
            } else {
                shift * 100.0
            };
        }
        None
    }

    fn solve(&self, rhs: &RMat) -> RMat {
        self.llt.solve(rhs)
    }
}

/// Orthonormalizes the columns of `B`, returning indices of an independent subset.
fn independent_columns(b: &[Vec<f64>], p: usize) -> Vec<usize> {
    let m = b.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut keep = Vec::new();
    for l in 0..p {
        let mut v: Vec<f64> = (0..m).map(|k| b[k][l]).collect();
        let n0 = norm2(&v);
        if n0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for e in &basis {
                let c = dot(e, &v);
                v.iter_mut().zip(e).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n1 = norm2(&v);
        if n1 > 1e-10 * n0 {
            v.iter_mut().for_each(|x| *x /= n1);
            basis.push(v);
            keep.push(l);
        }
    }
    keep
}

fn prepare(p: &SdpProblem) -> Data {
    let sign = if p.sense == Sense::Max { -1.0 } else { 1.0 };
    let n = p.blocks.clone();
    let c = p
        .cost
        .iter()
        .zip(&n)
        .map(|(op, &nj)| linalg::scale_re(&linalg::hermitize(&dense(op, nj)), sign))
        .collect();
    let cu = p.cost_free.iter().map(|x| x * sign).collect();
    let mut block_rows = vec![Vec::new(); n.len()];
    let mut ops = Vec::with_capacity(p.rows.len());
    let mut b_mat = Vec::with_capacity(p.rows.len());
    let mut b = Vec::with_capacity(p.rows.len());
    for (k, r) in p.rows.iter().enumerate() {
        block_rows[r.block].push(k);
        ops.push(merge(&r.op));
        let mut row = vec![0.0; p.n_free()];
        for &(l, a) in &r.free {
            row[l] += a;
        }
        b_mat.push(row);
        b.push(r.rhs);
    }
    Data {
        n,
        c,
        cu,
        ops,
        block_rows,
        b_mat,
        b,
    }
}

/// Schur matrix `M_kl = Re Tr(F_k W F_l W)` of one block.
fn schur_block(d: &Data, j: usize, w: &CMat) -> RMat {
    let rows = &d.block_rows[j];
    let nj = d.n[j];
    let mj = rows.len();
    let mut m = Mat::<f64>::zeros(mj, mj);
    for (a, &l) in rows.iter().enumerate() {
        let op = &d.ops[l];
        let t = if op.len() > nj {
            let f = dense(op, nj);
            w * (&f * w)
        } else {
            let mut t = linalg::zeros(nj, nj);
            for &(p, q, v) in op {
                for c2 in 0..nj {
                    let wq = w[(q, c2)] * v;
                    if wq == ZERO {
                        continue;
                    }
                    for r2 in 0..nj {
                        t[(r2, c2)] += w[(r2, p)] * wq;
                    }
                }
            }
            t
        };
        for (bi, &k) in rows.iter().enumerate().skip(a) {
            let val = apply_row(&d.ops[k], &t);
            m[(bi, a)] = val;
            m[(a, bi)] = val;
        }
    }
    m
}

struct Direction {
    dx_hat: Vec<CMat>,
    ds_hat: Vec<CMat>,
    dx: Vec<CMat>,
    ds: Vec<CMat>,
    dy: Vec<f64>,
    du: Vec<f64>,
}

struct Newton<'a> {
    d: &'a Data,
    sc: Vec<Scaling>,
    factors: Vec<SpdFactor>,
    schur: Vec<RMat>,
    /// `M⁻¹B` restricted to kept free columns, per row.
    minv_b: Vec<Vec<f64>>,
    keep: Vec<usize>,
    schur_free: Option<(RMat, Vec<f64>)>,
}

impl<'a> Newton<'a> {
    fn new(d: &'a Data, sc: Vec<Scaling>, keep: &[usize]) -> Option<Self> {
        let mut factors = Vec::with_capacity(d.n.len());
        let mut schur = Vec::with_capacity(d.n.len());
        for (j, s) in sc.iter().enumerate() {
            let m = schur_block(d, j, &s.w);
            factors.push(SpdFactor::new(&m)?);
            schur.push(m);
        }
        let mut nt = Self {
            d,
            sc,
            factors,
            schur,
            minv_b: vec![vec![0.0; keep.len()]; d.m()],
            keep: keep.to_vec(),
            schur_free: None,
        };
        if !keep.is_empty() {
            for (c, &l) in keep.iter().enumerate() {
                let col: Vec<f64> = (0..d.m()).map(|k| d.b_mat[k][l]).collect();
                let sol = nt.minv(&col);
                for k in 0..d.m() {
                    nt.minv_b[k][c] = sol[k];
                }
            }
            let p = keep.len();
            let mut kmat = Mat::<f64>::zeros(p, p);
            for a in 0..p {
                for b2 in 0..p {
                    kmat[(a, b2)] = (0..d.m())
                        .map(|k| d.b_mat[k][keep[a]] * nt.minv_b[k][b2])
                        .sum();
                }
            }
            let ksym = Mat::from_fn(p, p, |i, j| 0.5 * (kmat[(i, j)] + kmat[(j, i)]));
            let (vals, vecs) = linalg::eigh_real(&ksym);
            let top = vals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            if top == 0.0 {
                return None;
            }
            nt.schur_free = Some((
                vecs,
                vals.iter()
                    .map(|&x| if x > 1e-14 * top { 1.0 / x } else { 0.0 })
                    .collect(),
            ));
        }
        Some(nt)
    }

    fn minv(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; r.len()];
        for (j, rows) in self.d.block_rows.iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            let rhs = Mat::from_fn(rows.len(), 1, |i, _| r[rows[i]]);
            let sol = self.factors[j].solve(&rhs);
            for (i, &k) in rows.iter().enumerate() {
                out[k] = sol[(i, 0)];
            }
        }
        out
    }

    /// Solves for a direction given residuals and the scaled centering target `rc` per block.
    fn solve(&self, rp: &[f64], rd: &[CMat], ru: &[f64], rc: &[CMat]) -> Direction {
        let d = self.d;
        let rhat: Vec<CMat> = self
            .sc
            .iter()
            .zip(rc)
            .map(|(s, r)| {
                Mat::from_fn(s.v.len(), s.v.len(), |i, j| {
                    r[(i, j)] * (2.0 / (s.v[i] + s.v[j]))
                })
            })
            .collect();
        let t1: Vec<CMat> = self
            .sc
            .iter()
            .zip(&rhat)
            .map(|(s, r)| &s.g * r * s.g.adjoint())
            .collect();
        let t2: Vec<CMat> = self
            .sc
            .iter()
            .zip(rd)
            .map(|(s, r)| &s.w * r * &s.w)
            .collect();
        let a1 = d.a_op(&t1);
        let a2 = d.a_op(&t2);
        let rhs: Vec<f64> = (0..d.m()).map(|k| rp[k] - a1[k] + a2[k]).collect();
        let (mut dy, mut du) = self.kkt(&rhs, ru);
        for _ in 0..2 {
            let mdy = self.apply_m(&dy);
            let bdu = d.bu(&du);
            let r1: Vec<f64> = (0..d.m()).map(|k| rhs[k] - mdy[k] - bdu[k]).collect();
            let bty = d.bt(&dy);
            let r2: Vec<f64> = (0..d.p()).map(|l| ru[l] - bty[l]).collect();
            let (cy, cu) = self.kkt(&r1, &r2);
            dy.iter_mut().zip(&cy).for_each(|(a, b)| *a += b);
            du.iter_mut().zip(&cu).for_each(|(a, b)| *a += b);
        }
        let aty = d.a_adj(&dy);
        let ds: Vec<CMat> = rd.iter().zip(&aty).map(|(r, a)| r - a).collect();
        let ds_hat: Vec<CMat> = self
            .sc
            .iter()
            .zip(&ds)
            .map(|(s, x)| linalg::hermitize(&(s.g.adjoint() * x * &s.g)))
            .collect();
        let dx_hat: Vec<CMat> = rhat
            .iter()
            .zip(&ds_hat)
            .map(|(r, x)| linalg::hermitize(&(r - x)))
            .collect();
        let dx: Vec<CMat> = self
            .sc
            .iter()
            .zip(&dx_hat)
            .map(|(s, x)| linalg::hermitize(&(&s.g * x * s.g.adjoint())))
            .collect();
        Direction {
            dx_hat,
            ds_hat,
            dx,
            ds,
            dy,
            du,
        }
    }

    /// Solves `M dy + B du = rhs`, `Bᵀ dy = ru` through the Schur complement in `du`.
    fn kkt(&self, rhs: &[f64], ru: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.d;
        let mut du_full = vec![0.0; d.p()];
        let Some((vecs, inv)) = &self.schur_free else {
            return (self.minv(rhs), du_full);
        };
        let minv_rhs = self.minv(rhs);
        let p = self.keep.len();
        let g: Vec<f64> = (0..p)
            .map(|a| {
                (0..d.m())
                    .map(|k| d.b_mat[k][self.keep[a]] * minv_rhs[k])
                    .sum::<f64>()
                    - ru[self.keep[a]]
            })
            .collect();
        let proj: Vec<f64> = (0..p)
            .map(|c| (0..p).map(|a| vecs[(a, c)] * g[a]).sum::<f64>() * inv[c])
            .collect();
        let du: Vec<f64> = (0..p)
            .map(|a| (0..p).map(|c| vecs[(a, c)] * proj[c]).sum())
            .collect();
        for (a, &l) in self.keep.iter().enumerate() {
            du_full[l] = du[a];
        }
        let dy = (0..d.m())
            .map(|k| minv_rhs[k] - dot(&self.minv_b[k], &du))
            .collect();
        (dy, du_full)
    }

    fn apply_m(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        for (j, rows) in self.d.block_rows.iter().enumerate() {
            let m = &self.schur[j];
            for (a, &k) in rows.iter().enumerate() {
                out[k] = rows
                    .iter()
                    .enumerate()
                    .map(|(b, &l)| m[(a, b)] * y[l])
                    .sum();
            }
        }
        out
    }
}

fn block_norm(ms: &[CMat]) -> f64 {
    ms.iter()
        .map(|m| linalg::frob(m).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn steps(sc: &[Scaling], dir: &Direction) -> (f64, f64) {
    let ap = sc
        .iter()
        .zip(&dir.dx_hat)
        .map(|(s, d)| max_step(&s.v, d))
        .fold(f64::INFINITY, f64::min);
    let ad = sc
        .iter()
        .zip(&dir.ds_hat)
        .map(|(s, d)| max_step(&s.v, d))
        .fold(f64::INFINITY, f64::min);
    (ap, ad)
}

struct Best {
    x: Vec<CMat>,
    s: Vec<CMat>,
    y: Vec<f64>,
    u: Vec<f64>,
    stats: IterateStats,
    xs: f64,
}

/// Solves `p`; status reports whether the tolerances were met.
pub fn solve(p: &SdpProblem, settings: &SdpSettings) -> Result<SdpSolution, SdpError> {
    p.validate()?;
    let d = prepare(p);
    let nb = d.n.len();
    let ntot: usize = d.n.iter().sum();
    let keep = independent_columns(&d.b_mat, d.p());

    let b_norm = norm2(&d.b);
    let c_norm = (block_norm(&d.c).powi(2) + norm2(&d.cu).powi(2)).sqrt();
    let mut x = Vec::with_capacity(nb);
    let mut s = Vec::with_capacity(nb);
    for j in 0..nb {
        let nj = d.n[j] as f64;
        let mut xi = 10f64.max(nj.sqrt());
        let mut eta = 10f64.max(nj.sqrt()).max(linalg::frob(&d.c[j]));
        for &k in &d.block_rows[j] {
            let fnorm = d.ops[k].iter().map(|e| e.2.norm_sqr()).sum::<f64>().sqrt();
            xi = xi.max(nj.sqrt() * (1.0 + d.b[k].abs()) / (1.0 + fnorm));
            eta = eta.max(fnorm);
        }
        x.push(linalg::scale_re(&linalg::identity(d.n[j]), xi));
        s.push(linalg::scale_re(&linalg::identity(d.n[j]), eta));
    }
    let mut y = vec![0.0; d.m()];
    let mut u = vec![0.0; d.p()];
    let mut history = Vec::new();
    let sign = if p.sense == Sense::Max { -1.0 } else { 1.0 };

    let mut status = SdpStatus::NumericalLimit;
    let mut iterations = 0;
    let mut stall = 0;
    let mut best: Option<(f64, Best)> = None;
    loop {
        let ax = d.a_op(&x);
        let bu = d.bu(&u);
        let rp: Vec<f64> = (0..d.m()).map(|k| d.b[k] - ax[k] - bu[k]).collect();
        let aty = d.a_adj(&y);
        let rd: Vec<CMat> = (0..nb)
            .map(|j| linalg::hermitize(&(&d.c[j] - &aty[j] - &s[j])))
            .collect();
        let bty = d.bt(&y);
        let ru: Vec<f64> = (0..d.p()).map(|l| d.cu[l] - bty[l]).collect();
        let pobj: f64 = (0..nb)
            .map(|j| linalg::inner_re(&d.c[j], &x[j]))
            .sum::<f64>()
            + dot(&d.cu, &u);
        let dobj = dot(&d.b, &y);
        let xs: f64 = (0..nb).map(|j| linalg::inner_re(&x[j], &s[j])).sum();
        let mu = xs / ntot as f64;
        let pinf = norm2(&rp) / (1.0 + b_norm);
        let dinf = (block_norm(&rd).powi(2) + norm2(&ru).powi(2)).sqrt() / (1.0 + c_norm);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let comp = xs / (1.0 + pobj.abs() + dobj.abs());
        history.push(IterateStats {
            pobj,
            dobj,
            pinf,
            dinf,
            mu,
        });
        let score = gap.max(comp).max(pinf).max(dinf);
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((
                score,
                Best {
                    x: x.clone(),
                    s: s.clone(),
                    y: y.clone(),
                    u: u.clone(),
                    stats: *history.last().unwrap(),
                    xs,
                },
            ));
        }

        if gap.max(comp) <= settings.gap_tol
            && pinf <= settings.feas_tol
            && dinf <= settings.feas_tol
        {
            status = SdpStatus::Optimal;
            break;
        }
        let big = block_norm(&x)
            .max(block_norm(&s))
            .max(norm2(&y))
            .max(norm2(&u));
        if big > 1e10 || !big.is_finite() {
            status = SdpStatus::Infeasible;
            break;
        }
        if iterations >= settings.max_iter || stall >= 5 {
            break;
        }

        let Some(sc) = (0..nb)
            .map(|j| nt_scaling(&x[j], &s[j]))
            .collect::<Option<Vec<_>>>()
        else {
            break;
        };
        let Some(newton) = Newton::new(&d, sc, &keep) else {
            break;
        };

        let rc_pred: Vec<CMat> = newton
            .sc
            .iter()
            .map(|sj| diag(&sj.v.iter().map(|v| -v * v).collect::<Vec<_>>()))
            .collect();
        let pred = newton.solve(&rp, &rd, &ru, &rc_pred);
        let (ap_max, ad_max) = steps(&newton.sc, &pred);
        let ap = ap_max.min(1.0);
        let ad = ad_max.min(1.0);
        let xs_aff: f64 = (0..nb)
            .map(|j| {
                let xa = &x[j] + linalg::scale_re(&pred.dx[j], ap);
                let sa = &s[j] + linalg::scale_re(&pred.ds[j], ad);
                linalg::inner_re(&xa, &sa)
            })
            .sum();
        let mu_aff = (xs_aff / ntot as f64).max(0.0);
        let expon = if mu > 1e-6 {
            (3.0 * ap.min(ad).powi(2)).max(1.0)
        } else {
            3.0
        };
        let sigma = (mu_aff / mu).powf(expon).min(1.0);

        let rc_corr: Vec<CMat> = (0..nb)
            .map(|j| {
                let v = &newton.sc[j].v;
                let xd = &pred.dx_hat[j];
                let sd = &pred.ds_hat[j];
                let cross = linalg::scale_re(&(xd * sd + sd * xd), 0.5);
                let target = diag(&v.iter().map(|vi| sigma * mu - vi * vi).collect::<Vec<_>>());
                linalg::hermitize(&(target - cross))
            })
            .collect();
        let corr = newton.solve(&rp, &rd, &ru, &rc_corr);
        let (ap_max, ad_max) = steps(&newton.sc, &corr);
        let gamma = 0.9 + 0.09 * ap.min(ad);
        let ap = (gamma * ap_max).min(1.0);
        let ad = (gamma * ad_max).min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            stall += 1;
        } else {
            stall = 0;
        }

        for j in 0..nb {
            x[j] = linalg::hermitize(&(&x[j] + linalg::scale_re(&corr.dx[j], ap)));
            s[j] = linalg::hermitize(&(&s[j] + linalg::scale_re(&corr.ds[j], ad)));
        }
        u.iter_mut().zip(&corr.du).for_each(|(a, b)| *a += ap * b);
        y.iter_mut().zip(&corr.dy).for_each(|(a, b)| *a += ad * b);
        iterations += 1;
    }

    let mut last = *history.last().expect("at least one iterate recorded");
    let mut xs: f64 = (0..nb).map(|j| linalg::inner_re(&x[j], &s[j])).sum();
    if status == SdpStatus::NumericalLimit {
        if let Some((_, b)) = best {
            (x, s, y, u, last, xs) = (b.x, b.s, b.y, b.u, b.stats, b.xs);
        }
    }
    Ok(SdpSolution {
        status,
        objective: sign * last.pobj,
        dual_objective: sign * last.dobj,
        gap: (last.pobj - last.dobj).abs() / (1.0 + last.pobj.abs() + last.dobj.abs()),
        complementarity: xs,
        primal_residual: last.pinf,
        dual_residual: last.dinf,
        x,
        u,
        y,
        s,
        iterations,
        history,
    })
}

fn diag(v: &[f64]) -> CMat {
    let n = v.len();
    Mat::from_fn(n, n, |i, j| if i == j { linalg::cr(v[i]) } else { ZERO })
}

/// Hermitian basis functional for entry `(p, q)` of an `n`-dimensional block.
///
/// `Re` selects `Re X_pq` (or `X_pp` on the diagonal); otherwise `Im X_pq`.
pub fn entry_functional(p: usize, q: usize, real_part: bool) -> SparseOp {
    if p == q {
        return vec![(p, p, linalg::cr(1.0))];
    }
    if real_part {
        vec![(p, q, c64::new(0.5, 0.0)), (q, p, c64::new(0.5, 0.0))]
    } else {
        vec![(p, q, c64::new(0.0, 0.5)), (q, p, c64::new(0.0, -0.5))]
    }
}

/// Dense Hermitian matrix to a sparse operator (entries above `tol` in modulus).
pub fn sparse_from_dense(m: &CMat, tol: f64) -> SparseOp {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)].norm() > tol {
                out.push((i, j, m[(i, j)]));
            }
        }
    }
    out
}
