//! Choi operators, the link product, comb validity and Kraus-vector factorizations.
//!
//! Choi layouts are `(in, out)` with `|K⟩⟩ = Σ_n |n⟩_in ⊗ K|n⟩_out`.

use crate::linalg::{self, c64, CMat, ZERO};
use crate::tensor_algebra::{self as ta, LabeledMatrix, SubsystemLayout, TensorError};
use faer::Mat;
use thiserror::Error;

pub const TP_TOL: f64 = 1e-10;
pub const DTP_TOL: f64 = 1e-8;
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CombError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("rank instability: kernel weight {0:.3e} of the derivative")]
    RankInstability(f64),
    #[error("operator is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPositive(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Kraus operators of a channel together with their parameter derivatives.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    kraus: Vec<CMat>,
    dkraus: Vec<CMat>,
}

impl KrausChannel {
    pub fn new(kraus: Vec<CMat>, dkraus: Vec<CMat>) -> Result<Self, CombError> {
        let ch = Self::unchecked(kraus, dkraus)?;
        let tp = ch.tp_defect();
        if tp > TP_TOL {
            return Err(CombError::InvalidChannel(format!(
                "trace preservation defect {tp:.3e}"
            )));
        }
        let dtp = ch.dtp_defect();
        if dtp > DTP_TOL {
            return Err(CombError::InvalidChannel(format!(
                "derivative trace defect {dtp:.3e}"
            )));
        }
        Ok(ch)
    }

    /// Shape checks only.
    pub fn unchecked(kraus: Vec<CMat>, dkraus: Vec<CMat>) -> Result<Self, CombError> {
        if kraus.is_empty() {
            return Err(CombError::InvalidChannel("no Kraus operators".into()));
        }
        if kraus.len() != dkraus.len() {
            return Err(CombError::InvalidChannel(
                "Kraus and derivative lists differ in length".into(),
            ));
        }
        let (r, c) = (kraus[0].nrows(), kraus[0].ncols());
        if kraus
            .iter()
            .chain(&dkraus)
            .any(|k| k.nrows() != r || k.ncols() != c)
        {
            return Err(CombError::InvalidChannel(
                "Kraus operators differ in shape".into(),
            ));
        }
        Ok(Self { kraus, dkraus })
    }

    /// Parameter-independent channel.
    pub fn constant(kraus: Vec<CMat>) -> Result<Self, CombError> {
        let d = kraus
            .iter()
            .map(|k| linalg::zeros(k.nrows(), k.ncols()))
            .collect();
        Self::new(kraus, d)
    }

    pub fn identity(d: usize) -> Self {
        Self {
            kraus: vec![linalg::identity(d)],
            dkraus: vec![linalg::zeros(d, d)],
        }
    }

    pub fn kraus(&self) -> &[CMat] {
        &self.kraus
    }

    pub fn dkraus(&self) -> &[CMat] {
        &self.dkraus
    }

    pub fn d_in(&self) -> usize {
        self.kraus[0].ncols()
    }

    pub fn d_out(&self) -> usize {
        self.kraus[0].nrows()
    }

    /// `‖Σ K†K − I‖_F`.
    pub fn tp_defect(&self) -> f64 {
        let mut s = linalg::scale_re(&linalg::identity(self.d_in()), -1.0);
        for k in &self.kraus {
            s = &s + k.adjoint() * k;
        }
        linalg::frob(&s)
    }

    /// `‖Σ (K̇†K + K†K̇)‖_F`.
    pub fn dtp_defect(&self) -> f64 {
        let mut s = linalg::zeros(self.d_in(), self.d_in());
        for (k, dk) in self.kraus.iter().zip(&self.dkraus) {
            s = &s + dk.adjoint() * k + k.adjoint() * dk;
        }
        linalg::frob(&s)
    }

    /// `Σ K ρ K†`.
    pub fn apply(&self, rho: &CMat) -> CMat {
        let mut out = linalg::zeros(self.d_out(), self.d_out());
        for k in &self.kraus {
            out = &out + k * rho * k.adjoint();
        }
        out
    }

    /// `self ∘ first`: apply `first`, then `self`, with Leibniz derivatives.
    pub fn after(&self, first: &KrausChannel) -> Result<Self, CombError> {
        if self.d_in() != first.d_out() {
            return Err(CombError::Dimension(format!(
                "cannot compose {}-dim output into {}-dim input",
                first.d_out(),
                self.d_in()
            )));
        }
        let mut kraus = Vec::new();
        let mut dkraus = Vec::new();
        for (a, da) in self.kraus.iter().zip(&self.dkraus) {
            for (b, db) in first.kraus.iter().zip(&first.dkraus) {
                kraus.push(a * b);
                dkraus.push(da * b + a * db);
            }
        }
        Self::new(kraus, dkraus)
    }
}

/// `|K⟩⟩` in `(in, out)` order: entry `n * d_out + m` is `K[m][n]`.
pub fn double_ket(k: &CMat) -> Vec<c64> {
    let (dout, din) = (k.nrows(), k.ncols());
    let mut v = vec![ZERO; din * dout];
    for n in 0..din {
        for m in 0..dout {
            v[n * dout + m] = k[(m, n)];
        }
    }
    v
}

/// Inverse of [`double_ket`].
pub fn from_double_ket(v: &[c64], din: usize, dout: usize) -> CMat {
    Mat::from_fn(dout, din, |m, n| v[n * dout + m])
}

/// Kraus vectors `𝐂` of a process, their derivatives `𝐂̇`, and the layout they live on.
#[derive(Clone, Debug)]
pub struct FactorizedComb {
    layout: SubsystemLayout,
    vectors: CMat,
    dvectors: CMat,
}

impl FactorizedComb {
    pub fn new(layout: SubsystemLayout, vectors: CMat, dvectors: CMat) -> Result<Self, CombError> {
        let n = layout.total_dim();
        if vectors.nrows() != n || dvectors.nrows() != n || vectors.ncols() != dvectors.ncols() {
            return Err(CombError::Dimension(format!(
                "vectors {}x{} / {}x{} on a {n}-dim layout",
                vectors.nrows(),
                vectors.ncols(),
                dvectors.nrows(),
                dvectors.ncols()
            )));
        }
        Ok(Self {
            layout,
            vectors,
            dvectors,
        })
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn vectors(&self) -> &CMat {
        &self.vectors
    }

    pub fn dvectors(&self) -> &CMat {
        &self.dvectors
    }

    pub fn rank(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    /// `𝐂𝐂†`.
    pub fn choi(&self) -> LabeledMatrix {
        let m = &self.vectors * self.vectors.adjoint();
        LabeledMatrix::hermitian(self.layout.clone(), m).expect("layout matches by construction")
    }

    /// `𝐂̇𝐂† + 𝐂𝐂̇†`.
    pub fn dchoi(&self) -> LabeledMatrix {
        let m = &self.dvectors * self.vectors.adjoint() + &self.vectors * self.dvectors.adjoint();
        LabeledMatrix::hermitian(self.layout.clone(), m).expect("layout matches by construction")
    }

    /// Relabels factors without touching entries.
    pub fn relabeled<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self, CombError> {
        if labels.len() != self.layout.len() {
            return Err(CombError::Dimension(
                "label count differs from factor count".into(),
            ));
        }
        let layout = SubsystemLayout::new(
            labels
                .iter()
                .map(|l| l.as_ref().to_string())
                .zip(self.layout.dims()),
        )?;
        Ok(Self {
            layout,
            ..self.clone()
        })
    }

    /// Gauge transform `𝐂 ↦ 𝐂V`, `𝐂̇ ↦ 𝐂̇V + 𝐂V̇`.
    pub fn regauged(&self, v: &CMat, dv: &CMat) -> Self {
        Self {
            layout: self.layout.clone(),
            vectors: &self.vectors * v,
            dvectors: &self.dvectors * v + &self.vectors * dv,
        }
    }

    /// `𝐂₁ ⊗ 𝐂₂` column-wise with product-rule derivatives.
    pub fn tensor(&self, other: &Self) -> Result<Self, CombError> {
        let layout = self.layout.concat(&other.layout)?;
        let (r1, r2) = (self.rank(), other.rank());
        let (n1, n2) = (self.dim(), other.dim());
        let mut v = linalg::zeros(n1 * n2, r1 * r2);
        let mut dv = linalg::zeros(n1 * n2, r1 * r2);
        for a in 0..r1 {
            for b in 0..r2 {
                let c = a * r2 + b;
                for i in 0..n1 {
                    let (x, dx) = (self.vectors[(i, a)], self.dvectors[(i, a)]);
                    for j in 0..n2 {
                        let (y, dy) = (other.vectors[(j, b)], other.dvectors[(j, b)]);
                        v[(i * n2 + j, c)] = x * y;
                        dv[(i * n2 + j, c)] = dx * y + x * dy;
                    }
                }
            }
        }
        Self::new(layout, v, dv)
    }

    /// Drops linearly dependent columns through a constant unitary mixing.
    ///
    /// Columns spanning the kernel of `𝐂†𝐂` must carry no derivative weight.
    pub fn reduced(&self) -> Result<Self, CombError> {
        let g = self.vectors.adjoint() * &self.vectors;
        let (w, u) = linalg::eigh(&g);
        let wmax = w.last().copied().unwrap_or(0.0).max(0.0);
        let keep: Vec<usize> = (0..w.len())
            .rev()
            .filter(|&k| w[k] > RANK_TOL * wmax)
            .collect();
        if keep.len() == self.rank() {
            return Ok(self.clone());
        }
        let scale = linalg::frob(&self.dvectors).max(1.0);
        for k in (0..w.len()).filter(|k| !keep.contains(k)) {
            let dk = &self.dvectors * u.col(k).as_mat();
            let leak = linalg::frob(&dk);
            if leak > 1e-8 * scale {
                return Err(CombError::RankInstability(leak));
            }
        }
        let uk = Mat::from_fn(u.nrows(), keep.len(), |i, j| u[(i, keep[j])]);
        Ok(Self {
            layout: self.layout.clone(),
            vectors: &self.vectors * &uk,
            dvectors: &self.dvectors * &uk,
        })
    }
}

/// Choi factorization of a channel on labels `(in_label, out_label)`.
pub fn choi_from_kraus_labeled(
    ch: &KrausChannel,
    in_label: &str,
    out_label: &str,
) -> Result<(FactorizedComb, LabeledMatrix), CombError> {
    let layout = SubsystemLayout::new([(in_label, ch.d_in()), (out_label, ch.d_out())])?;
    let r = ch.kraus().len();
    let n = layout.total_dim();
    let mut v = linalg::zeros(n, r);
    let mut dv = linalg::zeros(n, r);
    for (c, (k, dk)) in ch.kraus().iter().zip(ch.dkraus()).enumerate() {
        for (i, (x, dx)) in double_ket(k).into_iter().zip(double_ket(dk)).enumerate() {
            v[(i, c)] = x;
            dv[(i, c)] = dx;
        }
    }
    let fc = FactorizedComb::new(layout, v, dv)?;
    let choi = fc.choi();
    Ok((fc, choi))
}

/// Choi factorization with labels `("1", "2")`.
pub fn choi_from_kraus(ch: &KrausChannel) -> Result<(FactorizedComb, LabeledMatrix), CombError> {
    choi_from_kraus_labeled(ch, "1", "2")
}

/// `A * B = Tr_shared[(A^{T_shared} ⊗ I)(I ⊗ B)]` on `A`'s free labels followed by `B`'s.
pub fn link_product(a: &LabeledMatrix, b: &LabeledMatrix) -> Result<LabeledMatrix, CombError> {
    let shared: Vec<String> = a
        .layout()
        .labels()
        .filter(|l| b.layout().contains(l))
        .map(str::to_string)
        .collect();
    for l in &shared {
        let (da, db) = (a.layout().dim_of(l)?, b.layout().dim_of(l)?);
        if da != db {
            return Err(TensorError::SharedDimension {
                label: l.clone(),
                left: da,
                right: db,
            }
            .into());
        }
    }
    let a_free: Vec<String> = a
        .layout()
        .labels()
        .filter(|l| !shared.contains(&l.to_string()))
        .map(str::to_string)
        .collect();
    let b_free: Vec<String> = b
        .layout()
        .labels()
        .filter(|l| !shared.contains(&l.to_string()))
        .map(str::to_string)
        .collect();
    let a_order: Vec<&String> = a_free.iter().chain(&shared).collect();
    let b_order: Vec<&String> = shared.iter().chain(&b_free).collect();
    let ap = ta::permute(a, &a_order)?;
    let bp = ta::permute(b, &b_order)?;
    let ds: usize = shared
        .iter()
        .map(|l| a.layout().dim_of(l).unwrap())
        .product();
    let da = ap.dim() / ds;
    let db = bp.dim() / ds;
    let (am, bm) = (ap.matrix(), bp.matrix());
    // R[(a,b),(a',b')] = Σ_{s,s'} A[(a,s'),(a',s)] B[(s',b),(s,b')]
    let ahat = Mat::from_fn(da * da, ds * ds, |r, c| {
        let (x, xp) = (r / da, r % da);
        let (sp, s) = (c / ds, c % ds);
        am[(x * ds + sp, xp * ds + s)]
    });
    let bhat = Mat::from_fn(ds * ds, db * db, |r, c| {
        let (sp, s) = (r / ds, r % ds);
        let (y, yp) = (c / db, c % db);
        bm[(sp * db + y, s * db + yp)]
    });
    let rhat = &ahat * &bhat;
    let out = Mat::from_fn(da * db, da * db, |r, c| {
        let (x, y) = (r / db, r % db);
        let (xp, yp) = (c / db, c % db);
        rhat[(x * da + xp, y * db + yp)]
    });
    let mut factors: Vec<(String, usize)> = Vec::new();
    for l in a_free.iter() {
        factors.push((l.clone(), a.layout().dim_of(l)?));
    }
    for l in b_free.iter() {
        factors.push((l.clone(), b.layout().dim_of(l)?));
    }
    Ok(LabeledMatrix::new(SubsystemLayout::new(factors)?, out)?)
}

/// Outcome of [`validate_comb`].
#[derive(Clone, Debug, PartialEq)]
pub struct CombReport {
    pub min_eigenvalue: f64,
    /// `‖_{2N..2i,2i-1}C − _{2N..2i}C‖_F` for `i = 1..N`.
    pub residuals: Vec<f64>,
    /// `|Tr C − Π d_in|`.
    pub trace_defect: f64,
    pub pass: bool,
}

/// Checks positivity and the causal tower for the given ordered `(in, out)` pairs.
pub fn validate_comb<S: AsRef<str>>(
    c: &LabeledMatrix,
    io_pairs: &[(S, S)],
) -> Result<CombReport, CombError> {
    let mut residuals = Vec::with_capacity(io_pairs.len());
    for i in 0..io_pairs.len() {
        let mut later: Vec<&str> = Vec::new();
        for (inp, out) in &io_pairs[i + 1..] {
            later.push(inp.as_ref());
            later.push(out.as_ref());
        }
        later.push(io_pairs[i].1.as_ref());
        let lhs = {
            let mut s = later.clone();
            s.push(io_pairs[i].0.as_ref());
            ta::neutralize(c, &s)?
        };
        let rhs = ta::neutralize(c, &later)?;
        residuals.push(linalg::frob(&(lhs.matrix() - rhs.matrix())));
    }
    let din: usize = io_pairs
        .iter()
        .map(|(i, _)| c.layout().dim_of(i.as_ref()))
        .product::<Result<usize, _>>()?;
    let trace_defect = (c.trace().re - din as f64).abs();
    let min_eigenvalue = linalg::min_eig(c.matrix());
    let pass = min_eigenvalue >= -1e-9
        && residuals.iter().all(|&r| r <= 1e-8)
        && trace_defect <= 1e-8 * din as f64;
    Ok(CombReport {
        min_eigenvalue,
        residuals,
        trace_defect,
        pass,
    })
}

/// Kraus vectors of a PSD family member `C` with derivative `Ċ`.
///
/// Columns are `√λ_k u_k`; derivatives solve `𝐂̇𝐂† + 𝐂𝐂̇† = Ċ` with the
/// Hermitian gauge inside the support.
pub fn factorize(c: &LabeledMatrix, dc: &LabeledMatrix) -> Result<FactorizedComb, CombError> {
    if c.layout() != dc.layout() {
        return Err(CombError::Dimension(
            "C and its derivative live on different layouts".into(),
        ));
    }
    let (w, u) = linalg::eigh(c.matrix());
    let n = w.len();
    let wmax = w.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if w[0] < -1e-9 * wmax.max(1.0) {
        return Err(CombError::NotPositive(w[0]));
    }
    let support: Vec<usize> = (0..n).rev().filter(|&k| w[k] > RANK_TOL * wmax).collect();
    let kernel: Vec<usize> = (0..n).filter(|k| !support.contains(k)).collect();
    let r = support.len();
    let ur = Mat::from_fn(n, r, |i, j| u[(i, support[j])]);
    let uk = Mat::from_fn(n, kernel.len(), |i, j| u[(i, kernel[j])]);
    let sq: Vec<f64> = support.iter().map(|&k| w[k].sqrt()).collect();
    let dcm = linalg::hermitize(dc.matrix());
    if !kernel.is_empty() {
        let kk = uk.adjoint() * &dcm * &uk;
        let leak = linalg::frob(&kk);
        if leak > 1e-8 * linalg::frob(&dcm).max(1.0) {
            return Err(CombError::RankInstability(leak));
        }
    }
    let crr = ur.adjoint() * &dcm * &ur;
    let x = Mat::from_fn(r, r, |i, j| crr[(i, j)] / (sq[i] + sq[j]));
    let y = uk.adjoint() * &dcm * &ur;
    let y = Mat::from_fn(y.nrows(), r, |i, j| y[(i, j)] / sq[j]);
    let vectors = Mat::from_fn(n, r, |i, j| ur[(i, j)] * sq[j]);
    let dvectors = &ur * &x + &uk * &y;
    FactorizedComb::new(c.layout().clone(), vectors, dvectors)
}

/// Central difference of a matrix family with one Richardson step.
pub fn richardson_derivative(f: impl Fn(f64) -> CMat, x: f64, h: f64) -> CMat {
    let d1 = linalg::scale_re(&(f(x + h) - f(x - h)), 0.5 / h);
    let d2 = linalg::scale_re(&(f(x + 2.0 * h) - f(x - 2.0 * h)), 0.25 / h);
    linalg::scale_re(&(linalg::scale_re(&d1, 4.0) - d2), 1.0 / 3.0)
}

/// [`factorize`] with `Ċ` from finite differences of the family.
pub fn factorize_family(
    family: impl Fn(f64) -> LabeledMatrix,
    x: f64,
) -> Result<FactorizedComb, CombError> {
    let c = family(x);
    let dc = richardson_derivative(|t| family(t).into_matrix(), x, 1e-5);
    let dc = LabeledMatrix::hermitian(c.layout().clone(), dc)?;
    factorize(&c, &dc)
}

/// Purification `|ψ⟩ = Σ_k √λ_k |u_k⟩|k⟩_F`; returns the vector and `dim F`.
///
/// The vector lives on the layout of `rho` followed by `F`.
pub fn purify(rho: &LabeledMatrix) -> Result<(Vec<c64>, usize), CombError> {
    let (w, u) = linalg::eigh(rho.matrix());
    let wmax = w.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if w[0] < -1e-9 * wmax.max(1.0) {
        return Err(CombError::NotPositive(w[0]));
    }
    let support: Vec<usize> = (0..w.len())
        .rev()
        .filter(|&k| w[k] > RANK_TOL * wmax)
        .collect();
    let f = support.len().max(1);
    let n = w.len();
    let mut psi = vec![ZERO; n * f];
    for (j, &k) in support.iter().enumerate() {
        let s = w[k].sqrt();
        for i in 0..n {
            psi[i * f + j] = u[(i, k)] * s;
        }
    }
    Ok((psi, f))
}

/// `Tr_F |ψ⟩⟨ψ|` for a vector on `(system, F)` with `dim F = f`.
pub fn reduce_purification(psi: &[c64], f: usize) -> CMat {
    let n = psi.len() / f;
    let m = Mat::from_fn(n, f, |i, j| psi[i * f + j]);
    &m * m.adjoint()
}
