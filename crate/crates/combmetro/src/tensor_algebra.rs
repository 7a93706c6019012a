//! Labeled tensor-product layouts and the subsystem operations built on them.
//!
//! Indices are row-major over the factor order: for factors `(a, d_a), (b, d_b)`
//! the basis vector `|i⟩_a|j⟩_b` sits at position `i * d_b + j`. Every reshape in
//! the crate goes through [`SubsystemLayout`] so that this stays the only rule.

use crate::linalg::{self, c64, CMat, RMat, ONE, ZERO};
use faer::Mat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("label `{0}` not found in layout")]
    LabelNotFound(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("factor `{0}` has zero dimension")]
    ZeroDimension(String),
    #[error("matrix side {got} does not match layout dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shared label `{label}` has dimension {left} on one side and {right} on the other")]
    SharedDimension {
        label: String,
        left: usize,
        right: usize,
    },
    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
}

/// Ordered list of labeled tensor factors.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubsystemLayout {
    factors: Vec<(String, usize)>,
}

impl SubsystemLayout {
    pub fn new<S: Into<String>>(
        factors: impl IntoIterator<Item = (S, usize)>,
    ) -> Result<Self, TensorError> {
        let factors: Vec<(String, usize)> =
            factors.into_iter().map(|(l, d)| (l.into(), d)).collect();
        for (k, (l, d)) in factors.iter().enumerate() {
            if *d == 0 {
                return Err(TensorError::ZeroDimension(l.clone()));
            }
            if factors[..k].iter().any(|(m, _)| m == l) {
                return Err(TensorError::DuplicateLabel(l.clone()));
            }
        }
        Ok(Self { factors })
    }

    /// Layout with no factors (the scalar space, dimension 1).
    pub fn scalar() -> Self {
        Self {
            factors: Vec::new(),
        }
    }

    pub fn factors(&self) -> &[(String, usize)] {
        &self.factors
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.factors.iter().map(|(l, _)| l.as_str())
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|(_, d)| *d).collect()
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.factors.iter().map(|(_, d)| *d).product()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.factors.iter().any(|(l, _)| l == label)
    }

    pub fn position(&self, label: &str) -> Result<usize, TensorError> {
        self.factors
            .iter()
            .position(|(l, _)| l == label)
            .ok_or_else(|| TensorError::LabelNotFound(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize, TensorError> {
        Ok(self.factors[self.position(label)?].1)
    }

    pub fn positions<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>, TensorError> {
        let mut p = labels
            .iter()
            .map(|l| self.position(l.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        p.sort_unstable();
        p.dedup();
        Ok(p)
    }

    /// The layout with the given factors removed, order preserved.
    pub fn without<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self, TensorError> {
        let drop = self.positions(labels)?;
        Ok(Self {
            factors: self
                .factors
                .iter()
                .enumerate()
                .filter(|(k, _)| !drop.contains(k))
                .map(|(_, f)| f.clone())
                .collect(),
        })
    }

    /// Sub-layout of the given labels, in this layout's order.
    pub fn restrict<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self, TensorError> {
        let keep = self.positions(labels)?;
        Ok(Self {
            factors: keep.iter().map(|&k| self.factors[k].clone()).collect(),
        })
    }

    pub fn concat(&self, other: &Self) -> Result<Self, TensorError> {
        Self::new(self.factors.iter().chain(other.factors.iter()).cloned())
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.factors.len()];
        for k in (0..self.factors.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.factors[k + 1].1;
        }
        s
    }

    /// Digits of a flat index, one per factor.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut d = vec![0; self.factors.len()];
        for k in (0..self.factors.len()).rev() {
            let n = self.factors[k].1;
            d[k] = index % n;
            index /= n;
        }
        d
    }

    pub fn flat(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.factors)
            .fold(0, |acc, (&x, (_, n))| acc * n + x)
    }
}

/// Flat-index bookkeeping for splitting a layout into selected and remaining factors.
pub(crate) struct Split {
    /// Offset contributed by each compact selected index.
    pub sel_off: Vec<usize>,
    /// Offset contributed by each compact remaining index.
    pub rest_off: Vec<usize>,
    /// Compact selected index of every flat index.
    pub sel_of: Vec<usize>,
    /// Compact remaining index of every flat index.
    pub rest_of: Vec<usize>,
}

fn offsets(dims: &[usize], strides: &[usize], pos: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for &p in pos {
        let mut next = Vec::with_capacity(out.len() * dims[p]);
        for &o in &out {
            for x in 0..dims[p] {
                next.push(o + x * strides[p]);
            }
        }
        out = next;
    }
    out
}

impl Split {
    pub fn new(layout: &SubsystemLayout, sel: &[usize]) -> Self {
        let dims = layout.dims();
        let strides = layout.strides();
        let rest: Vec<usize> = (0..dims.len()).filter(|k| !sel.contains(k)).collect();
        let sel_off = offsets(&dims, &strides, sel);
        let rest_off = offsets(&dims, &strides, &rest);
        let total = layout.total_dim();
        let mut sel_of = vec![0; total];
        let mut rest_of = vec![0; total];
        for (s, &so) in sel_off.iter().enumerate() {
            for (r, &ro) in rest_off.iter().enumerate() {
                sel_of[so + ro] = s;
                rest_of[so + ro] = r;
            }
        }
        Self {
            sel_off,
            rest_off,
            sel_of,
            rest_of,
        }
    }
}

/// A dense complex matrix on a labeled layout.
#[derive(Clone, Debug)]
pub struct LabeledMatrix {
    layout: SubsystemLayout,
    data: CMat,
}

impl LabeledMatrix {
    pub fn new(layout: SubsystemLayout, data: CMat) -> Result<Self, TensorError> {
        let n = layout.total_dim();
        if data.nrows() != n || data.ncols() != n {
            return Err(TensorError::DimensionMismatch {
                expected: n,
                got: data.nrows().max(data.ncols()),
            });
        }
        Ok(Self { layout, data })
    }

    /// Builds a Hermitian-flagged matrix; the stored entries are `(M + M†)/2`.
    pub fn hermitian(layout: SubsystemLayout, data: CMat) -> Result<Self, TensorError> {
        let m = Self::new(layout, data)?;
        Ok(Self {
            layout: m.layout,
            data: linalg::hermitize(&m.data),
        })
    }

    pub fn identity(layout: SubsystemLayout) -> Self {
        let n = layout.total_dim();
        Self {
            layout,
            data: linalg::identity(n),
        }
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMat {
        &self.data
    }

    pub fn into_matrix(self) -> CMat {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn trace(&self) -> c64 {
        linalg::trace(&self.data)
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        linalg::herm_defect(&self.data) <= rel_tol * linalg::frob(&self.data).max(1e-300)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            layout: self.layout.clone(),
            data: linalg::scale_re(&self.data, s),
        }
    }

    /// Frobenius distance after aligning `other` to this layout's factor order.
    pub fn distance(&self, other: &Self) -> Result<f64, TensorError> {
        let labels: Vec<&str> = self.layout.labels().collect();
        let o = permute(other, &labels)?;
        if o.layout != self.layout {
            return Err(TensorError::DimensionMismatch {
                expected: self.dim(),
                got: o.dim(),
            });
        }
        Ok(linalg::frob(&(&self.data - &o.data)))
    }
}

fn check_labels<S: AsRef<str>>(
    layout: &SubsystemLayout,
    labels: &[S],
) -> Result<Vec<usize>, TensorError> {
    layout.positions(labels)
}

/// Trace over the listed factors.
pub fn partial_trace<S: AsRef<str>>(
    m: &LabeledMatrix,
    labels: &[S],
) -> Result<LabeledMatrix, TensorError> {
    let sel = check_labels(&m.layout, labels)?;
    let split = Split::new(&m.layout, &sel);
    let kept = m.layout.without(labels)?;
    let n = split.rest_off.len();
    let a = &m.data;
    let data = Mat::from_fn(n, n, |i, j| {
        let (ri, rj) = (split.rest_off[i], split.rest_off[j]);
        split.sel_off.iter().map(|&s| a[(ri + s, rj + s)]).sum()
    });
    LabeledMatrix::new(kept, data)
}

/// `(⊗ I/d over labels) ⊗ Tr_labels M`, in the original layout.
pub fn neutralize<S: AsRef<str>>(
    m: &LabeledMatrix,
    labels: &[S],
) -> Result<LabeledMatrix, TensorError> {
    let sel = check_labels(&m.layout, labels)?;
    let split = Split::new(&m.layout, &sel);
    let ds = split.sel_off.len() as f64;
    let t = partial_trace(m, labels)?;
    let n = m.dim();
    let data = Mat::from_fn(n, n, |i, j| {
        if split.sel_of[i] == split.sel_of[j] {
            t.data[(split.rest_of[i], split.rest_of[j])] / ds
        } else {
            ZERO
        }
    });
    LabeledMatrix::new(m.layout.clone(), data)
}

/// Transpose on the listed factors only.
pub fn partial_transpose<S: AsRef<str>>(
    m: &LabeledMatrix,
    labels: &[S],
) -> Result<LabeledMatrix, TensorError> {
    let sel = check_labels(&m.layout, labels)?;
    let split = Split::new(&m.layout, &sel);
    let part: Vec<usize> = split.sel_of.iter().map(|&s| split.sel_off[s]).collect();
    let n = m.dim();
    let a = &m.data;
    let data = Mat::from_fn(n, n, |i, j| {
        a[(i - part[i] + part[j], j - part[j] + part[i])]
    });
    LabeledMatrix::new(m.layout.clone(), data)
}

/// Index map sending a flat index of `to` to the flat index of `from` with the same digits.
pub(crate) fn permutation_map(
    from: &SubsystemLayout,
    to: &SubsystemLayout,
) -> Result<Vec<usize>, TensorError> {
    let pos: Vec<usize> = to
        .labels()
        .map(|l| from.position(l))
        .collect::<Result<_, _>>()?;
    let strides = from.strides();
    let dims = to.dims();
    let mut map = vec![0usize];
    for (k, &p) in pos.iter().enumerate() {
        let mut next = Vec::with_capacity(map.len() * dims[k]);
        for &o in &map {
            for x in 0..dims[k] {
                next.push(o + x * strides[p]);
            }
        }
        map = next;
    }
    Ok(map)
}

/// Reorders factors to `order`, which must list every label exactly once.
pub fn permute<S: AsRef<str>>(
    m: &LabeledMatrix,
    order: &[S],
) -> Result<LabeledMatrix, TensorError> {
    let to = SubsystemLayout::new(
        order
            .iter()
            .map(|l| Ok((l.as_ref().to_string(), m.layout.dim_of(l.as_ref())?)))
            .collect::<Result<Vec<_>, TensorError>>()?,
    )?;
    if to.len() != m.layout.len() {
        let missing = m
            .layout
            .labels()
            .find(|l| !to.contains(l))
            .unwrap_or_default();
        return Err(TensorError::LabelNotFound(missing.to_string()));
    }
    let map = permutation_map(&m.layout, &to)?;
    let a = &m.data;
    let n = m.dim();
    LabeledMatrix::new(to, Mat::from_fn(n, n, |i, j| a[(map[i], map[j])]))
}

/// Reorders the entries of a state vector from layout `from` to layout `to`.
pub fn permute_vector(
    v: &[c64],
    from: &SubsystemLayout,
    to: &SubsystemLayout,
) -> Result<Vec<c64>, TensorError> {
    let map = permutation_map(from, to)?;
    Ok(map.iter().map(|&k| v[k]).collect())
}

/// `A ⊗ B` with concatenated layouts.
pub fn tensor(a: &LabeledMatrix, b: &LabeledMatrix) -> Result<LabeledMatrix, TensorError> {
    LabeledMatrix::new(a.layout.concat(&b.layout)?, linalg::kron(&a.data, &b.data))
}

/// `M ⊗ I` on the factors of `target` that `M` lacks, arranged in `target` order.
pub fn embed(m: &LabeledMatrix, target: &SubsystemLayout) -> Result<LabeledMatrix, TensorError> {
    for (l, d) in m.layout.factors() {
        let td = target.dim_of(l)?;
        if td != *d {
            return Err(TensorError::SharedDimension {
                label: l.clone(),
                left: *d,
                right: td,
            });
        }
    }
    let own: Vec<&str> = target.labels().filter(|l| m.layout.contains(l)).collect();
    let mm = permute(m, &own)?;
    let sel = target.positions(&own)?;
    let split = Split::new(target, &sel);
    let n = target.total_dim();
    let a = &mm.data;
    let data = Mat::from_fn(n, n, |i, j| {
        if split.rest_of[i] == split.rest_of[j] {
            a[(split.sel_of[i], split.sel_of[j])]
        } else {
            ZERO
        }
    });
    LabeledMatrix::new(target.clone(), data)
}

/// `exp(-i H t)` for Hermitian `H`.
pub fn herm_expm(h: &LabeledMatrix, t: f64) -> Result<LabeledMatrix, TensorError> {
    let defect = linalg::herm_defect(&h.data);
    if defect > 1e-10 * linalg::frob(&h.data).max(1.0) {
        return Err(TensorError::NotHermitian(defect));
    }
    let u = linalg::herm_fn(&h.data, |w| c64::from_polar(1.0, -w * t));
    LabeledMatrix::new(h.layout.clone(), u)
}

/// Real embedding `[[Re H, -Im H], [Im H, Re H]]`.
pub fn realify(h: &CMat) -> RMat {
    let n = h.nrows();
    Mat::from_fn(2 * n, 2 * n, |i, j| {
        let x = h[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => x.re,
            (true, false) => -x.im,
            (false, true) => x.im,
        }
    })
}

/// Inverse of [`realify`] on its image.
pub fn derealify(r: &RMat) -> CMat {
    let n = r.nrows() / 2;
    Mat::from_fn(n, n, |i, j| c64::new(r[(i, j)], r[(i + n, j)]))
}

/// `|I⟩⟩ = Σ_k |k⟩|k⟩` on a `d x d` pair.
pub fn max_entangled(d: usize) -> Vec<c64> {
    let mut v = vec![ZERO; d * d];
    for k in 0..d {
        v[k * d + k] = ONE;
    }
    v
}

/// A sparse Hermitian operator as `(row, col, value)` triplets, both triangles present.
pub type SparseOp = Vec<(usize, usize, c64)>;

/// Local Hermitian basis on `C^d` with `Tr(B_a B_b) = d δ_ab` and `B_0 = I`.
///
/// For `d = 2` this is `I, X, Y, Z`; otherwise generalized Gell-Mann matrices.
pub fn local_basis(d: usize) -> Vec<SparseOp> {
    let s = (d as f64 / 2.0).sqrt();
    let mut out = vec![(0..d).map(|k| (k, k, ONE)).collect::<SparseOp>()];
    for j in 0..d {
        for k in j + 1..d {
            out.push(vec![(j, k, c64::new(s, 0.0)), (k, j, c64::new(s, 0.0))]);
            out.push(vec![(j, k, c64::new(0.0, -s)), (k, j, c64::new(0.0, s))]);
        }
    }
    for l in 1..d {
        let c = s * (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut op: SparseOp = (0..l).map(|m| (m, m, c64::new(c, 0.0))).collect();
        op.push((l, l, c64::new(-c * l as f64, 0.0)));
        out.push(op);
    }
    out
}

/// Tensor-product Hermitian basis ("strings") over a layout.
///
/// String ids are row-major over factors with local index `0..d²` per factor;
/// id 0 is the identity. `Tr(σ τ) = D δ_στ` with `D` the total dimension.
#[derive(Clone, Debug)]
pub struct ProductBasis {
    dims: Vec<usize>,
    local: Vec<Vec<SparseOp>>,
}

impl ProductBasis {
    pub fn new(layout: &SubsystemLayout) -> Self {
        let dims = layout.dims();
        let local = dims.iter().map(|&d| local_basis(d)).collect();
        Self { dims, local }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().map(|d| d * d).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Local indices of a string, one per factor.
    pub fn digits(&self, mut id: usize) -> Vec<usize> {
        let mut d = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            let n = self.dims[k] * self.dims[k];
            d[k] = id % n;
            id /= n;
        }
        d
    }

    /// True when the string acts as identity on every listed factor position.
    pub fn is_identity_on(&self, id: usize, positions: &[usize]) -> bool {
        let d = self.digits(id);
        positions.iter().all(|&p| d[p] == 0)
    }

    /// Sparse entries of a string.
    pub fn element(&self, id: usize) -> SparseOp {
        let digits = self.digits(id);
        let mut out: SparseOp = vec![(0, 0, ONE)];
        for (k, &a) in digits.iter().enumerate() {
            let d = self.dims[k];
            let op = &self.local[k][a];
            let mut next = Vec::with_capacity(out.len() * op.len());
            for &(r, c, v) in &out {
                for &(r2, c2, v2) in op {
                    next.push((r * d + r2, c * d + c2, v * v2));
                }
            }
            out = next;
        }
        out
    }

    /// `Tr(σ M) / D`, the coefficient of the string in `M`.
    pub fn coefficient(&self, m: &CMat, id: usize) -> f64 {
        let s: c64 = self
            .element(id)
            .iter()
            .map(|&(r, c, v)| v * m[(c, r)])
            .sum();
        s.re / self.total_dim() as f64
    }

    pub fn dense(&self, id: usize) -> CMat {
        let n = self.total_dim();
        let mut m = linalg::zeros(n, n);
        for (r, c, v) in self.element(id) {
            m[(r, c)] += v;
        }
        m
    }
}
