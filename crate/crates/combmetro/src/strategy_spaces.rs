//! Primal and dual affine spaces of the five strategy families, the SWITCH
//! template vector, and the OCB process with its causal witness.
//!
//! Factor labels are `"1"..="2N"`: odd labels are channel inputs, even labels outputs.
//! Every neutralization equation is diagonal in the product string basis, so
//! spaces built from such equations are coordinate subspaces: a string is either
//! free or pinned to zero, and the identity coefficient carries the trace.

use crate::linalg::{self, c64, CMat, ONE, ZERO};
use crate::tensor_algebra::{self as ta, LabeledMatrix, ProductBasis, SparseOp, SubsystemLayout};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Par,
    Seq,
    Swi,
    Sup,
    Ico,
    /// Sequential with identity wires between the uses.
    ControlFree,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [Self::Par, Self::Seq, Self::Swi, Self::Sup, Self::Ico];

    pub fn name(self) -> &'static str {
        match self {
            Self::Par => "par",
            Self::Seq => "seq",
            Self::Swi => "swi",
            Self::Sup => "sup",
            Self::Ico => "ico",
            Self::ControlFree => "control_free",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "par" => Some(Self::Par),
            "seq" => Some(Self::Seq),
            "swi" | "switch" => Some(Self::Swi),
            "sup" => Some(Self::Sup),
            "ico" => Some(Self::Ico),
            "control_free" | "controlfree" => Some(Self::ControlFree),
            _ => None,
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A strategy family for `N` uses with per-label dimensions `d_1..d_2N`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategySetSpec {
    pub kind: StrategyKind,
    pub n: usize,
    pub dims: Vec<usize>,
    /// Query order for `Seq`, 0-based channel indices in time order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<usize>>,
}

impl StrategySetSpec {
    pub fn new(kind: StrategyKind, n: usize, dims: Vec<usize>) -> Self {
        assert_eq!(
            dims.len(),
            2 * n,
            "need one dimension per input and output label"
        );
        Self {
            kind,
            n,
            dims,
            order: None,
        }
    }

    /// All `2N` labels of dimension `d`.
    pub fn uniform(kind: StrategyKind, n: usize, d: usize) -> Self {
        Self::new(kind, n, vec![d; 2 * n])
    }

    /// Sequential family querying channels in the given order.
    pub fn seq_with_order(n: usize, dims: Vec<usize>, order: Vec<usize>) -> Self {
        Self {
            order: Some(order),
            ..Self::new(StrategyKind::Seq, n, dims)
        }
    }

    pub fn layout(&self) -> SubsystemLayout {
        SubsystemLayout::new((1..=2 * self.n).map(|i| (label(i), self.dims[i - 1])))
            .expect("labels are distinct")
    }

    /// Branch orders: all of `S_N` for SWITCH and superposition families, one order otherwise.
    pub fn branches(&self) -> Vec<Vec<usize>> {
        match self.kind {
            StrategyKind::Swi | StrategyKind::Sup => permutations(self.n),
            StrategyKind::Seq => vec![self.order.clone().unwrap_or_else(|| (0..self.n).collect())],
            _ => vec![(0..self.n).collect()],
        }
    }

    /// `Π d_{2i}`.
    pub fn output_product(&self) -> f64 {
        (0..self.n).map(|i| self.dims[2 * i + 1] as f64).product()
    }

    /// `Π d_{2i-1}`.
    pub fn input_product(&self) -> f64 {
        (0..self.n).map(|i| self.dims[2 * i] as f64).product()
    }
}

pub fn label(i: usize) -> String {
    i.to_string()
}

fn in_label(channel: usize) -> String {
    label(2 * channel + 1)
}

fn out_label(channel: usize) -> String {
    label(2 * channel + 2)
}

/// Permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..rest.len() {
            let x = rest.remove(k);
            prefix.push(x);
            rec(prefix, rest, out);
            prefix.pop();
            rest.insert(k, x);
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut (0..n).collect(), &mut out);
    out
}

/// Time-ordered labels `in π(1), out π(1), …, in π(N), out π(N)`.
fn time_order(order: &[usize]) -> Vec<String> {
    order
        .iter()
        .flat_map(|&c| [in_label(c), out_label(c)])
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Primal,
    Dual,
}

/// One linear condition on a Hermitian operator `Q`.
#[derive(Clone, Debug, PartialEq)]
pub enum Constraint {
    /// `Σ_t c_t · neutralize(Q, S_t) = 0`.
    Neutral(Vec<(f64, Vec<String>)>),
    /// `Tr Q = c`.
    Trace(f64),
    /// Coefficients of the listed product strings vanish.
    Forbidden(Vec<usize>),
    /// `(⊗⟨⟨I|_links) Tr_last Q (⊗|I⟩⟩_links) = I_first`.
    Sandwich {
        first: String,
        links: Vec<(String, String)>,
        last: String,
    },
    /// `Q = ρ_first ⊗ (⊗|I⟩⟩⟨⟨I|_links) ⊗ I_last` for some `ρ`.
    Wired {
        first: String,
        links: Vec<(String, String)>,
        last: String,
    },
}

/// Affine space of Hermitian operators given by a list of constraints.
#[derive(Clone, Debug)]
pub struct AffineSpace {
    pub layout: SubsystemLayout,
    pub constraints: Vec<Constraint>,
    pub role: Role,
    /// Query order of the branch this space belongs to.
    pub branch: Option<Vec<usize>>,
}

/// Allowed and pinned product strings of a coordinate space.
#[derive(Clone, Debug)]
pub struct Support {
    pub basis: ProductBasis,
    /// Strings with a free coefficient, identity excluded.
    pub free: Vec<usize>,
    /// Strings pinned to zero.
    pub pinned: Vec<usize>,
    /// Required trace.
    pub trace: f64,
}

/// How primal elements are parametrized for the synthesis program.
#[derive(Clone, Debug)]
pub enum Parametrization {
    /// `Q = Σ_σ c_σ σ` over the identity plus the free strings.
    Coordinates(Support),
    /// `Q = ρ_first ⊗ R` with a fixed PSD operator `R`; `layout_order` lists labels of `ρ ⊗ R`.
    Lifted {
        first: String,
        rest: LabeledMatrix,
        trace: f64,
    },
}

impl AffineSpace {
    fn new(
        layout: SubsystemLayout,
        constraints: Vec<Constraint>,
        role: Role,
        branch: Option<Vec<usize>>,
    ) -> Self {
        Self {
            layout,
            constraints,
            role,
            branch,
        }
    }

    pub fn trace(&self) -> Option<f64> {
        self.constraints.iter().find_map(|c| match c {
            Constraint::Trace(t) => Some(*t),
            _ => None,
        })
    }

    /// Coordinate description, if every constraint is a neutralization, trace or support condition.
    pub fn support(&self) -> Option<Support> {
        let basis = ProductBasis::new(&self.layout);
        let mut pinned_flag = vec![false; basis.len()];
        let mut trace = None;
        for c in &self.constraints {
            match c {
                Constraint::Neutral(terms) => {
                    let sets: Vec<(f64, Vec<usize>)> = terms
                        .iter()
                        .map(|(w, s)| {
                            (
                                *w,
                                self.layout
                                    .positions(s)
                                    .expect("constraint labels belong to layout"),
                            )
                        })
                        .collect();
                    for (id, flag) in pinned_flag.iter_mut().enumerate().skip(1) {
                        let weight: f64 = sets
                            .iter()
                            .filter(|(_, p)| basis.is_identity_on(id, p))
                            .map(|(w, _)| w)
                            .sum();
                        if weight.abs() > 1e-12 {
                            *flag = true;
                        }
                    }
                }
                Constraint::Forbidden(ids) => ids.iter().for_each(|&i| pinned_flag[i] = true),
                Constraint::Trace(t) => trace = Some(*t),
                Constraint::Sandwich { .. } | Constraint::Wired { .. } => return None,
            }
        }
        let free = (1..basis.len()).filter(|&i| !pinned_flag[i]).collect();
        let pinned = (1..basis.len()).filter(|&i| pinned_flag[i]).collect();
        Some(Support {
            basis,
            free,
            pinned,
            trace: trace?,
        })
    }

    /// Largest violation over all constraints (Frobenius for operator equations).
    pub fn residual(&self, q: &CMat) -> f64 {
        let lm =
            LabeledMatrix::new(self.layout.clone(), q.clone()).expect("operator matches layout");
        let mut worst = linalg::herm_defect(q);
        for c in &self.constraints {
            let r = match c {
                Constraint::Neutral(terms) => {
                    let mut acc = linalg::zeros(q.nrows(), q.ncols());
                    for (w, s) in terms {
                        let n = ta::neutralize(&lm, s).expect("constraint labels belong to layout");
                        acc = &acc + linalg::scale_re(n.matrix(), *w);
                    }
                    linalg::frob(&acc)
                }
                Constraint::Trace(t) => (linalg::trace(q).re - t).abs(),
                Constraint::Forbidden(ids) => {
                    let basis = ProductBasis::new(&self.layout);
                    let d = self.layout.total_dim() as f64;
                    ids.iter()
                        .map(|&i| (basis.coefficient(q, i) * d.sqrt()).powi(2))
                        .sum::<f64>()
                        .sqrt()
                }
                Constraint::Sandwich { first, links, last } => {
                    let s = sandwich(&lm, first, links, last);
                    linalg::frob(&(&s - linalg::identity(s.nrows())))
                }
                Constraint::Wired { first, links, last } => {
                    let r = wired_rest(&self.layout, first, links, last);
                    let rho = lift_coefficient(&lm, first, &r);
                    let fit = lift(&rho, first, &r, &self.layout);
                    linalg::frob(&(q - fit.matrix()))
                }
            };
            worst = worst.max(r);
        }
        worst
    }

    /// A feasible element that the constructors guarantee.
    pub fn canonical_point(&self) -> CMat {
        let n = self.layout.total_dim();
        for c in &self.constraints {
            match c {
                Constraint::Sandwich { links, .. } => {
                    let d = self.layout.dims()[0] as f64;
                    return linalg::scale_re(
                        &linalg::identity(n),
                        d.powi(-(links.len() as i32 + 1)),
                    );
                }
                Constraint::Wired { first, links, last } => {
                    let r = wired_rest(&self.layout, first, links, last);
                    let d = self.layout.dim_of(first).expect("label present");
                    let rho = linalg::scale_re(&linalg::identity(d), 1.0 / d as f64);
                    return lift(&rho, first, &r, &self.layout).into_matrix();
                }
                _ => {}
            }
        }
        let t = self.trace().unwrap_or(n as f64);
        linalg::scale_re(&linalg::identity(n), t / n as f64)
    }

    /// Real linear rows `Tr(F_k Q) = b_k` describing the space, with Hermitian `F_k`.
    pub fn rows(&self) -> Option<Vec<(SparseOp, f64)>> {
        if let Some(sup) = self.support() {
            let mut rows: Vec<(SparseOp, f64)> = sup
                .pinned
                .iter()
                .map(|&id| (sup.basis.element(id), 0.0))
                .collect();
            rows.push((sup.basis.element(0), sup.trace));
            return Some(rows);
        }
        let mut rows = Vec::new();
        for c in &self.constraints {
            match c {
                Constraint::Sandwich { first, links, last } => {
                    rows.extend(sandwich_rows(&self.layout, first, links, last))
                }
                _ => return None,
            }
        }
        Some(rows)
    }

    pub fn parametrization(&self) -> Option<Parametrization> {
        if let Some(sup) = self.support() {
            return Some(Parametrization::Coordinates(sup));
        }
        for c in &self.constraints {
            if let Constraint::Wired { first, links, last } = c {
                return Some(Parametrization::Lifted {
                    first: first.clone(),
                    rest: wired_rest(&self.layout, first, links, last),
                    trace: self.trace().unwrap_or(1.0),
                });
            }
        }
        None
    }
}

/// `(⊗|I⟩⟩⟨⟨I|_links) ⊗ I_last` on the layout's other factors, in layout order.
pub fn wired_rest(
    layout: &SubsystemLayout,
    first: &str,
    links: &[(String, String)],
    last: &str,
) -> LabeledMatrix {
    let mut m = LabeledMatrix::identity(
        SubsystemLayout::new([(last, layout.dim_of(last).expect("label present"))])
            .expect("single label"),
    );
    for (a, b) in links {
        let d = layout.dim_of(a).expect("label present");
        let v = ta::max_entangled(d);
        let l = LabeledMatrix::new(
            SubsystemLayout::new([(a.as_str(), d), (b.as_str(), d)]).expect("distinct"),
            linalg::outer(&v, &v),
        )
        .expect("square");
        m = ta::tensor(&l, &m).expect("disjoint labels");
    }
    let order: Vec<&str> = layout.labels().filter(|l| *l != first).collect();
    ta::permute(&m, &order).expect("same label set")
}

/// `ρ_first ⊗ rest` arranged in `layout` order.
pub fn lift(
    rho: &CMat,
    first: &str,
    rest: &LabeledMatrix,
    layout: &SubsystemLayout,
) -> LabeledMatrix {
    let r = LabeledMatrix::new(
        SubsystemLayout::new([(first, rho.nrows())]).expect("single label"),
        rho.clone(),
    )
    .expect("square");
    let t = ta::tensor(&r, rest).expect("disjoint labels");
    let order: Vec<&str> = layout.labels().collect();
    ta::permute(&t, &order).expect("same label set")
}

/// `Tr_rest[Q (I_first ⊗ R)]`.
fn contract_rest(q: &LabeledMatrix, first: &str, rest: &LabeledMatrix) -> CMat {
    let e = ta::embed(rest, q.layout()).expect("rest lives on the remaining labels");
    let prod = LabeledMatrix::new(q.layout().clone(), q.matrix() * e.matrix()).expect("square");
    let others: Vec<&str> = q.layout().labels().filter(|l| *l != first).collect();
    ta::partial_trace(&prod, &others)
        .expect("labels present")
        .into_matrix()
}

/// Least-squares `ρ` with `Q ≈ ρ ⊗ R`.
pub fn lift_coefficient(q: &LabeledMatrix, first: &str, rest: &LabeledMatrix) -> CMat {
    let n2 = linalg::inner_re(rest.matrix(), rest.matrix());
    linalg::scale_re(&contract_rest(q, first, rest), 1.0 / n2)
}

/// `(⊗⟨⟨I|_links) Tr_last Q (⊗|I⟩⟩_links)` as an operator on `first`.
pub fn sandwich(q: &LabeledMatrix, first: &str, links: &[(String, String)], last: &str) -> CMat {
    contract_rest(q, first, &wired_rest(q.layout(), first, links, last))
}

fn sandwich_rows(
    layout: &SubsystemLayout,
    first: &str,
    links: &[(String, String)],
    last: &str,
) -> Vec<(SparseOp, f64)> {
    let rest = wired_rest(layout, first, links, last);
    let d = layout.dim_of(first).expect("label present");
    let mut rows = Vec::new();
    let lift_sparse = |rho: &CMat| -> SparseOp {
        let m = lift(rho, first, &rest, layout).into_matrix();
        let mut s = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if m[(i, j)].norm_sqr() > 0.0 {
                    s.push((i, j, m[(i, j)]));
                }
            }
        }
        s
    };
    // Tr[Q (E ⊗ R)] equals the (b,a) entry of the sandwich for E = |a⟩⟨b|.
    for a in 0..d {
        for b in a..d {
            let mut e = linalg::zeros(d, d);
            if a == b {
                e[(a, a)] = ONE;
                rows.push((lift_sparse(&e), 1.0));
            } else {
                e[(a, b)] = c64::new(0.5, 0.0);
                e[(b, a)] = c64::new(0.5, 0.0);
                rows.push((lift_sparse(&e), 0.0));
                let mut f = linalg::zeros(d, d);
                f[(a, b)] = c64::new(0.0, 0.5);
                f[(b, a)] = c64::new(0.0, -0.5);
                rows.push((lift_sparse(&f), 0.0));
            }
        }
    }
    rows
}

fn neutral(lhs: Vec<String>, rhs: Vec<String>) -> Constraint {
    Constraint::Neutral(vec![(1.0, lhs), (-1.0, rhs)])
}

/// Dual affine spaces `S̄^i`, one per branch.
pub fn dual_space(spec: &StrategySetSpec) -> Vec<AffineSpace> {
    let layout = spec.layout();
    let n = spec.n;
    let tr = spec.input_product();
    match spec.kind {
        StrategyKind::Par => {
            let evens: Vec<String> = (0..n).map(out_label).collect();
            let all: Vec<String> = (1..=2 * n).map(label).collect();
            vec![AffineSpace::new(
                layout,
                vec![neutral(evens, all), Constraint::Trace(tr)],
                Role::Dual,
                None,
            )]
        }
        StrategyKind::Ico => {
            let mut cs: Vec<Constraint> = (0..n)
                .map(|c| neutral(vec![out_label(c), in_label(c)], vec![out_label(c)]))
                .collect();
            cs.push(Constraint::Trace(tr));
            vec![AffineSpace::new(layout, cs, Role::Dual, None)]
        }
        StrategyKind::Seq | StrategyKind::Sup => spec
            .branches()
            .into_iter()
            .map(|order| {
                let t = time_order(&order);
                let mut cs: Vec<Constraint> = (0..n)
                    .map(|i| neutral(t[2 * i..].to_vec(), t[2 * i + 1..].to_vec()))
                    .collect();
                cs.push(Constraint::Trace(tr));
                AffineSpace::new(layout.clone(), cs, Role::Dual, Some(order))
            })
            .collect(),
        StrategyKind::Swi | StrategyKind::ControlFree => spec
            .branches()
            .into_iter()
            .map(|order| {
                let (first, links, last) = wiring(&order);
                AffineSpace::new(
                    layout.clone(),
                    vec![Constraint::Sandwich { first, links, last }],
                    Role::Dual,
                    Some(order),
                )
            })
            .collect(),
    }
}

fn wiring(order: &[usize]) -> (String, Vec<(String, String)>, String) {
    let first = in_label(order[0]);
    let links = order
        .windows(2)
        .map(|w| (out_label(w[0]), in_label(w[1])))
        .collect();
    let last = out_label(*order.last().expect("N >= 1"));
    (first, links, last)
}

/// Primal affine spaces `S^i` of the marginals `Tr_F P`, one per branch.
pub fn primal_space(spec: &StrategySetSpec) -> Vec<AffineSpace> {
    let layout = spec.layout();
    let n = spec.n;
    let tr = spec.output_product();
    match spec.kind {
        StrategyKind::Par => {
            let evens: Vec<String> = (0..n).map(out_label).collect();
            vec![AffineSpace::new(
                layout,
                vec![neutral(vec![], evens), Constraint::Trace(tr)],
                Role::Primal,
                None,
            )]
        }
        StrategyKind::Ico if n == 1 => primal_space(&StrategySetSpec {
            kind: StrategyKind::Seq,
            order: None,
            ..spec.clone()
        }),
        StrategyKind::Ico if n == 2 => {
            let l = |v: &[usize]| v.iter().map(|&i| label(i)).collect::<Vec<_>>();
            let cs = vec![
                neutral(l(&[1, 2]), l(&[1, 2, 4])),
                neutral(l(&[3, 4]), l(&[2, 3, 4])),
                Constraint::Neutral(vec![
                    (1.0, vec![]),
                    (-1.0, l(&[4])),
                    (-1.0, l(&[2])),
                    (1.0, l(&[2, 4])),
                ]),
                Constraint::Trace(tr),
            ];
            vec![AffineSpace::new(layout, cs, Role::Primal, None)]
        }
        StrategyKind::Ico => {
            let dual = dual_space(spec)
                .remove(0)
                .support()
                .expect("no-signaling dual is a coordinate space");
            vec![AffineSpace::new(
                layout,
                vec![Constraint::Forbidden(dual.free), Constraint::Trace(tr)],
                Role::Primal,
                None,
            )]
        }
        StrategyKind::Seq | StrategyKind::Sup => spec
            .branches()
            .into_iter()
            .map(|order| {
                let t = time_order(&order);
                let mut cs = vec![neutral(vec![], vec![t[2 * n - 1].clone()])];
                for i in 1..n {
                    cs.push(neutral(t[2 * i - 1..].to_vec(), t[2 * i..].to_vec()));
                }
                cs.push(Constraint::Trace(tr));
                AffineSpace::new(layout.clone(), cs, Role::Primal, Some(order))
            })
            .collect(),
        StrategyKind::Swi | StrategyKind::ControlFree => spec
            .branches()
            .into_iter()
            .map(|order| {
                let (first, links, last) = wiring(&order);
                AffineSpace::new(
                    layout.clone(),
                    vec![
                        Constraint::Wired { first, links, last },
                        Constraint::Trace(tr),
                    ],
                    Role::Primal,
                    Some(order),
                )
            })
            .collect(),
    }
}

/// Layout of the SWITCH template vector: `T, 1..2N, FT, C, FC`.
pub fn switch_layout(n: usize, d: usize) -> SubsystemLayout {
    let k: usize = (1..=n).product();
    let mut f = vec![("T".to_string(), d)];
    f.extend((1..=2 * n).map(|i| (label(i), d)));
    f.push(("FT".into(), d));
    f.push(("C".into(), k));
    f.push(("FC".into(), k));
    SubsystemLayout::new(f).expect("labels are distinct")
}

/// `Σ_π |π⟩_C |I⟩⟩_{T,in π(1)} (⊗ |I⟩⟩_{out π(i), in π(i+1)}) |I⟩⟩_{out π(N),FT} |π⟩_{FC}`.
///
/// The ancilla wire `|I⟩⟩_{A,F_A}` factors out and is left implicit.
pub fn switch_template(n: usize, d: usize) -> (SubsystemLayout, Vec<c64>) {
    let layout = switch_layout(n, d);
    let mut v = vec![ZERO; layout.total_dim()];
    let pos = |l: &str| layout.position(l).expect("label present");
    for (k, order) in permutations(n).iter().enumerate() {
        let (first, links, last) = wiring(order);
        let wires = n + 1;
        for w in 0..d.pow(wires as u32) {
            let mut vals = vec![0; wires];
            let mut x = w;
            for slot in vals.iter_mut() {
                *slot = x % d;
                x /= d;
            }
            let mut digits = vec![0; layout.len()];
            digits[pos("T")] = vals[0];
            digits[pos(&first)] = vals[0];
            for (j, (a, b)) in links.iter().enumerate() {
                digits[pos(a)] = vals[j + 1];
                digits[pos(b)] = vals[j + 1];
            }
            digits[pos(&last)] = vals[n];
            digits[pos("FT")] = vals[n];
            digits[pos("C")] = k;
            digits[pos("FC")] = k;
            v[layout.flat(&digits)] += ONE;
        }
    }
    (layout, v)
}

fn pauli_string(ops: &[(usize, char)], n: usize) -> CMat {
    let x = linalg::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
    let z = linalg::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]);
    let mut m = linalg::identity(1);
    for q in 1..=n {
        let f = match ops.iter().find(|(k, _)| *k == q).map(|(_, c)| *c) {
            Some('X') => x.clone(),
            Some('Z') => z.clone(),
            _ => linalg::identity(2),
        };
        m = linalg::kron(&m, &f);
    }
    m
}

fn qubit_layout4() -> SubsystemLayout {
    SubsystemLayout::new((1..=4).map(|i| (label(i), 2))).expect("labels are distinct")
}

/// `Tr_F P_OCB = (1/4)[I + (Z₂Z₃ + Z₁X₃Z₄)/√2]` on qubits `1..4`.
pub fn ocb_process() -> LabeledMatrix {
    let a = pauli_string(&[(2, 'Z'), (3, 'Z')], 4);
    let b = pauli_string(&[(1, 'Z'), (3, 'X'), (4, 'Z')], 4);
    let m = linalg::scale_re(
        &(linalg::identity(16) + linalg::scale_re(&(a + b), 1.0 / 2f64.sqrt())),
        0.25,
    );
    LabeledMatrix::hermitian(qubit_layout4(), m).expect("16-dim layout")
}

/// `W_OCB = (1/4)(I − Z₂Z₃ − Z₁X₃Z₄)`.
pub fn ocb_witness() -> LabeledMatrix {
    let a = pauli_string(&[(2, 'Z'), (3, 'Z')], 4);
    let b = pauli_string(&[(1, 'Z'), (3, 'X'), (4, 'Z')], 4);
    let m = linalg::scale_re(&(linalg::identity(16) - a - b), 0.25);
    LabeledMatrix::hermitian(qubit_layout4(), m).expect("16-dim layout")
}

/// `Tr[W C]` after aligning factor orders.
pub fn causal_witness_value(w: &LabeledMatrix, c: &LabeledMatrix) -> f64 {
    let order: Vec<&str> = w.layout().labels().collect();
    let c = ta::permute(c, &order).expect("witness and process share labels");
    linalg::inner_re(w.matrix(), c.matrix())
}
