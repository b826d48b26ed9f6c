//! Stability certificates: the Lyapunov inequality on PI operators reduced to
//! a semidefinite program by coefficient matching.
//!
//! With `T̃ = (I−S)∘T`, `Ã = (I−S)∘A` and `K` the constraint operator, we look
//! for `P = ε²I + 𝒵*M𝒵` (with `M ⪰ 0`), a slack `X` and `P₂ = 𝒵₂*M₂𝒵₂` such that
//!
//! ```text
//! Ã*PT̃ + T̃*PÃ + 2αT̃*PT̃ + XK + K*X* + P₂ = 0.
//! ```
//!
//! All operators are moved to the reference interval `[−1, 1]` first; this is a
//! unitary change of variables that makes Legendre bases natural for the cones
//! and for coefficient matching.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::convert::{pde_to_pie, PdeSystem, PieSystem, Trajectory};
use crate::error::{PieError, Result};
use crate::legendre;
use crate::piop::{Dims, PiOp};
use crate::polymat::{Bound, Interval, Poly, PolyMat, Var};
use crate::sdp::{self, SdpProblem, SolveOptions, Status};

/// Default polynomial degree of the Lyapunov cone.
pub const DEFAULT_DEGREE: u32 = 3;

fn reference() -> Interval<f64> {
    Interval { a: -1.0, b: 1.0 }
}

/// Single `L2` output row of an operator.
fn l2_row(op: &PiOp<f64>, k: usize) -> PiOp<f64> {
    PiOp {
        interval: op.interval.clone(),
        out: Dims::new(0, 1),
        inp: op.inp,
        p: PolyMat::zeros(0, op.inp.m),
        q1: PolyMat::zeros(0, op.inp.n),
        q2: op.q2.row_range(k, 1),
        r0: op.r0.row_range(k, 1),
        r1: op.r1.row_range(k, 1),
        r2: op.r2.row_range(k, 1),
    }
}

/// One row of the lifting operator `𝒵`, with `P_k` the Legendre polynomials
/// of the reference interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZRow {
    /// `v ↦ P_p(x) v0[i]`.
    Finite { i: usize, p: u32 },
    /// `v ↦ P_i(x) v1[c](x)`.
    Pointwise { c: usize, i: u32 },
    /// `v ↦ P_i(x) ∫_a^x P_j(θ) v1[c](θ) dθ`.
    Lower { c: usize, i: u32, j: u32 },
    /// `v ↦ P_i(x) ∫_x^b P_j(θ) v1[c](θ) dθ`.
    Upper { c: usize, i: u32, j: u32 },
}

/// `P_i(x) P_j(θ)` in monomials.
fn legendre_product(table: &[Vec<f64>], i: u32, j: u32) -> Poly<f64> {
    let mut out = Poly::zero();
    for (a, ca) in table[i as usize].iter().enumerate() {
        for (b, cb) in table[j as usize].iter().enumerate() {
            if *ca != 0.0 && *cb != 0.0 {
                out.add_term(a as u32, b as u32, ca * cb);
            }
        }
    }
    out
}

/// The cone `{𝒵*M𝒵 : M ⪰ 0}` of positive PI operators.
#[derive(Clone, Debug)]
pub struct PositiveCone {
    pub d: u32,
    pub dims: Dims,
    pub rows: Vec<ZRow>,
    /// `𝒵 : ℝ^m × L2^n → L2^rows`.
    pub z: PiOp<f64>,
}

impl PositiveCone {
    /// Rows: finite inputs weighted by `x^p`, `p ≤ finite_degree`, optionally
    /// the pointwise block `Z_d(x) ⊗ I_n`, and the two one-sided integral
    /// blocks with kernels `P_i(x) P_j(θ)`, `i, j ≤ d`.
    pub fn new(d: u32, finite_degree: u32, dims: Dims, pointwise: bool, interval: &Interval<f64>) -> Self {
        let mut rows = Vec::new();
        for i in 0..dims.m {
            rows.extend((0..=finite_degree).map(|p| ZRow::Finite { i, p }));
        }
        for c in 0..dims.n {
            if pointwise {
                rows.extend((0..=d).map(|i| ZRow::Pointwise { c, i }));
            }
            for i in 0..=d {
                for j in 0..=d {
                    rows.push(ZRow::Lower { c, i, j });
                }
            }
            for i in 0..=d {
                for j in 0..=d {
                    rows.push(ZRow::Upper { c, i, j });
                }
            }
        }
        let size = rows.len();
        let table = legendre::monomial_coeffs(d.max(finite_degree) as usize);
        let mut z = PiOp::zero(interval.clone(), Dims::new(0, size), dims);
        for (k, row) in rows.iter().enumerate() {
            match *row {
                ZRow::Finite { i, p } => z.q2.set(k, i, legendre_product(&table, p, 0)),
                ZRow::Pointwise { c, i } => z.r0.set(k, c, legendre_product(&table, i, 0)),
                ZRow::Lower { c, i, j } => z.r1.set(k, c, legendre_product(&table, i, j)),
                ZRow::Upper { c, i, j } => z.r2.set(k, c, legendre_product(&table, i, j)),
            }
        }
        Self { d, dims, rows, z }
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    /// `𝒵*M𝒵` for a symmetric `M`.
    pub fn operator(&self, m: &DMatrix<f64>) -> Result<PiOp<f64>> {
        let size = self.size();
        if m.nrows() != size || m.ncols() != size {
            return Err(crate::error::dim_err("cone matrix", size, m.nrows()));
        }
        let mp = PolyMat::from_fn(size, size, |r, c| Poly::constant(m[(r, c)]));
        let mz = PiOp::new(
            self.z.interval.clone(),
            self.z.out,
            self.z.inp,
            PolyMat::zeros(0, self.dims.m),
            PolyMat::zeros(0, self.dims.n),
            mp.mul(&self.z.q2)?,
            mp.mul(&self.z.r0)?,
            mp.mul(&self.z.r1)?,
            mp.mul(&self.z.r2)?,
        )?;
        Ok(self.z.adjoint().compose(&mz)?.canonicalize())
    }

    /// `𝒵_k* 𝒵_l + 𝒵_l* 𝒵_k` (or `𝒵_k* 𝒵_k`) for each `k ≤ l`, in
    /// upper-triangular row-major order: the operator multiplying `M_kl`.
    pub fn basis(&self) -> Result<Vec<PiOp<f64>>> {
        let rows: Vec<PiOp<f64>> = (0..self.size()).map(|k| l2_row(&self.z, k)).collect();
        let adj: Vec<PiOp<f64>> = rows.iter().map(PiOp::adjoint).collect();
        let mut out = Vec::with_capacity(self.size() * (self.size() + 1) / 2);
        for k in 0..self.size() {
            for l in k..self.size() {
                let op = adj[k].compose(&rows[l])?;
                out.push(if k == l { op } else { op.add(&op.adjoint())? });
            }
        }
        Ok(out)
    }
}

/// Cone used for the Lyapunov operator on `L2^n`: pointwise and integral
/// blocks of degree `d`.
pub fn build_cone(d: u32, n: usize, interval: &Interval<f64>) -> PositiveCone {
    PositiveCone::new(d, 0, Dims::new(0, n), true, interval)
}

/// Index of an independent coefficient of a self-adjoint PI operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CoeffKey {
    part: u8,
    r: u16,
    c: u16,
    i: u32,
    j: u32,
}

/// Coefficients that determine a self-adjoint operator: `P` and `R0` upper
/// triangles, all of `Q1` and `R1`, each polynomial in the tensor Legendre basis.
fn self_adjoint_coeffs(op: &PiOp<f64>, to_legendre: &[Vec<f64>]) -> Vec<(CoeffKey, f64)> {
    let mut out = Vec::new();
    let mut push = |part: u8, m: &PolyMat<f64>, upper: bool| {
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                if upper && c < r {
                    continue;
                }
                let mut acc: HashMap<(u32, u32), f64> = HashMap::new();
                for (i, j, &v) in m.get(r, c).terms() {
                    for (k, a) in to_legendre[i as usize].iter().enumerate() {
                        for (l, b) in to_legendre[j as usize].iter().enumerate() {
                            if *a != 0.0 && *b != 0.0 {
                                *acc.entry((k as u32, l as u32)).or_insert(0.0) += v * a * b;
                            }
                        }
                    }
                }
                let mut terms: Vec<_> = acc.into_iter().collect();
                terms.sort_unstable_by_key(|t| t.0);
                let max = terms.iter().map(|t| t.1.abs()).fold(0.0, f64::max);
                for ((i, j), v) in terms {
                    if v.abs() > 1e-13 * max {
                        out.push((CoeffKey { part, r: r as u16, c: c as u16, i, j }, v));
                    }
                }
            }
        }
    };
    push(0, &op.p, true);
    push(1, &op.q1, false);
    push(2, &op.r0, true);
    push(3, &op.r1, false);
    out
}

type SparseCol = Vec<(usize, f64)>;

struct RowIndex {
    map: HashMap<CoeffKey, usize>,
    keys: Vec<CoeffKey>,
    to_legendre: Vec<Vec<f64>>,
}

impl RowIndex {
    fn new(max_degree: u32) -> Self {
        Self { map: HashMap::new(), keys: Vec::new(), to_legendre: legendre::from_monomials(max_degree as usize) }
    }

    fn column(&mut self, op: &PiOp<f64>) -> SparseCol {
        let mut col: SparseCol = Vec::new();
        for (key, v) in self_adjoint_coeffs(op, &self.to_legendre) {
            let next = self.keys.len();
            let row = *self.map.entry(key).or_insert(next);
            if row == next {
                self.keys.push(key);
            }
            col.push((row, v));
        }
        col
    }
}

/// Size and timing information about an assembled inequality.
#[derive(Clone, Debug, Default)]
pub struct AssemblyStats {
    pub lyapunov_block: usize,
    pub slack_block: usize,
    pub slack_degree: u32,
    pub free_vars: usize,
    pub constraints: usize,
    pub lhs_degree: u32,
    pub seconds: f64,
}

/// The α-independent part of the coefficient-matching system for one PIE.
pub struct LpiProblem {
    pub ttilde: PiOp<f64>,
    pub atilde: PiOp<f64>,
    pub k: PiOp<f64>,
    pub cone: PositiveCone,
    pub slack_cone: PositiveCone,
    /// Degree of the polynomial entries of the Finsler slack `X`.
    pub x_degree: u32,
    /// Whether the `ℝ^m` input was dropped (it does not enter the inequality).
    pub finite_dropped: bool,
    pub original_interval: Interval<f64>,
    rows: RowIndex,
    /// Per Lyapunov-cone entry: (constant part, coefficient of α).
    p_cols: Vec<(SparseCol, SparseCol)>,
    eps_col: (SparseCol, SparseCol),
    x_cols: Vec<SparseCol>,
    pub x_basis: Vec<XEntry>,
    s_cols: Vec<SparseCol>,
    pub eps2_floor: f64,
    pub maximize_margin: bool,
    pub stats: AssemblyStats,
}

/// One scalar parameter of the slack operator `X : ℝ^m → ℝ^m' × L2^n`.
#[derive(Clone, Copy, Debug)]
pub enum XEntry {
    Finite { r: usize, c: usize },
    Function { r: usize, c: usize, i: u32 },
}

fn symmetric_sum(op: &PiOp<f64>) -> Result<PiOp<f64>> {
    op.add(&op.adjoint())
}

fn columns_uses_r0(cols: &[&PiOp<f64>]) -> bool {
    cols.iter().any(|op| !op.r0.is_zero())
}

/// Options controlling the reduction.
#[derive(Clone, Debug)]
pub struct LpiOptions {
    /// Degree of the Lyapunov cone.
    pub degree: u32,
    /// Degree of the negativity cone; chosen from the inequality's degree when `None`.
    pub slack_degree: Option<u32>,
    /// Degree of the slack polynomials; `2d + 2` when `None`.
    pub x_degree: Option<u32>,
    /// Lower bound on `ε²` under `tr(M_P) + ε² = 1`.
    pub eps2_floor: f64,
    /// Maximize `ε²` instead of solving the plain feasibility problem.
    pub maximize_margin: bool,
    pub solver: SolveOptions,
}

impl Default for LpiOptions {
    fn default() -> Self {
        Self {
            degree: DEFAULT_DEGREE,
            slack_degree: None,
            x_degree: None,
            eps2_floor: EPS2_FLOOR,
            maximize_margin: false,
            solver: SolveOptions::default(),
        }
    }
}

/// Builds the coefficient-matching system for `pie` with trajectory operator `s`.
pub fn assemble(pie: &PieSystem<f64>, s: &Trajectory<f64>, opts: &LpiOptions) -> Result<LpiProblem> {
    let start = Instant::now();
    let d = opts.degree;
    if d < 1 {
        return Err(PieError::Usage("cone degree must be at least 1".into()));
    }
    let (tt, at) = pie.s_transform(s)?;
    let iv = reference();
    let mut tt = tt.transplant(&iv);
    let mut at = at.transplant(&iv);
    let mut k = pie.k.transplant(&iv);
    let finite_dropped = pie.m > 0 && tt.p.is_zero() && tt.q2.is_zero() && at.p.is_zero() && at.q2.is_zero();
    if finite_dropped {
        tt = tt.restrict_l2_input();
        at = at.restrict_l2_input();
        k = k.restrict_l2_input();
    }
    let dims = tt.inp;
    let n = pie.n;

    let cone = build_cone(d, n, &iv);
    let w = cone.z.compose(&tt)?;
    let v = cone.z.compose(&at)?;
    let size = cone.size();
    let w_rows: Vec<PiOp<f64>> = (0..size).map(|r| l2_row(&w, r)).collect();
    let v_rows: Vec<PiOp<f64>> = (0..size).map(|r| l2_row(&v, r)).collect();
    let w_adj: Vec<PiOp<f64>> = w_rows.iter().map(PiOp::adjoint).collect();
    let v_adj: Vec<PiOp<f64>> = v_rows.iter().map(PiOp::adjoint).collect();

    // C_kl = V_k* W_l
    let mut cross: Vec<PiOp<f64>> = Vec::with_capacity(size * size);
    for k in 0..size {
        for l in 0..size {
            cross.push(v_adj[k].compose(&w_rows[l])?);
        }
    }
    let mut p_ops: Vec<(PiOp<f64>, PiOp<f64>)> = Vec::with_capacity(size * (size + 1) / 2);
    for kk in 0..size {
        for l in kk..size {
            let mut base = symmetric_sum(&cross[kk * size + l])?;
            let ww = w_adj[kk].compose(&w_rows[l])?;
            let mut al = ww.scale(&2.0);
            if kk != l {
                base = base.add(&symmetric_sum(&cross[l * size + kk])?)?;
                al = symmetric_sum(&ww)?.scale(&2.0);
            }
            p_ops.push((base.canonicalize(), al.canonicalize()));
        }
    }
    drop(cross);
    let eps_base = symmetric_sum(&at.adjoint().compose(&tt)?)?.canonicalize();
    let eps_alpha = tt.adjoint().compose(&tt)?.scale(&2.0).canonicalize();

    // Finsler slack X : ℝ^m → ℝ^{m'} × L2^n
    let x_degree = opts.x_degree.unwrap_or(2 * d + 2);
    let m = pie.m;
    let mut x_basis = Vec::new();
    let mut x_ops = Vec::new();
    let x_table = legendre::monomial_coeffs(x_degree as usize);
    for r in 0..dims.m {
        for c in 0..m {
            x_basis.push(XEntry::Finite { r, c });
        }
    }
    for r in 0..n {
        for c in 0..m {
            for i in 0..=x_degree {
                x_basis.push(XEntry::Function { r, c, i });
            }
        }
    }
    for e in &x_basis {
        let mut x = PiOp::zero(iv.clone(), dims, Dims::new(m, 0));
        match *e {
            XEntry::Finite { r, c } => x.p.set(r, c, Poly::constant(1.0)),
            XEntry::Function { r, c, i } => x.q2.set(r, c, legendre_product(&x_table, i, 0)),
        }
        x_ops.push(symmetric_sum(&x.compose(&k)?)?.canonicalize());
    }

    let mut all: Vec<&PiOp<f64>> = vec![&eps_base, &eps_alpha];
    all.extend(p_ops.iter().flat_map(|(a, b)| [a, b]));
    all.extend(x_ops.iter());
    let lhs_degree = all.iter().map(|op| op.degree()).max().unwrap_or(0);
    let q1_degree = all.iter().filter_map(|op| op.q1.degree()).max().unwrap_or(0);
    let pointwise = columns_uses_r0(&all);
    let slack_degree = opts
        .slack_degree
        .unwrap_or_else(|| lhs_degree.saturating_sub(1).div_ceil(4).max(1));
    if 4 * slack_degree + 1 < lhs_degree {
        return Err(PieError::DegreeCapacity {
            needed: lhs_degree as usize,
            capacity: (4 * slack_degree + 1) as usize,
        });
    }
    let slack_cone = PositiveCone::new(slack_degree, q1_degree, dims, pointwise, &iv);
    let s_ops = slack_cone.basis()?;

    let max_degree = s_ops.iter().map(|op| op.degree()).max().unwrap_or(0).max(lhs_degree);
    let mut rows = RowIndex::new(max_degree);
    let p_cols = p_ops.iter().map(|(a, b)| (rows.column(a), rows.column(b))).collect();
    let eps_col = (rows.column(&eps_base), rows.column(&eps_alpha));
    let x_cols = x_ops.iter().map(|op| rows.column(op)).collect();
    let s_cols: Vec<SparseCol> = s_ops.iter().map(|op| rows.column(op)).collect();

    let stats = AssemblyStats {
        lyapunov_block: size,
        slack_block: slack_cone.size(),
        slack_degree,
        free_vars: x_basis.len(),
        constraints: rows.keys.len(),
        lhs_degree,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok(LpiProblem {
        ttilde: tt,
        atilde: at,
        k,
        cone,
        slack_cone,
        x_degree,
        finite_dropped,
        original_interval: pie.maps.interval.to_f64(),
        rows,
        p_cols,
        eps_col,
        x_cols,
        x_basis,
        s_cols,
        eps2_floor: opts.eps2_floor,
        maximize_margin: opts.maximize_margin,
        stats,
    })
}

/// Lower bound on `ε²` under the normalization `tr(M_P) + ε² = 1`.
pub const EPS2_FLOOR: f64 = 1e-3;

impl LpiProblem {
    /// The semidefinite program at rate `alpha`.
    ///
    /// Blocks: `M_P`, `M₂`, `ε²`, and a slack `s` for `ε² − s = floor`.
    /// Free variables: the coefficients of `X`.
    pub fn sdp(&self, alpha: f64) -> SdpProblem {
        let np = self.cone.size();
        let ns = self.slack_cone.size();
        let mut prob = SdpProblem::new(vec![np, ns, 1, 1], self.x_cols.len());
        let p0 = prob.block_var(0, 0, 0);
        let s0 = prob.block_var(1, 0, 0);
        let eps = prob.block_var(2, 0, 0);
        let slack = prob.block_var(3, 0, 0);
        let f0 = prob.free_var(0);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.rows.keys.len()];
        for (idx, (base, al)) in self.p_cols.iter().enumerate() {
            for &(r, v) in base {
                rows[r].push((p0 + idx, v));
            }
            if alpha != 0.0 {
                for &(r, v) in al {
                    rows[r].push((p0 + idx, alpha * v));
                }
            }
        }
        for &(r, v) in &self.eps_col.0 {
            rows[r].push((eps, v));
        }
        if alpha != 0.0 {
            for &(r, v) in &self.eps_col.1 {
                rows[r].push((eps, alpha * v));
            }
        }
        for (idx, col) in self.x_cols.iter().enumerate() {
            for &(r, v) in col {
                rows[r].push((f0 + idx, v));
            }
        }
        for (idx, col) in self.s_cols.iter().enumerate() {
            for &(r, v) in col {
                rows[r].push((s0 + idx, v));
            }
        }
        for row in rows {
            prob.add_constraint(row, 0.0);
        }
        let mut norm: Vec<(usize, f64)> = (0..np).map(|i| (prob.block_var(0, i, i), 1.0)).collect();
        norm.push((eps, 1.0));
        prob.add_constraint(norm, 1.0);
        prob.add_constraint(vec![(eps, 1.0), (slack, -1.0)], self.eps2_floor);
        if self.maximize_margin {
            prob.objective = Some(vec![(eps, 1.0)]);
        }
        prob
    }
}

/// Outcome of one feasibility check.
#[derive(Clone, Debug)]
pub enum Verdict {
    Certified(Box<Certificate>),
    /// The solver found a dual improving ray.
    Infeasible { alpha: f64, message: String },
    /// Neither a verified solution nor a verified ray.
    Indeterminate { alpha: f64, message: String },
}

impl Verdict {
    pub fn is_certified(&self) -> bool {
        matches!(self, Verdict::Certified(_))
    }

    pub fn status(&self) -> Status {
        match self {
            Verdict::Certified(_) => Status::Feasible,
            Verdict::Infeasible { .. } => Status::Infeasible,
            Verdict::Indeterminate { .. } => Status::Indeterminate,
        }
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            Verdict::Certified(c) => Some(c),
            _ => None,
        }
    }
}

/// A verified solution of the inequality at rate `alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub alpha: f64,
    pub degree: u32,
    /// Gram matrix of the Lyapunov operator, `P = ε²I + 𝒵*M_P𝒵`.
    pub m_p: DMatrix<f64>,
    /// Coefficients of the slack `X`, in the order of the assembled basis.
    pub x_params: Vec<f64>,
    pub eps2: f64,
    /// Largest coefficient-matching residual.
    pub residual: f64,
    pub m_p_min_eigenvalue: f64,
    /// Largest sampled `⟨v, LHS v⟩ / ‖v‖²` over constrained states.
    pub sampled_max: f64,
}

/// Tolerance on coefficient-matching residuals of an accepted certificate.
pub const RESIDUAL_TOL: f64 = 1e-7;
/// Allowed positive value of the sampled quadratic form.
pub const SAMPLING_MARGIN: f64 = 1e-8;
/// Number of constrained states in the sampling check.
pub const SAMPLES: usize = 50;

/// `∫_{−1}^{1} a_k b_l dx` for column vectors of polynomials in `x`.
fn l2_gram(a: &PolyMat<f64>, b: &PolyMat<f64>) -> Result<DMatrix<f64>> {
    let lo = Bound::Const(-1.0);
    let hi = Bound::Const(1.0);
    let mut g = DMatrix::zeros(a.rows(), b.rows());
    for k in 0..a.rows() {
        for l in 0..b.rows() {
            let p = a.get(k, 0).mul(b.get(l, 0)).integrate(Var::X, &lo, &hi)?;
            g[(k, l)] = p.coeff(0, 0);
        }
    }
    Ok(g)
}

fn inner(a: &(PolyMat<f64>, PolyMat<f64>), b: &(PolyMat<f64>, PolyMat<f64>)) -> Result<f64> {
    let fin: f64 = (0..a.0.rows()).map(|r| a.0.get(r, 0).coeff(0, 0) * b.0.get(r, 0).coeff(0, 0)).sum();
    Ok(fin + l2_gram(&a.1, &b.1)?.trace())
}

/// A state `(v0, v1)` with polynomial `v1`.
pub type State = (PolyMat<f64>, PolyMat<f64>);

/// Random states of `dims` with Legendre components of degree `≤ degree`,
/// projected onto `{v : K v = 0}` and normalized in `ℝ^m × L2^n`.
pub fn sample_constrained(k: &PiOp<f64>, degree: u32, count: usize, seed: u64) -> Result<Vec<State>> {
    let dims = k.inp;
    let table = legendre::monomial_coeffs(degree as usize);
    let mut basis: Vec<State> = Vec::new();
    for i in 0..dims.m {
        let mut v0 = PolyMat::zeros(dims.m, 1);
        v0.set(i, 0, Poly::constant(1.0));
        basis.push((v0, PolyMat::zeros(dims.n, 1)));
    }
    for c in 0..dims.n {
        for p in 0..=degree {
            let mut v1 = PolyMat::zeros(dims.n, 1);
            v1.set(c, 0, legendre_product(&table, p, 0));
            basis.push((PolyMat::zeros(dims.m, 1), v1));
        }
    }
    let rows = k.out.m;
    let mut kmat = DMatrix::zeros(rows, basis.len());
    for (j, (v0, v1)) in basis.iter().enumerate() {
        let (out, _) = k.apply_poly(v0, v1)?;
        for r in 0..rows {
            kmat[(r, j)] = out.get(r, 0).coeff(0, 0);
        }
    }
    let proj = if rows > 0 {
        let pinv = kmat
            .clone()
            .pseudo_inverse(1e-12)
            .map_err(|e| PieError::Numerical(e.to_string()))?;
        DMatrix::identity(basis.len(), basis.len()) - pinv * &kmat
    } else {
        DMatrix::identity(basis.len(), basis.len())
    };
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let c = DVector::from_fn(basis.len(), |_, _| rng.gen_range(-1.0..1.0));
        let c = &proj * c;
        let mut v0 = PolyMat::zeros(dims.m, 1);
        let mut v1 = PolyMat::zeros(dims.n, 1);
        for (j, (b0, b1)) in basis.iter().enumerate() {
            v0 = v0.add(&b0.scale(&c[j]))?;
            v1 = v1.add(&b1.scale(&c[j]))?;
        }
        let v = (v0, v1);
        let norm = inner(&v, &v)?.sqrt();
        if norm > 1e-8 {
            out.push((v.0.scale(&(1.0 / norm)), v.1.scale(&(1.0 / norm))));
        }
    }
    Ok(out)
}

impl LpiProblem {
    /// The Lyapunov operator `P = ε²I + 𝒵*M𝒵` on the reference interval.
    pub fn lyapunov_operator(&self, m_p: &DMatrix<f64>, eps2: f64) -> Result<PiOp<f64>> {
        let n = self.ttilde.out.n;
        let id = PiOp::identity(reference(), Dims::new(0, n));
        self.cone.operator(m_p)?.add(&id.scale(&eps2))
    }

    /// `⟨v, (Ã*PT̃ + T̃*PÃ + 2αT̃*PT̃) v⟩` for each state, with `P` given by
    /// `m_p` and `eps2`. On constrained states a valid certificate makes
    /// every value nonpositive.
    pub fn quadratic_form(&self, alpha: f64, m_p: &DMatrix<f64>, eps2: f64, states: &[State]) -> Result<Vec<f64>> {
        let p = self.lyapunov_operator(m_p, eps2)?;
        states
            .iter()
            .map(|(v0, v1)| {
                let tv = self.ttilde.apply_poly(v0, v1)?;
                let av = self.atilde.apply_poly(v0, v1)?;
                let ptv = p.apply_poly(&tv.0, &tv.1)?;
                Ok(2.0 * inner(&av, &ptv)? + 2.0 * alpha * inner(&tv, &ptv)?)
            })
            .collect()
    }

    /// Largest sampled quadratic form over random constrained states.
    pub fn sampling_check(&self, alpha: f64, m_p: &DMatrix<f64>, eps2: f64) -> Result<f64> {
        let degree = self.cone.d + 3;
        let states = sample_constrained(&self.k, degree, SAMPLES, 0x5eed)?;
        let q = self.quadratic_form(alpha, m_p, eps2, &states)?;
        Ok(q.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Solves the program at rate `alpha` and validates any solution.
    pub fn check(&self, alpha: f64, solver: &SolveOptions) -> Result<Verdict> {
        if alpha < 0.0 {
            return Err(PieError::Usage("rate must be nonnegative".into()));
        }
        if self.is_trivial() {
            return Ok(Verdict::Certified(Box::new(Certificate {
                alpha,
                degree: self.cone.d,
                m_p: DMatrix::zeros(self.cone.size(), self.cone.size()),
                x_params: vec![0.0; self.x_cols.len()],
                eps2: 1.0,
                residual: 0.0,
                m_p_min_eigenvalue: 0.0,
                sampled_max: 0.0,
            })));
        }
        let sol = sdp::solve(&self.sdp(alpha), solver);
        match sol.status {
            Status::Infeasible => Ok(Verdict::Infeasible { alpha, message: sol.message }),
            Status::Indeterminate => Ok(Verdict::Indeterminate { alpha, message: sol.message }),
            Status::Feasible => {
                let m_p = sol.blocks[0].clone();
                let eps2 = sol.blocks[2][(0, 0)];
                let min_eig = m_p.clone().symmetric_eigenvalues().min();
                let cert = Certificate {
                    alpha,
                    degree: self.cone.d,
                    m_p_min_eigenvalue: min_eig,
                    sampled_max: self.sampling_check(alpha, &m_p, eps2)?,
                    m_p,
                    x_params: sol.frees,
                    eps2,
                    residual: sol.max_eq_residual,
                };
                if cert.residual >= RESIDUAL_TOL || cert.sampled_max > SAMPLING_MARGIN {
                    return Ok(Verdict::Indeterminate {
                        alpha,
                        message: format!(
                            "solution failed validation (residual {:.2e}, sampled form {:.2e})",
                            cert.residual, cert.sampled_max
                        ),
                    });
                }
                Ok(Verdict::Certified(Box::new(cert)))
            }
        }
    }

    /// `T̃ = Ã = 0`: every rate is certified by `P = I`.
    pub fn is_trivial(&self) -> bool {
        self.ttilde.is_zero() && self.atilde.is_zero()
    }
}

/// Converts `pde`, builds the inequality for trajectory operator `s` and
/// checks it at rate `alpha`.
pub fn check_stability(pde: &PdeSystem<f64>, s: &Trajectory<f64>, alpha: f64, opts: &LpiOptions) -> Result<Verdict> {
    let pie = pde_to_pie(pde)?;
    assemble(&pie, s, opts)?.check(alpha, &opts.solver)
}

/// Result of a rate search.
#[derive(Clone, Debug)]
pub struct RateSearch {
    /// Largest certified rate, or `None` when `α = 0` is not certified.
    pub rate: Option<f64>,
    pub certificate: Option<Certificate>,
    pub upper: f64,
    /// Every probed rate with its status.
    pub probes: Vec<(f64, Status)>,
}

/// Bisection tolerance on the rate.
pub const BISECTION_TOL: f64 = 1e-3;
/// Bisection iteration cap.
pub const BISECTION_MAX_ITERS: usize = 30;

impl LpiProblem {
    /// Bisection for the largest certified rate in `[0, upper]`. Infeasible
    /// and indeterminate probes both count as not certified.
    pub fn max_decay_rate(&self, upper: f64, tol: f64, solver: &SolveOptions) -> Result<RateSearch> {
        if tol <= 0.0 {
            return Err(PieError::Usage("tolerance must be positive".into()));
        }
        let mut probes = Vec::new();
        let mut probe = |alpha: f64| -> Result<Verdict> {
            let v = self.check(alpha, solver)?;
            probes.push((alpha, v.status()));
            Ok(v)
        };
        let mut best = match probe(0.0)? {
            Verdict::Certified(c) => *c,
            _ => {
                return Ok(RateSearch { rate: None, certificate: None, upper, probes });
            }
        };
        let (mut lo, mut hi) = (0.0, upper.max(0.0));
        if let Verdict::Certified(c) = probe(hi)? {
            return Ok(RateSearch { rate: Some(hi), certificate: Some(*c), upper, probes });
        }
        for _ in 0..BISECTION_MAX_ITERS {
            if hi - lo <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            match probe(mid)? {
                Verdict::Certified(c) => {
                    lo = mid;
                    best = *c;
                }
                _ => hi = mid,
            }
        }
        Ok(RateSearch { rate: Some(lo), certificate: Some(best), upper, probes })
    }
}

/// Spectral basis degree used for the bisection's upper bound.
pub const ORACLE_DEGREE: usize = 16;

/// Largest certified rate for `pde` measured through `s`, bisecting on
/// `[0, 1.1 α_spec]` with `α_spec` from the spectral oracle.
pub fn max_decay_rate(pde: &PdeSystem<f64>, s: &Trajectory<f64>, opts: &LpiOptions, tol: f64) -> Result<RateSearch> {
    let pie = pde_to_pie(pde)?;
    let spectral = crate::spectral::decay_rate(&pie, s, ORACLE_DEGREE)?;
    assemble(&pie, s, opts)?.max_decay_rate(1.1 * spectral.max(0.0), tol, &opts.solver)
}

impl Certificate {
    /// Text form: header lines, then the upper triangle of `M_P` and the
    /// slack coefficients.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "alpha {:e}", self.alpha);
        let _ = writeln!(out, "degree {}", self.degree);
        let _ = writeln!(out, "eps2 {:e}", self.eps2);
        let _ = writeln!(out, "mp_min_eigenvalue {:e}", self.m_p_min_eigenvalue);
        let _ = writeln!(out, "residual {:e}", self.residual);
        let _ = writeln!(out, "sampled_max {:e}", self.sampled_max);
        let _ = writeln!(out, "mp {}", self.m_p.nrows());
        for i in 0..self.m_p.nrows() {
            for j in i..self.m_p.ncols() {
                if self.m_p[(i, j)] != 0.0 {
                    let _ = writeln!(out, "{i} {j} {:e}", self.m_p[(i, j)]);
                }
            }
        }
        let _ = writeln!(out, "x {}", self.x_params.len());
        for (k, v) in self.x_params.iter().enumerate() {
            let _ = writeln!(out, "{k} {v:e}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |line: usize, msg: &str| PieError::Parse { line: line + 1, col: 1, msg: msg.to_string() };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut header = |key: &str| -> Result<(usize, String)> {
            let (no, line) = lines.next().ok_or_else(|| err(0, "unexpected end of certificate"))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(err(no, &format!("expected `{key}`")));
            }
            Ok((no, parts.next().unwrap_or("").to_string()))
        };
        let num = |(no, v): (usize, String)| v.parse::<f64>().map_err(|_| err(no, "expected a number"));
        let alpha = num(header("alpha")?)?;
        let (no, d) = header("degree")?;
        let degree = d.parse().map_err(|_| err(no, "expected an integer"))?;
        let eps2 = num(header("eps2")?)?;
        let m_p_min_eigenvalue = num(header("mp_min_eigenvalue")?)?;
        let residual = num(header("residual")?)?;
        let sampled_max = num(header("sampled_max")?)?;
        let (no, size) = header("mp")?;
        let size: usize = size.parse().map_err(|_| err(no, "expected an integer"))?;
        let mut m_p = DMatrix::zeros(size, size);
        let mut x_params = Vec::new();
        let mut in_x = false;
        for (no, line) in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.first() == Some(&"x") {
                let n: usize = t.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| err(no, "expected an integer"))?;
                x_params = vec![0.0; n];
                in_x = true;
                continue;
            }
            let parse_idx = |s: &str| s.parse::<usize>().map_err(|_| err(no, "expected an index"));
            let parse_val = |s: &str| s.parse::<f64>().map_err(|_| err(no, "expected a number"));
            match (in_x, t.as_slice()) {
                (false, [i, j, v]) => {
                    let (i, j, v) = (parse_idx(i)?, parse_idx(j)?, parse_val(v)?);
                    if i >= size || j >= size {
                        return Err(err(no, "index out of range"));
                    }
                    m_p[(i, j)] = v;
                    m_p[(j, i)] = v;
                }
                (true, [k, v]) => {
                    let k = parse_idx(k)?;
                    *x_params.get_mut(k).ok_or_else(|| err(no, "index out of range"))? = parse_val(v)?;
                }
                _ => return Err(err(no, "malformed entry")),
            }
        }
        Ok(Self {
            alpha,
            degree,
            m_p,
            x_params,
            eps2,
            residual,
            m_p_min_eigenvalue,
            sampled_max,
        })
    }
}
