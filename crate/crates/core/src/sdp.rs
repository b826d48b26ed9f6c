//! Dense primal-dual interior-point solver for small semidefinite programs.
//!
//! Problem form: symmetric blocks `X_b ⪰ 0` and free variables `w` with linear
//! equalities `Σ_b ⟨A_ib, X_b⟩ + B_i w = b_i` and an optional linear objective
//! to maximize. A nonnegative scalar is a `1×1` block.
//!
//! The iteration runs on the homogeneous self-dual embedding with
//! Nesterov-Todd scaling and a Mehrotra predictor-corrector, so primal
//! infeasibility shows up as a dual improving ray rather than as divergence.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// One entry of a linear functional: variable index and coefficient.
pub type Term = (usize, f64);

#[derive(Clone, Debug, Default)]
pub struct SdpProblem {
    /// Dimensions of the symmetric blocks.
    pub psd_blocks: Vec<usize>,
    pub free_vars: usize,
    /// `(functional, rhs)`; a block entry `(i, j)` with `i < j` is one
    /// variable whose coefficient multiplies `X_ij` once.
    pub constraints: Vec<(Vec<Term>, f64)>,
    /// Functional to maximize.
    pub objective: Option<Vec<Term>>,
}

impl SdpProblem {
    pub fn new(psd_blocks: Vec<usize>, free_vars: usize) -> Self {
        Self {
            psd_blocks,
            free_vars,
            ..Self::default()
        }
    }

    fn block_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.psd_blocks.len() + 1);
        let mut acc = 0;
        for &d in &self.psd_blocks {
            off.push(acc);
            acc += d * (d + 1) / 2;
        }
        off.push(acc);
        off
    }

    /// Variable index of entry `(i, j)` of block `b` (either order).
    pub fn block_var(&self, b: usize, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let d = self.psd_blocks[b];
        self.block_offsets()[b] + i * d - i * (i + 1) / 2 + j
    }

    pub fn free_var(&self, k: usize) -> usize {
        self.block_offsets()[self.psd_blocks.len()] + k
    }

    pub fn num_vars(&self) -> usize {
        self.free_var(0) + self.free_vars
    }

    pub fn add_constraint(&mut self, terms: Vec<Term>, rhs: f64) {
        self.constraints.push((terms, rhs));
    }

    fn locate(&self, offsets: &[usize], var: usize) -> Loc {
        let nb = self.psd_blocks.len();
        if var >= offsets[nb] {
            return Loc::Free(var - offsets[nb]);
        }
        let b = offsets.partition_point(|&o| o <= var) - 1;
        let d = self.psd_blocks[b];
        let mut rem = var - offsets[b];
        let mut i = 0;
        while rem >= d - i {
            rem -= d - i;
            i += 1;
        }
        Loc::Block(b, i, i + rem)
    }

    /// Checks that every functional refers to existing variables.
    pub fn validate(&self) -> Result<(), String> {
        if self.psd_blocks.contains(&0) {
            return Err("block dimension must be at least 1".into());
        }
        let nv = self.num_vars();
        let bad = |f: &[Term]| f.iter().any(|&(v, c)| v >= nv || !c.is_finite());
        for (k, (f, rhs)) in self.constraints.iter().enumerate() {
            if bad(f) || !rhs.is_finite() {
                return Err(format!("constraint {k} refers to a missing variable or is not finite"));
            }
        }
        if self.objective.as_deref().is_some_and(bad) {
            return Err("objective refers to a missing variable".into());
        }
        Ok(())
    }

    /// Sparse text dump: one line per coefficient, `row block i j value`
    /// (block `-1` for free variables), then `rhs row value` lines.
    pub fn dump(&self) -> String {
        let off = self.block_offsets();
        let mut out = String::new();
        let dims: Vec<String> = self.psd_blocks.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(out, "blocks {}", dims.join(" "));
        let _ = writeln!(out, "free {}", self.free_vars);
        let line = |out: &mut String, tag: &str, f: &[Term]| {
            for &(v, c) in f {
                match self.locate(&off, v) {
                    Loc::Block(b, i, j) => {
                        let _ = writeln!(out, "{tag} {b} {i} {j} {c:e}");
                    }
                    Loc::Free(k) => {
                        let _ = writeln!(out, "{tag} -1 {k} 0 {c:e}");
                    }
                }
            }
        };
        if let Some(obj) = &self.objective {
            line(&mut out, "obj", obj);
        }
        for (k, (f, rhs)) in self.constraints.iter().enumerate() {
            line(&mut out, &k.to_string(), f);
            let _ = writeln!(out, "rhs {k} {rhs:e}");
        }
        out
    }
}

enum Loc {
    Block(usize, usize, usize),
    Free(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Feasible,
    Infeasible,
    Indeterminate,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Feasible => "feasible",
            Status::Infeasible => "infeasible",
            Status::Indeterminate => "indeterminate",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Relative tolerance on equality residuals.
    pub feas_tol: f64,
    /// Allowed negative eigenvalue (relative to the block scale).
    pub psd_tol: f64,
    /// Relative duality-gap tolerance when an objective is present.
    pub gap_tol: f64,
    pub max_iters: usize,
    /// Return as soon as an iterate satisfies the feasibility invariants,
    /// without optimizing the objective further.
    pub stop_at_feasible: bool,
    /// Print one line per iteration to standard error.
    pub trace: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            psd_tol: 1e-9,
            gap_tol: 1e-7,
            max_iters: 120,
            stop_at_feasible: false,
            trace: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: Status,
    pub blocks: Vec<DMatrix<f64>>,
    pub frees: Vec<f64>,
    /// Largest equality residual, relative to `max(1, |b|∞)`.
    pub max_eq_residual: f64,
    pub min_block_eigenvalue: f64,
    /// Objective value (maximized), when an objective was given.
    pub objective: Option<f64>,
    /// On infeasibility: multipliers `y` with `Σ y_i A_i ⪯ 0`, `Bᵀy = 0`, `bᵀy > 0`.
    pub farkas: Option<Vec<f64>>,
    pub iterations: usize,
    pub message: String,
}

impl SdpSolution {
    /// Text dump of the primal solution in `block i j value` form.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "status {}", self.status);
        let _ = writeln!(out, "max_eq_residual {:e}", self.max_eq_residual);
        let _ = writeln!(out, "min_block_eigenvalue {:e}", self.min_block_eigenvalue);
        for (b, x) in self.blocks.iter().enumerate() {
            for i in 0..x.nrows() {
                for j in i..x.ncols() {
                    if x[(i, j)] != 0.0 {
                        let _ = writeln!(out, "{b} {i} {j} {:e}", x[(i, j)]);
                    }
                }
            }
        }
        for (k, w) in self.frees.iter().enumerate() {
            let _ = writeln!(out, "-1 {k} 0 {w:e}");
        }
        out
    }
}

/// Residual and eigenvalue check of a candidate, independent of the solver.
#[derive(Clone, Copy, Debug)]
pub struct Verification {
    pub max_eq_residual: f64,
    pub min_block_eigenvalue: f64,
}

/// Evaluates the equalities at `(blocks, frees)` and the smallest eigenvalue
/// over the blocks.
pub fn verify(problem: &SdpProblem, blocks: &[DMatrix<f64>], frees: &[f64]) -> Verification {
    let off = problem.block_offsets();
    let value = |v: usize| match problem.locate(&off, v) {
        Loc::Block(b, i, j) => blocks[b][(i, j)],
        Loc::Free(k) => frees[k],
    };
    let mut res: f64 = 0.0;
    for (f, rhs) in &problem.constraints {
        let lhs: f64 = f.iter().map(|&(v, c)| c * value(v)).sum();
        res = res.max((lhs - rhs).abs() / rhs.abs().max(1.0));
    }
    let mut min_eig = f64::INFINITY;
    for x in blocks {
        let sym = (x + x.transpose()) * 0.5;
        let e = sym.symmetric_eigenvalues();
        min_eig = min_eig.min(e.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    Verification {
        max_eq_residual: res,
        min_block_eigenvalue: min_eig,
    }
}

/// Sparse block of one constraint row: `(p, q, v)` with `p ≤ q`, meaning
/// `A_pq = A_qp = v/2` off the diagonal and `A_pp = v`.
type BlockRow = Vec<(u32, u32, f64)>;

struct Data {
    dims: Vec<usize>,
    /// rows[i][b]
    rows: Vec<Vec<BlockRow>>,
    /// Free-variable columns, `m × nf`.
    bmat: DMatrix<f64>,
    b: DVector<f64>,
    c: Vec<DMatrix<f64>>,
    cw: DVector<f64>,
    /// Original row of each kept row and its scale factor.
    kept: Vec<(usize, f64)>,
    /// Original index of each kept free variable; the rest are fixed at zero.
    free_keep: Vec<usize>,
    obj_scale: f64,
}

impl Data {
    fn m(&self) -> usize {
        self.rows.len()
    }

    fn apply(&self, x: &[DMatrix<f64>], w: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.bmat * w;
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = 0.0;
            for (b, entries) in row.iter().enumerate() {
                for &(p, q, v) in entries {
                    acc += v * x[b][(p as usize, q as usize)];
                }
            }
            out[i] += acc;
        }
        out
    }

    fn adjoint(&self, y: &DVector<f64>) -> (Vec<DMatrix<f64>>, DVector<f64>) {
        let mut s: Vec<DMatrix<f64>> = self.dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        for (i, row) in self.rows.iter().enumerate() {
            let yi = y[i];
            if yi == 0.0 {
                continue;
            }
            for (b, entries) in row.iter().enumerate() {
                for &(p, q, v) in entries {
                    let (p, q) = (p as usize, q as usize);
                    if p == q {
                        s[b][(p, p)] += yi * v;
                    } else {
                        s[b][(p, q)] += 0.5 * yi * v;
                        s[b][(q, p)] += 0.5 * yi * v;
                    }
                }
            }
        }
        (s, self.bmat.transpose() * y)
    }
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

/// Nesterov-Todd scaling of one block: `R` with `Rᵀ z R = R⁻¹ x R⁻ᵀ = Λ`.
struct Scaling {
    r: DMatrix<f64>,
    g: DMatrix<f64>,
    lambda: DVector<f64>,
}

fn nt_scaling(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Scaling> {
    let l1 = x.clone().cholesky()?.l();
    let l2 = z.clone().cholesky()?.l();
    let svd = (l2.transpose() * &l1).svd(true, true);
    let v = svd.v_t?.transpose();
    let lambda = svd.singular_values;
    if lambda.iter().any(|&s| s <= 0.0 || !s.is_finite()) {
        return None;
    }
    let inv_sqrt = DMatrix::from_diagonal(&lambda.map(|s| 1.0 / s.sqrt()));
    let r = l1 * v * inv_sqrt;
    let g = &r * r.transpose();
    Some(Scaling { r, g, lambda })
}

/// Largest step `t ≤ 1` keeping `Λ + t·d ⪰ 0` (`d` in scaled coordinates).
fn max_step(lambda: &DVector<f64>, d: &DMatrix<f64>) -> f64 {
    let n = lambda.len();
    let s = DMatrix::from_fn(n, n, |i, j| d[(i, j)] / (lambda[i] * lambda[j]).sqrt());
    let s = (&s + s.transpose()) * 0.5;
    let min = s.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
    if min >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / min
    }
}

fn scalar_step(v: f64, dv: f64) -> f64 {
    if dv >= 0.0 {
        f64::INFINITY
    } else {
        -v / dv
    }
}

fn preprocess(problem: &SdpProblem) -> Data {
    let off = problem.block_offsets();
    let nb = problem.psd_blocks.len();
    let nf = problem.free_vars;
    // dense row vectors are avoided; rows stay sparse in block form
    let mut rows: Vec<Vec<BlockRow>> = Vec::new();
    let mut free_rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rhs = Vec::new();
    let mut scales = Vec::new();
    for (f, r) in &problem.constraints {
        let mut blocks: Vec<BlockRow> = vec![Vec::new(); nb];
        let mut frees = Vec::new();
        let mut norm2 = 0.0;
        for &(v, c) in f {
            if c == 0.0 {
                continue;
            }
            match problem.locate(&off, v) {
                Loc::Block(b, i, j) => blocks[b].push((i as u32, j as u32, c)),
                Loc::Free(k) => frees.push((k, c)),
            }
            norm2 += c * c;
        }
        // merge duplicates
        for blk in blocks.iter_mut() {
            blk.sort_by_key(|e| (e.0, e.1));
            blk.dedup_by(|a, b| {
                if a.0 == b.0 && a.1 == b.1 {
                    b.2 += a.2;
                    true
                } else {
                    false
                }
            });
        }
        let scale = if norm2 > 0.0 { 1.0 / norm2.sqrt() } else { 1.0 };
        for blk in blocks.iter_mut() {
            for e in blk.iter_mut() {
                e.2 *= scale;
            }
        }
        rows.push(blocks);
        free_rows.push(frees.into_iter().map(|(k, c)| (k, c * scale)).collect());
        rhs.push(r * scale);
        scales.push(scale);
    }
    let keep = independent_rows(&rows, &free_rows, &rhs, &problem.psd_blocks, nf);
    let m = keep.len();
    let mut bmat = DMatrix::zeros(m, nf);
    let mut kept_rows = Vec::with_capacity(m);
    let mut b = DVector::zeros(m);
    let mut kept = Vec::with_capacity(m);
    for (new, &old) in keep.iter().enumerate() {
        for &(k, c) in &free_rows[old] {
            bmat[(new, k)] += c;
        }
        b[new] = rhs[old];
        kept.push((old, scales[old]));
        kept_rows.push(std::mem::take(&mut rows[old]));
    }
    let mut c: Vec<DMatrix<f64>> = problem.psd_blocks.iter().map(|&d| DMatrix::zeros(d, d)).collect();
    let mut cw = DVector::zeros(nf);
    let mut obj_scale = 1.0;
    if let Some(obj) = &problem.objective {
        // internally minimize ⟨c, x⟩ = −objective
        let norm = obj.iter().map(|t| t.1 * t.1).sum::<f64>().sqrt();
        if norm > 0.0 {
            obj_scale = 1.0 / norm;
        }
        for &(v, coef) in obj {
            let coef = -coef * obj_scale;
            match problem.locate(&off, v) {
                Loc::Block(blk, i, j) => {
                    if i == j {
                        c[blk][(i, i)] += coef;
                    } else {
                        c[blk][(i, j)] += 0.5 * coef;
                        c[blk][(j, i)] += 0.5 * coef;
                    }
                }
                Loc::Free(k) => cw[k] += coef,
            }
        }
    }
    let free_keep = independent_columns(&bmat, &cw);
    let bmat = bmat.select_columns(&free_keep);
    let cw = cw.select_rows(&free_keep);
    Data {
        dims: problem.psd_blocks.clone(),
        rows: kept_rows,
        bmat,
        b,
        c,
        cw,
        kept,
        free_keep,
        obj_scale,
    }
}

/// Greedy selection of linearly independent free columns; a dependent column
/// is dropped only when its objective weight is the same combination.
fn independent_columns(bmat: &DMatrix<f64>, cw: &DVector<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    for k in 0..bmat.ncols() {
        let col = bmat.column(k).into_owned();
        let norm = col.norm();
        let mut r = col.clone();
        for _ in 0..2 {
            for q in &basis {
                let d = q.dot(&r);
                r -= q * d;
            }
        }
        let rest = r.norm();
        if rest > 1e-9 * norm.max(1e-300) {
            basis.push(r / rest);
            kept.push(k);
            continue;
        }
        // dependent: check the objective by least squares over kept columns
        let sub = bmat.select_columns(&kept);
        let coeff = sub.svd(true, true).solve(&col, 1e-12);
        let pred = coeff.map_or(f64::NAN, |c| c.dot(&cw.select_rows(&kept)));
        if !((pred - cw[k]).abs() <= 1e-12 * (1.0 + cw[k].abs())) {
            kept.push(k);
        }
    }
    kept
}

/// Greedy pivoted Cholesky on the Gram matrix of the (normalized) rows.
/// Rows numerically in the span of earlier ones are dropped when their
/// right-hand side is consistent with that span.
fn independent_rows(rows: &[Vec<BlockRow>], free_rows: &[Vec<(usize, f64)>], rhs: &[f64], dims: &[usize], nf: usize) -> Vec<usize> {
    let m = rows.len();
    if m == 0 {
        return Vec::new();
    }
    // column lists over a global variable numbering
    let mut offsets = vec![0usize];
    for &d in dims {
        offsets.push(offsets.last().unwrap() + d * d);
    }
    let total = offsets.last().unwrap() + nf;
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); total];
    for (i, row) in rows.iter().enumerate() {
        for (b, entries) in row.iter().enumerate() {
            for &(p, q, v) in entries {
                // weight off-diagonal entries so the Gram matrix is the
                // Frobenius inner product of the symmetric A_i
                let (p, q) = (p as usize, q as usize);
                if p == q {
                    cols[offsets[b] + p * dims[b] + p].push((i, v));
                } else {
                    let h = v * std::f64::consts::FRAC_1_SQRT_2;
                    cols[offsets[b] + p * dims[b] + q].push((i, h));
                }
            }
        }
        for &(k, c) in &free_rows[i] {
            cols[offsets[dims.len()] + k].push((i, c));
        }
    }
    let mut gram = DMatrix::<f64>::zeros(m, m);
    for col in &cols {
        for &(i, a) in col {
            for &(j, b) in col {
                gram[(i, j)] += a * b;
            }
        }
    }
    // pivoted Cholesky in natural order (deterministic)
    let tol = 1e-11;
    let mut l = DMatrix::<f64>::zeros(m, m);
    let mut kept: Vec<usize> = Vec::new();
    let mut dropped = Vec::new();
    for i in 0..m {
        let mut v = DVector::zeros(kept.len());
        for (k, &p) in kept.iter().enumerate() {
            let mut s = gram[(i, p)];
            for t in 0..k {
                s -= l[(k, t)] * v[t];
            }
            v[k] = s / l[(k, k)];
        }
        let d = gram[(i, i)] - v.dot(&v);
        if d > tol * gram[(i, i)].max(1e-300) {
            let k = kept.len();
            for t in 0..k {
                l[(k, t)] = v[t];
            }
            l[(k, k)] = d.sqrt();
            kept.push(i);
        } else {
            dropped.push((i, v));
        }
    }
    // consistency of dropped rows: rhs_i should equal the combination of kept rhs
    let k = kept.len();
    let lk = l.view((0, 0), (k, k)).into_owned();
    let bk = DVector::from_iterator(k, kept.iter().map(|&p| rhs[p]));
    let mut out = kept.clone();
    for (i, v) in dropped {
        // coefficients c with Σ c_p row_p ≈ row_i satisfy Lᵀc = v
        let v = DVector::from_fn(k, |t, _| if t < v.len() { v[t] } else { 0.0 });
        let coeff = lk.transpose().solve_upper_triangular(&v).unwrap_or_else(|| DVector::zeros(k));
        let pred = coeff.dot(&bk);
        if (pred - rhs[i]).abs() > 1e-9 * (1.0 + rhs[i].abs()) {
            out.push(i);
        }
    }
    out.sort_unstable();
    out
}

#[derive(Clone)]
struct Iterate {
    x: Vec<DMatrix<f64>>,
    z: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    w: DVector<f64>,
    tau: f64,
    kappa: f64,
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dz: Vec<DMatrix<f64>>,
    dy: DVector<f64>,
    dw: DVector<f64>,
    dtau: f64,
    dkappa: f64,
}

enum Factor {
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

struct Kkt {
    mat: DMatrix<f64>,
    factor: Factor,
}

impl Kkt {
    fn raw(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match &self.factor {
            Factor::Chol(c) => c.solve(rhs),
            Factor::Lu(lu) => lu.solve(rhs).unwrap_or_else(|| DVector::zeros(rhs.len())),
        }
    }

    fn solve(&self, m: usize, ry: &DVector<f64>, rw: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let mut rhs = DVector::zeros(m + rw.len());
        rhs.rows_mut(0, m).copy_from(ry);
        rhs.rows_mut(m, rw.len()).copy_from(rw);
        let mut sol = self.raw(&rhs);
        for _ in 0..2 {
            let r = &rhs - &self.mat * &sol;
            if r.amax() <= 1e-15 * rhs.amax() {
                break;
            }
            sol += self.raw(&r);
        }
        (sol.rows(0, m).into_owned(), sol.rows(m, rw.len()).into_owned())
    }
}

/// Schur complement `M_ij = ⟨A_i, G A_j G⟩` summed over blocks.
fn schur(data: &Data, scal: &[Scaling]) -> DMatrix<f64> {
    let m = data.m();
    let mut mat = DMatrix::<f64>::zeros(m, m);
    for (b, sc) in scal.iter().enumerate() {
        let d = data.dims[b];
        let g = &sc.g;
        if d == 1 {
            let g2 = g[(0, 0)] * g[(0, 0)];
            let vals: Vec<(usize, f64)> = (0..m)
                .filter_map(|i| data.rows[i][b].first().map(|e| (i, e.2)))
                .collect();
            for &(i, a) in &vals {
                for &(j, c) in &vals {
                    mat[(i, j)] += a * c * g2;
                }
            }
            continue;
        }
        let active: Vec<usize> = (0..m).filter(|&i| !data.rows[i][b].is_empty()).collect();
        for (aj, &j) in active.iter().enumerate() {
            let entries = &data.rows[j][b];
            // H = G A_j G
            let mut ag = DMatrix::<f64>::zeros(d, d);
            for &(p, q, v) in entries {
                let (p, q) = (p as usize, q as usize);
                if p == q {
                    for c in 0..d {
                        ag[(p, c)] += v * g[(p, c)];
                    }
                } else {
                    let h = 0.5 * v;
                    for c in 0..d {
                        ag[(p, c)] += h * g[(q, c)];
                        ag[(q, c)] += h * g[(p, c)];
                    }
                }
            }
            let h = g * ag;
            for &i in &active[aj..] {
                let mut acc = 0.0;
                for &(p, q, v) in &data.rows[i][b] {
                    acc += v * h[(p as usize, q as usize)];
                }
                mat[(i, j)] += acc;
                if i != j {
                    mat[(j, i)] += acc;
                }
            }
        }
    }
    mat
}

fn factor_kkt(schur: DMatrix<f64>, bmat: &DMatrix<f64>) -> Option<Kkt> {
    let m = schur.nrows();
    let nf = bmat.ncols();
    if nf == 0 {
        let diag_max = schur.diagonal().iter().cloned().fold(0.0, f64::max).max(1e-300);
        if let Some(c) = schur.clone().cholesky() {
            return Some(Kkt { mat: schur, factor: Factor::Chol(c) });
        }
        let mut reg = schur.clone();
        for i in 0..m {
            reg[(i, i)] += 1e-13 * diag_max;
        }
        if let Some(c) = reg.cholesky() {
            return Some(Kkt { mat: schur, factor: Factor::Chol(c) });
        }
        let lu = schur.clone().lu();
        return Some(Kkt { mat: schur, factor: Factor::Lu(lu) });
    }
    let mut k = DMatrix::zeros(m + nf, m + nf);
    k.view_mut((0, 0), (m, m)).copy_from(&schur);
    k.view_mut((0, m), (m, nf)).copy_from(bmat);
    k.view_mut((m, 0), (nf, m)).copy_from(&bmat.transpose());
    let lu = k.clone().lu();
    Some(Kkt { mat: k, factor: Factor::Lu(lu) })
}

struct Residuals {
    rp: DVector<f64>,
    rd: Vec<DMatrix<f64>>,
    rf: DVector<f64>,
    rg: f64,
}

fn residuals(data: &Data, it: &Iterate) -> Residuals {
    let ax = data.apply(&it.x, &it.w);
    let rp = &data.b * it.tau - ax;
    let (aty, bty) = data.adjoint(&it.y);
    let rd = (0..data.dims.len())
        .map(|b| &data.c[b] * it.tau - &aty[b] - &it.z[b])
        .collect();
    let rf = &data.cw * it.tau - bty;
    let cx = inner(&data.c, &it.x) + data.cw.dot(&it.w);
    let rg = it.kappa + cx - data.b.dot(&it.y);
    Residuals { rp, rd, rf, rg }
}

/// Solves the Newton system for complementarity targets `target[b]` (the
/// right-hand side of `Λ∘(dx̃ + dz̃)`), `rtk` for `τκ`, and residual weight `eta`.
#[allow(clippy::too_many_arguments)]
fn direction(
    data: &Data,
    it: &Iterate,
    scal: &[Scaling],
    kkt: &Kkt,
    p: &(DVector<f64>, DVector<f64>),
    gcg: &[DMatrix<f64>],
    cgc: f64,
    agcg: &DVector<f64>,
    res: &Residuals,
    target: &[DMatrix<f64>],
    rtk: f64,
    eta: f64,
) -> Direction {
    let m = data.m();
    let nb = data.dims.len();
    // U solves Λ∘U = target
    let mut rur = Vec::with_capacity(nb);
    for b in 0..nb {
        let lam = &scal[b].lambda;
        let d = lam.len();
        let u = DMatrix::from_fn(d, d, |i, j| 2.0 * target[b][(i, j)] / (lam[i] + lam[j]));
        rur.push(&scal[b].r * u * scal[b].r.transpose());
    }
    let grdg: Vec<DMatrix<f64>> = (0..nb).map(|b| &scal[b].g * &res.rd[b] * &scal[b].g).collect();
    let ry = &res.rp * eta + data.apply(&grdg, &DVector::zeros(data.cw.len())) * eta
        - data.apply(&rur, &DVector::zeros(data.cw.len()));
    let rw = &res.rf * eta;
    let (qy, qw) = kkt.solve(m, &ry, &rw);
    let (py, pw) = p;
    let bm = &data.b - agcg;
    let k1 = cgc + bm.dot(py) - data.cw.dot(pw);
    let k0 = -eta * res.rg - inner(&data.c, &rur) + eta * inner(&data.c, &grdg) + bm.dot(&qy) - data.cw.dot(&qw);
    let dtau = (rtk - it.tau * k0) / (it.kappa + it.tau * k1);
    let dy = py * dtau + qy;
    let dw = if pw.is_empty() { DVector::zeros(0) } else { pw * dtau + qw };
    let (atdy, _) = data.adjoint(&dy);
    let mut dz = Vec::with_capacity(nb);
    let mut dx = Vec::with_capacity(nb);
    for b in 0..nb {
        let dzb = &data.c[b] * dtau - &atdy[b] + &res.rd[b] * eta;
        let dxb = &rur[b] - &gcg[b] * dtau + &scal[b].g * &atdy[b] * &scal[b].g - &grdg[b] * eta;
        dz.push(dzb);
        dx.push(dxb);
    }
    let dkappa = (rtk - it.kappa * dtau) / it.tau;
    Direction {
        dx,
        dz,
        dy,
        dw,
        dtau,
        dkappa,
    }
}

fn step_length(it: &Iterate, scal: &[Scaling], dir: &Direction) -> f64 {
    let mut t = f64::INFINITY;
    for (b, sc) in scal.iter().enumerate() {
        let rinv_t = sc.r.clone().try_inverse();
        let Some(rinv) = rinv_t else { return 0.0 };
        let dxs = &rinv * &dir.dx[b] * rinv.transpose();
        let dzs = sc.r.transpose() * &dir.dz[b] * &sc.r;
        t = t.min(max_step(&sc.lambda, &dxs)).min(max_step(&sc.lambda, &dzs));
    }
    t = t.min(scalar_step(it.tau, dir.dtau)).min(scalar_step(it.kappa, dir.dkappa));
    t
}

fn jordan(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    (a * b + b * a) * 0.5
}

/// Solves the problem; see the module docs for the form.
pub fn solve(problem: &SdpProblem, opts: &SolveOptions) -> SdpSolution {
    let fail = |msg: String| SdpSolution {
        status: Status::Indeterminate,
        blocks: problem.psd_blocks.iter().map(|&d| DMatrix::zeros(d, d)).collect(),
        frees: vec![0.0; problem.free_vars],
        max_eq_residual: f64::INFINITY,
        min_block_eigenvalue: f64::NAN,
        objective: None,
        farkas: None,
        iterations: 0,
        message: msg,
    };
    if let Err(e) = problem.validate() {
        return fail(e);
    }
    let data = preprocess(problem);
    let m = data.m();
    let nb = data.dims.len();
    let nf = data.cw.len();
    let nu: usize = data.dims.iter().sum();
    let mut it = Iterate {
        x: data.dims.iter().map(|&d| DMatrix::identity(d, d)).collect(),
        z: data.dims.iter().map(|&d| DMatrix::identity(d, d)).collect(),
        y: DVector::zeros(m),
        w: DVector::zeros(nf),
        tau: 1.0,
        kappa: 1.0,
    };
    let bnorm = data.b.amax().max(1.0);
    let cnorm = data.c.iter().map(|c| c.amax()).fold(data.cw.amax(), f64::max).max(1.0);
    let mut message = String::from("iteration limit");
    let mut status = Status::Indeterminate;
    let mut iters = 0;
    let mut farkas = None;
    let mut best: Option<(f64, f64, Iterate)> = None;
    let mut since_best = 0;
    for k in 0..opts.max_iters {
        iters = k;
        let res = residuals(&data, &it);
        let mu = (inner(&it.x, &it.z) + it.tau * it.kappa) / (nu as f64 + 1.0);
        let pres = res.rp.amax() / (it.tau * bnorm);
        let dres = res.rd.iter().map(|r| r.amax()).fold(res.rf.amax(), f64::max) / (it.tau * cnorm);
        let pobj = inner(&data.c, &it.x) + data.cw.dot(&it.w);
        let dobj = data.b.dot(&it.y);
        let gap = (pobj - dobj).abs() / (it.tau + pobj.abs().max(dobj.abs()));
        let has_obj = problem.objective.is_some();
        if opts.trace {
            eprintln!(
                "{k:3} pres {pres:9.2e} dres {dres:9.2e} gap {gap:9.2e} tau {:9.2e} kappa {:9.2e} mu {mu:9.2e} pobj {:.6e}",
                it.tau,
                it.kappa,
                -pobj / it.tau / data.obj_scale
            );
        }
        let needs_opt = has_obj && !opts.stop_at_feasible;
        if pres < opts.feas_tol && (!needs_opt || (dres < opts.feas_tol && gap < opts.gap_tol)) {
            status = Status::Feasible;
            message = "converged".into();
            break;
        }
        let merit = if needs_opt {
            (pres / opts.feas_tol).max(dres / opts.feas_tol).max(gap / opts.gap_tol)
        } else {
            pres / opts.feas_tol
        };
        if best.as_ref().is_none_or(|b| merit < 0.7 * b.0) {
            best = Some((merit, pres, it.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            // a collapsing τ is an infeasibility ray still forming
            let ray_forming = best.as_ref().is_some_and(|b| it.tau < 1e-2 * b.2.tau);
            if since_best >= 5 && !ray_forming && best.as_ref().is_some_and(|b| b.0 < 1.0e3) {
                message = "no progress".into();
                break;
            }
        }
        // primal infeasibility: a ray y with bᵀy > 0, Σ yᵢAᵢ ⪯ 0 and Bᵀy = 0,
        // checked against the original rows
        if dobj > 0.0 {
            let (max_pos, free_res, full) = ray_quality(problem, &data, &it.y);
            if opts.trace {
                eprintln!("      ray: max eigenvalue {max_pos:.2e} free residual {free_res:.2e}");
            }
            if max_pos <= opts.feas_tol && free_res <= opts.feas_tol {
                status = Status::Infeasible;
                message = "dual improving ray".into();
                farkas = Some(full);
                break;
            }
        }
        if !mu.is_finite() || (mu < 1e-16 * (1.0 + it.tau * it.tau) && pres > opts.feas_tol) {
            message = "stalled".into();
            break;
        }
        let mut scal = Vec::with_capacity(nb);
        for b in 0..nb {
            match nt_scaling(&it.x[b], &it.z[b]) {
                Some(s) => scal.push(s),
                None => {
                    message = "lost positive definiteness".into();
                    break;
                }
            }
        }
        if scal.len() < nb {
            break;
        }
        let Some(kkt) = factor_kkt(schur(&data, &scal), &data.bmat) else {
            message = "singular system".into();
            break;
        };
        let gcg: Vec<DMatrix<f64>> = (0..nb).map(|b| &scal[b].g * &data.c[b] * &scal[b].g).collect();
        let cgc = inner(&data.c, &gcg);
        let agcg = data.apply(&gcg, &DVector::zeros(nf));
        let p = kkt.solve(m, &(&data.b + &agcg), &data.cw);
        // predictor
        let target: Vec<DMatrix<f64>> = scal
            .iter()
            .map(|s| DMatrix::from_diagonal(&s.lambda.map(|l| -l * l)))
            .collect();
        let aff = direction(&data, &it, &scal, &kkt, &p, &gcg, cgc, &agcg, &res, &target, -it.tau * it.kappa, 1.0);
        let t_aff = step_length(&it, &scal, &aff).min(1.0);
        let sigma = (1.0 - t_aff).powi(3).clamp(0.0, 1.0);
        // corrector
        let mut target = Vec::with_capacity(nb);
        for b in 0..nb {
            let sc = &scal[b];
            let rinv = sc.r.clone().try_inverse().unwrap_or_else(|| DMatrix::identity(sc.r.nrows(), sc.r.nrows()));
            let dxs = &rinv * &aff.dx[b] * rinv.transpose();
            let dzs = sc.r.transpose() * &aff.dz[b] * &sc.r;
            let d = sc.lambda.len();
            let mut t = DMatrix::identity(d, d) * (sigma * mu) - DMatrix::from_diagonal(&sc.lambda.map(|l| l * l));
            t -= jordan(&dxs, &dzs);
            target.push(t);
        }
        let rtk = sigma * mu - it.tau * it.kappa - aff.dtau * aff.dkappa;
        let dir = direction(&data, &it, &scal, &kkt, &p, &gcg, cgc, &agcg, &res, &target, rtk, 1.0 - sigma);
        let t = (0.98 * step_length(&it, &scal, &dir)).min(1.0);
        if opts.trace {
            eprintln!("      sigma {sigma:.2e} t_aff {t_aff:.3} t {t:.3}");
        }
        if !(t > 1e-12) {
            message = "step too small".into();
            break;
        }
        for b in 0..nb {
            it.x[b] += &dir.dx[b] * t;
            it.z[b] += &dir.dz[b] * t;
            it.x[b] = (&it.x[b] + it.x[b].transpose()) * 0.5;
            it.z[b] = (&it.z[b] + it.z[b].transpose()) * 0.5;
        }
        it.y += &dir.dy * t;
        if nf > 0 {
            it.w += &dir.dw * t;
        }
        it.tau += dir.dtau * t;
        it.kappa += dir.dkappa * t;
    }
    if status == Status::Indeterminate && farkas.is_none() {
        if let Some((merit, _, b)) = best {
            if merit < 10.0 {
                status = Status::Feasible;
                message = format!("converged to reduced accuracy ({message})");
                it = b;
            }
        }
    }
    finish(problem, &data, it, status, iters, message, farkas, opts)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &SdpProblem,
    data: &Data,
    it: Iterate,
    mut status: Status,
    iterations: usize,
    mut message: String,
    farkas: Option<Vec<f64>>,
    opts: &SolveOptions,
) -> SdpSolution {
    let tau = it.tau.max(1e-300);
    let blocks: Vec<DMatrix<f64>> = it.x.iter().map(|x| x / tau).collect();
    let mut frees = vec![0.0; problem.free_vars];
    for (k, &orig) in data.free_keep.iter().enumerate() {
        frees[orig] = it.w[k] / tau;
    }
    let check = verify(problem, &blocks, &frees);
    let scale = blocks.iter().map(|b| b.amax()).fold(1.0, f64::max);
    let rhs_scale = problem.constraints.iter().map(|c| c.1.abs()).fold(1.0, f64::max);
    let mut farkas_out = None;
    if status == Status::Feasible
        && !(check.max_eq_residual < opts.feas_tol * 10.0 * rhs_scale
            && check.min_block_eigenvalue > -opts.psd_tol * scale)
    {
        status = Status::Indeterminate;
        message = format!(
            "candidate failed verification (residual {:e}, min eigenvalue {:e})",
            check.max_eq_residual, check.min_block_eigenvalue
        );
    }
    if status == Status::Infeasible {
        farkas_out = farkas;
    }
    let objective = problem.objective.as_ref().map(|obj| {
        let off = problem.block_offsets();
        obj.iter()
            .map(|&(v, c)| {
                c * match problem.locate(&off, v) {
                    Loc::Block(b, i, j) => blocks[b][(i, j)],
                    Loc::Free(k) => frees[k],
                }
            })
            .sum()
    });
    let _ = data.obj_scale;
    SdpSolution {
        status,
        blocks,
        frees,
        max_eq_residual: check.max_eq_residual,
        min_block_eigenvalue: check.min_block_eigenvalue,
        objective,
        farkas: farkas_out,
        iterations,
        message,
    }
}

/// Maps a scaled ray back to the original constraints, normalizes `bᵀy = 1`
/// and returns the largest eigenvalue of `Σ yᵢAᵢ`, the largest `|Bᵀy|` and the ray.
fn ray_quality(problem: &SdpProblem, data: &Data, y: &DVector<f64>) -> (f64, f64, Vec<f64>) {
    let mut full = vec![0.0; problem.constraints.len()];
    for (k, &(row, scale)) in data.kept.iter().enumerate() {
        full[row] = y[k] * scale;
    }
    let by: f64 = problem.constraints.iter().zip(&full).map(|((_, r), yi)| r * yi).sum();
    if !(by > 0.0) {
        return (f64::INFINITY, f64::INFINITY, full);
    }
    let full: Vec<f64> = full.iter().map(|v| v / by).collect();
    let off = problem.block_offsets();
    let mut s: Vec<DMatrix<f64>> = problem.psd_blocks.iter().map(|&d| DMatrix::zeros(d, d)).collect();
    let mut bty = vec![0.0; problem.free_vars];
    for ((f, _), &yi) in problem.constraints.iter().zip(&full) {
        for &(v, c) in f {
            match problem.locate(&off, v) {
                Loc::Block(b, i, j) => {
                    if i == j {
                        s[b][(i, i)] += yi * c;
                    } else {
                        s[b][(i, j)] += 0.5 * yi * c;
                        s[b][(j, i)] += 0.5 * yi * c;
                    }
                }
                Loc::Free(k) => bty[k] += yi * c,
            }
        }
    }
    let max_pos = s
        .iter()
        .map(|m| SymmetricEigen::new(m.clone()).eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .fold(f64::NEG_INFINITY, f64::max);
    let free_res = bty.iter().map(|v| v.abs()).fold(0.0, f64::max);
    (max_pos, free_res, full)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two(fix: Option<f64>, trace: Option<f64>) -> SdpProblem {
        let mut p = SdpProblem::new(vec![2], 0);
        if let Some(t) = trace {
            p.add_constraint(vec![(p.block_var(0, 0, 0), 1.0), (p.block_var(0, 1, 1), 1.0)], t);
        }
        if let Some(v) = fix {
            p.add_constraint(vec![(p.block_var(0, 0, 0), 1.0)], 1.0);
            p.add_constraint(vec![(p.block_var(0, 1, 1), 1.0)], 1.0);
            p.add_constraint(vec![(p.block_var(0, 0, 1), 1.0)], v);
        }
        p
    }

    #[test]
    fn trace_two_is_feasible() {
        let sol = solve(&two_by_two(None, Some(2.0)), &SolveOptions::default());
        assert_eq!(sol.status, Status::Feasible, "{}", sol.message);
        assert!(sol.max_eq_residual < 1e-8);
        assert!(sol.min_block_eigenvalue > -1e-9);
        let v = verify(&two_by_two(None, Some(2.0)), &[DMatrix::identity(2, 2)], &[]);
        assert!(v.max_eq_residual == 0.0 && v.min_block_eigenvalue == 1.0);
    }

    #[test]
    fn negative_trace_is_infeasible() {
        let sol = solve(&two_by_two(None, Some(-1.0)), &SolveOptions::default());
        assert_eq!(sol.status, Status::Infeasible, "{}", sol.message);
        assert!(sol.farkas.is_some());
    }

    #[test]
    fn off_diagonal_limits() {
        let ok = solve(&two_by_two(Some(0.6), None), &SolveOptions::default());
        assert_eq!(ok.status, Status::Feasible, "{}", ok.message);
        assert!((ok.blocks[0][(0, 1)] - 0.6).abs() < 1e-7);
        let bad = solve(&two_by_two(Some(1.2), None), &SolveOptions::default());
        assert_eq!(bad.status, Status::Infeasible, "{}", bad.message);
    }

    #[test]
    fn objective_and_free_variables() {
        // maximize t subject to X - t I ⪰ 0 (via free t), trace X = 2, X01 = 0.5
        let mut p = SdpProblem::new(vec![2, 2], 1);
        let t = p.free_var(0);
        for i in 0..2 {
            for j in i..2 {
                let mut f = vec![(p.block_var(0, i, j), 1.0), (p.block_var(1, i, j), -1.0)];
                if i == j {
                    f.push((t, -1.0));
                }
                p.add_constraint(f, 0.0);
            }
        }
        p.add_constraint(vec![(p.block_var(0, 0, 0), 1.0), (p.block_var(0, 1, 1), 1.0)], 2.0);
        p.add_constraint(vec![(p.block_var(0, 0, 1), 1.0)], 0.5);
        p.objective = Some(vec![(t, 1.0)]);
        let sol = solve(&p, &SolveOptions::default());
        assert_eq!(sol.status, Status::Feasible, "{}", sol.message);
        // X = [[1, .5], [.5, 1]] has λ_min = 0.5
        assert!((sol.frees[0] - 0.5).abs() < 1e-6, "{}", sol.frees[0]);
        assert!((sol.objective.unwrap() - 0.5).abs() < 1e-6);
    }

    /// Random problem with known strictly feasible primal and dual points.
    fn random_problem(seed: u64, dims: &[usize], m: usize, nf: usize) -> SdpProblem {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let mut p = SdpProblem::new(dims.to_vec(), nf);
        let nv = p.num_vars();
        let x0: Vec<DMatrix<f64>> = dims
            .iter()
            .map(|&d| {
                let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
                &a * a.transpose() + DMatrix::identity(d, d)
            })
            .collect();
        let w0: Vec<f64> = (0..nf).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let off = p.block_offsets();
        let locs: Vec<Loc> = (0..nv).map(|v| p.locate(&off, v)).collect();
        let value = |v: usize| match locs[v] {
            Loc::Block(b, i, j) => x0[b][(i, j)],
            Loc::Free(k) => w0[k],
        };
        for _ in 0..m {
            let mut f: Vec<Term> = Vec::new();
            for v in 0..nv {
                if rng.gen_bool(0.3) {
                    f.push((v, rng.gen_range(-1.0..1.0)));
                }
            }
            let rhs = f.iter().map(|&(v, c)| c * value(v)).sum();
            p.add_constraint(f, rhs);
        }
        // bounded objective: maximize -trace
        let mut obj: Vec<Term> = Vec::new();
        for (b, &d) in dims.iter().enumerate() {
            for i in 0..d {
                obj.push((p.block_var(b, i, i), -1.0));
            }
        }
        p.objective = Some(obj);
        p
    }

    #[test]
    fn random_problems_converge() {
        for seed in 0..40 {
            let p = random_problem(seed, &[12, 6, 1, 1], 40, (seed % 4) as usize);
            let sol = solve(&p, &SolveOptions::default());
            assert_eq!(sol.status, Status::Feasible, "seed {seed}: {}", sol.message);
            assert!(sol.iterations < 40, "seed {seed}: {} iterations", sol.iterations);
        }
    }

    /// Appends a row closing a Farkas ray: `Σ yᵢAᵢ = -P ⪯ 0`, `Bᵀy = 0`, `bᵀy = 1`.
    fn make_infeasible(p: &mut SdpProblem, seed: u64) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed + 1000);
        let y: Vec<f64> = (0..p.constraints.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut acc = vec![0.0; p.num_vars()];
        let mut by = 0.0;
        for ((f, r), yi) in p.constraints.iter().zip(&y) {
            for &(v, c) in f {
                acc[v] += yi * c;
            }
            by += yi * r;
        }
        for (b, &d) in p.psd_blocks.clone().iter().enumerate() {
            let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
            let pm = &a * a.transpose();
            for i in 0..d {
                for j in i..d {
                    let scale = if i == j { 1.0 } else { 2.0 };
                    acc[p.block_var(b, i, j)] += scale * pm[(i, j)];
                }
            }
        }
        let row = acc.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(v, &c)| (v, -c)).collect();
        p.add_constraint(row, 1.0 - by);
    }

    #[test]
    fn random_infeasible_problems_are_detected() {
        for seed in 0..20 {
            let mut p = random_problem(seed, &[8, 4, 1], 20, (seed % 3) as usize);
            make_infeasible(&mut p, seed);
            let sol = solve(&p, &SolveOptions::default());
            assert_eq!(sol.status, Status::Infeasible, "seed {seed}: {}", sol.message);
            assert!(sol.farkas.is_some());
        }
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let mut p = two_by_two(Some(0.6), Some(2.0));
        p.add_constraint(vec![(p.block_var(0, 0, 0), 2.0), (p.block_var(0, 1, 1), 2.0)], 4.0);
        let sol = solve(&p, &SolveOptions::default());
        assert_eq!(sol.status, Status::Feasible, "{}", sol.message);
    }

    #[test]
    fn deterministic_and_dumpable() {
        let p = two_by_two(Some(0.6), None);
        let a = solve(&p, &SolveOptions::default());
        let b = solve(&p, &SolveOptions::default());
        assert_eq!(a.status, b.status);
        assert_eq!(a.blocks, b.blocks);
        let text = p.dump();
        assert!(text.starts_with("blocks 2\nfree 0\n"));
        assert!(text.contains("2 0 0 1 1e0"));
        assert!(a.dump().contains("status feasible"));
    }
}
