//! Legendre–Galerkin discretization of PIEs: constrained pencil spectra as a
//! decay-rate oracle, and implicit time integration.
//!
//! States are stored as `[v0; c_0; …; c_{n−1}]` where `c_i` holds the
//! coefficients of component `i` in the orthonormal shifted Legendre basis,
//! so Euclidean norms of coefficient vectors are `ℝ^m × L2^n` norms.

use nalgebra::{Complex, DMatrix, DVector};

use crate::convert::{PieSystem, Trajectory as Seminorm};
use crate::error::{PieError, Result};
use crate::legendre;
use crate::piop::PiOp;
use crate::polymat::{Interval, Point};

/// Shifted Legendre polynomials `P_q(ξ(x))`, `q ≤ degree`, on an interval.
#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    pub interval: Interval<f64>,
    pub degree: usize,
}

impl Basis {
    pub fn new(interval: Interval<f64>, degree: usize) -> Result<Self> {
        if degree < 2 {
            return Err(PieError::Usage("basis degree must be at least 2".into()));
        }
        Ok(Self { interval, degree })
    }

    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn xi(&self, x: f64) -> f64 {
        (2.0 * x - self.interval.a - self.interval.b) / (self.interval.b - self.interval.a)
    }

    /// `∫ P_q(ξ(x))² dx`.
    pub fn norm2(&self, q: usize) -> f64 {
        (self.interval.b - self.interval.a) / (2 * q + 1) as f64
    }

    /// `P_0(ξ(x)), …, P_N(ξ(x))`.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        legendre::eval_all(self.degree, self.xi(x))
    }

    /// Gauss nodes and weights on `[lo, hi]`.
    fn gauss_on(rule: &(Vec<f64>, Vec<f64>), lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        rule.0.iter().zip(&rule.1).map(|(x, w)| (c + h * x, h * w)).collect()
    }

    /// Orthonormal-basis coefficients of `f` on this interval.
    pub fn project(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let rule = legendre::gauss(4 * self.degree + 20);
        let mut c = vec![0.0; self.len()];
        for (x, w) in Self::gauss_on(&rule, self.interval.a, self.interval.b) {
            let fx = f(x);
            for (q, p) in self.eval(x).into_iter().enumerate() {
                c[q] += w * fx * p;
            }
        }
        for (q, v) in c.iter_mut().enumerate() {
            *v /= self.norm2(q).sqrt();
        }
        c
    }

    /// Value at `x` of the function with orthonormal coefficients `c`.
    pub fn evaluate(&self, c: &[f64], x: f64) -> f64 {
        self.eval(x)
            .iter()
            .enumerate()
            .map(|(q, p)| c[q] * p / self.norm2(q).sqrt())
            .sum()
    }
}

/// Galerkin matrix of `op` in the (unnormalized) basis:
/// `M_ij = ⟨φ_i, op φ_j⟩ / ⟨φ_i, φ_i⟩`, with unit vectors on the finite parts.
/// Every integrand is polynomial and the Gauss rules are exact for its degree.
pub fn discretize(op: &PiOp<f64>, basis: &Basis) -> Result<DMatrix<f64>> {
    let iv = op.interval.to_f64();
    if (iv.a - basis.interval.a).abs() > 1e-14 || (iv.b - basis.interval.b).abs() > 1e-14 {
        return Err(PieError::Usage("operator and basis intervals differ".into()));
    }
    let (a, b) = (iv.a, iv.b);
    let nb = basis.len();
    let (mo, no) = (op.out.m, op.out.n);
    let (mi, ni) = (op.inp.m, op.inp.n);
    let mut out = DMatrix::zeros(mo + no * nb, mi + ni * nb);
    let rule = legendre::gauss(basis.degree + op.degree() as usize + 4);
    let outer = Basis::gauss_on(&rule, a, b);
    let ev = |p: &crate::Poly<f64>, x: f64, t: f64| p.eval(&Point::xt(x, t)).expect("both variables given");

    // finite outputs
    for r in 0..mo {
        for c in 0..mi {
            out[(r, c)] = ev(op.p.get(r, c), 0.0, 0.0);
        }
        for c in 0..ni {
            for &(x, w) in &outer {
                let q1 = ev(op.q1.get(r, c), x, x);
                for (p, phi) in basis.eval(x).into_iter().enumerate() {
                    out[(r, mi + c * nb + p)] += w * q1 * phi;
                }
            }
        }
    }
    // function outputs, accumulated as ⟨φ_q, ·⟩
    for &(x, w) in &outer {
        let phi_x = basis.eval(x);
        let lower = Basis::gauss_on(&rule, a, x);
        let upper = Basis::gauss_on(&rule, x, b);
        for r in 0..no {
            for c in 0..mi {
                let val = ev(op.q2.get(r, c), x, x);
                for (q, pq) in phi_x.iter().enumerate() {
                    out[(mo + r * nb + q, c)] += w * val * pq;
                }
            }
            for c in 0..ni {
                let mut col = vec![0.0; nb];
                let r0 = ev(op.r0.get(r, c), x, x);
                for (p, v) in col.iter_mut().enumerate() {
                    *v += r0 * phi_x[p];
                }
                for (part, nodes) in [(op.r1.get(r, c), &lower), (op.r2.get(r, c), &upper)] {
                    if part.is_zero() {
                        continue;
                    }
                    for &(t, wt) in nodes.iter() {
                        let k = wt * ev(part, x, t);
                        for (p, phi) in basis.eval(t).into_iter().enumerate() {
                            col[p] += k * phi;
                        }
                    }
                }
                for (p, v) in col.iter().enumerate() {
                    for (q, pq) in phi_x.iter().enumerate() {
                        out[(mo + r * nb + q, mi + c * nb + p)] += w * v * pq;
                    }
                }
            }
        }
    }
    for r in 0..no {
        for q in 0..nb {
            let s = 1.0 / basis.norm2(q);
            for c in 0..out.ncols() {
                out[(mo + r * nb + q, c)] *= s;
            }
        }
    }
    Ok(out)
}

/// Diagonal scaling from unnormalized to orthonormal coordinates.
fn orthonormal_scale(basis: &Basis, m: usize, n: usize) -> DVector<f64> {
    let mut d = DVector::from_element(m + n * basis.len(), 1.0);
    for c in 0..n {
        for q in 0..basis.len() {
            d[m + c * basis.len() + q] = basis.norm2(q).sqrt();
        }
    }
    d
}

/// Galerkin matrix in orthonormal coordinates.
fn discretize_orthonormal(op: &PiOp<f64>, basis: &Basis) -> Result<DMatrix<f64>> {
    let mut mat = discretize(op, basis)?;
    let dout = orthonormal_scale(basis, op.out.m, op.out.n);
    let din = orthonormal_scale(basis, op.inp.m, op.inp.n);
    for i in 0..mat.nrows() {
        for j in 0..mat.ncols() {
            mat[(i, j)] *= dout[i] / din[j];
        }
    }
    Ok(mat)
}

/// Discretized PIE `T̂ v̇ = Â v` on `K v = 0`, in orthonormal coordinates.
#[derive(Clone, Debug)]
pub struct DiscretizedPencil {
    pub basis: Basis,
    pub m: usize,
    pub n: usize,
    pub t: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub k: DMatrix<f64>,
    /// `v ↦ u = T v`.
    pub state: DMatrix<f64>,
    /// `v ↦ (I − S) u`.
    pub measured: DMatrix<f64>,
    /// Orthonormal basis of the nullspace of `k`, as columns.
    pub nullspace: DMatrix<f64>,
}

/// Relative singular-value threshold for the nullspace of `K`.
const NULL_TOL: f64 = 1e-10;

fn nullspace(k: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    if k.nrows() == 0 {
        return DMatrix::identity(dim, dim);
    }
    // eigenvectors of KᵀK with negligible eigenvalues
    let eig = (k.transpose() * k).symmetric_eigen();
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let cols: Vec<usize> = (0..dim).filter(|&i| eig.eigenvalues[i] <= NULL_TOL * NULL_TOL * top.max(1.0)).collect();
    DMatrix::from_fn(dim, cols.len(), |r, c| eig.eigenvectors[(r, cols[c])])
}

impl DiscretizedPencil {
    pub fn new(pie: &PieSystem<f64>, s: &Seminorm<f64>, degree: usize) -> Result<Self> {
        let basis = Basis::new(pie.maps.interval.to_f64(), degree)?;
        let (tt, _) = pie.s_transform(s)?;
        let t = discretize_orthonormal(&pie.that, &basis)?;
        let a = discretize_orthonormal(&pie.ahat, &basis)?;
        let k = discretize_orthonormal(&pie.k, &basis)?;
        let state = discretize_orthonormal(&pie.maps.t, &basis)?;
        let measured = discretize_orthonormal(&tt, &basis)?;
        let nullspace = nullspace(&k, t.ncols());
        Ok(Self {
            basis,
            m: pie.m,
            n: pie.n,
            t,
            a,
            k,
            state,
            measured,
            nullspace,
        })
    }

    /// `(Zᵀ T̂ Z, Zᵀ Â Z)`.
    pub fn projected(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let z = &self.nullspace;
        (z.transpose() * &self.t * z, z.transpose() * &self.a * z)
    }

    /// Least-squares fit of `v ∈ Y` with `T v ≈ u0`.
    pub fn fit_state(&self, u0: impl Fn(f64) -> Vec<f64>) -> Result<DVector<f64>> {
        let nb = self.basis.len();
        let mut target = DVector::zeros(self.n * nb);
        for c in 0..self.n {
            let coeffs = self.basis.project(|x| u0(x)[c]);
            for (q, v) in coeffs.into_iter().enumerate() {
                target[c * nb + q] = v;
            }
        }
        let lhs = &self.state * &self.nullspace;
        let w = lhs
            .svd(true, true)
            .solve(&target, 1e-12)
            .map_err(|e| PieError::Numerical(e.to_string()))?;
        Ok(&self.nullspace * w)
    }
}

/// One eigenvalue of the constrained pencil with its eigenvector `v`.
#[derive(Clone, Debug)]
pub struct Mode {
    pub value: Complex<f64>,
    pub vector: Vec<Complex<f64>>,
    /// `‖(I − S) u‖ / ‖u‖` for this mode.
    pub visibility: f64,
}

#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Sorted by decreasing real part.
    pub modes: Vec<Mode>,
    /// Eigenvalues at infinity that were dropped.
    pub infinite: usize,
}

/// Eigenvalues with `|1/μ|` below this (relative) count as infinite.
const INFINITE_TOL: f64 = 1e-12;
/// Shift used for the spectral transformation `(Â − σT̂)⁻¹T̂`.
const SHIFT: f64 = 0.372_518;
/// Relative visibility threshold in [`Spectrum::decay_rate`].
pub const VISIBILITY_TOL: f64 = 1e-8;

fn cmat(m: &DMatrix<f64>) -> DMatrix<Complex<f64>> {
    m.map(|v| Complex::new(v, 0.0))
}

/// Eigenvalues of `(Â, T̂)` restricted to the nullspace of `K`.
pub fn constrained_spectrum(pencil: &DiscretizedPencil) -> Result<Spectrum> {
    let (tp, ap) = pencil.projected();
    let dim = tp.nrows();
    if dim == 0 {
        return Err(PieError::Numerical("constraint leaves no state".into()));
    }
    let shifted = &ap - &tp * SHIFT;
    let lu = shifted.clone().lu();
    let b = lu
        .solve(&tp)
        .ok_or_else(|| PieError::Numerical("shifted pencil is singular".into()))?;
    let mus = b.complex_eigenvalues();
    let scale = mus.iter().map(|m| m.norm()).fold(0.0, f64::max);
    let mut modes = Vec::new();
    let mut infinite = 0;
    let cz = cmat(&pencil.nullspace);
    let cstate = cmat(&pencil.state);
    let cmeasured = cmat(&pencil.measured);
    for mu in mus.iter() {
        if mu.norm() <= INFINITE_TOL * scale.max(1.0) {
            infinite += 1;
            continue;
        }
        let value = Complex::new(SHIFT, 0.0) + mu.inv();
        let op = cmat(&ap) - cmat(&tp) * value;
        let svd = op.svd(false, true);
        let vt = svd.v_t.ok_or_else(|| PieError::Numerical("singular vectors unavailable".into()))?;
        let k = (0..svd.singular_values.len())
            .min_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]))
            .unwrap_or(0);
        let w = vt.row(k).adjoint();
        let v = &cz * w;
        let full = (&cstate * &v).norm();
        let seen = (&cmeasured * &v).norm();
        modes.push(Mode {
            value,
            vector: v.iter().cloned().collect(),
            visibility: if full > 0.0 { seen / full } else { 0.0 },
        });
    }
    let key = |m: &Mode| ((m.value.re * 1e8).round(), m.value.im.abs(), m.value.im);
    modes.sort_by(|x, y| {
        let (a, b) = (key(x), key(y));
        b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2))
    });
    Ok(Spectrum { modes, infinite })
}

impl Spectrum {
    /// Modes whose measured component is not negligible.
    pub fn visible(&self) -> impl Iterator<Item = &Mode> {
        self.modes.iter().filter(|m| m.visibility > VISIBILITY_TOL)
    }

    /// `−max Re λ` over visible modes.
    pub fn decay_rate(&self) -> Result<f64> {
        self.visible()
            .map(|m| -m.value.re)
            .reduce(f64::min)
            .ok_or_else(|| PieError::Numerical("no visible modes".into()))
    }
}

/// Spectral decay-rate estimate for `pie` measured through `s`, with basis degree `n`.
pub fn decay_rate(pie: &PieSystem<f64>, s: &Seminorm<f64>, n: usize) -> Result<f64> {
    constrained_spectrum(&DiscretizedPencil::new(pie, s, n)?)?.decay_rate()
}

/// Time series produced by [`integrate_pie`].
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// `‖(I − S) u(t)‖`.
    pub seminorms: Vec<f64>,
    /// `‖u(t)‖`.
    pub norms: Vec<f64>,
}

/// Allowed drift of `K v` along a trajectory.
const DRIFT_TOL: f64 = 1e-8;

/// Implicit trapezoidal integration of `T̂ v̇ = Â v` from `v_init ∈ Y`.
pub fn integrate_pie(pencil: &DiscretizedPencil, v_init: &DVector<f64>, t_end: f64, dt: f64) -> Result<Trajectory> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(PieError::Usage("time step must be positive".into()));
    }
    if t_end < 0.0 {
        return Err(PieError::Usage("end time must be nonnegative".into()));
    }
    if v_init.len() != pencil.t.ncols() {
        return Err(crate::error::dim_err("initial state", pencil.t.ncols(), v_init.len()));
    }
    let kv = (&pencil.k * v_init).amax();
    if kv > 1e-10 * v_init.amax().max(1.0) {
        return Err(PieError::Usage(format!("initial state violates the constraint (|Kv| = {kv:.2e})")));
    }
    let z = &pencil.nullspace;
    let (tp, ap) = pencil.projected();
    let lhs = &tp - &ap * (0.5 * dt);
    let rhs = &tp + &ap * (0.5 * dt);
    let lu = lhs.lu();
    if lu.determinant() == 0.0 {
        return Err(PieError::Numerical("implicit step matrix is singular".into()));
    }
    let mut w = z.transpose() * v_init;
    let steps = (t_end / dt).round() as usize;
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        seminorms: Vec::with_capacity(steps + 1),
        norms: Vec::with_capacity(steps + 1),
    };
    for step in 0..=steps {
        let v = z * &w;
        if step % 100 == 0 {
            let drift = (&pencil.k * &v).amax();
            if drift > DRIFT_TOL * v.amax().max(1.0) {
                return Err(PieError::Numerical(format!("state left the constraint set (|Kv| = {drift:.2e})")));
            }
        }
        traj.times.push(step as f64 * dt);
        traj.seminorms.push((&pencil.measured * &v).norm());
        traj.norms.push((&pencil.state * &v).norm());
        traj.states.push(v);
        if step < steps {
            w = lu
                .solve(&(&rhs * &w))
                .ok_or_else(|| PieError::Numerical("implicit step failed".into()))?;
        }
    }
    Ok(traj)
}

impl Trajectory {
    /// Delimiter-separated `time,seminorm,norm` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,seminorm,norm\n");
        for i in 0..self.times.len() {
            out.push_str(&format!("{:e},{:e},{:e}\n", self.times[i], self.seminorms[i], self.norms[i]));
        }
        out
    }

    /// Least-squares slope of `−log ‖(I − S)u‖` over `[t0, t1]`.
    pub fn fitted_rate(&self, t0: f64, t1: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .times
            .iter()
            .zip(&self.seminorms)
            .filter(|(t, s)| **t >= t0 && **t <= t1 && **s > 0.0)
            .map(|(t, s)| (*t, s.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let (mt, my) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t / n, b + y / n));
        let (sxy, sxx) = pts
            .iter()
            .fold((0.0, 0.0), |(a, b), (t, y)| (a + (t - mt) * (y - my), b + (t - mt) * (t - mt)));
        Some(-sxy / sxx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convert::{damped_wave, dirichlet_heat, pde_to_pie, reaction_diffusion};
    use crate::piop::Dims;
    use crate::polymat::{Poly, PolyMat};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn unit() -> Interval<f64> {
        Interval { a: -1.0, b: 1.0 }
    }

    #[test]
    fn identity_and_zero() {
        let basis = Basis::new(unit(), 5).unwrap();
        let d = Dims::new(1, 2);
        let id = discretize(&PiOp::identity(unit(), d), &basis).unwrap();
        assert!((id - DMatrix::identity(13, 13)).amax() < 1e-13);
        let z = discretize(&PiOp::zero(unit(), d, d), &basis).unwrap();
        assert_eq!(z.amax(), 0.0);
    }

    #[test]
    fn multiplier_by_x_is_the_recurrence() {
        let basis = Basis::new(unit(), 2).unwrap();
        let op = PiOp::multiplier(unit(), PolyMat::from_fn(1, 1, |_, _| Poly::x()));
        let m = discretize(&op, &basis).unwrap();
        // column k holds x P_k = (k+1)/(2k+1) P_{k+1} + k/(2k+1) P_{k−1}
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 1.0 / 3.0, 0.0, 1.0, 0.0, 2.0 / 5.0, 0.0, 2.0 / 3.0, 0.0]);
        assert!((m - expected).amax() < 1e-14);
    }

    #[test]
    fn discretization_matches_polynomial_application() {
        let pie = pde_to_pie(&reaction_diffusion::<f64>(2.0, true)).unwrap();
        let basis = Basis::new(unit(), 8).unwrap();
        let op = &pie.maps.t;
        let mat = discretize(op, &basis).unwrap();
        // v1 = P_3(x): T v is a polynomial of degree 5 ≤ N
        let table = legendre::monomial_coeffs(3);
        let v1 = PolyMat::from_fn(1, 1, |_, _| Poly::from_terms(table[3].iter().enumerate().map(|(i, c)| (i as u32, 0, *c))));
        let v0 = PolyMat::from_constants(1, 1, &[0.5]);
        let (_, u) = op.apply_poly(&v0, &v1).unwrap();
        let mut input = DVector::zeros(1 + basis.len());
        input[0] = 0.5;
        input[1 + 3] = 1.0;
        let coeffs = &mat * input;
        for x in [-0.9, -0.2, 0.4, 1.0] {
            let direct = u.get(0, 0).eval(&Point::x(x)).unwrap();
            let series: f64 = basis.eval(x).iter().enumerate().map(|(q, p)| coeffs[q] * p).sum();
            assert_abs_diff_eq!(direct, series, epsilon = 1e-12);
        }
    }

    #[test]
    fn periodic_heat_spectrum() {
        let pie = pde_to_pie(&reaction_diffusion::<f64>(0.0, true)).unwrap();
        let pencil = DiscretizedPencil::new(&pie, &Seminorm::T0F, 16).unwrap();
        let spec = constrained_spectrum(&pencil).unwrap();
        let rate = spec.decay_rate().unwrap();
        assert_abs_diff_eq!(rate, PI * PI, epsilon = 1e-6);
        // the invisible v0 branch carries the eigenvalue λ = 0
        let hidden: Vec<&Mode> = spec.modes.iter().filter(|m| m.visibility <= VISIBILITY_TOL).collect();
        assert_eq!(hidden.len(), 1);
        assert!(hidden[0].value.norm() < 1e-9);
        let visible: Vec<f64> = spec.visible().map(|m| m.value.re).collect();
        for (k, want) in [1.0f64, 4.0, 9.0].iter().enumerate() {
            // each nonzero mode is double (cos and sin)
            assert_abs_diff_eq!(visible[2 * k], -want * PI * PI, epsilon = 1e-5 * want);
            assert_abs_diff_eq!(visible[2 * k + 1], -want * PI * PI, epsilon = 1e-5 * want);
        }
    }

    #[test]
    fn reaction_branch_is_lambda() {
        let pie = pde_to_pie(&reaction_diffusion::<f64>(3.0, true)).unwrap();
        let pencil = DiscretizedPencil::new(&pie, &Seminorm::T0F, 16).unwrap();
        let spec = constrained_spectrum(&pencil).unwrap();
        assert_abs_diff_eq!(spec.modes[0].value.re, 3.0, epsilon = 1e-9);
        assert!(spec.modes[0].visibility <= VISIBILITY_TOL);
        assert_abs_diff_eq!(spec.decay_rate().unwrap(), PI * PI - 3.0, epsilon = 1e-6);
    }

    #[test]
    fn damped_wave_spectrum() {
        for k in [1.0, 4.0] {
            let pie = pde_to_pie(&damped_wave::<f64>(k)).unwrap();
            let pencil = DiscretizedPencil::new(&pie, &Seminorm::Zero, 16).unwrap();
            let spec = constrained_spectrum(&pencil).unwrap();
            assert_abs_diff_eq!(spec.decay_rate().unwrap(), k, epsilon = 1e-6);
            // −k ± iπ
            let first = spec.modes.iter().find(|m| (m.value.im - PI).abs() < 1e-6).expect("first oscillating mode");
            assert_abs_diff_eq!(first.value.re, -k, epsilon = 1e-6);
        }
    }

    #[test]
    fn undamped_wave_is_conservative() {
        let pie = pde_to_pie(&damped_wave::<f64>(0.0)).unwrap();
        let pencil = DiscretizedPencil::new(&pie, &Seminorm::Zero, 16).unwrap();
        let spec = constrained_spectrum(&pencil).unwrap();
        for m in spec.modes.iter().filter(|m| m.value.im.abs() < 5.0 * PI) {
            assert!(m.value.re.abs() < 1e-8, "{:?}", m.value);
        }
    }

    #[test]
    fn dirichlet_heat_rate() {
        let pie = pde_to_pie(&dirichlet_heat::<f64>()).unwrap();
        assert_abs_diff_eq!(decay_rate(&pie, &Seminorm::Zero, 16).unwrap(), PI * PI, epsilon = 1e-6);
    }

    #[test]
    fn heat_mode_tracks_exponential() {
        let pie = pde_to_pie(&reaction_diffusion::<f64>(0.0, true)).unwrap();
        let pencil = DiscretizedPencil::new(&pie, &Seminorm::T0F, 16).unwrap();
        let v = pencil.fit_state(|x| vec![(PI * x).cos()]).unwrap();
        let traj = integrate_pie(&pencil, &v, 0.3, 1e-4).unwrap();
        for (t, u) in traj.times.iter().zip(&traj.norms).step_by(500) {
            let exact = (-PI * PI * t).exp();
            assert!((u - exact).abs() / exact < 1e-3, "t = {t}: {u} vs {exact}");
        }
    }

    #[test]
    fn constant_state_is_steady() {
        let pie = pde_to_pie(&reaction_diffusion::<f64>(0.0, true)).unwrap();
        let pencil = DiscretizedPencil::new(&pie, &Seminorm::T0F, 8).unwrap();
        let v = pencil.fit_state(|_| vec![2.0]).unwrap();
        let traj = integrate_pie(&pencil, &v, 0.1, 1e-3).unwrap();
        for (s, n) in traj.seminorms.iter().zip(&traj.norms) {
            assert!(*s < 1e-12);
            assert_abs_diff_eq!(*n, 2.0 * 2f64.sqrt(), epsilon = 1e-10);
        }
    }

    #[test]
    fn invalid_steps_are_rejected() {
        let pie = pde_to_pie(&reaction_diffusion::<f64>(0.0, true)).unwrap();
        let pencil = DiscretizedPencil::new(&pie, &Seminorm::T0F, 4).unwrap();
        let v = DVector::zeros(pencil.t.ncols());
        assert!(integrate_pie(&pencil, &v, 1.0, 0.0).is_err());
        let mut bad = v.clone();
        bad[1] = 1.0;
        assert!(integrate_pie(&pencil, &bad, 1.0, 0.1).is_err());
    }
}
