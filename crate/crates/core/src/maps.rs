//! The maps between the PDE domain and the fundamental state
//! `(v0, v1) = (F u, u_xx)`.

use crate::bcspace::{build_gh, split, synth_f3, validate_f3, BoundarySpec, SplitBoundary, RANK_TOL};
use crate::error::{PieError, Result};
use crate::linalg::{const_mul, DMat};
use crate::piop::{Dims, PiOp};
use crate::polymat::{Coeff, Interval, Poly, PolyMat, Var};

#[derive(Clone, Debug)]
pub struct StateMaps<C: Coeff> {
    pub interval: Interval<C>,
    pub n: usize,
    pub m: usize,
    pub split: SplitBoundary<C>,
    pub f3: PolyMat<C>,
    /// n × m, affine in `x`.
    pub t0: PolyMat<C>,
    /// n × n full-interval kernel in `(x, θ)`; the local `(x − θ)` part is not included.
    pub t1: PolyMat<C>,
    /// `(v0, v1) ↦ T0 v0 + T1 v1`.
    pub t: PiOp<C>,
    /// `(v0, v1) ↦ ∂x (T v)`.
    pub r: PiOp<C>,
    /// `u ↦ ∫ F3 u`, from `L2^n` to `ℝ^m`.
    pub f: PiOp<C>,
    /// `(v0, v1) ↦ ∫ H_{E2,F2} v1`.
    pub k: PiOp<C>,
}

/// `[I, (x − a)I]`.
fn affine_basis<C: Coeff>(interval: &Interval<C>, n: usize) -> PolyMat<C> {
    let shift = Poly::x().sub(&Poly::constant(interval.a.clone()));
    PolyMat::identity(n)
        .hstack(&PolyMat::scalar_identity(n, &shift))
        .expect("same row count")
}

fn augmented_inverse<C: Coeff>(split: &SplitBoundary<C>, f3: &PolyMat<C>) -> Result<DMat<C>> {
    if !validate_f3(split, f3) {
        return Err(PieError::SingularAugmentedG);
    }
    let g = split.augmented_g(f3)?;
    let smax = g.to_nalgebra().singular_values().iter().cloned().fold(0.0, f64::max);
    g.inverse(RANK_TOL * smax).ok_or(PieError::SingularAugmentedG)
}

/// The right inverse of `∂x²`: returns the full-interval kernel and the
/// operator `L2^n → L2^n` with the local `(x − θ)` term added on `θ < x`.
pub fn build_t1<C: Coeff>(split: &SplitBoundary<C>, f3: &PolyMat<C>) -> Result<(PolyMat<C>, PiOp<C>)> {
    let n = split.n;
    let ginv = augmented_inverse(split, f3)?;
    let (e, f) = split.augmented(f3)?;
    let h = build_gh(&split.interval, n, &e, &f)?.h;
    let kernel = affine_basis(&split.interval, n)
        .mul(&const_mul(&ginv, &h.swap_vars())?)?
        .canonicalize();
    let local = PolyMat::scalar_identity(n, &Poly::x().sub(&Poly::theta()));
    let mut op = PiOp::zero(split.interval.clone(), Dims::new(0, n), Dims::new(0, n));
    op.r1 = kernel.add(&local)?;
    op.r2 = kernel.clone();
    Ok((kernel, op))
}

/// `T0(x) = [I, (x−a)I] G_aug⁻¹ [0; I_m]` and the functional `F u = ∫ F3 u`.
pub fn build_t0_f<C: Coeff>(split: &SplitBoundary<C>, f3: &PolyMat<C>) -> Result<(PolyMat<C>, PiOp<C>)> {
    let (n, m) = (split.n, split.m);
    let ginv = augmented_inverse(split, f3)?;
    let sel = DMat::from_fn(2 * n, m, |r, c| if r == 2 * n - m + c { C::one() } else { C::zero() });
    let t0 = affine_basis(&split.interval, n).mul(&ginv.mul(&sel)?.to_polymat())?;
    let mut f = PiOp::zero(split.interval.clone(), Dims::new(m, 0), Dims::new(0, n));
    f.q1 = f3.clone();
    Ok((t0, f))
}

/// The derivative map `R = ∂x ∘ T`.
pub fn build_r<C: Coeff>(t: &PiOp<C>) -> Result<PiOp<C>> {
    t.diff_x()
}

/// The constraint functional `K v = ∫ H_{E2,F2} v1` on `ℝ^m × L2^n`.
pub fn build_k<C: Coeff>(split: &SplitBoundary<C>) -> Result<PiOp<C>> {
    let (n, m) = (split.n, split.m);
    let h2 = split.gh2()?.h;
    let mut k = PiOp::zero(split.interval.clone(), Dims::new(m, 0), Dims::new(m, n));
    k.q1 = h2;
    Ok(k)
}

impl<C: Coeff> StateMaps<C> {
    /// Builds every map, synthesizing `F3` unless one is supplied.
    pub fn new(bc: &BoundarySpec<C>, f3_override: Option<PolyMat<C>>) -> Result<Self> {
        let split = split(bc, RANK_TOL)?;
        let f3 = match f3_override {
            Some(f3) => f3,
            None => synth_f3(&split)?,
        };
        let (n, m) = (split.n, split.m);
        let (t1, t1_op) = build_t1(&split, &f3)?;
        let (t0, f) = build_t0_f(&split, &f3)?;
        let t = PiOp::new(
            bc.interval.clone(),
            Dims::new(0, n),
            Dims::new(m, n),
            PolyMat::zeros(0, m),
            PolyMat::zeros(0, n),
            t0.clone(),
            t1_op.r0,
            t1_op.r1,
            t1_op.r2,
        )?;
        let r = build_r(&t)?;
        let k = build_k(&split)?;
        Ok(Self {
            interval: bc.interval.clone(),
            n,
            m,
            split,
            f3,
            t0,
            t1,
            t,
            r,
            f,
            k,
        })
    }

    /// `𝒟 u = (∫ F3 u, u_xx)`.
    pub fn apply_d(&self, u: &PolyMat<C>) -> Result<(PolyMat<C>, PolyMat<C>)> {
        let v0 = self
            .f3
            .mul(u)?
            .integrate(Var::X, &self.interval.lower(), &self.interval.upper())?;
        Ok((v0, u.diff(Var::X).diff(Var::X)))
    }

    /// `T v` for polynomial input.
    pub fn apply_t(&self, v0: &PolyMat<C>, v1: &PolyMat<C>) -> Result<PolyMat<C>> {
        Ok(self.t.apply_poly(v0, v1)?.1)
    }

    /// `K v`.
    pub fn apply_k(&self, v0: &PolyMat<C>, v1: &PolyMat<C>) -> Result<PolyMat<C>> {
        Ok(self.k.apply_poly(v0, v1)?.0)
    }

    /// `T0 ∘ F`, the projection onto the `∂x²`-nullspace trajectory.
    pub fn t0_f(&self) -> Result<PiOp<C>> {
        let mut t0 = PiOp::zero(self.interval.clone(), Dims::new(0, self.n), Dims::new(self.m, 0));
        t0.q2 = self.t0.clone();
        t0.compose(&self.f)
    }
}

/// Corrects `u` (n × 1) into a member of the domain by adding
/// `Σ c (x − a)^k e_i`, `k ≤ 3`. `None` when the correction system has no solution.
pub fn project_to_domain<C: Coeff>(bc: &BoundarySpec<C>, u: &PolyMat<C>) -> Result<Option<PolyMat<C>>> {
    let n = bc.n;
    let shift = Poly::x().sub(&Poly::constant(bc.interval.a.clone()));
    let mut basis = Vec::new();
    let mut cols = Vec::new();
    for k in 0..4u32 {
        let mut pk = Poly::constant(C::one());
        for _ in 0..k {
            pk = pk.mul(&shift);
        }
        for i in 0..n {
            let b = PolyMat::from_fn(n, 1, |r, _| if r == i { pk.clone() } else { Poly::zero() });
            cols.push(bc.residual(&b)?);
            basis.push(b);
        }
    }
    let rows = bc.rows();
    let mat = DMat::from_fn(rows, cols.len(), |r, c| cols[c][(r, 0)].clone());
    let rhs = bc.residual(u)?;
    let neg = DMat::from_fn(rows, 1, |r, _| -rhs[(r, 0)].clone());
    let smax = mat.to_nalgebra().singular_values().iter().cloned().fold(0.0, f64::max);
    let Some(coef) = mat.solve_any(&neg, RANK_TOL * smax.max(1e-300)) else {
        return Ok(None);
    };
    let mut out = u.clone();
    for (k, b) in basis.iter().enumerate() {
        out = out.add(&b.scale(&coef[(k, 0)]))?;
    }
    Ok(Some(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymat::{Point, Rational};

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn iv(a: i64, b: i64) -> Interval<Rational> {
        Interval::new(q(a, 1), q(b, 1)).unwrap()
    }

    fn scalar(p: Poly<Rational>) -> PolyMat<Rational> {
        PolyMat::from_fn(1, 1, |_, _| p.clone())
    }

    fn periodic_half() -> StateMaps<Rational> {
        let bc = BoundarySpec::periodic(iv(-1, 1), 1);
        StateMaps::new(&bc, Some(PolyMat::from_constants(1, 1, &[q(1, 2)]))).unwrap()
    }

    #[test]
    fn dirichlet_green_function() {
        let maps = StateMaps::new(&BoundarySpec::dirichlet(iv(0, 1), 1), None).unwrap();
        assert_eq!(maps.m, 0);
        let th = Poly::theta();
        let x = Poly::x();
        let one = Poly::constant(q(1, 1));
        // θ(x−1) below the diagonal, x(θ−1) above
        assert_eq!(maps.t.r1.get(0, 0), &th.mul(&x.sub(&one)));
        assert_eq!(maps.t.r2.get(0, 0), &x.mul(&th.sub(&one)));
    }

    #[test]
    fn periodic_kernel_and_t0() {
        let maps = periodic_half();
        let x = Poly::x();
        let th = Poly::theta();
        let one = Poly::constant(q(1, 1));
        let om = one.sub(&th);
        let expect = x.mul(&th.sub(&one)).scale(&q(1, 2)).sub(&om.mul(&om).scale(&q(1, 4)));
        assert_eq!(maps.t1.get(0, 0), &expect);
        assert_eq!(maps.t0, PolyMat::from_constants(1, 1, &[q(1, 1)]));
        // u'' = θ with periodic conditions and zero mean
        let u = maps.apply_t(&PolyMat::zeros(1, 1), &scalar(x.clone())).unwrap();
        let cubic = Poly::from_terms([(3, 0, q(1, 6)), (1, 0, q(-1, 6))]);
        assert_eq!(u, scalar(cubic.clone()));
        let (v0, v1) = maps.apply_d(&scalar(cubic)).unwrap();
        assert!(v0.is_zero());
        assert_eq!(v1, scalar(x));
        let (c0, c1) = maps.apply_d(&PolyMat::from_constants(1, 1, &[q(5, 1)])).unwrap();
        assert_eq!(c0, PolyMat::from_constants(1, 1, &[q(5, 1)]));
        assert!(c1.is_zero());
        assert!(maps.apply_t(&PolyMat::zeros(1, 1), &PolyMat::zeros(1, 1)).unwrap().is_zero());
    }

    #[test]
    fn periodic_second_source() {
        // u'' = θ² − 1/3 with periodic conditions and zero mean: u = x⁴/12 − x²/6 + 7/180
        let maps = periodic_half();
        let v = Poly::from_terms([(2, 0, q(1, 1)), (0, 0, q(-1, 3))]);
        let u = maps.apply_t(&PolyMat::zeros(1, 1), &scalar(v)).unwrap();
        let expect = Poly::from_terms([(4, 0, q(1, 12)), (2, 0, q(-1, 6)), (0, 0, q(7, 180))]);
        assert_eq!(u, scalar(expect));
    }

    #[test]
    fn f_after_t_is_projection() {
        for maps in [
            periodic_half(),
            StateMaps::new(&BoundarySpec::neumann(iv(0, 1), 2), None).unwrap(),
        ] {
            let ft = maps.f.compose(&maps.t).unwrap();
            let mut proj = PiOp::zero(maps.interval.clone(), Dims::new(maps.m, 0), Dims::new(maps.m, maps.n));
            proj.p = PolyMat::identity(maps.m);
            assert_eq!(ft, proj);
        }
    }

    #[test]
    fn wave_t0_identity() {
        let maps = StateMaps::new(&BoundarySpec::neumann(iv(0, 1), 2), None).unwrap();
        assert_eq!(maps.t0, PolyMat::identity(2));
    }

    #[test]
    fn derivative_map() {
        let maps = periodic_half();
        assert!(maps.r.q2.is_zero());
        let half_tm1 = Poly::theta().sub(&Poly::constant(q(1, 1))).scale(&q(1, 2));
        assert_eq!(maps.r.r2.get(0, 0), &half_tm1);
        assert_eq!(maps.r.r1.get(0, 0), &half_tm1.add(&Poly::constant(q(1, 1))));

        let dir = StateMaps::new(&BoundarySpec::dirichlet(iv(0, 1), 1), None).unwrap();
        let v1 = PolyMat::from_constants(1, 1, &[q(1, 1)]);
        let v0 = PolyMat::zeros(0, 1);
        let tv = dir.apply_t(&v0, &v1).unwrap();
        assert_eq!(tv, scalar(Poly::from_terms([(2, 0, q(1, 2)), (1, 0, q(-1, 2))])));
        assert_eq!(dir.r.apply_poly(&v0, &v1).unwrap().1, tv.diff(Var::X));
    }

    #[test]
    fn constraint_functionals() {
        let maps = periodic_half();
        let k = &maps.k;
        assert!(k.p.is_zero());
        let h = k.q1.get(0, 0);
        assert!(!h.uses(Var::X));
        assert!(!h.is_zero());

        let nm = StateMaps::new(&BoundarySpec::neumann(iv(0, 1), 1), None).unwrap();
        let c = nm.k.q1.constant_values().unwrap()[0][0].clone();
        assert!(c != q(0, 1));

        let dir = StateMaps::new(&BoundarySpec::dirichlet(iv(0, 1), 1), None).unwrap();
        assert_eq!(dir.k.out, Dims::new(0, 0));
    }

    #[test]
    fn linear_function_not_dirichlet_member() {
        let dir = StateMaps::new(&BoundarySpec::dirichlet(iv(0, 1), 1), None).unwrap();
        let bc = BoundarySpec::dirichlet(iv(0, 1), 1);
        let u = scalar(Poly::x());
        let (_, v1) = dir.apply_d(&u).unwrap();
        assert!(v1.is_zero());
        assert!(!bc.contains(&u).unwrap());
    }

    #[test]
    fn projection_lands_in_domain() {
        let bc = BoundarySpec::periodic(iv(-1, 1), 1);
        let u = scalar(Poly::from_terms([(5, 0, q(1, 1)), (2, 0, q(3, 1))]));
        let p = project_to_domain(&bc, &u).unwrap().unwrap();
        assert!(bc.contains(&p).unwrap());
        assert_eq!(p.eval(&Point::x(q(0, 1))).unwrap().len(), 1);
    }
}
