//! Boundary conditions `E·[u(a); u(b); u_x(a); u_x(b)] + ∫ F u = 0` and their
//! representation through the lower-boundary values and `u_xx`.

use crate::error::{dim_err, PieError, Result};
use crate::linalg::{const_mul, DMat};
use crate::polymat::{Bound, Coeff, Interval, Point, Poly, PolyMat, Var};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySpec<C: Coeff> {
    pub interval: Interval<C>,
    pub n: usize,
    /// Rows × 4n, column blocks `u(a), u(b), u_x(a), u_x(b)`.
    pub e: DMat<C>,
    /// Rows × n polynomial in `x`.
    pub f: PolyMat<C>,
}

impl<C: Coeff> BoundarySpec<C> {
    pub fn new(interval: Interval<C>, n: usize, e: DMat<C>, f: PolyMat<C>) -> Result<Self> {
        if e.cols() != 4 * n {
            return Err(dim_err("boundary matrix E", format!("{} columns", 4 * n), e.cols()));
        }
        let f = if f.is_empty() && f.is_zero() { PolyMat::zeros(e.rows(), n) } else { f };
        if f.shape() != (e.rows(), n) {
            return Err(dim_err(
                "boundary functional F",
                format!("{}x{}", e.rows(), n),
                format!("{}x{}", f.rows(), f.cols()),
            ));
        }
        if f.degree_in(Var::Theta).unwrap_or(0) > 0 {
            return Err(PieError::Usage("F may depend on x only".into()));
        }
        Ok(Self { interval, n, e, f })
    }

    /// Periodic conditions `u(a) = u(b)`, `u_x(a) = u_x(b)`.
    pub fn periodic(interval: Interval<C>, n: usize) -> Self {
        let mut e = DMat::zeros(2 * n, 4 * n);
        for i in 0..n {
            e[(i, i)] = C::one();
            e[(i, n + i)] = -C::one();
            e[(n + i, 2 * n + i)] = C::one();
            e[(n + i, 3 * n + i)] = -C::one();
        }
        Self::new(interval, n, e, PolyMat::zeros(2 * n, n)).expect("consistent shapes")
    }

    /// Dirichlet conditions `u(a) = u(b) = 0`.
    pub fn dirichlet(interval: Interval<C>, n: usize) -> Self {
        let mut e = DMat::zeros(2 * n, 4 * n);
        for i in 0..2 * n {
            e[(i, i)] = C::one();
        }
        Self::new(interval, n, e, PolyMat::zeros(2 * n, n)).expect("consistent shapes")
    }

    /// Neumann conditions `u_x(a) = u_x(b) = 0`.
    pub fn neumann(interval: Interval<C>, n: usize) -> Self {
        let mut e = DMat::zeros(2 * n, 4 * n);
        for i in 0..2 * n {
            e[(i, 2 * n + i)] = C::one();
        }
        Self::new(interval, n, e, PolyMat::zeros(2 * n, n)).expect("consistent shapes")
    }

    pub fn rows(&self) -> usize {
        self.e.rows()
    }

    /// Left-hand side of the conditions evaluated on a polynomial `u` (n × 1).
    pub fn residual(&self, u: &PolyMat<C>) -> Result<DMat<C>> {
        let n = self.n;
        if u.rows() != n {
            return Err(dim_err("boundary residual", n, u.rows()));
        }
        let ux = u.diff(Var::X);
        let at = |m: &PolyMat<C>, x: &C| m.eval(&Point::x(x.clone()));
        let (a, b) = (&self.interval.a, &self.interval.b);
        let blocks = [at(u, a)?, at(u, b)?, at(&ux, a)?, at(&ux, b)?];
        let trace = DMat::from_fn(4 * n, 1, |r, _| blocks[r / n][r % n][0].clone());
        let integral = self
            .f
            .mul(u)?
            .integrate(Var::X, &self.interval.lower(), &self.interval.upper())?;
        self.e.mul(&trace)?.add(&DMat::from_polymat(&integral)?)
    }

    /// True when `u` satisfies the conditions exactly.
    pub fn contains(&self, u: &PolyMat<C>) -> Result<bool> {
        let r = self.residual(u)?;
        let scale = u.max_abs().max(1.0);
        Ok((0..r.rows()).all(|i| r[(i, 0)].is_negligible(scale * 1e3)))
    }
}

/// `G` (rows × 2n) and `H(x)` (rows × n) such that the conditions read
/// `G [u(a); u_x(a)] = ∫ H u_xx`.
#[derive(Clone, Debug, PartialEq)]
pub struct GH<C: Coeff> {
    pub g: DMat<C>,
    pub h: PolyMat<C>,
}

pub fn build_gh<C: Coeff>(interval: &Interval<C>, n: usize, e: &DMat<C>, f: &PolyMat<C>) -> Result<GH<C>> {
    let rows = e.rows();
    if e.cols() != 4 * n || f.shape() != (rows, n) {
        return Err(dim_err(
            "build_gh",
            format!("E {rows}x{} and F {rows}x{n}", 4 * n),
            format!("E {}x{} and F {}x{}", e.rows(), e.cols(), f.rows(), f.cols()),
        ));
    }
    let len = interval.length();
    // [[I,0],[I,(b-a)I],[0,I],[0,I]]
    let lift = DMat::from_fn(4 * n, 2 * n, |r, c| {
        let (rb, ri) = (r / n, r % n);
        let (cb, ci) = (c / n, c % n);
        if ri != ci {
            return C::zero();
        }
        match (rb, cb) {
            (0, 0) | (1, 0) | (2, 1) | (3, 1) => C::one(),
            (1, 1) => len.clone(),
            _ => C::zero(),
        }
    });
    let shift = Poly::x().sub(&Poly::constant(interval.a.clone()));
    let basis = PolyMat::identity(n).hstack(&PolyMat::scalar_identity(n, &shift))?;
    let fint = f.mul(&basis)?.integrate(Var::X, &interval.lower(), &interval.upper())?;
    let g = e.mul(&lift)?.add(&DMat::from_polymat(&fint)?)?;

    // [0; (b-x)I; 0; I]
    let bx = Poly::constant(interval.b.clone()).sub(&Poly::x());
    let tail = PolyMat::from_fn(4 * n, n, |r, c| {
        if r % n != c {
            return Poly::zero();
        }
        match r / n {
            1 => bx.clone(),
            3 => Poly::constant(C::one()),
            _ => Poly::zero(),
        }
    });
    let diff = Poly::theta().sub(&Poly::x());
    let tail_int = f
        .swap_vars()
        .mul_poly(&diff)
        .integrate(Var::Theta, &Bound::Var(Var::X), &interval.upper())?;
    let h = const_mul(e, &tail)?.neg().sub(&tail_int)?;
    Ok(GH { g, h })
}

/// Conditions reorganized as `J·(E, F) = [(E1, F1); (E2, F2)]` with
/// `G(E1, F1)` of full row rank and `G(E2, F2) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitBoundary<C: Coeff> {
    pub interval: Interval<C>,
    pub n: usize,
    pub e1: DMat<C>,
    pub f1: PolyMat<C>,
    pub e2: DMat<C>,
    pub f2: PolyMat<C>,
    pub j: DMat<C>,
    pub m: usize,
}

impl<C: Coeff> SplitBoundary<C> {
    pub fn gh1(&self) -> Result<GH<C>> {
        build_gh(&self.interval, self.n, &self.e1, &self.f1)
    }

    pub fn gh2(&self) -> Result<GH<C>> {
        build_gh(&self.interval, self.n, &self.e2, &self.f2)
    }

    /// The conditions `{[E1; 0], [F1; F3]}`.
    pub fn augmented(&self, f3: &PolyMat<C>) -> Result<(DMat<C>, PolyMat<C>)> {
        if f3.shape() != (self.m, self.n) {
            return Err(dim_err(
                "F3",
                format!("{}x{}", self.m, self.n),
                format!("{}x{}", f3.rows(), f3.cols()),
            ));
        }
        let e = self.e1.vstack(&DMat::zeros(self.m, 4 * self.n))?;
        let f = self.f1.vstack(f3)?;
        Ok((e, f))
    }

    pub fn augmented_g(&self, f3: &PolyMat<C>) -> Result<DMat<C>> {
        let (e, f) = self.augmented(f3)?;
        Ok(build_gh(&self.interval, self.n, &e, &f)?.g)
    }
}

pub fn split<C: Coeff>(bc: &BoundarySpec<C>, tol: f64) -> Result<SplitBoundary<C>> {
    let n = bc.n;
    if bc.rows() != 2 * n {
        return Err(dim_err("split", format!("{} boundary rows", 2 * n), bc.rows()));
    }
    let gh = build_gh(&bc.interval, n, &bc.e, &bc.f)?;
    let rank = gh.g.rank(tol);
    let smax = gh.g.to_nalgebra().singular_values().iter().cloned().fold(0.0, f64::max);
    let (_, j, pivots) = gh.g.gauss_jordan(tol * smax, rank);
    if pivots.len() != rank {
        return Err(PieError::Numerical(format!(
            "elimination found {} pivots for a rank-{rank} boundary matrix",
            pivots.len()
        )));
    }
    let je = j.mul(&bc.e)?;
    let jf = j.to_polymat().mul(&bc.f)?;
    let m = 2 * n - rank;
    Ok(SplitBoundary {
        interval: bc.interval.clone(),
        n,
        e1: je.select_rows(0..rank),
        f1: jf.row_range(0, rank),
        e2: je.select_rows(rank..2 * n),
        f2: jf.row_range(rank, m),
        j,
        m,
    })
}

/// Lexicographically first set of columns of `g` forming an invertible block.
fn pivot_columns<C: Coeff>(g: &DMat<C>, tol: f64) -> Option<Vec<usize>> {
    let mut chosen: Vec<usize> = Vec::new();
    for c in 0..g.cols() {
        if chosen.len() == g.rows() {
            break;
        }
        let mut trial = chosen.clone();
        trial.push(c);
        if g.select_cols(&trial).rank(tol) == trial.len() {
            chosen = trial;
        }
    }
    (chosen.len() == g.rows()).then_some(chosen)
}

/// The auxiliary functional `F3` (m × n) that makes the augmented boundary
/// matrix invertible.
pub fn synth_f3<C: Coeff>(split: &SplitBoundary<C>) -> Result<PolyMat<C>> {
    let (n, m) = (split.n, split.m);
    if m == 0 {
        return Ok(PolyMat::zeros(0, n));
    }
    let g1 = split.gh1()?.g;
    let pivots = pivot_columns(&g1, RANK_TOL).ok_or(PieError::NoPivotPermutation)?;
    let free: Vec<usize> = (0..2 * n).filter(|c| !pivots.contains(c)).collect();
    debug_assert_eq!(free.len(), m);

    let (a, b) = (split.interval.a.clone(), split.interval.b.clone());
    let len = b.clone() - a.clone();
    let x = Poly::x();
    let two = C::from_i64(2);
    // f = 2(2b + a - 3x)/(b-a)^2,  g = 6(b + a - 2x)/(b-a)^3
    let f = Poly::constant(two.clone() * b.clone() + a.clone())
        .sub(&x.scale(&C::from_i64(3)))
        .scale(&(two.clone() / len.powi(2)));
    let g = Poly::constant(b + a)
        .sub(&x.scale(&two))
        .scale(&(C::from_i64(6) / len.powi(3)));
    let mut f3 = PolyMat::zeros(m, n);
    for (k, &c) in free.iter().enumerate() {
        if c < n {
            f3.set(k, c, f.clone());
        } else {
            f3.set(k, c - n, g.neg());
        }
    }
    debug_assert!(validate_f3(split, &f3));
    Ok(f3)
}

/// True when `G([E1; 0], [F1; F3])` is invertible beyond the rank tolerance.
pub fn validate_f3<C: Coeff>(split: &SplitBoundary<C>, f3: &PolyMat<C>) -> bool {
    if split.m == 0 {
        return f3.rows() == 0;
    }
    match split.augmented_g(f3) {
        Ok(g) => g.rank(RANK_TOL) == 2 * split.n,
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymat::Rational;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn iv(a: i64, b: i64) -> Interval<Rational> {
        Interval::new(q(a, 1), q(b, 1)).unwrap()
    }

    fn consts(rows: usize, cols: usize, v: &[i64]) -> DMat<Rational> {
        DMat::from_rows(rows, cols, v.iter().map(|&k| q(k, 1)).collect())
    }

    #[test]
    fn gh_periodic() {
        let bc = BoundarySpec::periodic(iv(-1, 1), 1);
        let gh = build_gh(&bc.interval, 1, &bc.e, &bc.f).unwrap();
        assert_eq!(gh.g, consts(2, 2, &[0, -2, 0, 0]));
    }

    #[test]
    fn gh_single_neumann_row() {
        let e = consts(1, 4, &[0, 0, 0, 1]);
        let gh = build_gh(&iv(0, 1), 1, &e, &PolyMat::zeros(1, 1)).unwrap();
        assert_eq!(gh.g, consts(1, 2, &[0, 1]));
        assert_eq!(gh.h, PolyMat::from_constants(1, 1, &[q(-1, 1)]));
    }

    #[test]
    fn gh_zero() {
        let gh = build_gh(&iv(0, 1), 1, &DMat::zeros(2, 4), &PolyMat::zeros(2, 1)).unwrap();
        assert!(gh.g.is_zero());
        assert!(gh.h.is_zero());
    }

    #[test]
    fn split_examples() {
        let d = split(&BoundarySpec::dirichlet(iv(0, 1), 1), RANK_TOL).unwrap();
        assert_eq!(d.m, 0);
        assert_eq!(d.e2.rows(), 0);

        let p = split(&BoundarySpec::periodic(iv(-1, 1), 1), RANK_TOL).unwrap();
        assert_eq!(p.m, 1);
        // E2 is a multiple of [0, 0, 1, -1]
        let e2 = p.e2.row(0);
        assert!(e2[0] == q(0, 1) && e2[1] == q(0, 1) && e2[2] == -e2[3].clone() && e2[2] != q(0, 1));
        assert!(p.gh2().unwrap().g.is_zero());

        let nm = split(&BoundarySpec::neumann(iv(0, 1), 1), RANK_TOL).unwrap();
        assert_eq!(nm.m, 1);
        let h2 = nm.gh2().unwrap().h;
        assert_eq!(h2.vars(), vec![]);
        assert!(!h2.is_zero());
    }

    #[test]
    fn f3_examples() {
        let p = split(&BoundarySpec::periodic(iv(-1, 1), 1), RANK_TOL).unwrap();
        let f3 = synth_f3(&p).unwrap();
        // (1 - 3x)/2
        let expect = Poly::constant(q(1, 2)).sub(&Poly::x().scale(&q(3, 2)));
        assert_eq!(f3.get(0, 0), &expect);
        let lo = Bound::Const(q(-1, 1));
        let hi = Bound::Const(q(1, 1));
        assert_eq!(expect.integrate(Var::X, &lo, &hi).unwrap(), Poly::constant(q(1, 1)));
        let moment = expect.mul(&Poly::x().add(&Poly::constant(q(1, 1))));
        assert!(moment.integrate(Var::X, &lo, &hi).unwrap().is_zero());
        assert_eq!(p.augmented_g(&f3).unwrap(), consts(2, 2, &[0, 1, 1, 0]));
        assert!(validate_f3(&p, &f3));

        let half = PolyMat::from_constants(1, 1, &[q(1, 2)]);
        assert!(validate_f3(&p, &half));
        assert_eq!(p.augmented_g(&half).unwrap(), consts(2, 2, &[0, 1, 1, 1]));
        let odd = PolyMat::from_fn(1, 1, |_, _| Poly::x().scale(&q(1, 2)));
        assert!(!validate_f3(&p, &odd));

        let wave = split(&BoundarySpec::neumann(iv(0, 1), 2), RANK_TOL).unwrap();
        assert_eq!(wave.m, 2);
        let f3 = synth_f3(&wave).unwrap();
        let four_six = Poly::constant(q(4, 1)).sub(&Poly::x().scale(&q(6, 1)));
        assert_eq!(f3, PolyMat::scalar_identity(2, &four_six));

        let dir = split(&BoundarySpec::dirichlet(iv(0, 1), 1), RANK_TOL).unwrap();
        let f3 = synth_f3(&dir).unwrap();
        assert_eq!(f3.shape(), (0, 1));
        assert!(validate_f3(&dir, &f3));
    }

    fn random_poly(coeffs: &[i64]) -> PolyMat<Rational> {
        PolyMat::from_fn(1, 1, |_, _| {
            Poly::from_terms(coeffs.iter().enumerate().map(|(k, &c)| (k as u32, 0, q(c, 1 + k as i64))))
        })
    }

    proptest! {
        #[test]
        fn taylor_identity(
            coeffs in prop::collection::vec(-5i64..=5, 7),
            erow in prop::collection::vec(-3i64..=3, 4),
            frow in prop::collection::vec(-3i64..=3, 2),
        ) {
            let interval = iv(0, 2);
            let e = consts(1, 4, &erow);
            let f = PolyMat::from_fn(1, 1, |_, _| Poly::from_terms([(0, 0, q(frow[0], 1)), (1, 0, q(frow[1], 1))]));
            let bc = BoundarySpec::new(interval.clone(), 1, e.clone(), f.clone()).unwrap();
            let u = random_poly(&coeffs);
            let lhs = bc.residual(&u).unwrap();
            let gh = build_gh(&interval, 1, &e, &f).unwrap();
            let ua = u.eval(&Point::x(q(0, 1))).unwrap()[0][0].clone();
            let uxa = u.diff(Var::X).eval(&Point::x(q(0, 1))).unwrap()[0][0].clone();
            let uxx = u.diff(Var::X).diff(Var::X);
            let h_int = gh.h.mul(&uxx).unwrap()
                .integrate(Var::X, &interval.lower(), &interval.upper()).unwrap()
                .constant_values().unwrap()[0][0].clone();
            let rhs = gh.g[(0, 0)].clone() * ua + gh.g[(0, 1)].clone() * uxa - h_int;
            prop_assert_eq!(lhs[(0, 0)].clone(), rhs);
        }

        #[test]
        fn split_preserves_membership(
            coeffs in prop::collection::vec(-5i64..=5, 7),
            fam in 0usize..3,
        ) {
            let interval = iv(-1, 1);
            let bc = match fam {
                0 => BoundarySpec::periodic(interval, 1),
                1 => BoundarySpec::dirichlet(interval, 1),
                _ => BoundarySpec::neumann(interval, 1),
            };
            let s = split(&bc, RANK_TOL).unwrap();
            let stacked = BoundarySpec::new(
                bc.interval.clone(), 1,
                s.e1.vstack(&s.e2).unwrap(),
                s.f1.vstack(&s.f2).unwrap(),
            ).unwrap();
            let u = random_poly(&coeffs);
            prop_assert_eq!(bc.contains(&u).unwrap(), stacked.contains(&u).unwrap());
            prop_assert_eq!(s.j.mul(&bc.e).unwrap(), s.e1.vstack(&s.e2).unwrap());
            prop_assert!(validate_f3(&s, &synth_f3(&s).unwrap()));
        }
    }
}
