//! Partial-integral operators on `ℝ^m × L2^n[a, b]`.
//!
//! An operator is stored in two-sided form
//!
//! ```text
//! out0    = P v0 + ∫_a^b Q1(s) v1(s) ds
//! out1(x) = Q2(x) v0 + R0(x) v1(x) + ∫_a^x R1(x,s) v1(s) ds + ∫_x^b R2(x,s) v1(s) ds
//! ```
//!
//! `Q1`, `Q2`, `R0` are polynomials in `x`; `R1`, `R2` in `(x, θ)`.
//! [`PiOp::from_full_form`] accepts the variant where the second kernel acts
//! on the whole interval.

use crate::error::{dim_err, Result};
use crate::polymat::{integrate_product_mat, Bound, Coeff, Interval, PolyMat, Slot, Var};

/// Input or output space `ℝ^m × L2^n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub m: usize,
    pub n: usize,
}

impl Dims {
    pub fn new(m: usize, n: usize) -> Self {
        Self { m, n }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PiOp<C: Coeff> {
    pub interval: Interval<C>,
    pub out: Dims,
    pub inp: Dims,
    pub p: PolyMat<C>,
    pub q1: PolyMat<C>,
    pub q2: PolyMat<C>,
    pub r0: PolyMat<C>,
    pub r1: PolyMat<C>,
    pub r2: PolyMat<C>,
}

const XS: (Slot, Slot) = (Slot::X, Slot::S);
const ST: (Slot, Slot) = (Slot::S, Slot::Theta);
const SX: (Slot, Slot) = (Slot::S, Slot::X);
// for single-variable factors only the first slot matters
const S_: (Slot, Slot) = (Slot::S, Slot::Theta);

impl<C: Coeff> PiOp<C> {
    pub fn zero(interval: Interval<C>, out: Dims, inp: Dims) -> Self {
        Self {
            interval,
            out,
            inp,
            p: PolyMat::zeros(out.m, inp.m),
            q1: PolyMat::zeros(out.m, inp.n),
            q2: PolyMat::zeros(out.n, inp.m),
            r0: PolyMat::zeros(out.n, inp.n),
            r1: PolyMat::zeros(out.n, inp.n),
            r2: PolyMat::zeros(out.n, inp.n),
        }
    }

    pub fn identity(interval: Interval<C>, d: Dims) -> Self {
        let mut op = Self::zero(interval, d, d);
        op.p = PolyMat::identity(d.m);
        op.r0 = PolyMat::identity(d.n);
        op
    }

    /// Pointwise multiplication `v1 ↦ M(x) v1` on `L2^n`.
    pub fn multiplier(interval: Interval<C>, m: PolyMat<C>) -> Self {
        let mut op = Self::zero(interval, Dims::new(0, m.rows()), Dims::new(0, m.cols()));
        op.r0 = m;
        op
    }

    /// Builds an operator whose second kernel `R2` integrates over the whole
    /// interval: `out1 = Q2 v0 + R0 v1 + ∫_a^x R1 v1 + ∫_a^b R2 v1`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_full_form(
        interval: Interval<C>,
        p: PolyMat<C>,
        q1: PolyMat<C>,
        q2: PolyMat<C>,
        r0: PolyMat<C>,
        r1: PolyMat<C>,
        r2: PolyMat<C>,
    ) -> Result<Self> {
        let out = Dims::new(p.rows().max(q1.rows()), r0.rows().max(q2.rows()));
        let inp = Dims::new(p.cols().max(q2.cols()), r0.cols().max(q1.cols()));
        let lower = r1.add(&r2)?;
        Self::new(interval, out, inp, p, q1, q2, r0, lower, r2)
    }

    /// Returns `(R1 - R2, R2)`, the kernels in full-interval form.
    pub fn to_full_form(&self) -> (PolyMat<C>, PolyMat<C>) {
        (self.r1.sub(&self.r2).expect("same shape"), self.r2.clone())
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        interval: Interval<C>,
        out: Dims,
        inp: Dims,
        p: PolyMat<C>,
        q1: PolyMat<C>,
        q2: PolyMat<C>,
        r0: PolyMat<C>,
        r1: PolyMat<C>,
        r2: PolyMat<C>,
    ) -> Result<Self> {
        let fix = |m: PolyMat<C>, r: usize, c: usize, name: &'static str| -> Result<PolyMat<C>> {
            if m.is_empty() && (r == 0 || c == 0 || m.is_zero()) {
                return Ok(PolyMat::zeros(r, c));
            }
            if m.shape() != (r, c) {
                return Err(dim_err(name, format!("{r}x{c}"), format!("{}x{}", m.rows(), m.cols())));
            }
            Ok(m)
        };
        Ok(Self {
            p: fix(p, out.m, inp.m, "P")?,
            q1: fix(q1, out.m, inp.n, "Q1")?,
            q2: fix(q2, out.n, inp.m, "Q2")?,
            r0: fix(r0, out.n, inp.n, "R0")?,
            r1: fix(r1, out.n, inp.n, "R1")?,
            r2: fix(r2, out.n, inp.n, "R2")?,
            interval,
            out,
            inp,
        })
    }

    fn parts(&self) -> [&PolyMat<C>; 6] {
        [&self.p, &self.q1, &self.q2, &self.r0, &self.r1, &self.r2]
    }

    fn map_parts(&self, f: impl Fn(&PolyMat<C>) -> PolyMat<C>) -> Self {
        Self {
            interval: self.interval.clone(),
            out: self.out,
            inp: self.inp,
            p: f(&self.p),
            q1: f(&self.q1),
            q2: f(&self.q2),
            r0: f(&self.r0),
            r1: f(&self.r1),
            r2: f(&self.r2),
        }
    }

    fn zip_parts(&self, other: &Self, op: &'static str, f: impl Fn(&PolyMat<C>, &PolyMat<C>) -> Result<PolyMat<C>>) -> Result<Self> {
        if self.out != other.out || self.inp != other.inp {
            return Err(dim_err(
                op,
                format!("{:?}->{:?}", self.inp, self.out),
                format!("{:?}->{:?}", other.inp, other.out),
            ));
        }
        Ok(Self {
            interval: self.interval.clone(),
            out: self.out,
            inp: self.inp,
            p: f(&self.p, &other.p)?,
            q1: f(&self.q1, &other.q1)?,
            q2: f(&self.q2, &other.q2)?,
            r0: f(&self.r0, &other.r0)?,
            r1: f(&self.r1, &other.r1)?,
            r2: f(&self.r2, &other.r2)?,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_parts(other, "add", |a, b| a.add(b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_parts(other, "sub", |a, b| a.sub(b))
    }

    pub fn scale(&self, s: &C) -> Self {
        self.map_parts(|m| m.scale(s))
    }

    pub fn neg(&self) -> Self {
        self.map_parts(PolyMat::neg)
    }

    pub fn is_zero(&self) -> bool {
        self.parts().iter().all(|m| m.is_zero())
    }

    pub fn canonicalize(&self) -> Self {
        self.map_parts(PolyMat::canonicalize)
    }

    pub fn to_f64(&self) -> PiOp<f64> {
        PiOp {
            interval: self.interval.to_f64(),
            out: self.out,
            inp: self.inp,
            p: self.p.to_f64(),
            q1: self.q1.to_f64(),
            q2: self.q2.to_f64(),
            r0: self.r0.to_f64(),
            r1: self.r1.to_f64(),
            r2: self.r2.to_f64(),
        }
    }

    /// Largest coefficient magnitude over all parameters.
    pub fn max_abs(&self) -> f64 {
        self.parts().iter().map(|m| m.max_abs()).fold(0.0, f64::max)
    }

    pub fn degree(&self) -> u32 {
        self.parts().iter().filter_map(|m| m.degree()).max().unwrap_or(0)
    }

    /// Composition `self ∘ rhs`.
    pub fn compose(&self, rhs: &Self) -> Result<Self> {
        if self.inp != rhs.out {
            return Err(dim_err("compose", format!("{:?}", self.inp), format!("{:?}", rhs.out)));
        }
        let (a, b) = (self, rhs);
        let lo = a.interval.lower();
        let hi = a.interval.upper();
        let bx = Bound::Var(Var::X);
        let bt = Bound::Var(Var::Theta);
        let ipm = integrate_product_mat::<C>;

        let p = a.p.mul(&b.p)?.add(&ipm(&a.q1, S_, &b.q2, S_, &lo, &hi))?;

        let q1 = a
            .p
            .mul(&b.q1)?
            .add(&a.q1.mul(&b.r0)?)?
            .add(&ipm(&a.q1, S_, &b.r1, SX, &bx, &hi))?
            .add(&ipm(&a.q1, S_, &b.r2, SX, &lo, &bx))?;

        let q2 = a
            .q2
            .mul(&b.p)?
            .add(&a.r0.mul(&b.q2)?)?
            .add(&ipm(&a.r1, XS, &b.q2, S_, &lo, &bx))?
            .add(&ipm(&a.r2, XS, &b.q2, S_, &bx, &hi))?;

        let r0 = a.r0.mul(&b.r0)?;

        let outer = a.q2.mul(&b.q1.swap_vars())?;
        let r0b_t = b.r0.swap_vars();
        let r1 = outer
            .add(&a.r0.mul(&b.r1)?)?
            .add(&a.r1.mul(&r0b_t)?)?
            .add(&ipm(&a.r1, XS, &b.r1, ST, &bt, &bx))?
            .add(&ipm(&a.r1, XS, &b.r2, ST, &lo, &bt))?
            .add(&ipm(&a.r2, XS, &b.r1, ST, &bx, &hi))?;
        let r2 = outer
            .add(&a.r0.mul(&b.r2)?)?
            .add(&a.r2.mul(&r0b_t)?)?
            .add(&ipm(&a.r1, XS, &b.r2, ST, &lo, &bx))?
            .add(&ipm(&a.r2, XS, &b.r1, ST, &bt, &hi))?
            .add(&ipm(&a.r2, XS, &b.r2, ST, &bx, &bt))?;

        Self::new(a.interval.clone(), a.out, b.inp, p, q1, q2, r0, r1, r2)
    }

    /// Adjoint with respect to the `ℝ^m × L2^n` inner product.
    pub fn adjoint(&self) -> Self {
        Self {
            interval: self.interval.clone(),
            out: self.inp,
            inp: self.out,
            p: self.p.transpose(),
            q1: self.q2.transpose(),
            q2: self.q1.transpose(),
            r0: self.r0.transpose(),
            r1: self.r2.swap_vars().transpose(),
            r2: self.r1.swap_vars().transpose(),
        }
    }

    /// Applies the operator to `v0` (constant `m × 1`) and a polynomial `v1(x)`.
    pub fn apply_poly(&self, v0: &PolyMat<C>, v1: &PolyMat<C>) -> Result<(PolyMat<C>, PolyMat<C>)> {
        if v0.rows() != self.inp.m || v1.rows() != self.inp.n {
            return Err(dim_err(
                "apply",
                format!("{:?}", self.inp),
                format!("({}, {})", v0.rows(), v1.rows()),
            ));
        }
        let lo = self.interval.lower();
        let hi = self.interval.upper();
        let bx = Bound::Var(Var::X);
        let v0 = if v0.cols() == 0 { PolyMat::zeros(v0.rows(), 1) } else { v0.clone() };
        let v1 = if v1.cols() == 0 { PolyMat::zeros(v1.rows(), 1) } else { v1.clone() };
        let out0 = self
            .p
            .mul(&v0)?
            .add(&integrate_product_mat(&self.q1, S_, &v1, S_, &lo, &hi))?;
        let out1 = self
            .q2
            .mul(&v0)?
            .add(&self.r0.mul(&v1)?)?
            .add(&integrate_product_mat(&self.r1, XS, &v1, S_, &lo, &bx))?
            .add(&integrate_product_mat(&self.r2, XS, &v1, S_, &bx, &hi))?;
        Ok((out0, out1))
    }

    /// Spatial derivative of the `L2` output, valid when `R0 = 0`.
    pub fn diff_x(&self) -> Result<Self> {
        if !self.r0.is_zero() {
            return Err(crate::PieError::Usage(
                "derivative of an operator with a multiplier part".into(),
            ));
        }
        let diag = self.r1.identify(Var::Theta).sub(&self.r2.identify(Var::Theta))?;
        Self::new(
            self.interval.clone(),
            Dims::new(0, self.out.n),
            self.inp,
            PolyMat::zeros(0, self.inp.m),
            PolyMat::zeros(0, self.inp.n),
            self.q2.diff(Var::X),
            diag,
            self.r1.diff(Var::X),
            self.r2.diff(Var::X),
        )
    }

    /// Drops the `ℝ^m` output, keeping the `L2` part.
    pub fn l2_output(&self) -> Self {
        let mut op = self.clone();
        op.out.m = 0;
        op.p = PolyMat::zeros(0, self.inp.m);
        op.q1 = PolyMat::zeros(0, self.inp.n);
        op
    }

    /// Keeps only the `ℝ^m` output.
    pub fn finite_output(&self) -> Self {
        let mut op = self.clone();
        op.out.n = 0;
        op.q2 = PolyMat::zeros(0, self.inp.m);
        op.r0 = PolyMat::zeros(0, self.inp.n);
        op.r1 = PolyMat::zeros(0, self.inp.n);
        op.r2 = PolyMat::zeros(0, self.inp.n);
        op
    }

    /// Restricts the input to the `L2` part (`v0 = 0`).
    pub fn restrict_l2_input(&self) -> Self {
        let mut op = self.clone();
        op.inp.m = 0;
        op.p = PolyMat::zeros(self.out.m, 0);
        op.q2 = PolyMat::zeros(self.out.n, 0);
        op
    }

    /// Stacks outputs: `v ↦ (top(v), bottom(v))` with finite parts
    /// concatenated and `L2` parts concatenated.
    pub fn vstack(&self, bottom: &Self) -> Result<Self> {
        if self.inp != bottom.inp {
            return Err(dim_err("vstack", format!("{:?}", self.inp), format!("{:?}", bottom.inp)));
        }
        Self::new(
            self.interval.clone(),
            Dims::new(self.out.m + bottom.out.m, self.out.n + bottom.out.n),
            self.inp,
            self.p.vstack(&bottom.p)?,
            self.q1.vstack(&bottom.q1)?,
            self.q2.vstack(&bottom.q2)?,
            self.r0.vstack(&bottom.r0)?,
            self.r1.vstack(&bottom.r1)?,
            self.r2.vstack(&bottom.r2)?,
        )
    }

    /// Largest coefficient of `self - other`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }
}

impl PiOp<f64> {
    /// Unitarily equivalent operator on `target`, via the affine change of
    /// variables and the `L2` isometry `f ↦ √h·f(shift + h·ξ)`.
    pub fn transplant(&self, target: &Interval<f64>) -> PiOp<f64> {
        let h = self.interval.length() / target.length();
        let shift = self.interval.a - h * target.a;
        let sq = h.sqrt();
        let sub = |m: &PolyMat<f64>, f: f64| m.affine(&shift, &h).scale(&f);
        PiOp {
            interval: target.clone(),
            out: self.out,
            inp: self.inp,
            p: self.p.clone(),
            q1: sub(&self.q1, sq),
            q2: sub(&self.q2, sq),
            r0: sub(&self.r0, 1.0),
            r1: sub(&self.r1, h),
            r2: sub(&self.r2, h),
        }
    }

    /// Evaluates both kernels at a point as the single kernel `K(x, θ)`.
    pub fn kernel_at(&self, x: f64, theta: f64) -> Vec<Vec<f64>> {
        let k = if theta < x { &self.r1 } else { &self.r2 };
        k.eval(&crate::Point::xt(x, theta)).expect("both variables given")
    }
}
