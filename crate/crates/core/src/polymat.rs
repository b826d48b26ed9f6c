//! Polynomial matrices in the spatial variables `x` and `θ`.
//!
//! Coefficients are generic over [`Coeff`], implemented for exact rationals
//! ([`Rational`]) and for `f64`. The symbolic constructions run on rationals;
//! the numerical stages convert with [`PolyMat::to_f64`].

use std::collections::BTreeMap;
use std::fmt::{self, Debug, Display};
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive, Zero};

use crate::error::{dim_err, PieError, Result};

/// Exact rational coefficient.
pub type Rational = BigRational;

/// Scalar field used for polynomial coefficients.
pub trait Coeff: Num + Neg<Output = Self> + Clone + Debug + PartialOrd + Send + Sync + 'static {
    fn from_ratio(num: i64, den: i64) -> Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;
    /// True when the value counts as zero relative to `scale`.
    fn is_negligible(&self, scale: f64) -> bool;
    fn abs(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }
    fn from_i64(v: i64) -> Self {
        Self::from_ratio(v, 1)
    }
    /// Exact text form, read back by [`Coeff::parse_text`].
    fn to_text(&self) -> String;
    /// Parses a decimal or `p/q` literal.
    fn parse_text(text: &str) -> Option<Self>;
    fn powi(&self, k: u32) -> Self {
        let mut out = Self::one();
        for _ in 0..k {
            out = out * self.clone();
        }
        out
    }
}

/// Relative threshold under which floating coefficients are dropped.
pub const F64_DROP_TOL: f64 = 1e-14;

impl Coeff for f64 {
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_negligible(&self, scale: f64) -> bool {
        f64::abs(*self) <= F64_DROP_TOL * scale.max(1.0)
    }
    fn to_text(&self) -> String {
        format!("{self:?}")
    }
    fn parse_text(text: &str) -> Option<Self> {
        let t = text.trim();
        if t.contains('/') {
            parse_rational(t).map(|r| Coeff::to_f64(&r))
        } else {
            t.parse().ok().filter(|v: &f64| v.is_finite())
        }
    }
    fn powi(&self, k: u32) -> Self {
        f64::powi(*self, k as i32)
    }
}

impl Coeff for Rational {
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn from_f64(v: f64) -> Self {
        BigRational::from_float(v).expect("finite float")
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn is_negligible(&self, _scale: f64) -> bool {
        self.is_zero()
    }
    fn to_text(&self) -> String {
        self.to_string()
    }
    fn parse_text(text: &str) -> Option<Self> {
        parse_rational(text)
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
}

/// Parses a decimal (`-1.25`, `3e-2`) or fraction (`7/3`) literal exactly.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let t = text.trim();
    if t.is_empty() {
        return None;
    }
    if let Some((n, d)) = t.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        if d.is_zero() {
            return None;
        }
        return Some(n / d);
    }
    let (mant, exp) = match t.find(['e', 'E']) {
        Some(p) => (&t[..p], t[p + 1..].parse::<i32>().ok()?),
        None => (t, 0),
    };
    let (neg, body) = match mant.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let num = BigInt::from_str_radix(if digits.is_empty() { "0" } else { &digits }, 10).ok()?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(num);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -r } else { r })
}

/// Spatial variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Theta,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Theta => "θ",
        }
    }
    pub fn other(self) -> Var {
        match self {
            Var::X => Var::Theta,
            Var::Theta => Var::X,
        }
    }
}

/// Integration limit: a constant or the other spatial variable.
#[derive(Clone, Debug, PartialEq)]
pub enum Bound<C> {
    Const(C),
    Var(Var),
}

/// The domain `[a, b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Interval<C> {
    pub a: C,
    pub b: C,
}

impl<C: Coeff> Interval<C> {
    pub fn new(a: C, b: C) -> Result<Self> {
        if a < b {
            Ok(Self { a, b })
        } else {
            Err(PieError::Usage(format!("interval requires a < b, got [{a:?}, {b:?}]")))
        }
    }
    pub fn length(&self) -> C {
        self.b.clone() - self.a.clone()
    }
    pub fn lower(&self) -> Bound<C> {
        Bound::Const(self.a.clone())
    }
    pub fn upper(&self) -> Bound<C> {
        Bound::Const(self.b.clone())
    }
    pub fn to_f64(&self) -> Interval<f64> {
        Interval {
            a: self.a.to_f64(),
            b: self.b.to_f64(),
        }
    }
}

/// Assignment of values to the spatial variables.
#[derive(Clone, Debug)]
pub struct Point<C> {
    pub x: Option<C>,
    pub theta: Option<C>,
}

impl<C> Default for Point<C> {
    fn default() -> Self {
        Self { x: None, theta: None }
    }
}

impl<C> Point<C> {
    pub fn x(x: C) -> Self {
        Self { x: Some(x), theta: None }
    }
    pub fn xt(x: C, theta: C) -> Self {
        Self {
            x: Some(x),
            theta: Some(theta),
        }
    }
}

/// Sparse polynomial in `(x, θ)`: exponent pair `(i, j)` ↦ coefficient of `x^i θ^j`.
#[derive(Clone, PartialEq)]
pub struct Poly<C> {
    terms: BTreeMap<(u32, u32), C>,
}

impl<C: Coeff> Default for Poly<C> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<C: Coeff> Poly<C> {
    pub fn zero() -> Self {
        Self { terms: BTreeMap::new() }
    }

    pub fn constant(c: C) -> Self {
        Self::monomial(c, 0, 0)
    }

    pub fn monomial(c: C, i: u32, j: u32) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert((i, j), c);
        }
        Self { terms }
    }

    pub fn x() -> Self {
        Self::monomial(C::one(), 1, 0)
    }

    pub fn theta() -> Self {
        Self::monomial(C::one(), 0, 1)
    }

    /// Builds from `(i, j, c)` triples, summing duplicates.
    pub fn from_terms(it: impl IntoIterator<Item = (u32, u32, C)>) -> Self {
        let mut p = Self::zero();
        for (i, j, c) in it {
            p.add_term(i, j, c);
        }
        p
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, u32, &C)> {
        self.terms.iter().map(|(&(i, j), c)| (i, j, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, i: u32, j: u32) -> C {
        self.terms.get(&(i, j)).cloned().unwrap_or_else(C::zero)
    }

    pub fn add_term(&mut self, i: u32, j: u32, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry((i, j)) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get().clone() + c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|&(i, j)| i + j).max()
    }

    pub fn degree_in(&self, v: Var) -> Option<u32> {
        self.terms
            .keys()
            .map(|&(i, j)| if v == Var::X { i } else { j })
            .max()
    }

    pub fn uses(&self, v: Var) -> bool {
        self.degree_in(v).is_some_and(|d| d > 0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&(i, j), c) in &other.terms {
            out.add_term(i, j, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&(i, j), c) in &other.terms {
            out.add_term(i, j, -c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(&-C::one())
    }

    pub fn scale(&self, s: &C) -> Self {
        if s.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (*k, c.clone() * s.clone()))
                .filter(|(_, c)| !c.is_zero())
                .collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (&(i1, j1), c1) in &self.terms {
            for (&(i2, j2), c2) in &other.terms {
                out.add_term(i1 + i2, j1 + j2, c1.clone() * c2.clone());
            }
        }
        out
    }

    /// Exchanges the roles of `x` and `θ`.
    pub fn swap_vars(&self) -> Self {
        Self {
            terms: self.terms.iter().map(|(&(i, j), c)| ((j, i), c.clone())).collect(),
        }
    }

    /// Evaluates at the point; errors if a used variable is unassigned.
    pub fn eval(&self, point: &Point<C>) -> Result<C> {
        if self.uses(Var::X) && point.x.is_none() {
            return Err(PieError::MissingVariable("x"));
        }
        if self.uses(Var::Theta) && point.theta.is_none() {
            return Err(PieError::MissingVariable("θ"));
        }
        let x = point.x.clone().unwrap_or_else(C::zero);
        let t = point.theta.clone().unwrap_or_else(C::zero);
        let mut acc = C::zero();
        for (&(i, j), c) in &self.terms {
            acc = acc + c.clone() * x.powi(i) * t.powi(j);
        }
        Ok(acc)
    }

    /// Substitutes a constant for one variable.
    pub fn subs(&self, v: Var, value: &C) -> Self {
        let mut out = Self::zero();
        for (&(i, j), c) in &self.terms {
            match v {
                Var::X => out.add_term(0, j, c.clone() * value.powi(i)),
                Var::Theta => out.add_term(i, 0, c.clone() * value.powi(j)),
            }
        }
        out
    }

    /// Replaces `v` by the other variable (e.g. `p(x, θ) ↦ p(x, x)` for `v = θ`).
    pub fn identify(&self, v: Var) -> Self {
        let mut out = Self::zero();
        for (&(i, j), c) in &self.terms {
            match v {
                Var::Theta => out.add_term(i + j, 0, c.clone()),
                Var::X => out.add_term(0, i + j, c.clone()),
            }
        }
        out
    }

    pub fn diff(&self, v: Var) -> Self {
        let mut out = Self::zero();
        for (&(i, j), c) in &self.terms {
            match v {
                Var::X if i > 0 => out.add_term(i - 1, j, c.clone() * C::from_i64(i as i64)),
                Var::Theta if j > 0 => out.add_term(i, j - 1, c.clone() * C::from_i64(j as i64)),
                _ => {}
            }
        }
        out
    }

    /// Definite integral in `v` between the given limits.
    pub fn integrate(&self, v: Var, lower: &Bound<C>, upper: &Bound<C>) -> Result<Self> {
        for bnd in [lower, upper] {
            if let Bound::Var(bv) = bnd {
                if *bv == v {
                    return Err(PieError::InvalidBound(v.name()));
                }
            }
        }
        let mut out = Self::zero();
        for (&(i, j), c) in &self.terms {
            let (k, keep) = if v == Var::X { (i, j) } else { (j, i) };
            let c = c.clone() / C::from_i64(k as i64 + 1);
            for (bnd, sign) in [(upper, C::one()), (lower, -C::one())] {
                match bnd {
                    Bound::Const(val) => {
                        let coef = c.clone() * sign * val.powi(k + 1);
                        if v == Var::X {
                            out.add_term(0, keep, coef);
                        } else {
                            out.add_term(keep, 0, coef);
                        }
                    }
                    Bound::Var(_) => {
                        let coef = c.clone() * sign;
                        // the remaining variable absorbs the power
                        if v == Var::X {
                            out.add_term(0, keep + k + 1, coef);
                        } else {
                            out.add_term(keep + k + 1, 0, coef);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Substitutes `x ↦ shift + scale·x` and `θ ↦ shift + scale·θ`.
    pub fn affine(&self, shift: &C, scale: &C) -> Self {
        let deg = self.degree().unwrap_or(0);
        // powers[k] = (shift + scale·t)^k as coefficients in t
        let mut powers: Vec<Vec<C>> = vec![vec![C::one()]];
        for k in 1..=deg as usize {
            let prev = &powers[k - 1];
            let mut next = vec![C::zero(); k + 1];
            for (e, c) in prev.iter().enumerate() {
                next[e] = next[e].clone() + c.clone() * shift.clone();
                next[e + 1] = next[e + 1].clone() + c.clone() * scale.clone();
            }
            powers.push(next);
        }
        let mut out = Self::zero();
        for (&(i, j), c) in &self.terms {
            for (ei, ci) in powers[i as usize].iter().enumerate() {
                if ci.is_zero() {
                    continue;
                }
                for (ej, cj) in powers[j as usize].iter().enumerate() {
                    out.add_term(ei as u32, ej as u32, c.clone() * ci.clone() * cj.clone());
                }
            }
        }
        out
    }

    /// Drops coefficients that are negligible relative to the largest one.
    pub fn canonicalize(&self) -> Self {
        let scale = self.max_abs();
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(_, c)| !c.is_negligible(scale))
                .map(|(k, c)| (*k, c.clone()))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.to_f64().abs()).fold(0.0, f64::max)
    }

    pub fn to_f64(&self) -> Poly<f64> {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (*k, c.to_f64()))
                .filter(|(_, c)| *c != 0.0)
                .collect(),
        }
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> Poly<D> {
        let mut out = Poly::zero();
        for (&(i, j), c) in &self.terms {
            out.add_term(i, j, f(c));
        }
        out
    }
}

impl<C: Coeff> Debug for Poly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl<C: Coeff> Display for Poly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (&(i, j), c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{}", c.to_f64())?;
            if i > 0 {
                write!(f, "·x^{i}")?;
            }
            if j > 0 {
                write!(f, "·θ^{j}")?;
            }
        }
        Ok(())
    }
}

/// Where a factor's variable lands inside a triple-variable product.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Slot {
    X,
    Theta,
    S,
}

/// Computes `∫_lo^hi a(·)·b(·) ds` where `amap`/`bmap` say which result
/// variable (`x`, `θ`) or the dummy `s` each factor's `(x, θ)` slots stand for.
pub(crate) fn integrate_product<C: Coeff>(
    a: &Poly<C>,
    amap: (Slot, Slot),
    b: &Poly<C>,
    bmap: (Slot, Slot),
    lo: &Bound<C>,
    hi: &Bound<C>,
    out: &mut Poly<C>,
) {
    if a.is_zero() || b.is_zero() {
        return;
    }
    let place = |e: &mut [u32; 3], slot: Slot, k: u32| match slot {
        Slot::X => e[0] += k,
        Slot::Theta => e[1] += k,
        Slot::S => e[2] += k,
    };
    // group the product by its (x, θ, s) exponents first
    let mut prod: BTreeMap<[u32; 3], C> = BTreeMap::new();
    for (&(i1, j1), c1) in &a.terms {
        for (&(i2, j2), c2) in &b.terms {
            let mut e = [0u32; 3];
            place(&mut e, amap.0, i1);
            place(&mut e, amap.1, j1);
            place(&mut e, bmap.0, i2);
            place(&mut e, bmap.1, j2);
            let c = c1.clone() * c2.clone();
            match prod.get_mut(&e) {
                Some(v) => *v = v.clone() + c,
                None => {
                    prod.insert(e, c);
                }
            }
        }
    }
    for (e, c) in prod {
        if c.is_zero() {
            continue;
        }
        let k = e[2];
        let c = c / C::from_i64(k as i64 + 1);
        for (bnd, neg) in [(hi, false), (lo, true)] {
            let cc = if neg { -c.clone() } else { c.clone() };
            match bnd {
                Bound::Const(v) => out.add_term(e[0], e[1], cc * v.powi(k + 1)),
                Bound::Var(Var::X) => out.add_term(e[0] + k + 1, e[1], cc),
                Bound::Var(Var::Theta) => out.add_term(e[0], e[1] + k + 1, cc),
            }
        }
    }
}

/// Matrix whose entries are polynomials in `(x, θ)`.
#[derive(Clone, PartialEq)]
pub struct PolyMat<C> {
    rows: usize,
    cols: usize,
    entries: Vec<Poly<C>>,
}

impl<C: Coeff> Debug for PolyMat<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "PolyMat {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|c| self.get(r, c).to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl<C: Coeff> PolyMat<C> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![Poly::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Poly::constant(C::one()));
        }
        m
    }

    /// Scalar polynomial times the identity.
    pub fn scalar_identity(n: usize, p: &Poly<C>) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, p.clone());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Poly<C>) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                entries.push(f(r, c));
            }
        }
        Self { rows, cols, entries }
    }

    /// Constant matrix from row-major values.
    pub fn from_constants(rows: usize, cols: usize, values: &[C]) -> Self {
        assert_eq!(values.len(), rows * cols);
        Self::from_fn(rows, cols, |r, c| Poly::constant(values[r * cols + c].clone()))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> &Poly<C> {
        &self.entries[r * self.cols + c]
    }

    pub fn get_mut(&mut self, r: usize, c: usize) -> &mut Poly<C> {
        &mut self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, p: Poly<C>) {
        self.entries[r * self.cols + c] = p;
    }

    pub fn entries(&self) -> &[Poly<C>] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Poly::is_zero)
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn degree(&self) -> Option<u32> {
        self.entries.iter().filter_map(Poly::degree).max()
    }

    pub fn degree_in(&self, v: Var) -> Option<u32> {
        self.entries.iter().filter_map(|p| p.degree_in(v)).max()
    }

    /// Variables that actually occur.
    pub fn vars(&self) -> Vec<Var> {
        [Var::X, Var::Theta]
            .into_iter()
            .filter(|&v| self.entries.iter().any(|p| p.uses(v)))
            .collect()
    }

    fn check_same(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(dim_err(op, format!("{:?}", self.shape()), format!("{:?}", other.shape())));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other, "add")?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a.add(b)).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other, "sub")?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a.sub(b)).collect(),
        })
    }

    pub fn scale(&self, s: &C) -> Self {
        self.map(|p| p.scale(s))
    }

    pub fn neg(&self) -> Self {
        self.map(Poly::neg)
    }

    pub fn mul_poly(&self, p: &Poly<C>) -> Self {
        self.map(|q| q.mul(p))
    }

    pub fn map(&self, f: impl Fn(&Poly<C>) -> Poly<C>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(dim_err(
                "mul",
                format!("{} rows", self.cols),
                format!("{} rows", other.rows),
            ));
        }
        Ok(Self::from_fn(self.rows, other.cols, |r, c| {
            let mut acc = Poly::zero();
            for k in 0..self.cols {
                let a = self.get(r, k);
                let b = other.get(k, c);
                if !a.is_zero() && !b.is_zero() {
                    acc = acc.add(&a.mul(b));
                }
            }
            acc
        }))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).clone())
    }

    pub fn swap_vars(&self) -> Self {
        self.map(Poly::swap_vars)
    }

    pub fn diff(&self, v: Var) -> Self {
        self.map(|p| p.diff(v))
    }

    pub fn subs(&self, v: Var, value: &C) -> Self {
        self.map(|p| p.subs(v, value))
    }

    pub fn identify(&self, v: Var) -> Self {
        self.map(|p| p.identify(v))
    }

    pub fn integrate(&self, v: Var, lower: &Bound<C>, upper: &Bound<C>) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|p| p.integrate(v, lower, upper))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            entries,
        })
    }

    pub fn eval(&self, point: &Point<C>) -> Result<Vec<Vec<C>>> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c).eval(point)).collect())
            .collect()
    }

    /// Evaluates a matrix that uses no variables.
    pub fn constant_values(&self) -> Result<Vec<Vec<C>>> {
        self.eval(&Point::default())
    }

    pub fn affine(&self, shift: &C, scale: &C) -> Self {
        self.map(|p| p.affine(shift, scale))
    }

    pub fn canonicalize(&self) -> Self {
        self.map(Poly::canonicalize)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(Poly::max_abs).fold(0.0, f64::max)
    }

    pub fn to_f64(&self) -> PolyMat<f64> {
        PolyMat {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(Poly::to_f64).collect(),
        }
    }

    /// Stacks `[self; other]`.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols && !self.is_empty() && !other.is_empty() {
            return Err(dim_err("vstack", self.cols, other.cols));
        }
        let cols = self.cols.max(other.cols);
        let top = if self.rows == 0 { Self::zeros(0, cols) } else { self.clone() };
        let bot = if other.rows == 0 { Self::zeros(0, cols) } else { other.clone() };
        let mut entries = top.entries;
        entries.extend(bot.entries);
        Ok(Self {
            rows: self.rows + other.rows,
            cols,
            entries,
        })
    }

    /// Concatenates `[self, other]`.
    pub fn hstack(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows && !self.is_empty() && !other.is_empty() {
            return Err(dim_err("hstack", self.rows, other.rows));
        }
        let rows = self.rows.max(other.rows);
        Ok(Self::from_fn(rows, self.cols + other.cols, |r, c| {
            if c < self.cols {
                self.get(r, c).clone()
            } else {
                other.get(r, c - self.cols).clone()
            }
        }))
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |r, c| self.get(r0 + r, c0 + c).clone())
    }

    pub fn row_range(&self, r0: usize, rows: usize) -> Self {
        self.block(r0, 0, rows, self.cols)
    }

    pub fn col_range(&self, c0: usize, cols: usize) -> Self {
        self.block(0, c0, self.rows, cols)
    }

    /// `self ⊗ I_n`.
    pub fn kron_identity(&self, n: usize) -> Self {
        Self::from_fn(self.rows * n, self.cols * n, |r, c| {
            if r % n == c % n {
                self.get(r / n, c / n).clone()
            } else {
                Poly::zero()
            }
        })
    }

    /// Serializes as `(row, col, exp_x, exp_θ, coefficient)` tuples.
    pub fn to_tuples(&self) -> Vec<(usize, usize, u32, u32, C)> {
        let mut out = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                for (i, j, v) in self.get(r, c).terms() {
                    out.push((r, c, i, j, v.clone()));
                }
            }
        }
        out
    }

    pub fn from_tuples(
        rows: usize,
        cols: usize,
        tuples: impl IntoIterator<Item = (usize, usize, u32, u32, C)>,
    ) -> Result<Self> {
        let mut m = Self::zeros(rows, cols);
        for (r, c, i, j, v) in tuples {
            if r >= rows || c >= cols {
                return Err(dim_err("from_tuples", format!("index < {rows}x{cols}"), format!("({r}, {c})")));
            }
            m.get_mut(r, c).add_term(i, j, v);
        }
        Ok(m)
    }
}

/// Matrix version of [`integrate_product`]: `∫_lo^hi A(·) B(·) ds`.
pub(crate) fn integrate_product_mat<C: Coeff>(
    a: &PolyMat<C>,
    amap: (Slot, Slot),
    b: &PolyMat<C>,
    bmap: (Slot, Slot),
    lo: &Bound<C>,
    hi: &Bound<C>,
) -> PolyMat<C> {
    debug_assert_eq!(a.cols(), b.rows());
    PolyMat::from_fn(a.rows(), b.cols(), |r, c| {
        let mut acc = Poly::zero();
        for k in 0..a.cols() {
            integrate_product(a.get(r, k), amap, b.get(k, c), bmap, lo, hi, &mut acc);
        }
        acc
    })
}

/// Writes polynomial tuples, one per line: `row col exp_x exp_θ coefficient`.
pub fn format_tuples<C: Coeff + Display>(m: &PolyMat<C>) -> String {
    let mut s = String::new();
    for (r, c, i, j, v) in m.to_tuples() {
        s.push_str(&format!("{r} {c} {i} {j} {v}\n"));
    }
    s
}
