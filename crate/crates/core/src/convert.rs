//! PDE `u_t = A0 u + A1 u_x + A2 u_xx` with boundary conditions, converted to
//! the PIE `∂t T̂ v = Â v` on `{v : K v = 0}`.

use crate::bcspace::BoundarySpec;
use crate::error::{dim_err, PieError, Result};
use crate::maps::StateMaps;
use crate::piop::{Dims, PiOp};
use crate::polymat::{Coeff, Interval, PolyMat, Var};

#[derive(Clone, Debug)]
pub struct PdeSystem<C: Coeff> {
    pub interval: Interval<C>,
    pub n: usize,
    pub a0: PolyMat<C>,
    pub a1: PolyMat<C>,
    pub a2: PolyMat<C>,
    pub bc: BoundarySpec<C>,
    pub f3: Option<PolyMat<C>>,
}

impl<C: Coeff> PdeSystem<C> {
    pub fn new(
        a0: PolyMat<C>,
        a1: PolyMat<C>,
        a2: PolyMat<C>,
        bc: BoundarySpec<C>,
        f3: Option<PolyMat<C>>,
    ) -> Result<Self> {
        let n = bc.n;
        for (name, m) in [("A0", &a0), ("A1", &a1), ("A2", &a2)] {
            if m.shape() != (n, n) {
                return Err(dim_err(name, format!("{n}x{n}"), format!("{}x{}", m.rows(), m.cols())));
            }
            if m.degree_in(Var::Theta).unwrap_or(0) > 0 {
                return Err(PieError::Usage(format!("{name} may depend on x only")));
            }
        }
        if bc.rows() != 2 * n {
            return Err(dim_err("boundary conditions", format!("{} rows", 2 * n), bc.rows()));
        }
        Ok(Self {
            interval: bc.interval.clone(),
            n,
            a0,
            a1,
            a2,
            bc,
            f3,
        })
    }

    /// Right-hand side `A0 u + A1 u_x + A2 u_xx` for polynomial `u`.
    pub fn rhs(&self, u: &PolyMat<C>) -> Result<PolyMat<C>> {
        let ux = u.diff(Var::X);
        let uxx = ux.diff(Var::X);
        self.a0.mul(u)?.add(&self.a1.mul(&ux)?)?.add(&self.a2.mul(&uxx)?)
    }
}

#[derive(Clone, Debug)]
pub struct PieSystem<C: Coeff> {
    pub maps: StateMaps<C>,
    /// `(v0, v1) ↦ A0 T v + A1 R v + A2 v1`.
    pub a: PiOp<C>,
    /// `[I_m; T]`.
    pub that: PiOp<C>,
    /// `[F ∘ A; A]`.
    pub ahat: PiOp<C>,
    pub k: PiOp<C>,
    pub m: usize,
    pub n: usize,
}

/// Which part of the solution the stability seminorm ignores.
#[derive(Clone, Debug)]
pub enum Trajectory<C: Coeff> {
    /// Measure the full state.
    Zero,
    /// Ignore the `∂x²`-nullspace component `T0 F u`.
    T0F,
    Custom(PiOp<C>),
}

pub fn pde_to_pie<C: Coeff>(pde: &PdeSystem<C>) -> Result<PieSystem<C>> {
    let maps = StateMaps::new(&pde.bc, pde.f3.clone())?;
    let (m, n) = (maps.m, maps.n);
    let iv = pde.interval.clone();
    let full = Dims::new(m, n);
    let mult = |a: &PolyMat<C>| PiOp::multiplier(iv.clone(), a.clone());
    let mut extract = PiOp::zero(iv.clone(), Dims::new(0, n), full);
    extract.r0 = PolyMat::identity(n);
    let a = mult(&pde.a0)
        .compose(&maps.t)?
        .add(&mult(&pde.a1).compose(&maps.r)?)?
        .add(&mult(&pde.a2).compose(&extract)?)?
        .canonicalize();
    let mut top = PiOp::zero(iv, Dims::new(m, 0), full);
    top.p = PolyMat::identity(m);
    let that = top.vstack(&maps.t)?;
    let ahat = maps.f.compose(&a)?.vstack(&a)?;
    let k = maps.k.clone();
    Ok(PieSystem {
        maps,
        a,
        that,
        ahat,
        k,
        m,
        n,
    })
}

impl<C: Coeff> PieSystem<C> {
    /// The operator `S` on `L2^n`.
    pub fn trajectory_operator(&self, s: &Trajectory<C>) -> Result<PiOp<C>> {
        let d = Dims::new(0, self.n);
        match s {
            Trajectory::Zero => Ok(PiOp::zero(self.maps.interval.clone(), d, d)),
            Trajectory::T0F => self.maps.t0_f(),
            Trajectory::Custom(op) => {
                if op.inp != d || op.out != d {
                    return Err(dim_err("trajectory operator", format!("{d:?}"), format!("{:?}", op.inp)));
                }
                Ok(op.clone())
            }
        }
    }

    /// `((I − S) ∘ T, (I − S) ∘ A)`.
    pub fn s_transform(&self, s: &Trajectory<C>) -> Result<(PiOp<C>, PiOp<C>)> {
        let sop = self.trajectory_operator(s)?;
        let ims = PiOp::identity(self.maps.interval.clone(), Dims::new(0, self.n)).sub(&sop)?;
        Ok((ims.compose(&self.maps.t)?, ims.compose(&self.a)?))
    }

    /// Checks `A (𝒟 u0) = A0 u0 + A1 u0' + A2 u0''` for `u0` in the domain.
    pub fn residual_dynamics_check(&self, pde: &PdeSystem<C>, u0: &PolyMat<C>) -> Result<DynamicsCheck<C>> {
        if !pde.bc.contains(u0)? {
            return Err(PieError::Usage("initial state violates the boundary conditions".into()));
        }
        let (v0, v1) = self.maps.apply_d(u0)?;
        let lhs = self.a.apply_poly(&v0, &v1)?.1;
        let rhs = pde.rhs(u0)?;
        let residual = lhs.sub(&rhs)?.max_abs();
        Ok(DynamicsCheck { lhs, rhs, residual })
    }
}

#[derive(Clone, Debug)]
pub struct DynamicsCheck<C: Coeff> {
    pub lhs: PolyMat<C>,
    pub rhs: PolyMat<C>,
    pub residual: f64,
}

/// Reaction-diffusion `u_t = λ u + u_xx` on `[−1, 1]` with periodic conditions.
pub fn reaction_diffusion<C: Coeff>(lambda: C, f3_half: bool) -> PdeSystem<C> {
    let iv = Interval::new(-C::one(), C::one()).expect("ordered");
    let bc = BoundarySpec::periodic(iv, 1);
    let f3 = f3_half.then(|| PolyMat::from_constants(1, 1, &[C::from_ratio(1, 2)]));
    PdeSystem::new(
        PolyMat::from_constants(1, 1, &[lambda]),
        PolyMat::zeros(1, 1),
        PolyMat::identity(1),
        bc,
        f3,
    )
    .expect("consistent shapes")
}

/// Damped wave `φ_tt = φ_xx − 2k φ_t − k² φ` on `[0, 1]` with Neumann
/// conditions, as a first-order system in `(φ, φ_t)`.
pub fn damped_wave<C: Coeff>(k: C) -> PdeSystem<C> {
    let iv = Interval::new(C::zero(), C::one()).expect("ordered");
    let bc = BoundarySpec::neumann(iv, 2);
    let a0 = PolyMat::from_constants(
        2,
        2,
        &[C::zero(), C::one(), -(k.clone() * k.clone()), -(C::from_i64(2) * k)],
    );
    let a2 = PolyMat::from_constants(2, 2, &[C::zero(), C::zero(), C::one(), C::zero()]);
    PdeSystem::new(a0, PolyMat::zeros(2, 2), a2, bc, None).expect("consistent shapes")
}

/// Heat equation `u_t = u_xx` on `[0, 1]` with Dirichlet conditions.
pub fn dirichlet_heat<C: Coeff>() -> PdeSystem<C> {
    let iv = Interval::new(C::zero(), C::one()).expect("ordered");
    PdeSystem::new(
        PolyMat::zeros(1, 1),
        PolyMat::zeros(1, 1),
        PolyMat::identity(1),
        BoundarySpec::dirichlet(iv, 1),
        None,
    )
    .expect("consistent shapes")
}
