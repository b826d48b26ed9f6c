use std::f64::consts::PI;
use std::io::Write;

use pie_core::bcspace::BoundarySpec;
use pie_core::cli::{table_rows, TABLE2};
use pie_core::convert::{dirichlet_heat, reaction_diffusion, Trajectory};
use pie_core::linalg::DMat;
use pie_core::lpi::{self, LpiOptions, BISECTION_TOL};
use pie_core::maps::{project_to_domain, StateMaps};
use pie_core::polymat::{Interval, Poly, PolyMat, Rational, Var};
use pie_core::sdp::Status;
use pie_core::specfile;
use pie_core::spectral::{self, integrate_pie, DiscretizedPencil};
use pie_core::{pde_to_pie, Coeff, Dims, PiOp};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Written to the process stdout so the line shows even when output is captured.
fn verdict(n: u32, ok: bool, detail: &str) {
    let line = format!("criterion {n}: {} {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(ok, "criterion {n} failed: {detail}");
}

#[test]
fn criterion_1_reaction_diffusion_table() {
    let rows = table_rows(1, &LpiOptions::default()).unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for r in &rows {
        let limit = PI * PI - r.parameter;
        let a = r.certified.clone().ok().flatten();
        let good = a.is_some_and(|a| a >= 0.98 * limit && a <= limit + 1e-3);
        ok &= good;
        detail.push_str(&format!(
            "\n  lambda={:<4} certified={:<10} published={} analytic={:.4} {:.1}s",
            r.parameter,
            a.map_or("none".into(), |a| format!("{a:.4}")),
            r.published,
            limit,
            r.seconds
        ));
    }
    verdict(1, ok, &detail);
}

#[test]
fn criterion_2_stability_limit_at_zero_rate() {
    let opts = LpiOptions::default();
    let check = |lam: f64| lpi::check_stability(&reaction_diffusion(lam, true), &Trajectory::T0F, 0.0, &opts).unwrap();
    let below = check(9.86);
    let above = check(9.88);
    let ok = below.status() == Status::Feasible && above.status() == Status::Infeasible;
    verdict(2, ok, &format!("lambda=9.86 -> {}, lambda=9.88 -> {}", below.status(), above.status()));
}

#[test]
fn criterion_3_damped_wave_table() {
    let rows = table_rows(2, &LpiOptions::default()).unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for (r, (k, _)) in rows.iter().zip(TABLE2) {
        let a = r.certified.clone().ok().flatten();
        let good = a.is_some_and(|a| (a - k).abs() <= 0.02 * k);
        ok &= good;
        let spectral = r.spectral.as_ref().map_or(f64::NAN, |s| *s);
        detail.push_str(&format!(
            "\n  k={k} certified={} published={} spectral={spectral:.4}",
            match &r.certified {
                Ok(Some(a)) => format!("{a:.4}"),
                Ok(None) => "not certifiable".into(),
                Err(e) => format!("error ({e})"),
            },
            r.published
        ));
    }
    verdict(3, ok, &detail);
}

#[test]
fn criterion_4_spectral_oracle() {
    let heat = pde_to_pie(&reaction_diffusion::<f64>(0.0, true)).unwrap();
    let pencil = DiscretizedPencil::new(&heat, &Trajectory::T0F, 16).unwrap();
    let spectrum = spectral::constrained_spectrum(&pencil).unwrap();
    let lead = spectrum.visible().next().unwrap().value;
    let mut ok = (lead.re + PI * PI).abs() < 1e-6 && lead.im.abs() < 1e-6;
    let mut detail = format!("heat leading {:.9}", lead.re);
    for k in [1.0, 4.0] {
        let wave = pde_to_pie(&pie_core::convert::damped_wave::<f64>(k)).unwrap();
        let pencil = DiscretizedPencil::new(&wave, &Trajectory::Zero, 16).unwrap();
        let spectrum = spectral::constrained_spectrum(&pencil).unwrap();
        let worst = spectrum
            .visible()
            .take(10)
            .map(|m| (m.value.re + k).abs())
            .fold(0.0, f64::max);
        ok &= worst < 1e-6;
        detail.push_str(&format!(", wave k={k} max |Re+k| {worst:.1e}"));
    }
    verdict(4, ok, &detail);
}

fn q(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

fn random_poly(rng: &mut StdRng, degree: u32) -> Poly<Rational> {
    Poly::from_terms((0..=degree).map(|i| (i, 0, q(rng.gen_range(-9..=9), rng.gen_range(1..=6)))))
}

fn random_column(rng: &mut StdRng, n: usize, degree: u32) -> PolyMat<Rational> {
    PolyMat::from_fn(n, 1, |_, _| random_poly(rng, degree))
}

fn families() -> Vec<(&'static str, BoundarySpec<Rational>)> {
    let unit = Interval::new(q(0, 1), q(1, 1)).unwrap();
    let sym = Interval::new(q(-1, 1), q(1, 1)).unwrap();
    // u_x(0) = u_x(1) and ∫(1 + x) u = 0
    let mut e = DMat::zeros(2, 4);
    e[(0, 2)] = q(1, 1);
    e[(0, 3)] = q(-1, 1);
    let f = PolyMat::from_fn(2, 1, |r, _| if r == 1 { Poly::from_terms([(0, 0, q(1, 1)), (1, 0, q(1, 1))]) } else { Poly::zero() });
    vec![
        ("periodic", BoundarySpec::periodic(sym, 1)),
        ("dirichlet", BoundarySpec::dirichlet(unit.clone(), 1)),
        ("neumann", BoundarySpec::neumann(unit.clone(), 2)),
        ("mixed integral", BoundarySpec::new(unit, 1, e, f).unwrap()),
    ]
}

/// Adds `Σ c e_i x^k` to `v1` so that `K v = 0`.
fn project_to_constraint(maps: &StateMaps<Rational>, v0: &PolyMat<Rational>, v1: PolyMat<Rational>) -> PolyMat<Rational> {
    let rows = maps.k.out.m;
    if rows == 0 {
        return v1;
    }
    let n = maps.n;
    let basis: Vec<PolyMat<Rational>> = (0..3u32)
        .flat_map(|k| {
            (0..n).map(move |i| PolyMat::from_fn(n, 1, |r, _| if r == i { Poly::from_terms([(k, 0, q(1, 1))]) } else { Poly::zero() }))
        })
        .collect();
    let zero0 = PolyMat::zeros(maps.m, 1);
    let cols: Vec<Vec<Vec<Rational>>> = basis
        .iter()
        .map(|b| maps.apply_k(&zero0, b).unwrap().constant_values().unwrap())
        .collect();
    let mat = DMat::from_fn(rows, basis.len(), |r, c| cols[c][r][0].clone());
    let kv = maps.apply_k(v0, &v1).unwrap().constant_values().unwrap();
    let rhs = DMat::from_fn(rows, 1, |r, _| -kv[r][0].clone());
    let c = mat.solve_any(&rhs, 1e-12).expect("constraint is reachable");
    basis
        .iter()
        .enumerate()
        .fold(v1, |acc, (k, b)| acc.add(&b.scale(&c[(k, 0)])).unwrap())
}

#[test]
fn criterion_5_state_map_round_trips() {
    let mut rng = StdRng::seed_from_u64(5);
    let mut ok = true;
    let mut detail = String::new();
    for (name, bc) in families() {
        let maps = StateMaps::new(&bc, None).unwrap();
        let mut failures = 0;
        for _ in 0..20 {
            let raw = random_column(&mut rng, bc.n, 6);
            let u = project_to_domain(&bc, &raw).unwrap().expect("projection exists");
            let (v0, v1) = maps.apply_d(&u).unwrap();
            let back = maps.apply_t(&v0, &v1).unwrap();
            let kv = maps.apply_k(&v0, &v1).unwrap();
            if !back.sub(&u).unwrap().is_zero() || !kv.is_zero() {
                failures += 1;
            }
        }
        for _ in 0..20 {
            let v0 = PolyMat::from_fn(maps.m, 1, |_, _| Poly::constant(q(rng.gen_range(-9..=9), rng.gen_range(1..=4))));
            let v1 = project_to_constraint(&maps, &v0, random_column(&mut rng, bc.n, 4));
            let u = maps.apply_t(&v0, &v1).unwrap();
            let (w0, w1) = maps.apply_d(&u).unwrap();
            let same = w0.sub(&v0).unwrap().is_zero() && w1.sub(&v1).unwrap().is_zero();
            if !same || !bc.contains(&u).unwrap() || !maps.apply_k(&v0, &v1).unwrap().is_zero() {
                failures += 1;
            }
        }
        ok &= failures == 0;
        detail.push_str(&format!("{name} (m={}): {failures}/40 mismatches; ", maps.m));
    }
    verdict(5, ok, &detail);
}

fn random_f64_poly(rng: &mut StdRng, two_vars: bool, degree: u32) -> Poly<f64> {
    let mut terms = Vec::new();
    for i in 0..=degree {
        for j in 0..=if two_vars { degree - i } else { 0 } {
            terms.push((i, j, rng.gen_range(-1.0..1.0)));
        }
    }
    Poly::from_terms(terms)
}

fn random_op(rng: &mut StdRng, interval: &Interval<f64>, out: Dims, inp: Dims) -> PiOp<f64> {
    let mut mat = |r: usize, c: usize, two: bool, deg: u32| PolyMat::from_fn(r, c, |_, _| random_f64_poly(rng, two, deg));
    let p = mat(out.m, inp.m, false, 0);
    let q1 = mat(out.m, inp.n, false, 3);
    let q2 = mat(out.n, inp.m, false, 3);
    let r0 = mat(out.n, inp.n, false, 3);
    let r1 = mat(out.n, inp.n, true, 3);
    let r2 = mat(out.n, inp.n, true, 3);
    PiOp::new(interval.clone(), out, inp, p, q1, q2, r0, r1, r2).unwrap()
}

fn inner(a: &(PolyMat<f64>, PolyMat<f64>), b: &(PolyMat<f64>, PolyMat<f64>), iv: &Interval<f64>) -> f64 {
    let fin = a.0.transpose().mul(&b.0).unwrap().constant_values().unwrap();
    let fun = a.1.transpose().mul(&b.1).unwrap().integrate(Var::X, &iv.lower(), &iv.upper()).unwrap();
    fin.first().map_or(0.0, |r| r[0]) + fun.constant_values().unwrap()[0][0]
}

#[test]
fn criterion_6_pi_algebra() {
    let mut rng = StdRng::seed_from_u64(6);
    let iv = Interval::new(-0.5, 1.0).unwrap();
    let (d1, d2, d3) = (Dims::new(1, 2), Dims::new(2, 1), Dims::new(1, 1));
    let (mut compose, mut adjoint, mut reverse) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let a = random_op(&mut rng, &iv, d3, d2);
        let b = random_op(&mut rng, &iv, d2, d1);
        let v0 = PolyMat::from_fn(d1.m, 1, |_, _| random_f64_poly(&mut rng, false, 0));
        let v1 = PolyMat::from_fn(d1.n, 1, |_, _| random_f64_poly(&mut rng, false, 3));
        let ab = a.compose(&b).unwrap();
        let direct = ab.apply_poly(&v0, &v1).unwrap();
        let (b0, b1) = b.apply_poly(&v0, &v1).unwrap();
        let nested = a.apply_poly(&b0, &b1).unwrap();
        compose = compose
            .max(direct.0.sub(&nested.0).unwrap().max_abs())
            .max(direct.1.sub(&nested.1).unwrap().max_abs());

        let w = (
            PolyMat::from_fn(d2.m, 1, |_, _| random_f64_poly(&mut rng, false, 0)),
            PolyMat::from_fn(d2.n, 1, |_, _| random_f64_poly(&mut rng, false, 3)),
        );
        let bv = (b0, b1);
        let bstar_w = b.adjoint().apply_poly(&w.0, &w.1).unwrap();
        adjoint = adjoint.max((inner(&bv, &w, &iv) - inner(&(v0, v1), &bstar_w, &iv)).abs());

        reverse = reverse.max(ab.adjoint().distance(&b.adjoint().compose(&a.adjoint()).unwrap()).unwrap());
    }
    let ok = compose <= 1e-12 && adjoint <= 1e-12 && reverse <= 1e-12;
    verdict(
        6,
        ok,
        &format!("compose {compose:.1e}, adjoint pairing {adjoint:.1e}, reversed adjoint {reverse:.1e}"),
    );
}

#[test]
fn criterion_7_simulation_matches_separation_of_variables() {
    let heat = pde_to_pie(&reaction_diffusion::<f64>(0.0, true)).unwrap();
    let pencil = DiscretizedPencil::new(&heat, &Trajectory::T0F, 16).unwrap();
    let v = pencil.fit_state(|x| vec![(PI * x).cos()]).unwrap();
    let traj = integrate_pie(&pencil, &v, 0.3, 1e-4).unwrap();
    let u0 = &pencil.state * &v;
    let mut worst = 0.0f64;
    for (t, vt) in traj.times.iter().zip(&traj.states) {
        let exact = &u0 * (-PI * PI * t).exp();
        worst = worst.max((&pencil.state * vt - &exact).norm() / exact.norm());
    }

    let rd = pde_to_pie(&reaction_diffusion::<f64>(1.0, true)).unwrap();
    let pencil = DiscretizedPencil::new(&rd, &Trajectory::T0F, 16).unwrap();
    let v = pencil
        .fit_state(|x| vec![1.0 + (PI * x).cos() + 0.3 * (2.0 * PI * x).cos()])
        .unwrap();
    let traj = integrate_pie(&pencil, &v, 1.0, 1e-4).unwrap();
    let rate = traj.fitted_rate(0.5, 1.0).unwrap();
    let target = PI * PI - 1.0;
    let ok = worst <= 1e-3 && ((rate - target) / target).abs() <= 0.02;
    verdict(
        7,
        ok,
        &format!("heat relative L2 error {worst:.2e} on [0, 0.3]; lambda=1 fitted rate {rate:.4} vs {target:.4}"),
    );
}

#[test]
fn criterion_8_green_function_oracles() {
    let unit = Interval::new(q(0, 1), q(1, 1)).unwrap();
    let dir = StateMaps::new(&BoundarySpec::dirichlet(unit, 1), None).unwrap();
    let (x, th, one) = (Poly::x(), Poly::theta(), Poly::constant(q(1, 1)));
    let below = dir.t.r1.get(0, 0) == &th.mul(&x.sub(&one));
    let above = dir.t.r2.get(0, 0) == &x.mul(&th.sub(&one));

    let sym = Interval::new(q(-1, 1), q(1, 1)).unwrap();
    let periodic = StateMaps::new(&BoundarySpec::periodic(sym, 1), Some(PolyMat::from_constants(1, 1, &[q(1, 2)]))).unwrap();
    let u = periodic
        .apply_t(&PolyMat::zeros(1, 1), &PolyMat::from_fn(1, 1, |_, _| Poly::x()))
        .unwrap();
    let cubic = PolyMat::from_fn(1, 1, |_, _| Poly::from_terms([(3, 0, q(1, 6)), (1, 0, q(-1, 6))]));
    let periodic_ok = u == cubic;
    verdict(
        8,
        below && above && periodic_ok,
        &format!("dirichlet kernel below={below} above={above}; periodic T(0, x) = x^3/6 - x/6: {periodic_ok}"),
    );
}

#[test]
fn criterion_9_certificates_never_exceed_the_spectrum() {
    let mut ok = true;
    let mut detail = String::new();
    let opts = LpiOptions::default();
    for (name, _) in specfile::BUNDLED {
        let spec = specfile::bundled(name).unwrap();
        let pde = spec.numeric().unwrap();
        let pie = pde_to_pie(&pde).unwrap();
        let s = spec.trajectory(&pie);
        let oracle = spectral::decay_rate(&pie, &s, spec.basis).unwrap();
        let search = lpi::max_decay_rate(&pde, &s, &opts, BISECTION_TOL).unwrap();
        let sound = search.rate.is_none_or(|a| a <= oracle + 1e-3);
        ok &= sound;
        detail.push_str(&format!(
            "\n  {name} (m={}): certified {} spectral {oracle:.4}",
            pie.m,
            search.rate.map_or("none".into(), |a| format!("{a:.4}"))
        ));
    }
    let heat = dirichlet_heat::<f64>();
    let pie = pde_to_pie(&heat).unwrap();
    let certified = lpi::check_stability(&heat, &Trajectory::Zero, 9.0, &opts).unwrap().is_certified();
    let oracle = spectral::decay_rate(&pie, &Trajectory::Zero, 16).unwrap();
    ok &= certified && 9.0 <= oracle;
    detail.push_str(&format!("\n  dirichlet heat alpha=9 certified={certified}"));
    verdict(9, ok, &detail);
}
