//! PDE specification files.
//!
//! ```text
//! name = periodic reaction-diffusion
//! [domain]
//! domain = -1 1
//! [state]
//! n = 1
//! [dynamics]
//! A0 = [ (0, 0, 0, 6) ]
//! A1 = []
//! A2 = [ (0, 0, 0, 1) ]
//! [bc]
//! E = [
//!   1 -1 0  0
//!   0  0 1 -1
//! ]
//! F = []
//! [options]
//! F3 = [ (0, 0, 0, 1/2) ]
//! S = t0f
//! degree = 3
//! N = 16
//! ```
//!
//! Polynomials are `(row, col, exp_x, coefficient)` tuples. `E` has `2n` rows
//! and `4n` columns ordered `u(a), u(b), u_x(a), u_x(b)`. `S` is `zero`, `t0f`
//! or `custom`, the latter with `S.R0`, `S.R1`, `S.R2` blocks (`n × n`).

use std::fmt::Write as _;

use crate::bcspace::{split, validate_f3, BoundarySpec, RANK_TOL};
use crate::convert::{PdeSystem, PieSystem, Trajectory};
use crate::error::{PieError, Result};
use crate::linalg::DMat;
use crate::lpi::DEFAULT_DEGREE;
use crate::piop::{Dims, PiOp};
use crate::polymat::{Coeff, Interval, PolyMat, Rational};
use crate::textio::{numeric_rows, parse_entries, polymat_body, polymat_from_block, scalar_of, tuples, Entry, Pos, Value};

/// Default Galerkin basis degree.
pub const DEFAULT_BASIS: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub enum SChoice {
    Zero,
    T0F,
    Custom {
        r0: PolyMat<Rational>,
        r1: PolyMat<Rational>,
        r2: PolyMat<Rational>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdeSpec {
    pub name: Option<String>,
    pub interval: Interval<Rational>,
    pub n: usize,
    pub a0: PolyMat<Rational>,
    pub a1: PolyMat<Rational>,
    pub a2: PolyMat<Rational>,
    pub e: DMat<Rational>,
    pub f: PolyMat<Rational>,
    pub f3: Option<PolyMat<Rational>>,
    pub s: SChoice,
    pub degree: u32,
    pub basis: usize,
}

const KEYS: [(&str, &str); 15] = [
    ("name", ""),
    ("domain", "domain"),
    ("n", "state"),
    ("A0", "dynamics"),
    ("A1", "dynamics"),
    ("A2", "dynamics"),
    ("E", "bc"),
    ("F", "bc"),
    ("F3", "options"),
    ("S", "options"),
    ("S.R0", "options"),
    ("S.R1", "options"),
    ("S.R2", "options"),
    ("degree", "options"),
    ("N", "options"),
];

fn block(entry: &Entry) -> Result<&[(Pos, String)]> {
    match &entry.value {
        Value::Block(b) => Ok(b),
        Value::Scalar(_) => Err(entry.pos.error(format!("`{}` must be a bracketed block", entry.key))),
    }
}

fn parse_int<T: std::str::FromStr>(entry: &Entry) -> Result<T> {
    let s = scalar_of(entry)?;
    s.parse()
        .map_err(|_| entry.pos.error(format!("`{}` expects an integer, found `{s}`", entry.key)))
}

/// Rows implied by the largest row index of a tuple block.
fn tuple_rows(b: &[(Pos, String)]) -> Result<usize> {
    Ok(tuples(b)?
        .iter()
        .filter_map(|(_, items)| items.first().and_then(|s| s.parse::<usize>().ok()))
        .map(|r| r + 1)
        .max()
        .unwrap_or(0))
}

impl PdeSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let entries = parse_entries(text)?;
        let mut seen: Vec<&str> = Vec::new();
        for e in &entries {
            let Some((_, section)) = KEYS.iter().find(|(k, _)| *k == e.key) else {
                return Err(e.pos.error(format!("unknown key `{}`", e.key)));
            };
            if let Some(s) = &e.section {
                if !KEYS.iter().any(|(_, sec)| sec == s) {
                    return Err(e.pos.error(format!("unknown section `[{s}]`")));
                }
                if !section.is_empty() && s != section {
                    return Err(e.pos.error(format!("`{}` belongs in [{section}], not [{s}]", e.key)));
                }
            }
            if seen.contains(&e.key.as_str()) {
                return Err(e.pos.error(format!("duplicate key `{}`", e.key)));
            }
            seen.push(&e.key);
        }
        let get = |k: &str| entries.iter().find(|e| e.key == k);
        let need = |k: &str| get(k).ok_or_else(|| PieError::Parse { line: 0, col: 0, msg: format!("missing `{k}`") });

        let dom = need("domain")?;
        let ends: Vec<Rational> = scalar_of(dom)?
            .split_whitespace()
            .map(|s| Rational::parse_text(s).ok_or_else(|| dom.pos.error(format!("invalid endpoint `{s}`"))))
            .collect::<Result<_>>()?;
        if ends.len() != 2 {
            return Err(dom.pos.error("`domain` expects two endpoints"));
        }
        let interval = Interval::new(ends[0].clone(), ends[1].clone()).map_err(|e| dom.pos.error(e.to_string()))?;
        let n_entry = need("n")?;
        let n: usize = parse_int(n_entry)?;
        if n == 0 {
            return Err(n_entry.pos.error("`n` must be positive"));
        }
        let square = |k: &str| -> Result<PolyMat<Rational>> {
            match get(k) {
                Some(e) => polymat_from_block(block(e)?, n, n),
                None => Ok(PolyMat::zeros(n, n)),
            }
        };
        let (a0, a1, a2) = (square("A0")?, square("A1")?, square("A2")?);

        let e_entry = need("E")?;
        let rows = numeric_rows::<Rational>(block(e_entry)?)?;
        if rows.len() != 2 * n {
            return Err(e_entry.pos.error(format!("`E` needs {} rows, found {}", 2 * n, rows.len())));
        }
        let mut data = Vec::new();
        for (pos, r) in rows {
            if r.len() != 4 * n {
                return Err(pos.error(format!("`E` rows need {} entries, found {}", 4 * n, r.len())));
            }
            data.extend(r);
        }
        let e = DMat::from_rows(2 * n, 4 * n, data);
        let f = match get("F") {
            Some(entry) => polymat_from_block(block(entry)?, 2 * n, n)?,
            None => PolyMat::zeros(2 * n, n),
        };
        let f3 = match get("F3") {
            Some(entry) => {
                let b = block(entry)?;
                Some(polymat_from_block(b, tuple_rows(b)?, n)?)
            }
            None => None,
        };
        let s = match get("S") {
            None => SChoice::T0F,
            Some(entry) => match scalar_of(entry)? {
                "zero" => SChoice::Zero,
                "t0f" => SChoice::T0F,
                "custom" => SChoice::Custom {
                    r0: square("S.R0")?,
                    r1: square("S.R1")?,
                    r2: square("S.R2")?,
                },
                other => return Err(entry.pos.error(format!("`S` must be zero, t0f or custom, found `{other}`"))),
            },
        };
        if !matches!(s, SChoice::Custom { .. }) {
            if let Some(e) = ["S.R0", "S.R1", "S.R2"].iter().find_map(|k| get(k)) {
                return Err(e.pos.error("kernel blocks require `S = custom`"));
            }
        }
        let degree = get("degree").map(parse_int).transpose()?.unwrap_or(DEFAULT_DEGREE);
        let basis = get("N").map(parse_int).transpose()?.unwrap_or(DEFAULT_BASIS);
        let spec = Self {
            name: get("name").map(scalar_of).transpose()?.map(str::to_string),
            interval,
            n,
            a0,
            a1,
            a2,
            e,
            f,
            f3,
            s,
            degree,
            basis,
        };
        spec.exact().map_err(|err| match err {
            PieError::Parse { .. } => err,
            other => PieError::Parse { line: 0, col: 0, msg: other.to_string() },
        })?;
        Ok(spec)
    }

    /// The system with exact coefficients.
    pub fn exact(&self) -> Result<PdeSystem<Rational>> {
        let bc = BoundarySpec::new(self.interval.clone(), self.n, self.e.clone(), self.f.clone())?;
        let parts = split(&bc, RANK_TOL)?;
        if let Some(f3) = &self.f3 {
            if f3.rows() != parts.m {
                return Err(PieError::Usage(format!("F3 must have m = {} rows, found {}", parts.m, f3.rows())));
            }
            if !validate_f3(&parts, f3) {
                return Err(PieError::SingularAugmentedG);
            }
        }
        PdeSystem::new(self.a0.clone(), self.a1.clone(), self.a2.clone(), bc, self.f3.clone())
    }

    pub fn numeric(&self) -> Result<PdeSystem<f64>> {
        let bc = BoundarySpec::new(self.interval.to_f64(), self.n, self.e.map(|v| v.to_f64()), self.f.to_f64())?;
        PdeSystem::new(self.a0.to_f64(), self.a1.to_f64(), self.a2.to_f64(), bc, self.f3.as_ref().map(PolyMat::to_f64))
    }

    /// The trajectory operator for a converted system.
    pub fn trajectory(&self, pie: &PieSystem<f64>) -> Trajectory<f64> {
        match &self.s {
            SChoice::Zero => Trajectory::Zero,
            SChoice::T0F => Trajectory::T0F,
            SChoice::Custom { r0, r1, r2 } => {
                let d = Dims::new(0, self.n);
                let mut op = PiOp::zero(pie.maps.interval.clone(), d, d);
                op.r0 = r0.to_f64();
                op.r1 = r1.to_f64();
                op.r2 = r2.to_f64();
                Trajectory::Custom(op)
            }
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let blk = |out: &mut String, key: &str, m: &PolyMat<Rational>| {
            if m.is_zero() {
                let _ = writeln!(out, "{key} = []");
            } else {
                let _ = write!(out, "{key} = [\n{}]\n", polymat_body(m));
            }
        };
        if let Some(name) = &self.name {
            let _ = writeln!(out, "name = {name}");
        }
        let _ = writeln!(out, "[domain]\ndomain = {} {}", self.interval.a.to_text(), self.interval.b.to_text());
        let _ = writeln!(out, "[state]\nn = {}", self.n);
        let _ = writeln!(out, "[dynamics]");
        blk(&mut out, "A0", &self.a0);
        blk(&mut out, "A1", &self.a1);
        blk(&mut out, "A2", &self.a2);
        let _ = writeln!(out, "[bc]\nE = [");
        for r in 0..self.e.rows() {
            let row: Vec<String> = self.e.row(r).iter().map(Coeff::to_text).collect();
            let _ = writeln!(out, "  {}", row.join(" "));
        }
        let _ = writeln!(out, "]");
        blk(&mut out, "F", &self.f);
        let _ = writeln!(out, "[options]");
        if let Some(f3) = &self.f3 {
            blk(&mut out, "F3", f3);
        }
        match &self.s {
            SChoice::Zero => {
                let _ = writeln!(out, "S = zero");
            }
            SChoice::T0F => {
                let _ = writeln!(out, "S = t0f");
            }
            SChoice::Custom { r0, r1, r2 } => {
                let _ = writeln!(out, "S = custom");
                blk(&mut out, "S.R0", r0);
                blk(&mut out, "S.R1", r1);
                blk(&mut out, "S.R2", r2);
            }
        }
        let _ = writeln!(out, "degree = {}\nN = {}", self.degree, self.basis);
        out
    }
}

/// Bundled specification files, by name.
pub const BUNDLED: [(&str, &str); 3] = [
    ("periodic_reaction_diffusion", include_str!("../data/periodic_reaction_diffusion.pde")),
    ("neumann_wave", include_str!("../data/neumann_wave.pde")),
    ("dirichlet_heat", include_str!("../data/dirichlet_heat.pde")),
];

pub fn bundled(name: &str) -> Option<PdeSpec> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| PdeSpec::parse(text).expect("bundled specs parse"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convert::{damped_wave, dirichlet_heat, reaction_diffusion};

    #[test]
    fn bundled_specs_match_the_built_in_systems() {
        let rd = bundled("periodic_reaction_diffusion").unwrap().exact().unwrap();
        let want = reaction_diffusion::<Rational>(Rational::from_ratio(0, 1), true);
        assert_eq!((rd.a0, rd.a2, rd.bc, rd.f3), (want.a0, want.a2, want.bc, want.f3));
        let wave = bundled("neumann_wave").unwrap().exact().unwrap();
        let want = damped_wave::<Rational>(Rational::from_ratio(1, 1));
        assert_eq!((wave.a0, wave.a2, wave.bc), (want.a0, want.a2, want.bc));
        let heat = bundled("dirichlet_heat").unwrap().exact().unwrap();
        assert_eq!(heat.bc, dirichlet_heat::<Rational>().bc);
    }

    #[test]
    fn text_round_trip() {
        for (_, text) in BUNDLED {
            let spec = PdeSpec::parse(text).unwrap();
            assert_eq!(PdeSpec::parse(&spec.to_text()).unwrap(), spec);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let good = BUNDLED[0].1;
        let cases = [
            good.replace("n = 1", "n = 1\ncolour = red"),
            good.replace("S = t0f", "S = maybe"),
            good.replace("  0  0 1 -1\n", ""),
            good.replace("[state]", "[bc]"),
            good.replace("(0, 0, 0, 1)", "(0, 0, 0, one)"),
            good.replace("F3 = [ (0, 0, 0, 1/2) ]", "F3 = [ (0, 0, 0, 0) ]"),
            good.replace("domain = -1 1", "domain = 1 -1"),
        ];
        for (k, text) in cases.iter().enumerate() {
            assert!(matches!(PdeSpec::parse(text), Err(PieError::Parse { .. })), "case {k}: {:?}", PdeSpec::parse(text));
        }
    }

    #[test]
    fn unknown_key_position() {
        match PdeSpec::parse("domain = 0 1\n  bogus = 2\n") {
            Err(PieError::Parse { line, col, msg }) => {
                assert_eq!((line, col), (2, 3));
                assert!(msg.contains("bogus"));
            }
            other => panic!("{other:?}"),
        }
    }
}
