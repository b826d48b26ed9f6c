//! The `pie` command line: argument handling, reports and exit codes. Every
//! command is a composition of library calls.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::convert::{damped_wave, pde_to_pie, reaction_diffusion, PdeSystem, Trajectory};
use crate::error::{PieError, Result};
use crate::lpi::{self, LpiOptions, Verdict, BISECTION_TOL};
use crate::polymat::{Coeff, Rational};
use crate::sdp::Status;
use crate::specfile::PdeSpec;
use crate::spectral::{self, DiscretizedPencil};
use crate::textio::{describe_constraint, write_pie};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_INDETERMINATE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;

/// Table I rows: `λ` and the published certified rate.
pub const TABLE1: [(f64, f64); 8] = [
    (0.0, 9.8690),
    (1.5, 8.3691),
    (3.0, 6.8692),
    (4.5, 5.3693),
    (6.0, 3.8695),
    (7.5, 2.3695),
    (9.0, 0.8696),
    (9.5, 0.3696),
];

/// Table II rows: `k` and the published certified rate.
pub const TABLE2: [(f64, f64); 8] = [
    (1.0, 0.981),
    (2.0, 1.997),
    (3.0, 2.993),
    (4.0, 3.996),
    (5.0, 4.994),
    (6.0, 5.975),
    (7.0, 6.969),
    (8.0, 7.957),
];

#[derive(Parser, Debug)]
#[command(name = "pie", about = "PIE conversion and stability certification for 1D PDEs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Write a machine-readable copy of the report (tab-separated).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert a PDE spec to its PIE and print the constraint.
    Convert {
        spec: PathBuf,
        /// Write the PIE serialization here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify a decay rate, or search for the largest one.
    Certify {
        spec: PathBuf,
        #[arg(long, conflicts_with = "search", required_unless_present = "search")]
        alpha: Option<f64>,
        #[arg(long)]
        search: bool,
        #[arg(long)]
        degree: Option<u32>,
        /// Save the certificate text.
        #[arg(long)]
        certificate: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Constrained pencil spectrum and the decay rate it implies.
    Spectrum {
        spec: PathBuf,
        #[arg(long = "N")]
        basis: Option<usize>,
        /// Number of leading modes to list.
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Integrate the PIE and write `time,seminorm,norm` lines.
    Simulate {
        spec: PathBuf,
        #[arg(long)]
        t_end: f64,
        #[arg(long)]
        dt: f64,
        /// `cos:K` (cos Kπx), `const:C` or `poly:c0,c1,…` (monomials in x), in every component.
        #[arg(long, default_value = "cos:1")]
        init: String,
        #[arg(long = "N")]
        basis: Option<usize>,
        /// Trajectory file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the certified-rate tables.
    Reproduce {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        table: u8,
        #[arg(long)]
        degree: Option<u32>,
        #[command(flatten)]
        common: Common,
    },
}

/// A titled table. Every rate column names its method.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn text(&self) -> String {
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = format!("{}\n{}\n", self.title, line(&self.columns));
        for row in &self.rows {
            out.push_str(&line(row));
            out.push('\n');
        }
        for n in &self.notes {
            let _ = writeln!(out, "{n}");
        }
        out
    }

    pub fn tsv(&self) -> String {
        let mut out = self.columns.join("\t");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out
    }
}

/// Runs the command line and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                PieError::Usage(_) => EXIT_USAGE,
                PieError::Numerical(_) => EXIT_INDETERMINATE,
                _ => EXIT_DATA,
            }
        }
    }
}

fn read_spec(path: &Path) -> Result<PdeSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| PieError::Parse {
        line: 0,
        col: 0,
        msg: format!("cannot read {}: {e}", path.display()),
    })?;
    PdeSpec::parse(&text).map_err(|e| match e {
        PieError::Parse { line, col, msg } => PieError::Parse {
            line,
            col,
            msg: format!("{}: {msg}", path.display()),
        },
        other => other,
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| PieError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, report: &Report, mirror: Option<&PathBuf>) -> Result<()> {
    let _ = out.write_all(report.text().as_bytes());
    if let Some(p) = mirror {
        write_file(p, &report.tsv())?;
    }
    Ok(())
}

fn exit_for(status: Status) -> i32 {
    match status {
        Status::Feasible => EXIT_OK,
        Status::Infeasible => EXIT_INFEASIBLE,
        Status::Indeterminate => EXIT_INDETERMINATE,
    }
}

fn fmt_rate(v: f64) -> String {
    format!("{v:.4}")
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Convert { spec, out: path } => {
            let spec = read_spec(&spec)?;
            let pie = pde_to_pie(&spec.exact()?)?;
            let k = describe_constraint(&pie.k);
            let k = if k.is_empty() { "none".to_string() } else { k.join(", ") };
            let _ = writeln!(out, "m={}, K: {k}", pie.m);
            let _ = writeln!(out, "n={}", pie.n);
            let text = write_pie(&pie);
            match path {
                Some(p) => write_file(&p, &text)?,
                None => {
                    let _ = out.write_all(text.as_bytes());
                }
            }
            Ok(EXIT_OK)
        }
        Command::Certify {
            spec,
            alpha,
            search,
            degree,
            certificate,
            common,
        } => {
            let spec = read_spec(&spec)?;
            let pde = spec.numeric()?;
            let pie = pde_to_pie(&pde)?;
            let s = spec.trajectory(&pie);
            let opts = LpiOptions {
                degree: degree.unwrap_or(spec.degree),
                ..LpiOptions::default()
            };
            let oracle = spectral::decay_rate(&pie, &s, spec.basis)?;
            let start = Instant::now();
            let problem = lpi::assemble(&pie, &s, &opts)?;
            let mut report = Report {
                title: format!("certify {}", spec.name.as_deref().unwrap_or("system")),
                columns: vec!["quantity".into(), "value".into()],
                ..Report::default()
            };
            let mut row = |k: &str, v: String| report.rows.push(vec![k.to_string(), v]);
            let (code, cert) = if search {
                let res = problem.max_decay_rate(1.1 * oracle.max(0.0), BISECTION_TOL, &opts.solver)?;
                let first = res.probes.first().map(|p| p.1).unwrap_or(Status::Indeterminate);
                match res.rate {
                    Some(r) => row(&format!("alpha[lpi, bisection tol {BISECTION_TOL:e}]"), fmt_rate(r)),
                    None => row("alpha[lpi]", format!("not certifiable (alpha=0 {first})")),
                }
                row("probes", res.probes.len().to_string());
                let code = if res.rate.is_some() { EXIT_OK } else { exit_for(first) };
                (code, res.certificate)
            } else {
                let alpha = alpha.expect("clap requires alpha without search");
                let v = problem.check(alpha, &opts.solver)?;
                row(&format!("alpha[lpi, residual tol {:e}]", lpi::RESIDUAL_TOL), fmt_rate(alpha));
                row("status", v.status().to_string());
                match &v {
                    Verdict::Infeasible { message, .. } | Verdict::Indeterminate { message, .. } => {
                        row("solver", message.clone())
                    }
                    Verdict::Certified(_) => {}
                }
                (exit_for(v.status()), v.certificate().cloned())
            };
            if let Some(c) = &cert {
                row("eps2", format!("{:.3e}", c.eps2));
                row("residual", format!("{:.2e}", c.residual));
                row("mp_min_eigenvalue", format!("{:.2e}", c.m_p_min_eigenvalue));
                row("sampled_max", format!("{:.2e}", c.sampled_max));
            }
            row("degree", opts.degree.to_string());
            row(&format!("alpha[spectral, N={}]", spec.basis), fmt_rate(oracle));
            row("seconds", format!("{:.2}", start.elapsed().as_secs_f64()));
            if let (Some(path), Some(c)) = (certificate, &cert) {
                write_file(&path, &c.to_text())?;
            }
            emit(out, &report, common.out.as_ref())?;
            Ok(code)
        }
        Command::Spectrum { spec, basis, count, common } => {
            let spec = read_spec(&spec)?;
            let pie = pde_to_pie(&spec.numeric()?)?;
            let s = spec.trajectory(&pie);
            let n = basis.unwrap_or(spec.basis);
            let spectrum = spectral::constrained_spectrum(&DiscretizedPencil::new(&pie, &s, n)?)?;
            let mut report = Report {
                title: format!("spectrum N={n}"),
                columns: vec!["re".into(), "im".into(), "visible".into()],
                ..Report::default()
            };
            for m in spectrum.modes.iter().take(count) {
                report.rows.push(vec![
                    format!("{:.6}", m.value.re),
                    format!("{:.6}", m.value.im),
                    (m.visibility > spectral::VISIBILITY_TOL).to_string(),
                ]);
            }
            let rate = spectrum.decay_rate()?;
            report.notes.push(format!("alpha[spectral, N={n}] = {rate:.6}"));
            if spectrum.infinite > 0 {
                report.notes.push(format!("infinite eigenvalues dropped: {}", spectrum.infinite));
            }
            emit(out, &report, common.out.as_ref())?;
            Ok(EXIT_OK)
        }
        Command::Simulate {
            spec,
            t_end,
            dt,
            init,
            basis,
            out: path,
        } => {
            let spec = read_spec(&spec)?;
            let pie = pde_to_pie(&spec.numeric()?)?;
            let s = spec.trajectory(&pie);
            let pencil = DiscretizedPencil::new(&pie, &s, basis.unwrap_or(spec.basis))?;
            let f = initial_condition(&init)?;
            let v = pencil.fit_state(|x| vec![f(x); pie.n])?;
            let traj = spectral::integrate_pie(&pencil, &v, t_end, dt)?;
            match path {
                Some(p) => {
                    write_file(&p, &traj.to_csv())?;
                    let last = traj.seminorms.len() - 1;
                    let _ = writeln!(
                        out,
                        "steps {}, final seminorm {:.6e}, final norm {:.6e}",
                        last, traj.seminorms[last], traj.norms[last]
                    );
                    if let Some(r) = traj.fitted_rate(0.5 * t_end, t_end) {
                        let _ = writeln!(out, "alpha[simulation fit, dt={dt:e}] = {r:.6}");
                    }
                }
                None => {
                    let _ = out.write_all(traj.to_csv().as_bytes());
                }
            }
            Ok(EXIT_OK)
        }
        Command::Reproduce { table, degree, common } => {
            let opts = LpiOptions {
                degree: degree.unwrap_or(lpi::DEFAULT_DEGREE),
                ..LpiOptions::default()
            };
            let report = reproduce(table, &opts)?;
            emit(out, &report, common.out.as_ref())?;
            Ok(EXIT_OK)
        }
    }
}

/// Parses `cos:K`, `const:C` or `poly:c0,c1,…`.
pub fn initial_condition(text: &str) -> Result<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
    let bad = || PieError::Usage(format!("invalid initial condition `{text}`"));
    let (kind, arg) = text.split_once(':').ok_or_else(bad)?;
    let num = |s: &str| f64::parse_text(s).ok_or_else(bad);
    match kind {
        "cos" => {
            let k = num(arg)?;
            Ok(Box::new(move |x| (k * PI * x).cos()))
        }
        "const" => {
            let c = num(arg)?;
            Ok(Box::new(move |_| c))
        }
        "poly" => {
            let cs: Vec<f64> = arg.split(',').map(num).collect::<Result<_>>()?;
            Ok(Box::new(move |x| cs.iter().rev().fold(0.0, |acc, c| acc * x + c)))
        }
        _ => Err(bad()),
    }
}

/// One row of a rate table.
#[derive(Clone, Debug)]
pub struct TableRow {
    pub parameter: f64,
    pub certified: Result<Option<f64>>,
    pub published: f64,
    pub analytic: f64,
    pub spectral: Result<f64>,
    pub seconds: f64,
}

fn table_row(pde: PdeSystem<f64>, s: Trajectory<f64>, parameter: f64, published: f64, analytic: f64, opts: &LpiOptions) -> TableRow {
    let start = Instant::now();
    let pie = pde_to_pie(&pde);
    let spectral = pie
        .as_ref()
        .map_err(Clone::clone)
        .and_then(|p| spectral::decay_rate(p, &s, crate::specfile::DEFAULT_BASIS));
    let certified = lpi::max_decay_rate(&pde, &s, opts, BISECTION_TOL).map(|r| r.rate);
    TableRow {
        parameter,
        certified,
        published,
        analytic,
        spectral,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Rows of table 1 (periodic reaction-diffusion) or 2 (damped wave), solved concurrently.
pub fn table_rows(table: u8, opts: &LpiOptions) -> Result<Vec<TableRow>> {
    match table {
        1 => Ok(TABLE1
            .par_iter()
            .map(|&(lam, paper)| {
                table_row(reaction_diffusion(lam, true), Trajectory::T0F, lam, paper, PI * PI - lam, opts)
            })
            .collect()),
        2 => Ok(TABLE2
            .par_iter()
            .map(|&(k, paper)| table_row(damped_wave(k), Trajectory::Zero, k, paper, k, opts))
            .collect()),
        t => Err(PieError::Usage(format!("no table {t}; choose 1 or 2"))),
    }
}

pub fn reproduce(table: u8, opts: &LpiOptions) -> Result<Report> {
    let rows = table_rows(table, opts)?;
    let param = if table == 1 { "lambda" } else { "k" };
    let mut report = Report {
        title: format!("table {table} (degree {})", opts.degree),
        columns: vec![
            param.into(),
            format!("alpha[lpi, tol {BISECTION_TOL:e}]"),
            "alpha[published]".into(),
            "alpha[analytic]".into(),
            format!("alpha[spectral, N={}]", crate::specfile::DEFAULT_BASIS),
            "seconds".into(),
        ],
        ..Report::default()
    };
    for r in rows {
        report.rows.push(vec![
            format!("{}", r.parameter),
            match &r.certified {
                Ok(Some(a)) => fmt_rate(*a),
                Ok(None) => "not certifiable".into(),
                Err(e) => format!("error: {e}"),
            },
            format!("{}", r.published),
            fmt_rate(r.analytic),
            match &r.spectral {
                Ok(a) => fmt_rate(*a),
                Err(e) => format!("error: {e}"),
            },
            format!("{:.1}", r.seconds),
        ]);
    }
    Ok(report)
}

/// Exact conversion summary used by `convert`: `(m, constraint lines)`.
pub fn conversion_summary(pde: &PdeSystem<Rational>) -> Result<(usize, Vec<String>)> {
    let pie = pde_to_pie(pde)?;
    Ok((pie.m, describe_constraint(&pie.k)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("pie").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    fn data(name: &str) -> String {
        format!("{}/data/{name}.pde", env!("CARGO_MANIFEST_DIR"))
    }

    #[test]
    fn convert_prints_the_constraint() {
        let (code, out, _) = call(&["convert", &data("periodic_reaction_diffusion")]);
        assert_eq!(code, EXIT_OK);
        assert!(out.starts_with("m=1, K: ∫v₁=0\n"), "{out}");
        let (code, out, _) = call(&["convert", &data("dirichlet_heat")]);
        assert_eq!(code, EXIT_OK);
        assert!(out.starts_with("m=0, K: none"), "{out}");
    }

    #[test]
    fn convert_writes_a_readable_serialization() {
        let dir = std::env::temp_dir().join(format!("pie-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("wave.pie");
        let (code, _, _) = call(&["convert", &data("neumann_wave"), "--out", path.to_str().unwrap()]);
        assert_eq!(code, EXIT_OK);
        let ops = crate::textio::read_pie_operators::<Rational>(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(ops.len(), 4);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn malformed_input_is_a_data_error() {
        let dir = std::env::temp_dir().join(format!("pie-cli-bad-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.pde");
        std::fs::write(&path, "domain = 0 1\nn = one\n").unwrap();
        let (code, _, err) = call(&["convert", path.to_str().unwrap()]);
        assert_eq!(code, EXIT_DATA);
        assert!(err.contains("line 2"), "{err}");
        let (code, _, _) = call(&["convert", dir.join("missing.pde").to_str().unwrap()]);
        assert_eq!(code, EXIT_DATA);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn usage_errors() {
        assert_eq!(call(&["reproduce", "--table", "3"]).0, EXIT_USAGE);
        assert_eq!(call(&["certify", &data("dirichlet_heat")]).0, EXIT_USAGE);
        assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(call(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn certify_exit_codes() {
        let (code, out, _) = call(&["certify", &data("periodic_reaction_diffusion"), "--alpha", "9"]);
        assert_eq!(code, EXIT_OK, "{out}");
        assert!(out.contains("alpha[spectral, N=16]"));
        let (code, _, _) = call(&["certify", &data("periodic_reaction_diffusion"), "--alpha", "20"]);
        assert_eq!(code, EXIT_INFEASIBLE);
    }

    #[test]
    fn spectrum_lists_the_leading_mode() {
        let (code, out, _) = call(&["spectrum", &data("periodic_reaction_diffusion"), "--N", "16"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("-9.869604"), "{out}");
        let (_, out, _) = call(&["spectrum", &data("neumann_wave"), "--N", "16"]);
        assert!(out.contains("-1.000000  -3.141593"), "{out}");
    }

    #[test]
    fn constant_state_has_zero_seminorm() {
        let (code, out, _) = call(&[
            "simulate",
            &data("periodic_reaction_diffusion"),
            "--t-end",
            "0.01",
            "--dt",
            "0.001",
            "--init",
            "const:1",
        ]);
        assert_eq!(code, EXIT_OK);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "time,seminorm,norm");
        assert_eq!(lines.len(), 12);
        for l in &lines[1..] {
            let s: f64 = l.split(',').nth(1).unwrap().parse().unwrap();
            assert!(s < 1e-12);
        }
    }

    #[test]
    fn initial_conditions() {
        assert!((initial_condition("poly:1,0,2").unwrap()(0.5) - 1.5).abs() < 1e-15);
        assert!((initial_condition("cos:1").unwrap()(1.0) + 1.0).abs() < 1e-15);
        assert!(initial_condition("sin:1").is_err());
        assert!(initial_condition("const").is_err());
    }

    #[test]
    fn report_layouts() {
        let r = Report {
            title: "t".into(),
            columns: vec!["a".into(), "alpha[lpi]".into()],
            rows: vec![vec!["1".into(), "2.5".into()]],
            notes: vec![],
        };
        assert_eq!(r.tsv(), "a\talpha[lpi]\n1\t2.5\n");
        assert_eq!(r.text(), "t\na  alpha[lpi]\n1  2.5\n");
    }
}
