//! Command-line front end: inf-sup sweeps, verification suites and single
//! runs of the decomposition and the elasticity solver.

mod commands;
mod verify;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{BcMode, Mesh, MeshKind};

pub use verify::Suite;

/// Highest polynomial degree accepted on the command line.
pub const P_MAX: usize = 12;

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "elastic-complex", version, about = "Discrete elasticity complex experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// built-in mesh (unit_triangle, crisscross(n), square_annulus) or a
    /// mesh file; several may be given separated by commas
    #[arg(long)]
    pub mesh: Option<String>,
    /// degree or degree range `a..b` (inclusive)
    #[arg(long)]
    pub p: Option<String>,
    /// displacement, traction or file-tags; comma separated for several
    #[arg(long)]
    pub bc: Option<String>,
    /// number of uniform refinements; every level from 0 is run
    #[arg(long, default_value_t = 0)]
    pub refine: usize,
    /// output file, stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// relative rank tolerance
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// eigenvalues of the divergence restricted to the stress space
    Fast,
    /// Schur complement of the assembled saddle point matrices
    Schur,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Inf-sup constants as CSV (mesh, bc, h, p, dims, beta, nu, residual).
    Infsup {
        #[command(flatten)]
        common: CommonArgs,
        /// use the Arnold-Winther subspace paired with degree p - 2
        #[arg(long)]
        aw: bool,
        #[arg(long, value_enum, default_value_t = Method::Fast)]
        method: Method,
    },
    /// Run a verification suite and print a JSON report.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        #[command(flatten)]
        common: CommonArgs,
        /// random inputs per configuration (suite-specific default)
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        aw: bool,
    },
    /// Hodge decomposition of random stresses, JSON.
    Hodge {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 1)]
        samples: usize,
    },
    /// Mixed elasticity solve against a manufactured polynomial solution.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
    /// Dimensions, the Euler-type identity and cohomology of the complex.
    ComplexCheck {
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Resolved settings shared by all commands.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub meshes: Vec<String>,
    #[serde(skip)]
    pub mesh_kinds: Vec<MeshKind>,
    pub degrees: (usize, usize),
    pub bcs: Vec<BcMode>,
    pub refine: usize,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub tol: Option<f64>,
}

/// Parses `a..b`, `a..=b` or a single degree.
pub fn parse_degrees(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("bad degree range {s:?}"));
    let s = s.trim();
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (a.trim(), b.trim().trim_start_matches('=')),
        None => (s, s),
    };
    let lo: usize = lo.parse().map_err(|_| bad())?;
    let hi: usize = hi.parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(Error::Config(format!("empty degree range {s:?}")));
    }
    if lo < 3 || hi > P_MAX {
        return Err(Error::Config(format!("degrees must lie in 3..={P_MAX}, got {s:?}")));
    }
    Ok((lo, hi))
}

impl RunConfig {
    pub fn resolve(
        command: &str,
        args: &CommonArgs,
        default_mesh: &str,
        default_p: (usize, usize),
        default_bc: &str,
    ) -> Result<RunConfig> {
        let mesh_arg = args.mesh.as_deref().unwrap_or(default_mesh);
        let mesh_kinds = split_list(mesh_arg)
            .map(MeshKind::parse)
            .collect::<Result<Vec<_>>>()?;
        if mesh_kinds.is_empty() {
            return Err(Error::Config("no mesh given".into()));
        }
        let degrees = match &args.p {
            Some(s) => parse_degrees(s)?,
            None => default_p,
        };
        let bcs = split_list(args.bc.as_deref().unwrap_or(default_bc))
            .map(BcMode::from_name)
            .collect::<Result<Vec<_>>>()?;
        if bcs.is_empty() {
            return Err(Error::Config("no boundary condition given".into()));
        }
        if let Some(t) = args.tol {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!("tolerance must lie in (0, 1), got {t}")));
            }
        }
        Ok(RunConfig {
            command: command.to_string(),
            meshes: mesh_kinds.iter().map(|k| k.to_string()).collect(),
            mesh_kinds,
            degrees,
            bcs,
            refine: args.refine,
            out: args.out.clone(),
            seed: args.seed,
            tol: args.tol,
        })
    }

    pub fn degree_list(&self) -> Vec<usize> {
        (self.degrees.0..=self.degrees.1).collect()
    }

    /// Every mesh at every refinement level, with a display name.
    pub fn mesh_levels(&self) -> Result<Vec<(String, Mesh)>> {
        let mut out = Vec::new();
        for kind in &self.mesh_kinds {
            let mut m = Mesh::build(kind)?;
            for r in 0..=self.refine {
                if r > 0 {
                    m = m.refine_uniform();
                }
                let name = if r == 0 { kind.to_string() } else { format!("{kind}/r{r}") };
                out.push((name, m.clone()));
            }
        }
        Ok(out)
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty())
}

/// Full-precision decimal representation used in CSV output.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// A CSV document with a header row.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Csv {
        let mut text = header.join(",");
        text.push('\n');
        Csv { text }
    }

    pub fn row(&mut self, fields: &[String]) {
        let line: Vec<String> = fields.iter().map(|f| csv_field(f)).collect();
        let _ = writeln!(self.text, "{}", line.join(","));
    }

    pub fn finish(self) -> String {
        self.text
    }
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    schema_version: u32,
    config: &'a RunConfig,
    #[serde(flatten)]
    body: T,
}

pub fn to_json<T: Serialize>(cfg: &RunConfig, body: T) -> Result<String> {
    let r = Report {
        schema_version: SCHEMA_VERSION,
        config: cfg,
        body,
    };
    let mut s = serde_json::to_string_pretty(&r).map_err(|e| Error::Numerical(format!("serialization: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut o = std::io::stdout().lock();
            o.write_all(text.as_bytes())?;
            o.flush()?;
        }
    }
    Ok(())
}

/// Maps `f` over `items` on a few threads, keeping the input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len()).min(8);
    if threads <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("every slot filled")).collect()
}

/// Outcome of a command: the text to write and whether every check passed.
pub struct Output {
    pub text: String,
    pub ok: bool,
}

pub fn run(cli: Cli) -> Result<(Output, Option<PathBuf>)> {
    let (out, path) = match cli.command {
        Command::Infsup { common, aw, method } => {
            let cfg = RunConfig::resolve("infsup", &common, "unit_triangle", (3, 8), "displacement,traction")?;
            (commands::infsup(&cfg, aw, method)?, cfg.out)
        }
        Command::Verify { suite, common, samples, aw } => {
            let cfg = verify::config(suite, &common)?;
            (verify::run(suite, &cfg, samples, aw)?, cfg.out)
        }
        Command::Hodge { common, samples } => {
            let cfg = RunConfig::resolve("hodge", &common, "square_annulus", (3, 5), "displacement")?;
            (commands::hodge(&cfg, samples)?, cfg.out)
        }
        Command::Solve { common, mu, lambda } => {
            let cfg = RunConfig::resolve("solve", &common, "crisscross(1)", (3, 4), "displacement")?;
            (commands::solve(&cfg, mu, lambda)?, cfg.out)
        }
        Command::ComplexCheck { common } => {
            let cfg = RunConfig::resolve(
                "complex-check",
                &common,
                "unit_triangle,crisscross(1),square_annulus",
                (3, 5),
                "displacement,traction",
            )?;
            (commands::complex_check(&cfg)?, cfg.out)
        }
    };
    Ok((out, path))
}

/// Parses the process arguments, runs the command and returns the exit
/// code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match run(cli) {
        Ok((out, path)) => {
            if let Err(e) = emit(path.as_deref(), &out.text) {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
            if out.ok {
                0
            } else {
                eprintln!("error: one or more checks failed");
                EXIT_NUMERICAL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_ranges() {
        assert_eq!(parse_degrees("3..8").unwrap(), (3, 8));
        assert_eq!(parse_degrees("4..=5").unwrap(), (4, 5));
        assert_eq!(parse_degrees("6").unwrap(), (6, 6));
        for bad in ["5..3", "1..4", "3..40", "x", "3..y"] {
            assert!(parse_degrees(bad).unwrap_err().is_config(), "{bad}");
        }
    }

    #[test]
    fn csv_numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.5e-300, -7.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        let mut c = Csv::new(&["a", "b"]);
        c.row(&["x,y".into(), fmt_f64(1.0)]);
        assert_eq!(c.finish(), "a,b\n\"x,y\",1.0000000000000000e0\n");
    }

    #[test]
    fn par_map_keeps_order() {
        let v: Vec<usize> = (0..50).collect();
        assert_eq!(par_map(&v, |x| x * 2), v.iter().map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn mesh_levels_are_named() {
        let args = CommonArgs {
            mesh: Some("crisscross(1)".into()),
            refine: 2,
            ..Default::default()
        };
        let cfg = RunConfig::resolve("x", &args, "unit_triangle", (3, 3), "traction").unwrap();
        let names: Vec<String> = cfg.mesh_levels().unwrap().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["crisscross(1)", "crisscross(1)/r1", "crisscross(1)/r2"]);
    }
}
