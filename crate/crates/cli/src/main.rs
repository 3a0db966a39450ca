use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pdtn_core::io::{
    boundary_function_csv, functional_csv, read_boundary_function, read_functional, series_csv,
    to_json_line, to_json_string, vertex_function_csv,
};
use pdtn_core::{
    bounds_report, diagnose, dtn_apply, generate, ntd_apply, roundtrip_check, solve_dirichlet,
    solve_neumann, validate, BesovParams, DomainKind, Error, FileParams, GraphFile,
    MetricMeasureGraph, SolveResult, SolverConfig,
};

/// Dirichlet-to-Neumann maps for the p-Laplacian on weighted graphs.
#[derive(Parser, Debug)]
#[command(name = "pdtn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args, Debug, Clone)]
struct Opts {
    /// Graph file (JSON).
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    /// Function or functional file (CSV).
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Exponent p; overrides the graph file.
    #[arg(long, global = true)]
    p: Option<f64>,
    /// Besov smoothness theta; overrides the graph file.
    #[arg(long, global = true, conflicts_with = "codim")]
    theta: Option<f64>,
    /// Boundary codimension Theta, with theta = 1 - Theta/p.
    #[arg(long = "Theta", id = "codim", global = true)]
    codim: Option<f64>,
    /// Relative Euler-Lagrange residual tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Random restarts for norm searches.
    #[arg(long, global = true)]
    restarts: Option<usize>,
    /// Shift functional weights to sum to zero instead of rejecting them.
    #[arg(long, global = true)]
    renormalize: bool,
    /// Main output (CSV or JSON); standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write the JSON summary of a solve here.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// Write an x,y CSV series for plotting.
    #[arg(long, global = true)]
    emit_plot_data: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a graph file against the structural invariants.
    Validate,
    /// Doubling constants, codimension fit and Poincare constant.
    Diagnose,
    /// p-harmonic extension of boundary data (`id,value`).
    Dirichlet,
    /// Neumann solution for a boundary functional (`id,weight`).
    Neumann,
    /// Dirichlet-to-Neumann map of boundary data.
    Dtn,
    /// Neumann-to-Dirichlet map of a boundary functional.
    Ntd,
    /// Trace, extension, DtN and NtD norms with the inequality checks.
    Norms,
    /// Round-trip errors of DtN and NtD against the identity.
    Roundtrip {
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
    /// Generate a graph file.
    Gen {
        /// path, grid, lshape or snowflake
        kind: DomainKind,
        /// Vertex count (path), side length (grid, lshape) or level (snowflake).
        size: usize,
    },
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: &'a str,
    message: String,
}

#[derive(Serialize)]
struct SolveSummary {
    energy: f64,
    objective: f64,
    el_residual: f64,
    scale: f64,
    iterations: usize,
    converged: bool,
}

impl From<&SolveResult> for SolveSummary {
    fn from(r: &SolveResult) -> Self {
        Self {
            energy: r.energy,
            objective: r.objective,
            el_residual: r.el_residual,
            scale: r.scale,
            iterations: r.iterations,
            converged: r.converged,
        }
    }
}

#[derive(Serialize)]
struct ValidateSummary {
    passed: bool,
    violations: Vec<String>,
    vertices: usize,
    edges: usize,
}

#[derive(Serialize)]
struct RoundTripSummary {
    trials: usize,
    ntd_after_dtn: f64,
    dtn_after_ntd: f64,
}

fn fail(kind: &str, message: String) -> ExitCode {
    let line = to_json_line(&ErrorLine {
        error: kind,
        message,
    })
    .unwrap_or_else(|_| format!("{{\"error\":\"{kind}\"}}"));
    eprintln!("{line}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            return fail("usage", e.render().to_string().trim_end().to_string());
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            let code = if e.is_input_error() { 1 } else { 2 };
            let line = to_json_line(&ErrorLine {
                error: e.kind(),
                message: e.to_string(),
            })
            .unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", e.kind()));
            eprintln!("{line}");
            ExitCode::from(code)
        }
    }
}

fn write_to(path: Option<&Path>, text: &str) -> pdtn_core::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

struct Loaded {
    graph: MetricMeasureGraph,
    params: BesovParams,
    cfg: SolverConfig,
}

impl Opts {
    fn graph_file(&self) -> pdtn_core::Result<GraphFile> {
        let path = self
            .graph
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("--graph is required".into()))?;
        GraphFile::read(path)
    }

    fn file_params(&self, base: Option<&FileParams>) -> FileParams {
        let p = self.p.or(base.map(|b| b.p)).unwrap_or(2.0);
        if self.theta.is_some() || self.codim.is_some() {
            FileParams {
                p,
                theta: self.theta,
                codim: self.codim,
            }
        } else {
            match base {
                Some(b) => FileParams { p, ..b.clone() },
                None => FileParams {
                    p,
                    theta: None,
                    codim: Some(1.0),
                },
            }
        }
    }

    fn load(&self) -> pdtn_core::Result<Loaded> {
        let file = self.graph_file()?;
        let graph = file.graph()?;
        let params = self.file_params(Some(&file.params)).besov()?;
        let mut cfg = SolverConfig::new(params.p);
        if let Some(t) = self.tol {
            cfg.grad_tol = t;
        }
        if let Some(m) = self.max_iter {
            cfg.max_iter = m;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.restarts {
            cfg.restarts = r;
        }
        cfg.validate()?;
        Ok(Loaded { graph, params, cfg })
    }

    fn data(&self) -> pdtn_core::Result<std::fs::File> {
        let path = self
            .data
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("--data is required".into()))?;
        Ok(std::fs::File::open(path)?)
    }

    fn plot(&self, points: &[(f64, f64)]) -> pdtn_core::Result<()> {
        if let Some(path) = &self.emit_plot_data {
            std::fs::write(path, series_csv(points)?)?;
        }
        Ok(())
    }

    /// CSV goes to `--out` (or stdout); the JSON summary then goes to stdout
    /// when the CSV went to a file, and to `--report` when given.
    fn emit_solution(&self, csv: &str, summary: &impl Serialize) -> pdtn_core::Result<()> {
        write_to(self.out.as_deref(), csv)?;
        let json = to_json_string(summary)?;
        if self.out.is_some() {
            write_to(None, &json)?;
        }
        if let Some(path) = &self.report {
            std::fs::write(path, &json)?;
        }
        Ok(())
    }
}

fn trace_points(r: &SolveResult) -> Vec<(f64, f64)> {
    r.objective_trace
        .iter()
        .enumerate()
        .map(|(k, v)| (k as f64, *v))
        .collect()
}

fn run(cli: Cli) -> pdtn_core::Result<ExitCode> {
    let o = &cli.opts;
    match cli.command {
        Command::Validate => {
            let file = o.graph_file()?;
            let report = validate(&file.vertices, &file.edges);
            let params_error = o.file_params(Some(&file.params)).besov().err();
            let mut violations = report.violations;
            if let Some(e) = params_error {
                violations.push(e.to_string());
            }
            let summary = ValidateSummary {
                passed: violations.is_empty(),
                violations,
                vertices: file.vertices.len(),
                edges: file.edges.len(),
            };
            write_to(o.out.as_deref(), &to_json_string(&summary)?)?;
            Ok(if summary.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Diagnose => {
            let l = o.load()?;
            let report = diagnose(&l.graph, l.params.p, &l.cfg)?;
            if let Some(fit) = &report.codimension {
                let mut points: Vec<(f64, f64)> = fit
                    .samples
                    .iter()
                    .map(|s| (s.radius, s.log_ratio))
                    .collect();
                points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
                o.plot(&points)?;
            } else {
                o.plot(&[])?;
            }
            write_to(o.out.as_deref(), &to_json_string(&report)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Dirichlet => {
            let l = o.load()?;
            let f = read_boundary_function(o.data()?, &l.graph)?;
            let r = solve_dirichlet(&f, &l.graph, &l.cfg)?;
            o.plot(&trace_points(&r))?;
            o.emit_solution(
                &vertex_function_csv(&r.u, &l.graph)?,
                &SolveSummary::from(&r),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Neumann => {
            let l = o.load()?;
            let ell = read_functional(o.data()?, &l.graph, o.renormalize)?;
            let r = solve_neumann(&ell, &l.graph, &l.cfg)?;
            o.plot(&trace_points(&r))?;
            o.emit_solution(
                &vertex_function_csv(&r.u, &l.graph)?,
                &SolveSummary::from(&r),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Dtn => {
            let l = o.load()?;
            let f = read_boundary_function(o.data()?, &l.graph)?;
            let ell = dtn_apply(&f, &l.graph, &l.cfg)?;
            write_to(o.out.as_deref(), &functional_csv(&ell, &l.graph)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Ntd => {
            let l = o.load()?;
            let ell = read_functional(o.data()?, &l.graph, o.renormalize)?;
            let g = ntd_apply(&ell, &l.graph, &l.cfg)?;
            write_to(o.out.as_deref(), &boundary_function_csv(&g, &l.graph)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Norms => {
            let l = o.load()?;
            let report = bounds_report(&l.graph, l.params, &l.cfg)?;
            write_to(o.out.as_deref(), &to_json_string(&report)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Roundtrip { trials } => {
            let l = o.load()?;
            let rt = roundtrip_check(&l.graph, l.params, &l.cfg, trials)?;
            let summary = RoundTripSummary {
                trials,
                ntd_after_dtn: rt.ntd_after_dtn,
                dtn_after_ntd: rt.dtn_after_ntd,
            };
            write_to(o.out.as_deref(), &to_json_string(&summary)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Gen { kind, size } => {
            let params = o.file_params(None);
            params.besov()?;
            let file = GraphFile::from_domain(generate(kind, size)?, params);
            write_to(o.out.as_deref(), &file.to_json()?)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
