//! Dirichlet-to-Neumann and Neumann-to-Dirichlet maps and their norms.
//!
//! `DtN f` is the boundary part of `lap_p u_f` for the p-harmonic `u_f` with
//! trace `f`. By the exact Green identity it equals the functional
//! `g -> pairing(u_f; w)` for every `w` with trace `g`. `NtD l` is the trace of
//! the Neumann solution, normalized to `nu`-mean zero.
//!
//! Nonlinear norms are searched through the 0-homogeneous ratio
//! `R(f) = ||DtN f||_* / ||f||_B^{p-1}`: `||DtN|| = sup R`, and since DtN is a
//! bijection of the quotients, `||NtD|| = (inf R)^{-1/(p-1)}`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::besov::{
    besov_energy, besov_kernel, besov_seminorm, dual_norm, dual_norm_from, nu_mean_zero,
    BesovKernel, BoundaryFunction, BoundaryFunctional, DualMethod,
};
use crate::energy::PairEnergy;
use crate::error::{Error, Result};
use crate::graph::{BesovParams, MetricMeasureGraph};
use crate::linalg::{pencil_on_constant_complement, robust_cholesky, solve_mean_zero};
use crate::search::{
    multi_start, random_starts, AscentOptions, NormEstimate, RatioObjective, Scored,
};
use crate::sobolev::{
    extension_norm, extension_ratio, graph_energy, p_laplacian, trace, trace_norm, trace_ratio,
    HarmonicExtension, NormMethod, VertexFunction,
};
use crate::solvers::{
    solve_dirichlet, solve_dirichlet_warm, solve_neumann, SolveResult, SolverConfig,
};

/// Boundary values of `lap_p u`, renormalized to sum exactly to zero.
fn boundary_flux(u: &VertexFunction, graph: &MetricMeasureGraph, p: f64) -> BoundaryFunctional {
    let lap = p_laplacian(u, graph, p);
    BoundaryFunctional::renormalized(graph.boundary().iter().map(|&z| lap.0[z]).collect())
}

pub fn dtn_apply(
    f: &BoundaryFunction,
    graph: &MetricMeasureGraph,
    cfg: &SolverConfig,
) -> Result<BoundaryFunctional> {
    dtn_apply_with(f, graph, cfg).map(|(l, _)| l)
}

/// [`dtn_apply`] together with the Dirichlet solve behind it.
pub fn dtn_apply_with(
    f: &BoundaryFunction,
    graph: &MetricMeasureGraph,
    cfg: &SolverConfig,
) -> Result<(BoundaryFunctional, SolveResult)> {
    let solved = solve_dirichlet(f, graph, cfg)?;
    Ok((boundary_flux(&solved.u, graph, cfg.p), solved))
}

pub fn ntd_apply(
    l: &BoundaryFunctional,
    graph: &MetricMeasureGraph,
    cfg: &SolverConfig,
) -> Result<BoundaryFunction> {
    let solved = solve_neumann(l, graph, cfg)?;
    Ok(nu_mean_zero(
        &trace(&solved.u, graph),
        &graph.boundary_weights(),
    ))
}

/// Worst relative errors seen by [`roundtrip_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundTrip {
    /// `||NtD(DtN f) - f||_B / ||f||_B`
    pub ntd_after_dtn: f64,
    /// `||DtN(NtD l) - l||_* / ||l||_*`
    pub dtn_after_ntd: f64,
}

impl RoundTrip {
    pub fn max(&self) -> f64 {
        self.ntd_after_dtn.max(self.dtn_after_ntd)
    }
}

/// Random `nu`-mean-zero boundary data, deterministic in `seed`.
pub fn random_boundary_function(graph: &MetricMeasureGraph, seed: u64) -> BoundaryFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = (0..graph.num_boundary())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    nu_mean_zero(&BoundaryFunction(f), &graph.boundary_weights())
}

/// Random sum-zero functional, deterministic in `seed`.
pub fn random_functional(graph: &MetricMeasureGraph, seed: u64) -> BoundaryFunctional {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BoundaryFunctional::renormalized(
        (0..graph.num_boundary())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    )
}

/// Compares both compositions of DtN and NtD with the identity on `trials`
/// random inputs each.
pub fn roundtrip_check(
    graph: &MetricMeasureGraph,
    params: BesovParams,
    cfg: &SolverConfig,
    trials: usize,
) -> Result<RoundTrip> {
    let kernel = besov_kernel(graph, params);
    let mut out = RoundTrip {
        ntd_after_dtn: 0.0,
        dtn_after_ntd: 0.0,
    };
    for k in 0..trials as u64 {
        let f = random_boundary_function(graph, cfg.seed.wrapping_add(2 * k));
        let norm = besov_seminorm(&f, &kernel);
        if norm > 0.0 {
            let back = ntd_apply(&dtn_apply(&f, graph, cfg)?, graph, cfg)?;
            let err = besov_seminorm(&back.sub(&f), &kernel) / norm;
            out.ntd_after_dtn = out.ntd_after_dtn.max(err);
        }
        let l = random_functional(graph, cfg.seed.wrapping_add(2 * k + 1));
        let l_norm = dual_norm(&l, &kernel, DualMethod::Auto, cfg)?.value;
        if l_norm > 0.0 {
            let back = dtn_apply(&ntd_apply(&l, graph, cfg)?, graph, cfg)?;
            let err = dual_norm(&back.sub(&l), &kernel, DualMethod::Auto, cfg)?.value / l_norm;
            out.dtn_after_ntd = out.dtn_after_ntd.max(err);
        }
    }
    Ok(out)
}

/// One evaluation of `R(f) = ||DtN f||_* / ||f||_B^{p-1}`.
#[derive(Debug, Clone)]
pub struct DtnWitness {
    pub ratio: f64,
    pub f: BoundaryFunction,
    pub u: VertexFunction,
    pub functional: BoundaryFunctional,
    /// Unit-seminorm maximizer for the dual norm of `functional`.
    pub dual_maximizer: BoundaryFunction,
}

/// Evaluates `R(f)`, or `None` when `f` is constant.
pub fn dtn_ratio(
    f: &BoundaryFunction,
    graph: &MetricMeasureGraph,
    kernel: &BesovKernel,
    cfg: &SolverConfig,
) -> Result<Option<DtnWitness>> {
    let p = kernel.p();
    let e = besov_energy(f, kernel);
    if e.is_nan() || e <= 0.0 {
        return Ok(None);
    }
    let (l, solved) = dtn_apply_with(f, graph, &cfg.with_p(p))?;
    let d = dual_norm(&l, kernel, DualMethod::Auto, cfg)?;
    Ok(Some(DtnWitness {
        ratio: d.value / e.powf((p - 1.0) / p),
        f: f.clone(),
        u: solved.u,
        functional: l,
        dual_maximizer: d.maximizer,
    }))
}

/// `log R` over boundary data, with gradient `J g / ||l||_* - (p-1) flux_B(f) / E_B(f)`
/// where `J` is the linearized DtN map at `f` and `g` the dual maximizer.
struct DtnRatio<'a> {
    graph: &'a MetricMeasureGraph,
    kernel: &'a BesovKernel,
    cfg: SolverConfig,
    grad_energy: PairEnergy,
    boundary_energy: PairEnergy,
}

#[derive(Default)]
struct DtnWorkspace {
    u: Option<Vec<f64>>,
    dual: Option<Vec<f64>>,
}

impl DtnRatio<'_> {
    fn dirichlet(&self, f: &[f64], ws: &mut DtnWorkspace) -> Result<Option<SolveResult>> {
        let f = BoundaryFunction(f.to_vec());
        let attempt = match &ws.u {
            Some(u) => solve_dirichlet_warm(&f, self.graph, &self.cfg, VertexFunction(u.clone())),
            None => solve_dirichlet(&f, self.graph, &self.cfg),
        };
        match attempt {
            Ok(r) => Ok(Some(r)),
            Err(Error::NotConverged(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// `J v` for boundary `v`, with `J = H_bb - H_bi H_ii^{-1} H_ib`.
    fn linearized(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let slope_scale = self.grad_energy.max_slope(u).max(f64::MIN_POSITIVE);
        let h = self.grad_energy.hessian(u, 1e-14 * slope_scale);
        let b = self.graph.boundary();
        let i = self.graph.interior();
        let v = DVector::from_column_slice(v);
        let hbb = h.select_rows(b).select_columns(b);
        let mut jv = &hbb * &v;
        if !i.is_empty() {
            let hib = h.select_rows(i).select_columns(b);
            let hii = h.select_rows(i).select_columns(i);
            let w = robust_cholesky(hii)?.solve(&(&hib * &v));
            jv -= hib.transpose() * w;
        }
        Ok(jv.as_slice().to_vec())
    }
}

impl RatioObjective for DtnRatio<'_> {
    type Workspace = DtnWorkspace;

    fn dim(&self) -> usize {
        self.kernel.len()
    }

    fn workspace(&self) -> DtnWorkspace {
        DtnWorkspace::default()
    }

    fn eval(&self, f: &[f64], ws: &mut DtnWorkspace) -> Result<Scored> {
        let p = self.kernel.p();
        let e = self.boundary_energy.value(f);
        if e.is_nan() || e <= 0.0 {
            return Ok(None);
        }
        let Some(solved) = self.dirichlet(f, ws)? else {
            return Ok(None);
        };
        let l = boundary_flux(&solved.u, self.graph, p);
        if l.is_zero() {
            return Ok(None);
        }
        let dual = match dual_norm_from(
            &l,
            self.kernel,
            DualMethod::Auto,
            &self.cfg,
            ws.dual.as_deref(),
        ) {
            Ok(d) => d,
            Err(Error::Numerical(_)) => return Ok(None),
            Err(err) => return Err(err),
        };
        let (d, raw) = dual;
        if d.value.is_nan() || d.value <= 0.0 {
            return Ok(None);
        }
        let jg = self.linearized(&solved.u.0, &d.maximizer.0)?;
        let mut fb = vec![0.0; f.len()];
        self.boundary_energy.flux(f, &mut fb);
        let grad = jg
            .iter()
            .zip(&fb)
            .map(|(a, b)| a / d.value - (p - 1.0) * b / e)
            .collect();
        ws.u = Some(solved.u.0);
        ws.dual = Some(raw);
        Ok(Some((d.value.ln() - (p - 1.0) / p * e.ln(), grad)))
    }
}

/// At `p = 2`: generalized eigenpairs of `(S Q^+ S, Q)` on the constant
/// complement, where `S` is the DtN matrix and `Q` the Besov form.
fn quadratic_pencil(
    graph: &MetricMeasureGraph,
    kernel: &BesovKernel,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let ext = HarmonicExtension::new(graph)?;
    let s = ext.schur();
    let q = kernel.quadratic_form();
    let m = s.nrows();
    let mut x = DMatrix::zeros(m, m);
    for j in 0..m {
        let col = solve_mean_zero(&q, &s.column(j).into_owned())?;
        x.set_column(j, &col);
    }
    let a = s * x;
    let a = (&a + a.transpose()) * 0.5;
    pencil_on_constant_complement(&a, &q)
}

fn search_ratio(
    graph: &MetricMeasureGraph,
    kernel: &BesovKernel,
    cfg: &SolverConfig,
    maximize: bool,
) -> Result<(Scored, usize)> {
    let p = kernel.p();
    let (vals, vecs) = quadratic_pencil(graph, kernel)?;
    let pick = if maximize { vals.len() - 1 } else { 0 };
    let mut starts = vec![vecs.column(pick).iter().copied().collect::<Vec<f64>>()];
    starts.extend(random_starts(kernel.len(), cfg.restarts, cfg.seed));
    let obj = DtnRatio {
        graph,
        kernel,
        cfg: cfg.with_p(p),
        grad_energy: graph_energy(graph, p),
        boundary_energy: kernel.pair_energy(),
    };
    let opts = AscentOptions {
        maximize,
        ..Default::default()
    };
    Ok((multi_start(&obj, &starts, opts)?, starts.len()))
}

/// `sup ||DtN f||_*` over `||f||_B = 1`. The witness is a maximizing `f`.
pub fn dtn_norm(
    graph: &MetricMeasureGraph,
    params: BesovParams,
    method: NormMethod,
    cfg: &SolverConfig,
) -> Result<NormEstimate> {
    let kernel = besov_kernel(graph, params);
    if method.use_eigen(params.p)? {
        let (vals, vecs) = quadratic_pencil(graph, &kernel)?;
        let top = vals.len() - 1;
        return Ok(NormEstimate {
            value: vals[top].max(0.0).sqrt(),
            witness: vecs.column(top).iter().copied().collect(),
            certified: true,
            restarts: 0,
        });
    }
    let (found, restarts) = search_ratio(graph, &kernel, cfg, true)?;
    let (log_r, witness) = found.unwrap_or((f64::NEG_INFINITY, Vec::new()));
    Ok(NormEstimate {
        value: log_r.exp(),
        witness,
        certified: false,
        restarts,
    })
}

/// `sup ||NtD l||_B` over `||l||_* = 1`. The witness is the boundary datum
/// `f` whose DtN image attains it (so `l = DtN f / ||DtN f||_*`).
pub fn ntd_norm(
    graph: &MetricMeasureGraph,
    params: BesovParams,
    method: NormMethod,
    cfg: &SolverConfig,
) -> Result<NormEstimate> {
    let p = params.p;
    let kernel = besov_kernel(graph, params);
    if method.use_eigen(p)? {
        let (vals, vecs) = quadratic_pencil(graph, &kernel)?;
        if vals[0].is_nan() || vals[0] <= 0.0 {
            return Err(Error::Numerical(
                "DtN map is singular off the constants".into(),
            ));
        }
        return Ok(NormEstimate {
            value: 1.0 / vals[0].sqrt(),
            witness: vecs.column(0).iter().copied().collect(),
            certified: true,
            restarts: 0,
        });
    }
    let (found, restarts) = search_ratio(graph, &kernel, cfg, false)?;
    let (log_r, witness) = found.unwrap_or((f64::INFINITY, Vec::new()));
    Ok(NormEstimate {
        value: (-log_r / (p - 1.0)).exp(),
        witness,
        certified: false,
        restarts,
    })
}

/// `[(2p)^{1/(p-1)} + 2(p-1)/p]^{-1}`
pub fn c_p(p: f64) -> f64 {
    1.0 / ntd_constant(p)
}

/// `(2p)^{1/(p-1)} + 2(p-1)/p`, the factor in the NtD bound.
pub fn ntd_constant(p: f64) -> f64 {
    (2.0 * p).powf(1.0 / (p - 1.0)) + 2.0 * (p - 1.0) / p
}

/// Relative slack for the asserted inequalities.
pub const NORM_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEntry {
    pub value: f64,
    /// Exact value rather than a best-found lower bound.
    pub certified: bool,
    pub restarts: usize,
    /// Raised by ratios of witnesses found by the other searches.
    pub from_witnesses: bool,
}

impl NormEntry {
    fn from_estimate(e: &NormEstimate) -> Self {
        Self {
            value: e.value,
            certified: e.certified,
            restarts: e.restarts,
            from_witnesses: false,
        }
    }

    fn absorb(&mut self, v: Option<f64>) {
        if self.certified {
            return;
        }
        if let Some(v) = v {
            if v > self.value {
                self.value = v;
                self.from_witnesses = true;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub p: f64,
    pub theta: f64,
    pub tr_norm: NormEntry,
    pub ext_norm: NormEntry,
    pub dtn_norm: NormEntry,
    pub ntd_norm: NormEntry,
    pub c_p: f64,
    /// `||E||^p`
    pub upper_bound: f64,
    pub upper_ok: bool,
    /// `c_p ||Tr||^{p/(1-p)}`
    pub lower_bound: f64,
    pub lower_gap: f64,
    /// Reported only.
    pub lower_ok: bool,
    /// `[(2p)^{1/(p-1)} + 2(p-1)/p] ||Tr||^{p/(p-1)}`
    pub ntd_bound: f64,
    pub ntd_ok: bool,
    /// `||DtN f||_* <= ||E||^p ||f||_B^{p-1}` at every witness.
    pub lf_bound_ok: bool,
    pub roundtrip_err: f64,
}

/// Round-trip trials used by [`bounds_report`].
pub const REPORT_ROUNDTRIP_TRIALS: usize = 4;

/// Computes all four norms and checks the inequalities between them.
///
/// Search-based norms are lower bounds; each is raised by the ratios that the
/// other searches' witnesses attain (for instance the trace ratio of the
/// p-harmonic extension of the DtN witness), which keeps the upper-bound
/// checks meaningful when a search stops short of the supremum.
pub fn bounds_report(
    graph: &MetricMeasureGraph,
    params: BesovParams,
    cfg: &SolverConfig,
) -> Result<NormReport> {
    let p = params.p;
    let cfg = cfg.with_p(p);
    let kernel = besov_kernel(graph, params);
    let ext = HarmonicExtension::new(graph)?;
    let tr = trace_norm(graph, params, NormMethod::Auto, &cfg)?;
    let ex = extension_norm(graph, params, NormMethod::Auto, &cfg)?;
    let dtn = dtn_norm(graph, params, NormMethod::Auto, &cfg)?;
    let ntd = ntd_norm(graph, params, NormMethod::Auto, &cfg)?;

    let mut tr_norm = NormEntry::from_estimate(&tr);
    let mut ext_norm = NormEntry::from_estimate(&ex);
    let mut witnesses = Vec::new();
    for w in [&dtn.witness, &ntd.witness] {
        if w.len() == kernel.len() {
            if let Some(found) = dtn_ratio(&BoundaryFunction(w.clone()), graph, &kernel, &cfg)? {
                tr_norm.absorb(trace_ratio(&found.u, graph, &kernel));
                ext_norm.absorb(extension_ratio(&found.f, graph, &ext, &kernel));
                ext_norm.absorb(extension_ratio(&found.dual_maximizer, graph, &ext, &kernel));
                witnesses.push(found.ratio);
            }
        }
    }

    let dtn_norm = NormEntry::from_estimate(&dtn);
    let ntd_norm = NormEntry::from_estimate(&ntd);

    let upper_bound = ext_norm.value.powf(p);
    let lower_bound = c_p(p) * tr_norm.value.powf(p / (1.0 - p));
    let ntd_bound = ntd_constant(p) * tr_norm.value.powf(p / (p - 1.0));
    let roundtrip_err = roundtrip_check(graph, params, &cfg, REPORT_ROUNDTRIP_TRIALS)?.max();
    Ok(NormReport {
        p,
        theta: params.theta,
        c_p: c_p(p),
        upper_bound,
        upper_ok: dtn_norm.value <= upper_bound * (1.0 + NORM_SLACK),
        lower_bound,
        lower_gap: dtn_norm.value - lower_bound,
        lower_ok: dtn_norm.value >= lower_bound * (1.0 - NORM_SLACK),
        ntd_bound,
        ntd_ok: ntd_norm.value <= ntd_bound * (1.0 + NORM_SLACK),
        lf_bound_ok: witnesses
            .iter()
            .all(|&r| r <= upper_bound * (1.0 + NORM_SLACK)),
        roundtrip_err,
        tr_norm,
        ext_norm,
        dtn_norm,
        ntd_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{p3, path};

    fn f01() -> BoundaryFunction {
        BoundaryFunction(vec![0.0, 1.0])
    }

    #[test]
    fn p3_dtn_closed_form() {
        let g = p3();
        for p in [1.5, 2.0, 3.0] {
            let l = dtn_apply(&f01(), &g, &SolverConfig::new(p)).unwrap();
            let h = 0.5f64.powf(p - 1.0);
            assert!((l.weights()[0] + h).abs() < 1e-10, "{p}: {:?}", l.weights());
            assert!((l.weights()[1] - h).abs() < 1e-10);
        }
        let l = dtn_apply(
            &BoundaryFunction(vec![3.0, 3.0]),
            &g,
            &SolverConfig::new(2.5),
        )
        .unwrap();
        assert!(l.is_zero());
    }

    #[test]
    fn p3_ntd_closed_form() {
        let g = p3();
        let cfg = SolverConfig::new(2.0);
        let l = BoundaryFunctional::new(vec![-0.5, 0.5]).unwrap();
        let f = ntd_apply(&l, &g, &cfg).unwrap();
        assert!((f.0[0] + 0.5).abs() < 1e-12 && (f.0[1] - 0.5).abs() < 1e-12);
        let z = ntd_apply(&BoundaryFunctional::zero(2), &g, &cfg).unwrap();
        assert_eq!(z.0, vec![0.0, 0.0]);
    }

    #[test]
    fn p3_norms() {
        let g = p3();
        let params = BesovParams::from_theta(2.0, 0.5).unwrap();
        let cfg = SolverConfig::new(2.0);
        let d = dtn_norm(&g, params, NormMethod::Auto, &cfg).unwrap();
        let n = ntd_norm(&g, params, NormMethod::Auto, &cfg).unwrap();
        assert!(d.certified && (d.value - 1.0).abs() < 1e-12);
        assert!(n.certified && (n.value - 1.0).abs() < 1e-12);
        // The quotient is one-dimensional, so the search has nothing to miss.
        let ds = dtn_norm(&g, params, NormMethod::Search, &cfg).unwrap();
        assert!((ds.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn c_p_values() {
        assert!((c_p(2.0) - 0.2).abs() < 1e-15);
        assert!((c_p(3.0) - 1.0 / (6f64.sqrt() + 4.0 / 3.0)).abs() < 1e-15);
        assert!((c_p(3.0) - 0.26436).abs() < 1e-5);
    }

    #[test]
    fn search_matches_eigen_at_p2() {
        let g = path(6);
        let params = BesovParams::from_theta(2.0, 0.5).unwrap();
        let mut cfg = SolverConfig::new(2.0);
        cfg.restarts = 4;
        for (exact, found) in [
            (
                dtn_norm(&g, params, NormMethod::Eigen, &cfg),
                dtn_norm(&g, params, NormMethod::Search, &cfg),
            ),
            (
                ntd_norm(&g, params, NormMethod::Eigen, &cfg),
                ntd_norm(&g, params, NormMethod::Search, &cfg),
            ),
        ] {
            let (exact, found) = (exact.unwrap().value, found.unwrap().value);
            assert!((exact - found).abs() < 1e-8 * exact, "{exact} vs {found}");
        }
    }

    #[test]
    fn p3_report() {
        let g = p3();
        let params = BesovParams::from_theta(2.0, 0.5).unwrap();
        let r = bounds_report(&g, params, &SolverConfig::new(2.0)).unwrap();
        assert!(r.upper_ok && r.ntd_ok && r.lf_bound_ok);
        assert_eq!(r.c_p, 0.2);
        assert!((r.lower_gap - 0.8).abs() < 1e-12);
        assert!(r.roundtrip_err < 1e-8);
    }

    #[test]
    fn roundtrip_on_path() {
        let g = path(5);
        for p in [1.5, 3.0] {
            let params = BesovParams::from_codimension(p, 1.0).unwrap();
            let rt = roundtrip_check(&g, params, &SolverConfig::new(p), 3).unwrap();
            assert!(rt.max() < 1e-6, "{p}: {rt:?}");
        }
    }
}
