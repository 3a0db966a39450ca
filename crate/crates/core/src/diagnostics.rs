//! Standing-assumption diagnostics: doubling constants, the codimension of
//! `nu` relative to `mu`, and the (p, p)-Poincaré constant.

use serde::{Deserialize, Serialize};

use crate::energy::{signed_power, PairEnergy};
use crate::error::{Error, Result};
use crate::graph::{closed_radius, Measure, MetricMeasureGraph};
use crate::linalg::pencil_on_constant_complement;
use crate::search::{
    multi_start, random_starts, AscentOptions, NormEstimate, RatioObjective, Scored,
};
use crate::sobolev::{graph_energy, stiffness, NormMethod};
use crate::solvers::SolverConfig;

fn radii_from(graph: &MetricMeasureGraph, center: usize, max: f64) -> Vec<f64> {
    let mut r: Vec<f64> = graph
        .distances()
        .row(center)
        .iter()
        .copied()
        .filter(|&d| d > 0.0 && d <= max)
        .collect();
    r.sort_by(f64::total_cmp);
    r.dedup();
    r
}

/// Largest `ball(x, 2r) / ball(x, r)` over radii realized as distances from `center`.
/// Balls of zero measure are skipped; returns `None` if no ratio is defined.
pub fn doubling_constant_at(
    graph: &MetricMeasureGraph,
    center: usize,
    which: Measure,
) -> Option<f64> {
    let diam = graph.diameter();
    radii_from(graph, center, closed_radius(diam))
        .into_iter()
        .filter_map(|r| {
            let small = graph.ball_measure(center, r, which);
            (small > 0.0).then(|| graph.ball_measure(center, 2.0 * r, which) / small)
        })
        .reduce(f64::max)
}

/// Doubling constant of `mu` or `nu` over every center and realized radius.
pub fn doubling_constant(graph: &MetricMeasureGraph, which: Measure) -> f64 {
    (0..graph.num_vertices())
        .filter_map(|x| doubling_constant_at(graph, x, which))
        .fold(1.0, f64::max)
}

/// One sample of the codimension scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodimensionSample {
    pub center: usize,
    pub radius: f64,
    /// `log nu(B) - log mu(B)`.
    pub log_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodimensionFit {
    /// Fitted exponent in `nu(B(x,r)) ~ mu(B(x,r)) / r^Theta`.
    pub theta_hat: f64,
    /// `exp(max |residual|)`, the smallest constant making the fitted two-sided bound hold.
    pub c_hat: f64,
    pub intercept: f64,
    pub samples: Vec<CodimensionSample>,
}

/// Least-squares fit of `log nu(B) - log mu(B) = c - Theta log r` over boundary
/// centers and realized radii in `(0, 2 diam(boundary))`.
pub fn codimension_fit(graph: &MetricMeasureGraph) -> Result<CodimensionFit> {
    codimension_fit_on(graph, graph.boundary(), None)
}

/// As [`codimension_fit`] over chosen centers, and optionally a fixed radius
/// grid instead of the realized distances.
pub fn codimension_fit_on(
    graph: &MetricMeasureGraph,
    centers: &[usize],
    radii: Option<&[f64]>,
) -> Result<CodimensionFit> {
    if graph.num_boundary() < 2 {
        return Err(Error::DegenerateGrid(
            "need at least two boundary vertices".into(),
        ));
    }
    let limit = 2.0 * graph.boundary_diameter();
    let mut samples = Vec::new();
    for &x in centers {
        let grid = match radii {
            Some(r) => r.to_vec(),
            None => radii_from(graph, x, limit)
                .into_iter()
                .filter(|&r| r < limit)
                .collect(),
        };
        for r in grid {
            let nu = graph.ball_measure(x, r, Measure::Nu);
            let mu = graph.ball_measure(x, r, Measure::Mu);
            if nu > 0.0 && mu > 0.0 {
                samples.push(CodimensionSample {
                    center: x,
                    radius: r,
                    log_ratio: nu.ln() - mu.ln(),
                });
            }
        }
    }
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.radius).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::DegenerateGrid(format!(
            "{} distinct usable radii; need at least two",
            distinct.len()
        )));
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.radius.ln()).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.log_ratio).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for s in &samples {
        let dx = s.radius.ln() - mx;
        sxy += dx * (s.log_ratio - my);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_res = samples
        .iter()
        .map(|s| (s.log_ratio - intercept - slope * s.radius.ln()).abs())
        .fold(0.0, f64::max);
    samples.sort_by(|a, b| a.radius.total_cmp(&b.radius).then(a.center.cmp(&b.center)));
    Ok(CodimensionFit {
        theta_hat: -slope,
        c_hat: max_res.exp(),
        intercept,
        samples,
    })
}

/// `p * log` of `||u - mean(u)||_{L^p(mu)} / ||grad u||_p`.
struct PoincareRatio {
    mu: Vec<f64>,
    total: f64,
    energy: PairEnergy,
}

impl RatioObjective for PoincareRatio {
    type Workspace = ();

    fn dim(&self) -> usize {
        self.mu.len()
    }

    fn workspace(&self) {}

    fn eval(&self, u: &[f64], _: &mut ()) -> Result<Scored> {
        let p = self.energy.p;
        let mean = u.iter().zip(&self.mu).map(|(v, m)| v * m).sum::<f64>() / self.total;
        let s: Vec<f64> = u.iter().map(|v| signed_power(v - mean, p)).collect();
        let num: f64 = u
            .iter()
            .zip(&self.mu)
            .map(|(v, m)| m * (v - mean).abs().powf(p))
            .sum();
        let den = self.energy.value(u);
        if !(num > 0.0 && den > 0.0) {
            return Ok(None);
        }
        let ms: f64 = s.iter().zip(&self.mu).map(|(a, m)| a * m).sum();
        let mut flux = vec![0.0; u.len()];
        self.energy.flux(u, &mut flux);
        let g = (0..u.len())
            .map(|y| {
                p * (self.mu[y] * s[y] - self.mu[y] / self.total * ms) / num - p * flux[y] / den
            })
            .collect();
        Ok(Some((num.ln() - den.ln(), g)))
    }
}

/// Best constant in `||u - u_mean||_{L^p(mu)} <= C ||grad u||_p`, means and
/// norms taken over interior vertices.
pub fn poincare_constant(
    graph: &MetricMeasureGraph,
    p: f64,
    method: NormMethod,
    cfg: &SolverConfig,
) -> Result<NormEstimate> {
    let n = graph.num_vertices();
    let mu = graph.interior_weights();
    let total: f64 = mu.iter().sum();
    if graph.num_interior() == 1 {
        // The mean-deviation on a single interior vertex vanishes identically.
        return Ok(NormEstimate {
            value: 0.0,
            witness: vec![0.0; n],
            certified: true,
            restarts: 0,
        });
    }
    let k = stiffness(graph);
    // Centered mass form: diag(mu) - mu mu^T / total.
    let mut m = nalgebra::DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = if i == j { mu[i] } else { 0.0 } - mu[i] * mu[j] / total;
        }
    }
    let (vals, vecs) = pencil_on_constant_complement(&m, &k)?;
    let top: Vec<f64> = vecs.column(vals.len() - 1).iter().copied().collect();
    if method.use_eigen(p)? {
        return Ok(NormEstimate {
            value: vals[vals.len() - 1].max(0.0).sqrt(),
            witness: top,
            certified: true,
            restarts: 0,
        });
    }
    let obj = PoincareRatio {
        mu,
        total,
        energy: graph_energy(graph, p),
    };
    let mut starts = vec![top];
    starts.extend(random_starts(n, cfg.restarts, cfg.seed));
    let found = multi_start(&obj, &starts, AscentOptions::default())?;
    let (log_value, witness) = found.unwrap_or((f64::NEG_INFINITY, vec![0.0; n]));
    Ok(NormEstimate {
        value: (log_value / p).exp(),
        witness,
        certified: false,
        restarts: starts.len(),
    })
}

/// Everything `diagnose` reports for one graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub doubling_mu: f64,
    pub doubling_nu: f64,
    pub codimension: Option<CodimensionFit>,
    pub codimension_error: Option<String>,
    pub poincare: NormEstimate,
}

pub fn diagnose(
    graph: &MetricMeasureGraph,
    p: f64,
    cfg: &SolverConfig,
) -> Result<DiagnosticsReport> {
    let (codimension, codimension_error) = match codimension_fit(graph) {
        Ok(fit) => (Some(fit), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(DiagnosticsReport {
        doubling_mu: doubling_constant(graph, Measure::Mu),
        doubling_nu: doubling_constant(graph, Measure::Nu),
        codimension,
        codimension_error,
        poincare: poincare_constant(graph, p, NormMethod::Auto, cfg)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{p3, path};
    use crate::graph::{EdgeRecord, VertexRecord};

    #[test]
    fn p3_doubling() {
        let g = p3();
        let mu = doubling_constant(&g, Measure::Mu);
        let nu = doubling_constant(&g, Measure::Nu);
        // nu: B(a,1) = {a,b} carries nu = 1, B(a,2) carries 2.
        assert_eq!(nu, 2.0);
        assert_eq!(mu, 1.0);
        assert!((1.0..=3.0).contains(&nu));
    }

    #[test]
    fn cycle_doubling_is_center_independent() {
        let n = 8;
        let mut v: Vec<VertexRecord> = (0..n)
            .map(|i| VertexRecord::boundary(format!("z{i}"), 1.0))
            .collect();
        v.push(VertexRecord::interior("hub", 1.0));
        let mut e: Vec<EdgeRecord> = (0..n)
            .map(|i| EdgeRecord::new(format!("z{i}"), format!("z{}", (i + 1) % n), 1.0, 1.0))
            .collect();
        e.extend((0..n).map(|i| EdgeRecord::new(format!("z{i}"), "hub", 1.5, 1.0)));
        let g = MetricMeasureGraph::new(&v, &e).unwrap();
        let values: Vec<f64> = (0..n)
            .map(|x| doubling_constant_at(&g, x, Measure::Nu).unwrap())
            .collect();
        assert!(values.iter().all(|&c| c == values[0]), "{values:?}");
        assert!(doubling_constant(&g, Measure::Nu) >= 1.0);
    }

    #[test]
    fn single_boundary_vertex_is_degenerate() {
        let g = p3();
        assert!(codimension_fit_on(&g, &[0], Some(&[1.0])).is_err());
    }

    #[test]
    fn p5_poincare_constant() {
        // Interior b, c, d: ratio reduces to the path Laplacian on three nodes,
        // smallest nonzero eigenvalue 1, so C_P = 1.
        let g = path(5);
        let cfg = SolverConfig::new(2.0);
        let c = poincare_constant(&g, 2.0, NormMethod::Auto, &cfg).unwrap();
        assert!((c.value - 1.0).abs() < 1e-12, "{}", c.value);
        let s = poincare_constant(&g, 2.0, NormMethod::Search, &cfg).unwrap();
        assert!((s.value - 1.0).abs() < 1e-8, "{}", s.value);
        assert_eq!(
            poincare_constant(&p3(), 2.0, NormMethod::Auto, &cfg)
                .unwrap()
                .value,
            0.0
        );
    }

    #[test]
    fn poincare_scales_with_length() {
        let g = path(5);
        let cfg = SolverConfig::new(2.0);
        let base = poincare_constant(&g, 2.0, NormMethod::Auto, &cfg)
            .unwrap()
            .value;
        let scaled = g.rescaled(3.0, 2.0).unwrap();
        let c = poincare_constant(&scaled, 2.0, NormMethod::Auto, &cfg)
            .unwrap()
            .value;
        assert!((c - 3.0 * base).abs() < 1e-12);
        let c3 = poincare_constant(&scaled, 3.0, NormMethod::Search, &cfg.with_p(3.0))
            .unwrap()
            .value;
        let b3 = poincare_constant(&g, 3.0, NormMethod::Search, &cfg.with_p(3.0))
            .unwrap()
            .value;
        assert!((c3 - 3.0 * b3).abs() < 1e-8 * b3);
    }

    #[test]
    fn witness_is_a_lower_bound() {
        let g = path(6);
        let cfg = SolverConfig::new(2.5);
        let c = poincare_constant(&g, 2.5, NormMethod::Search, &cfg).unwrap();
        let obj = PoincareRatio {
            mu: g.interior_weights(),
            total: g.total_measure(Measure::Mu),
            energy: graph_energy(&g, 2.5),
        };
        for w in random_starts(6, 5, 3) {
            let (lv, _) = obj.eval(&w, &mut ()).unwrap().unwrap();
            assert!((lv / 2.5).exp() <= c.value + 1e-12);
        }
    }
}
