//! Homogeneous Besov energy of boundary functions and the dual norm of
//! boundary functionals.
//!
//! For boundary vertices `x != y` the kernel weight is
//!
//! ```text
//! w(x, y) = nu_x nu_y / ( d(x, y)^{theta p} * nu(B(y, d(x, y))) )
//! ```
//!
//! with closed balls, and the energy of `f` is `sum_{x != y} |f(y) - f(x)|^p w(x, y)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::energy::{minimize, minimize_warm, PairEnergy, PairTerm, Problem};
use crate::error::{Error, Result};
use crate::graph::{BesovParams, Measure, MetricMeasureGraph};
use crate::linalg::{laplacian, solve_mean_zero};
use crate::solvers::SolverConfig;

/// Real values on the boundary, indexed by boundary slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFunction(pub Vec<f64>);

impl BoundaryFunction {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self(self.0.iter().map(|v| v * t).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
}

/// Weights `l_z` of a boundary functional `g -> sum_z l_z g_z`.
///
/// Always annihilates constants: the weights sum to zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryFunctional(Vec<f64>);

/// Relative tolerance on `sum_z l_z` accepted without renormalization.
pub const SUM_ZERO_TOL: f64 = 1e-12;

impl BoundaryFunctional {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        let scale = weights.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        if !sum.is_finite() || sum.abs() > SUM_ZERO_TOL * scale {
            return Err(Error::NotSumZero { sum, scale });
        }
        Ok(Self(weights))
    }

    /// Subtracts the mean so the weights sum to zero.
    pub fn renormalized(mut weights: Vec<f64>) -> Self {
        if !weights.is_empty() {
            let mean = weights.iter().sum::<f64>() / weights.len() as f64;
            weights.iter_mut().for_each(|v| *v -= mean);
        }
        Self(weights)
    }

    pub fn zero(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn apply(&self, g: &BoundaryFunction) -> f64 {
        self.0.iter().zip(&g.0).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self(self.0.iter().map(|v| v * t).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::renormalized(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Precomputed pair weights over ordered distinct boundary pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct BesovKernel {
    params: BesovParams,
    m: usize,
    /// Row-major `w(x, y)` in boundary-slot coordinates; zero diagonal.
    weights: Vec<f64>,
    nu: Vec<f64>,
}

pub fn besov_kernel(graph: &MetricMeasureGraph, params: BesovParams) -> BesovKernel {
    let boundary = graph.boundary();
    let m = boundary.len();
    let nu = graph.boundary_weights();
    let exponent = params.theta * params.p;
    let mut weights = vec![0.0; m * m];
    for (i, &x) in boundary.iter().enumerate() {
        for (j, &y) in boundary.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = graph.distance(x, y);
            let ball = graph.ball_measure(y, d, Measure::Nu);
            weights[i * m + j] = nu[i] * nu[j] / (d.powf(exponent) * ball);
        }
    }
    BesovKernel {
        params,
        m,
        weights,
        nu,
    }
}

impl BesovKernel {
    pub fn params(&self) -> BesovParams {
        self.params
    }

    pub fn p(&self) -> f64 {
        self.params.p
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// `w(x, y)` for boundary slots `x != y`.
    pub fn weight(&self, x: usize, y: usize) -> f64 {
        self.weights[x * self.m + y]
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    /// The energy as a sum over unordered pairs, `coef = w(x,y) + w(y,x)`.
    pub fn pair_energy(&self) -> PairEnergy {
        let mut terms = Vec::with_capacity(self.m * (self.m.saturating_sub(1)) / 2);
        for x in 0..self.m {
            for y in x + 1..self.m {
                terms.push(PairTerm {
                    a: x,
                    b: y,
                    coef: self.weight(x, y) + self.weight(y, x),
                    scale: 1.0,
                });
            }
        }
        PairEnergy {
            n: self.m,
            p: self.params.p,
            terms,
        }
    }

    /// Matrix `Q` with `f^T Q f = sum_{x != y} |f(y) - f(x)|^2 w(x, y)`.
    pub fn quadratic_form(&self) -> DMatrix<f64> {
        laplacian(
            self.m,
            (0..self.m).flat_map(|x| {
                (x + 1..self.m).map(move |y| (x, y, self.weight(x, y) + self.weight(y, x)))
            }),
        )
    }
}

pub fn besov_energy(f: &BoundaryFunction, kernel: &BesovKernel) -> f64 {
    let m = kernel.m;
    let p = kernel.p();
    let v = f.values();
    let mut sum = 0.0;
    for x in 0..m {
        for y in 0..m {
            if x != y {
                sum += (v[y] - v[x]).abs().powf(p) * kernel.weights[x * m + y];
            }
        }
    }
    sum
}

pub fn besov_seminorm(f: &BoundaryFunction, kernel: &BesovKernel) -> f64 {
    besov_energy(f, kernel).powf(1.0 / kernel.p())
}

/// Subtracts the `nu`-weighted mean.
pub fn nu_mean_zero(f: &BoundaryFunction, nu: &[f64]) -> BoundaryFunction {
    let total: f64 = nu.iter().sum();
    let mean = f.0.iter().zip(nu).map(|(v, w)| v * w).sum::<f64>() / total;
    BoundaryFunction(f.0.iter().map(|v| v - mean).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualMethod {
    /// Closed form for `p = 2`, iterative otherwise.
    #[default]
    Auto,
    ClosedForm,
    Iterative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualNorm {
    pub value: f64,
    /// A maximizer `g` with seminorm 1 and `nu`-mean zero (zero when `l = 0`).
    pub maximizer: BoundaryFunction,
}

/// `sup { l(g) : ||g||_B <= 1 }`.
///
/// Solved through the unconstrained convex problem
/// `min (1/p) E_B(g) - l(g)`, whose minimizer is a positive multiple of the
/// maximizer of the ratio `l(g) / ||g||_B`.
pub fn dual_norm(
    l: &BoundaryFunctional,
    kernel: &BesovKernel,
    method: DualMethod,
    cfg: &SolverConfig,
) -> Result<DualNorm> {
    dual_norm_from(l, kernel, method, cfg, None).map(|(d, _)| d)
}

/// As [`dual_norm`], optionally starting the iterative solve from `warm` (an
/// earlier raw minimizer for a nearby functional). Also returns the raw
/// minimizer for reuse.
pub(crate) fn dual_norm_from(
    l: &BoundaryFunctional,
    kernel: &BesovKernel,
    method: DualMethod,
    cfg: &SolverConfig,
    warm: Option<&[f64]>,
) -> Result<(DualNorm, Vec<f64>)> {
    if l.len() != kernel.len() {
        return Err(Error::DimensionMismatch {
            expected: kernel.len(),
            got: l.len(),
        });
    }
    if l.is_zero() {
        let zero = vec![0.0; l.len()];
        return Ok((
            DualNorm {
                value: 0.0,
                maximizer: BoundaryFunction(zero.clone()),
            },
            zero,
        ));
    }
    let p = kernel.p();
    let closed = match method {
        DualMethod::Auto => p == 2.0,
        DualMethod::ClosedForm => {
            if p != 2.0 {
                return Err(Error::InvalidParameter(
                    "closed-form dual norm needs p = 2".into(),
                ));
            }
            true
        }
        DualMethod::Iterative => false,
    };

    let energy = kernel.pair_energy();
    let g = if let (false, Some(w)) = (closed, warm) {
        let problem = Problem {
            energy: &energy,
            load: Some(l.weights()),
            free: (0..kernel.len()).collect(),
            mean_weights: Some(kernel.nu().to_vec()),
        };
        let solved = minimize_warm(&problem, w.to_vec(), cfg)?;
        if !solved.converged {
            return Err(Error::Numerical(format!(
                "dual norm solve stalled at residual {:e} (scale {:e})",
                solved.residual, solved.scale
            )));
        }
        solved.x
    } else if closed {
        let q = kernel.quadratic_form();
        solve_mean_zero(&q, &DVector::from_column_slice(l.weights()))?
            .as_slice()
            .to_vec()
    } else {
        let q = kernel.quadratic_form();
        let g2 = solve_mean_zero(&q, &DVector::from_column_slice(l.weights()))?;
        let e0 = energy.value(g2.as_slice());
        let t = (l
            .weights()
            .iter()
            .zip(g2.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / e0)
            .powf(1.0 / (p - 1.0));
        let x0: Vec<f64> = g2.iter().map(|v| v * t).collect();
        let problem = Problem {
            energy: &energy,
            load: Some(l.weights()),
            free: (0..kernel.len()).collect(),
            mean_weights: Some(kernel.nu().to_vec()),
        };
        let solved = minimize(&problem, x0, cfg)?;
        if !solved.converged {
            return Err(Error::Numerical(format!(
                "dual norm solve stalled at residual {:e} (scale {:e})",
                solved.residual, solved.scale
            )));
        }
        solved.x
    };
    let raw = g.clone();
    let g = nu_mean_zero(&BoundaryFunction(g), kernel.nu());
    let norm = besov_seminorm(&g, kernel);
    let maximizer = g.scaled(1.0 / norm);
    Ok((
        DualNorm {
            value: l.apply(&maximizer),
            maximizer,
        },
        raw,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::p3;
    use crate::graph::{EdgeRecord, VertexRecord};

    fn two_point() -> MetricMeasureGraph {
        let v = vec![
            VertexRecord::boundary("x", 1.0),
            VertexRecord::interior("m", 1.0),
            VertexRecord::boundary("y", 1.0),
        ];
        let e = vec![
            EdgeRecord::new("x", "m", 0.5, 1.0),
            EdgeRecord::new("m", "y", 0.5, 1.0),
        ];
        MetricMeasureGraph::new(&v, &e).unwrap()
    }

    #[test]
    fn p3_kernel_weights() {
        let k = besov_kernel(&p3(), BesovParams::from_codimension(2.0, 1.0).unwrap());
        assert_eq!(k.weight(0, 1), 0.25);
        assert_eq!(k.weight(1, 0), 0.25);
    }

    #[test]
    fn unit_distance_kernel() {
        for theta in [0.2, 0.5, 0.9] {
            let k = besov_kernel(&two_point(), BesovParams::from_theta(2.0, theta).unwrap());
            assert!((k.weight(0, 1) - 0.5).abs() < 1e-15);
            assert!((k.weight(1, 0) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn p3_energy() {
        let k = besov_kernel(&p3(), BesovParams::from_theta(2.0, 0.5).unwrap());
        let f = BoundaryFunction(vec![0.0, 1.0]);
        assert_eq!(besov_energy(&f, &k), 0.5);
        assert!((besov_seminorm(&f, &k) - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(besov_energy(&BoundaryFunction(vec![3.0, 3.0]), &k), 0.0);
        assert_eq!(besov_energy(&BoundaryFunction(vec![5.0, 6.0]), &k), 0.5);
    }

    #[test]
    fn mean_zero_normalization() {
        let nu = [1.0, 1.0];
        let g = nu_mean_zero(&BoundaryFunction(vec![0.0, 1.0]), &nu);
        assert_eq!(g.0, vec![-0.5, 0.5]);
        assert_eq!(nu_mean_zero(&g, &nu), g);
        assert_eq!(
            nu_mean_zero(&BoundaryFunction(vec![2.0, 2.0]), &nu).0,
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn functional_sum_zero_check() {
        assert!(BoundaryFunctional::new(vec![1.0, -1.0]).is_ok());
        assert!(matches!(
            BoundaryFunctional::new(vec![1.0, -0.9]),
            Err(Error::NotSumZero { .. })
        ));
        let r = BoundaryFunctional::renormalized(vec![1.0, -0.9]);
        assert!(r.weights().iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn zero_functional_has_zero_norm() {
        let k = besov_kernel(&p3(), BesovParams::from_theta(3.0, 0.5).unwrap());
        let cfg = SolverConfig::new(3.0);
        let d = dual_norm(&BoundaryFunctional::zero(2), &k, DualMethod::Auto, &cfg).unwrap();
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn two_point_dual_norm_against_scan() {
        // l = (-t, t); g = (-s, s) spans the mean-zero line, so the sup is a 1-D scan.
        let k = besov_kernel(&two_point(), BesovParams::from_theta(2.0, 0.5).unwrap());
        let cfg = SolverConfig::new(2.0);
        for t in [0.25, 1.0, 3.0] {
            let l = BoundaryFunctional::new(vec![-t, t]).unwrap();
            let mut best = 0.0f64;
            for i in 1..=2000 {
                let s = i as f64 * 1e-3;
                let g = BoundaryFunction(vec![-s, s]);
                best = best.max(l.apply(&g) / besov_seminorm(&g, &k));
            }
            let d = dual_norm(&l, &k, DualMethod::Auto, &cfg).unwrap();
            assert!((d.value - best).abs() < 1e-12, "{} vs {}", d.value, best);
            let it = dual_norm(&l, &k, DualMethod::Iterative, &cfg).unwrap();
            assert!((it.value - d.value).abs() < 1e-8);
        }
    }

    #[test]
    fn closed_form_requires_p2() {
        let k = besov_kernel(&p3(), BesovParams::from_theta(3.0, 0.5).unwrap());
        let l = BoundaryFunctional::new(vec![-1.0, 1.0]).unwrap();
        assert!(dual_norm(&l, &k, DualMethod::ClosedForm, &SolverConfig::new(3.0)).is_err());
    }
}
