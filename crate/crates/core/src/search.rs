//! Multi-start ascent for scale-invariant ratios such as
//! `||Tr u||_B / ||grad u||_p`.
//!
//! The objective is always the logarithm of a 0-homogeneous ratio that is
//! also invariant under adding constants, so its gradient is orthogonal both
//! to the iterate and to the constant vector. Restarts run in parallel and
//! are reduced by a deterministic max (ties go to the lowest restart index).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// A value together with the point attaining it.
pub type Scored = Option<(f64, Vec<f64>)>;

/// Best-found value of an operator norm together with the function attaining it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub witness: Vec<f64>,
    /// True when the value is an exact supremum (quadratic case); otherwise
    /// the value is a certified lower bound only.
    pub certified: bool,
    pub restarts: usize,
}

impl NormEstimate {
    /// Raises the estimate to `value` if a better witness is known.
    pub fn absorb(&mut self, value: f64, witness: &[f64]) {
        if value > self.value {
            self.value = value;
            self.witness = witness.to_vec();
        }
    }
}

pub trait RatioObjective: Sync {
    type Workspace: Send;

    fn dim(&self) -> usize;

    fn workspace(&self) -> Self::Workspace;

    /// Log-ratio and its gradient, or `None` at a degenerate point (for
    /// example a constant function).
    fn eval(&self, x: &[f64], ws: &mut Self::Workspace) -> Result<Scored>;
}

#[derive(Debug, Clone, Copy)]
pub struct AscentOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Maximize when true, minimize otherwise.
    pub maximize: bool,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self {
            max_iter: 400,
            grad_tol: 1e-11,
            maximize: true,
        }
    }
}

fn center_and_normalize(x: &mut [f64]) -> bool {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= norm);
    true
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One L-BFGS ascent run from `x0`. Returns the best `(log value, point)`.
pub fn ascend<O: RatioObjective>(obj: &O, x0: &[f64], opts: AscentOptions) -> Result<Scored> {
    let sign = if opts.maximize { 1.0 } else { -1.0 };
    let mut ws = obj.workspace();
    let mut x = x0.to_vec();
    if !center_and_normalize(&mut x) {
        return Ok(None);
    }
    let Some((v, g)) = obj.eval(&x, &mut ws)? else {
        return Ok(None);
    };
    // Work with the minimization of `-sign * value`.
    let mut f = -sign * v;
    let mut grad: Vec<f64> = g.iter().map(|c| -sign * c).collect();
    let mut memory: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    const MEMORY: usize = 10;

    for _ in 0..opts.max_iter {
        let gnorm = dot(&grad, &grad).sqrt();
        if gnorm <= opts.grad_tol {
            break;
        }
        // Two-loop recursion.
        let mut q = grad.clone();
        let mut alphas = Vec::with_capacity(memory.len());
        for (s, y, rho) in memory.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = memory.last() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        } else {
            q.iter_mut().for_each(|v| *v /= gnorm);
        }
        for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&grad, &dir);
        if slope.is_nan() || slope >= 0.0 {
            memory.clear();
            dir = grad.iter().map(|v| -v / gnorm).collect();
            slope = -gnorm;
        }

        let mut t = 1.0;
        let mut next = None;
        for _ in 0..50 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            if let Some((v1, g1)) = obj.eval(&trial, &mut ws)? {
                let f1 = -sign * v1;
                if f1 <= f + 1e-4 * t * slope {
                    next = Some((trial, f1, g1));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((trial, f1, g1)) = next else {
            break;
        };
        let g1: Vec<f64> = g1.iter().map(|c| -sign * c).collect();
        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g1.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let improvement = f - f1;
        x = trial;
        f = f1;
        grad = g1;
        if sy > 1e-300 {
            memory.push((s, y, 1.0 / sy));
            if memory.len() > MEMORY {
                memory.remove(0);
            }
        }
        let norm = dot(&x, &x).sqrt();
        if !(0.5..=2.0).contains(&norm) {
            // Rescaling changes gradients by 1/norm; curvature pairs are stale.
            let mut y = x.clone();
            if !center_and_normalize(&mut y) {
                break;
            }
            let Some((v, g)) = obj.eval(&y, &mut ws)? else {
                break;
            };
            x = y;
            f = -sign * v;
            grad = g.iter().map(|c| -sign * c).collect();
            memory.clear();
        }
        if improvement.abs() <= 1e-15 * f.abs().max(1e-300) {
            break;
        }
    }
    center_and_normalize(&mut x);
    Ok(Some((-sign * f, x)))
}

/// Random unit vectors orthogonal to constants, one per restart.
pub fn random_starts(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(k as u64 + 1)),
            );
            let mut x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            center_and_normalize(&mut x);
            x
        })
        .collect()
}

/// Runs [`ascend`] from every start and keeps the best result.
pub fn multi_start<O: RatioObjective>(
    obj: &O,
    starts: &[Vec<f64>],
    opts: AscentOptions,
) -> Result<Scored> {
    let runs: Vec<Result<Scored>> = starts.par_iter().map(|x0| ascend(obj, x0, opts)).collect();
    let mut best: Scored = None;
    for run in runs {
        if let Some((v, x)) = run? {
            let better = match &best {
                None => true,
                Some((b, _)) => {
                    if opts.maximize {
                        v > *b
                    } else {
                        v < *b
                    }
                }
            };
            if better {
                best = Some((v, x));
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// log of the Rayleigh quotient `x^T A x / x^T x` on the constant complement.
    struct Rayleigh(Vec<Vec<f64>>);

    impl RatioObjective for Rayleigh {
        type Workspace = ();

        fn dim(&self) -> usize {
            self.0.len()
        }

        fn workspace(&self) {}

        fn eval(&self, x: &[f64], _: &mut ()) -> Result<Scored> {
            let ax: Vec<f64> = self.0.iter().map(|row| dot(row, x)).collect();
            let num = dot(x, &ax);
            let mean = x.iter().sum::<f64>() / x.len() as f64;
            let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
            let den = dot(&c, &c);
            if num <= 0.0 || den <= 0.0 {
                return Ok(None);
            }
            let g = ax
                .iter()
                .zip(&c)
                .map(|(a, ci)| 2.0 * a / num - 2.0 * ci / den)
                .collect();
            Ok(Some((num.ln() - den.ln(), g)))
        }
    }

    #[test]
    fn finds_top_and_bottom_of_path_spectrum() {
        // Path Laplacian on 3 nodes: nonzero spectrum {1, 3}.
        let a = vec![
            vec![1.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 1.0],
        ];
        let obj = Rayleigh(a);
        let starts = random_starts(3, 4, 7);
        let (hi, _) = multi_start(&obj, &starts, AscentOptions::default())
            .unwrap()
            .unwrap();
        assert!((hi.exp() - 3.0).abs() < 1e-10);
        let lo_opts = AscentOptions {
            maximize: false,
            ..Default::default()
        };
        let (lo, _) = multi_start(&obj, &starts, lo_opts).unwrap().unwrap();
        assert!((lo.exp() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn starts_are_deterministic_and_centered() {
        let a = random_starts(5, 3, 11);
        assert_eq!(a, random_starts(5, 3, 11));
        for x in &a {
            assert!(x.iter().sum::<f64>().abs() < 1e-12);
            assert!((dot(x, x) - 1.0).abs() < 1e-12);
        }
    }
}
