//! Test-only fixtures and reference solvers.
//!
//! Nothing here calls into the library's loss or solver code: the objective,
//! gradient and proximal-gradient oracle are written out independently so
//! they can check the SAGA implementation.

#![allow(dead_code)]

pub mod corpus;

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// A seeded synthetic logistic problem with standardized features.
pub struct LogisticProblem {
    pub x: Array2<f64>,
    pub y: Vec<usize>,
    pub n_classes: usize,
}

impl LogisticProblem {
    pub fn classes(&self) -> Vec<String> {
        (0..self.n_classes).map(|c| format!("c{c}")).collect()
    }

    /// Rows of weights the solver fits: one for binary, one per class otherwise.
    pub fn weight_rows(&self) -> usize {
        if self.n_classes == 2 {
            1
        } else {
            self.n_classes
        }
    }
}

/// Gaussian features, sparse generating weights, labels drawn from the
/// generating model (so classes overlap), then columns standardized.
pub fn logistic_problem(seed: u64, n: usize, d: usize, n_classes: usize) -> LogisticProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::from_shape_fn((n, d), |_| -> f64 { StandardNormal.sample(&mut rng) });
    let k = if n_classes == 2 { 1 } else { n_classes };
    let w = Array2::from_shape_fn((k, d), |_| {
        if rng.random::<f64>() < 0.4 {
            0.0
        } else {
            rng.random_range(-2.0..2.0)
        }
    });
    let b: Vec<f64> = (0..k).map(|_| rng.random_range(-0.5..0.5)).collect();

    let mut y = Vec::with_capacity(n);
    for row in x.rows() {
        let z: Vec<f64> = (0..k).map(|c| row.dot(&w.row(c)) + b[c]).collect();
        let label = if k == 1 {
            let p = 1.0 / (1.0 + (-z[0]).exp());
            usize::from(rng.random::<f64>() < p)
        } else {
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            let u = rng.random::<f64>() * s;
            let mut acc = 0.0;
            let mut pick = k - 1;
            for (c, v) in e.iter().enumerate() {
                acc += v;
                if u < acc {
                    pick = c;
                    break;
                }
            }
            pick
        };
        y.push(label);
    }
    // make sure every class appears at least once
    for c in 0..n_classes {
        if !y.contains(&c) {
            y[c] = c;
        }
    }

    let mean = x.mean_axis(Axis(0)).unwrap();
    let sd = x.std_axis(Axis(0), 0.0);
    for mut row in x.rows_mut() {
        for j in 0..d {
            row[j] = (row[j] - mean[j]) / sd[j];
        }
    }
    LogisticProblem { x, y, n_classes }
}

/// Per-example loss written directly from the definitions.
fn example_loss(z: &[f64], label: usize) -> f64 {
    if z.len() == 1 {
        let y = label as f64;
        // log(1 + e^z) - y z
        let sp = if z[0] > 0.0 {
            z[0] + (1.0 + (-z[0]).exp()).ln()
        } else {
            (1.0 + z[0].exp()).ln()
        };
        sp - y * z[0]
    } else {
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        lse - z[label]
    }
}

fn linear_scores(x: &Array2<f64>, w: &Array2<f64>, b: &[f64], i: usize) -> Vec<f64> {
    (0..w.nrows())
        .map(|c| b[c] + (0..x.ncols()).map(|j| w[[c, j]] * x[[i, j]]).sum::<f64>())
        .collect()
}

/// `‖W‖₁ + C Σ loss`.
pub fn oracle_objective(x: &Array2<f64>, y: &[usize], w: &Array2<f64>, b: &[f64], c: f64) -> f64 {
    let data: f64 = (0..x.nrows())
        .map(|i| example_loss(&linear_scores(x, w, b, i), y[i]))
        .sum();
    w.iter().map(|v| v.abs()).sum::<f64>() + c * data
}

/// Gradient of `C Σ loss` with respect to (W, b).
pub fn oracle_gradient(
    x: &Array2<f64>,
    y: &[usize],
    w: &Array2<f64>,
    b: &[f64],
    c: f64,
) -> (Array2<f64>, Vec<f64>) {
    let k = w.nrows();
    let mut gw = Array2::zeros(w.dim());
    let mut gb = vec![0.0; k];
    for i in 0..x.nrows() {
        let z = linear_scores(x, w, b, i);
        let resid: Vec<f64> = if k == 1 {
            vec![1.0 / (1.0 + (-z[0]).exp()) - y[i] as f64]
        } else {
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            (0..k)
                .map(|cl| e[cl] / s - if cl == y[i] { 1.0 } else { 0.0 })
                .collect()
        };
        for cl in 0..k {
            gb[cl] += c * resid[cl];
            for j in 0..x.ncols() {
                gw[[cl, j]] += c * resid[cl] * x[[i, j]];
            }
        }
    }
    (gw, gb)
}

pub struct OracleFit {
    pub weights: Array2<f64>,
    pub intercepts: Vec<f64>,
    pub objective: f64,
}

/// Accelerated proximal gradient with backtracking and adaptive restart,
/// run until the objective stops moving at 1e-13 relative.
pub fn prox_grad_oracle(x: &Array2<f64>, y: &[usize], k: usize, c: f64) -> OracleFit {
    let d = x.ncols();
    let soft = |v: f64, t: f64| v.signum() * (v.abs() - t).max(0.0);
    let mut w = Array2::<f64>::zeros((k, d));
    let mut b = vec![0.0; k];
    let mut w_mom = w.clone();
    let mut b_mom = b.clone();
    let mut t = 1.0f64;
    let mut lip = 1.0f64;
    let mut f = oracle_objective(x, y, &w, &b, c);
    let smooth = |w: &Array2<f64>, b: &[f64]| oracle_objective(x, y, w, b, c) - w.iter().map(|v| v.abs()).sum::<f64>();

    let mut stalls = 0;
    for _ in 0..50_000 {
        let (gw, gb) = oracle_gradient(x, y, &w_mom, &b_mom, c);
        let f_mom = smooth(&w_mom, &b_mom);
        let (w_new, b_new) = loop {
            let step = 1.0 / lip;
            let w_new = Array2::from_shape_fn((k, d), |(i, j)| {
                soft(w_mom[[i, j]] - step * gw[[i, j]], step)
            });
            let b_new: Vec<f64> = (0..k).map(|i| b_mom[i] - step * gb[i]).collect();
            // sufficient decrease for the smooth part
            let mut lin = f_mom;
            let mut quad = 0.0;
            for i in 0..k {
                for j in 0..d {
                    let dlt = w_new[[i, j]] - w_mom[[i, j]];
                    lin += gw[[i, j]] * dlt;
                    quad += dlt * dlt;
                }
                let dlt = b_new[i] - b_mom[i];
                lin += gb[i] * dlt;
                quad += dlt * dlt;
            }
            if smooth(&w_new, &b_new) <= lin + 0.5 * lip * quad + 1e-12 {
                break (w_new, b_new);
            }
            lip *= 2.0;
        };
        let f_new = oracle_objective(x, y, &w_new, &b_new, c);
        if f_new > f {
            if t == 1.0 {
                // a plain prox step no longer decreases the objective
                break;
            }
            // restart momentum from the current iterate
            w_mom = w.clone();
            b_mom = b.clone();
            t = 1.0;
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let beta = (t - 1.0) / t_next;
        w_mom = &w_new + &((&w_new - &w) * beta);
        b_mom = (0..k).map(|i| b_new[i] + beta * (b_new[i] - b[i])).collect();
        let rel = (f - f_new).abs() / f.abs().max(1e-300);
        w = w_new;
        b = b_new;
        f = f_new;
        t = t_next;
        lip *= 0.9;
        if rel < 1e-13 {
            stalls += 1;
            if stalls >= 25 {
                break;
            }
        } else {
            stalls = 0;
        }
    }
    OracleFit {
        weights: w,
        intercepts: b,
        objective: f,
    }
}

/// Binary labels with exactly `round(prior · n)` positives.
pub fn prior_labels(n: usize, prior: f64) -> Vec<usize> {
    let pos = (prior * n as f64).round() as usize;
    (0..n).map(|i| usize::from(i < pos)).collect()
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
