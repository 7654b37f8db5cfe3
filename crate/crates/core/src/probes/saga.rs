//! SAGA for L1-penalized logistic regression.
//!
//! The objective is `‖W‖₁ + C · Σᵢ ℓᵢ(W, b)`, loss summed over examples and
//! intercepts unpenalized. SAGA works on the equivalent averaged form
//! `(1/n) Σᵢ C·ℓᵢ + (1/n)‖W‖₁`: each step draws one example uniformly,
//! replaces that example's stored gradient, moves along
//! `new − stored + table mean`, and applies soft-thresholding at
//! `step / n`. Gradients of the logistic loss are rank one (`rᵢ xᵢᵀ`), so the
//! table keeps only the residual vector `rᵢ` per example.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{sigmoid, Diagnostics, ProbeError, ProbeKind, ProbeModel, SolverConfig};

/// `sign(v) · max(|v| − threshold, 0)`.
#[inline]
pub fn soft_threshold(v: f64, threshold: f64) -> f64 {
    if v > threshold {
        v - threshold
    } else if v < -threshold {
        v + threshold
    } else {
        0.0
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Writes the loss-gradient residual `r = ∂ℓ/∂z` for one example into `r`
/// and returns the loss. `z` holds the linear scores (one for binary).
fn residual(z: &[f64], label: usize, r: &mut [f64]) -> f64 {
    if z.len() == 1 {
        let y = label as f64;
        r[0] = sigmoid(z[0]) - y;
        softplus(z[0]) - y * z[0]
    } else {
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = z.iter().map(|v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        for (c, (rc, zc)) in r.iter_mut().zip(z).enumerate() {
            *rc = (zc - lse).exp() - if c == label { 1.0 } else { 0.0 };
        }
        lse - z[label]
    }
}

fn scores(w: &[f64], b: &[f64], row: &[f64], z: &mut [f64]) {
    let d = row.len();
    for (c, zc) in z.iter_mut().enumerate() {
        let wc = &w[c * d..(c + 1) * d];
        *zc = b[c] + wc.iter().zip(row).map(|(a, x)| a * x).sum::<f64>();
    }
}

fn l1(w: &[f64]) -> f64 {
    w.iter().map(|v| v.abs()).sum()
}

/// Summed loss over all rows, optionally accumulating `Σ rᵢ xᵢᵀ` and `Σ rᵢ`.
fn loss_pass(
    x: &[f64],
    d: usize,
    y: &[usize],
    w: &[f64],
    b: &[f64],
    mut grads: Option<(&mut [f64], &mut [f64])>,
) -> f64 {
    let k = b.len();
    let mut z = vec![0.0; k];
    let mut r = vec![0.0; k];
    let mut total = 0.0;
    for (row, &label) in x.chunks_exact(d.max(1)).zip(y) {
        let row = &row[..d];
        scores(w, b, row, &mut z);
        total += residual(&z, label, &mut r);
        if let Some((gw, gb)) = grads.as_mut() {
            for c in 0..k {
                gb[c] += r[c];
                let g = &mut gw[c * d..(c + 1) * d];
                g.iter_mut().zip(row).for_each(|(gi, xi)| *gi += r[c] * xi);
            }
        }
    }
    total
}

fn check_shapes(x: &ArrayView2<f64>, y: &[usize], weights: &Array2<f64>, intercepts: &[f64]) {
    assert_eq!(x.nrows(), y.len(), "rows vs labels");
    assert_eq!(x.ncols(), weights.ncols(), "feature dim");
    assert_eq!(weights.nrows(), intercepts.len(), "weight rows vs intercepts");
}

/// Full objective `‖W‖₁ + C · Σ ℓᵢ`. A single weight row means binary
/// logistic loss with labels in {0, 1}; otherwise softmax.
pub fn logistic_objective(
    x: ArrayView2<f64>,
    y: &[usize],
    weights: &Array2<f64>,
    intercepts: &[f64],
    c: f64,
) -> f64 {
    check_shapes(&x, y, weights, intercepts);
    let x = x.as_standard_layout();
    let w = weights.as_standard_layout();
    let w = w.as_slice().expect("standard layout");
    l1(w) + c * loss_pass(x.as_slice().expect("standard layout"), weights.ncols(), y, w, intercepts, None)
}

/// Smooth part `C · Σ ℓᵢ` and its gradients with respect to the weights and
/// intercepts.
pub fn smooth_loss_and_grad(
    x: ArrayView2<f64>,
    y: &[usize],
    weights: &Array2<f64>,
    intercepts: &[f64],
    c: f64,
) -> (f64, Array2<f64>, Vec<f64>) {
    check_shapes(&x, y, weights, intercepts);
    let (k, d) = weights.dim();
    let x = x.as_standard_layout();
    let w = weights.as_standard_layout();
    let mut gw = vec![0.0; k * d];
    let mut gb = vec![0.0; k];
    let loss = loss_pass(
        x.as_slice().expect("standard layout"),
        d,
        y,
        w.as_slice().expect("standard layout"),
        intercepts,
        Some((&mut gw, &mut gb)),
    );
    gw.iter_mut().for_each(|g| *g *= c);
    gb.iter_mut().for_each(|g| *g *= c);
    (
        c * loss,
        Array2::from_shape_vec((k, d), gw).expect("k × d"),
        gb,
    )
}

/// Fits an L1-penalized logistic probe with SAGA.
///
/// `y` holds class indices into `classes`. Binary probes model
/// `P(classes[1])`. Features should be standardized beforehand; the step
/// size is `1 / (3·L)` with `L = C · κ · max‖(xᵢ, 1)‖² + 1`, where `κ` bounds
/// the loss curvature (1/4 binary, 1/2 softmax). Training stops
/// when no parameter moves by `tol` or more over an epoch, or after
/// `max_epochs`; either way the outcome is recorded in the diagnostics.
pub fn fit_logistic_saga(
    x: ArrayView2<f64>,
    y: &[usize],
    classes: &[String],
    config: &SolverConfig,
    kind: ProbeKind,
) -> Result<ProbeModel, ProbeError> {
    config.validate()?;
    let (n, d) = x.dim();
    let n_classes = classes.len();
    if n_classes < 2 {
        return Err(ProbeError::TooFewClasses(n_classes));
    }
    let k = match kind {
        ProbeKind::LogisticBinary if n_classes == 2 => 1,
        ProbeKind::LogisticMultinomial => n_classes,
        _ => return Err(ProbeError::KindMismatch { kind, n_classes }),
    };
    if n == 0 {
        return Err(ProbeError::Empty);
    }
    if y.len() != n {
        return Err(ProbeError::LengthMismatch {
            rows: n,
            targets: y.len(),
        });
    }
    if let Some(&label) = y.iter().find(|&&l| l >= n_classes) {
        return Err(ProbeError::LabelOutOfRange { label, n_classes });
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(ProbeError::SingleClass);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ProbeError::NonFinite);
    }

    let x = x.as_standard_layout();
    let xs = x.as_slice().expect("standard layout");
    let row = |i: usize| &xs[i * d..(i + 1) * d];
    let c = config.c;
    let nf = n as f64;

    let max_sq = (0..n)
        .map(|i| row(i).iter().map(|v| v * v).sum::<f64>() + 1.0)
        .fold(0.0, f64::max);
    // curvature of the logistic loss is at most 1/4, of softmax at most 1/2
    let curvature = if k == 1 { 0.25 } else { 0.5 };
    let lipschitz = c * curvature * max_sq + 1.0;
    let step = 1.0 / (3.0 * lipschitz);
    let shrink = step / nf;

    let mut w = vec![0.0; k * d];
    let mut b = vec![0.0; k];

    // gradient table initialised at the starting point
    let mut table = vec![0.0; n * k];
    let mut sum_w = vec![0.0; k * d];
    let mut sum_b = vec![0.0; k];
    let mut z = vec![0.0; k];
    for i in 0..n {
        scores(&w, &b, row(i), &mut z);
        let r = &mut table[i * k..(i + 1) * k];
        residual(&z, y[i], r);
        for cl in 0..k {
            sum_b[cl] += r[cl];
            sum_w[cl * d..(cl + 1) * d]
                .iter_mut()
                .zip(row(i))
                .for_each(|(s, xi)| *s += r[cl] * xi);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut r_new = vec![0.0; k];
    let mut diff = vec![0.0; k];
    let mut history = Vec::new();
    let mut converged = false;
    let mut epochs_run = 0;

    for _ in 0..config.max_epochs {
        let w_start = w.clone();
        let b_start = b.clone();
        for _ in 0..n {
            let j = rng.random_range(0..n);
            let xj = row(j);
            scores(&w, &b, xj, &mut z);
            residual(&z, y[j], &mut r_new);
            let stored = &mut table[j * k..(j + 1) * k];
            for cl in 0..k {
                diff[cl] = r_new[cl] - stored[cl];
            }

            for cl in 0..k {
                let wc = &mut w[cl * d..(cl + 1) * d];
                let sc = &sum_w[cl * d..(cl + 1) * d];
                for ((wi, xi), si) in wc.iter_mut().zip(xj).zip(sc) {
                    let g = c * (diff[cl] * xi + si / nf);
                    *wi = soft_threshold(*wi - step * g, shrink);
                }
                b[cl] -= step * c * (diff[cl] + sum_b[cl] / nf);
            }

            for cl in 0..k {
                sum_b[cl] += diff[cl];
                if diff[cl] != 0.0 {
                    sum_w[cl * d..(cl + 1) * d]
                        .iter_mut()
                        .zip(xj)
                        .for_each(|(s, xi)| *s += diff[cl] * xi);
                }
            }
            stored.copy_from_slice(&r_new);
        }
        epochs_run += 1;

        history.push(l1(&w) + c * loss_pass(xs, d, y, &w, &b, None));
        let max_change = w
            .iter()
            .zip(&w_start)
            .chain(b.iter().zip(&b_start))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if max_change < config.tol {
            converged = true;
            break;
        }
    }

    let final_objective = *history.last().expect("at least one epoch");
    if !converged {
        log::warn!(
            "SAGA stopped after {epochs_run} epochs without reaching tol {}",
            config.tol
        );
    }
    Ok(ProbeModel {
        kind,
        weights: Array2::from_shape_vec((k, d), w).expect("k × d"),
        intercepts: b,
        classes: classes.to_vec(),
        config: Some(*config),
        diagnostics: Diagnostics {
            epochs_run,
            final_objective,
            converged,
            objective_history: history,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|c| c.to_string()).collect()
    }

    #[test]
    fn soft_threshold_values() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-1.0, 1.0), 0.0);
        assert_eq!(soft_threshold(0.0, 0.0), 0.0);
    }

    #[test]
    fn objective_at_zero_is_n_log2() {
        let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let w = Array2::zeros((1, 2));
        let f = logistic_objective(x.view(), &[0, 1, 1], &w, &[0.0], 1.0);
        assert!((f - 3.0 * 2f64.ln()).abs() < 1e-12);
        let w = Array2::zeros((3, 2));
        let f = logistic_objective(x.view(), &[0, 1, 2], &w, &[0.0; 3], 2.0);
        assert!((f - 2.0 * 3.0 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_class_rejected() {
        let x = array![[1.0], [2.0]];
        let err = fit_logistic_saga(
            x.view(),
            &[1, 1],
            &names(2),
            &SolverConfig::default(),
            ProbeKind::LogisticBinary,
        )
        .unwrap_err();
        assert!(matches!(err, ProbeError::SingleClass));
    }

    #[test]
    fn kind_must_match_class_count() {
        let x = array![[1.0], [2.0], [3.0]];
        let err = fit_logistic_saga(
            x.view(),
            &[0, 1, 2],
            &names(3),
            &SolverConfig::default(),
            ProbeKind::LogisticBinary,
        )
        .unwrap_err();
        assert!(matches!(err, ProbeError::KindMismatch { .. }));
    }

    #[test]
    fn overwhelming_penalty_zeroes_weights() {
        let x = array![[1.0, -1.0], [2.0, 0.5], [-1.5, 1.0], [0.3, 0.2], [-0.7, -2.0]];
        let cfg = SolverConfig {
            c: 1e-6,
            ..SolverConfig::default()
        };
        let m = fit_logistic_saga(x.view(), &[1, 1, 0, 0, 1], &names(2), &cfg, ProbeKind::LogisticBinary)
            .unwrap();
        assert!(m.weights.iter().all(|w| *w == 0.0));
        assert!(m.diagnostics.converged);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let x = array![[1.0, -1.0], [2.0, 0.5], [-1.5, 1.0], [0.3, 0.2], [-0.7, -2.0]];
        let y = [1, 1, 0, 0, 1];
        let cfg = SolverConfig::default();
        let a = fit_logistic_saga(x.view(), &y, &names(2), &cfg, ProbeKind::LogisticBinary).unwrap();
        let b = fit_logistic_saga(x.view(), &y, &names(2), &cfg, ProbeKind::LogisticBinary).unwrap();
        assert_eq!(a, b);
    }
}
