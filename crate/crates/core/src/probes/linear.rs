use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2, Axis};

use super::{Diagnostics, ProbeError, ProbeKind, ProbeModel};

/// Ordinary least squares with an unpenalized intercept.
///
/// Columns and target are centered, the centered system is reduced by a
/// thin QR factorization and the triangular factor is solved through its
/// SVD, discarding singular values below `s_max · max(n, d) · ε`. Rank
/// deficient designs therefore get the minimum-norm weight vector.
pub fn fit_least_squares(x: ArrayView2<f64>, y: &[f64]) -> Result<ProbeModel, ProbeError> {
    let (n, d) = x.dim();
    if n == 0 {
        return Err(ProbeError::Empty);
    }
    if y.len() != n {
        return Err(ProbeError::LengthMismatch {
            rows: n,
            targets: y.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(ProbeError::NonFinite);
    }

    let x_mean = x.mean_axis(Axis(0)).expect("n > 0");
    let y_mean = y.iter().sum::<f64>() / n as f64;

    let a = DMatrix::from_fn(n, d, |i, j| x[[i, j]] - x_mean[j]);
    let b = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));

    let w = if d == 0 {
        DVector::zeros(0)
    } else {
        let qr = a.qr();
        let (q, r) = (qr.q(), qr.r());
        let qtb = q.transpose() * b;
        let svd = r.svd(true, true);
        let s_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let eps = s_max * n.max(d) as f64 * f64::EPSILON;
        if s_max == 0.0 {
            DVector::zeros(d)
        } else {
            svd.solve(&qtb, eps).expect("u and v were computed")
        }
    };

    let intercept = y_mean - w.iter().zip(x_mean.iter()).map(|(a, b)| a * b).sum::<f64>();
    let weights = Array2::from_shape_vec((1, d), w.iter().copied().collect()).expect("1 × d");
    let residual: f64 = x
        .axis_iter(Axis(0))
        .zip(y)
        .map(|(row, &t)| {
            let p = row.dot(&weights.row(0)) + intercept;
            (p - t).powi(2)
        })
        .sum();

    Ok(ProbeModel {
        kind: ProbeKind::Linear,
        weights,
        intercepts: vec![intercept],
        classes: Vec::new(),
        config: None,
        diagnostics: Diagnostics {
            epochs_run: 0,
            final_objective: residual,
            converged: true,
            objective_history: Vec::new(),
        },
    })
}
