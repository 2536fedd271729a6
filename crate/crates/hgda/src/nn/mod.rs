//! Dense tensor algebra with reverse-mode differentiation, the loss
//! primitives, and the Adam optimizer.

mod adam;
mod checkpoint;
mod tape;

pub use adam::AdamState;
pub use checkpoint::{load as load_checkpoint, save as save_checkpoint, Checkpoint, CheckpointError};
pub use tape::{leaf, NnError, Tape, Tensor, VAR_FLOOR};

use crate::mat::Mat;

/// Closed-form diagonal-Gaussian KL between two row batches, the same
/// moment-matching estimator the tape op uses. Plain function for
/// diagnostics that need no gradients.
pub fn gaussian_kl_value(zs: &Mat, zt: &Mat) -> f64 {
    assert_eq!(zs.cols(), zt.cols(), "width mismatch");
    assert!(zs.rows() >= 2 && zt.rows() >= 2, "need at least 2 rows per batch");
    let mu_s = zs.col_mean();
    let mu_t = zt.col_mean();
    let var_s = zs.col_var(&mu_s);
    let var_t = zt.col_var(&mu_t);
    let mut total = 0.0;
    for d in 0..zs.cols() {
        let vs = var_s.get(0, d).max(VAR_FLOOR);
        let vt = var_t.get(0, d).max(VAR_FLOOR);
        let dmu = mu_s.get(0, d) - mu_t.get(0, d);
        total += 0.5 * (vt / vs).ln() + (vs + dmu * dmu) / (2.0 * vt) - 0.5;
    }
    total
}
