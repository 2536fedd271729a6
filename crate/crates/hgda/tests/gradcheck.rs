//! Central-finite-difference checks for every differentiable operation and
//! for the full three-channel forward composed into the training objective.
//! Suite bodies live in `common::gradsuites` and are shared with the
//! acceptance criterion.

mod common;

use common::gradsuites;

const TRIALS: usize = 100;

#[test]
fn matmul_and_add_chain() {
    gradsuites::matmul_add(TRIALS);
}

#[test]
fn scale_ops() {
    gradsuites::scale_ops(TRIALS);
}

#[test]
fn relu_away_from_kinks() {
    gradsuites::relu(TRIALS);
}

#[test]
fn dropout_with_fixed_mask() {
    gradsuites::dropout(TRIALS);
}

#[test]
fn softmax_rows_projected_sum() {
    gradsuites::softmax_rows(TRIALS);
}

#[test]
fn cross_entropy_random_logits() {
    gradsuites::cross_entropy(TRIALS);
}

#[test]
fn mean_entropy_random_logits() {
    gradsuites::mean_entropy(TRIALS);
}

#[test]
fn gaussian_kl_both_sides() {
    gradsuites::gaussian_kl(TRIALS);
}

#[test]
fn sparse_mul_through_normalized_operator() {
    gradsuites::sparse_mul(TRIALS);
}

#[test]
fn bias_row_broadcast() {
    gradsuites::bias_row(TRIALS);
}

#[test]
fn composite_objective_over_all_parameters() {
    gradsuites::composite(TRIALS);
}
