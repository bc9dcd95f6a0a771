use serde::Serialize;

use super::loss::bce_sum;
use super::network::{forward, sample_backward, ModelParams};
use super::LabelVector;
use crate::linalg::Matrix;

/// Central finite-difference step.
pub const FD_STEP: f64 = 1e-5;

// Relative errors are measured against max(|analytic|, |numeric|, REL_FLOOR)
// so entries that are zero up to rounding do not dominate the report.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter holding the worst entry, e.g. `lstm1.weights[12]`.
    pub worst_entry: String,
    pub entries_checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

fn loss_at(params: &ModelParams, x: &Matrix, y: &LabelVector) -> f64 {
    match forward(params, x) {
        Ok(p) => bce_sum(p.values(), y.values()),
        Err(_) => f64::NAN,
    }
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(REL_FLOOR);
    let err = (analytic - numeric).abs() / denom;
    if err.is_nan() {
        f64::INFINITY
    } else {
        err
    }
}

/// Compares backpropagated gradients with central finite differences for
/// every network parameter and every input entry of one sample.
///
/// Passes when the maximum relative error is strictly below `tolerance`.
#[allow(clippy::needless_range_loop)]
pub fn gradient_check(params: &ModelParams, sample: (&Matrix, &LabelVector), tolerance: f64) -> GradCheckReport {
    let (x, y) = sample;
    let mut params = params.clone();
    params.embedding = None;
    let mut worst = (0.0f64, String::from("none"));
    let mut checked = 0usize;
    let mut record = |err: f64, name: &dyn Fn() -> String| {
        checked += 1;
        if err > worst.0 || (err.is_infinite() && !worst.0.is_infinite()) {
            worst = (err, name());
        }
    };

    let analytic = match sample_backward(&params, x, y) {
        Ok(g) => g,
        Err(e) => {
            return GradCheckReport {
                max_relative_error: f64::INFINITY,
                worst_entry: format!("backward failed: {e}"),
                entries_checked: 0,
                tolerance,
                passed: false,
            }
        }
    };

    let names = params.tensor_names();
    let analytic_flat: Vec<Vec<f64>> = analytic.grads.tensors().iter().map(|t| t.to_vec()).collect();
    for (k, name) in names.iter().enumerate() {
        let len = analytic_flat[k].len();
        for i in 0..len {
            let orig = params.tensors()[k][i];
            params.tensors_mut()[k][i] = orig + FD_STEP;
            let up = loss_at(&params, x, y);
            params.tensors_mut()[k][i] = orig - FD_STEP;
            let down = loss_at(&params, x, y);
            params.tensors_mut()[k][i] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            record(relative_error(analytic_flat[k][i], numeric), &|| format!("{name}[{i}]"));
        }
    }

    let mut xp = x.clone();
    for i in 0..x.as_slice().len() {
        let orig = xp.as_slice()[i];
        xp.as_mut_slice()[i] = orig + FD_STEP;
        let up = loss_at(&params, &xp, y);
        xp.as_mut_slice()[i] = orig - FD_STEP;
        let down = loss_at(&params, &xp, y);
        xp.as_mut_slice()[i] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        record(relative_error(analytic.d_input.as_slice()[i], numeric), &|| format!("input[{i}]"));
    }

    GradCheckReport {
        max_relative_error: worst.0,
        worst_entry: worst.1,
        entries_checked: checked,
        tolerance,
        passed: worst.0 < tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_sample(t: usize, d: usize, c: usize, seed: u64) -> (Matrix, LabelVector) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Matrix::uniform(t, d, 1.0, &mut rng);
        let y = LabelVector::new((0..c).map(|_| rng.gen_range(0..2u8)).collect()).unwrap();
        (x, y)
    }

    #[test]
    fn random_tiny_model_passes() {
        // T=3, D=4, H=3, C=2
        let params = ModelParams::random(4, 3, 2, 0.8, 21);
        let (x, y) = tiny_sample(3, 4, 2, 22);
        let r = gradient_check(&params, (&x, &y), 1e-4);
        assert!(r.passed, "{r:?}");
        assert_eq!(r.entries_checked, params.num_parameters() + 12);
    }

    #[test]
    fn zero_model_head_bias_is_p_minus_y() {
        let params = ModelParams::zeros(2, 2, 3, None);
        let (x, _) = tiny_sample(2, 2, 3, 1);
        let y = LabelVector::new(vec![1, 0, 1]).unwrap();
        let g = sample_backward(&params, &x, &y).unwrap();
        assert_eq!(g.grads.head_bias, vec![-0.5, 0.5, -0.5]);
        let r = gradient_check(&params, (&x, &y), 1e-4);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn zero_tolerance_reports_failure() {
        let params = ModelParams::random(2, 2, 2, 0.5, 3);
        let (x, y) = tiny_sample(2, 2, 2, 4);
        let r = gradient_check(&params, (&x, &y), 0.0);
        assert!(!r.passed);
        assert!(r.max_relative_error.is_finite());
    }

    #[test]
    fn shape_error_is_reported_not_panicked() {
        let params = ModelParams::random(2, 2, 2, 0.5, 3);
        let (x, _) = tiny_sample(2, 3, 2, 4);
        let y = LabelVector::new(vec![1, 0]).unwrap();
        let r = gradient_check(&params, (&x, &y), 1e-4);
        assert!(!r.passed);
    }
}
