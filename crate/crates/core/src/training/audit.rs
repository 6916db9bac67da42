use super::step::{forward_backward, forward_loss, RayBatch, StepOptions};
use super::TrainingError;
use crate::model::NerfModel;
use crate::real::Real;
use crate::renderer::OccupancyBitfield;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct AuditOptions {
    /// How many randomly chosen parameters to difference.
    pub n_params: usize,
    /// Central-difference half step.
    pub eps: f64,
    pub seed: u64,
    /// Floor of the relative-error denominator, absorbing near-zero
    /// gradients where the quotient is meaningless.
    pub guard: f64,
}

#[derive(Debug, Clone)]
pub struct AuditReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub worst_param: String,
}

/// Central-differences the total loss against the analytic gradient on
/// `n_params` randomly sampled parameters (uniform over elements).
pub fn finite_difference_audit<R: Real>(
    model: &mut NerfModel<R>,
    bitfield: &OccupancyBitfield,
    batch: &RayBatch,
    step_opts: &StepOptions,
    audit: &AuditOptions,
) -> Result<AuditReport, TrainingError> {
    let mut grads = model.grads();
    forward_backward(model, bitfield, batch, step_opts, &mut grads)?;

    let lens: Vec<usize> = model.param_arrays().iter().map(|a| a.len()).collect();
    let total: usize = lens.iter().sum();
    let names = model.param_names();
    let mut rng = ChaCha8Rng::seed_from_u64(audit.seed);

    let mut max_rel = 0.0f64;
    let mut worst = String::new();
    for _ in 0..audit.n_params {
        let mut flat = rng.gen_range(0..total);
        let mut ai = 0;
        while flat >= lens[ai] {
            flat -= lens[ai];
            ai += 1;
        }

        let orig = model.param_arrays()[ai][flat];
        let eps = R::from_f64(audit.eps);
        model.param_arrays_mut()[ai][flat] = orig + eps;
        let up = forward_loss(model, bitfield, batch, step_opts)?.total;
        model.param_arrays_mut()[ai][flat] = orig - eps;
        let down = forward_loss(model, bitfield, batch, step_opts)?.total;
        model.param_arrays_mut()[ai][flat] = orig;

        let fd = (up - down) / (2.0 * audit.eps);
        let analytic = grads.arrays()[ai][flat].to_f64();
        let denom = fd.abs().max(analytic.abs()).max(audit.guard);
        let rel = (fd - analytic).abs() / denom;
        if rel > max_rel {
            max_rel = rel;
            worst = format!("{}[{}]", names[ai], flat);
        }
    }
    Ok(AuditReport {
        max_rel_error: max_rel,
        checked: audit.n_params,
        worst_param: worst,
    })
}

#[cfg(test)]
mod tests {
    /// Exactness check on a loss that is linear in the parameter: central
    /// differences of f(x) = c * x are exact up to rounding.
    #[test]
    fn linear_toy_loss_differences_exactly() {
        let c = 3.7f64;
        let f = |x: f64| c * x;
        let eps = 1e-4;
        let x0 = 0.42;
        let fd = (f(x0 + eps) - f(x0 - eps)) / (2.0 * eps);
        assert!((fd - c).abs() < 1e-10);
    }
}
