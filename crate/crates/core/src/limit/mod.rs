//! Limit-theorem measurements: Wasserstein distances to the Gaussian limit,
//! moderate-deviation tail ratios, Cramér–von Mises statistics and τ
//! dependence coefficients.

pub mod cvm;
pub mod mdp;
pub mod wasserstein;

pub use cvm::{cvm_rate_experiment, cvm_statistic, tau_coefficient, tau_nested_mc, CvmSetup, Marginal, Measure};
pub use mdp::{mdp_experiment, mdp_r_solver, mdp_ratio_curve, nu, MdpConfig};
pub use wasserstein::{
    sampling_floor, wasserstein_gaussian_closed_form, wasserstein_r, wasserstein_rate_experiment, GaussianNodes,
    WassersteinTarget,
};

use crate::error::{MartlabError, Result};
use crate::mc::McContext;
use crate::models::{sample_path, ModelSpec, PastMode};

/// Partial sums S_n at each grid point for `reps` independent paths;
/// `out[g][rep]` holds S_{grid[g]} of replicate `rep`.
pub(crate) fn partial_sums_on_grid(
    model: &ModelSpec,
    grid: &[usize],
    reps: u64,
    past: &PastMode,
    ctx: &McContext<'_>,
) -> Result<Vec<Vec<f64>>> {
    let n_max = *grid.last().ok_or_else(|| MartlabError::InvalidArgument("empty grid".into()))?;
    let per_rep = ctx.exec.try_map(0..reps, |rep| {
        let path = sample_path(model, n_max, past, ctx.seed, rep)?;
        Ok(grid.iter().map(|&n| path.partial_sum(n)).collect::<Vec<f64>>())
    })?;
    let mut out = vec![Vec::with_capacity(reps as usize); grid.len()];
    for row in per_rep {
        for (g, v) in row.into_iter().enumerate() {
            out[g].push(v);
        }
    }
    Ok(out)
}
