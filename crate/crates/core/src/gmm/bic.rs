//! Model-order selection over the number of mixture components.

use serde::{Deserialize, Serialize};

use super::em::{CompressedSample, EmConfig, GmmModel};
use super::GmmError;
use crate::scalar::Real;

/// Penalty form used to rank candidate component counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BicMode {
    /// `-2 ln L + (3J - 1) ln N`.
    #[default]
    Standard,
    /// `N ln Σe + 4 ln N` with `Σe` the responsibility-weighted squared residual.
    PooledVariance,
    /// `N ln Σe + 4 ln N` with unsquared residuals; a non-positive `Σe` scores `+inf`.
    Literal,
}

/// Fixed parameter count used by the pooled-variance forms.
pub const FIXED_PARAMETER_COUNT: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BicScore<T> {
    pub j: usize,
    pub gamma: T,
    /// Residual error variance of the fit (Hz²), reported in every mode.
    pub error_cov: T,
    /// Parameter count entering the penalty.
    pub alpha: usize,
}

/// Responsibility-weighted pooled squared residual `(1/N) Σn Σj β_nj (f_n - μ_j)²`.
pub fn pooled_variance<T: Real>(f: &[T], model: &GmmModel<T>) -> T {
    let j = model.n_components();
    let mut s = T::zero();
    for (n, &x) in f.iter().enumerate() {
        for (k, c) in model.components.iter().enumerate() {
            let d = x - c.mean;
            s += model.responsibilities[n * j + k] * d * d;
        }
    }
    s / T::from_count(f.len())
}

fn literal_error<T: Real>(f: &[T], model: &GmmModel<T>) -> T {
    let mut s = T::zero();
    for &x in f {
        for c in &model.components {
            s += x - c.mean;
        }
    }
    s / T::from_count(f.len())
}

pub fn bic_score<T: Real>(f: &[T], model: &GmmModel<T>, mode: BicMode) -> BicScore<T> {
    let j = model.n_components();
    let n = T::from_count(f.len());
    let ln_n = n.ln();
    let pooled = pooled_variance(f, model);
    match mode {
        BicMode::Standard => {
            let alpha = 3 * j - 1;
            BicScore {
                j,
                gamma: -T::lit(2.0) * model.log_likelihood + T::from_count(alpha) * ln_n,
                error_cov: pooled,
                alpha,
            }
        }
        BicMode::PooledVariance => BicScore {
            j,
            gamma: n * pooled.ln() + T::from_count(FIXED_PARAMETER_COUNT) * ln_n,
            error_cov: pooled,
            alpha: FIXED_PARAMETER_COUNT,
        },
        BicMode::Literal => {
            let e = literal_error(f, model);
            let gamma = if e > T::zero() {
                n * e.ln() + T::from_count(FIXED_PARAMETER_COUNT) * ln_n
            } else {
                T::max_value().unwrap()
            };
            BicScore {
                j,
                gamma,
                error_cov: e,
                alpha: FIXED_PARAMETER_COUNT,
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSelection<T> {
    pub j_opt: usize,
    pub model: GmmModel<T>,
    /// One score per candidate, in increasing `J`.
    pub scores: Vec<BicScore<T>>,
}

/// Fits `J = 1..=min(j_max, |F|)` and keeps the lowest score, preferring the
/// smaller `J` on ties. Returns `None` for an empty sample.
pub fn select_model<T: Real>(
    f: &[T],
    j_max: usize,
    mode: BicMode,
    cfg: &EmConfig<T>,
    seed: u64,
) -> Result<Option<ModelSelection<T>>, GmmError> {
    if f.is_empty() {
        return Ok(None);
    }
    let sample = CompressedSample::new(f)?;
    let upper = j_max.min(f.len()).max(1);
    let mut scores = Vec::with_capacity(upper);
    let mut best: Option<(T, GmmModel<T>)> = None;
    for j in 1..=upper {
        let model = sample.fit(j, cfg, seed.wrapping_add(j as u64))?;
        let score = bic_score(f, &model, mode);
        scores.push(score);
        let better = match &best {
            None => true,
            Some((g, _)) => score.gamma < *g,
        };
        if better {
            best = Some((score.gamma, model));
        }
    }
    let (_, model) = best.expect("at least one candidate");
    Ok(Some(ModelSelection {
        j_opt: model.n_components(),
        model,
        scores,
    }))
}
