//! One-dimensional Gaussian mixture fitted by expectation maximisation.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::GmmError;
use crate::scalar::Real;

/// A component is skipped in the E step once its log-density falls this far
/// below the best component; `exp(-40)` is below half an ulp of 1.
const PRUNE_LOG_GAP: f64 = 40.0;

/// A single mixture component over transition frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianComponent<T> {
    /// Mean frequency (Hz).
    pub mean: T,
    /// Variance (Hz²).
    pub var: T,
    /// Mixture weight.
    pub weight: T,
}

/// EM settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmConfig<T> {
    /// Convergence threshold on the change of the per-sample mean log-likelihood.
    pub tol: T,
    pub max_iter: usize,
    /// Lower bound on every component variance (Hz²).
    pub var_floor: T,
    /// Retry once from seeded random means when a component collapses.
    pub restart_on_degenerate: bool,
}

impl<T: Real> Default for EmConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-6),
            max_iter: 100,
            var_floor: T::one(),
            restart_on_degenerate: true,
        }
    }
}

/// Fitted mixture together with the responsibilities of the fitted samples.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmModel<T> {
    pub components: Vec<GaussianComponent<T>>,
    /// Total log-likelihood of the samples under the final parameters.
    pub log_likelihood: T,
    /// Row-major `N x J` responsibilities; every row sums to one.
    pub responsibilities: Vec<T>,
    /// Log-likelihood before each M step, ending with the final value.
    pub ll_history: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when components are indistinguishable or have collapsed.
    pub degenerate: bool,
}

impl<T: Real> GmmModel<T> {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn n_samples(&self) -> usize {
        if self.components.is_empty() {
            0
        } else {
            self.responsibilities.len() / self.components.len()
        }
    }

    pub fn responsibility_row(&self, n: usize) -> &[T] {
        let j = self.components.len();
        &self.responsibilities[n * j..(n + 1) * j]
    }

    /// Mixture density at `f`.
    pub fn density(&self, f: T) -> T {
        self.components
            .iter()
            .map(|c| c.weight * normal_pdf(f, c.mean, c.var))
            .fold(T::zero(), |a, b| a + b)
    }
}

fn normal_pdf<T: Real>(x: T, mean: T, var: T) -> T {
    let d = x - mean;
    (-(d * d) / (T::lit(2.0) * var)).exp() / (T::two_pi() * var).sqrt()
}

struct Params<T> {
    comps: Vec<GaussianComponent<T>>,
}

/// Frequency sample reduced to its distinct values with multiplicities.
/// Frequencies derive from integer microsecond intervals, so repeats are
/// common and the weighted fit is identical to the per-sample fit.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressedSample<T> {
    values: Vec<T>,
    counts: Vec<T>,
    /// Distinct-value index of every original sample.
    index: Vec<usize>,
    n: T,
}

impl<T: Real> CompressedSample<T> {
    pub fn new(f: &[T]) -> Result<Self, GmmError> {
        if f.iter().any(|x| !x.is_finite()) {
            return Err(GmmError::NonFinite);
        }
        let mut order: Vec<usize> = (0..f.len()).collect();
        order.sort_by(|&a, &b| f[a].partial_cmp(&f[b]).unwrap());
        let mut values: Vec<T> = Vec::new();
        let mut counts: Vec<T> = Vec::new();
        let mut index = vec![0; f.len()];
        for i in order {
            if values.last() != Some(&f[i]) {
                values.push(f[i]);
                counts.push(T::zero());
            }
            *counts.last_mut().unwrap() += T::one();
            index[i] = values.len() - 1;
        }
        Ok(Self { values, counts, index, n: T::from_count(f.len()) })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn distinct(&self) -> usize {
        self.values.len()
    }

    /// Fits a `j`-component mixture; see [`em_fit`].
    pub fn fit(&self, j: usize, cfg: &EmConfig<T>, seed: u64) -> Result<GmmModel<T>, GmmError> {
        if j == 0 {
            return Err(GmmError::ZeroComponents);
        }
        if self.len() < j {
            return Err(GmmError::InsufficientData { samples: self.len(), components: j });
        }
        let too_few_distinct = j > 1 && self.distinct() < j;

        let mut fit = match gap_init(self, j, cfg.var_floor) {
            Some(p) => run_em(self, p, cfg),
            None => run_em(self, quantile_init(self, j, cfg.var_floor), cfg),
        };
        if j > 1 && !too_few_distinct && (fit.collapsed || !fit.converged) {
            let alt = run_em(self, quantile_init(self, j, cfg.var_floor), cfg);
            fit = better(fit, Some(alt));
        }
        if fit.collapsed && cfg.restart_on_degenerate && !too_few_distinct {
            let retry = run_em(self, random_init(self, j, cfg.var_floor, seed), cfg);
            fit = better(fit, Some(retry));
        }
        let mut responsibilities = Vec::with_capacity(self.len() * j);
        for &u in &self.index {
            responsibilities.extend_from_slice(&fit.resp[u * j..(u + 1) * j]);
        }
        Ok(GmmModel {
            components: fit.comps,
            log_likelihood: fit.ll,
            responsibilities,
            ll_history: fit.history,
            iterations: fit.iterations,
            converged: fit.converged,
            degenerate: fit.collapsed || too_few_distinct,
        })
    }
}

/// E step: fills `resp` (distinct values x components) and returns the total
/// log-likelihood.
fn e_step<T: Real>(s: &CompressedSample<T>, p: &Params<T>, resp: &mut [T], logp: &mut [T]) -> T {
    let j = p.comps.len();
    let half = T::lit(0.5);
    let gap = T::lit(PRUNE_LOG_GAP);
    // Per-component constants: ln(pi) - ln(2 pi var) / 2 and 1 / (2 var).
    let consts: Vec<(T, T, T)> = p
        .comps
        .iter()
        .map(|c| {
            let lw = if c.weight > T::zero() { c.weight.ln() } else { T::min_value().unwrap() };
            (c.mean, lw - half * (T::two_pi() * c.var).ln(), half / c.var)
        })
        .collect();
    let mut ll = T::zero();
    for (u, (&x, &count)) in s.values.iter().zip(&s.counts).enumerate() {
        let mut best = T::min_value().unwrap();
        for (k, &(mean, c0, inv2v)) in consts.iter().enumerate() {
            let d = x - mean;
            let l = c0 - d * d * inv2v;
            logp[k] = l;
            if l > best {
                best = l;
            }
        }
        let row = &mut resp[u * j..(u + 1) * j];
        let mut sum = T::zero();
        for k in 0..j {
            let diff = logp[k] - best;
            let w = if diff < -gap { T::zero() } else { diff.exp() };
            row[k] = w;
            sum += w;
        }
        for r in row.iter_mut() {
            *r /= sum;
        }
        ll += count * (best + sum.ln());
    }
    ll
}

/// M step. Returns `true` when some component received no mass.
fn m_step<T: Real>(s: &CompressedSample<T>, resp: &[T], p: &mut Params<T>, var_floor: T) -> bool {
    let j = p.comps.len();
    let tiny = T::lit(1e-10);
    let mut collapsed = false;
    for k in 0..j {
        let mut nk = T::zero();
        let mut s1 = T::zero();
        for (u, (&x, &c)) in s.values.iter().zip(&s.counts).enumerate() {
            let r = c * resp[u * j + k];
            nk += r;
            s1 += r * x;
        }
        if nk <= tiny {
            collapsed = true;
            p.comps[k].weight = nk / s.n;
            p.comps[k].var = var_floor;
            continue;
        }
        let mean = s1 / nk;
        let mut s2 = T::zero();
        for (u, (&x, &c)) in s.values.iter().zip(&s.counts).enumerate() {
            let d = x - mean;
            s2 += c * resp[u * j + k] * d * d;
        }
        p.comps[k] = GaussianComponent {
            mean,
            var: (s2 / nk).max(var_floor),
            weight: nk / s.n,
        };
    }
    collapsed
}

/// Quantile means, total variance split equally, uniform weights.
fn quantile_init<T: Real>(s: &CompressedSample<T>, j: usize, var_floor: T) -> Params<T> {
    let n = s.len();
    let mut mean = T::zero();
    for (&x, &c) in s.values.iter().zip(&s.counts) {
        mean += c * x;
    }
    mean /= s.n;
    let mut var = T::zero();
    for (&x, &c) in s.values.iter().zip(&s.counts) {
        var += c * (x - mean) * (x - mean);
    }
    var /= s.n;
    let comp_var = (var / T::from_count(j)).max(var_floor);
    let weight = T::one() / T::from_count(j);
    let mut sorted_rank = Vec::with_capacity(n);
    for (u, &c) in s.counts.iter().enumerate() {
        sorted_rank.extend(std::iter::repeat_n(u, c.as_f64().round() as usize));
    }
    let comps = (0..j)
        .map(|k| {
            let q = (k as f64 + 0.5) / j as f64;
            let idx = ((q * n as f64).floor() as usize).min(n - 1);
            GaussianComponent {
                mean: s.values[sorted_rank[idx]],
                var: comp_var,
                weight,
            }
        })
        .collect();
    Params { comps }
}

/// Splits the sorted distinct values at their `j - 1` widest gaps and uses
/// the moments of each segment. `None` when there are fewer than `j`
/// distinct values.
fn gap_init<T: Real>(s: &CompressedSample<T>, j: usize, var_floor: T) -> Option<Params<T>> {
    let u = s.values.len();
    if u < j {
        return None;
    }
    let mut gaps: Vec<usize> = (1..u).collect();
    gaps.sort_by(|&a, &b| {
        let ga = s.values[a] - s.values[a - 1];
        let gb = s.values[b] - s.values[b - 1];
        gb.partial_cmp(&ga).unwrap().then(a.cmp(&b))
    });
    let mut cuts: Vec<usize> = gaps[..j - 1].to_vec();
    cuts.sort_unstable();
    cuts.push(u);
    let mut start = 0;
    let mut comps = Vec::with_capacity(j);
    for end in cuts {
        let (mut w, mut s1) = (T::zero(), T::zero());
        for i in start..end {
            w += s.counts[i];
            s1 += s.counts[i] * s.values[i];
        }
        let mean = s1 / w;
        let mut s2 = T::zero();
        for i in start..end {
            let d = s.values[i] - mean;
            s2 += s.counts[i] * d * d;
        }
        comps.push(GaussianComponent {
            mean,
            var: (s2 / w).max(var_floor),
            weight: w / s.n,
        });
        start = end;
    }
    Some(Params { comps })
}

fn random_init<T: Real>(s: &CompressedSample<T>, j: usize, var_floor: T, seed: u64) -> Params<T> {
    let mut p = quantile_init(s, j, var_floor);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<T> = s.values.choose_multiple(&mut rng, j).copied().collect();
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (c, m) in p.comps.iter_mut().zip(means) {
        c.mean = m;
    }
    p
}

struct Fit<T> {
    comps: Vec<GaussianComponent<T>>,
    ll: T,
    resp: Vec<T>,
    history: Vec<T>,
    iterations: usize,
    converged: bool,
    collapsed: bool,
}

fn run_em<T: Real>(s: &CompressedSample<T>, mut p: Params<T>, cfg: &EmConfig<T>) -> Fit<T> {
    let j = p.comps.len();
    let mut resp = vec![T::zero(); s.values.len() * j];
    let mut logp = vec![T::zero(); j];
    let mut history = Vec::new();
    let mut converged = false;
    let mut collapsed = false;
    let mut iterations = 0;

    let mut ll = e_step(s, &p, &mut resp, &mut logp);
    history.push(ll);
    while iterations < cfg.max_iter {
        collapsed |= m_step(s, &resp, &mut p, cfg.var_floor);
        iterations += 1;
        let next = e_step(s, &p, &mut resp, &mut logp);
        history.push(next);
        let delta = (next - ll).abs() / s.n;
        ll = next;
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }
    Fit { comps: p.comps, ll, resp, history, iterations, converged, collapsed }
}

/// Keeps `b` only when its likelihood is strictly higher.
fn better<T: Real>(a: Fit<T>, b: Option<Fit<T>>) -> Fit<T> {
    match b {
        Some(b) if b.ll > a.ll => b,
        _ => a,
    }
}

/// Fits a `j`-component mixture to the frequency samples `f`.
///
/// EM starts from a split of the sorted sample at its `j - 1` widest gaps.
/// When that run collapses or hits the iteration cap, a quantile start is
/// also run and the fit with the higher likelihood is kept. `seed` only
/// drives the single random restart taken when a component collapses.
pub fn em_fit<T: Real>(f: &[T], j: usize, cfg: &EmConfig<T>, seed: u64) -> Result<GmmModel<T>, GmmError> {
    if j == 0 {
        return Err(GmmError::ZeroComponents);
    }
    CompressedSample::new(f)?.fit(j, cfg, seed)
}
