//! Correlated geometric Brownian motion sampled exactly at the observation
//! dates, and the Monte Carlo estimators built on it.
//!
//! Every path draws its normals from its own ChaCha8 stream selected by the
//! path index, so a path's randomness depends only on `(seed, path_index)`.
//! Paths are reduced in fixed blocks of [`BLOCK_PATHS`] whose partial
//! statistics are merged in block order; the estimate is therefore the same
//! bits whatever the chunk size or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::market_model::{
    validate_fund, CorrelationMatrix, DiscountSpec, GuaranteeSpec, IndexSpec, Market, SegFundSpec,
    PSD_TOLERANCE,
};

/// Paths per reduction block.
pub const BLOCK_PATHS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Pair every path with its mirror image; one sample is the pair average.
    pub antithetic: bool,
    /// Paths handed to a worker at a time; affects scheduling only.
    pub chunk_size: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 500_000,
            seed: 20_190_602,
            antithetic: false,
            chunk_size: 16 * BLOCK_PATHS,
        }
    }
}

impl McConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self {
            n_paths,
            seed,
            ..Self::default()
        }
    }

    pub fn antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    pub fn chunk_size(mut self, chunk_size: usize) -> Self {
        self.chunk_size = chunk_size;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√n_paths`.
    pub std_error: f64,
    pub n_paths: usize,
}

impl McEstimate {
    /// Distance from `x` in standard errors (infinite if the estimate is exact
    /// and differs from `x`).
    pub fn z_score(&self, x: f64) -> f64 {
        let diff = (self.mean - x).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }

    pub fn relative_error(&self) -> f64 {
        self.std_error / self.mean.abs()
    }
}

/// Cholesky factor `L` (row-major, lower) of a positive semi-definite matrix.
///
/// Pivots within `tol` of zero zero their column, so singular matrices such
/// as perfect correlation still factor; a pivot below `-tol` is an error.
pub fn cholesky_psd(matrix: &[f64], n: usize, tol: f64) -> Result<Vec<f64>> {
    if matrix.len() != n * n {
        return Err(Error::DimensionMismatch(format!(
            "{} entries for a {n}x{n} matrix",
            matrix.len()
        )));
    }
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = matrix[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d < -tol || d.is_nan() {
            return Err(Error::NotPositiveSemiDefinite(d));
        }
        if d <= tol {
            // column is a combination of earlier ones; remaining residual must vanish
            for i in (j + 1)..n {
                let mut s = matrix[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if s.abs() > tol.sqrt() {
                    return Err(Error::NotPositiveSemiDefinite(d));
                }
            }
            continue;
        }
        let root = d.sqrt();
        l[j * n + j] = root;
        for i in (j + 1)..n {
            let mut s = matrix[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / root;
        }
    }
    Ok(l)
}

/// Exact GBM transitions between consecutive observation times.
#[derive(Debug, Clone)]
pub struct PathSampler {
    spots: Vec<f64>,
    /// `(μ_j - σ_j²/2) Δt_k`, indexed `[k * M + j]`.
    drift_steps: Vec<f64>,
    /// `σ_j √Δt_k`, indexed `[k * M + j]`.
    vol_steps: Vec<f64>,
    chol: Vec<f64>,
    n_assets: usize,
    n_times: usize,
}

impl PathSampler {
    pub fn new(
        spots: &[f64],
        drifts: &[f64],
        vols: &[f64],
        corr: &CorrelationMatrix,
        times: &[f64],
    ) -> Result<Self> {
        let m = spots.len();
        if drifts.len() != m || vols.len() != m || corr.dim() != m {
            return Err(Error::DimensionMismatch(format!(
                "{m} spots, {} drifts, {} vols, {}x{} correlation",
                drifts.len(),
                vols.len(),
                corr.dim(),
                corr.dim()
            )));
        }
        if times.is_empty() || times[0] < 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "simulation times must be nonnegative and increasing".into(),
            ));
        }
        let chol = cholesky_psd(corr.as_slice(), m, PSD_TOLERANCE)?;
        let n = times.len();
        let mut drift_steps = vec![0.0; n * m];
        let mut vol_steps = vec![0.0; n * m];
        let mut prev = 0.0;
        for (k, &t) in times.iter().enumerate() {
            let dt = t - prev;
            prev = t;
            for j in 0..m {
                drift_steps[k * m + j] = (drifts[j] - 0.5 * vols[j] * vols[j]) * dt;
                vol_steps[k * m + j] = vols[j] * dt.sqrt();
            }
        }
        Ok(Self {
            spots: spots.to_vec(),
            drift_steps,
            vol_steps,
            chol,
            n_assets: m,
            n_times: n,
        })
    }

    /// Index levels of an Asian-option market at its observation dates.
    pub fn from_market(market: &Market) -> Result<Self> {
        Self::new(
            &market.spots(),
            &market.drifts(),
            &market.vols(),
            market.correlation(),
            market.schedule().times(),
        )
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn normals_per_path(&self) -> usize {
        self.n_assets * self.n_times
    }

    /// Fills `levels[k * M + j]` with index `j` at time `t_k`, driven by
    /// `sign * normals`.
    pub fn fill_path(&self, normals: &[f64], sign: f64, levels: &mut [f64]) {
        let m = self.n_assets;
        let mut log_return = vec![0.0; m];
        for k in 0..self.n_times {
            let z = &normals[k * m..(k + 1) * m];
            for j in 0..m {
                let row = &self.chol[j * m..j * m + j + 1];
                let shock: f64 = row.iter().zip(z).map(|(l, x)| l * x).sum();
                log_return[j] +=
                    self.drift_steps[k * m + j] + self.vol_steps[k * m + j] * sign * shock;
                levels[k * m + j] = self.spots[j] * log_return[j].exp();
            }
        }
    }
}

/// Fills `out` with the independent standard normals of one path.
pub fn draw_normals(seed: u64, path_index: u64, out: &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    for x in out.iter_mut() {
        *x = StandardNormal.sample(&mut rng);
    }
}

#[derive(Debug, Clone)]
struct BlockStats {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl BlockStats {
    fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((mean, m2), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = v - *mean;
            *mean += delta / n;
            *m2 += delta * (v - *mean);
        }
    }

    fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for r in 0..self.mean.len() {
            let delta = other.mean[r] - self.mean[r];
            self.mean[r] += delta * nb / n;
            self.m2[r] += other.m2[r] + delta * delta * na * nb / n;
        }
        self.count += other.count;
    }
}

/// Runs `payoff` over `config.n_paths` paths and returns one estimate per
/// output. Every sampler sees the same normals on a given path (common
/// random numbers), so they must share dimensions.
///
/// `payoff(paths, out)` receives one level array per sampler and writes
/// `out.len()` sample values.
pub fn simulate<F>(
    samplers: &[PathSampler],
    config: &McConfig,
    n_outputs: usize,
    payoff: F,
) -> Result<Vec<McEstimate>>
where
    F: Fn(&[&[f64]], &mut [f64]) + Sync,
{
    let first = samplers
        .first()
        .ok_or_else(|| Error::InvalidInput("no path sampler".into()))?;
    if samplers
        .iter()
        .any(|s| s.n_assets != first.n_assets || s.n_times != first.n_times)
    {
        return Err(Error::DimensionMismatch("samplers differ in shape".into()));
    }
    if config.n_paths == 0 {
        return Err(Error::InvalidInput("n_paths must be at least 1".into()));
    }
    let n_normals = first.normals_per_path();
    let n_blocks = config.n_paths.div_ceil(BLOCK_PATHS);
    let blocks_per_task = (config.chunk_size / BLOCK_PATHS).max(1);

    let partials: Vec<BlockStats> = (0..n_blocks)
        .into_par_iter()
        .with_min_len(blocks_per_task)
        .map(|block| {
            let start = block * BLOCK_PATHS;
            let end = (start + BLOCK_PATHS).min(config.n_paths);
            let mut stats = BlockStats::new(n_outputs);
            let mut normals = vec![0.0; n_normals];
            let mut levels = vec![vec![0.0; n_normals]; samplers.len()];
            let mut sample = vec![0.0; n_outputs];
            let mut mirror = vec![0.0; n_outputs];
            let base = ChaCha8Rng::seed_from_u64(config.seed);
            for path in start..end {
                let mut rng = base.clone();
                rng.set_stream(path as u64);
                for x in normals.iter_mut() {
                    *x = StandardNormal.sample(&mut rng);
                }
                run_payoff(samplers, &normals, 1.0, &mut levels, &payoff, &mut sample);
                if config.antithetic {
                    run_payoff(samplers, &normals, -1.0, &mut levels, &payoff, &mut mirror);
                    for (s, m) in sample.iter_mut().zip(&mirror) {
                        *s = 0.5 * (*s + m);
                    }
                }
                stats.push(&sample);
            }
            stats
        })
        .collect();

    let mut total = BlockStats::new(n_outputs);
    for p in &partials {
        total.merge(p);
    }
    let n = total.count as f64;
    Ok((0..n_outputs)
        .map(|r| {
            let var = if total.count > 1 {
                (total.m2[r] / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            McEstimate {
                mean: total.mean[r],
                std_error: (var / n).sqrt(),
                n_paths: total.count,
            }
        })
        .collect())
}

fn run_payoff<F>(
    samplers: &[PathSampler],
    normals: &[f64],
    sign: f64,
    levels: &mut [Vec<f64>],
    payoff: &F,
    out: &mut [f64],
) where
    F: Fn(&[&[f64]], &mut [f64]),
{
    for (s, buf) in samplers.iter().zip(levels.iter_mut()) {
        s.fill_path(normals, sign, buf);
    }
    let views: Vec<&[f64]> = levels.iter().map(|v| v.as_slice()).collect();
    payoff(&views, out);
}

/// Payoffs with a Monte Carlo estimator.
#[derive(Debug, Clone, Copy)]
pub enum Payoff<'a> {
    /// `max(Y - X, 0)` on the averaged basket.
    AsianCall { market: &'a Market },
    /// Guaranteed amount plus weighted relative index performance, floored
    /// at the guarantee, computed index by index.
    Security {
        market: &'a Market,
        guarantee: &'a GuaranteeSpec,
    },
    /// `max(P - Σ ω_i I_T^i, 0)`.
    SegFundPut {
        fund: &'a SegFundSpec,
        indices: &'a [IndexSpec],
        corr: &'a CorrelationMatrix,
        discount: &'a DiscountSpec,
        maturity: f64,
    },
    /// `Σ max(I_i / I_{i-1} - 1, floor)` on a single index.
    FlooredReturn {
        times: &'a [f64],
        rate: f64,
        div_yield: f64,
        vol: f64,
        floor: f64,
    },
}

/// Discounted Monte Carlo value of a payoff.
pub fn mc_price(payoff: Payoff<'_>, config: &McConfig) -> Result<McEstimate> {
    match payoff {
        Payoff::AsianCall { market } => mc_asian_call(market, config),
        Payoff::Security { market, guarantee } => mc_security_value(guarantee, market, config),
        Payoff::SegFundPut {
            fund,
            indices,
            corr,
            discount,
            maturity,
        } => mc_segfund_put(fund, indices, corr, discount, maturity, config),
        Payoff::FlooredReturn {
            times,
            rate,
            div_yield,
            vol,
            floor,
        } => mc_floored_return(times, rate, div_yield, vol, floor, config),
    }
}

/// Averaged basket level on a simulated path.
pub fn basket_average(alphas: &[f64], levels: &[f64]) -> f64 {
    let m = alphas.len();
    let n = levels.len() / m;
    let total: f64 = levels
        .chunks_exact(m)
        .map(|row| row.iter().zip(alphas).map(|(l, a)| l * a).sum::<f64>())
        .sum();
    total / n as f64
}

pub fn mc_asian_call(market: &Market, config: &McConfig) -> Result<McEstimate> {
    let sampler = PathSampler::from_market(market)?;
    let alphas = market.basket().alphas();
    let strike = market.basket().strike();
    let df = market.discount_factor();
    let est = simulate(&[sampler], config, 1, |paths, out| {
        out[0] = df * (basket_average(alphas, paths[0]) - strike).max(0.0);
    })?;
    Ok(est[0])
}

pub fn mc_security_value(
    guarantee: &GuaranteeSpec,
    market: &Market,
    config: &McConfig,
) -> Result<McEstimate> {
    let sampler = PathSampler::from_market(market)?;
    let basket = market.basket();
    let weights = basket.weights();
    let initial: Vec<f64> = market.spots();
    let m = basket.len();
    let n = market.schedule().len() as f64;
    let p = guarantee.amount();
    let df = market.discount_factor();
    let est = simulate(&[sampler], config, 1, |paths, out| {
        let levels = paths[0];
        let mut performance = 0.0;
        for j in 0..m {
            let avg = levels.iter().skip(j).step_by(m).sum::<f64>() / n;
            performance += weights[j] * (avg - initial[j]) / initial[j];
        }
        out[0] = df * (p + performance).max(p);
    })?;
    Ok(est[0])
}

pub fn mc_segfund_put(
    fund: &SegFundSpec,
    indices: &[IndexSpec],
    corr: &CorrelationMatrix,
    discount: &DiscountSpec,
    maturity: f64,
    config: &McConfig,
) -> Result<McEstimate> {
    validate_fund(fund, indices, corr, discount, maturity).into_result()?;
    let spots: Vec<f64> = indices.iter().map(|ix| ix.spot).collect();
    let drifts: Vec<f64> = indices.iter().map(|ix| ix.drift(discount.rate)).collect();
    let vols: Vec<f64> = indices.iter().map(|ix| ix.vol).collect();
    let sampler = PathSampler::new(&spots, &drifts, &vols, corr, &[maturity])?;
    let weights = fund.terminal_weights(indices);
    let principal = fund.principal;
    let df = discount.factor(maturity);
    let est = simulate(&[sampler], config, 1, |paths, out| {
        let value: f64 = paths[0].iter().zip(&weights).map(|(l, w)| l * w).sum();
        out[0] = df * (principal - value).max(0.0);
    })?;
    Ok(est[0])
}

pub fn mc_floored_return(
    times: &[f64],
    rate: f64,
    div_yield: f64,
    vol: f64,
    floor: f64,
    config: &McConfig,
) -> Result<McEstimate> {
    if times.len() < 2 {
        return Err(Error::InvalidInput("need at least two reset times".into()));
    }
    let start = times[0];
    // returns depend only on increments, so simulate from the first reset
    let shifted: Vec<f64> = times[1..].iter().map(|t| t - start).collect();
    let sampler = PathSampler::new(
        &[1.0],
        &[rate - div_yield],
        &[vol],
        &CorrelationMatrix::identity(1),
        &shifted,
    )?;
    let df = (-rate * times[times.len() - 1]).exp();
    let est = simulate(&[sampler], config, 1, |paths, out| {
        let mut prev = 1.0;
        let mut total = 0.0;
        for &level in paths[0] {
            total += (level / prev - 1.0).max(floor);
            prev = level;
        }
        out[0] = df * total;
    })?;
    Ok(est[0])
}

/// Sample estimates of `E[Y]`, `E[Y²]`, `E[Y³]` for the averaged basket.
pub fn mc_average_moments(market: &Market, config: &McConfig) -> Result<[McEstimate; 3]> {
    let sampler = PathSampler::from_market(market)?;
    let alphas = market.basket().alphas();
    let est = simulate(&[sampler], config, 3, |paths, out| {
        let y = basket_average(alphas, paths[0]);
        out[0] = y;
        out[1] = y * y;
        out[2] = y * y * y;
    })?;
    Ok([est[0], est[1], est[2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_model::{build_basket, ObservationSchedule};

    #[test]
    fn cholesky_of_identity_and_singular() {
        let l = cholesky_psd(&[1.0, 0.0, 0.0, 1.0], 2, 1e-10).unwrap();
        assert_eq!(l, vec![1.0, 0.0, 0.0, 1.0]);
        let l = cholesky_psd(&[1.0, 1.0, 1.0, 1.0], 2, 1e-10).unwrap();
        assert_eq!(l, vec![1.0, 0.0, 1.0, 0.0]);
        assert!(cholesky_psd(&[1.0, 2.0, 2.0, 1.0], 2, 1e-10).is_err());
    }

    #[test]
    fn cholesky_reproduces_matrix() {
        let a = [1.0, 0.5, 0.3, 0.5, 1.0, 0.2, 0.3, 0.2, 1.0];
        let l = cholesky_psd(&a, 3, 1e-10).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                assert!((s - a[i * 3 + j]).abs() < 1e-15);
            }
        }
    }

    fn two_index(vol: f64, rho: f64) -> Market {
        Market::new(
            build_basket(
                vec![
                    IndexSpec::new("a", 100.0, vol),
                    IndexSpec::new("b", 50.0, vol),
                ],
                vec![50.0, 50.0],
            )
            .unwrap(),
            CorrelationMatrix::uniform(2, rho),
            ObservationSchedule::new(vec![0.5, 1.0, 1.5], 1.5),
            DiscountSpec::new(0.04),
        )
        .unwrap()
    }

    #[test]
    fn zero_vol_paths_are_deterministic() {
        let mk = two_index(0.0, 0.3);
        let sampler = PathSampler::from_market(&mk).unwrap();
        let mut normals = vec![0.0; sampler.normals_per_path()];
        draw_normals(7, 3, &mut normals);
        let mut levels = vec![0.0; normals.len()];
        sampler.fill_path(&normals, 1.0, &mut levels);
        for (k, t) in [0.5f64, 1.0, 1.5].iter().enumerate() {
            assert!((levels[k * 2] - 100.0 * (0.04 * t).exp()).abs() < 1e-12);
            assert!((levels[k * 2 + 1] - 50.0 * (0.04 * t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_correlation_moves_together() {
        let mk = two_index(0.3, 1.0);
        let sampler = PathSampler::from_market(&mk).unwrap();
        let mut normals = vec![0.0; sampler.normals_per_path()];
        let mut levels = vec![0.0; normals.len()];
        for path in 0..50 {
            draw_normals(11, path, &mut normals);
            sampler.fill_path(&normals, 1.0, &mut levels);
            for k in 0..3 {
                let ra = (levels[k * 2] / 100.0).ln();
                let rb = (levels[k * 2 + 1] / 50.0).ln();
                assert!((ra - rb).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_vol_call_is_exact() {
        let basket = build_basket(vec![IndexSpec::new("a", 100.0, 0.0)], vec![100.0]).unwrap();
        let mk = Market::new(
            basket,
            CorrelationMatrix::identity(1),
            ObservationSchedule::new(vec![1.0], 1.0),
            DiscountSpec::new(0.0),
        )
        .unwrap();
        let est = mc_asian_call(&mk, &McConfig::new(5000, 1)).unwrap();
        assert_eq!((est.mean, est.std_error), (0.0, 0.0));
    }

    #[test]
    fn chunking_does_not_change_bits() {
        let mk = two_index(0.25, 0.4);
        let a = mc_asian_call(&mk, &McConfig::new(10_001, 5).chunk_size(1)).unwrap();
        let b = mc_asian_call(&mk, &McConfig::new(10_001, 5).chunk_size(1 << 20)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_paths, 10_001);
    }

    #[test]
    fn streams_differ_by_path() {
        let mut x = [0.0; 4];
        let mut y = [0.0; 4];
        draw_normals(1, 0, &mut x);
        draw_normals(1, 1, &mut y);
        assert_ne!(x, y);
        draw_normals(1, 0, &mut y);
        assert_eq!(x, y);
    }
}
