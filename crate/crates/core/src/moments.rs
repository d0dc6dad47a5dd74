//! Closed-form moments of the averaged basket under correlated GBM.
//!
//! With `G_ik = c_i e^{μ_i t_k}` (`c_i` the basket coefficient times spot)
//! and `s_ij = σ_i σ_j ρ_ij`, the raw moments of the average
//! `Y = (1/N) Σ_k Σ_i c_i e^{...}` are
//!
//! ```text
//! E[Y]   = N⁻¹ Σ_k Σ_i G_ik
//! E[Y²]  = N⁻² Σ_kl Σ_ij G_ik G_jl exp(s_ij min(t_k,t_l))
//! E[Y³]  = N⁻³ Σ_kln Σ_ijh G_ik G_jl G_hn
//!              exp(s_ij min(t_k,t_l) + s_ih min(t_k,t_n) + s_jh min(t_l,t_n))
//! ```
//!
//! The central moments are summed from the same kernels in centred form,
//! `exp(x) - 1` and `AB + AC + BC + ABC` with `A = expm1(x_1)` etc., which
//! avoids the cancellation in `m3 - 3 m1 m2 + 2 m1³` at low variance.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market_model::{CorrelationMatrix, IndexSpec, Market};
use crate::sum::CompensatedSum;

/// Relative variance below which a distribution is treated as a point mass.
pub const DEGENERATE_VARIANCE: f64 = 1e-14;

/// Raw and central moments of a positive random variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentSet {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub mu2: f64,
    pub mu3: f64,
    /// `None` when the variance is degenerate.
    pub skew: Option<f64>,
}

impl MomentSet {
    /// Builds from raw moments, deriving the central ones.
    pub fn from_raw(m1: f64, m2: f64, m3: f64) -> Result<Self> {
        let c = central_from_raw(m1, m2, m3)?;
        Ok(Self {
            m1,
            m2,
            m3,
            mu2: c.mu2,
            mu3: c.mu3,
            skew: c.skew,
        })
    }

    pub fn is_degenerate(&self) -> bool {
        is_degenerate(self.m1, self.mu2)
    }

    pub fn variance(&self) -> f64 {
        self.mu2
    }

    fn from_parts(m1: f64, m2: f64, m3: f64, mu2: f64, mu3: f64) -> Self {
        Self {
            m1,
            m2,
            m3,
            mu2,
            mu3,
            skew: skewness(m1, mu2, mu3),
        }
    }
}

fn is_degenerate(m1: f64, mu2: f64) -> bool {
    mu2 < DEGENERATE_VARIANCE * m1 * m1 || mu2 <= 0.0
}

fn skewness(m1: f64, mu2: f64, mu3: f64) -> Option<f64> {
    if is_degenerate(m1, mu2) {
        None
    } else {
        Some(mu3 / mu2.powf(1.5))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CentralMoments {
    pub mu2: f64,
    pub mu3: f64,
    pub skew: Option<f64>,
}

/// Variance, third central moment and skewness from raw moments.
pub fn central_from_raw(m1: f64, m2: f64, m3: f64) -> Result<CentralMoments> {
    if !(m1.is_finite() && m2.is_finite() && m3.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite moments ({m1}, {m2}, {m3})"
        )));
    }
    let mut mu2 = m2 - m1 * m1;
    let scale = m2.abs().max(m1 * m1);
    if mu2 < 0.0 {
        if mu2 < -DEGENERATE_VARIANCE * scale {
            return Err(Error::NegativeVariance(mu2));
        }
        mu2 = 0.0;
    }
    let mu3 = m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1;
    let skew = if mu2 <= DEGENERATE_VARIANCE * scale {
        None
    } else {
        Some(mu3 / mu2.powf(1.5))
    };
    Ok(CentralMoments { mu2, mu3, skew })
}

/// Sensitivities of `(m1, mu2, mu3)` to each index's spot and volatility.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentGradient {
    /// `d(m1, mu2, mu3) / d spot_p`, ratios held fixed.
    pub spot: Vec<[f64; 3]>,
    /// `d(m1, mu2, mu3) / d σ_p`.
    pub vol: Vec<[f64; 3]>,
}

/// Moment kernels of `(1/N) Σ_k Σ_i coeff_i I^i_{t_k}`.
#[derive(Debug, Clone)]
pub struct MomentModel {
    /// Basket coefficients (`α_i` or fund units); `c_i = coeff_i · spot_i`.
    coeffs: Vec<f64>,
    spots: Vec<f64>,
    drifts: Vec<f64>,
    vols: Vec<f64>,
    corr: Vec<f64>,
    times: Vec<f64>,
}

impl MomentModel {
    /// The averaged basket of an Asian option.
    pub fn asian(market: &Market) -> Self {
        let basket = market.basket();
        Self {
            coeffs: basket.alphas().to_vec(),
            spots: market.spots(),
            drifts: market.drifts(),
            vols: market.vols(),
            corr: market.correlation().as_slice().to_vec(),
            times: market.schedule().times().to_vec(),
        }
    }

    /// `Σ_i weights_i I^i_T`, a single observation at `maturity`.
    pub fn terminal(
        weights: &[f64],
        indices: &[IndexSpec],
        corr: &CorrelationMatrix,
        rate: f64,
        maturity: f64,
    ) -> Result<Self> {
        let m = indices.len();
        if weights.len() != m || corr.dim() != m {
            return Err(Error::DimensionMismatch(format!(
                "{} weights, {m} indices, {}x{} correlation",
                weights.len(),
                corr.dim(),
                corr.dim()
            )));
        }
        Ok(Self {
            coeffs: weights.to_vec(),
            spots: indices.iter().map(|ix| ix.spot).collect(),
            drifts: indices.iter().map(|ix| ix.drift(rate)).collect(),
            vols: indices.iter().map(|ix| ix.vol).collect(),
            corr: corr.as_slice().to_vec(),
            times: vec![maturity],
        })
    }

    fn n_assets(&self) -> usize {
        self.coeffs.len()
    }

    fn tables(&self) -> Tables {
        let m = self.n_assets();
        let n = self.times.len();
        let mut growth = vec![0.0; m * n];
        let mut level = vec![0.0; m * n];
        for i in 0..m {
            let c = self.coeffs[i] * self.spots[i];
            for k in 0..n {
                growth[i * n + k] = (self.drifts[i] * self.times[k]).exp();
                level[i * n + k] = c * growth[i * n + k];
            }
        }
        let mut cov = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                cov[i * m + j] = self.vols[i] * self.vols[j] * self.corr[i * m + j];
            }
        }
        let mut min_time = vec![0.0; n * n];
        for k in 0..n {
            for l in 0..n {
                min_time[k * n + l] = self.times[k].min(self.times[l]);
            }
        }
        // exp and expm1 of s_ij min(t_k, t_l), indexed [(i*m + j)*n*n + k*n + l]
        let mut exp_cov = vec![0.0; m * m * n * n];
        let mut expm1_cov = vec![0.0; m * m * n * n];
        for ij in 0..m * m {
            for kl in 0..n * n {
                let x = cov[ij] * min_time[kl];
                exp_cov[ij * n * n + kl] = x.exp();
                expm1_cov[ij * n * n + kl] = x.exp_m1();
            }
        }
        Tables {
            m,
            n,
            growth,
            level,
            min_time,
            exp_cov,
            expm1_cov,
        }
    }

    /// `E[Z_s Z_t]` for the basket `Z = Σ_i coeff_i I^i`.
    pub fn pair_moment(&self, s: f64, t: f64) -> f64 {
        let m = self.n_assets();
        let mut acc = CompensatedSum::default();
        for i in 0..m {
            for j in 0..m {
                let ci = self.coeffs[i] * self.spots[i];
                let cj = self.coeffs[j] * self.spots[j];
                let cov = self.vols[i] * self.vols[j] * self.corr[i * m + j];
                acc.add(ci * cj * (self.drifts[i] * s + self.drifts[j] * t + cov * s.min(t)).exp());
            }
        }
        acc.value()
    }

    /// `E[Z_s Z_t Z_u]`.
    pub fn triple_moment(&self, s: f64, t: f64, u: f64) -> f64 {
        let m = self.n_assets();
        let cov = |i: usize, j: usize| self.vols[i] * self.vols[j] * self.corr[i * m + j];
        let mut acc = CompensatedSum::default();
        for i in 0..m {
            for j in 0..m {
                for h in 0..m {
                    let c = self.coeffs[i]
                        * self.spots[i]
                        * self.coeffs[j]
                        * self.spots[j]
                        * self.coeffs[h]
                        * self.spots[h];
                    let x = self.drifts[i] * s
                        + self.drifts[j] * t
                        + self.drifts[h] * u
                        + cov(i, j) * s.min(t)
                        + cov(i, h) * s.min(u)
                        + cov(j, h) * t.min(u);
                    acc.add(c * x.exp());
                }
            }
        }
        acc.value()
    }

    /// Raw moments from the product kernels and central moments from the
    /// centred kernels.
    pub fn moments(&self) -> MomentSet {
        let t = self.tables();
        let (m, n) = (t.m, t.n);
        let nn = n * n;
        let inv_n = 1.0 / n as f64;

        let mut s1 = CompensatedSum::default();
        for i in 0..m {
            for k in 0..n {
                s1.add(t.level[i * n + k]);
            }
        }

        let mut s2 = CompensatedSum::default();
        let mut c2 = CompensatedSum::default();
        for i in 0..m {
            for j in 0..m {
                let ij = (i * m + j) * nn;
                for k in 0..n {
                    for l in 0..n {
                        let g = t.level[i * n + k] * t.level[j * n + l];
                        s2.add(g * t.exp_cov[ij + k * n + l]);
                        c2.add(g * t.expm1_cov[ij + k * n + l]);
                    }
                }
            }
        }

        let mut s3 = CompensatedSum::default();
        let mut c3 = CompensatedSum::default();
        for i in 0..m {
            for j in 0..m {
                let ij = (i * m + j) * nn;
                for h in 0..m {
                    let ih = (i * m + h) * nn;
                    let jh = (j * m + h) * nn;
                    for k in 0..n {
                        for l in 0..n {
                            let gg = t.level[i * n + k] * t.level[j * n + l];
                            let e1 = t.exp_cov[ij + k * n + l];
                            let a1 = t.expm1_cov[ij + k * n + l];
                            for q in 0..n {
                                let ggg = gg * t.level[h * n + q];
                                let e2 = t.exp_cov[ih + k * n + q];
                                let e3 = t.exp_cov[jh + l * n + q];
                                s3.add(ggg * e1 * e2 * e3);
                                let a2 = t.expm1_cov[ih + k * n + q];
                                let a3 = t.expm1_cov[jh + l * n + q];
                                c3.add(ggg * (a1 * a2 + a1 * a3 + a2 * a3 + a1 * a2 * a3));
                            }
                        }
                    }
                }
            }
        }

        let m1 = s1.value() * inv_n;
        let m2 = s2.value() * inv_n * inv_n;
        let m3 = s3.value() * inv_n * inv_n * inv_n;
        let mu2 = (c2.value() * inv_n * inv_n).max(0.0);
        let mu3 = c3.value() * inv_n * inv_n * inv_n;
        MomentSet::from_parts(m1, m2, m3, mu2, mu3)
    }

    /// Moments together with their derivatives in each spot (coefficients
    /// fixed) and each volatility.
    pub fn moments_with_gradient(&self) -> (MomentSet, MomentGradient) {
        let moments = self.moments();
        let t = self.tables();
        let (m, n) = (t.m, t.n);
        let nn = n * n;
        let inv_n = 1.0 / n as f64;

        let mut spot = vec![[0.0; 3]; m];
        let mut vol = vec![[0.0; 3]; m];

        // d(level_ik)/d spot_p = [i = p] coeff_p growth_pk
        for (p, grad) in spot.iter_mut().enumerate() {
            let mut s = CompensatedSum::default();
            for k in 0..n {
                s.add(self.coeffs[p] * t.growth[p * n + k]);
            }
            grad[0] = s.value() * inv_n;
        }

        // ds_ij/dσ_p = ρ_ij (σ_j [i=p] + σ_i [j=p])
        let rho = |i: usize, j: usize| self.corr[i * m + j];
        let sig = &self.vols;

        let mut d2_spot = vec![CompensatedSum::default(); m];
        let mut d2_vol = vec![CompensatedSum::default(); m];
        for i in 0..m {
            for j in 0..m {
                let ij = (i * m + j) * nn;
                for k in 0..n {
                    for l in 0..n {
                        let kl = k * n + l;
                        let g = t.level[i * n + k] * t.level[j * n + l];
                        let a = t.expm1_cov[ij + kl];
                        // d/dc_i and d/dc_j, divided by the spot-independent part later
                        d2_spot[i].add(g * a / self.spots[i]);
                        d2_spot[j].add(g * a / self.spots[j]);
                        let de = g * t.exp_cov[ij + kl] * t.min_time[kl] * rho(i, j);
                        d2_vol[i].add(de * sig[j]);
                        d2_vol[j].add(de * sig[i]);
                    }
                }
            }
        }

        let mut d3_spot = vec![CompensatedSum::default(); m];
        let mut d3_vol = vec![CompensatedSum::default(); m];
        for i in 0..m {
            for j in 0..m {
                let ij = (i * m + j) * nn;
                for h in 0..m {
                    let ih = (i * m + h) * nn;
                    let jh = (j * m + h) * nn;
                    for k in 0..n {
                        for l in 0..n {
                            let kl = k * n + l;
                            let gg = t.level[i * n + k] * t.level[j * n + l];
                            let a1 = t.expm1_cov[ij + kl];
                            let e1 = t.exp_cov[ij + kl];
                            let tau1 = t.min_time[kl] * rho(i, j);
                            for q in 0..n {
                                let kq = k * n + q;
                                let lq = l * n + q;
                                let ggg = gg * t.level[h * n + q];
                                let a2 = t.expm1_cov[ih + kq];
                                let a3 = t.expm1_cov[jh + lq];
                                let body = ggg * (a1 * a2 + a1 * a3 + a2 * a3 + a1 * a2 * a3);
                                d3_spot[i].add(body / self.spots[i]);
                                d3_spot[j].add(body / self.spots[j]);
                                d3_spot[h].add(body / self.spots[h]);

                                let e2 = t.exp_cov[ih + kq];
                                let e3 = t.exp_cov[jh + lq];
                                // partials of the centred product in each exponent
                                let q1 = ggg * e1 * (a2 + a3 + a2 * a3);
                                let q2 = ggg * e2 * (a1 + a3 + a1 * a3);
                                let q3 = ggg * e3 * (a1 + a2 + a1 * a2);
                                let tau2 = t.min_time[kq] * rho(i, h);
                                let tau3 = t.min_time[lq] * rho(j, h);
                                d3_vol[i].add(q1 * tau1 * sig[j] + q2 * tau2 * sig[h]);
                                d3_vol[j].add(q1 * tau1 * sig[i] + q3 * tau3 * sig[h]);
                                d3_vol[h].add(q2 * tau2 * sig[i] + q3 * tau3 * sig[j]);
                            }
                        }
                    }
                }
            }
        }

        let n2 = inv_n * inv_n;
        let n3 = n2 * inv_n;
        for p in 0..m {
            spot[p][1] = d2_spot[p].value() * n2;
            spot[p][2] = d3_spot[p].value() * n3;
            vol[p][1] = d2_vol[p].value() * n2;
            vol[p][2] = d3_vol[p].value() * n3;
        }
        (moments, MomentGradient { spot, vol })
    }
}

struct Tables {
    m: usize,
    n: usize,
    growth: Vec<f64>,
    level: Vec<f64>,
    min_time: Vec<f64>,
    exp_cov: Vec<f64>,
    expm1_cov: Vec<f64>,
}

/// Moments of the arithmetic average of the basket over the schedule.
pub fn asian_moments(market: &Market) -> MomentSet {
    MomentModel::asian(market).moments()
}

/// Moments of `Σ_i weights_i I^i_T`.
pub fn terminal_moments(
    weights: &[f64],
    indices: &[IndexSpec],
    corr: &CorrelationMatrix,
    rate: f64,
    maturity: f64,
) -> Result<MomentSet> {
    Ok(MomentModel::terminal(weights, indices, corr, rate, maturity)?.moments())
}
