//! Multipath mmWave channel synthesis and the delay → frequency → angular chain.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{LinkBudgetParams, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{cis, CMat, CVec};
use crate::rng::{complex_gaussian, rng_from_seed};

/// Entries below this fraction of the largest magnitude count as zero.
pub const SUPPORT_REL_THRESHOLD: f64 = 1e-9;

/// Path loss in dB: `32.5 + 20 log10(f_c) + 10 α log10(d) + (α_o + α_r) d`,
/// with `f_c` in MHz and `d` in km.
pub fn path_loss_db(params: &LinkBudgetParams) -> Result<f64> {
    params.validate()?;
    let p = params;
    Ok(32.5
        + 20.0 * p.carrier_freq_mhz.log10()
        + 10.0 * p.path_loss_exponent * p.distance_km.log10()
        + (p.atmos_atten_db_per_km + p.rain_atten_db_per_km) * p.distance_km)
}

/// ULA response `exp(j 2π k (d/λ) sin θ)` for `k = 0..n`.
pub fn steering_vector(n_antennas: usize, sin_angle: f64, spacing_ratio: f64) -> Result<CVec> {
    if n_antennas == 0 {
        return Err(Error::InvalidParameter("steering vector needs at least one antenna".into()));
    }
    if !(-1.0..=1.0).contains(&sin_angle) {
        return Err(Error::InvalidParameter(format!("sin(angle) = {sin_angle} outside [-1, 1]")));
    }
    if !(spacing_ratio > 0.0) {
        return Err(Error::InvalidParameter("antenna spacing ratio must be positive".into()));
    }
    Ok(CVec::from_fn(n_antennas, |k, _| cis(2.0 * PI * k as f64 * spacing_ratio * sin_angle)))
}

/// sin(angle) of DFT grid bin `index` for an `n`-element array, wrapped to
/// the unambiguous interval `[-1/(2d), 1/(2d))`.
pub fn grid_sin(index: usize, n: usize, spacing_ratio: f64) -> f64 {
    let period = 1.0 / spacing_ratio;
    let s = index as f64 / (n as f64 * spacing_ratio);
    if s >= period / 2.0 {
        s - period
    } else {
        s
    }
}

/// Steering vector pointing exactly at grid bin `index`.
pub fn grid_steering(n: usize, index: usize) -> CVec {
    CVec::from_fn(n, |k, _| cis(2.0 * PI * ((k * index) % n) as f64 / n as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathComponent {
    pub gain: Complex64,
    pub delay_s: f64,
    pub aoa_grid_index: usize,
    pub aod_grid_index: usize,
    pub is_los: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipathChannel {
    /// One path list per BS link; index 0 of each list is the LOS path.
    pub per_bs_paths: Vec<Vec<PathComponent>>,
}

/// Mean power of the LOS path and of each NLOS path for a unit-power link.
pub fn rician_powers(n_paths: usize, k_db: f64) -> (f64, f64) {
    if n_paths == 1 {
        return (1.0, 0.0);
    }
    let k = 10f64.powf(k_db / 10.0);
    if k.is_infinite() {
        return (1.0, 0.0);
    }
    let los = k / (k + 1.0);
    let nlos = 1.0 / ((k + 1.0) * (n_paths - 1) as f64);
    (los, nlos)
}

/// Draws an on-grid Rician multipath channel for every BS link.
pub fn draw_multipath(config: &SystemConfig, seed: u64) -> Result<MultipathChannel> {
    config.validate()?;
    let mut rng = rng_from_seed(seed);
    let l = config.n_paths;
    let (p_los, p_nlos) = rician_powers(l, config.rician_k_db);
    let mut per_bs_paths = Vec::with_capacity(config.n_bs);
    for _ in 0..config.n_bs {
        let aod = rand::seq::index::sample(&mut rng, config.n_ant_bs, l).into_vec();
        let aoa = rand::seq::index::sample(&mut rng, config.n_ant_user, l).into_vec();
        let paths = (0..l)
            .map(|i| {
                let power = if i == 0 { p_los } else { p_nlos };
                PathComponent {
                    gain: complex_gaussian(&mut rng, power),
                    delay_s: rng.random::<f64>() * config.max_delay_s,
                    aoa_grid_index: aoa[i],
                    aod_grid_index: aod[i],
                    is_los: i == 0,
                }
            })
            .collect();
        per_bs_paths.push(paths);
    }
    Ok(MultipathChannel { per_bs_paths })
}

/// Frequency response of one BS link at 1-based subcarrier `n`.
pub fn link_frequency_response(
    paths: &[PathComponent],
    config: &SystemConfig,
    subcarrier: usize,
) -> CMat {
    let (nr, nt) = (config.n_ant_user, config.n_ant_bs);
    let mut h = CMat::zeros(nr, nt);
    for path in paths {
        let a_r = grid_steering(nr, path.aoa_grid_index);
        let a_t = grid_steering(nt, path.aod_grid_index);
        let phase = -2.0 * PI * (subcarrier as f64 - 1.0) * path.delay_s * config.bandwidth_hz
            / config.n_subcarriers as f64;
        let coef = path.gain * cis(phase);
        h += (a_r * a_t.adjoint()) * coef;
    }
    h
}

/// Frequency-domain matrices indexed `[pilot][bs]`, each `N_a^US × N_a^BS`.
pub fn delay_to_frequency(
    chan: &MultipathChannel,
    config: &SystemConfig,
    pilot_indices: &[usize],
) -> Result<Vec<Vec<CMat>>> {
    if let Some(&bad) = pilot_indices.iter().find(|&&n| n == 0 || n > config.n_subcarriers) {
        return Err(Error::InvalidParameter(format!(
            "pilot subcarrier {bad} outside [1, {}]",
            config.n_subcarriers
        )));
    }
    Ok(pilot_indices
        .iter()
        .map(|&n| {
            chan.per_bs_paths.iter().map(|paths| link_frequency_response(paths, config, n)).collect()
        })
        .collect())
}

/// Unitary receive/transmit DFT bases.
#[derive(Debug, Clone, PartialEq)]
pub struct DftPair {
    pub rx_dft: CMat,
    pub tx_dft: CMat,
}

pub fn unitary_dft(n: usize) -> CMat {
    let scale = 1.0 / (n as f64).sqrt();
    CMat::from_fn(n, n, |k, m| cis(2.0 * PI * ((k * m) % n) as f64 / n as f64) * scale)
}

impl DftPair {
    pub fn new(n_rx: usize, n_tx: usize) -> Self {
        Self { rx_dft: unitary_dft(n_rx), tx_dft: unitary_dft(n_tx) }
    }

    pub fn for_config(config: &SystemConfig) -> Self {
        Self::new(config.n_ant_user, config.n_ant_bs)
    }

    fn check(&self, m: &CMat) -> Result<()> {
        let want = (self.rx_dft.nrows(), self.tx_dft.nrows());
        if m.shape() != want {
            return Err(Error::DimensionMismatch(format!(
                "channel is {:?}, DFT pair expects {:?}",
                m.shape(),
                want
            )));
        }
        Ok(())
    }

    /// `H^a = A_R^* H^f A_T`.
    pub fn to_angular(&self, freq: &CMat) -> Result<CMat> {
        self.check(freq)?;
        Ok(self.rx_dft.adjoint() * freq * &self.tx_dft)
    }

    /// `H^f = A_R H^a A_T^*`.
    pub fn to_frequency(&self, angular: &CMat) -> Result<CMat> {
        self.check(angular)?;
        Ok(&self.rx_dft * angular * self.tx_dft.adjoint())
    }
}

/// Indices whose magnitude exceeds the numerical-zero threshold.
pub fn support_of(v: &CVec) -> Vec<usize> {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return Vec::new();
    }
    let cut = SUPPORT_REL_THRESHOLD * max;
    v.iter().enumerate().filter(|(_, z)| z.norm() >= cut).map(|(i, _)| i).collect()
}

/// Column-major vectorization of `[H_1 | H_2 | … | H_M]` and its support.
pub fn aggregate_sparse_vector(angular: &[CMat]) -> Result<(CVec, Vec<usize>)> {
    let Some(first) = angular.first() else {
        return Ok((CVec::zeros(0), Vec::new()));
    };
    let shape = first.shape();
    if angular.iter().any(|m| m.shape() != shape) {
        return Err(Error::DimensionMismatch("per-BS angular matrices differ in shape".into()));
    }
    let mut data = Vec::with_capacity(shape.0 * shape.1 * angular.len());
    for m in angular {
        data.extend_from_slice(m.as_slice());
    }
    let v = CVec::from_vec(data);
    let support = support_of(&v);
    Ok((v, support))
}

/// Jointly sparse angular vectors of all pilot subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularChannelSet {
    pub vectors: Vec<CVec>,
    pub support: Vec<usize>,
    pub sparsity: usize,
}

pub fn angular_channel_set(
    chan: &MultipathChannel,
    config: &SystemConfig,
    dft: &DftPair,
    pilot_indices: &[usize],
) -> Result<AngularChannelSet> {
    let freq = delay_to_frequency(chan, config, pilot_indices)?;
    let mut vectors = Vec::with_capacity(freq.len());
    let mut support = std::collections::BTreeSet::new();
    for per_bs in &freq {
        let angular = per_bs.iter().map(|h| dft.to_angular(h)).collect::<Result<Vec<_>>>()?;
        let (v, s) = aggregate_sparse_vector(&angular)?;
        support.extend(s);
        vectors.push(v);
    }
    let support: Vec<usize> = support.into_iter().collect();
    Ok(AngularChannelSet { sparsity: support.len(), support, vectors })
}

/// Frequency-domain matrices `[bs]` recovered from one stacked angular vector.
pub fn split_angular_vector(v: &CVec, config: &SystemConfig, dft: &DftPair) -> Result<Vec<CMat>> {
    let block = config.n_ant_user * config.n_ant_bs;
    if v.len() != block * config.n_bs {
        return Err(Error::DimensionMismatch(format!(
            "angular vector has length {}, expected {}",
            v.len(),
            block * config.n_bs
        )));
    }
    (0..config.n_bs)
        .map(|m| {
            let h_a = CMat::from_column_slice(
                config.n_ant_user,
                config.n_ant_bs,
                &v.as_slice()[m * block..(m + 1) * block],
            );
            dft.to_frequency(&h_a)
        })
        .collect()
}
