//! Random-phase non-orthogonal pilots, measurement operators, and noisy
//! received pilot signals.
//!
//! Slot and pilot indices are zero-based throughout.

use std::f64::consts::PI;

use rand::Rng;

use crate::channel::DftPair;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{cis, CMat, CVec};
use crate::rng::{complex_gaussian, rng_from_seed};

/// Equi-spaced 1-based pilot subcarriers `ξ_p = (p−1)·N/P + 1`.
pub fn pilot_indices(config: &SystemConfig) -> Vec<usize> {
    let step = config.n_subcarriers / config.n_pilot_subcarriers;
    (0..config.n_pilot_subcarriers).map(|p| p * step + 1).collect()
}

/// Phase-only training ensemble for `G` slots.
///
/// RF stages depend on the slot (and the BS for the precoder) only, so every
/// pilot subcarrier in a slot sees the same analog network. Baseband stages
/// are drawn per subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotEnsemble {
    /// `[t]`: `N_a^US × N_BB^US`.
    pub rf_combiner: Vec<CMat>,
    /// `[t][p]`: `N_BB^US × N_BB^US`.
    pub bb_combiner: Vec<Vec<CMat>>,
    /// `[t][m]`: `N_a^BS × N_BB^BS`.
    pub rf_precoder: Vec<Vec<CMat>>,
    /// `[t][p][m]`: effective baseband training `F_BB·s`, length `N_BB^BS`.
    pub training: Vec<Vec<Vec<CVec>>>,
}

fn random_phases<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| cis(rng.random::<f64>() * 2.0 * PI))
}

pub fn draw_ensemble(config: &SystemConfig, seed: u64) -> Result<PilotEnsemble> {
    config.validate()?;
    let mut rng = rng_from_seed(seed);
    let (g, p_count, m_count) = (config.n_slots, config.n_pilot_subcarriers, config.n_bs);
    let mut ens = PilotEnsemble {
        rf_combiner: Vec::with_capacity(g),
        bb_combiner: Vec::with_capacity(g),
        rf_precoder: Vec::with_capacity(g),
        training: Vec::with_capacity(g),
    };
    // slot-major order: a G-slot ensemble is a prefix of any longer one
    for _ in 0..g {
        ens.rf_combiner.push(random_phases(&mut rng, config.n_ant_user, config.n_chain_user));
        ens.bb_combiner.push(
            (0..p_count)
                .map(|_| random_phases(&mut rng, config.n_chain_user, config.n_chain_user))
                .collect(),
        );
        ens.rf_precoder.push(
            (0..m_count).map(|_| random_phases(&mut rng, config.n_ant_bs, config.n_chain_bs)).collect(),
        );
        ens.training.push(
            (0..p_count)
                .map(|_| {
                    (0..m_count)
                        .map(|_| random_phases(&mut rng, config.n_chain_bs, 1).column(0).into_owned())
                        .collect()
                })
                .collect(),
        );
    }
    Ok(ens)
}

impl PilotEnsemble {
    pub fn n_slots(&self) -> usize {
        self.rf_combiner.len()
    }

    pub fn n_pilots(&self) -> usize {
        self.bb_combiner.first().map_or(0, Vec::len)
    }

    pub fn n_bs(&self) -> usize {
        self.rf_precoder.first().map_or(0, Vec::len)
    }

    /// `Z_p^(t) = Z_RF^(t) Z_BB,p^(t)`.
    pub fn combiner(&self, t: usize, p: usize) -> CMat {
        &self.rf_combiner[t] * &self.bb_combiner[t][p]
    }

    /// `f_{p,m}^(t) = F_RF^(t,m) s̃_{p,m}^(t) / √(N_a^BS N_BB^BS)`.
    pub fn pilot_vector(&self, t: usize, p: usize, m: usize) -> CVec {
        let f_rf = &self.rf_precoder[t][m];
        let scale = 1.0 / ((f_rf.nrows() * f_rf.ncols()) as f64).sqrt();
        (f_rf * &self.training[t][p][m]).scale(scale)
    }

    fn check(&self, dft: &DftPair, t: usize, p: usize) -> Result<()> {
        if t >= self.n_slots() || p >= self.n_pilots() {
            return Err(Error::InvalidParameter(format!(
                "slot {t} / pilot {p} outside ensemble of {} slots and {} pilots",
                self.n_slots(),
                self.n_pilots()
            )));
        }
        let nr = self.rf_combiner[0].nrows();
        let nt = self.rf_precoder[0][0].nrows();
        if dft.rx_dft.nrows() != nr || dft.tx_dft.nrows() != nt {
            return Err(Error::DimensionMismatch(format!(
                "ensemble arrays are {nr}×{nt}, DFT pair is {}×{}",
                dft.rx_dft.nrows(),
                dft.tx_dft.nrows()
            )));
        }
        Ok(())
    }
}

/// `Φ_p^(t) = (Ā_T^* f̄_p^(t))^T ⊗ (Z_p^(t))^* A_R`, of size
/// `N_BB^US × M·N_a^BS·N_a^US`.
pub fn slot_measurement(ens: &PilotEnsemble, dft: &DftPair, t: usize, p: usize) -> Result<CMat> {
    ens.check(dft, t, p)?;
    let nt = dft.tx_dft.nrows();
    let m_count = ens.n_bs();
    let mut tx = CVec::zeros(m_count * nt);
    for m in 0..m_count {
        let block = dft.tx_dft.adjoint() * ens.pilot_vector(t, p, m);
        tx.rows_mut(m * nt, nt).copy_from(&block);
    }
    let rx = ens.combiner(t, p).adjoint() * &dft.rx_dft;
    Ok(kron_row(&tx, &rx))
}

/// `u^T ⊗ W` for a column vector `u`.
fn kron_row(u: &CVec, w: &CMat) -> CMat {
    let (rows, nr) = w.shape();
    CMat::from_fn(rows, u.len() * nr, |i, j| u[j / nr] * w[(i, j % nr)])
}

/// Vertical stack of `Φ_p^(1) … Φ_p^(G)` in slot order.
pub fn stack_measurements(ens: &PilotEnsemble, dft: &DftPair, p: usize) -> Result<CMat> {
    let slots = (0..ens.n_slots()).map(|t| slot_measurement(ens, dft, t, p)).collect::<Result<Vec<_>>>()?;
    let rows_per = slots[0].nrows();
    let cols = slots[0].ncols();
    let mut out = CMat::zeros(rows_per * slots.len(), cols);
    for (t, s) in slots.iter().enumerate() {
        out.rows_mut(t * rows_per, rows_per).copy_from(s);
    }
    Ok(out)
}

/// Noise variance per complex entry that realizes `snr_db` under
/// `SNR = Σ_p ‖Φ_p h_p‖² / (rows · P · σ²)`. Infinite SNR gives zero.
pub fn calibrate_noise_variance(operators: &[CMat], signals: &[CVec], snr_db: f64) -> Result<f64> {
    if operators.len() != signals.len() || operators.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} operators for {} signals",
            operators.len(),
            signals.len()
        )));
    }
    let mut energy = 0.0;
    let mut entries = 0usize;
    for (phi, h) in operators.iter().zip(signals) {
        if phi.ncols() != h.len() {
            return Err(Error::DimensionMismatch("operator columns differ from signal length".into()));
        }
        energy += (phi * h).norm_squared();
        entries += phi.nrows();
    }
    if energy == 0.0 {
        return Err(Error::UndefinedSnr);
    }
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(energy / (entries as f64 * 10f64.powf(snr_db / 10.0)))
}

/// `r = Φ h + v`, with `v` circularly-symmetric Gaussian of variance `σ²`.
pub fn synthesize_received(phi: &CMat, h: &CVec, noise_variance: f64, seed: u64) -> Result<CVec> {
    if !(noise_variance >= 0.0) {
        return Err(Error::InvalidParameter("noise variance must be non-negative".into()));
    }
    if phi.ncols() != h.len() {
        return Err(Error::DimensionMismatch("operator columns differ from signal length".into()));
    }
    let mut r = phi * h;
    if noise_variance > 0.0 {
        let mut rng = rng_from_seed(seed);
        for z in r.iter_mut() {
            *z += complex_gaussian(&mut rng, noise_variance);
        }
    }
    Ok(r)
}

/// Stacked operators and received vectors for every pilot subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub operators: Vec<CMat>,
    pub received: Vec<CVec>,
    pub noise_variance: f64,
    pub pilot_indices: Vec<usize>,
}

impl MeasurementSet {
    pub fn rows(&self) -> usize {
        self.operators.first().map_or(0, |m| m.nrows())
    }
}

/// Builds `Φ_p^[G]`, calibrates `σ²` to `snr_db`, and draws `r_p^[G]`.
/// Noise for pilot `p` uses seed `noise_seed + p`.
pub fn measure(
    ens: &PilotEnsemble,
    dft: &DftPair,
    signals: &[CVec],
    pilot_indices: &[usize],
    snr_db: f64,
    noise_seed: u64,
) -> Result<MeasurementSet> {
    if signals.len() != ens.n_pilots() {
        return Err(Error::DimensionMismatch(format!(
            "{} signals for {} pilot subcarriers",
            signals.len(),
            ens.n_pilots()
        )));
    }
    let operators = (0..ens.n_pilots()).map(|p| stack_measurements(ens, dft, p)).collect::<Result<Vec<_>>>()?;
    let noise_variance = calibrate_noise_variance(&operators, signals, snr_db)?;
    let received = operators
        .iter()
        .zip(signals)
        .enumerate()
        .map(|(p, (phi, h))| synthesize_received(phi, h, noise_variance, noise_seed.wrapping_add(p as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasurementSet { operators, received, noise_variance, pilot_indices: pilot_indices.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{vect, ONE, ZERO};
    use num_complex::Complex64;

    fn small() -> SystemConfig {
        SystemConfig {
            n_ant_user: 4,
            n_chain_user: 2,
            n_ant_bs: 8,
            n_chain_bs: 2,
            n_bs: 2,
            n_paths: 2,
            n_subcarriers: 64,
            n_pilot_subcarriers: 4,
            n_slots: 3,
            ..SystemConfig::default()
        }
    }

    #[test]
    fn pilot_placement_is_equispaced() {
        let cfg = SystemConfig { n_subcarriers: 64, n_pilot_subcarriers: 8, ..SystemConfig::default() };
        assert_eq!(pilot_indices(&cfg), vec![1, 9, 17, 25, 33, 41, 49, 57]);
    }

    #[test]
    fn ensemble_entries_are_unit_modulus() {
        let ens = draw_ensemble(&small(), 1).unwrap();
        let mut worst: f64 = 0.0;
        let mut check = |m: &CMat| {
            for z in m.iter() {
                worst = worst.max((z.norm() - 1.0).abs());
            }
        };
        ens.rf_combiner.iter().for_each(&mut check);
        ens.bb_combiner.iter().flatten().for_each(&mut check);
        ens.rf_precoder.iter().flatten().for_each(&mut check);
        for v in ens.training.iter().flatten().flatten() {
            for z in v.iter() {
                worst = worst.max((z.norm() - 1.0).abs());
            }
        }
        assert!(worst < 1e-15, "{worst}");
    }

    #[test]
    fn ensemble_is_seed_deterministic_and_prefix_stable() {
        let cfg = small();
        assert_eq!(draw_ensemble(&cfg, 9).unwrap(), draw_ensemble(&cfg, 9).unwrap());
        assert_ne!(draw_ensemble(&cfg, 9).unwrap(), draw_ensemble(&cfg, 10).unwrap());
        let long = draw_ensemble(&SystemConfig { n_slots: 5, ..cfg.clone() }, 9).unwrap();
        let short = draw_ensemble(&cfg, 9).unwrap();
        assert_eq!(long.rf_combiner[..3], short.rf_combiner[..]);
        assert_eq!(long.training[..3], short.training[..]);
    }

    #[test]
    fn stacking_order_and_single_slot() {
        let cfg = small();
        let ens = draw_ensemble(&cfg, 2).unwrap();
        let dft = DftPair::for_config(&cfg);
        let stacked = stack_measurements(&ens, &dft, 1).unwrap();
        assert_eq!(stacked.shape(), (6, cfg.unknown_dim()));
        let slot2 = slot_measurement(&ens, &dft, 1, 1).unwrap();
        assert_eq!(stacked.rows(2, 2).into_owned(), slot2);

        let one = draw_ensemble(&SystemConfig { n_slots: 1, ..cfg }, 2).unwrap();
        assert_eq!(stack_measurements(&one, &dft, 0).unwrap(), slot_measurement(&one, &dft, 0, 0).unwrap());
    }

    #[test]
    fn selection_case() {
        // identity bases, elementary combiner and pilot: Φ picks one entry of vect(H̄)
        let ens = PilotEnsemble {
            rf_combiner: vec![CMat::from_column_slice(3, 1, &[ZERO, ONE, ZERO])],
            bb_combiner: vec![vec![CMat::from_element(1, 1, ONE)]],
            rf_precoder: vec![vec![CMat::from_column_slice(4, 1, &[ZERO, ZERO, ONE, ZERO])]],
            training: vec![vec![vec![CVec::from_element(1, ONE)]]],
        };
        let dft = DftPair { rx_dft: CMat::identity(3, 3), tx_dft: CMat::identity(4, 4) };
        let phi = slot_measurement(&ens, &dft, 0, 0).unwrap();
        assert_eq!(phi.shape(), (1, 12));
        let nonzero: Vec<usize> = (0..12).filter(|&j| phi[(0, j)].norm() > 0.0).collect();
        // row 1, column 2 of a 3×4 matrix → 2·3 + 1
        assert_eq!(nonzero, vec![7]);
        // pilot power normalization 1/√(N_a^BS·N_BB^BS) = 1/2
        assert!((phi[(0, 7)] - ONE.scale(0.5)).norm() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let cfg = small();
        let ens = draw_ensemble(&cfg, 2).unwrap();
        assert!(matches!(
            slot_measurement(&ens, &DftPair::new(5, 8), 0, 0),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(slot_measurement(&ens, &DftPair::for_config(&cfg), 3, 0).is_err());
    }

    #[test]
    fn noise_calibration_definition() {
        let phi = CMat::identity(4, 4);
        let h = CVec::from_element(4, Complex64::new(1.0, 0.0));
        // signal energy 4 over 4 entries at 0 dB
        assert!((calibrate_noise_variance(&[phi.clone()], &[h.clone()], 0.0).unwrap() - 1.0).abs() < 1e-15);
        let mut prev = f64::MAX;
        for snr in [-10.0, 0.0, 10.0, 40.0, 100.0] {
            let s = calibrate_noise_variance(&[phi.clone()], &[h.clone()], snr).unwrap();
            assert!(s < prev);
            prev = s;
        }
        assert_eq!(calibrate_noise_variance(&[phi.clone()], &[h], f64::INFINITY).unwrap(), 0.0);
        assert_eq!(
            calibrate_noise_variance(&[phi], &[CVec::zeros(4)], 10.0),
            Err(Error::UndefinedSnr)
        );
    }

    #[test]
    fn received_noiseless_and_seeded() {
        let phi = CMat::from_fn(3, 5, |i, j| Complex64::new(i as f64, j as f64));
        let h = CVec::from_fn(5, |i, _| Complex64::new(1.0, -(i as f64)));
        assert_eq!(synthesize_received(&phi, &h, 0.0, 1).unwrap(), &phi * &h);
        assert_eq!(
            synthesize_received(&phi, &h, 0.5, 4).unwrap(),
            synthesize_received(&phi, &h, 0.5, 4).unwrap()
        );
        assert!(synthesize_received(&phi, &h, -1.0, 4).is_err());
    }

    #[test]
    fn kronecker_identity_random() {
        let cfg = small();
        let dft = DftPair::for_config(&cfg);
        let mut rng = rng_from_seed(77);
        for seed in 0..20 {
            let ens = draw_ensemble(&cfg, seed).unwrap();
            let hbar = CMat::from_fn(cfg.n_ant_user, cfg.n_bs * cfg.n_ant_bs, |_, _| complex_gaussian(&mut rng, 1.0));
            let phi = slot_measurement(&ens, &dft, 1, 2).unwrap();
            let lhs = &phi * vect(&hbar);
            let mut fbar = CVec::zeros(cfg.n_bs * cfg.n_ant_bs);
            let mut at_bar = CMat::zeros(cfg.n_bs * cfg.n_ant_bs, cfg.n_bs * cfg.n_ant_bs);
            for m in 0..cfg.n_bs {
                fbar.rows_mut(m * cfg.n_ant_bs, cfg.n_ant_bs).copy_from(&ens.pilot_vector(1, 2, m));
                at_bar
                    .view_mut((m * cfg.n_ant_bs, m * cfg.n_ant_bs), (cfg.n_ant_bs, cfg.n_ant_bs))
                    .copy_from(&dft.tx_dft.adjoint());
            }
            let rhs = ens.combiner(1, 2).adjoint() * &dft.rx_dft * &hbar * at_bar * fbar;
            assert!((&lhs - &rhs).norm() <= 1e-10 * rhs.norm());
        }
    }
}
