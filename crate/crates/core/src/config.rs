//! System parameters and the flat `key = value` configuration format.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unknown dimension above which a configuration is reported as long-running.
pub const LONG_RUNNING_DIM: usize = 8192;

/// Scalar parameters of one user estimating the channels of `n_bs` small cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n_ant_user: usize,
    pub n_chain_user: usize,
    pub n_ant_bs: usize,
    pub n_chain_bs: usize,
    pub n_bs: usize,
    pub n_paths: usize,
    pub n_subcarriers: usize,
    pub n_pilot_subcarriers: usize,
    pub bandwidth_hz: f64,
    pub max_delay_s: f64,
    pub antenna_spacing_ratio: f64,
    pub rician_k_db: f64,
    /// `inf` means noiseless measurements.
    pub snr_db: f64,
    pub n_slots: usize,
}

impl Default for SystemConfig {
    /// Desk-scale defaults: 512 unknowns per pilot subcarrier.
    fn default() -> Self {
        Self {
            n_ant_user: 8,
            n_chain_user: 2,
            n_ant_bs: 32,
            n_chain_bs: 4,
            n_bs: 2,
            n_paths: 4,
            n_subcarriers: 64,
            n_pilot_subcarriers: 16,
            bandwidth_hz: 0.25e9,
            max_delay_s: 100e-9,
            antenna_spacing_ratio: 0.5,
            rician_k_db: 10.0,
            snr_db: 20.0,
            n_slots: 10,
        }
    }
}

impl SystemConfig {
    /// The full-size simulation setup (65,536 unknowns per pilot subcarrier).
    pub fn paper_scale() -> Self {
        Self {
            n_ant_user: 32,
            n_chain_user: 2,
            n_ant_bs: 512,
            n_chain_bs: 8,
            n_bs: 4,
            n_paths: 4,
            n_subcarriers: 64,
            n_pilot_subcarriers: 64,
            n_slots: 12,
            ..Self::default()
        }
    }

    /// Length of the stacked angular vector `M·N_a^BS·N_a^US`.
    pub fn unknown_dim(&self) -> usize {
        self.n_bs * self.n_ant_bs * self.n_ant_user
    }

    /// Rows of a stacked measurement operator, `G·N_BB^US`.
    pub fn measurement_rows(&self) -> usize {
        self.n_slots * self.n_chain_user
    }

    /// Angular sparsity of an on-grid channel, `L·M`.
    pub fn sparsity(&self) -> usize {
        self.n_paths * self.n_bs
    }

    pub fn is_noiseless(&self) -> bool {
        self.snr_db == f64::INFINITY
    }

    pub fn is_long_running(&self) -> bool {
        self.unknown_dim() > LONG_RUNNING_DIM
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_ant_user", self.n_ant_user),
            ("n_chain_user", self.n_chain_user),
            ("n_ant_bs", self.n_ant_bs),
            ("n_chain_bs", self.n_chain_bs),
            ("n_bs", self.n_bs),
            ("n_paths", self.n_paths),
            ("n_subcarriers", self.n_subcarriers),
            ("n_pilot_subcarriers", self.n_pilot_subcarriers),
            ("n_slots", self.n_slots),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(invariant(key, "must be a positive integer"));
            }
        }
        if self.n_chain_user > self.n_ant_user {
            return Err(invariant("n_chain_user, n_ant_user", "n_chain_user must not exceed n_ant_user"));
        }
        if self.n_chain_bs > self.n_ant_bs {
            return Err(invariant("n_chain_bs, n_ant_bs", "n_chain_bs must not exceed n_ant_bs"));
        }
        if self.n_pilot_subcarriers > self.n_subcarriers {
            return Err(invariant(
                "n_pilot_subcarriers, n_subcarriers",
                "n_pilot_subcarriers must not exceed n_subcarriers",
            ));
        }
        if self.n_subcarriers % self.n_pilot_subcarriers != 0 {
            return Err(invariant(
                "n_pilot_subcarriers, n_subcarriers",
                "equi-spaced pilots need n_pilot_subcarriers to divide n_subcarriers",
            ));
        }
        if self.n_paths > self.n_ant_bs || self.n_paths > self.n_ant_user {
            return Err(invariant(
                "n_paths, n_ant_bs, n_ant_user",
                "on-grid paths need distinct grid bins, so n_paths must not exceed either array size",
            ));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(invariant("bandwidth_hz", "must be positive and finite"));
        }
        if !(self.max_delay_s >= 0.0 && self.max_delay_s.is_finite()) {
            return Err(invariant("max_delay_s", "must be non-negative and finite"));
        }
        if self.max_delay_s * self.bandwidth_hz >= self.n_subcarriers as f64 {
            return Err(invariant(
                "max_delay_s, bandwidth_hz, n_subcarriers",
                "guard condition max_delay_s * bandwidth_hz < n_subcarriers violated",
            ));
        }
        if !(self.antenna_spacing_ratio > 0.0 && self.antenna_spacing_ratio.is_finite()) {
            return Err(invariant("antenna_spacing_ratio", "must be positive and finite"));
        }
        if self.rician_k_db.is_nan() {
            return Err(invariant("rician_k_db", "must be a number"));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(invariant("snr_db", "must be a number or inf"));
        }
        Ok(())
    }
}

fn invariant(keys: &str, message: &str) -> Error {
    Error::ConfigInvariant { keys: keys.to_string(), message: message.to_string() }
}

/// Parameters of the log-distance path-loss budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudgetParams {
    pub carrier_freq_mhz: f64,
    pub path_loss_exponent: f64,
    pub distance_km: f64,
    pub atmos_atten_db_per_km: f64,
    pub rain_atten_db_per_km: f64,
}

impl LinkBudgetParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_freq_mhz > 0.0) {
            return Err(Error::InvalidParameter("carrier frequency must be positive".into()));
        }
        if !(self.distance_km > 0.0) {
            return Err(Error::InvalidParameter("distance must be positive".into()));
        }
        if !(self.path_loss_exponent > 0.0) {
            return Err(Error::InvalidParameter("path-loss exponent must be positive".into()));
        }
        if !(self.atmos_atten_db_per_km >= 0.0) || !(self.rain_atten_db_per_km >= 0.0) {
            return Err(Error::InvalidParameter("attenuation coefficients must be non-negative".into()));
        }
        Ok(())
    }
}

const KEYS: [&str; 14] = [
    "n_ant_user",
    "n_chain_user",
    "n_ant_bs",
    "n_chain_bs",
    "n_bs",
    "n_paths",
    "n_subcarriers",
    "n_pilot_subcarriers",
    "bandwidth_hz",
    "max_delay_s",
    "antenna_spacing_ratio",
    "rician_k_db",
    "snr_db",
    "n_slots",
];

/// Parses the flat config text. Blank lines and `#` comments are ignored,
/// missing keys keep their desk-scale defaults.
pub fn parse_config_str(text: &str) -> Result<SystemConfig> {
    let mut cfg = SystemConfig::default();
    let mut seen = std::collections::HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
            line,
            key: content.to_string(),
            message: "expected `key = value`".into(),
        })?;
        let key = key.trim();
        let value = value.trim();
        if !KEYS.contains(&key) {
            return Err(Error::Config { line, key: key.into(), message: "unknown key".into() });
        }
        if !seen.insert(key.to_string()) {
            return Err(Error::Config { line, key: key.into(), message: "duplicate key".into() });
        }
        set_field(&mut cfg, key, value).map_err(|message| Error::Config {
            line,
            key: key.into(),
            message,
        })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &std::path::Path) -> Result<SystemConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        line: 0,
        key: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config_str(&text)
}

fn set_field(cfg: &mut SystemConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    fn int(v: &str) -> std::result::Result<usize, String> {
        v.parse::<usize>().map_err(|_| format!("malformed integer `{v}`"))
    }
    fn real(v: &str) -> std::result::Result<f64, String> {
        v.parse::<f64>().map_err(|_| format!("malformed real `{v}`"))
    }
    match key {
        "n_ant_user" => cfg.n_ant_user = int(value)?,
        "n_chain_user" => cfg.n_chain_user = int(value)?,
        "n_ant_bs" => cfg.n_ant_bs = int(value)?,
        "n_chain_bs" => cfg.n_chain_bs = int(value)?,
        "n_bs" => cfg.n_bs = int(value)?,
        "n_paths" => cfg.n_paths = int(value)?,
        "n_subcarriers" => cfg.n_subcarriers = int(value)?,
        "n_pilot_subcarriers" => cfg.n_pilot_subcarriers = int(value)?,
        "bandwidth_hz" => cfg.bandwidth_hz = real(value)?,
        "max_delay_s" => cfg.max_delay_s = real(value)?,
        "antenna_spacing_ratio" => cfg.antenna_spacing_ratio = real(value)?,
        "rician_k_db" => cfg.rician_k_db = real(value)?,
        "snr_db" => cfg.snr_db = real(value)?,
        "n_slots" => cfg.n_slots = int(value)?,
        _ => unreachable!("key checked against KEYS"),
    }
    Ok(())
}

/// Serializes every field, one `key = value` per line.
pub fn write_config(cfg: &SystemConfig) -> String {
    let mut out = String::new();
    let mut push = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    push("n_ant_user", cfg.n_ant_user.to_string());
    push("n_chain_user", cfg.n_chain_user.to_string());
    push("n_ant_bs", cfg.n_ant_bs.to_string());
    push("n_chain_bs", cfg.n_chain_bs.to_string());
    push("n_bs", cfg.n_bs.to_string());
    push("n_paths", cfg.n_paths.to_string());
    push("n_subcarriers", cfg.n_subcarriers.to_string());
    push("n_pilot_subcarriers", cfg.n_pilot_subcarriers.to_string());
    push("bandwidth_hz", format!("{:?}", cfg.bandwidth_hz));
    push("max_delay_s", format!("{:?}", cfg.max_delay_s));
    push("antenna_spacing_ratio", format!("{:?}", cfg.antenna_spacing_ratio));
    push("rician_k_db", format!("{:?}", cfg.rician_k_db));
    push("snr_db", format!("{:?}", cfg.snr_db));
    push("n_slots", cfg.n_slots.to_string());
    out
}
