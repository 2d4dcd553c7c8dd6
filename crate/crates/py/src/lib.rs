//! Python bindings for the `scs_mimo` core crate.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use scs_mimo::config::{parse_config_str, write_config, LinkBudgetParams};
use scs_mimo::simulate::{self, SweepVariable};
use scs_mimo::{channel, recovery, theory, Error};

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::Config { .. } | Error::ConfigInvariant { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// System parameters; field names match the configuration file keys.
#[pyclass(name = "SystemConfig", get_all, set_all, from_py_object)]
#[derive(Clone)]
pub struct PySystemConfig {
    n_ant_user: usize,
    n_chain_user: usize,
    n_ant_bs: usize,
    n_chain_bs: usize,
    n_bs: usize,
    n_paths: usize,
    n_subcarriers: usize,
    n_pilot_subcarriers: usize,
    bandwidth_hz: f64,
    max_delay_s: f64,
    antenna_spacing_ratio: f64,
    rician_k_db: f64,
    snr_db: f64,
    n_slots: usize,
}

impl From<scs_mimo::SystemConfig> for PySystemConfig {
    fn from(c: scs_mimo::SystemConfig) -> Self {
        Self {
            n_ant_user: c.n_ant_user,
            n_chain_user: c.n_chain_user,
            n_ant_bs: c.n_ant_bs,
            n_chain_bs: c.n_chain_bs,
            n_bs: c.n_bs,
            n_paths: c.n_paths,
            n_subcarriers: c.n_subcarriers,
            n_pilot_subcarriers: c.n_pilot_subcarriers,
            bandwidth_hz: c.bandwidth_hz,
            max_delay_s: c.max_delay_s,
            antenna_spacing_ratio: c.antenna_spacing_ratio,
            rician_k_db: c.rician_k_db,
            snr_db: c.snr_db,
            n_slots: c.n_slots,
        }
    }
}

impl From<&PySystemConfig> for scs_mimo::SystemConfig {
    fn from(c: &PySystemConfig) -> Self {
        Self {
            n_ant_user: c.n_ant_user,
            n_chain_user: c.n_chain_user,
            n_ant_bs: c.n_ant_bs,
            n_chain_bs: c.n_chain_bs,
            n_bs: c.n_bs,
            n_paths: c.n_paths,
            n_subcarriers: c.n_subcarriers,
            n_pilot_subcarriers: c.n_pilot_subcarriers,
            bandwidth_hz: c.bandwidth_hz,
            max_delay_s: c.max_delay_s,
            antenna_spacing_ratio: c.antenna_spacing_ratio,
            rician_k_db: c.rician_k_db,
            snr_db: c.snr_db,
            n_slots: c.n_slots,
        }
    }
}

impl PySystemConfig {
    fn core(&self) -> PyResult<scs_mimo::SystemConfig> {
        let c = scs_mimo::SystemConfig::from(self);
        c.validate().map_err(to_py_err)?;
        Ok(c)
    }
}

#[pymethods]
impl PySystemConfig {
    /// Desk-scale defaults.
    #[new]
    fn new() -> Self {
        scs_mimo::SystemConfig::default().into()
    }

    #[staticmethod]
    fn paper_scale() -> Self {
        scs_mimo::SystemConfig::paper_scale().into()
    }

    /// Parses the flat `key = value` format.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        parse_config_str(text).map(Into::into).map_err(to_py_err)
    }

    fn to_text(&self) -> String {
        write_config(&self.into())
    }

    fn validate(&self) -> PyResult<()> {
        self.core().map(|_| ())
    }

    fn unknown_dim(&self) -> usize {
        scs_mimo::SystemConfig::from(self).unknown_dim()
    }

    fn sparsity(&self) -> usize {
        scs_mimo::SystemConfig::from(self).sparsity()
    }

    fn measurement_rows(&self) -> usize {
        scs_mimo::SystemConfig::from(self).measurement_rows()
    }

    fn __eq__(&self, other: &Self) -> bool {
        scs_mimo::SystemConfig::from(self) == scs_mimo::SystemConfig::from(other)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", scs_mimo::SystemConfig::from(self))
    }
}

#[pyfunction]
#[pyo3(signature = (fc_mhz, alpha, d_km, atmos=0.0, rain=0.0))]
fn path_loss_db(fc_mhz: f64, alpha: f64, d_km: f64, atmos: f64, rain: f64) -> PyResult<f64> {
    let params = LinkBudgetParams {
        carrier_freq_mhz: fc_mhz,
        path_loss_exponent: alpha,
        distance_km: d_km,
        atmos_atten_db_per_km: atmos,
        rain_atten_db_per_km: rain,
    };
    channel::path_loss_db(&params).map_err(to_py_err)
}

#[pyfunction]
#[pyo3(signature = (n_antennas, sin_angle, spacing_ratio=0.5))]
fn steering_vector(n_antennas: usize, sin_angle: f64, spacing_ratio: f64) -> PyResult<Vec<Complex64>> {
    channel::steering_vector(n_antennas, sin_angle, spacing_ratio).map(|v| v.iter().copied().collect()).map_err(to_py_err)
}

#[pyfunction]
fn min_time_slots(sparsity: usize, chains: usize) -> PyResult<usize> {
    theory::min_time_slots(sparsity, chains).map_err(to_py_err)
}

#[pyfunction]
fn orthogonal_pilot_overhead(n_g: u64, n_bs: u64, n_ant_user: u64, n_ant_bs: u64, chains_user: u64) -> PyResult<u64> {
    theory::orthogonal_pilot_overhead(n_g, n_bs, n_ant_user, n_ant_bs, chains_user).map_err(to_py_err)
}

#[pyfunction]
fn p_th_for_snr(snr_db: f64) -> f64 {
    recovery::p_th_for_snr(snr_db)
}

/// Runs one trial; returns `{estimator name: metrics dict}`.
#[pyfunction]
#[pyo3(signature = (config, seed=0))]
fn run_trial<'py>(py: Python<'py>, config: &PySystemConfig, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.core()?;
    let rec = py.detach(|| simulate::run_trial(&cfg, seed)).map_err(to_py_err)?;
    let out = PyDict::new(py);
    for m in &rec.metrics {
        let d = PyDict::new(py);
        d.set_item("nmse_db", m.nmse_db)?;
        d.set_item("exact_support_match", m.exact_support_match)?;
        d.set_item("precision", m.precision)?;
        d.set_item("recall", m.recall)?;
        d.set_item("iterations", m.iterations)?;
        d.set_item("wall_time_s", m.wall_time_s)?;
        out.set_item(m.estimator.name(), d)?;
    }
    Ok(out)
}

/// Sweeps `"G"` or `"snr_db"`; returns one dict per (value, estimator) row.
#[pyfunction]
#[pyo3(signature = (config, variable, values, trials=100, seed=0, workers=0))]
fn sweep<'py>(
    py: Python<'py>,
    config: &PySystemConfig,
    variable: &str,
    values: Vec<f64>,
    trials: usize,
    seed: u64,
    workers: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let var = match variable {
        "G" | "g" => SweepVariable::Slots,
        "snr_db" | "snr" => SweepVariable::SnrDb,
        other => return Err(PyValueError::new_err(format!("unknown sweep variable {other:?}"))),
    };
    let cfg = config.core()?;
    let table = py.detach(|| simulate::sweep(&cfg, var, &values, trials, seed, workers)).map_err(to_py_err)?;
    table
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("sweep_var", &r.sweep_var)?;
            d.set_item("value", r.value)?;
            d.set_item("estimator", r.estimator.name())?;
            d.set_item("nmse_db", r.nmse_db)?;
            d.set_item("support_rate", r.support_rate)?;
            d.set_item("trials", r.trials)?;
            d.set_item("stderr", r.stderr)?;
            Ok(d)
        })
        .collect()
}

/// Certificate-versus-exhaustive-search battery.
#[pyfunction]
#[pyo3(signature = (trials=100, seed=0))]
fn validation_battery(py: Python<'_>, trials: usize, seed: u64) -> PyResult<Bound<'_, PyDict>> {
    let r = py.detach(|| theory::validation_battery(trials, seed)).map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("certified", r.certified)?;
    d.set_item("consistent", r.consistent)?;
    d.set_item("generated", r.generated)?;
    d.set_item("not_certified", r.not_certified)?;
    d.set_item("not_evaluable", r.not_evaluable)?;
    Ok(d)
}

#[pymodule]
fn scs_mimo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystemConfig>()?;
    m.add_function(wrap_pyfunction!(path_loss_db, m)?)?;
    m.add_function(wrap_pyfunction!(steering_vector, m)?)?;
    m.add_function(wrap_pyfunction!(min_time_slots, m)?)?;
    m.add_function(wrap_pyfunction!(orthogonal_pilot_overhead, m)?)?;
    m.add_function(wrap_pyfunction!(p_th_for_snr, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(validation_battery, m)?)?;
    Ok(())
}
