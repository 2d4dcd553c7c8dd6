//! Structured compressive-sensing downlink channel estimation for
//! hybrid-beamforming mmWave massive MIMO OFDM.
//!
//! A user with `N_a^US` antennas and `N_BB^US` RF chains estimates the
//! channels of `M` small-cell BSs at once. Pilots are non-orthogonal
//! random-phase signals that share every pilot subcarrier, and the common
//! angular-domain support across subcarriers is exploited by SSAMP.
//!
//! Modules follow the processing chain:
//! [`channel`] → [`pilots`] → [`recovery`], with [`theory`] for the
//! uniqueness and overhead analysis and [`simulate`] for Monte-Carlo runs.

pub mod channel;
pub mod cli;
pub mod config;
pub mod error;
pub mod linalg;
pub mod pilots;
pub mod recovery;
pub mod rng;
pub mod simulate;
pub mod theory;

pub use config::{LinkBudgetParams, SystemConfig};
pub use error::{Error, Result};
