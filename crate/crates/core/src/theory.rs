//! Spark, GMMV uniqueness certificates, exhaustive ℓ0 search, and pilot
//! overhead formulas.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pinv, rank, select_columns, CMat, CVec, LS_RCOND, RANK_RCOND};
use crate::rng::{complex_gaussian, rng_from_seed};

pub const SPARK_MAX_COLUMNS: usize = 24;
pub const L0_MAX_COLUMNS: usize = 16;
pub const L0_MAX_SPARSITY: usize = 3;
/// Relative residual under which a measurement lies in a column span.
pub const SPAN_TOL: f64 = 1e-8;

/// Smallest number of linearly dependent columns. Full-spark matrices get
/// `min(rows, cols) + 1`.
pub fn spark(matrix: &CMat) -> Result<usize> {
    let (m, n) = matrix.shape();
    if n > SPARK_MAX_COLUMNS {
        return Err(Error::TooLarge(format!("spark needs ≤ {SPARK_MAX_COLUMNS} columns, got {n}")));
    }
    let limit = m.min(n) + 1;
    for k in 1..=limit.min(n) {
        let dependent = (0..n)
            .combinations(k)
            .any(|cols| rank(&select_columns(matrix, &cols), RANK_RCOND) < k);
        if dependent {
            return Ok(k);
        }
    }
    Ok(limit)
}

/// Measurements of `P` jointly sparse vectors through distinct operators.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmvInstance {
    pub operators: Vec<CMat>,
    pub signals: Vec<CVec>,
    pub measurements: Vec<CVec>,
    pub support: Vec<usize>,
    pub sparsity: usize,
}

impl GmmvInstance {
    pub fn new(operators: Vec<CMat>, signals: Vec<CVec>) -> Result<Self> {
        if operators.is_empty() || operators.len() != signals.len() {
            return Err(Error::DimensionMismatch("need one signal per operator".into()));
        }
        let shape = operators[0].shape();
        if operators.iter().any(|o| o.shape() != shape) || signals.iter().any(|s| s.len() != shape.1) {
            return Err(Error::DimensionMismatch("operators and signals disagree in shape".into()));
        }
        let support: Vec<usize> =
            (0..shape.1).filter(|&i| signals.iter().any(|s| s[i].norm() > 0.0)).collect();
        let measurements = operators.iter().zip(&signals).map(|(o, s)| o * s).collect();
        Ok(Self { sparsity: support.len(), operators, signals, measurements, support })
    }

    /// Random instance with i.i.d. complex Gaussian operators and a common
    /// random support of size `sparsity`.
    pub fn random(rows: usize, cols: usize, sparsity: usize, n_vectors: usize, seed: u64) -> Result<Self> {
        Self::random_with(rows, cols, sparsity, n_vectors, seed, false, false)
    }

    /// As [`GmmvInstance::random`], optionally reusing the first operator
    /// and/or the first signal for every `p`.
    pub fn random_with(
        rows: usize,
        cols: usize,
        sparsity: usize,
        n_vectors: usize,
        seed: u64,
        shared_operator: bool,
        identical_signals: bool,
    ) -> Result<Self> {
        if sparsity > cols || n_vectors == 0 {
            return Err(Error::InvalidParameter("need sparsity ≤ columns and at least one vector".into()));
        }
        let mut rng = rng_from_seed(seed);
        let support = {
            let mut s = rand::seq::index::sample(&mut rng, cols, sparsity).into_vec();
            s.sort_unstable();
            s
        };
        let mut operators: Vec<CMat> = Vec::with_capacity(n_vectors);
        let mut signals: Vec<CVec> = Vec::with_capacity(n_vectors);
        for p in 0..n_vectors {
            if shared_operator && p > 0 {
                operators.push(operators[0].clone());
            } else {
                operators.push(CMat::from_fn(rows, cols, |_, _| complex_gaussian(&mut rng, 1.0)));
            }
            if identical_signals && p > 0 {
                signals.push(signals[0].clone());
            } else {
                let mut x = CVec::zeros(cols);
                for &i in &support {
                    x[i] = complex_gaussian(&mut rng, 1.0);
                }
                signals.push(x);
            }
        }
        Self::new(operators, signals)
    }

    pub fn rows(&self) -> usize {
        self.operators[0].nrows()
    }

    pub fn cols(&self) -> usize {
        self.operators[0].ncols()
    }
}

/// `Ψ_p` for `p = 2..P`: the minimum-Frobenius-norm `m × m` solution of
/// `(Φ_p)_Ξ = Ψ_p (Φ_1)_Ξ`.
pub fn bridge_matrices(operators: &[CMat], support: &[usize]) -> Result<Vec<CMat>> {
    let Some(first) = operators.first() else {
        return Err(Error::DimensionMismatch("no operators".into()));
    };
    if support.len() > first.nrows() {
        return Err(Error::Underdetermined { support: support.len(), rows: first.nrows() });
    }
    let base = select_columns(first, support);
    let r = rank(&base, RANK_RCOND);
    if r < support.len() {
        return Err(Error::NoBridge { rank: r, support: support.len() });
    }
    let base_pinv = pinv(&base, LS_RCOND);
    Ok(operators[1..].iter().map(|phi| select_columns(phi, support) * &base_pinv).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessCertificate {
    pub spark_phi1: usize,
    pub rank_ytilde: usize,
    /// `2S < spark(Φ_1) − 1 + rank(Ỹ)`.
    pub condition_holds: bool,
    pub bridge_matrices: Vec<CMat>,
}

/// `Ỹ = [y_1 | Ψ_2⁺ y_2 | … | Ψ_P⁺ y_P]`.
pub fn bridged_measurements(measurements: &[CVec], bridges: &[CMat]) -> CMat {
    let m = measurements[0].len();
    let mut y = CMat::zeros(m, measurements.len());
    y.set_column(0, &measurements[0]);
    for (p, (meas, psi)) in measurements[1..].iter().zip(bridges).enumerate() {
        y.set_column(p + 1, &(pinv(psi, LS_RCOND) * meas));
    }
    y
}

/// Evaluates the uniqueness condition on an instance. A rank-deficient
/// bridge surfaces as [`Error::NoBridge`] (not evaluable).
pub fn uniqueness_check(instance: &GmmvInstance) -> Result<UniquenessCertificate> {
    let spark_phi1 = spark(&instance.operators[0])?;
    let bridges = bridge_matrices(&instance.operators, &instance.support)?;
    let y = bridged_measurements(&instance.measurements, &bridges);
    let rank_ytilde = rank(&y, RANK_RCOND);
    let condition_holds = 2 * instance.sparsity + 1 < spark_phi1 + rank_ytilde;
    Ok(UniquenessCertificate { spark_phi1, rank_ytilde, condition_holds, bridge_matrices: bridges })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct L0Solution {
    /// Size of the smallest consistent common support, if any exists up to `S`.
    pub minimal_size: Option<usize>,
    /// Every consistent common support of that size.
    pub supports: Vec<Vec<usize>>,
}

impl L0Solution {
    pub fn unique_support(&self) -> Option<&[usize]> {
        match self.supports.as_slice() {
            [only] => Some(only),
            _ => None,
        }
    }
}

fn in_span(phi: &CMat, cols: &[usize], y: &CVec) -> bool {
    let norm = y.norm();
    if norm == 0.0 {
        return true;
    }
    if cols.is_empty() {
        return false;
    }
    let sub = select_columns(phi, cols);
    let fit = &sub * (pinv(&sub, LS_RCOND) * y);
    (y - fit).norm() <= SPAN_TOL * norm
}

/// Enumerates common supports of size `0..=S` in increasing size and returns
/// all consistent ones of the first size that has any.
pub fn exhaustive_l0_solve(instance: &GmmvInstance) -> Result<L0Solution> {
    let n = instance.cols();
    if n > L0_MAX_COLUMNS || instance.sparsity > L0_MAX_SPARSITY {
        return Err(Error::TooLarge(format!(
            "exhaustive search needs ≤ {L0_MAX_COLUMNS} columns and sparsity ≤ {L0_MAX_SPARSITY}"
        )));
    }
    for k in 0..=instance.sparsity {
        let supports: Vec<Vec<usize>> = (0..n)
            .combinations(k)
            .filter(|cols| {
                instance.operators.iter().zip(&instance.measurements).all(|(phi, y)| in_span(phi, cols, y))
            })
            .collect();
        if !supports.is_empty() {
            return Ok(L0Solution { minimal_size: Some(k), supports });
        }
    }
    Ok(L0Solution { minimal_size: None, supports: Vec::new() })
}

/// `⌈(S_a + 1) / N_BB^US⌉`.
pub fn min_time_slots(sparsity: usize, chains: usize) -> Result<usize> {
    if chains == 0 {
        return Err(Error::InvalidParameter("chain count must be positive".into()));
    }
    Ok((sparsity + 1).div_ceil(chains))
}

/// `⌈N_g · M · N_a^US · N_a^BS / N_BB^US⌉` pilots for time-domain orthogonal training.
pub fn orthogonal_pilot_overhead(
    n_g: u64,
    n_bs: u64,
    n_ant_user: u64,
    n_ant_bs: u64,
    chains_user: u64,
) -> Result<u64> {
    if [n_g, n_bs, n_ant_user, n_ant_bs, chains_user].contains(&0) {
        return Err(Error::InvalidParameter("overhead inputs must be positive".into()));
    }
    let total = n_g as u128 * n_bs as u128 * n_ant_user as u128 * n_ant_bs as u128;
    u64::try_from(total.div_ceil(chains_user as u128))
        .map_err(|_| Error::InvalidParameter("overhead overflows u64".into()))
}

/// Outcome of the certificate-versus-exhaustive-search battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub certified: usize,
    pub consistent: usize,
    pub generated: usize,
    pub not_certified: usize,
    pub not_evaluable: usize,
}

/// Draws random instances (rows ≤ 8, columns ≤ 16, S ≤ 3, P ≤ 4) until
/// `target` certificates hold, and counts how many of those the exhaustive
/// search confirms with a unique minimal support equal to the truth.
pub fn validation_battery(target: usize, seed: u64) -> Result<BatteryReport> {
    use rand::Rng;
    let mut rng = rng_from_seed(seed);
    let mut report = BatteryReport { certified: 0, consistent: 0, generated: 0, not_certified: 0, not_evaluable: 0 };
    while report.certified < target {
        let rows = rng.random_range(3..=8);
        let cols = rng.random_range(rows + 1..=16);
        let sparsity = rng.random_range(1..=3);
        let n_vectors = rng.random_range(1..=4);
        let inst = GmmvInstance::random(rows, cols, sparsity, n_vectors, rng.random())?;
        report.generated += 1;
        let cert = match uniqueness_check(&inst) {
            Ok(c) => c,
            Err(Error::NoBridge { .. }) | Err(Error::Underdetermined { .. }) => {
                report.not_evaluable += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        if !cert.condition_holds {
            report.not_certified += 1;
            continue;
        }
        report.certified += 1;
        let sol = exhaustive_l0_solve(&inst)?;
        if sol.unique_support() == Some(inst.support.as_slice()) {
            report.consistent += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use num_complex::Complex64;

    #[test]
    fn spark_identity_and_repeat() {
        for n in 1..6 {
            assert_eq!(spark(&CMat::identity(n, n)).unwrap(), n + 1);
        }
        let mut m = CMat::identity(4, 5);
        let c = m.column(1).into_owned();
        m.set_column(4, &c);
        assert_eq!(spark(&m).unwrap(), 2);
        let mut z = CMat::identity(3, 3);
        z.set_column(2, &CVec::zeros(3));
        assert_eq!(spark(&z).unwrap(), 1);
    }

    #[test]
    fn spark_refuses_wide() {
        assert!(matches!(spark(&CMat::zeros(2, 25)), Err(Error::TooLarge(_))));
    }

    #[test]
    fn bridge_identity_and_scaling() {
        let inst = GmmvInstance::random_with(6, 10, 2, 3, 1, true, false).unwrap();
        let bridges = bridge_matrices(&inst.operators, &inst.support).unwrap();
        let base = select_columns(&inst.operators[0], &inst.support);
        for psi in &bridges {
            assert!((psi * &base - &base).norm() <= 1e-12 * base.norm());
        }
        let doubled = vec![inst.operators[0].clone(), inst.operators[0].scale(2.0)];
        let psi = &bridge_matrices(&doubled, &inst.support).unwrap()[0];
        assert!((psi * &base - base.scale(2.0)).norm() <= 1e-12 * base.norm());
    }

    #[test]
    fn bridge_rejects_deficient_support() {
        let mut phi = CMat::identity(4, 6);
        let c = phi.column(0).into_owned();
        phi.set_column(5, &c);
        assert_eq!(
            bridge_matrices(&[phi.clone(), phi], &[0, 5]).unwrap_err(),
            Error::NoBridge { rank: 1, support: 2 }
        );
    }

    #[test]
    fn zero_signals_hold_trivially() {
        let phi = CMat::from_fn(4, 6, |i, j| Complex64::new((i * 7 + j * 3) as f64 % 5.0, j as f64));
        let inst = GmmvInstance::new(vec![phi.clone(), phi], vec![CVec::zeros(6), CVec::zeros(6)]).unwrap();
        let cert = uniqueness_check(&inst).unwrap();
        assert_eq!(inst.sparsity, 0);
        assert_eq!(cert.rank_ytilde, 0);
        assert!(cert.condition_holds);
        let sol = exhaustive_l0_solve(&inst).unwrap();
        assert_eq!(sol.minimal_size, Some(0));
        assert_eq!(sol.unique_support(), Some(&[][..]));
    }

    #[test]
    fn single_column_measurement() {
        let inst = GmmvInstance::random(5, 9, 1, 3, 8).unwrap();
        let sol = exhaustive_l0_solve(&inst).unwrap();
        assert_eq!(sol.unique_support(), Some(inst.support.as_slice()));
    }

    #[test]
    fn too_large_instances_refused() {
        let inst = GmmvInstance::random(4, 17, 1, 1, 0).unwrap();
        assert!(matches!(exhaustive_l0_solve(&inst), Err(Error::TooLarge(_))));
        let inst = GmmvInstance::random(8, 10, 4, 1, 0).unwrap();
        assert!(matches!(exhaustive_l0_solve(&inst), Err(Error::TooLarge(_))));
    }

    #[test]
    fn overhead_formulas() {
        assert_eq!(min_time_slots(16, 2).unwrap(), 9);
        assert_eq!(min_time_slots(0, 5).unwrap(), 1);
        assert_eq!(min_time_slots(7, 8).unwrap(), 1);
        assert!(min_time_slots(3, 0).is_err());
        assert_eq!(orthogonal_pilot_overhead(64, 4, 32, 512, 2).unwrap(), 2_097_152);
        assert_eq!(orthogonal_pilot_overhead(1, 1, 1, 1, 1).unwrap(), 1);
        assert_eq!(
            orthogonal_pilot_overhead(8, 2, 4, 6, 4).unwrap() * 2,
            orthogonal_pilot_overhead(8, 2, 4, 6, 2).unwrap()
        );
        assert_eq!(orthogonal_pilot_overhead(1, 1, 1, 3, 2).unwrap(), 2);
    }

    #[test]
    fn identical_columns_in_measurement() {
        let phi = CMat::from_fn(3, 4, |i, j| if i == j { ONE } else { Complex64::new(0.0, 0.0) });
        let mut x = CVec::zeros(4);
        x[1] = ONE;
        let inst = GmmvInstance::new(vec![phi], vec![x]).unwrap();
        assert_eq!(exhaustive_l0_solve(&inst).unwrap().unique_support(), Some(&[1][..]));
    }
}
