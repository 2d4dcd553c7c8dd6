mod common;

use common::desk_config;
use scs_mimo::simulate::*;

#[test]
fn trials_are_bit_reproducible() {
    let cfg = desk_config(6, 15.0);
    for seed in [0, 7, 12345] {
        assert_eq!(run_trial(&cfg, seed).unwrap(), run_trial(&cfg, seed).unwrap());
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let cfg = desk_config(6, 20.0);
    let a = sweep(&cfg, SweepVariable::Slots, &[5.0, 6.0], 12, 3, 1).unwrap();
    let b = sweep(&cfg, SweepVariable::Slots, &[5.0, 6.0], 12, 3, 4).unwrap();
    assert_eq!(a, b);
}

#[test]
fn oracle_ties_on_exact_support_and_wins_on_average() {
    let cfg = desk_config(6, 10.0);
    let recs = sweep_records(&cfg, SweepVariable::SnrDb, &[10.0, 20.0], 50, 0, 0).unwrap();
    for per_value in &recs {
        for r in per_value {
            let (s, o) = (r.get(Estimator::Ssamp), r.get(Estimator::OracleLs));
            if s.exact_support_match {
                assert!((s.nmse_db - o.nmse_db).abs() < 1e-9);
            }
        }
        let mean = |e| per_value.iter().map(|r| r.get(e).nmse_db).sum::<f64>() / per_value.len() as f64;
        assert!(mean(Estimator::OracleLs) <= mean(Estimator::Ssamp));
    }
}

#[test]
fn sweeps_pair_trials_across_values() {
    let cfg = desk_config(6, 20.0);
    let recs = sweep_records(&cfg, SweepVariable::Slots, &[5.0, 7.0], 4, 100, 0).unwrap();
    for i in 0..4 {
        assert_eq!(recs[0][i].seed, recs[1][i].seed);
        assert_eq!(recs[0][i].seed, trial_seed(100, i));
    }
}

#[test]
fn nmse_does_not_grow_with_more_slots() {
    let cfg = desk_config(6, 20.0);
    let values = [6.0, 8.0, 10.0, 12.0];
    let table = sweep(&cfg, SweepVariable::Slots, &values, 200, 0, 0).unwrap();
    let ssamp: Vec<f64> =
        table.rows.iter().filter(|r| r.estimator == Estimator::Ssamp).map(|r| r.nmse_db).collect();
    for w in ssamp.windows(2) {
        assert!(w[1] <= w[0] + 0.5, "{ssamp:?}");
    }
}

#[test]
fn omp_support_rate_not_above_ssamp() {
    let cfg = desk_config(6, 10.0);
    let table = sweep(&cfg, SweepVariable::SnrDb, &[10.0], 200, 0, 0).unwrap();
    let rate = |e| table.rows.iter().find(|r| r.estimator == e).unwrap().support_rate;
    assert!(rate(Estimator::AdaptiveOmp) <= rate(Estimator::Ssamp));
}

#[test]
fn single_cell_table() {
    let cfg = desk_config(6, 20.0);
    let table = sweep(&cfg, SweepVariable::SnrDb, &[20.0], 1, 9, 1).unwrap();
    let rec = run_trial(&cfg, 9).unwrap();
    assert_eq!(table.rows.len(), 3);
    for row in &table.rows {
        assert_eq!(row.nmse_db, rec.get(row.estimator).nmse_db);
        assert_eq!(row.trials, 1);
    }
}

#[test]
fn perfect_csi_ber_is_non_increasing() {
    let cfg = scs_mimo::SystemConfig::default();
    let snrs = [0.0, 10.0, 20.0];
    let table = ber_experiment(&cfg, &snrs, 20_000, 0, 0).unwrap();
    let perfect: Vec<f64> = snrs.iter().map(|&s| table.ber(s, CsiSource::Perfect).unwrap()).collect();
    for w in perfect.windows(2) {
        assert!(w[1] <= w[0]);
    }
    assert_eq!(table, ber_experiment(&cfg, &snrs, 20_000, 0, 2).unwrap());
}
