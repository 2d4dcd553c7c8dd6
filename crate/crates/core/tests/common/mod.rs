#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use scs_mimo::SystemConfig;

pub type M = DMatrix<Complex64>;
pub type V = DVector<Complex64>;

/// The small configuration shared by the Monte-Carlo checks.
pub fn desk_config(n_slots: usize, snr_db: f64) -> SystemConfig {
    SystemConfig {
        n_ant_user: 4,
        n_chain_user: 2,
        n_ant_bs: 16,
        n_chain_bs: 4,
        n_bs: 2,
        n_paths: 2,
        n_subcarriers: 64,
        n_pilot_subcarriers: 8,
        n_slots,
        snr_db,
        ..SystemConfig::default()
    }
}

pub fn test_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Box-Muller complex normal with unit total variance.
pub fn cn<R: Rng>(rng: &mut R) -> Complex64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    let r = (-u1.ln()).sqrt();
    Complex64::from_polar(r, 2.0 * std::f64::consts::PI * u2)
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> M {
    M::from_fn(rows, cols, |_, _| cn(rng))
}

pub fn sparse_vector<R: Rng>(rng: &mut R, n: usize, support: &[usize]) -> V {
    let mut v = V::zeros(n);
    for &i in support {
        v[i] = cn(rng);
    }
    v
}

pub fn random_support<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut s = idx[..k].to_vec();
    s.sort_unstable();
    s
}

/// Least squares on a column subset through a QR factorization, minimum
/// norm when the subset is wider than the operator is tall.
fn ls_qr(phi: &M, cols: &[usize], y: &V) -> V {
    let mut full = V::zeros(phi.ncols());
    if cols.is_empty() {
        return full;
    }
    let sub = M::from_fn(phi.nrows(), cols.len(), |r, c| phi[(r, cols[c])]);
    let x = if cols.len() <= phi.nrows() {
        let qr = sub.qr();
        qr.r().solve_upper_triangular(&(qr.q().adjoint() * y)).expect("full column rank")
    } else {
        // minimum-norm solution through the QR factors of the adjoint
        let qr = sub.adjoint().qr();
        let z = qr.r().adjoint().solve_lower_triangular(y).expect("full row rank");
        qr.q() * z
    };
    for (k, &c) in cols.iter().enumerate() {
        full[c] = x[k];
    }
    full
}

fn top(scores: &[f64], pool: &[usize], k: usize) -> Vec<usize> {
    let mut order = pool.to_vec();
    order.sort_by(|a, b| scores[*b].partial_cmp(&scores[*a]).unwrap().then(a.cmp(b)));
    order.truncate(k);
    order.sort_unstable();
    order
}

/// Single-vector SAMP with unit step size, halting when the weakest kept
/// coefficient falls below `p_th` or a finished stage is beaten by the
/// current one. Returns the support kept at the last stage change.
pub fn samp_reference(y: &V, phi: &M, p_th: f64) -> Vec<usize> {
    let n = phi.ncols();
    let all: Vec<usize> = (0..n).collect();
    let mut size = 1;
    let mut kept: Vec<usize> = vec![];
    let mut r = y.clone();
    let mut best_stage: Option<(f64, Vec<usize>)> = None;
    for _ in 0..10 * phi.nrows() {
        if size > phi.nrows().min(n) {
            break;
        }
        let corr: Vec<f64> = (phi.adjoint() * &r).iter().map(|z| z.norm_sqr()).collect();
        let mut pool = kept.clone();
        for i in top(&corr, &all, size) {
            if !pool.contains(&i) {
                pool.push(i);
            }
        }
        pool.sort_unstable();
        let x_pool = ls_qr(phi, &pool, y);
        let mags: Vec<f64> = x_pool.iter().map(|z| z.norm_sqr()).collect();
        let chosen = top(&mags, &pool, size);
        let x = ls_qr(phi, &chosen, y);
        let r_new = y - phi * &x;
        let weakest = chosen.iter().map(|&i| x[i].norm_sqr()).fold(f64::INFINITY, f64::min);
        let e_new = r_new.norm_squared();
        if weakest < p_th {
            break;
        }
        if let Some((e_stage, _)) = &best_stage {
            if *e_stage < e_new {
                break;
            }
        }
        if e_new >= r.norm_squared() {
            size += 1;
            best_stage = Some((e_new, chosen));
        } else {
            kept = chosen;
            r = r_new;
        }
    }
    best_stage.map(|(_, s)| s).unwrap_or_default()
}
