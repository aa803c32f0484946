//! Independent checks of the M/D/1/K and M/D/1 solvers.
//!
//! The exact oracle rebuilds the departure-epoch chain from Poisson
//! probabilities, converts every entry to an exact rational, and solves it
//! by Gaussian elimination with no rounding at all.

use clinic_window::queue::{md1_distribution, md1k_distribution, QueueSpec, ServiceLaw};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn poisson(rho: f64, n: usize) -> f64 {
    let mut p = (-rho).exp();
    for i in 1..=n {
        p *= rho / i as f64;
    }
    p
}

/// Transition matrix of the chain observed at departures, states `0..k`.
fn chain(rho: f64, k: usize) -> Vec<Vec<BigRational>> {
    let a: Vec<BigRational> = (0..=k + 1).map(|n| rat(poisson(rho, n))).collect();
    let mut p = vec![vec![BigRational::zero(); k]; k];
    for (i, row) in p.iter_mut().enumerate() {
        let mut partial = BigRational::zero();
        for (j, cell) in row.iter_mut().enumerate().take(k - 1) {
            let arrivals = if i == 0 {
                Some(j)
            } else {
                (j + 1).checked_sub(i)
            };
            if let Some(n) = arrivals {
                *cell = a[n].clone();
                partial += &a[n];
            }
        }
        row[k - 1] = BigRational::one() - partial;
    }
    p
}

/// Solve `pi P = pi`, `sum pi = 1` exactly.
fn solve(p: &[Vec<BigRational>]) -> Vec<BigRational> {
    let k = p.len();
    // Rows of (P^T - I), last row replaced by the normalization.
    let mut m: Vec<Vec<BigRational>> = (0..k)
        .map(|i| {
            let mut row: Vec<BigRational> = (0..k).map(|j| p[j][i].clone()).collect();
            row[i] -= BigRational::one();
            row.push(BigRational::zero());
            row
        })
        .collect();
    m[k - 1] = vec![BigRational::one(); k + 1];
    for c in 0..k {
        let piv = (c..k).find(|&r| !m[r][c].is_zero()).expect("nonsingular");
        m.swap(c, piv);
        let inv = BigRational::one() / m[c][c].clone();
        for x in m[c].iter_mut() {
            *x *= &inv;
        }
        for r in 0..k {
            if r != c && !m[r][c].is_zero() {
                let f = m[r][c].clone();
                let pivot_row = m[c].clone();
                for (x, y) in m[r].iter_mut().zip(pivot_row) {
                    *x -= &f * y;
                }
            }
        }
    }
    m.into_iter().map(|row| row[k].clone()).collect()
}

fn exact_time_average(lambda: f64, mu: f64, k: usize) -> Vec<f64> {
    let rho_r = rat(lambda) / rat(mu);
    let rho = (rat(lambda) / rat(mu)).to_f64().unwrap();
    let pi = solve(&chain(rho, k));
    let denom = pi[0].clone() + rho_r;
    let mut out: Vec<f64> = pi.iter().map(|x| (x / &denom).to_f64().unwrap()).collect();
    out.push(
        (BigRational::one() - BigRational::one() / denom)
            .to_f64()
            .unwrap(),
    );
    out
}

#[test]
fn exact_rational_solve_matches_for_small_windows() {
    for lambda in [10.0, 18.0, 19.9, 25.0] {
        for k in 1..=5 {
            let spec = QueueSpec::finite(lambda, 20.0, k, ServiceLaw::Deterministic).unwrap();
            let got = md1k_distribution(&spec).unwrap();
            let want = exact_time_average(lambda, 20.0, k);
            for (j, (g, w)) in got.probs().iter().zip(&want).enumerate() {
                assert!(
                    (g - w).abs() < 1e-12,
                    "lambda={lambda} K={k} j={j}: {g} vs {w}"
                );
            }
        }
    }
}

#[test]
fn rational_helpers_are_exact() {
    let half = rat(0.5);
    assert_eq!(half, BigRational::new(BigInt::from(1), BigInt::from(2)));
    let p = chain(0.7, 3);
    for row in &p {
        let s: BigRational = row.iter().cloned().sum();
        assert!(s.is_one());
    }
}

#[test]
fn md1_mean_matches_pollaczek_khinchine() {
    for rho in [0.5, 0.9, 0.995] {
        let mu = 20.0;
        let d = md1_distribution(rho * mu, mu, 1e-13).unwrap();
        let r = d.spec().rho();
        let want = r + r * r / (2.0 * (1.0 - r));
        let got = d.mean();
        assert!(
            ((got - want) / want).abs() < 1e-6,
            "rho={rho}: {got} vs {want}"
        );
    }
}

#[test]
fn md1_empty_probability_is_one_minus_rho() {
    let d = md1_distribution(19.0, 20.0, 1e-12).unwrap();
    assert!((d.empty_prob() - 0.05).abs() < 1e-12);
}
