//! Independent reference implementations shared by the integration tests.
//! Everything here works from first principles on plain arrays and bits,
//! never through the library routines it is compared against.

#![allow(dead_code)]

use qpq::quantum::{Bit, PreparedSymbol};

const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Real amplitudes of a BB84 state.
pub fn amplitudes(s: PreparedSymbol) -> [f64; 2] {
    match s {
        PreparedSymbol::Z0 => [1.0, 0.0],
        PreparedSymbol::Z1 => [0.0, 1.0],
        PreparedSymbol::XPlus => [H, H],
        PreparedSymbol::XMinus => [H, -H],
    }
}

/// `U |ψ⟩_c |+⟩_b |0⟩_s` written out term by term:
/// `(ψ0|000⟩ + ψ1|101⟩ + ⟨+|ψ⟩|+⟩|10⟩ + ⟨−|ψ⟩|−⟩|11⟩) / √2`, index `4c + 2b + s`.
pub fn two_step_output(psi: [f64; 2]) -> [f64; 8] {
    let mut out = [0.0; 8];
    out[0] += psi[0] * H;
    out[5] += psi[1] * H;
    let plus = H * (psi[0] + psi[1]);
    let minus = H * (psi[0] - psi[1]);
    // |+⟩_c|1⟩_b|0⟩_s
    out[2] += plus * H * H;
    out[6] += plus * H * H;
    // |−⟩_c|1⟩_b|1⟩_s
    out[3] += minus * H * H;
    out[7] -= minus * H * H;
    out
}

pub fn likelihood(o: PreparedSymbol, a: PreparedSymbol, eta: f64) -> f64 {
    let basis_prob = if a.basis() == qpq::quantum::BasisLabel::Z {
        eta
    } else {
        1.0 - eta
    };
    let born = if o.basis() != a.basis() {
        0.5
    } else if o == a {
        1.0
    } else {
        0.0
    };
    basis_prob * born
}

/// Visits every permutation of `0..n` (Heap's algorithm, iterative).
pub fn for_each_permutation(n: usize, mut visit: impl FnMut(&[usize])) {
    let mut p: Vec<usize> = (0..n).collect();
    let mut c = vec![0; n];
    visit(&p);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            visit(&p);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Posterior that original `i` was measured in X, by summing the announced
/// likelihood over all n! assignments of originals to slots.
pub fn naive_counting_posterior(
    sent: &[PreparedSymbol],
    announced: &[PreparedSymbol],
    eta: f64,
) -> Option<Vec<f64>> {
    let n = sent.len();
    let mut total = 0.0;
    let mut x_mass = vec![0.0; n];
    for_each_permutation(n, |perm| {
        let w: f64 = (0..n)
            .map(|i| likelihood(sent[i], announced[perm[i]], eta))
            .product();
        if w > 0.0 {
            total += w;
            for i in 0..n {
                if announced[perm[i]].basis() == qpq::quantum::BasisLabel::X {
                    x_mass[i] += w;
                }
            }
        }
    });
    (total > 0.0).then(|| x_mass.iter().map(|m| m / total).collect())
}

/// Final key by direct XOR of column `j` across the `k` substrings, and the
/// user's value wherever every contributor is known.
pub fn fold_oracle(bob: &[Bit], alice: &[Option<Bit>], k: usize) -> (Vec<Bit>, Vec<Option<Bit>>) {
    let n = bob.len() / k;
    let mut bits = Vec::with_capacity(n);
    let mut known = Vec::with_capacity(n);
    for j in 0..n {
        let mut b = 0;
        let mut a = Some(0);
        for m in 0..k {
            b ^= bob[m * n + j];
            a = match (a, alice[m * n + j]) {
                (Some(x), Some(y)) => Some(x ^ y),
                _ => None,
            };
        }
        bits.push(b);
        known.push(a);
    }
    (bits, known)
}

/// Item `t` encrypted with key bit `(t + offset) mod N`.
pub fn encrypt_oracle(db: &[Bit], key: &[Bit], offset: i64) -> Vec<Bit> {
    let n = db.len() as i64;
    db.iter()
        .enumerate()
        .map(|(t, &x)| x ^ key[(((t as i64 + offset) % n + n) % n) as usize])
        .collect()
}

/// Sample mean and standard error.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
