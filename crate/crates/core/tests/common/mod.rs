//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's enumeration or eigen routines.
#![allow(dead_code)]

use std::collections::HashMap;

/// All 2x2 matrices mod `q` with determinant 1, row-major.
pub fn sl2_by_determinant(q: u64) -> Vec<[u64; 4]> {
    let mut out = Vec::new();
    for a in 0..q {
        for b in 0..q {
            for c in 0..q {
                for d in 0..q {
                    if (a * d + q * q - (b * c) % (q * q)) % q == 1 % q {
                        out.push([a, b, c, d]);
                    }
                }
            }
        }
    }
    out
}

/// SL2 mod a prime `p`, listed by solving for the last entry.
pub fn sl2_prime_by_determinant(p: u64) -> Vec<[u64; 4]> {
    let inv = |x: u64| -> u64 {
        let mut r = 1u64;
        let (mut b, mut e) = (x % p, p - 2);
        while e > 0 {
            if e & 1 == 1 {
                r = r * b % p;
            }
            b = b * b % p;
            e >>= 1;
        }
        r
    };
    let mut out = Vec::new();
    for a in 0..p {
        for b in 0..p {
            for c in 0..p {
                if a != 0 {
                    // d = (1 + b c) / a
                    out.push([a, b, c, (1 + b * c) % p * inv(a) % p]);
                } else if b != 0 {
                    // -b c = 1 forces c = -1/b; d free
                    if (b * c) % p == p - 1 {
                        for d in 0..p {
                            out.push([a, b, c, d]);
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn mul2(x: &[u64; 4], y: &[u64; 4], q: u64) -> [u64; 4] {
    [
        (x[0] * y[0] + x[1] * y[2]) % q,
        (x[0] * y[1] + x[1] * y[3]) % q,
        (x[2] * y[0] + x[3] * y[2]) % q,
        (x[2] * y[1] + x[3] * y[3]) % q,
    ]
}

/// Right-neighbour table of SL2 mod p for the elementary generators and
/// their inverses.
pub fn sl2_neighbours(p: u64) -> (usize, Vec<[usize; 4]>) {
    let elems = sl2_prime_by_determinant(p);
    let index: HashMap<[u64; 4], usize> = elems.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    let gens = [[1, 1, 0, 1], [1, p - 1, 0, 1], [1, 0, 1, 1], [1, 0, p - 1, 1]];
    let nb = elems
        .iter()
        .map(|e| {
            let mut row = [0usize; 4];
            for (s, g) in gens.iter().enumerate() {
                row[s] = index[&mul2(e, g, p)];
            }
            row
        })
        .collect();
    (elems.len(), nb)
}

/// Extreme eigenvalues of the averaging operator on the mean-zero subspace:
/// Krylov basis with full reorthogonalization, then Rayleigh-Ritz on the
/// explicit projection. Returns (most negative, largest).
pub fn lanczos_extremes(n: usize, nb: &[[usize; 4]], steps: usize) -> (f64, f64) {
    let apply = |v: &[f64]| -> Vec<f64> {
        nb.iter().map(|row| row.iter().map(|&j| v[j]).sum::<f64>() / 4.0).collect()
    };
    let center = |v: &mut Vec<f64>| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|x| *x -= m);
    };
    let normalize = |v: &mut Vec<f64>| -> f64 {
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        nv
    };
    // Deterministic pseudo-random start.
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    center(&mut v);
    normalize(&mut v);
    let mut basis: Vec<Vec<f64>> = vec![v];
    let mut images: Vec<Vec<f64>> = Vec::new();
    for j in 0..steps.min(n - 1) {
        let tq = apply(&basis[j]);
        let mut w = tq.clone();
        images.push(tq);
        for _ in 0..2 {
            center(&mut w);
            for b in &basis {
                let c: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        if normalize(&mut w) < 1e-10 {
            break;
        }
        basis.push(w);
    }
    let m = images.len();
    let h = nalgebra::DMatrix::from_fn(m, m, |r, c| {
        let a: f64 = basis[r].iter().zip(&images[c]).map(|(x, y)| x * y).sum();
        let b: f64 = basis[c].iter().zip(&images[r]).map(|(x, y)| x * y).sum();
        (a + b) / 2.0
    });
    let eig = h.symmetric_eigenvalues();
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Matrices `I + pX` mod `p^n` with determinant 1, i.e. the level-1
/// congruence kernel of SL2 mod `p^n`.
pub fn sl2_kernel_by_determinant(p: u64, n: u32) -> Vec<[u64; 4]> {
    let q = p.pow(n);
    let r = p.pow(n - 1);
    let mut out = Vec::new();
    for a in 0..r {
        for b in 0..r {
            for c in 0..r {
                for d in 0..r {
                    let m = [(1 + p * a) % q, p * b % q, p * c % q, (1 + p * d) % q];
                    if (m[0] * m[3] % q + q - m[1] * m[2] % q) % q == 1 % q {
                        out.push(m);
                    }
                }
            }
        }
    }
    out
}

/// `λ(SL2 mod p)` for the elementary generators, from dense eigensolves
/// (p ≤ 19) and the Krylov oracle (all p), agreeing to 1e-11.
pub const SL2_LAMBDA: [(u64, f64); 9] = [
    (5, 0.809016994375),
    (7, 0.890388203202),
    (11, 0.933012701892),
    (13, 0.956393280266),
    (17, 0.936327355929),
    (19, 0.951501348730),
    (23, 0.955354568908),
    (29, 0.962046461577),
    (31, 0.954929684776),
];
