//! Deterministic low-discrepancy point sets used for probe plans.

use statrs::distribution::{ContinuousCDF, Normal};

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = u64::from(base);
    let inv = 1.0 / f64::from(base);
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % b) as f64;
        index /= b;
        f *= inv;
    }
    r
}

/// `count` unit directions in R^d: Halton points pushed through the normal
/// quantile and normalised. With `positive_orthant` the absolute value is
/// taken coordinatewise, which is all that is needed for functions that are
/// even in every coordinate.
pub fn sphere_directions(d: usize, count: usize, positive_orthant: bool) -> Vec<Vec<f64>> {
    assert!(d >= 1 && d <= PRIMES.len(), "dimension {d} unsupported");
    if d == 1 {
        return if positive_orthant {
            vec![vec![1.0]]
        } else {
            vec![vec![1.0], vec![-1.0]]
        };
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut out = Vec::with_capacity(count);
    let mut index = 1u64;
    while out.len() < count {
        let mut v: Vec<f64> = (0..d)
            .map(|j| normal.inverse_cdf(radical_inverse(index, PRIMES[j]).clamp(1e-12, 1.0 - 1e-12)))
            .collect();
        index += 1;
        if positive_orthant {
            v.iter_mut().for_each(|x| *x = x.abs());
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            out.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    out
}

/// Coordinate axes followed by the normalised diagonal 1⃗/√d.
pub fn axis_and_diagonal_directions(d: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            e
        })
        .collect();
    if d > 1 {
        out.push(vec![1.0 / (d as f64).sqrt(); d]);
    }
    out
}

/// `count` points log-spaced between `lo` and `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}
