//! Sign vectors, the coordinatewise product and octant geometry.
//!
//! Every "max over sign patterns" quantity in the crate (natural function,
//! tail function, B(φ) norm) iterates over [`enumerate_sign_vectors`].

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Largest dimension accepted by any entry point that enumerates all 2^d
/// sign vectors.
pub const MAX_DIM: usize = 16;

pub fn check_dimension(d: usize) -> Result<()> {
    if d == 0 || d > MAX_DIM {
        Err(Error::Capacity { dim: d, cap: MAX_DIM })
    } else {
        Ok(())
    }
}

/// A vector with entries in {−1, +1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignVector(Vec<i8>);

impl SignVector {
    /// Builds a sign vector, rejecting any entry other than ±1.
    pub fn new(entries: Vec<i8>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Parameter("empty sign vector".into()));
        }
        if let Some(bad) = entries.iter().find(|&&e| e != 1 && e != -1) {
            return Err(Error::Parameter(format!("sign entry {bad} is not ±1")));
        }
        Ok(Self(entries))
    }

    /// The all-ones vector 1⃗.
    pub fn ones(d: usize) -> Self {
        Self(vec![1; d])
    }

    /// Sign vector number `index` in the canonical order: bit j of `index`
    /// set means coordinate j is −1.
    pub fn from_index(index: usize, d: usize) -> Self {
        Self((0..d).map(|j| if (index >> j) & 1 == 1 { -1 } else { 1 }).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[i8] {
        &self.0
    }

    pub fn get(&self, j: usize) -> f64 {
        f64::from(self.0[j])
    }

    /// ε^k = Π ε(j)^k(j), the sign a K(ε)-monotone function carries on its
    /// mixed derivative of order k.
    pub fn power_sign(&self, k: &[usize]) -> f64 {
        let negatives: usize = self
            .0
            .iter()
            .zip(k)
            .filter(|(e, _)| **e == -1)
            .map(|(_, kj)| *kj)
            .sum();
        if negatives % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// ε ⊗ x written into `out` without allocation.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, xi), e) in out.iter_mut().zip(x).zip(&self.0) {
            *o = f64::from(*e) * xi;
        }
    }

    /// (ε ⊗ λ, x) = Σ ε(j) λ(j) x(j).
    pub fn signed_dot(&self, lambda: &[f64], x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(lambda)
            .zip(x)
            .map(|((e, l), xi)| f64::from(*e) * l * xi)
            .sum()
    }
}

/// All 2^d sign vectors in binary-counting order; the first is 1⃗.
pub fn enumerate_sign_vectors(d: usize) -> Result<Vec<SignVector>> {
    check_dimension(d)?;
    Ok((0..1usize << d).map(|i| SignVector::from_index(i, d)).collect())
}

/// Coordinatewise product ε ⊗ x.
pub fn coordinatewise_product(eps: &SignVector, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(eps.dim(), x.len())?;
    let mut out = vec![0.0; x.len()];
    eps.apply_into(x, &mut out);
    Ok(out)
}

/// The closed orthant Z(ε) = {x : ε(j)·x(j) ≥ 0 for all j}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Octant {
    pub sign: SignVector,
}

impl Octant {
    pub fn new(sign: SignVector) -> Self {
        Self { sign }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.sign.dim()
            && self
                .sign
                .entries()
                .iter()
                .zip(x)
                .all(|(e, xi)| f64::from(*e) * xi >= 0.0)
    }
}

/// Octants containing `x`: one for a point with no zero coordinate, 2^k when
/// k coordinates vanish.
pub fn octants_containing(x: &[f64]) -> Result<Vec<Octant>> {
    let all = enumerate_sign_vectors(x.len())?;
    Ok(all
        .into_iter()
        .map(Octant::new)
        .filter(|o| o.contains(x))
        .collect())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}
