//! Finite-difference verifiers for absolute monotonicity (all mixed
//! partials ≥ 0) and monotonicity relative to an octant, K(ε): the mixed
//! partial of order k carries the sign ε^k.
//!
//! Verdicts are three-valued. `Consistent` only means no violation was seen
//! at this resolution.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::signs::{check_dimension, SignVector};

pub type Evaluable<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub k: Vec<usize>,
    pub lambda: Vec<f64>,
    /// Forward-difference estimate of the (sign-adjusted) mixed partial.
    pub difference: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Verdict {
    Consistent,
    Violated(Witness),
    Inconclusive(String),
}

impl Verdict {
    pub fn is_consistent(&self) -> bool {
        matches!(self, Verdict::Consistent)
    }

    pub fn is_violated(&self) -> bool {
        matches!(self, Verdict::Violated(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Consistent => "consistent",
            Verdict::Violated(_) => "violated",
            Verdict::Inconclusive(_) => "inconclusive",
        }
    }
}

/// Evaluation box, grid and stencil.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StencilConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub k_max: usize,
    pub grid_points: usize,
    pub h: Vec<f64>,
}

impl StencilConfig {
    /// k_max = 4, 9 points per axis, h = width/64.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        check_dimension(lo.len())?;
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::Parameter(format!("box needs lo < hi on every axis, got {lo:?} .. {hi:?}")));
        }
        let h = lo.iter().zip(&hi).map(|(a, b)| (b - a) / 64.0).collect();
        Ok(Self {
            lo,
            hi,
            k_max: 4,
            grid_points: 9,
            h,
        })
    }

    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d])
    }

    pub fn with_k_max(mut self, k_max: usize) -> Self {
        self.k_max = k_max;
        self
    }

    pub fn with_grid_points(mut self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("grid needs at least one point per axis".into()));
        }
        self.grid_points = n;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn grid(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let n = self.grid_points;
        let axis = |j: usize, i: usize| {
            if n == 1 {
                self.lo[j]
            } else {
                self.lo[j] + (self.hi[j] - self.lo[j]) * i as f64 / (n - 1) as f64
            }
        };
        (0..n.pow(d as u32))
            .map(|mut idx| {
                (0..d)
                    .map(|j| {
                        let i = idx % n;
                        idx /= n;
                        axis(j, i)
                    })
                    .collect()
            })
            .collect()
    }

    /// Box mirrored through ε: axis j maps [lo, hi] to [−hi, −lo] when ε(j) = −1.
    fn flipped(&self, eps: &SignVector) -> Self {
        let mut out = self.clone();
        for j in 0..self.dim() {
            if eps.get(j) < 0.0 {
                out.lo[j] = -self.hi[j];
                out.hi[j] = -self.lo[j];
            }
        }
        out
    }
}

/// Multi-indices with |k| ≤ k_max, by total order then first axis first.
fn orders(d: usize, k_max: usize) -> Vec<Vec<usize>> {
    fn fill(prefix: &mut Vec<usize>, d: usize, left: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == d - 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=left).rev() {
            prefix.push(k);
            fill(prefix, d, left - k, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for total in 0..=k_max {
        fill(&mut Vec::with_capacity(d), d, total, &mut out);
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// f on the lattice λ + i⊙h, 0 ≤ i(j) ≤ width − 1, row-major in axis 0.
struct Block {
    values: Vec<f64>,
    width: usize,
}

impl Block {
    fn new(f: Evaluable, lambda: &[f64], h: &[f64], width: usize) -> Self {
        let d = lambda.len();
        let mut point = vec![0.0; d];
        let values = (0..width.pow(d as u32))
            .map(|mut idx| {
                for j in 0..d {
                    point[j] = lambda[j] + (idx % width) as f64 * h[j];
                    idx /= width;
                }
                f(&point)
            })
            .collect();
        Self { values, width }
    }

    fn at(&self, i: &[usize]) -> f64 {
        let mut idx = 0;
        for j in (0..i.len()).rev() {
            idx = idx * self.width + i[j];
        }
        self.values[idx]
    }

    /// (Δ^k f / h^k, roundoff bound).
    fn difference(&self, k: &[usize], h: &[f64]) -> (f64, f64) {
        let d = k.len();
        let count: usize = k.iter().map(|kj| kj + 1).product();
        let scale: f64 = k.iter().zip(h).map(|(kj, hj)| hj.powi(*kj as i32)).product();
        let mut i = vec![0usize; d];
        let (mut sum, mut mass) = (0.0, 0.0);
        for mut idx in 0..count {
            let mut coef = 1.0;
            for j in 0..d {
                i[j] = idx % (k[j] + 1);
                idx /= k[j] + 1;
                coef *= binomial(k[j], i[j]);
                if (k[j] - i[j]) % 2 == 1 {
                    coef = -coef;
                }
            }
            let term = coef * self.at(&i);
            sum += term;
            mass += term.abs();
        }
        (sum / scale, 4.0 * f64::EPSILON * mass / scale)
    }
}

/// Absolute monotonicity: every mixed forward difference of order
/// |k| ≤ k_max is ≥ 0 at every grid point. A violation needs a difference
/// below −10× its estimated error (truncation plus roundoff); unresolved
/// negative differences give `Inconclusive`.
pub fn check_absolutely_monotonic(f: Evaluable, config: &StencilConfig) -> Verdict {
    let d = config.dim();
    let ks = orders(d, config.k_max);
    let width = config.k_max + 2;
    let blocks: Vec<(Vec<f64>, Block)> = config
        .grid()
        .into_par_iter()
        .map(|l| {
            let b = Block::new(f, &l, &config.h, width);
            (l, b)
        })
        .collect();
    if blocks.iter().any(|(_, b)| b.values.iter().any(|v| !v.is_finite())) {
        return Verdict::Inconclusive(format!("f is not finite on the box inflated by {} steps", width - 1));
    }
    let mut unresolved: Option<String> = None;
    for k in &ks {
        for (l, b) in &blocks {
            let (diff, round) = b.difference(k, &config.h);
            let mut trunc = 0.0;
            for j in 0..d {
                if k[j] == 0 {
                    continue;
                }
                let mut up = k.clone();
                up[j] += 1;
                let (next, _) = b.difference(&up, &config.h);
                trunc += 0.5 * k[j] as f64 * config.h[j] * next.abs();
            }
            let tolerance = 10.0 * (trunc + round);
            if diff < -tolerance {
                return Verdict::Violated(Witness {
                    k: k.clone(),
                    lambda: l.clone(),
                    difference: diff,
                    tolerance,
                });
            }
            if diff < -10.0 * round && unresolved.is_none() {
                unresolved = Some(format!(
                    "difference {diff:e} of order {k:?} at {l:?} is negative but within its error bound {tolerance:e}"
                ));
            }
        }
    }
    match unresolved {
        Some(msg) => Verdict::Inconclusive(msg),
        None => Verdict::Consistent,
    }
}

/// K(ε) monotonicity, checked as absolute monotonicity of λ ↦ f(ε⊗λ) on the
/// mirrored box. Witness coordinates are reported in the original frame and
/// the difference carries the sign adjustment ε^k.
pub fn check_octant_monotonic(f: Evaluable, eps: &SignVector, config: &StencilConfig) -> Result<Verdict> {
    check_dim(config.dim(), eps.dim())?;
    let flipped = config.flipped(eps);
    let g = |mu: &[f64]| {
        let mut x = vec![0.0; mu.len()];
        eps.apply_into(mu, &mut x);
        f(&x)
    };
    Ok(match check_absolutely_monotonic(&g, &flipped) {
        Verdict::Violated(mut w) => {
            let mut x = vec![0.0; w.lambda.len()];
            eps.apply_into(&w.lambda, &mut x);
            w.lambda = x;
            Verdict::Violated(w)
        }
        v => v,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecompositionTolerance {
    /// Allowed |Σ F_ε(λ) − target(λ)| on the grid.
    pub sum: f64,
    /// Allowed |Σ F_ε(0) − 1|.
    pub origin: f64,
}

impl Default for DecompositionTolerance {
    fn default() -> Self {
        Self { sum: 1e-8, origin: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub verdict: Verdict,
    pub max_sum_error: f64,
    pub origin_sum: f64,
    pub part_verdicts: Vec<(SignVector, Verdict)>,
}

/// Checks target = Σ_ε F_ε on the grid, Σ F_ε(0) = 1 and F_ε ∈ K(ε) for
/// each part.
pub fn decomposition_check(
    parts: &[(SignVector, Evaluable)],
    target: Evaluable,
    config: &StencilConfig,
    tolerance: DecompositionTolerance,
) -> Result<DecompositionReport> {
    let d = config.dim();
    if parts.is_empty() {
        return Err(Error::Parameter("decomposition needs at least one part".into()));
    }
    for (i, (e, _)) in parts.iter().enumerate() {
        check_dim(d, e.dim())?;
        if parts[..i].iter().any(|(o, _)| o == e) {
            return Err(Error::Parameter(format!("duplicate sign vector {:?} in decomposition", e.entries())));
        }
    }
    let max_sum_error = config
        .grid()
        .iter()
        .map(|l| (parts.iter().map(|(_, f)| f(l)).sum::<f64>() - target(l)).abs())
        .fold(0.0, f64::max);
    let zero = vec![0.0; d];
    let origin_sum: f64 = parts.iter().map(|(_, f)| f(&zero)).sum();
    let mut part_verdicts = Vec::with_capacity(parts.len());
    for (e, f) in parts {
        part_verdicts.push((e.clone(), check_octant_monotonic(*f, e, config)?));
    }
    let verdict = if !(max_sum_error <= tolerance.sum) {
        Verdict::Violated(Witness {
            k: vec![0; d],
            lambda: vec![],
            difference: max_sum_error,
            tolerance: tolerance.sum,
        })
    } else if !((origin_sum - 1.0).abs() <= tolerance.origin) {
        Verdict::Violated(Witness {
            k: vec![0; d],
            lambda: zero,
            difference: origin_sum - 1.0,
            tolerance: tolerance.origin,
        })
    } else if let Some((_, v)) = part_verdicts.iter().find(|(_, v)| v.is_violated()) {
        v.clone()
    } else if let Some((_, v)) = part_verdicts.iter().find(|(_, v)| !v.is_consistent()) {
        v.clone()
    } else {
        Verdict::Consistent
    };
    Ok(DecompositionReport {
        verdict,
        max_sum_error,
        origin_sum,
        part_verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::{sample, VectorDistribution};
    use crate::young::MatrixParameter;
    use proptest::prelude::*;

    fn unit_square() -> StencilConfig {
        StencilConfig::cube(2, 0.0, 1.0).unwrap().with_k_max(3)
    }

    #[test]
    fn order_enumeration() {
        let ks = orders(2, 2);
        assert_eq!(ks, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(orders(3, 4).len(), 35);
    }

    #[test]
    fn absolute_examples() {
        let plus = |l: &[f64]| (l[0] + l[1]).exp();
        assert!(check_absolutely_monotonic(&plus, &unit_square()).is_consistent());
        let minus = |l: &[f64]| (l[0] - l[1]).exp();
        match check_absolutely_monotonic(&minus, &unit_square()) {
            Verdict::Violated(w) => {
                assert_eq!(w.k, vec![0, 1]);
                assert!(w.difference < -w.tolerance);
            }
            v => panic!("{v:?}"),
        }
        let one = |_: &[f64]| 1.0;
        assert!(check_absolutely_monotonic(&one, &unit_square()).is_consistent());
    }

    #[test]
    fn octant_examples() {
        let minus = |l: &[f64]| (l[0] - l[1]).exp();
        let plus = |l: &[f64]| (l[0] + l[1]).exp();
        let e = SignVector::new(vec![1, -1]).unwrap();
        assert!(check_octant_monotonic(&minus, &e, &unit_square()).unwrap().is_consistent());
        assert!(check_octant_monotonic(&plus, &SignVector::ones(2), &unit_square()).unwrap().is_consistent());
        match check_octant_monotonic(&plus, &SignVector::new(vec![-1, -1]).unwrap(), &unit_square()).unwrap() {
            Verdict::Violated(w) => assert_eq!(w.k, vec![1, 0]),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn default_stencil() {
        let c = StencilConfig::cube(2, -1.0, 1.0).unwrap();
        assert_eq!((c.k_max, c.grid_points), (4, 9));
        assert_eq!(c.h, vec![2.0 / 64.0; 2]);
        assert!(StencilConfig::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn non_finite_is_inconclusive() {
        let f = |l: &[f64]| if l[0] > 0.99 { f64::INFINITY } else { 1.0 };
        let c = StencilConfig::cube(1, 0.0, 1.0).unwrap();
        assert!(matches!(check_absolutely_monotonic(&f, &c), Verdict::Inconclusive(_)));
    }

    #[test]
    fn cosh_decomposition() {
        let c = StencilConfig::cube(1, -1.0, 1.0).unwrap();
        let up = |l: &[f64]| 0.5 * l[0].exp();
        let down = |l: &[f64]| 0.5 * (-l[0]).exp();
        let cosh = |l: &[f64]| l[0].cosh();
        let parts: Vec<(SignVector, Evaluable)> = vec![(SignVector::ones(1), &up), (SignVector::new(vec![-1]).unwrap(), &down)];
        let r = decomposition_check(&parts, &cosh, &c, DecompositionTolerance::default()).unwrap();
        assert!(r.verdict.is_consistent(), "{r:?}");
        assert!((r.origin_sum - 1.0).abs() < 1e-15);
        let missing: Vec<(SignVector, Evaluable)> = vec![(SignVector::ones(1), &up)];
        let r = decomposition_check(&missing, &cosh, &c, DecompositionTolerance::default()).unwrap();
        assert!(r.verdict.is_violated());
        let dup: Vec<(SignVector, Evaluable)> = vec![(SignVector::ones(1), &up), (SignVector::ones(1), &down)];
        assert!(matches!(decomposition_check(&dup, &cosh, &c, DecompositionTolerance::default()), Err(Error::Parameter(_))));
    }

    #[test]
    fn gaussian_half_line_decomposition() {
        let g = VectorDistribution::gaussian(MatrixParameter::identity(1)).unwrap();
        let s = sample(&g, 200_000, 11).unwrap();
        let xs: Vec<f64> = s.data().to_vec();
        let n = xs.len() as f64;
        let (pos, neg): (Vec<f64>, Vec<f64>) = xs.iter().partition(|x| **x > 0.0);
        let up = move |l: &[f64]| pos.iter().map(|x| (l[0] * x).exp()).sum::<f64>() / n;
        let down = move |l: &[f64]| neg.iter().map(|x| (l[0] * x).exp()).sum::<f64>() / n;
        let target = |l: &[f64]| (0.5 * l[0] * l[0]).exp();
        let c = StencilConfig::cube(1, -1.0, 1.0).unwrap();
        // MC error of the mean of e^{λξ} at |λ| ≤ 1: 3·√((e^{2λ²} − e^{λ²})/n)
        let tol = DecompositionTolerance {
            sum: 3.0 * ((2f64.exp() - 1f64.exp()) / n).sqrt(),
            origin: 1e-10,
        };
        let parts: Vec<(SignVector, Evaluable)> = vec![(SignVector::ones(1), &up), (SignVector::new(vec![-1]).unwrap(), &down)];
        let r = decomposition_check(&parts, &target, &c, tol).unwrap();
        assert!(r.verdict.is_consistent(), "{r:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn flip_equivariance(a in -1.5f64..1.5, b in -1.5f64..1.5, idx in 0usize..4) {
            let e = SignVector::from_index(idx, 2);
            let f = move |l: &[f64]| (a * l[0] + b * l[1]).exp() + 0.1 * (l[0] - l[1]).exp();
            let flipped = {
                let e = e.clone();
                move |l: &[f64]| {
                    let mut x = vec![0.0; 2];
                    e.apply_into(l, &mut x);
                    f(&x)
                }
            };
            let c = StencilConfig::cube(2, -0.5, 0.5).unwrap().with_k_max(2);
            let lhs = check_octant_monotonic(&f, &e, &c).unwrap();
            let rhs = check_absolutely_monotonic(&flipped, &c.flipped(&e));
            prop_assert_eq!(lhs.label(), rhs.label());
            let k1 = check_octant_monotonic(&f, &SignVector::ones(2), &c).unwrap();
            prop_assert_eq!(k1, check_absolutely_monotonic(&f, &c));
        }
    }
}
