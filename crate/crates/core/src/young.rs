//! Young-Orlicz functions and structural predicate checkers.
//!
//! A [`YoungFunction`] is an even convex function φ on a centrally symmetric
//! open support V with φ(0) = 0. The concrete families are quadratic forms,
//! Euclidean powers, the one-dimensional bounded-support family, radial
//! compositions ν((Qλ, λ)) and user closures. Three derived families
//! (φ_A, φ_n and φ̄) are built by the transform and sum-bound machinery.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::quasi;
use crate::signs::{self, check_dimension, enumerate_sign_vectors, SignVector};

/// Open, convex, centrally symmetric region containing the origin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SupportRegion {
    FullSpace { dim: usize },
    Ball { dim: usize, radius: f64 },
    Box { half_widths: Vec<f64> },
    /// Finite exactly where the function is finite; no closed description.
    Implicit { dim: usize },
}

impl SupportRegion {
    pub fn dim(&self) -> usize {
        match self {
            Self::FullSpace { dim } | Self::Ball { dim, .. } | Self::Implicit { dim } => *dim,
            Self::Box { half_widths } => half_widths.len(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Self::FullSpace { .. } | Self::Implicit { .. } => true,
            Self::Ball { radius, .. } => signs::norm2(x) < *radius,
            Self::Box { half_widths } => x.iter().zip(half_widths).all(|(xi, h)| xi.abs() < *h),
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, Self::Ball { .. } | Self::Box { .. })
    }

    /// Per-axis half-widths of the smallest box containing the region;
    /// infinite for unbounded regions.
    pub fn bounding_half_widths(&self) -> Vec<f64> {
        match self {
            Self::FullSpace { dim } | Self::Implicit { dim } => vec![f64::INFINITY; *dim],
            Self::Ball { dim, radius } => vec![*radius; *dim],
            Self::Box { half_widths } => half_widths.clone(),
        }
    }

    /// Largest t with t·u inside the closure of the region (∞ if unbounded).
    pub fn ray_exit(&self, direction: &[f64]) -> f64 {
        match self {
            Self::FullSpace { .. } | Self::Implicit { .. } => f64::INFINITY,
            Self::Ball { radius, .. } => radius / signs::norm2(direction),
            Self::Box { half_widths } => direction
                .iter()
                .zip(half_widths)
                .filter(|(u, _)| u.abs() > 0.0)
                .map(|(u, h)| h / u.abs())
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Euclidean radius of the largest centred ball inside the region.
    pub fn inner_radius(&self) -> f64 {
        match self {
            Self::FullSpace { .. } | Self::Implicit { .. } => f64::INFINITY,
            Self::Ball { radius, .. } => *radius,
            Self::Box { half_widths } => half_widths.iter().cloned().fold(f64::INFINITY, f64::min),
        }
    }

    fn scaled(&self, s: f64) -> Self {
        match self {
            Self::Ball { dim, radius } => Self::Ball {
                dim: *dim,
                radius: radius * s,
            },
            Self::Box { half_widths } => Self::Box {
                half_widths: half_widths.iter().map(|h| h * s).collect(),
            },
            other => other.clone(),
        }
    }
}

/// Symmetric d×d matrix with a positive-definiteness certificate.
#[derive(Clone)]
pub struct MatrixParameter {
    entries: DMatrix<f64>,
    cholesky: Option<Cholesky<f64, Dyn>>,
}

impl fmt::Debug for MatrixParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixParameter")
            .field("entries", &self.rows())
            .field("positive_definite", &self.positive_definite())
            .finish()
    }
}

impl MatrixParameter {
    /// Builds from rows. Asymmetry beyond 1e−12 (relative) is rejected; the
    /// stored matrix is the exact symmetrisation.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::Parameter("empty matrix".into()));
        }
        for r in rows {
            check_dim(d, r.len())?;
        }
        let m = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
        Self::from_matrix(m)
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Parameter("matrix is not square".into()));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("matrix has non-finite entries".into()));
        }
        let scale = m.amax().max(1.0);
        let asym = (&m - m.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::Parameter(format!("matrix not symmetric (max asymmetry {asym})")));
        }
        let sym = (&m + m.transpose()) * 0.5;
        let cholesky = Cholesky::new(sym.clone());
        Ok(Self {
            entries: sym,
            cholesky,
        })
    }

    pub fn identity(d: usize) -> Self {
        Self::from_matrix(DMatrix::identity(d, d)).expect("identity is positive definite")
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        Self::from_matrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.entries[(i, j)]).collect())
            .collect()
    }

    pub fn positive_definite(&self) -> bool {
        self.cholesky.is_some()
    }

    /// (Bλ, λ).
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut s = 0.0;
        for i in 0..d {
            let mut row = 0.0;
            for j in 0..d {
                row += self.entries[(i, j)] * x[j];
            }
            s += x[i] * row;
        }
        s
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|i| (0..d).map(|j| self.entries[(i, j)] * x[j]).sum())
            .collect()
    }

    /// (B⁻¹y, y) via the Cholesky factor.
    pub fn inverse_quad_form(&self, y: &[f64]) -> Result<f64> {
        let ch = self
            .cholesky
            .as_ref()
            .ok_or_else(|| Error::Parameter("matrix is not positive definite".into()))?;
        let v = DVector::from_column_slice(y);
        let sol = ch.solve(&v);
        Ok(sol.dot(&v))
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.entries.clone().symmetric_eigen().eigenvalues.iter().cloned().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }
}

/// Scalar profile ν for radial functions φ(λ) = ν((Qλ, λ)).
#[derive(Clone)]
pub enum RadialProfile {
    /// ν(z) = c·z.
    Linear { c: f64 },
    /// ν(z) = c·z^k, k ≥ 1.
    Power { k: f64, c: f64 },
    Custom {
        name: String,
        nu: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Linear { c } => write!(f, "Linear({c})"),
            Self::Power { k, c } => write!(f, "Power(k={k}, c={c})"),
            Self::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl RadialProfile {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Self::Linear { c } => c * z,
            Self::Power { k, c } => c * z.powf(*k),
            Self::Custom { nu, .. } => nu(z),
        }
    }

    fn derivative(&self, z: f64) -> Option<f64> {
        match self {
            Self::Linear { c } => Some(*c),
            Self::Power { k, c } => Some(if z == 0.0 {
                if *k == 1.0 {
                    *c
                } else {
                    0.0
                }
            } else {
                c * k * z.powf(k - 1.0)
            }),
            Self::Custom { .. } => None,
        }
    }
}

/// Whether the function meets every axiom of the Young-Orlicz class,
/// including a finite origin Hessian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Membership {
    Full,
    /// The origin Hessian is unbounded (Euclidean power with 1 < p < 2).
    Relaxed,
}

type VectorFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Family {
    Quadratic { b: MatrixParameter },
    Power { p: f64, c: f64 },
    BoundedSupport { k: f64, c: f64 },
    Radial { nu: RadialProfile, q: MatrixParameter },
    Custom { name: String, f: VectorFn },
    Empirical { name: String, f: VectorFn },
    /// φ_A(λ) = φ(Aᵀλ).
    Transformed { base: Arc<YoungFunction>, a: DMatrix<f64> },
    /// φ_n(λ) = n·φ(λ/√n).
    SumScaled { base: Arc<YoungFunction>, n: u64 },
    /// φ̄(λ) = max over the listed n of n·φ(λ/√n), together with the limit
    /// 0.5·(φ″(0)λ, λ).
    SupOverN { base: Arc<YoungFunction>, ns: Vec<u64> },
}

impl fmt::Debug for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Quadratic { b } => write!(f, "Quadratic({:?})", b.rows()),
            Self::Power { p, c } => write!(f, "Power(p={p}, c={c})"),
            Self::BoundedSupport { k, c } => write!(f, "BoundedSupport(K={k}, c={c})"),
            Self::Radial { nu, q } => write!(f, "Radial({nu:?}, Q={:?})", q.rows()),
            Self::Custom { name, .. } => write!(f, "Custom({name})"),
            Self::Empirical { name, .. } => write!(f, "Empirical({name})"),
            Self::Transformed { base, a } => write!(f, "Transformed({:?}, A={a})", base.family),
            Self::SumScaled { base, n } => write!(f, "SumScaled({:?}, n={n})", base.family),
            Self::SupOverN { base, ns } => write!(f, "SupOverN({:?}, n={ns:?})", base.family),
        }
    }
}

/// An evaluable Young-Orlicz function on R^d.
#[derive(Debug, Clone)]
pub struct YoungFunction {
    dim: usize,
    support: SupportRegion,
    family: Family,
    /// Matrix of second derivatives at the origin, 2·D_φ. `None` when it is
    /// unbounded.
    hessian: Option<DMatrix<f64>>,
    membership: Membership,
}

impl YoungFunction {
    /// φ(λ) = 0.5·(Bλ, λ).
    pub fn quadratic(b: MatrixParameter) -> Result<Self> {
        if !b.positive_definite() {
            return Err(Error::Parameter("quadratic family needs a positive definite B".into()));
        }
        let dim = b.dim();
        check_dimension(dim)?;
        Ok(Self {
            dim,
            support: SupportRegion::FullSpace { dim },
            hessian: Some(b.matrix().clone()),
            family: Family::Quadratic { b },
            membership: Membership::Full,
        })
    }

    /// φ(λ) = c·|λ|^p with the Euclidean norm.
    pub fn power(p: f64, c: f64, dim: usize) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::Parameter(format!("power family needs p > 1, got {p}")));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Parameter(format!("power family needs c > 0, got {c}")));
        }
        check_dimension(dim)?;
        let (hessian, membership) = if p < 2.0 {
            (None, Membership::Relaxed)
        } else if p == 2.0 {
            (Some(DMatrix::identity(dim, dim) * (2.0 * c)), Membership::Full)
        } else {
            (Some(DMatrix::zeros(dim, dim)), Membership::Full)
        };
        Ok(Self {
            dim,
            support: SupportRegion::FullSpace { dim },
            family: Family::Power { p, c },
            hessian,
            membership,
        })
    }

    /// One-dimensional φ(λ) = c·λ²/(K − |λ|) on (−K, K).
    pub fn bounded_support(k: f64, c: f64) -> Result<Self> {
        if !(k > 0.0) || !(c > 0.0) || !k.is_finite() || !c.is_finite() {
            return Err(Error::Parameter(format!("bounded family needs K, c > 0, got K={k}, c={c}")));
        }
        Ok(Self {
            dim: 1,
            support: SupportRegion::Ball { dim: 1, radius: k },
            family: Family::BoundedSupport { k, c },
            hessian: Some(DMatrix::from_element(1, 1, 2.0 * c / k)),
            membership: Membership::Full,
        })
    }

    /// φ(λ) = ν((Qλ, λ)).
    pub fn radial(nu: RadialProfile, q: MatrixParameter) -> Result<Self> {
        if !q.positive_definite() {
            return Err(Error::Parameter("radial family needs a positive definite Q".into()));
        }
        let at_zero = nu.eval(0.0);
        if at_zero != 0.0 {
            return Err(Error::Parameter(format!("radial profile has ν(0) = {at_zero} ≠ 0")));
        }
        if let RadialProfile::Power { k, c } = &nu {
            if !(*k >= 1.0) || !(*c > 0.0) {
                return Err(Error::Parameter(format!("radial power profile needs k ≥ 1, c > 0 (k={k}, c={c})")));
            }
        }
        let dim = q.dim();
        check_dimension(dim)?;
        let slope = match &nu {
            RadialProfile::Linear { c } => Some(*c),
            RadialProfile::Power { k, c } => Some(if *k == 1.0 { *c } else { 0.0 }),
            RadialProfile::Custom { nu, .. } => {
                let h = 1e-6;
                Some(nu(h) / h)
            }
        };
        let hessian = slope.map(|s| q.matrix() * (2.0 * s));
        Ok(Self {
            dim,
            support: SupportRegion::FullSpace { dim },
            family: Family::Radial { nu, q },
            hessian,
            membership: Membership::Full,
        })
    }

    /// A user-supplied even convex function. The origin Hessian is taken
    /// from `hessian` or estimated by central differences.
    pub fn custom<F>(name: &str, dim: usize, f: F, hessian: Option<DMatrix<f64>>) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::from_closure(name, dim, Arc::new(f), hessian, false)
    }

    /// Wraps an empirically estimated function (e.g. a natural function).
    pub fn empirical<F>(name: &str, dim: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::from_closure(name, dim, Arc::new(f), None, true)
    }

    fn from_closure(
        name: &str,
        dim: usize,
        f: VectorFn,
        hessian: Option<DMatrix<f64>>,
        empirical: bool,
    ) -> Result<Self> {
        check_dimension(dim)?;
        let zero = f(&vec![0.0; dim]);
        if zero.abs() > 1e-12 {
            return Err(Error::Parameter(format!("function {name} has φ(0) = {zero} ≠ 0")));
        }
        let hessian = match hessian {
            Some(h) => {
                if h.nrows() != dim || h.ncols() != dim {
                    return Err(Error::Shape {
                        expected: dim,
                        found: h.nrows(),
                    });
                }
                Some(h)
            }
            None => Some(estimate_hessian_at_origin(&*f, dim)),
        };
        let family = if empirical {
            Family::Empirical {
                name: name.to_string(),
                f,
            }
        } else {
            Family::Custom {
                name: name.to_string(),
                f,
            }
        };
        Ok(Self {
            dim,
            support: SupportRegion::FullSpace { dim },
            family,
            hessian,
            membership: Membership::Full,
        })
    }

    /// φ_A(λ) = φ(Aᵀλ) for a square matrix A.
    pub fn transformed(base: &YoungFunction, a: &DMatrix<f64>) -> Result<Self> {
        check_dim(base.dim, a.nrows())?;
        check_dim(base.dim, a.ncols())?;
        let support = if base.support.is_bounded() {
            SupportRegion::Implicit { dim: base.dim }
        } else {
            base.support.clone()
        };
        let hessian = base.hessian.as_ref().map(|h| a * h * a.transpose());
        Ok(Self {
            dim: base.dim,
            support,
            family: Family::Transformed {
                base: Arc::new(base.clone()),
                a: a.clone(),
            },
            hessian,
            membership: base.membership,
        })
    }

    /// φ_n(λ) = n·φ(λ/√n).
    pub fn sum_scaled(base: &YoungFunction, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("φ_n needs n ≥ 1".into()));
        }
        base.require_full_membership("φ_n")?;
        Ok(Self {
            dim: base.dim,
            support: base.support.scaled((n as f64).sqrt()),
            family: Family::SumScaled {
                base: Arc::new(base.clone()),
                n,
            },
            hessian: base.hessian.clone(),
            membership: Membership::Full,
        })
    }

    /// φ̄(λ) = max(max_{n ∈ ns} n·φ(λ/√n), 0.5·(φ″(0)λ, λ)).
    pub fn sup_over_n(base: &YoungFunction, ns: &[u64]) -> Result<Self> {
        if ns.is_empty() || ns.contains(&0) {
            return Err(Error::Parameter("φ̄ needs a nonempty set of n ≥ 1".into()));
        }
        base.require_full_membership("φ̄")?;
        let min_n = *ns.iter().min().expect("nonempty");
        Ok(Self {
            dim: base.dim,
            support: base.support.scaled((min_n as f64).sqrt()),
            family: Family::SupOverN {
                base: Arc::new(base.clone()),
                ns: ns.to_vec(),
            },
            hessian: base.hessian.clone(),
            membership: Membership::Full,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> &SupportRegion {
        &self.support
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn membership(&self) -> Membership {
        self.membership
    }

    /// The origin Hessian 2·D_φ, if finite.
    pub fn hessian_at_origin(&self) -> Option<&DMatrix<f64>> {
        self.hessian.as_ref()
    }

    pub fn hessian_positive_definite(&self) -> bool {
        self.hessian
            .as_ref()
            .map(|h| Cholesky::new(h.clone()).is_some())
            .unwrap_or(false)
    }

    pub fn family_tag(&self) -> &'static str {
        match &self.family {
            Family::Quadratic { .. } => "quadratic",
            Family::Power { .. } => "power",
            Family::BoundedSupport { .. } => "bounded",
            Family::Radial { .. } => "radial",
            Family::Custom { .. } => "custom",
            Family::Empirical { .. } => "empirical",
            Family::Transformed { .. } => "transformed",
            Family::SumScaled { .. } => "sum_scaled",
            Family::SupOverN { .. } => "sup_over_n",
        }
    }

    pub(crate) fn require_full_membership(&self, what: &str) -> Result<()> {
        match self.membership {
            Membership::Full => Ok(()),
            Membership::Relaxed => Err(Error::Precondition(format!(
                "{what} requires a Young function with finite origin Hessian; {:?} has relaxed membership",
                self.family
            ))),
        }
    }

    /// φ(λ), +∞ outside the support. `lambda` must have length `dim`.
    pub fn value(&self, lambda: &[f64]) -> f64 {
        debug_assert_eq!(lambda.len(), self.dim);
        match &self.family {
            Family::Quadratic { b } => 0.5 * b.quad_form(lambda),
            Family::Power { p, c } => {
                let r = signs::norm2(lambda);
                if r == 0.0 {
                    0.0
                } else {
                    c * r.powf(*p)
                }
            }
            Family::BoundedSupport { k, c } => {
                let a = lambda[0].abs();
                if a >= *k {
                    f64::INFINITY
                } else {
                    c * a * a / (k - a)
                }
            }
            Family::Radial { nu, q } => nu.eval(q.quad_form(lambda)),
            Family::Custom { f, .. } | Family::Empirical { f, .. } => f(lambda),
            Family::Transformed { base, a } => {
                let at: Vec<f64> = (0..self.dim)
                    .map(|j| (0..self.dim).map(|i| a[(i, j)] * lambda[i]).sum())
                    .collect();
                base.value(&at)
            }
            Family::SumScaled { base, n } => {
                let nf = *n as f64;
                nf * base.value(&signs::scale(lambda, 1.0 / nf.sqrt()))
            }
            Family::SupOverN { base, ns } => {
                let mut best = match &base.hessian {
                    Some(h) => 0.5 * quad(h, lambda),
                    None => f64::INFINITY,
                };
                for &n in ns {
                    let nf = n as f64;
                    best = best.max(nf * base.value(&signs::scale(lambda, 1.0 / nf.sqrt())));
                }
                best
            }
        }
    }

    /// φ(λ) with dimension and support checks.
    pub fn evaluate(&self, lambda: &[f64]) -> Result<f64> {
        check_dim(self.dim, lambda.len())?;
        if !self.support.contains(lambda) {
            return Err(Error::Domain(format!("λ = {lambda:?} lies outside the support")));
        }
        let v = self.value(lambda);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain(format!("φ(λ) is not finite at λ = {lambda:?}")))
        }
    }

    /// Closed-form gradient where the family provides one.
    pub fn gradient(&self, lambda: &[f64]) -> Option<Vec<f64>> {
        match &self.family {
            Family::Quadratic { b } => Some(b.apply(lambda)),
            Family::Power { p, c } => {
                let r = signs::norm2(lambda);
                if r == 0.0 {
                    return Some(vec![0.0; self.dim]);
                }
                let s = c * p * r.powf(p - 2.0);
                Some(signs::scale(lambda, s))
            }
            Family::BoundedSupport { k, c } => {
                let l = lambda[0];
                let a = l.abs();
                if a >= *k {
                    return None;
                }
                Some(vec![l.signum() * c * a * (2.0 * k - a) / ((k - a) * (k - a))])
            }
            Family::Radial { nu, q } => {
                let z = q.quad_form(lambda);
                let dnu = nu.derivative(z)?;
                Some(signs::scale(&q.apply(lambda), 2.0 * dnu))
            }
            Family::Transformed { base, a } => {
                let at: Vec<f64> = (0..self.dim)
                    .map(|j| (0..self.dim).map(|i| a[(i, j)] * lambda[i]).sum())
                    .collect();
                let g = base.gradient(&at)?;
                Some(
                    (0..self.dim)
                        .map(|i| (0..self.dim).map(|j| a[(i, j)] * g[j]).sum())
                        .collect(),
                )
            }
            Family::SumScaled { base, n } => {
                let s = (*n as f64).sqrt();
                let g = base.gradient(&signs::scale(lambda, 1.0 / s))?;
                Some(signs::scale(&g, s))
            }
            _ => None,
        }
    }

    /// Closed-form Young-Fenchel conjugate where one is known.
    pub fn closed_form_conjugate(&self, y: &[f64]) -> Option<f64> {
        match &self.family {
            Family::Quadratic { b } => b.inverse_quad_form(y).ok().map(|v| 0.5 * v),
            Family::Power { p, c } => {
                let s = signs::norm2(y);
                if s == 0.0 {
                    return Some(0.0);
                }
                // sup_t (t·s − c·t^p) attained at t = (s/(cp))^{1/(p−1)}
                let t = (s / (c * p)).powf(1.0 / (p - 1.0));
                Some((p - 1.0) * c * t.powf(*p))
            }
            Family::SumScaled { base, n } => {
                // (nφ(·/√n))*(y) = n·φ*(y/√n)
                let nf = *n as f64;
                base.closed_form_conjugate(&signs::scale(y, 1.0 / nf.sqrt()))
                    .map(|v| nf * v)
            }
            _ => None,
        }
    }
}

fn quad(h: &DMatrix<f64>, x: &[f64]) -> f64 {
    let d = x.len();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += x[i] * h[(i, j)] * x[j];
        }
    }
    s
}

fn estimate_hessian_at_origin(f: &(dyn Fn(&[f64]) -> f64 + Send + Sync), dim: usize) -> DMatrix<f64> {
    let h = 1e-4;
    let eval = |i: Option<(usize, f64)>, j: Option<(usize, f64)>| {
        let mut x = vec![0.0; dim];
        if let Some((a, s)) = i {
            x[a] += s;
        }
        if let Some((b, s)) = j {
            x[b] += s;
        }
        f(&x)
    };
    let f0 = eval(None, None);
    DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            (eval(Some((i, h)), None) - 2.0 * f0 + eval(Some((i, -h)), None)) / (h * h)
        } else {
            (eval(Some((i, h)), Some((j, h))) - eval(Some((i, h)), Some((j, -h)))
                - eval(Some((i, -h)), Some((j, h)))
                + eval(Some((i, -h)), Some((j, -h))))
                / (4.0 * h * h)
        }
    })
}

/// Outcome of a randomised predicate check. `Holds` certifies only that no
/// violation was found among the sampled trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CheckOutcome<W> {
    Holds,
    Violated(W),
}

impl<W> CheckOutcome<W> {
    pub fn holds(&self) -> bool {
        matches!(self, Self::Holds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lambda2Witness {
    pub a: f64,
    pub b: f64,
    pub lambda: Vec<f64>,
    /// φ(aλ) + φ(bλ).
    pub lhs: f64,
    /// φ(√(a²+b²)·λ).
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lambda2Report {
    pub outcome: CheckOutcome<Lambda2Witness>,
    pub seed: u64,
    pub trials: usize,
    pub plan: String,
}

/// Samples `trial_count` triples (a, b, λ) and looks for a violation of
/// φ(aλ) + φ(bλ) ≤ φ(√(a²+b²)·λ). The tolerance is relative to
/// max(1, |rhs|).
pub fn check_lambda2(phi: &YoungFunction, trial_count: usize, tolerance: f64, seed: u64) -> Lambda2Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = phi.dim();
    let radius = phi.support().inner_radius();
    let (ln_lo, ln_hi) = (1e-2f64.ln(), 1e2f64.ln());
    let mut outcome = CheckOutcome::Holds;
    for _ in 0..trial_count {
        let a = rng.random_range(ln_lo..ln_hi).exp();
        let b = rng.random_range(ln_lo..ln_hi).exp();
        let c = a.hypot(b);
        let mut lambda: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if radius.is_finite() {
            let n = signs::norm2(&lambda).max(1e-300);
            let u: f64 = rng.random_range(0.0..1.0);
            lambda = signs::scale(&lambda, 0.8 * radius * u / (n * c));
        }
        let lhs = phi.value(&signs::scale(&lambda, a)) + phi.value(&signs::scale(&lambda, b));
        let rhs = phi.value(&signs::scale(&lambda, c));
        if lhs > rhs + tolerance * rhs.abs().max(1.0) {
            outcome = CheckOutcome::Violated(Lambda2Witness { a, b, lambda, lhs, rhs });
            break;
        }
    }
    Lambda2Report {
        outcome,
        seed,
        trials: trial_count,
        plan: "a,b log-uniform on [1e-2, 1e2]; λ standard normal (scaled by 0.8·radius/√(a²+b²) on bounded support)".into(),
    }
}

/// Estimate of the matrix seminorm |||A|||_φ over a finite λ grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Delta2Estimate {
    /// `None` when no m ≤ `m_max` satisfies every grid constraint.
    pub value: Option<f64>,
    pub m_max: f64,
    pub grid: String,
}

/// Smallest m with φ(Aᵀλ) ≤ φ(m²λ) over a grid of `search_budget`
/// directions × radii 2^k, k = −10..10, followed by a pattern search around
/// the binding probe. A lower bound of the seminorm.
pub fn check_delta2_seminorm(phi: &YoungFunction, a: &DMatrix<f64>, search_budget: usize) -> Result<Delta2Estimate> {
    let d = phi.dim();
    check_dim(d, a.nrows())?;
    check_dim(d, a.ncols())?;
    if phi.support().is_bounded() {
        return Err(Error::Precondition("Δ₂ seminorm needs full-space support".into()));
    }
    let m_max = 1e3;
    let (r_lo, r_hi) = (2f64.powi(-10), 2f64.powi(10));
    // least m for one λ; +∞ when even m_max fails
    let required = |lambda: &[f64]| -> f64 {
        let at: Vec<f64> = (0..d).map(|j| (0..d).map(|i| a[(i, j)] * lambda[i]).sum()).collect();
        let target = phi.value(&at);
        let ok = |m: f64| target <= phi.value(&signs::scale(lambda, m * m)) * (1.0 + 1e-12);
        if ok(0.0) {
            return 0.0;
        }
        if !ok(m_max) {
            return f64::INFINITY;
        }
        let (mut lo, mut hi) = (0.0, m_max);
        while hi - lo > 1e-12 * hi {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let mut dirs = quasi::axis_and_diagonal_directions(d);
    dirs.extend(quasi::sphere_directions(d, search_budget, false));
    let mut best = (0.0f64, dirs[0].clone(), 0.0f64);
    for u in &dirs {
        for k in -10..=10 {
            let m = required(&signs::scale(u, 2f64.powi(k)));
            if m > best.0 {
                best = (m, u.clone(), f64::from(k) * std::f64::consts::LN_2);
            }
        }
    }
    let grid = format!("{} directions × radii 2^k, k=-10..10, pattern-search refined", dirs.len());
    if best.0.is_infinite() {
        return Ok(Delta2Estimate { value: None, m_max, grid });
    }
    if best.0 > 0.0 {
        let (mut m, mut u, mut log_r) = best;
        let mut step = 0.1;
        while step > 1e-9 {
            let mut improved = false;
            for j in 0..=d {
                for sgn in [1.0, -1.0] {
                    let (mut v, mut lr) = (u.clone(), log_r);
                    if j < d {
                        v[j] += sgn * step;
                        let n = signs::norm2(&v);
                        if n == 0.0 {
                            continue;
                        }
                        v = signs::scale(&v, 1.0 / n);
                    } else {
                        lr = (lr + sgn * step).clamp(r_lo.ln(), r_hi.ln());
                    }
                    let cand = required(&signs::scale(&v, lr.exp()));
                    if cand.is_infinite() {
                        return Ok(Delta2Estimate { value: None, m_max, grid });
                    }
                    if cand > m {
                        (m, u, log_r) = (cand, v, lr);
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best.0 = m;
    }
    Ok(Delta2Estimate {
        value: Some(best.0),
        m_max,
        grid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvenWitness {
    pub eps: SignVector,
    pub x: Vec<f64>,
    pub value: f64,
    pub flipped_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvenReport {
    pub outcome: CheckOutcome<EvenWitness>,
    pub seed: u64,
    pub trials: usize,
}

/// Checks f(ε ⊗ x) = f(x) within 1e−10 (relative to max(1, |f(x)|)) at
/// `trial_count` standard-normal points and every sign vector.
pub fn check_absolutely_even<F>(f: F, dim: usize, trial_count: usize, seed: u64) -> Result<EvenReport>
where
    F: Fn(&[f64]) -> f64,
{
    let all = enumerate_sign_vectors(dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flipped = vec![0.0; dim];
    for _ in 0..trial_count {
        let x: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let fx = f(&x);
        for eps in &all[1..] {
            eps.apply_into(&x, &mut flipped);
            let ff = f(&flipped);
            if (ff - fx).abs() > 1e-10 * fx.abs().max(1.0) {
                return Ok(EvenReport {
                    outcome: CheckOutcome::Violated(EvenWitness {
                        eps: eps.clone(),
                        x,
                        value: fx,
                        flipped_value: ff,
                    }),
                    seed,
                    trials: trial_count,
                });
            }
        }
    }
    Ok(EvenReport {
        outcome: CheckOutcome::Holds,
        seed,
        trials: trial_count,
    })
}
