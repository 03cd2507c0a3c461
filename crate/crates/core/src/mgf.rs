//! Log moment generating functions fed to the norm estimators.
//!
//! A [`LogMgf`] normally returns a natural-function value: the maximum over
//! sign vectors is already taken, so it is absolutely even. Plain MGFs
//! report `absolutely_even() == false`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::empirical::{EmpiricalNaturalFunction, MgfValue, VectorDistribution};
use crate::error::{check_dim, Error, Result};
use crate::signs::{enumerate_sign_vectors, SignVector};

pub trait LogMgf: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, lambda: &[f64]) -> MgfValue;
    fn describe(&self) -> String;
    fn absolutely_even(&self) -> bool {
        true
    }
}

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// An exact natural function given by a closure.
#[derive(Clone)]
pub struct AnalyticMgf {
    dim: usize,
    name: String,
    f: ScalarFn,
}

impl AnalyticMgf {
    /// `f` must already include the maximum over sign vectors.
    pub fn new<F>(name: &str, dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            dim,
            name: name.to_string(),
            f: Arc::new(f),
        }
    }

    /// The natural function of a built-in distribution.
    pub fn of(dist: &VectorDistribution) -> Result<Self> {
        let probe = vec![0.0; dist.dim()];
        if dist.natural_log_mgf(&probe).is_none() {
            return Err(Error::Precondition(format!("{} has no analytic natural function", dist.tag())));
        }
        let d = dist.clone();
        Ok(Self::new(&format!("natural[{}]", dist.tag()), dist.dim(), move |l| {
            d.natural_log_mgf(l).unwrap_or(f64::INFINITY)
        }))
    }
}

impl LogMgf for AnalyticMgf {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, lambda: &[f64]) -> MgfValue {
        MgfValue::exact((self.f)(lambda))
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}

impl LogMgf for EmpiricalNaturalFunction {
    fn dim(&self) -> usize {
        EmpiricalNaturalFunction::dim(self)
    }

    fn eval(&self, lambda: &[f64]) -> MgfValue {
        self.evaluate(lambda).unwrap_or(MgfValue {
            value: f64::INFINITY,
            width: 0.0,
            max_share: 1.0,
            trusted: false,
        })
    }

    fn describe(&self) -> String {
        format!("{self:?}")
    }
}

/// Natural function of Aξ from the plain log-MGF of ξ:
/// λ ↦ max_ε log E exp((Aᵀ(ε⊗λ), ξ)), or without the maximum in plain mode.
pub struct PushForward {
    plain: ScalarFn,
    a: DMatrix<f64>,
    signs: Vec<SignVector>,
    name: String,
    natural: bool,
}

impl PushForward {
    pub fn new<F>(name: &str, plain: F, a: &DMatrix<f64>) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if !a.is_square() {
            return Err(Error::Shape {
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        Ok(Self {
            plain: Arc::new(plain),
            a: a.clone(),
            signs: enumerate_sign_vectors(a.nrows())?,
            name: format!("A·{name}"),
            natural: true,
        })
    }

    /// Drop the maximum over sign vectors: λ ↦ log E exp((Aᵀλ, ξ)).
    pub fn plain(mut self) -> Self {
        self.signs.truncate(1);
        self.natural = false;
        self.name = format!("plain {}", self.name);
        self
    }

    /// Uses the plain log-MGF of a built-in distribution.
    pub fn of(dist: &VectorDistribution, a: &DMatrix<f64>) -> Result<Self> {
        check_dim(dist.dim(), a.nrows())?;
        let plain: ScalarFn = match dist {
            VectorDistribution::Gaussian { q, .. } => {
                let q = q.clone();
                Arc::new(move |l: &[f64]| 0.5 * q.quad_form(l))
            }
            VectorDistribution::Custom { .. } => {
                return Err(Error::Precondition("custom laws have no analytic MGF".into()));
            }
            // coordinatewise symmetric laws: plain and natural coincide
            other => {
                let d = other.clone();
                Arc::new(move |l: &[f64]| d.natural_log_mgf(l).unwrap_or(f64::INFINITY))
            }
        };
        let p = plain.clone();
        Self::new(&dist.tag(), move |l| p(l), a)
    }
}

impl LogMgf for PushForward {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn eval(&self, lambda: &[f64]) -> MgfValue {
        let d = self.dim();
        let mut flipped = vec![0.0; d];
        let mut best = f64::NEG_INFINITY;
        for e in &self.signs {
            e.apply_into(lambda, &mut flipped);
            let at: Vec<f64> = (0..d)
                .map(|j| (0..d).map(|i| self.a[(i, j)] * flipped[i]).sum())
                .collect();
            best = best.max((self.plain)(&at));
        }
        MgfValue::exact(best)
    }

    fn describe(&self) -> String {
        self.name.clone()
    }

    fn absolutely_even(&self) -> bool {
        self.natural
    }
}

/// n·m(λ/√n): the natural function bound for the normalised sum of n
/// i.i.d. copies.
pub struct NormalizedSum {
    inner: Arc<dyn LogMgf>,
    n: u64,
}

impl NormalizedSum {
    pub fn new(inner: Arc<dyn LogMgf>, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("normalised sum needs n ≥ 1".into()));
        }
        Ok(Self { inner, n })
    }
}

impl LogMgf for NormalizedSum {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, lambda: &[f64]) -> MgfValue {
        let nf = self.n as f64;
        let s = nf.sqrt();
        let scaled: Vec<f64> = lambda.iter().map(|l| l / s).collect();
        let v = self.inner.eval(&scaled);
        MgfValue {
            value: nf * v.value,
            width: nf * v.width,
            ..v
        }
    }

    fn describe(&self) -> String {
        format!("S({}) of {}", self.n, self.inner.describe())
    }

    fn absolutely_even(&self) -> bool {
        self.inner.absolutely_even()
    }
}

/// λ ↦ m(αλ): the natural function of αξ.
pub struct Scaled {
    inner: Arc<dyn LogMgf>,
    alpha: f64,
}

impl Scaled {
    pub fn new(inner: Arc<dyn LogMgf>, alpha: f64) -> Self {
        Self { inner, alpha }
    }
}

impl LogMgf for Scaled {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, lambda: &[f64]) -> MgfValue {
        let l: Vec<f64> = lambda.iter().map(|v| v * self.alpha).collect();
        self.inner.eval(&l)
    }

    fn describe(&self) -> String {
        format!("{}·{}", self.alpha, self.inner.describe())
    }

    fn absolutely_even(&self) -> bool {
        self.inner.absolutely_even()
    }
}
