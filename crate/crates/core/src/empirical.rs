//! Random vectors, sample sets and the Monte Carlo estimators built on them:
//! the natural function, octant tail functions and vector moments.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{check_dim, Error, Result};
use crate::logspace::LogSumExp;
use crate::signs::{check_dimension, enumerate_sign_vectors, SignVector};
use crate::young::{MatrixParameter, YoungFunction};

/// Rows per RNG stream. Chunk boundaries depend only on `n`, never on the
/// worker count.
const CHUNK: usize = 4096;

/// Largest single-sample share of the exponential sum above which an
/// empirical log-MGF value is flagged untrusted.
pub const TRUST_SHARE: f64 = 0.1;

type Sampler = Arc<dyn Fn(&mut ChaCha8Rng, &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub enum VectorDistribution {
    Gaussian { q: MatrixParameter, factor: DMatrix<f64> },
    /// Independent coordinates ±scale_j·W with P(W > t) = exp(−t^p).
    SymmetricWeibull { p: f64, scale: Vec<f64> },
    /// Independent ±scale coordinates.
    Rademacher { scale: f64, dim: usize },
    UniformBox { half_widths: Vec<f64> },
    /// A centred law given by a seedable sampler.
    Custom { name: String, dim: usize, sampler: Sampler },
}

impl fmt::Debug for VectorDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

impl VectorDistribution {
    /// Full-rank gaussian with covariance Q.
    pub fn gaussian(q: MatrixParameter) -> Result<Self> {
        if !q.positive_definite() {
            return Err(Error::Parameter("gaussian covariance is not full rank".into()));
        }
        Self::gaussian_degenerate(q)
    }

    /// Gaussian with a positive semi-definite covariance.
    pub fn gaussian_degenerate(q: MatrixParameter) -> Result<Self> {
        check_dimension(q.dim())?;
        let eig = q.matrix().clone().symmetric_eigen();
        let top = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        if eig.eigenvalues.iter().any(|v| *v < -1e-12 * top.max(1.0)) {
            return Err(Error::Parameter("gaussian covariance is not positive semi-definite".into()));
        }
        let d = q.dim();
        let sqrt = DMatrix::from_fn(d, d, |i, j| if i == j { eig.eigenvalues[i].max(0.0).sqrt() } else { 0.0 });
        let factor = &eig.eigenvectors * sqrt;
        Ok(Self::Gaussian { q, factor })
    }

    pub fn weibull(p: f64, scale: Vec<f64>) -> Result<Self> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::Parameter(format!("weibull exponent must be positive, got {p}")));
        }
        if scale.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::Parameter(format!("weibull scales must be positive, got {scale:?}")));
        }
        check_dimension(scale.len())?;
        Ok(Self::SymmetricWeibull { p, scale })
    }

    pub fn rademacher(scale: f64, dim: usize) -> Result<Self> {
        if !(scale >= 0.0) || !scale.is_finite() {
            return Err(Error::Parameter(format!("rademacher scale must be nonnegative, got {scale}")));
        }
        check_dimension(dim)?;
        Ok(Self::Rademacher { scale, dim })
    }

    pub fn uniform(half_widths: Vec<f64>) -> Result<Self> {
        if half_widths.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
            return Err(Error::Parameter(format!("uniform half-widths must be positive, got {half_widths:?}")));
        }
        check_dimension(half_widths.len())?;
        Ok(Self::UniformBox { half_widths })
    }

    pub fn custom<F>(name: &str, dim: usize, sampler: F) -> Result<Self>
    where
        F: Fn(&mut ChaCha8Rng, &mut [f64]) + Send + Sync + 'static,
    {
        check_dimension(dim)?;
        Ok(Self::Custom {
            name: name.to_string(),
            dim,
            sampler: Arc::new(sampler),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian { q, .. } => q.dim(),
            Self::SymmetricWeibull { scale, .. } => scale.len(),
            Self::Rademacher { dim, .. } | Self::Custom { dim, .. } => *dim,
            Self::UniformBox { half_widths } => half_widths.len(),
        }
    }

    pub fn tag(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        match self {
            Self::Gaussian { q, .. } => {
                let rows: Vec<String> = q.rows().iter().map(|r| format!("[{}]", list(r))).collect();
                format!("gaussian{{Q=[{}]}}", rows.join(","))
            }
            Self::SymmetricWeibull { p, scale } => format!("weibull{{p={p},scale=[{}]}}", list(scale)),
            Self::Rademacher { scale, dim } => format!("rademacher{{scale={scale},d={dim}}}"),
            Self::UniformBox { half_widths } => format!("uniform{{hw=[{}]}}", list(half_widths)),
            Self::Custom { name, dim, .. } => format!("custom{{name={name},d={dim}}}"),
        }
    }

    /// Whether the moment generating function is finite near the origin.
    pub fn has_mgf(&self) -> bool {
        match self {
            Self::SymmetricWeibull { p, .. } => *p >= 1.0,
            _ => true,
        }
    }

    pub fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        match self {
            Self::Gaussian { factor, .. } => {
                let d = out.len();
                let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..d).map(|j| factor[(i, j)] * z[j]).sum();
                }
            }
            Self::SymmetricWeibull { p, scale } => {
                for (o, s) in out.iter_mut().zip(scale) {
                    let u: f64 = 1.0 - rng.random::<f64>();
                    let m = (-u.ln()).powf(1.0 / p);
                    *o = if rng.random::<bool>() { s * m } else { -s * m };
                }
            }
            Self::Rademacher { scale, .. } => {
                for o in out.iter_mut() {
                    *o = if rng.random::<bool>() { *scale } else { -scale };
                }
            }
            Self::UniformBox { half_widths } => {
                for (o, h) in out.iter_mut().zip(half_widths) {
                    *o = rng.random_range(-*h..*h);
                }
            }
            Self::Custom { sampler, .. } => sampler(rng, out),
        }
    }

    /// Exact natural function log max_ε E exp(Σ ε(j)λ(j)ξ(j)), where known.
    /// Returns +∞ where the MGF is infinite and `None` for custom laws.
    pub fn natural_log_mgf(&self, lambda: &[f64]) -> Option<f64> {
        match self {
            Self::Gaussian { q, .. } => {
                let d = lambda.len();
                let signs = enumerate_sign_vectors(d).ok()?;
                let mut flipped = vec![0.0; d];
                let best = signs
                    .iter()
                    .map(|e| {
                        e.apply_into(lambda, &mut flipped);
                        0.5 * q.quad_form(&flipped)
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                Some(best)
            }
            Self::SymmetricWeibull { p, scale } => Some(
                lambda
                    .iter()
                    .zip(scale)
                    .map(|(l, s)| weibull_log_cosh_moment(l * s, *p))
                    .sum(),
            ),
            Self::Rademacher { scale, .. } => Some(lambda.iter().map(|l| log_cosh(l * scale)).sum()),
            Self::UniformBox { half_widths } => Some(
                lambda
                    .iter()
                    .zip(half_widths)
                    .map(|(l, h)| {
                        let z = (l * h).abs();
                        if z < 1e-4 {
                            z * z / 6.0 - z.powi(4) / 180.0
                        } else {
                            // ln(sinh z / z) = z + ln(1 − e^{−2z}) − ln 2 − ln z
                            z + (-(-2.0 * z).exp()).ln_1p() - std::f64::consts::LN_2 - z.ln()
                        }
                    })
                    .sum(),
            ),
            Self::Custom { .. } => None,
        }
    }

    /// Exact covariance matrix, where known.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        let diag = |v: Vec<f64>| Some(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(v)));
        match self {
            Self::Gaussian { q, .. } => Some(q.matrix().clone()),
            Self::SymmetricWeibull { p, scale } => {
                let m2 = gamma(1.0 + 2.0 / p);
                diag(scale.iter().map(|s| s * s * m2).collect())
            }
            Self::Rademacher { scale, dim } => diag(vec![scale * scale; *dim]),
            Self::UniformBox { half_widths } => diag(half_widths.iter().map(|h| h * h / 3.0).collect()),
            Self::Custom { .. } => None,
        }
    }
}

/// log cosh z without overflow.
pub fn log_cosh(z: f64) -> f64 {
    let a = z.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// ln E cosh(a·W) for P(W > t) = exp(−t^p); +∞ when the expectation diverges.
pub fn weibull_log_cosh_moment(a: f64, p: f64) -> f64 {
    let a = a.abs();
    if a == 0.0 {
        return 0.0;
    }
    if p < 1.0 {
        return f64::INFINITY;
    }
    if p == 1.0 {
        // E cosh(aW) = 1/(1 − a²) for the unit exponential
        return if a >= 1.0 { f64::INFINITY } else { -(-a * a).ln_1p() };
    }
    // Substituting u = t^p and v = ln u: ∫ cosh(a·e^{v/p}) exp(v − e^v) dv.
    let log_integrand = |v: f64| log_cosh(a * (v / p).exp()) + v - v.exp();
    let h = 0.01;
    let mut acc = LogSumExp::default();
    let mut peak = f64::NEG_INFINITY;
    let mut v = -36.0;
    loop {
        let f = log_integrand(v);
        peak = peak.max(f);
        acc.push(f);
        if v > 0.0 && f < peak - 60.0 {
            break;
        }
        v += h;
    }
    acc.log_sum() + h.ln()
}

/// An n×d block of draws, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    data: Vec<f64>,
    n: usize,
    dim: usize,
    pub seed: u64,
    pub tag: String,
    has_mgf: bool,
}

impl SampleSet {
    pub fn from_rows(rows: &[Vec<f64>], tag: &str, seed: u64) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InsufficientData("empty sample set".into()));
        }
        let dim = rows[0].len();
        check_dimension(dim)?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            check_dim(dim, r.len())?;
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("sample entries must be finite".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            data,
            n: rows.len(),
            dim,
            seed,
            tag: tag.to_string(),
            has_mgf: true,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn has_mgf(&self) -> bool {
        self.has_mgf
    }

    /// α·ξ.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            data: self.data.iter().map(|v| v * alpha).collect(),
            tag: format!("{alpha}*{}", self.tag),
            ..self.clone()
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for r in self.rows() {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.n as f64);
        m
    }

    fn centered(&self) -> Vec<f64> {
        let m = self.mean();
        self.data
            .iter()
            .enumerate()
            .map(|(k, v)| v - m[k % self.dim])
            .collect()
    }

    /// Writes a `dim,seed,tag` header line followed by one row per draw.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        let io = |e: csv::Error| Error::Domain(format!("csv write failed: {e}"));
        w.write_record(["dim", "seed", "tag"]).map_err(io)?;
        w.write_record([self.dim.to_string(), self.seed.to_string(), self.tag.clone()])
            .map_err(io)?;
        for r in self.rows() {
            w.write_record(r.iter().map(|v| format!("{v:e}"))).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Domain(format!("csv flush failed: {e}")))?;
        Ok(())
    }
}

fn chunked_draw<F>(n: usize, dim: usize, seed: u64, fill: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let rows = CHUNK.min(n - c * CHUNK);
            let mut block = vec![0.0; rows * dim];
            for row in block.chunks_exact_mut(dim) {
                fill(&mut rng, row);
            }
            block
        })
        .collect();
    parts.concat()
}

/// n i.i.d. draws. Deterministic in (dist, n, seed) and independent of the
/// rayon pool size.
pub fn sample(dist: &VectorDistribution, n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::InsufficientData("sample size must be at least 1".into()));
    }
    let dim = dist.dim();
    let data = chunked_draw(n, dim, seed, |rng, row| dist.sample_into(rng, row));
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("sampler for {} produced a non-finite value", dist.tag())));
    }
    Ok(SampleSet {
        data,
        n,
        dim,
        seed,
        tag: dist.tag(),
        has_mgf: dist.has_mgf(),
    })
}

/// `reps` draws of S(n) = n^{−1/2} Σ_{i≤n} ξ_i with i.i.d. ξ_i.
pub fn sample_normalized_sum(dist: &VectorDistribution, n_terms: usize, reps: usize, seed: u64) -> Result<SampleSet> {
    if n_terms == 0 || reps == 0 {
        return Err(Error::InsufficientData("need n ≥ 1 terms and reps ≥ 1".into()));
    }
    let dim = dist.dim();
    let norm = 1.0 / (n_terms as f64).sqrt();
    let data = chunked_draw(reps, dim, seed, |rng, row| {
        let mut term = vec![0.0; dim];
        row.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..n_terms {
            dist.sample_into(rng, &mut term);
            row.iter_mut().zip(&term).for_each(|(a, b)| *a += b);
        }
        row.iter_mut().for_each(|v| *v *= norm);
    });
    Ok(SampleSet {
        data,
        n: reps,
        dim,
        seed,
        tag: format!("S({n_terms}) of {}", dist.tag()),
        has_mgf: dist.has_mgf(),
    })
}

/// An estimated log-MGF value with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MgfValue {
    pub value: f64,
    /// Two-sigma delta-method width of `value`.
    pub width: f64,
    /// Share of the exponential sum carried by the largest single term.
    pub max_share: f64,
    pub trusted: bool,
}

impl MgfValue {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            width: 0.0,
            max_share: 0.0,
            trusted: value.is_finite(),
        }
    }
}

/// λ ↦ max_ε log (1/n) Σ_i exp((ε⊗λ, ξ_i)) over re-centred samples.
pub struct EmpiricalNaturalFunction {
    centered: Vec<f64>,
    n: usize,
    dim: usize,
    signs: Vec<SignVector>,
    cache: Mutex<HashMap<Vec<u64>, MgfValue>>,
    tag: String,
}

impl fmt::Debug for EmpiricalNaturalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EmpiricalNaturalFunction({}, n={})", self.tag, self.n)
    }
}

pub fn natural_function(s: &SampleSet) -> Result<EmpiricalNaturalFunction> {
    if !s.has_mgf() {
        return Err(Error::Precondition(format!(
            "{} has no finite moment generating function; use tail functions instead",
            s.tag
        )));
    }
    Ok(EmpiricalNaturalFunction {
        centered: s.centered(),
        n: s.n,
        dim: s.dim,
        signs: enumerate_sign_vectors(s.dim)?,
        cache: Mutex::new(HashMap::new()),
        tag: s.tag.clone(),
    })
}

impl EmpiricalNaturalFunction {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn evaluate(&self, lambda: &[f64]) -> Result<MgfValue> {
        check_dim(self.dim, lambda.len())?;
        if lambda.iter().all(|v| *v == 0.0) {
            return Ok(MgfValue::exact(0.0));
        }
        let key: Vec<u64> = lambda.iter().map(|v| v.to_bits()).collect();
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let d = self.dim;
        let k = self.signs.len();
        let chunk_rows = 16384;
        let flipped: Vec<Vec<f64>> = self
            .signs
            .iter()
            .map(|e| lambda.iter().enumerate().map(|(j, l)| e.get(j) * l).collect())
            .collect();
        let partial: Vec<Vec<(LogSumExp, LogSumExp)>> = self
            .centered
            .par_chunks(chunk_rows * d)
            .map(|block| {
                let mut acc = vec![(LogSumExp::default(), LogSumExp::default()); k];
                for row in block.chunks_exact(d) {
                    for (a, l) in acc.iter_mut().zip(&flipped) {
                        let z: f64 = row.iter().zip(l).map(|(x, y)| x * y).sum();
                        a.0.push(z);
                        a.1.push(2.0 * z);
                    }
                }
                acc
            })
            .collect();
        let mut total = vec![(LogSumExp::default(), LogSumExp::default()); k];
        for part in &partial {
            for (t, p) in total.iter_mut().zip(part) {
                t.0.merge(&p.0);
                t.1.merge(&p.1);
            }
        }
        let mut best = MgfValue::exact(f64::NEG_INFINITY);
        for (first, second) in &total {
            let l1 = first.log_mean();
            if l1 > best.value {
                let l2 = second.log_mean();
                let rel_var = ((l2 - 2.0 * l1).exp() - 1.0).max(0.0);
                let share = first.max_term_share();
                best = MgfValue {
                    value: l1,
                    width: 2.0 * (rel_var / self.n as f64).sqrt(),
                    max_share: share,
                    trusted: share <= TRUST_SHARE,
                };
            }
        }
        // Jensen after centring: the exact value is nonnegative.
        best.value = best.value.max(0.0);
        self.cache.lock().expect("cache lock").insert(key, best);
        Ok(best)
    }

    /// The value alone; +∞ on dimension mismatch.
    pub fn value(&self, lambda: &[f64]) -> f64 {
        self.evaluate(lambda).map(|v| v.value).unwrap_or(f64::INFINITY)
    }

    /// Wraps the estimate as an (empirical-family) Young function.
    pub fn into_young(self: Arc<Self>) -> Result<YoungFunction> {
        let dim = self.dim;
        let name = format!("natural[{}]", self.tag);
        YoungFunction::empirical(&name, dim, move |l| self.value(l))
    }
}

/// A Monte Carlo probability with its confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub value: f64,
    pub half_width: f64,
}

/// 2·√(p̂(1−p̂)/n), or 3/n when p̂ ∈ {0, 1}.
pub fn binomial_half_width(p: f64, n: usize) -> f64 {
    let n = n as f64;
    if p <= 0.0 || p >= 1.0 {
        3.0 / n
    } else {
        2.0 * (p * (1.0 - p) / n).sqrt()
    }
}

fn check_threshold(dim: usize, x: &[f64]) -> Result<()> {
    check_dim(dim, x.len())?;
    if x.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Domain(format!("tail threshold must be nonnegative, got {x:?}")));
    }
    Ok(())
}

/// Joint exceedance frequency of each octant, #{i : ε(j)ξ_i(j) > x(j) ∀j}/n,
/// in canonical sign-vector order.
pub fn octant_tails(s: &SampleSet, x: &[f64]) -> Result<Vec<f64>> {
    check_threshold(s.dim, x)?;
    let mut counts = vec![0usize; 1 << s.dim];
    'rows: for row in s.rows() {
        let mut idx = 0usize;
        for (j, (v, t)) in row.iter().zip(x).enumerate() {
            if *v > *t {
            } else if -*v > *t {
                idx |= 1 << j;
            } else {
                continue 'rows;
            }
        }
        counts[idx] += 1;
    }
    Ok(counts.iter().map(|c| *c as f64 / s.n as f64).collect())
}

/// Empirical tail function U(ξ, x) = max_ε P̂(∀j: ε(j)ξ(j) > x(j)).
pub fn tail_function(s: &SampleSet, x: &[f64]) -> Result<TailEstimate> {
    let p = octant_tails(s, x)?.into_iter().fold(0.0, f64::max);
    Ok(TailEstimate {
        value: p,
        half_width: binomial_half_width(p, s.n),
    })
}

/// P̂(min_j |ξ(j)| > y).
pub fn min_coordinate_tail(s: &SampleSet, y: f64) -> Result<TailEstimate> {
    if !(y > 0.0) {
        return Err(Error::Domain(format!("min-coordinate threshold must be positive, got {y}")));
    }
    let hits = s.rows().filter(|r| r.iter().all(|v| v.abs() > y)).count();
    let p = hits as f64 / s.n as f64;
    Ok(TailEstimate {
        value: p,
        half_width: binomial_half_width(p, s.n),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub value: f64,
    /// Two-sigma delta-method width.
    pub width: f64,
}

/// |ξ|_r = (E Π_j |ξ(j)|^{r(j)})^{1/Σr}, accumulated in log space.
pub fn vector_moment(s: &SampleSet, r: &[f64]) -> Result<MomentEstimate> {
    check_dim(s.dim, r.len())?;
    if r.iter().any(|v| !(*v >= 1.0) || !v.is_finite()) {
        return Err(Error::Range(format!("moment orders must be ≥ 1, got {r:?}")));
    }
    let total: f64 = r.iter().sum();
    let mut first = LogSumExp::default();
    let mut second = LogSumExp::default();
    for row in s.rows() {
        let t: f64 = row.iter().zip(r).map(|(x, k)| k * x.abs().ln()).sum();
        first.push(t);
        second.push(2.0 * t);
    }
    let l1 = first.log_mean();
    if l1 == f64::NEG_INFINITY {
        return Ok(MomentEstimate { value: 0.0, width: 0.0 });
    }
    if !l1.is_finite() {
        return Err(Error::Diverged { ray: vec![] });
    }
    let value = (l1 / total).exp();
    let rel_var = ((second.log_mean() - 2.0 * l1).exp() - 1.0).max(0.0);
    let rel = 2.0 * (rel_var / s.n as f64).sqrt();
    Ok(MomentEstimate {
        value,
        width: value * rel / total,
    })
}

/// Unbiased sample covariance.
pub fn empirical_variance(s: &SampleSet) -> Result<DMatrix<f64>> {
    if s.n < 2 {
        return Err(Error::InsufficientData("variance needs at least two samples".into()));
    }
    let d = s.dim;
    let m = s.mean();
    let mut c = DMatrix::zeros(d, d);
    for row in s.rows() {
        for i in 0..d {
            for j in 0..d {
                c[(i, j)] += (row[i] - m[i]) * (row[j] - m[j]);
            }
        }
    }
    Ok(c / (s.n - 1) as f64)
}
