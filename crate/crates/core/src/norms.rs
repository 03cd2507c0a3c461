//! Norms of random vectors: the B(φ) norm by bisection, the ⊙ operation,
//! moment (Grand Lebesgue) norms and the Luxemburg norm for N_φ.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;

use crate::conjugate::{log_reparam_conjugate, log_reparam_conjugate_vector, ConjugateEvaluator};
use crate::empirical::{natural_function, vector_moment, MgfValue, MomentEstimate, SampleSet};
use crate::error::{check_dim, Error, Result};
use crate::mgf::LogMgf;
use crate::quasi;
use crate::signs::{self, enumerate_sign_vectors};
use crate::young::{check_absolutely_even, YoungFunction};

pub const DEFAULT_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_CAP: f64 = 1e6;
const REFINE_ROUNDS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    /// [lo, hi] with hi − lo ≤ tolerance·hi and value = hi.
    pub bracket: [f64; 2],
    pub probe_plan: String,
    pub probes: usize,
    /// max over probes of (constraint lhs − rhs) at `value`; ≤ 0 when every
    /// probe is satisfied.
    pub residual: f64,
    /// Probes discarded as untrusted.
    pub trust_flags: usize,
    /// Two-sigma Monte Carlo width propagated from the binding probe.
    pub mc_width: f64,
    /// Probe (λ, p or r⃗) attaining the estimate.
    pub binding: Vec<f64>,
    /// The binding probe lies at (or refined past) an end of the planned
    /// radius range and the constraint still tightens outward: a wider plan
    /// would raise the estimate.
    pub plan_edge: bool,
    pub iterations: usize,
}

impl NormEstimate {
    fn exact(value: f64, plan: String, probes: usize, binding: Vec<f64>, mc_width: f64) -> Self {
        Self {
            value,
            bracket: [value, value],
            probe_plan: plan,
            probes,
            residual: 0.0,
            trust_flags: 0,
            mc_width,
            binding,
            plan_edge: false,
            iterations: 0,
        }
    }
}

/// λ-probe set for norm bisection: directions × radii.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbePlan {
    pub directions: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    /// Add 8 probes around the binding constraint and re-solve, for a fixed
    /// number of rounds with a shrinking step.
    pub refine: bool,
}

impl ProbePlan {
    /// 37 positive-orthant directions plus axes and diagonal, × 33 radii
    /// log-spaced over [2^-8, 2^8].
    pub fn standard(d: usize) -> Self {
        let mut directions = quasi::sphere_directions(d, 37, true);
        directions.extend(quasi::axis_and_diagonal_directions(d));
        Self {
            directions: dedupe(directions),
            radii: quasi::log_space(1.0 / 256.0, 256.0, 33),
            refine: true,
        }
    }

    /// Smaller plan for sample-based MGFs: 9 directions × 9 radii over
    /// [1/16, 2].
    pub fn empirical(d: usize) -> Self {
        let mut directions = quasi::axis_and_diagonal_directions(d);
        directions.extend(quasi::sphere_directions(d, 9, true));
        directions = dedupe(directions);
        directions.truncate(9);
        Self {
            directions,
            radii: quasi::log_space(1.0 / 16.0, 2.0, 9),
            refine: true,
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "{} directions x {} radii [{:.4}, {:.4}]{}",
            self.directions.len(),
            self.radii.len(),
            self.radii.first().copied().unwrap_or(0.0),
            self.radii.last().copied().unwrap_or(0.0),
            if self.refine { " + 8 refinement probes per round" } else { "" }
        )
    }

    /// Probe points. When both sides are absolutely even, positive-orthant
    /// directions suffice. Otherwise every sign class is added, modulo ±
    /// when the MGF side is still even.
    fn lambdas(&self, phi: &YoungFunction, mgf_even: bool) -> Result<Vec<Vec<f64>>> {
        let d = phi.dim();
        for u in &self.directions {
            check_dim(d, u.len())?;
        }
        let abs_even = mgf_even && check_absolutely_even(|l| phi.value(l), d, 16, 0)?.outcome.holds();
        let mut dirs = self.directions.clone();
        if !abs_even {
            let signs = enumerate_sign_vectors(d)?;
            let mut all = Vec::new();
            for u in &self.directions {
                for e in signs.iter().filter(|e| !mgf_even || e.entries()[0] == 1) {
                    all.push(signs::coordinatewise_product(e, u)?);
                }
            }
            dirs = dedupe(all);
        }
        Ok(dirs
            .iter()
            .flat_map(|u| self.radii.iter().map(move |r| signs::scale(u, *r)))
            .collect())
    }
}

fn dedupe(v: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(v.len());
    for x in v {
        if !out.iter().any(|y| y.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-12)) {
            out.push(x);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormOptions {
    /// Relative bisection tolerance.
    pub tolerance: f64,
    pub cap: f64,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            cap: DEFAULT_CAP,
        }
    }
}

/// φ(τλ) ≥ m, with +∞ on the φ side (τλ outside V) always satisfying it.
fn satisfied(phi: &YoungFunction, tau: f64, lambda: &[f64], m: f64) -> bool {
    let rhs = phi.value(&signs::scale(lambda, tau));
    rhs == f64::INFINITY || m <= rhs
}

struct Bisection {
    lo: f64,
    hi: f64,
    iterations: usize,
}

fn bisect_monotone(ok: impl Fn(f64) -> bool, tolerance: f64, cap: f64) -> Result<Bisection> {
    let mut iterations = 0;
    if ok(0.0) {
        return Ok(Bisection {
            lo: 0.0,
            hi: 0.0,
            iterations,
        });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while !ok(hi) {
        iterations += 1;
        lo = hi;
        hi *= 2.0;
        if hi > cap {
            return Err(Error::NormExceedsCap { cap });
        }
    }
    if lo == 0.0 {
        loop {
            iterations += 1;
            let half = 0.5 * hi;
            if half < 1e-300 {
                return Ok(Bisection {
                    lo: 0.0,
                    hi,
                    iterations,
                });
            }
            if ok(half) {
                hi = half;
            } else {
                lo = half;
                break;
            }
        }
    }
    while hi - lo > tolerance * hi {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        debug_assert!(lo <= hi, "bisection bracket inverted");
    }
    Ok(Bisection { lo, hi, iterations })
}

/// ‖ξ‖_{B(φ)} over a finite probe plan: the least τ with m(λ) ≤ φ(τλ) at
/// every trusted probe. A lower bound of the norm over all λ.
pub fn bphi_norm(mgf: &dyn LogMgf, phi: &YoungFunction, plan: &ProbePlan, options: NormOptions) -> Result<NormEstimate> {
    check_dim(phi.dim(), mgf.dim())?;
    let lambdas = plan.lambdas(phi, mgf.absolutely_even())?;
    let evaluated: Vec<(Vec<f64>, MgfValue)> = lambdas.into_par_iter().map(|l| {
        let v = mgf.eval(&l);
        (l, v)
    }).collect();
    let total = evaluated.len();
    let mut probes: Vec<(Vec<f64>, MgfValue)> = evaluated.into_iter().filter(|(_, v)| v.trusted || v.value == f64::INFINITY && v.width == 0.0).collect();
    let trust_flags = total - probes.len();
    if probes.is_empty() {
        return Err(Error::InsufficientData("no trusted probe in the plan".into()));
    }
    let solve = |probes: &[(Vec<f64>, MgfValue)]| {
        bisect_monotone(
            |tau| probes.iter().all(|(l, m)| satisfied(phi, tau, l, m.value)),
            options.tolerance,
            options.cap,
        )
    };
    let mut b = solve(&probes)?;
    let mut iterations = b.iterations;
    let mut description = plan.describe();
    let mut trust_flags = trust_flags;
    if plan.refine && b.hi > 0.0 {
        let mut step = 0.25;
        for round in 0..REFINE_ROUNDS {
            let Some(k) = binding_index(phi, &probes, b.lo) else { break };
            let extra: Vec<(Vec<f64>, MgfValue)> = refinement_probes(&probes[k].0, step, round)
                .into_par_iter()
                .map(|l| {
                    let v = mgf.eval(&l);
                    (l, v)
                })
                .collect();
            let before = extra.len();
            let extra: Vec<_> = extra.into_iter().filter(|(_, v)| v.trusted).collect();
            trust_flags += before - extra.len();
            probes.extend(extra);
            let previous = b.hi;
            b = solve(&probes)?;
            iterations += b.iterations;
            if b.hi <= previous {
                step *= 0.5;
            }
        }
    } else if !plan.refine {
        description.push_str(" (no refinement)");
    }
    let value = b.hi;
    let residual = probes
        .iter()
        .map(|(l, m)| {
            let rhs = phi.value(&signs::scale(l, value));
            if rhs.is_finite() && m.value.is_finite() {
                m.value - rhs
            } else if satisfied(phi, value, l, m.value) {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let (binding, mc_width) = match binding_index(phi, &probes, b.lo) {
        Some(k) if value > 0.0 => {
            let (l, m) = &probes[k];
            let h = 1e-6 * value;
            let slope = (phi.value(&signs::scale(l, value + h)) - phi.value(&signs::scale(l, value - h))) / (2.0 * h);
            let w = if slope.is_finite() && slope > 0.0 { m.width / slope } else { 0.0 };
            (l.clone(), w)
        }
        _ => (vec![], 0.0),
    };
    let plan_edge = !binding.is_empty() && edge_still_rising(mgf, phi, plan, &binding, options);
    Ok(NormEstimate {
        value,
        bracket: [b.lo, b.hi],
        probe_plan: description,
        plan_edge,
        probes: probes.len(),
        residual,
        trust_flags,
        mc_width,
        binding,
        iterations,
    })
}

/// Least τ meeting the single constraint m ≤ φ(τλ).
fn probe_tau(phi: &YoungFunction, lambda: &[f64], m: f64) -> Option<f64> {
    bisect_monotone(|t| satisfied(phi, t, lambda, m), 1e-10, DEFAULT_CAP).ok().map(|b| b.hi)
}

/// Whether the binding probe sits at an end of the radius range with the
/// per-probe requirement still growing outward by more than 10× the
/// bisection tolerance.
fn edge_still_rising(mgf: &dyn LogMgf, phi: &YoungFunction, plan: &ProbePlan, binding: &[f64], options: NormOptions) -> bool {
    if plan.radii.len() < 2 {
        return false;
    }
    let r = signs::norm2(binding);
    let lo = plan.radii.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = plan.radii.iter().copied().fold(0.0, f64::max);
    let ratio = (hi / lo).powf(1.0 / (plan.radii.len() - 1) as f64);
    let inner = if r <= lo * (1.0 + 1e-9) {
        signs::scale(binding, ratio)
    } else if r >= hi * (1.0 - 1e-9) {
        signs::scale(binding, 1.0 / ratio)
    } else {
        return false;
    };
    let (m_edge, m_inner) = (mgf.eval(binding), mgf.eval(&inner));
    if !m_inner.trusted {
        return false;
    }
    match (probe_tau(phi, binding, m_edge.value), probe_tau(phi, &inner, m_inner.value)) {
        (Some(te), Some(ti)) if ti > 0.0 => te / ti - 1.0 > 10.0 * options.tolerance,
        _ => false,
    }
}

/// The probe most violated at τ = lo, measured as m(λ)/φ(lo·λ).
fn binding_index(phi: &YoungFunction, probes: &[(Vec<f64>, MgfValue)], lo: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, (l, m)) in probes.iter().enumerate() {
        if satisfied(phi, lo, l, m.value) {
            continue;
        }
        let rhs = phi.value(&signs::scale(l, lo));
        let ratio = if rhs > 0.0 { m.value / rhs } else { f64::INFINITY };
        if best.map_or(true, |(_, r)| ratio > r) {
            best = Some((k, ratio));
        }
    }
    best.map(|(k, _)| k)
}

/// Eight probes around `lambda`: four radial (factors 2^{±step}, 2^{±step/2})
/// and four angular (±step on two coordinates chosen by `round`).
fn refinement_probes(lambda: &[f64], step: f64, round: usize) -> Vec<Vec<f64>> {
    let d = lambda.len();
    let r = signs::norm2(lambda);
    let u = signs::scale(lambda, 1.0 / r);
    let mut out = Vec::with_capacity(8);
    for f in [-step, -0.5 * step, 0.5 * step, step] {
        out.push(signs::scale(lambda, f.exp2()));
    }
    if d == 1 {
        for f in [-0.25 * step, 0.25 * step, -0.125 * step, 0.125 * step] {
            out.push(signs::scale(lambda, f.exp2()));
        }
    } else {
        for (j, delta) in [(round, step), (round, -step), (round + 1, step), (round + 1, -step)] {
            let mut v = u.clone();
            v[j % d] += delta;
            let n = signs::norm2(&v);
            out.push(signs::scale(&v, r / n));
        }
    }
    out
}

/// a ⊙ b = inf{c : φ(cλ) ≥ φ(aλ) + φ(bλ) at every probe λ}.
pub fn odot(a: f64, b: f64, phi: &YoungFunction, plan: &ProbePlan) -> Result<f64> {
    if !(a >= 0.0) || !(b >= 0.0) {
        return Err(Error::Domain(format!("⊙ needs nonnegative arguments, got {a}, {b}")));
    }
    if a == 0.0 || b == 0.0 {
        return Ok(a.max(b));
    }
    let lambdas = plan.lambdas(phi, true)?;
    let ok = |c: f64| {
        lambdas.iter().all(|l| {
            let target = phi.value(&signs::scale(l, a)) + phi.value(&signs::scale(l, b));
            satisfied(phi, c, l, target)
        })
    };
    let (mut lo, mut hi) = (a.max(b), a + b);
    if ok(lo) {
        return Ok(lo);
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// sup over the p grid of |ξ|_p / ψ(p).
pub fn gls_norm_1d(moments: &dyn Fn(f64) -> f64, psi: &dyn Fn(f64) -> f64, p_grid: &[f64]) -> Result<NormEstimate> {
    if p_grid.is_empty() {
        return Err(Error::Parameter("empty moment grid".into()));
    }
    let mut best = (f64::NEG_INFINITY, 0.0);
    for &p in p_grid {
        let s = psi(p);
        if !(s > 0.0) {
            return Err(Error::Domain(format!("ψ({p}) = {s} is not positive")));
        }
        let ratio = moments(p) / s;
        if ratio > best.0 {
            best = (ratio, p);
        }
    }
    Ok(NormEstimate::exact(
        best.0,
        format!("{} moment orders [{}, {}]", p_grid.len(), p_grid[0], p_grid[p_grid.len() - 1]),
        p_grid.len(),
        vec![best.1],
        0.0,
    ))
}

/// ψ_φ(m) = 2m·exp(−Φ*(2m)/(2m)).
pub fn psi_phi_even_moments(phi: &YoungFunction, m: u32) -> Result<f64> {
    if m == 0 {
        return Err(Error::Range("moment index m must be ≥ 1".into()));
    }
    let r = 2.0 * f64::from(m);
    Ok(r * (-log_reparam_conjugate(phi, r)? / r).exp())
}

/// Default moment-index grid m ∈ 1..=32.
pub fn default_m_grid() -> Vec<u32> {
    (1..=32).collect()
}

/// ψ_Φ(r⃗) = e^{−1}·2^{d/|r|}·Π r(j)^{r(j)/|r|}·e^{−Φ*(r⃗)/|r|}.
pub fn psi_vector(phi: &YoungFunction, r: &[f64]) -> Result<f64> {
    let d = phi.dim() as f64;
    let total: f64 = r.iter().sum();
    let log_prod: f64 = r.iter().map(|x| x * x.ln()).sum::<f64>() / total;
    let phi_star = log_reparam_conjugate_vector(phi, r)?;
    Ok((-1.0 + d * std::f64::consts::LN_2 / total + log_prod - phi_star / total).exp())
}

/// {2·1⃗, (4, 2, …, 2), 4·1⃗, 8·1⃗}, deduplicated.
pub fn default_r_grid(d: usize) -> Vec<Vec<f64>> {
    let mut mixed = vec![2.0; d];
    mixed[0] = 4.0;
    dedupe(vec![vec![2.0; d], mixed, vec![4.0; d], vec![8.0; d]])
}

/// sup over r⃗ of |ξ|_r⃗ / ψ_Φ(r⃗).
pub fn gls_norm_vector(
    moments: &dyn Fn(&[f64]) -> Result<MomentEstimate>,
    phi: &YoungFunction,
    r_grid: &[Vec<f64>],
) -> Result<NormEstimate> {
    if r_grid.is_empty() {
        return Err(Error::Parameter("empty r grid".into()));
    }
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for r in r_grid {
        check_dim(phi.dim(), r.len())?;
        let psi = psi_vector(phi, r)?;
        let m = moments(r)?;
        let ratio = m.value / psi;
        if best.as_ref().map_or(true, |b| ratio > b.0) {
            best = Some((ratio, m.width / psi, r.clone()));
        }
    }
    let (value, width, at) = best.expect("nonempty grid");
    Ok(NormEstimate::exact(value, format!("{} moment vectors", r_grid.len()), r_grid.len(), at, width))
}

/// N_φ(u) = exp(φ*(u)) − exp(φ*(0)) = expm1(φ*(u)).
pub struct OrliczFunction {
    evaluator: ConjugateEvaluator,
    cache: Mutex<HashMap<Vec<u64>, f64>>,
}

impl std::fmt::Debug for OrliczFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "OrliczFunction({:?})", self.evaluator.source().family())
    }
}

impl OrliczFunction {
    /// Uses closed-form conjugates where available.
    pub fn new(phi: &YoungFunction) -> Result<Self> {
        phi.require_full_membership("N_φ")?;
        Ok(Self {
            evaluator: ConjugateEvaluator::new(phi).with_closed_form(true),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn dim(&self) -> usize {
        self.evaluator.source().dim()
    }

    pub fn evaluate(&self, u: &[f64]) -> Result<f64> {
        let closed = self.evaluator.source().closed_form_conjugate(u).is_some();
        let key: Vec<u64> = u.iter().map(|v| v.to_bits()).collect();
        if !closed {
            if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
                return Ok(*v);
            }
        }
        let v = match self.evaluator.evaluate(u) {
            Ok(c) => c.value.exp_m1(),
            Err(Error::Diverged { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        if !closed {
            self.cache.lock().expect("cache lock").insert(key, v);
        }
        Ok(v)
    }
}

/// inf{c > 0 : (1/n)Σ N(ξ_i/c) ≤ 1}.
pub fn luxemburg_norm(s: &SampleSet, n_fn: &OrliczFunction, tolerance: f64) -> Result<NormEstimate> {
    check_dim(n_fn.dim(), s.dim())?;
    if s.data().iter().all(|v| *v == 0.0) {
        return Ok(NormEstimate::exact(0.0, "luxemburg".into(), s.n(), vec![], 0.0));
    }
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let ok = |c: f64| {
        if c == 0.0 {
            return false;
        }
        let mut sum = 0.0;
        for row in s.rows() {
            match n_fn.evaluate(&signs::scale(row, 1.0 / c)) {
                Ok(v) => sum += v,
                Err(e) => {
                    *failure.lock().expect("lock") = Some(e);
                    return false;
                }
            }
            if !sum.is_finite() {
                return false;
            }
        }
        sum / s.n() as f64 <= 1.0
    };
    let b = bisect_monotone(ok, tolerance, DEFAULT_CAP);
    if let Some(e) = failure.into_inner().expect("lock") {
        return Err(e);
    }
    let b = b?;
    Ok(NormEstimate {
        value: b.hi,
        bracket: [b.lo, b.hi],
        probe_plan: format!("bisection on c over {} samples", s.n()),
        probes: s.n(),
        residual: 0.0,
        trust_flags: 0,
        mc_width: 0.0,
        binding: vec![],
        plan_edge: false,
        iterations: b.iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    /// `None` when the B(φ) norm exceeds the cap.
    pub bphi: Option<NormEstimate>,
    pub gls: NormEstimate,
    pub orlicz: NormEstimate,
    /// (label, ratio) for each pair of finite norms.
    pub ratios: Vec<(String, f64)>,
    pub band: [f64; 2],
    pub flags: Vec<String>,
}

impl EquivalenceReport {
    pub fn within_band(&self) -> bool {
        self.flags.is_empty()
    }
}

/// B(φ), Gψ_Φ and L(N_φ) norms of one sample with their pairwise ratios.
/// `analytic` replaces the empirical natural function in the B(φ) norm.
pub fn equivalence_report(
    s: &SampleSet,
    phi: &YoungFunction,
    analytic: Option<&dyn LogMgf>,
    band: [f64; 2],
) -> Result<EquivalenceReport> {
    let mut flags = Vec::new();
    let bphi = match analytic {
        Some(m) => bphi_norm(m, phi, &ProbePlan::standard(phi.dim()), NormOptions::default()),
        None => {
            let nf = natural_function(s)?;
            bphi_norm(&nf, phi, &ProbePlan::empirical(phi.dim()), NormOptions::default())
        }
    };
    let bphi = match bphi {
        Ok(n) => Some(n),
        Err(Error::NormExceedsCap { cap }) => {
            flags.push(format!("B(phi) norm exceeds cap {cap}: not a member of B(phi)"));
            None
        }
        Err(e) => return Err(e),
    };
    let gls = gls_norm_vector(&|r| vector_moment(s, r), phi, &default_r_grid(phi.dim()))?;
    let orlicz = luxemburg_norm(s, &OrliczFunction::new(phi)?, DEFAULT_TOLERANCE)?;
    let mut ratios = vec![("gls/orlicz".to_string(), gls.value / orlicz.value)];
    if let Some(b) = &bphi {
        ratios.insert(0, ("bphi/gls".to_string(), b.value / gls.value));
        ratios.insert(1, ("bphi/orlicz".to_string(), b.value / orlicz.value));
    }
    for (label, r) in &ratios {
        if !(*r >= band[0] && *r <= band[1]) {
            flags.push(format!("{label} ratio {r} outside [{}, {}]", band[0], band[1]));
        }
    }
    Ok(EquivalenceReport {
        bphi,
        gls,
        orlicz,
        ratios,
        band,
        flags,
    })
}
