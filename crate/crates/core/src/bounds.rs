//! Tail bounds: multidimensional Chernov bounds, linear transforms, sums of
//! independent vectors and Monte Carlo lower bounds.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::conjugate::ConjugateEvaluator;
use crate::empirical::{
    empirical_variance, sample, sample_normalized_sum, tail_function, TailEstimate, VectorDistribution,
};
use crate::error::{check_dim, Error, Result};
use crate::mgf::LogMgf;
use crate::norms::{bphi_norm, NormEstimate, NormOptions, ProbePlan};
use crate::signs;
use crate::young::{check_delta2_seminorm, check_lambda2, Delta2Estimate, Lambda2Report, MatrixParameter, RadialProfile, YoungFunction};

/// Trials and relative tolerance used to certify Λ₂ before a sum rule.
pub const LAMBDA2_TRIALS: usize = 10_000;
pub const LAMBDA2_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailBound {
    pub x: Vec<f64>,
    /// exp(−φ*(x/τ)) from the computed conjugate, clamped to [0, 1].
    pub bound: f64,
    /// The conjugate value used (a lower bound of φ*(x/τ), so the bound errs
    /// upwards).
    pub exponent: f64,
    /// φ*(x/τ) ≤ exponent + slack.
    pub slack: f64,
    pub norm: f64,
    pub family: String,
    pub clamped: bool,
    /// Set when the conjugate diverged; the bound is then reported as the
    /// smallest positive double.
    pub underflow_ray: Option<Vec<f64>>,
    /// The bound rests on a truncated sup over n.
    pub heuristic: bool,
}

impl TailBound {
    /// exp(−(φ* + slack)): the smallest value the true bound can take.
    pub fn lower_envelope(&self) -> f64 {
        if self.underflow_ray.is_some() {
            return 0.0;
        }
        (-(self.exponent + self.slack)).exp().min(self.bound)
    }
}

fn check_threshold(x: &[f64]) -> Result<()> {
    if x.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("threshold must be finite and nonnegative, got {x:?}")));
    }
    Ok(())
}

fn bound_from(evaluator: &ConjugateEvaluator, norm: f64, x: &[f64], factor: f64) -> Result<TailBound> {
    let phi = evaluator.source();
    check_dim(phi.dim(), x.len())?;
    check_threshold(x)?;
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Domain(format!("norm must be positive and finite, got {norm}")));
    }
    let u = signs::scale(x, 1.0 / norm);
    let family = phi.family_tag().to_string();
    match evaluator.evaluate(&u) {
        Ok(c) => {
            let raw = factor * (-c.value).exp();
            Ok(TailBound {
                x: x.to_vec(),
                bound: raw.min(1.0),
                exponent: c.value,
                slack: c.slack,
                norm,
                family,
                clamped: raw > 1.0,
                underflow_ray: None,
                heuristic: false,
            })
        }
        Err(Error::Diverged { ray }) => Ok(TailBound {
            x: x.to_vec(),
            bound: f64::MIN_POSITIVE,
            exponent: f64::INFINITY,
            slack: 0.0,
            norm,
            family,
            clamped: true,
            underflow_ray: Some(ray),
            heuristic: false,
        }),
        Err(e) => Err(e),
    }
}

/// U(ξ, x) ≤ exp(−φ*(x/‖ξ‖)).
pub fn chernov_bound(phi: &YoungFunction, norm: f64, x: &[f64]) -> Result<TailBound> {
    chernov_bound_with(&ConjugateEvaluator::new(phi).with_closed_form(true), norm, x)
}

/// [`chernov_bound`] with a caller-configured evaluator.
pub fn chernov_bound_with(evaluator: &ConjugateEvaluator, norm: f64, x: &[f64]) -> Result<TailBound> {
    bound_from(evaluator, norm, x, 1.0)
}

/// P(min_j |ξ(j)| > y) ≤ min(1, 2^d·exp(−φ*((y/‖ξ‖)·1⃗))).
pub fn min_coordinate_bound(phi: &YoungFunction, norm: f64, y: f64) -> Result<TailBound> {
    if !(y > 0.0) {
        return Err(Error::Domain(format!("min-coordinate threshold must be positive, got {y}")));
    }
    let d = phi.dim();
    let evaluator = ConjugateEvaluator::new(phi).with_closed_form(true);
    bound_from(&evaluator, norm, &vec![y; d], 2f64.powi(d as i32))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformNorm {
    /// B(φ) norm of Aξ from the pushed-forward MGF.
    pub measured: NormEstimate,
    pub seminorm: Option<Delta2Estimate>,
    /// |||A|||²·‖ξ‖ when the seminorm is finite.
    pub product_bound: Option<f64>,
    pub within_product_bound: bool,
    pub warnings: Vec<String>,
}

/// Norm of Aξ measured from `pushed` (λ ↦ natural log-MGF of Aξ) and
/// compared with the seminorm product bound.
pub fn transform_norm(
    phi: &YoungFunction,
    a: &DMatrix<f64>,
    xi_norm: f64,
    pushed: &dyn LogMgf,
    plan: &ProbePlan,
    options: NormOptions,
) -> Result<TransformNorm> {
    check_dim(phi.dim(), a.nrows())?;
    check_dim(phi.dim(), a.ncols())?;
    if !(xi_norm >= 0.0) {
        return Err(Error::Domain(format!("‖ξ‖ must be nonnegative, got {xi_norm}")));
    }
    let mut warnings = Vec::new();
    let singular = a.clone().lu().determinant().abs() < 1e-12;
    if singular && phi.support().is_bounded() {
        warnings.push("singular A with bounded support: φ_A has a degenerate support".to_string());
    }
    let measured = bphi_norm(pushed, phi, plan, options)?;
    let seminorm = match check_delta2_seminorm(phi, a, 64) {
        Ok(s) => Some(s),
        Err(Error::Precondition(msg)) => {
            warnings.push(msg);
            None
        }
        Err(e) => return Err(e),
    };
    let product_bound = seminorm.as_ref().and_then(|s| s.value).map(|m| m * m * xi_norm);
    let within_product_bound = product_bound.map_or(true, |b| measured.value <= b * (1.0 + 2.0 * options.tolerance));
    Ok(TransformNorm {
        measured,
        seminorm,
        product_bound,
        within_product_bound,
        warnings,
    })
}

/// Component norms of a sum normalised by n^{−1/2}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumSpec {
    pub component_norms: Vec<f64>,
}

impl SumSpec {
    pub fn new(component_norms: Vec<f64>) -> Result<Self> {
        if component_norms.is_empty() {
            return Err(Error::Parameter("a sum needs at least one component".into()));
        }
        if component_norms.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain("component norms must be finite and nonnegative".into()));
        }
        Ok(Self { component_norms })
    }

    pub fn iid(norm: f64, n: usize) -> Result<Self> {
        Self::new(vec![norm; n])
    }

    pub fn n(&self) -> usize {
        self.component_norms.len()
    }

    /// σ(n) = n^{−1/2}·(Σ‖ξ_i‖²)^{1/2}.
    pub fn sigma(&self) -> f64 {
        let ss: f64 = self.component_norms.iter().map(|v| v * v).sum();
        (ss / self.n() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PythagorasNorm {
    pub sigma: f64,
    pub certificate: Lambda2Report,
}

/// σ(n), after certifying Λ₂ for φ.
pub fn sum_norm_pythagoras(spec: &SumSpec, phi: &YoungFunction) -> Result<PythagorasNorm> {
    phi.require_full_membership("the Pythagoras sum rule")?;
    let certificate = check_lambda2(phi, LAMBDA2_TRIALS, LAMBDA2_TOLERANCE, 0);
    if !certificate.outcome.holds() {
        return Err(Error::Precondition(format!(
            "φ fails the Λ₂ condition: {:?}",
            certificate.outcome
        )));
    }
    Ok(PythagorasNorm {
        sigma: spec.sigma(),
        certificate,
    })
}

/// U(S(n), x) ≤ exp(−φ*(x/σ(n))).
pub fn sum_bound(spec: &SumSpec, phi: &YoungFunction, x: &[f64]) -> Result<TailBound> {
    let p = sum_norm_pythagoras(spec, phi)?;
    sum_bound_at_sigma(phi, p.sigma, x)
}

/// sup over the given sums of U(S(n), x) ≤ exp(−φ*(x/max σ(n))).
pub fn sum_bound_uniform(specs: &[SumSpec], phi: &YoungFunction, x: &[f64]) -> Result<TailBound> {
    if specs.is_empty() {
        return Err(Error::Parameter("empty n-set".into()));
    }
    let mut sigma = 0.0f64;
    for s in specs {
        sigma = sigma.max(sum_norm_pythagoras(s, phi)?.sigma);
    }
    sum_bound_at_sigma(phi, sigma, x)
}

fn sum_bound_at_sigma(phi: &YoungFunction, sigma: f64, x: &[f64]) -> Result<TailBound> {
    if sigma == 0.0 {
        check_threshold(x)?;
        let zero = x.iter().all(|v| *v == 0.0);
        return Ok(TailBound {
            x: x.to_vec(),
            bound: if zero { 1.0 } else { 0.0 },
            exponent: if zero { 0.0 } else { f64::INFINITY },
            slack: 0.0,
            norm: 0.0,
            family: phi.family_tag().to_string(),
            clamped: false,
            underflow_ray: None,
            heuristic: false,
        });
    }
    chernov_bound(phi, sigma, x)
}

/// φ_n(λ) = n·φ(λ/√n).
pub fn phi_n(phi: &YoungFunction, n: u64, lambda: &[f64]) -> Result<f64> {
    YoungFunction::sum_scaled(phi, n)?.evaluate(lambda)
}

/// {1, 2, 4, …} up to and including `n_max`.
pub fn default_n_set(n_max: u64) -> Vec<u64> {
    let mut ns: Vec<u64> = std::iter::successors(Some(1u64), |n| n.checked_mul(2))
        .take_while(|n| *n <= n_max)
        .collect();
    if ns.last() != Some(&n_max) && n_max > 0 {
        ns.push(n_max);
    }
    ns
}

/// φ̄(λ) = max(max_{1≤n≤n_max} n·φ(λ/√n), 0.5·(φ″(0)λ, λ)).
pub fn phi_bar(phi: &YoungFunction, lambda: &[f64], n_max: u64) -> Result<f64> {
    let ns: Vec<u64> = (1..=n_max).collect();
    YoungFunction::sup_over_n(phi, &ns)?.evaluate(lambda)
}

/// U(S(n), x) ≤ exp(−φ_n*(x)) where φ is the component's own function.
pub fn sum_bound_via_phi_n(phi: &YoungFunction, n: u64, x: &[f64]) -> Result<TailBound> {
    chernov_bound(&YoungFunction::sum_scaled(phi, n)?, 1.0, x)
}

/// sup_n U(S(n), x) ≤ exp(−φ̄*(x)), with the sup over `ns` plus the
/// gaussian limit term. Flagged heuristic: the n-set is finite.
pub fn sum_bound_via_phi_bar(phi: &YoungFunction, ns: &[u64], x: &[f64]) -> Result<TailBound> {
    let mut b = chernov_bound(&YoungFunction::sup_over_n(phi, ns)?, 1.0, x)?;
    b.heuristic = true;
    Ok(b)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBound {
    pub x: Vec<f64>,
    /// Empirical U(ξ, x) of one component.
    pub component: TailEstimate,
    /// Gaussian orthant mass with the component's empirical covariance.
    pub gaussian_limit: TailEstimate,
    /// Empirical U(S(n_probe), x).
    pub sum_probe: TailEstimate,
    pub value: f64,
    pub half_width: f64,
    pub source: String,
}

/// Monte Carlo estimate of a lower bound for sup_n U(S(n), x): the largest
/// of the three estimates, with its half-width. Each uses `reps` draws.
pub fn lower_bound(dist: &VectorDistribution, x: &[f64], n_probe: usize, reps: usize, seed: u64) -> Result<LowerBound> {
    check_dim(dist.dim(), x.len())?;
    check_threshold(x)?;
    let component_sample = sample(dist, reps, seed)?;
    let component = tail_function(&component_sample, x)?;
    let q = MatrixParameter::from_matrix(empirical_variance(&component_sample)?)?;
    let gauss = VectorDistribution::gaussian_degenerate(q)?;
    let gaussian_limit = tail_function(&sample(&gauss, reps, seed.wrapping_add(1))?, x)?;
    let sum_probe = tail_function(&sample_normalized_sum(dist, n_probe, reps, seed.wrapping_add(2))?, x)?;
    let candidates = [
        ("component", component),
        ("gaussian limit", gaussian_limit),
        ("sum probe", sum_probe),
    ];
    let (source, best) = candidates
        .iter()
        .copied()
        .fold(("component", component), |acc, c| if c.1.value > acc.1.value { c } else { acc });
    Ok(LowerBound {
        x: x.to_vec(),
        component,
        gaussian_limit,
        sum_probe,
        value: best.value,
        half_width: best.half_width,
        source: source.to_string(),
    })
}

/// Young function whose conjugate is quadratic on the unit ball and grows
/// like |u|^min(p,2) beyond it: the generating function matched to tails
/// exp(−|x|^p), |x| ≥ 1.
///
/// For p ≥ 2 this is 0.5|λ|². For 1 < p < 2, with q = p/(p−1),
/// φ(λ) = 0.5|λ|² on |λ| ≤ 1 and |λ|^q/q + 1/2 − 1/q beyond, whose
/// conjugate is 0.5|u|² on |u| ≤ 1 and |u|^p/p + 1/2 − 1/p beyond.
pub fn tail_fitted_family(p: f64, d: usize) -> Result<YoungFunction> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Parameter(format!("tail-fitted family needs p > 1, got {p}")));
    }
    if p >= 2.0 {
        return YoungFunction::quadratic(MatrixParameter::identity(d));
    }
    let q = p / (p - 1.0);
    let nu = move |z: f64| {
        if z <= 1.0 {
            0.5 * z
        } else {
            z.powf(0.5 * q) / q + 0.5 - 1.0 / q
        }
    };
    YoungFunction::radial(
        RadialProfile::Custom {
            name: format!("tail-fitted(p={p})"),
            nu: Arc::new(nu),
        },
        MatrixParameter::identity(d),
    )
}

/// Closed form of the tail-fitted conjugate at radius |u|.
pub fn tail_fitted_conjugate(p: f64, u: f64) -> f64 {
    let u = u.abs();
    if p >= 2.0 || u <= 1.0 {
        0.5 * u * u
    } else {
        u.powf(p) / p + 0.5 - 1.0 / p
    }
}

/// Least-squares slope of ln(−ln b) against ln |x|: the decay exponent of a
/// tail bound b(x) ≈ exp(−C|x|^s).
pub fn log_log_slope(radii: &[f64], bounds: &[f64]) -> Result<f64> {
    if radii.len() != bounds.len() || radii.len() < 2 {
        return Err(Error::Parameter("slope fit needs at least two matched points".into()));
    }
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(bounds)
        .map(|(r, b)| (r.ln(), (-b.ln()).ln()))
        .collect();
    if pts.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(Error::Domain("slope fit needs radii > 0 and bounds in (0, 1)".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::{log_cosh, natural_function, weibull_log_cosh_moment};
    use crate::mgf::{AnalyticMgf, PushForward};
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn normal_tail(x: f64) -> f64 {
        Normal::new(0.0, 1.0).unwrap().sf(x)
    }

    fn identity(d: usize) -> YoungFunction {
        YoungFunction::quadratic(MatrixParameter::identity(d)).unwrap()
    }

    #[test]
    fn chernov_gaussian() {
        let b = chernov_bound(&identity(1), 1.0, &[2.0]).unwrap();
        assert!((b.bound - (-2f64).exp()).abs() < 1e-15);
        assert!(normal_tail(2.0) <= b.bound);
        assert_eq!(chernov_bound(&identity(1), 1.0, &[0.0]).unwrap().bound, 1.0);
        let bm = MatrixParameter::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let x = [1.0, 2.0];
        let b = chernov_bound(&YoungFunction::quadratic(bm.clone()).unwrap(), 1.0, &x).unwrap();
        assert!((b.bound - (-0.5 * bm.inverse_quad_form(&x).unwrap()).exp()).abs() < 1e-14);
        assert!(chernov_bound(&identity(1), 0.0, &[1.0]).is_err());
        assert!(chernov_bound(&identity(1), 1.0, &[-1.0]).is_err());
    }

    #[test]
    fn chernov_numeric_route_has_slack() {
        let phi = YoungFunction::custom("half-square", 1, |l| 0.5 * l[0] * l[0], None).unwrap();
        let b = chernov_bound(&phi, 1.0, &[2.0]).unwrap();
        assert!(b.bound >= (-2f64).exp() * (1.0 - 1e-9));
        assert!(b.lower_envelope() <= (-2f64).exp());
    }

    #[test]
    fn chernov_underflow_reports_ray() {
        // |λ|-like growth: the conjugate is infinite beyond slope 1
        let phi = YoungFunction::custom("soft-abs", 1, |l| (1.0 + l[0] * l[0]).sqrt() - 1.0, None).unwrap();
        let b = chernov_bound(&phi, 1.0, &[2.0]).unwrap();
        assert!(b.underflow_ray.is_some());
        assert!(b.bound > 0.0 && b.bound <= f64::MIN_POSITIVE);
    }

    #[test]
    fn min_coordinate_examples() {
        let phi = identity(2);
        let b1 = min_coordinate_bound(&phi, 1.0, 1.0).unwrap();
        assert_eq!(b1.bound, 1.0);
        assert!(b1.clamped);
        let b3 = min_coordinate_bound(&phi, 1.0, 3.0).unwrap();
        assert!((b3.bound - 4.0 * (-9f64).exp()).abs() < 1e-15);
        assert!((2.0 * normal_tail(3.0)).powi(2) <= b3.bound);
        assert_eq!(min_coordinate_bound(&phi, 1.0, 1e-9).unwrap().bound, 1.0);
        assert!(min_coordinate_bound(&phi, 1.0, 0.0).is_err());
    }

    #[test]
    fn transform_identity_and_rotation() {
        let phi = identity(2);
        let plan = ProbePlan::standard(2);
        let opts = NormOptions::default();
        let g = VectorDistribution::gaussian(MatrixParameter::identity(2)).unwrap();
        let eye = DMatrix::identity(2, 2);
        let t = transform_norm(&phi, &eye, 1.0, &PushForward::of(&g, &eye).unwrap(), &plan, opts).unwrap();
        assert!((t.measured.value - 1.0).abs() <= 1e-4);
        assert!(t.within_product_bound);
        let th = 0.7f64;
        let rot = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let t = transform_norm(&phi, &rot, 1.0, &PushForward::of(&g, &rot).unwrap(), &plan, opts).unwrap();
        assert!((t.measured.value - 1.0).abs() <= 1e-4, "{}", t.measured.value);
        assert!(t.within_product_bound);
    }

    #[test]
    fn transform_scaling_uses_squared_seminorm() {
        let phi = identity(1);
        let g = VectorDistribution::gaussian(MatrixParameter::identity(1)).unwrap();
        let a = DMatrix::from_element(1, 1, 2.0);
        let t = transform_norm(&phi, &a, 1.0, &PushForward::of(&g, &a).unwrap(), &ProbePlan::standard(1), NormOptions::default()).unwrap();
        assert!((t.measured.value - 2.0).abs() <= 2e-4);
        let m = t.seminorm.unwrap().value.unwrap();
        assert!((m - 2f64.sqrt()).abs() < 1e-8);
        assert!((t.product_bound.unwrap() - 2.0).abs() < 1e-7);
        assert!(t.within_product_bound);
    }

    /// With plain MGFs, ‖Aξ‖ under quadratic(R) equals ‖ξ‖ under
    /// quadratic(A⁻¹RA⁻ᵀ); quadratic(ARAᵀ) matches only when A is orthogonal.
    #[test]
    fn sub_gaussian_transform_rule() {
        let q = MatrixParameter::from_rows(&[vec![1.5, 0.3], vec![0.3, 0.8]]).unwrap();
        let r = MatrixParameter::from_rows(&[vec![1.0, 0.2], vec![0.2, 2.0]]).unwrap();
        let g = VectorDistribution::gaussian(q).unwrap();
        let plan = ProbePlan::standard(2);
        let opts = NormOptions::default();
        for rows in [[1.0, 0.5, -0.3, 2.0], [0.4, 0.0, 1.0, 1.2], [2.0, 1.0, 1.0, 1.5]] {
            let a = DMatrix::from_row_slice(2, 2, &rows);
            let phi_r = YoungFunction::quadratic(r.clone()).unwrap();
            let lhs = bphi_norm(&PushForward::of(&g, &a).unwrap().plain(), &phi_r, &plan, opts).unwrap().value;
            let ai = a.clone().try_inverse().unwrap();
            let pulled = MatrixParameter::from_matrix(&ai * r.matrix() * ai.transpose()).unwrap();
            let phi_p = YoungFunction::quadratic(pulled).unwrap();
            let xi = PushForward::of(&g, &DMatrix::identity(2, 2)).unwrap().plain();
            let rhs = bphi_norm(&xi, &phi_p, &plan, opts).unwrap().value;
            assert!((lhs - rhs).abs() <= 2e-4 * rhs, "A={rows:?}: {lhs} vs {rhs}");
            // generalised eigenvalue oracle: sup μᵀQμ / μᵀA⁻¹RA⁻ᵀμ
            let l = pulled_eig(g.covariance().unwrap(), &ai * r.matrix() * ai.transpose());
            assert!((rhs - l.sqrt()).abs() <= 2e-4 * rhs, "{rhs} vs {}", l.sqrt());
        }
    }

    fn pulled_eig(q: DMatrix<f64>, m: DMatrix<f64>) -> f64 {
        let c = m.cholesky().unwrap().l();
        let ci = c.try_inverse().unwrap();
        let s = &ci * q * ci.transpose();
        s.symmetric_eigenvalues().max()
    }

    #[test]
    fn printed_orientation_fails_off_orthogonal() {
        let g = VectorDistribution::gaussian(MatrixParameter::identity(1)).unwrap();
        let a = DMatrix::from_element(1, 1, 2.0);
        let plan = ProbePlan::standard(1);
        let opts = NormOptions::default();
        let lhs = bphi_norm(&PushForward::of(&g, &a).unwrap().plain(), &identity(1), &plan, opts).unwrap().value;
        let ara = YoungFunction::quadratic(MatrixParameter::diagonal(&[4.0]).unwrap()).unwrap();
        let rhs = bphi_norm(&AnalyticMgf::of(&g).unwrap(), &ara, &plan, opts).unwrap().value;
        assert!((lhs - 2.0).abs() < 1e-3 && (rhs - 0.5).abs() < 1e-3);
    }

    #[test]
    fn pythagoras_examples() {
        let phi = identity(1);
        let s = sum_norm_pythagoras(&SumSpec::new(vec![3.0, 4.0]).unwrap(), &phi).unwrap();
        assert!((s.sigma - 5.0 / 2f64.sqrt()).abs() < 1e-15);
        for n in [1, 7, 100] {
            assert!((SumSpec::iid(1.0, n).unwrap().sigma() - 1.0).abs() < 1e-15);
        }
        let abs = YoungFunction::custom("abs-ish", 1, |l| (1.0 + l[0] * l[0]).sqrt() - 1.0, None).unwrap();
        assert!(matches!(sum_norm_pythagoras(&SumSpec::iid(1.0, 2).unwrap(), &abs), Err(Error::Precondition(_))));
        let relaxed = YoungFunction::power(1.5, 1.0, 1).unwrap();
        assert!(sum_norm_pythagoras(&SumSpec::iid(1.0, 2).unwrap(), &relaxed).is_err());
    }

    #[test]
    fn gaussian_sums_keep_unit_norm() {
        let phi = identity(1);
        let base: Arc<dyn LogMgf> = Arc::new(AnalyticMgf::new("g", 1, |l| 0.5 * l[0] * l[0]));
        for n in [2u64, 8, 32] {
            let s = crate::mgf::NormalizedSum::new(base.clone(), n).unwrap();
            let v = bphi_norm(&s, &phi, &ProbePlan::standard(1), NormOptions::default()).unwrap().value;
            assert!((v - 1.0).abs() <= 1e-4);
        }
    }

    #[test]
    fn sum_bound_examples() {
        let phi = identity(1);
        let spec = SumSpec::iid(1.0, 16).unwrap();
        let b = sum_bound(&spec, &phi, &[2.0]).unwrap();
        assert!((b.bound - (-2f64).exp()).abs() < 1e-15);
        assert!(normal_tail(2.0) <= b.bound);
        assert_eq!(sum_bound(&spec, &phi, &[0.0]).unwrap().bound, 1.0);
        let u = sum_bound_uniform(&[SumSpec::iid(1.0, 1).unwrap(), SumSpec::new(vec![1.0, 2.0]).unwrap()], &phi, &[2.0]).unwrap();
        assert!((u.norm - (2.5f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn phi_n_examples() {
        let q = identity(2);
        for n in [1u64, 3, 50] {
            assert!((phi_n(&q, n, &[0.7, -1.2]).unwrap() - q.value(&[0.7, -1.2])).abs() < 1e-12);
        }
        assert!((phi_bar(&q, &[0.7, -1.2], 64).unwrap() - q.value(&[0.7, -1.2])).abs() < 1e-12);
        let quartic = YoungFunction::power(4.0, 1.0, 1).unwrap();
        let vals: Vec<f64> = (1..=16).map(|n| phi_n(&quartic, n, &[1.5]).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0]));
        assert!((vals[3] - 1.5f64.powi(4) / 4.0).abs() < 1e-12);
        assert!((phi_bar(&quartic, &[1.5], 32).unwrap() - 1.5f64.powi(4)).abs() < 1e-12);
        let bounded = YoungFunction::bounded_support(1.0, 1.0).unwrap();
        assert!(matches!(phi_n(&bounded, 4, &[3.0]), Err(Error::Domain(_))));
        assert!(phi_n(&YoungFunction::power(1.5, 1.0, 1).unwrap(), 2, &[1.0]).is_err());
    }

    #[test]
    fn phi_n_nonincreasing_for_superquadratic_radial() {
        let phi = YoungFunction::radial(RadialProfile::Power { k: 1.5, c: 1.0 }, MatrixParameter::identity(2)).unwrap();
        let l = [0.8, 1.1];
        let vals: Vec<f64> = (1..=32).map(|n| phi_n(&phi, n, &l).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn rademacher_sum_mgf_domination() {
        let r = VectorDistribution::rademacher(1.0, 1).unwrap();
        let s = sample_normalized_sum(&r, 16, 20_000, 4).unwrap();
        let nf = natural_function(&s).unwrap();
        let phi = YoungFunction::custom("logcosh", 1, |l| log_cosh(l[0]), None).unwrap();
        for k in 1..=10 {
            let l = 0.2 * f64::from(k);
            let m = nf.evaluate(&[l]).unwrap();
            assert!(m.value <= phi_n(&phi, 16, &[l]).unwrap() + 3.0 * m.width, "λ={l}");
        }
    }

    #[test]
    fn phi_n_bounds_match_and_dominate() {
        let q = identity(1);
        let a = sum_bound_via_phi_n(&q, 9, &[1.7]).unwrap();
        let b = sum_bound(&SumSpec::iid(1.0, 9).unwrap(), &q, &[1.7]).unwrap();
        assert!((a.bound - b.bound).abs() < 1e-14);
        assert_eq!(sum_bound_via_phi_n(&q, 9, &[0.0]).unwrap().bound, 1.0);
        let phi = YoungFunction::custom("logcosh", 1, |l| log_cosh(l[0]), None).unwrap();
        let r = VectorDistribution::rademacher(1.0, 1).unwrap();
        let s = sample_normalized_sum(&r, 16, 100_000, 5).unwrap();
        let emp = tail_function(&s, &[2.0]).unwrap();
        let bound = sum_bound_via_phi_n(&phi, 16, &[2.0]).unwrap();
        assert!(bound.bound >= emp.value - 3.0 * emp.half_width, "{} vs {emp:?}", bound.bound);
        let bar = sum_bound_via_phi_bar(&phi, &default_n_set(64), &[2.0]).unwrap();
        assert!(bar.heuristic);
        assert!(bar.bound >= bound.bound * (1.0 - 1e-6));
    }

    #[test]
    fn n_set() {
        assert_eq!(default_n_set(16), vec![1, 2, 4, 8, 16]);
        assert_eq!(default_n_set(20), vec![1, 2, 4, 8, 16, 20]);
    }

    #[test]
    fn lower_bound_examples() {
        let g = VectorDistribution::gaussian(MatrixParameter::identity(1)).unwrap();
        let lb = lower_bound(&g, &[1.0], 8, 40_000, 2).unwrap();
        for e in [lb.component, lb.gaussian_limit, lb.sum_probe] {
            assert!((e.value - normal_tail(1.0)).abs() <= 2.0 * e.half_width, "{e:?}");
        }
        let g2 = VectorDistribution::gaussian(MatrixParameter::identity(2)).unwrap();
        let z = lower_bound(&g2, &[0.0, 0.0], 4, 20_000, 3).unwrap();
        assert!(z.value >= 0.25 - z.half_width);
    }

    #[test]
    fn tail_fitted_family_shape() {
        let phi = tail_fitted_family(1.5, 1).unwrap();
        assert!((phi.value(&[0.5]) - 0.125).abs() < 1e-15);
        assert!((phi.value(&[2.0]) - (8.0 / 3.0 + 0.5 - 1.0 / 3.0)).abs() < 1e-12);
        for u in [0.5, 1.0, 2.0, 4.0] {
            let c = crate::conjugate::conjugate(&phi, &[u]).unwrap();
            assert!((c.value - tail_fitted_conjugate(1.5, u)).abs() <= 1e-7 * c.value.max(1.0), "u={u}: {}", c.value);
        }
        assert!(check_lambda2(&phi, 5000, LAMBDA2_TOLERANCE, 1).outcome.holds());
        assert!(tail_fitted_family(1.0, 1).is_err());
        assert_eq!(tail_fitted_family(4.0, 2).unwrap().family_tag(), "quadratic");
    }

    #[test]
    fn slope_fit() {
        let xs: Vec<f64> = (0..9).map(|k| 2.0 + 0.5 * f64::from(k)).collect();
        let bs: Vec<f64> = xs.iter().map(|x| (-0.3 * x.powf(1.5)).exp()).collect();
        assert!((log_log_slope(&xs, &bs).unwrap() - 1.5).abs() < 1e-12);
        assert!(log_log_slope(&[1.0], &[0.5]).is_err());
    }

    #[test]
    fn weibull_sum_bound_dominates() {
        let w = VectorDistribution::weibull(4.0, vec![1.0]).unwrap();
        let phi = identity(1);
        let m = AnalyticMgf::new("w4", 1, |l| weibull_log_cosh_moment(l[0], 4.0));
        let tau = bphi_norm(&m, &phi, &ProbePlan::standard(1), NormOptions::default()).unwrap().value;
        let s = sample_normalized_sum(&w, 16, 10_000, 6).unwrap();
        for x in [1.0, 1.5, 2.0] {
            let b = sum_bound(&SumSpec::iid(tau, 16).unwrap(), &phi, &[x]).unwrap();
            let e = tail_function(&s, &[x]).unwrap();
            assert!(b.bound >= e.value - 3.0 * e.half_width);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn chernov_in_unit_interval_and_monotone(x in 0.0f64..5.0, dx in 0.0f64..2.0, tau in 0.2f64..4.0) {
            let phi = identity(1);
            let a = chernov_bound(&phi, tau, &[x]).unwrap();
            let b = chernov_bound(&phi, tau, &[x + dx]).unwrap();
            prop_assert!(a.bound > 0.0 && a.bound <= 1.0);
            prop_assert!(b.bound <= a.bound);
        }

        #[test]
        fn transform_within_product_bound(a11 in -2.0f64..2.0, a12 in -2.0f64..2.0, a21 in -2.0f64..2.0, a22 in -2.0f64..2.0) {
            let a = DMatrix::from_row_slice(2, 2, &[a11, a12, a21, a22]);
            let g = VectorDistribution::gaussian(MatrixParameter::identity(2)).unwrap();
            let t = transform_norm(&identity(2), &a, 1.0, &PushForward::of(&g, &a).unwrap(), &ProbePlan::standard(2), NormOptions::default()).unwrap();
            prop_assert!(t.within_product_bound, "{:?}", t);
        }
    }
}
