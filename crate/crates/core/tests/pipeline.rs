use std::sync::Arc;

use bphi::bounds::{chernov_bound, sum_bound, sum_norm_pythagoras, transform_norm, SumSpec};
use bphi::characterize::{check_octant_monotonic, StencilConfig};
use bphi::empirical::{natural_function, sample, sample_normalized_sum, tail_function, VectorDistribution};
use bphi::mgf::{AnalyticMgf, LogMgf, PushForward};
use bphi::norms::{bphi_norm, equivalence_report, NormOptions, ProbePlan};
use bphi::signs::SignVector;
use bphi::young::{MatrixParameter, YoungFunction};
use nalgebra::DMatrix;

fn quadratic(d: usize) -> YoungFunction {
    YoungFunction::quadratic(MatrixParameter::identity(d)).unwrap()
}

#[test]
fn sample_to_certified_tail_bound() {
    let q = MatrixParameter::from_rows(&[vec![1.0, 0.3], vec![0.3, 0.5]]).unwrap();
    let dist = VectorDistribution::gaussian(q.clone()).unwrap();
    let phi = YoungFunction::quadratic(q).unwrap();
    let s = sample(&dist, 200_000, 1).unwrap();
    let nf = natural_function(&s).unwrap();
    let est = bphi_norm(&nf, &phi, &ProbePlan::empirical(2), NormOptions::default()).unwrap();
    // the natural function maxes over sign flips, so the norm is
    // √λ_max(Q⁻¹Q′) with Q′ the flipped covariance (numpy oracle)
    assert!((est.value - 1.572_836_546_414_283_7).abs() < 0.03, "{est:?}");
    let check = sample(&dist, 100_000, 2).unwrap();
    for x in [[0.5, 0.5], [1.0, 0.5], [1.5, 1.0], [2.0, 1.5]] {
        let b = chernov_bound(&phi, est.value, &x).unwrap();
        let e = tail_function(&check, &x).unwrap();
        assert!(b.bound >= e.value - 3.0 * e.half_width, "x={x:?}: {} vs {e:?}", b.bound);
    }
}

#[test]
fn independent_sum_pipeline() {
    let dist = VectorDistribution::rademacher(1.0, 2).unwrap();
    let phi = quadratic(2);
    let tau = bphi_norm(&AnalyticMgf::of(&dist).unwrap(), &phi, &ProbePlan::standard(2), NormOptions::default())
        .unwrap()
        .value;
    assert!((tau - 1.0).abs() <= 1e-4);
    let sigma = sum_norm_pythagoras(&SumSpec::iid(tau, 9).unwrap(), &phi).unwrap().sigma;
    let sums = sample_normalized_sum(&dist, 9, 40_000, 3).unwrap();
    for r in [0.5, 1.0, 1.5] {
        let b = sum_bound(&SumSpec::iid(tau, 9).unwrap(), &phi, &[r, r]).unwrap();
        assert_eq!(b.norm, sigma);
        let e = tail_function(&sums, &[r, r]).unwrap();
        assert!(b.bound >= e.value - 3.0 * e.half_width);
    }
}

#[test]
fn push_forward_norm_respects_product_bound() {
    let dist = VectorDistribution::gaussian(MatrixParameter::identity(2)).unwrap();
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 2.0]);
    let pushed = PushForward::of(&dist, &a).unwrap();
    let phi = quadratic(2);
    let t = transform_norm(&phi, &a, 1.0, &pushed, &ProbePlan::standard(2), NormOptions::default()).unwrap();
    assert!(t.within_product_bound, "{t:?}");
    assert!(t.measured.value > 1.0);
}

#[test]
fn analytic_and_sampled_reports_agree() {
    let dist = VectorDistribution::weibull(3.0, vec![1.0, 2.0]).unwrap();
    let s = sample(&dist, 50_000, 4).unwrap();
    let phi = quadratic(2);
    let analytic = AnalyticMgf::of(&dist).unwrap();
    let a = equivalence_report(&s, &phi, Some(&analytic as &dyn LogMgf), [0.02, 50.0]).unwrap();
    let b = equivalence_report(&s, &phi, None, [0.02, 50.0]).unwrap();
    let (na, nb) = (a.bphi.unwrap().value, b.bphi.unwrap().value);
    assert!((na - nb).abs() < 0.1 * na, "{na} vs {nb}");
    assert_eq!(a.gls, b.gls);
}

#[test]
fn exponential_moment_of_positive_law_is_absolutely_monotonic() {
    // E exp(λξ) for ξ ≥ 0 uniform on [0, 1]: (e^λ − 1)/λ
    let f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> =
        Arc::new(|l: &[f64]| if l[0].abs() < 1e-12 { 1.0 } else { l[0].exp_m1() / l[0] });
    let c = StencilConfig::cube(1, 0.1, 1.0).unwrap();
    let v = check_octant_monotonic(&*f, &SignVector::ones(1), &c).unwrap();
    assert!(v.is_consistent(), "{v:?}");
    let v = check_octant_monotonic(&*f, &SignVector::new(vec![-1]).unwrap(), &c).unwrap();
    assert!(v.is_violated());
}
