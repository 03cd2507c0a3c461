//! Numerical Young-Fenchel conjugation φ*(y) = sup_x ((x, y) − φ(x)), ray
//! inversion and the log-reparameterised conjugate Φ*(r) = sup_μ (rμ − φ(e^μ)).

use std::sync::Arc;

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::maximize::{self, golden_section_max, Bounds, Settings};
use crate::signs;
use crate::young::YoungFunction;

const MAX_RADIUS: f64 = 1e8;
const OVERFLOW: f64 = 1e300;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugateValue {
    /// Best value found; a lower bound of the supremum.
    pub value: f64,
    /// Upper allowance: the supremum over the search box is at most
    /// `value + slack` for concave objectives.
    pub slack: f64,
    pub argmax: Vec<f64>,
    /// Per-axis half-widths of the final search box (empty for closed forms).
    pub search_box: Vec<f64>,
    pub closed_form: bool,
}

impl ConjugateValue {
    pub fn upper(&self) -> f64 {
        self.value + self.slack
    }
}

#[derive(Debug, Clone)]
pub struct ConjugateEvaluator {
    phi: Arc<YoungFunction>,
    settings: Settings,
    closed_form: bool,
}

impl ConjugateEvaluator {
    /// Purely numerical evaluator with default maximiser settings.
    pub fn new(phi: &YoungFunction) -> Self {
        Self {
            phi: Arc::new(phi.clone()),
            settings: Settings::default(),
            closed_form: false,
        }
    }

    pub fn with_settings(mut self, settings: Settings) -> Self {
        self.settings = settings;
        self
    }

    /// Use the closed-form conjugate where the family has one.
    pub fn with_closed_form(mut self, enabled: bool) -> Self {
        self.closed_form = enabled;
        self
    }

    pub fn source(&self) -> &YoungFunction {
        &self.phi
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn evaluate(&self, y: &[f64]) -> Result<ConjugateValue> {
        let phi = &*self.phi;
        let d = phi.dim();
        check_dim(d, y.len())?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("conjugate argument not finite: {y:?}")));
        }
        if y.iter().all(|v| *v == 0.0) {
            return Ok(ConjugateValue {
                value: 0.0,
                slack: 0.0,
                argmax: vec![0.0; d],
                search_box: vec![],
                closed_form: false,
            });
        }
        if self.closed_form {
            if let Some(v) = phi.closed_form_conjugate(y) {
                return Ok(ConjugateValue {
                    value: v,
                    slack: 0.0,
                    argmax: vec![],
                    search_box: vec![],
                    closed_form: true,
                });
            }
        }

        let objective = |x: &[f64]| {
            let v = phi.value(x);
            if v.is_finite() {
                signs::dot(x, y) - v
            } else {
                f64::NEG_INFINITY
            }
        };
        let gradient_fn = |x: &[f64]| -> Vec<f64> {
            match phi.gradient(x) {
                Some(g) => y.iter().zip(g).map(|(a, b)| a - b).collect(),
                None => vec![f64::NAN; x.len()],
            }
        };
        let has_gradient = phi.gradient(&vec![0.0; d]).is_some();
        let grad_ref: Option<&dyn Fn(&[f64]) -> Vec<f64>> = if has_gradient { Some(&gradient_fn) } else { None };

        let natural = phi.support().bounding_half_widths();
        let half = if natural.iter().all(|h| h.is_finite()) {
            // Stay strictly inside the open support.
            natural.iter().map(|h| h * (1.0 - 1e-12)).collect::<Vec<_>>()
        } else {
            self.expand_box(&objective, d)?
        };
        let bounds = Bounds::symmetric(&half);
        let m = maximize::maximize(&objective, grad_ref, &bounds, &vec![0.0; d], &self.settings);
        if m.value > OVERFLOW {
            return Err(Error::Diverged { ray: unit(&m.x) });
        }
        let value = m.value.max(0.0);
        let slack = if m.gradient_norm.is_finite() {
            m.gradient_norm * bounds.diameter()
        } else {
            // No polish: allow one grid cell's worth of linear growth.
            signs::norm2(y) * bounds.diameter() / (self.settings.grid_points.max(2) - 1) as f64
        };
        Ok(ConjugateValue {
            value,
            slack,
            argmax: m.x,
            search_box: half,
            closed_form: false,
        })
    }

    /// Doubles a cubic box until the coarse argmax leaves the boundary or the
    /// value stops growing.
    fn expand_box(&self, objective: &dyn Fn(&[f64]) -> f64, d: usize) -> Result<Vec<f64>> {
        let coarse = Settings {
            max_grid_dim: self.settings.max_grid_dim,
            ..Settings::coarse()
        };
        let mut r = 1.0;
        let mut previous = f64::NEG_INFINITY;
        loop {
            let bounds = Bounds::cube(d, -r, r);
            let m = maximize::maximize(objective, None, &bounds, &vec![0.0; d], &coarse);
            if m.value > OVERFLOW {
                return Err(Error::Diverged { ray: unit(&m.x) });
            }
            let on_face = bounds.near_face(&m.x, 1.0 / 16.0);
            if !on_face {
                return Ok(vec![r; d]);
            }
            if m.value - previous <= 1e-12 * m.value.abs().max(1.0) {
                return Ok(vec![r; d]);
            }
            previous = m.value;
            r *= 2.0;
            if r > MAX_RADIUS {
                return Err(Error::Diverged { ray: unit(&m.x) });
            }
        }
    }
}

fn unit(x: &[f64]) -> Vec<f64> {
    let n = signs::norm2(x);
    if n > 0.0 {
        signs::scale(x, 1.0 / n)
    } else {
        x.to_vec()
    }
}

/// φ*(y) with default numerical settings.
pub fn conjugate(phi: &YoungFunction, y: &[f64]) -> Result<ConjugateValue> {
    ConjugateEvaluator::new(phi).evaluate(y)
}

/// Max over `probes` of |φ**(λ) − φ(λ)|, with both conjugations numerical.
/// The outer supremum uses the envelope identity ∇φ*(y) = argmax.
pub fn biconjugate_residual(phi: &YoungFunction, probes: &[Vec<f64>]) -> Result<f64> {
    let d = phi.dim();
    let inner = ConjugateEvaluator::new(phi);
    let outer_settings = Settings {
        grid_points: 9,
        refine_points: 9,
        zoom_passes: 3,
        ..Settings::default()
    };
    let mut worst: f64 = 0.0;
    for lambda in probes {
        check_dim(d, lambda.len())?;
        let target = phi.value(lambda);
        if !target.is_finite() {
            return Err(Error::Domain(format!("probe {lambda:?} outside the support")));
        }
        let eval = |y: &[f64]| -> (f64, Vec<f64>) {
            match inner.evaluate(y) {
                Ok(c) => (signs::dot(lambda, y) - c.value, c.argmax),
                Err(_) => (f64::NEG_INFINITY, vec![f64::NAN; d]),
            }
        };
        let objective = |y: &[f64]| eval(y).0;
        let gradient = |y: &[f64]| -> Vec<f64> {
            let (_, x) = eval(y);
            if x.len() != d {
                return vec![f64::NAN; d];
            }
            lambda.iter().zip(x).map(|(l, a)| l - a).collect()
        };
        // Box for y: enough to contain the supporting slope at λ.
        let mut r = 1.0;
        loop {
            let b = Bounds::cube(d, -r, r);
            let m = maximize::maximize(&objective, None, &b, &vec![0.0; d], &Settings::coarse());
            if !b.near_face(&m.x, 1.0 / 16.0) || r > 1e6 {
                break;
            }
            r *= 2.0;
        }
        let b = Bounds::cube(d, -r, r);
        let m = maximize::maximize(&objective, Some(&gradient), &b, &vec![0.0; d], &outer_settings);
        worst = worst.max((m.value - target).abs());
    }
    Ok(worst)
}

/// Positive t with φ(t·u) = `level`, by bracketed bisection to machine
/// precision. The bracket grows from 1e−8 by ×4.
pub fn ray_inverse(phi: &YoungFunction, direction: &[f64], level: f64) -> Result<f64> {
    check_dim(phi.dim(), direction.len())?;
    if !(level > 0.0) || !level.is_finite() {
        return Err(Error::Range(format!("level must be positive and finite, got {level}")));
    }
    if signs::norm2(direction) == 0.0 {
        return Err(Error::Parameter("zero direction".into()));
    }
    let at = |t: f64| phi.value(&signs::scale(direction, t));
    let mut lo = 0.0;
    let mut hi = 1e-8;
    while at(hi) < level {
        lo = hi;
        hi *= 4.0;
        if hi > 1e300 {
            return Err(Error::Range(format!("level {level} not reached along the ray")));
        }
    }
    // φ may be +∞ beyond the support: the predicate "φ(t·u) ≥ level" stays monotone.
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if at(mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (at(lo), at(hi));
    let t = if fhi.is_finite() && (fhi - level).abs() <= (level - flo).abs() { hi } else { lo };
    if !at(t).is_finite() {
        return Err(Error::Range(format!("level {level} not reached inside the support")));
    }
    Ok(t)
}

/// Upper end of the μ search interval for Φ*: the log of the largest radius
/// along direction `u` at which φ stays below the overflow guard.
fn mu_max(phi: &YoungFunction, u: &[f64]) -> f64 {
    let exit = phi.support().ray_exit(u);
    if exit.is_finite() {
        return exit.ln();
    }
    match ray_inverse(phi, u, OVERFLOW) {
        Ok(t) => t.ln(),
        Err(_) => 700.0,
    }
}

/// Φ*(r) = sup_μ (r·μ − φ(e^μ)) for one-dimensional φ, by a grid on
/// μ ∈ [−40, μ_max], local golden-section refinement and a final check.
pub fn log_reparam_conjugate(phi: &YoungFunction, r: f64) -> Result<f64> {
    if phi.dim() != 1 {
        return Err(Error::Shape {
            expected: 1,
            found: phi.dim(),
        });
    }
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::Range(format!("log-reparameterised conjugate needs r ≥ 1, got {r}")));
    }
    let hi = mu_max(phi, &[1.0]);
    let lo = -40.0;
    let objective = |mu: f64| {
        let v = phi.value(&[mu.exp()]);
        if v.is_finite() {
            r * mu - v
        } else {
            f64::NEG_INFINITY
        }
    };
    let n = 4097;
    let step = (hi - lo) / (n - 1) as f64;
    let (mut best_i, mut best_v) = (0usize, f64::NEG_INFINITY);
    for i in 0..n {
        let v = objective(lo + step * i as f64);
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    if best_i == n - 1 && phi.support().ray_exit(&[1.0]).is_infinite() {
        return Err(Error::Diverged { ray: vec![1.0] });
    }
    let a = lo + step * best_i.saturating_sub(1) as f64;
    let b = (lo + step * (best_i + 1) as f64).min(hi);
    let (_, v) = golden_section_max(objective, a, b, 1e-14);
    Ok(v.max(best_v))
}

/// Φ*(r⃗) = sup_μ⃗ ((r⃗, μ⃗) − φ(e^μ⃗)) with e^μ⃗ coordinatewise.
pub fn log_reparam_conjugate_vector(phi: &YoungFunction, r: &[f64]) -> Result<f64> {
    let d = phi.dim();
    check_dim(d, r.len())?;
    if r.iter().any(|v| !(*v >= 1.0) || !v.is_finite()) {
        return Err(Error::Range(format!("every r(j) must be ≥ 1, got {r:?}")));
    }
    if d == 1 {
        return log_reparam_conjugate(phi, r[0]);
    }
    let hi: Vec<f64> = (0..d)
        .map(|j| {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            mu_max(phi, &e)
        })
        .collect();
    let bounds = Bounds {
        lo: vec![-40.0; d],
        hi: hi.clone(),
    };
    let objective = |mu: &[f64]| {
        let x: Vec<f64> = mu.iter().map(|m| m.exp()).collect();
        let v = phi.value(&x);
        if v.is_finite() {
            signs::dot(r, mu) - v
        } else {
            f64::NEG_INFINITY
        }
    };
    let settings = Settings {
        zoom_passes: 6,
        ..Settings::default()
    };
    let start: Vec<f64> = vec![0.0; d];
    let m = maximize::maximize(&objective, None, &bounds, &start, &settings);
    let unbounded = phi.support().ray_exit(&vec![1.0; d]).is_infinite();
    if unbounded && m.x.iter().zip(&hi).any(|(x, h)| (h - x) < 1e-9 * h.abs().max(1.0)) {
        return Err(Error::Diverged { ray: unit(&vec![1.0; d]) });
    }
    Ok(m.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::young::{MatrixParameter, RadialProfile};
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn quadratic_matches_inverse_form() {
        let b = MatrixParameter::from_rows(&[vec![2.0, 0.3], vec![0.3, 0.5]]).unwrap();
        let phi = YoungFunction::quadratic(b.clone()).unwrap();
        let ev = ConjugateEvaluator::new(&phi);
        for y in [[1.0, 2.0], [-3.0, 0.5], [0.01, -0.02], [10.0, 10.0]] {
            let c = ev.evaluate(&y).unwrap();
            let oracle = 0.5 * b.inverse_quad_form(&y).unwrap();
            assert!(rel(c.value, oracle) < 1e-6, "{y:?}: {} vs {oracle}", c.value);
            assert!(c.slack < 1e-6);
            assert!(!c.closed_form);
        }
    }

    #[test]
    fn zero_argument_gives_zero() {
        let phi = YoungFunction::bounded_support(1.0, 1.0).unwrap();
        assert_eq!(conjugate(&phi, &[0.0]).unwrap().value, 0.0);
        let phi = YoungFunction::power(3.0, 1.0, 3).unwrap();
        assert_eq!(conjugate(&phi, &[0.0; 3]).unwrap().value, 0.0);
    }

    #[test]
    fn quartic_example() {
        let phi = YoungFunction::power(4.0, 0.25, 1).unwrap();
        let c = conjugate(&phi, &[8.0]).unwrap();
        assert!((c.value - 12.0).abs() < 1e-9, "{}", c.value);
        assert!((c.argmax[0] - 2.0).abs() < 1e-8);
        // dense grid oracle
        let grid_max = (0..=400_000)
            .map(|i| {
                let x = i as f64 * 1e-5;
                8.0 * x - x.powi(4) / 4.0
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((grid_max - 12.0).abs() < 1e-8);
        assert_eq!(phi.closed_form_conjugate(&[8.0]), Some(12.0));
    }

    #[test]
    fn closed_form_matches_numerical() {
        let fams = vec![
            YoungFunction::quadratic(MatrixParameter::diagonal(&[1.0, 3.0]).unwrap()).unwrap(),
            YoungFunction::power(4.0, 1.0, 2).unwrap(),
            YoungFunction::power(1.5, 2.0, 2).unwrap(),
        ];
        for phi in fams {
            let num = ConjugateEvaluator::new(&phi);
            let cf = ConjugateEvaluator::new(&phi).with_closed_form(true);
            for y in [[0.5, 0.25], [2.0, -1.0], [-4.0, 3.0]] {
                let a = num.evaluate(&y).unwrap().value;
                let b = cf.evaluate(&y).unwrap();
                assert!(b.closed_form);
                assert!(rel(a, b.value) < 1e-7, "{:?} {y:?}: {a} vs {}", phi.family(), b.value);
            }
        }
    }

    #[test]
    fn bounded_support_conjugate_is_finite_and_linear_growth() {
        let phi = YoungFunction::bounded_support(1.0, 1.0).unwrap();
        let a = conjugate(&phi, &[5.0]).unwrap();
        let b = conjugate(&phi, &[50.0]).unwrap();
        assert!(a.argmax[0] < 1.0 && b.argmax[0] < 1.0);
        // φ* grows at most like K·|y|
        assert!(b.value <= 50.0 && b.value > a.value);
        // stationarity: φ'(x) = y with φ'(x) = x(2 − x)/(1 − x)²
        let x = b.argmax[0];
        assert!(rel(x * (2.0 - x) / ((1.0 - x) * (1.0 - x)), 50.0) < 1e-6);
    }

    #[test]
    fn asymptotic_supremum_is_not_diverged() {
        // (log cosh)*(1) = sup_x (x − log cosh x) = ln 2, approached as x → ∞
        let phi = YoungFunction::custom("logcosh", 1, |l| l[0].cosh().ln(), None).unwrap();
        let c = conjugate(&phi, &[1.0]).unwrap();
        assert!((c.value - 2f64.ln()).abs() < 1e-9, "{}", c.value);
    }

    #[test]
    fn linear_growth_diverges() {
        let phi = YoungFunction::custom("abs", 1, |l| l[0].abs(), Some(DMatrix::zeros(1, 1))).unwrap();
        match conjugate(&phi, &[2.0]) {
            Err(Error::Diverged { ray }) => assert!((ray[0] - 1.0).abs() < 1e-12),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn radial_and_high_dimensional() {
        let q = MatrixParameter::identity(4);
        let phi = YoungFunction::radial(RadialProfile::Linear { c: 0.5 }, q).unwrap();
        let y = [0.5, -1.0, 0.25, 2.0];
        let c = conjugate(&phi, &y).unwrap();
        let oracle = 0.5 * y.iter().map(|v| v * v).sum::<f64>();
        assert!(rel(c.value, oracle) < 1e-6, "{} vs {oracle}", c.value);
    }

    #[test]
    fn biconjugate_quadratic_and_quartic() {
        let phi = YoungFunction::quadratic(MatrixParameter::identity(2)).unwrap();
        let probes: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![1.0, -2.0], vec![2.5, 1.0]];
        assert!(biconjugate_residual(&phi, &probes).unwrap() <= 1e-4);
        let quartic = YoungFunction::power(4.0, 1.0, 1).unwrap();
        let probes: Vec<Vec<f64>> = vec![vec![0.0], vec![-1.5], vec![3.0]];
        assert!(biconjugate_residual(&quartic, &probes).unwrap() <= 1e-4);
    }

    #[test]
    fn ray_inverse_examples() {
        let phi = YoungFunction::quadratic(MatrixParameter::identity(1)).unwrap();
        for p in [0.5, 2.0, 9.0] {
            let t = ray_inverse(&phi, &[1.0], p).unwrap();
            assert!(rel(t, (2.0 * p).sqrt()) < 1e-12);
            assert!(rel(p / t, (p / 2.0).sqrt()) < 1e-12);
        }
        let ts: Vec<f64> = [1e-2, 1e-4, 1e-6].iter().map(|l| ray_inverse(&phi, &[1.0], *l).unwrap()).collect();
        assert!(ts[0] > ts[1] && ts[1] > ts[2]);
        let b = YoungFunction::bounded_support(1.0, 1.0).unwrap();
        let t = ray_inverse(&b, &[1.0], 10.0).unwrap();
        assert!(t > 0.0 && t < 1.0);
        assert!(rel(b.value(&[t]), 10.0) < 1e-10);
    }

    #[test]
    fn log_reparam_quadratic() {
        let phi = YoungFunction::quadratic(MatrixParameter::identity(1)).unwrap();
        for r in [2.0f64, 4.0, 8.0] {
            let v = log_reparam_conjugate(&phi, r).unwrap();
            let oracle = 0.5 * r * r.ln() - 0.5 * r;
            assert!((v - oracle).abs() < 1e-6, "r={r}: {v} vs {oracle}");
            for mu in [-3.0f64, -1.0, 0.0, 0.7, 2.0] {
                assert!(v >= r * mu - phi.value(&[mu.exp()]) - 1e-12);
            }
        }
        let v = log_reparam_conjugate_vector(&YoungFunction::quadratic(MatrixParameter::identity(2)).unwrap(), &[2.0, 4.0]).unwrap();
        let oracle: f64 = [2.0f64, 4.0].iter().map(|r| 0.5 * r * r.ln() - 0.5 * r).sum();
        assert!((v - oracle).abs() < 1e-6, "{v} vs {oracle}");
    }

    #[test]
    fn log_reparam_power_slope() {
        // ψ(r) = r·e^{−Φ*(r)/r} grows like r^{1/q}
        let p = 3.0;
        let q = p / (p - 1.0);
        let phi = YoungFunction::power(p, 1.0, 1).unwrap();
        let rs: Vec<f64> = (2..=9).map(|k| 2f64.powi(k)).collect();
        let pts: Vec<(f64, f64)> = rs
            .iter()
            .map(|r| (r.ln(), (r * (-log_reparam_conjugate(&phi, *r).unwrap() / r).exp()).ln()))
            .collect();
        let n = pts.len() as f64;
        let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((slope - 1.0 / q).abs() < 0.05, "{slope}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn young_inequality_and_evenness(
            x in proptest::collection::vec(-3.0f64..3.0, 2),
            y in proptest::collection::vec(-3.0f64..3.0, 2),
        ) {
            let phi = YoungFunction::power(3.0, 0.5, 2).unwrap();
            let ev = ConjugateEvaluator::new(&phi);
            let c = ev.evaluate(&y).unwrap();
            prop_assert!(signs::dot(&x, &y) <= phi.value(&x) + c.upper() + 1e-9);
            let neg: Vec<f64> = y.iter().map(|v| -v).collect();
            let cn = ev.evaluate(&neg).unwrap();
            prop_assert!((c.value - cn.value).abs() <= 1e-8 * c.value.max(1.0));
        }

        #[test]
        fn conjugate_is_midpoint_convex(
            a in proptest::collection::vec(-4.0f64..4.0, 2),
            b in proptest::collection::vec(-4.0f64..4.0, 2),
        ) {
            let phi = YoungFunction::radial(RadialProfile::Power { k: 2.0, c: 1.0 }, MatrixParameter::identity(2)).unwrap();
            let ev = ConjugateEvaluator::new(&phi);
            let mid: Vec<f64> = a.iter().zip(&b).map(|(u, v)| 0.5 * (u + v)).collect();
            let (ca, cb, cm) = (ev.evaluate(&a).unwrap(), ev.evaluate(&b).unwrap(), ev.evaluate(&mid).unwrap());
            prop_assert!(cm.value <= 0.5 * (ca.upper() + cb.upper()) + 1e-9);
        }

        #[test]
        fn conjugation_reverses_order(s in 1.0f64..4.0, y in proptest::collection::vec(-3.0f64..3.0, 2)) {
            let small = YoungFunction::quadratic(MatrixParameter::identity(2)).unwrap();
            let big = YoungFunction::quadratic(MatrixParameter::diagonal(&[s, s + 0.5]).unwrap()).unwrap();
            let cs = conjugate(&small, &y).unwrap().value;
            let cb = conjugate(&big, &y).unwrap().value;
            prop_assert!(cs + 1e-9 >= cb);
        }

        #[test]
        fn ray_inverse_round_trip(level in 1e-6f64..1e6, angle in 0.0f64..6.28) {
            let phi = YoungFunction::power(2.5, 1.3, 2).unwrap();
            let u = [angle.cos(), angle.sin()];
            let t = ray_inverse(&phi, &u, level).unwrap();
            prop_assert!(rel(phi.value(&signs::scale(&u, t)), level) < 1e-10);
        }
    }
}
