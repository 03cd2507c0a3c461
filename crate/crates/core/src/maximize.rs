//! Box-constrained maximisation: tensor grid, zoom refinement, coordinate
//! ascent with golden-section line searches, and a damped Newton polish.
//!
//! Objectives may return −∞ (outside a support) but never NaN.

use nalgebra::{DMatrix, DVector};

/// Axis-aligned box [lo, hi].
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn symmetric(half_widths: &[f64]) -> Self {
        Self {
            lo: half_widths.iter().map(|h| -h).collect(),
            hi: half_widths.to_vec(),
        }
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt()
    }

    fn clamp(&self, x: &mut [f64]) {
        for (j, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[j], self.hi[j]);
        }
    }

    /// True when some coordinate lies within `frac` of its box width from a face.
    pub fn near_face(&self, x: &[f64], frac: f64) -> bool {
        x.iter().enumerate().any(|(j, v)| {
            let w = self.hi[j] - self.lo[j];
            v - self.lo[j] <= frac * w || self.hi[j] - v <= frac * w
        })
    }
}

#[derive(Debug, Clone)]
pub struct Settings {
    /// Points per axis of the initial tensor grid.
    pub grid_points: usize,
    /// Points per axis on each zoom pass.
    pub refine_points: usize,
    pub zoom_passes: usize,
    /// Shrink factor of the zoom window per pass.
    pub zoom_factor: f64,
    /// Above this dimension the tensor grid is replaced by coordinate ascent.
    pub max_grid_dim: usize,
    pub polish_iterations: usize,
    /// Gradient-norm target for the polish, relative to max(1, |x|).
    pub tolerance: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            grid_points: 65,
            refine_points: 17,
            zoom_passes: 3,
            zoom_factor: 8.0,
            max_grid_dim: 3,
            polish_iterations: 40,
            tolerance: 1e-10,
        }
    }
}

impl Settings {
    pub fn coarse() -> Self {
        Self {
            grid_points: 17,
            refine_points: 9,
            zoom_passes: 0,
            polish_iterations: 0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub x: Vec<f64>,
    pub value: f64,
    /// Norm of the objective gradient at `x` (∞ when not computed).
    pub gradient_norm: f64,
    pub evaluations: usize,
}

struct Counter<'a> {
    f: &'a dyn Fn(&[f64]) -> f64,
    count: usize,
}

impl Counter<'_> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.count += 1;
        let v = (self.f)(x);
        debug_assert!(!v.is_nan(), "objective returned NaN at {x:?}");
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }
}

/// Maximises `f` over `bounds`, always including `start` as a candidate.
/// `gradient`, if given, is the exact gradient of `f`.
pub fn maximize(
    f: &dyn Fn(&[f64]) -> f64,
    gradient: Option<&dyn Fn(&[f64]) -> Vec<f64>>,
    bounds: &Bounds,
    start: &[f64],
    settings: &Settings,
) -> Maximum {
    let d = bounds.dim();
    let mut c = Counter { f, count: 0 };
    let mut best_x = start.to_vec();
    let mut best_v = c.eval(start);

    let mut half: Vec<f64>;
    if d <= settings.max_grid_dim {
        let center: Vec<f64> = (0..d).map(|j| 0.5 * (bounds.lo[j] + bounds.hi[j])).collect();
        half = (0..d).map(|j| 0.5 * (bounds.hi[j] - bounds.lo[j])).collect();
        grid_pass(&mut c, bounds, &center, &half, settings.grid_points, &mut best_x, &mut best_v);
        let spacing_ratio = 2.0 / (settings.grid_points.max(2) - 1) as f64;
        half.iter_mut().for_each(|h| *h *= spacing_ratio * settings.zoom_factor / 2.0);
        for _ in 0..settings.zoom_passes {
            let center = best_x.clone();
            grid_pass(&mut c, bounds, &center, &half, settings.refine_points, &mut best_x, &mut best_v);
            half.iter_mut().for_each(|h| *h /= settings.zoom_factor);
        }
    } else {
        let mut starts = vec![vec![0.0; d]];
        for mask in 0..(1usize << d) {
            starts.push(
                (0..d)
                    .map(|j| {
                        let mid = 0.5 * (bounds.lo[j] + bounds.hi[j]);
                        let q = 0.25 * (bounds.hi[j] - bounds.lo[j]);
                        if mask >> j & 1 == 1 {
                            mid - q
                        } else {
                            mid + q
                        }
                    })
                    .collect(),
            );
        }
        for s in starts {
            let (x, v) = coordinate_ascent(&mut c, bounds, s, 1e-9);
            if v > best_v {
                best_v = v;
                best_x = x;
            }
        }
    }

    let mut gradient_norm = f64::INFINITY;
    if settings.polish_iterations > 0 && best_v.is_finite() {
        let (x, v, g) = newton_polish(&mut c, gradient, bounds, best_x.clone(), best_v, settings);
        best_x = x;
        best_v = v;
        gradient_norm = g;
    }
    Maximum {
        x: best_x,
        value: best_v,
        gradient_norm,
        evaluations: c.count,
    }
}

fn grid_pass(
    c: &mut Counter<'_>,
    bounds: &Bounds,
    center: &[f64],
    half: &[f64],
    points: usize,
    best_x: &mut Vec<f64>,
    best_v: &mut f64,
) {
    let d = center.len();
    let points = points.max(2);
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    loop {
        for j in 0..d {
            let t = idx[j] as f64 / (points - 1) as f64;
            x[j] = (center[j] - half[j] + 2.0 * half[j] * t).clamp(bounds.lo[j], bounds.hi[j]);
        }
        let v = c.eval(&x);
        if v > *best_v {
            *best_v = v;
            best_x.copy_from_slice(&x);
        }
        let mut j = 0;
        loop {
            if j == d {
                return;
            }
            idx[j] += 1;
            if idx[j] < points {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a maximum of a unimodal `f` on [a, b].
/// Returns (argmax, max).
pub fn golden_section_max(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol * (1.0 + a.abs().max(b.abs())) {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn coordinate_ascent(c: &mut Counter<'_>, bounds: &Bounds, mut x: Vec<f64>, tol: f64) -> (Vec<f64>, f64) {
    let d = x.len();
    let mut v = c.eval(&x);
    for _sweep in 0..200 {
        let before = v;
        for j in 0..d {
            let (lo, hi) = (bounds.lo[j], bounds.hi[j]);
            let mut probe = x.clone();
            let mut line = |t: f64| {
                probe[j] = t;
                c.eval(&probe)
            };
            let (t, fv) = golden_section_max(&mut line, lo, hi, tol);
            if fv > v {
                v = fv;
                x[j] = t;
            }
        }
        if v - before <= tol * v.abs().max(1.0) {
            break;
        }
    }
    (x, v)
}

fn fd_gradient(c: &mut Counter<'_>, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut p = x.to_vec();
    for j in 0..x.len() {
        let h = 1e-6 * x[j].abs().max(1.0);
        p[j] = x[j] + h;
        let fp = c.eval(&p);
        p[j] = x[j] - h;
        let fm = c.eval(&p);
        p[j] = x[j];
        g[j] = (fp - fm) / (2.0 * h);
    }
    g
}

fn newton_polish(
    c: &mut Counter<'_>,
    gradient: Option<&dyn Fn(&[f64]) -> Vec<f64>>,
    bounds: &Bounds,
    mut x: Vec<f64>,
    mut v: f64,
    settings: &Settings,
) -> (Vec<f64>, f64, f64) {
    let d = x.len();
    let grad = |c: &mut Counter<'_>, x: &[f64]| -> Vec<f64> {
        match gradient {
            Some(g) => g(x),
            None => fd_gradient(c, x),
        }
    };
    let norm = |g: &[f64]| g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut g = grad(c, &x);
    if g.iter().any(|v| !v.is_finite()) {
        return (x, v, f64::INFINITY);
    }
    for _ in 0..settings.polish_iterations {
        let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if norm(&g) <= settings.tolerance * scale {
            break;
        }
        // Hessian of the objective by differences of the gradient.
        let mut hess = DMatrix::zeros(d, d);
        let mut p = x.clone();
        let mut ok = true;
        for j in 0..d {
            let h = 1e-5 * x[j].abs().max(1e-3);
            p[j] = x[j] + h;
            let gp = grad(c, &p);
            p[j] = x[j] - h;
            let gm = grad(c, &p);
            p[j] = x[j];
            for i in 0..d {
                let e = (gp[i] - gm[i]) / (2.0 * h);
                if !e.is_finite() {
                    ok = false;
                }
                hess[(i, j)] = e;
            }
        }
        let gv = DVector::from_column_slice(&g);
        let step: Vec<f64> = if ok {
            let neg = -(&hess + hess.transpose()) * 0.5;
            match neg.cholesky() {
                Some(ch) => ch.solve(&gv).iter().cloned().collect(),
                None => g.clone(),
            }
        } else {
            g.clone()
        };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let mut cand: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            bounds.clamp(&mut cand);
            let cv = c.eval(&cand);
            if cv >= v && cand != x {
                let cg = grad(c, &cand);
                if cg.iter().all(|e| e.is_finite()) && (cv > v || norm(&cg) < norm(&g)) {
                    x = cand;
                    v = cv;
                    g = cg;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (x, v, norm(&g))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, v) = golden_section_max(|t| -(t - 1.3) * (t - 1.3) + 2.0, -5.0, 5.0, 1e-12);
        assert!((x - 1.3).abs() < 1e-6);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn grid_and_polish_reach_concave_peak() {
        let f = |x: &[f64]| -((x[0] - 0.37).powi(2) + 2.0 * (x[1] + 1.1).powi(2)) + 0.5 * x[0] * x[1];
        let m = maximize(&f, None, &Bounds::cube(2, -4.0, 4.0), &[0.0, 0.0], &Settings::default());
        // stationarity: −2(x−0.37) + 0.5y = 0, −4(y+1.1) + 0.5x = 0
        let a = DMatrix::from_row_slice(2, 2, &[-2.0, 0.5, 0.5, -4.0]);
        let b = DVector::from_row_slice(&[-0.74, 4.4]);
        let s = a.lu().solve(&b).unwrap();
        assert!((m.x[0] - s[0]).abs() < 1e-8 && (m.x[1] - s[1]).abs() < 1e-8, "{:?}", m.x);
        assert!(m.gradient_norm < 1e-8);
    }

    #[test]
    fn coordinate_ascent_in_high_dimension() {
        let f = |x: &[f64]| -x.iter().enumerate().map(|(j, v)| (v - 0.1 * j as f64).powi(2)).sum::<f64>();
        let m = maximize(&f, None, &Bounds::cube(5, -2.0, 2.0), &[0.0; 5], &Settings::default());
        for (j, v) in m.x.iter().enumerate() {
            assert!((v - 0.1 * j as f64).abs() < 1e-7);
        }
    }

    #[test]
    fn boundary_maximum_is_clamped() {
        let f = |x: &[f64]| x[0];
        let b = Bounds::cube(1, -1.0, 3.0);
        let m = maximize(&f, None, &b, &[0.0], &Settings::default());
        assert_eq!(m.x[0], 3.0);
        assert!(b.near_face(&m.x, 1e-3));
    }

    #[test]
    fn infinite_region_is_avoided() {
        let f = |x: &[f64]| if x[0].abs() >= 1.0 { f64::NEG_INFINITY } else { 2.0 * x[0] - x[0] * x[0] / (1.0 - x[0].abs()) };
        let m = maximize(&f, None, &Bounds::cube(1, -1.0, 1.0), &[0.0], &Settings::default());
        assert!(m.value.is_finite() && m.x[0] > 0.0 && m.x[0] < 1.0);
    }
}
