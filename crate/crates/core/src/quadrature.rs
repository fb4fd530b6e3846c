//! Tensor Gauss–Legendre quadrature over rectangles, refined adaptively panel
//! by panel.

use std::ops::{Add, Mul, Sub};
use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuadRule {
    /// Split a panel into four whenever its order-`order` estimate disagrees
    /// with the sum over its children.
    Adaptive { order: usize },
    /// One pass over the initial panels; the reported error is the one-level
    /// child disagreement.
    FixedTensor { order: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rule: QuadRule,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evals: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rule: QuadRule::Adaptive { order: 8 },
            abs_tol: 1e-12,
            rel_tol: 1e-8,
            max_evals: 50_000_000,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        let order = match self.rule {
            QuadRule::Adaptive { order } | QuadRule::FixedTensor { order } => order,
        };
        if !(1..=64).contains(&order) {
            return Err(Error::config("quadrature.order", "must lie in 1..=64"));
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::config("quadrature", "tolerances must be positive"));
        }
        if self.max_evals < 1000 {
            return Err(Error::config("quadrature.max_evals", "must be at least 1000"));
        }
        Ok(())
    }

    fn order(&self) -> usize {
        match self.rule {
            QuadRule::Adaptive { order } | QuadRule::FixedTensor { order } => order,
        }
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Values integrable by the tensor rules.
pub trait QuadValue:
    Copy + Send + Sync + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn magnitude(self) -> f64;
}

impl QuadValue for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<V> {
    pub value: V,
    pub error: f64,
    pub evals: u64,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    x: [f64; 2],
    y: [f64; 2],
    depth: u32,
}

impl Panel {
    fn area(&self) -> f64 {
        (self.x[1] - self.x[0]) * (self.y[1] - self.y[0])
    }

    fn children(&self) -> [Panel; 4] {
        let xm = 0.5 * (self.x[0] + self.x[1]);
        let ym = 0.5 * (self.y[0] + self.y[1]);
        let d = self.depth + 1;
        [
            Panel { x: [self.x[0], xm], y: [self.y[0], ym], depth: d },
            Panel { x: [xm, self.x[1]], y: [self.y[0], ym], depth: d },
            Panel { x: [self.x[0], xm], y: [ym, self.y[1]], depth: d },
            Panel { x: [xm, self.x[1]], y: [ym, self.y[1]], depth: d },
        ]
    }
}

struct Rule<'a, F> {
    f: &'a F,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    evals: AtomicU64,
}

impl<F, V> Rule<'_, F>
where
    F: Fn(f64, f64) -> V + Sync,
    V: QuadValue,
{
    fn apply(&self, p: &Panel) -> V {
        let (cx, hx) = (0.5 * (p.x[0] + p.x[1]), 0.5 * (p.x[1] - p.x[0]));
        let (cy, hy) = (0.5 * (p.y[0] + p.y[1]), 0.5 * (p.y[1] - p.y[0]));
        let mut acc = V::default();
        for (ty, wy) in self.nodes.iter().zip(&self.weights) {
            let y = cy + hy * ty;
            let mut row = V::default();
            for (tx, wx) in self.nodes.iter().zip(&self.weights) {
                row = row + (self.f)(cx + hx * tx, y) * *wx;
            }
            acc = acc + row * *wy;
        }
        let n = self.nodes.len() as u64;
        self.evals.fetch_add(n * n, Ordering::Relaxed);
        acc * (hx * hy)
    }
}

/// Subdivides each interval between consecutive `cuts` into pieces no longer
/// than `max_len`.
pub fn refine_cuts(cuts: &[f64], max_len: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(cuts.len());
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let pieces = if max_len > 0.0 { (len / max_len).ceil().max(1.0) as usize } else { 1 };
        for i in 0..pieces {
            out.push(w[0] + len * i as f64 / pieces as f64);
        }
    }
    if let Some(&last) = cuts.last() {
        out.push(last);
    }
    out
}

const MAX_DEPTH: u32 = 12;

/// Integrates `f(x, y)` over the rectangle spanned by `x_cuts × y_cuts`
/// (sorted, ends included). Cuts mark discontinuities; panels never straddle
/// them.
pub fn integrate_2d<F, V>(f: &F, x_cuts: &[f64], y_cuts: &[f64], spec: &QuadratureSpec) -> Result<QuadResult<V>>
where
    F: Fn(f64, f64) -> V + Sync,
    V: QuadValue,
{
    spec.validate()?;
    let (nodes, weights) = gauss_legendre(spec.order());
    let rule = Rule {
        f,
        nodes,
        weights,
        evals: AtomicU64::new(0),
    };
    let mut panels = Vec::new();
    for wy in y_cuts.windows(2) {
        for wx in x_cuts.windows(2) {
            if wx[1] > wx[0] && wy[1] > wy[0] {
                panels.push(Panel { x: [wx[0], wx[1]], y: [wy[0], wy[1]], depth: 0 });
            }
        }
    }
    let total_area: f64 = panels.iter().map(Panel::area).sum();
    if panels.is_empty() || total_area <= 0.0 {
        return Ok(QuadResult { value: V::default(), error: 0.0, evals: 0 });
    }
    let coarse: Vec<V> = panels.par_iter().map(|p| rule.apply(p)).collect();
    let scale = coarse.iter().fold(V::default(), |a, &b| a + b).magnitude();
    let tol = spec.abs_tol.max(spec.rel_tol * scale);
    let adaptive = matches!(spec.rule, QuadRule::Adaptive { .. });

    let results: Vec<Result<(V, f64)>> = panels
        .par_iter()
        .zip(coarse.par_iter())
        .map(|(p, c)| refine(&rule, *p, *c, tol / total_area, adaptive, spec.max_evals))
        .collect();
    let mut value = V::default();
    let mut error = 0.0;
    for r in results {
        let (v, e) = r?;
        value = value + v;
        error += e;
    }
    Ok(QuadResult {
        value,
        error,
        evals: rule.evals.load(Ordering::Relaxed),
    })
}

fn refine<F, V>(rule: &Rule<'_, F>, root: Panel, root_value: V, tol_density: f64, adaptive: bool, max_evals: u64) -> Result<(V, f64)>
where
    F: Fn(f64, f64) -> V + Sync,
    V: QuadValue,
{
    let mut stack = vec![(root, root_value)];
    let mut value = V::default();
    let mut error = 0.0;
    while let Some((p, coarse)) = stack.pop() {
        let kids = p.children();
        let parts = kids.map(|k| rule.apply(&k));
        let fine = parts.iter().fold(V::default(), |a, &b| a + b);
        let err = (fine - coarse).magnitude();
        if !adaptive || err <= tol_density * p.area() || p.depth >= MAX_DEPTH {
            value = value + fine;
            error += err;
            continue;
        }
        if rule.evals.load(Ordering::Relaxed) > max_evals {
            return Err(Error::Numerical {
                module: "quadrature",
                op: "integrate_2d",
                msg: format!("evaluation budget of {max_evals} exhausted"),
                achieved: error + err,
            });
        }
        for (k, v) in kids.into_iter().zip(parts) {
            stack.push((k, v));
        }
    }
    Ok((value, error))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 8, 16, 33] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-12, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn adaptive_gaussian_over_square() {
        let f = |x: f64, y: f64| (-(x * x + y * y) / 0.02).exp();
        let spec = QuadratureSpec { abs_tol: 1e-14, rel_tol: 1e-11, ..Default::default() };
        let r = integrate_2d(&f, &[-3.0, 3.0], &[-3.0, 3.0], &spec).unwrap();
        let exact = std::f64::consts::PI * 0.02;
        assert!((r.value - exact).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn cuts_capture_discontinuity() {
        let f = |x: f64, _y: f64| if x < 0.3 { 1.0 } else { 0.0 };
        let spec = QuadratureSpec::default();
        let r = integrate_2d(&f, &[0.0, 0.3, 1.0], &[0.0, 2.0], &spec).unwrap();
        assert!((r.value - 0.6).abs() < 1e-14);
    }

    #[test]
    fn budget_exhaustion_reports_error() {
        let f = |x: f64, y: f64| (1e4 * x * y).sin();
        let spec = QuadratureSpec {
            abs_tol: 1e-15,
            rel_tol: 1e-15,
            max_evals: 2000,
            ..Default::default()
        };
        let err = integrate_2d(&f, &[0.0, 1.0], &[0.0, 1.0], &spec).unwrap_err();
        assert!(matches!(err, Error::Numerical { .. }));
    }

    #[test]
    fn complex_values() {
        let f = |x: f64, y: f64| Complex64::new(x, y);
        let r = integrate_2d(&f, &[0.0, 1.0], &[0.0, 2.0], &QuadratureSpec::default()).unwrap();
        assert!((r.value - Complex64::new(1.0, 2.0)).norm() < 1e-13);
    }

    #[test]
    fn refine_cuts_bounds_panel_length() {
        let c = refine_cuts(&[0.0, 1.0, 1.05], 0.3);
        assert_eq!(c.len(), 6);
        assert!(c.windows(2).all(|w| w[1] - w[0] <= 0.3 + 1e-15));
    }
}
