//! Adaptive Gauss-Legendre quadrature on panels.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Points per panel.
pub const PANEL_ORDER: usize = 10;

#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// n-point rule on [−1, 1], roots of P_n by Newton iteration.
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn integrate(&self, f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + half * x);
        }
        sum * half
    }
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn panel_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(PANEL_ORDER))
}

/// Stopping rule for [`integrate_adaptive`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveOptions {
    /// A panel is accepted when splitting it changes the integral by less
    /// than this fraction of the running total, pro rata to its width.
    pub rel_tol: f64,
    pub max_refinements: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions {
            rel_tol: 1e-8,
            max_refinements: 20,
        }
    }
}

/// ∫_a^b f by bisecting `initial_panels` equal panels until each one is
/// converged. Panels are summed left to right.
pub fn integrate_adaptive(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    initial_panels: usize,
    options: &AdaptiveOptions,
) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let rule = panel_rule();
    let n0 = initial_panels.max(1);
    let width = (b - a) / n0 as f64;
    let panels: Vec<(f64, f64, f64)> = (0..n0)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == n0 { b } else { lo + width };
            (lo, hi, rule.integrate(&f, lo, hi))
        })
        .collect();
    let total_estimate: f64 = panels.iter().map(|p| p.2).sum();
    let scale = total_estimate.abs().max(f64::MIN_POSITIVE);

    let mut result = 0.0;
    let mut failed = false;
    // depth-first, left to right
    let mut stack: Vec<(f64, f64, f64, usize)> =
        panels.into_iter().rev().map(|(lo, hi, v)| (lo, hi, v, 0)).collect();
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = rule.integrate(&f, lo, mid);
        let right = rule.integrate(&f, mid, hi);
        let split = left + right;
        let allowed = options.rel_tol * scale * (hi - lo) / (b - a);
        if (split - whole).abs() <= allowed || split == whole {
            result += split;
        } else if depth >= options.max_refinements {
            failed = true;
            result += split;
        } else {
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    if failed || !result.is_finite() {
        return Err(Error::QuadratureNonConvergence {
            refinements: options.max_refinements,
            estimate: result,
        });
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_is_exact_for_degree_19() {
        let rule = GaussLegendre::new(10);
        let f = |x: f64| x.powi(18) + 3.0 * x.powi(19);
        let got = rule.integrate(&f, -1.0, 1.0);
        assert!((got - 2.0 / 19.0).abs() < 1e-14);
        assert!((rule.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_narrow_lorentzian() {
        let g = 0.01;
        let f = |x: f64| g / ((x - 3.3) * (x - 3.3) + g * g);
        let got = integrate_adaptive(f, 0.0, 10.0, 10, &AdaptiveOptions::default()).unwrap();
        let exact = ((10.0 - 3.3) / g).atan() - ((0.0 - 3.3) / g).atan();
        assert!((got - exact).abs() < 1e-8 * exact, "{got} vs {exact}");
    }

    #[test]
    fn non_convergence_reports_estimate() {
        let f = |x: f64| if x < 0.123_456_7 { 0.0 } else { 1.0 / (x - 0.123_456_7).sqrt() };
        let err = integrate_adaptive(f, 0.0, 1.0, 1, &AdaptiveOptions { rel_tol: 1e-14, max_refinements: 3 })
            .unwrap_err();
        assert!(matches!(err, Error::QuadratureNonConvergence { refinements: 3, .. }));
    }

    #[test]
    fn zero_integrand() {
        assert_eq!(integrate_adaptive(|_| 0.0, 0.0, 5.0, 5, &AdaptiveOptions::default()).unwrap(), 0.0);
    }
}
