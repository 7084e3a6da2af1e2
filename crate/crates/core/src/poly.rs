//! Dense complex polynomials and their roots.
//!
//! Roots come from the eigenvalues of the balanced companion matrix and are
//! then polished by Newton iteration on the polynomial itself.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Newton polishing stops once |p(z)| falls below this fraction of Σ|a_i||z|^i.
pub const POLISH_TOL: f64 = 1e-12;
pub const POLISH_MAX_ITER: usize = 50;

/// Coefficients in ascending powers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    pub coeffs: Vec<Complex64>,
}

/// A polished root.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub value: Complex64,
    /// Newton reached the residual tolerance within the iteration cap.
    pub polished: bool,
    pub multiplicity: usize,
}

impl Poly {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Poly { coeffs }
    }

    pub fn constant(c: Complex64) -> Self {
        Poly { coeffs: vec![c] }
    }

    pub fn zero() -> Self {
        Poly { coeffs: vec![ZERO] }
    }

    /// Index of the highest nonzero coefficient (0 for the zero polynomial).
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|c| *c != ZERO).unwrap_or(0)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
    }

    /// Value and first derivative by a single Horner pass.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = ZERO;
        let mut dp = ZERO;
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// Σ|a_i||z|^i, the natural scale for the rounding error of `eval`.
    pub fn eval_scale(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::zero();
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * i as f64)
                .collect(),
        )
    }

    /// self · (z − shift)
    pub fn mul_linear(&self, shift: Complex64) -> Poly {
        let mut out = vec![ZERO; self.coeffs.len() + 1];
        for (i, &c) in self.coeffs.iter().enumerate() {
            out[i + 1] += c;
            out[i] -= c * shift;
        }
        Poly::new(out)
    }

    pub fn scale(&self, factor: Complex64) -> Poly {
        Poly::new(self.coeffs.iter().map(|&c| c * factor).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new(
            (0..n)
                .map(|i| {
                    self.coeffs.get(i).copied().unwrap_or(ZERO)
                        + other.coeffs.get(i).copied().unwrap_or(ZERO)
                })
                .collect(),
        )
    }

    /// Drops leading coefficients below `rel_tol` times the largest one.
    pub fn trimmed(&self, rel_tol: f64) -> Poly {
        let max = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let keep = self
            .coeffs
            .iter()
            .rposition(|c| c.norm() > rel_tol * max)
            .map_or(1, |i| i + 1);
        Poly::new(self.coeffs[..keep].to_vec())
    }

    /// Roots of the polynomial after trimming negligible leading terms.
    ///
    /// Roots closer together than `cluster_tol` (relative to their magnitude,
    /// with a floor of one) are merged and reported with their multiplicity.
    pub fn roots(&self, cluster_tol: f64) -> Vec<Root> {
        let p = self.trimmed(1e-14);
        let n = p.degree();
        if n == 0 {
            return Vec::new();
        }
        let raw = companion_eigenvalues(&p).unwrap_or_else(|| aberth(&p));
        let mut roots: Vec<Root> = raw
            .into_iter()
            .map(|z0| {
                let (value, polished) = newton_polish(&p, z0);
                Root {
                    value,
                    polished,
                    multiplicity: 1,
                }
            })
            .collect();
        roots.sort_by(|a, b| {
            a.value
                .re
                .total_cmp(&b.value.re)
                .then(a.value.im.total_cmp(&b.value.im))
        });
        merge_clusters(roots, cluster_tol)
    }
}

fn merge_clusters(roots: Vec<Root>, cluster_tol: f64) -> Vec<Root> {
    let mut out: Vec<Root> = Vec::with_capacity(roots.len());
    let mut used = vec![false; roots.len()];
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        let mut group = vec![i];
        for j in i + 1..roots.len() {
            if used[j] {
                continue;
            }
            let scale = roots[i].value.norm().max(1.0);
            if (roots[i].value - roots[j].value).norm() <= cluster_tol * scale {
                group.push(j);
            }
        }
        for &g in &group {
            used[g] = true;
        }
        let centroid =
            group.iter().map(|&g| roots[g].value).sum::<Complex64>() / group.len() as f64;
        out.push(Root {
            value: if group.len() == 1 { roots[i].value } else { centroid },
            polished: group.iter().all(|&g| roots[g].polished),
            multiplicity: group.len(),
        });
    }
    out
}

/// Eigenvalues of the balanced companion matrix, or `None` if the QR
/// iteration does not converge.
fn companion_eigenvalues(p: &Poly) -> Option<Vec<Complex64>> {
    let n = p.degree();
    let lead = p.coeffs[n];
    if n == 1 {
        return Some(vec![-p.coeffs[0] / lead]);
    }
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = ONE;
    }
    for i in 0..n {
        m[(i, n - 1)] = -p.coeffs[i] / lead;
    }
    balance(&mut m);
    let schur = Schur::try_new(m, f64::EPSILON, 100 * n)?;
    let (_, t) = schur.unpack();
    let eig: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    eig.iter()
        .all(|z| z.re.is_finite() && z.im.is_finite())
        .then_some(eig)
}

/// Parlett-Reinsch diagonal balancing with powers of two.
fn balance(m: &mut DMatrix<Complex64>) {
    let n = m.nrows();
    let radix = 2.0_f64;
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].norm();
                    r += m[(i, j)].norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= radix * radix;
            }
            if (c + r / f) / f < 0.95 * s {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

/// Simultaneous Aberth-Ehrlich iteration, used when the QR route fails.
fn aberth(p: &Poly) -> Vec<Complex64> {
    let n = p.degree();
    let lead = p.coeffs[n].norm();
    // Cauchy bound for the starting circle
    let radius = 1.0
        + p.coeffs[..n]
            .iter()
            .map(|c| c.norm() / lead)
            .fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            Complex64::from_polar(0.5 * radius, 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4)
        })
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0_f64;
        for k in 0..n {
            let (v, dv) = p.eval_with_derivative(z[k]);
            if v == ZERO {
                continue;
            }
            let ratio = v / dv;
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| ONE / (z[k] - z[j]))
                .sum();
            let step = ratio / (ONE - ratio * repulsion);
            z[k] -= step;
            moved = moved.max(step.norm() / z[k].norm().max(1.0));
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

fn newton_polish(p: &Poly, z0: Complex64) -> (Complex64, bool) {
    let mut z = z0;
    for _ in 0..POLISH_MAX_ITER {
        let (v, dv) = p.eval_with_derivative(z);
        if v.norm() <= POLISH_TOL * p.eval_scale(z) {
            return (z, true);
        }
        if dv == ZERO {
            break;
        }
        let step = v / dv;
        let next = z - step;
        if !(next.re.is_finite() && next.im.is_finite()) {
            break;
        }
        z = next;
    }
    let (v, _) = p.eval_with_derivative(z);
    let converged = v.norm() <= POLISH_TOL * p.eval_scale(z);
    // keep the eigenvalue if Newton wandered off
    if !converged && (z - z0).norm() > 1e-3 * z0.norm().max(1.0) {
        return (z0, false);
    }
    (z, converged)
}
