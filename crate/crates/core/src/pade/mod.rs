//! Continued-fraction rational interpolation of S along one real axis, and
//! the poles and residues of its analytic continuation.
//!
//! The interpolant is Thiele's form
//!
//! ```text
//! C(z) = b0 + (z − x0) / (b1 + (z − x1) / (b2 + … + (z − x_{n−1}) / b_n))
//! ```
//!
//! built from reciprocal differences. Nodes enter in greedy order: the next
//! pivot is the remaining sample worst reproduced by the current fraction, so
//! no reciprocal difference is taken across nearly equal values. Construction
//! stops once every sample is matched to `truncation_tol` relative to the
//! largest |S|, which keeps exact rational data free of spurious pole-zero
//! pairs. With n + 1 terms the numerator has degree ⌈n/2⌉ and the
//! denominator ⌊n/2⌋.

mod export;
mod filter;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;

pub use self::export::{read_poles_csv, write_poles_csv, PoleRecord};
pub use self::filter::{
    filter_spurious, poles_along_axis, poles_per_energy, poles_per_j, FilterPolicy, NodeWindow, PadePolicy,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Minimum number of samples accepted by [`build_rational`].
pub const MIN_SAMPLES: usize = 4;

/// Evaluation closer than this to a denominator root is refused.
pub const POLE_GUARD: f64 = 1e-12;

/// Which variable the approximant continues.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// λ = J + 1/2 at fixed real energy.
    AngularMomentum,
    /// E in meV at fixed integer J.
    Energy,
}

impl Axis {
    pub fn tag(self) -> &'static str {
        match self {
            Axis::AngularMomentum => "J",
            Axis::Energy => "E",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Axis> {
        match tag.trim() {
            "J" => Some(Axis::AngularMomentum),
            "E" => Some(Axis::Energy),
            _ => None,
        }
    }
}

/// Construction options for [`build_rational`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildOptions {
    /// Stop adding terms once max |S_i − C(x_i)| ≤ tol · max |S_i|. Zero uses every node.
    pub truncation_tol: f64,
    /// Cap on the number of continued-fraction terms.
    pub max_terms: Option<usize>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            truncation_tol: 1e-13,
            max_terms: None,
        }
    }
}

/// Rational interpolant of S along one axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalApproximant {
    pub axis: Axis,
    pub fixed_value: f64,
    /// All sample abscissae, ascending.
    nodes: Vec<f64>,
    samples: Vec<Complex64>,
    /// Pivot abscissae x_k in the order they enter the fraction.
    cf_nodes: Vec<f64>,
    cf_coeffs: Vec<Complex64>,
    /// Polynomials are stored in u = (z − center) / half_width.
    center: f64,
    half_width: f64,
    num_poly: Poly,
    den_poly: Poly,
    den_roots: Vec<Complex64>,
}

/// a / b with b = 0 reported as `None`.
fn checked_div(a: Complex64, b: Complex64) -> Option<Complex64> {
    if b == ZERO {
        return None;
    }
    let q = a / b;
    (q.re.is_finite() && q.im.is_finite()).then_some(q)
}

/// Backward evaluation of the fraction; `None` at a pole of the fraction.
fn cf_eval(cf_nodes: &[f64], coeffs: &[Complex64], z: Complex64) -> Option<Complex64> {
    let n = coeffs.len();
    let mut t = coeffs[n - 1];
    for k in (0..n - 1).rev() {
        let dz = z - cf_nodes[k];
        t = if dz == ZERO {
            coeffs[k]
        } else {
            coeffs[k] + checked_div(dz, t)?
        };
    }
    Some(t)
}

/// Builds the continued-fraction interpolant through `samples`.
pub fn build_rational(
    samples: &[(f64, Complex64)],
    options: &BuildOptions,
) -> Result<RationalApproximant> {
    RationalApproximant::build(Axis::AngularMomentum, f64::NAN, samples, options)
}

impl RationalApproximant {
    pub fn build(
        axis: Axis,
        fixed_value: f64,
        samples: &[(f64, Complex64)],
        options: &BuildOptions,
    ) -> Result<Self> {
        if samples.len() < MIN_SAMPLES {
            return Err(Error::TooFewSamples {
                need: MIN_SAMPLES,
                got: samples.len(),
            });
        }
        let mut sorted: Vec<(f64, Complex64)> = samples.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in sorted.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateAbscissa(w[0].0));
            }
        }
        if let Some(bad) = sorted
            .iter()
            .find(|(x, s)| !(x.is_finite() && s.re.is_finite() && s.im.is_finite()))
        {
            return Err(Error::DegenerateData(format!(
                "non-finite sample at {}",
                bad.0
            )));
        }
        let nodes: Vec<f64> = sorted.iter().map(|p| p.0).collect();
        let values: Vec<Complex64> = sorted.iter().map(|p| p.1).collect();
        let (cf_nodes, cf_coeffs) = thiele_coefficients(&nodes, &values, options)?;

        let lo = nodes[0];
        let hi = *nodes.last().unwrap();
        let center = 0.5 * (lo + hi);
        let half_width = 0.5 * (hi - lo);
        let (num_poly, den_poly) = convergent_polys(&cf_nodes, &cf_coeffs, center, half_width);
        let den_roots = den_poly
            .roots(1e-10)
            .into_iter()
            .map(|r| center + half_width * r.value)
            .collect();
        Ok(RationalApproximant {
            axis,
            fixed_value,
            nodes,
            samples: values,
            cf_nodes,
            cf_coeffs,
            center,
            half_width,
            num_poly,
            den_poly,
            den_roots,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.nodes.iter().copied().zip(self.samples.iter().copied())
    }

    pub fn cf_nodes(&self) -> &[f64] {
        &self.cf_nodes
    }

    pub fn cf_coeffs(&self) -> &[Complex64] {
        &self.cf_coeffs
    }

    /// Numerator in the scaled variable u = (z − center)/half_width.
    pub fn num_poly(&self) -> &Poly {
        &self.num_poly
    }

    pub fn den_poly(&self) -> &Poly {
        &self.den_poly
    }

    pub fn window(&self) -> (f64, f64) {
        (self.nodes[0], *self.nodes.last().unwrap())
    }

    /// (center, half_width) of the scaled variable.
    pub fn scaling(&self) -> (f64, f64) {
        (self.center, self.half_width)
    }

    pub fn to_scaled(&self, z: Complex64) -> Complex64 {
        (z - self.center) / self.half_width
    }

    pub fn from_scaled(&self, u: Complex64) -> Complex64 {
        self.center + self.half_width * u
    }

    /// Denominator roots in the z plane.
    pub fn denominator_roots(&self) -> &[Complex64] {
        &self.den_roots
    }

    /// Value of the rational function at z, by backward continued-fraction
    /// evaluation.
    pub fn evaluate(&self, z: Complex64) -> Result<Complex64> {
        if self
            .den_roots
            .iter()
            .any(|r| (z - r).norm() < POLE_GUARD * r.norm().max(1.0))
        {
            return Err(Error::EvaluationAtPole(z));
        }
        cf_eval(&self.cf_nodes, &self.cf_coeffs, z).ok_or(Error::EvaluationAtPole(z))
    }

    /// Value at a real abscissa.
    pub fn evaluate_real(&self, x: f64) -> Result<Complex64> {
        self.evaluate(Complex64::new(x, 0.0))
    }

    /// Value as the ratio num/den of the convergent polynomials.
    pub fn evaluate_ratio(&self, z: Complex64) -> Result<Complex64> {
        let u = self.to_scaled(z);
        checked_div(self.num_poly.eval(u), self.den_poly.eval(u)).ok_or(Error::EvaluationAtPole(z))
    }

    /// [S(z*)]*: the conjugated continuation at the mirror point, as needed
    /// when S*(E, λ_n*) enters a resonance term.
    pub fn conjugate_evaluate(&self, z: Complex64) -> Result<Complex64> {
        self.evaluate(z.conj()).map(|v| v.conj())
    }

    pub fn numerator_degree(&self) -> usize {
        self.num_poly.degree()
    }

    pub fn denominator_degree(&self) -> usize {
        self.den_poly.degree()
    }

    /// Numerator roots in the z plane.
    pub fn zeros(&self) -> Vec<Complex64> {
        self.num_poly
            .roots(1e-10)
            .into_iter()
            .map(|r| self.from_scaled(r.value))
            .collect()
    }
}

/// Greedy-pivot reciprocal differences.
fn thiele_coefficients(
    nodes: &[f64],
    values: &[Complex64],
    options: &BuildOptions,
) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let n = nodes.len();
    let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let max_terms = options.max_terms.unwrap_or(n).clamp(1, n);
    let mean = values.iter().sum::<Complex64>() / n as f64;

    let mut remaining: Vec<usize> = (0..n).collect();
    let mut cf_nodes: Vec<f64> = Vec::new();
    let mut coeffs: Vec<Complex64> = Vec::new();

    while !remaining.is_empty() && coeffs.len() < max_terms {
        // candidate pivots, worst-reproduced first; ties to the lowest index
        let mut ranked: Vec<(f64, usize)> = remaining
            .iter()
            .map(|&i| {
                let err = if coeffs.is_empty() {
                    (values[i] - mean).norm()
                } else {
                    match cf_eval(&cf_nodes, &coeffs, Complex64::new(nodes[i], 0.0)) {
                        Some(c) => (values[i] - c).norm(),
                        None => f64::INFINITY,
                    }
                };
                (if err.is_nan() { f64::INFINITY } else { err }, i)
            })
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        if !coeffs.is_empty() && ranked[0].0 <= options.truncation_tol * scale {
            break;
        }

        let mut chosen = None;
        for &(_, i) in &ranked {
            if let Some(b) = reciprocal_difference(&cf_nodes, &coeffs, nodes[i], values[i]) {
                chosen = Some((i, b));
                break;
            }
        }
        let (i, b) = chosen.ok_or_else(|| {
            Error::DegenerateData(format!(
                "no finite continued-fraction coefficient at term {} for any pivot",
                coeffs.len()
            ))
        })?;
        cf_nodes.push(nodes[i]);
        coeffs.push(b);
        remaining.retain(|&r| r != i);
    }
    Ok((cf_nodes, coeffs))
}

/// φ_k(x) along the chain φ_{j+1}(x) = (x − x_j)/(φ_j(x) − b_j).
fn reciprocal_difference(
    cf_nodes: &[f64],
    coeffs: &[Complex64],
    x: f64,
    value: Complex64,
) -> Option<Complex64> {
    let mut phi = value;
    for (&xj, &bj) in cf_nodes.iter().zip(coeffs) {
        phi = checked_div(Complex64::new(x - xj, 0.0), phi - bj)?;
    }
    (phi.re.is_finite() && phi.im.is_finite()).then_some(phi)
}

/// Numerator and denominator of the last convergent via the three-term
/// recurrence P_k = b_k P_{k−1} + a_k P_{k−2} with a_k = (z − x_{k−1}),
/// written in u = (z − center)/half_width.
fn convergent_polys(
    cf_nodes: &[f64],
    coeffs: &[Complex64],
    center: f64,
    half_width: f64,
) -> (Poly, Poly) {
    let mut p_prev = Poly::constant(ONE);
    let mut q_prev = Poly::constant(ZERO);
    let mut p = Poly::constant(coeffs[0]);
    let mut q = Poly::constant(ONE);
    let h = Complex64::new(half_width, 0.0);
    for k in 1..coeffs.len() {
        let uk = Complex64::new((cf_nodes[k - 1] - center) / half_width, 0.0);
        let a_p = p_prev.mul_linear(uk).scale(h);
        let a_q = q_prev.mul_linear(uk).scale(h);
        let p_next = p.scale(coeffs[k]).add(&a_p);
        let q_next = q.scale(coeffs[k]).add(&a_q);
        p_prev = p;
        q_prev = q;
        p = p_next;
        q = q_next;
        // common rescaling keeps the pair bounded; the ratio is unchanged
        let norm = q
            .coeffs
            .iter()
            .chain(p.coeffs.iter())
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        if norm > 0.0 && norm.is_finite() {
            let s = Complex64::new(1.0 / norm, 0.0);
            p = p.scale(s);
            q = q.scale(s);
            p_prev = p_prev.scale(s);
            q_prev = q_prev.scale(s);
        }
    }
    let qmax = q.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if qmax > 0.0 {
        let s = Complex64::new(1.0 / qmax, 0.0);
        p = p.scale(s);
        q = q.scale(s);
    }
    (p, q)
}

/// A pole of the continuation with its residue and diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexPole {
    /// λ on the angular-momentum axis, complex E (meV) on the energy axis.
    pub position: Complex64,
    /// lim (z − z0) S(z); absent for multiple roots.
    pub residue: Option<Complex64>,
    pub multiplicity: usize,
    pub quality: PoleQuality,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PoleQuality {
    /// Distance to the nearest numerator root (infinite if none).
    pub pole_zero_distance: f64,
    /// Fraction of leave-one-out refits reproducing the pole, once filtered.
    pub stability: Option<f64>,
    /// Newton polishing did not reach its tolerance.
    pub unpolished: bool,
}

impl ComplexPole {
    /// Angular momentum J = λ − 1/2 for poles on the angular-momentum axis.
    pub fn j(&self) -> Complex64 {
        self.position - 0.5
    }

    pub fn flags(&self) -> Vec<&'static str> {
        let mut flags = Vec::new();
        if self.quality.unpolished {
            flags.push("unpolished");
        }
        if self.multiplicity > 1 {
            flags.push("multiple");
        }
        flags
    }
}

/// Roots of the denominator with residues num(z0)/den'(z0).
pub fn extract_poles(ra: &RationalApproximant) -> Vec<ComplexPole> {
    if ra.den_poly.degree() == 0 {
        return Vec::new();
    }
    let zeros = ra.zeros();
    let d_den = ra.den_poly.derivative();
    let mut poles: Vec<ComplexPole> = ra
        .den_poly
        .roots(1e-7)
        .into_iter()
        .map(|root| {
            let position = ra.from_scaled(root.value);
            let residue = (root.multiplicity == 1)
                .then(|| {
                    // d/dz = (1/half_width) d/du
                    checked_div(
                        ra.num_poly.eval(root.value) * ra.half_width,
                        d_den.eval(root.value),
                    )
                })
                .flatten();
            let pole_zero_distance = zeros
                .iter()
                .map(|z| (z - position).norm())
                .fold(f64::INFINITY, f64::min);
            ComplexPole {
                position,
                residue,
                multiplicity: root.multiplicity,
                quality: PoleQuality {
                    pole_zero_distance,
                    stability: None,
                    unpolished: !root.polished,
                },
            }
        })
        .collect();
    poles.sort_by(|a, b| {
        a.position
            .re
            .total_cmp(&b.position.re)
            .then(a.position.im.total_cmp(&b.position.im))
    });
    poles
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample(f: impl Fn(Complex64) -> Complex64, nodes: impl Iterator<Item = f64>) -> Vec<(f64, Complex64)> {
        nodes.map(|x| (x, f(c(x, 0.0)))).collect()
    }

    fn half_integers(n: usize) -> impl Iterator<Item = f64> {
        (0..n).map(|j| j as f64 + 0.5)
    }

    #[test]
    fn constant_samples_give_constant_approximant() {
        let s = sample(|_| c(0.3, -0.1), half_integers(8));
        let ra = build_rational(&s, &BuildOptions::default()).unwrap();
        assert_eq!(ra.denominator_degree(), 0);
        assert_eq!(ra.evaluate(c(3.7, 2.0)).unwrap(), c(0.3, -0.1));
        assert!(extract_poles(&ra).is_empty());
    }

    #[test]
    fn single_pole_is_reproduced_off_nodes() {
        let pole = c(10.3, 0.4);
        let f = |z: Complex64| ONE / (z - pole);
        let s = sample(f, half_integers(21));
        let ra = build_rational(&s, &BuildOptions::default()).unwrap();
        for (x, v) in &s {
            assert!((ra.evaluate_real(*x).unwrap() - v).norm() <= 1e-10 * v.norm());
        }
        for z in [c(3.3, 0.7), c(15.0, -1.2), pole.conj()] {
            let want = f(z);
            assert!((ra.evaluate(z).unwrap() - want).norm() < 1e-8 * want.norm());
        }
        let poles = extract_poles(&ra);
        assert_eq!(poles.len(), 1);
        assert!((poles[0].position - pole).norm() < 1e-8);
        assert!((poles[0].residue.unwrap() - ONE).norm() < 1e-8);
    }

    #[test]
    fn conjugate_evaluation_at_pole_position() {
        let pole = c(10.3, 0.4);
        let f = |z: Complex64| ONE / (z - pole);
        let ra = build_rational(&sample(f, half_integers(21)), &BuildOptions::default()).unwrap();
        let want = f(pole.conj()).conj();
        assert!((ra.conjugate_evaluate(pole).unwrap() - want).norm() < 1e-8 * want.norm());
        let x = c(4.25, 0.0);
        assert_eq!(ra.conjugate_evaluate(x).unwrap(), ra.evaluate(x).unwrap().conj());
    }

    #[test]
    fn two_poles_with_partial_fractions() {
        let (p1, p2) = (c(2.0, 1.0), c(7.0, 3.0));
        let f = |z: Complex64| (z * z + 1.0) / ((z - p1) * (z - p2));
        let s = sample(f, half_integers(15));
        let ra = build_rational(&s, &BuildOptions::default()).unwrap();
        let poles = extract_poles(&ra);
        assert_eq!(poles.len(), 2);
        let r1 = (p1 * p1 + 1.0) / (p1 - p2);
        let r2 = (p2 * p2 + 1.0) / (p2 - p1);
        for (p, r) in [(p1, r1), (p2, r2)] {
            let found = poles.iter().find(|q| (q.position - p).norm() < 1e-8).unwrap();
            assert!((found.residue.unwrap() - r).norm() < 1e-8 * r.norm());
        }
    }

    #[test]
    fn evaluation_at_a_pole_is_refused() {
        let pole = c(5.2, 0.3);
        let ra = build_rational(&sample(|z| ONE / (z - pole), half_integers(10)), &BuildOptions::default()).unwrap();
        let exact = ra.denominator_roots()[0];
        assert!(matches!(ra.evaluate(exact), Err(Error::EvaluationAtPole(_))));
    }

    #[test]
    fn duplicate_abscissae_rejected() {
        let s = vec![(0.5, ONE), (1.5, ONE), (1.5, ONE), (2.5, ONE)];
        assert!(matches!(build_rational(&s, &BuildOptions::default()), Err(Error::DuplicateAbscissa(_))));
    }

    #[test]
    fn too_few_samples_rejected() {
        let s = vec![(0.5, ONE), (1.5, ONE), (2.5, ONE)];
        assert!(matches!(build_rational(&s, &BuildOptions::default()), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn full_fraction_has_balanced_degrees() {
        let s = sample(|z| (z * 0.3).sin() + c(0.0, 0.1) * z, half_integers(9));
        let opts = BuildOptions { truncation_tol: 0.0, max_terms: None };
        let ra = build_rational(&s, &opts).unwrap();
        assert_eq!(ra.cf_coeffs().len(), 9);
        // N = 9 nodes: ⌈8/2⌉ / ⌊8/2⌋
        assert!(ra.numerator_degree() <= 4 && ra.denominator_degree() <= 4);
        assert_eq!(ra.num_poly().coeffs.len(), 5);
        assert_eq!(ra.den_poly().coeffs.len(), 5);
    }

    #[test]
    fn fraction_and_ratio_agree_near_window() {
        let s = sample(|z| (z * 0.4).cos() * c(0.5, 0.2) + ONE / (z - c(4.0, 0.5)), half_integers(12));
        let ra = build_rational(&s, &BuildOptions { truncation_tol: 0.0, max_terms: None }).unwrap();
        for k in 0..40 {
            let z = c(-1.5 + 0.4 * k as f64, -2.0 + 0.1 * k as f64);
            let (a, b) = (ra.evaluate(z), ra.evaluate_ratio(z));
            if let (Ok(a), Ok(b)) = (a, b) {
                assert!((a - b).norm() <= 1e-8 * a.norm().max(1e-3), "{z}: {a} vs {b}");
            }
        }
    }
}
