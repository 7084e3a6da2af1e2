//! Local linear map E = AΛ + B between complex energy and Λ = J(J + 1),
//! and the rigid-rotor (J-shifting) parameters it implies.

use std::ops::RangeInclusive;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::CETrajectory;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearCEMap {
    /// meV per unit Λ.
    pub a: Complex64,
    /// meV.
    pub b: Complex64,
    /// Smallest and largest J used in the fit.
    pub j_window: (u32, u32),
    /// Λ range spanned by the fit.
    pub lambda_window: (f64, f64),
    /// Root-mean-square |E − (AΛ + B)| over the fitted points, meV.
    pub fit_residual: f64,
}

/// How Λ is turned into J.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inversion {
    /// J = −1/2 + sqrt(Λ + 1/4)
    #[default]
    Exact,
    /// J = sqrt(Λ)
    LargeJ,
}

pub fn big_lambda(j: f64) -> f64 {
    j * (j + 1.0)
}

/// Least-squares fit of E_pole(Λ) = AΛ + B over the entries with J in
/// `j_window` (all entries when `None`).
pub fn fit_linear_ce(ce: &CETrajectory, j_window: Option<RangeInclusive<u32>>) -> Result<LinearCEMap> {
    let points: Vec<(u32, f64, Complex64)> = ce
        .entries
        .iter()
        .filter(|e| j_window.as_ref().map_or(true, |w| w.contains(&e.j)))
        .map(|e| (e.j, big_lambda(e.j as f64), e.energy))
        .collect();
    if points.len() < 3 {
        return Err(Error::TooFewSamples { need: 3, got: points.len() });
    }
    let n = points.len() as f64;
    let l_mean = points.iter().map(|p| p.1).sum::<f64>() / n;
    let e_mean = points.iter().map(|p| p.2).sum::<Complex64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.1 - l_mean).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::RankDeficient("all Lambda values are equal".into()));
    }
    let sxy: Complex64 = points.iter().map(|p| (p.2 - e_mean) * (p.1 - l_mean)).sum();
    let a = sxy / sxx;
    let b = e_mean - a * l_mean;
    let fit_residual = (points.iter().map(|p| (p.2 - a * p.1 - b).norm_sqr()).sum::<f64>() / n).sqrt();
    let j_lo = points.iter().map(|p| p.0).min().unwrap_or(0);
    let j_hi = points.iter().map(|p| p.0).max().unwrap_or(0);
    Ok(LinearCEMap {
        a,
        b,
        j_window: (j_lo, j_hi),
        lambda_window: (big_lambda(j_lo as f64), big_lambda(j_hi as f64)),
        fit_residual,
    })
}

impl LinearCEMap {
    pub fn new(a: Complex64, b: Complex64) -> Self {
        LinearCEMap {
            a,
            b,
            j_window: (0, 0),
            lambda_window: (0.0, 0.0),
            fit_residual: 0.0,
        }
    }

    /// Λ at a real energy: (E − B)/A.
    pub fn lambda_at(&self, energy: f64) -> Result<Complex64> {
        if !(self.a.norm_sqr() > 0.0) {
            return Err(Error::DegenerateData("map with A = 0 is not invertible".into()));
        }
        Ok((Complex64::new(energy, 0.0) - self.b) / self.a)
    }
}

/// Complex J predicted by the map at a real energy.
pub fn ce_to_regge(map: &LinearCEMap, energy: f64, inversion: Inversion) -> Result<Complex64> {
    let lam = map.lambda_at(energy)?;
    match inversion {
        Inversion::Exact => {
            let w = lam + 0.25;
            if w.im == 0.0 && w.re < 0.0 {
                return Err(Error::BranchCut(w));
            }
            Ok(w.sqrt() - 0.5)
        }
        Inversion::LargeJ => {
            if lam.im == 0.0 && lam.re < 0.0 {
                return Err(Error::BranchCut(lam));
            }
            Ok(lam.sqrt())
        }
    }
}

/// Complex energy the map assigns to a real J.
pub fn regge_to_ce(map: &LinearCEMap, j: f64) -> Complex64 {
    map.a * big_lambda(j) + map.b
}

pub const DEFAULT_A2_TOL: f64 = 0.1;

/// Rigid-rotor description E ≈ J²/2I + E0 − i/τ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JShiftingParams {
    /// Moment of inertia, 1/meV (ħ = 1).
    pub inertia: f64,
    /// meV.
    pub e0: f64,
    /// Lifetime, ħ/meV.
    pub tau: f64,
}

pub fn j_shifting_params(map: &LinearCEMap, a2_tol: f64) -> Result<JShiftingParams> {
    let (a1, a2) = (map.a.re, map.a.im);
    if !(a1 > 0.0) {
        return Err(Error::UnphysicalInertia(a1));
    }
    if !(map.b.im < 0.0) {
        return Err(Error::GrowingState(map.b.im));
    }
    if a2.abs() > a2_tol * a1 {
        return Err(Error::RotatingWidth { a1, a2, tol: a2_tol });
    }
    Ok(JShiftingParams {
        inertia: 1.0 / (2.0 * a1),
        e0: map.b.re,
        tau: -1.0 / map.b.im,
    })
}

impl JShiftingParams {
    /// (Λ₁, Λ₂) = (2I(E − E0), 2I/τ).
    pub fn lambda_parts(&self, energy: f64) -> (f64, f64) {
        (2.0 * self.inertia * (energy - self.e0), 2.0 * self.inertia / self.tau)
    }

    /// (J₁, J₂) with J₁ = sqrt(2I(E − E0)) and J₂ = I/(τJ₁); `None` below E0.
    pub fn j_parts(&self, energy: f64) -> Option<(f64, f64)> {
        let (l1, _) = self.lambda_parts(energy);
        (l1 > 0.0).then(|| {
            let j1 = l1.sqrt();
            (j1, self.inertia / (self.tau * j1))
        })
    }

    /// Angular velocity of the complex, J₁/I.
    pub fn omega(&self, j1: f64) -> f64 {
        j1 / self.inertia
    }

    /// Mean rotation angle before decay, ωτ = 1/J₂.
    pub fn phi_life(&self, j1: f64) -> f64 {
        self.omega(j1) * self.tau
    }
}

/// JSON document describing a fitted map and, when available, its
/// J-shifting parameters.
pub fn map_json(map: &LinearCEMap, params: Option<&JShiftingParams>) -> serde_json::Value {
    let mut doc = serde_json::json!({
        "A": {"re": map.a.re, "im": map.a.im, "unit": "meV"},
        "B": {"re": map.b.re, "im": map.b.im, "unit": "meV"},
        "window": {
            "J_min": map.j_window.0,
            "J_max": map.j_window.1,
            "Lambda_min": map.lambda_window.0,
            "Lambda_max": map.lambda_window.1,
        },
        "fit_residual": {"value": map.fit_residual, "unit": "meV"},
    });
    if let Some(p) = params {
        doc["j_shifting"] = serde_json::json!({
            "I": {"value": p.inertia, "unit": "1/meV"},
            "E0": {"value": p.e0, "unit": "meV"},
            "tau": {"value": p.tau, "unit": "hbar/meV"},
        });
    }
    doc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::CEEntry;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn linear_ce(a: Complex64, b: Complex64, js: RangeInclusive<u32>) -> CETrajectory {
        CETrajectory {
            label: "A".into(),
            entries: js
                .map(|j| CEEntry { j, energy: a * big_lambda(j as f64) + b, residue: c(0.1, 0.0) })
                .collect(),
        }
    }

    #[test]
    fn exact_linear_recovery() {
        let (a, b) = (c(0.5, 0.01), c(600.0, -5.0));
        let map = fit_linear_ce(&linear_ce(a, b, 0..=40), Some(17..=27)).unwrap();
        assert!((map.a - a).norm() < 1e-12 && (map.b - b).norm() < 1e-12);
        assert_eq!(map.lambda_window, (306.0, 756.0));
        assert!(map.fit_residual < 1e-10);
    }

    #[test]
    fn noisy_fit() {
        let (a, b) = (c(0.5, 0.01), c(600.0, -5.0));
        let mut ce = linear_ce(a, b, 0..=40);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for e in &mut ce.entries {
            e.energy += c(rng.gen_range(-1e-4..1e-4), rng.gen_range(-1e-4..1e-4));
        }
        let map = fit_linear_ce(&ce, None).unwrap();
        assert!((map.a - a).norm() < 1e-3 && (map.b - b).norm() < 1e-3);
        assert!(map.fit_residual > 1e-5 && map.fit_residual < 2e-4);
    }

    #[test]
    fn degenerate_fits() {
        let ce = linear_ce(c(1.0, 0.0), c(0.0, 0.0), 3..=4);
        assert!(matches!(fit_linear_ce(&ce, None), Err(Error::TooFewSamples { .. })));
        let mut ce = linear_ce(c(1.0, 0.0), c(0.0, 0.0), 3..=5);
        ce.entries.iter_mut().for_each(|e| e.j = 4);
        assert!(matches!(fit_linear_ce(&ce, None), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn identity_map() {
        let map = LinearCEMap::new(c(1.0, 0.0), c(0.0, 0.0));
        let j = ce_to_regge(&map, 12.0, Inversion::Exact).unwrap();
        assert!((j - c(-0.5 + 12.25f64.sqrt(), 0.0)).norm() < 1e-15);
        assert_eq!(regge_to_ce(&map, 0.0), c(0.0, 0.0));
        assert!(matches!(ce_to_regge(&map, -1.0, Inversion::Exact), Err(Error::BranchCut(_))));
        assert!((ce_to_regge(&map, 16.0, Inversion::LargeJ).unwrap() - 4.0).norm() < 1e-15);
    }

    #[test]
    fn round_trip() {
        let map = LinearCEMap::new(c(0.01, 0.000_01), c(60.0, -0.1));
        assert_eq!(regge_to_ce(&LinearCEMap::new(c(0.3, 0.0), c(1.0, 0.0)), 2.0), c(2.8, 0.0));
        for e in [60.5, 61.0, 63.0, 70.0] {
            let j = ce_to_regge(&map, e, Inversion::Exact).unwrap();
            assert!(j.re >= -0.5 && j.im >= 0.0);
            let back = map.a * (j * (j + 1.0)) + map.b;
            assert!((back - e).norm() < 1e-10);
        }
    }

    #[test]
    fn j_shifting_arithmetic() {
        let map = LinearCEMap::new(c(0.5, 0.0), c(600.0, -5.0));
        let p = j_shifting_params(&map, DEFAULT_A2_TOL).unwrap();
        assert!((p.inertia - 1.0).abs() < 1e-15 && p.e0 == 600.0 && (p.tau - 0.2).abs() < 1e-15);
        assert!((p.omega(10.0) - 10.0).abs() < 1e-15);
        assert!((p.phi_life(10.0) - 2.0).abs() < 1e-15);
        let (j1, j2) = p.j_parts(650.0).unwrap();
        assert!((1.0 / j2 - p.phi_life(j1)).abs() < 1e-12);
    }

    #[test]
    fn j_shifting_reproduces_lambda_parts() {
        let map = LinearCEMap::new(c(0.01, 0.0), c(60.0, -0.1));
        let p = j_shifting_params(&map, DEFAULT_A2_TOL).unwrap();
        for e in [60.5, 62.0, 65.0] {
            let lam = map.lambda_at(e).unwrap();
            let (l1, l2) = p.lambda_parts(e);
            assert!((lam.re - l1).abs() < 1e-10 && (lam.im - l2).abs() < 1e-10);
        }
    }

    #[test]
    fn j_shifting_errors() {
        let bad = |a: Complex64, b: Complex64| j_shifting_params(&LinearCEMap::new(a, b), DEFAULT_A2_TOL);
        assert!(matches!(bad(c(-0.5, 0.0), c(600.0, -5.0)), Err(Error::UnphysicalInertia(_))));
        assert!(matches!(bad(c(0.5, 0.0), c(600.0, 5.0)), Err(Error::GrowingState(_))));
        assert!(matches!(bad(c(0.5, 0.2), c(600.0, -5.0)), Err(Error::RotatingWidth { .. })));
    }

    #[test]
    fn invariant_under_points_on_the_line() {
        let (a, b) = (c(0.01, 0.0), c(60.0, -0.1));
        let p1 = j_shifting_params(&fit_linear_ce(&linear_ce(a, b, 17..=27), None).unwrap(), 0.1).unwrap();
        let p2 = j_shifting_params(&fit_linear_ce(&linear_ce(a, b, 10..=35), None).unwrap(), 0.1).unwrap();
        assert!((p1.inertia - p2.inertia).abs() < 1e-9 * p1.inertia);
        assert!((p1.tau - p2.tau).abs() < 1e-9 * p1.tau);
    }

    #[test]
    fn json_has_units() {
        let map = LinearCEMap::new(c(0.5, 0.0), c(600.0, -5.0));
        let p = j_shifting_params(&map, 0.1).unwrap();
        let doc = map_json(&map, Some(&p));
        assert_eq!(doc["j_shifting"]["I"]["unit"], "1/meV");
        assert_eq!(doc["B"]["im"], -5.0);
    }
}
