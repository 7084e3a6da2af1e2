//! Synthetic S-matrix tables with analytically known poles.
//!
//! S(E, λ) = B(E, λ) + Σ_n ρ_n(E) / (λ − λ_n(E)) with a polynomial
//! background B of degree ≤ 4 in λ. These models are the reference oracle
//! for the continuation, tracking and decomposition code.
//!
//! Model files are JSON:
//!
//! ```json
//! {
//!   "transition": {"v":0,"j":0,"omega":0,"v_p":3,"j_p":0,"omega_p":0},
//!   "kinematics": {"mode":"reduced_mass","mu_amu":2.5909},
//!   "energies": {"start":60.0,"stop":65.0,"step":0.1},
//!   "j_max": 30,
//!   "background": {"e_ref":60.0,"coeffs":[[[0.3,0.1]]]},
//!   "poles": [{
//!     "path": {"kind":"polynomial","e_ref":60.0,"coeffs":[[5.0,0.2],[1.0,0.0]]},
//!     "residue": {"kind":"polynomial","e_ref":60.0,"coeffs":[[0.05,0.0]]}
//!   }]
//! }
//! ```
//!
//! Complex numbers are `[re, im]`. `background.coeffs[k][m]` multiplies
//! λ^k (E − e_ref)^m. Pole paths are `polynomial` (λ as a polynomial in
//! E − e_ref), `j_shifting` (J(J+1) = 2I(E − E0 + i/τ), λ = J + 1/2) or
//! `table`. Residues are `polynomial`, `reciprocal` (ρ = c/(2λ_n)) or
//! `table`. A pole with `"mirror": true` also carries the partner −ρ_n at
//! −λ_n, so the pair reads 2λ_nρ_n/(λ² − λ_n²).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pade::{ComplexPole, PoleQuality};
use crate::scatter::{wavevector_squared, Kinematics, SMatrixTable, TransitionLabel};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Collision energies of a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnergyGrid {
    Range { start: f64, stop: f64, step: f64 },
    List(Vec<f64>),
}

impl EnergyGrid {
    /// Grid points, rounded to 1e-9 meV so decimal steps print cleanly.
    pub fn points(&self) -> Result<Vec<f64>> {
        match self {
            EnergyGrid::List(v) => Ok(v.clone()),
            EnergyGrid::Range { start, stop, step } => {
                if !(*step > 0.0) || stop < start {
                    return Err(Error::InvalidModel(format!(
                        "bad energy range {start}..{stop} step {step}"
                    )));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
                Ok((0..n)
                    .map(|i| ((start + step * i as f64) * 1e9).round() / 1e9)
                    .collect())
            }
        }
    }
}

/// Σ_m c_m (E − e_ref)^m
fn energy_poly(coeffs: &[Complex64], e_ref: f64, energy: f64) -> Complex64 {
    let x = energy - e_ref;
    coeffs.iter().rev().fold(ZERO, |acc, &c| acc * x + c)
}

fn table_lookup(energies: &[f64], values: &[Complex64], energy: f64) -> Result<Complex64> {
    energies
        .iter()
        .position(|&e| (e - energy).abs() <= 1e-9)
        .and_then(|i| values.get(i).copied())
        .ok_or_else(|| Error::InvalidModel(format!("no tabulated value at E = {energy}")))
}

/// Polynomial background in λ with energy-dependent coefficients.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Background {
    #[serde(default)]
    pub e_ref: f64,
    /// `coeffs[k][m]` multiplies λ^k (E − e_ref)^m.
    #[serde(default)]
    pub coeffs: Vec<Vec<Complex64>>,
}

impl Background {
    pub fn constant(c: Complex64) -> Self {
        Background {
            e_ref: 0.0,
            coeffs: vec![vec![c]],
        }
    }

    pub fn eval(&self, energy: f64, lambda: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(ZERO, |acc, ck| acc * lambda + energy_poly(ck, self.e_ref, energy))
    }
}

/// λ_n as a function of energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolePath {
    Polynomial { e_ref: f64, coeffs: Vec<Complex64> },
    /// Rigid-rotor path J(J+1) = 2I(E − E0 + i/τ), I in 1/meV, τ in ħ/meV.
    JShifting { inertia: f64, e0: f64, tau: f64 },
    Table { energies: Vec<f64>, lambda: Vec<Complex64> },
}

impl PolePath {
    pub fn lambda(&self, energy: f64) -> Result<Complex64> {
        match self {
            PolePath::Polynomial { e_ref, coeffs } => Ok(energy_poly(coeffs, *e_ref, energy)),
            PolePath::JShifting { inertia, e0, tau } => {
                let big_lambda = 2.0 * inertia * Complex64::new(energy - e0, 1.0 / tau);
                // principal root: Re λ ≥ 0 and Im λ > 0 since Im Λ > 0
                Ok((big_lambda + 0.25).sqrt())
            }
            PolePath::Table { energies, lambda } => table_lookup(energies, lambda, energy),
        }
    }
}

/// ρ_n as a function of energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResiduePath {
    Polynomial { e_ref: f64, coeffs: Vec<Complex64> },
    /// ρ = c / (2λ_n); with `mirror` this makes the pair c/(λ² − λ_n²).
    Reciprocal { c: Complex64 },
    Table { energies: Vec<f64>, values: Vec<Complex64> },
}

impl ResiduePath {
    pub fn constant(c: Complex64) -> Self {
        ResiduePath::Polynomial {
            e_ref: 0.0,
            coeffs: vec![c],
        }
    }

    pub fn residue(&self, energy: f64, lambda: Complex64) -> Result<Complex64> {
        match self {
            ResiduePath::Polynomial { e_ref, coeffs } => Ok(energy_poly(coeffs, *e_ref, energy)),
            ResiduePath::Reciprocal { c } => Ok(c / (2.0 * lambda)),
            ResiduePath::Table { energies, values } => table_lookup(energies, values, energy),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleTerm {
    #[serde(default)]
    pub label: Option<String>,
    pub path: PolePath,
    pub residue: ResiduePath,
    #[serde(default)]
    pub mirror: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleModelSpec {
    pub transition: TransitionLabel,
    pub kinematics: Kinematics,
    #[serde(default)]
    pub threshold_mev: Option<f64>,
    pub energies: EnergyGrid,
    pub j_max: u32,
    #[serde(default)]
    pub background: Background,
    #[serde(default)]
    pub poles: Vec<PoleTerm>,
}

/// Smallest allowed distance between a pole and a real node λ = J + 1/2.
pub const NODE_CLEARANCE: f64 = 1e-3;

impl PoleModelSpec {
    /// Closed-form S(E, λ) at any complex λ.
    pub fn s_exact(&self, energy: f64, lambda: Complex64) -> Result<Complex64> {
        let mut s = self.background.eval(energy, lambda);
        for term in &self.poles {
            let ln = term.path.lambda(energy)?;
            let rho = term.residue.residue(energy, ln)?;
            s += rho / (lambda - ln);
            if term.mirror {
                s -= rho / (lambda + ln);
            }
        }
        Ok(s)
    }

    /// Checks the model invariants on its own grid.
    pub fn validate(&self) -> Result<Vec<f64>> {
        self.transition.validate()?;
        self.kinematics.validate()?;
        if self.background.coeffs.len() > 5 {
            return Err(Error::InvalidModel(format!(
                "background degree {} exceeds 4",
                self.background.coeffs.len() - 1
            )));
        }
        if self.j_max < self.transition.j_min() {
            return Err(Error::InvalidModel(format!(
                "j_max = {} is below J_min = {}",
                self.j_max,
                self.transition.j_min()
            )));
        }
        let energies = self.energies.points()?;
        for &energy in &energies {
            for (n, term) in self.poles.iter().enumerate() {
                let ln = term.path.lambda(energy)?;
                if !(ln.im > 0.0 && ln.im < 6.0) {
                    return Err(Error::InvalidModel(format!(
                        "pole {n} has Im lambda = {} at E = {energy}, outside (0, 6)",
                        ln.im
                    )));
                }
                for j in self.transition.j_min()..=self.j_max {
                    let node = j as f64 + 0.5;
                    let mut distance = (ln - node).norm();
                    if term.mirror {
                        distance = distance.min((ln + node).norm());
                    }
                    if distance < NODE_CLEARANCE {
                        return Err(Error::PoleNodeCollision {
                            pole: n,
                            energy,
                            node,
                            distance,
                        });
                    }
                }
            }
        }
        Ok(energies)
    }
}

/// Samples the model on its (E, J) grid.
pub fn generate_table(spec: &PoleModelSpec) -> Result<SMatrixTable> {
    let energies = spec.validate()?;
    let j_min = spec.transition.j_min();
    let mut values = Vec::with_capacity(energies.len() * (spec.j_max - j_min + 1) as usize);
    for &energy in &energies {
        for j in j_min..=spec.j_max {
            values.push(spec.s_exact(energy, Complex64::new(j as f64 + 0.5, 0.0))?);
        }
    }
    SMatrixTable::new(
        spec.transition,
        energies,
        spec.j_max,
        values,
        spec.kinematics.clone(),
        spec.threshold_mev,
        crate::scatter::DEFAULT_UNITARITY_SLACK,
        true,
    )
}

/// The model's own poles (λ_n, ρ_n) at `energy`; mirror partners are omitted.
pub fn exact_poles(spec: &PoleModelSpec, energy: f64) -> Result<Vec<ComplexPole>> {
    spec.poles
        .iter()
        .map(|term| {
            let ln = term.path.lambda(energy)?;
            Ok(ComplexPole {
                position: ln,
                residue: Some(term.residue.residue(energy, ln)?),
                multiplicity: 1,
                quality: PoleQuality {
                    pole_zero_distance: f64::INFINITY,
                    stability: Some(1.0),
                    unpolished: false,
                },
            })
        })
        .collect()
}

/// Cross section from the closed form: (π/k²) Σ_J (2J + 1)|S|², summed from
/// J_max down.
pub fn exact_ics(spec: &PoleModelSpec, energy: f64) -> Result<f64> {
    let k2 = wavevector_squared(&spec.kinematics, energy)?;
    let mut acc = 0.0;
    for j in (spec.transition.j_min()..=spec.j_max).rev() {
        let s = spec.s_exact(energy, Complex64::new(j as f64 + 0.5, 0.0))?;
        acc += (2 * j + 1) as f64 * (s.re * s.re + s.im * s.im);
    }
    Ok(PI * acc / k2)
}
