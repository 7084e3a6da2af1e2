//! Scattering-matrix tables on an (E, J) grid and the exact partial-wave sum.
//!
//! Units are fixed throughout the crate: energies in meV, lengths in Å,
//! cross sections in Å².

mod csv;
mod kinematics;

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::csv::{load_smatrix_table, write_smatrix_csv, LoadOptions};
pub use self::kinematics::{wavevector_squared, Kinematics, HBAR2_OVER_2MU};

/// Default tolerance on |S| above unity before a warning is recorded.
pub const DEFAULT_UNITARITY_SLACK: f64 = 1e-3;

/// Initial and final (v, j, Ω) quantum numbers of a state-to-state transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransitionLabel {
    pub v: u32,
    pub j: u32,
    pub omega: u32,
    pub v_p: u32,
    pub j_p: u32,
    pub omega_p: u32,
}

impl TransitionLabel {
    pub fn new(initial: [u32; 3], fin: [u32; 3]) -> Result<Self> {
        let label = TransitionLabel {
            v: initial[0],
            j: initial[1],
            omega: initial[2],
            v_p: fin[0],
            j_p: fin[1],
            omega_p: fin[2],
        };
        label.validate()?;
        Ok(label)
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega > self.j || self.omega_p > self.j_p {
            return Err(Error::InvalidTable(format!(
                "helicity exceeds rotational quantum number in {self}"
            )));
        }
        Ok(())
    }

    /// The projection cannot exceed J, so the sum starts at max(Ω, Ω').
    pub fn j_min(&self) -> u32 {
        self.omega.max(self.omega_p)
    }
}

impl fmt::Display for TransitionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} -> {} {} {}",
            self.v, self.j, self.omega, self.v_p, self.j_p, self.omega_p
        )
    }
}

/// |S|² of a single element.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct ReactionProbability(f64);

impl ReactionProbability {
    pub fn of(s: Complex64) -> Self {
        ReactionProbability(s.norm_sqr())
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A cell whose modulus exceeds 1 + slack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitarityWarning {
    pub energy: f64,
    pub j: u32,
    pub modulus: f64,
}

impl fmt::Display for UnitarityWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "|S| = {} exceeds unity at (E={}, J={})",
            self.modulus, self.energy, self.j
        )
    }
}

/// Complex S(E, J) for one transition on a full energy × J grid.
///
/// Values are stored energy-major: row `ie` holds J = `j_min..=j_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SMatrixTable {
    pub transition: TransitionLabel,
    energies: Vec<f64>,
    j_min: u32,
    j_max: u32,
    values: Vec<Complex64>,
    pub kinematics: Kinematics,
    pub threshold_energy: Option<f64>,
    /// Generated from a model; unitarity is not checked.
    #[serde(default)]
    pub synthetic: bool,
    #[serde(default)]
    pub warnings: Vec<UnitarityWarning>,
}

impl SMatrixTable {
    /// Builds a table from energy-major values and validates every invariant.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        transition: TransitionLabel,
        energies: Vec<f64>,
        j_max: u32,
        values: Vec<Complex64>,
        kinematics: Kinematics,
        threshold_energy: Option<f64>,
        unitarity_slack: f64,
        synthetic: bool,
    ) -> Result<Self> {
        transition.validate()?;
        kinematics.validate()?;
        let j_min = transition.j_min();
        if j_max < j_min {
            return Err(Error::InvalidTable(format!(
                "J_max = {j_max} is below J_min = {j_min}"
            )));
        }
        if energies.is_empty() {
            return Err(Error::InvalidTable("no energies".into()));
        }
        if let Some(e) = energies.iter().find(|e| !e.is_finite()) {
            return Err(Error::InvalidTable(format!("non-finite energy {e}")));
        }
        if energies.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidTable(
                "energies must be strictly increasing".into(),
            ));
        }
        let n_j = (j_max - j_min + 1) as usize;
        if values.len() != energies.len() * n_j {
            return Err(Error::InvalidTable(format!(
                "expected {} values, got {}",
                energies.len() * n_j,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::InvalidTable(format!(
                "non-finite S at (E={}, J={})",
                energies[pos / n_j],
                j_min as usize + pos % n_j
            )));
        }
        if let Kinematics::Explicit { .. } = &kinematics {
            if let Some(&e) = energies.iter().find(|&&e| kinematics.explicit_k(e).is_none()) {
                return Err(Error::InvalidTable(format!(
                    "no wavevector given for E = {e}"
                )));
            }
        }
        let mut table = SMatrixTable {
            transition,
            energies,
            j_min,
            j_max,
            values,
            kinematics,
            threshold_energy,
            synthetic,
            warnings: Vec::new(),
        };
        if !synthetic {
            table.warnings = table.unitarity_violations(unitarity_slack);
        }
        Ok(table)
    }

    fn unitarity_violations(&self, slack: f64) -> Vec<UnitarityWarning> {
        let n_j = self.n_j();
        self.values
            .iter()
            .enumerate()
            .filter(|(_, s)| s.norm() > 1.0 + slack)
            .map(|(pos, s)| UnitarityWarning {
                energy: self.energies[pos / n_j],
                j: self.j_min + (pos % n_j) as u32,
                modulus: s.norm(),
            })
            .collect()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn j_min(&self) -> u32 {
        self.j_min
    }

    pub fn j_max(&self) -> u32 {
        self.j_max
    }

    pub fn j_values(&self) -> impl Iterator<Item = u32> + '_ {
        self.j_min..=self.j_max
    }

    pub fn n_j(&self) -> usize {
        (self.j_max - self.j_min + 1) as usize
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// S at grid indices (energy index, J − J_min).
    pub fn s(&self, ie: usize, ij: usize) -> Complex64 {
        self.values[ie * self.n_j() + ij]
    }

    /// All J values at one energy.
    pub fn row(&self, ie: usize) -> &[Complex64] {
        let n_j = self.n_j();
        &self.values[ie * n_j..(ie + 1) * n_j]
    }

    /// All energies at one J.
    pub fn column(&self, ij: usize) -> Vec<Complex64> {
        (0..self.energies.len()).map(|ie| self.s(ie, ij)).collect()
    }

    pub fn probability(&self, ie: usize, ij: usize) -> ReactionProbability {
        ReactionProbability::of(self.s(ie, ij))
    }

    /// Index of a grid energy, matching to 1e-9 meV.
    pub fn energy_index(&self, energy: f64) -> Option<usize> {
        let i = self.energies.partition_point(|&e| e < energy - 1e-9);
        (i < self.energies.len() && (self.energies[i] - energy).abs() <= 1e-9).then_some(i)
    }

    /// k² at a grid energy, honoring the channel threshold.
    pub fn wavevector_squared_at(&self, ie: usize) -> Result<f64> {
        let energy = self.energies[ie];
        if let Some(threshold) = self.threshold_energy {
            if energy < threshold {
                return Err(Error::ChannelClosed { energy, threshold });
            }
        }
        wavevector_squared(&self.kinematics, energy)
    }

    /// Samples (λ = J + 1/2, S) at one energy.
    pub fn lambda_samples(&self, ie: usize) -> Vec<(f64, Complex64)> {
        self.j_values()
            .zip(self.row(ie))
            .map(|(j, &s)| (j as f64 + 0.5, s))
            .collect()
    }

    /// Samples (E, S) at fixed J.
    pub fn energy_samples(&self, ij: usize) -> Vec<(f64, Complex64)> {
        self.energies
            .iter()
            .copied()
            .zip(self.column(ij))
            .collect()
    }
}

/// Integral cross section (Å²) at a grid energy from the partial-wave sum
/// σ = (2π/k²) Σ_J (J + 1/2)|S(E, J)|², summed in ascending J.
pub fn pws_ics(table: &SMatrixTable, energy: f64) -> Result<f64> {
    let ie = table
        .energy_index(energy)
        .ok_or(Error::NotGridEnergy(energy))?;
    pws_ics_at(table, ie)
}

/// As [`pws_ics`], addressed by grid index.
pub fn pws_ics_at(table: &SMatrixTable, ie: usize) -> Result<f64> {
    let k2 = table.wavevector_squared_at(ie)?;
    let mut sum = 0.0;
    for (j, s) in table.j_values().zip(table.row(ie)) {
        sum += (j as f64 + 0.5) * s.norm_sqr();
    }
    Ok(2.0 * PI / k2 * sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_kin() -> Kinematics {
        Kinematics::reduced_mass(1.0).unwrap()
    }

    fn table(omega: u32, omega_p: u32, j_max: u32, energies: Vec<f64>, f: impl Fn(f64, u32) -> Complex64) -> SMatrixTable {
        let tr = TransitionLabel::new([0, omega.max(0) + 2, omega], [3, omega_p + 2, omega_p]).unwrap();
        let mut values = Vec::new();
        for &e in &energies {
            for j in tr.j_min()..=j_max {
                values.push(f(e, j));
            }
        }
        SMatrixTable::new(tr, energies, j_max, values, unit_kin(), None, DEFAULT_UNITARITY_SLACK, false).unwrap()
    }

    #[test]
    fn zero_matrix_has_zero_cross_section() {
        let t = table(0, 0, 10, vec![1.0, 2.0], |_, _| Complex64::new(0.0, 0.0));
        assert_eq!(pws_ics(&t, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn single_term_sum() {
        let t = table(0, 0, 0, vec![HBAR2_OVER_2MU], |_, _| Complex64::new(0.0, 1.0));
        let sigma = pws_ics(&t, HBAR2_OVER_2MU).unwrap();
        assert!((sigma - PI).abs() < 1e-14);
    }

    #[test]
    fn exponential_profile_matches_direct_sum() {
        let e = HBAR2_OVER_2MU;
        let t = table(0, 0, 60, vec![e], |_, j| Complex64::new((-(j as f64) / 10.0).exp(), 0.0));
        // independent direct summation in descending order
        let direct: f64 = (0..=60).rev().map(|j| (j as f64 + 0.5) * (-(j as f64) / 5.0).exp()).sum::<f64>()
            * 2.0
            * PI;
        let sigma = pws_ics(&t, e).unwrap();
        assert!(((sigma - direct) / direct).abs() < 1e-13);
    }

    #[test]
    fn sum_starts_at_largest_helicity() {
        let t = table(0, 2, 5, vec![1.0], |_, _| Complex64::new(0.5, 0.0));
        assert_eq!(t.j_min(), 2);
        assert_eq!(t.j_values().next(), Some(2));
        let k2 = wavevector_squared(&t.kinematics, 1.0).unwrap();
        let expected = 2.0 * PI / k2 * (2..=5).map(|j| (j as f64 + 0.5) * 0.25).sum::<f64>();
        assert!((pws_ics(&t, 1.0).unwrap() - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn closed_channel_errors() {
        let mut t = table(0, 0, 3, vec![60.0, 62.72, 65.0], |_, _| Complex64::new(0.1, 0.0));
        t.threshold_energy = Some(62.72);
        assert!(matches!(pws_ics(&t, 60.0), Err(Error::ChannelClosed { .. })));
        assert!(pws_ics(&t, 62.72).is_ok());
        assert!(pws_ics(&t, 65.0).is_ok());
        assert!(matches!(pws_ics(&t, 61.0), Err(Error::NotGridEnergy(_))));
    }

    #[test]
    fn appended_zero_partial_waves_are_bit_identical() {
        let f = |e: f64, j: u32| Complex64::new((e * 0.1 + j as f64).sin() * 0.5, 0.2);
        let short = table(0, 0, 20, vec![1.0, 2.0], f);
        let long = table(0, 0, 40, vec![1.0, 2.0], |e, j| if j <= 20 { f(e, j) } else { Complex64::new(0.0, 0.0) });
        for e in [1.0, 2.0] {
            assert_eq!(pws_ics(&short, e).unwrap().to_bits(), pws_ics(&long, e).unwrap().to_bits());
        }
    }

    #[test]
    fn unitarity_overshoot_is_a_warning() {
        let t = table(0, 0, 3, vec![1.0], |_, j| Complex64::new(if j == 1 { 1.5 } else { 0.3 }, 0.0));
        assert_eq!(t.warnings.len(), 1);
        assert_eq!(t.warnings[0].j, 1);
    }

    #[test]
    fn helicity_above_rotation_is_invalid() {
        assert!(TransitionLabel::new([0, 0, 1], [3, 0, 0]).is_err());
    }
}
