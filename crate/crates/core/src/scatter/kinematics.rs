use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ħ²/(2 m_u) in meV·Å², from CODATA 2018 values of ħ, m_u and e.
pub const HBAR2_OVER_2MU: f64 = 2.090_079_640_248_361_2;

/// How the reactant wavevector is obtained at each collision energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Kinematics {
    /// k² = μE/(ħ²/2m_u) with μ in unified atomic mass units.
    ReducedMass { mu_amu: f64 },
    /// Per-energy wavevector in Å⁻¹, as `(E_meV, k)` pairs sorted by energy.
    Explicit { k_of_e: Vec<(f64, f64)> },
}

impl Kinematics {
    pub fn reduced_mass(mu_amu: f64) -> Result<Self> {
        let kin = Kinematics::ReducedMass { mu_amu };
        kin.validate()?;
        Ok(kin)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Kinematics::ReducedMass { mu_amu } => {
                if !(mu_amu.is_finite() && *mu_amu > 0.0) {
                    return Err(Error::InvalidTable(format!(
                        "reduced mass must be positive, got {mu_amu}"
                    )));
                }
            }
            Kinematics::Explicit { k_of_e } => {
                if let Some(&(e, k)) = k_of_e.iter().find(|(_, k)| !(k.is_finite() && *k > 0.0)) {
                    return Err(Error::InvalidTable(format!(
                        "wavevector must be positive, got k = {k} at E = {e}"
                    )));
                }
                if k_of_e.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err(Error::InvalidTable(
                        "explicit wavevector table must be sorted by energy".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Wavevector lookup for explicit tables; `None` in reduced-mass mode.
    pub fn explicit_k(&self, energy: f64) -> Option<f64> {
        match self {
            Kinematics::ReducedMass { .. } => None,
            Kinematics::Explicit { k_of_e } => k_of_e
                .binary_search_by(|(e, _)| e.total_cmp(&energy))
                .ok()
                .map(|i| k_of_e[i].1),
        }
    }
}

/// Squared reactant wavevector (Å⁻²) at collision energy `energy` (meV).
pub fn wavevector_squared(kin: &Kinematics, energy: f64) -> Result<f64> {
    if !(energy > 0.0) {
        return Err(Error::NonPositiveEnergy(energy));
    }
    match kin {
        Kinematics::ReducedMass { mu_amu } => Ok(mu_amu * energy / HBAR2_OVER_2MU),
        Kinematics::Explicit { .. } => kin
            .explicit_k(energy)
            .map(|k| k * k)
            .ok_or(Error::NotGridEnergy(energy)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_mode_is_passthrough() {
        let kin = Kinematics::Explicit {
            k_of_e: vec![(10.0, 1.5), (20.0, 2.0)],
        };
        assert_eq!(wavevector_squared(&kin, 20.0).unwrap(), 4.0);
        assert!(matches!(
            wavevector_squared(&kin, 15.0),
            Err(Error::NotGridEnergy(_))
        ));
    }

    #[test]
    fn unit_mass_at_reference_energy() {
        let kin = Kinematics::reduced_mass(1.0).unwrap();
        let k2 = wavevector_squared(&kin, HBAR2_OVER_2MU).unwrap();
        assert!((k2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_matches_codata_evaluation() {
        // ħ = 1.054571817e-34 J s, m_u = 1.66053906660e-27 kg, e = 1.602176634e-19 C
        let hbar = 1.054_571_817e-34_f64;
        let m_u = 1.660_539_066_60e-27_f64;
        let ev = 1.602_176_634e-19_f64;
        let c = hbar * hbar / (2.0 * m_u) / ev * 1e3 * 1e20;
        assert!((c - HBAR2_OVER_2MU).abs() < 1e-14 * c);
    }

    #[test]
    fn f_plus_hd_reduced_mass() {
        // μ = 19·3/22 u at 100 meV; hand value 2.5909091/2.0900796 × 100 = 123.96222
        let mu = 19.0 * 3.0 / 22.0;
        let kin = Kinematics::reduced_mass(mu).unwrap();
        let k2 = wavevector_squared(&kin, 100.0).unwrap();
        assert!((k2 - 123.962_218_521).abs() < 1e-8, "{k2}");
    }

    #[test]
    fn non_positive_energy_is_rejected() {
        let kin = Kinematics::reduced_mass(1.0).unwrap();
        assert!(matches!(
            wavevector_squared(&kin, 0.0),
            Err(Error::NonPositiveEnergy(_))
        ));
        assert!(Kinematics::reduced_mass(-1.0).is_err());
    }
}
