//! Removal of spurious poles and windowed pole searches.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{extract_poles, Axis, BuildOptions, ComplexPole, RationalApproximant};
use crate::error::{Error, Result};
use crate::scatter::SMatrixTable;

/// Thresholds deciding which poles are physical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterPolicy {
    /// Minimum distance from the nearest numerator root (Froissart doublets).
    pub eps_froissart: f64,
    pub residue_floor: f64,
    /// Radius within which a leave-one-out refit pole counts as the same pole.
    pub match_radius: f64,
    /// Fraction of leave-one-out refits that must reproduce the pole.
    pub stability_fraction: f64,
    /// Largest Im λ kept on the angular-momentum axis; deeper poles are
    /// quenched by exp(−2π Im λ).
    pub im_max: f64,
    /// Poles whose real part lies further than this outside the node window are dropped.
    pub window_margin: f64,
    /// Largest |Im E| kept on the energy axis.
    pub max_width: Option<f64>,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterPolicy {
            eps_froissart: 1e-3,
            residue_floor: 1e-8,
            match_radius: 0.1,
            stability_fraction: 0.8,
            im_max: 3.0,
            window_margin: 2.0,
            max_width: None,
        }
    }
}

/// A moving window of `size` consecutive nodes advanced by `stride`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeWindow {
    pub size: usize,
    pub stride: usize,
}

/// Everything needed to go from samples to filtered poles.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PadePolicy {
    pub build: BuildOptions,
    pub filter: FilterPolicy,
    pub window: Option<NodeWindow>,
}

impl PadePolicy {
    pub fn validate(&self) -> Result<()> {
        let f = &self.filter;
        let positive = [
            ("eps_froissart", f.eps_froissart),
            ("residue_floor", f.residue_floor),
            ("match_radius", f.match_radius),
            ("stability_fraction", f.stability_fraction),
            ("im_max", f.im_max),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
        }
        if f.stability_fraction > 1.0 {
            return Err(Error::InvalidConfig("stability_fraction must not exceed 1".into()));
        }
        if !(f.window_margin >= 0.0) || !(self.build.truncation_tol >= 0.0) {
            return Err(Error::InvalidConfig(
                "window_margin and truncation_tol must be non-negative".into(),
            ));
        }
        if let Some(w) = self.window {
            if w.size < super::MIN_SAMPLES || w.stride == 0 {
                return Err(Error::InvalidConfig(format!(
                    "node window needs size >= {} and stride >= 1",
                    super::MIN_SAMPLES
                )));
            }
        }
        Ok(())
    }
}

fn in_half_plane(axis: Axis, z: Complex64, filter: &FilterPolicy) -> bool {
    match axis {
        Axis::AngularMomentum => z.im > 0.0 && z.im <= filter.im_max,
        Axis::Energy => z.im < 0.0 && filter.max_width.map_or(true, |w| -z.im <= w),
    }
}

/// Keeps the poles that pass every rule of `policy.filter`:
/// no nearby numerator root, residue above the floor, the physical half
/// plane (first quadrant with Im λ ≤ im_max for angular momentum, lower half
/// plane for energy), real part near the node window, and reproduced by at
/// least `stability_fraction` of the leave-one-out refits.
pub fn filter_spurious(
    poles: Vec<ComplexPole>,
    ra: &RationalApproximant,
    samples: &[(f64, Complex64)],
    policy: &PadePolicy,
) -> Vec<ComplexPole> {
    let f = &policy.filter;
    let (lo, hi) = ra.window();
    let candidates: Vec<ComplexPole> = poles
        .into_iter()
        .filter(|p| p.quality.pole_zero_distance > f.eps_froissart)
        .filter(|p| p.residue.is_some_and(|r| r.norm() >= f.residue_floor && r.norm().is_finite()))
        .filter(|p| in_half_plane(ra.axis, p.position, f))
        .filter(|p| p.position.re >= lo - f.window_margin && p.position.re <= hi + f.window_margin)
        .collect();
    if candidates.is_empty() {
        return candidates;
    }

    let refits: Vec<Vec<Complex64>> = (0..samples.len())
        .into_par_iter()
        .map(|skip| {
            let subset: Vec<(f64, Complex64)> = samples
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, s)| *s)
                .collect();
            RationalApproximant::build(ra.axis, ra.fixed_value, &subset, &policy.build)
                .map(|refit| extract_poles(&refit).into_iter().map(|p| p.position).collect())
                .unwrap_or_default()
        })
        .collect();

    candidates
        .into_iter()
        .filter_map(|mut pole| {
            let hits = refits
                .iter()
                .filter(|fit| fit.iter().any(|z| (z - pole.position).norm() <= f.match_radius))
                .count();
            let stability = hits as f64 / refits.len() as f64;
            pole.quality.stability = Some(stability);
            (stability >= f.stability_fraction).then_some(pole)
        })
        .collect()
}

/// Builds approximants over the samples (whole range, or moving node windows)
/// and returns the filtered poles, ordered by real part.
pub fn poles_along_axis(
    axis: Axis,
    fixed_value: f64,
    samples: &[(f64, Complex64)],
    policy: &PadePolicy,
) -> Result<Vec<ComplexPole>> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let single = |s: &[(f64, Complex64)]| -> Result<Vec<ComplexPole>> {
        let ra = RationalApproximant::build(axis, fixed_value, s, &policy.build)?;
        Ok(filter_spurious(extract_poles(&ra), &ra, s, policy))
    };
    let window = match policy.window {
        Some(w) if w.size < sorted.len() => w,
        _ => return single(&sorted),
    };

    let n = sorted.len();
    let mut starts: Vec<usize> = (0..=n - window.size).step_by(window.stride).collect();
    if *starts.last().unwrap() != n - window.size {
        starts.push(n - window.size);
    }
    let per_window: Vec<Vec<(f64, ComplexPole)>> = starts
        .par_iter()
        .map(|&start| {
            let chunk = &sorted[start..start + window.size];
            let centre = 0.5 * (chunk[0].0 + chunk[window.size - 1].0);
            single(chunk).map(|poles| {
                poles
                    .into_iter()
                    .map(|p| ((p.position.re - centre).abs(), p))
                    .collect()
            })
        })
        .collect::<Result<_>>()?;

    let mut ranked: Vec<(f64, ComplexPole)> = per_window.into_iter().flatten().collect();
    ranked.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.position.re.total_cmp(&b.1.position.re))
            .then(a.1.position.im.total_cmp(&b.1.position.im))
    });
    let mut accepted: Vec<ComplexPole> = Vec::new();
    for (_, pole) in ranked {
        let radius = policy.filter.match_radius;
        if accepted.iter().all(|a| (a.position - pole.position).norm() > radius) {
            accepted.push(pole);
        }
    }
    accepted.sort_by(|a, b| {
        a.position
            .re
            .total_cmp(&b.position.re)
            .then(a.position.im.total_cmp(&b.position.im))
    });
    Ok(accepted)
}

/// Filtered CAM poles at every grid energy of a table, in grid order.
pub fn poles_per_energy(table: &SMatrixTable, policy: &PadePolicy) -> Vec<(f64, Result<Vec<ComplexPole>>)> {
    (0..table.energies().len())
        .into_par_iter()
        .map(|ie| {
            let energy = table.energies()[ie];
            (
                energy,
                poles_along_axis(Axis::AngularMomentum, energy, &table.lambda_samples(ie), policy),
            )
        })
        .collect()
}

/// Filtered complex-energy poles for every J of a table, in J order.
pub fn poles_per_j(table: &SMatrixTable, policy: &PadePolicy) -> Vec<(u32, Result<Vec<ComplexPole>>)> {
    table
        .j_values()
        .collect::<Vec<u32>>()
        .into_par_iter()
        .enumerate()
        .map(|(ij, j)| {
            (j, poles_along_axis(Axis::Energy, j as f64, &table.energy_samples(ij), policy))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pade::build_rational;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn model(pole: Complex64) -> impl Fn(f64) -> Complex64 {
        move |x| c(0.3, 0.1) + c(0.05, 0.02) / (c(x, 0.0) - pole)
    }

    #[test]
    fn exact_single_pole_survives() {
        let pole = c(8.3, 0.25);
        let f = model(pole);
        let samples: Vec<_> = (0..25).map(|j| (j as f64 + 0.5, f(j as f64 + 0.5))).collect();
        let poles = poles_along_axis(Axis::AngularMomentum, 60.0, &samples, &PadePolicy::default()).unwrap();
        assert_eq!(poles.len(), 1);
        assert!((poles[0].position - pole).norm() < 1e-8);
        assert_eq!(poles[0].quality.stability, Some(1.0));
    }

    #[test]
    fn deep_pole_is_quenched() {
        let f = model(c(8.3, 5.0));
        let samples: Vec<_> = (0..25).map(|j| (j as f64 + 0.5, f(j as f64 + 0.5))).collect();
        let policy = PadePolicy::default();
        let ra = build_rational(&samples, &policy.build).unwrap();
        let raw = extract_poles(&ra);
        assert!(raw.iter().any(|p| (p.position - c(8.3, 5.0)).norm() < 1e-6));
        assert!(filter_spurious(raw, &ra, &samples, &policy).is_empty());
    }

    #[test]
    fn noise_doublets_are_removed() {
        let pole = c(8.3, 0.25);
        let f = model(pole);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<_> = (0..25)
            .map(|j| {
                let x = j as f64 + 0.5;
                let noise = c(rng.gen_range(-1e-4..1e-4), rng.gen_range(-1e-4..1e-4));
                (x, f(x) + noise)
            })
            .collect();
        let policy = PadePolicy::default();
        let ra = build_rational(&samples, &policy.build).unwrap();
        let raw = extract_poles(&ra);
        let kept = filter_spurious(raw.clone(), &ra, &samples, &policy);
        // noise buys a full-length fraction with spurious structure
        assert!(raw.len() > kept.len());
        for p in &raw {
            if p.quality.pole_zero_distance < policy.filter.eps_froissart {
                assert!(!kept.contains(p));
            }
        }
        assert!(kept.iter().any(|p| (p.position - pole).norm() < 1e-2));
        assert!(kept.iter().all(|p| (p.position - pole).norm() < 1e-2), "{kept:?}");
    }

    #[test]
    fn windowed_search_deduplicates() {
        let pole = c(12.2, 0.3);
        let f = model(pole);
        let samples: Vec<_> = (0..30).map(|j| (j as f64 + 0.5, f(j as f64 + 0.5))).collect();
        let policy = PadePolicy {
            window: Some(NodeWindow { size: 12, stride: 4 }),
            ..PadePolicy::default()
        };
        let poles = poles_along_axis(Axis::AngularMomentum, 60.0, &samples, &policy).unwrap();
        assert_eq!(poles.len(), 1);
        assert!((poles[0].position - pole).norm() < 1e-8);
    }

    #[test]
    fn energy_axis_keeps_lower_half_plane() {
        let pole = c(64.0, -0.2);
        let samples: Vec<_> = (0..40)
            .map(|i| {
                let e = 60.0 + 0.25 * i as f64;
                (e, c(0.2, 0.0) + c(0.01, 0.0) / (c(e, 0.0) - pole))
            })
            .collect();
        let poles = poles_along_axis(Axis::Energy, 5.0, &samples, &PadePolicy::default()).unwrap();
        assert_eq!(poles.len(), 1);
        assert!((poles[0].position - pole).norm() < 1e-8);
    }

    #[test]
    fn policy_validation() {
        let mut p = PadePolicy::default();
        assert!(p.validate().is_ok());
        p.filter.stability_fraction = 1.5;
        assert!(p.validate().is_err());
    }
}
