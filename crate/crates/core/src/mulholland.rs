//! Mulholland decomposition of an integral cross section.
//!
//! σ(E) = Σ_n σ_n^res(E) + (2π/k²) ∫ |S(E, λ)|² λ dλ + I(E), with
//! σ_n^res = (8π²/k²) Im[λ_n ρ_n S*(E, λ_n*) / (1 + exp(−2iπλ_n))].
//! The residual I is always obtained by subtraction.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt_sci;
use crate::pade::{BuildOptions, RationalApproximant};
use crate::quadrature::{integrate_adaptive, AdaptiveOptions};
use crate::scatter::{pws_ics_at, SMatrixTable};
use crate::trajectory::ReggeTrajectory;

/// Below this |1 + exp(−2iπλ)| the resonance term is singular.
pub const SINGULAR_DENOMINATOR: f64 = 1e-14;

/// λ_n ρ_n S*(E, λ_n*)
fn pole_product(lambda: Complex64, residue: Complex64, s_conj: Complex64) -> Complex64 {
    lambda * residue * s_conj
}

/// Contribution of one Regge pole to the cross section (Å² when k² is in Å⁻²).
pub fn resonance_term(lambda: Complex64, residue: Complex64, s_conj: Complex64, k2: f64) -> Result<f64> {
    let i = Complex64::i();
    let denominator = 1.0 + (-2.0 * i * PI * lambda).exp();
    if denominator.norm() < SINGULAR_DENOMINATOR {
        return Err(Error::SingularResonance(lambda));
    }
    let p = pole_product(lambda, residue, s_conj);
    if p == Complex64::new(0.0, 0.0) {
        return Ok(0.0);
    }
    Ok(8.0 * PI * PI / k2 * (p / denominator).im)
}

/// (2π/k²) ∫_lo^hi g(λ) λ dλ for a given g = |S|², one initial panel per
/// unit of λ.
pub fn background_integral_fn(
    abs_s2: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    k2: f64,
    options: &AdaptiveOptions,
) -> Result<f64> {
    let panels = ((hi - lo).ceil() as usize).max(1);
    let integral = integrate_adaptive(|l| abs_s2(l) * l, lo, hi, panels, options)?;
    Ok(2.0 * PI / k2 * integral)
}

/// Background integral of the continuation from λ = J_min + 1/2 to half a
/// unit beyond the last sampled λ; |S|² is taken as zero further out.
pub fn background_integral(
    ra: &RationalApproximant,
    j_min: u32,
    k2: f64,
    options: &AdaptiveOptions,
) -> Result<f64> {
    let lo = j_min as f64 + 0.5;
    let hi = ra.nodes().iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 0.5;
    let failure = std::cell::Cell::new(None);
    let value = background_integral_fn(
        |l| match ra.evaluate_real(l) {
            Ok(s) => s.norm_sqr(),
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        },
        lo,
        hi,
        k2,
        options,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    value
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecomposeOptions {
    pub build: BuildOptions,
    #[serde(skip)]
    pub quadrature: AdaptiveOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRow {
    pub energy: f64,
    pub sigma_exact: f64,
    pub sigma_back_integral: f64,
    /// In the order of [`DecompositionResult::labels`]; zero in gaps and
    /// outside a trajectory's range.
    pub sigma_res: Vec<f64>,
    pub residual: f64,
    /// Why this energy could not be fully decomposed.
    pub incomplete: Option<String>,
}

impl DecompositionRow {
    pub fn sigma_res_total(&self) -> f64 {
        self.sigma_res.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub labels: Vec<String>,
    pub rows: Vec<DecompositionRow>,
}

impl DecompositionResult {
    pub fn incomplete_energies(&self) -> Vec<(f64, String)> {
        self.rows
            .iter()
            .filter_map(|r| r.incomplete.clone().map(|m| (r.energy, m)))
            .collect()
    }
}

/// Rational continuation in λ of each energy's samples.
pub fn approximants(table: &SMatrixTable, build: &BuildOptions) -> Vec<Result<RationalApproximant>> {
    (0..table.energies().len())
        .into_par_iter()
        .map(|ie| {
            RationalApproximant::build(
                crate::pade::Axis::AngularMomentum,
                table.energies()[ie],
                &table.lambda_samples(ie),
                build,
            )
        })
        .collect()
}

/// Fills in S*(E, λ_n*) for every entry lacking it, from the continuation
/// at the entry's energy. Entries off the table grid are left alone.
pub fn attach_s_conj(
    table: &SMatrixTable,
    trajectories: &mut [ReggeTrajectory],
    build: &BuildOptions,
) -> Result<()> {
    let ras = approximants(table, build);
    for traj in trajectories.iter_mut() {
        for entry in traj.entries.iter_mut().filter(|e| e.s_conj.is_none()) {
            if let Some(ie) = table.energy_index(entry.energy) {
                let ra = ras[ie].as_ref().map_err(|e| Error::DegenerateData(e.to_string()))?;
                entry.s_conj = Some(ra.conjugate_evaluate(entry.lambda)?);
            }
        }
    }
    Ok(())
}

fn decompose_energy(
    table: &SMatrixTable,
    ie: usize,
    trajectories: &[ReggeTrajectory],
    options: &DecomposeOptions,
) -> DecompositionRow {
    let energy = table.energies()[ie];
    let mut row = DecompositionRow {
        energy,
        sigma_exact: f64::NAN,
        sigma_back_integral: f64::NAN,
        sigma_res: vec![0.0; trajectories.len()],
        residual: f64::NAN,
        incomplete: None,
    };
    let mut problems: Vec<String> = Vec::new();
    let k2 = match table.wavevector_squared_at(ie) {
        Ok(k2) => k2,
        Err(e) => {
            row.incomplete = Some(e.to_string());
            return row;
        }
    };
    match pws_ics_at(table, ie) {
        Ok(v) => row.sigma_exact = v,
        Err(e) => problems.push(e.to_string()),
    }
    let ra = RationalApproximant::build(
        crate::pade::Axis::AngularMomentum,
        energy,
        &table.lambda_samples(ie),
        &options.build,
    );
    match &ra {
        Ok(ra) => match background_integral(ra, table.j_min(), k2, &options.quadrature) {
            Ok(v) => row.sigma_back_integral = v,
            Err(e) => problems.push(e.to_string()),
        },
        Err(e) => problems.push(e.to_string()),
    }
    for (n, traj) in trajectories.iter().enumerate() {
        let Some(entry) = traj.entry_at(energy) else { continue };
        let s_conj = match (entry.s_conj, &ra) {
            (Some(s), _) => Ok(s),
            (None, Ok(ra)) => ra.conjugate_evaluate(entry.lambda),
            (None, Err(_)) => Err(Error::DegenerateData("no continuation at this energy".into())),
        };
        match s_conj.and_then(|s| resonance_term(entry.lambda, entry.residue, s, k2)) {
            Ok(v) => row.sigma_res[n] = v,
            Err(e) => {
                row.sigma_res[n] = f64::NAN;
                problems.push(format!("{}: {e}", traj.label));
            }
        }
    }
    row.residual = row.sigma_exact - row.sigma_back_integral - row.sigma_res_total();
    if !problems.is_empty() {
        row.incomplete = Some(problems.join("; "));
    }
    row
}

/// Splits the cross section at every grid energy. Energies where a piece
/// fails are returned with NaNs and a reason instead of aborting.
pub fn decompose(
    table: &SMatrixTable,
    trajectories: &[ReggeTrajectory],
    options: &DecomposeOptions,
) -> DecompositionResult {
    let rows = (0..table.energies().len())
        .into_par_iter()
        .map(|ie| decompose_energy(table, ie, trajectories, options))
        .collect();
    DecompositionResult {
        labels: trajectories.iter().map(|t| t.label.clone()).collect(),
        rows,
    }
}

pub fn write_decomposition_csv<W: Write>(result: &DecompositionResult, mut out: W) -> Result<()> {
    let mut header = String::from("E_meV,sigma_exact,sigma_back_int");
    for label in &result.labels {
        header.push_str(",sigma_res_");
        header.push_str(label);
    }
    header.push_str(",residual_I");
    writeln!(out, "{header}")?;
    for row in &result.rows {
        let mut line = format!(
            "{},{},{}",
            fmt_sci(row.energy),
            fmt_sci(row.sigma_exact),
            fmt_sci(row.sigma_back_integral)
        );
        for v in &row.sigma_res {
            line.push(',');
            line.push_str(&fmt_sci(*v));
        }
        line.push(',');
        line.push_str(&fmt_sci(row.residual));
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// One sharp feature of a near-axis trajectory, centred where Re J = K.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FanoFeature {
    pub label: String,
    pub k: u32,
    pub energy: f64,
    /// Γ_K = 2 Im λ / ∂_E Re λ; absent when Re λ is not increasing.
    pub width: Option<f64>,
    /// γ_K = λ ρ S*(E, λ*) / ∂_E Re λ.
    pub strength: Complex64,
    pub non_monotone: bool,
}

/// ∂_E Re λ at every entry: central differences, one-sided at the ends.
fn re_lambda_slopes(traj: &ReggeTrajectory) -> Vec<f64> {
    let e = &traj.entries;
    let n = e.len();
    (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (e[b].lambda.re - e[a].lambda.re) / (e[b].energy - e[a].energy)
        })
        .collect()
}

/// Features at every integer crossing of Re J. Requires `s_conj` on the
/// entries (see [`attach_s_conj`]); missing values give NaN strengths.
pub fn find_integer_crossings(traj: &ReggeTrajectory) -> Vec<FanoFeature> {
    if traj.entries.len() < 2 {
        return Vec::new();
    }
    let slopes = re_lambda_slopes(traj);
    let nan = Complex64::new(f64::NAN, f64::NAN);
    traj.integer_crossings()
        .into_iter()
        .map(|c| {
            let (a, b) = (&traj.entries[c.segment], &traj.entries[c.segment + 1]);
            let t = (c.energy - a.energy) / (b.energy - a.energy);
            let lerp = |x: Complex64, y: Complex64| x + (y - x) * t;
            let slope = slopes[c.segment] + t * (slopes[c.segment + 1] - slopes[c.segment]);
            let lambda = lerp(a.lambda, b.lambda);
            let residue = lerp(a.residue, b.residue);
            let s_conj = lerp(a.s_conj.unwrap_or(nan), b.s_conj.unwrap_or(nan));
            let non_monotone = !(slope > 0.0);
            FanoFeature {
                label: traj.label.clone(),
                k: c.k,
                energy: c.energy,
                width: (!non_monotone).then(|| 2.0 * lambda.im / slope),
                strength: pole_product(lambda, residue, s_conj) / slope,
                non_monotone,
            }
        })
        .collect()
}

/// Sum of Fano profiles −(4π/k²) Re γ_K / (E − E_K + iΓ_K/2), the
/// near-axis limit of [`resonance_term`]. Features without a width are
/// skipped.
pub fn fano_approx(features: &[FanoFeature], k2: f64, energy: f64) -> f64 {
    features
        .iter()
        .filter_map(|f| f.width.map(|w| (f, w)))
        .map(|(f, w)| (f.strength / Complex64::new(energy - f.energy, 0.5 * w)).re)
        .sum::<f64>()
        * (-4.0 * PI / k2)
}

/// Leading term of [`resonance_term`] for a pole away from the real axis:
/// (8π²/k²) |P| e^{−2π Im λ} sin(2π Re λ + arg P), P = λ ρ S*(E, λ*).
pub fn oscillation_approx(lambda: Complex64, residue: Complex64, s_conj: Complex64, k2: f64) -> f64 {
    let p = pole_product(lambda, residue, s_conj);
    8.0 * PI * PI / k2 * p.norm() * (-2.0 * PI * lambda.im).exp() * (2.0 * PI * lambda.re + p.arg()).sin()
}

pub const FANO_HEADER: &str = "label,K,E_K_meV,Gamma_K_meV,re_gamma,im_gamma";

pub fn write_fano_csv<W: Write>(features: &[FanoFeature], mut out: W) -> Result<()> {
    writeln!(out, "{FANO_HEADER}")?;
    for f in features {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            f.label,
            f.k,
            fmt_sci(f.energy),
            fmt_sci(f.width.unwrap_or(f64::NAN)),
            fmt_sci(f.strength.re),
            fmt_sci(f.strength.im)
        )?;
    }
    Ok(())
}
