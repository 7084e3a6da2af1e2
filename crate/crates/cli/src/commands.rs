use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cam_core::bridge::{ce_to_regge, fit_linear_ce, j_shifting_params, map_json};
use cam_core::mulholland::{
    attach_s_conj, decompose, find_integer_crossings, write_decomposition_csv, write_fano_csv, DecomposeOptions,
};
use cam_core::pade::{poles_per_energy, poles_per_j, read_poles_csv, write_poles_csv, Axis, ComplexPole, PoleRecord};
use cam_core::scatter::{load_smatrix_table, write_smatrix_csv, LoadOptions, SMatrixTable};
use cam_core::synth::{generate_table, EnergyGrid, PoleModelSpec};
use cam_core::trajectory::{
    read_ce_trajectories_csv, read_trajectories_csv, track, track_ce, write_ce_trajectories_csv,
    write_trajectories_csv, ReggeEntry, ReggeTrajectory,
};
use cam_core::{fmt_sci, Complex64};

use crate::config::RunConfig;
use crate::output::RunLog;

const GRID_PREFIX: &str = "# grid:";

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn load_table(path: &Path, config: &RunConfig, log: &mut RunLog) -> Result<SMatrixTable> {
    let options = LoadOptions { unitarity_slack: config.unitarity_slack };
    let table = load_smatrix_table(open(path)?, &options).with_context(|| format!("{}", path.display()))?;
    log.inputs.push(path.to_path_buf());
    for w in &table.warnings {
        log.warn(format!("{}: {w}", path.display()));
    }
    Ok(table)
}

fn output_path(explicit: Option<&PathBuf>, config: &RunConfig, default: &str) -> PathBuf {
    explicit.cloned().unwrap_or_else(|| config.out_dir.join(default))
}

pub fn synth(spec_path: &Path, out: Option<&PathBuf>, config: &RunConfig, log: &mut RunLog) -> Result<()> {
    let text = std::fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    log.inputs.push(spec_path.to_path_buf());
    let spec: PoleModelSpec =
        serde_json::from_str(&text).with_context(|| format!("parsing model {}", spec_path.display()))?;
    let table = generate_table(&spec).with_context(|| format!("{}", spec_path.display()))?;
    log.write(&output_path(out, config, "table.csv"), |w| Ok(write_smatrix_csv(&table, w)?))
}

fn write_pole_file(
    axis: Axis,
    found: Vec<(f64, cam_core::Result<Vec<ComplexPole>>)>,
    path: &Path,
    log: &mut RunLog,
) -> Result<()> {
    let grid: Vec<f64> = found.iter().map(|(x, _)| *x).collect();
    let mut records = Vec::new();
    for (fixed_value, result) in found {
        match result {
            Ok(poles) => records.extend(poles.into_iter().map(|pole| PoleRecord { axis, fixed_value, pole })),
            Err(e) => log.warn(format!("no poles at {}={fixed_value}: {e}", axis.tag())),
        }
    }
    log.write(path, |w| {
        let line: Vec<String> = grid.iter().map(|x| fmt_sci(*x)).collect();
        writeln!(w, "{GRID_PREFIX} {}", line.join(","))?;
        Ok(write_poles_csv(&records, w)?)
    })
}

pub fn poles_j(table_path: &Path, out: Option<&PathBuf>, config: &RunConfig, log: &mut RunLog) -> Result<()> {
    let table = load_table(table_path, config, log)?;
    let found = poles_per_energy(&table, &config.pade);
    write_pole_file(Axis::AngularMomentum, found, &output_path(out, config, "poles_j.csv"), log)
}

pub fn poles_e(table_path: &Path, out: Option<&PathBuf>, config: &RunConfig, log: &mut RunLog) -> Result<()> {
    let table = load_table(table_path, config, log)?;
    let found = poles_per_j(&table, &config.pade)
        .into_iter()
        .map(|(j, r)| (j as f64, r))
        .collect();
    write_pole_file(Axis::Energy, found, &output_path(out, config, "poles_e.csv"), log)
}

/// Fixed values listed in the `# grid:` line, so that energies without
/// poles still count as grid points.
fn read_grid(path: &Path) -> Result<Vec<f64>> {
    let mut grid = Vec::new();
    for (idx, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if let Some(rest) = line.trim().strip_prefix(GRID_PREFIX) {
            for field in rest.split(',').map(str::trim).filter(|f| !f.is_empty()) {
                grid.push(field.parse::<f64>().with_context(|| {
                    format!("{}: line {}: bad grid value {field:?}", path.display(), idx + 1)
                })?);
            }
        }
    }
    Ok(grid)
}

fn frames(grid: &[f64], records: Vec<PoleRecord>) -> Vec<(f64, Vec<ComplexPole>)> {
    let mut frames: Vec<(f64, Vec<ComplexPole>)> = grid.iter().map(|&x| (x, Vec::new())).collect();
    for r in records {
        match frames.iter_mut().find(|(x, _)| (x - r.fixed_value).abs() <= 1e-9) {
            Some((_, poles)) => poles.push(r.pole),
            None => frames.push((r.fixed_value, vec![r.pole])),
        }
    }
    frames.sort_by(|a, b| a.0.total_cmp(&b.0));
    frames
}

pub fn track_cmd(poles_path: &Path, out: Option<&PathBuf>, config: &RunConfig, log: &mut RunLog) -> Result<()> {
    let records = read_poles_csv(open(poles_path)?).with_context(|| format!("{}", poles_path.display()))?;
    log.inputs.push(poles_path.to_path_buf());
    let grid = read_grid(poles_path)?;
    let axis = match records.first() {
        Some(r) => r.axis,
        None => {
            log.warn(format!("{} holds no poles", poles_path.display()));
            Axis::AngularMomentum
        }
    };
    if records.iter().any(|r| r.axis != axis) {
        bail!("{}: poles from both axes in one file", poles_path.display());
    }
    let frames = frames(&grid, records);
    match axis {
        Axis::AngularMomentum => {
            let trajs = track(&frames, &config.tracking).with_context(|| format!("{}", poles_path.display()))?;
            let path = output_path(out, config, "trajectories.csv");
            log.write(&path, |w| Ok(write_trajectories_csv(&trajs, w)?))
        }
        Axis::Energy => {
            let per_j: Vec<(u32, Vec<ComplexPole>)> = frames
                .into_iter()
                .map(|(x, p)| {
                    if x < 0.0 || x.fract() != 0.0 {
                        bail!("{}: J = {x} is not a non-negative integer", poles_path.display());
                    }
                    Ok((x as u32, p))
                })
                .collect::<Result<_>>()?;
            let trajs = track_ce(&per_j, &config.tracking).with_context(|| format!("{}", poles_path.display()))?;
            let path = output_path(out, config, "ce_trajectories.csv");
            log.write(&path, |w| Ok(write_ce_trajectories_csv(&trajs, w)?))
        }
    }
}

pub fn decompose_cmd(
    table_path: &Path,
    trajectories_path: Option<&Path>,
    out: Option<&PathBuf>,
    fano_out: Option<&PathBuf>,
    config: &RunConfig,
    log: &mut RunLog,
) -> Result<()> {
    let table = load_table(table_path, config, log)?;
    let mut trajs = match trajectories_path {
        Some(p) => {
            log.inputs.push(p.to_path_buf());
            read_trajectories_csv(open(p)?).with_context(|| format!("{}", p.display()))?
        }
        None => {
            log.warn("no trajectories given: background-only decomposition");
            Vec::new()
        }
    };
    let options = DecomposeOptions { build: config.pade.build.clone(), ..DecomposeOptions::default() };
    let result = decompose(&table, &trajs, &options);
    for (energy, why) in result.incomplete_energies() {
        log.warn(format!("decomposition incomplete at E = {energy} meV: {why}"));
    }
    log.write(&output_path(out, config, "decomposition.csv"), |w| Ok(write_decomposition_csv(&result, w)?))?;

    if config.decomposition.fano {
        attach_s_conj(&table, &mut trajs, &options.build).with_context(|| format!("{}", table_path.display()))?;
        let mut features = Vec::new();
        for t in &trajs {
            let found = find_integer_crossings(t);
            for f in found.iter().filter(|f| f.non_monotone) {
                log.warn(format!("{} K={}: Re lambda not increasing at E = {} meV, width omitted", f.label, f.k, f.energy));
            }
            features.extend(found);
        }
        log.write(&output_path(fano_out, config, "fano.csv"), |w| Ok(write_fano_csv(&features, w)?))?;
    }
    Ok(())
}

pub fn map_cmd(
    ce_path: &Path,
    out: Option<&PathBuf>,
    regge_out: Option<&PathBuf>,
    config: &RunConfig,
    log: &mut RunLog,
) -> Result<()> {
    let trajs = read_ce_trajectories_csv(open(ce_path)?).with_context(|| format!("{}", ce_path.display()))?;
    log.inputs.push(ce_path.to_path_buf());
    let ce = match &config.map.label {
        Some(label) => trajs
            .iter()
            .find(|t| &t.label == label)
            .with_context(|| format!("{}: no CE trajectory labelled {label}", ce_path.display()))?,
        None => trajs
            .iter()
            .max_by_key(|t| t.entries.len())
            .with_context(|| format!("{}: no CE trajectories", ce_path.display()))?,
    };
    let window = config.map.j_window.map(|(lo, hi)| lo..=hi);
    let map = fit_linear_ce(ce, window).with_context(|| format!("{}: trajectory {}", ce_path.display(), ce.label))?;
    let params = match j_shifting_params(&map, config.map.a2_tol) {
        Ok(p) => Some(p),
        Err(e) => {
            log.warn(format!("J-shifting parameters not derived: {e}"));
            None
        }
    };
    let mut doc = map_json(&map, params.as_ref());
    doc["label"] = serde_json::json!(ce.label);
    doc["inversion"] = serde_json::to_value(config.map.inversion)?;
    log.write(&output_path(out, config, "map.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &doc)?;
        writeln!(w)?;
        Ok(())
    })?;

    let energies = match &config.map.energies {
        Some(grid) => grid.points()?,
        None => {
            let in_window: Vec<f64> = ce
                .entries
                .iter()
                .filter(|e| e.j >= map.j_window.0 && e.j <= map.j_window.1)
                .map(|e| e.energy.re)
                .collect();
            let lo = in_window.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = in_window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let start = (lo * 10.0).ceil() / 10.0;
            EnergyGrid::Range { start, stop: hi, step: 0.1 }.points()?
        }
    };
    let nan = Complex64::new(f64::NAN, f64::NAN);
    let mut entries = Vec::new();
    for energy in energies {
        match ce_to_regge(&map, energy, config.map.inversion) {
            Ok(j) => entries.push(ReggeEntry {
                energy,
                lambda: j + 0.5,
                residue: nan,
                s_conj: None,
                smoothed: false,
                flags: Vec::new(),
            }),
            Err(e) => log.warn(format!("no predicted J at E = {energy} meV: {e}")),
        }
    }
    let predicted = ReggeTrajectory { label: format!("{}_map", ce.label), entries, gaps: Vec::new() };
    log.write(&output_path(regge_out, config, "regge_predicted.csv"), |w| {
        Ok(write_trajectories_csv(std::slice::from_ref(&predicted), w)?)
    })
}
