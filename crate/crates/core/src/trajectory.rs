//! Linking per-energy (or per-J) poles into continuous trajectories.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt_sci;
use crate::pade::ComplexPole;

const NAN_C: Complex64 = Complex64::new(f64::NAN, f64::NAN);

/// Matching rules for [`track`] and [`track_ce`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackPolicy {
    /// Largest admissible distance between a pole and the predicted position
    /// of a trajectory (λ units for Regge tracking, meV for CE tracking).
    pub match_radius: f64,
    /// Consecutive missing grid points a trajectory may bridge.
    pub gap_max: usize,
    /// Trajectories with fewer entries are discarded.
    pub min_length: usize,
    /// Renames automatic labels (`T1`, `T2`, ...); two labels mapped to the
    /// same name are merged.
    pub relabel: BTreeMap<String, String>,
    /// Regge trajectories whose Im λ never exceeds this value get Im λ
    /// replaced by a monotone cubic through the integer crossings.
    pub smooth_below: Option<f64>,
}

impl Default for TrackPolicy {
    fn default() -> Self {
        TrackPolicy {
            match_radius: 0.5,
            gap_max: 20,
            min_length: 3,
            relabel: BTreeMap::new(),
            smooth_below: None,
        }
    }
}

impl TrackPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.match_radius > 0.0 && self.match_radius.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "match_radius must be positive, got {}",
                self.match_radius
            )));
        }
        if let Some(t) = self.smooth_below {
            if !(t > 0.0) {
                return Err(Error::InvalidConfig(format!("smooth_below must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReggeEntry {
    pub energy: f64,
    pub lambda: Complex64,
    pub residue: Complex64,
    /// conj S(E, λ*) from the approximant at this energy, once known.
    pub s_conj: Option<Complex64>,
    pub smoothed: bool,
    pub flags: Vec<String>,
}

impl ReggeEntry {
    pub fn j(&self) -> Complex64 {
        self.lambda - 0.5
    }
}

/// Run of consecutive grid points at which a trajectory has no pole.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub points: Vec<f64>,
}

impl Gap {
    pub fn start(&self) -> f64 {
        self.points[0]
    }

    pub fn end(&self) -> f64 {
        self.points[self.points.len() - 1]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReggeTrajectory {
    pub label: String,
    pub entries: Vec<ReggeEntry>,
    pub gaps: Vec<Gap>,
}

/// Where Re J of a trajectory passes an integer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossing {
    pub k: u32,
    /// Index of the entry opening the bracketing segment.
    pub segment: usize,
    pub energy: f64,
}

impl ReggeTrajectory {
    pub fn energies(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.energy).collect()
    }

    pub fn entry_at(&self, energy: f64) -> Option<&ReggeEntry> {
        self.entries.iter().find(|e| (e.energy - energy).abs() <= 1e-9)
    }

    pub fn is_gap(&self, energy: f64) -> bool {
        self.gaps
            .iter()
            .any(|g| g.points.iter().any(|&p| (p - energy).abs() <= 1e-9))
    }

    /// Energies where Re J(E) = K for integers K ≥ 0. Brackets come from
    /// consecutive entries; the root is refined with the quadratic through
    /// three neighbouring entries when it lies inside the bracket.
    pub fn integer_crossings(&self) -> Vec<Crossing> {
        let re_j: Vec<f64> = self.entries.iter().map(|e| e.j().re).collect();
        let en = self.energies();
        let mut out = Vec::new();
        for i in 0..en.len().saturating_sub(1) {
            let (a, b) = (re_j[i], re_j[i + 1]);
            let (lo, hi) = (a.min(b), a.max(b));
            if !(lo.is_finite() && hi.is_finite()) || lo == hi {
                continue;
            }
            let first = (lo.floor() + 1.0).max(0.0) as u32;
            let last = hi.floor();
            if last < 0.0 {
                continue;
            }
            for k in first..=last as u32 {
                let kf = k as f64;
                let t = (kf - a) / (b - a);
                let linear = en[i] + t * (en[i + 1] - en[i]);
                let energy = refine_quadratic(&en, &re_j, i, kf).unwrap_or(linear);
                out.push(Crossing { k, segment: i, energy });
            }
        }
        out
    }
}

fn refine_quadratic(x: &[f64], y: &[f64], i: usize, target: f64) -> Option<f64> {
    let idx = if i > 0 {
        [i - 1, i, i + 1]
    } else if i + 2 < x.len() {
        [i, i + 1, i + 2]
    } else {
        return None;
    };
    let [x0, x1, x2] = idx.map(|j| x[j]);
    let [y0, y1, y2] = idx.map(|j| y[j]);
    // Newton form: y0 + d1 (x − x0) + d2 (x − x0)(x − x1)
    let d1 = (y1 - y0) / (x1 - x0);
    let d2 = ((y2 - y1) / (x2 - x1) - d1) / (x2 - x0);
    // shift to s = x − x[i]
    let xi = x[i];
    let c2 = d2;
    let c1 = d1 + d2 * ((xi - x0) + (xi - x1));
    let c0 = y0 + d1 * (xi - x0) + d2 * (xi - x0) * (xi - x1) - target;
    let h = x[i + 1] - xi;
    let roots: Vec<f64> = if c2.abs() <= 1e-14 * c1.abs() {
        vec![-c0 / c1]
    } else {
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc < 0.0 {
            return None;
        }
        let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
        vec![q / c2, c0 / q]
    };
    let tol = 1e-12 * h.abs();
    roots
        .into_iter()
        .filter(|s| s.is_finite() && *s >= -tol && *s <= h + tol)
        .map(|s| xi + s.clamp(0.0, h))
        .next()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CEEntry {
    pub j: u32,
    /// Complex energy in meV, Im E < 0 for decaying states.
    pub energy: Complex64,
    pub residue: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CETrajectory {
    pub label: String,
    pub entries: Vec<CEEntry>,
}

struct Chain {
    members: Vec<(usize, ComplexPole)>,
    gaps: Vec<Vec<usize>>,
    missed: Vec<usize>,
    open: bool,
}

impl Chain {
    fn predict(&self, frames: &[f64], at: usize) -> Complex64 {
        let (i1, p1) = &self.members[self.members.len() - 1];
        if self.members.len() < 2 {
            return p1.position;
        }
        let (i0, p0) = &self.members[self.members.len() - 2];
        let velocity = (p1.position - p0.position) / (frames[*i1] - frames[*i0]);
        p1.position + velocity * (frames[at] - frames[*i1])
    }
}

fn residue_norm(p: &ComplexPole) -> f64 {
    p.residue.map_or(0.0, |r| r.norm())
}

fn canonical_order(a: &ComplexPole, b: &ComplexPole) -> std::cmp::Ordering {
    let ra = a.residue.unwrap_or(NAN_C);
    let rb = b.residue.unwrap_or(NAN_C);
    a.position
        .re
        .total_cmp(&b.position.re)
        .then(a.position.im.total_cmp(&b.position.im))
        .then(ra.re.total_cmp(&rb.re))
        .then(ra.im.total_cmp(&rb.im))
}

/// Greedy nearest-neighbour linking over ascending frames.
fn link(frames: &[(f64, Vec<ComplexPole>)], policy: &TrackPolicy) -> Result<Vec<Chain>> {
    policy.validate()?;
    if frames.windows(2).any(|w| !(w[0].0 < w[1].0)) {
        return Err(Error::InvalidConfig("tracking frames must be strictly ascending".into()));
    }
    let xs: Vec<f64> = frames.iter().map(|f| f.0).collect();
    let mut chains: Vec<Chain> = Vec::new();
    for (fi, (_, poles)) in frames.iter().enumerate() {
        let mut poles = poles.clone();
        poles.sort_by(canonical_order);

        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (ci, chain) in chains.iter().enumerate().filter(|(_, c)| c.open) {
            let predicted = chain.predict(&xs, fi);
            for (pi, pole) in poles.iter().enumerate() {
                let d = (pole.position - predicted).norm();
                if d <= policy.match_radius {
                    pairs.push((d, ci, pi));
                }
            }
        }
        pairs.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(residue_norm(&poles[b.2]).total_cmp(&residue_norm(&poles[a.2])))
                .then(a.2.cmp(&b.2))
                .then(a.1.cmp(&b.1))
        });
        let mut chain_taken = vec![false; chains.len()];
        let mut pole_taken = vec![false; poles.len()];
        for (_, ci, pi) in pairs {
            if chain_taken[ci] || pole_taken[pi] {
                continue;
            }
            chain_taken[ci] = true;
            pole_taken[pi] = true;
            let chain = &mut chains[ci];
            if !chain.missed.is_empty() {
                chain.gaps.push(std::mem::take(&mut chain.missed));
            }
            chain.members.push((fi, poles[pi].clone()));
        }
        for (ci, chain) in chains.iter_mut().enumerate() {
            if chain.open && !chain_taken[ci] {
                chain.missed.push(fi);
                if chain.missed.len() > policy.gap_max {
                    chain.open = false;
                }
            }
        }
        for (pi, pole) in poles.into_iter().enumerate() {
            if !pole_taken[pi] {
                chains.push(Chain {
                    members: vec![(fi, pole)],
                    gaps: Vec::new(),
                    missed: Vec::new(),
                    open: true,
                });
            }
        }
    }
    chains.retain(|c| c.members.len() >= policy.min_length.max(1));
    Ok(chains)
}

/// Applies the relabel map; chains sharing a final label are merged.
fn final_labels(n: usize, policy: &TrackPolicy) -> Vec<String> {
    (1..=n)
        .map(|i| {
            let auto = format!("T{i}");
            policy.relabel.get(&auto).cloned().unwrap_or(auto)
        })
        .collect()
}

/// Links filtered per-energy CAM poles into Regge trajectories.
///
/// `per_energy` maps each grid energy to its poles; an energy with no poles
/// must still be listed so that gaps are measured on the grid.
pub fn track(
    per_energy: &[(f64, Vec<ComplexPole>)],
    policy: &TrackPolicy,
) -> Result<Vec<ReggeTrajectory>> {
    let mut frames = per_energy.to_vec();
    frames.sort_by(|a, b| a.0.total_cmp(&b.0));
    let xs: Vec<f64> = frames.iter().map(|f| f.0).collect();
    let chains = link(&frames, policy)?;
    let labels = final_labels(chains.len(), policy);

    let mut merged: Vec<(String, Vec<(usize, ComplexPole)>)> = Vec::new();
    for (label, chain) in labels.into_iter().zip(chains) {
        match merged.iter_mut().find(|(l, _)| *l == label) {
            Some((_, members)) => {
                for m in chain.members {
                    if members.iter().any(|(fi, _)| *fi == m.0) {
                        return Err(Error::InvalidConfig(format!(
                            "cannot merge into {label}: two poles at E = {}",
                            xs[m.0]
                        )));
                    }
                    members.push(m);
                }
                members.sort_by_key(|m| m.0);
            }
            None => merged.push((label, chain.members)),
        }
    }

    let mut out: Vec<ReggeTrajectory> = merged
        .into_iter()
        .map(|(label, members)| {
            let mut gaps = Vec::new();
            for w in members.windows(2) {
                if w[1].0 > w[0].0 + 1 {
                    gaps.push(Gap { points: xs[w[0].0 + 1..w[1].0].to_vec() });
                }
            }
            let entries = members
                .into_iter()
                .map(|(fi, p)| ReggeEntry {
                    energy: xs[fi],
                    lambda: p.position,
                    residue: p.residue.unwrap_or(NAN_C),
                    s_conj: None,
                    smoothed: false,
                    flags: p.flags().into_iter().map(String::from).collect(),
                })
                .collect();
            ReggeTrajectory { label, entries, gaps }
        })
        .collect();
    if let Some(threshold) = policy.smooth_below {
        for traj in &mut out {
            if traj.entries.iter().all(|e| e.lambda.im < threshold) {
                smooth_weak(traj);
            }
        }
    }
    Ok(out)
}

/// Links per-J complex-energy poles into CE trajectories.
pub fn track_ce(
    per_j: &[(u32, Vec<ComplexPole>)],
    policy: &TrackPolicy,
) -> Result<Vec<CETrajectory>> {
    let mut frames: Vec<(f64, Vec<ComplexPole>)> =
        per_j.iter().map(|(j, p)| (*j as f64, p.clone())).collect();
    frames.sort_by(|a, b| a.0.total_cmp(&b.0));
    let chains = link(&frames, policy)?;
    let labels = final_labels(chains.len(), policy);
    let mut out: Vec<CETrajectory> = Vec::new();
    for (label, chain) in labels.into_iter().zip(chains) {
        let entries: Vec<CEEntry> = chain
            .members
            .into_iter()
            .map(|(fi, p)| CEEntry {
                j: frames[fi].0 as u32,
                energy: p.position,
                residue: p.residue.unwrap_or(NAN_C),
            })
            .collect();
        match out.iter_mut().find(|t| t.label == label) {
            Some(t) => {
                if entries.iter().any(|e| t.entries.iter().any(|x| x.j == e.j)) {
                    return Err(Error::InvalidConfig(format!(
                        "cannot merge into {label}: overlapping J values"
                    )));
                }
                t.entries.extend(entries);
                t.entries.sort_by_key(|e| e.j);
            }
            None => out.push(CETrajectory { label, entries }),
        }
    }
    Ok(out)
}

/// Replaces Im λ between the first and last integer crossing by a monotone
/// piecewise cubic through the values interpolated at the crossings.
pub fn smooth_weak(traj: &mut ReggeTrajectory) {
    let crossings = traj.integer_crossings();
    if crossings.len() < 2 {
        return;
    }
    let knots: Vec<(f64, f64)> = crossings
        .iter()
        .map(|c| {
            let (a, b) = (&traj.entries[c.segment], &traj.entries[c.segment + 1]);
            let t = (c.energy - a.energy) / (b.energy - a.energy);
            (c.energy, a.lambda.im + t * (b.lambda.im - a.lambda.im))
        })
        .collect();
    let xs: Vec<f64> = knots.iter().map(|k| k.0).collect();
    let ys: Vec<f64> = knots.iter().map(|k| k.1).collect();
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return;
    }
    let slopes = pchip_slopes(&xs, &ys);
    for entry in &mut traj.entries {
        if entry.energy >= xs[0] && entry.energy <= xs[xs.len() - 1] {
            entry.lambda.im = pchip_eval(&xs, &ys, &slopes, entry.energy);
            entry.smoothed = true;
        }
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s * d0 <= 0.0 {
            0.0
        } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn pchip_eval(x: &[f64], y: &[f64], d: &[f64], at: f64) -> f64 {
    let i = x.partition_point(|&v| v <= at).clamp(1, x.len() - 1) - 1;
    let h = x[i + 1] - x[i];
    let t = (at - x[i]) / h;
    let (t2, t3) = (t * t, t * t * t);
    (2.0 * t3 - 3.0 * t2 + 1.0) * y[i]
        + (t3 - 2.0 * t2 + t) * h * d[i]
        + (-2.0 * t3 + 3.0 * t2) * y[i + 1]
        + (t3 - t2) * h * d[i + 1]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryType {
    TypeI,
    TypeII,
    Undetermined,
}

impl std::fmt::Display for TrajectoryType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TrajectoryType::TypeI => "type-I",
            TrajectoryType::TypeII => "type-II",
            TrajectoryType::Undetermined => "undetermined",
        })
    }
}

pub const CLASSIFY_WINDOW: usize = 5;
/// Im λ at the start of a type II trajectory must not exceed this.
pub const NEAR_AXIS: f64 = 0.5;

/// Centred moving average, the window shrinking at both ends.
fn moving_average(v: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..v.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(v.len());
            v[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Classifies an ordered series of Im λ values. Trends are judged on a
/// moving average; the near-axis start on the first raw value.
pub fn classify_series(im_lambda: &[f64]) -> TrajectoryType {
    if im_lambda.len() < CLASSIFY_WINDOW || im_lambda.iter().any(|v| !v.is_finite()) {
        return TrajectoryType::Undetermined;
    }
    let s = moving_average(im_lambda, CLASSIFY_WINDOW);
    let (min, max) = s
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let tol = 0.05 * (max - min);
    let last = s.len() - 1;
    let argmin = s
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if argmin > 0 && argmin < last && s[0] - s[argmin] > tol && s[last] - s[argmin] > tol {
        return TrajectoryType::TypeI;
    }
    let non_decreasing = s.windows(2).all(|w| w[1] - w[0] >= -tol);
    // the level at the start comes from the raw series; averaging would
    // drag a steep rise into it
    if non_decreasing && im_lambda[0] <= NEAR_AXIS {
        return TrajectoryType::TypeII;
    }
    TrajectoryType::Undetermined
}

pub fn classify_type(traj: &ReggeTrajectory) -> TrajectoryType {
    let im: Vec<f64> = traj.entries.iter().map(|e| e.lambda.im).collect();
    classify_series(&im)
}

pub const TRAJECTORY_HEADER: &str =
    "label,E_meV,re_J,im_J,re_residue,im_residue,smoothed_flag,gap_flag";
pub const CE_TRAJECTORY_HEADER: &str = "label,J,re_E,im_E,re_residue,im_residue";

/// Writes trajectories in long format; every gap point gets a row of NaNs
/// with `gap_flag` set.
pub fn write_trajectories_csv<W: Write>(trajs: &[ReggeTrajectory], mut out: W) -> Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for t in trajs {
        let mut rows: Vec<(f64, Option<&ReggeEntry>)> =
            t.entries.iter().map(|e| (e.energy, Some(e))).collect();
        rows.extend(t.gaps.iter().flat_map(|g| g.points.iter().map(|&p| (p, None))));
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (energy, entry) in rows {
            match entry {
                Some(e) => {
                    let j = e.j();
                    writeln!(
                        out,
                        "{},{},{},{},{},{},{},0",
                        t.label,
                        fmt_sci(energy),
                        fmt_sci(j.re),
                        fmt_sci(j.im),
                        fmt_sci(e.residue.re),
                        fmt_sci(e.residue.im),
                        u8::from(e.smoothed)
                    )?;
                }
                None => writeln!(out, "{},{},nan,nan,nan,nan,0,1", t.label, fmt_sci(energy))?,
            }
        }
    }
    Ok(())
}

fn split_row(line: &str, line_no: usize, n: usize) -> Result<Vec<String>> {
    let fields: Vec<String> = line.split(',').map(|f| f.trim().to_string()).collect();
    if fields.len() != n {
        return Err(Error::Parse {
            line: line_no,
            msg: format!("expected {n} columns, got {}", fields.len()),
        });
    }
    Ok(fields)
}

fn parse_num(field: &str, line_no: usize) -> Result<f64> {
    field.parse::<f64>().map_err(|_| Error::Parse {
        line: line_no,
        msg: format!("cannot parse number from {field:?}"),
    })
}

pub fn read_trajectories_csv<R: BufRead>(source: R) -> Result<Vec<ReggeTrajectory>> {
    let mut out: Vec<ReggeTrajectory> = Vec::new();
    let mut last_gap: Option<usize> = None;
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with("label") {
            continue;
        }
        let f = split_row(t, line_no, 8)?;
        let num = |i: usize| parse_num(&f[i], line_no);
        let energy = num(1)?;
        let pos = match out.iter().position(|x| x.label == f[0]) {
            Some(p) => p,
            None => {
                out.push(ReggeTrajectory { label: f[0].clone(), entries: Vec::new(), gaps: Vec::new() });
                last_gap = None;
                out.len() - 1
            }
        };
        let traj = &mut out[pos];
        if f[7] == "1" {
            if last_gap == Some(pos) {
                traj.gaps.last_mut().unwrap().points.push(energy);
            } else {
                traj.gaps.push(Gap { points: vec![energy] });
            }
            last_gap = Some(pos);
        } else {
            last_gap = None;
            traj.entries.push(ReggeEntry {
                energy,
                lambda: Complex64::new(num(2)? + 0.5, num(3)?),
                residue: Complex64::new(num(4)?, num(5)?),
                s_conj: None,
                smoothed: f[6] == "1",
                flags: Vec::new(),
            });
        }
    }
    Ok(out)
}

pub fn write_ce_trajectories_csv<W: Write>(trajs: &[CETrajectory], mut out: W) -> Result<()> {
    writeln!(out, "{CE_TRAJECTORY_HEADER}")?;
    for t in trajs {
        for e in &t.entries {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                t.label,
                e.j,
                fmt_sci(e.energy.re),
                fmt_sci(e.energy.im),
                fmt_sci(e.residue.re),
                fmt_sci(e.residue.im)
            )?;
        }
    }
    Ok(())
}

pub fn read_ce_trajectories_csv<R: BufRead>(source: R) -> Result<Vec<CETrajectory>> {
    let mut out: Vec<CETrajectory> = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with("label") {
            continue;
        }
        let f = split_row(t, line_no, 6)?;
        let num = |i: usize| parse_num(&f[i], line_no);
        let j = f[1].parse::<u32>().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("J must be a non-negative integer, got {:?}", f[1]),
        })?;
        let entry = CEEntry {
            j,
            energy: Complex64::new(num(2)?, num(3)?),
            residue: Complex64::new(num(4)?, num(5)?),
        };
        match out.iter_mut().find(|x| x.label == f[0]) {
            Some(x) => x.entries.push(entry),
            None => out.push(CETrajectory { label: f[0].clone(), entries: vec![entry] }),
        }
    }
    for t in &mut out {
        t.entries.sort_by_key(|e| e.j);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pade::PoleQuality;

    fn pole(z: Complex64, r: f64) -> ComplexPole {
        ComplexPole {
            position: z,
            residue: Some(Complex64::new(r, 0.0)),
            multiplicity: 1,
            quality: PoleQuality { pole_zero_distance: f64::INFINITY, stability: Some(1.0), unpolished: false },
        }
    }

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| 60.0 + 0.1 * i as f64).collect()
    }

    #[test]
    fn single_drifting_pole() {
        let frames: Vec<_> = grid(30)
            .into_iter()
            .map(|e| (e, vec![pole(Complex64::new(5.0 + (e - 60.0), 0.2), 0.01)]))
            .collect();
        let t = track(&frames, &TrackPolicy::default()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].entries.len(), 30);
        assert!(t[0].gaps.is_empty());
        assert_eq!(t[0].label, "T1");
    }

    #[test]
    fn interior_gap_is_bridged() {
        let frames: Vec<_> = grid(30)
            .into_iter()
            .enumerate()
            .map(|(i, e)| {
                let poles = if (10..13).contains(&i) {
                    vec![]
                } else {
                    vec![pole(Complex64::new(5.0 + (e - 60.0), 0.2), 0.01)]
                };
                (e, poles)
            })
            .collect();
        let t = track(&frames, &TrackPolicy::default()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].gaps.len(), 1);
        assert_eq!(t[0].gaps[0].points.len(), 3);
        assert!((t[0].gaps[0].start() - 61.0).abs() < 1e-12);
    }

    #[test]
    fn long_gap_splits() {
        let policy = TrackPolicy { gap_max: 2, ..TrackPolicy::default() };
        let frames: Vec<_> = grid(30)
            .into_iter()
            .enumerate()
            .map(|(i, e)| {
                let poles = if (10..13).contains(&i) { vec![] } else { vec![pole(Complex64::new(5.0, 0.2), 0.01)] };
                (e, poles)
            })
            .collect();
        assert_eq!(track(&frames, &policy).unwrap().len(), 2);
    }

    #[test]
    fn relabel_merges() {
        let mut policy = TrackPolicy { gap_max: 2, ..TrackPolicy::default() };
        policy.relabel.insert("T1".into(), "D".into());
        policy.relabel.insert("T2".into(), "D".into());
        let frames: Vec<_> = grid(30)
            .into_iter()
            .enumerate()
            .map(|(i, e)| {
                let poles = if (10..13).contains(&i) { vec![] } else { vec![pole(Complex64::new(5.0, 0.2), 0.01)] };
                (e, poles)
            })
            .collect();
        let t = track(&frames, &policy).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].label, "D");
        assert_eq!(t[0].entries.len(), 27);
        assert_eq!(t[0].gaps[0].points.len(), 3);
    }

    #[test]
    fn crossing_in_real_part_separated_by_imaginary_part() {
        let frames: Vec<_> = grid(40)
            .into_iter()
            .map(|e| {
                let x = e - 62.0;
                (e, vec![pole(Complex64::new(8.0 + x, 0.1), 0.01), pole(Complex64::new(8.0 - x, 0.6), 0.02)])
            })
            .collect();
        let t = track(&frames, &TrackPolicy::default()).unwrap();
        assert_eq!(t.len(), 2);
        for traj in &t {
            let im0 = traj.entries[0].lambda.im;
            assert!(traj.entries.iter().all(|e| e.lambda.im == im0));
            assert_eq!(traj.entries.len(), 40);
        }
    }

    #[test]
    fn permutation_invariant() {
        let frames: Vec<_> = grid(20)
            .into_iter()
            .map(|e| (e, vec![pole(Complex64::new(3.0 + e - 60.0, 0.1), 0.01), pole(Complex64::new(9.0, 0.4), 0.02)]))
            .collect();
        let reversed: Vec<_> = frames
            .iter()
            .map(|(e, p)| (*e, p.iter().rev().cloned().collect::<Vec<_>>()))
            .collect();
        let p = TrackPolicy::default();
        assert_eq!(track(&frames, &p).unwrap(), track(&reversed, &p).unwrap());
    }

    #[test]
    fn classification() {
        let e: Vec<f64> = (0..40).map(|i| 0.1 * i as f64).collect();
        let rising: Vec<f64> = e.iter().map(|x| 0.1 + 0.02 * x).collect();
        assert_eq!(classify_series(&rising), TrajectoryType::TypeII);
        let v: Vec<f64> = e.iter().map(|x| 0.5 - 0.03 * x + 0.08 * (x - 2.0).max(0.0)).collect();
        assert_eq!(classify_series(&v), TrajectoryType::TypeI);
        assert_eq!(classify_series(&rising[..4]), TrajectoryType::Undetermined);
        let falling: Vec<f64> = e.iter().map(|x| 1.0 - 0.1 * x).collect();
        assert_eq!(classify_series(&falling), TrajectoryType::Undetermined);
    }

    fn linear_traj(re_j: impl Fn(f64) -> f64) -> ReggeTrajectory {
        ReggeTrajectory {
            label: "B".into(),
            entries: grid(60)
                .into_iter()
                .map(|e| ReggeEntry {
                    energy: e,
                    lambda: Complex64::new(re_j(e) + 0.5, 0.1),
                    residue: Complex64::new(0.01, 0.0),
                    s_conj: None,
                    smoothed: false,
                    flags: vec![],
                })
                .collect(),
            gaps: vec![],
        }
    }

    #[test]
    fn crossings_of_quadratic_re_j() {
        let f = |e: f64| 3.0 + 0.7 * (e - 60.0) + 0.4 * (e - 60.0).powi(2);
        let t = linear_traj(f);
        let c = t.integer_crossings();
        let ks: Vec<u32> = c.iter().map(|c| c.k).collect();
        assert_eq!(ks, (4..=f(65.9).floor() as u32).collect::<Vec<_>>());
        for cr in c {
            let k = cr.k as f64;
            let root = 60.0 + (-0.7 + (0.49 + 1.6 * (k - 3.0)).sqrt()) / 0.8;
            assert!((cr.energy - root).abs() < 1e-9, "{} vs {}", cr.energy, root);
        }
        assert!(linear_traj(|_| 4.5).integer_crossings().is_empty());
    }

    #[test]
    fn smoothing_replaces_wiggles() {
        let mut t = linear_traj(|e| (e - 58.0) / 1.0);
        for (i, e) in t.entries.iter_mut().enumerate() {
            e.lambda.im = 0.1 + if i % 2 == 0 { 0.0 } else { 0.01 };
        }
        t.entries.iter_mut().for_each(|e| if (e.energy - 61.0).abs() < 1e-9 { e.lambda.im = 0.1 });
        smooth_weak(&mut t);
        let inside: Vec<&ReggeEntry> = t.entries.iter().filter(|e| e.smoothed).collect();
        assert!(!inside.is_empty());
        assert!(inside.iter().all(|e| e.lambda.im >= 0.1 - 1e-12 && e.lambda.im <= 0.11 + 1e-12));
    }

    #[test]
    fn csv_round_trip_with_gap() {
        let mut t = linear_traj(|e| e - 58.0);
        t.entries.retain(|e| !(e.energy > 61.05 && e.energy < 61.35));
        t.gaps.push(Gap { points: vec![61.1, 61.2, 61.3] });
        let mut buf = Vec::new();
        write_trajectories_csv(std::slice::from_ref(&t), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().any(|l| l == "B,6.120e1,nan,nan,nan,nan,0,1"));
        let back = read_trajectories_csv(buf.as_slice()).unwrap();
        assert_eq!(back[0].gaps, t.gaps);
        assert_eq!(back[0].entries.len(), t.entries.len());
        for (a, b) in back[0].entries.iter().zip(&t.entries) {
            assert!((a.lambda - b.lambda).norm() < 1e-12);
        }
    }

    #[test]
    fn ce_tracking_two_poles() {
        let frames: Vec<(u32, Vec<ComplexPole>)> = (17..=27)
            .map(|j| {
                let l = (j * (j + 1)) as f64;
                (j, vec![pole(Complex64::new(600.0 + 0.01 * l, -0.1), 0.1), pole(Complex64::new(600.0 + 0.01 * l, -3.0), 0.1)])
            })
            .collect();
        let policy = TrackPolicy { match_radius: 1.0, ..TrackPolicy::default() };
        let t = track_ce(&frames, &policy).unwrap();
        assert_eq!(t.len(), 2);
        assert!(t.iter().all(|c| c.entries.len() == 11));
        let mut buf = Vec::new();
        write_ce_trajectories_csv(&t, &mut buf).unwrap();
        let back = read_ce_trajectories_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].entries[3].j, 20);
    }
}
