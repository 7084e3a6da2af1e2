//! Reader and writer for the per-transition S-matrix CSV format.
//!
//! ```text
//! # transition: 0 0 0 -> 3 0 0
//! # kinematics: mu_amu=2.5909
//! # threshold_mev=62.72
//! E_meV,J,Re_S,Im_S
//! 5.854e1,0,1.234e-2,-5.678e-3
//! ```
//! `# kinematics: explicit_k` adds a fifth column `k_invA`.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use super::{Kinematics, SMatrixTable, TransitionLabel, DEFAULT_UNITARITY_SLACK};
use crate::error::{Error, Result};
use crate::fmt_sci;

/// Format options for [`load_smatrix_table`].
#[derive(Clone, Debug)]
pub struct LoadOptions {
    pub unitarity_slack: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            unitarity_slack: DEFAULT_UNITARITY_SLACK,
        }
    }
}

enum KinematicsHeader {
    ReducedMass(f64),
    ExplicitK,
}

struct Row {
    line: usize,
    energy: f64,
    j: u32,
    s: Complex64,
    k: Option<f64>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_f64(field: &str, line: usize, what: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("cannot parse {what} from {field:?}")))
}

fn parse_transition(text: &str, line: usize) -> Result<TransitionLabel> {
    let (lhs, rhs) = text
        .split_once("->")
        .ok_or_else(|| parse_err(line, "transition must read `v j omega -> v' j' omega'`"))?;
    let triple = |s: &str| -> Result<[u32; 3]> {
        let nums: Vec<u32> = s
            .split_whitespace()
            .map(|t| t.parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(line, format!("bad quantum numbers {s:?}")))?;
        <[u32; 3]>::try_from(nums)
            .map_err(|_| parse_err(line, format!("expected three quantum numbers in {s:?}")))
    };
    TransitionLabel::new(triple(lhs)?, triple(rhs)?)
}

fn parse_kinematics(text: &str, line: usize) -> Result<KinematicsHeader> {
    let text = text.trim();
    if text == "explicit_k" {
        return Ok(KinematicsHeader::ExplicitK);
    }
    match text.split_once('=') {
        Some((key, value)) if key.trim() == "mu_amu" => {
            Ok(KinematicsHeader::ReducedMass(parse_f64(value, line, "mu_amu")?))
        }
        _ => Err(parse_err(
            line,
            format!("kinematics must be `mu_amu=<x>` or `explicit_k`, got {text:?}"),
        )),
    }
}

/// Reads a table from the CSV format, canonicalizing row order to
/// (energy-major, J-minor).
pub fn load_smatrix_table<R: BufRead>(source: R, options: &LoadOptions) -> Result<SMatrixTable> {
    let mut transition = None;
    let mut kinematics = None;
    let mut threshold = None;
    let mut synthetic = false;
    let mut rows: Vec<Row> = Vec::new();

    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(rest) = comment.strip_prefix("transition:") {
                transition = Some(parse_transition(rest, line_no)?);
            } else if let Some(rest) = comment.strip_prefix("kinematics:") {
                kinematics = Some(parse_kinematics(rest, line_no)?);
            } else if let Some(rest) = comment.strip_prefix("threshold_mev=") {
                threshold = Some(parse_f64(rest, line_no, "threshold")?);
            } else if comment == "synthetic" {
                synthetic = true;
            }
            continue;
        }
        if trimmed.starts_with("E_meV") {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 4 && fields.len() != 5 {
            return Err(parse_err(
                line_no,
                format!("expected 4 or 5 columns, got {}", fields.len()),
            ));
        }
        let energy = parse_f64(fields[0], line_no, "E_meV")?;
        let j_raw = parse_f64(fields[1], line_no, "J")?;
        if j_raw < 0.0 || j_raw.fract() != 0.0 || j_raw > u32::MAX as f64 {
            return Err(parse_err(line_no, format!("J must be a non-negative integer, got {j_raw}")));
        }
        let s = Complex64::new(
            parse_f64(fields[2], line_no, "Re_S")?,
            parse_f64(fields[3], line_no, "Im_S")?,
        );
        let k = fields
            .get(4)
            .map(|f| parse_f64(f, line_no, "k_invA"))
            .transpose()?;
        rows.push(Row {
            line: line_no,
            energy,
            j: j_raw as u32,
            s,
            k,
        });
    }

    let transition = transition.ok_or_else(|| parse_err(0, "missing `# transition:` header"))?;
    let kin_header = kinematics.ok_or_else(|| parse_err(0, "missing `# kinematics:` header"))?;
    if rows.is_empty() {
        return Err(Error::InvalidTable("no data rows".into()));
    }

    rows.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.j.cmp(&b.j)));
    for w in rows.windows(2) {
        if w[0].energy == w[1].energy && w[0].j == w[1].j {
            return Err(Error::DuplicateCell {
                energy: w[0].energy,
                j: w[0].j,
            });
        }
    }

    let mut energies: Vec<f64> = rows.iter().map(|r| r.energy).collect();
    energies.dedup();
    let mut js: Vec<u32> = rows.iter().map(|r| r.j).collect();
    js.sort_unstable();
    js.dedup();
    let j_min = transition.j_min();
    let j_lo = js[0];
    let j_hi = *js.last().unwrap();
    if j_lo < j_min {
        return Err(Error::InvalidTable(format!(
            "J = {j_lo} is below J_min = max(omega, omega') = {j_min}"
        )));
    }
    if let Some(missing) = (j_min..=j_hi).find(|j| js.binary_search(j).is_err()) {
        return Err(Error::NonContiguousJ {
            missing,
            first: j_min,
            last: j_hi,
        });
    }

    let n_j = (j_hi - j_min + 1) as usize;
    let mut values = vec![None; energies.len() * n_j];
    let mut k_of_e: Vec<(f64, f64)> = Vec::with_capacity(energies.len());
    let mut ie = 0;
    for row in &rows {
        while energies[ie] != row.energy {
            ie += 1;
        }
        values[ie * n_j + (row.j - j_min) as usize] = Some(row.s);
        if let KinematicsHeader::ExplicitK = kin_header {
            let k = row
                .k
                .ok_or_else(|| parse_err(row.line, "explicit_k kinematics needs a k_invA column"))?;
            match k_of_e.last() {
                Some(&(e, k_prev)) if e == row.energy => {
                    if k != k_prev {
                        return Err(parse_err(
                            row.line,
                            format!("inconsistent k_invA at E = {}", row.energy),
                        ));
                    }
                }
                _ => k_of_e.push((row.energy, k)),
            }
        }
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(pos, v)| {
            v.ok_or(Error::MissingCell {
                energy: energies[pos / n_j],
                j: j_min + (pos % n_j) as u32,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let kinematics = match kin_header {
        KinematicsHeader::ReducedMass(mu_amu) => Kinematics::ReducedMass { mu_amu },
        KinematicsHeader::ExplicitK => Kinematics::Explicit { k_of_e },
    };
    SMatrixTable::new(
        transition,
        energies,
        j_hi,
        values,
        kinematics,
        threshold,
        options.unitarity_slack,
        synthetic,
    )
}

/// Writes a table in canonical order; values round-trip exactly.
pub fn write_smatrix_csv<W: Write>(table: &SMatrixTable, mut out: W) -> Result<()> {
    writeln!(out, "# transition: {}", table.transition)?;
    let explicit = match &table.kinematics {
        Kinematics::ReducedMass { mu_amu } => {
            writeln!(out, "# kinematics: mu_amu={}", fmt_sci(*mu_amu))?;
            false
        }
        Kinematics::Explicit { .. } => {
            writeln!(out, "# kinematics: explicit_k")?;
            true
        }
    };
    if let Some(t) = table.threshold_energy {
        writeln!(out, "# threshold_mev={}", fmt_sci(t))?;
    }
    if table.synthetic {
        writeln!(out, "# synthetic")?;
    }
    if explicit {
        writeln!(out, "E_meV,J,Re_S,Im_S,k_invA")?;
    } else {
        writeln!(out, "E_meV,J,Re_S,Im_S")?;
    }
    for (ie, &energy) in table.energies().iter().enumerate() {
        let k = table.kinematics.explicit_k(energy);
        for (j, s) in table.j_values().zip(table.row(ie)) {
            write!(out, "{},{},{},{}", fmt_sci(energy), j, fmt_sci(s.re), fmt_sci(s.im))?;
            match k {
                Some(k) => writeln!(out, ",{}", fmt_sci(k))?,
                None => writeln!(out)?,
            }
        }
    }
    Ok(())
}
