//! Pole CSV: `axis,fixed_value,re_pos,im_pos,re_residue,im_residue,pole_zero_dist,stability,flags`.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use super::{Axis, ComplexPole, PoleQuality};
use crate::error::{Error, Result};
use crate::fmt_sci;

pub const POLES_HEADER: &str =
    "axis,fixed_value,re_pos,im_pos,re_residue,im_residue,pole_zero_dist,stability,flags";

/// A pole tagged with the axis it lives on and the held-constant value.
#[derive(Clone, Debug, PartialEq)]
pub struct PoleRecord {
    pub axis: Axis,
    pub fixed_value: f64,
    pub pole: ComplexPole,
}

pub fn write_poles_csv<W: Write>(records: &[PoleRecord], mut out: W) -> Result<()> {
    writeln!(out, "{POLES_HEADER}")?;
    for r in records {
        let res = r.pole.residue.unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.axis.tag(),
            fmt_sci(r.fixed_value),
            fmt_sci(r.pole.position.re),
            fmt_sci(r.pole.position.im),
            fmt_sci(res.re),
            fmt_sci(res.im),
            fmt_sci(r.pole.quality.pole_zero_distance),
            fmt_sci(r.pole.quality.stability.unwrap_or(f64::NAN)),
            r.pole.flags().join(";"),
        )?;
    }
    Ok(())
}

pub fn read_poles_csv<R: BufRead>(source: R) -> Result<Vec<PoleRecord>> {
    let mut out = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with("axis") {
            continue;
        }
        let fields: Vec<&str> = t.split(',').map(str::trim).collect();
        if fields.len() != 9 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 9 columns, got {}", fields.len()),
            });
        }
        let num = |i: usize| -> Result<f64> {
            fields[i].parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("cannot parse number from {:?}", fields[i]),
            })
        };
        let axis = Axis::from_tag(fields[0]).ok_or_else(|| Error::Parse {
            line: line_no,
            msg: format!("unknown axis {:?}", fields[0]),
        })?;
        let residue = Complex64::new(num(4)?, num(5)?);
        let stability = num(7)?;
        let flags: Vec<&str> = fields[8].split(';').filter(|f| !f.is_empty()).collect();
        out.push(PoleRecord {
            axis,
            fixed_value: num(1)?,
            pole: ComplexPole {
                position: Complex64::new(num(2)?, num(3)?),
                residue: (!residue.re.is_nan()).then_some(residue),
                multiplicity: if flags.contains(&"multiple") { 2 } else { 1 },
                quality: PoleQuality {
                    pole_zero_distance: num(6)?,
                    stability: (!stability.is_nan()).then_some(stability),
                    unpolished: flags.contains(&"unpolished"),
                },
            },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pole_rows_round_trip() {
        let rec = PoleRecord {
            axis: Axis::AngularMomentum,
            fixed_value: 60.5,
            pole: ComplexPole {
                position: Complex64::new(10.3, 0.4),
                residue: Some(Complex64::new(0.05, -0.01)),
                multiplicity: 1,
                quality: PoleQuality {
                    pole_zero_distance: f64::INFINITY,
                    stability: Some(1.0),
                    unpolished: true,
                },
            },
        };
        let mut buf = Vec::new();
        write_poles_csv(std::slice::from_ref(&rec), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(POLES_HEADER));
        assert!(text.trim_end().ends_with("unpolished"));
        assert_eq!(read_poles_csv(buf.as_slice()).unwrap(), vec![rec]);
    }
}
