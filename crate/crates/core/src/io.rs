//! CSV writers and readers for every artifact the tool emits.
//!
//! Floats are written with 17 significant digits (`{:.16e}`) so a written
//! file parses back to bit-identical values; lines end with LF.

use crate::basin::{BasinBoundary, SafeRegion};
use crate::simulate::{BasinGrid, CriteriaRow, StrobeOrbit};
use crate::slow_flow::EnvelopePoint;
use std::io::{self, BufRead, Write};

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: expected header {expected:?}, found {found:?}")]
    BadHeader {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("line {line}: {message}")]
    BadRecord { line: usize, message: String },
}

fn parse_f64(s: &str, line: usize) -> Result<f64, CsvError> {
    s.parse().map_err(|_| CsvError::BadRecord {
        line,
        message: format!("bad float {s:?}"),
    })
}

fn parse_usize(s: &str, line: usize) -> Result<usize, CsvError> {
    s.parse().map_err(|_| CsvError::BadRecord {
        line,
        message: format!("bad integer {s:?}"),
    })
}

fn expect_header(got: Option<io::Result<String>>, want: &str) -> Result<(), CsvError> {
    let found = got.transpose()?.unwrap_or_default();
    if found.trim_end() != want {
        return Err(CsvError::BadHeader {
            line: 1,
            expected: want.to_string(),
            found,
        });
    }
    Ok(())
}

pub const GRID_HEADER: &str = "q0,p0,escaped,escape_time_ec";

/// `q0,p0,escaped,escape_time_ec` — one row per cell in index order; the
/// time field is empty for non-escaping cells.
pub fn write_grid_csv<W: Write>(w: &mut W, grid: &BasinGrid) -> io::Result<()> {
    writeln!(w, "{GRID_HEADER}")?;
    for (idx, cell) in grid.cells.iter().enumerate() {
        let ic = grid.ic_at(idx % grid.nx, idx / grid.nx);
        let time = cell.escape_time_ec.map(fmt).unwrap_or_default();
        writeln!(w, "{},{},{},{}", fmt(ic.q), fmt(ic.p), cell.escaped, time)?;
    }
    Ok(())
}

/// Rows of a grid CSV: `(q0, p0, escaped, escape_time_ec)`.
pub fn read_grid_csv<R: BufRead>(r: R) -> Result<Vec<(f64, f64, bool, Option<f64>)>, CsvError> {
    let mut lines = r.lines();
    expect_header(lines.next(), GRID_HEADER)?;
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let n = i + 2;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(CsvError::BadRecord {
                line: n,
                message: format!("expected 4 fields, got {}", parts.len()),
            });
        }
        let escaped = parts[2].parse().map_err(|_| CsvError::BadRecord {
            line: n,
            message: format!("bad bool {:?}", parts[2]),
        })?;
        let time = if parts[3].is_empty() {
            None
        } else {
            Some(parse_f64(parts[3], n)?)
        };
        out.push((
            parse_f64(parts[0], n)?,
            parse_f64(parts[1], n)?,
            escaped,
            time,
        ));
    }
    Ok(out)
}

pub const STROBE_HEADER: &str = "traj_id,iter,q,p";

/// `traj_id,iter,q,p` — every retained stroboscopic sample.
pub fn write_strobe_csv<W: Write>(w: &mut W, orbits: &[StrobeOrbit]) -> io::Result<()> {
    writeln!(w, "{STROBE_HEADER}")?;
    for (id, orbit) in orbits.iter().enumerate() {
        for (iter, &(q, p)) in orbit.samples.iter().enumerate() {
            writeln!(w, "{id},{iter},{},{}", fmt(q), fmt(p))?;
        }
    }
    Ok(())
}

/// Rows of a strobe CSV: `(traj_id, iter, q, p)`.
pub fn read_strobe_csv<R: BufRead>(r: R) -> Result<Vec<(usize, usize, f64, f64)>, CsvError> {
    let mut lines = r.lines();
    expect_header(lines.next(), STROBE_HEADER)?;
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let n = i + 2;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(CsvError::BadRecord {
                line: n,
                message: format!("expected 4 fields, got {}", parts.len()),
            });
        }
        out.push((
            parse_usize(parts[0], n)?,
            parse_usize(parts[1], n)?,
            parse_f64(parts[2], n)?,
            parse_f64(parts[3], n)?,
        ));
    }
    Ok(out)
}

pub const CRITERIA_HEADER: &str = "F,repeat,A_q,A_E,rel_diff";

/// `F,repeat,A_q,A_E,rel_diff` — one row per (amplitude, repeat).
pub fn write_criteria_csv<W: Write>(w: &mut W, rows: &[CriteriaRow]) -> io::Result<()> {
    writeln!(w, "{CRITERIA_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt(r.f),
            r.repeat,
            r.a_q,
            r.a_e,
            fmt(r.rel_diff)
        )?;
    }
    Ok(())
}

pub fn read_criteria_csv<R: BufRead>(r: R) -> Result<Vec<CriteriaRow>, CsvError> {
    let mut lines = r.lines();
    expect_header(lines.next(), CRITERIA_HEADER)?;
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let n = i + 2;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(CsvError::BadRecord {
                line: n,
                message: format!("expected 5 fields, got {}", parts.len()),
            });
        }
        out.push(CriteriaRow {
            f: parse_f64(parts[0], n)?,
            repeat: parse_usize(parts[1], n)?,
            a_q: parse_usize(parts[2], n)?,
            a_e: parse_usize(parts[3], n)?,
            rel_diff: parse_f64(parts[4], n)?,
        });
    }
    Ok(out)
}

pub const AREA_HEADER: &str = "t_eval_ec,safe_pixels";

/// `t_eval_ec,safe_pixels` — the area-decay series.
pub fn write_area_csv<W: Write>(w: &mut W, series: &[(f64, usize)]) -> io::Result<()> {
    writeln!(w, "{AREA_HEADER}")?;
    for &(t, n) in series {
        writeln!(w, "{},{n}", fmt(t))?;
    }
    Ok(())
}

pub fn read_area_csv<R: BufRead>(r: R) -> Result<Vec<(f64, usize)>, CsvError> {
    let mut lines = r.lines();
    expect_header(lines.next(), AREA_HEADER)?;
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let n = i + 2;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 2 {
            return Err(CsvError::BadRecord {
                line: n,
                message: format!("expected 2 fields, got {}", parts.len()),
            });
        }
        out.push((parse_f64(parts[0], n)?, parse_usize(parts[1], n)?));
    }
    Ok(out)
}

pub const BOUNDARY_HEADER: &str = "branch_id,basin_type,gamma,xi,q0,p0";

/// `branch_id,basin_type,gamma,xi,q0,p0` — one row per boundary sample,
/// branches numbered in region order.
pub fn write_boundary_csv<W: Write>(w: &mut W, region: &SafeRegion) -> io::Result<()> {
    writeln!(w, "{BOUNDARY_HEADER}")?;
    for (id, b) in region.boundaries.iter().enumerate() {
        write_boundary_rows(w, id, b)?;
    }
    Ok(())
}

fn write_boundary_rows<W: Write>(w: &mut W, id: usize, b: &BasinBoundary) -> io::Result<()> {
    for (&(gamma, xi), &(q, p)) in b.cylinder.iter().zip(b.plane.iter()) {
        writeln!(
            w,
            "{id},{},{},{},{},{}",
            b.class.as_str(),
            fmt(gamma),
            fmt(xi),
            fmt(q),
            fmt(p)
        )?;
    }
    Ok(())
}

/// Rows of a boundary CSV: `(branch_id, basin_type, gamma, xi, q0, p0)`.
pub fn read_boundary_csv<R: BufRead>(
    r: R,
) -> Result<Vec<(usize, String, f64, f64, f64, f64)>, CsvError> {
    let mut lines = r.lines();
    expect_header(lines.next(), BOUNDARY_HEADER)?;
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let n = i + 2;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 6 {
            return Err(CsvError::BadRecord {
                line: n,
                message: format!("expected 6 fields, got {}", parts.len()),
            });
        }
        out.push((
            parse_usize(parts[0], n)?,
            parts[1].to_string(),
            parse_f64(parts[2], n)?,
            parse_f64(parts[3], n)?,
            parse_f64(parts[4], n)?,
            parse_f64(parts[5], n)?,
        ));
    }
    Ok(out)
}

pub const FCR_HEADER: &str = "omega,f_cr,mechanism";

/// `omega,f_cr,mechanism` — analytic or numeric threshold points.
pub fn write_fcr_csv<W: Write>(w: &mut W, points: &[EnvelopePoint]) -> io::Result<()> {
    writeln!(w, "{FCR_HEADER}")?;
    for p in points {
        writeln!(
            w,
            "{},{},{}",
            fmt(p.omega),
            fmt(p.f_cr),
            p.mechanism.as_str()
        )?;
    }
    Ok(())
}

/// Rows of a threshold CSV: `(omega, f_cr, mechanism)`.
pub fn read_fcr_csv<R: BufRead>(r: R) -> Result<Vec<(f64, f64, String)>, CsvError> {
    let mut lines = r.lines();
    expect_header(lines.next(), FCR_HEADER)?;
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let n = i + 2;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(CsvError::BadRecord {
                line: n,
                message: format!("expected 3 fields, got {}", parts.len()),
            });
        }
        out.push((
            parse_f64(parts[0], n)?,
            parse_f64(parts[1], n)?,
            parts[2].to_string(),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EscapeCriterion, PhasePoint};
    use crate::simulate::{BasinGrid, CellOutcome, Extent, StrobeOrbit};
    use crate::slow_flow::MechanismKind;

    #[test]
    fn float_formatting_round_trips_exactly() {
        let values = [
            0.0,
            1.0,
            std::f64::consts::PI,
            -2.2250738585072014e-308,
            0.1 + 0.2,
            1.6857503548125961,
            f64::MAX,
        ];
        for v in values {
            let parsed: f64 = fmt(v).parse().unwrap();
            assert_eq!(parsed.to_bits(), v.to_bits(), "round trip of {v}");
        }
    }

    #[test]
    fn grid_round_trip() {
        let grid = BasinGrid {
            extent: Extent::unit_square(),
            nx: 3,
            ny: 2,
            criterion: EscapeCriterion::Energy { xi_max: 0.2 },
            horizon_ec: 10.0,
            cells: vec![
                CellOutcome {
                    escaped: false,
                    escape_time_ec: None,
                },
                CellOutcome {
                    escaped: true,
                    escape_time_ec: Some(0.0),
                },
                CellOutcome {
                    escaped: true,
                    escape_time_ec: Some(3.25),
                },
                CellOutcome {
                    escaped: false,
                    escape_time_ec: None,
                },
                CellOutcome {
                    escaped: true,
                    escape_time_ec: Some(7.5),
                },
                CellOutcome {
                    escaped: false,
                    escape_time_ec: None,
                },
            ],
        };
        let mut buf = Vec::new();
        write_grid_csv(&mut buf, &grid).unwrap();
        let rows = read_grid_csv(&buf[..]).unwrap();
        assert_eq!(rows.len(), 6);
        for (idx, row) in rows.iter().enumerate() {
            let ic = grid.ic_at(idx % 3, idx / 3);
            assert_eq!(row.0, ic.q);
            assert_eq!(row.1, ic.p);
            assert_eq!(row.2, grid.cells[idx].escaped);
            assert_eq!(row.3, grid.cells[idx].escape_time_ec);
        }
        assert!(!buf.windows(2).any(|w| w == b"\r\n"), "LF endings only");
    }

    #[test]
    fn strobe_and_criteria_and_area_round_trip() {
        let orbits = vec![StrobeOrbit {
            ic: PhasePoint::new(0.1, -0.2),
            samples: vec![(0.1, -0.2), (0.11, -0.19)],
            escaped: false,
        }];
        let mut buf = Vec::new();
        write_strobe_csv(&mut buf, &orbits).unwrap();
        let rows = read_strobe_csv(&buf[..]).unwrap();
        assert_eq!(rows, vec![(0, 0, 0.1, -0.2), (0, 1, 0.11, -0.19)]);

        let rows_in = vec![CriteriaRow {
            f: 0.011,
            repeat: 3,
            a_q: 1234,
            a_e: 1200,
            rel_diff: 34.0 / 1200.0,
        }];
        let mut buf = Vec::new();
        write_criteria_csv(&mut buf, &rows_in).unwrap();
        assert_eq!(read_criteria_csv(&buf[..]).unwrap(), rows_in);

        let series = vec![(10.0, 400), (20.0, 399)];
        let mut buf = Vec::new();
        write_area_csv(&mut buf, &series).unwrap();
        assert_eq!(read_area_csv(&buf[..]).unwrap(), series);
    }

    #[test]
    fn fcr_round_trip_and_header_check() {
        let pts = vec![EnvelopePoint {
            omega: 0.9,
            f_cr: 0.042,
            mechanism: MechanismKind::Sm,
        }];
        let mut buf = Vec::new();
        write_fcr_csv(&mut buf, &pts).unwrap();
        let rows = read_fcr_csv(&buf[..]).unwrap();
        assert_eq!(rows, vec![(0.9, 0.042, "SM".to_string())]);

        let bad = b"omega,fcr\n1,2,MM\n";
        assert!(matches!(
            read_fcr_csv(&bad[..]),
            Err(CsvError::BadHeader { .. })
        ));
    }
}
