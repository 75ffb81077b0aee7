//! CSV and JSON output formats.
//!
//! CSV files start with `#` comment lines carrying metadata (always
//! `schema_version` and `config_hash`), then a header row, then data rows
//! with every float printed to 17 significant digits.

use std::fmt::Write as _;
use std::io::{self, Write};

use sha2::{Digest, Sha256};

use crate::analytic::{
    auxiliary_flow, instanton_sigma_z, potential_u, potential_v, wei_norman_evaluate,
};
use crate::error::Result;
use crate::integrator::TrajectoryRecord;

pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const TRAJECTORY_COLUMNS: [&str; 7] =
    ["t", "sx", "sy", "sz", "n_photon", "log_norm", "leakage"];
pub const ANALYTIC_COLUMNS: [&str; 7] =
    ["t", "f1_im", "f3", "sigma_z_instanton", "x_aux", "U", "V"];

/// 17 significant digits, round-trip exact.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// SHA-256 of the canonical config bytes, hex encoded.
pub fn config_hash(canonical: &[u8]) -> String {
    hex::encode(Sha256::digest(canonical))
}

pub fn write_csv<W: Write>(
    mut w: W,
    meta: &[(&str, String)],
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> io::Result<()> {
    writeln!(w, "# schema_version: {CSV_SCHEMA_VERSION}")?;
    for (k, v) in meta {
        writeln!(w, "# {k}: {v}")?;
    }
    writeln!(w, "{}", header.join(","))?;
    let mut line = String::new();
    for row in rows {
        line.clear();
        for (i, x) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            let _ = write!(line, "{}", fmt_f64(*x));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn write_trajectory_csv<W: Write>(
    w: W,
    rec: &TrajectoryRecord,
    meta: &[(&str, String)],
) -> io::Result<()> {
    let rows = (0..rec.len()).map(|i| {
        let b = rec.bloch[i];
        vec![
            rec.times[i],
            b.x,
            b.y,
            b.z,
            rec.photon_expectation[i],
            rec.log_norm[i],
            rec.leakage[i],
        ]
    });
    write_csv(w, meta, &TRAJECTORY_COLUMNS, rows)
}

/// Rows of the closed-form quantities on `n_points` samples of [0, t_end].
pub fn analytic_rows(
    alpha: f64,
    sigma_z0: f64,
    t_end: f64,
    n_points: usize,
) -> Result<Vec<Vec<f64>>> {
    let times = crate::integrator::linspace(t_end, n_points);
    let wn = wei_norman_evaluate(alpha, 0.0, &times)?;
    let x0 = (1.0 - sigma_z0) / 2.0;
    let x = auxiliary_flow(x0, alpha, &times)?;
    Ok(times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            vec![
                t,
                wn.f1[i].im,
                wn.f3[i].re,
                instanton_sigma_z(sigma_z0, alpha, t),
                x[i],
                potential_u(alpha, x[i]),
                potential_v(alpha, x[i]),
            ]
        })
        .collect())
}

/// Parsed CSV: metadata from `#` lines, header, numeric rows.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

pub fn read_csv(text: &str) -> std::result::Result<CsvTable, String> {
    let mut meta = Vec::new();
    let mut header = None;
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if let Some(c) = line.strip_prefix('#') {
            if let Some((k, v)) = c.split_once(':') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            header = Some(line.split(',').map(str::to_string).collect::<Vec<_>>());
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| format!("line {}: {e}", ln + 1))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(CsvTable {
        meta,
        header: header.ok_or("missing header row")?,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn seventeen_digits_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let s = fmt_f64(x);
            prop_assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            prop_assert_eq!(mantissa.len(), 17);
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_csv(
            &mut buf,
            &[("config_hash", "abc".into())],
            &["t", "v"],
            vec![vec![0.0, 1.5], vec![1.0, -2.0]],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# schema_version: 1");
        assert_eq!(lines[1], "# config_hash: abc");
        assert_eq!(lines[2], "t,v");
        assert_eq!(lines[3], "0.0000000000000000e0,1.5000000000000000e0");
        let t = read_csv(&text).unwrap();
        assert_eq!(t.column("v").unwrap(), vec![1.5, -2.0]);
        assert_eq!(t.meta("schema_version"), Some("1"));
    }

    #[test]
    fn analytic_rows_link_columns() {
        let rows = analytic_rows(3.0, 1.0, 2.0, 21).unwrap();
        assert_eq!(rows[0][3], 1.0);
        for r in &rows {
            assert_eq!(r[4], (1.0 - r[3]) / 2.0);
        }
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(
            config_hash(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
