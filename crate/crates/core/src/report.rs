//! Report rows and their CSV/JSON rendering.
//!
//! Counts are printed as exact integers, floats with six significant digits
//! in `%g` style.

use std::io::Write;

use serde::Serialize;

use crate::error::FormatError;

pub const REPORT_COLUMNS: [&str; 9] = [
    "config_id",
    "strategy",
    "layer_id",
    "mc",
    "params",
    "activations",
    "ai",
    "energy_proxy",
    "epf_measured_mj",
];

pub const TOTAL: &str = "TOTAL";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub config_id: String,
    pub strategy: String,
    /// Layer id, or `TOTAL` for network totals.
    pub layer_id: String,
    pub mc: u64,
    pub params: u64,
    pub activations: u64,
    pub ai: f64,
    pub energy_proxy: Option<f64>,
    pub epf_measured_mj: Option<f64>,
}

/// `%g` formatting with `digits` significant digits.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn fmt_float(x: f64) -> String {
    fmt_sig(x, 6)
}

/// The value a float takes after printing with six significant digits.
pub fn round_sig(x: f64) -> f64 {
    fmt_float(x).parse().unwrap_or(x)
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

impl ReportRow {
    pub fn csv_record(&self) -> [String; 9] {
        [
            self.config_id.clone(),
            self.strategy.clone(),
            self.layer_id.clone(),
            self.mc.to_string(),
            self.params.to_string(),
            self.activations.to_string(),
            fmt_float(self.ai),
            opt(self.energy_proxy),
            opt(self.epf_measured_mj),
        ]
    }

    /// Copy with floats rounded as they are printed.
    pub fn rounded(&self) -> ReportRow {
        ReportRow {
            ai: round_sig(self.ai),
            energy_proxy: self.energy_proxy.map(round_sig),
            epf_measured_mj: self.epf_measured_mj.map(round_sig),
            ..self.clone()
        }
    }
}

pub fn write_csv<I, R>(header: &[&str], rows: I, out: impl Write) -> Result<(), FormatError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(header)?;
    for r in rows {
        writer.write_record(r)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_report_csv(rows: &[ReportRow], out: impl Write) -> Result<(), FormatError> {
    write_csv(&REPORT_COLUMNS, rows.iter().map(ReportRow::csv_record), out)
}

pub fn write_report_json(rows: &[ReportRow], mut out: impl Write) -> Result<(), FormatError> {
    let rounded: Vec<ReportRow> = rows.iter().map(ReportRow::rounded).collect();
    serde_json::to_writer_pretty(&mut out, &rounded).map_err(std::io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

pub fn read_report_csv(input: impl std::io::Read) -> Result<Vec<ReportRow>, FormatError> {
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != REPORT_COLUMNS {
        return Err(FormatError::Schema(format!(
            "unexpected report header `{}`",
            header.join(",")
        )));
    }
    let parse_err = |what: &str, v: &str| FormatError::Schema(format!("bad {what} `{v}`"));
    reader
        .records()
        .map(|rec| {
            let rec = rec?;
            let int = |i: usize| {
                rec[i]
                    .parse::<u64>()
                    .map_err(|_| parse_err(REPORT_COLUMNS[i], &rec[i]))
            };
            let float = |i: usize| {
                rec[i]
                    .parse::<f64>()
                    .map_err(|_| parse_err(REPORT_COLUMNS[i], &rec[i]))
            };
            let optional = |i: usize| {
                if rec[i].is_empty() {
                    Ok(None)
                } else {
                    float(i).map(Some)
                }
            };
            Ok(ReportRow {
                config_id: rec[0].to_string(),
                strategy: rec[1].to_string(),
                layer_id: rec[2].to_string(),
                mc: int(3)?,
                params: int(4)?,
                activations: int(5)?,
                ai: float(6)?,
                energy_proxy: optional(7)?,
                epf_measured_mj: optional(8)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sig_formatting() {
        assert_eq!(fmt_sig(4.398_998_9, 6), "4.399");
        assert_eq!(fmt_sig(430_617.264_419, 6), "430617");
        assert_eq!(fmt_sig(1_234_567.0, 6), "1.23457e+06");
        assert_eq!(fmt_sig(0.000_012_345_67, 6), "1.23457e-05");
        assert_eq!(fmt_sig(0.5, 6), "0.5");
        assert_eq!(fmt_sig(-41.0625, 6), "-41.0625");
        assert_eq!(fmt_sig(1.0, 6), "1");
        assert_eq!(fmt_sig(0.0, 6), "0");
        assert_eq!(fmt_sig(999_999.7, 6), "1e+06");
    }

    fn row(ai: f64, e: Option<f64>) -> ReportRow {
        ReportRow {
            config_id: "mobilenet_v1/e2gc/G=8".into(),
            strategy: "e2gc:G=8".into(),
            layer_id: TOTAL.into(),
            mc: 690_442_216,
            params: 4_544_488,
            activations: 12_345_678,
            ai,
            energy_proxy: e,
            epf_measured_mj: None,
        }
    }

    proptest! {
        #[test]
        fn csv_emit_parse_emit_is_stable(ai in 1e-6f64..1e9, e in proptest::option::of(1e-3f64..1e12)) {
            let rows = vec![row(ai, e)];
            let mut first = Vec::new();
            write_report_csv(&rows, &mut first).unwrap();
            let parsed = read_report_csv(first.as_slice()).unwrap();
            prop_assert_eq!(&parsed[0], &rows[0].rounded());
            let mut second = Vec::new();
            write_report_csv(&parsed, &mut second).unwrap();
            prop_assert_eq!(first, second);
        }
    }
}
