//! Measurement CSV: `config_id,batch_size,device,epf_millijoule` with a
//! required header row. Lines starting with `#` are comments.

use std::io::{Read, Write};

use crate::error::FormatError;
use crate::planner::MeasurementRecord;

const HEADER: [&str; 4] = ["config_id", "batch_size", "device", "epf_millijoule"];

pub fn read_measurements(input: impl Read) -> Result<Vec<MeasurementRecord>, FormatError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != HEADER {
        return Err(FormatError::Schema(format!(
            "measurement header must be `{}`, found `{}`",
            HEADER.join(","),
            header.join(",")
        )));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(FormatError::from))
        .collect()
}

pub fn write_measurements(
    records: &[MeasurementRecord],
    out: impl Write,
) -> Result<(), FormatError> {
    let mut writer = csv::Writer::from_writer(out);
    for r in records {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

/// The bundled published measurements.
pub fn bundled() -> Vec<MeasurementRecord> {
    read_measurements(crate::blueprints::BUNDLED_EPF_CSV.as_bytes()).expect("bundled csv parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_has_all_cells() {
        let recs = bundled();
        assert_eq!(recs.len(), 2 * 3 * 22);
        assert_eq!(recs[0].config_id, "mobilenet_v1/e2gc/G=1");
        assert_eq!(recs[0].epf_millijoule, 689.0);
        for r in &recs {
            crate::blueprints::parse_config_id(&r.config_id).unwrap();
        }
    }

    #[test]
    fn header_required() {
        let err = read_measurements("a,b,c,d\nx,1,P100,3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, FormatError::Schema(_)));
        assert!(read_measurements(
            "config_id,batch_size,device,epf_millijoule\nx,one,P100,3\n".as_bytes()
        )
        .is_err());
    }

    #[test]
    fn write_then_read() {
        let recs = bundled();
        let mut buf = Vec::new();
        write_measurements(&recs[..5], &mut buf).unwrap();
        assert_eq!(read_measurements(buf.as_slice()).unwrap(), recs[..5]);
    }
}
