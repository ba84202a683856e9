use std::io::Write;

use serde::Serialize;

use super::{ReportRow, VerifyError};

pub const ROW_CSV_HEADER: &str = "hypothesis,quantity,poly,k,n,samples,estimate,estimate_im,stderr,oracle,oracle_im,tolerance,pass";

/// One CSV line per row, with a header. Missing tolerances are empty cells.
pub fn write_rows_csv<'a, W: Write>(
    out: W,
    rows: impl IntoIterator<Item = &'a ReportRow>,
) -> Result<(), VerifyError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON followed by a newline. Non-finite numbers become `null`.
pub fn write_report_json<W: Write, T: Serialize>(mut out: W, value: &T) -> Result<(), VerifyError> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::Hypothesis;

    #[test]
    fn csv_header_and_empty_tolerance() {
        let row = ReportRow {
            hypothesis: Hypothesis::Concentration,
            quantity: "variance",
            poly: "f1.g0 f2.g0".into(),
            k: 64,
            n: 64,
            samples: 100,
            estimate: 0.25,
            estimate_im: 0.0,
            stderr: 0.01,
            oracle: 0.0,
            oracle_im: 0.0,
            tolerance: None,
            pass: true,
        };
        let mut buf = Vec::new();
        write_rows_csv(&mut buf, [&row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), ROW_CSV_HEADER);
        assert_eq!(
            lines.next().unwrap(),
            "3,variance,f1.g0 f2.g0,64,64,100,0.25,0.0,0.01,0.0,0.0,,true"
        );
    }
}
