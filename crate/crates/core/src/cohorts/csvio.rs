use std::io::{Read, Write};
use std::path::Path;

use super::{feature_names, is_binary_feature, validate_row, Cohort, FEATURES};
use crate::data::Dataset;
use crate::error::{Error, Result};

fn header() -> Vec<String> {
    let mut h = feature_names();
    h.push("Response".into());
    h
}

pub fn write_csv_to<W: Write>(cohort: &Cohort, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header())?;
    for (i, row) in cohort.data.rows().enumerate() {
        let mut rec: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(j, v)| if is_binary_feature(j) { format!("{}", *v as u8) } else { format!("{v}") })
            .collect();
        rec.push(cohort.data.label(i).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(cohort: &Cohort, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_csv_to(cohort, std::io::BufWriter::new(f))
}

/// Parse a cohort; `row` in errors is the 1-based data row.
pub fn read_csv<R: Read>(name: &str, input: R) -> Result<Cohort> {
    let mut r = csv::Reader::from_reader(input);
    let expected = header();
    let got: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if got != expected {
        let column = expected
            .iter()
            .zip(got.iter().map(Some).chain(std::iter::repeat(None)))
            .find(|(e, g)| g.map(|g| g != *e).unwrap_or(true))
            .map(|(e, _)| e.clone())
            .unwrap_or_else(|| "header".into());
        return Err(Error::Parse { row: 0, column, message: "header does not match the schema".into() });
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row_no = i + 1;
        let rec = rec?;
        if rec.len() != expected.len() {
            return Err(Error::Parse {
                row: row_no,
                column: expected.get(rec.len()).cloned().unwrap_or_else(|| "Response".into()),
                message: format!("expected {} fields, found {}", expected.len(), rec.len()),
            });
        }
        let mut row = Vec::with_capacity(FEATURES);
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                row: row_no,
                column: expected[j].clone(),
                message: format!("cannot parse {field:?} as a number"),
            })?;
            if j < FEATURES {
                row.push(v);
            } else if v == 0.0 || v == 1.0 {
                y.push(v as u8);
            } else {
                return Err(Error::Parse {
                    row: row_no,
                    column: "Response".into(),
                    message: format!("response must be 0 or 1, got {field}"),
                });
            }
        }
        validate_row(&row, row_no)?;
        x.extend_from_slice(&row);
    }
    Cohort::new(name, Dataset::new(FEATURES, x, y)?)
}

pub fn load_csv(path: &Path) -> Result<Cohort> {
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("cohort").to_string();
    read_csv(&name, std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::super::{generate_cohorts, preset};
    use super::*;

    #[test]
    fn round_trip_is_lossless_and_byte_stable() {
        let cohorts = generate_cohorts(&preset("desk").unwrap(), 8).unwrap();
        let mut a = Vec::new();
        write_csv_to(&cohorts[0], &mut a).unwrap();
        let back = read_csv(&cohorts[0].name, a.as_slice()).unwrap();
        assert_eq!(back, cohorts[0]);
        let mut b = Vec::new();
        write_csv_to(&generate_cohorts(&preset("desk").unwrap(), 8).unwrap()[0], &mut b).unwrap();
        assert_eq!(a, b);
    }

    fn csv_with(row: &str) -> String {
        format!("{}\n{row}\n", header().join(","))
    }

    #[test]
    fn errors_name_row_and_column() {
        let ok = "5.0,1,3.9,2.5,60,1,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,1";
        assert!(read_csv("t", csv_with(ok).as_bytes()).is_ok());
        let bad = ok.replacen("3.9", "abc", 1);
        match read_csv("t", csv_with(&bad).as_bytes()) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(column, "Albumin");
            }
            other => panic!("{other:?}"),
        }
        let two_flags = "5.0,1,3.9,2.5,60,1,1,0,0,0,0,0,0,0,0,0,0,0,0,0,0,1";
        assert!(matches!(read_csv("t", csv_with(two_flags).as_bytes()), Err(Error::Validation { row: 1, .. })));
        let bad_header = ok.to_string();
        assert!(matches!(read_csv("t", bad_header.as_bytes()), Err(Error::Parse { row: 0, .. })));
    }
}
