//! CSV reading and writing for datasets.
//!
//! Files carry a header row; columns are looked up by name so column order is
//! not significant on input. Text fields are quoted by the writer whenever
//! they contain the delimiter.

use std::path::Path;

use crate::data::schema::{Dataset, FeatureSchema, LoanRecord, Segment};
use crate::error::{Error, Result};

const ID_COLUMN: &str = "id";

/// Parse a CSV file into a dataset; row order is preserved.
pub fn load_dataset(path: &Path, schema: &FeatureSchema) -> Result<Dataset> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let position = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::schema(format!("missing column {name:?}")))
    };

    let id_pos = position(ID_COLUMN)?;
    let continuous_pos: Vec<usize> = schema
        .continuous_names
        .iter()
        .map(|n| position(n))
        .collect::<Result<_>>()?;
    let categorical_pos: Vec<usize> = schema
        .categorical_names
        .iter()
        .map(|n| position(n))
        .collect::<Result<_>>()?;
    let text_pos = position(&schema.text_field)?;
    let label_pos = position(&schema.label_field)?;
    let segment_pos = position(&schema.segment_field)?;
    let cohort_pos = position(&schema.cohort_field)?;

    let mut records = Vec::new();
    for (row_number, row) in reader.records().enumerate() {
        let row = row?;
        let field = |pos: usize| -> Result<&str> {
            row.get(pos).ok_or_else(|| {
                Error::format(format!("row {}: too few fields", row_number + 1))
            })
        };
        let id: u64 = field(id_pos)?.parse().map_err(|_| {
            Error::validation(format!("row {}: unparseable id {:?}", row_number + 1, &row[id_pos]))
        })?;
        let parse_f64 = |pos: usize| -> Result<f64> {
            field(pos)?.parse().map_err(|_| {
                Error::validation(format!(
                    "record {id}: unparseable numeric value {:?} in column {:?}",
                    &row[pos], &headers[pos]
                ))
            })
        };
        let continuous = continuous_pos.iter().map(|&p| parse_f64(p)).collect::<Result<_>>()?;
        let categorical = categorical_pos
            .iter()
            .map(|&p| field(p).map(String::from))
            .collect::<Result<_>>()?;
        let label: u8 = field(label_pos)?.parse().map_err(|_| {
            Error::validation(format!("record {id}: unparseable label {:?}", &row[label_pos]))
        })?;
        if label > 1 {
            return Err(Error::validation(format!("record {id}: label {label} is not binary")));
        }
        let segment = Segment::parse(field(segment_pos)?)
            .map_err(|e| Error::validation(format!("record {id}: {e}")))?;
        let cohort: i32 = field(cohort_pos)?.parse().map_err(|_| {
            Error::validation(format!("record {id}: unparseable cohort {:?}", &row[cohort_pos]))
        })?;
        records.push(LoanRecord {
            id,
            continuous,
            categorical,
            text: field(text_pos)?.to_string(),
            label,
            segment,
            cohort,
        });
    }
    Dataset::new(schema.clone(), records)
}

/// Write a dataset as CSV in canonical column order.
///
/// Floats are formatted with the shortest representation that parses back to
/// the identical value, so a write/load round trip is exact.
pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    let schema = &dataset.schema;
    let mut header: Vec<&str> = vec![ID_COLUMN];
    header.extend(schema.continuous_names.iter().map(String::as_str));
    header.extend(schema.categorical_names.iter().map(String::as_str));
    header.push(&schema.text_field);
    header.push(&schema.label_field);
    header.push(&schema.segment_field);
    header.push(&schema.cohort_field);
    writer.write_record(&header)?;

    for record in &dataset.records {
        let mut row: Vec<String> = vec![record.id.to_string()];
        row.extend(record.continuous.iter().map(|v| v.to_string()));
        row.extend(record.categorical.iter().cloned());
        row.push(record.text.clone());
        row.push(record.label.to_string());
        row.push(record.segment.as_str().to_string());
        row.push(record.cohort.to_string());
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}
