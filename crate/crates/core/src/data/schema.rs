//! Dataset schema and record types.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Customer segment tag carried by every record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Segment {
    New,
    Existing,
}

impl Segment {
    pub fn as_str(self) -> &'static str {
        match self {
            Segment::New => "new",
            Segment::Existing => "existing",
        }
    }

    pub fn parse(token: &str) -> Result<Self> {
        match token {
            "new" | "New" | "NEW" => Ok(Segment::New),
            "existing" | "Existing" | "EXISTING" => Ok(Segment::Existing),
            other => Err(Error::validation(format!(
                "unknown segment token {other:?}, expected \"new\" or \"existing\""
            ))),
        }
    }

    pub const ALL: [Segment; 2] = [Segment::New, Segment::Existing];
}

impl std::fmt::Display for Segment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Column layout of a loan dataset.
///
/// Lists the continuous and categorical feature names plus the fixed
/// bookkeeping columns (text, label, segment, cohort).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub continuous_names: Vec<String>,
    pub categorical_names: Vec<String>,
    pub text_field: String,
    pub label_field: String,
    pub segment_field: String,
    pub cohort_field: String,
}

impl FeatureSchema {
    /// Validate name uniqueness and non-emptiness.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        let fixed = [
            &self.text_field,
            &self.label_field,
            &self.segment_field,
            &self.cohort_field,
        ];
        for name in self
            .continuous_names
            .iter()
            .chain(self.categorical_names.iter())
            .chain(fixed.into_iter())
        {
            if name.is_empty() {
                return Err(Error::schema("empty column name in schema"));
            }
            if !seen.insert(name.clone()) {
                return Err(Error::schema(format!("duplicate column name {name:?}")));
            }
        }
        if self.continuous_names.is_empty() && self.categorical_names.is_empty() {
            return Err(Error::schema("schema declares no features"));
        }
        Ok(())
    }

    pub fn n_continuous(&self) -> usize {
        self.continuous_names.len()
    }

    pub fn n_categorical(&self) -> usize {
        self.categorical_names.len()
    }
}

/// One applicant row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoanRecord {
    pub id: u64,
    pub continuous: Vec<f64>,
    pub categorical: Vec<String>,
    pub text: String,
    /// 1 = the loan went 90+ days past due within the observation window.
    pub label: u8,
    pub segment: Segment,
    pub cohort: i32,
}

impl LoanRecord {
    fn check_against(&self, schema: &FeatureSchema) -> Result<()> {
        if self.continuous.len() != schema.n_continuous() {
            return Err(Error::validation(format!(
                "record {}: {} continuous values, schema declares {}",
                self.id,
                self.continuous.len(),
                schema.n_continuous()
            )));
        }
        if self.categorical.len() != schema.n_categorical() {
            return Err(Error::validation(format!(
                "record {}: {} categorical values, schema declares {}",
                self.id,
                self.categorical.len(),
                schema.n_categorical()
            )));
        }
        if self.label > 1 {
            return Err(Error::validation(format!(
                "record {}: label {} is not binary",
                self.id, self.label
            )));
        }
        for (name, value) in schema.continuous_names.iter().zip(&self.continuous) {
            if !value.is_finite() {
                return Err(Error::validation(format!(
                    "record {}: non-finite value in column {name:?}",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// An ordered collection of records conforming to one schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub records: Vec<LoanRecord>,
}

impl Dataset {
    /// Build a dataset, enforcing schema conformance and id uniqueness.
    pub fn new(schema: FeatureSchema, records: Vec<LoanRecord>) -> Result<Self> {
        schema.validate()?;
        let mut ids = std::collections::BTreeSet::new();
        for record in &records {
            record.check_against(&schema)?;
            if !ids.insert(record.id) {
                return Err(Error::validation(format!("duplicate record id {}", record.id)));
            }
        }
        Ok(Dataset { schema, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct cohorts in ascending order.
    pub fn cohorts(&self) -> Vec<i32> {
        let set: std::collections::BTreeSet<i32> =
            self.records.iter().map(|r| r.cohort).collect();
        set.into_iter().collect()
    }

    /// Number of whitespace-separated words in a record's text.
    pub fn word_count(record: &LoanRecord) -> usize {
        record.text.split_whitespace().count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> FeatureSchema {
        FeatureSchema {
            continuous_names: vec!["sales".into(), "age".into()],
            categorical_names: vec!["industry".into()],
            text_field: "assessment".into(),
            label_field: "default".into(),
            segment_field: "segment".into(),
            cohort_field: "cohort".into(),
        }
    }

    fn record(id: u64) -> LoanRecord {
        LoanRecord {
            id,
            continuous: vec![1.0, 2.0],
            categorical: vec!["farming".into()],
            text: "a short note".into(),
            label: 0,
            segment: Segment::New,
            cohort: 2010,
        }
    }

    #[test]
    fn accepts_conforming_records() {
        let ds = Dataset::new(schema(), vec![record(1), record(2)]).unwrap();
        assert_eq!(ds.len(), 2);
    }

    #[test]
    fn rejects_duplicate_ids() {
        let err = Dataset::new(schema(), vec![record(1), record(1)]).unwrap_err();
        assert!(err.to_string().contains("duplicate record id 1"));
    }

    #[test]
    fn rejects_non_binary_label() {
        let mut bad = record(3);
        bad.label = 2;
        let err = Dataset::new(schema(), vec![bad]).unwrap_err();
        assert!(err.to_string().contains("label 2"));
    }

    #[test]
    fn rejects_arity_mismatch() {
        let mut bad = record(4);
        bad.continuous.push(9.0);
        assert!(Dataset::new(schema(), vec![bad]).is_err());
    }

    #[test]
    fn schema_rejects_name_collision() {
        let mut s = schema();
        s.categorical_names.push("sales".into());
        assert!(s.validate().is_err());
    }
}
