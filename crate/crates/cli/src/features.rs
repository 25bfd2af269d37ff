use credfuse::data::{
    apply_scaler, CategoryCodec, Dataset, ScalerParams, Segment,
};
use credfuse::eval::FeatureSubset;
use credfuse::text::{encode_for_transformer, tokenize, LsaModel, TokenSequence, TokenVocab};

use crate::error::{CliError, CliResult};

const FIXED_COLUMNS: [&str; 5] = ["id", "label", "segment", "cohort", "word_count"];

/// One split part, fully encoded: category codes, scaled continuous values,
/// concept projections and token ids per row. The CSV form round-trips
/// bit-exactly, so every stage sees identical inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub cat_names: Vec<String>,
    pub cont_names: Vec<String>,
    /// Concept dimensionality of the `lsa` columns.
    pub k: usize,
    pub ids: Vec<u64>,
    pub labels: Vec<u8>,
    pub segments: Vec<Segment>,
    pub cohorts: Vec<i32>,
    pub word_counts: Vec<usize>,
    pub codes: Vec<Vec<usize>>,
    pub cont: Vec<Vec<f64>>,
    pub lsa: Vec<Vec<f64>>,
    /// Leading classifier token plus real token ids; padding is dropped.
    pub tokens: Vec<Vec<u32>>,
}

impl FeatureTable {
    /// Encode the indexed rows of a dataset with already-fitted transforms.
    pub fn build(
        dataset: &Dataset,
        idx: &[usize],
        scaler: &ScalerParams,
        codec: &CategoryCodec,
        lsa: &LsaModel,
        vocab: &TokenVocab,
        max_len: usize,
    ) -> CliResult<Self> {
        let schema = &dataset.schema;
        let k = lsa.lsa.k;
        let mut table = FeatureTable {
            cat_names: schema.categorical_names.clone(),
            cont_names: schema.continuous_names.clone(),
            k,
            ids: Vec::with_capacity(idx.len()),
            labels: Vec::with_capacity(idx.len()),
            segments: Vec::with_capacity(idx.len()),
            cohorts: Vec::with_capacity(idx.len()),
            word_counts: Vec::with_capacity(idx.len()),
            codes: Vec::with_capacity(idx.len()),
            cont: Vec::with_capacity(idx.len()),
            lsa: Vec::with_capacity(idx.len()),
            tokens: Vec::with_capacity(idx.len()),
        };
        for &i in idx {
            let record = &dataset.records[i];
            let doc = tokenize(&record.text);
            let seq = encode_for_transformer(&doc, vocab, max_len)?;
            let real = seq.mask.iter().filter(|&&m| m == 1.0).count();
            table.ids.push(record.id);
            table.labels.push(record.label);
            table.segments.push(record.segment);
            table.cohorts.push(record.cohort);
            table.word_counts.push(Dataset::word_count(record));
            table.codes.push(codec.encode_row(&record.categorical)?);
            table.cont.push(apply_scaler(scaler, &record.continuous)?);
            table.lsa.push(lsa.project_doc(&doc));
            table.tokens.push(seq.ids[..real].to_vec());
        }
        Ok(table)
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    /// Token sequences padded back to `max_len`, identical to the encoding
    /// the table was built with.
    pub fn sequences(&self, max_len: usize) -> CliResult<Vec<TokenSequence>> {
        let mut out = Vec::with_capacity(self.tokens.len());
        for (row, ids) in self.tokens.iter().enumerate() {
            if ids.len() > max_len {
                return Err(CliError::validation(format!(
                    "row {row} holds {} token ids, beyond max_len {max_len}; \
                     the table was encoded with a different text setting",
                    ids.len()
                )));
            }
            let mut padded = ids.clone();
            let mut mask = vec![1.0; ids.len()];
            padded.resize(max_len, credfuse::text::PAD_ID);
            mask.resize(max_len, 0.0);
            out.push(TokenSequence { ids: padded, mask });
        }
        Ok(out)
    }

    /// Design matrix for the linear and forest families. Structured rows are
    /// scaled continuous values plus one-hot category indicators; text rows
    /// are the concept projections; combined concatenates the two.
    pub fn matrix(&self, subset: FeatureSubset, cat_widths: &[usize]) -> CliResult<Vec<Vec<f64>>> {
        if cat_widths.len() != self.cat_names.len() {
            return Err(CliError::validation(format!(
                "{} one-hot widths for {} category columns",
                cat_widths.len(),
                self.cat_names.len()
            )));
        }
        let onehot_width: usize = cat_widths.iter().sum();
        let mut rows = Vec::with_capacity(self.n_rows());
        for i in 0..self.n_rows() {
            let mut row = Vec::new();
            if subset != FeatureSubset::Text {
                row.reserve(self.cont_names.len() + onehot_width);
                row.extend_from_slice(&self.cont[i]);
                for (j, &code) in self.codes[i].iter().enumerate() {
                    if code >= cat_widths[j] {
                        return Err(CliError::validation(format!(
                            "row {i} category {} holds code {code}, codec width {}",
                            self.cat_names[j], cat_widths[j]
                        )));
                    }
                    let mut hot = vec![0.0; cat_widths[j]];
                    hot[code] = 1.0;
                    row.extend_from_slice(&hot);
                }
            }
            if subset != FeatureSubset::Structured {
                row.extend_from_slice(&self.lsa[i]);
            }
            rows.push(row);
        }
        Ok(rows)
    }

    pub fn to_csv_bytes(&self) -> CliResult<Vec<u8>> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
        header.extend(self.cat_names.iter().map(|n| format!("cat_{n}")));
        header.extend(self.cont_names.iter().map(|n| format!("num_{n}")));
        header.extend((0..self.k).map(|i| format!("lsa_{i:03}")));
        header.push("tokens".to_string());
        writer.write_record(&header).map_err(credfuse::Error::from)?;

        for i in 0..self.n_rows() {
            let mut row: Vec<String> = vec![
                self.ids[i].to_string(),
                self.labels[i].to_string(),
                self.segments[i].as_str().to_string(),
                self.cohorts[i].to_string(),
                self.word_counts[i].to_string(),
            ];
            row.extend(self.codes[i].iter().map(|c| c.to_string()));
            row.extend(self.cont[i].iter().map(|v| v.to_string()));
            row.extend(self.lsa[i].iter().map(|v| v.to_string()));
            let toks: Vec<String> = self.tokens[i].iter().map(|t| t.to_string()).collect();
            row.push(toks.join(" "));
            writer.write_record(&row).map_err(credfuse::Error::from)?;
        }
        let bytes = writer.into_inner().map_err(|e| CliError::validation(e.to_string()))?;
        Ok(bytes)
    }

    pub fn from_csv_bytes(bytes: &[u8]) -> CliResult<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
        let header = reader.headers().map_err(credfuse::Error::from)?.clone();
        let cols: Vec<&str> = header.iter().collect();

        for (i, name) in FIXED_COLUMNS.iter().enumerate() {
            if cols.get(i) != Some(name) {
                return Err(CliError::validation(format!(
                    "feature file column {i} is {:?}, expected {name:?}",
                    cols.get(i).copied().unwrap_or("<missing>")
                )));
            }
        }
        if cols.last() != Some(&"tokens") {
            return Err(CliError::validation("feature file must end with a tokens column"));
        }

        let mut cat_names = Vec::new();
        let mut cont_names = Vec::new();
        let mut k = 0usize;
        for &name in &cols[FIXED_COLUMNS.len()..cols.len() - 1] {
            if let Some(n) = name.strip_prefix("cat_") {
                if !cont_names.is_empty() || k > 0 {
                    return Err(CliError::validation("category columns out of order"));
                }
                cat_names.push(n.to_string());
            } else if let Some(n) = name.strip_prefix("num_") {
                if k > 0 {
                    return Err(CliError::validation("continuous columns out of order"));
                }
                cont_names.push(n.to_string());
            } else if name.starts_with("lsa_") {
                k += 1;
            } else {
                return Err(CliError::validation(format!(
                    "unexpected feature file column {name:?}"
                )));
            }
        }

        let n_cat = cat_names.len();
        let n_cont = cont_names.len();
        let mut table = FeatureTable {
            cat_names,
            cont_names,
            k,
            ids: Vec::new(),
            labels: Vec::new(),
            segments: Vec::new(),
            cohorts: Vec::new(),
            word_counts: Vec::new(),
            codes: Vec::new(),
            cont: Vec::new(),
            lsa: Vec::new(),
            tokens: Vec::new(),
        };

        for (row_no, record) in reader.records().enumerate() {
            let record = record.map_err(credfuse::Error::from)?;
            let field = |j: usize| record.get(j).unwrap_or("");
            let bad = |what: &str, value: &str| {
                CliError::validation(format!("feature row {row_no}: bad {what} {value:?}"))
            };
            table.ids.push(field(0).parse().map_err(|_| bad("id", field(0)))?);
            table.labels.push(field(1).parse().map_err(|_| bad("label", field(1)))?);
            table.segments.push(Segment::parse(field(2))?);
            table.cohorts.push(field(3).parse().map_err(|_| bad("cohort", field(3)))?);
            table
                .word_counts
                .push(field(4).parse().map_err(|_| bad("word_count", field(4)))?);

            let mut j = FIXED_COLUMNS.len();
            let mut codes = Vec::with_capacity(n_cat);
            for _ in 0..n_cat {
                codes.push(field(j).parse().map_err(|_| bad("code", field(j)))?);
                j += 1;
            }
            let mut cont = Vec::with_capacity(n_cont);
            for _ in 0..n_cont {
                cont.push(field(j).parse().map_err(|_| bad("value", field(j)))?);
                j += 1;
            }
            let mut lsa = Vec::with_capacity(k);
            for _ in 0..k {
                lsa.push(field(j).parse().map_err(|_| bad("concept", field(j)))?);
                j += 1;
            }
            let mut tokens = Vec::new();
            for tok in field(j).split_whitespace() {
                tokens.push(tok.parse().map_err(|_| bad("token id", tok))?);
            }
            if tokens.is_empty() {
                return Err(bad("tokens", field(j)));
            }
            table.codes.push(codes);
            table.cont.push(cont);
            table.lsa.push(lsa);
            table.tokens.push(tokens);
        }
        Ok(table)
    }
}
