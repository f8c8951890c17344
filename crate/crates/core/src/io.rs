//! File formats: comparison/gold/pair CSVs, parameter JSON, sweep CSVs and
//! the reading-difficulty converter.
//!
//! Comparison CSV: `worker_id,left_item,right_item,winner,f_1,...,f_M` with
//! `winner ∈ {left, right}` and features in left-vs-right orientation.
//! Gold CSV: `item_id,gold_score`. Pairs CSV: `system_a_item,system_b_item`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::data::{Gold, ItemId, ModelParams, RawComparison, Side, WorkerId};
use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::optimizer::OptimizerReport;
use crate::simulation::{SweepCell, SweepSummary};

pub const FORMAT_VERSION: u32 = 1;

const FIXED_COLUMNS: [&str; 4] = ["worker_id", "left_item", "right_item", "winner"];

fn parse_f64(field: &str, line: u64) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: `{field}` is not a number")))
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Reads comparison rows; returns them with the feature dimension declared
/// by the header.
pub fn read_comparisons<R: Read>(reader: R) -> Result<(Vec<RawComparison>, usize)> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers()?.clone();
    if headers.len() < FIXED_COLUMNS.len() || headers.iter().take(4).ne(FIXED_COLUMNS) {
        return Err(Error::Parse(format!(
            "header must start with {}, got `{}`",
            FIXED_COLUMNS.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let dim = headers.len() - FIXED_COLUMNS.len();
    for (l, name) in headers.iter().skip(4).enumerate() {
        if name != format!("f_{}", l + 1) {
            return Err(Error::Parse(format!("feature column {} must be named f_{}, got `{name}`", l + 1, l + 1)));
        }
    }
    let mut rows = Vec::new();
    for record in csv.records() {
        let record = record?;
        let line = line_of(&record);
        let features = record
            .iter()
            .skip(4)
            .map(|f| parse_f64(f, line))
            .collect::<Result<Vec<_>>>()?;
        rows.push(RawComparison {
            worker: WorkerId::from(&record[0]),
            left: ItemId::from(&record[1]),
            right: ItemId::from(&record[2]),
            winner: record[3].parse::<Side>().map_err(|e| Error::Parse(format!("line {line}: {e}")))?,
            features,
        });
    }
    Ok((rows, dim))
}

pub fn write_comparisons<W: Write>(writer: W, rows: &[RawComparison], dim: usize) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((1..=dim).map(|l| format!("f_{l}")));
    csv.write_record(&header)?;
    for row in rows {
        if row.features.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: row.features.len(),
            });
        }
        let mut record = vec![
            row.worker.0.clone(),
            row.left.0.clone(),
            row.right.0.clone(),
            row.winner.as_str().to_owned(),
        ];
        record.extend(row.features.iter().map(|v| v.to_string()));
        csv.write_record(&record)?;
    }
    csv.flush()?;
    Ok(())
}

fn expect_header(csv: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let headers = csv.headers()?;
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse(format!(
            "expected header `{}`, got `{}`",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

pub fn read_gold<R: Read>(reader: R) -> Result<Gold> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    expect_header(&mut csv, &["item_id", "gold_score"])?;
    let mut gold = Gold::new();
    for record in csv.records() {
        let record = record?;
        let value = parse_f64(&record[1], line_of(&record))?;
        gold.insert(ItemId::from(&record[0]), value);
    }
    Ok(gold)
}

pub fn write_gold<W: Write>(writer: W, gold: &Gold) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["item_id", "gold_score"])?;
    for (id, value) in gold {
        csv.write_record([id.0.clone(), value.to_string()])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_pairs<R: Read>(reader: R) -> Result<Vec<(ItemId, ItemId)>> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    expect_header(&mut csv, &["system_a_item", "system_b_item"])?;
    let mut pairs = Vec::new();
    for record in csv.records() {
        let record = record?;
        pairs.push((ItemId::from(&record[0]), ItemId::from(&record[1])));
    }
    Ok(pairs)
}

pub fn write_pairs<W: Write>(writer: W, pairs: &[(ItemId, ItemId)]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["system_a_item", "system_b_item"])?;
    for (a, b) in pairs {
        csv.write_record([a.as_str(), b.as_str()])?;
    }
    csv.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkerParamsJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reaction: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ability: Option<f64>,
}

/// On-disk form of fitted parameters. Maps are ordered by identifier so the
/// output is byte-stable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub format_version: u32,
    pub model: ModelKind,
    pub scores: BTreeMap<String, f64>,
    pub virtual_score: f64,
    pub worker_params: BTreeMap<String, WorkerParamsJson>,
    pub report: Option<OptimizerReport>,
}

impl ParamsFile {
    pub fn from_params(params: &ModelParams, report: Option<OptimizerReport>) -> Self {
        let scores = params
            .item_ids
            .iter()
            .zip(&params.scores)
            .map(|(id, &s)| (id.0.clone(), s))
            .collect();
        let mut worker_params = BTreeMap::new();
        if params.kind != ModelKind::Bt {
            for (k, id) in params.worker_ids.iter().enumerate() {
                worker_params.insert(
                    id.0.clone(),
                    WorkerParamsJson {
                        eta: params.worker_eta.as_ref().map(|v| v[k]),
                        gamma: params.worker_gamma.as_ref().map(|v| v[k]),
                        reaction: params.worker_reaction.as_ref().map(|v| v[k].clone()),
                        ability: params.worker_ability.as_ref().map(|v| v[k]),
                    },
                );
            }
        }
        Self {
            format_version: FORMAT_VERSION,
            model: params.kind,
            scores,
            virtual_score: params.virtual_score,
            worker_params,
            report,
        }
    }

    /// Rebuilds parameters; items and workers come out sorted by identifier.
    pub fn to_params(&self) -> Result<ModelParams> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported format_version {}", self.format_version)));
        }
        let kind = self.model;
        let worker_ids: Vec<WorkerId> = self.worker_params.keys().map(|k| WorkerId::from(k.as_str())).collect();
        let field = |name: &str, value: Option<f64>, worker: &str| {
            value.ok_or_else(|| Error::Parse(format!("worker `{worker}` lacks `{name}`")))
        };
        let collect = |name: &str, get: &dyn Fn(&WorkerParamsJson) -> Option<f64>| -> Result<Vec<f64>> {
            self.worker_params.iter().map(|(w, p)| field(name, get(p), w)).collect()
        };
        let params = ModelParams {
            kind,
            item_ids: self.scores.keys().map(|k| ItemId::from(k.as_str())).collect(),
            worker_ids,
            scores: self.scores.values().copied().collect(),
            virtual_score: self.virtual_score,
            worker_eta: (kind == ModelKind::CrowdBt).then(|| collect("eta", &|p| p.eta)).transpose()?,
            worker_gamma: matches!(kind, ModelKind::FactorBt | ModelKind::Linear)
                .then(|| collect("gamma", &|p| p.gamma))
                .transpose()?,
            worker_reaction: (kind == ModelKind::FactorBt)
                .then(|| {
                    self.worker_params
                        .iter()
                        .map(|(w, p)| p.reaction.clone().ok_or_else(|| Error::Parse(format!("worker `{w}` lacks `reaction`"))))
                        .collect::<Result<Vec<_>>>()
                })
                .transpose()?,
            worker_ability: (kind == ModelKind::PairwiseHits)
                .then(|| collect("ability", &|p| p.ability))
                .transpose()?,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut writer, self)?;
        writer.write_all(b"\n")?;
        Ok(())
    }

    pub fn read<R: Read>(reader: R) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }
}

pub fn write_sweep<W: Write>(writer: W, cells: &[SweepCell]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["model", "metric", "fraction", "trial", "value"])?;
    for c in cells {
        csv.write_record([
            c.model.name().to_owned(),
            c.metric.clone(),
            c.fraction.to_string(),
            c.trial.to_string(),
            c.value.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_sweep_summary<W: Write>(writer: W, summary: &[SweepSummary]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["model", "metric", "fraction", "mean", "trials"])?;
    for s in summary {
        csv.write_record([
            s.model.name().to_owned(),
            s.metric.clone(),
            s.fraction.to_string(),
            s.mean.to_string(),
            s.trials.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Column names of the public reading-difficulty CSV.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReadabilityColumns {
    pub worker: String,
    pub passage_a: String,
    pub passage_b: String,
    pub answer: String,
    pub gold_a: Option<String>,
    pub gold_b: Option<String>,
}

impl Default for ReadabilityColumns {
    fn default() -> Self {
        Self {
            worker: "_worker_id".into(),
            passage_a: "passage_a_id".into(),
            passage_b: "passage_b_id".into(),
            answer: "answer".into(),
            gold_a: Some("passage_a_level".into()),
            gold_b: Some("passage_b_level".into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Converted {
    pub rows: Vec<RawComparison>,
    pub gold: Gold,
    /// Rows dropped for an undecided answer.
    pub dropped: usize,
}

/// Converts the reading-difficulty crowd file to canonical rows. Passage A is
/// shown on the left; the single feature `f_1` is the side indicator, +1 for
/// the left passage. "Passage A/B is more difficult" makes A/B the winner;
/// any other answer is dropped. Gold levels are read when the columns exist
/// and are non-empty.
pub fn convert_readability<R: Read>(reader: R, columns: &ReadabilityColumns) -> Result<Converted> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))
    };
    let worker = find(&columns.worker)?;
    let a = find(&columns.passage_a)?;
    let b = find(&columns.passage_b)?;
    let answer = find(&columns.answer)?;
    let gold_a = columns.gold_a.as_deref().and_then(|n| headers.iter().position(|h| h == n));
    let gold_b = columns.gold_b.as_deref().and_then(|n| headers.iter().position(|h| h == n));

    let mut out = Converted {
        rows: Vec::new(),
        gold: Gold::new(),
        dropped: 0,
    };
    for record in csv.records() {
        let record = record?;
        let line = line_of(&record);
        for (col, item) in [(gold_a, a), (gold_b, b)] {
            if let Some(col) = col {
                let raw = record[col].trim();
                if !raw.is_empty() {
                    out.gold.entry(ItemId::from(&record[item])).or_insert(parse_f64(raw, line)?);
                }
            }
        }
        let text = record[answer].to_ascii_lowercase();
        let winner = if text.contains("passage a") && text.contains("more difficult") {
            Side::Left
        } else if text.contains("passage b") && text.contains("more difficult") {
            Side::Right
        } else {
            out.dropped += 1;
            continue;
        };
        out.rows.push(RawComparison {
            worker: WorkerId::from(&record[worker]),
            left: ItemId::from(&record[a]),
            right: ItemId::from(&record[b]),
            winner,
            features: vec![1.0],
        });
    }
    Ok(out)
}
