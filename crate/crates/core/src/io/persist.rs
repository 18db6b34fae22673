//! JSON model and sample files, and the small tabular formats around them.
//!
//! All positions and permutations are written 1-based. Floats are written in
//! shortest round-trip form, so loading a saved file reproduces it exactly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Result, SppError};
use crate::grid::{ArrayShape, Partition, Patch, Rect};
use crate::mcmc::TraceRow;
use crate::prior::HyperParams;
use crate::relmodel::ModelSnapshot;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
struct PatchRecord {
    s: Vec<usize>,
    l: Vec<usize>,
    m: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ModelRecord {
    version: u32,
    dims: Vec<usize>,
    tau: f64,
    theta: f64,
    gamma: f64,
    patches: Vec<PatchRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    row_perm: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    col_perm: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SampleRecord {
    iter: usize,
    patches: Vec<PatchRecord>,
    row_perm: Vec<usize>,
    col_perm: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SamplesRecord {
    version: u32,
    dims: Vec<usize>,
    hyper: HyperParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nodes: Option<Vec<String>>,
    samples: Vec<SampleRecord>,
}

/// A partition with the hyper-parameters it was drawn or fitted under and,
/// for relational models, its permutations (0-based).
#[derive(Clone, Debug, PartialEq)]
pub struct SavedModel {
    pub partition: Partition,
    pub theta: f64,
    pub gamma: f64,
    pub perms: Option<(Vec<usize>, Vec<usize>)>,
}

impl SavedModel {
    /// Relational view; missing permutations become identities.
    pub fn to_snapshot(&self) -> Result<ModelSnapshot> {
        let mut snap = ModelSnapshot::with_identity(self.partition.clone(), self.gamma);
        if let Some((r, c)) = &self.perms {
            snap.row_perm = r.clone();
            snap.col_perm = c.clone();
        }
        snap.validate()?;
        Ok(snap)
    }
}

/// Thinned posterior samples with the settings that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSamples {
    pub hp: HyperParams,
    pub shape: ArrayShape,
    /// Node names for data rows and columns, when ingested from an edge list.
    pub nodes: Option<Vec<String>>,
    pub samples: Vec<(usize, ModelSnapshot)>,
}

impl PosteriorSamples {
    pub fn snapshots(&self) -> Vec<ModelSnapshot> {
        self.samples.iter().map(|(_, s)| s.clone()).collect()
    }
}

fn patch_records(part: &Partition) -> Vec<PatchRecord> {
    part.patches
        .iter()
        .map(|p| PatchRecord {
            s: p.rect.start().to_vec(),
            l: p.rect.lens().to_vec(),
            m: p.cost,
        })
        .collect()
}

fn partition_from(shape: &ArrayShape, tau: f64, records: Vec<PatchRecord>) -> Result<Partition> {
    let patches = records
        .into_iter()
        .map(|r| Patch::new(Rect::new(shape, r.s, r.l)?, r.m))
        .collect::<Result<Vec<_>>>()?;
    Partition::new(shape.clone(), tau, patches)
}

fn one_based(p: &[usize]) -> Vec<usize> {
    p.iter().map(|v| v + 1).collect()
}

fn zero_based(p: Vec<usize>, what: &str) -> Result<Vec<usize>> {
    p.into_iter()
        .map(|v| {
            v.checked_sub(1)
                .ok_or_else(|| SppError::Corrupt(format!("{what} entries are 1-based")))
        })
        .collect()
}

fn versioned(text: &str) -> Result<Value> {
    let value: Value = serde_json::from_str(text)?;
    let found = value
        .get("version")
        .and_then(Value::as_u64)
        .ok_or_else(|| SppError::Corrupt("missing version field".into()))?;
    if found != FORMAT_VERSION as u64 {
        return Err(SppError::Version {
            found: found as u32,
            expected: FORMAT_VERSION,
        });
    }
    Ok(value)
}

pub fn model_to_json(model: &SavedModel) -> Result<String> {
    let rec = ModelRecord {
        version: FORMAT_VERSION,
        dims: model.partition.shape.dims().to_vec(),
        tau: model.partition.tau,
        theta: model.theta,
        gamma: model.gamma,
        patches: patch_records(&model.partition),
        row_perm: model.perms.as_ref().map(|(r, _)| one_based(r)),
        col_perm: model.perms.as_ref().map(|(_, c)| one_based(c)),
    };
    Ok(serde_json::to_string_pretty(&rec)? + "\n")
}

pub fn model_from_json(text: &str) -> Result<SavedModel> {
    let rec: ModelRecord = serde_json::from_value(versioned(text)?)?;
    let shape = ArrayShape::new(rec.dims)?;
    let partition = partition_from(&shape, rec.tau, rec.patches)?;
    let perms = match (rec.row_perm, rec.col_perm) {
        (Some(r), Some(c)) => Some((zero_based(r, "row_perm")?, zero_based(c, "col_perm")?)),
        (None, None) => None,
        _ => return Err(SppError::Corrupt("row_perm and col_perm must appear together".into())),
    };
    let model = SavedModel {
        partition,
        theta: rec.theta,
        gamma: rec.gamma,
        perms,
    };
    if model.perms.is_some() {
        model.to_snapshot()?;
    }
    Ok(model)
}

pub fn samples_to_json(s: &PosteriorSamples) -> Result<String> {
    let rec = SamplesRecord {
        version: FORMAT_VERSION,
        dims: s.shape.dims().to_vec(),
        hyper: s.hp,
        nodes: s.nodes.clone(),
        samples: s
            .samples
            .iter()
            .map(|(iter, snap)| SampleRecord {
                iter: *iter,
                patches: patch_records(&snap.partition),
                row_perm: one_based(&snap.row_perm),
                col_perm: one_based(&snap.col_perm),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&rec)? + "\n")
}

pub fn samples_from_json(text: &str) -> Result<PosteriorSamples> {
    let rec: SamplesRecord = serde_json::from_value(versioned(text)?)?;
    rec.hyper.validate()?;
    let shape = ArrayShape::new(rec.dims)?;
    let mut samples = Vec::with_capacity(rec.samples.len());
    for s in rec.samples {
        let snap = ModelSnapshot {
            partition: partition_from(&shape, rec.hyper.tau, s.patches)?,
            gamma: rec.hyper.gamma,
            row_perm: zero_based(s.row_perm, "row_perm")?,
            col_perm: zero_based(s.col_perm, "col_perm")?,
        };
        snap.validate()?;
        samples.push((s.iter, snap));
    }
    Ok(PosteriorSamples {
        hp: rec.hyper,
        shape,
        nodes: rec.nodes,
        samples,
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| SppError::io(path, e))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| SppError::io(path, e))
}

pub fn save_model(path: impl AsRef<Path>, model: &SavedModel) -> Result<()> {
    write(path.as_ref(), model_to_json(model)?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SavedModel> {
    model_from_json(&read(path.as_ref())?)
}

pub fn save_samples(path: impl AsRef<Path>, s: &PosteriorSamples) -> Result<()> {
    write(path.as_ref(), samples_to_json(s)?)
}

pub fn load_samples(path: impl AsRef<Path>) -> Result<PosteriorSamples> {
    samples_from_json(&read(path.as_ref())?)
}

pub fn trace_to_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from(TraceRow::HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

pub fn save_trace(path: impl AsRef<Path>, rows: &[TraceRow]) -> Result<()> {
    write(path.as_ref(), trace_to_csv(rows))
}

/// Maps pair tokens to 0-based matrix indices: node names when a vocabulary
/// is known, 1-based integers otherwise.
#[derive(Clone, Debug)]
pub struct NodeResolver {
    names: Option<Vec<String>>,
    index: HashMap<String, usize>,
    size: usize,
}

impl NodeResolver {
    pub fn new(nodes: Option<Vec<String>>, size: usize) -> Self {
        let index = nodes
            .iter()
            .flatten()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Self {
            names: nodes,
            index,
            size,
        }
    }

    pub fn resolve(&self, token: &str) -> Result<usize> {
        if self.names.is_some() {
            return self
                .index
                .get(token)
                .copied()
                .ok_or_else(|| SppError::UnknownNode(token.to_string()));
        }
        match token.parse::<usize>() {
            Ok(v) if (1..=self.size).contains(&v) => Ok(v - 1),
            _ => Err(SppError::UnknownNode(token.to_string())),
        }
    }

    pub fn name(&self, index: usize) -> String {
        match &self.names {
            Some(n) => n[index].clone(),
            None => (index + 1).to_string(),
        }
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i, l.split(['\t', ',', ' ']).filter(|t| !t.is_empty()).collect()))
}

/// `row<TAB>col` per line.
pub fn parse_pairs(text: &str, nodes: &NodeResolver) -> Result<Vec<(usize, usize)>> {
    data_lines(text)
        .map(|(line, f)| match f.as_slice() {
            [r, c, ..] => Ok((nodes.resolve(r)?, nodes.resolve(c)?)),
            _ => Err(SppError::Parse {
                line,
                message: "expected `row<TAB>col`".into(),
            }),
        })
        .collect()
}

/// `row<TAB>col<TAB>label` per line, label 0 or 1.
pub fn parse_labels(text: &str) -> Result<Vec<(String, String, bool)>> {
    data_lines(text)
        .map(|(line, f)| match f.as_slice() {
            [r, c, l] if *l == "0" || *l == "1" => Ok((r.to_string(), c.to_string(), *l == "1")),
            _ => Err(SppError::Parse {
                line,
                message: "expected `row<TAB>col<TAB>label` with label 0 or 1".into(),
            }),
        })
        .collect()
}

/// `row,col,score` with a header line.
pub fn parse_predictions(text: &str) -> Result<Vec<(String, String, f64)>> {
    data_lines(text)
        .filter(|(_, f)| f.first() != Some(&"row"))
        .map(|(line, f)| match f.as_slice() {
            [r, c, s] => s
                .parse::<f64>()
                .map(|v| (r.to_string(), c.to_string(), v))
                .map_err(|e| SppError::Parse {
                    line,
                    message: format!("bad score: {e}"),
                }),
            _ => Err(SppError::Parse {
                line,
                message: "expected `row,col,score`".into(),
            }),
        })
        .collect()
}

pub fn predictions_to_csv(rows: &[(String, String, f64)]) -> String {
    let mut out = String::from("row,col,score\n");
    for (r, c, s) in rows {
        let _ = writeln!(out, "{r},{c},{s}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> SavedModel {
        let s = ArrayShape::new(vec![3, 4]).unwrap();
        let p = Patch::new(Rect::new(&s, vec![2, 1], vec![2, 3]).unwrap(), 0.1 + 0.2).unwrap();
        SavedModel {
            partition: Partition::new(s, 0.7, vec![p]).unwrap(),
            theta: 0.3,
            gamma: 1.0 / 3.0,
            perms: Some((vec![2, 0, 1], vec![0, 1, 3, 2])),
        }
    }

    #[test]
    fn model_round_trip_is_exact() {
        let m = model();
        let text = model_to_json(&m).unwrap();
        assert_eq!(model_from_json(&text).unwrap(), m);
        assert!(text.contains("\"row_perm\": [\n    3,"));
    }

    #[test]
    fn missing_perms_become_identity() {
        let mut m = model();
        m.perms = None;
        let back = model_from_json(&model_to_json(&m).unwrap()).unwrap();
        let snap = back.to_snapshot().unwrap();
        assert_eq!(snap.row_perm, vec![0, 1, 2]);
    }

    #[test]
    fn version_and_corruption() {
        let text = model_to_json(&model()).unwrap().replace("\"version\": 1", "\"version\": 7");
        assert!(matches!(model_from_json(&text), Err(SppError::Version { found: 7, .. })));
        assert!(model_from_json("{\"dims\": [3]}").is_err());
        assert!(model_from_json("not json").is_err());
        let bad = model_to_json(&model()).unwrap().replace("\"m\": 0.30000000000000004", "\"m\": -1.0");
        assert!(model_from_json(&bad).is_err());
    }

    #[test]
    fn samples_round_trip() {
        let m = model();
        let s = PosteriorSamples {
            hp: HyperParams::new(0.7, 0.3, 1.0 / 3.0, 0.5).unwrap(),
            shape: m.partition.shape.clone(),
            nodes: Some(vec!["a".into(), "b".into(), "c".into(), "d".into()]),
            samples: vec![(10, m.to_snapshot().unwrap()), (20, m.to_snapshot().unwrap())],
        };
        assert_eq!(samples_from_json(&samples_to_json(&s).unwrap()).unwrap(), s);
    }

    #[test]
    fn tables() {
        let named = NodeResolver::new(Some(vec!["x".into(), "y".into()]), 2);
        assert_eq!(parse_pairs("x\ty\n# c\ny x\n", &named).unwrap(), vec![(0, 1), (1, 0)]);
        assert!(matches!(parse_pairs("x\tz\n", &named), Err(SppError::UnknownNode(_))));
        let numeric = NodeResolver::new(None, 3);
        assert_eq!(parse_pairs("3\t1\n", &numeric).unwrap(), vec![(2, 0)]);
        assert!(parse_pairs("0\t1\n", &numeric).is_err());
        let labels = parse_labels("1\t2\t1\n2\t1\t0\n").unwrap();
        assert_eq!(labels[1], ("2".into(), "1".into(), false));
        assert!(parse_labels("1\t2\t5\n").is_err());
        let rows = vec![("1".to_string(), "2".to_string(), 0.25)];
        assert_eq!(parse_predictions(&predictions_to_csv(&rows)).unwrap(), rows);
    }
}
