use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};

use super::table::{mos, ScoreTable};

/// Role of one sequence in a study.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceInfo {
    pub name: String,
    /// Reference sequence of an impaired one; `None` for references.
    pub reference: Option<String>,
    pub group: Option<String>,
}

impl SequenceInfo {
    pub fn reference(name: impl Into<String>) -> Self {
        SequenceInfo {
            name: name.into(),
            reference: None,
            group: None,
        }
    }

    pub fn impaired(name: impl Into<String>, reference: impl Into<String>) -> Self {
        SequenceInfo {
            name: name.into(),
            reference: Some(reference.into()),
            group: None,
        }
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.group = Some(group.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmosResult {
    /// One value per table sequence, in table order.
    pub values: Vec<f64>,
    /// Subjects left out because their differences have no spread.
    pub excluded_subjects: Vec<String>,
}

/// Value given to an impaired sequence when every subject who rated it was
/// excluded (the midpoint of the scale, i.e. z = 0).
const NO_SPREAD_DMOS: f64 = 50.0;

fn reference_index(table: &ScoreTable, infos: &[SequenceInfo]) -> Result<Vec<Option<usize>>> {
    let by_name: HashMap<&str, &SequenceInfo> =
        infos.iter().map(|i| (i.name.as_str(), i)).collect();
    table
        .sequences()
        .iter()
        .map(|name| {
            let info = by_name.get(name.as_str()).ok_or_else(|| {
                Error::invalid(format!("no reference information for sequence '{name}'"))
            })?;
            let Some(r) = &info.reference else {
                return Ok(None);
            };
            let idx = table.sequence_index(r).ok_or_else(|| {
                Error::invalid(format!("reference '{r}' of '{name}' was not rated"))
            })?;
            if let Some(rinfo) = by_name.get(r.as_str()) {
                if rinfo.reference.is_some() {
                    return Err(Error::invalid(format!(
                        "'{r}' is used as a reference but is itself impaired"
                    )));
                }
                if let (Some(a), Some(b)) = (&info.group, &rinfo.group) {
                    if a != b {
                        return Err(Error::invalid(format!(
                            "'{name}' and its reference '{r}' are in different groups"
                        )));
                    }
                }
            }
            Ok(Some(idx))
        })
        .collect()
}

/// Differential mean opinion scores.
///
/// Per subject: differences `reference score - impaired score`, z-scored
/// with that subject's mean and sample standard deviation, mapped through
/// `(z + 3) * 100 / 6` and clamped to [0, 100]; the DMOS of a sequence is the
/// mean over subjects. References get exactly 0.
pub fn dmos(table: &ScoreTable, infos: &[SequenceInfo]) -> Result<DmosResult> {
    let refs = reference_index(table, infos)?;
    let n_seq = table.sequences().len();
    let mut sums = vec![0.0; n_seq];
    let mut counts = vec![0usize; n_seq];
    let mut excluded = Vec::new();
    for (i, subject) in table.subjects().iter().enumerate() {
        let diffs: Vec<(usize, f64)> = (0..n_seq)
            .filter_map(|j| {
                let r = refs[j]?;
                Some((j, table.score(i, r)? - table.score(i, j)?))
            })
            .collect();
        if diffs.is_empty() {
            continue;
        }
        let n = diffs.len() as f64;
        let mean = diffs.iter().map(|d| d.1).sum::<f64>() / n;
        let sd = if diffs.len() > 1 {
            (diffs.iter().map(|d| (d.1 - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        if sd <= 1e-12 * mean.abs().max(1.0) {
            excluded.push(subject.clone());
            continue;
        }
        for (j, d) in diffs {
            let z = (d - mean) / sd;
            sums[j] += ((z + 3.0) * 100.0 / 6.0).clamp(0.0, 100.0);
            counts[j] += 1;
        }
    }
    let values = (0..n_seq)
        .map(|j| match refs[j] {
            None => 0.0,
            Some(_) if counts[j] == 0 => NO_SPREAD_DMOS,
            Some(_) => sums[j] / counts[j] as f64,
        })
        .collect();
    Ok(DmosResult {
        values,
        excluded_subjects: excluded,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityScores {
    pub sequences: Vec<String>,
    pub mos: Vec<f64>,
    pub dmos: Vec<f64>,
    pub is_reference: Vec<bool>,
    pub groups: Vec<Option<String>>,
    pub excluded_subjects: Vec<String>,
}

pub fn quality_scores(table: &ScoreTable, infos: &[SequenceInfo]) -> Result<QualityScores> {
    let m = mos(table)?;
    let d = dmos(table, infos)?;
    let by_name: HashMap<&str, &SequenceInfo> =
        infos.iter().map(|i| (i.name.as_str(), i)).collect();
    let seqs = table.sequences().to_vec();
    Ok(QualityScores {
        is_reference: seqs
            .iter()
            .map(|s| by_name[s.as_str()].reference.is_none())
            .collect(),
        groups: seqs
            .iter()
            .map(|s| by_name[s.as_str()].group.clone())
            .collect(),
        sequences: seqs,
        mos: m,
        dmos: d.values,
        excluded_subjects: d.excluded_subjects,
    })
}

impl QualityScores {
    /// Writes `sequence,group,reference,mos,dmos` rows.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(sink);
        out.write_record(["sequence", "group", "reference", "mos", "dmos"])?;
        for j in 0..self.sequences.len() {
            out.write_record([
                self.sequences[j].as_str(),
                self.groups[j].as_deref().unwrap_or(""),
                if self.is_reference[j] { "1" } else { "0" },
                &self.mos[j].to_string(),
                &self.dmos[j].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}
