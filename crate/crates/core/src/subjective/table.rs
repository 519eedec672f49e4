use std::collections::HashMap;
use std::io::Read;

use crate::error::{Error, Result};

use super::dmos::SequenceInfo;

/// Raw opinion scores, `scores[subject][sequence]`, on the 0..=100 scale.
/// Missing ratings are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    subjects: Vec<String>,
    sequences: Vec<String>,
    scores: Vec<Vec<Option<f64>>>,
}

impl ScoreTable {
    pub fn new(
        subjects: Vec<String>,
        sequences: Vec<String>,
        scores: Vec<Vec<Option<f64>>>,
    ) -> Result<Self> {
        if scores.len() != subjects.len() {
            return Err(Error::dims(
                format!("{} subject rows", subjects.len()),
                format!("{}", scores.len()),
            ));
        }
        for row in &scores {
            if row.len() != sequences.len() {
                return Err(Error::dims(
                    format!("{} sequence columns", sequences.len()),
                    format!("{}", row.len()),
                ));
            }
            if let Some(v) = row.iter().flatten().find(|v| !(0.0..=100.0).contains(*v)) {
                return Err(Error::invalid(format!("score {v} outside [0, 100]")));
            }
        }
        Ok(ScoreTable {
            subjects,
            sequences,
            scores,
        })
    }

    /// Table where every subject rated every sequence.
    pub fn dense(
        subjects: Vec<String>,
        sequences: Vec<String>,
        scores: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let scores = scores
            .into_iter()
            .map(|r| r.into_iter().map(Some).collect())
            .collect();
        Self::new(subjects, sequences, scores)
    }

    /// Builds a table from `(subject, sequence, score)` triples, keeping first
    /// appearance order.
    pub fn from_triples<S: AsRef<str>>(rows: &[(S, S, f64)]) -> Result<Self> {
        let mut subjects: Vec<String> = Vec::new();
        let mut sequences: Vec<String> = Vec::new();
        let mut subj_idx = HashMap::new();
        let mut seq_idx = HashMap::new();
        for (s, q, _) in rows {
            let s = s.as_ref();
            let q = q.as_ref();
            if !subj_idx.contains_key(s) {
                subj_idx.insert(s.to_string(), subjects.len());
                subjects.push(s.to_string());
            }
            if !seq_idx.contains_key(q) {
                seq_idx.insert(q.to_string(), sequences.len());
                sequences.push(q.to_string());
            }
        }
        let mut scores = vec![vec![None; sequences.len()]; subjects.len()];
        for (s, q, v) in rows {
            let cell = &mut scores[subj_idx[s.as_ref()]][seq_idx[q.as_ref()]];
            if cell.is_some() {
                return Err(Error::invalid(format!(
                    "subject '{}' rated '{}' twice",
                    s.as_ref(),
                    q.as_ref()
                )));
            }
            *cell = Some(*v);
        }
        Self::new(subjects, sequences, scores)
    }

    pub fn subjects(&self) -> &[String] {
        &self.subjects
    }

    pub fn sequences(&self) -> &[String] {
        &self.sequences
    }

    pub fn score(&self, subject: usize, sequence: usize) -> Option<f64> {
        self.scores[subject][sequence]
    }

    pub fn sequence_index(&self, name: &str) -> Option<usize> {
        self.sequences.iter().position(|s| s == name)
    }

    /// Valid ratings of one sequence.
    pub fn column(&self, sequence: usize) -> Vec<f64> {
        self.scores.iter().filter_map(|r| r[sequence]).collect()
    }

    /// Copy without the listed subjects.
    pub fn without_subjects(&self, drop: &[usize]) -> ScoreTable {
        let keep: Vec<usize> = (0..self.subjects.len())
            .filter(|i| !drop.contains(i))
            .collect();
        ScoreTable {
            subjects: keep.iter().map(|&i| self.subjects[i].clone()).collect(),
            sequences: self.sequences.clone(),
            scores: keep.iter().map(|&i| self.scores[i].clone()).collect(),
        }
    }
}

/// Mean of the valid ratings of every sequence.
pub fn mos(table: &ScoreTable) -> Result<Vec<f64>> {
    (0..table.sequences.len())
        .map(|j| {
            let col = table.column(j);
            if col.is_empty() {
                return Err(Error::invalid(format!(
                    "sequence '{}' has no valid ratings",
                    table.sequences[j]
                )));
            }
            Ok(col.iter().sum::<f64>() / col.len() as f64)
        })
        .collect()
}

/// Reads `subject,sequence,score` rows (header required).
pub fn read_score_table<R: Read>(source: R) -> Result<ScoreTable> {
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = rd.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Format(format!("score table lacks a '{name}' column")))
    };
    let (cs, cq, cv) = (col("subject")?, col("sequence")?, col("score")?);
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let v: f64 = rec[cv].parse().map_err(|_| Error::Parse {
            line: i + 2,
            message: format!("score '{}' is not a number", &rec[cv]),
        })?;
        rows.push((rec[cs].to_string(), rec[cq].to_string(), v));
    }
    ScoreTable::from_triples(&rows)
}

/// Reads `sequence,reference[,group]` rows. An empty reference marks the
/// sequence itself as a reference.
pub fn read_sequence_info<R: Read>(source: R) -> Result<Vec<SequenceInfo>> {
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = rd.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let cs = find("sequence")
        .ok_or_else(|| Error::Format("sequence table lacks a 'sequence' column".into()))?;
    let cr = find("reference")
        .ok_or_else(|| Error::Format("sequence table lacks a 'reference' column".into()))?;
    let cg = find("group");
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let reference = Some(rec[cr].to_string()).filter(|r| !r.is_empty());
        out.push(SequenceInfo {
            name: rec[cs].to_string(),
            reference,
            group: cg.map(|c| rec[c].to_string()).filter(|g| !g.is_empty()),
        });
    }
    Ok(out)
}
