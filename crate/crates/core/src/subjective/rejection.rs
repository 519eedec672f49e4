//! Observer screening in the style of ITU-R BT.500.

use crate::error::{Error, Result};

use super::table::ScoreTable;

/// Subjects flagged by one screening pass over `table`.
///
/// For every sequence the spread bound is 2 standard deviations when the
/// score distribution is near normal (kurtosis in [2, 4]) and sqrt(20)
/// standard deviations otherwise. A subject is rejected when more than 5% of
/// their ratings fall outside the bounds and the outliers are not
/// predominantly on one side.
pub fn screen_once(table: &ScoreTable) -> Vec<usize> {
    let n_subj = table.subjects().len();
    let mut above = vec![0usize; n_subj];
    let mut below = vec![0usize; n_subj];
    let mut rated = vec![0usize; n_subj];
    for j in 0..table.sequences().len() {
        let col = table.column(j);
        let n = col.len();
        if n < 2 {
            for (i, r) in rated.iter_mut().enumerate() {
                *r += usize::from(table.score(i, j).is_some());
            }
            continue;
        }
        let mean = col.iter().sum::<f64>() / n as f64;
        let m2 = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let m4 = col.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n as f64;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let kurtosis = if m2 > 0.0 { m4 / (m2 * m2) } else { 0.0 };
        let bound = if (2.0..=4.0).contains(&kurtosis) {
            2.0 * sd
        } else {
            20f64.sqrt() * sd
        };
        for i in 0..n_subj {
            if let Some(v) = table.score(i, j) {
                rated[i] += 1;
                if sd > 0.0 {
                    if v >= mean + bound {
                        above[i] += 1;
                    } else if v <= mean - bound {
                        below[i] += 1;
                    }
                }
            }
        }
    }
    (0..n_subj)
        .filter(|&i| {
            let (p, q) = (above[i] as f64, below[i] as f64);
            rated[i] > 0
                && p + q > 0.0
                && (p + q) / rated[i] as f64 > 0.05
                && (p - q).abs() / (p + q) < 0.3
        })
        .collect()
}

/// Repeats [`screen_once`] on the survivors until no further subject is
/// flagged, so the result is a fixed point (applying it again rejects
/// nobody). A pass that would leave fewer than two subjects is not applied.
///
/// Returns the screened table and the names of rejected subjects in
/// rejection order.
pub fn reject_subjects(table: &ScoreTable) -> Result<(ScoreTable, Vec<String>)> {
    if table.subjects().len() < 2 {
        return Err(Error::invalid(
            "subject screening needs at least two subjects",
        ));
    }
    let mut current = table.clone();
    let mut rejected = Vec::new();
    loop {
        let flagged = screen_once(&current);
        if flagged.is_empty() || current.subjects().len() - flagged.len() < 2 {
            break;
        }
        rejected.extend(flagged.iter().map(|&i| current.subjects()[i].clone()));
        current = current.without_subjects(&flagged);
    }
    Ok((current, rejected))
}
