use std::io::Read;
use std::ops::Range;

use super::PosBiasError;

/// Aspect–opinion distance normalised by sentence length.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct ProximitySample {
    pub value: f64,
}

/// Minimum token distance between the two spans, over `n`. Overlapping spans
/// give 0.
///
/// ```
/// use posasc::posbias::aspect_proximity;
/// let s = aspect_proximity(10, 2..4, 7..9).unwrap();
/// assert!((s.value - 0.4).abs() < 1e-12);
/// ```
pub fn aspect_proximity(
    n: usize,
    aspect: Range<usize>,
    opinion: Range<usize>,
) -> Result<ProximitySample, PosBiasError> {
    for (what, r) in [("aspect", &aspect), ("opinion", &opinion)] {
        if r.start >= r.end || r.end > n {
            return Err(PosBiasError::Span(format!(
                "{what} span [{}, {}) in a sentence of {n} tokens",
                r.start, r.end
            )));
        }
    }
    let dist = if aspect.end <= opinion.start {
        opinion.start - (aspect.end - 1)
    } else if opinion.end <= aspect.start {
        aspect.start - (opinion.end - 1)
    } else {
        0
    };
    Ok(ProximitySample {
        value: dist as f64 / n as f64,
    })
}

/// One row of a proximity annotation file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProximityRecord {
    pub sentence_id: String,
    pub n: usize,
    pub aspect: Range<usize>,
    pub opinion: Range<usize>,
}

impl ProximityRecord {
    pub fn proximity(&self) -> Result<ProximitySample, PosBiasError> {
        aspect_proximity(self.n, self.aspect.clone(), self.opinion.clone())
    }
}

/// Reads tab-separated `sentence_id n aspect_start aspect_end opinion_start
/// opinion_end` rows. A header row starting with `sentence_id` is skipped;
/// `#` lines are comments.
pub fn read_proximity_tsv<R: Read>(reader: R) -> Result<Vec<ProximityRecord>, PosBiasError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(reader);
    let mut out = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let row = row?;
        let line = row.position().map_or(k + 1, |p| p.line() as usize);
        if k == 0 && row.get(0).map(str::trim) == Some("sentence_id") {
            continue;
        }
        if row.len() != 6 {
            return Err(PosBiasError::Record {
                line,
                msg: format!("expected 6 columns, found {}", row.len()),
            });
        }
        let num = |i: usize| -> Result<usize, PosBiasError> {
            row[i].trim().parse().map_err(|_| PosBiasError::Record {
                line,
                msg: format!("column {} is not a token index: `{}`", i + 1, &row[i]),
            })
        };
        let rec = ProximityRecord {
            sentence_id: row[0].trim().to_string(),
            n: num(1)?,
            aspect: num(2)?..num(3)?,
            opinion: num(4)?..num(5)?,
        };
        rec.proximity().map_err(|e| PosBiasError::Record {
            line,
            msg: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}
