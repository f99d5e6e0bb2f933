//! Per-clip score files: `clip_id,score` or `clip_id,score,vote`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::embedding::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub clip_id: String,
    pub score: f64,
    /// Anomaly decision, when the detector makes one.
    pub vote: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn new(ids: &[String], scores: &[f64], votes: Option<&[bool]>) -> Result<Self> {
        if ids.len() != scores.len() || votes.is_some_and(|v| v.len() != ids.len()) {
            return Err(Error::Shape("score columns differ in length".into()));
        }
        Ok(Self {
            rows: ids
                .iter()
                .enumerate()
                .map(|(i, id)| ScoreRow {
                    clip_id: id.clone(),
                    score: scores[i],
                    vote: votes.map(|v| v[i]),
                })
                .collect(),
        })
    }

    pub fn has_votes(&self) -> bool {
        self.rows.first().is_some_and(|r| r.vote.is_some())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let votes = self.has_votes();
        if votes {
            w.write_record(["clip_id", "score", "vote"])?;
        } else {
            w.write_record(["clip_id", "score"])?;
        }
        for r in &self.rows {
            let mut rec = vec![r.clip_id.clone(), format!("{}", r.score)];
            if votes {
                let v = r.vote.ok_or_else(|| Error::Shape("vote missing for some rows".into()))?;
                rec.push(if v { "1" } else { "0" }.to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let votes = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
            ["clip_id", "score"] => false,
            ["clip_id", "score", "vote"] => true,
            _ => return Err(Error::parse(format!("unexpected score header {header:?}"))),
        };
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let score: f64 = rec[1]
                .trim()
                .parse()
                .map_err(|_| Error::parse(format!("bad score `{}`", &rec[1])))?;
            let vote = if votes {
                Some(match rec[2].trim() {
                    "1" | "true" => true,
                    "0" | "false" => false,
                    v => return Err(Error::parse(format!("bad vote `{v}`"))),
                })
            } else {
                None
            };
            rows.push(ScoreRow {
                clip_id: rec[0].to_string(),
                score,
                vote,
            });
        }
        Ok(Self { rows })
    }

    /// Scores paired with anomaly flags for every row that has a binary
    /// label; an unmatched clip id is an error.
    pub fn join_labels(&self, labels: &BTreeMap<&str, Label>) -> Result<(Vec<f64>, Vec<bool>)> {
        let mut scores = Vec::new();
        let mut flags = Vec::new();
        for r in &self.rows {
            match labels.get(r.clip_id.as_str()) {
                None => return Err(Error::parse(format!("clip `{}` has no label", r.clip_id))),
                Some(Label::Unlabeled) => {}
                Some(l) => {
                    scores.push(r.score);
                    flags.push(l.is_anomalous());
                }
            }
        }
        Ok((scores, flags))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_and_without_votes() {
        let ids: Vec<String> = vec!["a".into(), "b".into()];
        for votes in [None, Some(&[true, false][..])] {
            let t = ScoreTable::new(&ids, &[0.25, 1.5e-3], votes).unwrap();
            let mut buf = Vec::new();
            t.write_csv(&mut buf).unwrap();
            assert_eq!(ScoreTable::read_csv(&buf[..]).unwrap(), t);
        }
        let mut buf = Vec::new();
        ScoreTable::new(&ids, &[1.0, 2.0], Some(&[true, false])).unwrap().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "clip_id,score,vote\na,1,1\nb,2,0\n");
    }

    #[test]
    fn join_skips_unlabeled_and_rejects_unknown() {
        let ids: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let t = ScoreTable::new(&ids, &[1.0, 2.0, 3.0], None).unwrap();
        let mut labels = BTreeMap::new();
        labels.insert("a", Label::Normal);
        labels.insert("b", Label::Unlabeled);
        labels.insert("c", Label::Anomalous);
        assert_eq!(t.join_labels(&labels).unwrap(), (vec![1.0, 3.0], vec![false, true]));
        labels.remove("c");
        assert!(t.join_labels(&labels).is_err());
    }

    #[test]
    fn bad_inputs() {
        assert!(ScoreTable::read_csv(&b"id,score\na,1\n"[..]).is_err());
        assert!(ScoreTable::read_csv(&b"clip_id,score\na,x\n"[..]).is_err());
        assert!(ScoreTable::new(&["a".into()], &[], None).is_err());
    }
}
