use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Four-level importance scale of the source annotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label4 {
    Low,
    Medium,
    High,
    Critical,
}

pub const NON_CRITICAL: usize = 0;
pub const CRITICAL: usize = 1;

impl Label4 {
    pub fn parse(s: &str, record: &str) -> Result<Self> {
        s.parse()
            .map_err(|_| Error::data(record, format!("unknown label {s:?}")))
    }
}

impl FromStr for Label4 {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Label4::Low),
            "medium" => Ok(Label4::Medium),
            "high" => Ok(Label4::High),
            "critical" => Ok(Label4::Critical),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Label4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label4::Low => "low",
            Label4::Medium => "medium",
            Label4::High => "high",
            Label4::Critical => "critical",
        })
    }
}

/// low, medium → non-critical (0); high, critical → critical (1).
pub fn collapse_label(label: Label4) -> usize {
    match label {
        Label4::Low | Label4::Medium => NON_CRITICAL,
        Label4::High | Label4::Critical => CRITICAL,
    }
}

/// One input record of the raw dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTweet {
    pub id: String,
    pub text: String,
    pub event_id: String,
    pub event_type: String,
    pub label: String,
}

/// A record after cleaning and tokenization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanTweet {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub event_id: String,
    pub event_type: String,
    pub label: String,
}

impl CleanTweet {
    pub fn crit_label(&self) -> Result<usize> {
        Label4::parse(&self.label, &self.id).map(collapse_label)
    }
}

/// Reads one JSON object per non-blank line.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(r: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Error::data(format!("line {}", i + 1), e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize, W: Write>(mut w: W, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
