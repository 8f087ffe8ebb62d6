//! Line-delimited JSON manifest. Each non-blank line is one record. Lines
//! default to interaction rows; `"record_type": "participant"` marks a
//! participant row.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::records::{InteractionRecord, IpcOctant, Participant};
use crate::{CorpusError, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub records: Vec<InteractionRecord>,
    pub participants: Vec<Participant>,
}

impl CorpusManifest {
    /// Checks the cross-record invariants: unique interaction ids, distinct
    /// partners, positive durations, well-formed annotations and QA sets,
    /// and (when participant rows are present) that every referenced
    /// participant exists.
    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for (i, r) in self.records.iter().enumerate() {
            let line = Some(i + 1);
            let fail = |message: String| Err(CorpusError::Integrity { line, message });
            if !ids.insert(r.interaction_id.as_str()) {
                return fail(format!("duplicate interaction_id {}", r.interaction_id));
            }
            check_record(r).or_else(|message| fail(message))?;
        }
        if !self.participants.is_empty() {
            let known: HashSet<&str> = self
                .participants
                .iter()
                .map(|p| p.participant_id.as_str())
                .collect();
            if known.len() != self.participants.len() {
                return Err(CorpusError::Integrity {
                    line: None,
                    message: "duplicate participant_id".into(),
                });
            }
            for r in &self.records {
                if let Some(p) = r.participants().into_iter().find(|p| !known.contains(p)) {
                    return Err(CorpusError::Integrity {
                        line: None,
                        message: format!(
                            "interaction {} references unknown participant {p}",
                            r.interaction_id
                        ),
                    });
                }
            }
        }
        Ok(())
    }
}

fn check_record(r: &InteractionRecord) -> std::result::Result<(), String> {
    if !(r.duration_s > 0.0) {
        return Err(format!("interaction {} has duration {} <= 0", r.interaction_id, r.duration_s));
    }
    if r.participant_a == r.participant_b {
        return Err(format!(
            "interaction {} pairs participant {} with itself",
            r.interaction_id, r.participant_a
        ));
    }
    for a in &r.annotations {
        if !(a.moi_end_s > a.moi_start_s) {
            return Err(format!(
                "annotation in {} ends at {} before it starts at {}",
                r.interaction_id, a.moi_end_s, a.moi_start_s
            ));
        }
    }
    for q in &r.qa {
        q.check_complete().map_err(|e| e.to_string())?;
    }
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<CorpusManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    parse_manifest(&text)
}

pub fn parse_manifest(text: &str) -> Result<CorpusManifest> {
    let mut m = CorpusManifest::default();
    let mut ids = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parse_err = |e: serde_json::Error| CorpusError::Parse {
            line,
            message: e.to_string(),
        };
        let mut value: Value = serde_json::from_str(raw).map_err(parse_err)?;
        let obj = value.as_object_mut().ok_or_else(|| CorpusError::Parse {
            line,
            message: "record is not a JSON object".into(),
        })?;
        let kind = obj
            .remove("record_type")
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_else(|| "interaction".into());
        match kind.as_str() {
            "interaction" => {
                for field in ["ipc_a", "ipc_b"] {
                    if let Some(code) = obj.get(field).and_then(Value::as_str) {
                        if IpcOctant::from_code(code).is_none() {
                            return Err(CorpusError::Integrity {
                                line: Some(line),
                                message: format!(
                                    "{field} = {code:?} is not an IPC octant; expected one of {}",
                                    IpcOctant::CODES.join(", ")
                                ),
                            });
                        }
                    }
                }
                let rec: InteractionRecord = serde_json::from_value(value).map_err(parse_err)?;
                if !ids.insert(rec.interaction_id.clone()) {
                    return Err(CorpusError::Integrity {
                        line: Some(line),
                        message: format!("duplicate interaction_id {}", rec.interaction_id),
                    });
                }
                check_record(&rec).map_err(|message| CorpusError::Integrity {
                    line: Some(line),
                    message,
                })?;
                m.records.push(rec);
            }
            "participant" => {
                m.participants
                    .push(serde_json::from_value(value).map_err(parse_err)?);
            }
            other => {
                return Err(CorpusError::Parse {
                    line,
                    message: format!("unknown record_type {other:?}"),
                })
            }
        }
    }
    m.validate()?;
    Ok(m)
}

/// Serialises participants first, then interactions, one JSON object per line.
pub fn write_manifest(m: &CorpusManifest, out: &mut impl Write) -> std::io::Result<()> {
    for p in &m.participants {
        let mut v = serde_json::to_value(p)?;
        v.as_object_mut()
            .expect("participant serialises to an object")
            .insert("record_type".into(), "participant".into());
        writeln!(out, "{v}")?;
    }
    for r in &m.records {
        writeln!(out, "{}", serde_json::to_string(r)?)?;
    }
    Ok(())
}
