//! Session and plan files exchanged with the experiment runner.
//!
//! A plan is generated here and imported by the runner; the runner exports a
//! session with the same trials answered. Both are UTF-8 JSON.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::stats::{self, RatingTrial, TriadTrial};
use crate::{Error, Result};

pub const TRIAD_INSTRUCTIONS: &str = "One face appears at the top of the screen and two at the bottom. \
Choose the bottom face that looks more similar to the top face. Judge the shape of the face and the \
arrangement of its features; ignore the hairstyle, facial expressions and overall lightness.";

pub const RATING_INSTRUCTIONS: &str = "Two faces appear side by side. Rate how similar they look on a \
scale from 1 (very different) to 10 (very similar). Judge the shape of the face and the arrangement \
of its features; ignore the hairstyle, facial expressions and overall lightness. The first block is practice.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Triad,
    Rating,
}

impl Task {
    pub fn instructions(self) -> &'static str {
        match self {
            Task::Triad => TRIAD_INSTRUCTIONS,
            Task::Rating => RATING_INSTRUCTIONS,
        }
    }
}

/// Trial list of a plan; the variant always matches the plan's `task`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlanTrials {
    Triad(Vec<TriadTrial>),
    Rating(Vec<RatingTrial>),
}

/// A pre-generated, unanswered trial sequence for one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionPlan {
    pub subject_id: String,
    pub task: Task,
    pub seed: u64,
    pub face_ids: Vec<String>,
    /// Face id to image URL.
    pub stimuli: BTreeMap<String, String>,
    pub instructions: String,
    pub trials: PlanTrials,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl SessionPlan {
    pub fn triad(subject_id: &str, face_ids: &[String], include_catch: bool, seed: u64) -> Result<Self> {
        let trials = stats::generate_triads(face_ids, include_catch, seed)?;
        Ok(Self::assemble(subject_id, Task::Triad, face_ids, seed, PlanTrials::Triad(trials)))
    }

    pub fn rating(subject_id: &str, face_ids: &[String], seed: u64) -> Result<Self> {
        let trials = stats::generate_rating_plan(face_ids, seed)?;
        Ok(Self::assemble(subject_id, Task::Rating, face_ids, seed, PlanTrials::Rating(trials)))
    }

    fn assemble(subject_id: &str, task: Task, face_ids: &[String], seed: u64, trials: PlanTrials) -> Self {
        Self {
            subject_id: subject_id.into(),
            task,
            seed,
            face_ids: face_ids.to_vec(),
            stimuli: face_ids.iter().map(|id| (id.clone(), format!("faces/{id}.png"))).collect(),
            instructions: task.instructions().into(),
            trials,
            config_hash: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.task, &self.trials) {
            (Task::Triad, PlanTrials::Triad(t)) => TriadSession::check(&self.face_ids, t),
            (Task::Rating, PlanTrials::Rating(t)) => RatingSession::check(&self.face_ids, t),
            // an empty list parses as the first variant
            (Task::Rating, PlanTrials::Triad(t)) if t.is_empty() => Err(Error::InvalidArgument("plan has no trials".into())),
            _ => Err(Error::InvalidArgument(format!("plan task {:?} does not match its trials", self.task))),
        }?;
        if let Some(id) = self.face_ids.iter().find(|id| !self.stimuli.contains_key(*id)) {
            return Err(Error::InvalidArgument(format!("no stimulus for face {id:?}")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let plan: Self = parse(text, path)?;
        plan.validate()?;
        Ok(plan)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriadSession {
    pub subject_id: String,
    /// Free-text grouping label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    pub face_ids: Vec<String>,
    pub trials: Vec<TriadTrial>,
}

impl TriadSession {
    pub fn validate(&self) -> Result<()> {
        Self::check(&self.face_ids, &self.trials)
    }

    fn check(face_ids: &[String], trials: &[TriadTrial]) -> Result<()> {
        let ids = id_set(face_ids, 3)?;
        let mut keys = HashSet::new();
        for (i, t) in trials.iter().enumerate() {
            t.validate().map_err(|e| Error::InvalidTrial(format!("trial {i}: {e}")))?;
            for id in [&t.target, &t.left, &t.right] {
                if !ids.contains(id.as_str()) {
                    return Err(Error::UnknownId(id.clone()));
                }
            }
            if !keys.insert(t.key()) {
                return Err(Error::InvalidTrial(format!("trial {i}: triad ({}; {}, {}) repeats", t.target, t.left, t.right)));
            }
        }
        if trials.is_empty() {
            return Err(Error::InvalidArgument("session has no trials".into()));
        }
        Ok(())
    }

    /// The non-catch trials.
    pub fn analysed(&self) -> Vec<TriadTrial> {
        self.trials.iter().filter(|t| !t.is_catch).cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingSession {
    pub subject_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    pub face_ids: Vec<String>,
    pub trials: Vec<RatingTrial>,
}

impl RatingSession {
    pub fn validate(&self) -> Result<()> {
        Self::check(&self.face_ids, &self.trials)
    }

    fn check(face_ids: &[String], trials: &[RatingTrial]) -> Result<()> {
        let ids = id_set(face_ids, 2)?;
        let mut keys = HashSet::new();
        for (i, t) in trials.iter().enumerate() {
            t.validate().map_err(|e| Error::InvalidTrial(format!("trial {i}: {e}")))?;
            for id in [&t.a, &t.b] {
                if !ids.contains(id.as_str()) {
                    return Err(Error::UnknownId(id.clone()));
                }
            }
            let pair = if t.a <= t.b { (&t.a, &t.b) } else { (&t.b, &t.a) };
            if !keys.insert((pair, t.block)) {
                return Err(Error::InvalidTrial(format!("trial {i}: pair ({}, {}) repeats in block {}", t.a, t.b, t.block)));
            }
        }
        if trials.is_empty() {
            return Err(Error::InvalidArgument("session has no trials".into()));
        }
        Ok(())
    }

    pub fn normalized(&self) -> Result<stats::NormalizedRatings> {
        stats::normalize_ratings(&self.face_ids, &self.trials)
    }
}

fn id_set(face_ids: &[String], min: usize) -> Result<HashSet<&str>> {
    let mut ids = HashSet::new();
    for id in face_ids {
        if !ids.insert(id.as_str()) {
            return Err(Error::InvalidArgument(format!("duplicate face id {id:?}")));
        }
    }
    if ids.len() < min {
        return Err(Error::InvalidArgument(format!("need at least {min} faces, got {}", ids.len())));
    }
    Ok(ids)
}

/// Either kind of session, told apart by the fields of its trials.
#[derive(Debug, Clone, PartialEq)]
pub enum Session {
    Triad(TriadSession),
    Rating(RatingSession),
}

impl Session {
    pub fn task(&self) -> Task {
        match self {
            Session::Triad(_) => Task::Triad,
            Session::Rating(_) => Task::Rating,
        }
    }

    pub fn subject_id(&self) -> &str {
        match self {
            Session::Triad(s) => &s.subject_id,
            Session::Rating(s) => &s.subject_id,
        }
    }

    pub fn to_json(&self) -> String {
        match self {
            Session::Triad(s) => serde_json::to_string_pretty(s),
            Session::Rating(s) => serde_json::to_string_pretty(s),
        }
        .expect("session serializes")
    }

    /// Parses and validates a session file of either kind.
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let probe: serde_json::Value = parse(text, path)?;
        let first = probe.get("trials").and_then(|t| t.as_array()).and_then(|t| t.first());
        let session = match first {
            Some(t) if t.get("target").is_some() => Session::Triad(parse(text, path)?),
            Some(t) if t.get("a").is_some() => Session::Rating(parse(text, path)?),
            Some(_) => return Err(Error::InvalidArgument(format!("{}: trials are neither triads nor ratings", path.display()))),
            None => return Err(Error::InvalidArgument(format!("{}: session has no trials", path.display()))),
        };
        match &session {
            Session::Triad(s) => s.validate(),
            Session::Rating(s) => s.validate(),
        }?;
        Ok(session)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}

fn parse<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse { path: path.into(), line: e.line(), message: strip_position(&e) })
}

fn strip_position(e: &serde_json::Error) -> String {
    let s = e.to_string();
    match s.rfind(" at line ") {
        Some(i) => s[..i].to_string(),
        None => s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{Block, Response};

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn plans_validate_and_round_trip() {
        let triad = SessionPlan::triad("s01", &ids(10), true, 5).unwrap();
        triad.validate().unwrap();
        let PlanTrials::Triad(t) = &triad.trials else { panic!("triad plan") };
        assert_eq!(t.len(), 450);
        assert_eq!(t.iter().filter(|t| t.is_catch).count(), 90);
        let back = SessionPlan::from_json(&triad.to_json(), Path::new("p.json")).unwrap();
        assert_eq!(back, triad);

        let rating = SessionPlan::rating("s02", &ids(16), 5).unwrap();
        let back = SessionPlan::from_json(&rating.to_json(), Path::new("p.json")).unwrap();
        assert_eq!(back, rating);
        assert_eq!(back.instructions, RATING_INSTRUCTIONS);
    }

    #[test]
    fn mismatched_plan_task_is_rejected() {
        let mut plan = SessionPlan::triad("s", &ids(3), false, 0).unwrap();
        plan.task = Task::Rating;
        assert!(plan.validate().is_err());
    }

    #[test]
    fn detects_session_kind() {
        let trials = stats::generate_triads(&ids(3), true, 1).unwrap();
        let triad = Session::Triad(TriadSession {
            subject_id: "s".into(),
            tag: Some("group-a".into()),
            face_ids: ids(3),
            trials: trials.into_iter().map(|t| t.answered(Response::Left)).collect(),
        });
        let back = Session::from_json(&triad.to_json(), Path::new("s.json")).unwrap();
        assert_eq!(back, triad);
        assert_eq!(back.task(), Task::Triad);

        let trials = stats::generate_rating_plan(&ids(3), 1).unwrap();
        let rating = Session::Rating(RatingSession {
            subject_id: "r".into(),
            tag: None,
            face_ids: ids(3),
            trials: trials.into_iter().map(|t| RatingTrial { rating: Some(3), ..t }).collect(),
        });
        let back = Session::from_json(&rating.to_json(), Path::new("s.json")).unwrap();
        assert_eq!(back.task(), Task::Rating);
        assert_eq!(back, rating);
    }

    #[test]
    fn invalid_sessions_are_rejected() {
        let base = r#"{"subject_id":"s","face_ids":["a","b","c"],"trials":[TRIALS]}"#;
        let bad = |trials: &str| Session::from_json(&base.replace("TRIALS", trials), Path::new("s.json"));
        // unknown face
        assert!(matches!(
            bad(r#"{"target":"a","left":"b","right":"z","response":"left","is_catch":false}"#),
            Err(Error::UnknownId(_))
        ));
        // catch flag disagrees with the faces
        assert!(bad(r#"{"target":"a","left":"a","right":"b","response":"left","is_catch":false}"#).is_err());
        // unknown field
        assert!(matches!(
            bad(r#"{"target":"a","left":"b","right":"c","response":"left","is_catch":false,"extra":1}"#),
            Err(Error::Parse { .. })
        ));
        // repeated triad regardless of sides
        assert!(bad(concat!(
            r#"{"target":"a","left":"b","right":"c","is_catch":false},"#,
            r#"{"target":"a","left":"c","right":"b","is_catch":false}"#
        ))
        .is_err());
        assert!(bad(r#"{"a":"a","b":"b","left_face":"a","block":"b2","rating":11}"#).is_err());
        assert!(bad(r#"{"a":"a","b":"b","left_face":"c","block":"b2","rating":4}"#).is_err());
        assert!(bad("").is_err());
        let err = Session::from_json("{\n\"subject_id\": 3}", Path::new("s.json")).unwrap_err();
        assert!(err.to_string().contains("s.json"));
        let ok = bad(r#"{"a":"a","b":"b","left_face":"a","block":"b3","rating":4,"timestamp":1.5e12}"#).unwrap();
        let Session::Rating(r) = ok else { panic!("rating") };
        assert_eq!(r.trials[0].block, Block::B3);
    }
}
