//! Inspection workflow, conformity rules and operator ratings.
//!
//! A session walks the five operator steps as an explicit state machine:
//!
//! ```text
//! Created -> ProductScanned -> DefectIdentified -> SeverityAssessed
//!         -> MeasurementLogged -> SuggestionIssued -> DecisionRecorded
//! ```
//!
//! with self-loops on `DefectIdentified` (re-identification) and
//! `MeasurementLogged` (further measurements). Every transition is expressed
//! as a [`SessionEvent`]; applying the event log in order rebuilds the
//! sessions and ratings exactly.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::RatingAggregate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SessionState {
    Created,
    ProductScanned,
    DefectIdentified,
    SeverityAssessed,
    MeasurementLogged,
    SuggestionIssued,
    DecisionRecorded,
}

impl SessionState {
    pub const ALL: [SessionState; 7] = [
        SessionState::Created,
        SessionState::ProductScanned,
        SessionState::DefectIdentified,
        SessionState::SeverityAssessed,
        SessionState::MeasurementLogged,
        SessionState::SuggestionIssued,
        SessionState::DecisionRecorded,
    ];

    /// The transition relation.
    pub fn can_transition(self, to: SessionState) -> bool {
        use SessionState::*;
        matches!(
            (self, to),
            (Created, ProductScanned)
                | (ProductScanned, DefectIdentified)
                | (DefectIdentified, DefectIdentified)
                | (DefectIdentified, SeverityAssessed)
                | (SeverityAssessed, MeasurementLogged)
                | (MeasurementLogged, MeasurementLogged)
                | (MeasurementLogged, SuggestionIssued)
                | (SuggestionIssued, DecisionRecorded)
        )
    }

    /// 1-based operator step shown in the UI.
    pub fn step(self) -> u8 {
        use SessionState::*;
        match self {
            Created | ProductScanned => 1,
            DefectIdentified => 2,
            SeverityAssessed => 3,
            MeasurementLogged => 4,
            SuggestionIssued | DecisionRecorded => 5,
        }
    }
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Conform,
    Scrap,
    Review,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Conform,
    Scrap,
    Rework,
}

impl Decision {
    /// Whether choosing `self` goes against `suggested`. A `Review` suggestion
    /// defers to the operator, so nothing overrides it.
    pub fn overrides(self, suggested: Action) -> bool {
        match suggested {
            Action::Review => false,
            Action::Conform => self != Decision::Conform,
            Action::Scrap => self != Decision::Scrap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompareOp {
    #[serde(rename = "LE")]
    Le,
    #[serde(rename = "LT")]
    Lt,
    #[serde(rename = "GE")]
    Ge,
    #[serde(rename = "GT")]
    Gt,
    #[serde(rename = "EQ")]
    Eq,
    #[serde(rename = "BETWEEN")]
    Between,
}

/// Rule threshold: a single bound, or `[low, high]` for `BETWEEN`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Threshold {
    Single(f64),
    Range([f64; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformityRule {
    pub rule_id: String,
    pub defect_id: String,
    pub metric: String,
    pub op: CompareOp,
    pub threshold: Threshold,
    pub action: Action,
    pub priority: i64,
}

impl ConformityRule {
    pub fn validate(&self) -> Result<(), RuleError> {
        if self.metric.trim().is_empty() {
            return Err(RuleError::EmptyMetric);
        }
        match (self.op, self.threshold) {
            (CompareOp::Between, Threshold::Range([lo, hi])) => {
                if !(lo.is_finite() && hi.is_finite()) {
                    return Err(RuleError::NonFiniteThreshold);
                }
                if lo > hi {
                    return Err(RuleError::InvertedRange { low: lo, high: hi });
                }
                Ok(())
            }
            (CompareOp::Between, Threshold::Single(_)) | (_, Threshold::Range(_)) => {
                Err(RuleError::ThresholdShape(self.op))
            }
            (_, Threshold::Single(t)) if !t.is_finite() => Err(RuleError::NonFiniteThreshold),
            _ => Ok(()),
        }
    }

    /// Whether `value` satisfies the predicate. `EQ` is exact equality.
    pub fn holds(&self, value: f64) -> bool {
        match (self.op, self.threshold) {
            (CompareOp::Le, Threshold::Single(t)) => value <= t,
            (CompareOp::Lt, Threshold::Single(t)) => value < t,
            (CompareOp::Ge, Threshold::Single(t)) => value >= t,
            (CompareOp::Gt, Threshold::Single(t)) => value > t,
            (CompareOp::Eq, Threshold::Single(t)) => value == t,
            (CompareOp::Between, Threshold::Range([lo, hi])) => lo <= value && value <= hi,
            _ => false,
        }
    }

    pub fn describe(&self) -> String {
        let predicate = match (self.op, self.threshold) {
            (CompareOp::Between, Threshold::Range([lo, hi])) => format!("{} in [{lo}, {hi}]", self.metric),
            (op, Threshold::Single(t)) => {
                let sym = match op {
                    CompareOp::Le => "<=",
                    CompareOp::Lt => "<",
                    CompareOp::Ge => ">=",
                    CompareOp::Gt => ">",
                    _ => "==",
                };
                format!("{} {sym} {t}", self.metric)
            }
            _ => format!("{} ?", self.metric),
        };
        format!("rule {} ({predicate}) -> {:?}", self.rule_id, self.action)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuleError {
    #[error("rule metric must not be empty")]
    EmptyMetric,
    #[error("threshold must be finite")]
    NonFiniteThreshold,
    #[error("BETWEEN range is inverted: {low} > {high}")]
    InvertedRange { low: f64, high: f64 },
    #[error("threshold shape does not fit operator {0:?}")]
    ThresholdShape(CompareOp),
    #[error("defect `{defect_id}` already has a different rule at priority {priority}")]
    DuplicatePriority { defect_id: String, priority: i64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_rule_id: Option<String>,
    pub explanation: String,
}

/// Conformity rules grouped by defect, ordered by priority.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RuleBook {
    rules: BTreeMap<String, BTreeMap<i64, ConformityRule>>,
}

impl RuleBook {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a rule. Re-registering an identical rule is a no-op returning
    /// `false`.
    pub fn register(&mut self, rule: ConformityRule) -> Result<bool, RuleError> {
        rule.validate()?;
        let slot = self.rules.entry(rule.defect_id.clone()).or_default();
        match slot.get(&rule.priority) {
            Some(existing) if *existing == rule => Ok(false),
            Some(_) => Err(RuleError::DuplicatePriority {
                defect_id: rule.defect_id,
                priority: rule.priority,
            }),
            None => {
                slot.insert(rule.priority, rule);
                Ok(true)
            }
        }
    }

    pub fn rules_for(&self, defect_id: &str) -> impl Iterator<Item = &ConformityRule> {
        self.rules.get(defect_id).into_iter().flat_map(|m| m.values())
    }

    pub fn len(&self) -> usize {
        self.rules.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// First rule (by ascending priority) whose metric has a measurement and
    /// whose predicate holds decides the action.
    pub fn evaluate(&self, defect_id: &str, latest: &BTreeMap<String, f64>) -> Suggestion {
        for rule in self.rules_for(defect_id) {
            if let Some(value) = latest.get(&rule.metric) {
                if rule.holds(*value) {
                    return Suggestion {
                        action: rule.action,
                        matched_rule_id: Some(rule.rule_id.clone()),
                        explanation: format!("{}; measured {} = {value}", rule.describe(), rule.metric),
                    };
                }
            }
        }
        Suggestion {
            action: Action::Review,
            matched_rule_id: None,
            explanation: "no rule matched".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub measurement_id: String,
    pub defect_id: String,
    pub metric: String,
    pub value: f64,
    pub unit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commentary_media_id: Option<String>,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: SessionState,
    pub at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectionSession {
    pub session_id: String,
    pub product_id: String,
    pub operator_id: String,
    pub state: SessionState,
    pub defect_id: Option<String>,
    pub measurements: Vec<MeasurementRecord>,
    pub suggestion: Option<Suggestion>,
    pub decision: Option<Decision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub override_comment: Option<String>,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorkflowError {
    #[error("product id must not be empty")]
    EmptyProductId,
    #[error("illegal transition from {from} to {to}")]
    IllegalTransition { from: SessionState, to: SessionState },
    #[error("unknown defect `{0}`")]
    UnknownDefect(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("measurement value must be finite")]
    NonFiniteValue,
    #[error("measurement metric must not be empty")]
    EmptyMetric,
    #[error("unknown media `{0}`")]
    UnknownMedia(String),
    #[error("decision differs from the suggestion; an override comment is required")]
    OverrideCommentRequired,
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("score {0} outside 1..=5")]
    ScoreOutOfRange(i64),
    #[error("event log: {0}")]
    Log(String),
}

impl InspectionSession {
    fn new(session_id: &str, product_id: &str, operator_id: &str, at: &str) -> Self {
        Self {
            session_id: session_id.to_string(),
            product_id: product_id.to_string(),
            operator_id: operator_id.to_string(),
            state: SessionState::Created,
            defect_id: None,
            measurements: Vec::new(),
            suggestion: None,
            decision: None,
            override_comment: None,
            transitions: vec![Transition {
                state: SessionState::Created,
                at: at.to_string(),
            }],
        }
    }

    fn transition(&mut self, to: SessionState, at: &str) -> Result<(), WorkflowError> {
        if !self.state.can_transition(to) {
            return Err(WorkflowError::IllegalTransition { from: self.state, to });
        }
        self.state = to;
        self.transitions.push(Transition {
            state: to,
            at: at.to_string(),
        });
        Ok(())
    }

    fn check(&self, to: SessionState) -> Result<(), WorkflowError> {
        if self.state.can_transition(to) {
            Ok(())
        } else {
            Err(WorkflowError::IllegalTransition { from: self.state, to })
        }
    }

    /// Latest value per metric, in logging order.
    pub fn latest_measurements(&self) -> BTreeMap<String, f64> {
        self.measurements
            .iter()
            .map(|m| (m.metric.clone(), m.value))
            .collect()
    }

    /// The structural invariants every reachable session satisfies.
    pub fn check_invariants(&self) -> Result<(), String> {
        let st = self.state;
        if (st == SessionState::DecisionRecorded) != self.decision.is_some() {
            return Err(format!("decision presence inconsistent with {st}"));
        }
        if (st >= SessionState::SuggestionIssued) != self.suggestion.is_some() {
            return Err(format!("suggestion presence inconsistent with {st}"));
        }
        if (st >= SessionState::DefectIdentified) != self.defect_id.is_some() {
            return Err(format!("defect presence inconsistent with {st}"));
        }
        if (st >= SessionState::MeasurementLogged) != !self.measurements.is_empty() {
            return Err(format!("measurement presence inconsistent with {st}"));
        }
        if self.transitions.last().map(|t| t.state) != Some(st) {
            return Err("last transition does not match state".into());
        }
        for pair in self.transitions.windows(2) {
            if !pair[0].state.can_transition(pair[1].state) {
                return Err(format!("illegal recorded transition {} -> {}", pair[0].state, pair[1].state));
            }
        }
        Ok(())
    }
}

/// One line of the append-only session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Started {
        session_id: String,
        product_id: String,
        operator_id: String,
        at: String,
    },
    DefectAttached {
        session_id: String,
        defect_id: String,
        at: String,
    },
    Assessed {
        session_id: String,
        at: String,
    },
    MeasurementLogged {
        session_id: String,
        record: MeasurementRecord,
    },
    SuggestionIssued {
        session_id: String,
        suggestion: Suggestion,
        at: String,
    },
    DecisionRecorded {
        session_id: String,
        decision: Decision,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        override_comment: Option<String>,
        at: String,
    },
    Rated {
        node_id: String,
        operator_id: String,
        score: u8,
        at: String,
    },
}

impl SessionEvent {
    fn apply(&self, session: &mut InspectionSession) -> Result<(), WorkflowError> {
        match self {
            SessionEvent::Started { at, .. } => session.transition(SessionState::ProductScanned, at),
            SessionEvent::DefectAttached { defect_id, at, .. } => {
                session.transition(SessionState::DefectIdentified, at)?;
                session.defect_id = Some(defect_id.clone());
                Ok(())
            }
            SessionEvent::Assessed { at, .. } => session.transition(SessionState::SeverityAssessed, at),
            SessionEvent::MeasurementLogged { record, .. } => {
                session.transition(SessionState::MeasurementLogged, &record.created_at)?;
                session.measurements.push(record.clone());
                Ok(())
            }
            SessionEvent::SuggestionIssued { suggestion, at, .. } => {
                session.transition(SessionState::SuggestionIssued, at)?;
                session.suggestion = Some(suggestion.clone());
                Ok(())
            }
            SessionEvent::DecisionRecorded {
                decision,
                override_comment,
                at,
                ..
            } => {
                session.transition(SessionState::DecisionRecorded, at)?;
                session.decision = Some(*decision);
                session.override_comment = override_comment.clone();
                Ok(())
            }
            SessionEvent::Rated { .. } => Ok(()),
        }
    }

    fn session_id(&self) -> Option<&str> {
        match self {
            SessionEvent::Started { session_id, .. }
            | SessionEvent::DefectAttached { session_id, .. }
            | SessionEvent::Assessed { session_id, .. }
            | SessionEvent::MeasurementLogged { session_id, .. }
            | SessionEvent::SuggestionIssued { session_id, .. }
            | SessionEvent::DecisionRecorded { session_id, .. } => Some(session_id),
            SessionEvent::Rated { .. } => None,
        }
    }
}

/// What the workflow needs to know about the rest of the knowledge base.
pub trait WorkflowContext {
    fn defect_exists(&self, defect_id: &str) -> bool;
    fn media_exists(&self, media_id: &str) -> bool;
    fn node_exists(&self, node_id: &str) -> bool;
    /// Measurement instruction text for a defect, if any.
    fn instruction(&self, defect_id: &str) -> Option<String>;
    /// Media ids illustrating how to measure the defect.
    fn guide_media(&self, defect_id: &str) -> Vec<String>;
}

/// Returned by [`SessionBook::mark_assessed`] so the UI can show the guide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentGuide {
    pub session: InspectionSession,
    pub instruction: String,
    pub media_ids: Vec<String>,
    /// Set when the defect has no measurement instruction.
    pub missing_instruction: bool,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Append-only JSON-lines event log.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
}

impl EventLog {
    pub fn open(path: impl Into<PathBuf>) -> io::Result<Self> {
        let path = path.into();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, event: &SessionEvent) -> io::Result<()> {
        let mut line = serde_json::to_vec(event).map_err(io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()
    }

    /// Reads every event. A truncated final line (torn write) is dropped;
    /// malformed lines elsewhere are an error.
    pub fn read_all(path: impl AsRef<Path>) -> Result<Vec<SessionEvent>, WorkflowError> {
        Self::scan(path.as_ref()).map(|(events, _)| events)
    }

    /// Like [`EventLog::read_all`], and also repairs the tail of the file so
    /// later appends start on a clean line.
    pub fn recover(path: impl AsRef<Path>) -> Result<Vec<SessionEvent>, WorkflowError> {
        let path = path.as_ref();
        let (events, tail) = Self::scan(path)?;
        let io_err = |e: io::Error| WorkflowError::Log(e.to_string());
        match tail {
            Tail::Clean => {}
            Tail::Torn(len) => {
                let file = OpenOptions::new().write(true).open(path).map_err(io_err)?;
                file.set_len(len).map_err(io_err)?;
            }
            Tail::Unterminated => {
                let mut file = OpenOptions::new().append(true).open(path).map_err(io_err)?;
                file.write_all(b"\n").map_err(io_err)?;
            }
        }
        Ok(events)
    }

    fn scan(path: &Path) -> Result<(Vec<SessionEvent>, Tail), WorkflowError> {
        let raw = match std::fs::read(path) {
            Ok(raw) => raw,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok((Vec::new(), Tail::Clean)),
            Err(e) => return Err(WorkflowError::Log(e.to_string())),
        };
        let mut events = Vec::new();
        let mut offset = 0usize;
        let mut line_no = 0usize;
        while offset < raw.len() {
            line_no += 1;
            let (line, next, terminated) = match raw[offset..].iter().position(|b| *b == b'\n') {
                Some(i) => (&raw[offset..offset + i], offset + i + 1, true),
                None => (&raw[offset..], raw.len(), false),
            };
            if !line.iter().all(u8::is_ascii_whitespace) {
                match serde_json::from_slice(line) {
                    Ok(event) => events.push(event),
                    Err(_) if next == raw.len() => return Ok((events, Tail::Torn(offset as u64))),
                    Err(e) => return Err(WorkflowError::Log(format!("line {line_no}: {e}"))),
                }
            }
            if !terminated {
                return Ok((events, Tail::Unterminated));
            }
            offset = next;
        }
        Ok((events, Tail::Clean))
    }
}

enum Tail {
    Clean,
    /// Valid prefix length before an unparseable final line.
    Torn(u64),
    /// Last line parsed but lacks its newline.
    Unterminated,
}

/// Per-(node, operator) scores. Re-rating replaces the operator's score.
#[derive(Debug, Default)]
pub struct RatingBook {
    scores: RwLock<BTreeMap<String, BTreeMap<String, u8>>>,
}

impl RatingBook {
    pub fn new() -> Self {
        Self::default()
    }

    fn record(&self, node_id: &str, operator_id: &str, score: u8) -> RatingAggregate {
        let mut scores = self.scores.write().expect("rating lock poisoned");
        let per_node = scores.entry(node_id.to_string()).or_default();
        per_node.insert(operator_id.to_string(), score);
        aggregate(per_node)
    }

    pub fn aggregate(&self, node_id: &str) -> Option<RatingAggregate> {
        self.scores
            .read()
            .expect("rating lock poisoned")
            .get(node_id)
            .map(aggregate)
    }

    pub fn all(&self) -> BTreeMap<String, RatingAggregate> {
        self.scores
            .read()
            .expect("rating lock poisoned")
            .iter()
            .map(|(k, v)| (k.clone(), aggregate(v)))
            .collect()
    }
}

fn aggregate(scores: &BTreeMap<String, u8>) -> RatingAggregate {
    let sum: u32 = scores.values().map(|s| u32::from(*s)).sum();
    let count = scores.len() as u32;
    RatingAggregate {
        mean: f64::from(sum) / f64::from(count),
        count,
    }
}

/// All inspection sessions plus ratings, with optional durable event log.
///
/// Sessions are individually locked so distinct sessions progress
/// concurrently; the log append is serialized.
#[derive(Debug, Default)]
pub struct SessionBook {
    sessions: RwLock<HashMap<String, Arc<Mutex<InspectionSession>>>>,
    ratings: RatingBook,
    log: Mutex<Option<EventLog>>,
    next_session: AtomicU64,
    next_measurement: AtomicU64,
}

impl SessionBook {
    pub fn new() -> Self {
        Self::default()
    }

    /// Opens `path`, replays its events, and keeps appending to it.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, WorkflowError> {
        let path = path.into();
        let book = Self::new();
        for event in EventLog::recover(&path)? {
            book.replay(&event)?;
        }
        let log = EventLog::open(&path).map_err(|e| WorkflowError::Log(e.to_string()))?;
        *book.log.lock().expect("log lock poisoned") = Some(log);
        Ok(book)
    }

    pub fn ratings(&self) -> &RatingBook {
        &self.ratings
    }

    /// Applies an already-persisted event without logging it.
    pub fn replay(&self, event: &SessionEvent) -> Result<(), WorkflowError> {
        match event {
            SessionEvent::Started {
                session_id,
                product_id,
                operator_id,
                at,
            } => {
                let mut session = InspectionSession::new(session_id, product_id, operator_id, at);
                event.apply(&mut session)?;
                bump_counter(&self.next_session, session_id, "s-");
                self.sessions
                    .write()
                    .expect("session lock poisoned")
                    .insert(session_id.clone(), Arc::new(Mutex::new(session)));
                Ok(())
            }
            SessionEvent::Rated {
                node_id,
                operator_id,
                score,
                ..
            } => {
                self.ratings.record(node_id, operator_id, *score);
                Ok(())
            }
            _ => {
                let id = event.session_id().expect("session event");
                let handle = self.handle(id)?;
                let mut session = handle.lock().expect("session poisoned");
                if let SessionEvent::MeasurementLogged { record, .. } = event {
                    bump_counter(&self.next_measurement, &record.measurement_id, "m-");
                }
                event.apply(&mut session)
            }
        }
    }

    fn append(&self, event: &SessionEvent) -> Result<(), WorkflowError> {
        if let Some(log) = self.log.lock().expect("log lock poisoned").as_mut() {
            log.append(event).map_err(|e| WorkflowError::Log(e.to_string()))?;
        }
        Ok(())
    }

    fn handle(&self, session_id: &str) -> Result<Arc<Mutex<InspectionSession>>, WorkflowError> {
        self.sessions
            .read()
            .expect("session lock poisoned")
            .get(session_id)
            .cloned()
            .ok_or_else(|| WorkflowError::UnknownSession(session_id.to_string()))
    }

    pub fn get(&self, session_id: &str) -> Result<InspectionSession, WorkflowError> {
        Ok(self.handle(session_id)?.lock().expect("session poisoned").clone())
    }

    /// All sessions sorted by id.
    pub fn sessions(&self) -> Vec<InspectionSession> {
        let mut all: Vec<_> = self
            .sessions
            .read()
            .expect("session lock poisoned")
            .values()
            .map(|s| s.lock().expect("session poisoned").clone())
            .collect();
        all.sort_by(|a, b| a.session_id.cmp(&b.session_id));
        all
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Validates against the locked session, logs, then applies.
    fn commit(&self, session: &mut InspectionSession, event: SessionEvent) -> Result<InspectionSession, WorkflowError> {
        let mut probe = session.clone();
        event.apply(&mut probe)?;
        self.append(&event)?;
        *session = probe;
        Ok(session.clone())
    }

    pub fn start_session(&self, product_id: &str, operator_id: &str) -> Result<InspectionSession, WorkflowError> {
        let product_id = product_id.trim();
        if product_id.is_empty() {
            return Err(WorkflowError::EmptyProductId);
        }
        let n = self.next_session.fetch_add(1, AtomicOrdering::SeqCst) + 1;
        let session_id = format!("s-{n:06}");
        let event = SessionEvent::Started {
            session_id: session_id.clone(),
            product_id: product_id.to_string(),
            operator_id: operator_id.to_string(),
            at: now(),
        };
        let mut session = InspectionSession::new(&session_id, product_id, operator_id, &now());
        if let SessionEvent::Started { at, .. } = &event {
            session.transitions[0].at = at.clone();
        }
        event.apply(&mut session)?;
        self.append(&event)?;
        self.sessions
            .write()
            .expect("session lock poisoned")
            .insert(session_id, Arc::new(Mutex::new(session.clone())));
        Ok(session)
    }

    pub fn attach_defect(&self, ctx: &dyn WorkflowContext, session_id: &str, defect_id: &str) -> Result<InspectionSession, WorkflowError> {
        let handle = self.handle(session_id)?;
        let mut session = handle.lock().expect("session poisoned");
        session.check(SessionState::DefectIdentified)?;
        if !ctx.defect_exists(defect_id) {
            return Err(WorkflowError::UnknownDefect(defect_id.to_string()));
        }
        let event = SessionEvent::DefectAttached {
            session_id: session_id.to_string(),
            defect_id: defect_id.to_string(),
            at: now(),
        };
        self.commit(&mut session, event)
    }

    pub fn mark_assessed(&self, ctx: &dyn WorkflowContext, session_id: &str) -> Result<AssessmentGuide, WorkflowError> {
        let handle = self.handle(session_id)?;
        let mut session = handle.lock().expect("session poisoned");
        let event = SessionEvent::Assessed {
            session_id: session_id.to_string(),
            at: now(),
        };
        let session = self.commit(&mut session, event)?;
        let defect = session.defect_id.clone().unwrap_or_default();
        let instruction = ctx.instruction(&defect).filter(|s| !s.trim().is_empty());
        Ok(AssessmentGuide {
            missing_instruction: instruction.is_none(),
            instruction: instruction.unwrap_or_default(),
            media_ids: ctx.guide_media(&defect),
            session,
        })
    }

    pub fn log_measurement(
        &self,
        ctx: &dyn WorkflowContext,
        session_id: &str,
        metric: &str,
        value: f64,
        unit: &str,
        commentary_media_id: Option<&str>,
    ) -> Result<MeasurementRecord, WorkflowError> {
        let handle = self.handle(session_id)?;
        let mut session = handle.lock().expect("session poisoned");
        session.check(SessionState::MeasurementLogged)?;
        if !value.is_finite() {
            return Err(WorkflowError::NonFiniteValue);
        }
        let metric = metric.trim();
        if metric.is_empty() {
            return Err(WorkflowError::EmptyMetric);
        }
        if let Some(media) = commentary_media_id {
            if !ctx.media_exists(media) {
                return Err(WorkflowError::UnknownMedia(media.to_string()));
            }
        }
        let n = self.next_measurement.fetch_add(1, AtomicOrdering::SeqCst) + 1;
        let record = MeasurementRecord {
            measurement_id: format!("m-{n:06}"),
            defect_id: session.defect_id.clone().unwrap_or_default(),
            metric: metric.to_string(),
            value,
            unit: unit.trim().to_string(),
            commentary_media_id: commentary_media_id.map(str::to_string),
            created_at: now(),
        };
        let event = SessionEvent::MeasurementLogged {
            session_id: session_id.to_string(),
            record: record.clone(),
        };
        self.commit(&mut session, event)?;
        Ok(record)
    }

    pub fn evaluate_conformity(&self, rules: &RuleBook, session_id: &str) -> Result<Suggestion, WorkflowError> {
        let handle = self.handle(session_id)?;
        let mut session = handle.lock().expect("session poisoned");
        session.check(SessionState::SuggestionIssued)?;
        let defect = session.defect_id.clone().unwrap_or_default();
        let suggestion = rules.evaluate(&defect, &session.latest_measurements());
        let event = SessionEvent::SuggestionIssued {
            session_id: session_id.to_string(),
            suggestion: suggestion.clone(),
            at: now(),
        };
        self.commit(&mut session, event)?;
        Ok(suggestion)
    }

    pub fn record_decision(
        &self,
        session_id: &str,
        decision: Decision,
        override_comment: Option<&str>,
    ) -> Result<InspectionSession, WorkflowError> {
        let handle = self.handle(session_id)?;
        let mut session = handle.lock().expect("session poisoned");
        session.check(SessionState::DecisionRecorded)?;
        let comment = override_comment.map(str::trim).filter(|c| !c.is_empty());
        let suggested = session.suggestion.as_ref().map(|s| s.action).unwrap_or(Action::Review);
        if decision.overrides(suggested) && comment.is_none() {
            return Err(WorkflowError::OverrideCommentRequired);
        }
        let event = SessionEvent::DecisionRecorded {
            session_id: session_id.to_string(),
            decision,
            override_comment: comment.map(str::to_string),
            at: now(),
        };
        self.commit(&mut session, event)
    }

    /// Records one operator's 1..=5 score for a node and returns the new aggregate.
    pub fn rate_entry(&self, ctx: &dyn WorkflowContext, node_id: &str, operator_id: &str, score: i64) -> Result<RatingAggregate, WorkflowError> {
        if !ctx.node_exists(node_id) {
            return Err(WorkflowError::UnknownNode(node_id.to_string()));
        }
        if !(1..=5).contains(&score) {
            return Err(WorkflowError::ScoreOutOfRange(score));
        }
        let event = SessionEvent::Rated {
            node_id: node_id.to_string(),
            operator_id: operator_id.to_string(),
            score: score as u8,
            at: now(),
        };
        // Holding the log lock keeps log order and in-memory order identical.
        let mut log = self.log.lock().expect("log lock poisoned");
        if let Some(log) = log.as_mut() {
            log.append(&event).map_err(|e| WorkflowError::Log(e.to_string()))?;
        }
        Ok(self.ratings.record(node_id, operator_id, score as u8))
    }
}

fn bump_counter(counter: &AtomicU64, id: &str, prefix: &str) {
    if let Some(n) = id.strip_prefix(prefix).and_then(|n| n.parse::<u64>().ok()) {
        counter.fetch_max(n, AtomicOrdering::SeqCst);
    }
}
