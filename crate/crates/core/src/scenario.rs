//! Train emergency-healthcare application: passenger roster, registration and
//! travel validation, responder tracing, emergency reporting and the
//! fallback station notice.
//!
//! Roster professions and specializations are lowercase values (`doctor`,
//! `orthopedics`); the matching taxonomy concept is the capitalized form
//! (`Doctor`, `Orthopedics`), see [`concept_name`].

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::composer::{
    self, ComposeError, CompositionRequest, ExecutionError, ExecutionTrace, GroundingEnv, MessageSink, SentMessage,
    StubCall, StubReply, Workflow,
};
use crate::eventlog::{EventLog, EventLogError};
use crate::ontology::{classify_severity, OntologyError, Severity, SeverityRule, TaxonomyGraph};
use crate::planner::SearchConfig;
use crate::registry::Registry;
use crate::term::Term;

pub const ROSTER_HEADER: [&str; 14] = [
    "pnr",
    "name",
    "coach",
    "seat",
    "role",
    "profession",
    "specialization",
    "registered",
    "illness",
    "medication",
    "medicine_in_hand",
    "origin",
    "destination",
    "date",
];

const COACH_ORDER_PREFIX: &str = "#coach-order:";

/// Specialization value used in `availableRole` facts for personnel without one.
pub const GENERAL: &str = "general";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{line}: {reason}")]
    Load { line: usize, reason: String },
    #[error("{line}: {reason}")]
    Schedule { line: usize, reason: String },
    #[error("unknown passenger `{0}`")]
    UnknownPassenger(String),
    #[error("passenger `{0}` is not registered")]
    NotRegistered(String),
    #[error("travel plan mismatch in field `{0}`")]
    ValidationMismatch(&'static str),
    #[error("unknown coach `{0}`")]
    UnknownCoach(String),
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("no medical responder aboard")]
    FallbackRequired,
    #[error("no responder available; record {id} notifies station {}", notice.station)]
    NoResponderAvailable { id: u64, notice: FallbackNotice },
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error("execution failed at {0}")]
    Execution(#[from] ExecutionError),
    #[error(transparent)]
    Log(#[from] EventLogError),
    #[error("script line {line}: {source}")]
    Script { line: usize, source: Box<ScenarioError> },
}

fn load_err(line: usize, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Load { line, reason: reason.into() }
}

/// `orthopedics` -> `Orthopedics`.
pub fn concept_name(value: &str) -> String {
    let mut cs = value.chars();
    match cs.next() {
        Some(c) => c.to_uppercase().chain(cs).collect(),
        None => String::new(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Patient,
    DeliveryPersonnel,
    None,
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Patient" => Ok(Role::Patient),
            "DeliveryPersonnel" => Ok(Role::DeliveryPersonnel),
            "" | "None" => Ok(Role::None),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TravelPlan {
    pub origin: String,
    pub destination: String,
    pub journey_date: NaiveDate,
    pub validated: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passenger {
    pub pnr: String,
    pub name: String,
    pub coach: String,
    pub seat: u32,
    pub registered: bool,
    pub role: Role,
    pub profession: Option<String>,
    pub specialization: Option<String>,
    pub illness: Option<String>,
    pub medication: Option<String>,
    pub medicine_in_hand: Option<String>,
    pub travel: TravelPlan,
    /// Declined the medical service when asked to register.
    pub no_medical_service: bool,
    /// Cleared once the passenger leaves the train.
    pub aboard: bool,
}

impl Passenger {
    fn check(&self) -> Result<(), String> {
        if self.pnr.is_empty() {
            return Err("missing pnr".into());
        }
        if self.role == Role::DeliveryPersonnel && self.profession.is_none() {
            return Err(format!("delivery personnel `{}` must register a profession", self.pnr));
        }
        if self.travel.origin == self.travel.destination {
            return Err(format!("origin and destination are both `{}`", self.travel.origin));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Roster {
    coach_order: Vec<String>,
    passengers: Vec<Passenger>,
}

impl Roster {
    /// Errors cite the 1-based passenger index as the line.
    pub fn new(coach_order: Vec<String>, passengers: Vec<Passenger>) -> Result<Self, ScenarioError> {
        let mut roster = Roster { coach_order: Vec::new(), passengers: Vec::new() };
        roster.set_coach_order(coach_order, 1)?;
        for (i, p) in passengers.into_iter().enumerate() {
            roster.push(p, i + 1)?;
        }
        Ok(roster)
    }

    fn set_coach_order(&mut self, order: Vec<String>, line: usize) -> Result<(), ScenarioError> {
        if order.is_empty() || order.iter().any(String::is_empty) {
            return Err(load_err(line, "coach order is empty"));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = order.iter().find(|c| !seen.insert(*c)) {
            return Err(load_err(line, format!("coach `{dup}` listed twice in coach order")));
        }
        self.coach_order = order;
        Ok(())
    }

    fn push(&mut self, p: Passenger, line: usize) -> Result<(), ScenarioError> {
        p.check().map_err(|r| load_err(line, r))?;
        if self.coach_index(&p.coach).is_none() {
            return Err(load_err(line, format!("unknown coach `{}`", p.coach)));
        }
        if self.get(&p.pnr).is_some() {
            return Err(load_err(line, format!("duplicate pnr `{}`", p.pnr)));
        }
        self.passengers.push(p);
        Ok(())
    }

    pub fn coach_order(&self) -> &[String] {
        &self.coach_order
    }

    pub fn coach_index(&self, coach: &str) -> Option<usize> {
        self.coach_order.iter().position(|c| c == coach)
    }

    pub fn passengers(&self) -> &[Passenger] {
        &self.passengers
    }

    pub fn get(&self, pnr: &str) -> Option<&Passenger> {
        self.passengers.iter().find(|p| p.pnr == pnr)
    }

    fn get_mut(&mut self, pnr: &str) -> Result<&mut Passenger, ScenarioError> {
        self.passengers
            .iter_mut()
            .find(|p| p.pnr == pnr)
            .ok_or_else(|| ScenarioError::UnknownPassenger(pnr.to_string()))
    }

    /// Marks a passenger as having left the train.
    pub fn alight(&mut self, pnr: &str) -> Result<(), ScenarioError> {
        self.get_mut(pnr)?.aboard = false;
        Ok(())
    }
}

#[derive(Deserialize)]
struct Row {
    pnr: String,
    name: String,
    coach: String,
    seat: String,
    role: String,
    profession: String,
    specialization: String,
    registered: String,
    illness: String,
    medication: String,
    medicine_in_hand: String,
    origin: String,
    destination: String,
    date: String,
}

fn non_empty(s: String) -> Option<String> {
    let t = s.trim();
    (!t.is_empty()).then(|| t.to_string())
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "yes" | "true" | "y" | "1" => Some(true),
        "no" | "false" | "n" | "0" | "" => Some(false),
        _ => None,
    }
}

fn row_to_passenger(row: Row) -> Result<Passenger, String> {
    let seat = row.seat.trim().parse().map_err(|_| format!("bad seat `{}`", row.seat))?;
    let registered = parse_bool(&row.registered).ok_or_else(|| format!("bad registered flag `{}`", row.registered))?;
    let journey_date =
        NaiveDate::parse_from_str(row.date.trim(), "%Y-%m-%d").map_err(|_| format!("bad date `{}`", row.date))?;
    Ok(Passenger {
        pnr: row.pnr.trim().to_string(),
        name: row.name.trim().to_string(),
        coach: row.coach.trim().to_string(),
        seat,
        registered,
        role: row.role.trim().parse()?,
        profession: non_empty(row.profession),
        specialization: non_empty(row.specialization),
        illness: non_empty(row.illness),
        medication: non_empty(row.medication),
        medicine_in_hand: non_empty(row.medicine_in_hand),
        travel: TravelPlan {
            origin: row.origin.trim().to_string(),
            destination: row.destination.trim().to_string(),
            journey_date,
            validated: false,
        },
        no_medical_service: false,
        aboard: true,
    })
}

/// Parses the `#coach-order:` line, the fixed header and one passenger per
/// row. Errors cite file line numbers.
pub fn load_roster(source: &str) -> Result<Roster, ScenarioError> {
    let (first, rest) = source.split_once('\n').unwrap_or((source, ""));
    let order = first
        .trim()
        .strip_prefix(COACH_ORDER_PREFIX)
        .ok_or_else(|| load_err(1, format!("expected `{COACH_ORDER_PREFIX}` line")))?;
    let mut roster = Roster { coach_order: Vec::new(), passengers: Vec::new() };
    roster.set_coach_order(order.split(',').map(|c| c.trim().to_string()).collect(), 1)?;

    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::Headers).from_reader(rest.as_bytes());
    let headers = rdr.headers().map_err(|e| load_err(2, e.to_string()))?.clone();
    if headers.iter().ne(ROSTER_HEADER) {
        return Err(load_err(2, format!("expected header `{}`", ROSTER_HEADER.join(","))));
    }
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize + 1);
            load_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize + 1);
        let row: Row = rec.deserialize(Some(&headers)).map_err(|e| load_err(line, e.to_string()))?;
        let p = row_to_passenger(row).map_err(|r| load_err(line, r))?;
        roster.push(p, line)?;
    }
    Ok(roster)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MedicalDetails {
    pub illness: Option<String>,
    pub medication: Option<String>,
    pub medicine_in_hand: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Registration {
    pub pnr: String,
    /// `(individual, concept)` asserted in the taxonomy on opt-in.
    pub individual: Option<(String, String)>,
    pub no_medical_service: bool,
}

/// Taxonomy concept a registered passenger is asserted under.
pub fn individual_concept(p: &Passenger, g: &TaxonomyGraph) -> String {
    match p.role {
        Role::DeliveryPersonnel => p
            .profession
            .as_deref()
            .map(concept_name)
            .filter(|c| g.contains(c))
            .unwrap_or_else(|| "DeliveryPersonnel".to_string()),
        Role::Patient => "Patient".to_string(),
        Role::None => "Passenger".to_string(),
    }
}

pub fn register_passenger(
    roster: &mut Roster,
    g: &mut TaxonomyGraph,
    pnr: &str,
    opt_in: bool,
    details: MedicalDetails,
) -> Result<Registration, ScenarioError> {
    let p = roster.get_mut(pnr)?;
    if !opt_in {
        p.registered = false;
        p.no_medical_service = true;
        return Ok(Registration { pnr: pnr.to_string(), individual: None, no_medical_service: true });
    }
    let concept = individual_concept(p, g);
    g.assert_individual(pnr, &concept)?;
    p.registered = true;
    p.no_medical_service = false;
    p.illness = details.illness.or(p.illness.take());
    p.medication = details.medication.or(p.medication.take());
    p.medicine_in_hand = details.medicine_in_hand.or(p.medicine_in_hand.take());
    Ok(Registration { pnr: pnr.to_string(), individual: Some((pnr.to_string(), concept)), no_medical_service: false })
}

pub fn validate_travel_plan<'r>(
    roster: &'r mut Roster,
    pnr: &str,
    origin: &str,
    destination: &str,
    date: NaiveDate,
) -> Result<&'r Passenger, ScenarioError> {
    let p = roster.get_mut(pnr)?;
    if !p.registered {
        return Err(ScenarioError::NotRegistered(pnr.to_string()));
    }
    if p.travel.origin != origin {
        return Err(ScenarioError::ValidationMismatch("origin"));
    }
    if p.travel.destination != destination {
        return Err(ScenarioError::ValidationMismatch("destination"));
    }
    if p.travel.journey_date != date {
        return Err(ScenarioError::ValidationMismatch("journeyDate"));
    }
    p.travel.validated = true;
    Ok(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventType {
    Medical,
    Robbery,
}

impl FromStr for EventType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "medical" => Ok(EventType::Medical),
            "robbery" => Ok(EventType::Robbery),
            _ => Err(format!("unknown event type `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FallbackNotice {
    pub station: String,
    pub scheduled_arrival: NaiveTime,
    pub issued_at: NaiveTime,
    pub reason: String,
}

/// One emergency as stored in the event log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmergencyEvent {
    pub date: NaiveDate,
    pub time: NaiveTime,
    pub patient_name: String,
    pub case_history: String,
    pub coach: String,
    pub seat: u32,
    pub delivery_personnel: Option<String>,
    pub pnr: String,
    pub event_type: EventType,
    pub specialization: Option<String>,
    pub symptoms: BTreeSet<String>,
    pub severity: Severity,
    pub payment_collected: bool,
    /// Ranked responder names, best first.
    pub responders: Vec<String>,
    /// Executed actions with concrete arguments.
    pub workflow: Vec<String>,
    /// Final trace outcome (`ConfirmSend`), or `fallback`.
    pub outcome: String,
    pub fallback: Option<FallbackNotice>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EmergencyInfo {
    pub event_type: Option<EventType>,
    pub specialization: Option<String>,
    pub symptoms: BTreeSet<String>,
    /// Defaults to the passenger's recorded illness.
    pub case_history: Option<String>,
    pub message: Option<String>,
}

/// A fresh, unresolved event for `p`.
pub fn new_event(p: &Passenger, info: &EmergencyInfo, now: NaiveDateTime) -> EmergencyEvent {
    EmergencyEvent {
        date: now.date(),
        time: now.time(),
        patient_name: p.name.clone(),
        case_history: info.case_history.clone().or_else(|| p.illness.clone()).unwrap_or_default(),
        coach: p.coach.clone(),
        seat: p.seat,
        delivery_personnel: None,
        pnr: p.pnr.clone(),
        event_type: info.event_type.unwrap_or(EventType::Medical),
        specialization: info.specialization.clone(),
        symptoms: info.symptoms.clone(),
        severity: Severity::Emergency,
        payment_collected: false,
        responders: Vec::new(),
        workflow: Vec::new(),
        outcome: String::new(),
        fallback: None,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceConfig {
    /// Professions counted as medical responders.
    pub medical_professions: BTreeSet<String>,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            medical_professions: ["doctor", "nurse", "paramedic", "pharmacist"].iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Responder {
    pub pnr: String,
    pub name: String,
    pub profession: String,
    pub specialization: Option<String>,
    pub coach: String,
    pub distance: usize,
    /// 0 doctor with the event's specialization, 1 other doctor, 2 other.
    pub tier: u8,
}

impl Responder {
    pub fn rank_key(&self) -> (u8, usize, &str, &str, &str) {
        (self.tier, self.distance, &self.coach, &self.name, &self.pnr)
    }

    pub fn specialization_or_general(&self) -> &str {
        self.specialization.as_deref().unwrap_or(GENERAL)
    }
}

impl fmt::Display for Responder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({}/{}) coach {} distance {}",
            self.name,
            self.profession,
            self.specialization_or_general(),
            self.coach,
            self.distance
        )
    }
}

/// Registered, validated medical personnel still aboard, best first.
pub fn trace_resources(
    roster: &Roster,
    event: &EmergencyEvent,
    cfg: &TraceConfig,
) -> Result<Vec<Responder>, ScenarioError> {
    if event.event_type != EventType::Medical {
        return Err(ScenarioError::FallbackRequired);
    }
    let patient_idx = roster.coach_index(&event.coach).ok_or_else(|| ScenarioError::UnknownCoach(event.coach.clone()))?;
    let mut out: Vec<Responder> = roster
        .passengers()
        .iter()
        .filter(|p| {
            p.role == Role::DeliveryPersonnel
                && p.registered
                && p.travel.validated
                && p.aboard
                && p.pnr != event.pnr
                && p.profession.as_ref().is_some_and(|pr| cfg.medical_professions.contains(pr))
        })
        .map(|p| {
            let profession = p.profession.clone().unwrap_or_default();
            let tier = match (profession.as_str(), &p.specialization) {
                ("doctor", Some(s)) if Some(s) == event.specialization.as_ref() => 0,
                ("doctor", _) => 1,
                _ => 2,
            };
            let idx = roster.coach_index(&p.coach).expect("roster coaches are validated");
            Responder {
                pnr: p.pnr.clone(),
                name: p.name.clone(),
                profession,
                specialization: p.specialization.clone(),
                coach: p.coach.clone(),
                distance: idx.abs_diff(patient_idx),
                tier,
            }
        })
        .collect();
    if out.is_empty() {
        return Err(ScenarioError::FallbackRequired);
    }
    out.sort_by(|a, b| a.rank_key().cmp(&b.rank_key()));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RouteSchedule {
    stops: Vec<(String, NaiveTime)>,
}

impl RouteSchedule {
    pub fn new(stops: Vec<(String, NaiveTime)>) -> Result<Self, ScenarioError> {
        if stops.is_empty() {
            return Err(ScenarioError::Schedule { line: 0, reason: "schedule is empty".into() });
        }
        if let Some(i) = stops.windows(2).position(|w| w[0].1 >= w[1].1) {
            return Err(ScenarioError::Schedule { line: i + 2, reason: "arrival times must strictly increase".into() });
        }
        Ok(RouteSchedule { stops })
    }

    pub fn stops(&self) -> &[(String, NaiveTime)] {
        &self.stops
    }
}

/// Parses `station <id> @ <HH:MM>` lines; `%` starts a comment.
pub fn load_schedule(source: &str) -> Result<RouteSchedule, ScenarioError> {
    let mut stops = Vec::new();
    let mut lines = Vec::new();
    for (i, raw) in source.lines().enumerate() {
        let line = raw.split('%').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |reason: String| ScenarioError::Schedule { line: i + 1, reason };
        let toks: Vec<&str> = line.split_whitespace().collect();
        let [kw, id, at, time] = toks[..] else {
            return Err(err(format!("expected `station <id> @ <HH:MM>`, found `{line}`")));
        };
        if kw != "station" || at != "@" {
            return Err(err(format!("expected `station <id> @ <HH:MM>`, found `{line}`")));
        }
        let t = NaiveTime::parse_from_str(time, "%H:%M").map_err(|_| err(format!("bad time `{time}`")))?;
        stops.push((id.to_string(), t));
        lines.push(i + 1);
    }
    RouteSchedule::new(stops).map_err(|e| match e {
        // Re-anchor ordering errors on file lines.
        ScenarioError::Schedule { line, reason } if line > 0 => ScenarioError::Schedule { line: lines[line - 1], reason },
        other => other,
    })
}

/// Notice to the first station arriving strictly after `now`, or the last
/// station once all have passed.
pub fn fallback_station_notice(event: &EmergencyEvent, schedule: &RouteSchedule, now: NaiveTime) -> FallbackNotice {
    let (station, at) = schedule
        .stops
        .iter()
        .find(|(_, t)| *t > now)
        .unwrap_or_else(|| schedule.stops.last().expect("schedule is non-empty"));
    let reason = match event.event_type {
        EventType::Robbery => "robbery reported".to_string(),
        EventType::Medical => "no medical responder aboard".to_string(),
    };
    FallbackNotice { station: station.clone(), scheduled_arrival: *at, issued_at: now, reason }
}

pub trait Clock {
    fn now(&self) -> NaiveDateTime;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FixedClock(pub NaiveDateTime);

impl Clock for FixedClock {
    fn now(&self) -> NaiveDateTime {
        self.0
    }
}

fn text(t: &Term) -> String {
    match t {
        Term::Const(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Grounding stubs for the bundled registry: `find_resource` returns the
/// first ranked responder matching the requested profession and
/// specialization, `notify_resource` delivers the message to the sink and
/// returns `ConfirmSend`.
pub fn standard_env(ranked: &[Responder], sink: MessageSink) -> GroundingEnv<'_> {
    let mut env = GroundingEnv::new(sink);
    env.register("find_resource", move |call: &StubCall<'_>, _: &mut MessageSink| {
        let pr = call.input("PR").map(text).unwrap_or_default();
        let sp = call.input("SP").map(text).unwrap_or_default();
        let r = ranked
            .iter()
            .find(|r| r.profession == pr && r.specialization_or_general() == sp)
            .ok_or_else(|| "no matching resource".to_string())?;
        Ok(StubReply {
            outputs: BTreeMap::from([
                ("P".to_string(), Term::constant(r.name.clone())),
                ("CN".to_string(), Term::constant(r.coach.clone())),
            ]),
            token: None,
        })
    });
    env.register("notify_resource", |call: &StubCall<'_>, sink: &mut MessageSink| {
        let get = |p: &str| call.input(p).map(text).ok_or_else(|| format!("missing input `{p}`"));
        sink.send(SentMessage { recipient: get("P")?, coach: get("CN")?, body: get("MSG")? })?;
        Ok(StubReply { outputs: BTreeMap::new(), token: Some("ConfirmSend".to_string()) })
    });
    env
}

pub type EmergencyLog = EventLog<EmergencyEvent>;

/// An emergency handled by an aboard responder.
#[derive(Clone, Debug)]
pub struct Report {
    pub id: u64,
    pub event: EmergencyEvent,
    pub ranked: Vec<Responder>,
    pub workflow: Workflow,
    pub trace: ExecutionTrace,
}

/// Everything `report_emergency` needs besides the clock and the log.
#[derive(Debug)]
pub struct Dispatcher {
    pub taxonomy: TaxonomyGraph,
    pub rules: Vec<SeverityRule>,
    pub registry: Registry,
    pub roster: Roster,
    pub schedule: RouteSchedule,
    pub trace_config: TraceConfig,
    pub search: SearchConfig,
    pub sink: MessageSink,
}

impl Dispatcher {
    pub fn new(
        taxonomy: TaxonomyGraph,
        rules: Vec<SeverityRule>,
        registry: Registry,
        roster: Roster,
        schedule: RouteSchedule,
    ) -> Self {
        Dispatcher {
            taxonomy,
            rules,
            registry,
            roster,
            schedule,
            trace_config: TraceConfig::default(),
            search: SearchConfig::default(),
            sink: MessageSink::new(),
        }
    }

    pub fn classify(&self, event: &EmergencyEvent) -> Severity {
        match (&event.event_type, &event.specialization) {
            (EventType::Medical, Some(s)) => classify_severity(&concept_name(s), &event.symptoms, &self.rules),
            _ => Severity::Emergency,
        }
    }

    /// Handles one emergency end to end and appends exactly one log record,
    /// unless an error occurs before anything is logged.
    pub fn report_emergency(
        &mut self,
        pnr: &str,
        info: &EmergencyInfo,
        clock: &dyn Clock,
        log: &mut EmergencyLog,
    ) -> Result<Report, ScenarioError> {
        let caller = self.roster.get(pnr).ok_or_else(|| ScenarioError::UnknownPassenger(pnr.to_string()))?;
        if let Some(s) = &info.specialization {
            if !self.taxonomy.contains(&concept_name(s)) {
                return Err(ScenarioError::UnknownConcept(concept_name(s)));
            }
        }
        let now = clock.now();
        let mut event = new_event(caller, info, now);
        if !caller.registered {
            register_passenger(&mut self.roster, &mut self.taxonomy, pnr, true, MedicalDetails::default())?;
            event.payment_collected = true;
        }
        event.severity = self.classify(&event);

        let ranked = match trace_resources(&self.roster, &event, &self.trace_config) {
            Ok(r) => r,
            Err(ScenarioError::FallbackRequired) => {
                let notice = fallback_station_notice(&event, &self.schedule, now.time());
                event.outcome = "fallback".to_string();
                event.fallback = Some(notice.clone());
                let id = log.append(&event)?;
                return Err(ScenarioError::NoResponderAvailable { id, notice });
            }
            Err(e) => return Err(e),
        };

        let top = &ranked[0];
        let req = CompositionRequest {
            have: vec![
                ("Profession".to_string(), Term::constant(top.profession.clone())),
                ("Specialization".to_string(), Term::constant(top.specialization_or_general())),
                ("Message".to_string(), Term::constant(info.message.clone().unwrap_or_else(|| "help".into()))),
            ],
            want: vec!["ConfirmSend".to_string()],
            world_facts: ranked
                .iter()
                .map(|r| {
                    Term::compound(
                        "availableRole",
                        vec![Term::constant(r.profession.clone()), Term::constant(r.specialization_or_general())],
                    )
                })
                .collect(),
        };
        let workflow = composer::compose(&req, &self.registry, &self.taxonomy, &self.search)?;
        let mut env = standard_env(&ranked, std::mem::take(&mut self.sink));
        let result = composer::execute(&workflow, &mut env);
        self.sink = std::mem::take(&mut env.sink);
        drop(env);
        let trace = result?;

        event.delivery_personnel = workflow
            .plan
            .produced
            .iter()
            .find(|p| p.carrier.as_deref() == Some("Name"))
            .and_then(|p| trace.resolved.get(&p.id))
            .map(text);
        event.responders = ranked.iter().map(|r| r.name.clone()).collect();
        event.workflow = workflow
            .plan
            .actions()
            .map(|a| {
                let args: Vec<Term> = a.args.iter().map(|t| t.resolve_placeholders(&trace.resolved)).collect();
                crate::planner::GroundAction { name: a.name.clone(), args }.to_string()
            })
            .collect();
        event.outcome = trace.records.last().map_or_else(|| "ok".to_string(), |r| r.outcome.clone());
        let id = log.append(&event)?;
        Ok(Report { id, event, ranked, workflow, trace })
    }
}

/// Result of one script command.
#[derive(Clone, Debug)]
pub enum ScriptOutcome {
    Clock(NaiveDateTime),
    Registered(Registration),
    Validated(String),
    Alighted(Vec<String>),
    Assigned(Box<Report>),
    Fallback { id: u64, pnr: String, notice: FallbackNotice },
}

impl ScriptOutcome {
    /// Tab-separated machine lines; assigned reports append the composer's
    /// workflow and trace serialization.
    pub fn machine_lines(&self) -> String {
        match self {
            ScriptOutcome::Clock(t) => format!("clock\t{}\n", t.format("%Y-%m-%d %H:%M")),
            ScriptOutcome::Registered(r) => match &r.individual {
                Some((i, c)) => format!("registered\t{}\t{i}\t{c}\n", r.pnr),
                None => format!("registered\t{}\tno medical Service\n", r.pnr),
            },
            ScriptOutcome::Validated(p) => format!("validated\t{p}\n"),
            ScriptOutcome::Alighted(ps) => format!("alighted\t{}\n", ps.join(",")),
            ScriptOutcome::Assigned(r) => format!(
                "report\t{}\t{}\t{}\t{}\t{}\n{}{}",
                r.id,
                r.event.pnr,
                r.event.severity,
                r.event.delivery_personnel.as_deref().unwrap_or(""),
                r.event.outcome,
                r.workflow.to_lines(),
                r.trace.to_lines()
            ),
            ScriptOutcome::Fallback { id, pnr, notice } => format!(
                "fallback\t{id}\t{pnr}\t{}\t{}\t{}\n",
                notice.station,
                notice.scheduled_arrival.format("%H:%M"),
                notice.reason
            ),
        }
    }

    pub fn text_line(&self) -> String {
        match self {
            ScriptOutcome::Clock(t) => format!("clock set to {}", t.format("%Y-%m-%d %H:%M")),
            ScriptOutcome::Registered(r) => match &r.individual {
                Some((i, c)) => format!("registered {} as {i}: {c}", r.pnr),
                None => format!("{}: no medical Service", r.pnr),
            },
            ScriptOutcome::Validated(p) => format!("travel plan of {p} validated"),
            ScriptOutcome::Alighted(ps) => format!("alighted: {}", ps.join(", ")),
            ScriptOutcome::Assigned(r) => format!(
                "record {}: {} ({}) in {} seat {} -> {} [{}]",
                r.id,
                r.event.patient_name,
                r.event.severity,
                r.event.coach,
                r.event.seat,
                r.event.delivery_personnel.as_deref().unwrap_or("?"),
                r.event.outcome
            ),
            ScriptOutcome::Fallback { id, pnr, notice } => format!(
                "record {id}: {pnr} has no responder aboard; station {} (arr. {}) notified",
                notice.station,
                notice.scheduled_arrival.format("%H:%M")
            ),
        }
    }
}

fn options(toks: &[String]) -> Result<BTreeMap<&str, &str>, String> {
    toks.iter()
        .map(|t| t.split_once('=').ok_or_else(|| format!("expected key=value, found `{t}`")))
        .collect()
}

fn parse_date(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| format!("bad date `{s}`"))
}

/// Replays a scenario script against `d`, appending to `log`.
///
/// Commands, one per line (`%` comments, shell-style quoting):
///
/// ```text
/// at <YYYY-MM-DD> <HH:MM>
/// register <pnr> optin|optout [illness=..] [medication=..] [medicine=..]
/// validate <pnr> <origin> <destination> <YYYY-MM-DD>
/// alight <pnr>...
/// report <pnr> medical|robbery [spec=..] [symptoms=a,b] [history=..] [message=..]
/// ```
///
/// A report that ends in a fallback notice is an outcome, not an error.
pub fn run_script(source: &str, d: &mut Dispatcher, log: &mut EmergencyLog) -> Result<Vec<ScriptOutcome>, ScenarioError> {
    let mut clock: Option<FixedClock> = None;
    let mut out = Vec::new();
    for (i, raw) in source.lines().enumerate() {
        let line_no = i + 1;
        let wrap = |e: ScenarioError| ScenarioError::Script { line: line_no, source: Box::new(e) };
        let bad = |reason: String| wrap(load_err(line_no, reason));
        let line = raw.split('%').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks = shlex::split(line).ok_or_else(|| bad("unbalanced quotes".into()))?;
        let (cmd, args) = toks.split_first().expect("non-empty line");
        match (cmd.as_str(), args) {
            ("at", [date, time]) => {
                let d = parse_date(date).map_err(bad)?;
                let t = NaiveTime::parse_from_str(time, "%H:%M").map_err(|_| bad(format!("bad time `{time}`")))?;
                let now = d.and_time(t);
                clock = Some(FixedClock(now));
                out.push(ScriptOutcome::Clock(now));
            }
            ("register", [pnr, mode, rest @ ..]) => {
                let opt_in = match mode.as_str() {
                    "optin" => true,
                    "optout" => false,
                    other => return Err(bad(format!("expected optin or optout, found `{other}`"))),
                };
                let o = options(rest).map_err(bad)?;
                let details = MedicalDetails {
                    illness: o.get("illness").map(|s| s.to_string()),
                    medication: o.get("medication").map(|s| s.to_string()),
                    medicine_in_hand: o.get("medicine").map(|s| s.to_string()),
                };
                let r = register_passenger(&mut d.roster, &mut d.taxonomy, pnr, opt_in, details).map_err(wrap)?;
                out.push(ScriptOutcome::Registered(r));
            }
            ("validate", [pnr, origin, dest, date]) => {
                let date = parse_date(date).map_err(bad)?;
                validate_travel_plan(&mut d.roster, pnr, origin, dest, date).map_err(wrap)?;
                out.push(ScriptOutcome::Validated(pnr.clone()));
            }
            ("alight", pnrs) if !pnrs.is_empty() => {
                for p in pnrs {
                    d.roster.alight(p).map_err(wrap)?;
                }
                out.push(ScriptOutcome::Alighted(pnrs.to_vec()));
            }
            ("report", [pnr, kind, rest @ ..]) => {
                let o = options(rest).map_err(bad)?;
                let info = EmergencyInfo {
                    event_type: Some(kind.parse().map_err(bad)?),
                    specialization: o.get("spec").map(|s| s.to_string()),
                    symptoms: o
                        .get("symptoms")
                        .map(|s| s.split(',').filter(|x| !x.is_empty()).map(str::to_string).collect())
                        .unwrap_or_default(),
                    case_history: o.get("history").map(|s| s.to_string()),
                    message: o.get("message").map(|s| s.to_string()),
                };
                let clock = clock.ok_or_else(|| bad("clock not set; use `at` first".into()))?;
                match d.report_emergency(pnr, &info, &clock, log) {
                    Ok(r) => out.push(ScriptOutcome::Assigned(Box::new(r))),
                    Err(ScenarioError::NoResponderAvailable { id, notice }) => {
                        out.push(ScriptOutcome::Fallback { id, pnr: pnr.clone(), notice })
                    }
                    Err(e) => return Err(wrap(e)),
                }
            }
            _ => return Err(bad(format!("unrecognised command `{line}`"))),
        }
    }
    Ok(out)
}
