//! Seeded random generators shared by the property and acceptance suites.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BTreeSet;

use chrono::{NaiveDate, NaiveTime};
use fluxcompose::dsl::DomainFile;
use fluxcompose::ontology::TaxonomyGraph;
use fluxcompose::scenario::{new_event, EmergencyInfo, Passenger, Responder, Role, Roster, RouteSchedule, TravelPlan};
use fluxcompose::EmergencyEvent;
use fluxcompose::planner::{apply_update, bind_outputs, check_poss};
use fluxcompose::{ActionSchema, PlanningProblem, PossAtom, State, Substitution, Term};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const CONSTANTS: [&str; 5] = ["a", "b", "c", "Ravi", "two words"];
const VARS: [&str; 3] = ["X", "Y", "Z"];

/// Fluent vocabulary of `n` symbols with arities 0..=2.
pub fn vocabulary(r: &mut ChaCha8Rng, n: usize) -> Vec<(String, usize)> {
    (0..n)
        .map(|i| {
            let name = if r.gen_bool(0.3) { format!("F{i}") } else { format!("f{i}") };
            (name, r.gen_range(0..=2))
        })
        .collect()
}

fn constant(r: &mut ChaCha8Rng, pool: usize) -> Term {
    Term::constant(CONSTANTS[r.gen_range(0..pool.min(CONSTANTS.len()))])
}

pub fn ground_fluent(r: &mut ChaCha8Rng, vocab: &[(String, usize)], pool: usize) -> Term {
    let (name, arity) = vocab.choose(r).unwrap();
    Term::compound(name.clone(), (0..*arity).map(|_| constant(r, pool)).collect())
}

/// Random state; roughly a quarter of the fluents are knowledge fluents.
pub fn state(r: &mut ChaCha8Rng, vocab: &[(String, usize)], max: usize, pool: usize) -> State {
    let n = r.gen_range(0..=max);
    let fluents = (0..n).map(|_| {
        let f = ground_fluent(r, vocab, pool);
        if r.gen_bool(0.25) {
            Term::know(f)
        } else {
            f
        }
    });
    State::from_fluents(fluents).unwrap()
}

/// Fluent pattern over `vars` and constants.
pub fn pattern(r: &mut ChaCha8Rng, vocab: &[(String, usize)], vars: &[&str], pool: usize) -> Term {
    let (name, arity) = vocab.choose(r).unwrap();
    let args = (0..*arity)
        .map(|_| if !vars.is_empty() && r.gen_bool(0.6) { Term::var(*vars.choose(r).unwrap()) } else { constant(r, pool) })
        .collect();
    Term::compound(name.clone(), args)
}

/// A valid schema: 1-2 poss atoms, params are exactly the poss variables,
/// removes are drawn from holds atoms, adds may introduce the output `O`.
pub fn action(r: &mut ChaCha8Rng, name: &str, vocab: &[(String, usize)], pool: usize) -> ActionSchema {
    let poss: Vec<PossAtom> = (0..r.gen_range(1..=2))
        .map(|_| {
            let p = pattern(r, vocab, &VARS, pool);
            if r.gen_bool(0.3) {
                PossAtom::KnowsVal(p)
            } else {
                PossAtom::Holds(p)
            }
        })
        .collect();
    let mut params: Vec<String> = Vec::new();
    for a in &poss {
        for v in a.fluent().variables() {
            if !params.contains(&v) {
                params.push(v);
            }
        }
    }
    let bound: Vec<&str> = params.iter().map(String::as_str).collect();
    let mut add_vars = bound.clone();
    if r.gen_bool(0.4) {
        add_vars.push("O");
    }
    let adds: Vec<Term> = (0..r.gen_range(1..=2))
        .map(|_| {
            let f = pattern(r, vocab, &add_vars, pool);
            if r.gen_bool(0.3) {
                Term::know(f)
            } else {
                f
            }
        })
        .collect();
    let removes: Vec<Term> = poss
        .iter()
        .filter_map(|a| match a {
            PossAtom::Holds(t) if r.gen_bool(0.5) => Some(t.clone()),
            _ => None,
        })
        .collect();
    ActionSchema::new(name, params, poss, adds, removes).expect("generator yields valid schemas")
}

pub fn domain(r: &mut ChaCha8Rng, max_actions: usize, max_fluents: usize) -> DomainFile {
    let n_fluents = r.gen_range(1..=max_fluents);
    let vocab = vocabulary(r, n_fluents);
    let n_actions = r.gen_range(1..=max_actions);
    let actions = (0..n_actions).map(|i| action(r, &format!("act{i}"), &vocab, 3)).collect();
    DomainFile { fluent_decls: vocab, actions, source_name: String::new() }
}

/// Replaces placeholders by fresh variables `G0`, `G1`, ...
fn generalize(t: &Term, next: &mut usize) -> Term {
    match t {
        Term::Placeholder(_) => {
            *next += 1;
            Term::var(format!("G{}", *next - 1))
        }
        Term::Compound(f, args) => Term::Compound(f.clone(), args.iter().map(|a| generalize(a, next)).collect()),
        other => other.clone(),
    }
}

/// Planning problem over a random domain. Most goals are fluents reached by
/// a random walk of 1-4 applicable actions (so plans of several steps occur);
/// the rest are random patterns, which are often unreachable.
pub fn problem(r: &mut ChaCha8Rng, max_actions: usize, max_fluents: usize) -> PlanningProblem {
    let d = domain(r, max_actions, max_fluents);
    let initial = state(r, &d.fluent_decls, 10, 3);
    let mut walked = initial.clone();
    for step in 1..=r.gen_range(1..=4) {
        let options: Vec<(&ActionSchema, Substitution)> = d
            .actions
            .iter()
            .flat_map(|a| check_poss(a, &walked).into_iter().map(move |s| (a, s)))
            .collect();
        let Some((a, s)) = options.choose(r) else { break };
        walked = apply_update(a, &bind_outputs(a, s, step), &walked).expect("check_poss bindings apply");
    }
    let fresh: Vec<&Term> = walked.fluents().into_iter().filter(|f| !initial.contains(f)).collect();
    let goal = match fresh.choose(r) {
        Some(f) if r.gen_bool(0.75) => vec![generalize(f, &mut 0)],
        _ => (0..r.gen_range(1..=2))
            .map(|_| {
                let p = pattern(r, &d.fluent_decls, &["G"], 3);
                if r.gen_bool(0.3) {
                    Term::know(p)
                } else {
                    p
                }
            })
            .collect(),
    };
    PlanningProblem::new(initial, goal, d.actions)
}

/// Random DAG on `n` nodes: edges only point from higher to lower index.
pub fn dag(r: &mut ChaCha8Rng, n: usize) -> (Vec<String>, Vec<(String, String)>) {
    let names: Vec<String> = (0..n).map(|i| format!("C{i}")).collect();
    let mut edges = BTreeSet::new();
    for child in 1..n {
        for _ in 0..r.gen_range(0..=2) {
            let parent = r.gen_range(0..child);
            edges.insert((names[child].clone(), names[parent].clone()));
        }
    }
    (names, edges.into_iter().collect())
}

pub fn taxonomy(names: &[String], edges: &[(String, String)]) -> TaxonomyGraph {
    TaxonomyGraph::from_edges(names.iter().cloned(), edges.to_vec()).unwrap()
}

pub const PROFESSIONS: [&str; 6] = ["doctor", "nurse", "paramedic", "pharmacist", "engineer", "teacher"];
pub const SPECIALIZATIONS: [&str; 4] = ["orthopedics", "cardiology", "neurology", "pediatrics"];

pub fn coach_order(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{}{}", (b'A' + (i % 26) as u8) as char, i / 26 + 1)).collect()
}

/// Random roster with mixed roles, registration and validation; names are
/// drawn from a small pool so ties on name occur.
pub fn roster(r: &mut ChaCha8Rng, max_passengers: usize, max_coaches: usize) -> Roster {
    let coaches = coach_order(r.gen_range(1..=max_coaches));
    let date = NaiveDate::from_ymd_opt(2026, 3, 14).unwrap();
    let passengers = (0..r.gen_range(1..=max_passengers))
        .map(|i| {
            let role = *[Role::Patient, Role::DeliveryPersonnel, Role::DeliveryPersonnel, Role::None].choose(r).unwrap();
            let profession =
                (role == Role::DeliveryPersonnel).then(|| PROFESSIONS.choose(r).unwrap().to_string());
            let specialization = (profession.is_some() && r.gen_bool(0.6))
                .then(|| SPECIALIZATIONS.choose(r).unwrap().to_string());
            Passenger {
                pnr: format!("P{i:04}"),
                name: format!("Name{}", r.gen_range(0..40)),
                coach: coaches.choose(r).unwrap().clone(),
                seat: r.gen_range(1..=72),
                registered: r.gen_bool(0.8),
                role,
                profession,
                specialization,
                illness: None,
                medication: None,
                medicine_in_hand: None,
                travel: TravelPlan {
                    origin: "CSTM".into(),
                    destination: "NDLS".into(),
                    journey_date: date,
                    validated: r.gen_bool(0.8),
                },
                no_medical_service: false,
                aboard: r.gen_bool(0.9),
            }
        })
        .collect();
    Roster::new(coaches, passengers).unwrap()
}

/// Strictly increasing schedule of 1-10 stations.
pub fn schedule(r: &mut ChaCha8Rng) -> RouteSchedule {
    let mut minutes = r.gen_range(0..120);
    let stops = (0..r.gen_range(1..=10))
        .map(|i| {
            let t = NaiveTime::from_hms_opt(minutes / 60, minutes % 60, 0).unwrap();
            minutes += r.gen_range(1..140);
            (format!("ST{i}"), t)
        })
        .collect();
    RouteSchedule::new(stops).unwrap()
}

/// Comparator written out field by field, independent of `rank_key`.
fn better(a: &Responder, b: &Responder) -> Ordering {
    a.tier
        .cmp(&b.tier)
        .then(a.distance.cmp(&b.distance))
        .then_with(|| a.coach.cmp(&b.coach))
        .then_with(|| a.name.cmp(&b.name))
        .then_with(|| a.pnr.cmp(&b.pnr))
}

/// Filter and rank by hand, then sort by repeated minimum selection.
pub fn oracle(roster: &Roster, event: &EmergencyEvent) -> Vec<Responder> {
    let medical = ["doctor", "nurse", "paramedic", "pharmacist"];
    let pidx = roster.coach_order().iter().position(|c| *c == event.coach).unwrap() as i64;
    let mut pool: Vec<Responder> = Vec::new();
    for p in roster.passengers() {
        let Some(prof) = &p.profession else { continue };
        if p.role != Role::DeliveryPersonnel || !p.registered || !p.travel.validated || !p.aboard {
            continue;
        }
        if p.pnr == event.pnr || !medical.contains(&prof.as_str()) {
            continue;
        }
        let tier = if prof == "doctor" && p.specialization.is_some() && p.specialization == event.specialization {
            0
        } else if prof == "doctor" {
            1
        } else {
            2
        };
        let idx = roster.coach_order().iter().position(|c| *c == p.coach).unwrap() as i64;
        pool.push(Responder {
            pnr: p.pnr.clone(),
            name: p.name.clone(),
            profession: prof.clone(),
            specialization: p.specialization.clone(),
            coach: p.coach.clone(),
            distance: (idx - pidx).unsigned_abs() as usize,
            tier,
        });
    }
    let mut out = Vec::new();
    while !pool.is_empty() {
        let mut best = 0;
        for i in 1..pool.len() {
            if better(&pool[i], &pool[best]) == Ordering::Less {
                best = i;
            }
        }
        out.push(pool.remove(best));
    }
    out
}

/// First stop strictly after `now`, else the last, by linear scan.
pub fn next_station(s: &RouteSchedule, now: NaiveTime) -> String {
    for (id, t) in s.stops() {
        if *t > now {
            return id.clone();
        }
    }
    s.stops().last().unwrap().0.clone()
}

/// Event for a random passenger, usually with a specialization.
pub fn random_event(r: &mut rand_chacha::ChaCha8Rng, roster: &Roster) -> EmergencyEvent {
    let patient = roster.passengers().choose(r).unwrap();
    let info = EmergencyInfo {
        specialization: r.gen_bool(0.8).then(|| SPECIALIZATIONS.choose(r).unwrap().to_string()),
        ..Default::default()
    };
    let now = NaiveDate::from_ymd_opt(2026, 3, 14).unwrap().and_hms_opt(10, 0, 0).unwrap();
    new_event(patient, &info, now)
}
