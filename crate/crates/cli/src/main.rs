//! `fluxcompose` command-line front end.
//!
//! Every input file flag falls back to the sample file bundled with the core
//! crate. Exit codes: 0 success, 1 domain-level failure (no plan, no
//! responder), 2 usage or parse error.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::{NaiveDateTime, NaiveTime};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fluxcompose::bundled;
use fluxcompose::composer::{compose, CompositionRequest, DataSource, Workflow};
use fluxcompose::dsl::{parse_domain_named, parse_fluent, parse_problem};
use fluxcompose::ontology::{classify_severity, load_rules, load_taxonomy, SeverityRule, TaxonomyGraph};
use fluxcompose::planner::{plan, PlanningProblem, SearchConfig, DEFAULT_MAX_DEPTH};
use fluxcompose::registry::{load_registry, Registry};
use fluxcompose::scenario::{
    concept_name, fallback_station_notice, load_roster, load_schedule, new_event, run_script, trace_resources,
    validate_travel_plan, Dispatcher, EmergencyInfo, EmergencyLog, EventType, FixedClock, Roster, RouteSchedule,
    ScriptOutcome, TraceConfig,
};
use fluxcompose::{ComposeError, ScenarioError, Term};

const LOG_ENV: &str = "FLUXCOMPOSE_LOG";

#[derive(Parser)]
#[command(name = "fluxcompose", version, about = "Fluent-calculus planning and service composition")]
struct Cli {
    #[command(flatten)]
    files: Files,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Files {
    /// Domain file (.fcd)
    #[arg(long, global = true)]
    domain: Option<PathBuf>,
    /// Problem file (.fcp)
    #[arg(long, global = true)]
    problem: Option<PathBuf>,
    /// Taxonomy file (.tax)
    #[arg(long, global = true)]
    taxonomy: Option<PathBuf>,
    /// Service registry (.reg)
    #[arg(long, global = true)]
    registry: Option<PathBuf>,
    /// Passenger roster (.csv)
    #[arg(long, global = true)]
    roster: Option<PathBuf>,
    /// Route schedule (.sched)
    #[arg(long, global = true)]
    schedule: Option<PathBuf>,
    /// Event log; the FLUXCOMPOSE_LOG environment variable takes precedence
    #[arg(long, global = true)]
    log: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_DEPTH)]
    max_depth: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Machine,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and cross-check all input files
    Validate,
    /// Plan the problem over the domain and print the plan
    Plan,
    /// Compose a workflow from the registry for a request
    Compose {
        /// Known value, `Concept=value` (repeatable)
        #[arg(long, value_name = "CONCEPT=VALUE")]
        have: Vec<String>,
        /// Wanted concept (repeatable)
        #[arg(long, value_name = "CONCEPT", required = true)]
        want: Vec<String>,
        /// Ground world fact, e.g. `availableRole(doctor,orthopedics)` (repeatable)
        #[arg(long, value_name = "FLUENT")]
        fact: Vec<String>,
    },
    /// Rank the responders for a patient's emergency
    Trace {
        #[command(flatten)]
        event: EventArgs,
        /// Time used for the fallback notice when nobody is aboard (HH:MM)
        #[arg(long)]
        now: Option<String>,
    },
    /// Classify severity from a specialization and symptoms
    Severity {
        #[arg(long)]
        spec: String,
        /// Comma-separated or repeated
        #[arg(long, value_delimiter = ',')]
        symptoms: Vec<String>,
        /// Severity rules file (defaults to the bundled rules)
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Report an emergency end to end and append it to the log
    Report {
        #[command(flatten)]
        event: EventArgs,
        #[arg(long)]
        history: Option<String>,
        #[arg(long)]
        message: Option<String>,
        /// Report time, `YYYY-MM-DD HH:MM` (defaults to the local clock)
        #[arg(long)]
        at: Option<String>,
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Replay a scenario script of report commands
    Simulate {
        /// Script file (defaults to the bundled scenario)
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
    },
}

#[derive(Args)]
struct EventArgs {
    /// Patient pnr
    #[arg(long)]
    pnr: String,
    #[arg(long = "type", value_name = "medical|robbery", default_value = "medical")]
    kind: String,
    /// Specialization value, e.g. `orthopedics`
    #[arg(long)]
    spec: Option<String>,
    #[arg(long, value_delimiter = ',')]
    symptoms: Vec<String>,
}

impl EventArgs {
    fn info(&self) -> Result<EmergencyInfo, Failure> {
        Ok(EmergencyInfo {
            event_type: Some(self.kind.parse::<EventType>().map_err(Failure::usage)?),
            specialization: self.spec.clone(),
            symptoms: self.symptoms.iter().filter(|s| !s.is_empty()).cloned().collect(),
            ..Default::default()
        })
    }
}

/// Error message plus exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(m: impl Display) -> Self {
        Failure { code: 2, message: m.to_string() }
    }

    fn domain(m: impl Display) -> Self {
        Failure { code: 1, message: m.to_string() }
    }

    /// `path:line:col: message` when the error carries a position.
    fn in_file(path: &str, e: impl Display) -> Self {
        let m = e.to_string();
        let sep = if m.starts_with(|c: char| c.is_ascii_digit()) { ":" } else { ": " };
        Failure::usage(format!("{path}{sep}{m}"))
    }
}

fn scenario_failure(e: ScenarioError) -> Failure {
    match e {
        ScenarioError::Load { .. } | ScenarioError::Schedule { .. } | ScenarioError::Log(_) => Failure::usage(e),
        ScenarioError::Script { source, .. } if matches!(*source, ScenarioError::Load { .. }) => {
            Failure::usage(source)
        }
        other => Failure::domain(other),
    }
}

/// Reads `path`, or returns the bundled text under `name` when absent.
fn source(path: &Option<PathBuf>, name: &str, bundled: &'static str) -> Result<(String, String), Failure> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
            Ok((p.display().to_string(), text))
        }
        None => Ok((format!("<bundled {name}>"), bundled.to_string())),
    }
}

struct Inputs<'a> {
    files: &'a Files,
}

impl Inputs<'_> {
    fn problem(&self) -> Result<PlanningProblem, Failure> {
        let (dname, dtext) = source(&self.files.domain, "emergency.fcd", bundled::EMERGENCY_DOMAIN)?;
        let (pname, ptext) = source(&self.files.problem, "emergency.fcp", bundled::EMERGENCY_PROBLEM)?;
        let domain = parse_domain_named(&dname, &dtext).map_err(|e| Failure::in_file(&dname, e))?;
        let problem = parse_problem(&ptext).map_err(|e| Failure::in_file(&pname, e))?;
        PlanningProblem::from_files(&domain, &problem).map_err(|e| Failure::in_file(&pname, e))
    }

    fn taxonomy(&self) -> Result<TaxonomyGraph, Failure> {
        let (name, text) = source(&self.files.taxonomy, "domain.tax", bundled::DOMAIN_TAXONOMY)?;
        load_taxonomy(&text).map_err(|e| Failure::in_file(&name, e))
    }

    fn registry(&self, g: &TaxonomyGraph) -> Result<Registry, Failure> {
        let (name, text) = source(&self.files.registry, "services.reg", bundled::SERVICES)?;
        load_registry(&text, g).map_err(|e| Failure::in_file(&name, e))
    }

    fn rules(&self, path: &Option<PathBuf>, g: &TaxonomyGraph) -> Result<Vec<SeverityRule>, Failure> {
        let (name, text) = source(path, "severity.rules", bundled::SEVERITY_RULES)?;
        load_rules(&text, Some(g)).map_err(|e| Failure::in_file(&name, e))
    }

    fn roster(&self) -> Result<Roster, Failure> {
        let (name, text) = source(&self.files.roster, "roster.csv", bundled::ROSTER)?;
        load_roster(&text).map_err(|e| Failure::in_file(&name, e))
    }

    fn schedule(&self) -> Result<RouteSchedule, Failure> {
        let (name, text) = source(&self.files.schedule, "route.sched", bundled::ROUTE)?;
        load_schedule(&text).map_err(|e| Failure::in_file(&name, e))
    }

    fn search(&self) -> Result<SearchConfig, Failure> {
        SearchConfig::new(self.files.max_depth).map_err(Failure::usage)
    }

    fn log_path(&self) -> Result<PathBuf, Failure> {
        std::env::var_os(LOG_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .or_else(|| self.files.log.clone())
            .ok_or_else(|| Failure::usage(format!("an event log is required: pass --log or set {LOG_ENV}")))
    }

    fn open_log(&self) -> Result<EmergencyLog, Failure> {
        EmergencyLog::open(self.log_path()?).map_err(Failure::usage)
    }

    fn dispatcher(&self, rules: &Option<PathBuf>) -> Result<Dispatcher, Failure> {
        let g = self.taxonomy()?;
        let rules = self.rules(rules, &g)?;
        let reg = self.registry(&g)?;
        let mut d = Dispatcher::new(g, rules, reg, self.roster()?, self.schedule()?);
        d.search = self.search()?;
        Ok(d)
    }
}

/// Validates every registered passenger's travel plan against the roster,
/// as done at boarding.
fn boarding_check(roster: &mut Roster) {
    let plans: Vec<_> = roster
        .passengers()
        .iter()
        .filter(|p| p.registered)
        .map(|p| (p.pnr.clone(), p.travel.clone()))
        .collect();
    for (pnr, t) in plans {
        validate_travel_plan(roster, &pnr, &t.origin, &t.destination, t.journey_date)
            .expect("roster travel fields match themselves");
    }
}

fn parse_time(s: &str) -> Result<NaiveTime, Failure> {
    NaiveTime::parse_from_str(s, "%H:%M").map_err(|_| Failure::usage(format!("bad time `{s}`, expected HH:MM")))
}

fn data_flow_text(w: &Workflow) -> String {
    let mut out = String::new();
    for ((step, param), src) in &w.data_flow {
        let from = match src {
            DataSource::Request { concept, value, degree } => format!("request {concept} = {value} ({degree})"),
            DataSource::StepOutput { step, placeholder } => format!("output #{placeholder} of step {}", step + 1),
            DataSource::World { value } => format!("world value {value}"),
        };
        out.push_str(&format!("   step {} {param} <- {from}\n", step + 1));
    }
    out
}

fn run(cli: Cli) -> Result<(), Failure> {
    let inputs = Inputs { files: &cli.files };
    let machine = cli.files.format == Format::Machine;
    match &cli.command {
        Command::Validate => {
            let p = inputs.problem()?;
            let g = inputs.taxonomy()?;
            let rules = inputs.rules(&None, &g)?;
            let reg = inputs.registry(&g)?;
            let roster = inputs.roster()?;
            let sched = inputs.schedule()?;
            for svc in reg.services() {
                if let Some(a) = p.action(&svc.name) {
                    if Some(a) != reg.schema(&svc.name) {
                        return Err(Failure::domain(format!(
                            "service `{}` compiles to a different schema than the domain action",
                            svc.name
                        )));
                    }
                }
            }
            println!(
                "ok: {} actions, {} initial fluents, {} concepts, {} rules, {} services, {} passengers, {} stations",
                p.actions.len(),
                p.initial.len(),
                g.concepts().count(),
                rules.len(),
                reg.len(),
                roster.passengers().len(),
                sched.stops().len()
            );
        }
        Command::Plan => {
            let p = inputs.problem()?;
            let found = plan(&p, &inputs.search()?).map_err(Failure::domain)?;
            if machine {
                for (i, a) in found.actions().enumerate() {
                    println!("{i}\t{a}");
                }
            } else if found.is_empty() {
                println!("goal already holds; empty plan");
            } else {
                print!("{}", found.listing());
            }
        }
        Command::Compose { have, want, fact } => {
            let g = inputs.taxonomy()?;
            let reg = inputs.registry(&g)?;
            let have = have
                .iter()
                .map(|h| {
                    let (c, v) = h.split_once('=').ok_or_else(|| Failure::usage(format!("expected CONCEPT=VALUE, found `{h}`")))?;
                    Ok((c.to_string(), Term::constant(v)))
                })
                .collect::<Result<Vec<_>, Failure>>()?;
            let world_facts = fact
                .iter()
                .map(|f| parse_fluent(f).map_err(|e| Failure::usage(format!("--fact {f}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let req = CompositionRequest { have, want: want.clone(), world_facts };
            let w = compose(&req, &reg, &g, &inputs.search()?).map_err(|e| match e {
                ComposeError::WorldFact(_) => Failure::usage(e),
                other => Failure::domain(other),
            })?;
            if machine {
                print!("{}", w.to_lines());
            } else if w.plan.is_empty() {
                println!("request already satisfied; empty workflow");
            } else {
                print!("{}", w.plan.listing());
                print!("{}", data_flow_text(&w));
            }
        }
        Command::Trace { event, now } => {
            let mut roster = inputs.roster()?;
            boarding_check(&mut roster);
            let patient = roster.get(&event.pnr).ok_or_else(|| Failure::domain(ScenarioError::UnknownPassenger(event.pnr.clone())))?;
            let info = event.info()?;
            let at = now.as_deref().map(parse_time).transpose()?.unwrap_or(NaiveTime::MIN);
            let ev = new_event(patient, &info, patient.travel.journey_date.and_time(at));
            match trace_resources(&roster, &ev, &TraceConfig::default()) {
                Ok(ranked) => {
                    for (i, r) in ranked.iter().enumerate() {
                        if machine {
                            println!(
                                "{i}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                                r.pnr,
                                r.name,
                                r.profession,
                                r.specialization_or_general(),
                                r.coach,
                                r.distance,
                                r.tier
                            );
                        } else {
                            println!("{}. {r}", i + 1);
                        }
                    }
                }
                Err(ScenarioError::FallbackRequired) => {
                    let notice = fallback_station_notice(&ev, &inputs.schedule()?, at);
                    if machine {
                        println!("fallback\t{}\t{}", notice.station, notice.scheduled_arrival.format("%H:%M"));
                    }
                    return Err(Failure::domain(format!(
                        "no medical responder aboard; notify station {} (arr. {})",
                        notice.station,
                        notice.scheduled_arrival.format("%H:%M")
                    )));
                }
                Err(e) => return Err(scenario_failure(e)),
            }
        }
        Command::Severity { spec, symptoms, rules } => {
            let g = inputs.taxonomy()?;
            let rules = inputs.rules(rules, &g)?;
            let concept = concept_name(spec);
            if !g.contains(&concept) {
                return Err(Failure::domain(format!("unknown concept `{concept}`")));
            }
            let set: BTreeSet<String> = symptoms.iter().filter(|s| !s.is_empty()).cloned().collect();
            println!("{}", classify_severity(&concept, &set, &rules));
        }
        Command::Report { event, history, message, at, rules } => {
            let mut d = inputs.dispatcher(rules)?;
            boarding_check(&mut d.roster);
            let mut info = event.info()?;
            info.case_history = history.clone();
            info.message = message.clone();
            let now = match at {
                Some(s) => NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M")
                    .map_err(|_| Failure::usage(format!("bad --at `{s}`, expected YYYY-MM-DD HH:MM")))?,
                None => chrono::Local::now().naive_local(),
            };
            let mut log = inputs.open_log()?;
            let outcome = match d.report_emergency(&event.pnr, &info, &FixedClock(now), &mut log) {
                Ok(r) => ScriptOutcome::Assigned(Box::new(r)),
                Err(ScenarioError::NoResponderAvailable { id, notice }) => {
                    let o = ScriptOutcome::Fallback { id, pnr: event.pnr.clone(), notice };
                    print_outcome(&o, machine);
                    return Err(Failure::domain("no medical responder aboard; fallback notice recorded"));
                }
                Err(e) => return Err(scenario_failure(e)),
            };
            print_outcome(&outcome, machine);
        }
        Command::Simulate { script, rules } => {
            let (name, text) = source(script, "emergency.scenario", bundled::SCENARIO)?;
            let mut d = inputs.dispatcher(rules)?;
            let mut log = inputs.open_log()?;
            let outcomes = run_script(&text, &mut d, &mut log).map_err(|e| match e {
                ScenarioError::Script { line, source } => {
                    let f = scenario_failure(*source);
                    Failure { code: f.code, message: format!("{name}:{line}: {}", f.message) }
                }
                other => scenario_failure(other),
            })?;
            for o in &outcomes {
                print_outcome(o, machine);
            }
        }
    }
    Ok(())
}

fn print_outcome(o: &ScriptOutcome, machine: bool) {
    if machine {
        print!("{}", o.machine_lines());
    } else {
        println!("{}", o.text_line());
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message);
            ExitCode::from(f.code)
        }
    }
}
