//! Fluent-calculus planning and ontology-driven service composition.
//!
//! The crate is organised bottom-up:
//!
//! * [`term`]: terms, unification and world/knowledge states
//! * [`schema`] and [`dsl`]: action schemas and the `.fcd`/`.fcp` file formats
//! * [`ontology`]: subclass taxonomies, match degrees and severity rules
//! * [`registry`]: service descriptions compiled into action schemas
//! * [`planner`]: progression search over action schemas
//! * [`composer`]: request to workflow, and workflow execution over grounding stubs
//! * [`scenario`] and [`eventlog`]: the train emergency-healthcare application
//! * [`bundled`]: sample domain, taxonomy, registry, roster and scenario files

pub mod bundled;
pub mod composer;
pub mod dsl;
pub mod eventlog;
pub mod ontology;
pub mod planner;
pub mod registry;
pub mod scenario;
pub mod schema;
pub mod term;

pub use dsl::{parse_domain, parse_problem, pretty_print, DomainFile, DslError, ParseError, ProblemFile};
pub use schema::{ActionSchema, PossAtom, SchemaError};
pub use term::{unify, State, Substitution, Term, UnifyFailure};
pub use composer::{compose, execute, ComposeError, CompositionRequest, ExecutionError, ExecutionTrace, Workflow};
pub use eventlog::{EventLog, EventLogError};
pub use ontology::{MatchDegree, OntologyError, Severity, TaxonomyGraph};
pub use planner::{enumerate_plans, plan, validate_plan, Plan, PlanError, PlanningProblem, SearchConfig};
pub use registry::{find_candidates, Registry, RegistryError, ServiceDescription};
pub use scenario::{Dispatcher, EmergencyEvent, Passenger, Roster, ScenarioError};
