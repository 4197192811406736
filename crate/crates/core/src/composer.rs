//! Request-driven service composition and workflow execution.
//!
//! A [`CompositionRequest`] names typed values the caller already has and the
//! concepts it wants to know. [`build_problem`] turns it into a planning
//! problem over the registry's compiled schemas, [`compose`] plans it and wires
//! every step input to its source, and [`execute`] runs the steps against
//! in-process grounding stubs, replacing placeholders by the values the stubs
//! return.
//!
//! Workflows and traces serialize to tab-separated lines:
//!
//! ```text
//! step    <index> <service> <grounding> <action>
//! flow    <index> <param> request <concept> <value> <degree>
//! flow    <index> <param> output  <producer index> <placeholder>
//! flow    <index> <param> world   <value>
//! record  <index> <service> <inputs> <outputs> <outcome>
//! ```
//!
//! `<inputs>` is `param=value` joined by `;`, `<outputs>` is
//! `param:placeholder=value` joined by `;`.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::PathBuf;

use thiserror::Error;

use crate::ontology::{MatchDegree, TaxonomyGraph};
use crate::planner::{self, Plan, PlanError, PlanningProblem, SearchConfig};
use crate::registry::Registry;
use crate::term::{State, StateError, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComposeError {
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("world fact: {0}")]
    WorldFact(#[from] StateError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CompositionRequest {
    /// `(concept, value)` pairs known up front.
    pub have: Vec<(String, Term)>,
    /// Concepts whose values must be known at the end.
    pub want: Vec<String>,
    /// Ground world fluents seeding the initial state.
    pub world_facts: Vec<Term>,
}

/// Goal pattern for a wanted concept: `know(C)` when the registry only ever
/// asserts `C` as a 0-ary knowledge effect, `know(C(_C))` otherwise.
fn want_pattern(concept: &str, reg: &Registry) -> Term {
    let declared_output = reg.services().any(|s| s.outputs.iter().any(|(_, c)| c == concept));
    let zero_ary_effect = reg
        .services()
        .any(|s| s.extra_adds.iter().any(|a| a.known_inner() == Some(&Term::constant(concept))));
    if zero_ary_effect && !declared_output {
        Term::know(Term::constant(concept))
    } else {
        Term::know(Term::compound(concept, vec![Term::var(format!("_{concept}"))]))
    }
}

pub fn build_problem(
    req: &CompositionRequest,
    reg: &Registry,
    g: &TaxonomyGraph,
) -> Result<PlanningProblem, ComposeError> {
    for c in req.have.iter().map(|(c, _)| c).chain(&req.want) {
        if !g.contains(c) {
            return Err(ComposeError::UnknownConcept(c.clone()));
        }
    }
    let mut initial = State::from_fluents(req.world_facts.iter().cloned())?;
    for (c, v) in &req.have {
        initial.insert(Term::know(Term::compound(c.clone(), vec![v.clone()])))?;
    }
    let goal = req.want.iter().map(|c| want_pattern(c, reg)).collect();
    Ok(PlanningProblem::new(initial, goal, reg.actions()))
}

/// Where a step input comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DataSource {
    Request { concept: String, value: Term, degree: MatchDegree },
    StepOutput { step: usize, placeholder: String },
    World { value: Term },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Workflow {
    pub problem: PlanningProblem,
    pub plan: Plan,
    /// Grounding stub id of each step.
    pub groundings: Vec<String>,
    pub data_flow: BTreeMap<(usize, String), DataSource>,
}

impl Workflow {
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for (i, step) in self.plan.steps.iter().enumerate() {
            out.push_str(&format!(
                "step\t{i}\t{}\t{}\t{}\n",
                step.action.name, self.groundings[i], step.action
            ));
            let mut params: Vec<(&String, &DataSource)> =
                self.data_flow.range((i, String::new())..).take_while(|((s, _), _)| *s == i).map(|((_, p), d)| (p, d)).collect();
            // Keep parameter declaration order rather than name order.
            if let Some(schema) = self.problem.action(&step.action.name) {
                params.sort_by_key(|(p, _)| schema.params().iter().position(|q| q == *p));
            }
            for (p, src) in params {
                let detail = match src {
                    DataSource::Request { concept, value, degree } => {
                        format!("request\t{concept}\t{}\t{degree}", value.render_arg(None))
                    }
                    DataSource::StepOutput { step, placeholder } => format!("output\t{step}\t{placeholder}"),
                    DataSource::World { value } => format!("world\t{}", value.render_arg(None)),
                };
                out.push_str(&format!("flow\t{i}\t{p}\t{detail}\n"));
            }
        }
        out
    }
}

pub fn compose(
    req: &CompositionRequest,
    reg: &Registry,
    g: &TaxonomyGraph,
    cfg: &SearchConfig,
) -> Result<Workflow, ComposeError> {
    let problem = build_problem(req, reg, g)?;
    let plan = planner::plan(&problem, cfg)?;
    let mut data_flow = BTreeMap::new();
    let mut groundings = Vec::with_capacity(plan.len());
    for (i, step) in plan.steps.iter().enumerate() {
        let svc = reg.get(&step.action.name).expect("plan actions come from the registry");
        groundings.push(svc.grounding.clone());
        for (param, concept) in &svc.inputs {
            let value = step.binding.get(param).cloned().expect("inputs are bound by check_poss");
            let source = match &value {
                Term::Placeholder(id) => DataSource::StepOutput {
                    step: plan.producer_of(id).expect("placeholders come from earlier steps"),
                    placeholder: id.clone(),
                },
                _ => req
                    .have
                    .iter()
                    .filter(|(_, v)| *v == value)
                    .filter_map(|(c, _)| {
                        let d = g.match_degree(c, concept).ok()?;
                        (d >= MatchDegree::Plugin).then_some((c, d))
                    })
                    .max_by_key(|(_, d)| *d)
                    .map(|(c, degree)| DataSource::Request { concept: c.clone(), value: value.clone(), degree })
                    .unwrap_or(DataSource::World { value }),
            };
            data_flow.insert((i, param.clone()), source);
        }
    }
    Ok(Workflow { problem, plan, groundings, data_flow })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SentMessage {
    pub recipient: String,
    pub coach: String,
    pub body: String,
}

/// Messages delivered by notification stubs, optionally mirrored to a file
/// (one tab-separated line per message).
#[derive(Debug, Default)]
pub struct MessageSink {
    messages: Vec<SentMessage>,
    file: Option<PathBuf>,
}

impl MessageSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_file(path: impl Into<PathBuf>) -> Self {
        MessageSink { messages: Vec::new(), file: Some(path.into()) }
    }

    pub fn send(&mut self, msg: SentMessage) -> Result<(), String> {
        if let Some(path) = &self.file {
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| format!("{}: {e}", path.display()))?;
            writeln!(f, "{}\t{}\t{}", msg.recipient, msg.coach, msg.body)
                .map_err(|e| format!("{}: {e}", path.display()))?;
        }
        self.messages.push(msg);
        Ok(())
    }

    pub fn messages(&self) -> &[SentMessage] {
        &self.messages
    }
}

pub struct StubCall<'a> {
    pub service: &'a str,
    /// Input parameters with concrete values, in parameter order.
    pub inputs: &'a [(String, Term)],
    /// Output parameters the stub must return values for.
    pub outputs: &'a [String],
}

impl StubCall<'_> {
    pub fn input(&self, param: &str) -> Option<&Term> {
        self.inputs.iter().find(|(p, _)| p == param).map(|(_, v)| v)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StubReply {
    pub outputs: BTreeMap<String, Term>,
    /// Recorded as the step outcome when present.
    pub token: Option<String>,
}

pub trait GroundingStub {
    fn invoke(&mut self, call: &StubCall<'_>, sink: &mut MessageSink) -> Result<StubReply, String>;
}

impl<F> GroundingStub for F
where
    F: FnMut(&StubCall<'_>, &mut MessageSink) -> Result<StubReply, String>,
{
    fn invoke(&mut self, call: &StubCall<'_>, sink: &mut MessageSink) -> Result<StubReply, String> {
        self(call, sink)
    }
}

#[derive(Default)]
pub struct GroundingEnv<'e> {
    stubs: BTreeMap<String, Box<dyn GroundingStub + 'e>>,
    pub sink: MessageSink,
}

impl<'e> GroundingEnv<'e> {
    pub fn new(sink: MessageSink) -> Self {
        GroundingEnv { stubs: BTreeMap::new(), sink }
    }

    pub fn register(&mut self, id: impl Into<String>, stub: impl GroundingStub + 'e) {
        self.stubs.insert(id.into(), Box::new(stub));
    }

    pub fn has(&self, id: &str) -> bool {
        self.stubs.contains_key(id)
    }

    /// Grounding ids referenced by `reg` with no registered stub.
    pub fn missing_for(&self, reg: &Registry) -> Vec<String> {
        reg.services().map(|s| s.grounding.clone()).filter(|id| !self.has(id)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub step: usize,
    pub service: String,
    pub inputs: Vec<(String, Term)>,
    /// `(param, placeholder id, value)`.
    pub outputs: Vec<(String, String, Term)>,
    pub outcome: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub records: Vec<TraceRecord>,
    /// Placeholder id to concrete value.
    pub resolved: BTreeMap<String, Term>,
    /// World and knowledge after the last executed step, with concrete values.
    pub state: State,
}

impl ExecutionTrace {
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let inputs: Vec<String> = r.inputs.iter().map(|(p, v)| format!("{p}={}", v.render_arg(None))).collect();
            let outputs: Vec<String> =
                r.outputs.iter().map(|(p, id, v)| format!("{p}:{id}={}", v.render_arg(None))).collect();
            out.push_str(&format!(
                "record\t{}\t{}\t{}\t{}\t{}\n",
                r.step,
                r.service,
                inputs.join(";"),
                outputs.join(";"),
                r.outcome
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("step {step}: {reason}")]
pub struct ExecutionError {
    pub step: usize,
    pub reason: String,
    /// Records of the steps completed before the failure.
    pub trace: Box<ExecutionTrace>,
}

/// Runs the workflow steps in order against `env`.
pub fn execute(w: &Workflow, env: &mut GroundingEnv<'_>) -> Result<ExecutionTrace, ExecutionError> {
    let mut trace = ExecutionTrace { state: w.problem.initial.clone(), ..Default::default() };
    if let Some(i) = w.groundings.iter().position(|id| !env.has(id)) {
        return Err(ExecutionError {
            step: i,
            reason: format!("no grounding stub `{}`", w.groundings[i]),
            trace: Box::new(trace),
        });
    }
    for (i, step) in w.plan.steps.iter().enumerate() {
        let fail = |trace: &ExecutionTrace, reason: String| ExecutionError {
            step: i,
            reason,
            trace: Box::new(trace.clone()),
        };
        let Some(schema) = w.problem.action(&step.action.name) else {
            return Err(fail(&trace, format!("unknown action `{}`", step.action.name)));
        };
        let inputs: Vec<(String, Term)> = schema
            .params()
            .iter()
            .zip(&step.action.args)
            .map(|(p, a)| (p.clone(), a.resolve_placeholders(&trace.resolved)))
            .collect();
        let outputs = schema.outputs().to_vec();
        let call = StubCall { service: schema.name(), inputs: &inputs, outputs: &outputs };
        let stub = env.stubs.get_mut(&w.groundings[i]).expect("checked above");
        let reply = stub.invoke(&call, &mut env.sink).map_err(|r| fail(&trace, r))?;

        let mut produced = Vec::new();
        for v in &outputs {
            let Some(Term::Placeholder(id)) = step.binding.get(v) else {
                return Err(fail(&trace, format!("output `{v}` has no placeholder")));
            };
            let Some(value) = reply.outputs.get(v) else {
                return Err(fail(&trace, format!("stub returned no value for `{v}`")));
            };
            if !value.is_ground() {
                return Err(fail(&trace, format!("stub returned non-ground value for `{v}`")));
            }
            trace.resolved.insert(id.clone(), value.clone());
            produced.push((v.clone(), id.clone(), value.clone()));
        }

        let concrete = step
            .binding
            .iter()
            .map(|(k, t)| (k.clone(), t.resolve_placeholders(&trace.resolved)))
            .collect();
        trace.state = planner::apply_update(schema, &concrete, &trace.state).map_err(|e| fail(&trace, e.to_string()))?;
        trace.records.push(TraceRecord {
            step: i,
            service: schema.name().to_string(),
            inputs,
            outputs: produced,
            outcome: reply.token.unwrap_or_else(|| "ok".to_string()),
        });
    }
    Ok(trace)
}
