//! Progression planning over fluent-calculus action schemas.
//!
//! A state moves forward through [`apply_update`]: removed fluents go, added
//! fluents appear, every other fluent persists. Output variables of an action
//! are bound to placeholders `out_<action>_<var>_<step>` (step is 1-based), so
//! a plan can be built before the values exist.
//!
//! [`plan`] runs iterative-deepening depth-first search with successors in
//! canonical order, which yields the shortest plan and, among those, the
//! lexicographically smallest. [`enumerate_plans`] is the exhaustive
//! reference used to check it.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::dsl::{DomainFile, ProblemFile};
use crate::schema::{ActionSchema, PossAtom};
use crate::term::{State, Substitution, Term};

pub const DEFAULT_MAX_DEPTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("no plan within depth {depth}")]
    NoPlanFound { depth: usize },
    #[error("action `{action}` is not applicable: {reason}")]
    PreconditionViolation { action: String, reason: String },
    #[error("fluent `{name}/{arity}` is not declared in the domain")]
    UndeclaredFluent { name: String, arity: usize },
    #[error("max depth must be at least 1")]
    InvalidDepth,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanningProblem {
    pub initial: State,
    /// Existential conjunction of fluent patterns.
    pub goal: Vec<Term>,
    pub actions: Vec<ActionSchema>,
}

impl PlanningProblem {
    pub fn new(initial: State, goal: Vec<Term>, actions: Vec<ActionSchema>) -> Self {
        PlanningProblem { initial, goal, actions }
    }

    /// Combines a domain and a problem file, checking that every initial and
    /// goal fluent is declared with the right arity.
    pub fn from_files(domain: &DomainFile, problem: &ProblemFile) -> Result<Self, PlanError> {
        for t in problem.initial.fluents().into_iter().chain(problem.goal.iter()) {
            let f = t.known_inner().unwrap_or(t);
            if let Some((name, arity)) = f.functor() {
                if domain.arity_of(name) != Some(arity) {
                    return Err(PlanError::UndeclaredFluent { name: name.to_string(), arity });
                }
            }
        }
        Ok(PlanningProblem::new(problem.initial.clone(), problem.goal.clone(), domain.actions.clone()))
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name() == name)
    }

    pub fn goal_satisfied(&self, state: &State) -> bool {
        state.satisfies_all(&self.goal)
    }
}

/// An action name with its parameter values.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<Term>,
}

impl GroundAction {
    pub fn render(&self, rename: Option<&dyn Fn(&str) -> String>) -> String {
        let args: Vec<String> = self.args.iter().map(|a| a.render_arg(rename)).collect();
        format!("{}({})", self.name, args.join(","))
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(None))
    }
}

/// One plan step: the ground action plus the full binding used to apply it,
/// outputs included.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlanStep {
    pub action: GroundAction,
    pub binding: Substitution,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProducedPlaceholder {
    pub id: String,
    pub step: usize,
    pub param: String,
    /// Functor of the fluent carrying the value, e.g. `Name`.
    pub carrier: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
    /// In production order.
    pub produced: Vec<ProducedPlaceholder>,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn actions(&self) -> impl Iterator<Item = &GroundAction> {
        self.steps.iter().map(|s| &s.action)
    }

    /// Step index that produced placeholder `id`.
    pub fn producer_of(&self, id: &str) -> Option<usize> {
        self.produced.iter().find(|p| p.id == id).map(|p| p.step)
    }

    /// Short display names: lowercase initial of the carrying fluent plus a
    /// per-initial counter (`#n1`, `#c1`, ...).
    pub fn aliases(&self) -> BTreeMap<String, String> {
        let mut counters: BTreeMap<char, usize> = BTreeMap::new();
        let mut out = BTreeMap::new();
        for p in &self.produced {
            let letter = p
                .carrier
                .as_deref()
                .and_then(|c| c.chars().next())
                .map_or('p', |c| c.to_ascii_lowercase());
            let n = counters.entry(letter).or_insert(0);
            *n += 1;
            out.insert(p.id.clone(), format!("{letter}{n}"));
        }
        out
    }

    /// Numbered listing, one step per line, placeholders shown by alias.
    pub fn listing(&self) -> String {
        let aliases = self.aliases();
        let rename = |id: &str| aliases.get(id).cloned().unwrap_or_else(|| id.to_string());
        self.steps
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{}. {}\n", i + 1, s.action.render(Some(&rename))))
            .collect()
    }

    /// Cmp key for canonical ordering: shorter first, then step-wise.
    fn order_key(&self) -> (usize, &[PlanStep]) {
        (self.steps.len(), &self.steps)
    }
}

impl PartialOrd for Plan {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Plan {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.order_key().cmp(&other.order_key())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchConfig {
    max_depth: usize,
    /// Skip states already explored with at least as much remaining depth.
    pub prune_visited: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { max_depth: DEFAULT_MAX_DEPTH, prune_visited: true }
    }
}

impl SearchConfig {
    pub fn new(max_depth: usize) -> Result<Self, PlanError> {
        if max_depth == 0 {
            return Err(PlanError::InvalidDepth);
        }
        Ok(SearchConfig { max_depth, prune_visited: true })
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn without_pruning(mut self) -> Self {
        self.prune_visited = false;
        self
    }
}

/// Solves the precondition conjunction left to right. Each result binds all
/// parameters and precondition variables; outputs stay unbound.
pub fn check_poss(schema: &ActionSchema, state: &State) -> Vec<Substitution> {
    let mut frontier = vec![Substitution::new()];
    for atom in schema.poss() {
        let mut next = Vec::new();
        for s in &frontier {
            match atom {
                PossAtom::Holds(p) => next.extend(state.holds_from(p, s.clone())),
                PossAtom::KnowsVal(p) => next.extend(state.knows_val_from(p, s.clone())),
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    let mut seen = std::collections::HashSet::new();
    frontier.retain(|s| seen.insert(s.clone()));
    frontier
}

pub fn placeholder_id(action: &str, var: &str, step: usize) -> String {
    format!("out_{action}_{var}_{step}")
}

/// Extends `subst` with fresh placeholders for the schema outputs.
pub fn bind_outputs(schema: &ActionSchema, subst: &Substitution, step: usize) -> Substitution {
    let mut s = subst.clone();
    for v in schema.outputs() {
        if !s.contains(v) {
            s.bind(v, Term::placeholder(placeholder_id(schema.name(), v, step)))
                .expect("output variables are fresh");
        }
    }
    s
}

/// `Z2 = (Z1 \ removes·σ) ∪ adds·σ`, after checking that σ satisfies the
/// precondition in `z1` and grounds the whole update.
pub fn apply_update(schema: &ActionSchema, subst: &Substitution, z1: &State) -> Result<State, PlanError> {
    let violation = |reason: String| PlanError::PreconditionViolation { action: schema.name().to_string(), reason };
    for atom in schema.poss() {
        let f = subst.apply(atom.fluent());
        if !f.is_ground() {
            return Err(violation(format!("{atom} is not ground under the binding")));
        }
        let ok = match atom {
            PossAtom::Holds(_) => z1.contains(&f),
            PossAtom::KnowsVal(_) => z1.contains(&Term::know(f.clone())),
        };
        if !ok {
            return Err(violation(format!("{} does not hold", subst_atom(atom, &f))));
        }
    }
    let mut z2 = z1.clone();
    let mut removes = Vec::with_capacity(schema.removes().len());
    for r in schema.removes() {
        let g = subst.apply(r);
        if !g.is_ground() {
            return Err(violation(format!("removed fluent {g} is not ground")));
        }
        removes.push(g);
    }
    let mut adds = Vec::with_capacity(schema.adds().len());
    for a in schema.adds() {
        let g = subst.apply(a);
        if !g.is_ground() {
            return Err(violation(format!("added fluent {g} is not ground")));
        }
        adds.push(g);
    }
    for r in &removes {
        z2.remove(r);
    }
    for a in adds {
        z2.insert(a).map_err(|e| violation(e.to_string()))?;
    }
    Ok(z2)
}

fn subst_atom(atom: &PossAtom, f: &Term) -> PossAtom {
    match atom {
        PossAtom::Holds(_) => PossAtom::Holds(f.clone()),
        PossAtom::KnowsVal(_) => PossAtom::KnowsVal(f.clone()),
    }
}

struct Successor<'p> {
    step: PlanStep,
    schema: &'p ActionSchema,
    next: State,
}

/// Applicable steps from `state` at plan position `step` (0-based), in
/// canonical order.
fn successors<'p>(problem: &'p PlanningProblem, state: &State, step: usize) -> Vec<Successor<'p>> {
    let mut out = Vec::new();
    for schema in &problem.actions {
        for s in check_poss(schema, state) {
            let full = bind_outputs(schema, &s, step + 1);
            let action = GroundAction {
                name: schema.name().to_string(),
                args: schema.params().iter().map(|p| full.apply(&Term::var(p.clone()))).collect(),
            };
            let next = apply_update(schema, &full, state).expect("check_poss bindings are applicable");
            out.push(Successor { step: PlanStep { action, binding: full }, schema, next });
        }
    }
    out.sort_by(|a, b| a.step.cmp(&b.step));
    out
}

fn record(plan: &mut Plan, schema: &ActionSchema, step: PlanStep) {
    let idx = plan.steps.len();
    for v in schema.outputs() {
        if let Some(Term::Placeholder(id)) = step.binding.get(v) {
            plan.produced.push(ProducedPlaceholder {
                id: id.clone(),
                step: idx,
                param: v.clone(),
                carrier: schema.output_carrier(v).map(str::to_string),
            });
        }
    }
    plan.steps.push(step);
}

fn unrecord(plan: &mut Plan) {
    let idx = plan.steps.len() - 1;
    plan.steps.pop();
    plan.produced.retain(|p| p.step != idx);
}

/// Shortest plan, ties broken lexicographically by step.
pub fn plan(problem: &PlanningProblem, cfg: &SearchConfig) -> Result<Plan, PlanError> {
    for limit in 0..=cfg.max_depth {
        let mut visited: HashMap<String, usize> = HashMap::new();
        let mut path = Plan::default();
        if dfs(problem, &problem.initial, limit, cfg.prune_visited, &mut visited, &mut path) {
            return Ok(path);
        }
    }
    Err(PlanError::NoPlanFound { depth: cfg.max_depth })
}

fn dfs(
    problem: &PlanningProblem,
    state: &State,
    remaining: usize,
    prune: bool,
    visited: &mut HashMap<String, usize>,
    path: &mut Plan,
) -> bool {
    if problem.goal_satisfied(state) {
        return true;
    }
    if remaining == 0 {
        return false;
    }
    if prune {
        let key = state.shape_key();
        match visited.get(&key) {
            Some(&r) if r >= remaining => return false,
            _ => {
                visited.insert(key, remaining);
            }
        }
    }
    for succ in successors(problem, state, path.len()) {
        record(path, succ.schema, succ.step);
        if dfs(problem, &succ.next, remaining - 1, prune, visited, path) {
            return true;
        }
        unrecord(path);
    }
    false
}

/// Every valid plan of length at most `max_depth`, shortest first and then in
/// step order. Exhaustive; meant for small problems.
pub fn enumerate_plans(problem: &PlanningProblem, max_depth: usize) -> Vec<Plan> {
    fn go(problem: &PlanningProblem, state: &State, remaining: usize, path: &mut Plan, out: &mut Vec<Plan>) {
        if problem.goal_satisfied(state) {
            out.push(path.clone());
        }
        if remaining == 0 {
            return;
        }
        for succ in successors(problem, state, path.len()) {
            record(path, succ.schema, succ.step);
            go(problem, &succ.next, remaining - 1, path, out);
            unrecord(path);
        }
    }
    let mut out = Vec::new();
    go(problem, &problem.initial, max_depth, &mut Plan::default(), &mut out);
    out.sort();
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationFailure {
    #[error("step {step}: unknown action `{action}`")]
    UnknownAction { step: usize, action: String },
    #[error("step {step}: {reason}")]
    NotApplicable { step: usize, reason: String },
    #[error("goal not satisfied after {steps} steps")]
    GoalUnsatisfied { steps: usize },
}

impl ValidationFailure {
    /// Index of the failing step; the plan length when only the goal fails.
    pub fn step(&self) -> usize {
        match self {
            ValidationFailure::UnknownAction { step, .. } | ValidationFailure::NotApplicable { step, .. } => *step,
            ValidationFailure::GoalUnsatisfied { steps } => *steps,
        }
    }
}

/// Replays `plan` from the initial state and returns the final state.
pub fn simulate(problem: &PlanningProblem, plan: &Plan) -> Result<State, ValidationFailure> {
    let mut state = problem.initial.clone();
    for (i, step) in plan.steps.iter().enumerate() {
        let schema = problem.action(&step.action.name).ok_or_else(|| ValidationFailure::UnknownAction {
            step: i,
            action: step.action.name.clone(),
        })?;
        for (p, arg) in schema.params().iter().zip(&step.action.args) {
            if step.binding.get(p) != Some(arg) {
                return Err(ValidationFailure::NotApplicable {
                    step: i,
                    reason: format!("argument for `{p}` disagrees with the binding"),
                });
            }
        }
        state = apply_update(schema, &step.binding, &state)
            .map_err(|e| ValidationFailure::NotApplicable { step: i, reason: e.to_string() })?;
    }
    Ok(state)
}

/// Checks each step against the progressed state and the goal at the end.
pub fn validate_plan(problem: &PlanningProblem, plan: &Plan) -> Result<(), ValidationFailure> {
    let end = simulate(problem, plan)?;
    if problem.goal_satisfied(&end) {
        Ok(())
    } else {
        Err(ValidationFailure::GoalUnsatisfied { steps: plan.len() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_domain, parse_problem};

    pub(crate) const DOMAIN: &str = "\
fluent Profession/1.
fluent Specialization/1.
fluent Name/1.
fluent CoachNum/1.
fluent Message/1.
fluent ConfirmSend/0.
fluent availableRole/2.
fluent availableAt/2.
fluent SendMsg/3.

action findResource(PR,SP)
    poss: knows_val(Profession(PR)), knows_val(Specialization(SP)), holds(availableRole(PR,SP))
    update: add [know(Name(P)), know(CoachNum(CN)), availableAt(P,CN)] remove [].

action notifyResource(P,CN,MSG)
    poss: knows_val(Name(P)), knows_val(CoachNum(CN)), knows_val(Message(MSG)), holds(availableAt(P,CN))
    update: add [SendMsg(P,CN,MSG), know(ConfirmSend)] remove [].
";

    const PROBLEM: &str = "init: availableRole(doctor,orthopedics), know(Profession(doctor)), \
        know(Specialization(orthopedics)), know(Message(help)). goal: know(ConfirmSend).";

    fn problem() -> PlanningProblem {
        PlanningProblem::from_files(&parse_domain(DOMAIN).unwrap(), &parse_problem(PROBLEM).unwrap()).unwrap()
    }

    fn c(s: &str) -> Term {
        Term::constant(s)
    }

    #[test]
    fn check_poss_find_resource() {
        let p = problem();
        let find = p.action("findResource").unwrap();
        let got = check_poss(find, &p.initial);
        assert_eq!(got, vec![Substitution::from_iter([("PR", c("doctor")), ("SP", c("orthopedics"))])]);

        let mut missing = p.initial.clone();
        missing.remove(&Term::compound("availableRole", vec![c("doctor"), c("orthopedics")]));
        assert!(check_poss(find, &missing).is_empty());

        let empty = ActionSchema::new("noop", vec![], vec![], vec![], vec![]).unwrap();
        assert_eq!(check_poss(&empty, &State::new()), vec![Substitution::new()]);
    }

    #[test]
    fn apply_update_adds_placeholders_and_keeps_frame() {
        let p = problem();
        let find = p.action("findResource").unwrap();
        let s = bind_outputs(find, &check_poss(find, &p.initial)[0], 1);
        let z2 = apply_update(find, &s, &p.initial).unwrap();
        for f in p.initial.fluents() {
            assert!(z2.contains(f));
        }
        let n = Term::placeholder("out_findResource_P_1");
        let cn = Term::placeholder("out_findResource_CN_1");
        assert!(z2.contains(&Term::know(Term::compound("Name", vec![n.clone()]))));
        assert!(z2.contains(&Term::know(Term::compound("CoachNum", vec![cn.clone()]))));
        assert_eq!(z2.len(), p.initial.len() + 3);

        let notify = p.action("notifyResource").unwrap();
        let s2 = &check_poss(notify, &z2)[0];
        let z3 = apply_update(notify, s2, &z2).unwrap();
        assert!(z3.contains(&Term::compound("SendMsg", vec![n, cn, c("help")])));
        assert!(z3.contains(&Term::know(c("ConfirmSend"))));
    }

    #[test]
    fn identity_update() {
        let empty = ActionSchema::new("noop", vec![], vec![], vec![], vec![]).unwrap();
        let z = problem().initial;
        assert_eq!(apply_update(&empty, &Substitution::new(), &z).unwrap(), z);
    }

    #[test]
    fn apply_update_rejects_invalid_binding() {
        let p = problem();
        let notify = p.action("notifyResource").unwrap();
        let s = Substitution::from_iter([("P", c("x")), ("CN", c("y")), ("MSG", c("help"))]);
        assert!(matches!(apply_update(notify, &s, &p.initial), Err(PlanError::PreconditionViolation { .. })));
    }

    #[test]
    fn emergency_plan() {
        let p = problem();
        let plan = plan(&p, &SearchConfig::default()).unwrap();
        assert_eq!(plan.listing(), "1. findResource(doctor,orthopedics)\n2. notifyResource(#n1,#c1,help)\n");
        assert_eq!(plan.producer_of("out_findResource_P_1"), Some(0));
        assert_eq!(validate_plan(&p, &plan), Ok(()));
        assert_eq!(enumerate_plans(&p, 2), vec![plan.clone()]);

        let mut swapped = plan.clone();
        swapped.steps.swap(0, 1);
        assert_eq!(validate_plan(&p, &swapped).unwrap_err().step(), 0);
    }

    #[test]
    fn satisfied_goal_gives_empty_plan() {
        let mut p = problem();
        p.goal = vec![Term::know(Term::compound("Profession", vec![Term::var("X")]))];
        let got = plan(&p, &SearchConfig::default()).unwrap();
        assert!(got.is_empty());
        assert_eq!(validate_plan(&p, &got), Ok(()));
        assert_eq!(enumerate_plans(&p, 0), vec![Plan::default()]);
    }

    #[test]
    fn missing_notify_means_no_plan() {
        let mut p = problem();
        p.actions.retain(|a| a.name() != "notifyResource");
        assert_eq!(plan(&p, &SearchConfig::default()), Err(PlanError::NoPlanFound { depth: 8 }));
        assert!(enumerate_plans(&p, 3).is_empty());
        assert!(enumerate_plans(&p, 0).is_empty());
    }

    #[test]
    fn undeclared_goal_fluent() {
        let d = parse_domain(DOMAIN).unwrap();
        let pr = parse_problem("init: . goal: know(Bogus).").unwrap();
        assert_eq!(
            PlanningProblem::from_files(&d, &pr),
            Err(PlanError::UndeclaredFluent { name: "Bogus".into(), arity: 0 })
        );
    }

    #[test]
    fn zero_depth_config_rejected() {
        assert_eq!(SearchConfig::new(0), Err(PlanError::InvalidDepth));
    }
}
