//! Concept taxonomies, semantic match degrees and severity rules.
//!
//! Taxonomy files (`.tax`) hold one declaration per line:
//!
//! ```text
//! root Event
//! concept Medical subClassOf EventType
//! concept Orthopedics subClassOf Medical
//! individual p100 type PatientPopulation
//! ```
//!
//! A concept named only as a parent is declared implicitly. Severity rule
//! files hold lines of the form `rule Orthopedics {pain,swelling} -> Major @20`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::ParseError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OntologyError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("subClassOf cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("{line}:1: concept `{concept}` is not declared")]
    UndeclaredConcept { line: usize, concept: String },
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("{line}:1: priority {priority} is used twice for `{specialization}`")]
    DuplicatePriority { line: usize, specialization: String, priority: i64 },
}

/// SubClassOf DAG with its reflexive-transitive closure precomputed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TaxonomyGraph {
    concepts: BTreeSet<String>,
    edges: BTreeSet<(String, String)>,
    individuals: BTreeMap<String, String>,
    ancestors: BTreeMap<String, BTreeSet<String>>,
}

impl TaxonomyGraph {
    /// Builds a graph from concepts and (child, parent) edges. Edge endpoints
    /// are declared implicitly.
    pub fn from_edges<I, S>(concepts: I, edges: Vec<(String, String)>) -> Result<Self, OntologyError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut g = TaxonomyGraph::default();
        g.concepts.extend(concepts.into_iter().map(Into::into));
        for (c, p) in edges {
            g.concepts.insert(c.clone());
            g.concepts.insert(p.clone());
            g.edges.insert((c, p));
        }
        g.close()?;
        Ok(g)
    }

    fn parents<'a>(&'a self, c: &'a str) -> impl Iterator<Item = &'a String> + 'a {
        self.edges
            .range((c.to_string(), String::new())..)
            .take_while(move |(child, _)| child == c)
            .map(|(_, p)| p)
    }

    fn close(&mut self) -> Result<(), OntologyError> {
        if let Some(cycle) = self.find_cycle() {
            return Err(OntologyError::Cycle(cycle));
        }
        let mut ancestors: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for c in &self.concepts {
            let mut seen = BTreeSet::from([c.clone()]);
            let mut stack = vec![c.as_str()];
            while let Some(x) = stack.pop() {
                for p in self.parents(x) {
                    if seen.insert(p.clone()) {
                        stack.push(p);
                    }
                }
            }
            ancestors.insert(c.clone(), seen);
        }
        self.ancestors = ancestors;
        Ok(())
    }

    fn find_cycle(&self) -> Option<Vec<String>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Open,
            Done,
        }
        fn visit<'a>(
            g: &'a TaxonomyGraph,
            c: &'a str,
            marks: &mut BTreeMap<&'a str, Mark>,
            path: &mut Vec<&'a str>,
        ) -> Option<Vec<String>> {
            marks.insert(c, Mark::Open);
            path.push(c);
            for p in g.parents(c) {
                match marks.get(p.as_str()) {
                    Some(Mark::Open) => {
                        let start = path.iter().position(|x| x == p).unwrap();
                        return Some(path[start..].iter().map(|s| s.to_string()).collect());
                    }
                    Some(Mark::Done) => {}
                    None => {
                        if let Some(cy) = visit(g, p, marks, path) {
                            return Some(cy);
                        }
                    }
                }
            }
            path.pop();
            marks.insert(c, Mark::Done);
            None
        }
        let mut marks = BTreeMap::new();
        for c in &self.concepts {
            if !marks.contains_key(c.as_str()) {
                if let Some(cy) = visit(self, c, &mut marks, &mut Vec::new()) {
                    return Some(cy);
                }
            }
        }
        None
    }

    pub fn contains(&self, concept: &str) -> bool {
        self.concepts.contains(concept)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &str> {
        self.concepts.iter().map(String::as_str)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges.iter().map(|(c, p)| (c.as_str(), p.as_str()))
    }

    pub fn individuals(&self) -> impl Iterator<Item = (&str, &str)> {
        self.individuals.iter().map(|(i, c)| (i.as_str(), c.as_str()))
    }

    pub fn individual_type(&self, name: &str) -> Option<&str> {
        self.individuals.get(name).map(String::as_str)
    }

    pub fn assert_individual(&mut self, name: &str, concept: &str) -> Result<(), OntologyError> {
        self.require(concept)?;
        self.individuals.insert(name.to_string(), concept.to_string());
        Ok(())
    }

    fn require(&self, c: &str) -> Result<(), OntologyError> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(OntologyError::UnknownConcept(c.to_string()))
        }
    }

    /// Reflexive-transitive subClassOf.
    pub fn is_subsumed_by(&self, child: &str, ancestor: &str) -> Result<bool, OntologyError> {
        self.require(child)?;
        self.require(ancestor)?;
        Ok(self.ancestors[child].contains(ancestor))
    }

    pub fn match_degree(&self, advertised: &str, requested: &str) -> Result<MatchDegree, OntologyError> {
        Ok(if advertised == requested {
            self.require(advertised)?;
            MatchDegree::Exact
        } else if self.is_subsumed_by(advertised, requested)? {
            MatchDegree::Plugin
        } else if self.is_subsumed_by(requested, advertised)? {
            MatchDegree::Subsumes
        } else {
            MatchDegree::Fail
        })
    }
}

fn line_error(line: usize, column: usize, expected: &str, found: &str) -> ParseError {
    ParseError { line, column, expected: expected.to_string(), found: found.to_string() }
}

/// Whitespace-separated words of a line with 1-based columns, comment stripped.
fn words(line: &str) -> Vec<(usize, &str)> {
    let line = line.split('%').next().unwrap_or("");
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, &line[s..]));
    }
    out.into_iter().map(|(s, w)| (line[..s].chars().count() + 1, w)).collect()
}

fn concept_name(line: usize, word: Option<&(usize, &str)>, end_col: usize) -> Result<String, ParseError> {
    match word {
        Some((_, w)) if crate::term::is_identifier(w) => Ok(w.to_string()),
        Some((col, w)) => Err(line_error(line, *col, "a concept name", &format!("`{w}`"))),
        None => Err(line_error(line, end_col, "a concept name", "end of line")),
    }
}

pub fn load_taxonomy(source: &str) -> Result<TaxonomyGraph, OntologyError> {
    let mut g = TaxonomyGraph::default();
    let mut individuals: Vec<(usize, String, String)> = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let ws = words(raw);
        let end_col = raw.chars().count() + 1;
        let Some(&(col, kw)) = ws.first() else { continue };
        match kw {
            "root" => {
                let c = concept_name(line, ws.get(1), end_col)?;
                if let Some((col, w)) = ws.get(2) {
                    return Err(line_error(line, *col, "end of line", &format!("`{w}`")).into());
                }
                g.concepts.insert(c);
            }
            "concept" => {
                let c = concept_name(line, ws.get(1), end_col)?;
                g.concepts.insert(c.clone());
                match ws.get(2) {
                    None => {}
                    Some((_, "subClassOf")) => {
                        let p = concept_name(line, ws.get(3), end_col)?;
                        if let Some((col, w)) = ws.get(4) {
                            return Err(line_error(line, *col, "end of line", &format!("`{w}`")).into());
                        }
                        g.concepts.insert(p.clone());
                        g.edges.insert((c, p));
                    }
                    Some((col, w)) => {
                        return Err(line_error(line, *col, "`subClassOf`", &format!("`{w}`")).into())
                    }
                }
            }
            "individual" => {
                let name = match ws.get(1) {
                    Some((_, w)) => w.to_string(),
                    None => return Err(line_error(line, end_col, "an individual name", "end of line").into()),
                };
                match ws.get(2) {
                    Some((_, "type")) => {}
                    Some((col, w)) => return Err(line_error(line, *col, "`type`", &format!("`{w}`")).into()),
                    None => return Err(line_error(line, end_col, "`type`", "end of line").into()),
                }
                let c = concept_name(line, ws.get(3), end_col)?;
                individuals.push((line, name, c));
            }
            other => {
                return Err(line_error(line, col, "`root`, `concept` or `individual`", &format!("`{other}`")).into())
            }
        }
    }
    g.close()?;
    for (line, name, c) in individuals {
        if !g.contains(&c) {
            return Err(OntologyError::UndeclaredConcept { line, concept: c });
        }
        g.individuals.insert(name, c);
    }
    Ok(g)
}

/// Prints a graph in taxonomy-file syntax.
pub fn print_taxonomy(g: &TaxonomyGraph) -> String {
    let mut out = String::new();
    let children: BTreeSet<&str> = g.edges().map(|(c, _)| c).collect();
    for c in g.concepts() {
        if !children.contains(c) {
            out.push_str(&format!("root {c}\n"));
        }
    }
    for (c, p) in g.edges() {
        out.push_str(&format!("concept {c} subClassOf {p}\n"));
    }
    for (i, c) in g.individuals() {
        out.push_str(&format!("individual {i} type {c}\n"));
    }
    out
}

/// Semantic match quality, ordered `Exact > Plugin > Subsumes > Fail`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MatchDegree {
    Fail,
    Subsumes,
    Plugin,
    Exact,
}

impl fmt::Display for MatchDegree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchDegree::Exact => "Exact",
            MatchDegree::Plugin => "Plugin",
            MatchDegree::Subsumes => "Subsumes",
            MatchDegree::Fail => "Fail",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    Minor,
    Major,
    Emergency,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Minor => "Minor",
            Severity::Major => "Major",
            Severity::Emergency => "Emergency",
        })
    }
}

impl FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Minor" => Ok(Severity::Minor),
            "Major" => Ok(Severity::Major),
            "Emergency" => Ok(Severity::Emergency),
            other => Err(format!("unknown severity `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeverityRule {
    pub specialization: String,
    pub required_symptoms: BTreeSet<String>,
    pub severity: Severity,
    pub priority: i64,
}

/// Parses severity rule lines, sorted by priority descending. Concepts are
/// checked against `taxonomy` when one is given.
pub fn load_rules(source: &str, taxonomy: Option<&TaxonomyGraph>) -> Result<Vec<SeverityRule>, OntologyError> {
    let mut rules: Vec<(usize, SeverityRule)> = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let text = raw.split('%').next().unwrap_or("");
        let trimmed = text.trim();
        if trimmed.is_empty() {
            continue;
        }
        let col_of = |needle: &str| text.find(needle).map_or(1, |i| text[..i].chars().count() + 1);
        let rest = trimmed
            .strip_prefix("rule")
            .filter(|r| r.starts_with(char::is_whitespace))
            .ok_or_else(|| line_error(line, col_of(trimmed), "`rule`", &format!("`{trimmed}`")))?;
        let (spec, rest) = rest.trim_start().split_once('{').ok_or_else(|| {
            line_error(line, text.chars().count() + 1, "`{`", "end of line")
        })?;
        let spec = spec.trim();
        if !crate::term::is_identifier(spec) {
            return Err(line_error(line, col_of(spec), "a specialization concept", &format!("`{spec}`")).into());
        }
        let (syms, rest) = rest
            .split_once('}')
            .ok_or_else(|| line_error(line, text.chars().count() + 1, "`}`", "end of line"))?;
        let required_symptoms: BTreeSet<String> =
            syms.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
        let rest = rest.trim_start();
        let rest = rest
            .strip_prefix("->")
            .ok_or_else(|| line_error(line, col_of(rest), "`->`", &format!("`{rest}`")))?;
        let (sev, prio) = rest
            .split_once('@')
            .ok_or_else(|| line_error(line, text.chars().count() + 1, "`@<priority>`", "end of line"))?;
        let severity: Severity =
            sev.trim().parse().map_err(|_| line_error(line, col_of(sev.trim()), "a severity", sev.trim()))?;
        let priority: i64 = prio
            .trim()
            .parse()
            .map_err(|_| line_error(line, col_of(prio.trim()), "an integer priority", prio.trim()))?;
        if let Some(g) = taxonomy {
            if !g.contains(spec) {
                return Err(OntologyError::UndeclaredConcept { line, concept: spec.to_string() });
            }
        }
        if rules.iter().any(|(_, r)| r.specialization == spec && r.priority == priority) {
            return Err(OntologyError::DuplicatePriority {
                line,
                specialization: spec.to_string(),
                priority,
            });
        }
        rules.push((line, SeverityRule { specialization: spec.to_string(), required_symptoms, severity, priority }));
    }
    let mut rules: Vec<SeverityRule> = rules.into_iter().map(|(_, r)| r).collect();
    rules.sort_by(|a, b| b.priority.cmp(&a.priority).then_with(|| a.specialization.cmp(&b.specialization)));
    Ok(rules)
}

/// Severity of the highest-priority rule for `specialization` whose required
/// symptoms are all present; `Emergency` when none applies.
pub fn classify_severity(specialization: &str, symptoms: &BTreeSet<String>, rules: &[SeverityRule]) -> Severity {
    rules
        .iter()
        .filter(|r| r.specialization == specialization && r.required_symptoms.is_subset(symptoms))
        .max_by_key(|r| r.priority)
        .map_or(Severity::Emergency, |r| r.severity)
}
