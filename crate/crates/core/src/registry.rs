//! Semantic service descriptions and their compilation into action schemas.
//!
//! Registry files (`.reg`) hold one block per service. Field names follow the
//! profile/process/grounding vocabulary of semantic service descriptions:
//!
//! ```text
//! service findResource
//!     textDescription: returns name and position of the resource
//!     hasInput: PR : Profession
//!     hasInput: SP : Specialization
//!     hasOutput: P : Name
//!     hasOutput: CN : CoachNum
//!     pre: holds(availableRole(PR,SP))
//!     effect: add [availableAt(P,CN)] remove []
//!     grounding: find_resource
//! end
//! ```
//!
//! `pre` may repeat; `effect` appears at most once. The printer always emits
//! fields in the order above.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::dsl::{self, ParseError};
use crate::ontology::{MatchDegree, TaxonomyGraph};
use crate::schema::{ActionSchema, PossAtom, SchemaError};
use crate::term::Term;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{line}:1: unknown concept `{concept}`")]
    UnknownConcept { line: usize, concept: String },
    #[error("{line}:1: service `{name}` is defined twice")]
    DuplicateService { line: usize, name: String },
    #[error("{line}:1: parameter `{param}` is used twice in service `{service}`")]
    DuplicateParameter { line: usize, service: String, param: String },
    #[error("{line}:1: {source}")]
    Schema { line: usize, source: SchemaError },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ServiceDescription {
    pub name: String,
    pub text_description: String,
    /// `(parameter, concept)` in declaration order.
    pub inputs: Vec<(String, String)>,
    pub outputs: Vec<(String, String)>,
    pub extra_preconditions: Vec<PossAtom>,
    pub extra_adds: Vec<Term>,
    pub extra_removes: Vec<Term>,
    pub grounding: String,
}

impl ServiceDescription {
    /// Inputs become `knows_val(C(p))` preconditions and outputs
    /// `know(D(q))` effects; the extra conditions are appended as written.
    pub fn compile(&self) -> Result<ActionSchema, SchemaError> {
        let typed = |(p, c): &(String, String)| Term::compound(c.clone(), vec![Term::var(p.clone())]);
        let poss = self
            .inputs
            .iter()
            .map(|i| PossAtom::KnowsVal(typed(i)))
            .chain(self.extra_preconditions.iter().cloned())
            .collect();
        let adds = self
            .outputs
            .iter()
            .map(|o| Term::know(typed(o)))
            .chain(self.extra_adds.iter().cloned())
            .collect();
        ActionSchema::new(
            self.name.clone(),
            self.inputs.iter().map(|(p, _)| p.clone()).collect(),
            poss,
            adds,
            self.extra_removes.clone(),
        )
    }

    /// Concepts this service makes known: its declared outputs plus every
    /// `know(C)` / `know(C(..))` among the extra effects.
    pub fn provided_concepts(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.outputs.iter().map(|(_, c)| c.as_str()).collect();
        for a in &self.extra_adds {
            if let Some((f, _)) = a.known_inner().and_then(Term::functor) {
                if !out.contains(&f) {
                    out.push(f);
                }
            }
        }
        out
    }

    pub fn input_concept(&self, param: &str) -> Option<&str> {
        self.inputs.iter().find(|(p, _)| p == param).map(|(_, c)| c.as_str())
    }

    pub fn output_concept(&self, param: &str) -> Option<&str> {
        self.outputs.iter().find(|(p, _)| p == param).map(|(_, c)| c.as_str())
    }
}

/// Services by name, each with its compiled schema.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Registry {
    services: BTreeMap<String, (ServiceDescription, ActionSchema)>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a service after checking its concepts against `g`.
    pub fn insert(&mut self, svc: ServiceDescription, g: &TaxonomyGraph) -> Result<(), RegistryError> {
        validate(&svc, g, 0)?;
        if self.services.contains_key(&svc.name) {
            return Err(RegistryError::DuplicateService { line: 0, name: svc.name });
        }
        let schema = svc.compile().map_err(|source| RegistryError::Schema { line: 0, source })?;
        self.services.insert(svc.name.clone(), (svc, schema));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ServiceDescription> {
        self.services.get(name).map(|(s, _)| s)
    }

    pub fn schema(&self, name: &str) -> Option<&ActionSchema> {
        self.services.get(name).map(|(_, a)| a)
    }

    pub fn services(&self) -> impl Iterator<Item = &ServiceDescription> {
        self.services.values().map(|(s, _)| s)
    }

    /// Compiled schemas in service-name order.
    pub fn actions(&self) -> Vec<ActionSchema> {
        self.services.values().map(|(_, a)| a.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.services.len()
    }

    pub fn is_empty(&self) -> bool {
        self.services.is_empty()
    }

    pub fn remove(&mut self, name: &str) -> Option<ServiceDescription> {
        self.services.remove(name).map(|(s, _)| s)
    }
}

fn validate(svc: &ServiceDescription, g: &TaxonomyGraph, line: usize) -> Result<(), RegistryError> {
    let mut seen: Vec<&str> = Vec::new();
    for (p, c) in svc.inputs.iter().chain(&svc.outputs) {
        if seen.contains(&p.as_str()) {
            return Err(RegistryError::DuplicateParameter {
                line,
                service: svc.name.clone(),
                param: p.clone(),
            });
        }
        seen.push(p);
        if !g.contains(c) {
            return Err(RegistryError::UnknownConcept { line, concept: c.clone() });
        }
    }
    Ok(())
}

fn err(line: usize, column: usize, expected: &str, found: &str) -> ParseError {
    ParseError { line, column, expected: expected.to_string(), found: found.to_string() }
}

/// Re-bases a parse error from a field value onto the registry source.
fn shift(mut e: ParseError, line: usize, offset: usize) -> ParseError {
    e.line = line;
    e.column += offset;
    e
}

fn typed_param(text: &str, line: usize, col: usize) -> Result<(String, String), ParseError> {
    let Some((p, c)) = text.split_once(':') else {
        return Err(err(line, col, "`<param> : <Concept>`", &format!("`{text}`")));
    };
    let (p, c) = (p.trim(), c.trim());
    if !crate::term::is_identifier(p) || !p.starts_with(|ch: char| ch.is_ascii_uppercase() || ch == '_') {
        return Err(err(line, col, "a parameter variable", &format!("`{p}`")));
    }
    if !crate::term::is_identifier(c) {
        return Err(err(line, col, "a concept name", &format!("`{c}`")));
    }
    Ok((p.to_string(), c.to_string()))
}

pub fn load_registry(source: &str, g: &TaxonomyGraph) -> Result<Registry, RegistryError> {
    let mut reg = Registry::new();
    let mut current: Option<(usize, ServiceDescription, bool)> = None;
    let lines: Vec<&str> = source.lines().collect();
    for (idx, raw) in lines.iter().enumerate() {
        let line = idx + 1;
        let text = raw.split('%').next().unwrap_or("");
        let trimmed = text.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = text.len() - text.trim_start().len();
        let col = text[..indent].chars().count() + 1;
        match current.as_mut() {
            None => {
                let name = trimmed
                    .strip_prefix("service")
                    .filter(|r| r.starts_with(char::is_whitespace))
                    .map(str::trim)
                    .ok_or_else(|| err(line, col, "`service <name>`", &format!("`{trimmed}`")))?;
                if !crate::term::is_identifier(name) {
                    return Err(err(line, col + 8, "a service name", &format!("`{name}`")).into());
                }
                let svc = ServiceDescription { name: name.to_string(), ..Default::default() };
                current = Some((line, svc, false));
            }
            Some((_, svc, has_effect)) => {
                if trimmed == "end" {
                    let (start, svc, _) = current.take().unwrap();
                    validate(&svc, g, start)?;
                    if reg.services.contains_key(&svc.name) {
                        return Err(RegistryError::DuplicateService { line: start, name: svc.name });
                    }
                    let schema = svc.compile().map_err(|source| RegistryError::Schema { line: start, source })?;
                    reg.services.insert(svc.name.clone(), (svc, schema));
                    continue;
                }
                let Some((key, value)) = trimmed.split_once(':') else {
                    return Err(err(line, col, "`<field>: <value>` or `end`", &format!("`{trimmed}`")).into());
                };
                let value_offset = {
                    let after = &text[indent + key.len() + 1..];
                    let lead = after.len() - after.trim_start().len();
                    text[..indent + key.len() + 1 + lead].chars().count()
                };
                let value = value.trim();
                match key.trim() {
                    "textDescription" => svc.text_description = value.to_string(),
                    "hasInput" => svc.inputs.push(typed_param(value, line, value_offset + 1)?),
                    "hasOutput" => svc.outputs.push(typed_param(value, line, value_offset + 1)?),
                    "pre" => svc
                        .extra_preconditions
                        .push(dsl::parse_poss_atom(value).map_err(|e| shift(e, line, value_offset))?),
                    "effect" => {
                        if *has_effect {
                            return Err(err(line, col, "a single `effect` field", "a second one").into());
                        }
                        *has_effect = true;
                        let rest = value
                            .strip_prefix("add")
                            .ok_or_else(|| err(line, value_offset + 1, "`add [..] remove [..]`", value))?;
                        let Some(split) = rest.find("remove") else {
                            return Err(err(line, value_offset + 1, "`remove [..]`", "end of line").into());
                        };
                        let adds_src = &rest[..split];
                        let removes_src = &rest[split + "remove".len()..];
                        let adds_off = value_offset + 3 + (adds_src.len() - adds_src.trim_start().len());
                        let rem_off = value_offset
                            + 3
                            + split
                            + "remove".len()
                            + (removes_src.len() - removes_src.trim_start().len());
                        svc.extra_adds =
                            dsl::parse_fluent_list(adds_src.trim()).map_err(|e| shift(e, line, adds_off))?;
                        svc.extra_removes =
                            dsl::parse_fluent_list(removes_src.trim()).map_err(|e| shift(e, line, rem_off))?;
                    }
                    "grounding" => svc.grounding = value.to_string(),
                    other => {
                        return Err(err(
                            line,
                            col,
                            "textDescription, hasInput, hasOutput, pre, effect or grounding",
                            &format!("`{other}`"),
                        )
                        .into())
                    }
                }
            }
        }
    }
    if let Some((start, _, _)) = current {
        let last = lines.len().max(1);
        let col = lines.last().map_or(1, |l| l.chars().count() + 1);
        return Err(err(last, col, "`end`", &format!("end of input (service opened on line {start})")).into());
    }
    Ok(reg)
}

pub fn print_service(svc: &ServiceDescription) -> String {
    let mut out = String::new();
    writeln!(out, "service {}", svc.name).unwrap();
    writeln!(out, "    textDescription: {}", svc.text_description).unwrap();
    for (p, c) in &svc.inputs {
        writeln!(out, "    hasInput: {p} : {c}").unwrap();
    }
    for (p, c) in &svc.outputs {
        writeln!(out, "    hasOutput: {p} : {c}").unwrap();
    }
    for a in &svc.extra_preconditions {
        writeln!(out, "    pre: {a}").unwrap();
    }
    if !svc.extra_adds.is_empty() || !svc.extra_removes.is_empty() {
        let list = |ts: &[Term]| ts.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ");
        writeln!(out, "    effect: add [{}] remove [{}]", list(&svc.extra_adds), list(&svc.extra_removes)).unwrap();
    }
    writeln!(out, "    grounding: {}", svc.grounding).unwrap();
    out.push_str("end\n");
    out
}

pub fn print_registry(reg: &Registry) -> String {
    reg.services().map(print_service).collect::<Vec<_>>().join("\n")
}

/// Services able to make every requested concept known, best first.
///
/// A service's degree for one requested concept is the best degree of any
/// concept it provides; its overall degree is the worst of those. Services
/// below `Subsumes` are dropped. Ties are broken by service name.
pub fn find_candidates<'r>(
    reg: &'r Registry,
    requested: &[String],
    g: &TaxonomyGraph,
) -> Vec<(&'r ServiceDescription, MatchDegree)> {
    let mut out: Vec<(&ServiceDescription, MatchDegree)> = reg
        .services()
        .map(|svc| {
            let provided = svc.provided_concepts();
            let degree = requested
                .iter()
                .map(|r| {
                    provided
                        .iter()
                        .map(|p| g.match_degree(p, r).unwrap_or(MatchDegree::Fail))
                        .max()
                        .unwrap_or(MatchDegree::Fail)
                })
                .min()
                .unwrap_or(MatchDegree::Exact);
            (svc, degree)
        })
        .filter(|(_, d)| *d >= MatchDegree::Subsumes)
        .collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.name.cmp(&b.0.name)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::load_taxonomy;

    const TAX: &str = "\
root Parameter
concept Profession subClassOf Parameter
concept Specialization subClassOf Parameter
concept Name subClassOf Parameter
concept CoachNum subClassOf Coach
concept Coach subClassOf Parameter
concept Message subClassOf Parameter
concept ConfirmSend subClassOf Parameter
";

    const REG: &str = "\
service findResource
    textDescription: returns name and position of the resource for the required profession and specialization
    hasInput: PR : Profession
    hasInput: SP : Specialization
    hasOutput: P : Name
    hasOutput: CN : CoachNum
    pre: holds(availableRole(PR,SP))
    effect: add [availableAt(P,CN)] remove []
    grounding: find_resource
end

service notifyResource
    textDescription: sends a message to the identified resource
    hasInput: P : Name
    hasInput: CN : CoachNum
    hasInput: MSG : Message
    pre: holds(availableAt(P,CN))
    effect: add [SendMsg(P,CN,MSG), know(ConfirmSend)] remove []
    grounding: notify_resource
end
";

    fn fixture() -> (TaxonomyGraph, Registry) {
        let g = load_taxonomy(TAX).unwrap();
        let r = load_registry(REG, &g).unwrap();
        (g, r)
    }

    #[test]
    fn loads_and_round_trips() {
        let (g, r) = fixture();
        assert_eq!(r.len(), 2);
        let printed = print_registry(&r);
        assert_eq!(printed, REG);
        assert_eq!(load_registry(&printed, &g).unwrap(), r);
    }

    #[test]
    fn empty_and_duplicate() {
        let g = load_taxonomy(TAX).unwrap();
        assert!(load_registry("", &g).unwrap().is_empty());
        let one = "service findResource\n    grounding: x\nend\n";
        let e = load_registry(&format!("{one}{one}"), &g).unwrap_err();
        assert_eq!(e, RegistryError::DuplicateService { line: 4, name: "findResource".into() });
    }

    #[test]
    fn unknown_concept() {
        let g = load_taxonomy(TAX).unwrap();
        let e = load_registry("service s\n    hasInput: X : Bogus\nend\n", &g).unwrap_err();
        assert_eq!(e, RegistryError::UnknownConcept { line: 1, concept: "Bogus".into() });
    }

    #[test]
    fn effect_parse_error_points_into_source() {
        let g = load_taxonomy(TAX).unwrap();
        let src = "service s\n    effect: add [p(] remove []\nend\n";
        match load_registry(src, &g).unwrap_err() {
            RegistryError::Parse(p) => {
                assert_eq!(p.line, 2);
                assert_eq!(&src.lines().nth(1).unwrap()[p.column - 1..p.column], "]");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn no_io_service_compiles_to_empty_schema() {
        let svc = ServiceDescription { name: "noop".into(), ..Default::default() };
        let a = svc.compile().unwrap();
        assert!(a.poss().is_empty() && a.adds().is_empty() && a.removes().is_empty());
    }

    #[test]
    fn candidates() {
        let (g, r) = fixture();
        let req = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let names = |v: Vec<(&ServiceDescription, MatchDegree)>| {
            v.into_iter().map(|(s, d)| (s.name.clone(), d)).collect::<Vec<_>>()
        };
        assert_eq!(
            names(find_candidates(&r, &req(&["Name", "CoachNum"]), &g)),
            vec![("findResource".into(), MatchDegree::Exact)]
        );
        assert_eq!(
            names(find_candidates(&r, &req(&["Name", "Coach"]), &g)),
            vec![("findResource".into(), MatchDegree::Plugin)]
        );
        assert_eq!(
            names(find_candidates(&r, &req(&["ConfirmSend"]), &g)),
            vec![("notifyResource".into(), MatchDegree::Exact)]
        );
        assert_eq!(
            names(find_candidates(&r, &[], &g)),
            vec![("findResource".into(), MatchDegree::Exact), ("notifyResource".into(), MatchDegree::Exact)]
        );
    }
}
