//! Action schemas: parameters, precondition atoms and add/remove updates.

use std::fmt;

use thiserror::Error;

use crate::term::Term;

/// One conjunct of an action precondition.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PossAtom {
    /// `holds(f)`: `f` unifies with a world fluent.
    Holds(Term),
    /// `knows_val(f)`: `know(f)` unifies with a knowledge fluent.
    KnowsVal(Term),
}

impl PossAtom {
    pub fn fluent(&self) -> &Term {
        match self {
            PossAtom::Holds(t) | PossAtom::KnowsVal(t) => t,
        }
    }
}

impl fmt::Display for PossAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PossAtom::Holds(t) => write!(f, "holds({t})"),
            PossAtom::KnowsVal(t) => write!(f, "knows_val({t})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("action `{action}`: parameter `{var}` is listed twice")]
    DuplicateParameter { action: String, var: String },
    #[error("action `{action}`: parameter `{var}` is not bound by any precondition")]
    UnboundParameter { action: String, var: String },
    #[error("action `{action}`: removed fluent uses unbound variable `{var}`")]
    UnboundRemove { action: String, var: String },
}

/// Precondition plus state-update axiom of one action.
///
/// Variables of `adds` that are bound neither by the parameters nor by the
/// precondition are outputs: the planner binds them to fresh placeholders.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ActionSchema {
    name: String,
    params: Vec<String>,
    poss: Vec<PossAtom>,
    adds: Vec<Term>,
    removes: Vec<Term>,
    outputs: Vec<String>,
}

impl ActionSchema {
    pub fn new(
        name: impl Into<String>,
        params: Vec<String>,
        poss: Vec<PossAtom>,
        adds: Vec<Term>,
        removes: Vec<Term>,
    ) -> Result<Self, SchemaError> {
        let name = name.into();
        for (i, p) in params.iter().enumerate() {
            if params[..i].contains(p) {
                return Err(SchemaError::DuplicateParameter { action: name, var: p.clone() });
            }
        }
        let mut bound: Vec<String> = Vec::new();
        for atom in &poss {
            for v in atom.fluent().variables() {
                if !bound.contains(&v) {
                    bound.push(v);
                }
            }
        }
        if let Some(p) = params.iter().find(|p| !bound.contains(p)) {
            return Err(SchemaError::UnboundParameter { action: name, var: p.clone() });
        }
        for r in &removes {
            if let Some(v) = r.variables().into_iter().find(|v| !bound.contains(v)) {
                return Err(SchemaError::UnboundRemove { action: name, var: v });
            }
        }
        let mut outputs = Vec::new();
        for a in &adds {
            for v in a.variables() {
                if !bound.contains(&v) && !outputs.contains(&v) {
                    outputs.push(v);
                }
            }
        }
        Ok(ActionSchema { name, params, poss, adds, removes, outputs })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn poss(&self) -> &[PossAtom] {
        &self.poss
    }

    pub fn adds(&self) -> &[Term] {
        &self.adds
    }

    pub fn removes(&self) -> &[Term] {
        &self.removes
    }

    /// Variables first introduced by the update, in first-occurrence order.
    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    /// Every fluent mentioned by the schema, with `know(·)` unwrapped.
    pub fn fluents(&self) -> impl Iterator<Item = &Term> {
        self.poss
            .iter()
            .map(PossAtom::fluent)
            .chain(self.adds.iter().map(|t| t.known_inner().unwrap_or(t)))
            .chain(self.removes.iter().map(|t| t.known_inner().unwrap_or(t)))
    }

    /// Functor of the fluent that directly carries output `var` in the adds,
    /// e.g. `Name` for `P` in `know(Name(P))`.
    pub fn output_carrier(&self, var: &str) -> Option<&str> {
        fn find<'a>(t: &'a Term, var: &str) -> Option<&'a str> {
            match t {
                Term::Compound(f, args) => {
                    if args.iter().any(|a| matches!(a, Term::Var(v) if v == var)) && f != crate::term::KNOW {
                        return Some(f);
                    }
                    args.iter().find_map(|a| find(a, var))
                }
                _ => None,
            }
        }
        self.adds.iter().find_map(|t| find(t, var))
    }
}
