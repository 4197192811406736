//! First-order terms, substitutions and the fluent-calculus state.
//!
//! A [`State`] is a complete set of ground fluents split into the world part
//! and the knowledge part (every knowledge fluent has the outer functor
//! `know`). Queries return lazy iterators of [`Substitution`]s in canonical
//! (sorted text) fluent order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

/// Functor of the knowledge wrapper fluent.
pub const KNOW: &str = "know";

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Const(String),
    Var(String),
    /// Knowledge-level stand-in for a value produced by an action at execution
    /// time. Counts as ground.
    Placeholder(String),
    Compound(String, Vec<Term>),
}

impl Term {
    pub fn constant(name: impl Into<String>) -> Self {
        Term::Const(name.into())
    }

    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn placeholder(id: impl Into<String>) -> Self {
        Term::Placeholder(id.into())
    }

    /// A compound; with no arguments this is the constant `functor`.
    pub fn compound(functor: impl Into<String>, args: Vec<Term>) -> Self {
        if args.is_empty() {
            Term::Const(functor.into())
        } else {
            Term::Compound(functor.into(), args)
        }
    }

    /// `know(inner)`.
    pub fn know(inner: Term) -> Self {
        Term::Compound(KNOW.to_string(), vec![inner])
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Const(_) | Term::Placeholder(_) => true,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
        }
    }

    /// Name and arity when this term can stand as a fluent.
    pub fn functor(&self) -> Option<(&str, usize)> {
        match self {
            Term::Const(name) => Some((name, 0)),
            Term::Compound(f, args) => Some((f, args.len())),
            _ => None,
        }
    }

    /// The wrapped fluent if this is `know(x)`.
    pub fn known_inner(&self) -> Option<&Term> {
        match self {
            Term::Compound(f, args) if f == KNOW && args.len() == 1 => Some(&args[0]),
            _ => None,
        }
    }

    pub fn is_knowledge(&self) -> bool {
        self.known_inner().is_some()
    }

    /// Variables in left-to-right first-occurrence order.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::Compound(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            _ => {}
        }
    }

    pub fn placeholders(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_placeholders(&mut out);
        out
    }

    fn collect_placeholders(&self, out: &mut Vec<String>) {
        match self {
            Term::Placeholder(p) => {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
            Term::Compound(_, args) => args.iter().for_each(|a| a.collect_placeholders(out)),
            _ => {}
        }
    }

    pub fn contains_var(&self, name: &str) -> bool {
        match self {
            Term::Var(v) => v == name,
            Term::Compound(_, args) => args.iter().any(|a| a.contains_var(name)),
            _ => false,
        }
    }

    /// Replaces placeholders according to `map`; unmapped ones are kept.
    pub fn resolve_placeholders(&self, map: &BTreeMap<String, Term>) -> Term {
        match self {
            Term::Placeholder(p) => map.get(p).cloned().unwrap_or_else(|| self.clone()),
            Term::Compound(f, args) => Term::Compound(
                f.clone(),
                args.iter().map(|a| a.resolve_placeholders(map)).collect(),
            ),
            _ => self.clone(),
        }
    }

    fn write(&self, out: &mut String, fluent_pos: bool, rename: Option<&dyn Fn(&str) -> String>) {
        match self {
            Term::Const(name) => {
                if (fluent_pos && is_identifier(name)) || is_bare_constant(name) {
                    out.push_str(name);
                } else {
                    out.push('\'');
                    for c in name.chars() {
                        if c == '\'' || c == '\\' {
                            out.push('\\');
                        }
                        out.push(c);
                    }
                    out.push('\'');
                }
            }
            Term::Var(v) => out.push_str(v),
            Term::Placeholder(p) => {
                out.push('#');
                match rename {
                    Some(f) => out.push_str(&f(p)),
                    None => out.push_str(p),
                }
            }
            Term::Compound(f, args) => {
                out.push_str(f);
                out.push('(');
                let inner_fluent = f == KNOW && args.len() == 1;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    a.write(out, inner_fluent, rename);
                }
                out.push(')');
            }
        }
    }

    /// Text form with placeholders renamed through `rename`.
    pub fn render_with(&self, rename: &dyn Fn(&str) -> String) -> String {
        let mut s = String::new();
        self.write(&mut s, true, Some(rename));
        s
    }

    /// Text form in argument position: constants that would read back as
    /// variables are quoted.
    pub fn render_arg(&self, rename: Option<&dyn Fn(&str) -> String>) -> String {
        let mut s = String::new();
        self.write(&mut s, false, rename);
        s
    }
}

/// `[A-Za-z_][A-Za-z0-9_]*`
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A constant that re-reads as a constant without quotes in argument position.
pub fn is_bare_constant(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() || c.is_ascii_digit() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Renders in the domain-language syntax. A top-level constant is in fluent
/// position and printed bare when it is an identifier.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.write(&mut s, true, None);
        f.write_str(&s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum UnifyFailure {
    #[error("functor or arity clash")]
    Clash,
    #[error("occurs check")]
    Occurs,
}

/// Idempotent variable bindings.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Substitution {
    bindings: BTreeMap<String, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.bindings.get(var)
    }

    pub fn contains(&self, var: &str) -> bool {
        self.bindings.contains_key(var)
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Term)> {
        self.bindings.iter()
    }

    pub fn apply(&self, t: &Term) -> Term {
        match t {
            Term::Var(v) => self.bindings.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::Compound(f, args) => {
                Term::Compound(f.clone(), args.iter().map(|a| self.apply(a)).collect())
            }
            _ => t.clone(),
        }
    }

    /// Adds `var ↦ term`, keeping the substitution idempotent.
    pub fn bind(&mut self, var: &str, term: Term) -> Result<(), UnifyFailure> {
        let term = self.apply(&term);
        if term == Term::Var(var.to_string()) {
            return Ok(());
        }
        if term.contains_var(var) {
            return Err(UnifyFailure::Occurs);
        }
        if let Some(existing) = self.bindings.get(var).cloned() {
            return unify(&existing, &term, self).map(|s| *self = s);
        }
        let single = Substitution {
            bindings: BTreeMap::from([(var.to_string(), term.clone())]),
        };
        for value in self.bindings.values_mut() {
            *value = single.apply(value);
        }
        self.bindings.insert(var.to_string(), term);
        Ok(())
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}↦{v}")?;
        }
        f.write_str("}")
    }
}

impl<K: Into<String>> FromIterator<(K, Term)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (K, Term)>>(iter: I) -> Self {
        let mut s = Substitution::new();
        for (k, t) in iter {
            s.bind(&k.into(), t).expect("conflicting bindings");
        }
        s
    }
}

/// Most general unifier of `t1` and `t2` extending `subst`.
pub fn unify(t1: &Term, t2: &Term, subst: &Substitution) -> Result<Substitution, UnifyFailure> {
    let mut s = subst.clone();
    let mut stack = vec![(t1.clone(), t2.clone())];
    while let Some((a, b)) = stack.pop() {
        let a = s.apply(&a);
        let b = s.apply(&b);
        match (a, b) {
            (Term::Var(x), Term::Var(y)) if x == y => {}
            (Term::Var(x), t) | (t, Term::Var(x)) => {
                if t.contains_var(&x) {
                    return Err(UnifyFailure::Occurs);
                }
                s.bind(&x, t)?;
            }
            (Term::Compound(f, xs), Term::Compound(g, ys)) => {
                if f != g || xs.len() != ys.len() {
                    return Err(UnifyFailure::Clash);
                }
                stack.extend(xs.into_iter().zip(ys).rev());
            }
            (a, b) => {
                if a != b {
                    return Err(UnifyFailure::Clash);
                }
            }
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("fluent `{0}` is not ground")]
    NotGround(String),
    #[error("`{0}` cannot stand as a fluent")]
    NotAFluent(String),
}

/// World and knowledge fluents, each kept in canonical text order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct State {
    world: BTreeMap<String, Term>,
    knowledge: BTreeMap<String, Term>,
}

impl State {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_fluents<I: IntoIterator<Item = Term>>(fluents: I) -> Result<Self, StateError> {
        let mut s = State::new();
        for f in fluents {
            s.insert(f)?;
        }
        Ok(s)
    }

    /// Inserts a ground fluent; `know(·)` goes to the knowledge part.
    /// Returns whether the fluent was new.
    pub fn insert(&mut self, fluent: Term) -> Result<bool, StateError> {
        if !fluent.is_ground() {
            return Err(StateError::NotGround(fluent.to_string()));
        }
        if fluent.functor().is_none() {
            return Err(StateError::NotAFluent(fluent.to_string()));
        }
        let key = fluent.to_string();
        let part = if fluent.is_knowledge() { &mut self.knowledge } else { &mut self.world };
        Ok(part.insert(key, fluent).is_none())
    }

    pub fn remove(&mut self, fluent: &Term) -> bool {
        let key = fluent.to_string();
        let part = if fluent.is_knowledge() { &mut self.knowledge } else { &mut self.world };
        part.remove(&key).is_some()
    }

    pub fn contains(&self, fluent: &Term) -> bool {
        let key = fluent.to_string();
        let part = if fluent.is_knowledge() { &self.knowledge } else { &self.world };
        part.contains_key(&key)
    }

    pub fn world(&self) -> impl Iterator<Item = &Term> {
        self.world.values()
    }

    pub fn knowledge(&self) -> impl Iterator<Item = &Term> {
        self.knowledge.values()
    }

    /// All fluents in canonical order.
    pub fn fluents(&self) -> Vec<&Term> {
        let mut all: Vec<(&String, &Term)> = self.world.iter().chain(self.knowledge.iter()).collect();
        all.sort_by(|a, b| a.0.cmp(b.0));
        all.into_iter().map(|(_, t)| t).collect()
    }

    pub fn len(&self) -> usize {
        self.world.len() + self.knowledge.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every substitution under which `pattern` unifies with a world fluent.
    pub fn holds<'a>(&'a self, pattern: &'a Term) -> impl Iterator<Item = Substitution> + 'a {
        self.holds_from(pattern, Substitution::new())
    }

    pub fn holds_from<'a>(
        &'a self,
        pattern: &'a Term,
        base: Substitution,
    ) -> impl Iterator<Item = Substitution> + 'a {
        self.world.values().filter_map(move |f| unify(pattern, f, &base).ok())
    }

    /// Every substitution under which `know(pattern)` unifies with a
    /// knowledge fluent. Placeholder values count as known.
    pub fn knows_val<'a>(&'a self, pattern: &'a Term) -> impl Iterator<Item = Substitution> + 'a {
        self.knows_val_from(pattern, Substitution::new())
    }

    pub fn knows_val_from<'a>(
        &'a self,
        pattern: &'a Term,
        base: Substitution,
    ) -> impl Iterator<Item = Substitution> + 'a {
        self.knowledge
            .values()
            .filter_map(move |f| f.known_inner().and_then(|inner| unify(pattern, inner, &base).ok()))
    }

    /// Matches a goal pattern against the part of the state it addresses:
    /// `know(x)` patterns are knowledge queries, anything else a world query.
    pub fn satisfies_from<'a>(
        &'a self,
        pattern: &'a Term,
        base: Substitution,
    ) -> Box<dyn Iterator<Item = Substitution> + 'a> {
        match pattern.known_inner() {
            Some(inner) => Box::new(self.knows_val_from(inner, base)),
            None => Box::new(self.holds_from(pattern, base)),
        }
    }

    /// True iff the conjunction of `goals` has a common solution.
    pub fn satisfies_all(&self, goals: &[Term]) -> bool {
        fn go(state: &State, goals: &[Term], s: Substitution) -> bool {
            match goals.split_first() {
                None => true,
                Some((g, rest)) => state.satisfies_from(g, s).any(|s2| go(state, rest, s2)),
            }
        }
        go(self, goals, Substitution::new())
    }

    /// Canonical text key: all fluents sorted and joined with `|`.
    pub fn canonicalize(&self) -> String {
        let mut keys: Vec<&str> =
            self.world.keys().chain(self.knowledge.keys()).map(String::as_str).collect();
        keys.sort_unstable();
        keys.join("|")
    }

    /// Key identifying the state up to a renaming of placeholders.
    ///
    /// Placeholders are numbered by first appearance after sorting fluents
    /// with placeholders masked. Two states with equal keys are renamings of
    /// each other; the converse does not always hold.
    pub fn shape_key(&self) -> String {
        let all = self.fluents();
        if all.iter().all(|t| t.placeholders().is_empty()) {
            return self.canonicalize();
        }
        let mask = |_: &str| String::new();
        let mut entries: Vec<(String, String, &Term)> =
            all.iter().map(|t| (t.render_with(&mask), t.to_string(), *t)).collect();
        entries.sort();
        let mut index: HashMap<String, usize> = HashMap::new();
        for (_, _, t) in &entries {
            for p in t.placeholders() {
                let next = index.len();
                index.entry(p).or_insert(next);
            }
        }
        let rename = |p: &str| index[p].to_string();
        let mut keys: Vec<String> = entries.iter().map(|(_, _, t)| t.render_with(&rename)).collect();
        keys.sort();
        keys.join("|")
    }

    /// Placeholder ids occurring anywhere in the state.
    pub fn placeholder_ids(&self) -> BTreeSet<String> {
        self.world
            .values()
            .chain(self.knowledge.values())
            .flat_map(|t| t.placeholders())
            .collect()
    }

    /// Copy with placeholders substituted by concrete values.
    pub fn resolve_placeholders(&self, map: &BTreeMap<String, Term>) -> State {
        let mut out = State::new();
        for t in self.world.values().chain(self.knowledge.values()) {
            out.insert(t.resolve_placeholders(map)).expect("resolution keeps fluents ground");
        }
        out
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, t) in self.fluents().iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(n: &str) -> Term {
        Term::constant(n)
    }
    fn v(n: &str) -> Term {
        Term::var(n)
    }
    fn f(n: &str, args: Vec<Term>) -> Term {
        Term::compound(n, args)
    }

    #[test]
    fn unify_single_binding() {
        let s = unify(&f("Profession", vec![v("PR")]), &f("Profession", vec![c("doctor")]), &Substitution::new())
            .unwrap();
        assert_eq!(s, Substitution::from_iter([("PR", c("doctor"))]));
    }

    #[test]
    fn unify_available_pattern() {
        let s = unify(
            &f("available", vec![v("PR"), v("SP")]),
            &f("available", vec![c("doctor"), c("orthopedics")]),
            &Substitution::new(),
        )
        .unwrap();
        assert_eq!(s.get("PR"), Some(&c("doctor")));
        assert_eq!(s.get("SP"), Some(&c("orthopedics")));
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn occurs_check_fails() {
        assert_eq!(
            unify(&v("X"), &f("f", vec![v("X")]), &Substitution::new()),
            Err(UnifyFailure::Occurs)
        );
    }

    #[test]
    fn clash_on_arity_and_functor() {
        let e = Substitution::new();
        assert_eq!(unify(&f("p", vec![c("a")]), &f("p", vec![c("a"), c("b")]), &e), Err(UnifyFailure::Clash));
        assert_eq!(unify(&f("p", vec![c("a")]), &f("q", vec![c("a")]), &e), Err(UnifyFailure::Clash));
        assert_eq!(unify(&c("a"), &Term::placeholder("a"), &e), Err(UnifyFailure::Clash));
    }

    #[test]
    fn chained_bindings_stay_idempotent() {
        let s = unify(
            &f("p", vec![v("X"), v("Y"), v("Y")]),
            &f("p", vec![v("Y"), v("Z"), c("a")]),
            &Substitution::new(),
        )
        .unwrap();
        let once = s.apply(&f("p", vec![v("X"), v("Y"), v("Z")]));
        assert_eq!(once, f("p", vec![c("a"), c("a"), c("a")]));
        assert_eq!(s.apply(&once), once);
    }

    #[test]
    fn holds_examples() {
        let pat = f("available", vec![v("PR"), v("SP")]);
        let st = State::from_fluents([f("available", vec![c("doctor"), c("orthopedics")])]).unwrap();
        let got: Vec<_> = st.holds(&pat).collect();
        assert_eq!(got, vec![Substitution::from_iter([("PR", c("doctor")), ("SP", c("orthopedics"))])]);
        assert_eq!(State::new().holds(&pat).count(), 0);

        let st = State::from_fluents([
            f("available", vec![c("doctor"), c("orthopedics")]),
            f("available", vec![c("nurse"), c("general")]),
        ])
        .unwrap();
        let pat = f("available", vec![c("doctor"), v("SP")]);
        let got: Vec<_> = st.holds(&pat).collect();
        assert_eq!(got, vec![Substitution::from_iter([("SP", c("orthopedics"))])]);
    }

    #[test]
    fn knows_val_examples() {
        let st = State::from_fluents([Term::know(f("Profession", vec![c("doctor")]))]).unwrap();
        let pat = f("Profession", vec![v("PR")]);
        assert_eq!(
            st.knows_val(&pat).collect::<Vec<_>>(),
            vec![Substitution::from_iter([("PR", c("doctor"))])]
        );

        let ph = Term::placeholder("out_findResource_NAME_1");
        let st = State::from_fluents([Term::know(f("Name", vec![ph.clone()]))]).unwrap();
        let pat = f("Name", vec![v("P")]);
        assert_eq!(st.knows_val(&pat).collect::<Vec<_>>(), vec![Substitution::from_iter([("P", ph)])]);

        assert_eq!(State::new().knows_val(&c("ConfirmSend")).count(), 0);
    }

    #[test]
    fn holds_ignores_knowledge_and_vice_versa() {
        let st = State::from_fluents([Term::know(c("a")), c("b")]).unwrap();
        assert_eq!(st.holds(&c("a")).count(), 0);
        assert_eq!(st.knows_val(&c("b")).count(), 0);
        assert!(st.satisfies_all(&[Term::know(c("a")), c("b")]));
    }

    #[test]
    fn canonicalize_examples() {
        let st = State::from_fluents([c("b"), c("a")]).unwrap();
        assert_eq!(st.canonicalize(), "a|b");
        let st = State::from_fluents([c("a"), c("a")]).unwrap();
        assert_eq!(st.canonicalize(), "a");
    }

    #[test]
    fn insert_rejects_variables() {
        let mut st = State::new();
        assert!(matches!(st.insert(f("f", vec![v("X")])), Err(StateError::NotGround(_))));
        assert!(matches!(st.insert(Term::placeholder("p")), Err(StateError::NotAFluent(_))));
        assert_eq!(st.insert(f("f", vec![Term::placeholder("p")])), Ok(true));
    }

    #[test]
    fn shape_key_ignores_placeholder_names() {
        let a = State::from_fluents([
            Term::know(f("Name", vec![Term::placeholder("x1")])),
            f("at", vec![Term::placeholder("x1"), c("s7")]),
        ])
        .unwrap();
        let b = State::from_fluents([
            Term::know(f("Name", vec![Term::placeholder("zz")])),
            f("at", vec![Term::placeholder("zz"), c("s7")]),
        ])
        .unwrap();
        assert_ne!(a.canonicalize(), b.canonicalize());
        assert_eq!(a.shape_key(), b.shape_key());
        let c2 = State::from_fluents([
            Term::know(f("Name", vec![Term::placeholder("zz")])),
            f("at", vec![Term::placeholder("yy"), c("s7")]),
        ])
        .unwrap();
        assert_ne!(a.shape_key(), c2.shape_key());
    }

    #[test]
    fn display_quotes_only_where_needed() {
        let t = f("SendMsg", vec![c("Ravi"), Term::placeholder("n1"), c("help")]);
        assert_eq!(t.to_string(), "SendMsg('Ravi',#n1,help)");
        assert_eq!(Term::know(c("ConfirmSend")).to_string(), "know(ConfirmSend)");
        assert_eq!(c("it's").to_string(), "'it\\'s'");
    }
}
