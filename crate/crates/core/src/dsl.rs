//! Reader and printer for domain (`.fcd`) and problem (`.fcp`) files.
//!
//! ```text
//! % comment to end of line
//! fluent availableRole/2.
//! fluent Name/1.
//! fluent ConfirmSend/0.
//!
//! action findResource(PR,SP)
//!     poss: knows_val(Profession(PR)), knows_val(Specialization(SP)), holds(availableRole(PR,SP))
//!     update: add [know(Name(P)), know(CoachNum(CN))] remove [].
//! ```
//!
//! Problem files hold `init: f1, f2. goal: g1, g2.`; either list may be empty.
//!
//! Identifiers starting with an uppercase letter or `_` are variables, those
//! starting with a lowercase letter or digit are constants, `'quoted text'` is
//! a constant and `#id` a placeholder. In fluent position (a precondition
//! argument, an add/remove element, the argument of `know`, an init or goal
//! item) a bare identifier is always a 0-ary fluent symbol.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::schema::{ActionSchema, PossAtom, SchemaError};
use crate::term::{State, Term, KNOW};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: expected {expected}, found {found}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{line}:{column}: fluent `{name}/{arity}` {problem}")]
    Arity { line: usize, column: usize, name: String, arity: usize, problem: String },
    #[error("{line}:{column}: initial fluent `{fluent}` is not ground")]
    Groundness { line: usize, column: usize, fluent: String },
    #[error("{line}:{column}: action `{name}` is defined twice")]
    DuplicateAction { line: usize, column: usize, name: String },
    #[error("{line}:{column}: {source}")]
    Schema { line: usize, column: usize, source: SchemaError },
}

impl DslError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            DslError::Parse(p) => (p.line, p.column),
            DslError::Arity { line, column, .. }
            | DslError::Groundness { line, column, .. }
            | DslError::DuplicateAction { line, column, .. }
            | DslError::Schema { line, column, .. } => (*line, *column),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DomainFile {
    pub fluent_decls: Vec<(String, usize)>,
    pub actions: Vec<ActionSchema>,
    pub source_name: String,
}

impl DomainFile {
    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name() == name)
    }

    pub fn arity_of(&self, name: &str) -> Option<usize> {
        self.fluent_decls.iter().find(|(n, _)| n == name).map(|(_, a)| *a)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProblemFile {
    pub initial: State,
    pub goal: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Quoted(String),
    Placeholder(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Colon,
    Slash,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Quoted(s) => format!("'{s}'"),
            Tok::Placeholder(s) => format!("`#{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Pos {
    line: usize,
    column: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut column) = (1, 1);
    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                column = 1;
            } else if c.is_some() {
                column += 1;
            }
            c
        }};
    }
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, column };
        match c {
            c if c.is_whitespace() => {
                bump!();
            }
            '%' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump!();
                }
            }
            '(' | ')' | '[' | ']' | ',' | '.' | ':' | '/' => {
                bump!();
                let tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    ',' => Tok::Comma,
                    '.' => Tok::Dot,
                    ':' => Tok::Colon,
                    _ => Tok::Slash,
                };
                out.push((tok, pos));
            }
            '\'' => {
                bump!();
                let mut text = String::new();
                loop {
                    match bump!() {
                        None => {
                            return Err(ParseError {
                                line: pos.line,
                                column: pos.column,
                                expected: "closing `'`".into(),
                                found: "end of input".into(),
                            })
                        }
                        Some('\'') => break,
                        Some('\\') => match bump!() {
                            Some(e) => text.push(e),
                            None => {
                                return Err(ParseError {
                                    line: pos.line,
                                    column: pos.column,
                                    expected: "closing `'`".into(),
                                    found: "end of input".into(),
                                })
                            }
                        },
                        Some(ch) => text.push(ch),
                    }
                }
                out.push((Tok::Quoted(text), pos));
            }
            '#' => {
                bump!();
                let mut id = String::new();
                while let Some(&c) = chars.peek() {
                    if !is_word_char(c) {
                        break;
                    }
                    id.push(c);
                    bump!();
                }
                if id.is_empty() {
                    let found = chars.peek().map_or("end of input".to_string(), |c| format!("`{c}`"));
                    return Err(ParseError {
                        line,
                        column,
                        expected: "placeholder name".into(),
                        found,
                    });
                }
                out.push((Tok::Placeholder(id), pos));
            }
            c if is_word_char(c) => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if !is_word_char(c) {
                        break;
                    }
                    word.push(c);
                    bump!();
                }
                out.push((Tok::Ident(word), pos));
            }
            other => {
                return Err(ParseError {
                    line,
                    column,
                    expected: "a token".into(),
                    found: format!("`{other}`"),
                })
            }
        }
    }
    out.push((Tok::Eof, Pos { line, column }));
    Ok(out)
}

/// Fluent symbol occurrence recorded for the arity check.
struct FluentUse {
    name: String,
    arity: usize,
    pos: Pos,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    uses: Vec<FluentUse>,
}

impl Parser {
    fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Parser { toks: lex(src)?, at: 0, uses: Vec::new() })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn advance(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        let (tok, pos) = &self.toks[self.at];
        ParseError {
            line: pos.line,
            column: pos.column,
            expected: expected.to_string(),
            found: tok.describe(),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<Pos, ParseError> {
        if *self.peek() == tok {
            Ok(self.advance().1)
        } else {
            Err(self.error(&tok.describe()))
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn keyword(&mut self, kws: &[&str]) -> Result<Pos, ParseError> {
        match self.peek() {
            Tok::Ident(s) if kws.contains(&s.as_str()) => Ok(self.advance().1),
            _ => Err(self.error(&format!("`{}`", kws[0]))),
        }
    }

    fn ident(&mut self, expected: &str) -> Result<(String, Pos), ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let pos = self.advance().1;
                Ok((s, pos))
            }
            _ => Err(self.error(expected)),
        }
    }

    /// A term in argument position.
    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Quoted(s) => {
                self.advance();
                Ok(Term::Const(s))
            }
            Tok::Placeholder(p) => {
                self.advance();
                Ok(Term::Placeholder(p))
            }
            Tok::Ident(name) => {
                self.advance();
                if *self.peek() == Tok::LParen {
                    let args = self.args()?;
                    Ok(Term::Compound(name, args))
                } else if name.starts_with(|c: char| c.is_ascii_uppercase() || c == '_') {
                    Ok(Term::Var(name))
                } else {
                    Ok(Term::Const(name))
                }
            }
            _ => Err(self.error("a term")),
        }
    }

    fn args(&mut self) -> Result<Vec<Term>, ParseError> {
        self.expect(Tok::LParen)?;
        let mut args = vec![self.term()?];
        while *self.peek() == Tok::Comma {
            self.advance();
            args.push(self.term()?);
        }
        self.expect(Tok::RParen)?;
        Ok(args)
    }

    /// A term in fluent position; `know(x)` recurses with `x` in fluent position.
    fn fluent(&mut self) -> Result<(Term, Pos), ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Quoted(s) => {
                self.advance();
                self.uses.push(FluentUse { name: s.clone(), arity: 0, pos });
                Ok((Term::Const(s), pos))
            }
            Tok::Ident(name) => {
                self.advance();
                if *self.peek() != Tok::LParen {
                    self.uses.push(FluentUse { name: name.clone(), arity: 0, pos });
                    return Ok((Term::Const(name), pos));
                }
                if name == KNOW {
                    self.expect(Tok::LParen)?;
                    let (inner, _) = self.fluent()?;
                    self.expect(Tok::RParen)?;
                    return Ok((Term::know(inner), pos));
                }
                let args = self.args()?;
                self.uses.push(FluentUse { name: name.clone(), arity: args.len(), pos });
                Ok((Term::Compound(name, args), pos))
            }
            _ => Err(self.error("a fluent")),
        }
    }

    fn fluent_list_until(&mut self, end: Tok) -> Result<Vec<(Term, Pos)>, ParseError> {
        let mut out = Vec::new();
        if *self.peek() == end {
            return Ok(out);
        }
        out.push(self.fluent()?);
        while *self.peek() == Tok::Comma {
            self.advance();
            out.push(self.fluent()?);
        }
        Ok(out)
    }

    fn bracket_list(&mut self) -> Result<Vec<Term>, ParseError> {
        self.expect(Tok::LBracket)?;
        let items = self.fluent_list_until(Tok::RBracket)?;
        self.expect(Tok::RBracket)?;
        Ok(items.into_iter().map(|(t, _)| t).collect())
    }

    fn poss_atom(&mut self) -> Result<PossAtom, ParseError> {
        let kind = match self.peek() {
            Tok::Ident(s) if s == "holds" => 0,
            Tok::Ident(s) if s == "knows_val" => 1,
            _ => return Err(self.error("`holds` or `knows_val`")),
        };
        self.advance();
        self.expect(Tok::LParen)?;
        let (f, _) = self.fluent()?;
        self.expect(Tok::RParen)?;
        Ok(if kind == 0 { PossAtom::Holds(f) } else { PossAtom::KnowsVal(f) })
    }
}

struct RawAction {
    schema: Result<ActionSchema, SchemaError>,
    pos: Pos,
}

pub fn parse_domain(source: &str) -> Result<DomainFile, DslError> {
    parse_domain_named("", source)
}

pub fn parse_domain_named(source_name: &str, source: &str) -> Result<DomainFile, DslError> {
    let mut p = Parser::new(source)?;
    let mut decls: Vec<(String, usize, Pos)> = Vec::new();
    let mut actions: Vec<RawAction> = Vec::new();
    loop {
        match p.peek() {
            Tok::Eof => break,
            Tok::Ident(s) if s == "fluent" => {
                p.advance();
                let (name, pos) = match p.peek().clone() {
                    Tok::Quoted(s) => (s, p.advance().1),
                    _ => p.ident("a fluent name")?,
                };
                p.expect(Tok::Slash)?;
                let arity = match p.peek() {
                    Tok::Ident(n) if n.chars().all(|c| c.is_ascii_digit()) => n.parse::<usize>().ok(),
                    _ => None,
                };
                let Some(arity) = arity else { return Err(p.error("an arity").into()) };
                p.advance();
                p.expect(Tok::Dot)?;
                decls.push((name, arity, pos));
            }
            Tok::Ident(s) if s == "action" => {
                p.advance();
                let (name, pos) = p.ident("an action name")?;
                p.expect(Tok::LParen)?;
                let mut params = Vec::new();
                if *p.peek() != Tok::RParen {
                    loop {
                        match p.term()? {
                            Term::Var(v) => params.push(v),
                            _ => {
                                p.at -= 1;
                                return Err(p.error("a parameter variable").into());
                            }
                        }
                        if *p.peek() == Tok::Comma {
                            p.advance();
                        } else {
                            break;
                        }
                    }
                }
                p.expect(Tok::RParen)?;
                p.keyword(&["poss", "Poss"])?;
                p.expect(Tok::Colon)?;
                let mut poss = Vec::new();
                if !p.at_keyword("update") {
                    poss.push(p.poss_atom()?);
                    while *p.peek() == Tok::Comma {
                        p.advance();
                        poss.push(p.poss_atom()?);
                    }
                }
                p.keyword(&["update"])?;
                p.expect(Tok::Colon)?;
                p.keyword(&["add"])?;
                let adds = p.bracket_list()?;
                p.keyword(&["remove"])?;
                let removes = p.bracket_list()?;
                p.expect(Tok::Dot)?;
                actions.push(RawAction { schema: ActionSchema::new(name, params, poss, adds, removes), pos });
            }
            _ => return Err(p.error("`fluent` or `action`").into()),
        }
    }

    let mut arities: BTreeMap<&str, usize> = BTreeMap::new();
    for (name, arity, pos) in &decls {
        if let Some(prev) = arities.insert(name, *arity) {
            if prev != *arity {
                return Err(DslError::Arity {
                    line: pos.line,
                    column: pos.column,
                    name: name.clone(),
                    arity: *arity,
                    problem: format!("was already declared with arity {prev}"),
                });
            }
        }
    }
    for u in &p.uses {
        let problem = match arities.get(u.name.as_str()) {
            None => "is not declared".to_string(),
            Some(&a) if a != u.arity => format!("does not match declared arity {a}"),
            _ => continue,
        };
        return Err(DslError::Arity {
            line: u.pos.line,
            column: u.pos.column,
            name: u.name.clone(),
            arity: u.arity,
            problem,
        });
    }

    let mut out = Vec::new();
    for raw in actions {
        let schema = raw.schema.map_err(|source| DslError::Schema {
            line: raw.pos.line,
            column: raw.pos.column,
            source,
        })?;
        if out.iter().any(|a: &ActionSchema| a.name() == schema.name()) {
            return Err(DslError::DuplicateAction {
                line: raw.pos.line,
                column: raw.pos.column,
                name: schema.name().to_string(),
            });
        }
        out.push(schema);
    }

    let mut fluent_decls: Vec<(String, usize)> = Vec::new();
    for (n, a, _) in decls {
        if !fluent_decls.iter().any(|(m, _)| *m == n) {
            fluent_decls.push((n, a));
        }
    }
    Ok(DomainFile { fluent_decls, actions: out, source_name: source_name.to_string() })
}

pub fn parse_problem(source: &str) -> Result<ProblemFile, DslError> {
    let mut p = Parser::new(source)?;
    p.keyword(&["init"])?;
    p.expect(Tok::Colon)?;
    let init = p.fluent_list_until(Tok::Dot)?;
    p.expect(Tok::Dot)?;
    p.keyword(&["goal"])?;
    p.expect(Tok::Colon)?;
    let goal = p.fluent_list_until(Tok::Dot)?;
    p.expect(Tok::Dot)?;
    p.expect(Tok::Eof)?;

    let mut initial = State::new();
    for (t, pos) in init {
        if !t.is_ground() {
            return Err(DslError::Groundness { line: pos.line, column: pos.column, fluent: t.to_string() });
        }
        initial.insert(t).expect("ground fluent");
    }
    Ok(ProblemFile { initial, goal: goal.into_iter().map(|(t, _)| t).collect() })
}

/// Parses a single fluent, e.g. `availableRole(doctor,orthopedics)`.
pub fn parse_fluent(source: &str) -> Result<Term, ParseError> {
    let mut p = Parser::new(source)?;
    let (t, _) = p.fluent()?;
    p.expect(Tok::Eof)?;
    Ok(t)
}

/// Parses `[f1, f2, ...]`.
pub fn parse_fluent_list(source: &str) -> Result<Vec<Term>, ParseError> {
    let mut p = Parser::new(source)?;
    let items = p.bracket_list()?;
    p.expect(Tok::Eof)?;
    Ok(items)
}

/// Parses `holds(f)` or `knows_val(f)`.
pub fn parse_poss_atom(source: &str) -> Result<PossAtom, ParseError> {
    let mut p = Parser::new(source)?;
    let atom = p.poss_atom()?;
    p.expect(Tok::Eof)?;
    Ok(atom)
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

/// Prints one action in domain syntax (without trailing newline).
pub fn print_action(a: &ActionSchema) -> String {
    format!(
        "action {}({})\n    poss: {}\n    update: add [{}] remove [{}].",
        a.name(),
        a.params().join(","),
        join(a.poss()),
        join(a.adds()),
        join(a.removes()),
    )
}

pub fn pretty_print(d: &DomainFile) -> String {
    let mut out = String::new();
    for (name, arity) in &d.fluent_decls {
        let name = Term::Const(name.clone()).to_string();
        writeln!(out, "fluent {name}/{arity}.").unwrap();
    }
    for a in &d.actions {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&print_action(a));
        out.push('\n');
    }
    out
}

pub fn print_problem(p: &ProblemFile) -> String {
    let init: Vec<String> = p.initial.fluents().iter().map(ToString::to_string).collect();
    format!("init: {}.\ngoal: {}.\n", init.join(", "), join(&p.goal))
}
