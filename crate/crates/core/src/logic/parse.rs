//! Reader for rule files.
//!
//! ```text
//! rule  := head ":-" body "." | head "."
//! wc    := ":~" body "." "[" weight "@" level ("," term)* "]"
//! body  := literal (("," | ";") literal)*
//! lit   := atom | "not" atom | guard
//! guard := var cmp int | int cmp var | int "<=" var "<=" int
//! ```
//!
//! `%` starts a comment. `≥`/`≤` are accepted as spellings of `>=`/`<=`.

use super::atom::{FeatureSet, GroundAtom, Symbol};
use super::program::{
    AtomPattern, Cmp, Guard, Literal, Program, Rule, Term, WeakConstraint, Weight,
};
use super::RuleError;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Int(i64),
    If,
    Weak,
    Dot,
    Comma,
    Semi,
    LParen,
    RParen,
    LBracket,
    RBracket,
    At,
    Minus,
    Cmp(Cmp),
    Not,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Var(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::If => "`:-`".into(),
            Tok::Weak => "`:~`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::At => "`@`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Cmp(_) => "comparison".into(),
            Tok::Not => "`not`".into(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Pos {
    line: usize,
    column: usize,
}

fn syntax(pos: Pos, message: impl Into<String>) -> RuleError {
    RuleError::Syntax {
        line: pos.line,
        column: pos.column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, RuleError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let pos = Pos {
                line: lineno + 1,
                column: i + 1,
            };
            let next = chars.get(i + 1).copied();
            let (tok, len) = match c {
                '%' => break,
                c if c.is_whitespace() => {
                    i += 1;
                    continue;
                }
                ':' if next == Some('-') => (Tok::If, 2),
                ':' if next == Some('~') => (Tok::Weak, 2),
                '.' => (Tok::Dot, 1),
                ',' => (Tok::Comma, 1),
                ';' => (Tok::Semi, 1),
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                '[' => (Tok::LBracket, 1),
                ']' => (Tok::RBracket, 1),
                '@' => (Tok::At, 1),
                '-' => (Tok::Minus, 1),
                '>' if next == Some('=') => (Tok::Cmp(Cmp::Ge), 2),
                '<' if next == Some('=') => (Tok::Cmp(Cmp::Le), 2),
                '>' => (Tok::Cmp(Cmp::Gt), 1),
                '<' => (Tok::Cmp(Cmp::Lt), 1),
                '=' => (Tok::Cmp(Cmp::Eq), 1),
                '≥' => (Tok::Cmp(Cmp::Ge), 1),
                '≤' => (Tok::Cmp(Cmp::Le), 1),
                c if c.is_ascii_digit() => {
                    let end = (i..chars.len())
                        .find(|&j| !chars[j].is_ascii_digit())
                        .unwrap_or(chars.len());
                    let s: String = chars[i..end].iter().collect();
                    let v = s
                        .parse::<i64>()
                        .map_err(|_| syntax(pos, format!("integer `{s}` out of range")))?;
                    (Tok::Int(v), end - i)
                }
                c if c.is_alphabetic() || c == '_' => {
                    let end = (i..chars.len())
                        .find(|&j| !(chars[j].is_alphanumeric() || chars[j] == '_'))
                        .unwrap_or(chars.len());
                    let s: String = chars[i..end].iter().collect();
                    let tok = if s == "not" {
                        Tok::Not
                    } else if c.is_uppercase() || c == '_' {
                        Tok::Var(s)
                    } else {
                        Tok::Ident(s)
                    };
                    (tok, end - i)
                }
                other => return Err(syntax(pos, format!("unexpected character `{other}`"))),
            };
            out.push((tok, pos));
            i += len;
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    end: Pos,
}

impl Parser {
    fn new(text: &str) -> Result<Self, RuleError> {
        let lines = text.lines().count().max(1);
        let last = text.lines().last().map_or(0, |l| l.chars().count());
        Ok(Parser {
            toks: lex(text)?,
            at: 0,
            end: Pos {
                line: lines,
                column: last + 1,
            },
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.at + 1).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.at).map_or(self.end, |(_, p)| *p)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|(t, _)| t.clone());
        self.at += 1;
        t
    }

    fn done(&self) -> bool {
        self.at >= self.toks.len()
    }

    fn unexpected(&self, wanted: &str) -> RuleError {
        let found = self
            .peek()
            .map_or("end of input".to_string(), Tok::describe);
        syntax(self.pos(), format!("expected {wanted}, found {found}"))
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<(), RuleError> {
        if self.peek() == Some(&tok) {
            self.at += 1;
            Ok(())
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn int(&mut self) -> Result<i64, RuleError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.at += 1;
                match self.bump() {
                    Some(Tok::Int(v)) => Ok(-v),
                    _ => {
                        self.at -= 1;
                        Err(self.unexpected("integer"))
                    }
                }
            }
            Some(Tok::Int(v)) => {
                let v = *v;
                self.at += 1;
                Ok(v)
            }
            _ => Err(self.unexpected("integer")),
        }
    }

    fn term(&mut self) -> Result<Term, RuleError> {
        match self.peek() {
            Some(Tok::Var(v)) => {
                let t = Term::var(v);
                self.at += 1;
                Ok(t)
            }
            Some(Tok::Int(_)) | Some(Tok::Minus) => self.int().map(Term::Int),
            _ => Err(self.unexpected("variable or integer")),
        }
    }

    fn atom(&mut self) -> Result<AtomPattern, RuleError> {
        let name = match self.bump() {
            Some(Tok::Ident(s)) => s,
            _ => {
                self.at -= 1;
                return Err(self.unexpected("predicate name"));
            }
        };
        let mut terms = Vec::new();
        if self.peek() == Some(&Tok::LParen) {
            self.at += 1;
            loop {
                terms.push(self.term()?);
                match self.peek() {
                    Some(Tok::Comma) => self.at += 1,
                    Some(Tok::RParen) => {
                        self.at += 1;
                        break;
                    }
                    _ => return Err(self.unexpected("`,` or `)`")),
                }
            }
        }
        Ok(AtomPattern::new(&name, terms))
    }

    fn cmp(&mut self) -> Result<Cmp, RuleError> {
        match self.peek() {
            Some(Tok::Cmp(c)) => {
                let c = *c;
                self.at += 1;
                Ok(c)
            }
            _ => Err(self.unexpected("comparison operator")),
        }
    }

    fn var(&mut self) -> Result<Symbol, RuleError> {
        match self.peek() {
            Some(Tok::Var(v)) => {
                let s = Symbol::new(v);
                self.at += 1;
                Ok(s)
            }
            _ => Err(self.unexpected("variable")),
        }
    }

    fn literal(&mut self) -> Result<Literal, RuleError> {
        match self.peek() {
            Some(Tok::Not) => {
                self.at += 1;
                Ok(Literal::Neg(self.atom()?))
            }
            Some(Tok::Ident(_)) => Ok(Literal::Pos(self.atom()?)),
            Some(Tok::Var(_)) => {
                let var = self.var()?;
                let op = self.cmp()?;
                let value = self.int()?;
                Ok(Literal::Guard(Guard::Compare { var, op, value }))
            }
            Some(Tok::Int(_)) | Some(Tok::Minus) => {
                let pos = self.pos();
                let low = self.int()?;
                let op = self.cmp()?;
                let var = self.var()?;
                if op == Cmp::Le && self.peek() == Some(&Tok::Cmp(Cmp::Le)) {
                    self.at += 1;
                    let high = self.int()?;
                    return Ok(Literal::Guard(Guard::Between { var, low, high }));
                }
                if matches!(self.peek(), Some(Tok::Cmp(_))) {
                    return Err(syntax(pos, "only `low <= V <= high` chains are supported"));
                }
                Ok(Literal::Guard(Guard::Compare {
                    var,
                    op: op.flipped(),
                    value: low,
                }))
            }
            _ => Err(self.unexpected("literal")),
        }
    }

    fn body(&mut self) -> Result<Vec<Literal>, RuleError> {
        let mut body = vec![self.literal()?];
        while matches!(self.peek(), Some(Tok::Comma) | Some(Tok::Semi)) {
            self.at += 1;
            body.push(self.literal()?);
        }
        Ok(body)
    }

    fn weight(&mut self) -> Result<Weight, RuleError> {
        match (self.peek(), self.peek2()) {
            (Some(Tok::Minus), Some(Tok::Var(_))) => {
                self.at += 1;
                Ok(Weight::Var {
                    var: self.var()?,
                    negated: true,
                })
            }
            (Some(Tok::Var(_)), _) => Ok(Weight::Var {
                var: self.var()?,
                negated: false,
            }),
            _ => self.int().map(Weight::Const),
        }
    }

    fn weak(&mut self) -> Result<WeakConstraint, RuleError> {
        self.expect(Tok::Weak, "`:~`")?;
        let body = self.body()?;
        self.expect(Tok::Dot, "`.`")?;
        self.expect(Tok::LBracket, "`[`")?;
        let weight = self.weight()?;
        self.expect(Tok::At, "`@`")?;
        let level = self.int()?;
        let mut terms = Vec::new();
        while self.peek() == Some(&Tok::Comma) {
            self.at += 1;
            terms.push(self.term()?);
        }
        self.expect(Tok::RBracket, "`]`")?;
        Ok(WeakConstraint {
            body,
            weight,
            level,
            terms,
        })
    }

    fn rule(&mut self) -> Result<Rule, RuleError> {
        let head = self.atom()?;
        let body = if self.peek() == Some(&Tok::If) {
            self.at += 1;
            self.body()?
        } else {
            Vec::new()
        };
        self.expect(Tok::Dot, "`.` or `:-`")?;
        Ok(Rule { head, body })
    }
}

/// Parses and validates a rule file.
pub fn parse_program(text: &str) -> Result<Program, RuleError> {
    let mut p = Parser::new(text)?;
    let mut rules = Vec::new();
    let mut weak = Vec::new();
    while !p.done() {
        if p.peek() == Some(&Tok::Weak) {
            weak.push(p.weak()?);
        } else {
            rules.push(p.rule()?);
        }
    }
    Program::new(rules, weak)
}

/// Parses a single rule, e.g. for distance queries. The closing `.` is
/// optional here.
pub fn parse_rule(text: &str) -> Result<Rule, RuleError> {
    let mut p = Parser::new(text)?;
    let head = p.atom()?;
    let body = if p.peek() == Some(&Tok::If) {
        p.at += 1;
        p.body()?
    } else {
        Vec::new()
    };
    if p.peek() == Some(&Tok::Dot) {
        p.at += 1;
    }
    let rule = Rule { head, body };
    if !p.done() {
        return Err(p.unexpected("end of rule"));
    }
    Ok(rule)
}

fn ground(p: &mut Parser) -> Result<GroundAtom, RuleError> {
    let pos = p.pos();
    let atom = p.atom()?;
    let args = atom
        .terms
        .iter()
        .map(|t| match t {
            Term::Int(i) => Ok(*i),
            Term::Var(v) => Err(syntax(pos, format!("variable `{v}` in ground atom"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GroundAtom {
        predicate: atom.predicate,
        args,
    })
}

pub(crate) fn parse_ground_atom(text: &str) -> Result<GroundAtom, RuleError> {
    let mut p = Parser::new(text)?;
    let atom = ground(&mut p)?;
    if !p.done() {
        return Err(p.unexpected("end of atom"));
    }
    Ok(atom)
}

pub(crate) fn parse_fact_list(text: &str) -> Result<FeatureSet, RuleError> {
    let mut p = Parser::new(text)?;
    let mut out = FeatureSet::new();
    while !p.done() {
        out.insert(ground(&mut p)?);
        if p.peek() == Some(&Tok::Dot) {
            p.at += 1;
        }
    }
    Ok(out)
}
