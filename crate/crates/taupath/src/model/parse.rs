//! Model file and propensity expression parsing.

use thiserror::Error;

use super::expr::Expr;
use super::{Parameter, Reaction, ReactionNetwork};

/// Parse or validation failure, with a 1-based line number where one applies.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("line {line}, column {col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("line {line}: undeclared identifier `{name}`")]
    Undeclared { line: usize, name: String },
    #[error("line {line}: duplicate declaration of `{name}`")]
    Duplicate { line: usize, name: String },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("model has no {0}")]
    Missing(&'static str),
}

fn syntax(line: usize, col: usize, message: impl Into<String>) -> ModelError {
    ModelError::Syntax { line, col, message: message.into() }
}

pub(super) fn parse_model(text: &str) -> Result<ReactionNetwork, ModelError> {
    let mut species: Vec<String> = Vec::new();
    let mut parameters: Vec<Parameter> = Vec::new();

    // First pass: collect declarations so reactions can reference names
    // regardless of ordering.
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("species:") {
            for name in rest.split_whitespace() {
                check_identifier(name, line_no)?;
                if species.iter().any(|s| s == name) {
                    return Err(ModelError::Duplicate { line: line_no, name: name.to_string() });
                }
                species.push(name.to_string());
            }
        } else if let Some(rest) = line.strip_prefix("param ") {
            let (name, value) = rest.split_once('=').ok_or_else(|| {
                ModelError::Invalid { line: line_no, message: "expected `param name = value`".into() }
            })?;
            let name = name.trim();
            check_identifier(name, line_no)?;
            if parameters.iter().any(|p| p.name == name) {
                return Err(ModelError::Duplicate { line: line_no, name: name.to_string() });
            }
            let value: f64 = value.trim().parse().map_err(|_| ModelError::Invalid {
                line: line_no,
                message: format!("`{}` is not a number", value.trim()),
            })?;
            parameters.push(Parameter { name: name.to_string(), value });
        }
    }

    for p in &parameters {
        if species.iter().any(|s| s == &p.name) {
            return Err(ModelError::Duplicate { line: 0, name: p.name.clone() });
        }
    }

    let mut reactions: Vec<Reaction> = Vec::new();
    let mut observable: Option<Expr> = None;
    let mut init: Option<Vec<u64>> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty()
            || line.starts_with("species:")
            || line.starts_with("param ")
        {
            continue;
        }
        if let Some(rest) = line.strip_prefix("reaction:") {
            reactions.push(parse_reaction(rest, line_no, &species, &parameters)?);
        } else if let Some(rest) = line.strip_prefix("observable:") {
            if observable.is_some() {
                return Err(ModelError::Invalid { line: line_no, message: "duplicate observable".into() });
            }
            let e = parse_expr_names(rest, line_no, &species, &parameters)?;
            if references_parameter(&e) {
                return Err(ModelError::Invalid {
                    line: line_no,
                    message: "observable must be an expression over species only".into(),
                });
            }
            observable = Some(e);
        } else if let Some(rest) = line.strip_prefix("init:") {
            if init.is_some() {
                return Err(ModelError::Invalid { line: line_no, message: "duplicate init".into() });
            }
            let mut counts = Vec::new();
            for tok in rest.split_whitespace() {
                let v: u64 = tok.parse().map_err(|_| ModelError::Invalid {
                    line: line_no,
                    message: format!("`{tok}` is not a non-negative integer"),
                })?;
                counts.push(v);
            }
            if counts.len() != species.len() {
                return Err(ModelError::Invalid {
                    line: line_no,
                    message: format!(
                        "init has {} entries but {} species are declared",
                        counts.len(),
                        species.len()
                    ),
                });
            }
            init = Some(counts);
        } else {
            return Err(ModelError::Invalid {
                line: line_no,
                message: format!("unrecognized directive `{}`", line.split(':').next().unwrap_or(line)),
            });
        }
    }

    if species.is_empty() {
        return Err(ModelError::Missing("species"));
    }
    if reactions.is_empty() {
        return Err(ModelError::Missing("reactions"));
    }
    let observable = observable.ok_or(ModelError::Missing("observable"))?;
    let init = init.ok_or(ModelError::Missing("init"))?;

    Ok(ReactionNetwork { species, parameters, reactions, observable, init })
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn check_identifier(name: &str, line: usize) -> Result<(), ModelError> {
    let mut chars = name.chars();
    let ok = match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {
            chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        }
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(ModelError::Invalid { line, message: format!("`{name}` is not a valid identifier") })
    }
}

fn references_parameter(e: &Expr) -> bool {
    match e {
        Expr::Param(_) => true,
        Expr::Const(_) | Expr::Species(_) => false,
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b)
        | Expr::Pow(a, b) | Expr::PowLn(a, b) => {
            references_parameter(a) || references_parameter(b)
        }
        Expr::Neg(a) => references_parameter(a),
    }
}

fn parse_reaction(
    rest: &str,
    line: usize,
    species: &[String],
    parameters: &[Parameter],
) -> Result<Reaction, ModelError> {
    let (sides, prop) = rest.split_once('@').ok_or_else(|| ModelError::Invalid {
        line,
        message: "reaction needs a propensity after `@`".into(),
    })?;
    let (lhs, rhs) = sides.split_once("->").ok_or_else(|| ModelError::Invalid {
        line,
        message: "reaction needs `->` between reactants and products".into(),
    })?;
    let reactants = parse_side(lhs, line, species)?;
    let products = parse_side(rhs, line, species)?;
    let propensity = parse_expr_names(prop, line, species, parameters)?;

    let mut delta = vec![0i64; species.len()];
    for (i, m) in &products {
        delta[*i] += *m as i64;
    }
    for (i, m) in &reactants {
        delta[*i] -= *m as i64;
    }
    Ok(Reaction { reactants, products, delta, propensity })
}

fn parse_side(
    side: &str,
    line: usize,
    species: &[String],
) -> Result<Vec<(usize, u64)>, ModelError> {
    let side = side.trim();
    if side.is_empty() {
        return Ok(Vec::new());
    }
    let mut out: Vec<(usize, u64)> = Vec::new();
    for term in side.split('+') {
        let term = term.trim();
        if term.is_empty() {
            return Err(ModelError::Invalid { line, message: "empty term in reaction side".into() });
        }
        let (mult, name) = match term.split_once(char::is_whitespace) {
            Some((num, rest)) if num.chars().all(|c| c.is_ascii_digit()) => {
                let m: u64 = num.parse().map_err(|_| ModelError::Invalid {
                    line,
                    message: format!("bad multiplicity `{num}`"),
                })?;
                (m, rest.trim())
            }
            _ => (1, term),
        };
        if mult == 0 {
            return Err(ModelError::Invalid { line, message: "zero multiplicity".into() });
        }
        let idx = species
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| ModelError::Undeclared { line, name: name.to_string() })?;
        match out.iter_mut().find(|(i, _)| *i == idx) {
            Some((_, m)) => *m += mult,
            None => out.push((idx, mult)),
        }
    }
    Ok(out)
}

/// Parses an expression, resolving identifiers against the declared species
/// and parameters.
pub fn parse_expr_names(
    text: &str,
    line: usize,
    species: &[String],
    parameters: &[Parameter],
) -> Result<Expr, ModelError> {
    let tokens = tokenize(text, line)?;
    let mut parser = ExprParser { tokens, pos: 0, line, species, parameters };
    let e = parser.parse_additive()?;
    if parser.pos != parser.tokens.len() {
        let (col, tok) = parser.peek_desc();
        return Err(syntax(line, col, format!("unexpected `{tok}` after expression")));
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Open,
    Close,
}

fn tokenize(text: &str, line: usize) -> Result<Vec<(usize, Tok)>, ModelError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let col = i + 1;
        match c {
            ' ' | '\t' => i += 1,
            '+' => { out.push((col, Tok::Plus)); i += 1 }
            '-' => { out.push((col, Tok::Minus)); i += 1 }
            '*' => { out.push((col, Tok::Star)); i += 1 }
            '/' => { out.push((col, Tok::Slash)); i += 1 }
            '^' => { out.push((col, Tok::Caret)); i += 1 }
            '(' => { out.push((col, Tok::Open)); i += 1 }
            ')' => { out.push((col, Tok::Close)); i += 1 }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit = &text[start..i];
                let v: f64 = lit
                    .parse()
                    .map_err(|_| syntax(line, col, format!("bad number `{lit}`")))?;
                out.push((col, Tok::Num(v)));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push((col, Tok::Ident(text[start..i].to_string())));
            }
            other => return Err(syntax(line, col, format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

struct ExprParser<'a> {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
    line: usize,
    species: &'a [String],
    parameters: &'a [Parameter],
}

impl<'a> ExprParser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn peek_desc(&self) -> (usize, String) {
        match self.tokens.get(self.pos) {
            Some((col, tok)) => (*col, format!("{tok:?}")),
            None => (self.tokens.last().map(|(c, _)| *c + 1).unwrap_or(1), "end of line".into()),
        }
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn parse_additive(&mut self) -> Result<Expr, ModelError> {
        let mut lhs = self.parse_multiplicative()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    let rhs = self.parse_multiplicative()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Minus) => {
                    self.bump();
                    let rhs = self.parse_multiplicative()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_multiplicative(&mut self) -> Result<Expr, ModelError> {
        let mut lhs = self.parse_unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    let rhs = self.parse_unary()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Slash) => {
                    self.bump();
                    let rhs = self.parse_unary()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_unary(&mut self) -> Result<Expr, ModelError> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            let inner = self.parse_unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr, ModelError> {
        let base = self.parse_primary()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            // right-associative; exponent may carry a unary minus
            let exp = self.parse_unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn parse_primary(&mut self) -> Result<Expr, ModelError> {
        let (col, _) = self.peek_desc();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::Const(v)),
            Some(Tok::Ident(name)) => {
                if let Some(i) = self.species.iter().position(|s| *s == name) {
                    Ok(Expr::Species(i))
                } else if let Some(i) = self.parameters.iter().position(|p| p.name == name) {
                    Ok(Expr::Param(i))
                } else {
                    Err(ModelError::Undeclared { line: self.line, name })
                }
            }
            Some(Tok::Open) => {
                let e = self.parse_additive()?;
                match self.bump() {
                    Some(Tok::Close) => Ok(e),
                    _ => Err(syntax(self.line, col, "unclosed parenthesis")),
                }
            }
            Some(tok) => Err(syntax(self.line, col, format!("unexpected `{tok:?}`"))),
            None => Err(syntax(self.line, col, "unexpected end of expression")),
        }
    }
}
