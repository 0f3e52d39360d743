//! Hand-written lexer and recursive-descent parser.

use super::{typecheck, AggExpr, AggFn, DslError, Expr, PlanNode, PromptExpr, SCAN_NAME};
use crate::claims::CmpOp;
use crate::oracle::ReturnType;
use crate::relation::{AttrValue, Schema};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    Real(f64),
    Op(CmpOp),
    Punct(char),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Str(s) => format!("string {s:?}"),
        Tok::Int(i) => format!("number {i}"),
        Tok::Real(r) => format!("number {r}"),
        Tok::Op(op) => format!("`{}`", op.symbol()),
        Tok::Punct(c) => format!("`{c}`"),
        Tok::Eof => "end of input".to_string(),
    }
}

fn lex(src: &str) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, col, message: String| DslError::Syntax { line, col, message };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => advance(1, &mut i, &mut col),
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '"' => {
                let mut s = String::new();
                let mut j = i + 1;
                loop {
                    match chars.get(j) {
                        None | Some('\n') => return Err(err(tl, tc, "unterminated string".into())),
                        Some('"') => break,
                        Some('\\') => {
                            let esc = chars.get(j + 1).copied();
                            s.push(match esc {
                                Some('n') => '\n',
                                Some('t') => '\t',
                                Some('"') => '"',
                                Some('\\') => '\\',
                                other => {
                                    return Err(err(line, col + (j - i), format!("bad escape {other:?}")))
                                }
                            });
                            j += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            j += 1;
                        }
                    }
                }
                let n = j + 1 - i;
                advance(n, &mut i, &mut col);
                out.push(Token { tok: Tok::Str(s), line: tl, col: tc });
            }
            c if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) => {
                let mut j = i + 1;
                let mut real = false;
                while chars.get(j).is_some_and(|d| d.is_ascii_digit()) {
                    j += 1;
                }
                if chars.get(j) == Some(&'.') && chars.get(j + 1).is_some_and(|d| d.is_ascii_digit()) {
                    real = true;
                    j += 1;
                    while chars.get(j).is_some_and(|d| d.is_ascii_digit()) {
                        j += 1;
                    }
                }
                if matches!(chars.get(j), Some('e' | 'E')) {
                    let k = if matches!(chars.get(j + 1), Some('+' | '-')) { j + 2 } else { j + 1 };
                    if chars.get(k).is_some_and(|d| d.is_ascii_digit()) {
                        real = true;
                        j = k;
                        while chars.get(j).is_some_and(|d| d.is_ascii_digit()) {
                            j += 1;
                        }
                    }
                }
                let text: String = chars[i..j].iter().collect();
                let tok = if real {
                    Tok::Real(text.parse().map_err(|_| err(tl, tc, format!("bad number {text}")))?)
                } else {
                    Tok::Int(text.parse().map_err(|_| err(tl, tc, format!("bad number {text}")))?)
                };
                advance(j - i, &mut i, &mut col);
                out.push(Token { tok, line: tl, col: tc });
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                while chars.get(j).is_some_and(|d| d.is_alphanumeric() || *d == '_') {
                    j += 1;
                }
                let text: String = chars[i..j].iter().collect();
                advance(j - i, &mut i, &mut col);
                out.push(Token { tok: Tok::Ident(text), line: tl, col: tc });
            }
            '>' | '<' | '=' | '!' => {
                let next = chars.get(i + 1).copied();
                let (tok, n) = match (c, next) {
                    ('>', Some('=')) => (Tok::Op(CmpOp::Ge), 2),
                    ('<', Some('=')) => (Tok::Op(CmpOp::Le), 2),
                    ('=', Some('=')) => (Tok::Op(CmpOp::Eq), 2),
                    ('!', Some('=')) => (Tok::Op(CmpOp::Ne), 2),
                    ('>', _) => (Tok::Op(CmpOp::Gt), 1),
                    ('<', _) => (Tok::Op(CmpOp::Lt), 1),
                    ('=', _) => (Tok::Punct('='), 1),
                    _ => return Err(err(tl, tc, format!("unexpected character {c:?}"))),
                };
                advance(n, &mut i, &mut col);
                out.push(Token { tok, line: tl, col: tc });
            }
            '(' | ')' | '[' | ']' | ',' | '.' | '&' | '|' | '~' => {
                advance(1, &mut i, &mut col);
                out.push(Token { tok: Tok::Punct(c), line: tl, col: tc });
            }
            other => return Err(err(tl, tc, format!("unexpected character {other:?}"))),
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, DslError> {
        let t = &self.toks[self.pos];
        Err(DslError::Syntax {
            line: t.line,
            col: t.col,
            message: message.into(),
        })
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, DslError> {
        self.error(format!("expected {wanted}, found {}", describe(self.peek())))
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.peek() == &Tok::Punct(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<(), DslError> {
        if self.eat_punct(c) {
            Ok(())
        } else {
            self.unexpected(&format!("`{c}`"))
        }
    }

    fn is_ident(&self, name: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == name)
    }

    fn expect_ident(&mut self, name: &str) -> Result<(), DslError> {
        if self.is_ident(name) {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&format!("`{name}`"))
        }
    }

    fn ident(&mut self) -> Result<String, DslError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.unexpected("an identifier"),
        }
    }

    /// One or more adjacent string literals, concatenated.
    fn string(&mut self) -> Result<String, DslError> {
        let mut s = match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                s
            }
            _ => return self.unexpected("a string"),
        };
        while let Tok::Str(more) = self.peek().clone() {
            self.bump();
            s.push_str(&more);
        }
        Ok(s)
    }

    fn program(&mut self) -> Result<PlanNode, DslError> {
        let explicit_scan = self.is_ident(SCAN_NAME)
            && matches!(self.peek_at(1), Tok::Punct('.') | Tok::Eof);
        if explicit_scan {
            self.bump();
        }
        let mut plan = PlanNode::Scan {
            relation: SCAN_NAME.to_string(),
        };
        let mut first = true;
        let mut checked = false;
        loop {
            if self.peek() == &Tok::Eof {
                break;
            }
            if !(first && !explicit_scan) {
                self.expect_punct('.')?;
            }
            if checked {
                if self.is_ident("collect") {
                    self.bump();
                    self.expect_punct('(')?;
                    self.expect_punct(')')?;
                    if self.peek() != &Tok::Eof {
                        return self.unexpected("end of program after `collect()`");
                    }
                    break;
                }
                return self.error("`check` must be the terminal operator");
            }
            let name = self.ident()?;
            if name == "check" && first && !explicit_scan {
                return Err(DslError::MissingScan);
            }
            plan = self.operator(&name, plan)?;
            checked = matches!(plan, PlanNode::Check { .. });
            first = false;
        }
        if !checked {
            return self.error("program must end with `check(..)`");
        }
        Ok(plan)
    }

    fn operator(&mut self, name: &str, input: PlanNode) -> Result<PlanNode, DslError> {
        let input = Box::new(input);
        self.expect_punct('(')?;
        let node = match name {
            "filter" => PlanNode::Filter {
                input,
                predicate: self.expr()?,
            },
            "map" => {
                let expr = self.expr()?;
                let alias = self.alias()?;
                PlanNode::Map { input, expr, alias }
            }
            "aggregate" => {
                self.expect_punct('[')?;
                let mut aggs = Vec::new();
                if !self.eat_punct(']') {
                    loop {
                        aggs.push(self.agg()?);
                        if self.eat_punct(']') {
                            break;
                        }
                        self.expect_punct(',')?;
                    }
                }
                let mut group_by = Vec::new();
                if self.eat_punct(',') {
                    self.expect_ident("group_by")?;
                    self.expect_punct('=')?;
                    let close = if self.eat_punct('[') {
                        ']'
                    } else {
                        self.expect_punct('(')?;
                        ')'
                    };
                    if !self.eat_punct(close) {
                        loop {
                            group_by.push(self.column_ref()?);
                            if self.eat_punct(close) {
                                break;
                            }
                            self.expect_punct(',')?;
                        }
                    }
                }
                PlanNode::Aggregate {
                    input,
                    aggs,
                    group_by,
                }
            }
            "with_rank" => {
                let expr = self.expr()?;
                let mut descending = true;
                if self.eat_punct(',') {
                    self.expect_ident("descending")?;
                    self.expect_punct('=')?;
                    descending = self.bool_lit()?;
                }
                PlanNode::WithRank {
                    input,
                    expr,
                    descending,
                }
            }
            "check" => PlanNode::Check {
                input,
                predicate: self.expr()?,
            },
            other => return self.error(format!("unknown operator `{other}`")),
        };
        self.expect_punct(')')?;
        Ok(node)
    }

    fn bool_lit(&mut self) -> Result<bool, DslError> {
        match self.peek() {
            Tok::Ident(s) if s == "true" || s == "True" => {
                self.bump();
                Ok(true)
            }
            Tok::Ident(s) if s == "false" || s == "False" => {
                self.bump();
                Ok(false)
            }
            _ => self.unexpected("`true` or `false`"),
        }
    }

    fn alias(&mut self) -> Result<String, DslError> {
        self.expect_punct('.')?;
        self.expect_ident("alias")?;
        self.expect_punct('(')?;
        let name = self.string()?;
        self.expect_punct(')')?;
        Ok(name)
    }

    fn agg(&mut self) -> Result<AggExpr, DslError> {
        let name = self.ident()?;
        let Some(func) = AggFn::from_name(&name) else {
            self.pos -= 1;
            return self.error(format!("unknown aggregation function `{name}`"));
        };
        self.expect_punct('(')?;
        let arg = self.expr()?;
        self.expect_punct(')')?;
        let alias = self.alias()?;
        Ok(AggExpr { func, arg, alias })
    }

    fn column_ref(&mut self) -> Result<String, DslError> {
        self.expect_ident("col")?;
        self.expect_punct('(')?;
        let name = self.string()?;
        self.expect_punct(')')?;
        Ok(name)
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.and_expr()?;
        while self.is_ident("or") || self.peek() == &Tok::Punct('|') {
            self.bump();
            let rhs = self.and_expr()?;
            lhs = Expr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.not_expr()?;
        while self.is_ident("and") || self.peek() == &Tok::Punct('&') {
            self.bump();
            let rhs = self.not_expr()?;
            lhs = Expr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, DslError> {
        if self.is_ident("not") || self.peek() == &Tok::Punct('~') {
            self.bump();
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> Result<Expr, DslError> {
        let lhs = self.postfix()?;
        if let Tok::Op(op) = *self.peek() {
            self.bump();
            let rhs = self.postfix()?;
            if matches!(self.peek(), Tok::Op(_)) {
                return self.error("comparisons do not chain; add parentheses");
            }
            return Ok(Expr::cmp(lhs, op, rhs));
        }
        Ok(lhs)
    }

    fn postfix(&mut self) -> Result<Expr, DslError> {
        let mut e = self.primary()?;
        loop {
            let method = match (self.peek(), self.peek_at(1)) {
                (Tok::Punct('.'), Tok::Ident(m)) if m == "eq" || m == "ne" => m.clone(),
                _ => break,
            };
            self.bump();
            self.bump();
            self.expect_punct('(')?;
            let rhs = self.expr()?;
            self.expect_punct(')')?;
            let op = if method == "eq" { CmpOp::Eq } else { CmpOp::Ne };
            e = Expr::cmp(e, op, rhs);
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        match self.peek().clone() {
            Tok::Str(_) => Ok(Expr::Lit(AttrValue::Text(self.string()?))),
            Tok::Int(i) => {
                self.bump();
                Ok(Expr::Lit(AttrValue::Int(i)))
            }
            Tok::Real(r) => {
                self.bump();
                Ok(Expr::Lit(AttrValue::Real(r)))
            }
            Tok::Punct('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(')')?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "true" | "True" | "false" | "False" => Ok(Expr::Lit(AttrValue::Bool(self.bool_lit()?))),
                "col" => Ok(Expr::Col(self.column_ref()?)),
                "lit" => {
                    self.bump();
                    self.expect_punct('(')?;
                    let e = self.primary()?;
                    self.expect_punct(')')?;
                    match e {
                        Expr::Lit(_) => Ok(e),
                        _ => self.error("`lit` takes a literal"),
                    }
                }
                "prompt" => {
                    self.bump();
                    self.expect_punct('(')?;
                    let template = self.string()?;
                    let mut return_type = ReturnType::Bool;
                    if self.eat_punct(',') {
                        if self.is_ident("return_type") {
                            self.bump();
                            self.expect_punct('=')?;
                        }
                        return_type = self.return_type()?;
                    }
                    self.expect_punct(')')?;
                    Ok(Expr::Prompt(PromptExpr {
                        template,
                        return_type,
                    }))
                }
                _ => self.unexpected("an expression"),
            },
            _ => self.unexpected("an expression"),
        }
    }

    fn return_type(&mut self) -> Result<ReturnType, DslError> {
        let name = self.ident()?;
        Ok(match name.as_str() {
            "bool" => ReturnType::Bool,
            "int" => ReturnType::Int,
            "real" | "float" => ReturnType::Real,
            "enum" => {
                self.expect_punct('(')?;
                let mut labels = Vec::new();
                loop {
                    labels.push(self.string()?);
                    if self.eat_punct(')') {
                        break;
                    }
                    self.expect_punct(',')?;
                }
                ReturnType::Enum(labels)
            }
            other => {
                self.pos -= 1;
                return self.error(format!("unknown return type `{other}`"));
            }
        })
    }
}

/// Parses without schema checks.
pub fn parse_untyped(program: &str) -> Result<PlanNode, DslError> {
    let toks = lex(program)?;
    Parser { toks, pos: 0 }.program()
}

/// Parses and type-checks against `schema`.
pub fn parse(program: &str, schema: &Schema) -> Result<PlanNode, DslError> {
    let plan = parse_untyped(program)?;
    typecheck(&plan, schema)?;
    Ok(plan)
}
