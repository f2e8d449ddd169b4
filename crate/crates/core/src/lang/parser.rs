use super::{is_token, ConceptName, LangError, SpecExpr, TaskVocabulary};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Comma,
    Pipe,
    Bang,
    AndAnd,
    OrOr,
    Arrow,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Bang => "`!`".into(),
            Tok::AndAnd => "`&&`".into(),
            Tok::OrOr => "`||`".into(),
            Tok::Arrow => "`=>`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn syntax(position: usize, message: impl Into<String>) -> LangError {
    LangError::Syntax {
        position,
        message: message.into(),
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '-' || c == '_'
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, LangError> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(pos, c)) = chars.peek() {
        let two = |chars: &mut std::iter::Peekable<std::str::CharIndices>, want: char, tok: Tok| {
            chars.next();
            match chars.peek() {
                Some(&(_, n)) if n == want => {
                    chars.next();
                    Ok(tok)
                }
                _ => Err(syntax(pos, format!("expected `{c}{want}`"))),
            }
        };
        let tok = match c {
            c if c.is_whitespace() => {
                chars.next();
                continue;
            }
            '(' => {
                chars.next();
                Tok::LParen
            }
            ')' => {
                chars.next();
                Tok::RParen
            }
            ',' => {
                chars.next();
                Tok::Comma
            }
            '!' => {
                chars.next();
                Tok::Bang
            }
            '&' => two(&mut chars, '&', Tok::AndAnd)?,
            '=' => two(&mut chars, '>', Tok::Arrow)?,
            '|' => {
                chars.next();
                if matches!(chars.peek(), Some(&(_, '|'))) {
                    chars.next();
                    Tok::OrOr
                } else {
                    Tok::Pipe
                }
            }
            c if is_ident_char(c) => {
                let mut end = pos;
                while let Some(&(i, c)) = chars.peek() {
                    if !is_ident_char(c) {
                        break;
                    }
                    end = i + c.len_utf8();
                    chars.next();
                }
                Tok::Ident(text[pos..end].to_string())
            }
            other => return Err(syntax(pos, format!("unexpected character `{other}`"))),
        };
        out.push((tok, pos));
    }
    out.push((Tok::Eof, text.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    vocab: &'a TaskVocabulary,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), LangError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(syntax(
                self.pos(),
                format!(
                    "expected {}, found {}",
                    want.describe(),
                    self.peek().describe()
                ),
            ))
        }
    }

    fn ident(&mut self) -> Result<(String, usize), LangError> {
        match self.bump() {
            (Tok::Ident(s), pos) => Ok((s, pos)),
            (t, pos) => Err(syntax(
                pos,
                format!("expected a name, found {}", t.describe()),
            )),
        }
    }

    fn concept(&mut self) -> Result<ConceptName, LangError> {
        let (name, _) = self.ident()?;
        self.vocab
            .concept(&name)
            .cloned()
            .ok_or(LangError::UnknownName(name))
    }

    fn expr(&mut self) -> Result<SpecExpr, LangError> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.expr()?;
            return Ok(SpecExpr::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<SpecExpr, LangError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            lhs = SpecExpr::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<SpecExpr, LangError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::AndAnd {
            self.bump();
            lhs = SpecExpr::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<SpecExpr, LangError> {
        match self.peek() {
            Tok::Bang => {
                self.bump();
                Ok(SpecExpr::not(self.unary()?))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            _ => self.predicate(),
        }
    }

    fn predicate(&mut self) -> Result<SpecExpr, LangError> {
        let (head, pos) = self.ident()?;
        match head.as_str() {
            "gt" => {
                self.expect(Tok::LParen)?;
                let a = self.concept()?;
                self.expect(Tok::Comma)?;
                let b = self.concept()?;
                self.expect(Tok::RParen)?;
                Ok(SpecExpr::Gt(a, b))
            }
            "predict" => {
                self.expect(Tok::LParen)?;
                let (name, _) = self.ident()?;
                let class = self
                    .vocab
                    .class(&name)
                    .cloned()
                    .ok_or(LangError::UnknownName(name))?;
                self.expect(Tok::RParen)?;
                Ok(SpecExpr::Predict(class))
            }
            "hasCon" => {
                self.expect(Tok::LParen)?;
                let con = self.concept()?;
                let contrast = if *self.peek() == Tok::Pipe {
                    self.bump();
                    let mut list = vec![self.concept()?];
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        list.push(self.concept()?);
                    }
                    Some(list)
                } else {
                    None
                };
                self.expect(Tok::RParen)?;
                Ok(SpecExpr::HasCon(con, contrast))
            }
            other => Err(syntax(
                pos,
                format!("expected `gt`, `predict`, `hasCon`, `!` or `(`, found `{other}`"),
            )),
        }
    }
}

/// Parses one specification and resolves every name against `vocab`.
///
/// Precedence from tightest: `!`, `&&`, `||`, `=>`. `&&` and `||` associate
/// to the left, `=>` to the right.
pub fn parse_spec(text: &str, vocab: &TaskVocabulary) -> Result<SpecExpr, LangError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, at: 0, vocab };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return Err(syntax(
            p.pos(),
            format!("unexpected {} after expression", p.peek().describe()),
        ));
    }
    debug_assert!(e.concepts().iter().all(|c| is_token(c.as_str())));
    Ok(e)
}

/// A parsed line of a spec file.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecLine {
    /// 1-based line number in the source file.
    pub line: usize,
    pub text: String,
    pub expr: SpecExpr,
}

/// Parses a spec file: one specification per line, `#` starts a comment,
/// blank lines are skipped. Syntax errors carry the offset within the line.
pub fn parse_spec_file(text: &str, vocab: &TaskVocabulary) -> Result<Vec<SpecLine>, LangError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let expr = parse_spec(body, vocab).map_err(|e| match e {
            LangError::Syntax { position, message } => LangError::Syntax {
                position,
                message: format!("line {}: {message}", i + 1),
            },
            other => other,
        })?;
        out.push(SpecLine {
            line: i + 1,
            text: body.to_string(),
            expr,
        });
    }
    Ok(out)
}
