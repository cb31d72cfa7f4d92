use super::formula::{Bound, Comparator, MtlFormula};
use super::MtlError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    Num(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Bang,
    AndAnd,
    OrOr,
    Minus,
    Cmp(Comparator),
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

fn syntax(position: usize, message: impl Into<String>) -> MtlError {
    MtlError::Syntax {
        position,
        message: message.into(),
    }
}

impl Lexer<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek_byte(&self, off: usize) -> Option<u8> {
        self.src.get(self.pos + off).copied()
    }

    fn next(&mut self) -> Result<(usize, Tok), MtlError> {
        self.skip_ws();
        let start = self.pos;
        let Some(c) = self.peek_byte(0) else {
            return Ok((start, Tok::End));
        };
        let two = |l: &mut Self, t: Tok| {
            l.pos += 2;
            Ok((start, t))
        };
        let one = |l: &mut Self, t: Tok| {
            l.pos += 1;
            Ok((start, t))
        };
        match (c, self.peek_byte(1)) {
            (b'&', Some(b'&')) => two(self, Tok::AndAnd),
            (b'|', Some(b'|')) => two(self, Tok::OrOr),
            (b'=', Some(b'=')) => two(self, Tok::Cmp(Comparator::Eq)),
            (b'!', Some(b'=')) => two(self, Tok::Cmp(Comparator::Ne)),
            (b'<', Some(b'=')) => two(self, Tok::Cmp(Comparator::Le)),
            (b'>', Some(b'=')) => two(self, Tok::Cmp(Comparator::Ge)),
            (b'<', _) => one(self, Tok::Cmp(Comparator::Lt)),
            (b'>', _) => one(self, Tok::Cmp(Comparator::Gt)),
            (b'!', _) => one(self, Tok::Bang),
            (b'(', _) => one(self, Tok::LParen),
            (b')', _) => one(self, Tok::RParen),
            (b'[', _) => one(self, Tok::LBracket),
            (b']', _) => one(self, Tok::RBracket),
            (b',', _) => one(self, Tok::Comma),
            (b'-', _) => one(self, Tok::Minus),
            (c, _) if c.is_ascii_alphabetic() || c == b'_' => Ok((start, Tok::Name(self.name()))),
            (c, next) if c.is_ascii_digit() || (c == b'.' && next.is_some_and(|d| d.is_ascii_digit())) => {
                self.number().map(|x| (start, Tok::Num(x)))
            }
            _ => Err(syntax(start, format!("unexpected character `{}`", c as char))),
        }
    }

    fn ident_end(&self, mut i: usize) -> usize {
        while i < self.src.len() && (self.src[i].is_ascii_alphanumeric() || self.src[i] == b'_') {
            i += 1;
        }
        i
    }

    fn name(&mut self) -> String {
        let start = self.pos;
        let mut end = self.ident_end(self.pos);
        while end + 1 < self.src.len()
            && self.src[end] == b'.'
            && (self.src[end + 1].is_ascii_alphabetic() || self.src[end + 1] == b'_')
        {
            end = self.ident_end(end + 1);
        }
        self.pos = end;
        String::from_utf8_lossy(&self.src[start..end]).into_owned()
    }

    fn digits(&mut self) {
        while self.peek_byte(0).is_some_and(|d| d.is_ascii_digit()) {
            self.pos += 1;
        }
    }

    fn number(&mut self) -> Result<f64, MtlError> {
        let start = self.pos;
        self.digits();
        if self.peek_byte(0) == Some(b'.') {
            self.pos += 1;
            self.digits();
        }
        if matches!(self.peek_byte(0), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek_byte(0), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.peek_byte(0).is_some_and(|d| d.is_ascii_digit()) {
                self.digits();
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let base: f64 = text
            .parse()
            .map_err(|_| syntax(start, format!("bad number `{text}`")))?;
        if self.peek_byte(0) != Some(b'^') {
            return Ok(base);
        }
        // `10^12` style powers.
        self.pos += 1;
        let exp_start = self.pos;
        let negative = self.peek_byte(0) == Some(b'-');
        if negative {
            self.pos += 1;
        }
        let digits_start = self.pos;
        self.digits();
        if digits_start == self.pos {
            return Err(syntax(exp_start, "expected exponent after `^`"));
        }
        let e: f64 = std::str::from_utf8(&self.src[digits_start..self.pos])
            .expect("ascii")
            .parse()
            .map_err(|_| syntax(exp_start, "bad exponent"))?;
        Ok(base.powf(if negative { -e } else { e }))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    pos: usize,
    tok: Tok,
}

impl<'a> Parser<'a> {
    fn new(src: &'a [u8]) -> Result<Self, MtlError> {
        let mut lexer = Lexer { src, pos: 0 };
        let (pos, tok) = lexer.next()?;
        Ok(Self { lexer, pos, tok })
    }

    fn bump(&mut self) -> Result<Tok, MtlError> {
        let (pos, tok) = self.lexer.next()?;
        self.pos = pos;
        Ok(std::mem::replace(&mut self.tok, tok))
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), MtlError> {
        if self.tok == want {
            self.bump()?;
            Ok(())
        } else {
            Err(syntax(self.pos, format!("expected {what}")))
        }
    }

    /// True when the current token is the operator keyword `kw` followed by `[`.
    fn at_keyword(&self, kw: &str) -> bool {
        if !matches!(&self.tok, Tok::Name(n) if n == kw) {
            return false;
        }
        let mut probe = Lexer {
            src: self.lexer.src,
            pos: self.lexer.pos,
        };
        matches!(probe.next(), Ok((_, Tok::LBracket)))
    }

    fn or(&mut self) -> Result<MtlFormula, MtlError> {
        let mut lhs = self.and()?;
        while self.tok == Tok::OrOr {
            self.bump()?;
            lhs = lhs.or(self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<MtlFormula, MtlError> {
        let mut lhs = self.until()?;
        while self.tok == Tok::AndAnd {
            self.bump()?;
            lhs = lhs.and(self.until()?);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<MtlFormula, MtlError> {
        let mut lhs = self.unary()?;
        while self.at_keyword("U") {
            self.bump()?;
            let bound = self.interval()?;
            let rhs = self.unary()?;
            lhs = MtlFormula::Until(bound, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<MtlFormula, MtlError> {
        if self.tok == Tok::Bang {
            self.bump()?;
            return Ok(self.unary()?.not());
        }
        if self.tok == Tok::LParen {
            self.bump()?;
            let inner = self.or()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(inner);
        }
        for (kw, globally) in [("F", false), ("G", true)] {
            if self.at_keyword(kw) {
                self.bump()?;
                let bound = self.interval()?;
                let phi = Box::new(self.unary()?);
                return Ok(if globally {
                    MtlFormula::Globally(bound, phi)
                } else {
                    MtlFormula::Finally(bound, phi)
                });
            }
        }
        let at = self.pos;
        match self.bump()? {
            Tok::Name(n) if n == "true" => Ok(MtlFormula::True),
            Tok::Name(n) if n == "false" => Ok(MtlFormula::False),
            Tok::Name(variable) => {
                let Tok::Cmp(op) = self.tok else {
                    return Err(syntax(self.pos, "expected comparison operator"));
                };
                self.bump()?;
                let constant = self.signed_number()?;
                Ok(MtlFormula::Atom { variable, op, constant })
            }
            Tok::End => Err(syntax(at, "unexpected end of input")),
            _ => Err(syntax(at, "expected a formula")),
        }
    }

    fn signed_number(&mut self) -> Result<f64, MtlError> {
        let negative = self.tok == Tok::Minus;
        if negative {
            self.bump()?;
        }
        let at = self.pos;
        match self.bump()? {
            Tok::Num(x) => Ok(if negative { -x } else { x }),
            _ => Err(syntax(at, "expected a number")),
        }
    }

    fn interval(&mut self) -> Result<Bound, MtlError> {
        self.expect(Tok::LBracket, "`[`")?;
        let a = self.signed_number()?;
        self.expect(Tok::Comma, "`,`")?;
        let b = self.signed_number()?;
        self.expect(Tok::RBracket, "`]`")?;
        if !(a.is_finite() && b.is_finite() && 0.0 <= a && a <= b) {
            return Err(MtlError::BadInterval { a, b });
        }
        Ok(Bound { a, b })
    }
}

/// Parses a bounded MTL property. Braces are accepted as parentheses.
pub fn parse_formula(text: &str) -> Result<MtlFormula, MtlError> {
    let normalized: Vec<u8> = text
        .bytes()
        .map(|b| match b {
            b'{' => b'(',
            b'}' => b')',
            other => other,
        })
        .collect();
    let mut p = Parser::new(&normalized)?;
    let f = p.or()?;
    if p.tok != Tok::End {
        return Err(syntax(p.pos, "unexpected trailing input"));
    }
    Ok(f)
}
