//! Reader and writer for the line-based `LCCO 1` instance format.
//!
//! ```text
//! LCCO 1
//! n 2
//! m 1
//! A
//! 1 1
//! b
//! 2
//! objective linear
//! c
//! 1 2
//! start
//! x 1 1
//! y 0
//! z 1 2
//! ```
//!
//! Quadratic instances add a `Q` block of `n` rows after `c`. Everything
//! after a `#` on a line is ignored.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{ObjectiveKind, ObjectiveSpec, Problem, StartPoint};

struct Token<'a> {
    column: usize,
    text: &'a str,
}

struct Line<'a> {
    number: usize,
    tokens: Vec<Token<'a>>,
}

impl Line<'_> {
    fn syntax(&self, column: usize, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: self.number,
            column,
            message: message.into(),
        }
    }

    fn keyword(&self) -> &str {
        self.tokens[0].text
    }
}

fn tokenize(text: &str) -> Vec<Line<'_>> {
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let mut tokens = Vec::new();
        let mut start = None;
        for (pos, ch) in content.char_indices() {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    tokens.push(Token {
                        column: s + 1,
                        text: &content[s..pos],
                    });
                }
            } else if start.is_none() {
                start = Some(pos);
            }
        }
        if let Some(s) = start {
            tokens.push(Token {
                column: s + 1,
                text: &content[s..],
            });
        }
        if !tokens.is_empty() {
            lines.push(Line {
                number: idx + 1,
                tokens,
            });
        }
    }
    lines
}

struct Cursor<'a> {
    lines: Vec<Line<'a>>,
    pos: usize,
    last_line: usize,
}

impl<'a> Cursor<'a> {
    fn next(&mut self, what: &str) -> Result<&Line<'a>> {
        match self.lines.get(self.pos) {
            Some(line) => {
                self.pos += 1;
                self.last_line = line.number;
                Ok(line)
            }
            None => Err(Error::Syntax {
                line: self.last_line + 1,
                column: 1,
                message: format!("unexpected end of input, expected {what}"),
            }),
        }
    }

    fn peek_keyword(&self) -> Option<&str> {
        self.lines.get(self.pos).map(|l| l.keyword())
    }

    /// A line consisting of `keyword` alone.
    fn expect_bare(&mut self, keyword: &str) -> Result<()> {
        let line = self.next(&format!("'{keyword}'"))?;
        if line.keyword() != keyword {
            return Err(line.syntax(
                line.tokens[0].column,
                format!("expected '{keyword}', found '{}'", line.keyword()),
            ));
        }
        if let Some(extra) = line.tokens.get(1) {
            return Err(line.syntax(extra.column, format!("unexpected token after '{keyword}'")));
        }
        Ok(())
    }

    /// A line `keyword <value>` returning the value token.
    fn expect_pair(&mut self, keyword: &str) -> Result<(&Line<'a>, &Token<'a>)> {
        let line = self.next(&format!("'{keyword}'"))?;
        if line.keyword() != keyword {
            return Err(line.syntax(
                line.tokens[0].column,
                format!("expected '{keyword}', found '{}'", line.keyword()),
            ));
        }
        match line.tokens.len() {
            2 => Ok((line, &line.tokens[1])),
            1 => Err(line.syntax(
                line.tokens[0].column + keyword.len(),
                format!("missing value after '{keyword}'"),
            )),
            _ => Err(line.syntax(line.tokens[2].column, "unexpected trailing token")),
        }
    }

    fn expect_usize(&mut self, keyword: &str) -> Result<usize> {
        let (line, tok) = self.expect_pair(keyword)?;
        tok.text
            .parse::<usize>()
            .map_err(|_| line.syntax(tok.column, format!("invalid integer '{}'", tok.text)))
    }

    fn number_row(&mut self, what: &str, expected: usize) -> Result<Vec<f64>> {
        let line = self.next(what)?;
        parse_numbers(line, &line.tokens, what, expected)
    }

    /// A line `keyword v1 v2 ...` with `expected` values.
    fn labelled_row(&mut self, keyword: &str, expected: usize) -> Result<Vec<f64>> {
        let line = self.next(&format!("'{keyword}'"))?;
        if line.keyword() != keyword {
            return Err(line.syntax(
                line.tokens[0].column,
                format!("expected '{keyword}', found '{}'", line.keyword()),
            ));
        }
        parse_numbers(line, &line.tokens[1..], keyword, expected)
    }
}

fn parse_numbers(
    line: &Line<'_>,
    tokens: &[Token<'_>],
    what: &str,
    expected: usize,
) -> Result<Vec<f64>> {
    if tokens.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "line {}: {what} needs {expected} numbers, found {}",
            line.number,
            tokens.len()
        )));
    }
    tokens
        .iter()
        .map(|tok| {
            tok.text
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| line.syntax(tok.column, format!("invalid number '{}'", tok.text)))
        })
        .collect()
}

/// Parses an instance and validates it through [`Problem::new`].
pub fn parse_instance(text: &str) -> Result<Problem> {
    let mut cur = Cursor {
        lines: tokenize(text),
        pos: 0,
        last_line: 0,
    };

    let (line, version) = cur.expect_pair("LCCO")?;
    if version.text != "1" {
        return Err(line.syntax(
            version.column,
            format!("unsupported format version '{}'", version.text),
        ));
    }
    let n = cur.expect_usize("n")?;
    let m = cur.expect_usize("m")?;
    if n == 0 || m == 0 {
        return Err(Error::BadShape { n, m });
    }

    cur.expect_bare("A")?;
    let mut a = DMatrix::zeros(m, n);
    for i in 0..m {
        let row = cur.number_row(&format!("row {} of A", i + 1), n)?;
        for (j, v) in row.into_iter().enumerate() {
            a[(i, j)] = v;
        }
    }

    cur.expect_bare("b")?;
    let b = DVector::from_vec(cur.number_row("b", m)?);

    let (line, kind_tok) = cur.expect_pair("objective")?;
    let kind = match kind_tok.text.parse::<ObjectiveKind>() {
        Ok(k) => k,
        Err(_) => {
            return Err(line.syntax(
                kind_tok.column,
                format!("unknown objective kind '{}'", kind_tok.text),
            ))
        }
    };

    cur.expect_bare("c")?;
    let c = DVector::from_vec(cur.number_row("c", n)?);

    let objective = match kind {
        ObjectiveKind::Quadratic => {
            cur.expect_bare("Q")?;
            let mut q = DMatrix::zeros(n, n);
            for i in 0..n {
                let row = cur.number_row(&format!("row {} of Q", i + 1), n)?;
                for (j, v) in row.into_iter().enumerate() {
                    q[(i, j)] = v;
                }
            }
            ObjectiveSpec::Quadratic { c, q }
        }
        _ => ObjectiveSpec::Linear { c },
    };

    let start = if cur.peek_keyword() == Some("start") {
        cur.expect_bare("start")?;
        let x0 = DVector::from_vec(cur.labelled_row("x", n)?);
        let y0 = DVector::from_vec(cur.labelled_row("y", m)?);
        let z0 = DVector::from_vec(cur.labelled_row("z", n)?);
        Some(StartPoint { x0, y0, z0 })
    } else {
        None
    };

    if let Some(line) = cur.lines.get(cur.pos) {
        return Err(line.syntax(
            line.tokens[0].column,
            format!("unexpected '{}' after end of instance", line.keyword()),
        ));
    }

    Problem::new(a, b, objective, start)
}

fn write_row<'a>(out: &mut String, values: impl IntoIterator<Item = &'a f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        let _ = write!(out, "{v:.16e}");
    }
    out.push('\n');
}

/// Writes `p` with 17 significant digits per number, so that
/// [`parse_instance`] reproduces it exactly.
pub fn serialize_instance(p: &Problem) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "LCCO 1");
    let _ = writeln!(out, "n {}", p.n());
    let _ = writeln!(out, "m {}", p.m());
    out.push_str("A\n");
    for i in 0..p.m() {
        write_row(&mut out, p.a().row(i).iter());
    }
    out.push_str("b\n");
    write_row(&mut out, p.b().iter());
    match p.objective() {
        ObjectiveSpec::Linear { c } => {
            out.push_str("objective linear\nc\n");
            write_row(&mut out, c.iter());
        }
        ObjectiveSpec::Quadratic { c, q } => {
            out.push_str("objective quadratic\nc\n");
            write_row(&mut out, c.iter());
            out.push_str("Q\n");
            for i in 0..p.n() {
                write_row(&mut out, q.row(i).iter());
            }
        }
        ObjectiveSpec::Custom(_) => return Err(Error::Unserializable),
    }
    if let Some(s) = p.start() {
        out.push_str("start\nx ");
        write_row(&mut out, s.x0.iter());
        out.push_str("y ");
        write_row(&mut out, s.y0.iter());
        out.push_str("z ");
        write_row(&mut out, s.z0.iter());
    }
    Ok(out)
}
