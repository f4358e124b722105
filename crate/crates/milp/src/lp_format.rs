//! CPLEX-LP text export and a reader for the same dialect.
//!
//! The writer emits `Minimize`/`Maximize`, `Subject To`, `Bounds`,
//! `Generals`, `Binaries` and `End` sections in id / insertion order, so the
//! same model always produces the same bytes. The reader accepts everything
//! the writer produces plus the common spellings of section keywords, and is
//! meant for cross-checking models against external solvers.

use std::fmt::Write as _;

use crate::error::LpParseError;
use crate::problem::{LinearExpression, MilpProblem, Relation, Sense, VariableId};

const MAX_LINE: usize = 200;

/// Formats a finite real without losing precision (shortest round-trip form).
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if v == f64::INFINITY {
        return "inf".to_string();
    }
    if v == f64::NEG_INFINITY {
        return "-inf".to_string();
    }
    let a = v.abs();
    if (1e-5..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn push_expression(out: &mut String, expr: &LinearExpression, problem: &MilpProblem, line_start: usize) {
    let mut line_len = out.len() - line_start;
    let mut first = true;
    let mut push = |out: &mut String, piece: String, first: &mut bool| {
        if !*first && line_len + piece.len() > MAX_LINE {
            out.push_str("\n  ");
            line_len = 2;
        }
        line_len += piece.len();
        out.push_str(&piece);
        *first = false;
    };
    for (var, coef) in expr.terms() {
        let name = &problem.variable(var).name;
        let piece = if first {
            format!("{} {}", format_number(coef), name)
        } else if coef < 0.0 {
            format!(" - {} {}", format_number(-coef), name)
        } else {
            format!(" + {} {}", format_number(coef), name)
        };
        push(out, piece, &mut first);
    }
    let constant = expr.constant_term();
    if constant != 0.0 || first {
        let piece = if first {
            format_number(constant)
        } else if constant < 0.0 {
            format!(" - {}", format_number(-constant))
        } else {
            format!(" + {}", format_number(constant))
        };
        push(out, piece, &mut first);
    }
}

/// Renders `problem` as CPLEX-LP text.
pub fn write_lp(problem: &MilpProblem) -> String {
    let mut out = String::new();
    out.push_str(match problem.sense() {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    let start = out.len();
    out.push_str(" obj: ");
    push_expression(&mut out, problem.objective(), problem, start);
    out.push('\n');

    out.push_str("Subject To\n");
    for c in problem.constraints() {
        let start = out.len();
        let _ = write!(out, " {}: ", c.name);
        push_expression(&mut out, &c.expr, problem, start);
        let _ = writeln!(out, " {} {}", c.relation.symbol(), format_number(c.rhs));
    }

    out.push_str("Bounds\n");
    for v in problem.variables() {
        let (lo, up) = (v.lower, v.upper);
        let _ = if lo == f64::NEG_INFINITY && up == f64::INFINITY {
            writeln!(out, " {} free", v.name)
        } else if lo == up {
            writeln!(out, " {} = {}", v.name, format_number(lo))
        } else if up == f64::INFINITY {
            writeln!(out, " {} >= {}", v.name, format_number(lo))
        } else {
            writeln!(out, " {} <= {} <= {}", format_number(lo), v.name, format_number(up))
        };
    }

    let generals: Vec<&str> = problem
        .variables()
        .iter()
        .filter(|v| v.integral && !v.is_binary())
        .map(|v| v.name.as_str())
        .collect();
    let binaries: Vec<&str> = problem
        .variables()
        .iter()
        .filter(|v| v.is_binary())
        .map(|v| v.name.as_str())
        .collect();
    if !generals.is_empty() {
        out.push_str("Generals\n");
        for name in generals {
            let _ = writeln!(out, " {name}");
        }
    }
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for name in binaries {
            let _ = writeln!(out, " {name}");
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Number(f64),
    Name(String),
    Plus,
    Minus,
    Colon,
    Rel(Relation),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Section {
    Objective,
    Constraints,
    Bounds,
    Generals,
    Binaries,
    End,
}

fn section_keyword(line: &str) -> Option<(Section, Option<Sense>)> {
    let key = line
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_ascii_lowercase();
    Some(match key.as_str() {
        "minimize" | "minimise" | "minimum" | "min" => (Section::Objective, Some(Sense::Minimize)),
        "maximize" | "maximise" | "maximum" | "max" => (Section::Objective, Some(Sense::Maximize)),
        "subject to" | "such that" | "st" | "s.t." | "st." => (Section::Constraints, None),
        "bounds" | "bound" => (Section::Bounds, None),
        "generals" | "general" | "gen" | "integers" => (Section::Generals, None),
        "binaries" | "binary" | "bin" => (Section::Binaries, None),
        "end" => (Section::End, None),
        _ => return None,
    })
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "_./#$%&(),;?@{}|~!'[]\"`^".contains(c)
}

fn tokenize(text: &str, line: usize, out: &mut Vec<(Token, usize)>) -> Result<(), LpParseError> {
    let err = |message: String| LpParseError { line, message };
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        match c {
            '+' => {
                out.push((Token::Plus, line));
                i += 1;
            }
            '-' => {
                out.push((Token::Minus, line));
                i += 1;
            }
            ':' => {
                out.push((Token::Colon, line));
                i += 1;
            }
            '<' | '>' | '=' => {
                let next = chars.get(i + 1).copied();
                let rel = match (c, next) {
                    ('<', Some('=')) | ('=', Some('<')) => {
                        i += 2;
                        Relation::LessEqual
                    }
                    ('>', Some('=')) | ('=', Some('>')) => {
                        i += 2;
                        Relation::GreaterEqual
                    }
                    ('<', _) => {
                        i += 1;
                        Relation::LessEqual
                    }
                    ('>', _) => {
                        i += 1;
                        Relation::GreaterEqual
                    }
                    _ => {
                        i += 1;
                        Relation::Equal
                    }
                };
                out.push((Token::Rel(rel), line));
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit: String = chars[start..i].iter().collect();
                let value: f64 = lit
                    .parse()
                    .map_err(|_| err(format!("malformed number `{lit}`")))?;
                out.push((Token::Number(value), line));
            }
            c if is_name_char(c) => {
                let start = i;
                while i < chars.len() && is_name_char(chars[i]) {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let lower = word.to_ascii_lowercase();
                if lower == "inf" || lower == "infinity" {
                    out.push((Token::Number(f64::INFINITY), line));
                } else {
                    out.push((Token::Name(word), line));
                }
            }
            other => return Err(err(format!("unexpected character `{other}`"))),
        }
    }
    Ok(())
}

struct Builder {
    problem: MilpProblem,
    lower: Vec<Option<f64>>,
    upper: Vec<Option<f64>>,
    integral: Vec<bool>,
    binary: Vec<bool>,
    free: Vec<bool>,
}

impl Builder {
    fn var(&mut self, name: &str, line: usize) -> Result<VariableId, LpParseError> {
        if let Some(id) = self.problem.variable_by_name(name) {
            return Ok(id);
        }
        let id = self
            .problem
            .add_variable(name, f64::NEG_INFINITY, f64::INFINITY, false)
            .map_err(|e| LpParseError {
                line,
                message: e.to_string(),
            })?;
        self.lower.push(None);
        self.upper.push(None);
        self.integral.push(false);
        self.binary.push(false);
        self.free.push(false);
        Ok(id)
    }
}

struct Cursor<'a> {
    toks: &'a [(Token, usize)],
    pos: usize,
    last_line: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }
    fn peek_at(&self, k: usize) -> Option<&'a Token> {
        self.toks.get(self.pos + k).map(|(t, _)| t)
    }
    fn line(&self) -> usize {
        self.toks.get(self.pos).map(|(_, l)| *l).unwrap_or(self.last_line)
    }
    fn next(&mut self) -> Option<&'a Token> {
        let t = self.toks.get(self.pos).map(|(t, _)| t);
        self.pos += 1;
        t
    }
    fn err(&self, message: impl Into<String>) -> LpParseError {
        LpParseError {
            line: self.line(),
            message: message.into(),
        }
    }
}

/// Parses `[name :]` at the cursor, returning the label if present.
fn parse_label(cur: &mut Cursor) -> Option<String> {
    if let (Some(Token::Name(n)), Some(Token::Colon)) = (cur.peek(), cur.peek_at(1)) {
        cur.pos += 2;
        return Some(n.clone());
    }
    None
}

/// Parses a signed sum of terms until a relation or the end of input.
fn parse_expression(cur: &mut Cursor, b: &mut Builder) -> Result<LinearExpression, LpParseError> {
    let mut expr = LinearExpression::new();
    let mut expect_term = true;
    let mut sign = 1.0;
    loop {
        match cur.peek() {
            None | Some(Token::Rel(_)) => break,
            Some(Token::Plus) => {
                cur.next();
                expect_term = true;
            }
            Some(Token::Minus) => {
                cur.next();
                sign = -sign;
                expect_term = true;
            }
            Some(Token::Number(v)) => {
                if !expect_term {
                    return Err(cur.err("missing operator between terms"));
                }
                let v = *v;
                let line = cur.line();
                cur.next();
                if let Some(Token::Name(n)) = cur.peek() {
                    // A label starts the next constraint; do not swallow it.
                    if cur.peek_at(1) == Some(&Token::Colon) {
                        return Err(cur.err("dangling coefficient before label"));
                    }
                    let id = b.var(n, line)?;
                    cur.next();
                    expr.add_term(id, sign * v);
                } else {
                    expr.add_constant(sign * v);
                }
                sign = 1.0;
                expect_term = false;
            }
            Some(Token::Name(n)) => {
                if !expect_term {
                    break;
                }
                if cur.peek_at(1) == Some(&Token::Colon) {
                    break;
                }
                let id = b.var(n, cur.line())?;
                cur.next();
                expr.add_term(id, sign);
                sign = 1.0;
                expect_term = false;
            }
            Some(Token::Colon) => return Err(cur.err("unexpected `:`")),
        }
    }
    if expect_term && !expr.is_empty() {
        return Err(cur.err("expression ends with an operator"));
    }
    Ok(expr)
}

fn parse_signed_number(cur: &mut Cursor) -> Result<f64, LpParseError> {
    let mut sign = 1.0;
    loop {
        match cur.next() {
            Some(Token::Plus) => {}
            Some(Token::Minus) => sign = -sign,
            Some(Token::Number(v)) => return Ok(sign * v),
            _ => return Err(cur.err("expected a number")),
        }
    }
}

fn finite(v: f64, cur: &Cursor) -> Result<f64, LpParseError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(cur.err("infinite value where a finite one is required"))
    }
}

/// Parses CPLEX-LP text into a problem. Variables are created in order of
/// first appearance; unspecified bounds default to `[0, +inf)`.
pub fn parse_lp(text: &str) -> Result<MilpProblem, LpParseError> {
    let mut sections: Vec<(Section, Vec<(Token, usize)>)> = Vec::new();
    let mut sense = None;
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.split('\\').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if let Some((sec, s)) = section_keyword(line) {
            if sec == Section::Objective {
                if sense.is_some() {
                    return Err(LpParseError {
                        line: line_no,
                        message: "second objective section".into(),
                    });
                }
                sense = s;
            }
            sections.push((sec, Vec::new()));
            if sec == Section::End {
                break;
            }
            continue;
        }
        let Some((_, toks)) = sections.last_mut() else {
            return Err(LpParseError {
                line: line_no,
                message: "content before the objective section".into(),
            });
        };
        tokenize(line, line_no, toks)?;
    }
    let Some(sense) = sense else {
        return Err(LpParseError {
            line: last_line.max(1),
            message: "missing Minimize/Maximize section".into(),
        });
    };
    if sections.first().map(|(s, _)| *s) != Some(Section::Objective) {
        return Err(LpParseError {
            line: 1,
            message: "objective section must come first".into(),
        });
    }

    let mut b = Builder {
        problem: MilpProblem::new(),
        lower: Vec::new(),
        upper: Vec::new(),
        integral: Vec::new(),
        binary: Vec::new(),
        free: Vec::new(),
    };
    let mut objective = LinearExpression::new();
    let mut row = 0usize;
    for (section, toks) in &sections {
        let mut cur = Cursor {
            toks,
            pos: 0,
            last_line,
        };
        match section {
            Section::Objective => {
                parse_label(&mut cur);
                objective = parse_expression(&mut cur, &mut b)?;
                if cur.peek().is_some() {
                    return Err(cur.err("unexpected token in objective"));
                }
            }
            Section::Constraints => {
                while cur.peek().is_some() {
                    let label = parse_label(&mut cur);
                    let expr = parse_expression(&mut cur, &mut b)?;
                    let Some(Token::Rel(rel)) = cur.next() else {
                        return Err(cur.err("constraint without relation"));
                    };
                    let rhs = finite(parse_signed_number(&mut cur)?, &cur)?;
                    row += 1;
                    let name = label.unwrap_or_else(|| format!("R{row}"));
                    let line = cur.line();
                    b.problem
                        .add_constraint(&name, expr, *rel, rhs)
                        .map_err(|e| LpParseError {
                            line,
                            message: e.to_string(),
                        })?;
                }
            }
            Section::Bounds => parse_bounds(&mut cur, &mut b)?,
            Section::Generals | Section::Binaries => {
                while let Some(tok) = cur.next() {
                    let Token::Name(n) = tok else {
                        return Err(cur.err("expected a variable name"));
                    };
                    let id = b.var(n, cur.line())?;
                    b.integral[id.0] = true;
                    if *section == Section::Binaries {
                        b.binary[id.0] = true;
                    }
                }
            }
            Section::End => {}
        }
    }

    let n = b.problem.num_variables();
    for i in 0..n {
        let id = VariableId(i);
        let (lo, up) = if b.free[i] {
            (
                b.lower[i].unwrap_or(f64::NEG_INFINITY),
                b.upper[i].unwrap_or(f64::INFINITY),
            )
        } else if b.binary[i] {
            (b.lower[i].unwrap_or(0.0), b.upper[i].unwrap_or(1.0))
        } else {
            (b.lower[i].unwrap_or(0.0), b.upper[i].unwrap_or(f64::INFINITY))
        };
        b.problem.set_bounds(id, lo, up).map_err(|e| LpParseError {
            line: last_line,
            message: e.to_string(),
        })?;
        if b.integral[i] {
            b.problem.set_integral(id, true);
        }
    }
    b.problem
        .set_objective(objective, sense)
        .map_err(|e| LpParseError {
            line: 1,
            message: e.to_string(),
        })?;
    Ok(b.problem)
}

fn parse_bounds(cur: &mut Cursor, b: &mut Builder) -> Result<(), LpParseError> {
    while cur.peek().is_some() {
        // forms: `x free`, `x rel v`, `v rel x`, `v rel x rel w`
        match (cur.peek(), cur.peek_at(1)) {
            (Some(Token::Name(n)), Some(Token::Name(kw))) if kw.eq_ignore_ascii_case("free") => {
                let id = b.var(n, cur.line())?;
                cur.pos += 2;
                b.free[id.0] = true;
                b.lower[id.0] = None;
                b.upper[id.0] = None;
            }
            (Some(Token::Name(n)), Some(Token::Rel(rel))) => {
                let id = b.var(n, cur.line())?;
                let rel = *rel;
                cur.pos += 2;
                let v = parse_signed_number(cur)?;
                apply_bound(b, id, rel, v, cur)?;
            }
            _ => {
                let v = parse_signed_number(cur)?;
                let Some(Token::Rel(rel)) = cur.next() else {
                    return Err(cur.err("expected relation in bound"));
                };
                let rel = *rel;
                let Some(Token::Name(n)) = cur.next() else {
                    return Err(cur.err("expected variable in bound"));
                };
                let id = b.var(n, cur.line())?;
                // `v <= x` is `x >= v`
                let flipped = match rel {
                    Relation::LessEqual => Relation::GreaterEqual,
                    Relation::GreaterEqual => Relation::LessEqual,
                    Relation::Equal => Relation::Equal,
                };
                apply_bound(b, id, flipped, v, cur)?;
                if let Some(Token::Rel(rel2)) = cur.peek() {
                    let rel2 = *rel2;
                    cur.next();
                    let w = parse_signed_number(cur)?;
                    apply_bound(b, id, rel2, w, cur)?;
                }
            }
        }
    }
    Ok(())
}

fn apply_bound(b: &mut Builder, id: VariableId, rel: Relation, v: f64, cur: &Cursor) -> Result<(), LpParseError> {
    if v.is_nan() {
        return Err(cur.err("NaN bound"));
    }
    match rel {
        Relation::LessEqual => b.upper[id.0] = Some(v),
        Relation::GreaterEqual => b.lower[id.0] = Some(v),
        Relation::Equal => {
            let v = finite(v, cur)?;
            b.lower[id.0] = Some(v);
            b.upper[id.0] = Some(v);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_problem() {
        let text = write_lp(&MilpProblem::new());
        assert!(text.contains("Minimize"));
        assert!(text.contains("obj: 0"));
        assert!(text.ends_with("End\n"));
    }

    #[test]
    fn bounded_variable_line() {
        let mut p = MilpProblem::new();
        let x = p.add_continuous("x", 0.0, 5.0).unwrap();
        p.set_objective(x.into(), Sense::Minimize).unwrap();
        let text = write_lp(&p);
        assert!(text.contains(" 0 <= x <= 5\n"), "{text}");
        assert!(text.contains(" obj: 1 x\n"));
    }

    #[test]
    fn integer_sections() {
        let mut p = MilpProblem::new();
        p.add_binary("u").unwrap();
        p.add_variable("n", 0.0, 9.0, true).unwrap();
        let text = write_lp(&p);
        assert!(text.contains("Binaries\n u\n"));
        assert!(text.contains("Generals\n n\n"));
    }

    #[test]
    fn long_rows_wrap_and_parse_back() {
        let mut p = MilpProblem::new();
        let mut e = LinearExpression::new();
        for i in 0..60 {
            let v = p.add_continuous(&format!("flow/var/{i}"), -1.0, 1.0).unwrap();
            e.add_term(v, 1.0 + i as f64 / 7.0);
        }
        p.add_constraint("big", e.clone(), Relation::GreaterEqual, -3.25).unwrap();
        p.set_objective(e.with_constant(-2.5), Sense::Maximize).unwrap();
        let text = write_lp(&p);
        assert!(text.lines().all(|l| l.len() <= MAX_LINE + 40));
        let back = parse_lp(&text).unwrap();
        assert_eq!(write_lp(&back), text);
    }

    #[test]
    fn parses_foreign_spellings() {
        let text = "\\ comment\nmaximize\n 3x + 2 y\nst\n c1: x + y <= 4\n -x >= -2\nbounds\n y <= 10\n z free\n-3 <= w\nend\n";
        let p = parse_lp(text).unwrap();
        assert_eq!(p.sense(), Sense::Maximize);
        assert_eq!(p.num_constraints(), 2);
        let z = p.variable_by_name("z").unwrap();
        assert_eq!(p.variable(z).lower, f64::NEG_INFINITY);
        let w = p.variable_by_name("w").unwrap();
        assert_eq!(p.variable(w).lower, -3.0);
        assert_eq!(p.variable(w).upper, f64::INFINITY);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_lp("").is_err());
        assert!(parse_lp("Subject To\n x <= 1\nEnd").is_err());
        assert!(parse_lp("Minimize\n obj: x\nSubject To\n c: x + <= 1\nEnd").is_err());
        assert!(parse_lp("Minimize\n obj: x\nSubject To\n c: x <= inf\nEnd").is_err());
        let err = parse_lp("Minimize\n obj: x *\nEnd").unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn number_formatting_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-20, 12345678901234.5, 2.5e300, -7.0] {
            let s = format_number(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_number(-0.0), "0");
    }
}
