//! Text format for source models.
//!
//! One symbol per line, `<token> <numerator>/<denominator>`, in base order.
//! `#` starts a comment. Tokens may use the escapes `\s` (space), `\t`,
//! `\n` and `\\`; `\#` gives a literal `#`.

use drsc_core::{Rational, SourceModel};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PmfError {
    #[error("line {line}: {detail}")]
    Line { line: usize, detail: String },
    #[error("{0}")]
    Model(#[from] drsc_core::Error),
}

fn line_err(line: usize, detail: impl Into<String>) -> PmfError {
    PmfError::Line { line, detail: detail.into() }
}

pub fn unescape_token(raw: &str) -> Result<String, String> {
    let mut out = String::new();
    let mut chars = raw.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('s') => out.push(' '),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('\\') => out.push('\\'),
            Some('#') => out.push('#'),
            Some(other) => return Err(format!("unknown escape \\{other}")),
            None => return Err("dangling backslash".to_string()),
        }
    }
    Ok(out)
}

pub fn escape_token(token: &str) -> String {
    let mut out = String::new();
    for c in token.chars() {
        match c {
            ' ' => out.push_str("\\s"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\\' => out.push_str("\\\\"),
            '#' => out.push_str("\\#"),
            c => out.push(c),
        }
    }
    out
}

/// Strips a trailing comment; an escaped `\#` does not start one.
fn strip_comment(line: &str) -> &str {
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            '\\' => escaped = !escaped,
            '#' if !escaped => return &line[..i],
            _ => escaped = false,
        }
    }
    line
}

pub fn parse_pmf(text: &str) -> Result<SourceModel, PmfError> {
    let mut tokens = Vec::new();
    let mut pmf = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = strip_comment(raw).trim();
        if body.is_empty() {
            continue;
        }
        let mut fields = body.split_whitespace();
        let (Some(tok), Some(prob), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(line_err(line, "expected `<token> <numerator>/<denominator>`"));
        };
        let tok = unescape_token(tok).map_err(|e| line_err(line, e))?;
        let prob: Rational = prob.parse().map_err(|e: drsc_core::Error| line_err(line, e.to_string()))?;
        if tokens.contains(&tok) {
            return Err(line_err(line, format!("duplicate token {:?}", tok)));
        }
        tokens.push(tok);
        pmf.push(prob);
    }
    Ok(SourceModel::with_tokens(pmf, tokens)?)
}

pub fn format_pmf(model: &SourceModel) -> String {
    let mut out = String::new();
    for (tok, p) in model.tokens().iter().zip(model.pmf()) {
        out.push_str(&format!("{} {}/{}\n", escape_token(tok), p.numer(), p.denom()));
    }
    out
}

/// Probabilities as `a/b,c/d,...` for logs and CSV comments.
pub fn pmf_summary(model: &SourceModel) -> String {
    model.pmf().iter().map(|p| format!("{}/{}", p.numer(), p.denom())).collect::<Vec<_>>().join(",")
}

/// Whether every token is a single character, as `--chars` mode needs.
pub fn single_char_tokens(model: &SourceModel) -> bool {
    model.tokens().iter().all(|t| t.chars().count() == 1)
}
