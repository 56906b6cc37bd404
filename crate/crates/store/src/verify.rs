//! Whitelist verification of read-only queries.
//!
//! A query passes when it is a single `SELECT` statement that only names
//! the four store tables, their columns, aliases it defines itself and a
//! small set of scalar/aggregate functions, contains no mutation or DDL
//! keyword anywhere outside string literals (comments included), and
//! carries a `LIMIT` of at most [`MAX_LIMIT`]. A missing `LIMIT` is added.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::schema::{is_column, is_table};

pub const MAX_LIMIT: u64 = 1000;

const MUTATION_KEYWORDS: [&str; 14] = [
    "INSERT", "UPDATE", "DELETE", "DROP", "ALTER", "CREATE", "ATTACH", "DETACH", "PRAGMA", "REPLACE", "VACUUM",
    "REINDEX", "TRUNCATE", "UPSERT",
];

const FUNCTIONS: [&str; 9] = ["AVG", "MIN", "MAX", "COUNT", "SUM", "ROUND", "ABS", "LOWER", "UPPER"];

const SQL_KEYWORDS: [&str; 30] = [
    "SELECT", "FROM", "WHERE", "AND", "OR", "NOT", "IN", "IS", "NULL", "JOIN", "INNER", "LEFT", "OUTER", "CROSS", "ON",
    "AS", "GROUP", "BY", "ORDER", "ASC", "DESC", "LIMIT", "OFFSET", "HAVING", "DISTINCT", "BETWEEN", "LIKE", "CASE",
    "WHEN", "THEN",
];
const MORE_KEYWORDS: [&str; 3] = ["ELSE", "END", "EXISTS"];

fn is_keyword(upper: &str) -> bool {
    SQL_KEYWORDS.contains(&upper) || MORE_KEYWORDS.contains(&upper)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCode {
    Empty,
    MultipleStatements,
    NotSelect,
    Mutation,
    UnknownTable,
    UnknownColumn,
    UnknownFunction,
    LimitTooLarge,
    LimitNotLiteral,
    Unsupported,
    Lexical,
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("code serializes");
        f.write_str(s.as_str().expect("string code"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
    /// Byte range in the submitted text.
    pub span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqlVerdict {
    pub ok: bool,
    pub violations: Vec<Violation>,
    /// Non-fatal findings, such as an injected `LIMIT`.
    pub notices: Vec<String>,
    /// The statement that would run: trailing semicolons removed, `LIMIT` added if needed.
    pub sql: String,
}

impl SqlVerdict {
    pub fn into_verified(self) -> Result<VerifiedSql, SqlVerdict> {
        if self.ok {
            Ok(VerifiedSql(self.sql))
        } else {
            Err(self)
        }
    }

    pub fn summary(&self) -> String {
        self.violations.iter().map(|v| format!("{}: {}", v.code, v.message)).collect::<Vec<_>>().join("; ")
    }
}

/// SQL that passed [`verify_sql`]. Only obtainable through verification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifiedSql(String);

impl VerifiedSql {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VerifiedSql {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    QuotedIdent(String),
    Number(String),
    Str,
    Comment(String),
    Param,
    Punct(char),
    Op,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: (usize, usize),
}

fn lex(sql: &str) -> Result<Vec<Token>, Violation> {
    let b = sql.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let unterminated = |start: usize, what: &str| Violation {
        code: ViolationCode::Lexical,
        message: format!("unterminated {what}"),
        span: (start, sql.len()),
    };
    while i < b.len() {
        let c = b[i];
        let start = i;
        let tok = if c.is_ascii_whitespace() {
            i += 1;
            continue;
        } else if c == b'-' && b.get(i + 1) == Some(&b'-') {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
            Tok::Comment(sql[start..i].to_string())
        } else if c == b'/' && b.get(i + 1) == Some(&b'*') {
            match sql[i + 2..].find("*/") {
                Some(end) => i += end + 4,
                None => return Err(unterminated(start, "block comment")),
            }
            Tok::Comment(sql[start..i].to_string())
        } else if c == b'\'' {
            i += 1;
            loop {
                match b.get(i) {
                    None => return Err(unterminated(start, "string literal")),
                    Some(b'\'') if b.get(i + 1) == Some(&b'\'') => i += 2,
                    Some(b'\'') => {
                        i += 1;
                        break;
                    }
                    Some(_) => i += 1,
                }
            }
            Tok::Str
        } else if c == b'"' || c == b'`' || c == b'[' {
            let close = match c {
                b'[' => b']',
                other => other,
            };
            i += 1;
            let body_start = i;
            while i < b.len() && b[i] != close {
                i += 1;
            }
            if i >= b.len() {
                return Err(unterminated(start, "quoted identifier"));
            }
            i += 1;
            Tok::QuotedIdent(sql[body_start..i - 1].to_string())
        } else if c.is_ascii_alphabetic() || c == b'_' || c >= 0x80 {
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'$' || b[i] >= 0x80) {
                i += 1;
            }
            Tok::Word(sql[start..i].to_string())
        } else if c.is_ascii_digit() || (c == b'.' && b.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'.') {
                i += 1;
            }
            Tok::Number(sql[start..i].to_string())
        } else if matches!(c, b'?' | b':' | b'@' | b'$' | b'#') {
            i += 1;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            Tok::Param
        } else if matches!(c, b'(' | b')' | b',' | b'.' | b';' | b'*') {
            i += 1;
            Tok::Punct(c as char)
        } else if matches!(c, b'=' | b'<' | b'>' | b'!' | b'+' | b'-' | b'/' | b'%' | b'|' | b'&' | b'~') {
            i += 1;
            while i < b.len() && matches!(b[i], b'=' | b'<' | b'>' | b'|') {
                i += 1;
            }
            Tok::Op
        } else {
            return Err(Violation {
                code: ViolationCode::Lexical,
                message: format!("unexpected character {:?}", c as char),
                span: (start, start + 1),
            });
        };
        out.push(Token { tok, span: (start, i) });
    }
    Ok(out)
}

fn upper(s: &str) -> String {
    s.to_ascii_uppercase()
}

/// Words of a comment, so that keywords hidden there are still seen.
fn comment_words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).filter(|w| !w.is_empty()).map(upper)
}

pub fn verify_sql(sql: &str) -> SqlVerdict {
    let mut violations = Vec::new();
    let mut notices = Vec::new();
    let fail = |violations: Vec<Violation>| SqlVerdict { ok: false, violations, notices: vec![], sql: sql.to_string() };

    let tokens = match lex(sql) {
        Ok(t) => t,
        Err(v) => return fail(vec![v]),
    };

    // Mutation keywords anywhere but inside string literals.
    for t in &tokens {
        let words: Vec<String> = match &t.tok {
            Tok::Word(w) | Tok::QuotedIdent(w) => vec![upper(w)],
            Tok::Comment(c) => comment_words(c).collect(),
            _ => vec![],
        };
        for w in words {
            if MUTATION_KEYWORDS.contains(&w.as_str()) {
                violations.push(Violation {
                    code: ViolationCode::Mutation,
                    message: format!("mutation or DDL keyword {w}"),
                    span: t.span,
                });
            }
        }
    }

    let code: Vec<&Token> = tokens.iter().filter(|t| !matches!(t.tok, Tok::Comment(_))).collect();
    let mut statements: Vec<Vec<&Token>> = vec![vec![]];
    for t in &code {
        if t.tok == Tok::Punct(';') {
            statements.push(vec![]);
        } else {
            statements.last_mut().expect("nonempty").push(t);
        }
    }
    statements.retain(|s| !s.is_empty());
    match statements.len() {
        0 => {
            violations.push(Violation {
                code: ViolationCode::Empty,
                message: "no statement".into(),
                span: (0, sql.len()),
            });
            return fail(violations);
        }
        1 => {}
        n => violations.push(Violation {
            code: ViolationCode::MultipleStatements,
            message: format!("{n} statements; exactly one is allowed"),
            span: statements[1][0].span,
        }),
    }
    let stmt = &statements[0];
    if !matches!(&stmt[0].tok, Tok::Word(w) if upper(w) == "SELECT") {
        violations.push(Violation {
            code: ViolationCode::NotSelect,
            message: "statement must start with SELECT".into(),
            span: stmt[0].span,
        });
    }

    check_names(stmt, &mut violations);
    let limit = check_limit(stmt, &mut violations);

    // Comments before the first and after the last token are dropped.
    let mut executable = sql[stmt[0].span.0..stmt[stmt.len() - 1].span.1].to_string();
    if limit.is_none() && violations.is_empty() {
        executable.push_str(&format!(" LIMIT {MAX_LIMIT}"));
        notices.push(format!("no LIMIT given; LIMIT {MAX_LIMIT} was added"));
    }
    SqlVerdict { ok: violations.is_empty(), violations, notices, sql: executable }
}

fn word(t: &Token) -> Option<String> {
    match &t.tok {
        Tok::Word(w) => Some(upper(w)),
        _ => None,
    }
}

fn name_of(t: &Token) -> Option<&str> {
    match &t.tok {
        Tok::Word(w) | Tok::QuotedIdent(w) => Some(w.as_str()),
        _ => None,
    }
}

/// Table and column aliases introduced by the statement.
fn collect_aliases(stmt: &[&Token]) -> BTreeSet<String> {
    let mut aliases = BTreeSet::new();
    for (i, t) in stmt.iter().enumerate() {
        let Some(name) = name_of(t) else { continue };
        let prev = i.checked_sub(1).and_then(|p| word(stmt[p]));
        if prev.as_deref() == Some("AS") {
            aliases.insert(name.to_ascii_lowercase());
            continue;
        }
        // `FROM t a` / `JOIN t a`: a bare word right after a table reference.
        if i >= 2 && is_table(name_of(stmt[i - 1]).unwrap_or("")) {
            let before = word(stmt[i - 2]);
            let after_table_ref =
                matches!(before.as_deref(), Some("FROM" | "JOIN")) || stmt[i - 2].tok == Tok::Punct(',');
            if after_table_ref && word(t).is_none_or(|w| !is_keyword(&w)) {
                aliases.insert(name.to_ascii_lowercase());
            }
        }
    }
    aliases
}

fn check_names(stmt: &[&Token], violations: &mut Vec<Violation>) {
    let aliases = collect_aliases(stmt);
    for (i, t) in stmt.iter().enumerate() {
        if t.tok == Tok::Param {
            violations.push(Violation {
                code: ViolationCode::Unsupported,
                message: "bound parameters are not supported".into(),
                span: t.span,
            });
            continue;
        }
        let Some(name) = name_of(t) else { continue };
        let quoted = matches!(t.tok, Tok::QuotedIdent(_));
        let up = upper(name);
        let lower = name.to_ascii_lowercase();
        if !quoted && (is_keyword(&up) || MUTATION_KEYWORDS.contains(&up.as_str())) {
            continue;
        }
        let next_is_paren = stmt.get(i + 1).is_some_and(|n| n.tok == Tok::Punct('('));
        let prev_word = i.checked_sub(1).and_then(|p| word(stmt[p]));
        let after_dot = i >= 1 && stmt[i - 1].tok == Tok::Punct('.');
        if next_is_paren && !quoted {
            if !FUNCTIONS.contains(&up.as_str()) {
                violations.push(Violation {
                    code: ViolationCode::UnknownFunction,
                    message: format!("function {name} is not allowed"),
                    span: t.span,
                });
            }
            continue;
        }
        if matches!(prev_word.as_deref(), Some("FROM" | "JOIN")) && !after_dot {
            if !is_table(&lower) {
                violations.push(Violation {
                    code: ViolationCode::UnknownTable,
                    message: format!("unknown table {name}"),
                    span: t.span,
                });
            }
            continue;
        }
        if is_table(&lower) || aliases.contains(&lower) {
            // A qualifier must be followed by a column, checked below.
            continue;
        }
        if after_dot {
            let qualifier_tok = i.checked_sub(2).map(|q| stmt[q]);
            let qualifier = qualifier_tok.and_then(name_of).map(str::to_ascii_lowercase).unwrap_or_default();
            if !(is_table(&qualifier) || aliases.contains(&qualifier)) {
                violations.push(Violation {
                    code: ViolationCode::UnknownTable,
                    message: format!("unknown table or alias {qualifier}"),
                    span: qualifier_tok.unwrap_or(stmt[i - 1]).span,
                });
            }
        }
        if !is_column(&lower) {
            violations.push(Violation {
                code: ViolationCode::UnknownColumn,
                message: format!("unknown column {name}"),
                span: t.span,
            });
        }
    }
}

/// The top-level `LIMIT` value, if any.
fn check_limit(stmt: &[&Token], violations: &mut Vec<Violation>) -> Option<u64> {
    let mut depth = 0i32;
    let mut found = None;
    for (i, t) in stmt.iter().enumerate() {
        match t.tok {
            Tok::Punct('(') => depth += 1,
            Tok::Punct(')') => depth -= 1,
            _ => {}
        }
        if depth != 0 || word(t).as_deref() != Some("LIMIT") {
            continue;
        }
        match stmt.get(i + 1).map(|n| &n.tok) {
            Some(Tok::Number(v)) => match v.parse::<u64>() {
                Ok(n) if n <= MAX_LIMIT => found = Some(n),
                Ok(n) => {
                    violations.push(Violation {
                        code: ViolationCode::LimitTooLarge,
                        message: format!("LIMIT {n} exceeds {MAX_LIMIT}"),
                        span: stmt[i + 1].span,
                    });
                    found = Some(n);
                }
                Err(_) => {
                    violations.push(Violation {
                        code: ViolationCode::LimitNotLiteral,
                        message: format!("LIMIT {v} is not a whole number"),
                        span: stmt[i + 1].span,
                    });
                    found = Some(0);
                }
            },
            _ => {
                violations.push(Violation {
                    code: ViolationCode::LimitNotLiteral,
                    message: "LIMIT must be followed by a whole number".into(),
                    span: t.span,
                });
                found = Some(0);
            }
        }
        // `LIMIT a, b` and `LIMIT a OFFSET b` are fine; a comma form puts the count second.
        if stmt.get(i + 2).is_some_and(|n| n.tok == Tok::Punct(',')) {
            violations.push(Violation {
                code: ViolationCode::Unsupported,
                message: "use LIMIT n OFFSET m".into(),
                span: t.span,
            });
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;

    fn codes(sql: &str) -> Vec<ViolationCode> {
        verify_sql(sql).violations.into_iter().map(|v| v.code).collect()
    }

    #[test]
    fn simple_select_ok() {
        let v = verify_sql("SELECT name FROM methods LIMIT 5");
        assert!(v.ok, "{v:?}");
        assert!(v.notices.is_empty());
        assert_eq!(v.sql, "SELECT name FROM methods LIMIT 5");
    }

    #[test]
    fn drop_is_mutation() {
        assert!(codes("DROP TABLE scores").contains(&ViolationCode::Mutation));
    }

    #[test]
    fn unknown_table() {
        let c = codes("SELECT secret FROM users");
        assert!(c.contains(&ViolationCode::UnknownTable), "{c:?}");
    }

    #[test]
    fn limit_injected() {
        let v = verify_sql("select m.name from methods m;");
        assert!(v.ok);
        assert_eq!(v.sql, "select m.name from methods m LIMIT 1000");
        assert_eq!(v.notices.len(), 1);
        assert!(codes("SELECT name FROM methods LIMIT 5000").contains(&ViolationCode::LimitTooLarge));
    }

    #[test]
    fn decoys_and_hidden_keywords() {
        assert!(verify_sql("SELECT name FROM methods WHERE name = 'DROP TABLE runs' LIMIT 3").ok);
        assert!(codes("SELECT name FROM methods /* DELETE */ LIMIT 3").contains(&ViolationCode::Mutation));
        assert!(codes("SELECT name FROM methods; DELETE FROM runs").contains(&ViolationCode::MultipleStatements));
        assert!(codes("SELECT name FROM sqlite_master").contains(&ViolationCode::UnknownTable));
        assert!(codes("SELECT load_extension('x') FROM methods").contains(&ViolationCode::UnknownFunction));
        assert!(codes("SELECT name FROM methods WHERE name = 'x").contains(&ViolationCode::Lexical));
    }

    #[test]
    fn s3_query_verifies() {
        let sql = "SELECT m.name, AVG(s.value) AS v FROM scores s JOIN runs r ON s.run_id=r.run_id \
                   JOIN methods m ON r.method_id=m.method_id JOIN datasets d ON r.dataset_id=d.dataset_id \
                   WHERE s.metric='mae' AND r.status='ok' AND r.horizon>=96 AND d.n_channels>1 AND d.trend>0.6 \
                   GROUP BY m.name ORDER BY v ASC LIMIT 8";
        let v = verify_sql(sql);
        assert!(v.ok, "{:?}", v.violations);
    }
}
