//! Query files: `@` directives ahead of the first clause, then the query text.

use std::path::Path;

use super::ast::{parse_query, QueryAst};
use super::eval::Combiner;
use crate::error::{Error, Result};
use crate::relations::Aggregation;

/// Options set by directives; unset fields fall back to scene defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QueryOptions {
    pub threshold: Option<f64>,
    pub aggregation: Option<Aggregation>,
    pub combiner: Option<Combiner>,
    pub per_clause_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryFile {
    pub ast: QueryAst,
    pub options: QueryOptions,
}

pub fn load_query_file(path: impl AsRef<Path>) -> Result<QueryFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_query_file(&text)
}

/// Directive lines are blanked before tokenizing so reported positions stay true.
pub fn parse_query_file(text: &str) -> Result<QueryFile> {
    let mut options = QueryOptions::default();
    let mut body = String::with_capacity(text.len());
    let mut in_body = false;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim_start();
        let column = line.len() - trimmed.len() + 1;
        if let Some(directive) = trimmed.strip_prefix('@') {
            if in_body {
                return Err(Error::Parse {
                    line: line_no,
                    column,
                    message: "directives must precede the first clause".into(),
                });
            }
            apply_directive(&mut options, directive, line_no, column)?;
            body.push('\n');
            continue;
        }
        let code = trimmed.split('#').next().unwrap_or("");
        if !code.trim().is_empty() {
            in_body = true;
        }
        body.push_str(line);
        body.push('\n');
    }
    Ok(QueryFile {
        ast: parse_query(&body)?,
        options,
    })
}

fn apply_directive(opts: &mut QueryOptions, text: &str, line: usize, column: usize) -> Result<()> {
    let err = |message: String| Error::Parse {
        line,
        column,
        message,
    };
    let text = text.split('#').next().unwrap_or("");
    let words: Vec<&str> = text.split_whitespace().collect();
    let (key, value) = match words.as_slice() {
        [k, v] => (*k, *v),
        _ => return Err(err(format!("expected '@<name> <value>', found '@{}'", text.trim()))),
    };
    let unit = || -> Result<f64> {
        value
            .parse::<f64>()
            .ok()
            .filter(|v| (0.0..=1.0).contains(v))
            .ok_or_else(|| err(format!("@{key} needs a number in [0, 1], got '{value}'")))
    };
    match key {
        "threshold" => opts.threshold = Some(unit()?),
        "per_clause_threshold" => opts.per_clause_threshold = Some(unit()?),
        "aggregation" => opts.aggregation = Some(value.parse().map_err(|e: Error| err(e.to_string()))?),
        "combiner" => opts.combiner = Some(value.parse().map_err(|e: Error| err(e.to_string()))?),
        _ => {
            return Err(err(format!(
                "unknown directive '@{key}' (known: threshold, aggregation, combiner, per_clause_threshold)"
            )))
        }
    }
    Ok(())
}
