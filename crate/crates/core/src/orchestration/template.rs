//! Minimal `{placeholder}` substitution for prompt templates.
//!
//! A placeholder is `{` + identifier (`[A-Za-z_][A-Za-z0-9_]*`) + `}`; any
//! other brace sequence is literal text, so JSON examples inside templates
//! pass through untouched. Placeholders must come from the operation's
//! allowed set, and an operation can demand that certain placeholders be
//! present.

use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("unknown placeholder {{{0}}}")]
    UnknownPlaceholder(String),
    #[error("template is missing required placeholder {{{0}}}")]
    MissingPlaceholder(String),
}

fn placeholder_at(text: &str, open: usize) -> Option<(String, usize)> {
    let rest = &text[open + 1..];
    let close = rest.find('}')?;
    let name = &rest[..close];
    let mut chars = name.chars();
    let first = chars.next()?;
    if !(first.is_ascii_alphabetic() || first == '_') {
        return None;
    }
    if !chars.all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return None;
    }
    Some((name.to_string(), open + 1 + close + 1))
}

/// All placeholder names appearing in a template.
pub fn placeholders(template: &str) -> Vec<String> {
    let mut found = Vec::new();
    let mut i = 0;
    while let Some(offset) = template[i..].find('{') {
        let open = i + offset;
        match placeholder_at(template, open) {
            Some((name, end)) => {
                if !found.contains(&name) {
                    found.push(name);
                }
                i = end;
            }
            None => i = open + 1,
        }
    }
    found
}

/// Substitute placeholders from `values`, enforcing the allowed set and the
/// required set.
pub fn render(
    template: &str,
    required: &[&str],
    values: &BTreeMap<&str, String>,
) -> Result<String, TemplateError> {
    for name in required {
        if !placeholders(template).iter().any(|p| p == name) {
            return Err(TemplateError::MissingPlaceholder(name.to_string()));
        }
    }

    let mut out = String::with_capacity(template.len());
    let mut i = 0;
    while let Some(offset) = template[i..].find('{') {
        let open = i + offset;
        out.push_str(&template[i..open]);
        match placeholder_at(template, open) {
            Some((name, end)) => {
                match values.get(name.as_str()) {
                    Some(value) => out.push_str(value),
                    None => return Err(TemplateError::UnknownPlaceholder(name)),
                }
                i = end;
            }
            None => {
                out.push('{');
                i = open + 1;
            }
        }
    }
    out.push_str(&template[i..]);
    Ok(out)
}
