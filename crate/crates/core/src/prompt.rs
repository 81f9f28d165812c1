//! Text prompt templates with `{name}` placeholders.
//!
//! A placeholder is `{` followed by lowercase letters or underscores and a
//! closing `}`; any other brace (for example inside a JSON example) is kept
//! verbatim.

use std::path::Path;

use crate::error::{Error, Result};

pub const VAP_TEMPLATE: &str = include_str!("../prompts/vap.txt");
pub const PATHAGENT_TEMPLATE: &str = include_str!("../prompts/pathagent.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
}

fn placeholder_at(text: &str, start: usize) -> Option<(usize, &str)> {
    let rest = &text[start + 1..];
    let end = rest.find(|c: char| !(c.is_ascii_lowercase() || c == '_'))?;
    if end > 0 && rest.as_bytes()[end] == b'}' {
        Some((start + end + 2, &rest[..end]))
    } else {
        None
    }
}

impl PromptTemplate {
    /// Validates that every placeholder in `text` is one of `allowed`.
    pub fn new(text: impl Into<String>, allowed: &[&str]) -> Result<Self> {
        let t = PromptTemplate { text: text.into() };
        for name in t.placeholders() {
            if !allowed.contains(&name.as_str()) {
                return Err(Error::Template(format!("unknown placeholder {{{name}}}")));
            }
        }
        Ok(t)
    }

    pub fn load(path: &Path, allowed: &[&str]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::new(text, allowed)
    }

    pub fn placeholders(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, _) in self.text.match_indices('{') {
            if let Some((_, name)) = placeholder_at(&self.text, i) {
                if !out.iter().any(|n| n == name) {
                    out.push(name.to_string());
                }
            }
        }
        out
    }

    /// Substitutes every placeholder; a placeholder with no value is an error.
    pub fn render(&self, vars: &[(&str, &str)]) -> Result<String> {
        let mut out = String::with_capacity(self.text.len() * 2);
        let mut cursor = 0;
        for (i, _) in self.text.match_indices('{') {
            if i < cursor {
                continue;
            }
            if let Some((end, name)) = placeholder_at(&self.text, i) {
                let value = vars
                    .iter()
                    .find(|(k, _)| *k == name)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| Error::Template(format!("no value for {{{name}}}")))?;
                out.push_str(&self.text[cursor..i]);
                out.push_str(value);
                cursor = end;
            }
        }
        out.push_str(&self.text[cursor..]);
        Ok(out)
    }
}

pub const VAP_PLACEHOLDERS: &[&str] = &["instruction", "view_direction", "output_schema"];
pub const PATHAGENT_PLACEHOLDERS: &[&str] = &["instruction", "history", "candidates", "output_schema"];

pub fn default_vap() -> PromptTemplate {
    PromptTemplate::new(VAP_TEMPLATE, VAP_PLACEHOLDERS).expect("shipped template is valid")
}

pub fn default_pathagent() -> PromptTemplate {
    PromptTemplate::new(PATHAGENT_TEMPLATE, PATHAGENT_PLACEHOLDERS).expect("shipped template is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_and_keeps_json_braces() {
        let t = PromptTemplate::new("Go {where}. Reply {\"a\": 1} {where}", &["where"]).unwrap();
        assert_eq!(t.render(&[("where", "left")]).unwrap(), "Go left. Reply {\"a\": 1} left");
    }

    #[test]
    fn unknown_or_missing_placeholders_fail() {
        assert!(PromptTemplate::new("{nope}", &["yes"]).is_err());
        let t = PromptTemplate::new("{yes}", &["yes"]).unwrap();
        assert!(t.render(&[]).is_err());
    }

    #[test]
    fn shipped_templates_render_fully() {
        let vap = default_vap();
        let text = vap
            .render(&[("instruction", "I"), ("view_direction", "front"), ("output_schema", "S")])
            .unwrap();
        assert!(PromptTemplate::new(text.clone(), &[]).is_ok(), "left-over placeholder in {text}");
        let high = default_pathagent();
        let text = high
            .render(&[("instruction", "I"), ("history", "H"), ("candidates", "C"), ("output_schema", "S")])
            .unwrap();
        assert!(PromptTemplate::new(text, &[]).is_ok());
        assert_eq!(vap.placeholders().len(), 3);
        assert_eq!(high.placeholders().len(), 4);
    }
}
