//! Scriptable deterministic backend for offline runs and tests.
//!
//! Script files are JSON: an ordered rule list plus a required default.
//! Each rule matches the user prompt by substring (`match`) or regex
//! (`match_regex`); the first matching rule wins and the default terminates
//! the search, so a loaded script always produces a response.
//!
//! ```json
//! {
//!   "rules": [
//!     {"match": "magnets", "response": "Think about the two poles."},
//!     {"match_regex": "^Explain", "response": "Start from the basics."}
//!   ],
//!   "default": "Let us look at the question together."
//! }
//! ```

use std::path::Path;

use regex::Regex;
use serde::Deserialize;

use super::BackendError;

#[derive(Deserialize)]
struct RuleFile {
    #[serde(rename = "match")]
    substring: Option<String>,
    match_regex: Option<String>,
    response: String,
}

#[derive(Deserialize)]
struct ScriptFile {
    rules: Vec<RuleFile>,
    default: String,
}

#[derive(Debug)]
enum Matcher {
    Substring(String),
    Pattern(Regex),
}

#[derive(Debug)]
struct Rule {
    matcher: Matcher,
    response: String,
}

/// A compiled mock script: a pure function of the user prompt.
#[derive(Debug)]
pub struct MockScript {
    rules: Vec<Rule>,
    default: String,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| BackendError::BadMockScript {
            path: display.clone(),
            message: e.to_string(),
        })?;
        Self::parse(&text, &display)
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, BackendError> {
        let fail = |message: String| BackendError::BadMockScript {
            path: origin.to_string(),
            message,
        };
        let file: ScriptFile =
            serde_json::from_str(text).map_err(|e| fail(format!("invalid JSON: {e}")))?;
        let mut rules = Vec::with_capacity(file.rules.len());
        for (i, rule) in file.rules.into_iter().enumerate() {
            let matcher = match (rule.substring, rule.match_regex) {
                (Some(s), None) => Matcher::Substring(s),
                (None, Some(pattern)) => Matcher::Pattern(
                    Regex::new(&pattern)
                        .map_err(|e| fail(format!("rule {i}: bad regex: {e}")))?,
                ),
                (Some(_), Some(_)) => {
                    return Err(fail(format!(
                        "rule {i}: use either \"match\" or \"match_regex\", not both"
                    )))
                }
                (None, None) => {
                    return Err(fail(format!(
                        "rule {i}: needs a \"match\" or \"match_regex\" field"
                    )))
                }
            };
            rules.push(Rule {
                matcher,
                response: rule.response,
            });
        }
        Ok(Self {
            rules,
            default: file.default,
        })
    }

    /// First matching rule wins; the default always terminates.
    pub fn respond(&self, user_prompt: &str) -> String {
        for rule in &self.rules {
            let hit = match &rule.matcher {
                Matcher::Substring(s) => user_prompt.contains(s.as_str()),
                Matcher::Pattern(re) => re.is_match(user_prompt),
            };
            if hit {
                return rule.response.clone();
            }
        }
        self.default.clone()
    }
}
