//! Versioned prompt templates.
//!
//! Format: optional `key = value` header lines (only `version` is read),
//! then `[section]` blocks whose text runs until the next section. Lines
//! starting with `#` are comments; surrounding blank lines are trimmed.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub const DEFAULT_TEMPLATE_VERSION: &str = "v1";

const BUILTIN: &[(&str, &str)] = &[("v1", include_str!("../../templates/v1.tmpl"))];

pub const ANCHOR_MARKER: &str = "<anchor>";
pub const SPATIAL_MARKER: &str = "<spatial>";
pub const EXPRESSION_MARKER: &str = "<expression>";
pub const TASK_MARKER: &str = "<task>";
pub const CELL_MARKER: &str = "<cell>";

/// (section, marker or placeholder it must contain)
const REQUIRED: &[(&str, Option<&str>)] = &[
    ("preamble", None),
    ("anchor_header", Some(ANCHOR_MARKER)),
    ("sentence", Some("{sentence}")),
    ("spatial_header", Some(SPATIAL_MARKER)),
    ("expression_header", Some(EXPRESSION_MARKER)),
    ("relation_near", None),
    ("relation_far", None),
    ("relation_similar", None),
    ("relation_dissimilar", None),
    ("task_cell_type", Some(TASK_MARKER)),
    ("task_status", Some(TASK_MARKER)),
    ("task_multi", Some(TASK_MARKER)),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    version: String,
    sections: BTreeMap<String, String>,
}

impl Template {
    /// One of the templates shipped with the library.
    pub fn builtin(version: &str) -> Result<Self> {
        let (_, text) = BUILTIN
            .iter()
            .find(|(v, _)| *v == version)
            .ok_or_else(|| Error::Template(format!("no built-in template `{version}`")))?;
        Self::parse(text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut version = None;
        let mut sections: BTreeMap<String, String> = BTreeMap::new();
        let mut current: Option<(String, Vec<&str>)> = None;
        let flush = |cur: Option<(String, Vec<&str>)>,
                     sections: &mut BTreeMap<String, String>|
         -> Result<()> {
            if let Some((name, lines)) = cur {
                let body = lines.join("\n").trim_matches('\n').to_string();
                if sections.insert(name.clone(), body).is_some() {
                    return Err(Error::Template(format!("section `{name}` defined twice")));
                }
            }
            Ok(())
        };
        for line in text.lines() {
            if line.starts_with('#') {
                continue;
            }
            let trimmed = line.trim();
            if trimmed.starts_with('[') && trimmed.ends_with(']') {
                flush(current.take(), &mut sections)?;
                current = Some((trimmed[1..trimmed.len() - 1].trim().to_string(), Vec::new()));
            } else if let Some((_, lines)) = current.as_mut() {
                lines.push(line.trim_end());
            } else if let Some((k, v)) = trimmed.split_once('=') {
                if k.trim() == "version" {
                    version = Some(v.trim().to_string());
                }
            } else if !trimmed.is_empty() {
                return Err(Error::Template(format!(
                    "unexpected line before first section: `{trimmed}`"
                )));
            }
        }
        flush(current.take(), &mut sections)?;

        let version =
            version.ok_or_else(|| Error::Template("missing `version = ...` header".into()))?;
        for (name, needle) in REQUIRED {
            let body = sections
                .get(*name)
                .ok_or_else(|| Error::Template(format!("missing section `{name}`")))?;
            if body.is_empty() {
                return Err(Error::Template(format!("section `{name}` is empty")));
            }
            if let Some(n) = needle {
                if !body.contains(n) {
                    return Err(Error::Template(format!(
                        "section `{name}` must contain `{n}`"
                    )));
                }
            }
        }
        Ok(Self { version, sections })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn section(&self, name: &str) -> &str {
        self.sections.get(name).map(String::as_str).unwrap_or("")
    }

    pub fn sentence(&self, tokens: &str) -> String {
        self.section("sentence").replace("{sentence}", tokens)
    }

    pub fn header(&self, section: &str, relation: &str) -> String {
        self.section(section)
            .replace("{relation}", self.section(relation))
    }
}
