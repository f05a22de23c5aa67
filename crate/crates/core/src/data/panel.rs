use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered list of measured protein markers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ProteinPanel {
    names: Vec<String>,
    #[serde(skip)]
    lookup: HashMap<String, usize>,
}

impl ProteinPanel {
    /// Names are trimmed; empty or repeated names are rejected.
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out = Vec::new();
        let mut lookup = HashMap::new();
        for raw in names {
            let name = raw.as_ref().trim();
            if name.is_empty() {
                return Err(Error::Integrity(
                    "panel contains an empty protein name".into(),
                ));
            }
            if lookup.insert(name.to_string(), out.len()).is_some() {
                return Err(Error::Integrity(format!(
                    "duplicate protein `{name}` in panel"
                )));
            }
            out.push(name.to_string());
        }
        if out.is_empty() {
            return Err(Error::Empty("protein panel".into()));
        }
        Ok(Self { names: out, lookup })
    }

    /// Reads one protein name per line; blank lines and `#` comments are skipped.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn to_text(&self) -> String {
        let mut s = self.names.join("\n");
        s.push('\n');
        s
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.lookup.get(name).copied()
    }
}

impl TryFrom<Vec<String>> for ProteinPanel {
    type Error = Error;

    fn try_from(v: Vec<String>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProteinPanel> for Vec<String> {
    fn from(p: ProteinPanel) -> Self {
        p.names
    }
}
