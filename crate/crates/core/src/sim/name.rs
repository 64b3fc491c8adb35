//! Hierarchical names and their compact in-simulator keys.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Name {
    components: Vec<String>,
}

impl Name {
    pub fn new<I, S>(components: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let components: Vec<String> = components.into_iter().map(Into::into).collect();
        if components.is_empty() {
            return Err(Error::Parse("name needs at least one component".into()));
        }
        if components.iter().any(|c| c.is_empty() || c.contains('/')) {
            return Err(Error::Parse("name components must be non-empty and slash-free".into()));
        }
        Ok(Name { components })
    }

    pub fn components(&self) -> &[String] {
        &self.components
    }

    pub fn prefix(&self) -> &str {
        &self.components[0]
    }
}

impl FromStr for Name {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let rest = s
            .strip_prefix('/')
            .ok_or_else(|| Error::Parse(format!("name {s:?} must start with '/'")))?;
        Name::new(rest.split('/'))
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.components {
            write!(f, "/{c}")?;
        }
        Ok(())
    }
}

/// Two-component name `/<prefix>/<id>` packed as `prefix << 40 | id`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContentKey(pub u64);

const ID_BITS: u32 = 40;
const ID_MASK: u64 = (1 << ID_BITS) - 1;

impl ContentKey {
    pub fn new(prefix: u16, id: u64) -> Self {
        debug_assert!(id <= ID_MASK);
        ContentKey(((prefix as u64) << ID_BITS) | id)
    }

    pub fn prefix(self) -> u16 {
        (self.0 >> ID_BITS) as u16
    }

    pub fn id(self) -> u64 {
        self.0 & ID_MASK
    }
}

/// Prefix ids to their textual first components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixTable {
    prefixes: Vec<String>,
}

impl PrefixTable {
    /// `prefixes` are given with their leading slash, e.g. `/yahoo.com`.
    pub fn new(prefixes: &[String]) -> Result<Self> {
        if prefixes.is_empty() {
            return Err(Error::config("at least one name prefix is required"));
        }
        for (i, p) in prefixes.iter().enumerate() {
            let parsed: Name = p.parse()?;
            if parsed.components().len() != 1 {
                return Err(Error::config(format!("prefix {p:?} must be a single component")));
            }
            if prefixes[..i].contains(p) {
                return Err(Error::config(format!("duplicate prefix {p:?}")));
            }
        }
        Ok(PrefixTable {
            prefixes: prefixes.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.prefixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prefixes.is_empty()
    }

    pub fn id(&self, prefix: &str) -> Option<u16> {
        self.prefixes.iter().position(|p| p == prefix).map(|i| i as u16)
    }

    pub fn prefix(&self, id: u16) -> &str {
        &self.prefixes[id as usize]
    }

    /// Render `key` into `buf`, replacing its contents.
    pub fn render_into(&self, key: ContentKey, buf: &mut String) {
        use std::fmt::Write;
        buf.clear();
        let _ = write!(buf, "{}/{}", self.prefix(key.prefix()), key.id());
    }

    pub fn render(&self, key: ContentKey) -> String {
        let mut s = String::new();
        self.render_into(key, &mut s);
        s
    }
}
