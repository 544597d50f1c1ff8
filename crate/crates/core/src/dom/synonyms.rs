use std::collections::BTreeMap;
use std::path::Path;

use super::tagger::Tagger;
use super::DomTree;
use crate::error::{Error, Result};

/// Surface attribute name → canonical attribute name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymDictionary {
    map: BTreeMap<String, String>,
}

impl SynonymDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a pair; the canonical form becomes a fixed point of the map.
    pub fn insert(&mut self, surface: &str, canonical: &str) -> Result<()> {
        let (surface, canonical) = (surface.trim(), canonical.trim());
        if surface.is_empty() || canonical.is_empty() {
            return Err(Error::Config("empty synonym entry".into()));
        }
        if let Some(c) = self.map.get(canonical) {
            if c != canonical {
                return Err(Error::Config(format!(
                    "`{canonical}` is canonical but already maps to `{c}`"
                )));
            }
        }
        if let Some(prev) = self.map.get(surface) {
            if prev == surface && surface != canonical {
                return Err(Error::Config(format!(
                    "`{surface}` is already a canonical name"
                )));
            }
        }
        self.map.insert(surface.to_string(), canonical.to_string());
        self.map.insert(canonical.to_string(), canonical.to_string());
        Ok(())
    }

    /// Parses `surface<TAB>canonical` lines; blank lines are skipped.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut d = Self::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (s, c) = line
                .split_once('\t')
                .ok_or_else(|| Error::Config(format!("synonym line {} lacks a tab", n + 1)))?;
            d.insert(s, c)?;
        }
        Ok(d)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_tsv(&std::fs::read_to_string(path)?)
    }

    pub fn to_tsv(&self) -> String {
        self.map
            .iter()
            .filter(|(s, c)| s != c)
            .map(|(s, c)| format!("{s}\t{c}\n"))
            .collect()
    }

    pub fn canonical(&self, surface: &str) -> Option<&str> {
        self.map.get(surface.trim()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Rewrites nodes whose whole text matches a dictionary entry to the
/// canonical name, re-tagging the tokens.
pub fn normalize_attribute_names(tree: &DomTree, dict: &SynonymDictionary, tagger: &dyn Tagger) -> DomTree {
    let mut out = tree.clone();
    if dict.is_empty() {
        return out;
    }
    out.root.visit_preorder_mut(&mut |n| {
        if n.text.is_empty() {
            return;
        }
        if let Some(c) = dict.canonical(&n.text) {
            if c != n.text {
                let (tokens, tags) = tagger.tag(c);
                n.text = c.to_string();
                n.tokens = tokens;
                n.pos_tags = tags;
            }
        }
    });
    out
}
