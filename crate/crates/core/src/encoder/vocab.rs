use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dom::DomTree;
use crate::error::{Error, Result};

pub const UNK: &str = "<unk>";
pub const EMPTY: &str = "<empty>";

/// Dense symbol → index map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
    frozen: bool,
}

impl Vocab {
    fn with_specials(specials: &[&str]) -> Self {
        let mut v = Self {
            symbols: Vec::new(),
            index: HashMap::new(),
            frozen: false,
        };
        for s in specials {
            v.insert(s);
        }
        v
    }

    fn insert(&mut self, sym: &str) -> usize {
        if let Some(&i) = self.index.get(sym) {
            return i;
        }
        let i = self.symbols.len();
        self.symbols.push(sym.to_string());
        self.index.insert(sym.to_string(), i);
        i
    }

    fn from_symbols(symbols: &[String], specials: &[&str]) -> Result<Self> {
        for (i, s) in specials.iter().enumerate() {
            if symbols.get(i).map(String::as_str) != Some(*s) {
                return Err(Error::Config(format!("vocabulary must start with {specials:?}")));
            }
        }
        let mut v = Self::with_specials(&[]);
        for s in symbols {
            if v.index.contains_key(s) {
                return Err(Error::Config(format!("duplicate vocabulary symbol `{s}`")));
            }
            v.insert(s);
        }
        v.frozen = true;
        Ok(v)
    }

    /// Adds a symbol; frozen vocabularies reject additions.
    pub fn add(&mut self, sym: &str) -> Result<usize> {
        if self.frozen && !self.index.contains_key(sym) {
            return Err(Error::Config(format!("vocabulary is frozen; cannot add `{sym}`")));
        }
        Ok(self.insert(sym))
    }

    /// Index of `sym`, or of the unknown symbol.
    pub fn lookup(&self, sym: &str) -> usize {
        self.index.get(sym).copied().unwrap_or(0)
    }

    pub fn get(&self, sym: &str) -> Option<usize> {
        self.index.get(sym).copied()
    }

    pub fn symbol(&self, i: usize) -> Option<&str> {
        self.symbols.get(i).map(String::as_str)
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }
}

/// Tag, token and part-of-speech vocabularies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabularies {
    pub tags: Vocab,
    pub tokens: Vocab,
    pub pos: Vocab,
    pub min_count: usize,
}

/// On-disk vocabulary layout; list order defines indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabFile {
    pub tags: Vec<String>,
    pub tokens: Vec<String>,
    pub pos: Vec<String>,
    pub min_count: usize,
}

impl Vocabularies {
    /// Indexes every tag, part-of-speech symbol and sufficiently frequent
    /// token, in first-seen order. The result is frozen.
    pub fn build<'a>(trees: impl IntoIterator<Item = &'a DomTree>, min_count: usize) -> Result<Self> {
        let mut tags = Vocab::with_specials(&[UNK]);
        let mut tokens = Vocab::with_specials(&[UNK, EMPTY]);
        let mut pos = Vocab::with_specials(&[UNK, EMPTY]);
        let mut counts: HashMap<&'a str, usize> = HashMap::new();
        let mut order: Vec<&'a str> = Vec::new();
        let mut any = false;
        for tree in trees {
            any = true;
            for n in tree.preorder() {
                tags.insert(&n.tag);
                for p in &n.pos_tags {
                    pos.insert(p);
                }
                for t in &n.tokens {
                    let c = counts.entry(t.as_str()).or_insert(0);
                    if *c == 0 {
                        order.push(t.as_str());
                    }
                    *c += 1;
                }
            }
        }
        if !any {
            return Err(Error::EmptyCorpus);
        }
        for t in order {
            if counts[t] >= min_count {
                tokens.insert(t);
            }
        }
        tags.freeze();
        tokens.freeze();
        pos.freeze();
        Ok(Self {
            tags,
            tokens,
            pos,
            min_count,
        })
    }

    pub fn to_file(&self) -> VocabFile {
        VocabFile {
            tags: self.tags.symbols.clone(),
            tokens: self.tokens.symbols.clone(),
            pos: self.pos.symbols.clone(),
            min_count: self.min_count,
        }
    }

    pub fn from_file(f: &VocabFile) -> Result<Self> {
        Ok(Self {
            tags: Vocab::from_symbols(&f.tags, &[UNK])?,
            tokens: Vocab::from_symbols(&f.tokens, &[UNK, EMPTY])?,
            pos: Vocab::from_symbols(&f.pos, &[UNK, EMPTY])?,
            min_count: f.min_count,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
