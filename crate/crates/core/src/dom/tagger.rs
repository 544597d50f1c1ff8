use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};

pub const WORD: &str = "WORD";
pub const NUM: &str = "NUM";
pub const PUNCT: &str = "PUNCT";

/// Splits text into tokens and assigns one part-of-speech symbol per token.
pub trait Tagger: Send + Sync {
    fn tag(&self, text: &str) -> (Vec<String>, Vec<String>);
}

/// Built-in tagger: alphanumeric runs are tokens, every other non-space
/// character is a token of its own. Tags are NUM (all digits), PUNCT (all
/// punctuation) or WORD.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleTagger;

impl Tagger for RuleTagger {
    fn tag(&self, text: &str) -> (Vec<String>, Vec<String>) {
        let mut tokens = Vec::new();
        let mut cur = String::new();
        for ch in text.chars() {
            if ch.is_alphanumeric() {
                cur.push(ch);
                continue;
            }
            if !cur.is_empty() {
                tokens.push(std::mem::take(&mut cur));
            }
            if !ch.is_whitespace() {
                tokens.push(ch.to_string());
            }
        }
        if !cur.is_empty() {
            tokens.push(cur);
        }
        let tags = tokens
            .iter()
            .map(|t| {
                if t.chars().all(|c| c.is_numeric()) {
                    NUM
                } else if t.chars().all(|c| !c.is_alphanumeric()) {
                    PUNCT
                } else {
                    WORD
                }
                .to_string()
            })
            .collect();
        (tokens, tags)
    }
}

/// Named tagger plugins. `rule` is always registered.
#[derive(Clone)]
pub struct TaggerRegistry {
    taggers: BTreeMap<String, Arc<dyn Tagger>>,
}

impl Default for TaggerRegistry {
    fn default() -> Self {
        let mut r = Self {
            taggers: BTreeMap::new(),
        };
        r.register("rule", Arc::new(RuleTagger));
        r
    }
}

impl std::fmt::Debug for TaggerRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.taggers.keys()).finish()
    }
}

impl TaggerRegistry {
    pub fn register(&mut self, name: &str, tagger: Arc<dyn Tagger>) {
        self.taggers.insert(name.to_string(), tagger);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Tagger>> {
        self.taggers
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownTagger(name.to_string()))
    }
}

pub fn tokenize_and_tag(text: &str, registry: &TaggerRegistry, tagger: &str) -> Result<(Vec<String>, Vec<String>)> {
    Ok(registry.get(tagger)?.tag(text))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(text: &str) -> (Vec<String>, Vec<String>) {
        tokenize_and_tag(text, &TaggerRegistry::default(), "rule").unwrap()
    }

    fn strs(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn default_rules() {
        assert_eq!(rule("Age: 12"), (strs(&["Age", ":", "12"]), strs(&[WORD, PUNCT, NUM])));
        assert_eq!(rule(""), (vec![], vec![]));
        assert_eq!(rule("492-4717"), (strs(&["492", "-", "4717"]), strs(&[NUM, PUNCT, NUM])));
        assert_eq!(rule("  a1  b "), (strs(&["a1", "b"]), strs(&[WORD, WORD])));
    }

    #[test]
    fn unknown_tagger() {
        let err = tokenize_and_tag("x", &TaggerRegistry::default(), "janome").unwrap_err();
        assert!(matches!(err, Error::UnknownTagger(n) if n == "janome"));
    }

    #[test]
    fn plugins_can_be_registered() {
        struct Upper;
        impl Tagger for Upper {
            fn tag(&self, text: &str) -> (Vec<String>, Vec<String>) {
                let t: Vec<String> = text.split_whitespace().map(str::to_uppercase).collect();
                let p = vec!["X".to_string(); t.len()];
                (t, p)
            }
        }
        let mut reg = TaggerRegistry::default();
        reg.register("upper", Arc::new(Upper));
        assert_eq!(tokenize_and_tag("a b", &reg, "upper").unwrap().0, strs(&["A", "B"]));
    }
}
