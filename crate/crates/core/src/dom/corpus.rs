use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::parse::parse_html_with;
use super::tagger::Tagger;
use super::{DomTree, OTHER};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub node_path: Vec<usize>,
    pub class: String,
}

/// One line of a corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub html: String,
    pub labels: Vec<LabelRecord>,
    pub source: String,
}

/// A parsed corpus record: every node carries a gold label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTable {
    pub id: String,
    pub source: String,
    pub tree: DomTree,
}

impl CorpusRecord {
    /// Parses the HTML and attaches labels; unlabeled nodes become `Other`.
    pub fn to_table(&self, tagger: &dyn Tagger) -> Result<LabeledTable> {
        let mut tree = parse_html_with(&self.html, tagger)?;
        for l in &self.labels {
            let node = tree.node_at_mut(&l.node_path).ok_or_else(|| Error::InvalidNodePath {
                record: self.id.clone(),
                path: l.node_path.clone(),
            })?;
            node.gold_label = Some(l.class.clone());
        }
        tree.fill_missing_labels(OTHER);
        Ok(LabeledTable {
            id: self.id.clone(),
            source: self.source.clone(),
            tree,
        })
    }
}

pub fn read_corpus(path: &Path) -> Result<Vec<CorpusRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

pub fn write_corpus(path: &Path, records: &[CorpusRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::RuleTagger;
    use super::*;

    fn record() -> CorpusRecord {
        CorpusRecord {
            id: "t1".into(),
            html: "<table><tr><th>Name</th></tr><tr><td>Tanaka</td></tr></table>".into(),
            labels: vec![LabelRecord {
                node_path: vec![1, 0],
                class: "Name".into(),
            }],
            source: "site-a".into(),
        }
    }

    #[test]
    fn labels_are_attached() {
        let t = record().to_table(&RuleTagger).unwrap();
        assert_eq!(t.tree.node_at(&[1, 0]).unwrap().gold_label.as_deref(), Some("Name"));
        assert_eq!(t.tree.node_at(&[0, 0]).unwrap().gold_label.as_deref(), Some(OTHER));
        assert_eq!(t.tree.root.gold_label.as_deref(), Some(OTHER));
    }

    #[test]
    fn bad_path_is_reported() {
        let mut r = record();
        r.labels[0].node_path = vec![5];
        assert!(matches!(r.to_table(&RuleTagger), Err(Error::InvalidNodePath { .. })));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        let recs = vec![record(), CorpusRecord { id: "t2".into(), ..record() }];
        write_corpus(&p, &recs).unwrap();
        assert_eq!(read_corpus(&p).unwrap(), recs);
    }
}
