//! Synthetic labeled HTML tables with controllable layout heterogeneity.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dom::{write_corpus, CorpusRecord, LabelRecord, SynonymDictionary};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

const SURNAMES: &[&str] = &[
    "Tanaka", "Suzuki", "Sato", "Takahashi", "Ito", "Watanabe", "Yamamoto", "Nakamura", "Kobayashi", "Kato",
    "Yoshida", "Yamada", "Sasaki", "Yamaguchi", "Matsumoto", "Inoue", "Kimura", "Hayashi", "Shimizu", "Mori",
    "Abe", "Ikeda", "Hashimoto", "Ishikawa", "Ogawa", "Fujita", "Okada", "Goto", "Hasegawa", "Murakami",
];
const GIVEN: &[&str] = &[
    "Hiroshi", "Yuki", "Akira", "Kenji", "Haruka", "Sakura", "Takeshi", "Naoko", "Daichi", "Emi", "Kaito", "Rina",
    "Sota", "Yui", "Ren", "Aoi", "Minato", "Hina", "Riku", "Mio",
];
const TOWNS: &[&str] = &[
    "Chuo", "Minami", "Kita", "Higashi", "Nishi", "Sakae", "Honcho", "Midori", "Aoba", "Hikari", "Asahi", "Kotobuki",
];
const CITIES: &[&str] = &[
    "Sendai", "Kyoto", "Nagoya", "Sapporo", "Fukuoka", "Kobe", "Osaka", "Chiba", "Niigata", "Okayama", "Kumamoto",
];
const REMARKS: &[&str] = &[
    "open", "closed", "weekdays", "renovated", "new", "temporary", "full", "waiting", "list", "only", "morning",
    "afternoon", "bus", "parking", "garden", "none",
];
const NOISE_HEADERS: &[&str] = &["Remarks", "Code", "Notes", "No."];

/// How the values of an attribute look.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueKind {
    PersonName,
    Address,
    Phone,
    Remark,
    Code,
}

impl ValueKind {
    const ALL: [ValueKind; 5] = [
        ValueKind::PersonName,
        ValueKind::Address,
        ValueKind::Phone,
        ValueKind::Remark,
        ValueKind::Code,
    ];

    fn sample(self, rng: &mut impl Rng) -> String {
        let pick = |rng: &mut dyn rand::RngCore, v: &[&str]| v[rng.gen_range(0..v.len())].to_string();
        match self {
            ValueKind::PersonName => format!("{} {}", pick(rng, SURNAMES), pick(rng, GIVEN)),
            ValueKind::Address => format!(
                "{}-{} {}, {}",
                rng.gen_range(1..30),
                rng.gen_range(1..20),
                pick(rng, TOWNS),
                pick(rng, CITIES)
            ),
            ValueKind::Phone => format!(
                "0{}-{}-{:04}",
                rng.gen_range(10..100),
                rng.gen_range(100..1000),
                rng.gen_range(0..10000)
            ),
            ValueKind::Remark => {
                let n = rng.gen_range(1..=2);
                (0..n).map(|_| pick(rng, REMARKS)).collect::<Vec<_>>().join(" ")
            }
            ValueKind::Code => format!("{}{}", ["A", "B", "C", "K"][rng.gen_range(0..4)], rng.gen_range(100..1000)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    /// Class label and canonical header text.
    pub name: String,
    /// Alternative header texts.
    pub synonyms: Vec<String>,
    pub kind: ValueKind,
}

impl Attribute {
    /// Header text for synonym choice `k` (0 = canonical name).
    pub fn header(&self, k: usize) -> &str {
        if k == 0 {
            &self.name
        } else {
            &self.synonyms[(k - 1) % self.synonyms.len().max(1)]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub attributes: Vec<Attribute>,
}

impl Default for Schema {
    fn default() -> Self {
        let attr = |name: &str, syn: &[&str], kind| Attribute {
            name: name.into(),
            synonyms: syn.iter().map(|s| s.to_string()).collect(),
            kind,
        };
        Self {
            attributes: vec![
                attr("Name", &["Full name", "Director", "Contact person"], ValueKind::PersonName),
                attr("Address", &["Location", "Street address", "Place"], ValueKind::Address),
                attr("Phone", &["Tel", "Telephone", "Phone number"], ValueKind::Phone),
            ],
        }
    }
}

impl Schema {
    pub fn names(&self) -> Vec<String> {
        self.attributes.iter().map(|a| a.name.clone()).collect()
    }

    /// Dictionary mapping every synonym to its attribute name.
    pub fn synonym_dictionary(&self) -> Result<SynonymDictionary> {
        let mut d = SynonymDictionary::new();
        for a in &self.attributes {
            for s in &a.synonyms {
                d.insert(s, &a.name)?;
            }
        }
        Ok(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// One entity per row, attributes across columns.
    Row,
    /// One entity per column, attributes down the rows.
    Column,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeaderStyle {
    Th,
    BoldTd,
    None,
}

/// A fully determined table layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub orientation: Orientation,
    /// Permutation of schema indices giving the attribute order.
    pub attribute_order: Vec<usize>,
    pub header_style: HeaderStyle,
    /// Extra attribute-like lines whose cells are labeled Other.
    pub noise: usize,
    /// Tags wrapped around every value text, outermost first.
    pub wrappers: Vec<String>,
    /// Synonym choice per schema attribute.
    pub synonyms: Vec<usize>,
    /// Use thead/tbody sections.
    pub sections: bool,
    pub entities: usize,
}

/// A named distribution over layouts; each family acts as one source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutFamily {
    pub name: String,
    /// Header styles drawn uniformly per table.
    pub header_styles: Vec<HeaderStyle>,
    pub wrappers: Vec<String>,
    pub sections: bool,
    pub max_noise: usize,
    /// Fixed synonym choice for all attributes, or random per table.
    pub synonym: Option<usize>,
    pub min_entities: usize,
    pub max_entities: usize,
}

impl LayoutFamily {
    /// The four stock families.
    pub fn defaults() -> Vec<LayoutFamily> {
        let fam = |name: &str, wrappers: &[&str], sections, max_noise, synonym| LayoutFamily {
            name: name.into(),
            header_styles: vec![HeaderStyle::Th, HeaderStyle::BoldTd],
            wrappers: wrappers.iter().map(|s| s.to_string()).collect(),
            sections,
            max_noise,
            synonym,
            min_entities: 2,
            max_entities: 4,
        };
        vec![
            fam("plain", &[], false, 1, Some(0)),
            fam("span", &["span"], false, 1, Some(1)),
            fam("sectioned", &[], true, 1, Some(2)),
            fam("decorated", &["div", "a"], false, 1, None),
        ]
    }

    pub fn sample(&self, rng: &mut impl Rng, schema: &Schema) -> LayoutSpec {
        let n = schema.attributes.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let orientation = if rng.gen_bool(0.5) {
            Orientation::Row
        } else {
            Orientation::Column
        };
        let synonyms = (0..n)
            .map(|i| match self.synonym {
                Some(k) => k,
                None => rng.gen_range(0..=schema.attributes[i].synonyms.len()),
            })
            .collect();
        LayoutSpec {
            orientation,
            attribute_order: order,
            header_style: *self
                .header_styles
                .choose(rng)
                .unwrap_or(&HeaderStyle::None),
            noise: rng.gen_range(0..=self.max_noise),
            wrappers: self.wrappers.clone(),
            synonyms,
            sections: self.sections,
            entities: rng.gen_range(self.min_entities..=self.max_entities),
        }
    }
}

/// Minimal element tree used to render HTML and compute label paths.
struct Elem {
    tag: String,
    attrs: Vec<(&'static str, &'static str)>,
    text: String,
    label: Option<String>,
    children: Vec<Elem>,
}

impl Elem {
    fn new(tag: &str) -> Self {
        Self {
            tag: tag.to_string(),
            attrs: Vec::new(),
            text: String::new(),
            label: None,
            children: Vec::new(),
        }
    }

    fn render(&self, out: &mut String) {
        let _ = write!(out, "<{}", self.tag);
        for (k, v) in &self.attrs {
            let _ = write!(out, " {k}=\"{v}\"");
        }
        out.push('>');
        out.push_str(&escape(&self.text));
        for c in &self.children {
            c.render(out);
        }
        let _ = write!(out, "</{}>", self.tag);
    }

    fn labels(&self, path: &mut Vec<usize>, out: &mut Vec<LabelRecord>) {
        if let Some(l) = &self.label {
            out.push(LabelRecord {
                node_path: path.clone(),
                class: l.clone(),
            });
        }
        for (i, c) in self.children.iter().enumerate() {
            path.push(i);
            c.labels(path, out);
            path.pop();
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// `cell_tag` holding `text`, wrapped in `wrappers`; the innermost element
/// carries the text and the label.
fn cell(cell_tag: &str, wrappers: &[String], text: String, label: Option<String>) -> Elem {
    let mut chain: Vec<Elem> = std::iter::once(Elem::new(cell_tag))
        .chain(wrappers.iter().map(|w| {
            let mut e = Elem::new(w);
            if w == "a" {
                e.attrs.push(("href", "#"));
            }
            e
        }))
        .collect();
    let mut inner = chain.pop().expect("at least the cell");
    inner.text = text;
    inner.label = label;
    while let Some(mut parent) = chain.pop() {
        parent.children.push(inner);
        inner = parent;
    }
    inner
}

fn header_cell(style: HeaderStyle, text: &str) -> Elem {
    match style {
        HeaderStyle::BoldTd => cell("td", &["b".to_string()], text.to_string(), None),
        _ => cell("th", &[], text.to_string(), None),
    }
}

/// One line (column in row-major, row in column-major) of the table.
struct Line {
    header: String,
    kind: ValueKind,
    label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedTable {
    pub html: String,
    pub labels: Vec<LabelRecord>,
}

/// Renders one table. With `structure_only`, every value cell (of any
/// attribute or noise line) is drawn from the same mixed generator.
pub fn generate_table(seed: u64, schema: &Schema, layout: &LayoutSpec, structure_only: bool) -> GeneratedTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines: Vec<Line> = layout
        .attribute_order
        .iter()
        .map(|&a| {
            let attr = &schema.attributes[a];
            let k = layout.synonyms.get(a).copied().unwrap_or(0);
            Line {
                header: attr.header(k).to_string(),
                kind: attr.kind,
                label: Some(attr.name.clone()),
            }
        })
        .collect();
    for i in 0..layout.noise {
        let at = rng.gen_range(0..=lines.len());
        lines.insert(
            at,
            Line {
                header: NOISE_HEADERS[i % NOISE_HEADERS.len()].to_string(),
                kind: [ValueKind::Remark, ValueKind::Code][i % 2],
                label: None,
            },
        );
    }
    let value = |rng: &mut ChaCha8Rng, kind: ValueKind| {
        let kind = if structure_only {
            ValueKind::ALL[rng.gen_range(0..ValueKind::ALL.len())]
        } else {
            kind
        };
        kind.sample(rng)
    };
    let has_header = layout.header_style != HeaderStyle::None;

    let mut rows: Vec<Elem> = Vec::new();
    let mut header_row = None;
    match layout.orientation {
        Orientation::Row => {
            if has_header {
                let mut tr = Elem::new("tr");
                for l in &lines {
                    tr.children.push(header_cell(layout.header_style, &l.header));
                }
                header_row = Some(tr);
            }
            for _ in 0..layout.entities {
                let mut tr = Elem::new("tr");
                for l in &lines {
                    let v = value(&mut rng, l.kind);
                    tr.children.push(cell("td", &layout.wrappers, v, l.label.clone()));
                }
                rows.push(tr);
            }
        }
        Orientation::Column => {
            for l in &lines {
                let mut tr = Elem::new("tr");
                if has_header {
                    tr.children.push(header_cell(layout.header_style, &l.header));
                }
                for _ in 0..layout.entities {
                    let v = value(&mut rng, l.kind);
                    tr.children.push(cell("td", &layout.wrappers, v, l.label.clone()));
                }
                rows.push(tr);
            }
        }
    }

    let mut table = Elem::new("table");
    if layout.sections {
        if let Some(h) = header_row {
            let mut thead = Elem::new("thead");
            thead.children.push(h);
            table.children.push(thead);
        }
        let mut tbody = Elem::new("tbody");
        tbody.children = rows;
        table.children.push(tbody);
    } else {
        table.children.extend(header_row);
        table.children.extend(rows);
    }
    let mut html = String::new();
    table.render(&mut html);
    let mut labels = Vec::new();
    table.labels(&mut Vec::new(), &mut labels);
    GeneratedTable { html, labels }
}

/// Generation settings recorded next to a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub n: usize,
    pub seed: u64,
    pub structure_only: bool,
    pub schema: Schema,
    pub families: Vec<LayoutFamily>,
}

/// `n` tables assigned round-robin to `families`; the family name is the
/// record's source.
pub fn generate_corpus(
    n: usize,
    schema: &Schema,
    families: &[LayoutFamily],
    seed: u64,
    structure_only: bool,
) -> Result<Vec<CorpusRecord>> {
    if n == 0 || families.is_empty() || schema.attributes.is_empty() {
        return Err(Error::Config("need n >= 1, a non-empty schema and at least one layout family".into()));
    }
    Ok((0..n)
        .map(|i| {
            let fam = &families[i % families.len()];
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[i as u64, 0]));
            let layout = fam.sample(&mut rng, schema);
            let t = generate_table(derive_seed(seed, &[i as u64, 1]), schema, &layout, structure_only);
            CorpusRecord {
                id: format!("{}-{i:04}", fam.name),
                html: t.html,
                labels: t.labels,
                source: fam.name.clone(),
            }
        })
        .collect())
}

/// Writes `corpus.jsonl`, `manifest.json` and `synonyms.tsv` into `dir`.
pub fn write_corpus_dir(dir: &Path, records: &[CorpusRecord], manifest: &Manifest) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_corpus(&dir.join("corpus.jsonl"), records)?;
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(manifest)?)?;
    std::fs::write(dir.join("synonyms.tsv"), manifest.schema.synonym_dictionary()?.to_tsv())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::{parse_html, RuleTagger, OTHER};

    fn layout(orientation: Orientation, style: HeaderStyle) -> LayoutSpec {
        LayoutSpec {
            orientation,
            attribute_order: vec![0, 2, 1],
            header_style: style,
            noise: 0,
            wrappers: vec![],
            synonyms: vec![0, 0, 0],
            sections: false,
            entities: 2,
        }
    }

    #[test]
    fn row_major_labels_follow_columns() {
        let t = generate_table(1, &Schema::default(), &layout(Orientation::Row, HeaderStyle::Th), false);
        let tree = parse_html(&t.html).unwrap();
        // header row first, then entity rows; column 1 is Phone
        assert_eq!(tree.root.children[0].children[1].text, "Phone");
        let find = |p: &[usize]| t.labels.iter().find(|l| l.node_path == p).map(|l| l.class.as_str());
        assert_eq!(find(&[1, 0]), Some("Name"));
        assert_eq!(find(&[1, 1]), Some("Phone"));
        assert_eq!(find(&[2, 2]), Some("Address"));
        assert_eq!(find(&[0, 0]), None);
    }

    #[test]
    fn column_major_puts_entities_in_columns() {
        let t = generate_table(1, &Schema::default(), &layout(Orientation::Column, HeaderStyle::BoldTd), false);
        let tree = parse_html(&t.html).unwrap();
        assert_eq!(tree.root.children.len(), 3);
        assert_eq!(tree.root.children[0].children[0].children[0].tag, "b");
        assert!(t.labels.iter().any(|l| l.node_path == [0, 2] && l.class == "Name"));
    }

    #[test]
    fn same_seed_same_bytes() {
        let s = Schema::default();
        let f = &LayoutFamily::defaults()[3];
        let a = generate_corpus(8, &s, std::slice::from_ref(f), 5, false).unwrap();
        let b = generate_corpus(8, &s, std::slice::from_ref(f), 5, false).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_corpus(8, &s, std::slice::from_ref(f), 6, false).unwrap());
    }

    #[test]
    fn records_parse_back_with_exact_labels() {
        let s = Schema::default();
        let recs = generate_corpus(40, &s, &LayoutFamily::defaults(), 3, false).unwrap();
        for (i, r) in recs.iter().enumerate() {
            assert_eq!(r.source, LayoutFamily::defaults()[i % 4].name);
            let t = r.to_table(&RuleTagger).unwrap();
            for a in s.names() {
                assert!(t.tree.preorder().iter().any(|n| n.gold_label.as_deref() == Some(a.as_str())));
            }
            for l in &r.labels {
                let n = t.tree.node_at(&l.node_path).unwrap();
                assert!(!n.text.is_empty() && n.children.is_empty());
            }
            let labeled = t.tree.preorder().iter().filter(|n| n.gold_label.as_deref() != Some(OTHER)).count();
            assert_eq!(labeled, r.labels.len());
        }
    }

    #[test]
    fn structure_only_values_share_one_distribution() {
        let s = Schema::default();
        let recs = generate_corpus(200, &s, &LayoutFamily::defaults(), 9, true).unwrap();
        // per-class frequency of the value kinds, recognised by surface shape
        let shape = |text: &str| -> usize {
            if text.starts_with('0') && text.matches('-').count() == 2 {
                0
            } else if text.contains(',') {
                1
            } else if text.chars().next().is_some_and(|c| c.is_ascii_uppercase()) && text.contains(' ') {
                2
            } else {
                3
            }
        };
        let mut counts = std::collections::BTreeMap::<String, [f64; 4]>::new();
        for r in &recs {
            let t = r.to_table(&RuleTagger).unwrap();
            for l in &r.labels {
                let n = t.tree.node_at(&l.node_path).unwrap();
                counts.entry(l.class.clone()).or_default()[shape(&n.text)] += 1.0;
            }
        }
        // chi-square homogeneity test across the three classes (6 dof)
        let rows: Vec<[f64; 4]> = counts.values().copied().collect();
        let total: f64 = rows.iter().flatten().sum();
        let col: Vec<f64> = (0..4).map(|j| rows.iter().map(|r| r[j]).sum()).collect();
        let mut chi2 = 0.0;
        for r in &rows {
            let rs: f64 = r.iter().sum();
            for j in 0..4 {
                let e = rs * col[j] / total;
                chi2 += (r[j] - e).powi(2) / e;
            }
        }
        // 0.999 quantile of chi-square with 6 degrees of freedom
        assert!(chi2 < 22.46, "chi2 = {chi2}");
    }

    #[test]
    fn families_differ_structurally() {
        let s = Schema::default();
        let shapes: Vec<String> = LayoutFamily::defaults()
            .iter()
            .map(|f| {
                let mut spec = f.sample(&mut ChaCha8Rng::seed_from_u64(0), &s);
                spec.orientation = Orientation::Row;
                spec.noise = 0;
                spec.attribute_order = vec![0, 1, 2];
                spec.entities = 2;
                let t = parse_html(&generate_table(0, &s, &spec, false).html).unwrap();
                let mut tags = String::new();
                t.root.visit_preorder(&mut |n| tags.push_str(&n.tag));
                tags
            })
            .collect();
        for i in 0..shapes.len() {
            for j in i + 1..shapes.len() {
                assert_ne!(shapes[i], shapes[j]);
            }
        }
    }

    #[test]
    fn corpus_directory_has_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let s = Schema::default();
        let fams = LayoutFamily::defaults();
        let recs = generate_corpus(5, &s, &fams, 1, false).unwrap();
        let m = Manifest {
            n: 5,
            seed: 1,
            structure_only: false,
            schema: s.clone(),
            families: fams,
        };
        write_corpus_dir(dir.path(), &recs, &m).unwrap();
        let d = SynonymDictionary::load(&dir.path().join("synonyms.tsv")).unwrap();
        assert_eq!(d.canonical("Tel"), Some("Phone"));
        assert_eq!(crate::dom::read_corpus(&dir.path().join("corpus.jsonl")).unwrap(), recs);
    }
}
