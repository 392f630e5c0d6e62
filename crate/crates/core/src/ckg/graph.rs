use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::KgError;
use crate::corpus::Article;
use crate::medner::EntityMention;
use crate::text::normalize_title;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Article,
    Author,
    Institution,
    Topic,
    MedicalEntity,
}

impl NodeKind {
    pub fn prefix(self) -> &'static str {
        match self {
            NodeKind::Article => "article",
            NodeKind::Author => "author",
            NodeKind::Institution => "institution",
            NodeKind::Topic => "topic",
            NodeKind::MedicalEntity => "entity",
        }
    }

    fn from_prefix(s: &str) -> Option<Self> {
        [
            NodeKind::Article,
            NodeKind::Author,
            NodeKind::Institution,
            NodeKind::Topic,
            NodeKind::MedicalEntity,
        ]
        .into_iter()
        .find(|k| k.prefix() == s)
    }
}

/// `kind:key`, e.g. `article:d1` or `entity:RX009`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub kind: NodeKind,
    pub key: String,
}

impl NodeId {
    pub fn new(kind: NodeKind, key: impl Into<String>) -> Self {
        Self { kind, key: key.into() }
    }

    pub fn article(doc_id: &str) -> Self {
        Self::new(NodeKind::Article, doc_id)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.prefix(), self.key)
    }
}

impl FromStr for NodeId {
    type Err = KgError;

    fn from_str(s: &str) -> Result<Self, KgError> {
        let (kind, key) = s
            .split_once(':')
            .ok_or_else(|| KgError::Parse(format!("node id `{s}` has no kind prefix")))?;
        let kind = NodeKind::from_prefix(kind).ok_or_else(|| KgError::Parse(format!("unknown node kind `{kind}`")))?;
        Ok(NodeId::new(kind, key))
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AuthoredBy,
    AffiliatedWith,
    Cites,
    HasTopic,
    Mentions,
}

impl Relation {
    pub const ALL: [Relation; 5] = [
        Relation::AuthoredBy,
        Relation::AffiliatedWith,
        Relation::Cites,
        Relation::HasTopic,
        Relation::Mentions,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::AuthoredBy => "authored_by",
            Relation::AffiliatedWith => "affiliated_with",
            Relation::Cites => "cites",
            Relation::HasTopic => "has_topic",
            Relation::Mentions => "mentions",
        }
    }

    /// Allowed (head kind, tail kind).
    pub fn signature(self) -> (NodeKind, NodeKind) {
        match self {
            Relation::AuthoredBy => (NodeKind::Article, NodeKind::Author),
            Relation::AffiliatedWith => (NodeKind::Article, NodeKind::Institution),
            Relation::Cites => (NodeKind::Article, NodeKind::Article),
            Relation::HasTopic => (NodeKind::Article, NodeKind::Topic),
            Relation::Mentions => (NodeKind::Article, NodeKind::MedicalEntity),
        }
    }
}

impl FromStr for Relation {
    type Err = KgError;

    fn from_str(s: &str) -> Result<Self, KgError> {
        Relation::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| KgError::Parse(format!("unknown relation `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: NodeId,
    pub relation: Relation,
    pub tail: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct GraphFile {
    nodes: BTreeMap<NodeId, String>,
    triples: Vec<Triple>,
}

/// Directed, typed property graph. Immutable once built; adjacency is indexed
/// both ways.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct KnowledgeGraph {
    nodes: BTreeMap<NodeId, String>,
    triples: Vec<Triple>,
    out_edges: HashMap<NodeId, Vec<(Relation, NodeId)>>,
    in_edges: HashMap<NodeId, Vec<(Relation, NodeId)>>,
}

impl TryFrom<GraphFile> for KnowledgeGraph {
    type Error = KgError;

    fn try_from(f: GraphFile) -> Result<Self, KgError> {
        KnowledgeGraph::from_parts(f.nodes, f.triples)
    }
}

impl From<KnowledgeGraph> for GraphFile {
    fn from(g: KnowledgeGraph) -> Self {
        GraphFile {
            nodes: g.nodes,
            triples: g.triples,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub dangling_citations: usize,
}

impl KnowledgeGraph {
    /// Validate and index a node/triple set. Duplicate triples are collapsed.
    pub fn from_parts(nodes: BTreeMap<NodeId, String>, triples: Vec<Triple>) -> Result<Self, KgError> {
        let unique: BTreeSet<Triple> = triples.into_iter().collect();
        let mut out_edges: HashMap<NodeId, Vec<(Relation, NodeId)>> = HashMap::new();
        let mut in_edges: HashMap<NodeId, Vec<(Relation, NodeId)>> = HashMap::new();
        for t in &unique {
            for end in [&t.head, &t.tail] {
                if !nodes.contains_key(end) {
                    return Err(KgError::DanglingEndpoint(end.to_string()));
                }
            }
            let (hk, tk) = t.relation.signature();
            if t.head.kind != hk || t.tail.kind != tk {
                return Err(KgError::RelationType {
                    relation: t.relation.as_str(),
                    head: t.head.to_string(),
                    tail: t.tail.to_string(),
                });
            }
            out_edges.entry(t.head.clone()).or_default().push((t.relation, t.tail.clone()));
            in_edges.entry(t.tail.clone()).or_default().push((t.relation, t.head.clone()));
        }
        Ok(Self {
            nodes,
            triples: unique.into_iter().collect(),
            out_edges,
            in_edges,
        })
    }

    pub fn nodes(&self) -> &BTreeMap<NodeId, String> {
        &self.nodes
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn label(&self, id: &NodeId) -> Option<&str> {
        self.nodes.get(id).map(String::as_str)
    }

    pub fn node_count(&self, kind: NodeKind) -> usize {
        self.nodes.keys().filter(|n| n.kind == kind).count()
    }

    pub fn triple_count(&self, relation: Relation) -> usize {
        self.triples.iter().filter(|t| t.relation == relation).count()
    }

    pub fn outgoing<'a>(&'a self, id: &NodeId, relation: Relation) -> impl Iterator<Item = &'a NodeId> + 'a {
        self.out_edges
            .get(id)
            .into_iter()
            .flatten()
            .filter(move |(r, _)| *r == relation)
            .map(|(_, n)| n)
    }

    pub fn incoming<'a>(&'a self, id: &NodeId, relation: Relation) -> impl Iterator<Item = &'a NodeId> + 'a {
        self.in_edges
            .get(id)
            .into_iter()
            .flatten()
            .filter(move |(r, _)| *r == relation)
            .map(|(_, n)| n)
    }

    /// Triples TSV: `head_kind:head_id \t relation \t tail_kind:tail_id`.
    pub fn to_triples_tsv(&self) -> String {
        let mut s = String::new();
        for t in &self.triples {
            s.push_str(&format!("{}\t{}\t{}\n", t.head, t.relation.as_str(), t.tail));
        }
        s
    }

    /// Import a triples TSV. Node labels are not part of the format, so each
    /// imported node is labelled with its key.
    pub fn from_triples_tsv(content: &str) -> Result<Self, KgError> {
        let mut nodes = BTreeMap::new();
        let mut triples = Vec::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(KgError::Parse(format!("triples line {}: expected 3 columns", i + 1)));
            }
            let head: NodeId = cols[0].parse()?;
            let tail: NodeId = cols[2].parse()?;
            for n in [&head, &tail] {
                nodes.entry(n.clone()).or_insert_with(|| n.key.clone());
            }
            triples.push(Triple {
                head,
                relation: cols[1].parse()?,
                tail,
            });
        }
        Self::from_parts(nodes, triples)
    }
}

/// Author and institution identity key.
pub fn normalize_name(name: &str) -> String {
    normalize_title(name)
}

/// Build the graph: one Article node per document, other nodes created on
/// first reference. Citations to documents outside `articles` are skipped and
/// counted.
pub fn build_graph(
    articles: &[Article],
    mentions: &BTreeMap<String, Vec<EntityMention>>,
    topic_labels: &BTreeMap<String, BTreeSet<String>>,
) -> (KnowledgeGraph, BuildStats) {
    let mut nodes: BTreeMap<NodeId, String> = BTreeMap::new();
    let mut triples = Vec::new();
    let mut stats = BuildStats::default();

    let mut sorted: Vec<&Article> = articles.iter().collect();
    sorted.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    for a in &sorted {
        nodes.insert(NodeId::article(&a.doc_id), a.title.clone());
    }

    for a in &sorted {
        let head = NodeId::article(&a.doc_id);
        let mut link = |relation, kind, key: String, label: &str| {
            if key.is_empty() {
                return;
            }
            let tail = NodeId::new(kind, key);
            nodes.entry(tail.clone()).or_insert_with(|| label.to_string());
            triples.push(Triple {
                head: head.clone(),
                relation,
                tail,
            });
        };
        for author in &a.authors {
            link(Relation::AuthoredBy, NodeKind::Author, normalize_name(author), author);
        }
        for inst in &a.institutions {
            link(Relation::AffiliatedWith, NodeKind::Institution, normalize_name(inst), inst);
        }
        if let Some(topics) = topic_labels.get(&a.doc_id) {
            for t in topics {
                link(Relation::HasTopic, NodeKind::Topic, t.clone(), t);
            }
        }
        if let Some(ms) = mentions.get(&a.doc_id) {
            for m in ms {
                link(
                    Relation::Mentions,
                    NodeKind::MedicalEntity,
                    m.canonical_id.clone(),
                    &m.text.to_lowercase(),
                );
            }
        }
        for cited in &a.cited_doc_ids {
            let tail = NodeId::article(cited);
            if cited != &a.doc_id && nodes.contains_key(&tail) {
                triples.push(Triple {
                    head: head.clone(),
                    relation: Relation::Cites,
                    tail,
                });
            } else {
                stats.dangling_citations += 1;
            }
        }
    }
    let graph = KnowledgeGraph::from_parts(nodes, triples).expect("construction respects the relation table");
    (graph, stats)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationNeighbors {
    pub cites: Vec<String>,
    pub cited_by: Vec<String>,
}

impl KnowledgeGraph {
    pub fn citation_neighbors(&self, doc_id: &str) -> Result<CitationNeighbors, KgError> {
        let id = NodeId::article(doc_id);
        if !self.contains(&id) {
            return Err(KgError::NotFound(doc_id.to_string()));
        }
        let mut cites: Vec<String> = self.outgoing(&id, Relation::Cites).map(|n| n.key.clone()).collect();
        let mut cited_by: Vec<String> = self.incoming(&id, Relation::Cites).map(|n| n.key.clone()).collect();
        cites.sort();
        cited_by.sort();
        Ok(CitationNeighbors { cites, cited_by })
    }

    /// Number of Article nodes linked to the given author or institution node.
    pub fn publication_count(&self, node: &NodeId) -> usize {
        let relation = match node.kind {
            NodeKind::Author => Relation::AuthoredBy,
            NodeKind::Institution => Relation::AffiliatedWith,
            _ => return 0,
        };
        self.incoming(node, relation).count()
    }

    /// Stable re-sort of `results` by the maximum publication count among
    /// each document's authors (or institutions). Unknown documents count 0.
    pub fn rank_by_publication_count(&self, results: &[String], by: PublicationKey) -> Vec<String> {
        let relation = match by {
            PublicationKey::Author => Relation::AuthoredBy,
            PublicationKey::Institution => Relation::AffiliatedWith,
        };
        let mut keyed: Vec<(usize, &String)> = results
            .iter()
            .map(|d| {
                let best = self
                    .outgoing(&NodeId::article(d), relation)
                    .map(|n| self.publication_count(n))
                    .max()
                    .unwrap_or(0);
                (best, d)
            })
            .collect();
        keyed.sort_by_key(|k| std::cmp::Reverse(k.0));
        keyed.into_iter().map(|(_, d)| d.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PublicationKey {
    Author,
    Institution,
}

impl FromStr for PublicationKey {
    type Err = KgError;

    fn from_str(s: &str) -> Result<Self, KgError> {
        match s {
            "author" => Ok(PublicationKey::Author),
            "institution" => Ok(PublicationKey::Institution),
            other => Err(KgError::Parse(format!("expected author or institution, got `{other}`"))),
        }
    }
}
