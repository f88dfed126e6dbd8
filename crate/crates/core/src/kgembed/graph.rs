use std::collections::BTreeMap;
use std::path::Path;

use crate::datasets::io::{read_text, write_text};
use crate::error::{Error, Result};

/// Interned string table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Interner {
    names: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

/// Triples over interned entities and relations, plus the concept
/// (hypernym) list of each entity. The first concept is the primary one.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KnowledgeGraph {
    pub entities: Interner,
    pub relations: Interner,
    pub concepts: Interner,
    pub triples: Vec<Triple>,
    pub concept_of: Vec<Vec<usize>>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    fn entity(&mut self, name: &str) -> usize {
        let id = self.entities.intern(name);
        if self.concept_of.len() <= id {
            self.concept_of.resize(id + 1, Vec::new());
        }
        id
    }

    pub fn add_triple(&mut self, head: &str, relation: &str, tail: &str) -> Triple {
        let head = self.entity(head);
        let tail = self.entity(tail);
        let relation = self.relations.intern(relation);
        let t = Triple { head, relation, tail };
        self.triples.push(t);
        t
    }

    pub fn add_concept(&mut self, entity: &str, concept: &str) {
        let e = self.entity(entity);
        let c = self.concepts.intern(concept);
        if !self.concept_of[e].contains(&c) {
            self.concept_of[e].push(c);
        }
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn num_concepts(&self) -> usize {
        self.concepts.len()
    }

    /// First entity used in a triple that has no concept.
    pub fn missing_concept(&self) -> Option<&str> {
        self.triples
            .iter()
            .flat_map(|t| [t.head, t.tail])
            .find(|&e| self.concept_of[e].is_empty())
            .map(|e| self.entities.name(e))
    }

    pub fn relation_id(&self, name: &str) -> Result<usize> {
        self.relations
            .get(name)
            .ok_or_else(|| Error::Lookup(format!("relation `{name}`")))
    }

    pub fn entity_id(&self, name: &str) -> Result<usize> {
        self.entities
            .get(name)
            .ok_or_else(|| Error::Lookup(format!("entity `{name}`")))
    }

    pub fn concept_id(&self, name: &str) -> Result<usize> {
        self.concepts
            .get(name)
            .ok_or_else(|| Error::Lookup(format!("concept `{name}`")))
    }

    /// Parses `head<TAB>relation<TAB>tail` and `entity<TAB>concept` tables.
    pub fn parse_tsv(triples: &str, concepts: &str) -> Result<Self> {
        let mut kg = Self::new();
        for (i, line) in triples.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 || cols.iter().any(|c| c.is_empty()) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "expected `head<TAB>relation<TAB>tail`".into(),
                });
            }
            kg.add_triple(cols[0], cols[1], cols[2]);
        }
        for (i, line) in concepts.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 2 || cols.iter().any(|c| c.is_empty()) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "expected `entity<TAB>concept`".into(),
                });
            }
            kg.add_concept(cols[0], cols[1]);
        }
        Ok(kg)
    }

    pub fn load_tsv(triples: &Path, concepts: &Path) -> Result<Self> {
        Self::parse_tsv(&read_text(triples)?, &read_text(concepts)?)
    }

    pub fn triples_tsv(&self) -> String {
        let mut s = String::new();
        for t in &self.triples {
            s.push_str(self.entities.name(t.head));
            s.push('\t');
            s.push_str(self.relations.name(t.relation));
            s.push('\t');
            s.push_str(self.entities.name(t.tail));
            s.push('\n');
        }
        s
    }

    pub fn concepts_tsv(&self) -> String {
        let mut s = String::new();
        for (e, cs) in self.concept_of.iter().enumerate() {
            for &c in cs {
                s.push_str(self.entities.name(e));
                s.push('\t');
                s.push_str(self.concepts.name(c));
                s.push('\n');
            }
        }
        s
    }

    pub fn write_tsv(&self, triples: &Path, concepts: &Path) -> Result<()> {
        write_text(triples, &self.triples_tsv())?;
        write_text(concepts, &self.concepts_tsv())
    }
}
