//! The user-interests taxonomy: a rooted is-a DAG of concepts, some of which
//! are flagged as topics, with classifier vocabulary terms attached as
//! instances.
//!
//! File format, one statement per line, `#` starts a comment:
//!
//! ```text
//! root <name>
//! concept <name> parent <name> [topic]
//! instance <term> concept <name>
//! relation <name> <conceptA> <conceptB>
//! attribute <concept> <attr-name> <value-type>
//! ```
//!
//! Repeating `concept X parent Y` with a different parent adds another is-a
//! edge, so multiple inheritance is expressible.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;

use thiserror::Error;

use crate::topics::Topic;

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("is-a cycle: {}", .cycle.join(" -> "))]
    Cycle { cycle: Vec<String> },
    #[error("line {line}: duplicate concept '{name}'")]
    DuplicateConcept { line: usize, name: String },
    #[error("line {line}: duplicate instance '{term}' (first declared on line {first_line})")]
    DuplicateInstance {
        line: usize,
        term: String,
        first_line: usize,
    },
    #[error("missing `root` statement")]
    MissingRoot,
    #[error("line {line}: concept '{concept}' names unknown parent '{parent}'")]
    UnknownParent {
        line: usize,
        concept: String,
        parent: String,
    },
    #[error("line {line}: unknown concept '{name}'")]
    UnknownConcept { line: usize, name: String },
    #[error("line {line}: '{name}' is flagged as a topic but is not a canonical topic name")]
    NonCanonicalTopic { line: usize, name: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaxonomyWarning {
    /// A topic-flagged concept that no instance rolls up to.
    TopicWithoutInstances(String),
}

impl std::fmt::Display for TaxonomyWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::TopicWithoutInstances(name) => {
                write!(f, "topic '{name}' has no instances beneath it")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Concept {
    pub name: String,
    /// Indices into [`Taxonomy::concepts`], in declaration order.
    pub parents: Vec<usize>,
    pub topic: Option<Topic>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    /// Term as written in the file.
    pub term: String,
    pub concept: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub concept: usize,
    pub name: String,
    pub value_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub name: String,
    pub from: usize,
    pub to: usize,
}

/// A validated taxonomy. Immutable once parsed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    concepts: Vec<Concept>,
    root: usize,
    instances: Vec<Instance>,
    attributes: Vec<Attribute>,
    relations: Vec<Relation>,
    children: Vec<Vec<usize>>,
    by_name: HashMap<String, usize>,
    by_term: HashMap<String, usize>,
    nearest_topic: Vec<Option<Topic>>,
}

/// Folds a classifier label or instance term to its lookup key: trimmed,
/// lowercased, underscores read as spaces, whitespace runs collapsed.
pub fn normalize_term(term: &str) -> String {
    let lowered = term.trim().to_lowercase().replace('_', " ");
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn parse_taxonomy<R: Read>(source: R) -> Result<Taxonomy, TaxonomyError> {
    let mut parser = Parser::default();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        parser.statement(i + 1, &line?)?;
    }
    parser.finish()
}

impl Taxonomy {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Taxonomy, TaxonomyError> {
        parse_taxonomy(std::fs::File::open(path)?)
    }

    pub fn parse_str(text: &str) -> Result<Taxonomy, TaxonomyError> {
        parse_taxonomy(text.as_bytes())
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn children(&self, concept: usize) -> &[usize] {
        &self.children[concept]
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn concept_index(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn topic_concepts(&self) -> impl Iterator<Item = (usize, Topic)> + '_ {
        self.concepts
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.topic.map(|t| (i, t)))
    }

    /// Nearest topic-flagged ancestor (or self) of a concept, breadth-first
    /// over parents in declaration order.
    pub fn topic_of_concept(&self, concept: usize) -> Option<Topic> {
        self.nearest_topic.get(concept).copied().flatten()
    }

    /// Topic an instance term rolls up to, or `None` when the term is not an
    /// instance or its concept has no topic ancestor.
    pub fn topic_of_instance(&self, term: &str) -> Option<Topic> {
        let instance = *self.by_term.get(&normalize_term(term))?;
        self.topic_of_concept(self.instances[instance].concept)
    }

    /// Instance terms rolling up to `topic`, in file order.
    pub fn instances_of_topic(&self, topic: Topic) -> Vec<&str> {
        self.instances
            .iter()
            .filter(|inst| self.topic_of_concept(inst.concept) == Some(topic))
            .map(|inst| inst.term.as_str())
            .collect()
    }

    /// Non-fatal findings about a validated taxonomy.
    pub fn warnings(&self) -> Vec<TaxonomyWarning> {
        let mut covered = vec![false; self.concepts.len()];
        for inst in &self.instances {
            let mut stack = vec![inst.concept];
            while let Some(c) = stack.pop() {
                if !covered[c] {
                    covered[c] = true;
                    stack.extend(&self.concepts[c].parents);
                }
            }
        }
        self.topic_concepts()
            .filter(|(i, _)| !covered[*i])
            .map(|(i, _)| TaxonomyWarning::TopicWithoutInstances(self.concepts[i].name.clone()))
            .collect()
    }

    /// Renders the taxonomy back into the text format. Parsing the output
    /// yields an equal taxonomy.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "root {}", self.concepts[self.root].name);
        for (i, concept) in self.concepts.iter().enumerate() {
            if i == self.root {
                continue;
            }
            let flag = if concept.topic.is_some() { " topic" } else { "" };
            for &p in &concept.parents {
                let _ = writeln!(
                    out,
                    "concept {} parent {}{flag}",
                    concept.name, self.concepts[p].name
                );
            }
        }
        for inst in &self.instances {
            let _ = writeln!(
                out,
                "instance {} concept {}",
                inst.term, self.concepts[inst.concept].name
            );
        }
        for attr in &self.attributes {
            let _ = writeln!(
                out,
                "attribute {} {} {}",
                self.concepts[attr.concept].name, attr.name, attr.value_type
            );
        }
        for rel in &self.relations {
            let _ = writeln!(
                out,
                "relation {} {} {}",
                rel.name, self.concepts[rel.from].name, self.concepts[rel.to].name
            );
        }
        out
    }
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    for (col, (byte, ch)) in line.char_indices().enumerate() {
        if ch.is_whitespace() {
            if let Some((b, c)) = start.take() {
                tokens.push(Token {
                    text: &line[b..byte],
                    column: c + 1,
                });
            }
        } else if start.is_none() {
            if ch == '#' {
                return tokens;
            }
            start = Some((byte, col));
        }
    }
    if let Some((b, c)) = start {
        tokens.push(Token {
            text: &line[b..],
            column: c + 1,
        });
    }
    tokens
}

struct PendingEdge {
    line: usize,
    child: usize,
    parent: String,
}

struct PendingRef {
    line: usize,
    name: String,
}

#[derive(Default)]
struct Parser {
    root: Option<usize>,
    names: Vec<String>,
    topic_flags: Vec<Option<Topic>>,
    by_name: HashMap<String, usize>,
    edges: Vec<PendingEdge>,
    instances: Vec<(String, PendingRef)>,
    instance_lines: HashMap<String, usize>,
    attributes: Vec<(PendingRef, String, String)>,
    relations: Vec<(String, PendingRef, PendingRef)>,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> TaxonomyError {
    TaxonomyError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

impl Parser {
    fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.by_name.get(name) {
            return i;
        }
        self.names.push(name.to_string());
        self.topic_flags.push(None);
        self.by_name.insert(name.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }

    fn expect_arity(line: usize, tokens: &[Token<'_>], arity: usize, usage: &str) -> Result<(), TaxonomyError> {
        if tokens.len() < arity {
            let column = tokens.last().map_or(1, |t| t.column + t.text.chars().count());
            return Err(syntax(line, column, format!("incomplete statement, expected `{usage}`")));
        }
        if tokens.len() > arity {
            return Err(syntax(
                line,
                tokens[arity].column,
                format!("unexpected token '{}', expected `{usage}`", tokens[arity].text),
            ));
        }
        Ok(())
    }

    fn expect_keyword(line: usize, token: &Token<'_>, keyword: &str) -> Result<(), TaxonomyError> {
        if token.text == keyword {
            Ok(())
        } else {
            Err(syntax(
                line,
                token.column,
                format!("expected '{keyword}', found '{}'", token.text),
            ))
        }
    }

    fn statement(&mut self, line: usize, text: &str) -> Result<(), TaxonomyError> {
        let tokens = tokenize(text);
        let Some(head) = tokens.first() else {
            return Ok(());
        };
        match head.text {
            "root" => {
                Self::expect_arity(line, &tokens, 2, "root <name>")?;
                if self.root.is_some() {
                    return Err(syntax(line, head.column, "root declared more than once"));
                }
                let name = tokens[1].text;
                if self.by_name.contains_key(name) {
                    return Err(TaxonomyError::DuplicateConcept {
                        line,
                        name: name.to_string(),
                    });
                }
                self.root = Some(self.intern(name));
            }
            "concept" => {
                let usage = "concept <name> parent <name> [topic]";
                let arity = if tokens.len() == 5 { 5 } else { 4 };
                Self::expect_arity(line, &tokens, arity, usage)?;
                Self::expect_keyword(line, &tokens[2], "parent")?;
                let name = tokens[1].text;
                let parent = tokens[3].text;
                if self.by_name.get(name).is_some_and(|&i| Some(i) == self.root) {
                    return Err(TaxonomyError::DuplicateConcept {
                        line,
                        name: name.to_string(),
                    });
                }
                let child = self.intern(name);
                if self
                    .edges
                    .iter()
                    .any(|e| e.child == child && e.parent == parent)
                {
                    return Err(TaxonomyError::DuplicateConcept {
                        line,
                        name: name.to_string(),
                    });
                }
                if arity == 5 {
                    Self::expect_keyword(line, &tokens[4], "topic")?;
                    let topic = Topic::from_name(name).map_err(|_| TaxonomyError::NonCanonicalTopic {
                        line,
                        name: name.to_string(),
                    })?;
                    self.topic_flags[child] = Some(topic);
                }
                self.edges.push(PendingEdge {
                    line,
                    child,
                    parent: parent.to_string(),
                });
            }
            "instance" => {
                Self::expect_arity(line, &tokens, 4, "instance <term> concept <name>")?;
                Self::expect_keyword(line, &tokens[2], "concept")?;
                let term = tokens[1].text;
                let key = normalize_term(term);
                if let Some(&first_line) = self.instance_lines.get(&key) {
                    return Err(TaxonomyError::DuplicateInstance {
                        line,
                        term: term.to_string(),
                        first_line,
                    });
                }
                self.instance_lines.insert(key, line);
                self.instances.push((
                    term.to_string(),
                    PendingRef {
                        line,
                        name: tokens[3].text.to_string(),
                    },
                ));
            }
            "relation" => {
                Self::expect_arity(line, &tokens, 4, "relation <name> <conceptA> <conceptB>")?;
                self.relations.push((
                    tokens[1].text.to_string(),
                    PendingRef {
                        line,
                        name: tokens[2].text.to_string(),
                    },
                    PendingRef {
                        line,
                        name: tokens[3].text.to_string(),
                    },
                ));
            }
            "attribute" => {
                Self::expect_arity(line, &tokens, 4, "attribute <concept> <attr-name> <value-type>")?;
                self.attributes.push((
                    PendingRef {
                        line,
                        name: tokens[1].text.to_string(),
                    },
                    tokens[2].text.to_string(),
                    tokens[3].text.to_string(),
                ));
            }
            other => {
                return Err(syntax(
                    line,
                    head.column,
                    format!("unknown statement '{other}'"),
                ))
            }
        }
        Ok(())
    }

    fn resolve(&self, r: &PendingRef) -> Result<usize, TaxonomyError> {
        self.by_name
            .get(&r.name)
            .copied()
            .ok_or_else(|| TaxonomyError::UnknownConcept {
                line: r.line,
                name: r.name.clone(),
            })
    }

    fn finish(self) -> Result<Taxonomy, TaxonomyError> {
        let root = self.root.ok_or(TaxonomyError::MissingRoot)?;
        let n = self.names.len();

        let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
        for edge in &self.edges {
            let parent = self.by_name.get(&edge.parent).copied().ok_or_else(|| {
                TaxonomyError::UnknownParent {
                    line: edge.line,
                    concept: self.names[edge.child].clone(),
                    parent: edge.parent.clone(),
                }
            })?;
            parents[edge.child].push(parent);
        }
        // Names only ever seen as parents were rejected above, so every
        // non-root concept has at least one parent here.
        if let Some(cycle) = find_cycle(&parents) {
            return Err(TaxonomyError::Cycle {
                cycle: cycle.into_iter().map(|i| self.names[i].clone()).collect(),
            });
        }

        let instances = self
            .instances
            .iter()
            .map(|(term, r)| {
                Ok(Instance {
                    term: term.clone(),
                    concept: self.resolve(r)?,
                })
            })
            .collect::<Result<Vec<_>, TaxonomyError>>()?;
        let attributes = self
            .attributes
            .iter()
            .map(|(r, name, value_type)| {
                Ok(Attribute {
                    concept: self.resolve(r)?,
                    name: name.clone(),
                    value_type: value_type.clone(),
                })
            })
            .collect::<Result<Vec<_>, TaxonomyError>>()?;
        let relations = self
            .relations
            .iter()
            .map(|(name, a, b)| {
                Ok(Relation {
                    name: name.clone(),
                    from: self.resolve(a)?,
                    to: self.resolve(b)?,
                })
            })
            .collect::<Result<Vec<_>, TaxonomyError>>()?;

        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (child, ps) in parents.iter().enumerate() {
            for &p in ps {
                children[p].push(child);
            }
        }
        let concepts: Vec<Concept> = self
            .names
            .iter()
            .zip(parents)
            .zip(&self.topic_flags)
            .map(|((name, parents), topic)| Concept {
                name: name.clone(),
                parents,
                topic: *topic,
            })
            .collect();
        let nearest_topic = (0..n).map(|c| nearest_topic(&concepts, c)).collect();
        let by_term = instances
            .iter()
            .enumerate()
            .map(|(i, inst)| (normalize_term(&inst.term), i))
            .collect();

        Ok(Taxonomy {
            concepts,
            root,
            instances,
            attributes,
            relations,
            children,
            by_name: self.by_name,
            by_term,
            nearest_topic,
        })
    }
}

fn nearest_topic(concepts: &[Concept], start: usize) -> Option<Topic> {
    let mut seen = vec![false; concepts.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(c) = queue.pop_front() {
        if let Some(topic) = concepts[c].topic {
            return Some(topic);
        }
        for &p in &concepts[c].parents {
            if !seen[p] {
                seen[p] = true;
                queue.push_back(p);
            }
        }
    }
    None
}

/// Returns one is-a cycle (as a closed walk child -> parent -> ... -> child)
/// if the parent relation has any.
fn find_cycle(parents: &[Vec<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut marks = vec![Mark::New; parents.len()];
    for start in 0..parents.len() {
        if marks[start] != Mark::New {
            continue;
        }
        // (node, next parent slot)
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        marks[start] = Mark::Active;
        while let Some(&mut (node, ref mut slot)) = stack.last_mut() {
            if let Some(&next) = parents[node].get(*slot) {
                *slot += 1;
                match marks[next] {
                    Mark::New => {
                        marks[next] = Mark::Active;
                        stack.push((next, 0));
                    }
                    Mark::Active => {
                        let from = stack.iter().position(|&(n, _)| n == next).unwrap();
                        let mut cycle: Vec<usize> = stack[from..].iter().map(|&(n, _)| n).collect();
                        cycle.push(next);
                        return Some(cycle);
                    }
                    Mark::Done => {}
                }
            } else {
                marks[node] = Mark::Done;
                stack.pop();
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn starter() -> Taxonomy {
        Taxonomy::from_path(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/uio-starter.taxonomy")).unwrap()
    }

    #[test]
    fn minimal_file() {
        let t = Taxonomy::parse_str("root Interest\nconcept Drink parent Interest topic\ninstance espresso concept Drink\n").unwrap();
        assert_eq!(t.concepts().len(), 2);
        assert_eq!(t.topic_concepts().count(), 1);
        assert_eq!(t.instances().len(), 1);
        assert_eq!(t.topic_of_instance("espresso"), Topic::from_name("Drink").ok());
        assert!(t.warnings().is_empty());
    }

    #[test]
    fn two_node_cycle_is_rejected() {
        let err = Taxonomy::parse_str("root R\nconcept A parent B\nconcept B parent A\n").unwrap_err();
        match err {
            TaxonomyError::Cycle { cycle } => {
                assert!(cycle.contains(&"A".to_string()) && cycle.contains(&"B".to_string()));
                assert_eq!(cycle.first(), cycle.last());
            }
            other => panic!("expected cycle, got {other}"),
        }
    }

    #[test]
    fn duplicate_instance_is_rejected() {
        let err = Taxonomy::parse_str(
            "root R\nconcept Drink parent R topic\ninstance espresso concept Drink\ninstance espresso concept Drink\n",
        )
        .unwrap_err();
        assert!(matches!(err, TaxonomyError::DuplicateInstance { line: 4, first_line: 3, .. }));
    }

    #[test]
    fn instance_duplicates_compare_normalized() {
        let err = Taxonomy::parse_str(
            "root R\nconcept Food parent R topic\ninstance ice_cream concept Food\ninstance Ice_Cream concept Food\n",
        )
        .unwrap_err();
        assert!(matches!(err, TaxonomyError::DuplicateInstance { .. }));
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(
            Taxonomy::parse_str("concept A parent B\n").unwrap_err(),
            TaxonomyError::MissingRoot
        ));
        assert!(matches!(
            Taxonomy::parse_str("root R\nconcept A parent Nowhere\n").unwrap_err(),
            TaxonomyError::UnknownParent { line: 2, .. }
        ));
        assert!(matches!(
            Taxonomy::parse_str("root R\nconcept A parent R\nconcept A parent R\n").unwrap_err(),
            TaxonomyError::DuplicateConcept { line: 3, .. }
        ));
        assert!(matches!(
            Taxonomy::parse_str("root R\nconcept R parent R\n").unwrap_err(),
            TaxonomyError::DuplicateConcept { .. }
        ));
        assert!(matches!(
            Taxonomy::parse_str("root R\ninstance x concept Missing\n").unwrap_err(),
            TaxonomyError::UnknownConcept { line: 2, .. }
        ));
        assert!(matches!(
            Taxonomy::parse_str("root R\nconcept Cooking parent R topic\n").unwrap_err(),
            TaxonomyError::NonCanonicalTopic { .. }
        ));
    }

    #[test]
    fn syntax_errors_carry_position() {
        match Taxonomy::parse_str("root R\n  concept A sibling R\n").unwrap_err() {
            TaxonomyError::Syntax { line, column, .. } => assert_eq!((line, column), (2, 13)),
            other => panic!("{other}"),
        }
        match Taxonomy::parse_str("root R\nbogus\n").unwrap_err() {
            TaxonomyError::Syntax { line, column, .. } => assert_eq!((line, column), (2, 1)),
            other => panic!("{other}"),
        }
        assert!(matches!(
            Taxonomy::parse_str("root R\nroot S\n").unwrap_err(),
            TaxonomyError::Syntax { line: 2, .. }
        ));
        assert!(matches!(
            Taxonomy::parse_str("root R\nconcept A parent R topical\n").unwrap_err(),
            TaxonomyError::Syntax { line: 2, column: 20, .. }
        ));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let t = Taxonomy::parse_str("# header\n\nroot R # trailing\n   \nconcept Food parent R topic\n").unwrap();
        assert_eq!(t.concepts().len(), 2);
    }

    #[test]
    fn worked_example_lookups() {
        let t = starter();
        let topic = |term: &str| t.topic_of_instance(term).map(Topic::name);
        assert_eq!(topic("espresso"), Some("Drink"));
        assert_eq!(topic("cup"), Some("Drink"));
        assert_eq!(topic("ladle"), Some("Drink"));
        assert_eq!(topic("dough"), Some("Food"));
        assert_eq!(topic("sandal"), Some("Fashion"));
        assert_eq!(topic("zzz_unknown"), None);
    }

    #[test]
    fn term_matching_is_loose() {
        let t = starter();
        let expected = Topic::from_name("Sport").ok();
        assert_eq!(t.topic_of_instance("soccer_ball"), expected);
        assert_eq!(t.topic_of_instance("  Soccer Ball "), expected);
        assert_eq!(t.topic_of_instance("SOCCER_BALL"), expected);
    }

    #[test]
    fn nearest_topic_ancestor_wins() {
        let t = Taxonomy::parse_str(
            "root R\n\
             concept Food parent R topic\n\
             concept Drink parent Food topic\n\
             concept HotDrink parent Drink\n\
             concept Orphan parent R\n\
             instance espresso concept HotDrink\n\
             instance pebble concept Orphan\n",
        )
        .unwrap();
        assert_eq!(t.topic_of_instance("espresso").map(Topic::name), Some("Drink"));
        assert_eq!(t.topic_of_instance("pebble"), None);
    }

    #[test]
    fn multiple_parents_break_ties_by_declaration_order() {
        let t = Taxonomy::parse_str(
            "root R\n\
             concept Sport parent R topic\n\
             concept Outdoors parent R topic\n\
             concept Hiking parent Outdoors\n\
             concept Hiking parent Sport\n\
             instance trail concept Hiking\n",
        )
        .unwrap();
        assert_eq!(t.concepts()[t.concept_index("Hiking").unwrap()].parents.len(), 2);
        assert_eq!(t.topic_of_instance("trail").map(Topic::name), Some("Outdoors"));
    }

    #[test]
    fn topic_without_instances_warns() {
        let t = Taxonomy::parse_str("root R\nconcept Food parent R topic\nconcept Drink parent R topic\ninstance tea concept Drink\n").unwrap();
        assert_eq!(t.warnings(), vec![TaxonomyWarning::TopicWithoutInstances("Food".into())]);
    }

    #[test]
    fn starter_covers_every_topic() {
        let t = starter();
        assert_eq!(t.topic_concepts().count(), 24);
        assert!(t.instances().len() >= 100);
        assert!(t.warnings().is_empty());
        for topic in Topic::all() {
            assert!(!t.instances_of_topic(topic).is_empty(), "{topic}");
        }
    }

    #[test]
    fn serialize_round_trips_rich_file() {
        let text = "root R\n\
                    concept Food parent R topic\n\
                    concept Snack parent Food\n\
                    concept Snack parent R\n\
                    instance pretzel concept Snack\n\
                    attribute Food calories float\n\
                    relation pairsWith Snack Food\n";
        let t = Taxonomy::parse_str(text).unwrap();
        assert_eq!(Taxonomy::parse_str(&t.to_text()).unwrap(), t);
        let starter = starter();
        assert_eq!(Taxonomy::parse_str(&starter.to_text()).unwrap(), starter);
    }

    /// Random DAG text: concept `c{i}` takes parents among earlier concepts.
    fn dag_strategy() -> impl Strategy<Value = (Vec<Vec<usize>>, usize, usize)> {
        (2usize..12).prop_flat_map(|n| {
            let parents = (1..n)
                .map(|i| proptest::collection::btree_set(0..i, 1..=i.min(3)).prop_map(|s| s.into_iter().collect()))
                .collect::<Vec<_>>();
            (Just(n), parents, any::<prop::sample::Index>(), any::<prop::sample::Index>())
        })
        .prop_map(|(_, rest, a, b)| {
            let mut parents: Vec<Vec<usize>> = vec![Vec::new()];
            parents.extend(rest);
            let n = parents.len();
            (parents, a.index(n), b.index(n))
        })
    }

    fn dag_text(parents: &[Vec<usize>], extra: Option<(usize, usize)>) -> String {
        let mut text = String::from("root c0\n");
        for (i, ps) in parents.iter().enumerate().skip(1) {
            for p in ps {
                let _ = writeln!(text, "concept c{i} parent c{p}");
            }
        }
        if let Some((child, parent)) = extra {
            let _ = writeln!(text, "concept c{child} parent c{parent}");
        }
        text
    }

    fn ancestors(parents: &[Vec<usize>], node: usize) -> Vec<usize> {
        let mut seen = vec![false; parents.len()];
        let mut stack = parents[node].clone();
        let mut out = Vec::new();
        while let Some(p) = stack.pop() {
            if !seen[p] {
                seen[p] = true;
                out.push(p);
                stack.extend(&parents[p]);
            }
        }
        out
    }

    proptest! {
        #[test]
        fn random_dags_parse((parents, _, _) in dag_strategy()) {
            let t = Taxonomy::parse_str(&dag_text(&parents, None)).unwrap();
            prop_assert_eq!(t.concepts().len(), parents.len());
            prop_assert_eq!(Taxonomy::parse_str(&t.to_text()).unwrap(), t);
        }

        #[test]
        fn one_back_edge_is_always_a_cycle((parents, a, b) in dag_strategy()) {
            // Pick a non-root node and one of its ancestors other than the
            // root, then make that ancestor a child of the node.
            let n = parents.len();
            let node = 1 + a % (n - 1);
            let candidates: Vec<usize> = ancestors(&parents, node).into_iter().filter(|&x| x != 0).collect();
            prop_assume!(!candidates.is_empty());
            let ancestor = candidates[b % candidates.len()];
            let err = Taxonomy::parse_str(&dag_text(&parents, Some((ancestor, node)))).unwrap_err();
            prop_assert!(matches!(err, TaxonomyError::Cycle { .. }), "{}", err);
        }
    }
}
