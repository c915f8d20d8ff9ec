//! Typological language family trees.
//!
//! A [`LanguageTree`] is an immutable hierarchy whose root is the universal
//! ("world") node, whose interior nodes are language families and whose
//! leaves are languages. The transformations in this module never mutate a
//! tree in place; each returns a freshly indexed tree.
//!
//! Node ids are derived from the path of slugged names from the root, e.g.
//! `world/indo-european/germanic/en`, so that parameter registries keyed by
//! node id are reproducible across runs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("malformed tree file at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("language `{0}` appears more than once in the tree")]
    DuplicateLanguage(String),
    #[error("node id `{0}` is not unique (sibling families with the same name?)")]
    DuplicateId(String),
    #[error("tree node with an empty name")]
    EmptyName,
    #[error("the root node must be a family with at least one child")]
    RootIsLanguage,
    #[error("unknown language `{0}`")]
    UnknownLanguage(String),
    #[error("depth limit must be at least 1, got {0}")]
    InvalidDepth(usize),
}

/// One node of the tree. Leaves (no children) are languages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyNode {
    pub id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<FamilyNode>,
    #[serde(default)]
    pub is_language: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duplicate_of: Option<String>,
}

impl FamilyNode {
    pub fn language(name: impl Into<String>) -> Self {
        let name = name.into();
        FamilyNode {
            id: slug(&name),
            name,
            children: Vec::new(),
            is_language: true,
            duplicate_of: None,
        }
    }

    pub fn family(name: impl Into<String>, children: Vec<FamilyNode>) -> Self {
        let name = name.into();
        FamilyNode {
            id: slug(&name),
            is_language: children.is_empty(),
            name,
            children,
            duplicate_of: None,
        }
    }

    /// Number of languages at or below this node.
    pub fn language_count(&self) -> usize {
        if self.is_language {
            1
        } else {
            self.children.iter().map(FamilyNode::language_count).sum()
        }
    }

    /// Languages below this node in depth-first order.
    pub fn languages(&self) -> Vec<&FamilyNode> {
        let mut out = Vec::new();
        self.collect_languages(&mut out);
        out
    }

    fn collect_languages<'a>(&'a self, out: &mut Vec<&'a FamilyNode>) {
        if self.is_language {
            out.push(self);
        } else {
            for c in &self.children {
                c.collect_languages(out);
            }
        }
    }

    fn node_count(&self) -> usize {
        1 + self.children.iter().map(FamilyNode::node_count).sum::<usize>()
    }

    fn segment(&self) -> &str {
        self.id.rsplit('/').next().unwrap_or(&self.id)
    }
}

/// Summary of a language's position in the tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageEntry {
    pub leaf_id: String,
    /// Family ids from the root-most family down to the direct parent,
    /// excluding the root.
    pub chain: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageTree {
    root: FamilyNode,
    languages: BTreeMap<String, LanguageEntry>,
    family_depth: BTreeMap<String, usize>,
}

#[derive(Deserialize)]
struct RawNode {
    name: String,
    #[serde(default)]
    children: Vec<RawNode>,
}

impl RawNode {
    fn into_node(self) -> FamilyNode {
        let children: Vec<FamilyNode> = self.children.into_iter().map(RawNode::into_node).collect();
        FamilyNode::family(self.name, children)
    }
}

/// Parses a tree file: a JSON object `{"name": .., "children": [..]}` per
/// node, where a node without children is a language.
pub fn parse_tree(text: &str) -> Result<LanguageTree, TreeError> {
    let raw: RawNode = serde_json::from_str(text).map_err(|e| TreeError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    LanguageTree::from_root(raw.into_node())
}

impl LanguageTree {
    /// Validates `root`, recomputes path-based ids and builds the indexes.
    pub fn from_root(mut root: FamilyNode) -> Result<Self, TreeError> {
        if root.children.is_empty() {
            return Err(TreeError::RootIsLanguage);
        }
        normalize(&mut root)?;
        let root_id = root.segment().to_string();
        root.id = root_id.clone();
        reassign_ids(&mut root, None);
        Self::index(root)
    }

    fn index(root: FamilyNode) -> Result<Self, TreeError> {
        let mut languages = BTreeMap::new();
        let mut family_depth = BTreeMap::new();
        let mut ids = BTreeSet::new();
        let mut stack: Vec<(&FamilyNode, Vec<String>)> = vec![(&root, Vec::new())];
        while let Some((node, chain)) = stack.pop() {
            if !ids.insert(node.id.clone()) {
                return Err(TreeError::DuplicateId(node.id.clone()));
            }
            if node.is_language {
                let entry = LanguageEntry {
                    leaf_id: node.id.clone(),
                    chain: chain.clone(),
                };
                if languages.insert(node.name.clone(), entry).is_some() {
                    return Err(TreeError::DuplicateLanguage(node.name.clone()));
                }
            } else {
                let depth = if node.id == root.id { 0 } else { chain.len() + 1 };
                family_depth.insert(node.id.clone(), depth);
                let mut next = chain.clone();
                if node.id != root.id {
                    next.push(node.id.clone());
                }
                for child in node.children.iter().rev() {
                    stack.push((child, next.clone()));
                }
            }
        }
        Ok(LanguageTree {
            root,
            languages,
            family_depth,
        })
    }

    /// Rebuilds the indexes of a structurally valid tree produced by one of
    /// the transformations below.
    fn rebuilt(mut root: FamilyNode) -> Self {
        reassign_ids(&mut root, None);
        Self::index(root).expect("tree transformations preserve id and name uniqueness")
    }

    pub fn root(&self) -> &FamilyNode {
        &self.root
    }

    pub fn node_count(&self) -> usize {
        self.root.node_count()
    }

    /// Language names in sorted order.
    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.languages.keys().map(String::as_str)
    }

    pub fn language_count(&self) -> usize {
        self.languages.len()
    }

    pub fn contains(&self, language: &str) -> bool {
        self.languages.contains_key(language)
    }

    pub fn entry(&self, language: &str) -> Result<&LanguageEntry, TreeError> {
        self.languages
            .get(language)
            .ok_or_else(|| TreeError::UnknownLanguage(language.to_string()))
    }

    /// Family ids between the root and `language`, root-most first.
    pub fn family_chain(&self, language: &str) -> Result<&[String], TreeError> {
        Ok(&self.entry(language)?.chain)
    }

    /// Distance of a node from the root (root = 0). Languages sit one below
    /// their parent family.
    pub fn depth_of(&self, id: &str) -> Option<usize> {
        if let Some(d) = self.family_depth.get(id) {
            return Some(*d);
        }
        self.languages
            .values()
            .find(|e| e.leaf_id == id)
            .map(|e| e.chain.len() + 1)
    }

    /// Longest family chain over all languages.
    pub fn max_chain_len(&self) -> usize {
        self.languages.values().map(|e| e.chain.len()).max().unwrap_or(0)
    }

    /// True when every language has exactly `d` families above it.
    pub fn is_uniform(&self, d: usize) -> bool {
        self.languages.values().all(|e| e.chain.len() == d)
    }

    pub fn find(&self, id: &str) -> Option<&FamilyNode> {
        fn go<'a>(n: &'a FamilyNode, id: &str) -> Option<&'a FamilyNode> {
            if n.id == id {
                return Some(n);
            }
            n.children.iter().find_map(|c| go(c, id))
        }
        go(&self.root, id)
    }

    /// Serializes to the tree file format (extra `id`/`duplicate_of` fields
    /// are ignored by [`parse_tree`]).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.root).expect("tree serializes")
    }

    /// Indented human-readable rendering.
    pub fn render(&self) -> String {
        fn go(n: &FamilyNode, depth: usize, out: &mut String) {
            let marker = if n.is_language { "- " } else { "+ " };
            let _ = write!(out, "{}{}{}", "  ".repeat(depth), marker, n.name);
            if let Some(orig) = &n.duplicate_of {
                let _ = write!(out, "  (copy of {orig})");
            }
            out.push('\n');
            for c in &n.children {
                go(c, depth + 1, out);
            }
        }
        let mut out = String::new();
        go(&self.root, 0, &mut out);
        out
    }
}

fn normalize(node: &mut FamilyNode) -> Result<(), TreeError> {
    if node.name.trim().is_empty() {
        return Err(TreeError::EmptyName);
    }
    node.is_language = node.children.is_empty();
    if node.duplicate_of.is_none() || node.id.is_empty() {
        node.id = slug(&node.name);
    }
    for c in &mut node.children {
        normalize(c)?;
    }
    Ok(())
}

fn reassign_ids(node: &mut FamilyNode, parent: Option<&str>) {
    if let Some(p) = parent {
        node.id = format!("{p}/{}", node.segment());
    }
    let id = node.id.clone();
    for c in &mut node.children {
        reassign_ids(c, Some(&id));
    }
}

/// Lower-cases a name and replaces whitespace and `/` with `-`.
pub fn slug(name: &str) -> String {
    name.trim()
        .chars()
        .map(|c| if c.is_whitespace() || c == '/' { '-' } else { c.to_ascii_lowercase() })
        .collect()
}

/// Removes every non-root family covering exactly as many languages as its
/// parent, splicing its children into the parent, until nothing changes.
pub fn prune_redundant_families(tree: &LanguageTree) -> LanguageTree {
    fn prune(node: &FamilyNode) -> FamilyNode {
        let own = node.language_count();
        let mut children = Vec::with_capacity(node.children.len());
        for child in &node.children {
            if child.is_language {
                children.push(child.clone());
                continue;
            }
            let pruned = prune(child);
            if pruned.language_count() == own {
                children.extend(pruned.children);
            } else {
                children.push(pruned);
            }
        }
        FamilyNode {
            children,
            ..node.clone()
        }
    }
    LanguageTree::rebuilt(prune(&tree.root))
}

/// Keeps only the `depth` families closest to the root on every chain;
/// languages below a truncated family reattach to its ancestor at `depth`.
pub fn limit_depth(tree: &LanguageTree, depth: usize) -> Result<LanguageTree, TreeError> {
    if depth == 0 {
        return Err(TreeError::InvalidDepth(depth));
    }
    fn limit(node: &FamilyNode, level: usize, max: usize) -> FamilyNode {
        let children = if level == max {
            node.languages().into_iter().cloned().collect()
        } else {
            node.children
                .iter()
                .map(|c| if c.is_language { c.clone() } else { limit(c, level + 1, max) })
                .collect()
        };
        FamilyNode {
            children,
            ..node.clone()
        }
    }
    Ok(LanguageTree::rebuilt(limit(&tree.root, 0, depth)))
}

/// Pads every language's family chain to exactly `depth` families by
/// inserting per-language clones of its deepest family. A language sitting
/// directly under the root first receives an implicit singleton family.
pub fn duplicate_leaves(tree: &LanguageTree, depth: usize) -> Result<LanguageTree, TreeError> {
    if depth == 0 {
        return Err(TreeError::InvalidDepth(depth));
    }
    fn pad(node: &FamilyNode, level: usize, max: usize) -> FamilyNode {
        let mut children = Vec::with_capacity(node.children.len());
        for child in &node.children {
            if !child.is_language {
                children.push(pad(child, level + 1, max));
                continue;
            }
            // `level` families sit above `child` (the root is level 0).
            if level >= max {
                children.push(child.clone());
                continue;
            }
            let lang = slug(&child.name);
            let (template_name, template_id, mut have, mut wrapped) = if level == 0 {
                let name = format!("{}~family", child.name);
                let implicit = FamilyNode {
                    id: slug(&name),
                    name: name.clone(),
                    children: Vec::new(),
                    is_language: false,
                    duplicate_of: None,
                };
                let implicit_id = format!("{}/{}", node.id, implicit.id);
                (name, implicit_id, 1, Some(implicit))
            } else {
                (node.name.clone(), node.id.clone(), level, None)
            };
            // Clones ordered root-most first; the leaf hangs off the last.
            let mut clones = Vec::new();
            let mut k = 1;
            while have < max {
                clones.push(FamilyNode {
                    id: format!("{}@{}#{}", slug(&template_name), lang, k),
                    name: template_name.clone(),
                    children: Vec::new(),
                    is_language: false,
                    duplicate_of: Some(template_id.clone()),
                });
                have += 1;
                k += 1;
            }
            let mut current = child.clone();
            while let Some(mut c) = clones.pop() {
                c.children = vec![current];
                current = c;
            }
            if let Some(mut implicit) = wrapped.take() {
                implicit.children = vec![current];
                current = implicit;
            }
            children.push(current);
        }
        FamilyNode {
            children,
            ..node.clone()
        }
    }
    Ok(LanguageTree::rebuilt(pad(&tree.root, 0, depth)))
}

/// Redundancy pruning, depth limiting and leaf duplication for a model with
/// `layers` encoder (and decoder) layers: the tree ends up with exactly
/// `layers - 2` families above every language.
pub fn preprocess(tree: &LanguageTree, layers: usize) -> Result<LanguageTree, TreeError> {
    if layers < 3 {
        return Err(TreeError::InvalidDepth(layers.saturating_sub(2)));
    }
    let d = layers - 2;
    let pruned = prune_redundant_families(tree);
    let limited = limit_depth(&pruned, d)?;
    duplicate_leaves(&limited, d)
}

/// Number of ancestor families (excluding the root) shared by two languages.
pub fn similarity(tree: &LanguageTree, a: &str, b: &str) -> Result<usize, TreeError> {
    let ca = tree.family_chain(a)?;
    let cb = tree.family_chain(b)?;
    Ok(ca.iter().zip(cb).take_while(|(x, y)| x == y).count())
}

/// The six-language tree used throughout the documentation: Germanic and
/// Italic under Indo-European, plus Uralic.
pub const SAMPLE_TREE_JSON: &str = include_str!("../data/sample_tree.json");

pub fn sample_tree() -> LanguageTree {
    parse_tree(SAMPLE_TREE_JSON).expect("bundled sample tree parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(n: &str) -> FamilyNode {
        FamilyNode::language(n)
    }

    fn fam(n: &str, c: Vec<FamilyNode>) -> FamilyNode {
        FamilyNode::family(n, c)
    }

    #[test]
    fn sample_tree_shape() {
        let t = sample_tree();
        assert_eq!(t.node_count(), 11);
        assert_eq!(t.language_count(), 6);
        assert_eq!(
            t.family_chain("en").unwrap(),
            ["world/indo-european", "world/indo-european/germanic"]
        );
        assert_eq!(t.family_chain("fi").unwrap(), ["world/uralic"]);
        assert_eq!(t.depth_of("world/uralic"), Some(1));
        assert_eq!(t.depth_of("world/uralic/fi"), Some(2));
    }

    #[test]
    fn single_language_tree() {
        let t = parse_tree(r#"{"name": "world", "children": [{"name": "xx"}]}"#).unwrap();
        assert_eq!(t.node_count(), 2);
        assert_eq!(t.language_count(), 1);
    }

    #[test]
    fn duplicate_language_rejected() {
        let text = r#"{"name":"world","children":[{"name":"A","children":[{"name":"x"}]},{"name":"B","children":[{"name":"x"}]}]}"#;
        assert_eq!(parse_tree(text), Err(TreeError::DuplicateLanguage("x".into())));
    }

    #[test]
    fn malformed_reports_position() {
        let err = parse_tree("{\n  \"name\": \"world\",\n  \"children\": [\n").unwrap_err();
        match err {
            TreeError::Parse { line, .. } => assert!(line >= 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn root_must_have_children() {
        assert_eq!(parse_tree(r#"{"name":"world"}"#), Err(TreeError::RootIsLanguage));
    }

    #[test]
    fn prune_spanish_chain() {
        let root = fam(
            "world",
            vec![
                fam("Italic", vec![fam("Central Iberian", vec![fam("Castilian", vec![leaf("es")])])]),
                fam("Uralic", vec![leaf("fi"), leaf("hu")]),
            ],
        );
        let p = prune_redundant_families(&LanguageTree::from_root(root).unwrap());
        assert_eq!(p.family_chain("es").unwrap(), ["world/italic"]);
        assert_eq!(p.entry("es").unwrap().leaf_id, "world/italic/es");
        assert_eq!(p.family_chain("fi").unwrap(), ["world/uralic"]);
    }

    #[test]
    fn prune_keeps_family_smaller_than_parent() {
        // Central Iberian covers one language, Italic two: only Castilian goes.
        let root = fam(
            "world",
            vec![
                fam(
                    "Italic",
                    vec![fam("Central Iberian", vec![fam("Castilian", vec![leaf("es")])]), leaf("pt")],
                ),
                leaf("fi"),
            ],
        );
        let p = prune_redundant_families(&LanguageTree::from_root(root).unwrap());
        assert_eq!(p.family_chain("es").unwrap(), ["world/italic", "world/italic/central-iberian"]);
    }

    #[test]
    fn single_top_family_is_redundant() {
        let root = fam("world", vec![fam("Italic", vec![leaf("es"), leaf("pt")])]);
        let p = prune_redundant_families(&LanguageTree::from_root(root).unwrap());
        assert!(p.family_chain("es").unwrap().is_empty());
    }

    #[test]
    fn prune_chain_fixpoint() {
        let root = fam("world", vec![fam("A", vec![fam("B", vec![leaf("x"), leaf("y")])])]);
        let p = prune_redundant_families(&LanguageTree::from_root(root).unwrap());
        assert_eq!(p.node_count(), 3);
        assert!(p.root().children.iter().all(|c| c.is_language));
    }

    #[test]
    fn prune_sample_is_identity() {
        let t = sample_tree();
        assert_eq!(prune_redundant_families(&t), t);
    }

    #[test]
    fn limit_examples() {
        let t = sample_tree();
        assert_eq!(limit_depth(&t, 2).unwrap(), t);
        let one = limit_depth(&t, 1).unwrap();
        assert_eq!(one.family_chain("en").unwrap(), ["world/indo-european"]);
        assert_eq!(one.family_chain("pt").unwrap(), ["world/indo-european"]);
        assert_eq!(one.find("world/indo-european").unwrap().children.len(), 4);

        let root = fam(
            "world",
            vec![fam(
                "IndoEuropean",
                vec![fam("Germanic", vec![fam("WestGermanic", vec![leaf("en")])]), leaf("hy")],
            )],
        );
        let t = LanguageTree::from_root(root).unwrap();
        let l = limit_depth(&t, 2).unwrap();
        assert_eq!(l.family_chain("en").unwrap(), ["world/indoeuropean", "world/indoeuropean/germanic"]);
        assert!(l.find("world/indoeuropean/germanic/westgermanic").is_none());
        assert!(limit_depth(&t, 0).is_err());
    }

    #[test]
    fn duplicate_uralic() {
        let t = duplicate_leaves(&sample_tree(), 2).unwrap();
        assert_eq!(t.family_chain("fi").unwrap(), ["world/uralic", "world/uralic/uralic@fi#1"]);
        assert_eq!(
            t.family_chain("en").unwrap(),
            ["world/indo-european", "world/indo-european/germanic"]
        );
        let clone = t.find("world/uralic/uralic@fi#1").unwrap();
        assert_eq!(clone.duplicate_of.as_deref(), Some("world/uralic"));
        assert!(t.is_uniform(2));
    }

    #[test]
    fn duplicate_language_under_root() {
        let t = parse_tree(r#"{"name":"world","children":[{"name":"xx"}]}"#).unwrap();
        let d = duplicate_leaves(&t, 3).unwrap();
        let chain = d.family_chain("xx").unwrap();
        assert_eq!(chain.len(), 3);
        assert_eq!(chain[0], "world/xx~family");
        for id in &chain[1..] {
            assert_eq!(d.find(id).unwrap().duplicate_of.as_deref(), Some("world/xx~family"));
        }
    }

    #[test]
    fn similarity_examples() {
        let t = sample_tree();
        assert_eq!(similarity(&t, "en", "de").unwrap(), 2);
        assert_eq!(similarity(&t, "fi", "en").unwrap(), 0);
        assert_eq!(similarity(&t, "es", "es").unwrap(), 2);
        assert_eq!(similarity(&t, "es", "en").unwrap(), 1);
        assert_eq!(similarity(&t, "fi", "hu").unwrap(), 1);
        assert_eq!(similarity(&t, "xx", "en"), Err(TreeError::UnknownLanguage("xx".into())));
    }

    #[test]
    fn preprocess_requires_three_layers() {
        assert!(preprocess(&sample_tree(), 2).is_err());
        let p = preprocess(&sample_tree(), 4).unwrap();
        assert!(p.is_uniform(2));
    }
}
