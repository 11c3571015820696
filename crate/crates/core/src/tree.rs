//! Decision trees, their structural skeletons, and prune edits.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::data::{Dataset, Example, FeatureLandscape};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("rule uses {kind} feature {feature} but only {available} exist")]
    FeatureOutOfRange {
        kind: &'static str,
        feature: usize,
        available: usize,
    },
    #[error("invalid node path `{0}`")]
    InvalidPath(String),
    #[error("node path `{0}` addresses a leaf")]
    PathIsLeaf(String),
    #[error("parse error at byte {pos}: {message}")]
    Parse { pos: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecisionRule {
    /// `x_feature <= threshold` over a real-valued feature.
    Real { feature: usize, threshold: f64 },
    /// `x_feature <= threshold` over an ordinal feature, threshold in `1..O_i`.
    Ordinal { feature: usize, threshold: u32 },
    /// `x_feature == category` over a nominal feature.
    Nominal { feature: usize, category: u32 },
}

impl DecisionRule {
    /// True sends the example to the left child.
    pub fn goes_left(&self, x: &Example) -> Result<bool, TreeError> {
        let missing = |kind, feature, available| TreeError::FeatureOutOfRange {
            kind,
            feature,
            available,
        };
        match *self {
            DecisionRule::Real { feature, threshold } => x
                .reals
                .get(feature)
                .map(|&v| v <= threshold)
                .ok_or_else(|| missing("real", feature, x.reals.len())),
            DecisionRule::Ordinal { feature, threshold } => x
                .ordinals
                .get(feature)
                .map(|&v| v <= threshold)
                .ok_or_else(|| missing("ordinal", feature, x.ordinals.len())),
            DecisionRule::Nominal { feature, category } => x
                .nominals
                .get(feature)
                .map(|&v| v == category)
                .ok_or_else(|| missing("nominal", feature, x.nominals.len())),
        }
    }

    pub fn fits(&self, ls: &FeatureLandscape) -> bool {
        match *self {
            DecisionRule::Real { feature, threshold } => feature < ls.ell && !threshold.is_nan(),
            DecisionRule::Ordinal { feature, threshold } => ls
                .ordinal
                .get(feature)
                .is_some_and(|&o| threshold >= 1 && (threshold as usize) < o),
            DecisionRule::Nominal { feature, category } => ls
                .nominal
                .get(feature)
                .is_some_and(|&n| category >= 1 && category as usize <= n),
        }
    }
}

impl fmt::Display for DecisionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecisionRule::Real { feature, threshold } => write!(f, "x{feature}<={threshold}"),
            DecisionRule::Ordinal { feature, threshold } => write!(f, "o{feature}<={threshold}"),
            DecisionRule::Nominal { feature, category } => write!(f, "n{feature}=={category}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Left,
    Right,
}

/// Address of a node as a sequence of left/right moves from the root,
/// written as a string of `L` and `R` (the root is the empty string).
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodePath(pub Vec<Direction>);

impl NodePath {
    pub fn root() -> Self {
        NodePath(Vec::new())
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn child(&self, dir: Direction) -> NodePath {
        let mut v = self.0.clone();
        v.push(dir);
        NodePath(v)
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.0 {
            f.write_str(match d {
                Direction::Left => "L",
                Direction::Right => "R",
            })?;
        }
        Ok(())
    }
}

impl FromStr for NodePath {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                'L' | 'l' => Ok(Direction::Left),
                'R' | 'r' => Ok(Direction::Right),
                _ => Err(TreeError::InvalidPath(s.to_string())),
            })
            .collect::<Result<_, _>>()
            .map(NodePath)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tree {
    Leaf { label: usize },
    Node {
        rule: DecisionRule,
        left: Box<Tree>,
        right: Box<Tree>,
    },
}

/// How the subtree at a node is replaced by [`Tree::prune_edit`].
#[derive(Debug, Clone, Copy)]
pub enum PruneEdit<'a> {
    ReplaceWithLeft,
    ReplaceWithRight,
    /// Leaf labeled by the majority class of the sample examples reaching
    /// the node.
    ReplaceWithLeaf(&'a Dataset),
}

/// Most frequent label among `labels`, smallest class index on ties.
pub fn majority_label(labels: impl IntoIterator<Item = usize>, n_classes: usize) -> Option<usize> {
    let mut counts = vec![0usize; n_classes];
    let mut any = false;
    for y in labels {
        counts[y] += 1;
        any = true;
    }
    if !any {
        return None;
    }
    let best = *counts.iter().max().unwrap();
    counts.iter().position(|&c| c == best)
}

impl Tree {
    pub fn leaf(label: usize) -> Tree {
        Tree::Leaf { label }
    }

    pub fn node(rule: DecisionRule, left: Tree, right: Tree) -> Tree {
        Tree::Node {
            rule,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Tree::Leaf { .. })
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            Tree::Leaf { .. } => 1,
            Tree::Node { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    pub fn n_internal(&self) -> usize {
        self.n_leaves() - 1
    }

    /// Edges on the longest root-to-leaf path; 0 for a leaf.
    pub fn height(&self) -> usize {
        match self {
            Tree::Leaf { .. } => 0,
            Tree::Node { left, right, .. } => 1 + left.height().max(right.height()),
        }
    }

    pub fn predict(&self, x: &Example) -> Result<usize, TreeError> {
        let mut t = self;
        loop {
            match t {
                Tree::Leaf { label } => return Ok(*label),
                Tree::Node { rule, left, right } => {
                    t = if rule.goes_left(x)? { left } else { right };
                }
            }
        }
    }

    /// Checks every rule against the landscape.
    pub fn validate(&self, ls: &FeatureLandscape) -> Result<(), TreeError> {
        match self {
            Tree::Leaf { .. } => Ok(()),
            Tree::Node { rule, left, right } => {
                if !rule.fits(ls) {
                    let (kind, feature, available) = match *rule {
                        DecisionRule::Real { feature, .. } => ("real", feature, ls.ell),
                        DecisionRule::Ordinal { feature, .. } => ("ordinal", feature, ls.omega()),
                        DecisionRule::Nominal { feature, .. } => ("nominal", feature, ls.nu()),
                    };
                    return Err(TreeError::FeatureOutOfRange {
                        kind,
                        feature,
                        available,
                    });
                }
                left.validate(ls)?;
                right.validate(ls)
            }
        }
    }

    /// Number of misclassified examples of `d`.
    pub fn errors(&self, d: &Dataset) -> Result<usize, TreeError> {
        let mut k = 0;
        for (x, &y) in d.examples.iter().zip(&d.labels) {
            if self.predict(x)? != y {
                k += 1;
            }
        }
        Ok(k)
    }

    pub fn accuracy(&self, d: &Dataset) -> Result<f64, TreeError> {
        if d.is_empty() {
            return Ok(1.0);
        }
        Ok(1.0 - self.errors(d)? as f64 / d.len() as f64)
    }

    pub fn node_at(&self, path: &NodePath) -> Result<&Tree, TreeError> {
        let mut t = self;
        for d in &path.0 {
            t = match (t, d) {
                (Tree::Node { left, .. }, Direction::Left) => left,
                (Tree::Node { right, .. }, Direction::Right) => right,
                (Tree::Leaf { .. }, _) => return Err(TreeError::InvalidPath(path.to_string())),
            };
        }
        Ok(t)
    }

    /// Paths of all internal nodes, in preorder.
    pub fn internal_paths(&self) -> Vec<NodePath> {
        fn walk(t: &Tree, p: NodePath, out: &mut Vec<NodePath>) {
            if let Tree::Node { left, right, .. } = t {
                out.push(p.clone());
                walk(left, p.child(Direction::Left), out);
                walk(right, p.child(Direction::Right), out);
            }
        }
        let mut out = Vec::new();
        walk(self, NodePath::root(), &mut out);
        out
    }

    /// Indices of the examples of `d` routed through the node at `path`.
    pub fn reaching(&self, path: &NodePath, d: &Dataset) -> Result<Vec<usize>, TreeError> {
        let mut idx: Vec<usize> = (0..d.len()).collect();
        let mut t = self;
        for dir in &path.0 {
            match t {
                Tree::Leaf { .. } => return Err(TreeError::InvalidPath(path.to_string())),
                Tree::Node { rule, left, right } => {
                    let want_left = *dir == Direction::Left;
                    let mut kept = Vec::with_capacity(idx.len());
                    for i in idx {
                        if rule.goes_left(&d.examples[i])? == want_left {
                            kept.push(i);
                        }
                    }
                    idx = kept;
                    t = if want_left { left } else { right };
                }
            }
        }
        Ok(idx)
    }

    /// Label of the leftmost leaf; used when no example reaches a node.
    pub fn first_label(&self) -> usize {
        match self {
            Tree::Leaf { label } => *label,
            Tree::Node { left, .. } => left.first_label(),
        }
    }

    /// Copy of the tree with the subtree at `path` replaced.
    pub fn replace_at(&self, path: &NodePath, subtree: Tree) -> Result<Tree, TreeError> {
        fn go(t: &Tree, dirs: &[Direction], sub: Tree, path: &NodePath) -> Result<Tree, TreeError> {
            let Some((first, rest)) = dirs.split_first() else {
                return Ok(sub);
            };
            match t {
                Tree::Leaf { .. } => Err(TreeError::InvalidPath(path.to_string())),
                Tree::Node { rule, left, right } => Ok(match first {
                    Direction::Left => Tree::node(*rule, go(left, rest, sub, path)?, (**right).clone()),
                    Direction::Right => Tree::node(*rule, (**left).clone(), go(right, rest, sub, path)?),
                }),
            }
        }
        go(self, &path.0, subtree, path)
    }

    /// Leaf label that [`PruneEdit::ReplaceWithLeaf`] would use at `path`.
    pub fn leaf_label_at(&self, path: &NodePath, d: &Dataset) -> Result<usize, TreeError> {
        let node = self.node_at(path)?;
        let idx = self.reaching(path, d)?;
        Ok(majority_label(idx.iter().map(|&i| d.labels[i]), d.n_classes)
            .unwrap_or_else(|| node.first_label()))
    }

    pub fn prune_edit(&self, path: &NodePath, edit: PruneEdit<'_>) -> Result<Tree, TreeError> {
        let (left, right) = match self.node_at(path)? {
            Tree::Leaf { .. } => return Err(TreeError::PathIsLeaf(path.to_string())),
            Tree::Node { left, right, .. } => (left, right),
        };
        let replacement = match edit {
            PruneEdit::ReplaceWithLeft => (**left).clone(),
            PruneEdit::ReplaceWithRight => (**right).clone(),
            PruneEdit::ReplaceWithLeaf(d) => Tree::leaf(self.leaf_label_at(path, d)?),
        };
        self.replace_at(path, replacement)
    }

    pub fn shape(&self) -> TreeShape {
        match self {
            Tree::Leaf { .. } => TreeShape::leaf(),
            Tree::Node { left, right, .. } => TreeShape::node(left.shape(), right.shape()),
        }
    }

    /// Replaces every internal node that no example of `d` reaches by a leaf
    /// carrying its leftmost label. Predictions on `d` are unchanged.
    pub fn collapse_dead_branches(&self, d: &Dataset) -> Result<Tree, TreeError> {
        fn go(t: &Tree, idx: &[usize], d: &Dataset) -> Result<Tree, TreeError> {
            match t {
                Tree::Leaf { .. } => Ok(t.clone()),
                Tree::Node { .. } if idx.is_empty() => Ok(Tree::leaf(t.first_label())),
                Tree::Node { rule, left, right } => {
                    let mut li = Vec::new();
                    let mut ri = Vec::new();
                    for &i in idx {
                        if rule.goes_left(&d.examples[i])? {
                            li.push(i);
                        } else {
                            ri.push(i);
                        }
                    }
                    Ok(Tree::node(*rule, go(left, &li, d)?, go(right, &ri, d)?))
                }
            }
        }
        let all: Vec<usize> = (0..d.len()).collect();
        go(self, &all, d)
    }
}

pub fn shape_of(t: &Tree) -> TreeShape {
    t.shape()
}

pub fn predict(t: &Tree, x: &Example) -> Result<usize, TreeError> {
    t.predict(x)
}

pub fn prune_edit(t: &Tree, path: &NodePath, edit: PruneEdit<'_>) -> Result<Tree, TreeError> {
    t.prune_edit(path, edit)
}

/// Caterpillar shape of the path from the root to `path`: one internal node
/// per step, each with a leaf on one side.
pub fn path_shape(t: &Tree, path: &NodePath) -> Result<TreeShape, TreeError> {
    t.node_at(path)?;
    Ok(TreeShape::caterpillar(path.depth()))
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tree::Leaf { label } => write!(f, "{label}"),
            Tree::Node { rule, left, right } => write!(f, "({rule}, {left}, {right})"),
        }
    }
}

struct Cursor<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(s: &'a str) -> Self {
        Cursor {
            s: s.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, TreeError> {
        Err(TreeError::Parse {
            pos: self.pos,
            message: message.into(),
        })
    }

    fn expect(&mut self, c: u8) -> Result<(), TreeError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{}`", c as char))
        }
    }

    fn token(&mut self, stop: &[u8]) -> &'a str {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && !stop.contains(&self.s[self.pos]) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos]).unwrap().trim()
    }

    fn finish(&mut self) -> Result<(), TreeError> {
        if self.peek().is_some() {
            self.err("trailing input")
        } else {
            Ok(())
        }
    }
}

fn parse_rule(tok: &str, cur: &Cursor<'_>) -> Result<DecisionRule, TreeError> {
    let bad = || cur.err::<DecisionRule>(format!("bad rule `{tok}`"));
    let (head, op, value) = if let Some((h, v)) = tok.split_once("<=") {
        (h, "<=", v)
    } else if let Some((h, v)) = tok.split_once("==") {
        (h, "==", v)
    } else {
        return bad();
    };
    let Some(feature) = head.get(1..).and_then(|s| s.parse::<usize>().ok()) else {
        return bad();
    };
    match (head.as_bytes().first(), op) {
        (Some(b'x'), "<=") => match value.parse::<f64>() {
            Ok(threshold) if !threshold.is_nan() => Ok(DecisionRule::Real { feature, threshold }),
            _ => bad(),
        },
        (Some(b'o'), "<=") => match value.parse() {
            Ok(threshold) => Ok(DecisionRule::Ordinal { feature, threshold }),
            _ => bad(),
        },
        (Some(b'n'), "==") => match value.parse() {
            Ok(category) => Ok(DecisionRule::Nominal { feature, category }),
            _ => bad(),
        },
        _ => bad(),
    }
}

fn parse_tree(cur: &mut Cursor<'_>) -> Result<Tree, TreeError> {
    if cur.peek() == Some(b'(') {
        cur.pos += 1;
        let tok = cur.token(b",");
        let rule = parse_rule(tok, cur)?;
        cur.expect(b',')?;
        let left = parse_tree(cur)?;
        cur.expect(b',')?;
        let right = parse_tree(cur)?;
        cur.expect(b')')?;
        Ok(Tree::node(rule, left, right))
    } else {
        let tok = cur.token(b",)");
        match tok.parse() {
            Ok(label) => Ok(Tree::leaf(label)),
            Err(_) => cur.err(format!("bad leaf label `{tok}`")),
        }
    }
}

impl FromStr for Tree {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut cur = Cursor::new(s);
        let t = parse_tree(&mut cur)?;
        cur.finish()?;
        Ok(t)
    }
}

struct ShapeNode {
    children: Option<(TreeShape, TreeShape)>,
    leaves: usize,
    height: usize,
    /// Orientation-free encoding: children ordered by their own keys.
    key: Arc<str>,
}

/// Structure of a tree with rules and labels erased.
///
/// Equality and hashing ignore child orientation: mirror images describe
/// the same hypothesis class since a rule's sign can be flipped.
#[derive(Clone)]
pub struct TreeShape(Arc<ShapeNode>);

impl TreeShape {
    pub fn leaf() -> Self {
        TreeShape(Arc::new(ShapeNode {
            children: None,
            leaves: 1,
            height: 0,
            key: Arc::from("."),
        }))
    }

    pub fn node(left: TreeShape, right: TreeShape) -> Self {
        let (a, b) = if left.key() <= right.key() {
            (left.key(), right.key())
        } else {
            (right.key(), left.key())
        };
        let key: Arc<str> = Arc::from(format!("({a},{b})"));
        TreeShape(Arc::new(ShapeNode {
            leaves: left.leaves() + right.leaves(),
            height: 1 + left.height().max(right.height()),
            key,
            children: Some((left, right)),
        }))
    }

    pub fn stump() -> Self {
        TreeShape::node(TreeShape::leaf(), TreeShape::leaf())
    }

    /// Chain of `internal` nodes, each with a leaf as its right child.
    pub fn caterpillar(internal: usize) -> Self {
        (0..internal).fold(TreeShape::leaf(), |acc, _| TreeShape::node(acc, TreeShape::leaf()))
    }

    /// Most balanced shape with `leaves` leaves (left side gets the extra one).
    pub fn balanced(leaves: usize) -> Self {
        assert!(leaves >= 1);
        if leaves == 1 {
            TreeShape::leaf()
        } else {
            let l = leaves.div_ceil(2);
            TreeShape::node(TreeShape::balanced(l), TreeShape::balanced(leaves - l))
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.0.children.is_none()
    }

    pub fn children(&self) -> Option<(&TreeShape, &TreeShape)> {
        self.0.children.as_ref().map(|(l, r)| (l, r))
    }

    pub fn leaves(&self) -> usize {
        self.0.leaves
    }

    pub fn height(&self) -> usize {
        self.0.height
    }

    /// Canonical encoding shared by a shape and its mirror image.
    pub fn key(&self) -> &str {
        &self.0.key
    }

    pub(crate) fn key_arc(&self) -> Arc<str> {
        Arc::clone(&self.0.key)
    }

    /// 1 when the two subtrees of the root are the same class, 0 otherwise
    /// (including for a leaf).
    pub fn delta_lr(&self) -> u32 {
        match self.children() {
            Some((l, r)) if l == r => 1,
            _ => 0,
        }
    }
}

impl PartialEq for TreeShape {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.key() == other.key()
    }
}

impl Eq for TreeShape {}

impl Hash for TreeShape {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

impl fmt::Display for TreeShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.children() {
            None => f.write_str("."),
            Some((l, r)) => write!(f, "({l},{r})"),
        }
    }
}

impl fmt::Debug for TreeShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TreeShape({self})")
    }
}

fn parse_shape(cur: &mut Cursor<'_>) -> Result<TreeShape, TreeError> {
    match cur.peek() {
        Some(b'.') => {
            cur.pos += 1;
            Ok(TreeShape::leaf())
        }
        Some(b'(') => {
            cur.pos += 1;
            let l = parse_shape(cur)?;
            cur.expect(b',')?;
            let r = parse_shape(cur)?;
            cur.expect(b')')?;
            Ok(TreeShape::node(l, r))
        }
        _ => cur.err("expected `.` or `(`"),
    }
}

impl FromStr for TreeShape {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut cur = Cursor::new(s);
        let shape = parse_shape(&mut cur)?;
        cur.finish()?;
        Ok(shape)
    }
}
