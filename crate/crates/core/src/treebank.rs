//! Penn-Treebank style bracketed trees and context-free production rules.
//!
//! Trees come from an external constituency parser (or hand annotation) as
//! one bracketed string per sentence, e.g. `(S (NP (PRP I)) (VP (VBP like)))`.
//! Every node carries a label and either child nodes or a single terminal
//! word. Each node yields exactly one production rule.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Label of PTB empty elements (traces, null complementizers).
pub const EMPTY_ELEMENT_LABEL: &str = "-NONE-";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("empty input")]
    Empty,
    #[error("unbalanced parentheses at byte {offset}")]
    Unbalanced { offset: usize },
    #[error("unexpected '{found}' at byte {offset}")]
    Unexpected { found: char, offset: usize },
    #[error("node at byte {offset} has neither children nor a word")]
    EmptyNode { offset: usize },
    #[error("node at byte {offset} mixes terminal words with subtrees or has several words")]
    MixedNode { offset: usize },
    #[error("trailing input at byte {offset}")]
    Trailing { offset: usize },
    #[error("invalid symbol {0:?}: symbols must be nonempty and free of whitespace and parentheses")]
    InvalidSymbol(String),
    #[error("tree consists only of empty elements")]
    OnlyEmptyElements,
    #[error("invalid rule {0:?}: expected `LHS→RHS1 RHS2 ...`")]
    InvalidRule(String),
}

fn check_symbol(s: &str) -> Result<(), TreeError> {
    if s.is_empty() || s.chars().any(|c| c.is_whitespace() || c == '(' || c == ')') {
        return Err(TreeError::InvalidSymbol(s.to_string()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NodeContent {
    Children(Vec<SyntaxTree>),
    Word(String),
}

/// A constituency tree node. Fields are private so that every tree in
/// circulation satisfies the symbol and arity invariants.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SyntaxTree {
    label: String,
    content: NodeContent,
}

impl SyntaxTree {
    pub fn node(label: impl Into<String>, children: Vec<SyntaxTree>) -> Result<Self, TreeError> {
        let label = label.into();
        check_symbol(&label)?;
        if children.is_empty() {
            return Err(TreeError::EmptyNode { offset: 0 });
        }
        Ok(Self { label, content: NodeContent::Children(children) })
    }

    pub fn leaf(label: impl Into<String>, word: impl Into<String>) -> Result<Self, TreeError> {
        let label = label.into();
        let word = word.into();
        check_symbol(&label)?;
        check_symbol(&word)?;
        Ok(Self { label, content: NodeContent::Word(word) })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn content(&self) -> &NodeContent {
        &self.content
    }

    pub fn children(&self) -> &[SyntaxTree] {
        match &self.content {
            NodeContent::Children(c) => c,
            NodeContent::Word(_) => &[],
        }
    }

    pub fn word(&self) -> Option<&str> {
        match &self.content {
            NodeContent::Word(w) => Some(w),
            NodeContent::Children(_) => None,
        }
    }

    /// Number of nodes, which equals the number of production rules the tree yields.
    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(SyntaxTree::node_count).sum::<usize>()
    }

    /// Terminal words in order.
    pub fn words(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_words(&mut out);
        out
    }

    fn collect_words<'a>(&'a self, out: &mut Vec<&'a str>) {
        match &self.content {
            NodeContent::Word(w) => out.push(w),
            NodeContent::Children(c) => c.iter().for_each(|t| t.collect_words(out)),
        }
    }

    /// Canonical single-space bracketing.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        self.write_into(&mut out);
        out
    }

    fn write_into(&self, out: &mut String) {
        out.push('(');
        out.push_str(&self.label);
        match &self.content {
            NodeContent::Word(w) => {
                out.push(' ');
                out.push_str(w);
            }
            NodeContent::Children(children) => {
                for c in children {
                    out.push(' ');
                    c.write_into(out);
                }
            }
        }
        out.push(')');
    }

    /// Applies hand-annotation normalization. Returns `None` when nothing but
    /// empty elements remains.
    pub fn normalize(self, opts: &TreeOptions) -> Option<SyntaxTree> {
        let SyntaxTree { mut label, content } = self;
        if opts.drop_traces && label == EMPTY_ELEMENT_LABEL {
            return None;
        }
        if opts.strip_function_tags {
            label = strip_function_tag(&label).to_string();
        }
        let content = match content {
            NodeContent::Word(w) => NodeContent::Word(w),
            NodeContent::Children(children) => {
                let kept: Vec<_> = children.into_iter().filter_map(|c| c.normalize(opts)).collect();
                if kept.is_empty() {
                    return None;
                }
                NodeContent::Children(kept)
            }
        };
        Some(SyntaxTree { label, content })
    }
}

impl fmt::Display for SyntaxTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

impl FromStr for SyntaxTree {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_bracketed(s)
    }
}

/// Removes functional tags and coindexation (`NP-SBJ-1` → `NP`, `NP=2` → `NP`).
/// Labels beginning with `-` (`-NONE-`, `-LRB-`) are left alone.
pub fn strip_function_tag(label: &str) -> &str {
    if label.starts_with('-') {
        return label;
    }
    match label.find(['-', '=']) {
        Some(i) if i > 0 => &label[..i],
        _ => label,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeOptions {
    pub strip_function_tags: bool,
    pub drop_traces: bool,
}

impl Default for TreeOptions {
    fn default() -> Self {
        Self { strip_function_tags: true, drop_traces: true }
    }
}

impl TreeOptions {
    pub const RAW: TreeOptions = TreeOptions { strip_function_tags: false, drop_traces: false };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Token<'a> {
    Open(usize),
    Close(usize),
    Atom(&'a str, usize),
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c == '(' || c == ')' || c.is_whitespace() {
            if let Some(s) = start.take() {
                tokens.push(Token::Atom(&text[s..i], s));
            }
            match c {
                '(' => tokens.push(Token::Open(i)),
                ')' => tokens.push(Token::Close(i)),
                _ => {}
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push(Token::Atom(&text[s..], s));
    }
    tokens
}

struct Parser<'a> {
    tokens: Vec<Token<'a>>,
    pos: usize,
    end: usize,
}

/// Either a labeled subtree or a bare (wrapper) group with no label.
enum Parsed {
    Tree(SyntaxTree),
    Wrapper(Vec<SyntaxTree>, usize),
}

impl<'a> Parser<'a> {
    fn next(&mut self) -> Option<Token<'a>> {
        let t = self.tokens.get(self.pos).copied();
        self.pos += 1;
        t
    }

    fn peek(&self) -> Option<Token<'a>> {
        self.tokens.get(self.pos).copied()
    }

    // Called after consuming an Open token at `open`.
    fn parse_group(&mut self, open: usize) -> Result<Parsed, TreeError> {
        let label = match self.peek() {
            Some(Token::Atom(a, _)) => {
                self.pos += 1;
                Some(a)
            }
            Some(_) => None,
            None => return Err(TreeError::Unbalanced { offset: self.end }),
        };
        let mut children = Vec::new();
        let mut words: Vec<&str> = Vec::new();
        loop {
            match self.next() {
                None => return Err(TreeError::Unbalanced { offset: self.end }),
                Some(Token::Close(_)) => break,
                Some(Token::Open(o)) => match self.parse_group(o)? {
                    Parsed::Tree(t) => children.push(t),
                    Parsed::Wrapper(_, off) => return Err(TreeError::EmptyNode { offset: off }),
                },
                Some(Token::Atom(w, _)) => words.push(w),
            }
        }
        let Some(label) = label else {
            if !words.is_empty() {
                return Err(TreeError::MixedNode { offset: open });
            }
            return Ok(Parsed::Wrapper(children, open));
        };
        match (children.is_empty(), words.len()) {
            (true, 0) => Err(TreeError::EmptyNode { offset: open }),
            (true, 1) => Ok(Parsed::Tree(SyntaxTree::leaf(label, words[0])?)),
            (false, 0) => Ok(Parsed::Tree(SyntaxTree::node(label, children)?)),
            _ => Err(TreeError::MixedNode { offset: open }),
        }
    }
}

/// Parses one bracketed tree, accepting the treebank convention of an extra
/// unlabeled outer pair. No label normalization is applied.
pub fn parse_bracketed(text: &str) -> Result<SyntaxTree, TreeError> {
    let tokens = tokenize(text);
    let mut p = Parser { tokens, pos: 0, end: text.len() };
    let parsed = match p.next() {
        None => return Err(TreeError::Empty),
        Some(Token::Open(o)) => p.parse_group(o)?,
        Some(Token::Close(o)) => return Err(TreeError::Unbalanced { offset: o }),
        Some(Token::Atom(a, o)) => {
            return Err(TreeError::Unexpected { found: a.chars().next().unwrap_or(' '), offset: o })
        }
    };
    if let Some(t) = p.peek() {
        let offset = match t {
            Token::Open(o) | Token::Close(o) | Token::Atom(_, o) => o,
        };
        return Err(match t {
            Token::Close(_) => TreeError::Unbalanced { offset },
            _ => TreeError::Trailing { offset },
        });
    }
    match parsed {
        Parsed::Tree(t) => Ok(t),
        Parsed::Wrapper(mut children, off) => {
            if children.len() == 1 {
                Ok(children.pop().expect("one child"))
            } else {
                Err(TreeError::EmptyNode { offset: off })
            }
        }
    }
}

/// Parses and normalizes in one step.
pub fn parse_with(text: &str, opts: &TreeOptions) -> Result<SyntaxTree, TreeError> {
    parse_bracketed(text)?.normalize(opts).ok_or(TreeError::OnlyEmptyElements)
}

/// A context-free rewrite `lhs → rhs`. Equality and ordering look only at the
/// symbols; `lexical` is derived from where the rule came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProductionRule {
    lhs: String,
    rhs: Vec<String>,
    lexical: bool,
}

impl PartialEq for ProductionRule {
    fn eq(&self, other: &Self) -> bool {
        self.lhs == other.lhs && self.rhs == other.rhs
    }
}

impl Eq for ProductionRule {}

impl std::hash::Hash for ProductionRule {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.lhs.hash(state);
        self.rhs.hash(state);
    }
}

impl PartialOrd for ProductionRule {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ProductionRule {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (&self.lhs, &self.rhs).cmp(&(&other.lhs, &other.rhs))
    }
}

impl ProductionRule {
    pub fn new(lhs: impl Into<String>, rhs: Vec<String>, lexical: bool) -> Result<Self, TreeError> {
        let lhs = lhs.into();
        check_symbol(&lhs)?;
        if rhs.is_empty() {
            return Err(TreeError::InvalidRule(format!("{lhs}→")));
        }
        for s in &rhs {
            check_symbol(s)?;
        }
        Ok(Self { lhs, rhs, lexical })
    }

    pub fn lhs(&self) -> &str {
        &self.lhs
    }

    pub fn rhs(&self) -> &[String] {
        &self.rhs
    }

    pub fn is_lexical(&self) -> bool {
        self.lexical
    }
}

impl fmt::Display for ProductionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}→{}", self.lhs, self.rhs.join(" "))
    }
}

/// Parses `LHS→RHS1 RHS2` (an ASCII `->` is accepted too). Rules read from
/// text are never marked lexical.
impl FromStr for ProductionRule {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lhs, rhs) = s
            .split_once('→')
            .or_else(|| s.split_once("->"))
            .ok_or_else(|| TreeError::InvalidRule(s.to_string()))?;
        let rhs: Vec<String> = rhs.split_whitespace().map(str::to_string).collect();
        ProductionRule::new(lhs.trim(), rhs, false).map_err(|_| TreeError::InvalidRule(s.to_string()))
    }
}

/// One rule per node, in pre-order. With `include_lexical = false`,
/// preterminal → word rules are omitted.
pub fn extract_rules(tree: &SyntaxTree, include_lexical: bool) -> Vec<ProductionRule> {
    let mut out = Vec::with_capacity(tree.node_count());
    push_rules(tree, include_lexical, &mut out);
    out
}

fn push_rules(tree: &SyntaxTree, include_lexical: bool, out: &mut Vec<ProductionRule>) {
    match &tree.content {
        NodeContent::Word(w) => {
            if include_lexical {
                out.push(ProductionRule { lhs: tree.label.clone(), rhs: vec![w.clone()], lexical: true });
            }
        }
        NodeContent::Children(children) => {
            out.push(ProductionRule {
                lhs: tree.label.clone(),
                rhs: children.iter().map(|c| c.label.clone()).collect(),
                lexical: false,
            });
            for c in children {
                push_rules(c, include_lexical, out);
            }
        }
    }
}
