//! IR for the loop language.
//!
//! A [`Program`] is a sequence of normalized, unit-stride loops. Every
//! statement writes exactly one array element `lhs[i + c]` and computes its
//! value from array elements, integer literals and `+ - *`.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Largest subscript offset the parser accepts.
pub const MAX_OFFSET: i64 = 1_000_000;

/// An array element `array[i + offset]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArrayRef {
    pub array: String,
    pub offset: i64,
}

impl ArrayRef {
    pub fn new(array: impl Into<String>, offset: i64) -> Self {
        ArrayRef {
            array: array.into(),
            offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    #[serde(rename = "+")]
    Add,
    #[serde(rename = "-")]
    Sub,
    #[serde(rename = "*")]
    Mul,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul => 2,
        }
    }

    /// Two's-complement wrapping evaluation.
    pub fn apply(self, lhs: i64, rhs: i64) -> i64 {
        match self {
            BinOp::Add => lhs.wrapping_add(rhs),
            BinOp::Sub => lhs.wrapping_sub(rhs),
            BinOp::Mul => lhs.wrapping_mul(rhs),
        }
    }
}

/// Right-hand side expression tree.
///
/// Serialized as `{op, lhs, rhs}`, `{ref: {array, offset}}` or `{lit: n}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Expr {
    Bin {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Ref {
        #[serde(rename = "ref")]
        target: ArrayRef,
    },
    Lit {
        lit: i64,
    },
}

impl Expr {
    pub fn lit(value: i64) -> Self {
        Expr::Lit { lit: value }
    }

    pub fn array(array: impl Into<String>, offset: i64) -> Self {
        Expr::Ref {
            target: ArrayRef::new(array, offset),
        }
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Bin {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    /// Array references in left-to-right evaluation order, duplicates kept.
    pub fn refs(&self) -> Vec<&ArrayRef> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a ArrayRef>) {
        match self {
            Expr::Bin { lhs, rhs, .. } => {
                lhs.collect_refs(out);
                rhs.collect_refs(out);
            }
            Expr::Ref { target } => out.push(target),
            Expr::Lit { .. } => {}
        }
    }

    /// Evaluates the tree, fetching array elements through `read` in
    /// left-to-right order.
    pub fn eval(&self, read: &mut impl FnMut(&ArrayRef) -> i64) -> i64 {
        match self {
            Expr::Bin { op, lhs, rhs } => {
                let l = lhs.eval(read);
                let r = rhs.eval(read);
                op.apply(l, r)
            }
            Expr::Ref { target } => read(target),
            Expr::Lit { lit } => *lit,
        }
    }
}

/// `label: lhs = rhs;`
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Statement {
    pub label: String,
    pub lhs: ArrayRef,
    pub rhs: Expr,
}

impl Statement {
    pub fn new(label: impl Into<String>, lhs: ArrayRef, rhs: Expr) -> Self {
        Statement {
            label: label.into(),
            lhs,
            rhs,
        }
    }

    pub fn reads(&self) -> Vec<&ArrayRef> {
        self.rhs.refs()
    }
}

/// Loop upper bound: a literal or a symbol (normally `n`) bound at run time.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Const(i64),
    Symbol(String),
}

impl Bound {
    pub fn resolve(&self, n: i64) -> i64 {
        match self {
            Bound::Const(c) => *c,
            Bound::Symbol(_) => n,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Const(c) => write!(f, "{c}"),
            Bound::Symbol(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SyncOp {
    Send,
    Wait,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AnchorPos {
    Before,
    After,
}

/// Where a sync instruction sits relative to a statement.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Anchor {
    pub label: String,
    pub position: AnchorPos,
}

/// `send(reg, i, var)` or `wait(reg, i-offset, var)`.
///
/// A send always publishes the current iteration (offset 0). A wait blocks
/// until iteration `i - offset` has been sent on `reg`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SyncInstr {
    pub op: SyncOp,
    pub reg: u32,
    pub offset: i64,
    pub var: String,
    pub anchor: Anchor,
}

impl SyncInstr {
    pub fn send(reg: u32, var: impl Into<String>, after: impl Into<String>) -> Self {
        SyncInstr {
            op: SyncOp::Send,
            reg,
            offset: 0,
            var: var.into(),
            anchor: Anchor {
                label: after.into(),
                position: AnchorPos::After,
            },
        }
    }

    pub fn wait(reg: u32, offset: i64, var: impl Into<String>, before: impl Into<String>) -> Self {
        SyncInstr {
            op: SyncOp::Wait,
            reg,
            offset,
            var: var.into(),
            anchor: Anchor {
                label: before.into(),
                position: AnchorPos::Before,
            },
        }
    }
}

/// One element of a loop body in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BodyItem<'a> {
    Stmt(&'a Statement),
    Sync(&'a SyncInstr),
}

/// A single normalized loop `for (i = lower; i < upper; i++)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LoopNest {
    pub index: String,
    pub lower: i64,
    pub upper: Bound,
    #[serde(default)]
    pub parallel: bool,
    pub statements: Vec<Statement>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub syncs: Vec<SyncInstr>,
}

impl LoopNest {
    pub fn new(lower: i64, upper: Bound, statements: Vec<Statement>) -> Self {
        LoopNest {
            index: "i".to_string(),
            lower,
            upper,
            parallel: false,
            statements,
            syncs: Vec::new(),
        }
    }

    /// Position of a statement in lexical order.
    pub fn position(&self, label: &str) -> Option<usize> {
        self.statements.iter().position(|s| s.label == label)
    }

    pub fn statement(&self, label: &str) -> Option<&Statement> {
        self.statements.iter().find(|s| s.label == label)
    }

    /// Iteration values executed when the symbolic bound is `n`.
    pub fn iterations(&self, n: i64) -> Range<i64> {
        let upper = self.upper.resolve(n);
        self.lower..upper.max(self.lower)
    }

    /// Copy of the loop with every sync instruction removed.
    pub fn without_syncs(&self) -> LoopNest {
        LoopNest {
            syncs: Vec::new(),
            ..self.clone()
        }
    }

    /// Body in execution order: for each statement, its waits (oldest
    /// awaited iteration first, then by register), the statement, then its
    /// sends by register.
    pub fn body(&self) -> Vec<BodyItem<'_>> {
        let mut items = Vec::with_capacity(self.statements.len() + self.syncs.len());
        for stmt in &self.statements {
            let mut waits: Vec<&SyncInstr> = self
                .syncs
                .iter()
                .filter(|s| s.anchor.label == stmt.label && s.anchor.position == AnchorPos::Before)
                .collect();
            waits.sort_by(|a, b| b.offset.cmp(&a.offset).then(a.reg.cmp(&b.reg)));
            let mut sends: Vec<&SyncInstr> = self
                .syncs
                .iter()
                .filter(|s| s.anchor.label == stmt.label && s.anchor.position == AnchorPos::After)
                .collect();
            sends.sort_by(|a, b| a.reg.cmp(&b.reg).then(b.offset.cmp(&a.offset)));

            items.extend(waits.into_iter().map(BodyItem::Sync));
            items.push(BodyItem::Stmt(stmt));
            items.extend(sends.into_iter().map(BodyItem::Sync));
        }
        items
    }
}

/// A whole translation unit: loops run one after another.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Program {
    pub loops: Vec<LoopNest>,
}

impl Program {
    pub fn new(loops: Vec<LoopNest>) -> Self {
        Program { loops }
    }

    /// The program with all sync instructions removed.
    pub fn without_syncs(&self) -> Program {
        Program {
            loops: self.loops.iter().map(LoopNest::without_syncs).collect(),
        }
    }
}
