//! Dependency graph and recalculation.
//!
//! Formulas are lowered once into [`Node`] trees whose references are
//! resolved to sheet indices. The graph is rebuilt only when formulas or
//! names change; streaming a record costs one incremental recalculation.
//! Recalculation is synchronous: when it returns, every cached value
//! downstream of the dirty cells is current.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use thiserror::Error;

use crate::address::{CellAddress, CellPos};
use crate::ast::{BinaryOp, Expr, ExprKind, Reference, UnaryOp};
use crate::functions::{self, Arg, ArgKind, FunctionDef};
use crate::value::{compare_values, CellValue, ErrorCode};
use crate::workbook::{CellContent, Loc, LocRange, Workbook, WorkbookError};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CalcError {
    #[error("circular reference through {}", join_cells(.cells))]
    Cycle { cells: Vec<CellAddress> },
    #[error("{cell} refers to unknown name `{name}`")]
    UnknownName { cell: CellAddress, name: String },
    #[error(transparent)]
    Workbook(#[from] WorkbookError),
}

fn join_cells(cells: &[CellAddress]) -> String {
    let mut out = String::new();
    for (i, c) in cells.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&alloc::format!("{c}"));
    }
    out
}

/// A formula with references resolved against one workbook.
#[derive(Clone, Debug)]
pub(crate) enum Node {
    Const(CellValue),
    Cell(Loc),
    Range(LocRange),
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
    /// `IF` evaluates only the branch it takes.
    If(Vec<Node>),
    Call(&'static FunctionDef, Vec<Node>),
}

/// Ranges up to this many cells are indexed cell by cell; larger ones are
/// matched by containment.
const INDEX_RANGE_LIMIT: usize = 256;

fn lower(expr: &Expr, sheet: usize, wb: &Workbook) -> Node {
    match &expr.kind {
        ExprKind::Number(n) => Node::Const(CellValue::number(*n)),
        ExprKind::Text(s) => Node::Const(CellValue::Text(s.clone())),
        ExprKind::Boolean(b) => Node::Const(CellValue::Boolean(*b)),
        ExprKind::Cell(c) => {
            let s = match &c.sheet {
                Some(name) => wb.sheet_index(name),
                None => Some(sheet),
            };
            match s {
                Some(s) if in_grid(wb, c.pos) => Node::Cell(Loc { sheet: s, pos: c.pos }),
                _ => Node::Const(CellValue::Error(ErrorCode::Ref)),
            }
        }
        ExprKind::Range(r) => {
            let s = match &r.sheet {
                Some(name) => wb.sheet_index(name),
                None => Some(sheet),
            };
            match s {
                Some(s) if in_grid(wb, r.start) && in_grid(wb, r.end) => {
                    Node::Range(LocRange { sheet: s, start: r.start, end: r.end })
                }
                _ => Node::Const(CellValue::Error(ErrorCode::Ref)),
            }
        }
        ExprKind::Name(n) => match wb.named(n).and_then(|nr| wb.loc_range(&nr.range).ok()) {
            Some(r) if r.start == r.end => Node::Cell(Loc { sheet: r.sheet, pos: r.start }),
            Some(r) => Node::Range(r),
            None => Node::Const(CellValue::Error(ErrorCode::Name)),
        },
        ExprKind::Unary(op, e) => Node::Unary(*op, Box::new(lower(e, sheet, wb))),
        ExprKind::Binary(op, l, r) => {
            Node::Binary(*op, Box::new(lower(l, sheet, wb)), Box::new(lower(r, sheet, wb)))
        }
        ExprKind::Call(name, args) => match functions::lookup(name) {
            None => Node::Const(CellValue::Error(ErrorCode::Name)),
            Some(def) if !def.accepts(args.len()) => Node::Const(CellValue::Error(ErrorCode::Value)),
            Some(def) => {
                let lowered = args.iter().map(|a| lower(a, sheet, wb)).collect();
                if def.name == "IF" {
                    Node::If(lowered)
                } else {
                    Node::Call(def, lowered)
                }
            }
        },
    }
}

fn in_grid(wb: &Workbook, pos: CellPos) -> bool {
    let l = wb.limits();
    pos.row <= l.max_rows && pos.col <= l.max_cols
}

fn eval(node: &Node, wb: &Workbook) -> CellValue {
    match node {
        Node::Const(v) => v.clone(),
        Node::Cell(loc) => wb.value_at(*loc).clone(),
        Node::Range(r) => {
            if r.start == r.end {
                wb.value_at(Loc { sheet: r.sheet, pos: r.start }).clone()
            } else {
                CellValue::Error(ErrorCode::Value)
            }
        }
        Node::Unary(op, e) => {
            let v = eval(e, wb);
            match op {
                UnaryOp::Plus => v,
                UnaryOp::Neg => match v.to_number() {
                    Ok(n) => CellValue::number(-n),
                    Err(e) => CellValue::Error(e),
                },
            }
        }
        Node::Binary(op, l, r) => binary(*op, eval(l, wb), eval(r, wb)),
        Node::If(args) => {
            let cond = eval(&args[0], wb);
            match cond.to_bool() {
                Err(e) => CellValue::Error(e),
                Ok(true) => eval(&args[1], wb),
                Ok(false) => args.get(2).map_or(CellValue::Boolean(false), |a| eval(a, wb)),
            }
        }
        Node::Call(def, args) => {
            let evaluated: Vec<Arg<'_>> = args
                .iter()
                .enumerate()
                .map(|(i, a)| match (def.kind_of(i), a) {
                    (ArgKind::Range, Node::Range(r)) => Arg::Range {
                        rows: r.rows(),
                        cols: r.cols(),
                        values: r.locs().map(|l| wb.value_at(l)).collect(),
                    },
                    (ArgKind::Range, Node::Cell(l)) => Arg::Range { rows: 1, cols: 1, values: vec![wb.value_at(*l)] },
                    (_, a) => Arg::Scalar(eval(a, wb)),
                })
                .collect();
            def.call(&evaluated)
        }
    }
}

fn binary(op: BinaryOp, l: CellValue, r: CellValue) -> CellValue {
    if let CellValue::Error(e) = l {
        return CellValue::Error(e);
    }
    if let CellValue::Error(e) = r {
        return CellValue::Error(e);
    }
    let arith = |f: fn(f64, f64) -> CellValue| match (l.to_number(), r.to_number()) {
        (Ok(a), Ok(b)) => f(a, b),
        (Err(e), _) | (_, Err(e)) => CellValue::Error(e),
    };
    let cmp = |pred: fn(Ordering) -> bool| match compare_values(&l, &r) {
        Ok(o) => CellValue::Boolean(pred(o)),
        Err(e) => CellValue::Error(e),
    };
    match op {
        BinaryOp::Add => arith(|a, b| CellValue::number(a + b)),
        BinaryOp::Sub => arith(|a, b| CellValue::number(a - b)),
        BinaryOp::Mul => arith(|a, b| CellValue::number(a * b)),
        BinaryOp::Div => arith(|a, b| {
            if b == 0.0 {
                CellValue::Error(ErrorCode::Div0)
            } else {
                CellValue::number(a / b)
            }
        }),
        BinaryOp::Pow => arith(|a, b| {
            if a == 0.0 && b == 0.0 {
                CellValue::Error(ErrorCode::Num)
            } else if a == 0.0 && b < 0.0 {
                CellValue::Error(ErrorCode::Div0)
            } else {
                CellValue::number(libm::pow(a, b))
            }
        }),
        BinaryOp::Concat => {
            let mut s = l.render();
            s.push_str(&r.render());
            CellValue::Text(s)
        }
        BinaryOp::Eq => cmp(Ordering::is_eq),
        BinaryOp::Ne => cmp(Ordering::is_ne),
        BinaryOp::Lt => cmp(Ordering::is_lt),
        BinaryOp::Le => cmp(Ordering::is_le),
        BinaryOp::Gt => cmp(Ordering::is_gt),
        BinaryOp::Ge => cmp(Ordering::is_ge),
    }
}

/// Read-only view used to evaluate a free-standing formula.
pub struct EvalContext<'w> {
    pub workbook: &'w Workbook,
    /// Sheet that unqualified references resolve against.
    pub sheet: &'w str,
}

/// Evaluate `ast` against the cached values of a workbook. Unknown names and
/// functions evaluate to `#NAME?`, unknown sheets to `#REF!`.
pub fn evaluate(ast: &Expr, ctx: &EvalContext<'_>) -> CellValue {
    let Some(sheet) = ctx.workbook.sheet_index(ctx.sheet) else {
        return CellValue::Error(ErrorCode::Ref);
    };
    eval(&lower(ast, sheet, ctx.workbook), ctx.workbook)
}

fn walk_refs(node: &Node, out: &mut Vec<Precedent>) {
    match node {
        Node::Const(_) => {}
        Node::Cell(l) => out.push(Precedent::Cell(*l)),
        Node::Range(r) => out.push(Precedent::Range(*r)),
        Node::Unary(_, e) => walk_refs(e, out),
        Node::Binary(_, l, r) => {
            walk_refs(l, out);
            walk_refs(r, out);
        }
        Node::If(args) | Node::Call(_, args) => args.iter().for_each(|a| walk_refs(a, out)),
    }
}

enum Precedent {
    Cell(Loc),
    Range(LocRange),
}

/// Formula cells in evaluation order plus the edges needed to find what a
/// change touches.
#[derive(Clone, Debug, Default)]
pub struct DependencyGraph {
    nodes: Vec<Loc>,
    node_of: BTreeMap<Loc, usize>,
    compiled: Vec<Node>,
    order: Vec<usize>,
    rank: Vec<usize>,
    /// node → nodes that read it
    dependents: Vec<Vec<usize>>,
    /// cell → nodes that read it directly or through a small range
    cell_deps: BTreeMap<Loc, Vec<usize>>,
    large_ranges: Vec<(LocRange, usize)>,
}

impl DependencyGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Formula cells in the order a full recalculation evaluates them.
    pub fn evaluation_order(&self, wb: &Workbook) -> Vec<CellAddress> {
        self.order.iter().map(|&i| wb.address_of(self.nodes[i])).collect()
    }

    /// Position of `addr` in the evaluation order, if it holds a formula.
    pub fn position(&self, wb: &Workbook, addr: &CellAddress) -> Option<usize> {
        let loc = wb.loc(addr).ok()?;
        self.node_of.get(&loc).map(|&i| self.rank[i])
    }

    /// Edges as (precedent, dependent) pairs between formula cells.
    pub fn formula_edges(&self, wb: &Workbook) -> Vec<(CellAddress, CellAddress)> {
        let mut out = Vec::new();
        for (from, tos) in self.dependents.iter().enumerate() {
            for &to in tos {
                out.push((wb.address_of(self.nodes[from]), wb.address_of(self.nodes[to])));
            }
        }
        out.sort();
        out
    }
}

/// Compile every formula and order them topologically.
pub fn build_graph(wb: &Workbook) -> Result<DependencyGraph, CalcError> {
    let mut g = DependencyGraph::default();
    for (si, sheet) in wb.sheets.iter().enumerate() {
        for (pos, cell) in sheet.cells.iter() {
            if let CellContent::Formula(f) = &cell.content {
                let loc = Loc { sheet: si, pos: *pos };
                for r in f.ast.references() {
                    if let Reference::Name(name) = r {
                        if wb.named(&name).is_none() {
                            return Err(CalcError::UnknownName { cell: wb.address_of(loc), name });
                        }
                    }
                }
                g.node_of.insert(loc, g.nodes.len());
                g.nodes.push(loc);
                g.compiled.push(lower(&f.ast, si, wb));
            }
        }
    }

    let n = g.nodes.len();
    g.dependents = vec![Vec::new(); n];
    let mut refs = Vec::new();
    for i in 0..n {
        refs.clear();
        walk_refs(&g.compiled[i], &mut refs);
        for p in &refs {
            match p {
                Precedent::Cell(l) => {
                    g.cell_deps.entry(*l).or_default().push(i);
                    if let Some(&j) = g.node_of.get(l) {
                        g.dependents[j].push(i);
                    }
                }
                Precedent::Range(r) => {
                    if r.rows() * r.cols() <= INDEX_RANGE_LIMIT {
                        for l in r.locs() {
                            g.cell_deps.entry(l).or_default().push(i);
                        }
                    } else {
                        g.large_ranges.push((*r, i));
                    }
                    let lo = Loc { sheet: r.sheet, pos: r.start };
                    let hi = Loc { sheet: r.sheet, pos: r.end };
                    for (l, &j) in g.node_of.range(lo..=hi) {
                        if r.contains(*l) {
                            g.dependents[j].push(i);
                        }
                    }
                }
            }
        }
    }
    for d in g.dependents.iter_mut().chain(g.cell_deps.values_mut()) {
        d.sort_unstable();
        d.dedup();
    }

    // Kahn's algorithm, smallest node first for a deterministic order.
    let mut indegree = vec![0usize; n];
    for ds in &g.dependents {
        for &d in ds {
            indegree[d] += 1;
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    while let Some(Reverse(i)) = ready.pop() {
        g.order.push(i);
        for &d in &g.dependents[i] {
            indegree[d] -= 1;
            if indegree[d] == 0 {
                ready.push(Reverse(d));
            }
        }
    }
    if g.order.len() < n {
        let cycle = find_cycle(&g.dependents, &indegree);
        return Err(CalcError::Cycle { cells: cycle.into_iter().map(|i| wb.address_of(g.nodes[i])).collect() });
    }
    g.rank = vec![0; n];
    for (r, &i) in g.order.iter().enumerate() {
        g.rank[i] = r;
    }
    Ok(g)
}

/// One cycle among the nodes Kahn's algorithm could not place.
fn find_cycle(dependents: &[Vec<usize>], indegree: &[usize]) -> Vec<usize> {
    let stuck = |i: usize| indegree[i] > 0;
    let Some(start) = (0..dependents.len()).find(|&i| stuck(i)) else {
        return Vec::new();
    };
    // Every stuck node has a stuck precedent, so walking precedents
    // backwards must revisit a node.
    let mut precedent = vec![usize::MAX; dependents.len()];
    for (from, tos) in dependents.iter().enumerate() {
        if !stuck(from) {
            continue;
        }
        for &to in tos {
            if stuck(to) && precedent[to] == usize::MAX {
                precedent[to] = from;
            }
        }
    }
    let mut seen = vec![usize::MAX; dependents.len()];
    let mut path = Vec::new();
    let mut cur = start;
    while seen[cur] == usize::MAX {
        seen[cur] = path.len();
        path.push(cur);
        cur = precedent[cur];
        if cur == usize::MAX {
            return path;
        }
    }
    let mut cycle = path.split_off(seen[cur]);
    cycle.reverse();
    // start the report at the smallest cell for stable messages
    if let Some(min_at) = cycle.iter().enumerate().min_by_key(|(_, &v)| v).map(|(i, _)| i) {
        cycle.rotate_left(min_at);
    }
    cycle
}

impl Workbook {
    /// Build the dependency graph now, surfacing cycles and unknown names.
    pub fn compile(&mut self) -> Result<(), CalcError> {
        if self.graph.is_none() {
            self.graph = Some(build_graph(self)?);
        }
        Ok(())
    }

    pub fn graph(&self) -> Option<&DependencyGraph> {
        self.graph.as_ref()
    }

    /// Re-evaluate every formula downstream of `dirty`, each exactly once, in
    /// dependency order. Returns how many formulas were evaluated. Evaluation
    /// problems become error values; only graph construction can fail.
    pub fn recalculate(&mut self, dirty: &[CellAddress]) -> Result<usize, CalcError> {
        let locs = dirty.iter().map(|a| self.loc(a)).collect::<Result<Vec<_>, _>>()?;
        self.recalculate_locs(&locs)
    }

    /// Evaluate every formula.
    pub fn recalculate_all(&mut self) -> Result<usize, CalcError> {
        self.compile()?;
        let Some(graph) = self.graph.take() else {
            return Ok(0);
        };
        for &i in &graph.order {
            let v = eval(&graph.compiled[i], self);
            self.set_cached(graph.nodes[i], v);
        }
        let n = graph.order.len();
        self.graph = Some(graph);
        Ok(n)
    }

    pub(crate) fn recalculate_locs(&mut self, dirty: &[Loc]) -> Result<usize, CalcError> {
        self.compile()?;
        let Some(graph) = self.graph.take() else {
            return Ok(0);
        };
        let n = graph.nodes.len();
        let mut marked = vec![false; n];
        let mut stack = Vec::new();
        let mut push = |i: usize, stack: &mut Vec<usize>| {
            if !marked[i] {
                marked[i] = true;
                stack.push(i);
            }
        };
        for loc in dirty {
            if let Some(&i) = graph.node_of.get(loc) {
                push(i, &mut stack);
            }
            if let Some(ds) = graph.cell_deps.get(loc) {
                for &d in ds {
                    push(d, &mut stack);
                }
            }
            for (r, d) in &graph.large_ranges {
                if r.contains(*loc) {
                    push(*d, &mut stack);
                }
            }
        }
        let mut affected = Vec::new();
        while let Some(i) = stack.pop() {
            affected.push(i);
            for &d in &graph.dependents[i] {
                push(d, &mut stack);
            }
        }
        affected.sort_unstable_by_key(|&i| graph.rank[i]);
        for &i in &affected {
            let v = eval(&graph.compiled[i], self);
            self.set_cached(graph.nodes[i], v);
        }
        self.graph = Some(graph);
        Ok(affected.len())
    }

    fn set_cached(&mut self, loc: Loc, v: CellValue) {
        if let Some(cell) = self.sheets[loc.sheet].cells.get_mut(&loc.pos) {
            cell.cached = v;
        }
    }
}
