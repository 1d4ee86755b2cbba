//! A small instrumented RASP interpreter.
//!
//! Values are integer sequences ([`Seq`]). Attention is modelled by
//! [`Machine::select`] (a boolean key/query matrix) and [`Machine::aggr_mean`]
//! (row-wise mean of the selected values); [`Machine::kqv`] composes the two and
//! corresponds to one attention head. Every attention-like call is appended to an
//! [`ExecutionTrace`] so programs can be audited for depth and causality.
//!
//! Booleans are encoded as 0/1. Negative values act as "no value" sentinels.

use std::fmt;
use std::ops::{Add, Index, Sub};

use thiserror::Error;

pub type Value = i64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RaspError {
    #[error("{op}: length mismatch ({left} vs {right})")]
    LengthMismatch { op: &'static str, left: usize, right: usize },
}

/// A fixed-length integer sequence.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Seq(Vec<Value>);

impl Seq {
    pub fn new(values: Vec<Value>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[Value] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = Value> + '_ {
        self.0.iter().copied()
    }

    pub fn into_vec(self) -> Vec<Value> {
        self.0
    }

    fn map(&self, f: impl Fn(Value) -> Value) -> Seq {
        Seq(self.0.iter().map(|&v| f(v)).collect())
    }
}

impl fmt::Debug for Seq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}

impl From<Vec<Value>> for Seq {
    fn from(v: Vec<Value>) -> Self {
        Self(v)
    }
}

impl<const N: usize> From<[Value; N]> for Seq {
    fn from(v: [Value; N]) -> Self {
        Self(v.to_vec())
    }
}

impl Index<usize> for Seq {
    type Output = Value;

    fn index(&self, i: usize) -> &Value {
        &self.0[i]
    }
}

impl Add<Value> for &Seq {
    type Output = Seq;

    fn add(self, k: Value) -> Seq {
        self.map(|v| v + k)
    }
}

impl Sub<Value> for &Seq {
    type Output = Seq;

    fn sub(self, k: Value) -> Seq {
        self.map(|v| v - k)
    }
}

/// Key/query predicates available to `select`. Applied as `pred(key, query)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Predicate {
    Equals,
    NotEquals,
    /// key < query
    Less,
    /// key > query
    Greater,
    True,
}

impl Predicate {
    #[inline]
    pub fn apply(self, key: Value, query: Value) -> bool {
        match self {
            Predicate::Equals => key == query,
            Predicate::NotEquals => key != query,
            Predicate::Less => key < query,
            Predicate::Greater => key > query,
            Predicate::True => true,
        }
    }
}

/// A `len x len` boolean attention pattern, indexed `[query][key]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelMatrix {
    len: usize,
    cells: Vec<bool>,
    causal: bool,
}

impl SelMatrix {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_causal(&self) -> bool {
        self.causal
    }

    pub fn get(&self, query: usize, key: usize) -> bool {
        self.cells[query * self.len + key]
    }

    pub fn row(&self, query: usize) -> &[bool] {
        &self.cells[query * self.len..(query + 1) * self.len]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[bool]> {
        self.cells.chunks(self.len.max(1)).take(self.len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    Select,
    SelWidth,
    AggrMean,
    Kqv,
    Map,
}

/// One interpreter call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub kind: OpKind,
    pub causal: bool,
    pub predicate: Option<Predicate>,
    /// Largest number of selected keys in any row.
    pub max_selected: usize,
    /// Rows with no selected key.
    pub empty_rows: usize,
    /// Rows with more than one selected key.
    pub multi_rows: usize,
    /// Rows that averaged unequal values. For `kqv`, only rows whose query is not
    /// a sentinel (negative) are counted.
    pub mixed_rows: usize,
    /// Rows whose mean was not an integer and was truncated toward zero.
    pub truncated_rows: usize,
    /// Positional offsets other than +/-1, when the increment audit is on.
    pub non_unit_offset: Option<Value>,
}

impl TraceRecord {
    fn new(kind: OpKind) -> Self {
        Self {
            kind,
            causal: false,
            predicate: None,
            max_selected: 0,
            empty_rows: 0,
            multi_rows: 0,
            mixed_rows: 0,
            truncated_rows: 0,
            non_unit_offset: None,
        }
    }

    fn summarize(&mut self, counts: impl Iterator<Item = usize>) {
        for c in counts {
            self.max_selected = self.max_selected.max(c);
            self.empty_rows += usize::from(c == 0);
            self.multi_rows += usize::from(c > 1);
        }
    }
}

/// Append-only record of one program run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExecutionTrace {
    records: Vec<TraceRecord>,
}

impl ExecutionTrace {
    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn count(&self, kind: OpKind) -> usize {
        self.records.iter().filter(|r| r.kind == kind).count()
    }

    /// Attention-equivalent operations: every selection, whether it feeds a
    /// `kqv` or a `sel_width`.
    pub fn attention_ops(&self) -> usize {
        self.count(OpKind::Select)
    }

    pub fn non_causal_attention(&self) -> usize {
        self.records.iter().filter(|r| r.kind == OpKind::Select && !r.causal).count()
    }

    /// `kqv` calls that averaged unequal values for a live query.
    pub fn mixed_aggregations(&self) -> usize {
        self.records.iter().filter(|r| r.kind == OpKind::Kqv).map(|r| r.mixed_rows).sum()
    }

    pub fn truncations(&self) -> usize {
        self.records.iter().filter(|r| r.kind == OpKind::AggrMean).map(|r| r.truncated_rows).sum()
    }

    pub fn non_unit_offsets(&self) -> Vec<Value> {
        self.records.iter().filter_map(|r| r.non_unit_offset).collect()
    }

    fn push(&mut self, r: TraceRecord) {
        self.records.push(r);
    }
}

/// Interpreter state for one program run.
#[derive(Debug, Default)]
pub struct Machine {
    trace: ExecutionTrace,
    audit_increments: bool,
}

fn check_len(op: &'static str, a: &Seq, b: &Seq) -> Result<(), RaspError> {
    if a.len() != b.len() {
        return Err(RaspError::LengthMismatch { op, left: a.len(), right: b.len() });
    }
    Ok(())
}

/// Mean of the selected values truncated toward zero, plus whether the values were
/// unequal and whether truncation changed the result.
fn mean(sum: i128, count: usize, default: Value) -> (Value, bool) {
    if count == 0 {
        return (default, false);
    }
    let c = count as i128;
    ((sum / c) as Value, sum % c != 0)
}

impl Machine {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record `offset` calls with a step other than +/-1.
    pub fn with_increment_audit(mut self) -> Self {
        self.audit_increments = true;
        self
    }

    pub fn trace(&self) -> &ExecutionTrace {
        &self.trace
    }

    pub fn into_trace(self) -> ExecutionTrace {
        self.trace
    }

    /// Every element set to `constant`.
    pub fn full(&self, template: &Seq, constant: Value) -> Seq {
        Seq(vec![constant; template.len()])
    }

    /// `[0, 1, ..., len - 1]`, the positional encoding.
    pub fn indices(&self, template: &Seq) -> Seq {
        Seq((0..template.len() as Value).collect())
    }

    /// Entry `[q][k]` is `pred(keys[k], queries[q])`, masked to `k <= q` when causal.
    pub fn select(&mut self, keys: &Seq, queries: &Seq, pred: Predicate, causal: bool) -> Result<SelMatrix, RaspError> {
        check_len("select", keys, queries)?;
        let n = keys.len();
        let mut cells = vec![false; n * n];
        for (qi, &q) in queries.values().iter().enumerate() {
            let limit = if causal { qi + 1 } else { n };
            for (kj, &k) in keys.values()[..limit].iter().enumerate() {
                cells[qi * n + kj] = pred.apply(k, q);
            }
        }
        let m = SelMatrix { len: n, cells, causal };
        let mut rec = TraceRecord::new(OpKind::Select);
        rec.causal = causal;
        rec.predicate = Some(pred);
        rec.summarize(m.rows().map(|r| r.iter().filter(|&&b| b).count()));
        self.trace.push(rec);
        Ok(m)
    }

    /// Number of selected keys in each row.
    pub fn sel_width(&mut self, matrix: &SelMatrix) -> Seq {
        let widths: Vec<Value> = matrix.rows().map(|r| r.iter().filter(|&&b| b).count() as Value).collect();
        let mut rec = TraceRecord::new(OpKind::SelWidth);
        rec.causal = matrix.causal;
        rec.summarize(widths.iter().map(|&w| w as usize));
        self.trace.push(rec);
        Seq(widths)
    }

    /// Row-wise mean of `values` over the selected keys, truncated toward zero;
    /// `default` for rows that select nothing.
    pub fn aggr_mean(&mut self, matrix: &SelMatrix, values: &Seq, default: Value) -> Result<Seq, RaspError> {
        if matrix.len() != values.len() {
            return Err(RaspError::LengthMismatch { op: "aggr_mean", left: matrix.len(), right: values.len() });
        }
        let mut rec = TraceRecord::new(OpKind::AggrMean);
        rec.causal = matrix.causal;
        let mut out = Vec::with_capacity(values.len());
        let mut counts = Vec::with_capacity(values.len());
        for row in matrix.rows() {
            let (mut sum, mut count, mut lo, mut hi) = (0i128, 0usize, Value::MAX, Value::MIN);
            for (&sel, &v) in row.iter().zip(values.values()) {
                if sel {
                    sum += v as i128;
                    count += 1;
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            let (m, truncated) = mean(sum, count, default);
            rec.mixed_rows += usize::from(count > 1 && lo != hi);
            rec.truncated_rows += usize::from(truncated);
            counts.push(count);
            out.push(m);
        }
        rec.summarize(counts.into_iter());
        self.trace.push(rec);
        Ok(Seq(out))
    }

    /// `aggr_mean(select(keys, queries, pred, causal), values, default)`, one attention head.
    pub fn kqv(
        &mut self,
        keys: &Seq,
        queries: &Seq,
        values: &Seq,
        pred: Predicate,
        default: Value,
        causal: bool,
    ) -> Result<Seq, RaspError> {
        check_len("kqv", keys, values)?;
        let matrix = self.select(keys, queries, pred, causal)?;
        let out = self.aggr_mean(&matrix, values, default)?;
        let mut rec = TraceRecord::new(OpKind::Kqv);
        rec.causal = causal;
        rec.predicate = Some(pred);
        let mut counts = Vec::with_capacity(values.len());
        for (qi, row) in matrix.rows().enumerate() {
            let mut selected = row.iter().zip(values.values()).filter(|(s, _)| **s).map(|(_, &v)| v);
            let first = selected.next();
            let mut count = usize::from(first.is_some());
            let mut mixed = false;
            for v in selected {
                count += 1;
                mixed |= Some(v) != first;
            }
            rec.mixed_rows += usize::from(mixed && queries[qi] >= 0);
            counts.push(count);
        }
        rec.summarize(counts.into_iter());
        self.trace.push(rec);
        Ok(out)
    }

    /// Element-wise `f(a[i], b[i])`.
    pub fn seq_map(&mut self, a: &Seq, b: &Seq, f: impl Fn(Value, Value) -> Value) -> Result<Seq, RaspError> {
        check_len("seq_map", a, b)?;
        self.trace.push(TraceRecord::new(OpKind::Map));
        Ok(Seq(a.values().iter().zip(b.values()).map(|(&x, &y)| f(x, y)).collect()))
    }

    /// Element-wise `if condition != 0 { if_true } else { if_false }`.
    pub fn where_(&mut self, condition: &Seq, if_true: &Seq, if_false: &Seq) -> Result<Seq, RaspError> {
        check_len("where", condition, if_true)?;
        check_len("where", condition, if_false)?;
        self.trace.push(TraceRecord::new(OpKind::Map));
        Ok(Seq(condition
            .values()
            .iter()
            .zip(if_true.values().iter().zip(if_false.values()))
            .map(|(&c, (&t, &f))| if c != 0 { t } else { f })
            .collect()))
    }

    /// Element-wise `a == b` as 0/1.
    pub fn equals(&mut self, a: &Seq, b: &Seq) -> Result<Seq, RaspError> {
        self.seq_map(a, b, |x, y| Value::from(x == y))
    }

    pub fn not_equals(&mut self, a: &Seq, b: &Seq) -> Result<Seq, RaspError> {
        self.seq_map(a, b, |x, y| Value::from(x != y))
    }

    /// Element-wise `x > default` as 0/1.
    pub fn is_true(&mut self, x: &Seq, default: Value) -> Seq {
        self.trace.push(TraceRecord::new(OpKind::Map));
        x.map(|v| Value::from(v > default))
    }

    /// Positional arithmetic `s + k`. With the increment audit on, steps other than
    /// +/-1 are noted in the trace.
    pub fn offset(&mut self, s: &Seq, k: Value) -> Seq {
        let mut rec = TraceRecord::new(OpKind::Map);
        if self.audit_increments && k.abs() > 1 {
            rec.non_unit_offset = Some(k);
        }
        self.trace.push(rec);
        s + k
    }
}
