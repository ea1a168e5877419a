//! Tensor semantics for diagrams: contraction to dense tensors over exact
//! scalars or complex floats.
//!
//! The contraction engine works on wire variables rather than on generator
//! tensors. Every Z-spider forces all wires through it to carry one shared
//! value, so a union-find over edges collapses each Z-cluster to a single
//! variable and the spiders themselves vanish. What remains is a hypergraph
//! of small factors: one per H-box (evaluated lazily from its decoration and
//! the bilinear form, never materialized at full leg count), one per basis
//! preparation node, and dense intermediates created along the way. Free
//! variables are summed out one at a time; boundary ports pin the rest.
//!
//! This keeps the cost tied to the treewidth-style structure of the diagram
//! instead of its largest generator: a box with q+1 legs fused through a
//! spider is a rank-2 factor here, not a q^(q+1)-entry array.
//!
//! The engine is generic over the entry ring, so the exact path and the
//! floating cross-check share wiring logic but nothing numeric; unit tests
//! anchor both against directly constructed generator tensors and literal
//! matrix algebra.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::diagram::{Diagram, NodeKind, Phase, Port, Side};
use crate::field::FieldSpec;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Error)]
pub enum TensorError {
    #[error("arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("tensors or diagrams are over different fields")]
    FieldMismatch,
    #[error("malformed tensor document: {0}")]
    BadJson(String),
}

/// Ring of tensor entries. Implemented by exact scalars and complex floats.
pub trait Entry: Clone + Send + Sync {
    fn zero(p: u64, t: u32) -> Self;
    fn one(p: u64, t: u32) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn from_scalar(s: &Scalar) -> Self;
    fn omega_pow(p: u64, t: u32, e: u64) -> Self;
    fn sqrtq_pow(p: u64, t: u32, n: i64) -> Self;
}

impl Entry for Scalar {
    fn zero(p: u64, t: u32) -> Self {
        Scalar::zero(p, t)
    }
    fn one(p: u64, t: u32) -> Self {
        Scalar::one(p, t)
    }
    fn add(&self, other: &Self) -> Self {
        Scalar::add(self, other)
    }
    fn mul(&self, other: &Self) -> Self {
        Scalar::mul(self, other)
    }
    fn from_scalar(s: &Scalar) -> Self {
        s.clone()
    }
    fn omega_pow(p: u64, t: u32, e: u64) -> Self {
        Scalar::omega_pow(p, t, e)
    }
    fn sqrtq_pow(p: u64, t: u32, n: i64) -> Self {
        Scalar::sqrtq_pow(p, t, n)
    }
}

impl Entry for Complex64 {
    fn zero(_p: u64, _t: u32) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one(_p: u64, _t: u32) -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn from_scalar(s: &Scalar) -> Self {
        s.to_complex()
    }
    fn omega_pow(p: u64, _t: u32, e: u64) -> Self {
        let phi = 2.0 * std::f64::consts::PI * (e % p) as f64 / p as f64;
        Complex64::new(phi.cos(), phi.sin())
    }
    fn sqrtq_pow(p: u64, t: u32, n: i64) -> Self {
        Complex64::new((p.pow(t) as f64).powf(n as f64 / 2.0), 0.0)
    }
}

/// Elimination order for free wire variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Pick the variable whose elimination yields the smallest factor.
    Greedy,
    /// Eliminate in variable-id order; used as the independent cross path.
    Sequential,
}

enum FactorKind<E> {
    /// H-box: entry = pows[(product of out-leg values | product of in-legs)].
    HBox {
        pows: Vec<E>,
        out_legs: Vec<usize>,
        in_legs: Vec<usize>,
    },
    /// Basis preparation: √q on the named element, 0 elsewhere.
    Kappa { sqrtq: E },
    /// Dense intermediate over the factor's variables, first var slowest.
    Dense(Vec<E>),
}

struct Factor<E> {
    /// Distinct wire variables, ascending.
    vars: Vec<usize>,
    kind: FactorKind<E>,
}

struct Tables {
    q: usize,
    /// index of a·b
    mult: Vec<Vec<u64>>,
    /// residue (a|b)
    bilinear: Vec<Vec<u64>>,
    kappa_idx: u64,
}

impl Tables {
    fn new(field: &FieldSpec) -> Tables {
        let q = field.q() as usize;
        let elems = field.enumerate();
        let mut mult = vec![vec![0u64; q]; q];
        let mut bilinear = vec![vec![0u64; q]; q];
        for (a, ea) in elems.iter().enumerate() {
            for (b, eb) in elems.iter().enumerate() {
                mult[a][b] = field.index_of(&field.mul(ea, eb));
                bilinear[a][b] = field.bilinear(ea, eb);
            }
        }
        Tables {
            q,
            mult,
            bilinear,
            kappa_idx: field.index_of(&field.kappa()),
        }
    }

    fn one_idx(&self) -> u64 {
        // enumeration is little-endian base-p, so index 1 is the element 1
        1.min(self.q as u64 - 1)
    }
}

impl<E: Entry> Factor<E> {
    fn eval(&self, assign: &[u64], tables: &Tables, p: u64, t: u32) -> E {
        match &self.kind {
            FactorKind::HBox { pows, out_legs, in_legs } => {
                let mut op = tables.one_idx();
                for &v in out_legs {
                    op = tables.mult[op as usize][assign[self.vars[v]] as usize];
                }
                let mut ip = tables.one_idx();
                for &v in in_legs {
                    ip = tables.mult[ip as usize][assign[self.vars[v]] as usize];
                }
                pows[tables.bilinear[op as usize][ip as usize] as usize].clone()
            }
            FactorKind::Kappa { sqrtq } => {
                if assign[self.vars[0]] == tables.kappa_idx {
                    sqrtq.clone()
                } else {
                    E::zero(p, t)
                }
            }
            FactorKind::Dense(data) => {
                let mut flat = 0usize;
                for &v in &self.vars {
                    flat = flat * tables.q + assign[v] as usize;
                }
                data[flat].clone()
            }
        }
    }
}

struct Net<E> {
    p: u64,
    t: u32,
    n_vars: usize,
    /// factor slab; eliminations retire old slots and append merged ones
    slots: Vec<Option<Factor<E>>>,
    /// variable -> live slots touching it
    var_slots: Vec<BTreeSet<usize>>,
    /// boundary tuple position (outputs first, then inputs) -> variable
    pins: Vec<usize>,
    coeff: E,
    tables: Tables,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let r = self.find(self.0[x]);
            self.0[x] = r;
        }
        self.0[x]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra] = rb;
        }
    }
}

fn build_net<E: Entry>(diagram: &Diagram) -> Net<E> {
    let field = diagram.field();
    let (p, t) = (field.p(), field.t() as u32);
    let tables = Tables::new(field);
    let edges: Vec<(Port, Port)> = diagram.edges().iter().cloned().collect();
    let mut port_edge: BTreeMap<Port, usize> = BTreeMap::new();
    for (i, (a, b)) in edges.iter().enumerate() {
        port_edge.insert(*a, i);
        port_edge.insert(*b, i);
    }
    let mut uf = UnionFind::new(edges.len());
    let mut coeff = E::from_scalar(diagram.scalar_factor());
    for (id, node) in diagram.nodes() {
        if let NodeKind::Z = node.kind {
            let mut first: Option<usize> = None;
            for (side, count) in [(Side::In, node.in_ports), (Side::Out, node.out_ports)] {
                for slot in 0..count {
                    let e = port_edge[&Port::Node { node: *id, side, slot }];
                    match first {
                        None => first = Some(e),
                        Some(f) => uf.union(f, e),
                    }
                }
            }
            if first.is_none() {
                // a spider with no legs sums 1 over all of F_q
                coeff = coeff.mul(&E::sqrtq_pow(p, t, 2));
            }
        }
    }
    // compact variable ids per union-find class
    let mut var_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    let mut var_of_edge = vec![0usize; edges.len()];
    for e in 0..edges.len() {
        let r = uf.find(e);
        let next = var_of_root.len();
        let v = *var_of_root.entry(r).or_insert(next);
        var_of_edge[e] = v;
    }
    let n_vars = var_of_root.len();

    let mut factors: Vec<Factor<E>> = Vec::new();
    for (id, node) in diagram.nodes() {
        match &node.kind {
            NodeKind::Z => {}
            NodeKind::H(phase) => {
                let r = match phase {
                    Phase::Default => E::omega_pow(p, t, 1),
                    Phase::Value(s) => E::from_scalar(s),
                };
                let norm = E::sqrtq_pow(p, t, -1);
                let mut pows = Vec::with_capacity(p as usize);
                let mut acc = E::one(p, t);
                for _ in 0..p {
                    pows.push(acc.mul(&norm));
                    acc = acc.mul(&r);
                }
                let mut vars: Vec<usize> = Vec::new();
                let leg = |side: Side, slot: usize, vars: &mut Vec<usize>| -> usize {
                    let v = var_of_edge[port_edge[&Port::Node { node: *id, side, slot }]];
                    match vars.iter().position(|&x| x == v) {
                        Some(i) => i,
                        None => {
                            vars.push(v);
                            vars.len() - 1
                        }
                    }
                };
                let out_legs: Vec<usize> = (0..node.out_ports)
                    .map(|s| leg(Side::Out, s, &mut vars))
                    .collect();
                let in_legs: Vec<usize> = (0..node.in_ports)
                    .map(|s| leg(Side::In, s, &mut vars))
                    .collect();
                // keep vars sorted; remap leg references
                let mut order: Vec<usize> = (0..vars.len()).collect();
                order.sort_by_key(|&i| vars[i]);
                let mut rank = vec![0usize; vars.len()];
                for (new, &old) in order.iter().enumerate() {
                    rank[old] = new;
                }
                let sorted_vars: Vec<usize> = order.iter().map(|&i| vars[i]).collect();
                factors.push(Factor {
                    vars: sorted_vars,
                    kind: FactorKind::HBox {
                        pows,
                        out_legs: out_legs.into_iter().map(|l| rank[l]).collect(),
                        in_legs: in_legs.into_iter().map(|l| rank[l]).collect(),
                    },
                });
            }
            NodeKind::Kappa => {
                let v = var_of_edge
                    [port_edge[&Port::Node { node: *id, side: Side::Out, slot: 0 }]];
                factors.push(Factor {
                    vars: vec![v],
                    kind: FactorKind::Kappa { sqrtq: E::sqrtq_pow(p, t, 1) },
                });
            }
        }
    }
    let mut pins = Vec::with_capacity(diagram.n_outputs() + diagram.n_inputs());
    for o in 0..diagram.n_outputs() {
        pins.push(var_of_edge[port_edge[&Port::Boundary { side: Side::Out, index: o }]]);
    }
    for i in 0..diagram.n_inputs() {
        pins.push(var_of_edge[port_edge[&Port::Boundary { side: Side::In, index: i }]]);
    }
    let mut var_slots: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_vars];
    for (slot, f) in factors.iter().enumerate() {
        for &v in &f.vars {
            var_slots[v].insert(slot);
        }
    }
    Net {
        p,
        t,
        n_vars,
        slots: factors.into_iter().map(Some).collect(),
        var_slots,
        pins,
        coeff,
        tables,
    }
}

impl<E: Entry> Net<E> {
    fn support_of(&self, v: usize) -> Vec<usize> {
        let mut support: Vec<usize> = Vec::new();
        for &slot in &self.var_slots[v] {
            if let Some(f) = &self.slots[slot] {
                for &w in &f.vars {
                    if w != v && !support.contains(&w) {
                        support.push(w);
                    }
                }
            }
        }
        support.sort_unstable();
        support
    }

    fn eliminate_all(&mut self, strategy: Strategy) {
        let mut free: Vec<bool> = vec![true; self.n_vars];
        for &v in &self.pins {
            free[v] = false;
        }
        match strategy {
            Strategy::Sequential => {
                for v in 0..self.n_vars {
                    if free[v] {
                        self.eliminate(v);
                    }
                }
            }
            Strategy::Greedy => {
                // lazy heap: entries may be stale, so re-rank on pop
                use std::cmp::Reverse;
                use std::collections::BinaryHeap;
                let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..self.n_vars)
                    .filter(|&v| free[v])
                    .map(|v| Reverse((self.support_of(v).len(), v)))
                    .collect();
                while let Some(Reverse((rank, v))) = heap.pop() {
                    if !free[v] {
                        continue;
                    }
                    let current = self.support_of(v).len();
                    if current != rank {
                        heap.push(Reverse((current, v)));
                        continue;
                    }
                    free[v] = false;
                    let touched = self.eliminate(v);
                    for w in touched {
                        if free[w] {
                            heap.push(Reverse((self.support_of(w).len(), w)));
                        }
                    }
                }
            }
        }
    }

    /// Sum variable v out of every factor touching it; returns the merged
    /// factor's support so the caller can refresh orderings.
    fn eliminate(&mut self, v: usize) -> Vec<usize> {
        let (p, t) = (self.p, self.t);
        let q = self.tables.q;
        let slot_ids: Vec<usize> = self.var_slots[v].iter().copied().collect();
        let touching: Vec<Factor<E>> = slot_ids
            .iter()
            .map(|&s| self.slots[s].take().expect("indexed slot is live"))
            .collect();
        if touching.is_empty() {
            // unconstrained wire: a bare loop worth q
            self.coeff = self.coeff.mul(&E::sqrtq_pow(p, t, 2));
            return Vec::new();
        }
        let mut support: Vec<usize> = Vec::new();
        for f in &touching {
            for &w in &f.vars {
                if w != v && !support.contains(&w) {
                    support.push(w);
                }
            }
        }
        support.sort_unstable();
        let size = q.checked_pow(support.len() as u32).expect("factor too large");
        let mut assign = vec![0u64; self.n_vars];
        let mut data = Vec::with_capacity(size);
        for flat in 0..size {
            let mut rem = flat;
            for &w in support.iter().rev() {
                assign[w] = (rem % q) as u64;
                rem /= q;
            }
            let mut acc = E::zero(p, t);
            for val in 0..q as u64 {
                assign[v] = val;
                let mut term = E::one(p, t);
                for f in &touching {
                    term = term.mul(&f.eval(&assign, &self.tables, p, t));
                }
                acc = acc.add(&term);
            }
            data.push(acc);
        }
        let new_slot = self.slots.len();
        for &w in support.iter().chain([&v]) {
            for &s in &slot_ids {
                self.var_slots[w].remove(&s);
            }
        }
        for &w in &support {
            self.var_slots[w].insert(new_slot);
        }
        self.slots.push(Some(Factor { vars: support.clone(), kind: FactorKind::Dense(data) }));
        support
    }

    /// Dense entries over boundary assignments, outputs-first flat order.
    fn assemble(&self, n_boundary: usize) -> Vec<E> {
        let q = self.tables.q;
        let total = q.checked_pow(n_boundary as u32).expect("tensor too large");
        let compute = |flat: usize| -> E {
            let mut assign = vec![u64::MAX; self.n_vars.max(1)];
            let mut rem = flat;
            let mut digits = vec![0u64; n_boundary];
            for pos in (0..n_boundary).rev() {
                digits[pos] = (rem % q) as u64;
                rem /= q;
            }
            for (pos, &v) in self.pins.iter().enumerate() {
                if assign[v] == u64::MAX {
                    assign[v] = digits[pos];
                } else if assign[v] != digits[pos] {
                    return E::zero(self.p, self.t);
                }
            }
            let mut acc = self.coeff.clone();
            for f in self.slots.iter().flatten() {
                acc = acc.mul(&f.eval(&assign, &self.tables, self.p, self.t));
            }
            acc
        };
        if total >= 4096 {
            (0..total).into_par_iter().map(compute).collect()
        } else {
            (0..total).map(compute).collect()
        }
    }
}

/// Dense tensor of exact amplitudes. Entries are indexed by the output
/// tuple then the input tuple, first wire slowest, values in enumeration
/// order of the field.
#[derive(Debug, Clone)]
pub struct ExactTensor {
    field: FieldSpec,
    n_in: usize,
    n_out: usize,
    entries: Vec<Scalar>,
}

impl ExactTensor {
    pub fn from_entries(
        field: &FieldSpec,
        n_out: usize,
        n_in: usize,
        entries: Vec<Scalar>,
    ) -> ExactTensor {
        assert_eq!(
            entries.len(),
            (field.q() as usize).pow((n_in + n_out) as u32),
            "entry count must be q^(inputs+outputs)"
        );
        ExactTensor { field: field.clone(), n_in, n_out, entries }
    }

    pub fn from_fn(
        field: &FieldSpec,
        n_out: usize,
        n_in: usize,
        mut f: impl FnMut(&[u64], &[u64]) -> Scalar,
    ) -> ExactTensor {
        let q = field.q() as usize;
        let total = q.pow((n_in + n_out) as u32);
        let mut entries = Vec::with_capacity(total);
        for flat in 0..total {
            let digits = digits_of(flat, n_out + n_in, q);
            entries.push(f(&digits[..n_out], &digits[n_out..]));
        }
        ExactTensor { field: field.clone(), n_in, n_out, entries }
    }

    pub fn identity(field: &FieldSpec, n: usize) -> ExactTensor {
        let (p, t) = (field.p(), field.t() as u32);
        ExactTensor::from_fn(field, n, n, |outs, ins| {
            if outs == ins {
                Scalar::one(p, t)
            } else {
                Scalar::zero(p, t)
            }
        })
    }

    pub fn field(&self) -> &FieldSpec {
        &self.field
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn entries(&self) -> &[Scalar] {
        &self.entries
    }

    fn flat(&self, outs: &[u64], ins: &[u64]) -> usize {
        assert_eq!(outs.len(), self.n_out);
        assert_eq!(ins.len(), self.n_in);
        let q = self.field.q() as usize;
        let mut idx = 0usize;
        for &d in outs.iter().chain(ins.iter()) {
            idx = idx * q + d as usize;
        }
        idx
    }

    pub fn get(&self, outs: &[u64], ins: &[u64]) -> &Scalar {
        &self.entries[self.flat(outs, ins)]
    }

    /// Output-side column for a basis input.
    pub fn column(&self, ins: &[u64]) -> Vec<Scalar> {
        let q = self.field.q() as usize;
        (0..q.pow(self.n_out as u32))
            .map(|o| {
                let outs = digits_of(o, self.n_out, q);
                self.get(&outs, ins).clone()
            })
            .collect()
    }

    pub fn scale(&self, s: &Scalar) -> ExactTensor {
        ExactTensor {
            field: self.field.clone(),
            n_in: self.n_in,
            n_out: self.n_out,
            entries: self.entries.iter().map(|e| e.mul(s)).collect(),
        }
    }

    pub fn equal(&self, other: &ExactTensor) -> bool {
        self.field == other.field
            && self.n_in == other.n_in
            && self.n_out == other.n_out
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.equal(b))
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> ExactTensor {
        ExactTensor::from_fn(&self.field, self.n_in, self.n_out, |outs, ins| {
            self.get(ins, outs).conj()
        })
    }

    /// self ∘ other (matrix product; self consumes other's outputs).
    pub fn matmul(&self, other: &ExactTensor) -> Result<ExactTensor, TensorError> {
        if self.field != other.field {
            return Err(TensorError::FieldMismatch);
        }
        if self.n_in != other.n_out {
            return Err(TensorError::ArityMismatch {
                expected: self.n_in,
                got: other.n_out,
            });
        }
        let q = self.field.q() as usize;
        let (p, t) = (self.field.p(), self.field.t() as u32);
        let mid = self.n_in;
        Ok(ExactTensor::from_fn(
            &self.field,
            self.n_out,
            other.n_in,
            |outs, ins| {
                let mut acc = Scalar::zero(p, t);
                for k in 0..q.pow(mid as u32) {
                    let ks = digits_of(k, mid, q);
                    acc = acc.add(&self.get(outs, &ks).mul(other.get(&ks, ins)));
                }
                acc
            },
        ))
    }

    /// Tensor product; self's wires come first on both sides.
    pub fn kron(&self, other: &ExactTensor) -> Result<ExactTensor, TensorError> {
        if self.field != other.field {
            return Err(TensorError::FieldMismatch);
        }
        Ok(ExactTensor::from_fn(
            &self.field,
            self.n_out + other.n_out,
            self.n_in + other.n_in,
            |outs, ins| {
                self.get(&outs[..self.n_out], &ins[..self.n_in])
                    .mul(other.get(&outs[self.n_out..], &ins[self.n_in..]))
            },
        ))
    }

    pub fn to_numeric(&self, tol: f64) -> NumTensor {
        NumTensor {
            q: self.field.q(),
            n_in: self.n_in,
            n_out: self.n_out,
            entries: self.entries.iter().map(|s| s.to_complex()).collect(),
            tol,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "field": self.field.to_json(),
            "in_arity": self.n_in,
            "out_arity": self.n_out,
            "entries": self.entries.iter().map(|s| s.to_json()).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<ExactTensor, TensorError> {
        let bad = |m: &str| TensorError::BadJson(m.to_string());
        let field = FieldSpec::from_json(v.get("field").ok_or_else(|| bad("missing field"))?)
            .map_err(|e| bad(&e.to_string()))?;
        let n_in = v
            .get("in_arity")
            .and_then(|x| x.as_u64())
            .ok_or_else(|| bad("missing in_arity"))? as usize;
        let n_out = v
            .get("out_arity")
            .and_then(|x| x.as_u64())
            .ok_or_else(|| bad("missing out_arity"))? as usize;
        let raw = v
            .get("entries")
            .and_then(|x| x.as_array())
            .ok_or_else(|| bad("missing entries"))?;
        let expect = (field.q() as usize).pow((n_in + n_out) as u32);
        if raw.len() != expect {
            return Err(bad("entry count does not match arities"));
        }
        let entries = raw
            .iter()
            .map(|e| Scalar::from_json(e, field.p(), field.t() as u32))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(&e.to_string()))?;
        Ok(ExactTensor { field, n_in, n_out, entries })
    }
}

/// Dense complex tensor with an attached comparison tolerance.
#[derive(Debug, Clone)]
pub struct NumTensor {
    q: u64,
    n_in: usize,
    n_out: usize,
    entries: Vec<Complex64>,
    tol: f64,
}

impl NumTensor {
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn max_diff(&self, other: &NumTensor) -> f64 {
        assert_eq!(self.entries.len(), other.entries.len());
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &NumTensor) -> bool {
        self.q == other.q
            && self.n_in == other.n_in
            && self.n_out == other.n_out
            && self.max_diff(other) <= self.tol
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "q": self.q,
            "in_arity": self.n_in,
            "out_arity": self.n_out,
            "entries": self
                .entries
                .iter()
                .map(|c| serde_json::json!([c.re, c.im]))
                .collect::<Vec<_>>(),
        })
    }
}

fn digits_of(flat: usize, count: usize, q: usize) -> Vec<u64> {
    let mut digits = vec![0u64; count];
    let mut rem = flat;
    for pos in (0..count).rev() {
        digits[pos] = (rem % q) as u64;
        rem /= q;
    }
    digits
}

/// The tensor of a single generator, written directly from the defining
/// sums; the contraction engine is tested against this.
pub fn generator_tensor(node: &crate::diagram::Node, field: &FieldSpec) -> ExactTensor {
    let (p, t) = (field.p(), field.t() as u32);
    match &node.kind {
        NodeKind::Z => ExactTensor::from_fn(field, node.out_ports, node.in_ports, |outs, ins| {
            let first = outs.iter().chain(ins.iter()).next().copied();
            match first {
                None => Scalar::from_int(p, t, field.q()),
                Some(v) => {
                    if outs.iter().chain(ins.iter()).all(|&x| x == v) {
                        Scalar::one(p, t)
                    } else {
                        Scalar::zero(p, t)
                    }
                }
            }
        }),
        NodeKind::H(phase) => {
            let r = phase.resolve(p, t);
            let norm = Scalar::sqrtq_pow(p, t, -1);
            ExactTensor::from_fn(field, node.out_ports, node.in_ports, |outs, ins| {
                let ov: Vec<_> = outs.iter().map(|&i| field.element_at(i)).collect();
                let iv: Vec<_> = ins.iter().map(|&i| field.element_at(i)).collect();
                let op = field.product(&ov);
                let ip = field.product(&iv);
                r.pow_residue(field.bilinear(&op, &ip)).mul(&norm)
            })
        }
        NodeKind::Kappa => {
            let kappa = field.index_of(&field.kappa());
            ExactTensor::from_fn(field, 1, 0, |outs, _| {
                if outs[0] == kappa {
                    Scalar::sqrtq_pow(p, t, 1)
                } else {
                    Scalar::zero(p, t)
                }
            })
        }
    }
}

/// Contract a diagram to its exact tensor with a chosen elimination order.
pub fn contract_with_strategy(diagram: &Diagram, strategy: Strategy) -> ExactTensor {
    let mut net: Net<Scalar> = build_net(diagram);
    net.eliminate_all(strategy);
    let n_boundary = diagram.n_outputs() + diagram.n_inputs();
    let entries = net.assemble(n_boundary);
    ExactTensor {
        field: diagram.field().clone(),
        n_in: diagram.n_inputs(),
        n_out: diagram.n_outputs(),
        entries,
    }
}

/// Contract a diagram to its exact tensor.
pub fn contract(diagram: &Diagram) -> ExactTensor {
    contract_with_strategy(diagram, Strategy::Greedy)
}

/// Contract in floating-point arithmetic along the sequential order: shares
/// no numerics with the exact path. `precision` becomes the tensor's
/// comparison tolerance.
pub fn contract_numeric(diagram: &Diagram, precision: f64) -> NumTensor {
    let mut net: Net<Complex64> = build_net(diagram);
    net.eliminate_all(Strategy::Sequential);
    let n_boundary = diagram.n_outputs() + diagram.n_inputs();
    let entries = net.assemble(n_boundary);
    NumTensor {
        q: diagram.field().q(),
        n_in: diagram.n_inputs(),
        n_out: diagram.n_outputs(),
        entries,
        tol: precision,
    }
}

/// Exact semantic equality of two diagrams.
pub fn equal_diagrams(d1: &Diagram, d2: &Diagram) -> Result<bool, TensorError> {
    if d1.field() != d2.field() {
        return Err(TensorError::FieldMismatch);
    }
    if d1.n_inputs() != d2.n_inputs() {
        return Err(TensorError::ArityMismatch {
            expected: d1.n_inputs(),
            got: d2.n_inputs(),
        });
    }
    if d1.n_outputs() != d2.n_outputs() {
        return Err(TensorError::ArityMismatch {
            expected: d1.n_outputs(),
            got: d2.n_outputs(),
        });
    }
    Ok(contract(d1).equal(&contract(d2)))
}

/// Exact unitarity check M†M = I.
pub fn is_unitary(d: &Diagram) -> Result<bool, TensorError> {
    if d.n_inputs() != d.n_outputs() {
        return Err(TensorError::ArityMismatch {
            expected: d.n_inputs(),
            got: d.n_outputs(),
        });
    }
    let m = contract(d);
    let prod = m.dagger().matmul(&m)?;
    Ok(prod.equal(&ExactTensor::identity(d.field(), d.n_inputs())))
}
