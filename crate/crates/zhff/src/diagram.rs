//! Port-graph diagrams: generators, wiring, composition, and the macro
//! library of derived gadgets.
//!
//! A diagram is a set of nodes with typed ports plus a set of undirected
//! edges between ports. Boundary ports give the diagram its input/output
//! arity. The one structural invariant that matters everywhere: every port,
//! node-side or boundary-side, is the endpoint of exactly one edge.
//!
//! H-box ports carry an in/out side tag and moving a wire across sides
//! changes the semantics (the box is not flexsymmetric); Z-spider ports are
//! all interchangeable, and the in/out split on a Z node is bookkeeping
//! only. A bare edge between two boundary ports of the same side is legal
//! and denotes a bent wire.
//!
//! Diagrams are immutable values in practice: every operation returns a new
//! diagram. A global [`Scalar`] factor rides along so that gadget algebra
//! can be exact without littering the graph with 0-ary nodes.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use thiserror::Error;

use crate::field::{FieldElement, FieldError, FieldSpec};
use crate::scalar::Scalar;

pub type NodeId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    In,
    Out,
}

impl Side {
    pub fn tag(self) -> &'static str {
        match self {
            Side::In => "in",
            Side::Out => "out",
        }
    }

    fn from_tag(s: &str) -> Option<Side> {
        match s {
            "in" => Some(Side::In),
            "out" => Some(Side::Out),
            _ => None,
        }
    }
}

/// An attachment point for one end of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Port {
    Boundary { side: Side, index: usize },
    Node { node: NodeId, side: Side, slot: usize },
}

impl std::fmt::Display for Port {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Port::Boundary { side, index } => write!(f, "b.{}[{}]", side.tag(), index),
            Port::Node { node, side, slot } => write!(f, "n{}.{}[{}]", node, side.tag(), slot),
        }
    }
}

/// H-box decoration. `Default` stands for the base generator's ω.
#[derive(Debug, Clone, PartialEq)]
pub enum Phase {
    Default,
    Value(Scalar),
}

impl Phase {
    pub fn resolve(&self, p: u64, t: u32) -> Scalar {
        match self {
            Phase::Default => Scalar::omega_pow(p, t, 1),
            Phase::Value(s) => s.clone(),
        }
    }

    pub fn conj(&self, p: u64, t: u32) -> Phase {
        match self {
            Phase::Default => Phase::Value(Scalar::omega_pow(p, t, p - 1)),
            Phase::Value(s) => Phase::Value(s.conj()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Z,
    H(Phase),
    Kappa,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub in_ports: usize,
    pub out_ports: usize,
}

#[derive(Debug, Clone, Error)]
pub enum DiagramError {
    #[error("arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("diagrams are over different fields")]
    FieldMismatch,
    #[error("port {0} is already attached")]
    PortInUse(String),
    #[error("port {0} is unattached")]
    Dangling(String),
    #[error("port {0} does not exist")]
    BadPort(String),
    #[error("scalar or phase belongs to a different coefficient ring")]
    ScalarContext,
    #[error("wire map is not a permutation")]
    BadPermutation,
    #[error("{0}")]
    Field(#[from] FieldError),
    #[error("malformed diagram document: {0}")]
    BadJson(String),
}

#[derive(Debug, Clone)]
pub struct Diagram {
    field: FieldSpec,
    nodes: BTreeMap<NodeId, Node>,
    edges: BTreeSet<(Port, Port)>,
    n_in: usize,
    n_out: usize,
    scalar: Scalar,
    label: Option<String>,
    next_id: NodeId,
}

fn norm_edge(a: Port, b: Port) -> (Port, Port) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// One end of an edge during boundary splicing: either a surviving port or
/// a junction index where two diagrams (or a host and a replacement) meet.
pub(crate) enum SpliceEnd {
    Real(Port),
    Junction(usize),
}

/// Resolve junction chains into direct edges. Every junction must occur as
/// an endpoint exactly twice. Returns the surviving edges and the number of
/// closed wire loops (each worth a factor q).
pub(crate) fn splice(
    ends: Vec<(SpliceEnd, SpliceEnd)>,
    n_junctions: usize,
) -> (Vec<(Port, Port)>, usize) {
    // incidence: junction -> the (edge, endpoint) slots that touch it
    let mut inc: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_junctions];
    for (e, (a, b)) in ends.iter().enumerate() {
        if let SpliceEnd::Junction(j) = a {
            inc[*j].push((e, 0));
        }
        if let SpliceEnd::Junction(j) = b {
            inc[*j].push((e, 1));
        }
    }
    for slots in &inc {
        assert_eq!(slots.len(), 2, "junction is not a two-sided meeting point");
    }
    let end_of = |e: usize, k: usize| -> &SpliceEnd {
        let (a, b) = &ends[e];
        if k == 0 {
            a
        } else {
            b
        }
    };
    let mut visited = vec![false; ends.len()];
    let mut result = Vec::new();
    for e in 0..ends.len() {
        if visited[e] {
            continue;
        }
        let start = match (end_of(e, 0), end_of(e, 1)) {
            (SpliceEnd::Real(p), _) => (*p, 1),
            (_, SpliceEnd::Real(p)) => (*p, 0),
            _ => continue, // pure junction edge; handled in the loop pass
        };
        visited[e] = true;
        let (start_port, mut k) = start;
        let mut cur = e;
        let other = loop {
            match end_of(cur, k) {
                SpliceEnd::Real(p) => break *p,
                SpliceEnd::Junction(j) => {
                    let (ne, nk) = *inc[*j]
                        .iter()
                        .find(|(ee, kk)| !(*ee == cur && *kk == k))
                        .expect("junction continuation");
                    visited[ne] = true;
                    cur = ne;
                    k = 1 - nk;
                }
            }
        };
        result.push(norm_edge(start_port, other));
    }
    // anything left is a closed chain of junction-junction edges
    let mut loops = 0;
    for e in 0..ends.len() {
        if visited[e] {
            continue;
        }
        loops += 1;
        visited[e] = true;
        let mut cur = e;
        let mut k = 1;
        loop {
            let j = match end_of(cur, k) {
                SpliceEnd::Junction(j) => *j,
                SpliceEnd::Real(_) => unreachable!("loop chain hit a real port"),
            };
            let (ne, nk) = *inc[j]
                .iter()
                .find(|(ee, kk)| !(*ee == cur && *kk == k))
                .expect("junction continuation");
            if visited[ne] {
                break;
            }
            visited[ne] = true;
            cur = ne;
            k = 1 - nk;
        }
    }
    (result, loops)
}

impl Diagram {
    /// A bare shell with boundary arity but no wiring. Not valid until every
    /// boundary port is attached; builders use this as scratch.
    pub fn new(field: &FieldSpec, n_in: usize, n_out: usize) -> Diagram {
        Diagram {
            field: field.clone(),
            nodes: BTreeMap::new(),
            edges: BTreeSet::new(),
            n_in,
            n_out,
            scalar: Scalar::one(field.p(), field.t() as u32),
            label: None,
            next_id: 0,
        }
    }

    pub fn field(&self) -> &FieldSpec {
        &self.field
    }

    pub fn nodes(&self) -> &BTreeMap<NodeId, Node> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<(Port, Port)> {
        &self.edges
    }

    pub fn n_inputs(&self) -> usize {
        self.n_in
    }

    pub fn n_outputs(&self) -> usize {
        self.n_out
    }

    pub fn scalar_factor(&self) -> &Scalar {
        &self.scalar
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Diagram {
        self.label = Some(label.into());
        self
    }

    pub fn mul_scalar(&mut self, s: &Scalar) {
        self.scalar = self.scalar.mul(s);
    }

    /// Multiply the global factor by q^(n/2).
    pub fn mul_sqrtq(&mut self, n: i64) {
        self.scalar = self.scalar.mul_sqrtq(n);
    }

    pub fn add_node(&mut self, kind: NodeKind, in_ports: usize, out_ports: usize) -> NodeId {
        if let NodeKind::Kappa = kind {
            assert!(
                in_ports == 0 && out_ports == 1,
                "the basis-state generator has exactly one outgoing leg"
            );
        }
        let id = self.next_id;
        self.next_id += 1;
        self.nodes.insert(
            id,
            Node {
                kind,
                in_ports,
                out_ports,
            },
        );
        id
    }

    fn port_exists(&self, p: &Port) -> bool {
        match p {
            Port::Boundary { side: Side::In, index } => *index < self.n_in,
            Port::Boundary { side: Side::Out, index } => *index < self.n_out,
            Port::Node { node, side, slot } => match self.nodes.get(node) {
                None => false,
                Some(n) => match side {
                    Side::In => *slot < n.in_ports,
                    Side::Out => *slot < n.out_ports,
                },
            },
        }
    }

    fn port_used(&self, p: &Port) -> bool {
        self.edges.iter().any(|(a, b)| a == p || b == p)
    }

    pub fn add_edge(&mut self, a: Port, b: Port) -> Result<(), DiagramError> {
        assert_ne!(a, b, "an edge needs two distinct ports");
        for p in [&a, &b] {
            if !self.port_exists(p) {
                return Err(DiagramError::BadPort(p.to_string()));
            }
            if self.port_used(p) {
                return Err(DiagramError::PortInUse(p.to_string()));
            }
        }
        self.edges.insert(norm_edge(a, b));
        Ok(())
    }

    /// Check the full wiring invariant: every existing port attached exactly
    /// once, no edge touching a missing port, coefficient contexts aligned.
    pub fn validate(&self) -> Result<(), DiagramError> {
        let (p, t) = (self.field.p(), self.field.t() as u32);
        if self.scalar.p() != p || self.scalar.t() != t {
            return Err(DiagramError::ScalarContext);
        }
        for node in self.nodes.values() {
            if let NodeKind::H(Phase::Value(s)) = &node.kind {
                if s.p() != p || s.t() != t {
                    return Err(DiagramError::ScalarContext);
                }
            }
            if let NodeKind::Kappa = node.kind {
                if node.in_ports != 0 || node.out_ports != 1 {
                    return Err(DiagramError::BadPort("kappa arity".into()));
                }
            }
        }
        let mut seen: BTreeMap<Port, usize> = BTreeMap::new();
        for (a, b) in &self.edges {
            for pt in [a, b] {
                if !self.port_exists(pt) {
                    return Err(DiagramError::BadPort(pt.to_string()));
                }
                *seen.entry(*pt).or_insert(0) += 1;
            }
        }
        let mut all_ports = Vec::new();
        for i in 0..self.n_in {
            all_ports.push(Port::Boundary { side: Side::In, index: i });
        }
        for o in 0..self.n_out {
            all_ports.push(Port::Boundary { side: Side::Out, index: o });
        }
        for (id, node) in &self.nodes {
            for s in 0..node.in_ports {
                all_ports.push(Port::Node { node: *id, side: Side::In, slot: s });
            }
            for s in 0..node.out_ports {
                all_ports.push(Port::Node { node: *id, side: Side::Out, slot: s });
            }
        }
        for pt in &all_ports {
            match seen.get(pt) {
                Some(1) => {}
                Some(_) => return Err(DiagramError::PortInUse(pt.to_string())),
                None => return Err(DiagramError::Dangling(pt.to_string())),
            }
        }
        Ok(())
    }

    /// Structural equality ignoring the debug label.
    pub fn same_graph(&self, other: &Diagram) -> bool {
        self.field == other.field
            && self.nodes == other.nodes
            && self.edges == other.edges
            && self.n_in == other.n_in
            && self.n_out == other.n_out
            && self.scalar == other.scalar
    }

    // ---- primitive builders ----

    pub fn empty(field: &FieldSpec) -> Diagram {
        Diagram::new(field, 0, 0)
    }

    pub fn identity(field: &FieldSpec, n: usize) -> Diagram {
        let mut d = Diagram::new(field, n, n);
        for i in 0..n {
            d.edges.insert(norm_edge(
                Port::Boundary { side: Side::In, index: i },
                Port::Boundary { side: Side::Out, index: i },
            ));
        }
        d
    }

    /// Wires input i to output perm[i].
    pub fn permutation(field: &FieldSpec, perm: &[usize]) -> Result<Diagram, DiagramError> {
        let n = perm.len();
        let mut hit = vec![false; n];
        for &o in perm {
            if o >= n || hit[o] {
                return Err(DiagramError::BadPermutation);
            }
            hit[o] = true;
        }
        let mut d = Diagram::new(field, n, n);
        for (i, &o) in perm.iter().enumerate() {
            d.edges.insert(norm_edge(
                Port::Boundary { side: Side::In, index: i },
                Port::Boundary { side: Side::Out, index: o },
            ));
        }
        Ok(d)
    }

    fn single_node(field: &FieldSpec, kind: NodeKind, m: usize, n: usize) -> Diagram {
        let mut d = Diagram::new(field, n, m);
        let id = d.add_node(kind, n, m);
        for i in 0..n {
            d.add_edge(
                Port::Boundary { side: Side::In, index: i },
                Port::Node { node: id, side: Side::In, slot: i },
            )
            .unwrap();
        }
        for o in 0..m {
            d.add_edge(
                Port::Node { node: id, side: Side::Out, slot: o },
                Port::Boundary { side: Side::Out, index: o },
            )
            .unwrap();
        }
        d
    }

    /// Z-spider with m outputs and n inputs.
    pub fn z_spider(field: &FieldSpec, m: usize, n: usize) -> Diagram {
        Diagram::single_node(field, NodeKind::Z, m, n)
    }

    /// H-box with m outputs and n inputs, default decoration.
    pub fn h_box(field: &FieldSpec, m: usize, n: usize) -> Diagram {
        Diagram::single_node(field, NodeKind::H(Phase::Default), m, n)
    }

    pub fn h_box_phased(
        field: &FieldSpec,
        m: usize,
        n: usize,
        r: Scalar,
    ) -> Result<Diagram, DiagramError> {
        if r.p() != field.p() || r.t() != field.t() as u32 {
            return Err(DiagramError::ScalarContext);
        }
        Ok(Diagram::single_node(field, NodeKind::H(Phase::Value(r)), m, n))
    }

    /// The named-element state generator, √q times the basis state of κ.
    pub fn kappa_state(field: &FieldSpec) -> Diagram {
        Diagram::single_node(field, NodeKind::Kappa, 1, 0)
    }

    // ---- composition ----

    /// self ∘ earlier: feed `earlier`'s outputs into `self`'s inputs.
    pub fn compose(&self, earlier: &Diagram) -> Result<Diagram, DiagramError> {
        if self.field != earlier.field {
            return Err(DiagramError::FieldMismatch);
        }
        if earlier.n_out != self.n_in {
            return Err(DiagramError::ArityMismatch {
                expected: self.n_in,
                got: earlier.n_out,
            });
        }
        let offset = earlier.next_id;
        let mut out = Diagram::new(&self.field, earlier.n_in, self.n_out);
        out.scalar = self.scalar.mul(&earlier.scalar);
        out.next_id = offset + self.next_id;
        for (id, node) in &earlier.nodes {
            out.nodes.insert(*id, node.clone());
        }
        for (id, node) in &self.nodes {
            out.nodes.insert(id + offset, node.clone());
        }
        let map_early = |p: &Port| -> SpliceEnd {
            match p {
                Port::Boundary { side: Side::Out, index } => SpliceEnd::Junction(*index),
                other => SpliceEnd::Real(*other),
            }
        };
        let map_late = |p: &Port| -> SpliceEnd {
            match p {
                Port::Boundary { side: Side::In, index } => SpliceEnd::Junction(*index),
                Port::Boundary { side: Side::Out, index } => SpliceEnd::Real(Port::Boundary {
                    side: Side::Out,
                    index: *index,
                }),
                Port::Node { node, side, slot } => SpliceEnd::Real(Port::Node {
                    node: node + offset,
                    side: *side,
                    slot: *slot,
                }),
            }
        };
        let mut ends = Vec::new();
        for (a, b) in &earlier.edges {
            ends.push((map_early(a), map_early(b)));
        }
        for (a, b) in &self.edges {
            ends.push((map_late(a), map_late(b)));
        }
        let (edges, loops) = splice(ends, earlier.n_out);
        for e in edges {
            out.edges.insert(e);
        }
        for _ in 0..loops {
            out.mul_sqrtq(2);
        }
        Ok(out)
    }

    /// earlier.then(later) = later ∘ earlier; reads in diagram order.
    pub fn then(&self, later: &Diagram) -> Result<Diagram, DiagramError> {
        later.compose(self)
    }

    pub fn tensor(&self, other: &Diagram) -> Result<Diagram, DiagramError> {
        if self.field != other.field {
            return Err(DiagramError::FieldMismatch);
        }
        let offset = self.next_id;
        let mut out = Diagram::new(&self.field, self.n_in + other.n_in, self.n_out + other.n_out);
        out.scalar = self.scalar.mul(&other.scalar);
        out.next_id = offset + other.next_id;
        out.nodes = self.nodes.clone();
        out.edges = self.edges.clone();
        for (id, node) in &other.nodes {
            out.nodes.insert(id + offset, node.clone());
        }
        let shift = |p: &Port| -> Port {
            match p {
                Port::Boundary { side: Side::In, index } => Port::Boundary {
                    side: Side::In,
                    index: index + self.n_in,
                },
                Port::Boundary { side: Side::Out, index } => Port::Boundary {
                    side: Side::Out,
                    index: index + self.n_out,
                },
                Port::Node { node, side, slot } => Port::Node {
                    node: node + offset,
                    side: *side,
                    slot: *slot,
                },
            }
        };
        for (a, b) in &other.edges {
            out.edges.insert(norm_edge(shift(a), shift(b)));
        }
        Ok(out)
    }

    /// Turn the last `count` inputs into trailing outputs with cup spiders.
    pub fn bend_inputs_to_outputs(&self, count: usize) -> Result<Diagram, DiagramError> {
        if count > self.n_in {
            return Err(DiagramError::ArityMismatch {
                expected: count,
                got: self.n_in,
            });
        }
        let keep = self.n_in - count;
        let mut out = self.clone();
        out.label = None;
        out.n_in = keep;
        out.n_out = self.n_out + count;
        let mut edges: Vec<(Port, Port)> = out.edges.iter().cloned().collect();
        out.edges.clear();
        for k in 0..count {
            let old = Port::Boundary { side: Side::In, index: keep + k };
            let cup = out.add_node(NodeKind::Z, 0, 2);
            for (a, b) in edges.iter_mut() {
                for p in [&mut *a, &mut *b] {
                    if *p == old {
                        *p = Port::Node { node: cup, side: Side::Out, slot: 0 };
                    }
                }
            }
            edges.push(norm_edge(
                Port::Node { node: cup, side: Side::Out, slot: 1 },
                Port::Boundary { side: Side::Out, index: self.n_out + k },
            ));
        }
        for (a, b) in edges {
            out.edges.insert(norm_edge(a, b));
        }
        Ok(out)
    }

    /// Turn the last `count` outputs into trailing inputs with cap spiders.
    pub fn bend_outputs_to_inputs(&self, count: usize) -> Result<Diagram, DiagramError> {
        if count > self.n_out {
            return Err(DiagramError::ArityMismatch {
                expected: count,
                got: self.n_out,
            });
        }
        let keep = self.n_out - count;
        let mut out = self.clone();
        out.label = None;
        out.n_out = keep;
        out.n_in = self.n_in + count;
        let mut edges: Vec<(Port, Port)> = out.edges.iter().cloned().collect();
        out.edges.clear();
        for k in 0..count {
            let old = Port::Boundary { side: Side::Out, index: keep + k };
            let cap = out.add_node(NodeKind::Z, 2, 0);
            for (a, b) in edges.iter_mut() {
                for p in [&mut *a, &mut *b] {
                    if *p == old {
                        *p = Port::Node { node: cap, side: Side::In, slot: 0 };
                    }
                }
            }
            edges.push(norm_edge(
                Port::Node { node: cap, side: Side::In, slot: 1 },
                Port::Boundary { side: Side::In, index: self.n_in + k },
            ));
        }
        for (a, b) in edges {
            out.edges.insert(norm_edge(a, b));
        }
        Ok(out)
    }

    /// Entrywise complex conjugate: every decoration and the global factor
    /// are conjugated, wiring untouched.
    pub fn conjugate(&self) -> Diagram {
        let (p, t) = (self.field.p(), self.field.t() as u32);
        let mut out = self.clone();
        out.label = None;
        out.scalar = out.scalar.conj();
        for node in out.nodes.values_mut() {
            if let NodeKind::H(phase) = &node.kind {
                node.kind = NodeKind::H(phase.conj(p, t));
            }
        }
        out
    }

    // ---- serialization ----

    pub fn to_json(&self) -> serde_json::Value {
        let port_json = |p: &Port| -> serde_json::Value {
            match p {
                Port::Boundary { side, index } => {
                    serde_json::json!(["b", side.tag(), index])
                }
                Port::Node { node, side, slot } => {
                    serde_json::json!(["n", node, side.tag(), slot])
                }
            }
        };
        let nodes: Vec<serde_json::Value> = self
            .nodes
            .iter()
            .map(|(id, node)| {
                let (kind, phase) = match &node.kind {
                    NodeKind::Z => ("Z", serde_json::Value::Null),
                    NodeKind::H(Phase::Default) => ("H", serde_json::Value::Null),
                    NodeKind::H(Phase::Value(s)) => ("H", s.to_json()),
                    NodeKind::Kappa => ("KAPPA", serde_json::Value::Null),
                };
                serde_json::json!({
                    "id": id,
                    "kind": kind,
                    "phase": phase,
                    "in_ports": node.in_ports,
                    "out_ports": node.out_ports,
                })
            })
            .collect();
        let edges: Vec<serde_json::Value> = self
            .edges
            .iter()
            .map(|(a, b)| serde_json::json!([port_json(a), port_json(b)]))
            .collect();
        let inputs: Vec<serde_json::Value> = (0..self.n_in)
            .map(|i| serde_json::json!(["b", "in", i]))
            .collect();
        let outputs: Vec<serde_json::Value> = (0..self.n_out)
            .map(|o| serde_json::json!(["b", "out", o]))
            .collect();
        serde_json::json!({
            "field": self.field.to_json(),
            "nodes": nodes,
            "edges": edges,
            "inputs": inputs,
            "outputs": outputs,
            "scalar": self.scalar.to_json(),
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Diagram, DiagramError> {
        let bad = |m: &str| DiagramError::BadJson(m.to_string());
        let field = FieldSpec::from_json(v.get("field").ok_or_else(|| bad("missing field"))?)
            .map_err(DiagramError::Field)?;
        let (p, t) = (field.p(), field.t() as u32);
        let inputs = v
            .get("inputs")
            .and_then(|x| x.as_array())
            .ok_or_else(|| bad("missing inputs"))?;
        let outputs = v
            .get("outputs")
            .and_then(|x| x.as_array())
            .ok_or_else(|| bad("missing outputs"))?;
        let mut d = Diagram::new(&field, inputs.len(), outputs.len());
        let parse_port = |x: &serde_json::Value| -> Result<Port, DiagramError> {
            let arr = x.as_array().ok_or_else(|| bad("port must be an array"))?;
            let tag = arr
                .first()
                .and_then(|s| s.as_str())
                .ok_or_else(|| bad("port owner tag"))?;
            match tag {
                "b" => {
                    if arr.len() != 3 {
                        return Err(bad("boundary port needs [\"b\", side, index]"));
                    }
                    let side = arr[1]
                        .as_str()
                        .and_then(Side::from_tag)
                        .ok_or_else(|| bad("port side"))?;
                    let index = arr[2]
                        .as_u64()
                        .ok_or_else(|| bad("port index"))? as usize;
                    Ok(Port::Boundary { side, index })
                }
                "n" => {
                    if arr.len() != 4 {
                        return Err(bad("node port needs [\"n\", id, side, slot]"));
                    }
                    let node = arr[1].as_u64().ok_or_else(|| bad("node id"))?;
                    let side = arr[2]
                        .as_str()
                        .and_then(Side::from_tag)
                        .ok_or_else(|| bad("port side"))?;
                    let slot = arr[3].as_u64().ok_or_else(|| bad("port slot"))? as usize;
                    Ok(Port::Node { node, side, slot })
                }
                _ => Err(bad("port owner must be \"b\" or \"n\"")),
            }
        };
        // boundary lists must be the canonical enumerations, in order
        for (i, x) in inputs.iter().enumerate() {
            if parse_port(x)? != (Port::Boundary { side: Side::In, index: i }) {
                return Err(bad("inputs must list boundary in-ports in order"));
            }
        }
        for (o, x) in outputs.iter().enumerate() {
            if parse_port(x)? != (Port::Boundary { side: Side::Out, index: o }) {
                return Err(bad("outputs must list boundary out-ports in order"));
            }
        }
        for nv in v
            .get("nodes")
            .and_then(|x| x.as_array())
            .ok_or_else(|| bad("missing nodes"))?
        {
            let id = nv
                .get("id")
                .and_then(|x| x.as_u64())
                .ok_or_else(|| bad("node id"))?;
            let in_ports = nv
                .get("in_ports")
                .and_then(|x| x.as_u64())
                .ok_or_else(|| bad("in_ports"))? as usize;
            let out_ports = nv
                .get("out_ports")
                .and_then(|x| x.as_u64())
                .ok_or_else(|| bad("out_ports"))? as usize;
            let phase = nv.get("phase").unwrap_or(&serde_json::Value::Null);
            let kind = match nv.get("kind").and_then(|x| x.as_str()) {
                Some("Z") => NodeKind::Z,
                Some("H") => {
                    if phase.is_null() {
                        NodeKind::H(Phase::Default)
                    } else {
                        let s = Scalar::from_json(phase, p, t)
                            .map_err(|_| bad("unreadable phase"))?;
                        NodeKind::H(Phase::Value(s))
                    }
                }
                Some("KAPPA") => NodeKind::Kappa,
                _ => return Err(bad("unknown node kind")),
            };
            if d.nodes.insert(id, Node { kind, in_ports, out_ports }).is_some() {
                return Err(bad("duplicate node id"));
            }
            d.next_id = d.next_id.max(id + 1);
        }
        for ev in v
            .get("edges")
            .and_then(|x| x.as_array())
            .ok_or_else(|| bad("missing edges"))?
        {
            let pair = ev.as_array().ok_or_else(|| bad("edge must be a pair"))?;
            if pair.len() != 2 {
                return Err(bad("edge must be a pair"));
            }
            let a = parse_port(&pair[0])?;
            let b = parse_port(&pair[1])?;
            if a == b {
                return Err(bad("edge endpoints coincide"));
            }
            d.edges.insert(norm_edge(a, b));
        }
        d.scalar = Scalar::from_json(v.get("scalar").ok_or_else(|| bad("missing scalar"))?, p, t)
            .map_err(|_| bad("unreadable scalar"))?;
        d.validate()?;
        Ok(d)
    }
}

impl std::fmt::Display for Diagram {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (mut z, mut h, mut k) = (0, 0, 0);
        for n in self.nodes.values() {
            match n.kind {
                NodeKind::Z => z += 1,
                NodeKind::H(_) => h += 1,
                NodeKind::Kappa => k += 1,
            }
        }
        if let Some(l) = &self.label {
            write!(f, "{l}: ")?;
        }
        write!(
            f,
            "{} -> {} over GF({}), {} nodes (Z:{z} H:{h} κ:{k}), scalar {}",
            self.n_in,
            self.n_out,
            self.field.q(),
            self.nodes.len(),
            self.scalar
        )
    }
}

// ---- derived gadget library ----

impl Diagram {
    /// q^((m+n)/2 − 1) · H^⊗m ∘ Z(m,n) ∘ H^⊗n. On basis states this is the
    /// "sum of all legs is zero" tensor.
    pub fn x_spider(field: &FieldSpec, m: usize, n: usize) -> Diagram {
        let mut d = Diagram::new(field, n, m);
        let z = d.add_node(NodeKind::Z, n, m);
        for i in 0..n {
            let h = d.add_node(NodeKind::H(Phase::Default), 1, 1);
            d.add_edge(
                Port::Boundary { side: Side::In, index: i },
                Port::Node { node: h, side: Side::In, slot: 0 },
            )
            .unwrap();
            d.add_edge(
                Port::Node { node: h, side: Side::Out, slot: 0 },
                Port::Node { node: z, side: Side::In, slot: i },
            )
            .unwrap();
        }
        for o in 0..m {
            let h = d.add_node(NodeKind::H(Phase::Default), 1, 1);
            d.add_edge(
                Port::Node { node: z, side: Side::Out, slot: o },
                Port::Node { node: h, side: Side::In, slot: 0 },
            )
            .unwrap();
            d.add_edge(
                Port::Node { node: h, side: Side::Out, slot: 0 },
                Port::Boundary { side: Side::Out, index: o },
            )
            .unwrap();
        }
        d.mul_sqrtq(m as i64 + n as i64 - 2);
        d.with_label(format!("x_spider({m},{n})"))
    }

    /// Two chained H-boxes: basis negation Σ|−i⟩⟨i|.
    pub fn neg(field: &FieldSpec) -> Diagram {
        Diagram::h_box(field, 1, 1)
            .then(&Diagram::h_box(field, 1, 1))
            .unwrap()
            .with_label("neg")
    }

    /// Two-argument adder Σ|i+j⟩⟨i|⟨j|.
    pub fn add2(field: &FieldSpec) -> Diagram {
        Diagram::x_spider(field, 1, 2)
            .then(&Diagram::neg(field))
            .unwrap()
            .with_label("add2")
    }

    /// n-argument adder. n = 0 prepares the additive identity.
    pub fn adder(field: &FieldSpec, n: usize) -> Diagram {
        match n {
            0 => Diagram::zero_state(field),
            1 => Diagram::identity(field, 1),
            _ => {
                let prev = Diagram::adder(field, n - 1);
                let step = Diagram::add2(field);
                prev.tensor(&Diagram::identity(field, 1))
                    .unwrap()
                    .then(&step)
                    .unwrap()
                    .with_label(format!("adder({n})"))
            }
        }
    }

    /// |0⟩ exactly.
    pub fn zero_state(field: &FieldSpec) -> Diagram {
        Diagram::x_spider(field, 1, 0).with_label("zero_state")
    }

    /// n-argument multiplier Σ|i₁·…·i_n⟩⟨i⃗|; n = 0 prepares |1⟩.
    pub fn mult_n(field: &FieldSpec, n: usize) -> Diagram {
        Diagram::h_box(field, 1, n)
            .then(&Diagram::h_dagger(field, 1, 1))
            .unwrap()
            .with_label(format!("mult_n({n})"))
    }

    /// Σ|i·j⟩⟨i|⟨j|.
    pub fn mult2(field: &FieldSpec) -> Diagram {
        Diagram::mult_n(field, 2).with_label("mult2")
    }

    /// |1⟩ exactly.
    pub fn one_state(field: &FieldSpec) -> Diagram {
        Diagram::mult_n(field, 0).with_label("one_state")
    }

    /// Σ_{u,v} |M_v^⊤ u⟩⟨u|⟨v|: input 0 is the vector, input 1 selects the
    /// transposed multiplication matrix. Built from an H-box with one input
    /// leg bent to the boundary input, which is exactly where the missing
    /// flexsymmetry shows: the bent leg stays on the box's out-side.
    pub fn trans_mult(field: &FieldSpec) -> Diagram {
        let mut d = Diagram::new(field, 2, 1);
        let hb = d.add_node(NodeKind::H(Phase::Default), 1, 2);
        let hd = d.add_node(
            NodeKind::H(Phase::Value(Scalar::omega_pow(
                field.p(),
                field.t() as u32,
                field.p() - 1,
            ))),
            1,
            1,
        );
        // out-side slot 0 feeds the dagger box; out-side slot 1 is the bent
        // selector leg, and the box's in-side leg carries the vector
        d.add_edge(
            Port::Node { node: hb, side: Side::Out, slot: 0 },
            Port::Node { node: hd, side: Side::In, slot: 0 },
        )
        .unwrap();
        d.add_edge(
            Port::Node { node: hb, side: Side::In, slot: 0 },
            Port::Boundary { side: Side::In, index: 0 },
        )
        .unwrap();
        d.add_edge(
            Port::Node { node: hb, side: Side::Out, slot: 1 },
            Port::Boundary { side: Side::In, index: 1 },
        )
        .unwrap();
        d.add_edge(
            Port::Node { node: hd, side: Side::Out, slot: 0 },
            Port::Boundary { side: Side::Out, index: 0 },
        )
        .unwrap();
        d.with_label("trans_mult")
    }

    /// Σ|i+1⟩⟨i|.
    pub fn pauli_x(field: &FieldSpec) -> Diagram {
        Diagram::one_state(field)
            .tensor(&Diagram::identity(field, 1))
            .unwrap()
            .then(&Diagram::add2(field))
            .unwrap()
            .with_label("pauli_x")
    }

    /// Σ_v |M_v^⊤ 1⟩⟨v|, the wire-bending repair map for H-boxes.
    pub fn dualizer(field: &FieldSpec) -> Diagram {
        Diagram::one_state(field)
            .tensor(&Diagram::identity(field, 1))
            .unwrap()
            .then(&Diagram::trans_mult(field))
            .unwrap()
            .with_label("dualizer")
    }

    /// H-box decorated with ω^(−1): the adjoint of the default box.
    pub fn h_dagger(field: &FieldSpec, m: usize, n: usize) -> Diagram {
        let r = Scalar::omega_pow(field.p(), field.t() as u32, field.p() - 1);
        Diagram::h_box_phased(field, m, n, r)
            .unwrap()
            .with_label(format!("h_dagger({m},{n})"))
    }

    /// |residue⟩ for 0 ≤ c < p: the Pauli-X gadget applied c times to |0⟩.
    fn residue_state(field: &FieldSpec, c: u64) -> Diagram {
        let mut d = Diagram::zero_state(field);
        for _ in 0..c {
            d = d.then(&Diagram::pauli_x(field)).unwrap();
        }
        d
    }

    /// |κ^tau⟩ exactly: a multiplication chain over named-element states,
    /// compensated by q^(−tau/2) because each preparation carries √q.
    fn kappa_power(field: &FieldSpec, tau: usize) -> Diagram {
        if tau == 0 {
            return Diagram::one_state(field);
        }
        let mut d = Diagram::kappa_state(field);
        for _ in 1..tau {
            d = d
                .tensor(&Diagram::kappa_state(field))
                .unwrap()
                .then(&Diagram::mult2(field))
                .unwrap();
        }
        d.mul_sqrtq(-(tau as i64));
        d
    }

    /// |j⟩ exactly, for any j ∈ F_q, assembled digit by digit on the power
    /// basis of κ.
    pub fn x_lollipop(field: &FieldSpec, j: &FieldElement) -> Result<Diagram, DiagramError> {
        field.check(j)?;
        let digits = j.coeffs().to_vec();
        let mut terms: Vec<Diagram> = Vec::new();
        for (tau, &c) in digits.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let term = if tau == 0 {
                Diagram::residue_state(field, c)
            } else if c == 1 {
                Diagram::kappa_power(field, tau)
            } else {
                Diagram::residue_state(field, c)
                    .tensor(&Diagram::kappa_power(field, tau))
                    .unwrap()
                    .then(&Diagram::mult2(field))
                    .unwrap()
            };
            terms.push(term);
        }
        let mut acc = match terms.pop() {
            None => Diagram::zero_state(field),
            Some(t) => t,
        };
        while let Some(t) = terms.pop() {
            acc = acc
                .tensor(&t)
                .unwrap()
                .then(&Diagram::add2(field))
                .unwrap();
        }
        Ok(acc.with_label(format!("x_lollipop({j})")))
    }

    /// √q|j⟩ exactly, the Z-decorated basis preparation.
    pub fn z_lollipop(field: &FieldSpec, j: &FieldElement) -> Result<Diagram, DiagramError> {
        let mut d = Diagram::x_lollipop(field, j)?;
        d.mul_sqrtq(1);
        Ok(d.with_label(format!("z_lollipop({j})")))
    }

    /// A closed diagram whose value is q^(n/2), built from generators only
    /// (the global scalar factor stays 1).
    pub fn scalar_gadget(field: &FieldSpec, n: i64) -> Diagram {
        // Σ_i ⟨i| applied to √q|κ⟩ is exactly √q.
        let sqrt_up = || {
            Diagram::kappa_state(field)
                .then(&Diagram::z_spider(field, 0, 1))
                .unwrap()
        };
        // √q · (ω/√q) · (ω^(−1)/√q) = q^(−1/2): the two decorated boxes
        // evaluate the 1-state and contribute conjugate phases.
        let sqrt_down = || {
            let up = sqrt_up();
            let h_eff = Diagram::one_state(field)
                .then(&Diagram::h_box(field, 0, 1))
                .unwrap();
            let hd_eff = Diagram::one_state(field)
                .then(&Diagram::h_dagger(field, 0, 1))
                .unwrap();
            up.tensor(&h_eff).unwrap().tensor(&hd_eff).unwrap()
        };
        let mut d = Diagram::empty(field);
        for _ in 0..n.abs() {
            let piece = if n > 0 { sqrt_up() } else { sqrt_down() };
            d = d.tensor(&piece).unwrap();
        }
        d.with_label(format!("scalar_gadget({n})"))
    }

    // ---- pinned-argument arithmetic gadgets (each exactly the stated map) ----

    /// |i⟩ ↦ |j·i⟩ with the constant in the first multiplier port.
    pub fn mult_by(field: &FieldSpec, j: &FieldElement) -> Result<Diagram, DiagramError> {
        let mut d = Diagram::z_lollipop(field, j)?
            .tensor(&Diagram::identity(field, 1))?
            .then(&Diagram::mult2(field))?;
        d.mul_sqrtq(-1);
        Ok(d.with_label(format!("mult_by({j})")))
    }

    /// |i⟩ ↦ |i·j⟩ with the constant in the second multiplier port.
    pub fn mult_by_mirror(field: &FieldSpec, j: &FieldElement) -> Result<Diagram, DiagramError> {
        let mut d = Diagram::identity(field, 1)
            .tensor(&Diagram::z_lollipop(field, j)?)?
            .then(&Diagram::mult2(field))?;
        d.mul_sqrtq(-1);
        Ok(d.with_label(format!("mult_by_mirror({j})")))
    }

    /// |u⟩ ↦ |M_j^⊤ u⟩: the transposed multiplication matrix itself.
    pub fn trans_mult_by(field: &FieldSpec, j: &FieldElement) -> Result<Diagram, DiagramError> {
        let mut d = Diagram::identity(field, 1)
            .tensor(&Diagram::z_lollipop(field, j)?)?
            .then(&Diagram::trans_mult(field))?;
        d.mul_sqrtq(-1);
        Ok(d.with_label(format!("trans_mult_by({j})")))
    }

    /// |v⟩ ↦ |M_v^⊤ j⟩: the selector map with the vector pinned to j.
    pub fn trans_mult_of(field: &FieldSpec, j: &FieldElement) -> Result<Diagram, DiagramError> {
        let mut d = Diagram::z_lollipop(field, j)?
            .tensor(&Diagram::identity(field, 1))?
            .then(&Diagram::trans_mult(field))?;
        d.mul_sqrtq(-1);
        Ok(d.with_label(format!("trans_mult_of({j})")))
    }
}

/// A random well-formed diagram, grown as a layered circuit so validity
/// holds by construction. Wire count stays small (desk scale).
pub fn random_diagram(field: &FieldSpec, rng: &mut impl Rng) -> Diagram {
    let (p, t) = (field.p(), field.t() as u32);
    let n_in = rng.gen_range(0..=3usize);
    let mut d = Diagram::identity(field, n_in);
    let mut width = n_in;
    let layers = rng.gen_range(1..=5usize);
    for _ in 0..layers {
        // grow or cap when the frontier is at its limits
        let choice = if width == 0 {
            0
        } else if width >= 4 {
            rng.gen_range(1..=3)
        } else {
            rng.gen_range(0..=4)
        };
        let layer = match choice {
            0 => {
                // tensor on a fresh state-like piece
                let piece = match rng.gen_range(0..3) {
                    0 => Diagram::kappa_state(field),
                    1 => Diagram::h_box(field, 1, 0),
                    _ => Diagram::z_spider(field, rng.gen_range(1..=2), 0),
                };
                let add = piece.n_outputs();
                let l = Diagram::identity(field, width).tensor(&piece).unwrap();
                width += add;
                l
            }
            1 => {
                // generator consuming a suffix of the frontier
                let take = rng.gen_range(1..=width.min(2));
                let m = rng.gen_range(0..=2usize);
                let phase_pick = rng.gen_range(0..3);
                let g = match phase_pick {
                    0 => Diagram::z_spider(field, m, take),
                    1 => Diagram::h_box(field, m, take),
                    _ => Diagram::h_box_phased(
                        field,
                        m,
                        take,
                        Scalar::omega_pow(p, t, rng.gen_range(0..field.p())),
                    )
                    .unwrap(),
                };
                let l = Diagram::identity(field, width - take).tensor(&g).unwrap();
                width = width - take + m;
                l
            }
            2 => {
                let mut perm: Vec<usize> = (0..width).collect();
                for i in (1..width).rev() {
                    perm.swap(i, rng.gen_range(0..=i));
                }
                Diagram::permutation(field, &perm).unwrap()
            }
            3 => {
                let take = rng.gen_range(1..=width.min(2));
                let g = Diagram::h_dagger(field, rng.gen_range(0..=2), take);
                let m = g.n_outputs();
                let l = Diagram::identity(field, width - take).tensor(&g).unwrap();
                width = width - take + m;
                l
            }
            _ => {
                let j = field.element_at(rng.gen_range(0..field.q()));
                let g = if rng.gen_bool(0.5) {
                    Diagram::z_lollipop(field, &j).unwrap()
                } else {
                    Diagram::x_lollipop(field, &j).unwrap()
                };
                let l = Diagram::identity(field, width).tensor(&g).unwrap();
                width += 1;
                l
            }
        };
        d = d.then(&layer).unwrap();
    }
    if rng.gen_bool(0.3) {
        d.mul_scalar(&Scalar::omega_pow(p, t, rng.gen_range(0..field.p())));
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn gf(q: u64) -> FieldSpec {
        FieldSpec::of_order(q).unwrap()
    }

    #[test]
    fn builders_validate() {
        let f = gf(4);
        for d in [
            Diagram::empty(&f),
            Diagram::identity(&f, 3),
            Diagram::z_spider(&f, 2, 3),
            Diagram::h_box(&f, 0, 2),
            Diagram::kappa_state(&f),
            Diagram::x_spider(&f, 1, 2),
            Diagram::neg(&f),
            Diagram::add2(&f),
            Diagram::zero_state(&f),
            Diagram::mult2(&f),
            Diagram::one_state(&f),
            Diagram::trans_mult(&f),
            Diagram::pauli_x(&f),
            Diagram::dualizer(&f),
            Diagram::h_dagger(&f, 2, 1),
            Diagram::scalar_gadget(&f, 3),
            Diagram::scalar_gadget(&f, -2),
            Diagram::adder(&f, 3),
        ] {
            d.validate().unwrap_or_else(|e| panic!("{d}: {e}"));
        }
        for j in f.enumerate() {
            Diagram::x_lollipop(&f, &j).unwrap().validate().unwrap();
            Diagram::z_lollipop(&f, &j).unwrap().validate().unwrap();
            if !j.is_zero() {
                Diagram::mult_by(&f, &j).unwrap().validate().unwrap();
                Diagram::trans_mult_by(&f, &j).unwrap().validate().unwrap();
            }
        }
    }

    #[test]
    fn arities() {
        let f = gf(2);
        let d = Diagram::z_spider(&f, 2, 3);
        assert_eq!((d.n_inputs(), d.n_outputs()), (3, 2));
        assert_eq!(Diagram::add2(&f).n_inputs(), 2);
        assert_eq!(Diagram::add2(&f).n_outputs(), 1);
        assert_eq!(Diagram::trans_mult(&f).n_inputs(), 2);
        assert_eq!(Diagram::dualizer(&f).n_inputs(), 1);
        assert_eq!(Diagram::scalar_gadget(&f, -3).n_inputs(), 0);
    }

    #[test]
    fn compose_checks_arity_and_field() {
        let f2 = gf(2);
        let f3 = gf(3);
        let a = Diagram::z_spider(&f2, 2, 1);
        let b = Diagram::z_spider(&f2, 1, 1);
        assert!(matches!(
            b.compose(&a),
            Err(DiagramError::ArityMismatch { expected: 1, got: 2 })
        ));
        let c = Diagram::z_spider(&f3, 1, 2);
        assert!(matches!(c.compose(&a), Err(DiagramError::FieldMismatch)));
        a.compose(&b).unwrap().validate().unwrap();
    }

    #[test]
    fn compose_splices_through_wires() {
        let f = gf(3);
        // wire ∘ wire = wire
        let id = Diagram::identity(&f, 1);
        let d = id.then(&id).unwrap();
        d.validate().unwrap();
        assert_eq!(d.nodes().len(), 0);
        assert_eq!(d.edges().len(), 1);
        // spider ∘ wire keeps a single direct edge per side
        let d = id.then(&Diagram::z_spider(&f, 1, 1)).unwrap();
        assert_eq!(d.nodes().len(), 1);
        assert_eq!(d.edges().len(), 2);
    }

    #[test]
    fn closed_loop_collects_q() {
        let f = gf(5);
        // bare bends composed into a circle: value q
        let mut cupish = Diagram::new(&f, 0, 2);
        cupish
            .add_edge(
                Port::Boundary { side: Side::Out, index: 0 },
                Port::Boundary { side: Side::Out, index: 1 },
            )
            .unwrap();
        let mut capish = Diagram::new(&f, 2, 0);
        capish
            .add_edge(
                Port::Boundary { side: Side::In, index: 0 },
                Port::Boundary { side: Side::In, index: 1 },
            )
            .unwrap();
        let d = cupish.then(&capish).unwrap();
        d.validate().unwrap();
        assert_eq!(d.nodes().len(), 0);
        assert!(d.scalar_factor().equal(&Scalar::from_int(5, 1, 5)));
    }

    #[test]
    fn tensor_shifts_boundaries() {
        let f = gf(2);
        let d = Diagram::z_spider(&f, 1, 1)
            .tensor(&Diagram::h_box(&f, 1, 1))
            .unwrap();
        d.validate().unwrap();
        assert_eq!((d.n_inputs(), d.n_outputs()), (2, 2));
        assert_eq!(d.nodes().len(), 2);
    }

    #[test]
    fn bending_round_trip_shape() {
        let f = gf(4);
        let d = Diagram::mult2(&f);
        let bent = d.bend_inputs_to_outputs(1).unwrap();
        bent.validate().unwrap();
        assert_eq!((bent.n_inputs(), bent.n_outputs()), (1, 2));
        let back = bent.bend_outputs_to_inputs(1).unwrap();
        back.validate().unwrap();
        assert_eq!((back.n_inputs(), back.n_outputs()), (2, 1));
        // fully bending the identity leaves a single cup spider
        let cup = Diagram::identity(&f, 1).bend_inputs_to_outputs(1).unwrap();
        cup.validate().unwrap();
        assert_eq!((cup.n_inputs(), cup.n_outputs()), (0, 2));
        assert_eq!(cup.nodes().len(), 1);
    }

    #[test]
    fn conjugate_is_involution() {
        let f = gf(4);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let d = random_diagram(&f, &mut rng);
            let twice = d.conjugate().conjugate();
            assert_eq!(twice.nodes().len(), d.nodes().len());
            assert_eq!(twice.edges(), d.edges());
            assert!(twice.scalar_factor().equal(d.scalar_factor()));
        }
        // default decoration conjugates to the explicit inverse root
        let h = Diagram::h_box(&f, 1, 1).conjugate();
        let hd = Diagram::h_dagger(&f, 1, 1);
        assert!(h.same_graph(&hd));
    }

    #[test]
    fn occupancy_is_enforced() {
        let f = gf(2);
        let mut d = Diagram::new(&f, 1, 1);
        d.add_edge(
            Port::Boundary { side: Side::In, index: 0 },
            Port::Boundary { side: Side::Out, index: 0 },
        )
        .unwrap();
        let err = d
            .add_edge(
                Port::Boundary { side: Side::In, index: 0 },
                Port::Boundary { side: Side::Out, index: 0 },
            )
            .unwrap_err();
        assert!(matches!(err, DiagramError::PortInUse(_)));
        let err = d
            .add_edge(
                Port::Boundary { side: Side::In, index: 5 },
                Port::Boundary { side: Side::Out, index: 6 },
            )
            .unwrap_err();
        assert!(matches!(err, DiagramError::BadPort(_)));
        // dangling boundary port
        let d2 = Diagram::new(&f, 1, 0);
        assert!(matches!(d2.validate(), Err(DiagramError::Dangling(_))));
    }

    #[test]
    fn json_round_trip() {
        let f = gf(9);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..25 {
            let d = random_diagram(&f, &mut rng);
            let back = Diagram::from_json(&d.to_json()).unwrap();
            assert!(back.same_graph(&d));
        }
        let d = Diagram::h_box_phased(&f, 1, 2, Scalar::sqrtq_pow(3, 2, 1)).unwrap();
        let back = Diagram::from_json(&d.to_json()).unwrap();
        assert!(back.same_graph(&d));
    }

    #[test]
    fn json_rejects_malformed() {
        let f = gf(2);
        let d = Diagram::z_spider(&f, 1, 1);
        let mut v = d.to_json();
        v["edges"] = serde_json::json!([]);
        assert!(Diagram::from_json(&v).is_err());
        let mut v = d.to_json();
        v["nodes"][0]["kind"] = serde_json::json!("Q");
        assert!(Diagram::from_json(&v).is_err());
    }

    #[test]
    fn permutation_rejects_bad_maps() {
        let f = gf(2);
        assert!(Diagram::permutation(&f, &[0, 0]).is_err());
        assert!(Diagram::permutation(&f, &[2, 0]).is_err());
        let p = Diagram::permutation(&f, &[1, 2, 0]).unwrap();
        p.validate().unwrap();
    }

    #[test]
    fn lollipop_rejects_foreign_elements() {
        let f4 = gf(4);
        let f2 = gf(2);
        let j = f2.one();
        assert!(Diagram::x_lollipop(&f4, &j).is_err());
    }

    #[test]
    fn random_diagrams_are_valid() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for q in [2u64, 3, 4, 9] {
            let f = gf(q);
            for _ in 0..50 {
                random_diagram(&f, &mut rng).validate().unwrap();
            }
        }
    }
}
