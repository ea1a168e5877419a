//! The rewrite system: a closed set of diagram equations, instantiated at
//! concrete arities and decorations, with subgraph matching and replacement.
//!
//! An instance carries an explicit left and right diagram of equal boundary
//! arity; soundness is checked by contracting both sides. Matching is
//! structural and conservative: node kinds, arities and decorations must
//! agree exactly, legs on the same side of a node are interchangeable, and
//! a candidate is rejected when the surrounding wires re-enter the matched
//! region (such an overlap cannot be cut cleanly). Replacement splices the
//! right-hand side into the cut, rebalancing the bookkeeping scalar by the
//! two sides' normalization difference.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use thiserror::Error;

use crate::diagram::{splice, Diagram, DiagramError, Node, NodeId, NodeKind, Port, Side, SpliceEnd};
use crate::field::{FieldElement, FieldSpec};
use crate::scalar::Scalar;
use crate::tensor::{contract_numeric, equal_diagrams, TensorError};

#[derive(Debug, Clone, Error)]
pub enum RewriteError {
    #[error("bad rule parameters: {0}")]
    BadParams(String),
    #[error("embedding does not fit the host diagram: {0}")]
    InvalidEmbedding(String),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
}

/// The closed rule set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RuleId {
    /// Two spiders joined by a wire fuse into one.
    Zs,
    /// A box followed by its adjoint is a plain wire.
    Id,
    /// Adding p copies of a value yields zero: the wire disconnects.
    Ch,
    /// Box, adjoint box, box in sequence fuse into one box.
    Hs,
    /// The q-th power map is the identity.
    Spl,
    /// A basis preparation copies through a spider.
    Cp,
    /// Addition commutes with copying.
    Ba1,
    /// Multiplication commutes with copying.
    Ba2,
    /// Two decorated points meeting at a spider multiply their decorations.
    Pm,
    /// Two boxes in sequence negate the wire value.
    DerivedNeg,
    /// A box-transformed preparation copies through the sum spider.
    DerivedCpx,
    /// Four boxes in sequence are a plain wire.
    DerivedH4,
}

impl RuleId {
    pub const ALL: [RuleId; 12] = [
        RuleId::Zs,
        RuleId::Id,
        RuleId::Ch,
        RuleId::Hs,
        RuleId::Spl,
        RuleId::Cp,
        RuleId::Ba1,
        RuleId::Ba2,
        RuleId::Pm,
        RuleId::DerivedNeg,
        RuleId::DerivedCpx,
        RuleId::DerivedH4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleId::Zs => "zs",
            RuleId::Id => "id",
            RuleId::Ch => "ch",
            RuleId::Hs => "hs",
            RuleId::Spl => "spl",
            RuleId::Cp => "cp",
            RuleId::Ba1 => "ba1",
            RuleId::Ba2 => "ba2",
            RuleId::Pm => "pm",
            RuleId::DerivedNeg => "derived-neg",
            RuleId::DerivedCpx => "derived-cpx",
            RuleId::DerivedH4 => "derived-h4",
        }
    }

    pub fn from_name(s: &str) -> Option<RuleId> {
        RuleId::ALL.iter().copied().find(|r| r.name() == s)
    }
}

impl std::fmt::Display for RuleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameters a rule may need; unused ones are ignored.
#[derive(Debug, Clone, Default)]
pub struct RuleParams {
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub j: Option<FieldElement>,
    pub r1: Option<Scalar>,
    pub r2: Option<Scalar>,
}

impl RuleParams {
    pub fn arities(m: usize, n: usize) -> RuleParams {
        RuleParams { m: Some(m), n: Some(n), ..Default::default() }
    }

    pub fn with_element(m: usize, j: FieldElement) -> RuleParams {
        RuleParams { m: Some(m), j: Some(j), ..Default::default() }
    }

    pub fn phases(r1: Scalar, r2: Scalar) -> RuleParams {
        RuleParams { r1: Some(r1), r2: Some(r2), ..Default::default() }
    }
}

/// A rule at concrete parameters: two diagrams asserted equal.
#[derive(Debug, Clone)]
pub struct RuleInstance {
    pub rule: RuleId,
    pub detail: String,
    pub lhs: Diagram,
    pub rhs: Diagram,
}

fn tensor_pow(d: &Diagram, k: usize) -> Diagram {
    let mut acc = Diagram::empty(d.field());
    for _ in 0..k {
        acc = acc.tensor(d).expect("tensor over one field");
    }
    acc
}

fn need<T: Clone>(v: &Option<T>, rule: RuleId, what: &str) -> Result<T, RewriteError> {
    v.clone()
        .ok_or_else(|| RewriteError::BadParams(format!("{rule} needs {what}")))
}

pub fn instantiate(
    rule: RuleId,
    field: &FieldSpec,
    params: &RuleParams,
) -> Result<RuleInstance, RewriteError> {
    let lollipop = |j: &FieldElement| -> Result<Diagram, RewriteError> {
        Diagram::z_lollipop(field, j)
            .map_err(|e| RewriteError::BadParams(format!("{rule}: {e}")))
    };
    let (detail, lhs, rhs) = match rule {
        RuleId::Zs => {
            let m = need(&params.m, rule, "m")?;
            let n = need(&params.n, rule, "n")?;
            let lhs = Diagram::z_spider(field, 1, n).then(&Diagram::z_spider(field, m, 1))?;
            (format!("m={m},n={n}"), lhs, Diagram::z_spider(field, m, n))
        }
        RuleId::Id => {
            let lhs = Diagram::h_box(field, 1, 1).then(&Diagram::h_dagger(field, 1, 1))?;
            (String::new(), lhs, Diagram::identity(field, 1))
        }
        RuleId::Ch => {
            let p = field.p() as usize;
            let lhs = Diagram::z_spider(field, p, 1).then(&Diagram::adder(field, p))?;
            let rhs = Diagram::x_lollipop(field, &field.zero())
                .expect("zero is a field element")
                .tensor(&Diagram::z_spider(field, 0, 1))?;
            (String::new(), lhs, rhs)
        }
        RuleId::Hs => {
            let m = need(&params.m, rule, "m")?;
            let n = need(&params.n, rule, "n")?;
            let lhs = Diagram::h_box(field, 1, n)
                .then(&Diagram::h_dagger(field, 1, 1))?
                .then(&Diagram::h_box(field, m, 1))?;
            (format!("m={m},n={n}"), lhs, Diagram::h_box(field, m, n))
        }
        RuleId::Spl => {
            let q = field.q() as usize;
            let lhs = Diagram::z_spider(field, q, 1).then(&Diagram::mult_n(field, q))?;
            (String::new(), lhs, Diagram::identity(field, 1))
        }
        RuleId::Cp => {
            let m = need(&params.m, rule, "m")?;
            let j = need(&params.j, rule, "j")?;
            let loll = lollipop(&j)?;
            let lhs = loll.then(&Diagram::z_spider(field, m, 1))?;
            let rhs =
                tensor_pow(&loll, m).tensor(&Diagram::scalar_gadget(field, 1 - m as i64))?;
            (format!("m={m},j={j}"), lhs, rhs)
        }
        RuleId::Ba1 | RuleId::Ba2 => {
            let m = need(&params.m, rule, "m")?;
            let n = need(&params.n, rule, "n")?;
            let gadget = match rule {
                RuleId::Ba1 => Diagram::x_spider(field, 1, n),
                _ => Diagram::mult_n(field, n),
            };
            let lhs = gadget.then(&Diagram::z_spider(field, m, 1))?;
            let mut perm = vec![0usize; m * n];
            for a in 0..n {
                for b in 0..m {
                    perm[a * m + b] = b * n + a;
                }
            }
            let rhs = tensor_pow(&Diagram::z_spider(field, m, 1), n)
                .then(&Diagram::permutation(field, &perm)?)?
                .then(&tensor_pow(&gadget, m))?;
            (format!("m={m},n={n}"), lhs, rhs)
        }
        RuleId::Pm => {
            let r1 = need(&params.r1, rule, "r1")?;
            let r2 = need(&params.r2, rule, "r2")?;
            let product = r1
                .checked_mul(&r2)
                .map_err(|e| RewriteError::BadParams(format!("{rule}: {e}")))?;
            let point = |r: &Scalar| -> Result<Diagram, RewriteError> {
                Diagram::h_box_phased(field, 1, 0, r.clone())
                    .map_err(|e| RewriteError::BadParams(format!("{rule}: {e}")))
            };
            let lhs = point(&r1)?
                .tensor(&point(&r2)?)?
                .then(&Diagram::z_spider(field, 1, 2))?
                .tensor(&Diagram::scalar_gadget(field, 1))?;
            (format!("r1={r1},r2={r2}"), lhs, point(&product)?)
        }
        RuleId::DerivedNeg => {
            (String::new(), Diagram::neg(field), Diagram::x_spider(field, 1, 1))
        }
        RuleId::DerivedCpx => {
            let m = need(&params.m, rule, "m")?;
            let j = need(&params.j, rule, "j")?;
            let lhs = lollipop(&j)?
                .then(&Diagram::h_box(field, 1, 1))?
                .then(&Diagram::x_spider(field, m, 1))?;
            let unit = lollipop(&j)?.then(&Diagram::h_dagger(field, 1, 1))?;
            (format!("m={m},j={j}"), lhs, tensor_pow(&unit, m))
        }
        RuleId::DerivedH4 => {
            let h = Diagram::h_box(field, 1, 1);
            let mut lhs = Diagram::identity(field, 1);
            for _ in 0..4 {
                lhs = lhs.then(&h)?;
            }
            (String::new(), lhs, Diagram::identity(field, 1))
        }
    };
    debug_assert_eq!(lhs.n_inputs(), rhs.n_inputs());
    debug_assert_eq!(lhs.n_outputs(), rhs.n_outputs());
    debug_assert!(
        lhs.scalar_factor().as_sqrtq_pow().is_some(),
        "left sides stay pure powers of the field order"
    );
    Ok(RuleInstance { rule, detail, lhs, rhs })
}

/// Contract both sides and compare exactly.
pub fn check_soundness(instance: &RuleInstance) -> Result<bool, TensorError> {
    equal_diagrams(&instance.lhs, &instance.rhs)
}

/// One line of a soundness sweep.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub rule: RuleId,
    pub detail: String,
    pub exact_ok: bool,
    pub float_dev: f64,
}

impl SweepRecord {
    pub fn ok(&self, tol: f64) -> bool {
        self.exact_ok && self.float_dev <= tol
    }
}

/// Every rule over the full parameter grid: arities up to `max_arity`,
/// all field elements, and decorations {1, ω, ω⁻¹, √q}.
pub fn rule_grid(field: &FieldSpec, max_arity: usize) -> Vec<(RuleId, RuleParams)> {
    let (p, t) = (field.p(), field.t() as u32);
    let mut grid = Vec::new();
    for rule in [RuleId::Zs, RuleId::Hs, RuleId::Ba1, RuleId::Ba2] {
        for m in 0..=max_arity {
            for n in 0..=max_arity {
                grid.push((rule, RuleParams::arities(m, n)));
            }
        }
    }
    for rule in [RuleId::Id, RuleId::Ch, RuleId::Spl, RuleId::DerivedNeg, RuleId::DerivedH4] {
        grid.push((rule, RuleParams::default()));
    }
    for rule in [RuleId::Cp, RuleId::DerivedCpx] {
        for m in 0..=max_arity {
            for j in field.enumerate() {
                grid.push((rule, RuleParams::with_element(m, j)));
            }
        }
    }
    let phases = [
        Scalar::one(p, t),
        Scalar::omega_pow(p, t, 1),
        Scalar::omega_pow(p, t, p - 1),
        Scalar::sqrtq_pow(p, t, 1),
    ];
    for r1 in &phases {
        for r2 in &phases {
            grid.push((RuleId::Pm, RuleParams::phases(r1.clone(), r2.clone())));
        }
    }
    grid
}

/// Check the whole grid, in parallel. Exact comparison plus an independent
/// floating contraction of both sides.
pub fn soundness_sweep(field: &FieldSpec, max_arity: usize, tol: f64) -> Vec<SweepRecord> {
    rule_grid(field, max_arity)
        .into_par_iter()
        .map(|(rule, params)| {
            let inst = instantiate(rule, field, &params).expect("grid parameters are valid");
            let exact_ok = check_soundness(&inst).expect("sides have equal arity");
            let float_dev = contract_numeric(&inst.lhs, tol)
                .max_diff(&contract_numeric(&inst.rhs, tol));
            SweepRecord { rule, detail: inst.detail, exact_ok, float_dev }
        })
        .collect()
}

/// Where a rule's left side sits inside a host: node images plus, for every
/// pattern edge, the host edge aligned end-for-end with it.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub nodes: BTreeMap<NodeId, NodeId>,
    pub edges: BTreeMap<(Port, Port), (Port, Port)>,
}

fn kinds_match(a: &Node, b: &Node, p: u64, t: u32) -> bool {
    if a.in_ports != b.in_ports || a.out_ports != b.out_ports {
        return false;
    }
    match (&a.kind, &b.kind) {
        (NodeKind::Z, NodeKind::Z) => true,
        (NodeKind::Kappa, NodeKind::Kappa) => true,
        (NodeKind::H(x), NodeKind::H(y)) => x.resolve(p, t).equal(&y.resolve(p, t)),
        _ => false,
    }
}

/// Pattern edges ordered so that each one (component starts aside) touches a
/// node already seen; keeps the search anchored.
fn connected_edge_order(pattern: &Diagram) -> Vec<(Port, Port)> {
    let mut incident: BTreeMap<NodeId, Vec<(Port, Port)>> = BTreeMap::new();
    for e in pattern.edges() {
        for end in [&e.0, &e.1] {
            if let Port::Node { node, .. } = end {
                incident.entry(*node).or_default().push(*e);
            }
        }
    }
    let mut order = Vec::new();
    let mut placed: BTreeSet<(Port, Port)> = BTreeSet::new();
    let mut seen_nodes: BTreeSet<NodeId> = BTreeSet::new();
    let mut frontier: Vec<NodeId> = Vec::new();
    let all_edges: Vec<(Port, Port)> = pattern.edges().iter().cloned().collect();
    for seed in &all_edges {
        if placed.contains(seed) {
            continue;
        }
        order.push(*seed);
        placed.insert(*seed);
        for end in [&seed.0, &seed.1] {
            if let Port::Node { node, .. } = end {
                if seen_nodes.insert(*node) {
                    frontier.push(*node);
                }
            }
        }
        while let Some(n) = frontier.pop() {
            for e in incident.get(&n).into_iter().flatten() {
                if placed.insert(*e) {
                    order.push(*e);
                }
                for end in [&e.0, &e.1] {
                    if let Port::Node { node, .. } = end {
                        if seen_nodes.insert(*node) {
                            frontier.push(*node);
                        }
                    }
                }
            }
        }
    }
    order
}

struct Matcher<'a> {
    host: &'a Diagram,
    pattern: &'a Diagram,
    p: u64,
    t: u32,
    edge_order: Vec<(Port, Port)>,
    legless: Vec<NodeId>,
    host_port_edge: BTreeMap<Port, (Port, Port)>,
    node_map: BTreeMap<NodeId, NodeId>,
    used_nodes: BTreeSet<NodeId>,
    used_ports: BTreeSet<Port>,
    edge_map: BTreeMap<(Port, Port), (Port, Port)>,
    found: Vec<Embedding>,
}

impl<'a> Matcher<'a> {
    fn new(host: &'a Diagram, pattern: &'a Diagram) -> Matcher<'a> {
        let mut host_port_edge = BTreeMap::new();
        for e in host.edges() {
            host_port_edge.insert(e.0, *e);
            host_port_edge.insert(e.1, *e);
        }
        let wired: BTreeSet<NodeId> = pattern
            .edges()
            .iter()
            .flat_map(|e| [&e.0, &e.1])
            .filter_map(|p| match p {
                Port::Node { node, .. } => Some(*node),
                _ => None,
            })
            .collect();
        let legless: Vec<NodeId> =
            pattern.nodes().keys().filter(|id| !wired.contains(id)).copied().collect();
        Matcher {
            host,
            pattern,
            p: host.field().p(),
            t: host.field().t() as u32,
            edge_order: connected_edge_order(pattern),
            legless,
            host_port_edge,
            node_map: BTreeMap::new(),
            used_nodes: BTreeSet::new(),
            used_ports: BTreeSet::new(),
            edge_map: BTreeMap::new(),
            found: Vec::new(),
        }
    }

    fn other_end(edge: &(Port, Port), this: &Port) -> Port {
        if edge.0 == *this {
            edge.1
        } else {
            edge.0
        }
    }

    /// Can `h` stand in for the far pattern end `pb`? Returns a node binding
    /// when this match would newly map a pattern node.
    fn far_end_fits(&self, pb: &Port, h: &Port) -> Option<Option<(NodeId, NodeId)>> {
        if self.used_ports.contains(h) {
            return None;
        }
        match pb {
            Port::Node { node: pn, side, .. } => match h {
                Port::Node { node: hn, side: hs, .. } if hs == side => {
                    match self.node_map.get(pn) {
                        Some(mapped) => (mapped == hn).then_some(None),
                        None => {
                            if self.used_nodes.contains(hn) {
                                return None;
                            }
                            kinds_match(
                                &self.pattern.nodes()[pn],
                                &self.host.nodes()[hn],
                                self.p,
                                self.t,
                            )
                            .then_some(Some((*pn, *hn)))
                        }
                    }
                }
                _ => None,
            },
            Port::Boundary { .. } => match h {
                // a wire leaving the matched region must not re-enter it
                Port::Node { node: hn, .. } if self.used_nodes.contains(hn) => None,
                _ => Some(None),
            },
        }
    }

    fn assign(&mut self, key: (Port, Port), ha: Port, hb: Port, bind: Option<(NodeId, NodeId)>) {
        self.used_ports.insert(ha);
        self.used_ports.insert(hb);
        self.edge_map.insert(key, (ha, hb));
        if let Some((pn, hn)) = bind {
            self.node_map.insert(pn, hn);
            self.used_nodes.insert(hn);
        }
    }

    fn unassign(&mut self, key: (Port, Port), ha: Port, hb: Port, bind: Option<(NodeId, NodeId)>) {
        self.used_ports.remove(&ha);
        self.used_ports.remove(&hb);
        self.edge_map.remove(&key);
        if let Some((pn, hn)) = bind {
            self.node_map.remove(&pn);
            self.used_nodes.remove(&hn);
        }
    }

    /// Try to place pattern edge k with end `pa` sitting on host node `hn`.
    fn try_anchored(&mut self, k: usize, pa: Port, pb: Port, hn: NodeId, extra: Option<(NodeId, NodeId)>) {
        let key = self.edge_order[k];
        let (side, count) = match pa {
            Port::Node { side, .. } => (
                side,
                match side {
                    Side::In => self.host.nodes()[&hn].in_ports,
                    Side::Out => self.host.nodes()[&hn].out_ports,
                },
            ),
            _ => unreachable!("anchored end is a node port"),
        };
        for slot in 0..count {
            let ha = Port::Node { node: hn, side, slot };
            if self.used_ports.contains(&ha) {
                continue;
            }
            let Some(edge) = self.host_port_edge.get(&ha).copied() else { continue };
            let hb = Matcher::other_end(&edge, &ha);
            let Some(bind) = self.far_end_fits(&pb, &hb) else { continue };
            let (first, second) = if key.0 == pa { (ha, hb) } else { (hb, ha) };
            // both a fresh anchor binding and a far-end binding may apply
            if let Some(x) = extra {
                self.node_map.insert(x.0, x.1);
                self.used_nodes.insert(x.1);
            }
            self.assign(key, first, second, bind);
            self.descend(k + 1);
            self.unassign(key, first, second, bind);
            if let Some(x) = extra {
                self.node_map.remove(&x.0);
                self.used_nodes.remove(&x.1);
            }
        }
    }

    fn descend(&mut self, k: usize) {
        if k == self.edge_order.len() {
            let legless: Vec<NodeId> = self.legless.clone();
            self.place_legless(&legless, 0);
            return;
        }
        let (pa, pb) = self.edge_order[k];
        let anchored = |m: &Matcher, p: &Port| match p {
            Port::Node { node, .. } => m.node_map.contains_key(node),
            _ => false,
        };
        if anchored(self, &pa) || anchored(self, &pb) {
            let (from, to) = if anchored(self, &pa) { (pa, pb) } else { (pb, pa) };
            let Port::Node { node: pn, .. } = from else { unreachable!() };
            let hn = self.node_map[&pn];
            self.try_anchored(k, from, to, hn, None);
            return;
        }
        match (&pa, &pb) {
            (Port::Node { node: pn, .. }, _) | (_, Port::Node { node: pn, .. }) => {
                let (from, to) = if matches!(pa, Port::Node { .. }) { (pa, pb) } else { (pb, pa) };
                let pn = *pn;
                let pnode = self.pattern.nodes()[&pn].clone();
                let host_ids: Vec<NodeId> = self.host.nodes().keys().copied().collect();
                for hn in host_ids {
                    if self.used_nodes.contains(&hn) {
                        continue;
                    }
                    if !kinds_match(&pnode, &self.host.nodes()[&hn], self.p, self.t) {
                        continue;
                    }
                    self.try_anchored(k, from, to, hn, Some((pn, hn)));
                }
            }
            _ => {
                // a bare boundary-to-boundary wire in the pattern
                let key = self.edge_order[k];
                let host_edges: Vec<(Port, Port)> = self.host.edges().iter().cloned().collect();
                for edge in host_edges {
                    for (ha, hb) in [(edge.0, edge.1), (edge.1, edge.0)] {
                        if self.used_ports.contains(&ha) {
                            continue;
                        }
                        let ok_a = self.far_end_fits(&pa, &ha).is_some();
                        let Some(bind) = self.far_end_fits(&pb, &hb) else { continue };
                        if !ok_a || bind.is_some() {
                            continue;
                        }
                        self.assign(key, ha, hb, None);
                        self.descend(k + 1);
                        self.unassign(key, ha, hb, None);
                    }
                }
            }
        }
    }

    fn place_legless(&mut self, rest: &[NodeId], i: usize) {
        if i == rest.len() {
            self.harvest();
            return;
        }
        let pn = rest[i];
        let pnode = self.pattern.nodes()[&pn].clone();
        let host_ids: Vec<NodeId> = self.host.nodes().keys().copied().collect();
        for hn in host_ids {
            if self.used_nodes.contains(&hn) {
                continue;
            }
            let hnode = &self.host.nodes()[&hn];
            if hnode.in_ports + hnode.out_ports != 0 {
                continue;
            }
            if !kinds_match(&pnode, hnode, self.p, self.t) {
                continue;
            }
            self.node_map.insert(pn, hn);
            self.used_nodes.insert(hn);
            self.place_legless(rest, i + 1);
            self.node_map.remove(&pn);
            self.used_nodes.remove(&hn);
        }
    }

    fn harvest(&mut self) {
        // final wrap-around screen: a cut whose far side is inside the image
        for (pkey, hval) in &self.edge_map {
            for (pe, he) in [(&pkey.0, &hval.0), (&pkey.1, &hval.1)] {
                if let (Port::Boundary { .. }, Port::Node { node, .. }) = (pe, he) {
                    if self.used_nodes.contains(node) {
                        return;
                    }
                }
            }
        }
        self.found.push(Embedding {
            nodes: self.node_map.clone(),
            edges: self.edge_map.clone(),
        });
    }
}

/// All ways the instance's left side embeds in the host. Embeddings related
/// by leg symmetry are reported separately.
pub fn find_matches(host: &Diagram, instance: &RuleInstance) -> Vec<Embedding> {
    if host.field() != instance.lhs.field() {
        return Vec::new();
    }
    let mut m = Matcher::new(host, &instance.lhs);
    m.descend(0);
    m.found
}

fn verify_embedding(
    host: &Diagram,
    instance: &RuleInstance,
    emb: &Embedding,
) -> Result<(), RewriteError> {
    let bad = |m: String| Err(RewriteError::InvalidEmbedding(m));
    let pattern = &instance.lhs;
    let (p, t) = (host.field().p(), host.field().t() as u32);
    if emb.nodes.len() != pattern.nodes().len() {
        return bad("node image misses pattern nodes".into());
    }
    let mut images: BTreeSet<NodeId> = BTreeSet::new();
    for (pn, hn) in &emb.nodes {
        let (Some(pnode), Some(hnode)) = (pattern.nodes().get(pn), host.nodes().get(hn)) else {
            return bad(format!("unknown node pair {pn}->{hn}"));
        };
        if !kinds_match(pnode, hnode, p, t) {
            return bad(format!("node {pn} maps onto a different generator"));
        }
        if !images.insert(*hn) {
            return bad(format!("host node {hn} used twice"));
        }
    }
    if emb.edges.len() != pattern.edges().len() {
        return bad("edge image misses pattern edges".into());
    }
    let mut seen_ports: BTreeSet<Port> = BTreeSet::new();
    for (pkey, hval) in &emb.edges {
        if !pattern.edges().contains(pkey) {
            return bad(format!("{} - {} is not a pattern edge", pkey.0, pkey.1));
        }
        let norm = if hval.0 <= hval.1 { *hval } else { (hval.1, hval.0) };
        if !host.edges().contains(&norm) {
            return bad(format!("{} - {} is not a host edge", hval.0, hval.1));
        }
        for (pe, he) in [(&pkey.0, &hval.0), (&pkey.1, &hval.1)] {
            if !seen_ports.insert(*he) {
                return bad(format!("host port {he} consumed twice"));
            }
            match pe {
                Port::Node { node: pn, side, .. } => {
                    let ok = matches!(he, Port::Node { node, side: hs, .. }
                        if node == &emb.nodes[pn] && hs == side);
                    if !ok {
                        return bad(format!("edge end {pe} lands on mismatched port {he}"));
                    }
                }
                Port::Boundary { .. } => {
                    if let Port::Node { node, .. } = he {
                        if images.contains(node) {
                            return bad("context wire re-enters the matched region".into());
                        }
                    }
                }
            }
        }
    }
    // every port of every matched node must be consumed
    for hn in &images {
        let hnode = &host.nodes()[hn];
        for (side, count) in [(Side::In, hnode.in_ports), (Side::Out, hnode.out_ports)] {
            for slot in 0..count {
                if !seen_ports.contains(&Port::Node { node: *hn, side, slot }) {
                    return bad(format!("port {slot} of host node {hn} left dangling"));
                }
            }
        }
    }
    Ok(())
}

/// Replace one occurrence of the instance's left side with its right side.
pub fn apply_at(
    host: &Diagram,
    instance: &RuleInstance,
    emb: &Embedding,
) -> Result<Diagram, RewriteError> {
    verify_embedding(host, instance, emb)?;
    let pattern = &instance.lhs;
    let rhs = &instance.rhs;
    let field = host.field();
    let matched: BTreeSet<NodeId> = emb.nodes.values().copied().collect();
    let junction_of = |port: &Port| -> usize {
        match port {
            Port::Boundary { side: Side::In, index } => *index,
            Port::Boundary { side: Side::Out, index } => pattern.n_inputs() + *index,
            _ => unreachable!("junctions come from boundary ports"),
        }
    };

    let mut result = Diagram::new(field, host.n_inputs(), host.n_outputs());
    let mut remap: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for (id, node) in host.nodes() {
        if !matched.contains(id) {
            remap.insert(*id, result.add_node(node.kind.clone(), node.in_ports, node.out_ports));
        }
    }
    let mut rhs_map: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for (id, node) in rhs.nodes() {
        rhs_map.insert(*id, result.add_node(node.kind.clone(), node.in_ports, node.out_ports));
    }
    let rename = |port: &Port, map: &BTreeMap<NodeId, NodeId>| -> Port {
        match port {
            Port::Node { node, side, slot } => {
                Port::Node { node: map[node], side: *side, slot: *slot }
            }
            b => *b,
        }
    };

    let touches_matched = |p: &Port| matches!(p, Port::Node { node, .. } if matched.contains(node));
    let mut ends: Vec<(SpliceEnd, SpliceEnd)> = Vec::new();
    for (a, b) in host.edges() {
        if !touches_matched(a) && !touches_matched(b) {
            ends.push((
                SpliceEnd::Real(rename(a, &remap)),
                SpliceEnd::Real(rename(b, &remap)),
            ));
        }
    }
    for (pkey, hval) in &emb.edges {
        let end = |pe: &Port, he: &Port| -> Option<SpliceEnd> {
            match pe {
                Port::Boundary { .. } => Some(SpliceEnd::Junction(junction_of(pe))),
                Port::Node { .. } => {
                    debug_assert!(touches_matched(he));
                    None
                }
            }
        };
        // the image of a boundary end is the surviving context port; the
        // image of a node end belongs to the matched region and vanishes
        match (end(&pkey.0, &hval.0), end(&pkey.1, &hval.1)) {
            (Some(ja), Some(jb)) => {
                ends.push((ja, SpliceEnd::Real(rename(&hval.0, &remap))));
                ends.push((jb, SpliceEnd::Real(rename(&hval.1, &remap))));
            }
            (Some(j), None) => ends.push((j, SpliceEnd::Real(rename(&hval.0, &remap)))),
            (None, Some(j)) => ends.push((SpliceEnd::Real(rename(&hval.1, &remap)), j)),
            (None, None) => {}
        }
    }
    for (a, b) in rhs.edges() {
        let end = |p: &Port| -> SpliceEnd {
            match p {
                Port::Boundary { .. } => SpliceEnd::Junction(junction_of(p)),
                node => SpliceEnd::Real(rename(node, &rhs_map)),
            }
        };
        ends.push((end(a), end(b)));
    }
    let (edges, loops) = splice(ends, pattern.n_inputs() + pattern.n_outputs());
    for (a, b) in edges {
        result.add_edge(a, b)?;
    }
    result.mul_scalar(host.scalar_factor());
    result.mul_scalar(rhs.scalar_factor());
    let lhs_pow = pattern
        .scalar_factor()
        .as_sqrtq_pow()
        .expect("instantiate keeps left normalizations pure");
    result.mul_sqrtq(2 * loops as i64 - lhs_pow);
    debug_assert!(result.validate().is_ok(), "rewrite produced an invalid diagram");
    Ok(result)
}

/// Fuse neighbouring spiders, then cancel four-box chains, to a fixed point.
pub fn simplify(d: &Diagram) -> Diagram {
    let field = d.field().clone();
    let mut cur = d.clone();
    loop {
        let mut progressed = false;
        'fuse: loop {
            let candidates: Vec<(usize, usize)> = cur
                .edges()
                .iter()
                .filter_map(|(a, b)| {
                    let (Port::Node { node: x, side: sx, .. }, Port::Node { node: y, side: sy, .. }) =
                        (a, b)
                    else {
                        return None;
                    };
                    if x == y {
                        return None;
                    }
                    let (nx, ny) = (&cur.nodes()[x], &cur.nodes()[y]);
                    if !matches!(nx.kind, NodeKind::Z) || !matches!(ny.kind, NodeKind::Z) {
                        return None;
                    }
                    // the producer feeds its only output into the consumer's only input
                    let (producer, consumer) = match (sx, sy) {
                        (Side::Out, Side::In) => (nx, ny),
                        (Side::In, Side::Out) => (ny, nx),
                        _ => return None,
                    };
                    (producer.out_ports == 1 && consumer.in_ports == 1)
                        .then_some((consumer.out_ports, producer.in_ports))
                })
                .collect();
            for (m, n) in candidates {
                let inst = instantiate(RuleId::Zs, &field, &RuleParams::arities(m, n))
                    .expect("arities are valid");
                let matches = find_matches(&cur, &inst);
                if let Some(emb) = matches.first() {
                    cur = apply_at(&cur, &inst, emb).expect("found embedding applies");
                    progressed = true;
                    continue 'fuse;
                }
            }
            break;
        }
        let h4 = instantiate(RuleId::DerivedH4, &field, &RuleParams::default())
            .expect("no parameters needed");
        loop {
            let matches = find_matches(&cur, &h4);
            let Some(emb) = matches.first() else { break };
            cur = apply_at(&cur, &h4, emb).expect("found embedding applies");
            progressed = true;
        }
        if !progressed {
            return cur;
        }
    }
}
