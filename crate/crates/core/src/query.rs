//! Query DAGs: anchors, relation projections (forward or inverse),
//! intersections and unions, with a single answer node.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::ids::{EntityId, RelationId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Anchor(EntityId),
    Projection { input: usize, relation: RelationId, direction: Direction },
    Intersection(Vec<usize>),
    Union(Vec<usize>),
}

impl Node {
    pub fn inputs(&self) -> &[usize] {
        match self {
            Node::Anchor(_) => &[],
            Node::Projection { input, .. } => core::slice::from_ref(input),
            Node::Intersection(v) | Node::Union(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub relation: RelationId,
    pub direction: Direction,
}

/// A validated query graph. Construct with [`QueryDag::new`] or [`DagBuilder`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QueryDag {
    nodes: Vec<Node>,
    answer: usize,
}

impl QueryDag {
    pub fn new(nodes: Vec<Node>, answer: usize) -> Result<Self> {
        let dag = QueryDag { nodes, answer };
        dag.validate()?;
        Ok(dag)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn answer_node(&self) -> usize {
        self.answer
    }

    pub fn anchors(&self) -> Vec<(usize, EntityId)> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n {
                Node::Anchor(e) => Some((i, *e)),
                _ => None,
            })
            .collect()
    }

    pub fn edges(&self) -> Vec<Edge> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(to, n)| match *n {
                Node::Projection { input, relation, direction } => Some(Edge { from: input, to, relation, direction }),
                _ => None,
            })
            .collect()
    }

    pub fn has_union(&self) -> bool {
        self.nodes.iter().any(|n| matches!(n, Node::Union(_)))
    }

    pub fn relations(&self) -> impl Iterator<Item = RelationId> + '_ {
        self.edges().into_iter().map(|e| e.relation)
    }

    /// Kahn ordering over node indices; `Err(Cycle)` if none exists.
    pub fn topo_order(&self) -> Result<Vec<usize>> {
        topo_order(&self.nodes)
    }

    fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(Error::InvalidQuery("empty graph".into()));
        }
        if self.answer >= n {
            return Err(Error::InvalidQuery(format!("answer node {} out of range", self.answer)));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if let Some(&bad) = node.inputs().iter().find(|&&j| j >= n) {
                return Err(Error::InvalidQuery(format!("node {i} reads missing node {bad}")));
            }
            match node {
                Node::Intersection(v) | Node::Union(v) if v.len() < 2 => {
                    return Err(Error::InvalidQuery(format!("node {i} merges {} inputs, needs at least 2", v.len())));
                }
                _ => {}
            }
        }
        if matches!(self.nodes[self.answer], Node::Anchor(_)) {
            return Err(Error::InvalidQuery("answer node is an anchor".into()));
        }
        topo_order(&self.nodes)?;
        // every node must feed the answer
        let mut live = vec![false; n];
        let mut stack = vec![self.answer];
        while let Some(i) = stack.pop() {
            if !live[i] {
                live[i] = true;
                stack.extend_from_slice(self.nodes[i].inputs());
            }
        }
        if let Some(dead) = live.iter().position(|&l| !l) {
            return Err(Error::InvalidQuery(format!("node {dead} does not reach the answer")));
        }
        Ok(())
    }

    /// Expands unions into disjunctive normal form: one union-free [`Plan`] per
    /// disjunct. Union-free graphs yield exactly one plan.
    pub fn disjuncts(&self) -> Result<Vec<Plan>> {
        let order = self.topo_order()?;
        let mut per_node: Vec<Vec<Plan>> = vec![Vec::new(); self.nodes.len()];
        for &i in &order {
            let expanded = match &self.nodes[i] {
                Node::Anchor(e) => vec![Plan { ops: vec![Op::Anchor(*e)] }],
                Node::Projection { input, relation, direction } => per_node[*input]
                    .iter()
                    .map(|p| {
                        let mut ops = p.ops.clone();
                        let src = ops.len() - 1;
                        ops.push(Op::Project { src, relation: *relation, direction: *direction });
                        Plan { ops }
                    })
                    .collect(),
                Node::Intersection(inputs) => {
                    let mut combos: Vec<Vec<&Plan>> = vec![Vec::new()];
                    for &j in inputs {
                        let mut next = Vec::new();
                        for c in &combos {
                            for p in &per_node[j] {
                                let mut c2 = c.clone();
                                c2.push(p);
                                next.push(c2);
                            }
                        }
                        combos = next;
                    }
                    combos
                        .into_iter()
                        .map(|parts| {
                            let mut ops = Vec::new();
                            let outs = parts.iter().map(|p| append_shifted(&mut ops, &p.ops)).collect();
                            ops.push(Op::Intersect(outs));
                            Plan { ops }
                        })
                        .collect()
                }
                Node::Union(inputs) => inputs.iter().flat_map(|&j| per_node[j].iter().cloned()).collect(),
            };
            per_node[i] = expanded;
        }
        Ok(core::mem::take(&mut per_node[self.answer]))
    }

    /// The anchor and hop list if this query is a plain projection chain.
    pub fn as_path(&self) -> Option<(EntityId, Vec<(RelationId, Direction)>)> {
        let mut hops = Vec::new();
        let mut cur = self.answer;
        loop {
            match self.nodes[cur] {
                Node::Anchor(e) => {
                    hops.reverse();
                    return Some((e, hops));
                }
                Node::Projection { input, relation, direction } => {
                    hops.push((relation, direction));
                    cur = input;
                }
                _ => return None,
            }
        }
    }
}

fn append_shifted(dst: &mut Vec<Op>, src: &[Op]) -> usize {
    let base = dst.len();
    for op in src {
        dst.push(match op {
            Op::Anchor(e) => Op::Anchor(*e),
            Op::Project { src, relation, direction } => {
                Op::Project { src: src + base, relation: *relation, direction: *direction }
            }
            Op::Intersect(v) => Op::Intersect(v.iter().map(|s| s + base).collect()),
        });
    }
    dst.len() - 1
}

fn topo_order(nodes: &[Node]) -> Result<Vec<usize>> {
    let n = nodes.len();
    let mut indeg = vec![0usize; n];
    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, node) in nodes.iter().enumerate() {
        for &j in node.inputs() {
            if j >= n {
                return Err(Error::InvalidQuery(format!("node {i} reads missing node {j}")));
            }
            indeg[i] += 1;
            consumers[j].push(i);
        }
    }
    let mut ready: Vec<usize> = (0..n).rev().filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop() {
        order.push(i);
        for &c in &consumers[i] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                ready.push(c);
            }
        }
    }
    if order.len() != n {
        return Err(Error::Cycle);
    }
    Ok(order)
}

/// One union-free disjunct as a straight-line program. Each op writes one
/// slot; the last slot is the output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub ops: Vec<Op>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    Anchor(EntityId),
    Project { src: usize, relation: RelationId, direction: Direction },
    Intersect(Vec<usize>),
}

#[derive(Debug, Default)]
pub struct DagBuilder {
    nodes: Vec<Node>,
}

impl DagBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn anchor(&mut self, e: EntityId) -> usize {
        self.push(Node::Anchor(e))
    }

    pub fn project(&mut self, input: usize, relation: RelationId, direction: Direction) -> usize {
        self.push(Node::Projection { input, relation, direction })
    }

    pub fn forward(&mut self, input: usize, relation: RelationId) -> usize {
        self.project(input, relation, Direction::Forward)
    }

    pub fn intersect(&mut self, inputs: &[usize]) -> usize {
        self.push(Node::Intersection(inputs.to_vec()))
    }

    pub fn union(&mut self, inputs: &[usize]) -> usize {
        self.push(Node::Union(inputs.to_vec()))
    }

    pub fn finish(self, answer: usize) -> Result<QueryDag> {
        QueryDag::new(self.nodes, answer)
    }

    fn push(&mut self, node: Node) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }
}

/// Query shapes: `p` projection, `i` intersection, `u` union.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QueryType {
    P1,
    P2,
    P3,
    I2,
    I3,
    IP,
    PI,
    U2,
    UP,
}

impl QueryType {
    pub const ALL: [QueryType; 9] = [
        QueryType::P1,
        QueryType::P2,
        QueryType::P3,
        QueryType::I2,
        QueryType::I3,
        QueryType::IP,
        QueryType::PI,
        QueryType::U2,
        QueryType::UP,
    ];

    pub const TRAIN: [QueryType; 5] = [QueryType::P1, QueryType::P2, QueryType::P3, QueryType::I2, QueryType::I3];

    pub fn name(self) -> &'static str {
        match self {
            QueryType::P1 => "1p",
            QueryType::P2 => "2p",
            QueryType::P3 => "3p",
            QueryType::I2 => "2i",
            QueryType::I3 => "3i",
            QueryType::IP => "ip",
            QueryType::PI => "pi",
            QueryType::U2 => "2u",
            QueryType::UP => "up",
        }
    }

    pub fn is_trainable(self) -> bool {
        QueryType::TRAIN.contains(&self)
    }

    pub fn is_path(self) -> bool {
        matches!(self, QueryType::P1 | QueryType::P2 | QueryType::P3)
    }

    /// Number of anchors and relations the shape consumes.
    pub fn arity(self) -> (usize, usize) {
        match self {
            QueryType::P1 => (1, 1),
            QueryType::P2 => (1, 2),
            QueryType::P3 => (1, 3),
            QueryType::I2 => (2, 2),
            QueryType::I3 => (3, 3),
            QueryType::IP => (2, 3),
            QueryType::PI => (2, 3),
            QueryType::U2 => (2, 2),
            QueryType::UP => (2, 3),
        }
    }

    /// Builds the canonical forward-edge DAG for this shape.
    ///
    /// Relation order: chains in hop order; `ip` = branch relations then the
    /// final hop; `pi` = the two-hop branch then the one-hop branch; `up` =
    /// branch relations then the final hop.
    pub fn build(self, anchors: &[EntityId], relations: &[RelationId]) -> Result<QueryDag> {
        let (na, nr) = self.arity();
        if anchors.len() != na || relations.len() != nr {
            return Err(Error::InvalidQuery(format!(
                "{} needs {na} anchors and {nr} relations, got {} and {}",
                self.name(),
                anchors.len(),
                relations.len()
            )));
        }
        let mut b = DagBuilder::new();
        let answer = match self {
            QueryType::P1 | QueryType::P2 | QueryType::P3 => {
                let mut cur = b.anchor(anchors[0]);
                for &r in relations {
                    cur = b.forward(cur, r);
                }
                cur
            }
            QueryType::I2 | QueryType::I3 | QueryType::U2 => {
                let branches: Vec<usize> = anchors
                    .iter()
                    .zip(relations)
                    .map(|(&a, &r)| {
                        let n = b.anchor(a);
                        b.forward(n, r)
                    })
                    .collect();
                if self == QueryType::U2 {
                    b.union(&branches)
                } else {
                    b.intersect(&branches)
                }
            }
            QueryType::IP | QueryType::UP => {
                let a0 = b.anchor(anchors[0]);
                let p0 = b.forward(a0, relations[0]);
                let a1 = b.anchor(anchors[1]);
                let p1 = b.forward(a1, relations[1]);
                let m = if self == QueryType::IP { b.intersect(&[p0, p1]) } else { b.union(&[p0, p1]) };
                b.forward(m, relations[2])
            }
            QueryType::PI => {
                let a0 = b.anchor(anchors[0]);
                let p0 = b.forward(a0, relations[0]);
                let p0 = b.forward(p0, relations[1]);
                let a1 = b.anchor(anchors[1]);
                let p1 = b.forward(a1, relations[2]);
                b.intersect(&[p0, p1])
            }
        };
        b.finish(answer)
    }
}

impl fmt::Display for QueryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QueryType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        QueryType::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Precondition(format!("unknown query type {s:?}")))
    }
}
