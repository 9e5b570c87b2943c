use serde::{Deserialize, Serialize};

use super::{CodesignError, Mdpi};
use crate::order::{Component, Order, Point, Poset, Value};

/// What a diagram node computes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeKind {
    /// Finite implementation table.
    Table { mdpi: Mdpi },
    /// Adder: functionality ports are the addends, the single resource is their total.
    /// Addends below zero count as zero.
    Sum { inputs: Vec<String>, output: String },
    /// Scaled product of non-negative inputs (e.g. per-step load times frequency).
    Product { inputs: Vec<String>, output: String, factor: f64 },
    /// Placeholder resolved by a builder before solving.
    Builder {
        builder: String,
        #[serde(default)]
        params: serde_json::Value,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    #[serde(flatten)]
    pub kind: NodeKind,
}

impl Node {
    pub fn table(mdpi: Mdpi) -> Node {
        Node { name: mdpi.name.clone(), kind: NodeKind::Table { mdpi } }
    }

    pub fn sum<S: Into<String>>(
        name: impl Into<String>,
        inputs: impl IntoIterator<Item = S>,
        output: impl Into<String>,
    ) -> Node {
        Node {
            name: name.into(),
            kind: NodeKind::Sum { inputs: inputs.into_iter().map(Into::into).collect(), output: output.into() },
        }
    }

    pub fn product<S: Into<String>>(
        name: impl Into<String>,
        inputs: impl IntoIterator<Item = S>,
        output: impl Into<String>,
        factor: f64,
    ) -> Node {
        Node {
            name: name.into(),
            kind: NodeKind::Product {
                inputs: inputs.into_iter().map(Into::into).collect(),
                output: output.into(),
                factor,
            },
        }
    }

    pub fn functionality(&self) -> Result<Poset, CodesignError> {
        match &self.kind {
            NodeKind::Table { mdpi } => Ok(mdpi.functionality.clone()),
            NodeKind::Sum { inputs, .. } | NodeKind::Product { inputs, .. } => Ok(Poset::reals(inputs.iter().cloned())),
            NodeKind::Builder { builder, .. } => Err(unresolved(&self.name, builder)),
        }
    }

    pub fn resources(&self) -> Result<Poset, CodesignError> {
        match &self.kind {
            NodeKind::Table { mdpi } => Ok(mdpi.resources.clone()),
            NodeKind::Sum { output, .. } | NodeKind::Product { output, .. } => Ok(Poset::reals([output.clone()])),
            NodeKind::Builder { builder, .. } => Err(unresolved(&self.name, builder)),
        }
    }

    /// Minimal resource options for functionality `f`, with implementation indices
    /// (empty for arithmetic nodes).
    pub(crate) fn options(&self, f: &Point) -> Result<Vec<(Point, Vec<usize>)>, CodesignError> {
        let reals = |f: &Point| -> Result<Vec<f64>, CodesignError> {
            f.as_reals().ok_or_else(|| CodesignError::Port(format!("{}: expected real inputs", self.name)))
        };
        match &self.kind {
            NodeKind::Table { mdpi } => mdpi.h_indexed(f),
            NodeKind::Sum { .. } => {
                let total: f64 = reals(f)?.iter().map(|x| x.max(0.0)).sum();
                Ok(vec![(Point::reals(&[total]), vec![])])
            }
            NodeKind::Product { factor, .. } => {
                let prod: f64 = reals(f)?.iter().map(|x| x.max(0.0)).product();
                Ok(vec![(Point::reals(&[prod * factor]), vec![])])
            }
            NodeKind::Builder { builder, .. } => Err(unresolved(&self.name, builder)),
        }
    }
}

fn unresolved(node: &str, builder: &str) -> CodesignError {
    CodesignError::Structure(format!("node `{node}` still refers to builder `{builder}`"))
}

/// `from` (a resource port) must be ⪯ `to` (a functionality port). Ports are written `node.port`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
}

impl Edge {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Edge {
        Edge { from: from.into(), to: to.into() }
    }
}

/// A query input fanned out to one or more functionality ports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposedFunctionality {
    pub name: String,
    pub ports: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposedResource {
    pub name: String,
    pub port: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagram {
    pub nodes: Vec<Node>,
    #[serde(default)]
    pub edges: Vec<Edge>,
    #[serde(default)]
    pub functionality: Vec<ExposedFunctionality>,
    #[serde(default)]
    pub resources: Vec<ExposedResource>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) struct PortRef {
    pub node: usize,
    pub port: usize,
}

/// Index-based form of a validated diagram.
#[derive(Debug)]
pub(crate) struct Compiled<'a> {
    pub nodes: Vec<&'a Node>,
    pub fposets: Vec<Poset>,
    pub rposets: Vec<Poset>,
    /// (resource port, functionality port, is_feedback)
    pub edges: Vec<(PortRef, PortRef, bool)>,
    pub exposed_f: Vec<Vec<PortRef>>,
    pub exposed_r: Vec<PortRef>,
    pub order: Vec<usize>,
    pub fposet: Poset,
    pub rposet: Poset,
    pub loop_poset: Poset,
}

impl Diagram {
    pub fn add_node(&mut self, node: Node) -> &mut Self {
        self.nodes.push(node);
        self
    }

    pub fn connect(&mut self, from: impl Into<String>, to: impl Into<String>) -> &mut Self {
        self.edges.push(Edge::new(from, to));
        self
    }

    pub fn expose_functionality<S: Into<String>>(
        &mut self,
        name: impl Into<String>,
        ports: impl IntoIterator<Item = S>,
    ) -> &mut Self {
        self.functionality
            .push(ExposedFunctionality { name: name.into(), ports: ports.into_iter().map(Into::into).collect() });
        self
    }

    pub fn expose_resource(&mut self, name: impl Into<String>, port: impl Into<String>) -> &mut Self {
        self.resources.push(ExposedResource { name: name.into(), port: port.into() });
        self
    }

    pub fn node(&self, name: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.name == name)
    }

    /// Parses a JSON document; builder nodes are replaced through `resolve`.
    pub fn from_json(
        text: &str,
        resolve: &dyn Fn(&str, &serde_json::Value) -> Result<Mdpi, String>,
    ) -> Result<Diagram, CodesignError> {
        let mut d: Diagram = serde_json::from_str(text)?;
        for n in &mut d.nodes {
            if let NodeKind::Builder { builder, params } = &n.kind {
                let mut mdpi = resolve(builder, params).map_err(|e| CodesignError::Builder(builder.clone(), e))?;
                mdpi.name = n.name.clone();
                n.kind = NodeKind::Table { mdpi };
            }
        }
        d.validate()?;
        Ok(d)
    }

    pub fn to_json(&self) -> Result<String, CodesignError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Exposed functionality poset, in declaration order.
    pub fn functionality_poset(&self) -> Result<Poset, CodesignError> {
        Ok(self.compile()?.fposet)
    }

    /// Exposed resource poset, in declaration order.
    pub fn resource_poset(&self) -> Result<Poset, CodesignError> {
        Ok(self.compile()?.rposet)
    }

    pub fn validate(&self) -> Result<(), CodesignError> {
        self.compile().map(|_| ())
    }

    fn find_node(&self, name: &str) -> Result<usize, CodesignError> {
        self.nodes
            .iter()
            .position(|n| n.name == name)
            .ok_or_else(|| CodesignError::Port(format!("unknown node `{name}`")))
    }

    fn port(&self, spec: &str, posets: &[Poset], side: &str) -> Result<PortRef, CodesignError> {
        let (node, port) = spec
            .rsplit_once('.')
            .ok_or_else(|| CodesignError::Port(format!("port `{spec}` is not of the form node.port")))?;
        let n = self.find_node(node)?;
        let p = posets[n]
            .index_of(port)
            .ok_or_else(|| CodesignError::Port(format!("node `{node}` has no {side} port `{port}`")))?;
        Ok(PortRef { node: n, port: p })
    }

    pub(crate) fn compile(&self) -> Result<Compiled<'_>, CodesignError> {
        let n = self.nodes.len();
        for (i, a) in self.nodes.iter().enumerate() {
            if self.nodes[..i].iter().any(|b| b.name == a.name) {
                return Err(CodesignError::Structure(format!("duplicate node name `{}`", a.name)));
            }
        }
        let fposets: Vec<Poset> = self.nodes.iter().map(Node::functionality).collect::<Result<_, _>>()?;
        let rposets: Vec<Poset> = self.nodes.iter().map(Node::resources).collect::<Result<_, _>>()?;
        let forder = |p: PortRef| &fposets[p.node].components()[p.port].order;
        let rorder = |p: PortRef| &rposets[p.node].components()[p.port].order;

        let mut raw_edges = Vec::new();
        for e in &self.edges {
            let from = self.port(&e.from, &rposets, "resource")?;
            let to = self.port(&e.to, &fposets, "functionality")?;
            if rorder(from) != forder(to) {
                return Err(CodesignError::Port(format!("edge {} -> {} joins different posets", e.from, e.to)));
            }
            raw_edges.push((from, to));
        }

        let mut exposed_f = Vec::new();
        let mut fcomps = Vec::new();
        for ef in &self.functionality {
            let ports: Vec<PortRef> =
                ef.ports.iter().map(|p| self.port(p, &fposets, "functionality")).collect::<Result<_, _>>()?;
            let first = ports
                .first()
                .ok_or_else(|| CodesignError::Port(format!("exposed functionality `{}` has no ports", ef.name)))?;
            let order: Order = forder(*first).clone();
            if ports.iter().any(|&p| *forder(p) != order) {
                return Err(CodesignError::Port(format!(
                    "exposed functionality `{}` fans out to different posets",
                    ef.name
                )));
            }
            fcomps.push(Component::new(ef.name.clone(), order));
            exposed_f.push(ports);
        }
        let mut exposed_r = Vec::new();
        let mut rcomps = Vec::new();
        for er in &self.resources {
            let p = self.port(&er.port, &rposets, "resource")?;
            rcomps.push(Component::new(er.name.clone(), rorder(p).clone()));
            exposed_r.push(p);
        }
        for (ni, rp) in rposets.iter().enumerate() {
            for pi in 0..rp.dim() {
                let p = PortRef { node: ni, port: pi };
                if !raw_edges.iter().any(|(f, _)| *f == p) && !exposed_r.contains(&p) {
                    return Err(CodesignError::Port(format!(
                        "resource port {}.{} is neither connected nor exposed",
                        self.nodes[ni].name,
                        rp.components()[pi].name
                    )));
                }
            }
        }

        // connectivity
        let mut parent: Vec<usize> = (0..n).collect();
        fn root(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        let unite = |a: usize, b: usize, p: &mut Vec<usize>| {
            let (ra, rb) = (root(p, a), root(p, b));
            p[ra] = rb;
        };
        for (f, t) in &raw_edges {
            unite(f.node, t.node, &mut parent);
        }
        for ports in &exposed_f {
            for w in ports.windows(2) {
                unite(w[0].node, w[1].node, &mut parent);
            }
        }
        if n > 0 {
            let r0 = root(&mut parent, 0);
            if let Some(i) = (1..n).find(|&i| root(&mut parent, i) != r0) {
                return Err(CodesignError::Structure(format!(
                    "node `{}` is disconnected from `{}`",
                    self.nodes[i].name, self.nodes[0].name
                )));
            }
        }

        let feedback = feedback_edges(n, &raw_edges);
        let edges: Vec<(PortRef, PortRef, bool)> =
            raw_edges.iter().enumerate().map(|(i, &(f, t))| (f, t, feedback.contains(&i))).collect();
        let order = topo_order(n, &edges)?;
        let loop_poset = Poset::new(
            edges
                .iter()
                .filter(|e| e.2)
                .map(|(_, t, _)| {
                    Component::new(
                        format!("{}.{}", self.nodes[t.node].name, fposets[t.node].components()[t.port].name),
                        forder(*t).clone(),
                    )
                })
                .collect(),
        );
        Ok(Compiled {
            nodes: self.nodes.iter().collect(),
            fposets,
            rposets,
            edges,
            exposed_f,
            exposed_r,
            order,
            fposet: Poset::new(fcomps),
            rposet: Poset::new(rcomps),
            loop_poset,
        })
    }
}

/// Edges closing a cycle in a depth-first search from each node in index order.
fn feedback_edges(n: usize, edges: &[(PortRef, PortRef)]) -> Vec<usize> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![vec![]; n];
    for (i, (f, t)) in edges.iter().enumerate() {
        adj[f.node].push((t.node, i));
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; n];
    let mut back = Vec::new();
    for s in 0..n {
        if state[s] != 0 {
            continue;
        }
        let mut stack = vec![(s, 0usize)];
        state[s] = 1;
        while let Some(&mut (u, ref mut k)) = stack.last_mut() {
            if *k < adj[u].len() {
                let (v, ei) = adj[u][*k];
                *k += 1;
                match state[v] {
                    0 => {
                        state[v] = 1;
                        stack.push((v, 0));
                    }
                    1 => back.push(ei),
                    _ => {}
                }
            } else {
                state[u] = 2;
                stack.pop();
            }
        }
    }
    back.sort_unstable();
    back
}

/// Kahn's algorithm over non-feedback edges, smallest index first.
fn topo_order(n: usize, edges: &[(PortRef, PortRef, bool)]) -> Result<Vec<usize>, CodesignError> {
    let mut indeg = vec![0usize; n];
    for (fr, to, fb) in edges {
        if !fb && fr.node != to.node {
            indeg[to.node] += 1;
        }
    }
    let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(u) = ready.pop_first() {
        order.push(u);
        for (fr, to, fb) in edges {
            if !fb && fr.node == u && to.node != u {
                indeg[to.node] -= 1;
                if indeg[to.node] == 0 {
                    ready.insert(to.node);
                }
            }
        }
    }
    if order.len() != n {
        return Err(CodesignError::Structure("cycle left after removing feedback edges".into()));
    }
    Ok(order)
}

impl Compiled<'_> {
    /// Functionality of node `ni` given exposed inputs, live resource values and loop values.
    pub fn node_input(
        &self,
        ni: usize,
        query: &Point,
        resource_value: &dyn Fn(PortRef) -> Value,
        loop_values: &Point,
    ) -> Result<Point, CodesignError> {
        let fp = &self.fposets[ni];
        let mut vals: Vec<Option<Value>> = vec![None; fp.dim()];
        let mut merge = |port: usize, v: Value| -> Result<(), CodesignError> {
            let order = &fp.components()[port].order;
            vals[port] = Some(match vals[port].take() {
                None => v,
                Some(old) => order.join(&old, &v)?,
            });
            Ok(())
        };
        for (k, ports) in self.exposed_f.iter().enumerate() {
            for p in ports.iter().filter(|p| p.node == ni) {
                merge(p.port, query.0[k].clone())?;
            }
        }
        let mut li = 0;
        for (fr, to, fb) in &self.edges {
            if *fb {
                if to.node == ni {
                    merge(to.port, loop_values.0[li].clone())?;
                }
                li += 1;
            } else if to.node == ni {
                merge(to.port, resource_value(*fr))?;
            }
        }
        let mut out = Vec::with_capacity(vals.len());
        for (port, v) in vals.into_iter().enumerate() {
            out.push(match v {
                Some(v) => v,
                None => fp.components()[port].order.bottom()?,
            });
        }
        Ok(Point(out))
    }
}
