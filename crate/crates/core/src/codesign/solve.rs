use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::diagram::{Compiled, PortRef};
use super::{CodesignError, Design, Diagram, NodeKind};
use crate::order::{pareto_min_groups, Antichain, Component, Point, Poset, Value};

/// Implementation chosen for one table node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub index: usize,
    pub design: Design,
}

/// One choice per table node, keyed by node name.
pub type Assignment = BTreeMap<String, Choice>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub max_iterations: usize,
    /// Equal-resource alternatives kept per antichain point.
    pub max_designs_per_point: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { max_iterations: 10_000, max_designs_per_point: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySolution {
    pub functionality_poset: Poset,
    pub functionality: Point,
    pub resources: Antichain,
    /// Assignments achieving each antichain point, in the same order.
    pub designs: Vec<Vec<Assignment>>,
    /// Loop values at the fixed point, per antichain point (empty without loops).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loop_values: Vec<Point>,
}

impl QuerySolution {
    pub fn is_infeasible(&self) -> bool {
        self.resources.is_empty()
    }
}

#[derive(Clone)]
struct State {
    vals: Vec<Value>,
    designs: Vec<Assignment>,
}

fn slot_poset(c: &Compiled, slots: &[PortRef]) -> Poset {
    Poset::new(
        slots
            .iter()
            .map(|p| {
                let comp = &c.rposets[p.node].components()[p.port];
                Component::new(format!("{}.{}", c.nodes[p.node].name, comp.name), comp.order.clone())
            })
            .collect(),
    )
}

/// Merges states with equal values and drops dominated ones.
fn prune(poset: &Poset, states: Vec<State>, cap: usize) -> Result<Vec<State>, CodesignError> {
    let pts: Vec<Point> = states.iter().map(|s| Point(s.vals.clone())).collect();
    let groups = pareto_min_groups(poset, &pts)?;
    let mut slots: Vec<Option<State>> = states.into_iter().map(Some).collect();
    let mut out = Vec::with_capacity(groups.len());
    for g in groups {
        let mut first = slots[g[0]].take().expect("each index in one group");
        for &j in &g[1..] {
            let other = slots[j].take().expect("each index in one group");
            for d in other.designs {
                if first.designs.len() >= cap {
                    break;
                }
                first.designs.push(d);
            }
        }
        out.push(first);
    }
    Ok(out)
}

/// Topological propagation with the loop variables fixed to `x`.
///
/// Returns points of (exposed resources, feedback source values) with designs.
fn propagate(c: &Compiled, query: &Point, x: &Point, opts: &SolveOptions) -> Result<Vec<State>, CodesignError> {
    let n = c.nodes.len();
    let mut position = vec![0usize; n];
    for (k, &ni) in c.order.iter().enumerate() {
        position[ni] = k;
    }
    let fb_sources: Vec<PortRef> = c.edges.iter().filter(|e| e.2).map(|e| e.0).collect();
    let live_after = |k: usize| -> Vec<PortRef> {
        let mut v: Vec<PortRef> = Vec::new();
        for (ni, rp) in c.rposets.iter().enumerate() {
            if position[ni] > k {
                continue;
            }
            for pi in 0..rp.dim() {
                let p = PortRef { node: ni, port: pi };
                let needed = c.exposed_r.contains(&p)
                    || fb_sources.contains(&p)
                    || c.edges.iter().any(|(fr, to, fb)| !fb && *fr == p && position[to.node] > k);
                if needed {
                    v.push(p);
                }
            }
        }
        v
    };

    let mut layout: Vec<PortRef> = Vec::new();
    let mut states = vec![State { vals: vec![], designs: vec![Assignment::new()] }];
    for (k, &ni) in c.order.iter().enumerate() {
        let node = c.nodes[ni];
        let next_layout = live_after(k);
        let prev_index: HashMap<PortRef, usize> = layout.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let mut cache: HashMap<String, Vec<(Point, Vec<usize>)>> = HashMap::new();
        let mut next = Vec::new();
        for s in &states {
            let lookup = |p: PortRef| s.vals[prev_index[&p]].clone();
            let input = c.node_input(ni, query, &lookup, x)?;
            let key = format!("{:?}", input.0);
            if !cache.contains_key(&key) {
                cache.insert(key.clone(), node.options(&input)?);
            }
            for (r, impls) in &cache[&key] {
                let vals: Vec<Value> = next_layout
                    .iter()
                    .map(|p| if p.node == ni { r.0[p.port].clone() } else { s.vals[prev_index[p]].clone() })
                    .collect();
                let designs = match &node.kind {
                    NodeKind::Table { mdpi } => {
                        let mut d = Vec::new();
                        'outer: for a in &s.designs {
                            for &i in impls {
                                if d.len() >= opts.max_designs_per_point {
                                    break 'outer;
                                }
                                let mut a = a.clone();
                                a.insert(
                                    node.name.clone(),
                                    Choice { index: i, design: mdpi.implementations[i].design.clone() },
                                );
                                d.push(a);
                            }
                        }
                        d
                    }
                    _ => s.designs.clone(),
                };
                next.push(State { vals, designs });
            }
        }
        layout = next_layout;
        states = prune(&slot_poset(c, &layout), next, opts.max_designs_per_point)?;
        if states.is_empty() {
            return Ok(vec![]);
        }
    }
    let index: HashMap<PortRef, usize> = layout.iter().enumerate().map(|(i, p)| (*p, i)).collect();
    Ok(states
        .into_iter()
        .map(|s| State {
            vals: c.exposed_r.iter().chain(&fb_sources).map(|p| s.vals[index[p]].clone()).collect(),
            designs: s.designs,
        })
        .collect())
}

impl Diagram {
    pub fn solve(&self, f: &Point) -> Result<QuerySolution, CodesignError> {
        self.solve_with(f, &SolveOptions::default())
    }

    /// Minimal exposed resources for the exposed functionality `f`.
    ///
    /// Diagrams with cycles are solved by Kleene iteration from the bottom of
    /// the resource × loop poset until two iterates have equal generators.
    pub fn solve_with(&self, f: &Point, opts: &SolveOptions) -> Result<QuerySolution, CodesignError> {
        let c = self.compile()?;
        c.fposet.check(f)?;
        let nr = c.rposet.dim();
        let nl = c.loop_poset.dim();
        let (final_states, _) = if nl == 0 {
            (propagate(&c, f, &Point::default(), opts)?, c.rposet.clone())
        } else {
            let full = c.rposet.product(&c.loop_poset);
            let loop_idx: Vec<usize> = (nr..nr + nl).collect();
            let mut current = vec![State { vals: full.bottom()?.0, designs: vec![] }];
            let mut converged = None;
            for _ in 0..opts.max_iterations {
                let mut union = Vec::new();
                for s in &current {
                    let x = Point(s.vals.clone()).project(&loop_idx);
                    union.extend(propagate(&c, f, &x, opts)?);
                }
                let mut cands = Vec::new();
                for p in &union {
                    for s in &current {
                        let j = full.join(&Point(p.vals.clone()), &Point(s.vals.clone()))?;
                        cands.push(State { vals: j.0, designs: p.designs.clone() });
                    }
                }
                let next = prune(&full, cands, opts.max_designs_per_point)?;
                for s in &next {
                    let p = Point(s.vals.clone());
                    let mut inside = false;
                    for g in &current {
                        if full.leq(&Point(g.vals.clone()), &p)? {
                            inside = true;
                            break;
                        }
                    }
                    if !inside {
                        return Err(CodesignError::Structure(format!("iterate point {p} left the previous upper set")));
                    }
                }
                let same = next.len() == current.len() && next.iter().all(|a| current.iter().any(|b| b.vals == a.vals));
                current = next;
                if same {
                    converged = Some(std::mem::take(&mut current));
                    break;
                }
            }
            match converged {
                Some(s) => (s, full),
                None => {
                    let pts = current.into_iter().map(|s| Point(s.vals)).collect();
                    return Err(CodesignError::Divergence {
                        iterations: opts.max_iterations,
                        last: Box::new(Antichain::new(full, pts)?),
                    });
                }
            }
        };
        let ridx: Vec<usize> = (0..nr).collect();
        let lidx: Vec<usize> = (nr..nr + nl).collect();
        let projected: Vec<Point> = final_states.iter().map(|s| Point(s.vals.clone()).project(&ridx)).collect();
        let groups = pareto_min_groups(&c.rposet, &projected)?;
        let mut points = Vec::new();
        let mut designs = Vec::new();
        let mut loop_values = Vec::new();
        for g in groups {
            points.push(projected[g[0]].clone());
            let mut d: Vec<Assignment> = Vec::new();
            for &i in &g {
                for a in &final_states[i].designs {
                    if d.len() < opts.max_designs_per_point && !d.contains(a) {
                        d.push(a.clone());
                    }
                }
            }
            designs.push(d);
            if nl > 0 {
                loop_values.push(Point(final_states[g[0]].vals.clone()).project(&lidx));
            }
        }
        Ok(QuerySolution {
            functionality_poset: c.fposet.clone(),
            functionality: f.clone(),
            resources: Antichain::new(c.rposet.clone(), points)?,
            designs,
            loop_values,
        })
    }
}

/// Forward-evaluates `assignment` at `f` and checks the exposed resources are ⪯ `r`.
///
/// `loop_values` fixes the feedback edges (empty point for acyclic diagrams).
pub fn validate_assignment(
    diagram: &Diagram,
    f: &Point,
    assignment: &Assignment,
    r: &Point,
    loop_values: &Point,
) -> Result<bool, CodesignError> {
    let c = diagram.compile()?;
    c.fposet.check(f)?;
    c.rposet.check(r)?;
    c.loop_poset.check(loop_values)?;
    let mut values: HashMap<PortRef, Value> = HashMap::new();
    for &ni in &c.order {
        let node = c.nodes[ni];
        let lookup = |p: PortRef| values[&p].clone();
        let input = c.node_input(ni, f, &lookup, loop_values)?;
        let out = match &node.kind {
            NodeKind::Table { mdpi } => {
                let Some(choice) = assignment.get(&node.name) else {
                    return Ok(false);
                };
                let Some(imp) = mdpi.implementations.get(choice.index) else {
                    return Ok(false);
                };
                if imp.design != choice.design || !mdpi.functionality.leq(&input, &imp.provides)? {
                    return Ok(false);
                }
                imp.requires.clone()
            }
            _ => node.options(&input)?.remove(0).0,
        };
        for (pi, v) in out.0.into_iter().enumerate() {
            values.insert(PortRef { node: ni, port: pi }, v);
        }
    }
    let mut li = 0;
    for (fr, to, fb) in &c.edges {
        if *fb {
            let order = &c.fposets[to.node].components()[to.port].order;
            if !order.compare(&values[fr], &loop_values.0[li])?.is_le() {
                return Ok(false);
            }
            li += 1;
        }
    }
    let exposed = Point(c.exposed_r.iter().map(|p| values[p].clone()).collect());
    Ok(c.rposet.leq(&exposed, r)?)
}
