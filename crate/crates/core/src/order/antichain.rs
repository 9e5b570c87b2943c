use serde::{Deserialize, Serialize};

use super::{OrderError, PartialOrderOutcome, Point, Poset};

/// Minimal elements of `points`, grouped by equality.
///
/// Each returned group lists the indices of mutually `Equal` points; the first
/// index is the representative. Groups are returned in ascending order of
/// their representative.
pub fn pareto_min_groups(poset: &Poset, points: &[Point]) -> Result<Vec<Vec<usize>>, OrderError> {
    for p in points {
        poset.check(p)?;
    }
    let keys: Option<Vec<Vec<f64>>> =
        if poset.is_real_embeddable() { points.iter().map(|p| poset.real_key(p)).collect() } else { None };
    let mut groups = match keys {
        Some(keys) => groups_by_keys(&keys),
        None => groups_generic(poset, points)?,
    };
    groups.sort_by_key(|g| g[0]);
    Ok(groups)
}

fn key_leq(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

fn groups_by_keys(keys: &[Vec<f64>]) -> Vec<Vec<usize>> {
    // Anything that dominates a point precedes it lexicographically, so each
    // point only needs checking against the minimal points already kept.
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&i, &j| {
        keys[i]
            .iter()
            .zip(&keys[j])
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut kept: Vec<Vec<usize>> = Vec::new();
    'next: for i in order {
        for g in kept.iter_mut() {
            let k = &keys[g[0]];
            if key_leq(k, &keys[i]) {
                if key_leq(&keys[i], k) {
                    g.push(i);
                }
                continue 'next;
            }
        }
        kept.push(vec![i]);
    }
    for g in &mut kept {
        g.sort_unstable();
    }
    kept
}

fn groups_generic(poset: &Poset, points: &[Point]) -> Result<Vec<Vec<usize>>, OrderError> {
    let n = points.len();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut assigned = vec![false; n];
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let mut dominated = false;
        let mut group = vec![i];
        for j in 0..n {
            if i == j {
                continue;
            }
            match poset.compare(&points[j], &points[i])? {
                PartialOrderOutcome::LessOrEqual => {
                    dominated = true;
                    break;
                }
                PartialOrderOutcome::Equal => group.push(j),
                _ => {}
            }
        }
        for &j in &group {
            assigned[j] = true;
        }
        if !dominated {
            group.sort_unstable();
            groups.push(group);
        }
    }
    Ok(groups)
}

/// Points not strictly dominated by any other, with duplicates removed.
pub fn pareto_min(poset: &Poset, points: &[Point]) -> Result<Antichain, OrderError> {
    let groups = pareto_min_groups(poset, points)?;
    Ok(Antichain { poset: poset.clone(), points: groups.into_iter().map(|g| points[g[0]].clone()).collect() })
}

/// Finite set of pairwise incomparable points of one poset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Antichain {
    poset: Poset,
    points: Vec<Point>,
}

impl Antichain {
    /// Validates that `points` are pairwise incomparable.
    pub fn new(poset: Poset, points: Vec<Point>) -> Result<Self, OrderError> {
        for (i, a) in points.iter().enumerate() {
            poset.check(a)?;
            for b in &points[i + 1..] {
                let o = poset.compare(a, b)?;
                if o != PartialOrderOutcome::Incomparable {
                    return Err(OrderError::Structure(format!("{a} and {b} are comparable ({o:?})")));
                }
            }
        }
        Ok(Antichain { poset, points })
    }

    pub fn empty(poset: Poset) -> Self {
        Antichain { poset, points: vec![] }
    }

    pub fn poset(&self) -> &Poset {
        &self.poset
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same set of points, irrespective of order.
    pub fn same_points(&self, other: &Antichain) -> bool {
        self.points.len() == other.points.len() && self.points.iter().all(|p| other.points.contains(p))
    }

    /// Re-validates the antichain property (used after deserialization).
    pub fn validate(&self) -> Result<(), OrderError> {
        Antichain::new(self.poset.clone(), self.points.clone()).map(|_| ())
    }
}

/// Upward closure of a set of minimal generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperSet {
    generators: Antichain,
}

impl UpperSet {
    pub fn new(generators: Antichain) -> Self {
        UpperSet { generators }
    }

    pub fn from_points(poset: &Poset, points: &[Point]) -> Result<Self, OrderError> {
        Ok(UpperSet { generators: pareto_min(poset, points)? })
    }

    pub fn empty(poset: Poset) -> Self {
        UpperSet { generators: Antichain::empty(poset) }
    }

    pub fn generators(&self) -> &Antichain {
        &self.generators
    }

    pub fn poset(&self) -> &Poset {
        self.generators.poset()
    }

    pub fn contains(&self, x: &Point) -> Result<bool, OrderError> {
        for g in self.generators.points() {
            if self.poset().leq(g, x)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// `self ⊆ other`: every generator of `self` lies in `other`.
    pub fn is_subset_of(&self, other: &UpperSet) -> Result<bool, OrderError> {
        for g in self.generators.points() {
            if !other.contains(g)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn same_poset(&self, other: &UpperSet) -> Result<(), OrderError> {
        if self.poset() != other.poset() {
            return Err(OrderError::Structure("upper sets over different posets".into()));
        }
        Ok(())
    }

    pub fn union(&self, other: &UpperSet) -> Result<UpperSet, OrderError> {
        self.same_poset(other)?;
        let mut pts = self.generators.points().to_vec();
        pts.extend(other.generators.points().iter().cloned());
        UpperSet::from_points(self.poset(), &pts)
    }

    /// Generated by pairwise joins; fails on posets without binary joins.
    pub fn intersection(&self, other: &UpperSet) -> Result<UpperSet, OrderError> {
        self.same_poset(other)?;
        let poset = self.poset();
        let mut pts = Vec::new();
        for a in self.generators.points() {
            for b in other.generators.points() {
                pts.push(poset.join(a, b)?);
            }
        }
        UpperSet::from_points(poset, &pts)
    }
}
