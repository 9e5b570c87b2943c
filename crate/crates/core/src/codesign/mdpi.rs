use serde::{Deserialize, Serialize};

use super::CodesignError;
use crate::order::{pareto_min_groups, Antichain, Point, Poset};

/// Label tuple identifying a design choice; composites concatenate.
pub type Design = Vec<String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Implementation {
    pub design: Design,
    pub provides: Point,
    pub requires: Point,
    /// Standard errors of the requirement components, when they are estimates.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dispersion: Vec<f64>,
}

impl Implementation {
    pub fn new(label: impl Into<String>, provides: Point, requires: Point) -> Self {
        Implementation { design: vec![label.into()], provides, requires, dispersion: vec![] }
    }

    pub fn label(&self) -> String {
        self.design.join(" + ")
    }
}

/// Design problem with a finite implementation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mdpi {
    pub name: String,
    pub functionality: Poset,
    pub resources: Poset,
    pub implementations: Vec<Implementation>,
}

/// Antichain whose points carry every design achieving them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedAntichain {
    pub antichain: Antichain,
    pub designs: Vec<Vec<Design>>,
}

impl AnnotatedAntichain {
    pub fn from_candidates(poset: &Poset, cands: Vec<(Point, Design)>) -> Result<Self, CodesignError> {
        let pts: Vec<Point> = cands.iter().map(|(p, _)| p.clone()).collect();
        let groups = pareto_min_groups(poset, &pts)?;
        let points = groups.iter().map(|g| pts[g[0]].clone()).collect();
        let designs = groups.iter().map(|g| g.iter().map(|&i| cands[i].1.clone()).collect()).collect();
        Ok(AnnotatedAntichain { antichain: Antichain::new(poset.clone(), points)?, designs })
    }
}

impl Mdpi {
    pub fn new(
        name: impl Into<String>,
        functionality: Poset,
        resources: Poset,
        implementations: Vec<Implementation>,
    ) -> Result<Self, CodesignError> {
        let d = Mdpi { name: name.into(), functionality, resources, implementations };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), CodesignError> {
        for i in &self.implementations {
            self.functionality.check(&i.provides)?;
            self.resources.check(&i.requires)?;
        }
        Ok(())
    }

    /// Identity design problem over a finite grid of points.
    pub fn identity(name: impl Into<String>, poset: Poset, grid: &[Point]) -> Result<Self, CodesignError> {
        let impls =
            grid.iter().enumerate().map(|(k, p)| Implementation::new(format!("id{k}"), p.clone(), p.clone())).collect();
        Mdpi::new(name, poset.clone(), poset, impls)
    }

    /// Implementations providing at least `f` with at most `r`.
    pub fn evaluate(&self, f: &Point, r: &Point) -> Result<Vec<&Implementation>, CodesignError> {
        self.functionality.check(f)?;
        self.resources.check(r)?;
        let mut out = Vec::new();
        for i in &self.implementations {
            if self.functionality.leq(f, &i.provides)? && self.resources.leq(&i.requires, r)? {
                out.push(i);
            }
        }
        Ok(out)
    }

    /// Implementations whose provided functionality dominates `f`.
    pub fn feasible_for(&self, f: &Point) -> Result<Vec<&Implementation>, CodesignError> {
        self.functionality.check(f)?;
        let mut out = Vec::new();
        for i in &self.implementations {
            if self.functionality.leq(f, &i.provides)? {
                out.push(i);
            }
        }
        Ok(out)
    }

    /// Minimal resources providing `f`, each with the indices of the implementations achieving it.
    pub fn h_indexed(&self, f: &Point) -> Result<Vec<(Point, Vec<usize>)>, CodesignError> {
        self.functionality.check(f)?;
        let mut idx = Vec::new();
        for (k, i) in self.implementations.iter().enumerate() {
            if self.functionality.leq(f, &i.provides)? {
                idx.push(k);
            }
        }
        let pts: Vec<Point> = idx.iter().map(|&k| self.implementations[k].requires.clone()).collect();
        let groups = pareto_min_groups(&self.resources, &pts)?;
        Ok(groups.into_iter().map(|g| (pts[g[0]].clone(), g.into_iter().map(|j| idx[j]).collect())).collect())
    }

    /// Minimal resources providing `f`; empty when infeasible.
    pub fn h(&self, f: &Point) -> Result<AnnotatedAntichain, CodesignError> {
        let cands = self.feasible_for(f)?.into_iter().map(|i| (i.requires.clone(), i.design.clone())).collect();
        AnnotatedAntichain::from_candidates(&self.resources, cands)
    }

    /// Maximal functionalities provided with resources `r`.
    pub fn h_prime(&self, r: &Point) -> Result<AnnotatedAntichain, CodesignError> {
        self.resources.check(r)?;
        let mut cands = Vec::new();
        for i in &self.implementations {
            if self.resources.leq(&i.requires, r)? {
                cands.push((i.provides.clone(), i.design.clone()));
            }
        }
        let op = self.functionality.opposite();
        let mut a = AnnotatedAntichain::from_candidates(&op, cands)?;
        a.antichain = Antichain::new(self.functionality.clone(), a.antichain.points().to_vec())?;
        Ok(a)
    }

    /// Moves a functionality component to the resource side with the opposite order.
    ///
    /// `F1 × F2 ⇸ R` and `F1 ⇸ R × F2^op` have the same feasible implementations.
    pub fn functionality_to_resource(&self, name: &str) -> Result<Mdpi, CodesignError> {
        let idx = self
            .functionality
            .index_of(name)
            .ok_or_else(|| CodesignError::Port(format!("{}: no functionality `{name}`", self.name)))?;
        let keep: Vec<usize> = (0..self.functionality.dim()).filter(|&i| i != idx).collect();
        let moved = self.functionality.project(&[idx]).opposite();
        let impls = self
            .implementations
            .iter()
            .map(|i| {
                let mut disp = i.dispersion.clone();
                if !disp.is_empty() {
                    disp.push(0.0);
                }
                Implementation {
                    design: i.design.clone(),
                    provides: i.provides.project(&keep),
                    requires: i.requires.concat(&i.provides.project(&[idx])),
                    dispersion: disp,
                }
            })
            .collect();
        Mdpi::new(self.name.clone(), self.functionality.project(&keep), self.resources.product(&moved), impls)
    }

    /// Checks antitone/monotone behaviour of `evaluate` on the given sample triples.
    pub fn check_monotone(
        &self,
        f: &Point,
        f_lower: &Point,
        r: &Point,
        r_upper: &Point,
    ) -> Result<bool, CodesignError> {
        let base: Vec<&Implementation> = self.evaluate(f, r)?;
        if self.functionality.leq(f_lower, f)? {
            let more = self.evaluate(f_lower, r)?;
            if !base.iter().all(|i| more.contains(i)) {
                return Ok(false);
            }
        }
        if self.resources.leq(r, r_upper)? {
            let more = self.evaluate(f, r_upper)?;
            if !base.iter().all(|i| more.contains(i)) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Series composition: `d1`'s resources feed `d2`'s functionality.
pub fn series(d1: &Mdpi, d2: &Mdpi) -> Result<Mdpi, CodesignError> {
    let same = d1.resources.dim() == d2.functionality.dim()
        && d1.resources.components().iter().zip(d2.functionality.components()).all(|(a, b)| a.order == b.order);
    if !same {
        return Err(CodesignError::Port(format!(
            "series {} -> {}: resource poset does not match functionality poset",
            d1.name, d2.name
        )));
    }
    let mut impls = Vec::new();
    for a in &d1.implementations {
        for b in &d2.implementations {
            if d1.resources.leq(&a.requires, &b.provides)? {
                let mut design = a.design.clone();
                design.extend(b.design.iter().cloned());
                impls.push(Implementation {
                    design,
                    provides: a.provides.clone(),
                    requires: b.requires.clone(),
                    dispersion: b.dispersion.clone(),
                });
            }
        }
    }
    Mdpi::new(format!("{};{}", d1.name, d2.name), d1.functionality.clone(), d2.resources.clone(), impls)
}

/// Parallel composition over product posets.
pub fn parallel(d1: &Mdpi, d2: &Mdpi) -> Result<Mdpi, CodesignError> {
    let mut impls = Vec::with_capacity(d1.implementations.len() * d2.implementations.len());
    for a in &d1.implementations {
        for b in &d2.implementations {
            let mut design = a.design.clone();
            design.extend(b.design.iter().cloned());
            let dispersion = if a.dispersion.is_empty() && b.dispersion.is_empty() {
                vec![]
            } else {
                let pad = |d: &[f64], n: usize| if d.is_empty() { vec![0.0; n] } else { d.to_vec() };
                let mut v = pad(&a.dispersion, d1.resources.dim());
                v.extend(pad(&b.dispersion, d2.resources.dim()));
                v
            };
            impls.push(Implementation {
                design,
                provides: a.provides.concat(&b.provides),
                requires: a.requires.concat(&b.requires),
                dispersion,
            });
        }
    }
    Mdpi::new(
        format!("{}|{}", d1.name, d2.name),
        d1.functionality.product(&d2.functionality),
        d1.resources.product(&d2.resources),
        impls,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order::Point;

    fn r(x: f64) -> Point {
        Point::reals(&[x])
    }

    fn table(name: &str, rows: &[(&str, f64, f64)]) -> Mdpi {
        Mdpi::new(
            name,
            Poset::reals(["f"]),
            Poset::reals(["r"]),
            rows.iter().map(|(l, f, q)| Implementation::new(*l, r(*f), r(*q))).collect(),
        )
        .unwrap()
    }

    fn labels(v: Vec<&Implementation>) -> Vec<String> {
        v.into_iter().map(|i| i.label()).collect()
    }

    #[test]
    fn evaluate_filters() {
        let d = table("d", &[("a", 1.0, 3.0), ("b", 2.0, 5.0)]);
        assert_eq!(labels(d.evaluate(&r(1.0), &r(4.0)).unwrap()), vec!["a"]);
        assert_eq!(labels(d.evaluate(&r(f64::NEG_INFINITY), &r(f64::INFINITY)).unwrap()), vec!["a", "b"]);
        assert!(d.evaluate(&r(3.0), &r(0.0)).unwrap().is_empty());
        assert!(d.evaluate(&Point::reals(&[1.0, 2.0]), &r(0.0)).is_err());
    }

    #[test]
    fn h_examples() {
        let d = table("d", &[("a", 1.0, 3.0), ("b", 2.0, 5.0), ("c", 1.0, 4.0)]);
        assert_eq!(d.h(&r(1.0)).unwrap().antichain.points(), &[r(3.0)]);
        assert_eq!(d.h(&r(2.0)).unwrap().antichain.points(), &[r(5.0)]);
        assert_eq!(d.h(&r(f64::NEG_INFINITY)).unwrap().antichain.points(), &[r(3.0)]);
        assert!(d.h(&r(9.0)).unwrap().antichain.is_empty());
    }

    #[test]
    fn h_prime_examples() {
        let d = table("d", &[("a", 1.0, 3.0), ("b", 2.0, 5.0)]);
        assert_eq!(d.h_prime(&r(4.0)).unwrap().antichain.points(), &[r(1.0)]);
        assert_eq!(d.h_prime(&r(5.0)).unwrap().antichain.points(), &[r(2.0)]);
        assert!(d.h_prime(&r(2.0)).unwrap().antichain.is_empty());
    }

    #[test]
    fn series_examples() {
        let d1 = table("d1", &[("x", 2.0, 2.0)]);
        let d2 = table("d2", &[("y", 2.0, 7.0)]);
        let s = series(&d1, &d2).unwrap();
        assert_eq!(s.implementations.len(), 1);
        assert_eq!(s.implementations[0].requires, r(7.0));
        let d1b = table("d1", &[("x", 2.0, 3.0)]);
        assert!(series(&d1b, &d2).unwrap().implementations.is_empty());
        let bad = Mdpi::new("bad", Poset::reals(["f", "g"]), Poset::reals(["r"]), vec![]).unwrap();
        assert!(series(&d1, &bad).is_err());
    }

    #[test]
    fn series_with_identity_keeps_h() {
        let d = table("d", &[("a", 1.0, 3.0), ("b", 2.0, 5.0), ("c", 1.0, 4.0)]);
        let grid: Vec<Point> = (0..=6).map(|k| r(k as f64)).collect();
        let id = Mdpi::identity("id", Poset::reals(["r"]), &grid).unwrap();
        let s = series(&d, &id).unwrap();
        for f in [0.0, 1.0, 2.0, 3.0] {
            assert_eq!(s.h(&r(f)).unwrap().antichain.points(), d.h(&r(f)).unwrap().antichain.points());
        }
    }

    #[test]
    fn parallel_pairs() {
        let d1 = table("d1", &[("a", 1.0, 3.0), ("b", 2.0, 5.0), ("c", 3.0, 9.0)]);
        let d2 = table("d2", &[("x", 1.0, 1.0), ("y", 2.0, 4.0), ("z", 2.0, 2.0)]);
        let p = parallel(&d1, &d2).unwrap();
        assert_eq!(p.implementations.len(), 9);
        let h = p.h(&Point::reals(&[2.0, 2.0])).unwrap();
        assert_eq!(h.antichain.points(), &[Point::reals(&[5.0, 2.0])]);
        // projecting the first resource after a weakest query on the second port
        for f in [1.0, 2.0, 3.0] {
            let hp = p.h(&Point::reals(&[f, f64::NEG_INFINITY])).unwrap();
            let proj: Vec<Point> = hp.antichain.points().iter().map(|q| q.project(&[0])).collect();
            let proj = crate::order::pareto_min(&Poset::reals(["r"]), &proj).unwrap();
            assert_eq!(proj.points(), d1.h(&r(f)).unwrap().antichain.points());
        }
    }

    #[test]
    fn moving_functionality_preserves_feasibility() {
        let d = Mdpi::new(
            "c",
            Poset::reals(["task", "noise"]),
            Poset::reals(["err"]),
            vec![
                Implementation::new("p1", Point::reals(&[1.0, 4.0]), r(2.0)),
                Implementation::new("p2", Point::reals(&[1.0, 1.0]), r(1.0)),
            ],
        )
        .unwrap();
        let m = d.functionality_to_resource("noise").unwrap();
        assert_eq!(m.functionality.dim(), 1);
        assert_eq!(m.resources.dim(), 2);
        // a sensor of quality 2 (noise 2) is only acceptable to p1
        let feas = m.evaluate(&r(1.0), &Point::reals(&[10.0, 2.0])).unwrap();
        assert_eq!(labels(feas), vec!["p1"]);
    }
}
