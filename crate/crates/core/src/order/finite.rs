use serde::{Deserialize, Serialize};

use super::OrderError;

/// A finite poset given by element names and covering pairs `(lower, upper)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FiniteOrderSpec", into = "FiniteOrderSpec")]
pub struct FiniteOrder {
    names: Vec<String>,
    covers: Vec<(usize, usize)>,
    leq: Vec<Vec<bool>>,
}

#[derive(Serialize, Deserialize)]
struct FiniteOrderSpec {
    elements: Vec<String>,
    #[serde(default)]
    covers: Vec<(usize, usize)>,
}

impl TryFrom<FiniteOrderSpec> for FiniteOrder {
    type Error = OrderError;
    fn try_from(s: FiniteOrderSpec) -> Result<Self, OrderError> {
        FiniteOrder::new(s.elements, s.covers)
    }
}

impl From<FiniteOrder> for FiniteOrderSpec {
    fn from(o: FiniteOrder) -> Self {
        FiniteOrderSpec { elements: o.names, covers: o.covers }
    }
}

impl FiniteOrder {
    pub fn new(names: Vec<String>, covers: Vec<(usize, usize)>) -> Result<Self, OrderError> {
        let n = names.len();
        let mut leq = vec![vec![false; n]; n];
        for (i, row) in leq.iter_mut().enumerate() {
            row[i] = true;
        }
        for &(a, b) in &covers {
            if a >= n || b >= n {
                return Err(OrderError::Structure(format!("cover ({a},{b}) out of range")));
            }
            leq[a][b] = true;
        }
        // Warshall closure
        for k in 0..n {
            for i in 0..n {
                if leq[i][k] {
                    for j in 0..n {
                        if leq[k][j] {
                            leq[i][j] = true;
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if leq[i][j] && leq[j][i] {
                    return Err(OrderError::Structure(format!(
                        "covers create a cycle between {} and {}",
                        names[i], names[j]
                    )));
                }
            }
        }
        Ok(FiniteOrder { names, covers, leq })
    }

    /// Elements ordered only by equality.
    pub fn discrete<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        FiniteOrder::new(names, vec![]).expect("no covers")
    }

    /// Elements ordered as listed, first is the bottom.
    pub fn chain<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let covers = (1..names.len()).map(|i| (i - 1, i)).collect();
        FiniteOrder::new(names, covers).expect("chain is acyclic")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: usize) -> Option<&str> {
        self.names.get(i).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.leq[a][b]
    }

    /// Rank of each element when the order is a chain.
    pub fn chain_rank(&self, a: usize) -> Option<usize> {
        let n = self.len();
        for i in 0..n {
            for j in 0..n {
                if !self.leq[i][j] && !self.leq[j][i] {
                    return None;
                }
            }
        }
        Some((0..n).filter(|&j| self.leq[j][a]).count() - 1)
    }

    pub fn join(&self, a: usize, b: usize) -> Option<usize> {
        let uppers: Vec<usize> = (0..self.len()).filter(|&u| self.leq[a][u] && self.leq[b][u]).collect();
        uppers.iter().copied().find(|&u| uppers.iter().all(|&v| self.leq[u][v]))
    }

    pub fn meet(&self, a: usize, b: usize) -> Option<usize> {
        let lowers: Vec<usize> = (0..self.len()).filter(|&l| self.leq[l][a] && self.leq[l][b]).collect();
        lowers.iter().copied().find(|&l| lowers.iter().all(|&v| self.leq[v][l]))
    }

    pub fn bottom(&self) -> Option<usize> {
        (0..self.len()).find(|&b| (0..self.len()).all(|x| self.leq[b][x]))
    }

    pub fn top(&self) -> Option<usize> {
        (0..self.len()).find(|&t| (0..self.len()).all(|x| self.leq[x][t]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diamond_joins() {
        // 0 < 1, 0 < 2, 1 < 3, 2 < 3
        let o = FiniteOrder::new(["b", "l", "r", "t"].map(String::from).to_vec(), vec![(0, 1), (0, 2), (1, 3), (2, 3)])
            .unwrap();
        assert!(o.leq(0, 3));
        assert_eq!(o.join(1, 2), Some(3));
        assert_eq!(o.meet(1, 2), Some(0));
        assert_eq!(o.bottom(), Some(0));
        assert_eq!(o.chain_rank(1), None);
    }

    #[test]
    fn discrete_has_no_join() {
        let o = FiniteOrder::discrete(["a", "b"]);
        assert_eq!(o.join(0, 1), None);
        assert_eq!(o.join(0, 0), Some(0));
    }

    #[test]
    fn cycle_rejected() {
        assert!(FiniteOrder::new(vec!["a".into(), "b".into()], vec![(0, 1), (1, 0)]).is_err());
    }
}
