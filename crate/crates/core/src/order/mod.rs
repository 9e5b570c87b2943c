//! Partial orders used throughout the co-design engine.
//!
//! A [`Poset`] is a runtime descriptor: an ordered list of named components,
//! each carrying its own [`Order`] (reals, finite catalog orders, the Loewner
//! order on symmetric matrices, pointwise orders on matrix sequences, or the
//! opposite of any of these). Points of a poset are flat lists of [`Value`]s
//! and are compared componentwise, so products compose by concatenation.

mod antichain;
mod finite;
mod matrix;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use antichain::{pareto_min, pareto_min_groups, Antichain, UpperSet};
pub use finite::FiniteOrder;
pub use matrix::{loewner_compare, sequence_compare, MatrixSequence, SymMatrix, PSD_TOLERANCE, SYMMETRY_TOLERANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrderError {
    #[error("structural mismatch: {0}")]
    Structure(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PartialOrderOutcome {
    LessOrEqual,
    GreaterOrEqual,
    Equal,
    Incomparable,
}

impl PartialOrderOutcome {
    pub(crate) fn from_flags(le: bool, ge: bool) -> Self {
        match (le, ge) {
            (true, true) => PartialOrderOutcome::Equal,
            (true, false) => PartialOrderOutcome::LessOrEqual,
            (false, true) => PartialOrderOutcome::GreaterOrEqual,
            (false, false) => PartialOrderOutcome::Incomparable,
        }
    }

    pub fn is_le(self) -> bool {
        matches!(self, PartialOrderOutcome::LessOrEqual | PartialOrderOutcome::Equal)
    }

    pub fn is_ge(self) -> bool {
        matches!(self, PartialOrderOutcome::GreaterOrEqual | PartialOrderOutcome::Equal)
    }

    pub fn dual(self) -> Self {
        match self {
            PartialOrderOutcome::LessOrEqual => PartialOrderOutcome::GreaterOrEqual,
            PartialOrderOutcome::GreaterOrEqual => PartialOrderOutcome::LessOrEqual,
            o => o,
        }
    }

    /// Conjunction for product orders.
    pub fn and(self, other: Self) -> Self {
        Self::from_flags(self.is_le() && other.is_le(), self.is_ge() && other.is_ge())
    }
}

/// Order carried by a single poset component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Order {
    Real,
    Discrete { order: Arc<FiniteOrder> },
    Loewner { dim: usize },
    Sequence { dim: usize, len: usize },
    Opposite { of: Box<Order> },
}

impl Order {
    pub fn opposite(self) -> Order {
        match self {
            Order::Opposite { of } => *of,
            o => Order::Opposite { of: Box::new(o) },
        }
    }

    pub fn discrete(order: FiniteOrder) -> Order {
        Order::Discrete { order: Arc::new(order) }
    }

    pub fn compare(&self, a: &Value, b: &Value) -> Result<PartialOrderOutcome, OrderError> {
        match (self, a, b) {
            (Order::Real, Value::Real(x), Value::Real(y)) => Ok(PartialOrderOutcome::from_flags(x <= y, x >= y)),
            (Order::Discrete { order }, Value::Label { label: x }, Value::Label { label: y }) => {
                if *x >= order.len() || *y >= order.len() {
                    return Err(OrderError::Structure(format!("label outside finite order of size {}", order.len())));
                }
                Ok(PartialOrderOutcome::from_flags(order.leq(*x, *y), order.leq(*y, *x)))
            }
            (Order::Loewner { dim }, Value::Matrix(x), Value::Matrix(y)) => {
                if x.dim() != *dim || y.dim() != *dim {
                    return Err(OrderError::Structure(format!("expected {dim}x{dim} matrices")));
                }
                loewner_compare(x, y)
            }
            (Order::Sequence { dim, len }, Value::Sequence(x), Value::Sequence(y)) => {
                let ok = |s: &MatrixSequence| s.len() == *len && s.items().iter().all(|m| m.dim() == *dim);
                if !ok(x) || !ok(y) {
                    return Err(OrderError::Structure(format!("expected sequences of {len} {dim}x{dim} matrices")));
                }
                sequence_compare(x, y)
            }
            (Order::Opposite { of }, a, b) => Ok(of.compare(a, b)?.dual()),
            (o, a, b) => Err(OrderError::Structure(format!("values {a} and {b} do not belong to order {o:?}"))),
        }
    }

    /// Least upper bound, where one is computable.
    pub fn join(&self, a: &Value, b: &Value) -> Result<Value, OrderError> {
        match (self, a, b) {
            (Order::Real, Value::Real(x), Value::Real(y)) => Ok(Value::Real(x.max(*y))),
            (Order::Discrete { order }, Value::Label { label: x }, Value::Label { label: y }) => order
                .join(*x, *y)
                .map(Value::label)
                .ok_or_else(|| OrderError::Unsupported("no join in finite order".into())),
            (Order::Opposite { of }, a, b) => of.meet(a, b),
            (o, _, _) => Err(OrderError::Unsupported(format!("join on {o:?}"))),
        }
    }

    /// Greatest lower bound, where one is computable.
    pub fn meet(&self, a: &Value, b: &Value) -> Result<Value, OrderError> {
        match (self, a, b) {
            (Order::Real, Value::Real(x), Value::Real(y)) => Ok(Value::Real(x.min(*y))),
            (Order::Discrete { order }, Value::Label { label: x }, Value::Label { label: y }) => order
                .meet(*x, *y)
                .map(Value::label)
                .ok_or_else(|| OrderError::Unsupported("no meet in finite order".into())),
            (Order::Opposite { of }, a, b) => of.join(a, b),
            (o, _, _) => Err(OrderError::Unsupported(format!("meet on {o:?}"))),
        }
    }

    pub fn bottom(&self) -> Result<Value, OrderError> {
        match self {
            Order::Real => Ok(Value::Real(f64::NEG_INFINITY)),
            Order::Discrete { order } => order
                .bottom()
                .map(Value::label)
                .ok_or_else(|| OrderError::Unsupported("finite order has no bottom".into())),
            Order::Opposite { of } => of.top(),
            o => Err(OrderError::Unsupported(format!("bottom of {o:?}"))),
        }
    }

    pub fn top(&self) -> Result<Value, OrderError> {
        match self {
            Order::Real => Ok(Value::Real(f64::INFINITY)),
            Order::Discrete { order } => {
                order.top().map(Value::label).ok_or_else(|| OrderError::Unsupported("finite order has no top".into()))
            }
            Order::Opposite { of } => of.bottom(),
            o => Err(OrderError::Unsupported(format!("top of {o:?}"))),
        }
    }

    /// Order-embedding into the reals, when the order is total and real-valued.
    fn real_key(&self, v: &Value) -> Option<f64> {
        match (self, v) {
            (Order::Real, Value::Real(x)) if !x.is_nan() => Some(*x),
            (Order::Discrete { order }, Value::Label { label: i }) if *i < order.len() => {
                order.chain_rank(*i).map(|r| r as f64)
            }
            (Order::Opposite { of }, v) => of.real_key(v).map(|k| -k),
            _ => None,
        }
    }

    fn is_real_embeddable(&self) -> bool {
        match self {
            Order::Real => true,
            Order::Discrete { order } => order.is_empty() || order.chain_rank(0).is_some(),
            Order::Opposite { of } => of.is_real_embeddable(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub order: Order,
}

impl Component {
    pub fn new(name: impl Into<String>, order: Order) -> Self {
        Component { name: name.into(), order }
    }

    pub fn real(name: impl Into<String>) -> Self {
        Component::new(name, Order::Real)
    }

    pub fn opposite_real(name: impl Into<String>) -> Self {
        Component::new(name, Order::Real.opposite())
    }
}

/// Product poset over named components, compared componentwise.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poset {
    components: Vec<Component>,
}

impl Poset {
    pub fn new(components: Vec<Component>) -> Self {
        Poset { components }
    }

    pub fn reals<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        Poset::new(names.into_iter().map(Component::real).collect())
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.components.iter().position(|c| c.name == name)
    }

    pub fn product(&self, other: &Poset) -> Poset {
        let mut c = self.components.clone();
        c.extend(other.components.iter().cloned());
        Poset::new(c)
    }

    pub fn opposite(&self) -> Poset {
        Poset::new(self.components.iter().map(|c| Component::new(c.name.clone(), c.order.clone().opposite())).collect())
    }

    pub fn project(&self, idx: &[usize]) -> Poset {
        Poset::new(idx.iter().map(|&i| self.components[i].clone()).collect())
    }

    pub fn check(&self, p: &Point) -> Result<(), OrderError> {
        if p.0.len() != self.dim() {
            return Err(OrderError::Structure(format!("point has {} components, poset has {}", p.0.len(), self.dim())));
        }
        Ok(())
    }

    pub fn compare(&self, a: &Point, b: &Point) -> Result<PartialOrderOutcome, OrderError> {
        self.check(a)?;
        self.check(b)?;
        let mut out = PartialOrderOutcome::Equal;
        for ((c, x), y) in self.components.iter().zip(&a.0).zip(&b.0) {
            out = out.and(c.order.compare(x, y)?);
            if out == PartialOrderOutcome::Incomparable {
                break;
            }
        }
        Ok(out)
    }

    pub fn leq(&self, a: &Point, b: &Point) -> Result<bool, OrderError> {
        Ok(self.compare(a, b)?.is_le())
    }

    pub fn join(&self, a: &Point, b: &Point) -> Result<Point, OrderError> {
        self.check(a)?;
        self.check(b)?;
        self.components
            .iter()
            .zip(a.0.iter().zip(&b.0))
            .map(|(c, (x, y))| c.order.join(x, y))
            .collect::<Result<Vec<_>, _>>()
            .map(Point)
    }

    pub fn bottom(&self) -> Result<Point, OrderError> {
        self.components.iter().map(|c| c.order.bottom()).collect::<Result<Vec<_>, _>>().map(Point)
    }

    pub fn top(&self) -> Result<Point, OrderError> {
        self.components.iter().map(|c| c.order.top()).collect::<Result<Vec<_>, _>>().map(Point)
    }

    pub fn is_real_embeddable(&self) -> bool {
        self.components.iter().all(|c| c.order.is_real_embeddable())
    }

    /// Keys such that `a ⪯ b` iff `key(a) <= key(b)` componentwise.
    pub fn real_key(&self, p: &Point) -> Option<Vec<f64>> {
        if p.0.len() != self.dim() {
            return None;
        }
        self.components.iter().zip(&p.0).map(|(c, v)| c.order.real_key(v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Real(f64),
    Label { label: usize },
    Matrix(SymMatrix),
    Sequence(MatrixSequence),
}

impl Value {
    pub fn label(i: usize) -> Value {
        Value::Label { label: i }
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            Value::Real(x) => Some(*x),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Real(x) => write!(f, "{x}"),
            Value::Label { label } => write!(f, "#{label}"),
            Value::Matrix(m) => write!(f, "{:?}", m.rows()),
            Value::Sequence(s) => write!(f, "seq[{}]", s.len()),
        }
    }
}

/// A point of a [`Poset`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<Value>);

impl Point {
    pub fn reals(xs: &[f64]) -> Point {
        Point(xs.iter().map(|&x| Value::Real(x)).collect())
    }

    pub fn concat(&self, other: &Point) -> Point {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        Point(v)
    }

    pub fn project(&self, idx: &[usize]) -> Point {
        Point(idx.iter().map(|&i| self.0[i].clone()).collect())
    }

    pub fn real(&self, i: usize) -> Option<f64> {
        self.0.get(i).and_then(Value::as_real)
    }

    /// All components as reals; `None` when any component is not real.
    pub fn as_reals(&self) -> Option<Vec<f64>> {
        self.0.iter().map(Value::as_real).collect()
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Compares two points of `poset`.
pub fn compare(a: &Point, b: &Point, poset: &Poset) -> Result<PartialOrderOutcome, OrderError> {
    poset.compare(a, b)
}
