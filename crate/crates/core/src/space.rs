//! Atoms, responses and the structure-space abstraction.

use std::fmt::Debug;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{NdbalError, Result};
use crate::rng::RngStream;

/// Opaque atom identifier. Atoms compare by id only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AtomId(pub u64);

/// An atomic question: an id plus immutable, instance-specific payload.
#[derive(Debug, Clone)]
pub struct Atom<P> {
    id: AtomId,
    payload: P,
}

impl<P> Atom<P> {
    pub fn new(id: u64, payload: P) -> Self {
        Atom {
            id: AtomId(id),
            payload,
        }
    }

    pub fn id(&self) -> AtomId {
        self.id
    }

    pub fn payload(&self) -> &P {
        &self.payload
    }
}

impl<P> PartialEq for Atom<P> {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl<P> Eq for Atom<P> {}

impl<P> Hash for Atom<P> {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id.hash(state)
    }
}

/// Index of a response within its [`ResponseSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Response(pub usize);

/// Finite ordered set of responses. Each response carries a display label and
/// a numeric value (the `y` fed to margin losses, e.g. ±1).
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSet {
    labels: Vec<String>,
    values: Vec<f64>,
}

impl ResponseSet {
    pub fn new(labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(NdbalError::invalid("response set must be non-empty"));
        }
        if labels.len() != values.len() {
            return Err(NdbalError::invalid("labels and values differ in length"));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(NdbalError::invalid(format!("duplicate response `{l}`")));
            }
        }
        Ok(ResponseSet { labels, values })
    }

    /// `{-1, +1}` labels used by sign classifiers.
    pub fn signs() -> Self {
        ResponseSet {
            labels: vec!["-1".into(), "+1".into()],
            values: vec![-1.0, 1.0],
        }
    }

    /// `{different, same}` for pairwise clustering questions.
    pub fn same_different() -> Self {
        ResponseSet {
            labels: vec!["different".into(), "same".into()],
            values: vec![0.0, 1.0],
        }
    }

    /// Responses `0..n` with numeric value equal to the index.
    pub fn indexed(n: usize) -> Result<Self> {
        ResponseSet::new(
            (0..n).map(|i| i.to_string()).collect(),
            (0..n).map(|i| i as f64).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn is_queryable(&self) -> bool {
        self.labels.len() >= 2
    }

    pub fn label(&self, r: Response) -> &str {
        &self.labels[r.0]
    }

    pub fn value(&self, r: Response) -> f64 {
        self.values[r.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = Response> {
        (0..self.labels.len()).map(Response)
    }

    pub fn find_value(&self, value: f64) -> Option<Response> {
        self.values.iter().position(|&v| v == value).map(Response)
    }
}

/// A space of structures viewed as functions from atoms to responses.
pub trait StructureSpace: Send + Sync {
    type Structure: Clone + Debug + Send + Sync;
    type Payload: Clone + Debug + Send + Sync;

    fn response_set(&self) -> &ResponseSet;

    /// One i.i.d. draw from the atom distribution.
    fn sample_payload(&self, rng: &mut RngStream) -> Self::Payload;

    /// Deterministic response of `g` on atom payload `a`.
    fn evaluate(&self, g: &Self::Structure, a: &Self::Payload) -> Result<Response>;

    /// Real-valued prediction used by margin losses, when the space has one.
    fn margin(&self, _g: &Self::Structure, _a: &Self::Payload) -> Option<Result<f64>> {
        None
    }

    /// Full enumeration of a finite structure space.
    fn enumerate(&self) -> Option<Vec<Self::Structure>> {
        None
    }

    fn draw_atom(&self, id: u64, rng: &mut RngStream) -> Atom<Self::Payload> {
        Atom::new(id, self.sample_payload(rng))
    }
}

/// Spaces whose structures are weight vectors acting through `<w, x(a)>`.
///
/// This is what the Langevin sampler needs: every data term is a loss of a
/// linear prediction, so its gradient is available in closed form.
pub trait LinearSpace: StructureSpace<Structure = Vec<f64>> {
    fn dimension(&self) -> usize;

    fn features(&self, a: &Self::Payload) -> Result<Vec<f64>>;
}

/// Free-function form of [`StructureSpace::evaluate`].
pub fn evaluate<S: StructureSpace>(
    space: &S,
    g: &S::Structure,
    a: &Atom<S::Payload>,
) -> Result<Response> {
    space.evaluate(g, a.payload())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
