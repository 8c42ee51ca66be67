//! Non-dominated (accuracy ↑, energy ↓) front.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::space::Architecture;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub accuracy: f64,
    pub energy: f64,
    pub arch: Architecture,
    pub iteration: usize,
}

/// `a` is no worse than `b` in both objectives and strictly better in one.
pub fn dominates(a: &ParetoPoint, b: &ParetoPoint) -> bool {
    a.accuracy >= b.accuracy
        && a.energy <= b.energy
        && (a.accuracy > b.accuracy || a.energy < b.energy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Added,
    /// An existing point dominates the new one; the front is unchanged.
    Dominated,
    /// Same objectives as an existing point but earlier; it took that point's place.
    TieReplaced,
    /// Same objectives as an existing, earlier point; the front is unchanged.
    Duplicate,
}

/// Points sorted by energy ascending; accuracy is then strictly increasing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    points: Vec<ParetoPoint>,
}

/// Earlier iteration wins; the architecture text breaks any remaining tie so
/// the outcome never depends on insertion order.
fn precedes(a: &ParetoPoint, b: &ParetoPoint) -> bool {
    match a.iteration.cmp(&b.iteration) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => a.arch.to_compact() < b.arch.to_compact(),
    }
}

impl ParetoFront {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn points(&self) -> &[ParetoPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn insert(&mut self, p: ParetoPoint) -> InsertOutcome {
        if let Some(k) = self
            .points
            .iter()
            .position(|q| q.accuracy == p.accuracy && q.energy == p.energy)
        {
            return if precedes(&p, &self.points[k]) {
                self.points[k] = p;
                InsertOutcome::TieReplaced
            } else {
                InsertOutcome::Duplicate
            };
        }
        if self.points.iter().any(|q| dominates(q, &p)) {
            return InsertOutcome::Dominated;
        }
        self.points.retain(|q| !dominates(&p, q));
        let at = self.points.partition_point(|q| q.energy < p.energy);
        self.points.insert(at, p);
        InsertOutcome::Added
    }
}

pub fn front_of<I: IntoIterator<Item = ParetoPoint>>(points: I) -> ParetoFront {
    let mut front = ParetoFront::new();
    for p in points {
        front.insert(p);
    }
    front
}
