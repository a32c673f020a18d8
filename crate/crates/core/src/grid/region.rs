use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{CellSet, Grid};

/// Open axis-aligned box `(lo_0, hi_0) × … × (lo_{n-1}, hi_{n-1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AaBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AaBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len(), "box corners must share a dimension");
        Self { lo, hi }
    }

    pub fn cube(lo: &[f64], side: f64) -> Self {
        Self::new(lo.to_vec(), lo.iter().map(|x| x + side).collect())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.lo.iter().zip(&self.hi).zip(p).all(|((lo, hi), x)| lo < x && x < hi)
    }

    pub fn sides(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(lo, hi)| hi - lo).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    pub fn volume(&self) -> f64 {
        self.sides().iter().map(|s| s.max(0.0)).product()
    }

    pub fn diameter(&self) -> f64 {
        self.sides().iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(lo, hi)| hi <= lo)
    }

    /// Expands about the center by `factor` (a factor of 3 triples every side).
    pub fn scaled(&self, factor: f64) -> Self {
        let c = self.center();
        let half: Vec<f64> = self.sides().iter().map(|s| 0.5 * s * factor).collect();
        Self::new(c.iter().zip(&half).map(|(c, h)| c - h).collect(), c.iter().zip(&half).map(|(c, h)| c + h).collect())
    }

    pub fn dilated(&self, margin: f64) -> Self {
        Self::new(self.lo.iter().map(|x| x - margin).collect(), self.hi.iter().map(|x| x + margin).collect())
    }

    /// Intersection of the open boxes is nonempty.
    pub fn overlaps(&self, other: &AaBox) -> bool {
        (0..self.dim()).all(|k| self.lo[k] < other.hi[k] && other.lo[k] < self.hi[k])
    }

    /// Intersection of the closures is nonempty.
    pub fn touches(&self, other: &AaBox) -> bool {
        (0..self.dim()).all(|k| self.lo[k] <= other.hi[k] && other.lo[k] <= self.hi[k])
    }

    pub fn intersection(&self, other: &AaBox) -> AaBox {
        AaBox::new(
            self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect(),
            self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect(),
        )
    }

    pub fn contains_box(&self, other: &AaBox) -> bool {
        (0..self.dim()).all(|k| self.lo[k] <= other.lo[k] && other.hi[k] <= self.hi[k])
    }

    pub fn union_bbox(&self, other: &AaBox) -> AaBox {
        AaBox::new(
            self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        )
    }

    /// Euclidean distance from a point to the closed box.
    pub fn distance_to_point(&self, p: &[f64]) -> f64 {
        let mut d2 = 0.0;
        for k in 0..self.dim() {
            let gap = (self.lo[k] - p[k]).max(p[k] - self.hi[k]).max(0.0);
            d2 += gap * gap;
        }
        d2.sqrt()
    }
}

/// Open Euclidean ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        let d2: f64 = self.center.iter().zip(p).map(|(c, x)| (x - c) * (x - c)).sum();
        d2 < self.radius * self.radius
    }

    pub fn bbox(&self) -> AaBox {
        AaBox::new(self.center.iter().map(|c| c - self.radius).collect(), self.center.iter().map(|c| c + self.radius).collect())
    }
}

pub type Membership = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Box(AaBox),
    BoxUnion(Vec<AaBox>),
    Predicate(Membership),
}

/// A measurable set described by boxes or by a membership predicate plus a
/// bounding box. Membership on a grid is decided at cell centers.
#[derive(Clone)]
pub struct Region {
    kind: Kind,
    bbox: AaBox,
}

impl fmt::Debug for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Box(b) => f.debug_tuple("Region::Box").field(b).finish(),
            Kind::BoxUnion(bs) => f.debug_tuple("Region::BoxUnion").field(bs).finish(),
            Kind::Predicate(_) => f.debug_struct("Region::Predicate").field("bbox", &self.bbox).finish(),
        }
    }
}

impl Region {
    pub fn boxed(b: AaBox) -> Self {
        Self { bbox: b.clone(), kind: Kind::Box(b) }
    }

    pub fn box_union(boxes: Vec<AaBox>) -> Self {
        assert!(!boxes.is_empty(), "box union needs at least one box");
        let bbox = boxes[1..].iter().fold(boxes[0].clone(), |acc, b| acc.union_bbox(b));
        Self { kind: Kind::BoxUnion(boxes), bbox }
    }

    pub fn predicate<F>(bbox: AaBox, membership: F) -> Self
    where
        F: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        Self { kind: Kind::Predicate(Arc::new(membership)), bbox }
    }

    pub fn ball(ball: Ball) -> Self {
        let bbox = ball.bbox();
        Self::predicate(bbox, move |p| ball.contains(p))
    }

    pub fn bbox(&self) -> &AaBox {
        &self.bbox
    }

    pub fn dim(&self) -> usize {
        self.bbox.dim()
    }

    /// The boxes of a box or box-union region.
    pub fn boxes(&self) -> Option<&[AaBox]> {
        match &self.kind {
            Kind::Box(b) => Some(std::slice::from_ref(b)),
            Kind::BoxUnion(bs) => Some(bs),
            Kind::Predicate(_) => None,
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        match &self.kind {
            Kind::Box(b) => b.contains(p),
            Kind::BoxUnion(bs) => bs.iter().any(|b| b.contains(p)),
            Kind::Predicate(m) => self.bbox.contains(p) && m(p),
        }
    }

    /// Sorted indices of the cells whose centers lie in the region.
    pub fn cells(&self, grid: &Grid) -> CellSet {
        let mut cells = Vec::new();
        grid.for_each_cell_in(&self.bbox, |idx, c| {
            if self.contains(c) {
                cells.push(idx);
            }
        });
        CellSet::from_sorted(cells)
    }

    pub fn intersect(&self, other: &Region) -> Region {
        let a = self.clone();
        let b = other.clone();
        let bbox = self.bbox.intersection(&other.bbox);
        Region::predicate(bbox, move |p| a.contains(p) && b.contains(p))
    }
}
