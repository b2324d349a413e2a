//! Fiber polylines and the segment windows that stand for formula variables.

use std::collections::HashSet;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lattice::TruthDegree;
use crate::relations::{norm, sub};
use crate::volume::{sample_trilinear, FuzzyVolume, Point3};

pub type FiberId = u64;

/// An ordered polyline in world coordinates (mm) with at least two points.
#[derive(Debug, Clone, PartialEq)]
pub struct Fiber {
    id: FiberId,
    points: Vec<Point3>,
}

impl Fiber {
    pub fn new(id: FiberId, points: Vec<Point3>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "fiber {id} has {} point(s); at least 2 required",
                points.len()
            )));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!("fiber {id} has non-finite coordinates")));
        }
        Ok(Fiber { id, points })
    }

    pub fn id(&self) -> FiberId {
        self.id
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn endpoints(&self) -> [Point3; 2] {
        [self.points[0], self.points[self.points.len() - 1]]
    }

    pub fn arc_length(&self) -> f64 {
        self.points.windows(2).map(|w| norm(sub(w[1], w[0]))).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::InvalidArgument(format!("unknown axis '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Descending,
    Ascending,
}

impl FromStr for Sense {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "descending" | "desc" => Ok(Sense::Descending),
            "ascending" | "asc" => Ok(Sense::Ascending),
            other => Err(Error::InvalidArgument(format!("unknown sense '{other}'"))),
        }
    }
}

/// Reverses the point order when the endpoints run against `sense` along
/// `axis`. Equal endpoint coordinates leave the fiber unchanged.
pub fn orient(f: &Fiber, axis: Axis, sense: Sense) -> Fiber {
    let a = axis.index();
    let first = f.points[0][a];
    let last = f.points[f.points.len() - 1][a];
    let reverse = match sense {
        Sense::Descending => first < last,
        Sense::Ascending => first > last,
    };
    if reverse {
        let mut points = f.points.clone();
        points.reverse();
        Fiber { id: f.id, points }
    } else {
        f.clone()
    }
}

/// Points at arc-length multiples of `step_mm`, plus the final endpoint.
pub fn resample(f: &Fiber, step_mm: f64) -> Result<Fiber> {
    if !(step_mm > 0.0 && step_mm.is_finite()) {
        return Err(Error::InvalidArgument(format!("resample step {step_mm} must be > 0")));
    }
    let total = f.arc_length();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument(format!("fiber {} has zero length", f.id)));
    }
    // Drop a sample this close to the end so the endpoint is not duplicated.
    let end_tol = 1e-9 * step_mm.max(total);
    let mut out = vec![f.points[0]];
    let mut k = 1usize;
    let mut seg_start = 0.0;
    for w in f.points.windows(2) {
        let len = norm(sub(w[1], w[0]));
        if len == 0.0 {
            continue;
        }
        let seg_end = seg_start + len;
        loop {
            let s = k as f64 * step_mm;
            if s > seg_end || s >= total - end_tol {
                break;
            }
            let t = (s - seg_start) / len;
            out.push([
                w[0][0] + t * (w[1][0] - w[0][0]),
                w[0][1] + t * (w[1][1] - w[0][1]),
                w[0][2] + t * (w[1][2] - w[0][2]),
            ]);
            k += 1;
        }
        seg_start = seg_end;
    }
    out.push(f.points[f.points.len() - 1]);
    Ok(Fiber {
        id: f.id,
        points: out,
    })
}

/// Landscape membership at each fiber point.
pub fn sample_fiber(f: &Fiber, v: &FuzzyVolume) -> Vec<TruthDegree> {
    f.points.iter().map(|&p| sample_trilinear(v, p)).collect()
}

/// A contiguous, nonempty run of point indices `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SegmentWindow {
    pub start: usize,
    pub end: usize,
}

impl SegmentWindow {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidArgument(format!("window [{start}, {end}] is empty")));
        }
        Ok(SegmentWindow { start, end })
    }

    pub fn is_valid_for(&self, len: usize) -> bool {
        self.start <= self.end && self.end < len
    }
}

/// `w1` lies strictly after `w2` along the fiber, without overlap.
pub fn follows(w1: SegmentWindow, w2: SegmentWindow) -> bool {
    w1.start > w2.end
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FiberSet {
    fibers: Vec<Fiber>,
}

impl FiberSet {
    pub fn new(fibers: Vec<Fiber>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(fibers.len());
        for f in &fibers {
            if !seen.insert(f.id) {
                return Err(Error::InvalidArgument(format!("duplicate fiber id {}", f.id)));
            }
        }
        Ok(FiberSet { fibers })
    }

    pub fn fibers(&self) -> &[Fiber] {
        &self.fibers
    }

    pub fn into_fibers(self) -> Vec<Fiber> {
        self.fibers
    }

    pub fn len(&self) -> usize {
        self.fibers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fibers.is_empty()
    }
}
