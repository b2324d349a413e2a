//! Clause degrees over segment windows and the max-min assignment search.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fiber::{FiberId, SegmentWindow};
use crate::lattice::TNorm;
use crate::relations::Aggregation;

/// How clause degrees along the `then` chain are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Combiner {
    #[default]
    Min,
    TNorm,
}

impl FromStr for Combiner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "min" => Ok(Combiner::Min),
            "tnorm" => Ok(Combiner::TNorm),
            _ => Err(Error::InvalidArgument(format!(
                "unknown combiner '{s}' (expected min or tnorm)"
            ))),
        }
    }
}

impl fmt::Display for Combiner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Combiner::Min => "min",
            Combiner::TNorm => "tnorm",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub tnorm: TNorm,
    pub aggregation: Aggregation,
    pub combiner: Combiner,
    pub threshold: f64,
    pub per_clause_threshold: Option<f64>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            tnorm: TNorm::default(),
            aggregation: Aggregation::default(),
            combiner: Combiner::default(),
            threshold: 0.5,
            per_clause_threshold: None,
        }
    }
}

impl EvalOptions {
    fn combine(&self, a: f64, b: f64) -> f64 {
        match self.combiner {
            Combiner::Min => a.min(b),
            Combiner::TNorm => self.tnorm.conj(a, b),
        }
    }

    fn gate(&self, d: f64) -> f64 {
        match self.per_clause_threshold {
            Some(tc) => {
                if d >= tc {
                    1.0
                } else {
                    0.0
                }
            }
            None => d,
        }
    }
}

/// A clause whose atoms have been replaced by indices into the per-fiber sample table.
#[derive(Debug, Clone, PartialEq)]
pub enum ClauseNode {
    Slot(usize),
    Not(Box<ClauseNode>),
    And(Box<ClauseNode>, Box<ClauseNode>),
    Or(Box<ClauseNode>, Box<ClauseNode>),
}

impl ClauseNode {
    pub fn slots(&self, out: &mut Vec<usize>) {
        match self {
            ClauseNode::Slot(i) => {
                if !out.contains(i) {
                    out.push(*i);
                }
            }
            ClauseNode::Not(c) => c.slots(out),
            ClauseNode::And(l, r) | ClauseNode::Or(l, r) => {
                l.slots(out);
                r.slots(out);
            }
        }
    }

    fn eval_with(&self, agg: &dyn Fn(usize) -> f64) -> f64 {
        match self {
            ClauseNode::Slot(i) => agg(*i),
            ClauseNode::Not(c) => 1.0 - c.eval_with(agg),
            ClauseNode::And(l, r) => l.eval_with(agg).min(r.eval_with(agg)),
            ClauseNode::Or(l, r) => l.eval_with(agg).max(r.eval_with(agg)),
        }
    }
}

fn aggregate(values: &[f64], agg: Aggregation) -> f64 {
    match agg {
        Aggregation::Sup => values.iter().copied().fold(0.0, f64::max),
        Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
    }
}

/// Degree of `clause` on window `w`; `samples[slot][i]` is the slot's degree at point i.
pub fn clause_degree(
    clause: &ClauseNode,
    samples: &[Vec<f64>],
    w: SegmentWindow,
    agg: Aggregation,
) -> f64 {
    clause.eval_with(&|i| aggregate(&samples[i][w.start..=w.end], agg))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberResult {
    pub id: FiberId,
    pub degree: f64,
    pub accepted: bool,
    pub windows: Vec<SegmentWindow>,
    pub clause_degrees: Vec<f64>,
}

impl FiberResult {
    fn rejected(id: FiberId) -> Self {
        FiberResult {
            id,
            degree: 0.0,
            accepted: false,
            windows: Vec::new(),
            clause_degrees: Vec::new(),
        }
    }
}

/// `table[s][e - s]` for every window of one clause, gated by the per-clause threshold.
fn clause_table(
    clause: &ClauseNode,
    samples: &[Vec<f64>],
    n: usize,
    opts: &EvalOptions,
) -> Vec<Vec<f64>> {
    let mut slots = Vec::new();
    clause.slots(&mut slots);
    let width = samples.len();
    let mut acc = vec![0.0f64; width];
    let mut cur = vec![0.0f64; width];
    (0..n)
        .map(|s| {
            for &k in &slots {
                acc[k] = 0.0;
            }
            (s..n)
                .map(|e| {
                    let len = (e - s + 1) as f64;
                    for &k in &slots {
                        let v = samples[k][e];
                        match opts.aggregation {
                            Aggregation::Sup => {
                                acc[k] = acc[k].max(v);
                                cur[k] = acc[k];
                            }
                            Aggregation::Mean => {
                                acc[k] += v;
                                cur[k] = acc[k] / len;
                            }
                        }
                    }
                    opts.gate(clause.eval_with(&|k| cur[k]))
                })
                .collect()
        })
        .collect()
}

/// Best window assignment for one fiber's samples.
///
/// Windows are nonempty, strictly ordered and non-overlapping. Among optimal assignments the
/// lexicographically earliest (start, then end, clause by clause) is reported.
pub fn evaluate_samples(
    id: FiberId,
    clauses: &[ClauseNode],
    samples: &[Vec<f64>],
    n: usize,
    opts: &EvalOptions,
) -> FiberResult {
    let m = clauses.len();
    if m == 0 || n < m {
        return FiberResult::rejected(id);
    }
    let cd: Vec<Vec<Vec<f64>>> = clauses
        .iter()
        .map(|c| clause_table(c, samples, n, opts))
        .collect();

    // best[j][s]: optimum over clauses j.. with window j starting at or after s.
    let mut best = vec![vec![f64::NEG_INFINITY; n + 2]; m + 1];
    best[m].iter_mut().for_each(|b| *b = 1.0);
    for j in (0..m).rev() {
        let remaining = m - j;
        for s in (0..n).rev() {
            let mut here = f64::NEG_INFINITY;
            if n - s >= remaining {
                for e in s..n {
                    let tail = best[j + 1][e + 1];
                    if tail == f64::NEG_INFINITY {
                        break;
                    }
                    here = here.max(opts.combine(cd[j][s][e - s], tail));
                }
            }
            best[j][s] = here.max(best[j][s + 1]);
        }
    }
    let target = best[0][0];
    let slack = match opts.combiner {
        Combiner::Min => 0.0,
        Combiner::TNorm => 1e-12,
    };

    let mut windows = Vec::with_capacity(m);
    let mut clause_degrees = Vec::with_capacity(m);
    let mut prefix = 1.0;
    let mut from = 0;
    for j in 0..m {
        let chosen = (from..n)
            .flat_map(|s| (s..n).map(move |e| (s, e)))
            .find(|&(s, e)| {
                let tail = best[j + 1][e + 1];
                tail != f64::NEG_INFINITY
                    && opts.combine(prefix, opts.combine(cd[j][s][e - s], tail)) >= target - slack
            });
        let (s, e) = chosen.expect("an optimal completion always exists");
        let d = cd[j][s][e - s];
        windows.push(SegmentWindow { start: s, end: e });
        clause_degrees.push(d);
        prefix = if j == 0 { d } else { opts.combine(prefix, d) };
        from = e + 1;
    }
    FiberResult {
        id,
        degree: prefix,
        accepted: prefix >= opts.threshold,
        windows,
        clause_degrees,
    }
}

pub const BRUTEFORCE_MAX_POINTS: usize = 14;
pub const BRUTEFORCE_MAX_CLAUSES: usize = 4;

/// Literal enumeration of every ordered window assignment.
pub fn evaluate_samples_bruteforce(
    id: FiberId,
    clauses: &[ClauseNode],
    samples: &[Vec<f64>],
    n: usize,
    opts: &EvalOptions,
) -> Result<FiberResult> {
    let m = clauses.len();
    if n > BRUTEFORCE_MAX_POINTS || m > BRUTEFORCE_MAX_CLAUSES {
        return Err(Error::InvalidArgument(format!(
            "brute force limited to {BRUTEFORCE_MAX_POINTS} points and {BRUTEFORCE_MAX_CLAUSES} clauses, got {n} and {m}"
        )));
    }
    if m == 0 || n < m {
        return Ok(FiberResult::rejected(id));
    }
    let mut best: Option<(f64, Vec<SegmentWindow>)> = None;
    let mut current = Vec::with_capacity(m);
    enumerate(0, n, m, &mut current, &mut |ws: &[SegmentWindow]| {
        let degrees: Vec<f64> = ws
            .iter()
            .zip(clauses)
            .map(|(w, c)| opts.gate(clause_degree(c, samples, *w, opts.aggregation)))
            .collect();
        let folded = degrees[1..]
            .iter()
            .fold(degrees[0], |acc, &d| opts.combine(acc, d));
        if best.as_ref().is_none_or(|(b, _)| folded > *b) {
            best = Some((folded, ws.to_vec()));
        }
    });
    let (degree, windows) = best.expect("n >= m admits an assignment");
    let clause_degrees = windows
        .iter()
        .zip(clauses)
        .map(|(w, c)| opts.gate(clause_degree(c, samples, *w, opts.aggregation)))
        .collect();
    Ok(FiberResult {
        id,
        degree,
        accepted: degree >= opts.threshold,
        windows,
        clause_degrees,
    })
}

fn enumerate(
    from: usize,
    n: usize,
    m: usize,
    current: &mut Vec<SegmentWindow>,
    visit: &mut dyn FnMut(&[SegmentWindow]),
) {
    if current.len() == m {
        visit(current);
        return;
    }
    let left_after = m - current.len() - 1;
    for s in from..n {
        for e in s..n {
            if n - (e + 1) < left_after {
                break;
            }
            current.push(SegmentWindow { start: s, end: e });
            enumerate(e + 1, n, m, current, visit);
            current.pop();
        }
    }
}
