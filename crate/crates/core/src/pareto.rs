//! Pareto dominance and front quality indicators. Every objective is maximized.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::space::{euclidean, FormulationId};
use crate::{Error, Result};

/// Objective values of one evaluated point, all to be maximized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveVector(Vec<f64>);

impl ObjectiveVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ObjectiveVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ObjectiveVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// An objective vector with an optional back-reference to its formulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPoint {
    pub id: Option<FormulationId>,
    pub objectives: ObjectiveVector,
}

impl ScoredPoint {
    pub fn new(id: Option<FormulationId>, objectives: impl Into<ObjectiveVector>) -> Self {
        Self {
            id,
            objectives: objectives.into(),
        }
    }

    pub fn anonymous(objectives: impl Into<ObjectiveVector>) -> Self {
        Self::new(None, objectives)
    }
}

/// The nondominated subset of a point set, sorted by the first objective.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParetoFront {
    pub members: Vec<ScoredPoint>,
}

impl ParetoFront {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn objectives(&self) -> Vec<ObjectiveVector> {
        self.members.iter().map(|m| m.objectives.clone()).collect()
    }

    pub fn ids(&self) -> Vec<FormulationId> {
        self.members.iter().filter_map(|m| m.id).collect()
    }
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

/// True iff `a` is at least as good as `b` everywhere and differs somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    check_dims(a, b)?;
    Ok(dominates_unchecked(a, b))
}

fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
}

/// Extracts the nondominated subset.
///
/// Duplicated objective vectors are kept once, represented by the lowest id
/// (anonymous points sort first). Two objectives use an O(n log n) sweep.
pub fn pareto_front(points: &[ScoredPoint]) -> Result<ParetoFront> {
    let first = points.first().ok_or(Error::Empty("point set"))?;
    let dim = first.objectives.len();
    for p in points {
        check_dims(&first.objectives, &p.objectives)?;
        if p.objectives.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("objective vector"));
        }
    }
    let mut members = if dim == 2 {
        front_2d(points)
    } else {
        front_quadratic(points)
    };
    members.sort_by(|a, b| lexicographic(&a.objectives, &b.objectives).then(a.id.cmp(&b.id)));
    Ok(ParetoFront { members })
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn front_2d(points: &[ScoredPoint]) -> Vec<ScoredPoint> {
    let mut order: Vec<&ScoredPoint> = points.iter().collect();
    order.sort_by(|a, b| {
        b.objectives[0]
            .total_cmp(&a.objectives[0])
            .then(b.objectives[1].total_cmp(&a.objectives[1]))
            .then(a.id.cmp(&b.id))
    });
    let mut best_y = f64::NEG_INFINITY;
    let mut out = Vec::new();
    for p in order {
        if p.objectives[1] > best_y {
            best_y = p.objectives[1];
            out.push(p.clone());
        }
    }
    out
}

fn front_quadratic(points: &[ScoredPoint]) -> Vec<ScoredPoint> {
    let mut out: Vec<ScoredPoint> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let dominated = points
            .iter()
            .any(|q| dominates_unchecked(&q.objectives, &p.objectives));
        if dominated {
            continue;
        }
        let earlier_duplicate = points
            .iter()
            .enumerate()
            .any(|(j, q)| q.objectives == p.objectives && (q.id < p.id || (q.id == p.id && j < i)));
        if !earlier_duplicate {
            out.push(p.clone());
        }
    }
    out
}

/// Hypervolume together with the number of points ignored because they do not
/// weakly dominate the reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypervolumeReport {
    pub value: f64,
    pub excluded: usize,
}

/// Exact two-objective dominated area relative to `reference`.
///
/// Points below the reference in any coordinate are excluded; use
/// [`hypervolume_report`] to see how many.
pub fn hypervolume(points: &[ObjectiveVector], reference: &[f64]) -> Result<f64> {
    hypervolume_report(points, reference).map(|r| r.value)
}

pub fn hypervolume_report(
    points: &[ObjectiveVector],
    reference: &[f64],
) -> Result<HypervolumeReport> {
    if reference.len() != 2 {
        return Err(Error::InvalidConfig(alloc::format!(
            "hypervolume is implemented for exactly 2 objectives, got {}",
            reference.len()
        )));
    }
    let mut kept: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    let mut excluded = 0;
    for p in points {
        check_dims(reference, p)?;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("objective vector"));
        }
        if p[0] >= reference[0] && p[1] >= reference[1] {
            kept.push((p[0], p[1]));
        } else {
            excluded += 1;
        }
    }
    Ok(HypervolumeReport {
        value: area_2d(&mut kept, reference[0], reference[1]),
        excluded,
    })
}

fn area_2d(points: &mut [(f64, f64)], rx: f64, ry: f64) -> f64 {
    points.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
    let mut top = ry;
    let mut area = 0.0;
    for &(x, y) in points.iter() {
        if y > top {
            area += (x - rx) * (y - top);
            top = y;
        }
    }
    area
}

/// Hypervolume gained by adding `candidate` to `front`; zero when dominated.
pub fn hypervolume_improvement(
    front: &[ObjectiveVector],
    candidate: &[f64],
    reference: &[f64],
) -> Result<f64> {
    let base = hypervolume(front, reference)?;
    let mut all = front.to_vec();
    all.push(ObjectiveVector::new(candidate.to_vec()));
    let with = hypervolume(&all, reference)?;
    Ok((with - base).max(0.0))
}

/// Inverted generational distance: the mean, over reference-front points, of
/// the Euclidean distance to the nearest point of the estimated front.
pub fn igd(estimated: &[ObjectiveVector], reference: &[ObjectiveVector]) -> Result<f64> {
    let first = estimated.first().ok_or(Error::Empty("estimated front"))?;
    if reference.is_empty() {
        return Err(Error::Empty("reference front"));
    }
    for p in estimated.iter().chain(reference) {
        check_dims(first, p)?;
    }
    let total: f64 = reference
        .iter()
        .map(|r| {
            estimated
                .iter()
                .map(|p| euclidean(r, p))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(total / reference.len() as f64)
}

/// Pareto front of the union of several point sets (e.g. every campaign's data
/// plus the shared initial set).
pub fn reference_front(sets: &[&[ScoredPoint]]) -> Result<ParetoFront> {
    let union: Vec<ScoredPoint> = sets.iter().flat_map(|s| s.iter().cloned()).collect();
    pareto_front(&union)
}

/// Nondominated staircase of a two-objective point set, for repeated
/// hypervolume-improvement queries against the same front.
#[derive(Debug, Clone)]
pub(crate) struct Staircase {
    xs: Vec<f64>,
    ys: Vec<f64>,
    rx: f64,
    ry: f64,
}

impl Staircase {
    pub(crate) fn new(points: impl IntoIterator<Item = (f64, f64)>, rx: f64, ry: f64) -> Self {
        let mut pts: Vec<(f64, f64)> = points
            .into_iter()
            .filter(|&(x, y)| x >= rx && y >= ry)
            .collect();
        pts.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
        let mut top = f64::NEG_INFINITY;
        let mut kept = vec![];
        for (x, y) in pts {
            if y > top {
                top = y;
                kept.push((x, y));
            }
        }
        kept.reverse();
        Self {
            xs: kept.iter().map(|p| p.0).collect(),
            ys: kept.iter().map(|p| p.1).collect(),
            rx,
            ry,
        }
    }

    pub(crate) fn improvement(&self, px: f64, py: f64) -> f64 {
        if px <= self.rx || py <= self.ry {
            return 0.0;
        }
        let mut left = self.rx;
        let mut hvi = 0.0;
        for (&x, &y) in self.xs.iter().zip(&self.ys) {
            let right = x.min(px);
            if right > left {
                if py > y {
                    hvi += (right - left) * (py - y);
                }
                left = right;
            }
            if x >= px {
                return hvi;
            }
        }
        if px > left {
            hvi += (px - left) * (py - self.ry);
        }
        hvi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(v: &[f64]) -> ObjectiveVector {
        ObjectiveVector::new(v.to_vec())
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&[0.8, 0.9], &[0.5, 0.9]).unwrap());
        assert!(!dominates(&[0.5, 0.9], &[0.8, 0.3]).unwrap());
        assert!(!dominates(&[0.5, 0.9], &[0.5, 0.9]).unwrap());
        assert!(dominates(&[0.5], &[0.5, 0.9]).is_err());
    }

    #[test]
    fn front_examples() {
        let f = pareto_front(&[
            ScoredPoint::anonymous(vec![1.0, 1.0]),
            ScoredPoint::anonymous(vec![0.5, 0.5]),
        ])
        .unwrap();
        assert_eq!(f.objectives(), vec![ov(&[1.0, 1.0])]);
        let f = pareto_front(&[
            ScoredPoint::anonymous(vec![1.0, 0.0]),
            ScoredPoint::anonymous(vec![0.0, 1.0]),
        ])
        .unwrap();
        assert_eq!(f.len(), 2);
        assert!(pareto_front(&[]).is_err());
    }

    #[test]
    fn duplicate_keeps_lowest_id() {
        let pts = [
            ScoredPoint::new(Some(FormulationId(9)), vec![1.0, 1.0]),
            ScoredPoint::new(Some(FormulationId(3)), vec![1.0, 1.0]),
            ScoredPoint::new(Some(FormulationId(5)), vec![1.0, 1.0]),
        ];
        let f = pareto_front(&pts).unwrap();
        assert_eq!(f.ids(), vec![FormulationId(3)]);
        let pts3: Vec<_> = pts
            .iter()
            .map(|p| {
                let mut v = p.objectives.to_vec();
                v.push(0.0);
                ScoredPoint::new(p.id, v)
            })
            .collect();
        assert_eq!(pareto_front(&pts3).unwrap().ids(), vec![FormulationId(3)]);
    }

    #[test]
    fn hypervolume_examples() {
        assert_eq!(hypervolume(&[ov(&[1.0, 1.0])], &[0.0, 0.0]).unwrap(), 1.0);
        let hv = hypervolume(&[ov(&[0.5, 1.0]), ov(&[1.0, 0.5])], &[0.0, 0.0]).unwrap();
        assert!((hv - 0.75).abs() < 1e-15);
        assert_eq!(hypervolume(&[], &[0.0, 0.0]).unwrap(), 0.0);
        let r = hypervolume_report(&[ov(&[-0.5, 1.0]), ov(&[1.0, 0.5])], &[0.0, 0.0]).unwrap();
        assert_eq!(r.excluded, 1);
        assert!((r.value - 0.5).abs() < 1e-15);
        assert!(hypervolume(&[ov(&[1.0, 1.0, 1.0])], &[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn hvi_examples() {
        let r = [0.0, 0.0];
        let front = [ov(&[1.0, 0.5])];
        assert_eq!(
            hypervolume_improvement(&front, &[0.8, 0.4], &r).unwrap(),
            0.0
        );
        assert_eq!(hypervolume_improvement(&[], &[1.0, 1.0], &r).unwrap(), 1.0);
        let v = hypervolume_improvement(&front, &[0.5, 1.0], &r).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn staircase_matches_hypervolume_difference() {
        let front = [
            ov(&[0.2, 0.9]),
            ov(&[0.5, 0.7]),
            ov(&[0.9, 0.2]),
            ov(&[0.4, 0.3]),
        ];
        let st = Staircase::new(front.iter().map(|p| (p[0], p[1])), 0.0, 0.0);
        for &(x, y) in &[
            (0.3, 0.8),
            (1.0, 1.0),
            (0.1, 0.1),
            (0.95, 0.25),
            (0.6, 0.75),
            (0.5, 0.7),
        ] {
            let direct = hypervolume_improvement(&front, &[x, y], &[0.0, 0.0]).unwrap();
            assert!((st.improvement(x, y) - direct).abs() < 1e-14, "{x} {y}");
        }
    }

    #[test]
    fn igd_examples() {
        let p = [ov(&[0.0, 0.0])];
        let star = [ov(&[0.0, 0.0]), ov(&[1.0, 1.0])];
        let v = igd(&p, &star).unwrap();
        assert!((v - libm::sqrt(2.0) / 2.0).abs() < 1e-12);
        assert_eq!(igd(&star, &star).unwrap(), 0.0);
        assert!(igd(&[], &star).is_err());
        assert!(igd(&p, &[]).is_err());
    }

    #[test]
    fn reference_front_of_union() {
        let a = [ScoredPoint::anonymous(vec![1.0, 0.2])];
        let b = [
            ScoredPoint::anonymous(vec![0.2, 1.0]),
            ScoredPoint::anonymous(vec![0.1, 0.1]),
        ];
        let f = reference_front(&[&a, &b]).unwrap();
        assert_eq!(f.objectives(), vec![ov(&[0.2, 1.0]), ov(&[1.0, 0.2])]);
        assert_eq!(reference_front(&[&a]).unwrap().len(), 1);
    }
}
