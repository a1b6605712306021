//! Greedy k-center (farthest-point) selection over a candidate pool.

use alloc::vec;
use alloc::vec::Vec;

use crate::space::{euclidean, Formulation, FormulationId};
use crate::{Error, Result};

/// One greedy pick: the pool index, its id, and its distance to the nearest
/// already-covered point at the moment it was chosen (the coverage radius).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterPick {
    pub index: usize,
    pub id: FormulationId,
    pub radius: f64,
}

/// Cached nearest-center distances for every pool point.
///
/// Adding a center updates the cache in O(pool); the cache always equals the
/// from-scratch minimum distance to the current center set.
#[derive(Debug, Clone)]
pub struct CoverageState {
    coords: Vec<Vec<f64>>,
    ids: Vec<FormulationId>,
    min_dist: Vec<f64>,
    taken: Vec<bool>,
    centers: usize,
}

impl CoverageState {
    /// `pool` holds (id, coordinates); `known` are already covered points.
    pub fn new(known: &[Vec<f64>], pool: Vec<(FormulationId, Vec<f64>)>) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::Empty("k-center pool"));
        }
        let dim = pool[0].1.len();
        for c in pool.iter().map(|p| &p.1).chain(known) {
            if c.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: c.len(),
                });
            }
        }
        let (ids, coords): (Vec<_>, Vec<_>) = pool.into_iter().unzip();
        let n = coords.len();
        let mut state = Self {
            coords,
            ids,
            min_dist: vec![f64::INFINITY; n],
            taken: vec![false; n],
            centers: 0,
        };
        for k in known {
            state.add_center(k);
        }
        Ok(state)
    }

    pub fn from_formulations(known: &[Formulation], pool: &[Formulation]) -> Result<Self> {
        let known: Vec<Vec<f64>> = known.iter().map(Formulation::concentrations).collect();
        let pool = pool.iter().map(|f| (f.id(), f.concentrations())).collect();
        Self::new(&known, pool)
    }

    /// Marks `point` as covered and refreshes the distance cache.
    pub fn add_center(&mut self, point: &[f64]) {
        for (d, c) in self.min_dist.iter_mut().zip(&self.coords) {
            let e = euclidean(point, c);
            if e < *d {
                *d = e;
            }
        }
        self.centers += 1;
    }

    pub fn min_distances(&self) -> &[f64] {
        &self.min_dist
    }

    pub fn available(&self) -> usize {
        self.taken.iter().filter(|t| !**t).count()
    }

    /// Greedy pick: farthest untaken point from the covered set, ties to the
    /// lowest id. With nothing covered yet, the farthest point from the pool
    /// centroid is taken first.
    pub fn select_next(&mut self) -> Option<CenterPick> {
        let scores: Vec<f64> = if self.centers == 0 {
            let centroid = self.centroid();
            self.coords
                .iter()
                .map(|c| euclidean(c, &centroid))
                .collect()
        } else {
            self.min_dist.clone()
        };
        let mut best: Option<usize> = None;
        for (i, &s) in scores.iter().enumerate() {
            if self.taken[i] {
                continue;
            }
            best = match best {
                Some(b) if scores[b] > s || (scores[b] == s && self.ids[b] < self.ids[i]) => {
                    Some(b)
                }
                _ => Some(i),
            };
        }
        let i = best?;
        let radius = self.min_dist[i];
        self.taken[i] = true;
        let point = self.coords[i].clone();
        self.add_center(&point);
        Some(CenterPick {
            index: i,
            id: self.ids[i],
            radius,
        })
    }

    fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.coords[0].len()];
        for p in &self.coords {
            for (a, b) in c.iter_mut().zip(p) {
                *a += b;
            }
        }
        let n = self.coords.len() as f64;
        c.iter_mut().for_each(|a| *a /= n);
        c
    }
}

/// Selects `batch` pool formulations by greedy farthest-point traversal from
/// the `known` set.
pub fn kcenter_select(
    known: &[Formulation],
    pool: &[Formulation],
    batch: usize,
) -> Result<Vec<CenterPick>> {
    let mut state = CoverageState::from_formulations(known, pool)?;
    select_batch(&mut state, batch)
}

/// Runs `batch` greedy steps on an existing coverage state.
pub fn select_batch(state: &mut CoverageState, batch: usize) -> Result<Vec<CenterPick>> {
    let available = state.available();
    if batch > available {
        return Err(Error::PoolExhausted {
            available,
            requested: batch,
        });
    }
    Ok((0..batch).filter_map(|_| state.select_next()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> Vec<(FormulationId, Vec<f64>)> {
        points
            .iter()
            .enumerate()
            .map(|(i, &p)| (FormulationId(i as u64), vec![p]))
            .collect()
    }

    #[test]
    fn one_dimensional_example() {
        let mut s = CoverageState::new(&[vec![0.0]], line(&[0.2, 0.5, 0.9, 1.0])).unwrap();
        let picks = select_batch(&mut s, 2).unwrap();
        assert_eq!(picks[0].index, 3);
        assert_eq!(picks[0].radius, 1.0);
        assert_eq!(picks[1].index, 1);
        assert!((picks[1].radius - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ties_break_by_lowest_id() {
        let pool = vec![
            (FormulationId(9), vec![-1.0]),
            (FormulationId(3), vec![1.0]),
        ];
        let mut s = CoverageState::new(&[vec![0.0]], pool).unwrap();
        assert_eq!(s.select_next().unwrap().id, FormulationId(3));
    }

    #[test]
    fn empty_known_starts_far_from_centroid() {
        let mut s = CoverageState::new(&[], line(&[0.0, 0.1, 0.2, 1.0])).unwrap();
        assert_eq!(s.select_next().unwrap().index, 3);
        assert_eq!(s.select_next().unwrap().index, 0);
    }

    #[test]
    fn exhaustion_and_errors() {
        let mut s = CoverageState::new(&[vec![0.0]], line(&[1.0])).unwrap();
        assert!(matches!(
            select_batch(&mut s, 2),
            Err(Error::PoolExhausted {
                available: 1,
                requested: 2
            })
        ));
        assert!(CoverageState::new(&[], vec![]).is_err());
        assert!(CoverageState::new(&[vec![0.0, 1.0]], line(&[1.0])).is_err());
    }
}
