//! The discrete mixture design space.
//!
//! All grid arithmetic happens in integer grid units (`concentration / increment`)
//! so "multiple of the increment" is an exact property. Molar values are derived
//! on demand.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::pareto::ObjectiveVector;
use crate::rng::fnv1a;
use crate::{Error, Result};

/// Default cap on the number of enumerated formulations.
pub const DEFAULT_MAX_POOL: usize = 10_000_000;

const GRID_TOL: f64 = 1e-9;

/// Mixture components and the constraints on their concentrations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSet {
    pub names: Vec<String>,
    /// Molar step between grid levels.
    pub increment: f64,
    /// Molar cap per component; `None` leaves components bounded by the total only.
    #[serde(default)]
    pub per_component_max: Option<f64>,
    pub total_min: f64,
    pub total_max: f64,
}

impl Default for ComponentSet {
    fn default() -> Self {
        Self::cpa_cocktails()
    }
}

impl ComponentSet {
    pub const CPA_NAMES: [&'static str; 7] =
        ["glycerol", "DMSO", "EG", "12PD", "13PD", "3M12PD", "urea"];

    /// The seven-CPA cocktail search space: 0.5 M steps, total in [3.5, 6.0] M,
    /// no per-component cap beyond the total.
    pub fn cpa_cocktails() -> Self {
        Self {
            names: Self::CPA_NAMES.iter().map(|s| s.to_string()).collect(),
            increment: 0.5,
            per_component_max: None,
            total_min: 3.5,
            total_max: 6.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.names.is_empty() {
            return Err(Error::Empty("component names"));
        }
        for (i, n) in self.names.iter().enumerate() {
            if self.names[..i].contains(n) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate component name {n:?}"
                )));
            }
        }
        if !(self.increment.is_finite() && self.increment > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "increment must be positive, got {}",
                self.increment
            )));
        }
        if !(self.total_min.is_finite() && self.total_max.is_finite())
            || self.total_min < 0.0
            || self.total_min > self.total_max
        {
            return Err(Error::InvalidConfig(format!(
                "total bounds must satisfy 0 <= min <= max, got [{}, {}]",
                self.total_min, self.total_max
            )));
        }
        if let Some(cap) = self.per_component_max {
            if !(cap.is_finite() && cap >= 0.0) || self.exact_units(cap).is_none() {
                return Err(Error::InvalidConfig(format!(
                    "per-component max {cap} is not a multiple of the increment {}",
                    self.increment
                )));
            }
        }
        Ok(())
    }

    fn exact_units(&self, molar: f64) -> Option<u32> {
        let u = molar / self.increment;
        let r = libm::round(u);
        (r >= 0.0 && (u - r).abs() <= GRID_TOL * r.max(1.0)).then_some(r as u32)
    }

    /// Inclusive range of the total in grid units.
    pub fn total_units(&self) -> (u32, u32) {
        let lo = libm::ceil(self.total_min / self.increment - GRID_TOL).max(0.0) as u32;
        let hi = libm::floor(self.total_max / self.increment + GRID_TOL).max(0.0) as u32;
        (lo, hi)
    }

    /// Per-component cap in grid units, already limited by the total.
    pub fn cap_units(&self) -> u32 {
        let (_, hi) = self.total_units();
        match self.per_component_max {
            Some(c) => self.exact_units(c).unwrap_or(0).min(hi),
            None => hi,
        }
    }

    /// Number of grid points satisfying the constraints, without enumerating.
    pub fn pool_size(&self) -> Result<u128> {
        self.validate()?;
        let (lo, hi) = self.total_units();
        if lo > hi {
            return Ok(0);
        }
        let cap = self.cap_units() as usize;
        let hi = hi as usize;
        // ways[s] = number of vectors over the components seen so far summing to s
        let mut ways = vec![0u128; hi + 1];
        ways[0] = 1;
        for _ in 0..self.dim() {
            let mut next = vec![0u128; hi + 1];
            for (s, &w) in ways.iter().enumerate() {
                if w == 0 {
                    continue;
                }
                for c in 0..=cap.min(hi - s) {
                    next[s + c] += w;
                }
            }
            ways = next;
        }
        Ok(ways[lo as usize..=hi].iter().sum())
    }

    /// Builds a formulation from molar concentrations, checking the grid.
    pub fn formulation(&self, concentrations: &[f64]) -> Result<Formulation> {
        if concentrations.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: concentrations.len(),
            });
        }
        let units = concentrations
            .iter()
            .map(|&c| {
                if !c.is_finite() {
                    return Err(Error::NonFinite("concentration"));
                }
                self.exact_units(c).ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "concentration {c} is not a non-negative multiple of {}",
                        self.increment
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Formulation::from_units(units, self.increment))
    }

    /// True when the formulation lies inside the box and total-sum constraints.
    pub fn contains(&self, f: &Formulation) -> bool {
        let (lo, hi) = self.total_units();
        let cap = self.cap_units();
        let total = f.total_units();
        f.dim() == self.dim()
            && (f.increment - self.increment).abs() <= GRID_TOL
            && f.units.iter().all(|&u| u <= cap)
            && (lo..=hi).contains(&total)
    }
}

/// Stable identifier of a grid point, rendered as 16 hex digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FormulationId(pub u64);

impl fmt::Display for FormulationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl FromStr for FormulationId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        u64::from_str_radix(s.trim(), 16)
            .map(FormulationId)
            .map_err(|_| Error::InvalidConfig(format!("malformed formulation id {s:?}")))
    }
}

impl Serialize for FormulationId {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FormulationId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A point of the formulation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FormulationRepr", into = "FormulationRepr")]
pub struct Formulation {
    id: FormulationId,
    units: Vec<u32>,
    increment: f64,
}

#[derive(Serialize, Deserialize)]
struct FormulationRepr {
    id: FormulationId,
    units: Vec<u32>,
    increment: f64,
}

impl From<Formulation> for FormulationRepr {
    fn from(f: Formulation) -> Self {
        Self {
            id: f.id,
            units: f.units,
            increment: f.increment,
        }
    }
}

impl TryFrom<FormulationRepr> for Formulation {
    type Error = String;

    fn try_from(r: FormulationRepr) -> core::result::Result<Self, String> {
        let f = Formulation::from_units(r.units, r.increment);
        if f.id != r.id {
            return Err(format!(
                "formulation id {} does not match its grid units",
                r.id
            ));
        }
        Ok(f)
    }
}

impl Formulation {
    pub fn from_units(units: Vec<u32>, increment: f64) -> Self {
        let mut bytes = Vec::with_capacity(units.len() * 4);
        for u in &units {
            bytes.extend_from_slice(&u.to_le_bytes());
        }
        Self {
            id: FormulationId(fnv1a(&bytes)),
            units,
            increment,
        }
    }

    pub fn id(&self) -> FormulationId {
        self.id
    }

    pub fn units(&self) -> &[u32] {
        &self.units
    }

    pub fn increment(&self) -> f64 {
        self.increment
    }

    pub fn dim(&self) -> usize {
        self.units.len()
    }

    pub fn concentration(&self, i: usize) -> f64 {
        f64::from(self.units[i]) * self.increment
    }

    pub fn concentrations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.concentration(i)).collect()
    }

    pub fn total_units(&self) -> u32 {
        self.units.iter().sum()
    }

    /// Total molar concentration.
    pub fn total(&self) -> f64 {
        f64::from(self.total_units()) * self.increment
    }
}

/// Enumerates every grid point of `space` in lexicographic order of grid units.
pub fn enumerate_pool(space: &ComponentSet, max_pool: usize) -> Result<Vec<Formulation>> {
    let size = space.pool_size()?;
    if size > max_pool as u128 {
        return Err(Error::PoolTooLarge {
            size,
            cap: max_pool,
        });
    }
    let (lo, hi) = space.total_units();
    let cap = space.cap_units();
    let mut out = Vec::with_capacity(size as usize);
    let mut current = vec![0u32; space.dim()];
    fill(&mut current, 0, 0, lo, hi, cap, space.increment, &mut out);
    debug_assert_eq!(out.len() as u128, size);
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn fill(
    current: &mut [u32],
    pos: usize,
    used: u32,
    lo: u32,
    hi: u32,
    cap: u32,
    increment: f64,
    out: &mut Vec<Formulation>,
) {
    if pos == current.len() {
        if used >= lo {
            out.push(Formulation::from_units(current.to_vec(), increment));
        }
        return;
    }
    // Remaining components can contribute at most this much.
    let rest = (current.len() - pos - 1) as u32;
    for u in 0..=cap.min(hi - used) {
        if used + u + rest.saturating_mul(cap) < lo {
            continue;
        }
        current[pos] = u;
        fill(current, pos + 1, used + u, lo, hi, cap, increment, out);
    }
    current[pos] = 0;
}

/// Euclidean distance between molar concentration vectors.
pub fn distance(a: &Formulation, b: &Formulation) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(euclidean(&a.concentrations(), &b.concentrations()))
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Closed interval used to map an objective onto [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || max <= min {
            return Err(Error::InvalidConfig(format!(
                "degenerate normalization bounds [{min}, {max}]"
            )));
        }
        Ok(Self { min, max })
    }

    /// Affine map to [0, 1] and whether clamping was needed.
    pub fn normalize(&self, v: f64) -> (f64, bool) {
        let t = (v - self.min) / (self.max - self.min);
        if t < 0.0 {
            (0.0, true)
        } else if t > 1.0 {
            (1.0, true)
        } else {
            (t, false)
        }
    }

    /// The tightest bounds around `values`, or `None` if they are degenerate.
    pub fn observed(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let (lo, hi) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        Bounds::new(lo, hi).ok()
    }
}

/// An objective vector mapped into [0, 1]; `clamped` flags values that fell
/// outside the bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedObjectives {
    pub values: ObjectiveVector,
    pub clamped: bool,
}

/// Maps every objective coordinate onto [0, 1] with the given bounds.
pub fn normalize_objectives(
    points: &[ObjectiveVector],
    bounds: &[Bounds],
) -> Result<Vec<NormalizedObjectives>> {
    for b in bounds {
        Bounds::new(b.min, b.max)?;
    }
    points
        .iter()
        .map(|p| {
            if p.len() != bounds.len() {
                return Err(Error::DimensionMismatch {
                    expected: bounds.len(),
                    found: p.len(),
                });
            }
            let mut clamped = false;
            let values = p
                .iter()
                .zip(bounds)
                .map(|(&v, b)| {
                    let (t, c) = b.normalize(v);
                    clamped |= c;
                    t
                })
                .collect();
            Ok(NormalizedObjectives {
                values: ObjectiveVector::new(values),
                clamped,
            })
        })
        .collect()
}
