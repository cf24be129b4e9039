//! The finite search lattice.
//!
//! Each hyperparameter takes one of a finite, strictly increasing list of raw
//! values. Internally a value is addressed by its 0-based position in that
//! list, so every dimension becomes a run of consecutive integers and the
//! search space is the product of those runs.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One named hyperparameter and its admissible raw values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionSpec {
    pub name: String,
    pub values: Vec<f64>,
}

impl DimensionSpec {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }

    /// Arithmetic progression `start, start + step, ..., <= stop`.
    ///
    /// Values are rounded to nine decimals so that e.g. `0.1 * 3` is stored
    /// as `0.3`.
    pub fn stepped(name: impl Into<String>, start: f64, stop: f64, step: f64) -> Result<Self> {
        let name = name.into();
        if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
            return Err(Error::InvalidDomain(format!(
                "dimension `{name}`: bad range {start}..={stop} step {step}"
            )));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        let values = (0..count)
            .map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9)
            .collect();
        Ok(Self { name, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest mapped index.
    pub fn max_index(&self) -> usize {
        self.values.len() - 1
    }

    fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidDomain(format!(
                "dimension `{}` has no values",
                self.name
            )));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidDomain(format!(
                "dimension `{}` has non-finite value {v}",
                self.name
            )));
        }
        if let Some(w) = self.values.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidDomain(format!(
                "dimension `{}` is not strictly increasing at {} -> {}",
                self.name, w[0], w[1]
            )));
        }
        Ok(())
    }
}

/// A point of the lattice in mapped (index) coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticePoint(pub Vec<usize>);

impl LatticePoint {
    pub fn coords(&self) -> &[usize] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Coordinates as reals, the representation the surrogates work in.
    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&c| c as f64).collect()
    }
}

impl From<Vec<usize>> for LatticePoint {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// The search space: a product of finite value lists.
///
/// Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegerDomain {
    dims: Vec<DimensionSpec>,
    cardinality: u64,
}

impl IntegerDomain {
    pub fn new(dims: Vec<DimensionSpec>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidDomain("no dimensions".into()));
        }
        for d in &dims {
            d.validate()?;
        }
        let cardinality = dims
            .iter()
            .try_fold(1u64, |acc, d| acc.checked_mul(d.len() as u64))
            .ok_or(Error::CardinalityOverflow)?;
        Ok(Self { dims, cardinality })
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[DimensionSpec] {
        &self.dims
    }

    /// Number of lattice points, `|Ω|`.
    pub fn cardinality(&self) -> u64 {
        self.cardinality
    }

    /// Position of the dimension called `name`.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name == name)
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        p.dim() == self.dim() && p.0.iter().zip(&self.dims).all(|(&c, d)| c < d.len())
    }

    fn check(&self, p: &LatticePoint) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: p.dim(),
            });
        }
        for (&c, d) in p.0.iter().zip(&self.dims) {
            if c >= d.len() {
                return Err(Error::OutOfBounds {
                    dim: d.name.clone(),
                    value: c as i64,
                    max: d.max_index(),
                });
            }
        }
        Ok(())
    }

    /// Maps a lattice point back to the raw hyperparameter values.
    pub fn to_raw(&self, p: &LatticePoint) -> Result<Vec<f64>> {
        self.check(p)?;
        Ok(p.0.iter().zip(&self.dims).map(|(&c, d)| d.values[c]).collect())
    }

    /// Maps raw values to their lattice indices.
    ///
    /// A raw value matches a member if it lies within `1e-9 * max(1, |v|)`.
    pub fn from_raw(&self, raw: &[f64]) -> Result<LatticePoint> {
        if raw.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: raw.len(),
            });
        }
        raw.iter()
            .zip(&self.dims)
            .map(|(&x, d)| {
                let tol = 1e-9 * x.abs().max(1.0);
                d.values
                    .iter()
                    .position(|&v| (v - x).abs() <= tol)
                    .ok_or_else(|| Error::UnknownValue {
                        dim: d.name.clone(),
                        value: x,
                    })
            })
            .collect::<Result<Vec<_>>>()
            .map(LatticePoint)
    }

    /// Draws a point uniformly from the lattice.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> LatticePoint {
        LatticePoint(
            self.dims
                .iter()
                .map(|d| rng.random_range(0..d.len()))
                .collect(),
        )
    }

    /// Folds out-of-range integer coordinates back inside the lattice by
    /// mirroring over the violated bound.
    ///
    /// At most two reflections are applied per coordinate; anything still
    /// outside (only possible on dimensions with one or two values) is
    /// clamped to the nearest bound.
    pub fn reflect_into_bounds(&self, coords: &[i64]) -> LatticePoint {
        assert_eq!(coords.len(), self.dim(), "coordinate vector has wrong length");
        LatticePoint(
            coords
                .iter()
                .zip(&self.dims)
                .map(|(&c, d)| reflect(c, d.max_index() as i64) as usize)
                .collect(),
        )
    }

    /// Row-major position of `p` in the enumeration order of [`Self::points`].
    pub fn linear_index(&self, p: &LatticePoint) -> u64 {
        p.0.iter()
            .zip(&self.dims)
            .fold(0u64, |acc, (&c, d)| acc * d.len() as u64 + c as u64)
    }

    /// Inverse of [`Self::linear_index`].
    pub fn point_at(&self, mut index: u64) -> LatticePoint {
        let mut coords = vec![0usize; self.dim()];
        for (slot, d) in coords.iter_mut().zip(&self.dims).rev() {
            let n = d.len() as u64;
            *slot = (index % n) as usize;
            index /= n;
        }
        LatticePoint(coords)
    }

    /// Every lattice point, last dimension varying fastest.
    pub fn points(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (0..self.cardinality).map(move |i| self.point_at(i))
    }
}

fn reflect(mut c: i64, hi: i64) -> i64 {
    for _ in 0..2 {
        if c < 0 {
            c = -c;
        } else if c > hi {
            c = hi - (c - hi);
        } else {
            return c;
        }
    }
    c.clamp(0, hi)
}
