//! Beam-by-subcarrier grids and element masks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("expected {expected} values for a {beams}x{subcarriers} grid, got {found}")]
    Length {
        beams: usize,
        subcarriers: usize,
        expected: usize,
        found: usize,
    },
    #[error("grid dimensions must be non-zero")]
    Empty,
    #[error("non-finite value at beam {beam}, subcarrier {subcarrier}")]
    NonFinite { beam: usize, subcarrier: usize },
}

/// Converts a dB value to a linear power ratio.
#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    (db * (std::f64::consts::LN_10 / 10.0)).exp()
}

/// Converts a linear power ratio to dB.
#[inline]
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Grid of per-(beam, subcarrier) SNR values in dB, stored row-major by beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSnrMatrix {
    beams: usize,
    subcarriers: usize,
    values: Vec<f64>,
}

impl BeamSnrMatrix {
    pub fn new(beams: usize, subcarriers: usize, values: Vec<f64>) -> Result<Self, MatrixError> {
        if beams == 0 || subcarriers == 0 {
            return Err(MatrixError::Empty);
        }
        if values.len() != beams * subcarriers {
            return Err(MatrixError::Length {
                beams,
                subcarriers,
                expected: beams * subcarriers,
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MatrixError::NonFinite {
                beam: i / subcarriers,
                subcarrier: i % subcarriers,
            });
        }
        Ok(Self {
            beams,
            subcarriers,
            values,
        })
    }

    /// A grid with every element set to `db`.
    pub fn filled(beams: usize, subcarriers: usize, db: f64) -> Self {
        assert!(beams > 0 && subcarriers > 0 && db.is_finite());
        Self {
            beams,
            subcarriers,
            values: vec![db; beams * subcarriers],
        }
    }

    /// Builds a grid by evaluating `f(beam, subcarrier)`.
    pub fn from_fn(beams: usize, subcarriers: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(beams * subcarriers);
        for b in 0..beams {
            for k in 0..subcarriers {
                values.push(f(b, k));
            }
        }
        Self::new(beams, subcarriers, values).expect("from_fn produced an invalid grid")
    }

    pub fn beams(&self) -> usize {
        self.beams
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.beams, self.subcarriers)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, beam: usize, subcarrier: usize) -> f64 {
        self.values[beam * self.subcarriers + subcarrier]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, beam: usize) -> &[f64] {
        &self.values[beam * self.subcarriers..(beam + 1) * self.subcarriers]
    }

    pub fn row_mean(&self, beam: usize) -> f64 {
        self.row(beam).iter().sum::<f64>() / self.subcarriers as f64
    }

    pub fn column_mean(&self, subcarrier: usize) -> f64 {
        (0..self.beams).map(|b| self.get(b, subcarrier)).sum::<f64>() / self.beams as f64
    }

    /// Beam with the highest mean SNR; ties resolve to the lowest index.
    pub fn dominant_beam(&self) -> usize {
        let mut best = 0;
        let mut best_mean = f64::NEG_INFINITY;
        for b in 0..self.beams {
            let m = self.row_mean(b);
            if m > best_mean {
                best = b;
                best_mean = m;
            }
        }
        best
    }

    /// Element-wise `self - other`. Panics on shape mismatch; callers check shapes first.
    pub fn minus(&self, other: &BeamSnrMatrix) -> BeamSnrMatrix {
        assert_eq!(self.shape(), other.shape());
        BeamSnrMatrix {
            beams: self.beams,
            subcarriers: self.subcarriers,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Multiplies every element by `factor`.
    pub fn scaled(&self, factor: f64) -> BeamSnrMatrix {
        BeamSnrMatrix {
            beams: self.beams,
            subcarriers: self.subcarriers,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// One (beam, subcarrier) coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Element {
    pub beam: usize,
    pub subcarrier: usize,
}

impl Element {
    pub fn new(beam: usize, subcarrier: usize) -> Self {
        Self { beam, subcarrier }
    }
}

/// Sorted, duplicate-free set of grid elements.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementMask {
    elements: Vec<Element>,
}

impl ElementMask {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_elements(elements: impl IntoIterator<Item = Element>) -> Self {
        let mut elements: Vec<Element> = elements.into_iter().collect();
        elements.sort_unstable();
        elements.dedup();
        Self { elements }
    }

    /// Full rows for each listed beam.
    pub fn rows(beams: &[usize], subcarriers: usize) -> Self {
        Self::from_elements(
            beams
                .iter()
                .flat_map(|&b| (0..subcarriers).map(move |k| Element::new(b, k))),
        )
    }

    /// Subcarrier columns `[start, end)` across all beams, for each listed range.
    pub fn bands(ranges: &[(usize, usize)], beams: usize) -> Self {
        Self::from_elements(ranges.iter().flat_map(|&(start, end)| {
            (0..beams).flat_map(move |b| (start..end).map(move |k| Element::new(b, k)))
        }))
    }

    /// Every element of a `beams x subcarriers` grid.
    pub fn full(beams: usize, subcarriers: usize) -> Self {
        Self::from_elements(
            (0..beams).flat_map(|b| (0..subcarriers).map(move |k| Element::new(b, k))),
        )
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, e: Element) -> bool {
        self.elements.binary_search(&e).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = Element> + '_ {
        self.elements.iter().copied()
    }

    /// True when every element lies inside a `beams x subcarriers` grid.
    pub fn fits(&self, beams: usize, subcarriers: usize) -> bool {
        self.elements
            .iter()
            .all(|e| e.beam < beams && e.subcarrier < subcarriers)
    }

    /// Row-major flat indices for a grid with `subcarriers` columns.
    pub fn flat_indices(&self, subcarriers: usize) -> Vec<usize> {
        self.elements
            .iter()
            .map(|e| e.beam * subcarriers + e.subcarrier)
            .collect()
    }

    pub fn intersection_len(&self, other: &ElementMask) -> usize {
        self.elements.iter().filter(|e| other.contains(**e)).count()
    }

    /// Distinct beams touched by the mask, ascending.
    pub fn beams(&self) -> Vec<usize> {
        let mut beams: Vec<usize> = self.elements.iter().map(|e| e.beam).collect();
        beams.dedup();
        beams
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert_eq!(BeamSnrMatrix::new(0, 4, vec![]), Err(MatrixError::Empty));
        assert!(matches!(
            BeamSnrMatrix::new(2, 2, vec![1.0; 3]),
            Err(MatrixError::Length { found: 3, .. })
        ));
        assert_eq!(
            BeamSnrMatrix::new(2, 2, vec![1.0, 1.0, f64::NAN, 1.0]),
            Err(MatrixError::NonFinite {
                beam: 1,
                subcarrier: 0
            })
        );
    }

    #[test]
    fn dominant_beam_prefers_lowest_index_on_tie() {
        let m = BeamSnrMatrix::from_fn(3, 2, |b, _| if b == 0 { 5.0 } else { 7.0 });
        assert_eq!(m.dominant_beam(), 1);
    }

    #[test]
    fn mask_constructors_count_elements() {
        assert_eq!(ElementMask::rows(&[2, 3, 4], 100).len(), 300);
        assert_eq!(ElementMask::bands(&[(20, 32), (60, 72)], 8).len(), 192);
        assert_eq!(ElementMask::rows(&[1, 1], 10).len(), 10);
        assert!(ElementMask::rows(&[8], 100).fits(9, 100));
        assert!(!ElementMask::rows(&[8], 100).fits(8, 100));
    }
}
