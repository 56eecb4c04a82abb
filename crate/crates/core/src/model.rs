//! The sample data model: periodic cell, atom positions, per-atom element
//! rows, ghost atoms for density control, and property sets.
//!
//! Element rows live in one real-valued matrix whether they are clean one-hots
//! or noised intermediates; the `decoded` flag tells which. The ghost class
//! always occupies the last column, so vocabularies can grow without
//! renumbering it.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{wrap_into_cell, Cell, Vec3};
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Symbol used to serialize ghost atoms.
pub const GHOST_SYMBOL: &str = "Gh";

/// Ordered element symbols, with the ghost class appended last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementVocabulary {
    symbols: Vec<String>,
}

impl ElementVocabulary {
    /// Build a vocabulary from the real species; the ghost class is appended
    /// automatically. Symbols must be unique and must not include the ghost.
    pub fn new<S: AsRef<str>>(real_symbols: &[S]) -> Result<Self> {
        let mut symbols: Vec<String> = Vec::with_capacity(real_symbols.len() + 1);
        for s in real_symbols {
            let s = s.as_ref().to_string();
            if s == GHOST_SYMBOL || symbols.contains(&s) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate or reserved element symbol {s:?}"
                )));
            }
            symbols.push(s);
        }
        symbols.push(GHOST_SYMBOL.to_string());
        Ok(ElementVocabulary { symbols })
    }

    /// Total class count, ghost included.
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn ghost_index(&self) -> usize {
        self.symbols.len() - 1
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, class: usize) -> &str {
        &self.symbols[class]
    }

    pub fn index_of(&self, symbol: &str) -> Result<usize> {
        self.symbols
            .iter()
            .position(|s| s == symbol)
            .ok_or_else(|| Error::UnknownSymbol(symbol.to_string()))
    }
}

/// One material sample: cell, positions and element rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialSample {
    pub cell: Cell,
    pub positions: Vec<Vec3>,
    /// `n_atoms x n_classes`; one-hot rows when `decoded`.
    pub elements: Tensor,
    pub decoded: bool,
}

impl MaterialSample {
    pub fn new(cell: Cell, positions: Vec<Vec3>, elements: Tensor, decoded: bool) -> Result<Self> {
        if positions.len() != elements.rows() {
            return Err(Error::ShapeMismatch {
                op: "MaterialSample::new",
                lhs: format!("{} positions", positions.len()),
                rhs: format!("{} element rows", elements.rows()),
            });
        }
        Ok(MaterialSample {
            cell,
            positions,
            elements,
            decoded,
        })
    }

    /// Decoded sample from per-atom class indices.
    pub fn from_classes(
        cell: Cell,
        positions: Vec<Vec3>,
        classes: &[usize],
        n_classes: usize,
    ) -> Result<Self> {
        if positions.len() != classes.len() {
            return Err(Error::ShapeMismatch {
                op: "MaterialSample::from_classes",
                lhs: format!("{} positions", positions.len()),
                rhs: format!("{} classes", classes.len()),
            });
        }
        let mut elements = Tensor::zeros(classes.len(), n_classes);
        for (r, &c) in classes.iter().enumerate() {
            elements.set(r, c, 1.0);
        }
        Ok(MaterialSample {
            cell,
            positions,
            elements,
            decoded: true,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.positions.len()
    }

    pub fn n_classes(&self) -> usize {
        self.elements.cols()
    }

    /// Class index of each atom. Only meaningful for decoded samples.
    pub fn classes(&self) -> Vec<usize> {
        (0..self.n_atoms()).map(|r| argmax(self.elements.row(r))).collect()
    }

    pub fn require_decoded(&self, op: &'static str) -> Result<()> {
        if self.decoded {
            Ok(())
        } else {
            Err(Error::NotDecoded { op })
        }
    }

    /// Number of ghost-class atoms (decoded samples).
    pub fn ghost_count(&self) -> usize {
        let ghost = self.n_classes() - 1;
        self.classes().iter().filter(|&&c| c == ghost).count()
    }

    /// Decode element rows in place (argmax per row) and mark the sample
    /// decoded.
    pub fn decode(mut self) -> Self {
        self.elements = decode_elements(&self.elements);
        self.decoded = true;
        self
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (idx, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = idx;
        }
    }
    best
}

/// One-hot of the per-row argmax; ties resolve to the lowest index.
pub fn decode_elements(elements: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(elements.rows(), elements.cols());
    for r in 0..elements.rows() {
        out.set(r, argmax(elements.row(r)), 1.0);
    }
    out
}

/// Fill a decoded sample with uniformly placed ghost atoms until the total
/// atom count reaches `floor(rho_max * volume)`.
pub fn inject_ghost_atoms(
    sample: &MaterialSample,
    rho_max: f64,
    rng: &mut ChaCha8Rng,
) -> Result<MaterialSample> {
    sample.require_decoded("inject_ghost_atoms")?;
    let quota = (rho_max * sample.cell.volume()).floor() as usize;
    if quota < sample.n_atoms() {
        return Err(Error::QuotaBelowCount {
            quota,
            existing: sample.n_atoms(),
        });
    }
    let mut positions = sample.positions.clone();
    let ghost = sample.n_classes() - 1;
    let mut rows: Vec<Vec<f64>> = (0..sample.n_atoms())
        .map(|r| sample.elements.row(r).to_vec())
        .collect();
    for _ in sample.n_atoms()..quota {
        let f = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
        positions.push(wrap_into_cell(&sample.cell, sample.cell.to_cartesian(f)));
        let mut row = vec![0.0; sample.n_classes()];
        row[ghost] = 1.0;
        rows.push(row);
    }
    MaterialSample::new(
        sample.cell.clone(),
        positions,
        Tensor::from_rows(&rows)?,
        true,
    )
}

/// Remove all ghost-class atoms, preserving the order of the rest.
pub fn strip_ghost_atoms(sample: &MaterialSample) -> Result<MaterialSample> {
    sample.require_decoded("strip_ghost_atoms")?;
    let ghost = sample.n_classes() - 1;
    let keep: Vec<usize> = sample
        .classes()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != ghost)
        .map(|(r, _)| r)
        .collect();
    let positions = keep.iter().map(|&r| sample.positions[r]).collect();
    let rows: Vec<Vec<f64>> = keep.iter().map(|&r| sample.elements.row(r).to_vec()).collect();
    let elements = if rows.is_empty() {
        Tensor::zeros(0, sample.n_classes())
    } else {
        Tensor::from_rows(&rows)?
    };
    MaterialSample::new(sample.cell.clone(), positions, elements, true)
}

/// Property values with a per-property availability mask. Unavailable slots
/// are embedded as freshly drawn null vectors by the denoiser, which makes
/// generation unconditional in those properties.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertySet {
    values: Vec<f64>,
    available: Vec<bool>,
}

impl PropertySet {
    pub fn new(values: Vec<f64>, available: Vec<bool>) -> Result<Self> {
        if values.len() != available.len() {
            return Err(Error::ShapeMismatch {
                op: "PropertySet::new",
                lhs: format!("{} values", values.len()),
                rhs: format!("{} flags", available.len()),
            });
        }
        for (i, (&v, &a)) in values.iter().zip(&available).enumerate() {
            if a && !v.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("property {i}"),
                });
            }
        }
        Ok(PropertySet { values, available })
    }

    pub fn all_available(values: Vec<f64>) -> Result<Self> {
        let available = vec![true; values.len()];
        PropertySet::new(values, available)
    }

    pub fn none(n: usize) -> Self {
        PropertySet {
            values: vec![0.0; n],
            available: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `Some(value)` when the property is available.
    pub fn get(&self, i: usize) -> Option<f64> {
        if self.available[i] {
            Some(self.values[i])
        } else {
            None
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn available(&self) -> &[bool] {
        &self.available
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_chacha::rand_core::SeedableRng;

    fn vocab() -> ElementVocabulary {
        ElementVocabulary::new(&["A", "B"]).unwrap()
    }

    fn sample_with(n_real: usize, edge: f64) -> MaterialSample {
        let cell = Cell::cubic(edge).unwrap();
        let positions: Vec<Vec3> = (0..n_real)
            .map(|i| [0.13 * i as f64 % edge, 0.29 * i as f64 % edge, 0.4])
            .collect();
        let classes: Vec<usize> = (0..n_real).map(|i| i % 2).collect();
        MaterialSample::from_classes(cell, positions, &classes, vocab().len()).unwrap()
    }

    #[test]
    fn vocabulary_places_ghost_last() {
        let v = vocab();
        assert_eq!(v.len(), 3);
        assert_eq!(v.ghost_index(), 2);
        assert_eq!(v.symbol(2), GHOST_SYMBOL);
        assert!(ElementVocabulary::new(&["A", "A"]).is_err());
        assert!(ElementVocabulary::new(&["Gh"]).is_err());
    }

    #[test]
    fn ghost_quota_at_paper_density() {
        // edge 18, rho 0.11 -> floor(0.11 * 5832) = 641 total atoms
        let sample = sample_with(541, 18.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let filled = inject_ghost_atoms(&sample, 0.11, &mut rng).unwrap();
        assert_eq!(filled.n_atoms(), 641);
        assert_eq!(filled.ghost_count(), 100);
        let stripped = strip_ghost_atoms(&filled).unwrap();
        assert_eq!(stripped.n_atoms(), 541);
    }

    #[test]
    fn quota_already_met_adds_nothing() {
        let sample = sample_with(10, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let filled = inject_ghost_atoms(&sample, 0.01, &mut rng).unwrap();
        assert_eq!(filled.n_atoms(), 10);
        assert_eq!(filled.ghost_count(), 0);
    }

    #[test]
    fn empty_sample_fills_with_ghosts() {
        let cell = Cell::cubic(10.0).unwrap();
        let sample =
            MaterialSample::new(cell, Vec::new(), Tensor::zeros(0, 3), true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let filled = inject_ghost_atoms(&sample, 0.01, &mut rng).unwrap();
        assert_eq!(filled.n_atoms(), 10);
        assert_eq!(filled.ghost_count(), 10);
    }

    #[test]
    fn quota_below_existing_errors() {
        let sample = sample_with(20, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(inject_ghost_atoms(&sample, 0.01, &mut rng).is_err());
    }

    #[test]
    fn strip_on_all_ghosts_gives_empty() {
        let cell = Cell::cubic(10.0).unwrap();
        let sample = MaterialSample::from_classes(
            cell,
            vec![[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]],
            &[2, 2],
            3,
        )
        .unwrap();
        let stripped = strip_ghost_atoms(&sample).unwrap();
        assert_eq!(stripped.n_atoms(), 0);
    }

    #[test]
    fn decode_examples() {
        let m = Tensor::from_vec(1, 3, vec![0.2, 0.9, -0.1]).unwrap();
        assert_eq!(decode_elements(&m).row(0), &[0.0, 1.0, 0.0]);
        let tie = Tensor::from_vec(1, 3, vec![0.5, 0.5, 0.5]).unwrap();
        assert_eq!(decode_elements(&tie).row(0), &[1.0, 0.0, 0.0]);
        let onehot = Tensor::from_vec(1, 3, vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(decode_elements(&onehot), onehot);
    }

    #[test]
    fn property_masks() {
        let p = PropertySet::new(vec![1.0, 2.0], vec![true, false]).unwrap();
        assert_eq!(p.get(0), Some(1.0));
        assert_eq!(p.get(1), None);
        assert!(PropertySet::new(vec![f64::NAN], vec![true]).is_err());
        // non-finite is fine while masked out
        assert!(PropertySet::new(vec![f64::NAN], vec![false]).is_ok());
    }

    proptest! {
        #[test]
        fn inject_then_strip_is_identity(n_real in 0usize..30, seed in 0u64..50) {
            let sample = sample_with(n_real, 12.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = 0.02 + 0.00001 * seed as f64;
            prop_assume!((rho * sample.cell.volume()).floor() as usize >= n_real);
            let filled = inject_ghost_atoms(&sample, rho, &mut rng).unwrap();
            let quota = (rho * sample.cell.volume()).floor() as usize;
            prop_assert_eq!(filled.n_atoms(), quota);
            prop_assert_eq!(filled.ghost_count(), quota - n_real);
            let stripped = strip_ghost_atoms(&filled).unwrap();
            prop_assert_eq!(stripped, sample);
        }

        #[test]
        fn decode_is_idempotent(vals in proptest::collection::vec(-5.0..5.0f64, 12)) {
            let m = Tensor::from_vec(4, 3, vals).unwrap();
            let once = decode_elements(&m);
            prop_assert_eq!(decode_elements(&once), once.clone());
            for r in 0..once.rows() {
                let s: f64 = once.row(r).iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-15);
            }
        }
    }
}
