use crate::{Error, Result};

/// Dense class identifier. Classes are numbered `0..k`.
pub type ClassId = u8;

/// Largest supported number of classes; `u8::MAX` is reserved for missing cells.
pub const MAX_CLASSES: usize = u8::MAX as usize;

const MISSING: u8 = u8::MAX;

/// An `s × n` grid of categorical labels: one row per source, one column per
/// instance. Cells may be missing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpinionMatrix {
    sources: usize,
    instances: usize,
    classes: usize,
    // row-major, MISSING sentinel
    cells: Vec<u8>,
}

impl OpinionMatrix {
    /// Builds a matrix from row-major cells (`cells[i * instances + j]` is the
    /// label source `i` gave instance `j`).
    pub fn new(
        sources: usize,
        instances: usize,
        classes: usize,
        cells: Vec<Option<ClassId>>,
    ) -> Result<Self> {
        check_shape(sources, instances, classes)?;
        if cells.len() != sources * instances {
            return Err(Error::invalid(format!(
                "expected {} cells for a {sources}x{instances} matrix, got {}",
                sources * instances,
                cells.len()
            )));
        }
        let mut raw = Vec::with_capacity(cells.len());
        for (idx, cell) in cells.into_iter().enumerate() {
            raw.push(encode(cell, classes, idx / instances, idx % instances)?);
        }
        Ok(Self { sources, instances, classes, cells: raw })
    }

    /// Builds a matrix from one vector per source.
    pub fn from_rows(classes: usize, rows: &[Vec<Option<ClassId>>]) -> Result<Self> {
        let sources = rows.len();
        let instances = rows.first().map_or(0, Vec::len);
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != instances) {
            return Err(Error::invalid(format!(
                "row {i} has {} cells, expected {instances}",
                row.len()
            )));
        }
        Self::new(sources, instances, classes, rows.concat())
    }

    /// Builds a matrix by evaluating `f(source, instance)` for every cell.
    pub fn from_fn(
        sources: usize,
        instances: usize,
        classes: usize,
        mut f: impl FnMut(usize, usize) -> Option<ClassId>,
    ) -> Result<Self> {
        check_shape(sources, instances, classes)?;
        let mut cells = Vec::with_capacity(sources * instances);
        for i in 0..sources {
            for j in 0..instances {
                cells.push(encode(f(i, j), classes, i, j)?);
            }
        }
        Ok(Self { sources, instances, classes, cells })
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    pub fn instances(&self) -> usize {
        self.instances
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Label given by `source` to `instance`, or `None` when missing.
    ///
    /// Panics if either index is out of bounds.
    #[inline]
    pub fn get(&self, source: usize, instance: usize) -> Option<ClassId> {
        assert!(source < self.sources && instance < self.instances);
        decode(self.cells[source * self.instances + instance])
    }

    /// Iterates over the labels of one source.
    pub fn row(&self, source: usize) -> impl Iterator<Item = Option<ClassId>> + '_ {
        self.raw_row(source).iter().map(|&c| decode(c))
    }

    /// Iterates over the labels all sources gave one instance.
    pub fn column(&self, instance: usize) -> impl Iterator<Item = Option<ClassId>> + '_ {
        assert!(instance < self.instances);
        (0..self.sources).map(move |i| decode(self.cells[i * self.instances + instance]))
    }

    /// Number of non-missing labels provided by `source`.
    pub fn labeled_count(&self, source: usize) -> usize {
        self.raw_row(source).iter().filter(|&&c| c != MISSING).count()
    }

    pub fn missing_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == MISSING).count()
    }

    /// Returns a copy whose row `i` is row `order[i]` of `self`.
    pub fn reorder_sources(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.sources];
        if order.len() != self.sources
            || order.iter().any(|&i| i >= self.sources || std::mem::replace(&mut seen[i], true))
        {
            return Err(Error::invalid("source order must be a permutation"));
        }
        let mut cells = Vec::with_capacity(self.cells.len());
        for &i in order {
            cells.extend_from_slice(self.raw_row(i));
        }
        Ok(Self { cells, ..*self })
    }

    /// Returns a copy with one cell overwritten.
    pub fn with_cell(&self, source: usize, instance: usize, value: Option<ClassId>) -> Result<Self> {
        if source >= self.sources || instance >= self.instances {
            return Err(Error::invalid(format!("cell ({source}, {instance}) out of bounds")));
        }
        let mut out = self.clone();
        out.cells[source * self.instances + instance] =
            encode(value, self.classes, source, instance)?;
        Ok(out)
    }

    pub(crate) fn raw_row(&self, source: usize) -> &[u8] {
        &self.cells[source * self.instances..(source + 1) * self.instances]
    }
}

fn check_shape(sources: usize, instances: usize, classes: usize) -> Result<()> {
    if sources == 0 || instances == 0 {
        return Err(Error::invalid(format!(
            "opinion matrix needs at least one source and one instance, got {sources}x{instances}"
        )));
    }
    if !(2..=MAX_CLASSES).contains(&classes) {
        return Err(Error::invalid(format!(
            "number of classes must be in 2..={MAX_CLASSES}, got {classes}"
        )));
    }
    Ok(())
}

#[inline]
fn encode(cell: Option<ClassId>, classes: usize, i: usize, j: usize) -> Result<u8> {
    match cell {
        None => Ok(MISSING),
        Some(c) if (c as usize) < classes => Ok(c),
        Some(c) => Err(Error::invalid(format!(
            "cell ({i}, {j}) holds class {c}, but only {classes} classes exist"
        ))),
    }
}

#[inline]
fn decode(raw: u8) -> Option<ClassId> {
    (raw != MISSING).then_some(raw)
}

/// One-vs-rest view of an [`OpinionMatrix`] for a single class.
///
/// Stored as two bitsets per source: `present` marks non-missing cells and
/// `ones` marks cells whose label equals the class. Bits past the last
/// instance are always zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMembershipMatrix {
    sources: usize,
    instances: usize,
    class_id: ClassId,
    words: usize,
    present: Vec<u64>,
    ones: Vec<u64>,
}

impl BinaryMembershipMatrix {
    pub fn from_opinions(opinions: &OpinionMatrix, class_id: ClassId) -> Result<Self> {
        if class_id as usize >= opinions.classes {
            return Err(Error::invalid(format!(
                "class {class_id} out of range for {} classes",
                opinions.classes
            )));
        }
        let (s, n) = (opinions.sources, opinions.instances);
        let words = n.div_ceil(64);
        let mut present = vec![0u64; s * words];
        let mut ones = vec![0u64; s * words];
        for i in 0..s {
            let row = opinions.raw_row(i);
            for (w, chunk) in row.chunks(64).enumerate() {
                let (mut p, mut o) = (0u64, 0u64);
                for (b, &c) in chunk.iter().enumerate() {
                    p |= u64::from(c != MISSING) << b;
                    o |= u64::from(c == class_id) << b;
                }
                present[i * words + w] = p;
                ones[i * words + w] = o;
            }
        }
        Ok(Self { sources: s, instances: n, class_id, words, present, ones })
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    pub fn instances(&self) -> usize {
        self.instances
    }

    pub fn class_id(&self) -> ClassId {
        self.class_id
    }

    /// `Some(true)` if the source voted for the class, `Some(false)` if it
    /// voted for another class, `None` if the cell is missing.
    pub fn get(&self, source: usize, instance: usize) -> Option<bool> {
        assert!(source < self.sources && instance < self.instances);
        let idx = source * self.words + instance / 64;
        let bit = 1u64 << (instance % 64);
        (self.present[idx] & bit != 0).then(|| self.ones[idx] & bit != 0)
    }

    pub(crate) fn words_per_row(&self) -> usize {
        self.words
    }

    pub(crate) fn present_row(&self, source: usize) -> &[u64] {
        &self.present[source * self.words..(source + 1) * self.words]
    }

    pub(crate) fn ones_row(&self, source: usize) -> &[u64] {
        &self.ones[source * self.words..(source + 1) * self.words]
    }
}
