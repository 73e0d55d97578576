//! Multi-index arithmetic and Hermitian multilevel Toeplitz matrices.
//!
//! A Hermitian d-level Toeplitz matrix of size `M = N_1 * ... * N_d` has the
//! value at `(row, col)` determined by the per-dimension index difference
//! `s = col - row` of the two multi-indices. Its free parameters are one real
//! center (shift zero) and one complex coefficient per canonical shift, i.e.
//! per nonzero shift whose first nonzero component is positive. The entry at a
//! negated shift is the conjugate of the canonical coefficient.
//!
//! Multi-indices are flattened with the last dimension varying fastest, which
//! is the Kronecker order used by the atoms in [`crate::model`].

use crate::{CMatrix, Error, Result, C64};

/// Grid sizes `N_1..N_d` of the frequency model.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DimSpec {
    dims: Vec<usize>,
}

impl DimSpec {
    /// Every size must be at least 2 and there must be at least one dimension.
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(Error::InvalidDims("at least one dimension is required".into()));
        }
        if let Some(n) = dims.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidDims(format!(
                "every dimension needs at least 2 samples, got {n} in {dims:?}"
            )));
        }
        dims.iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| Error::InvalidDims(format!("{dims:?} overflows")))?;
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of dimensions `d`.
    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Total number of samples `M`.
    pub fn size(&self) -> usize {
        self.dims.iter().product()
    }

    /// Flat position of a zero-based multi-index.
    pub fn flat_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dims.len());
        index
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&k, &n)| acc * n + k)
    }

    /// Zero-based multi-index of a flat position.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, &n) in out.iter_mut().zip(&self.dims).rev() {
            *slot = flat % n;
            flat /= n;
        }
        out
    }

    /// All zero-based multi-indices in flat order.
    pub fn multi_indices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.size()).map(|i| self.multi_index(i))
    }

    /// Number of distinct shift vectors, `prod(2 N_p - 1)`.
    pub fn shift_space(&self) -> usize {
        self.dims.iter().map(|&n| 2 * n - 1).product()
    }

    /// Number of canonical nonzero shifts, `(prod(2 N_p - 1) - 1) / 2`.
    pub fn num_canonical(&self) -> usize {
        (self.shift_space() - 1) / 2
    }

    // Mixed-radix id of a shift, first dimension most significant. Numeric
    // order equals lexicographic order, and id(-s) = shift_space - 1 - id(s).
    fn shift_id(&self, shift: &[i64]) -> usize {
        shift.iter().zip(&self.dims).fold(0, |acc, (&s, &n)| {
            acc * (2 * n - 1) + (s + n as i64 - 1) as usize
        })
    }

    fn shift_from_id(&self, mut id: usize) -> ShiftVector {
        let mut out = vec![0i64; self.dims.len()];
        for (slot, &n) in out.iter_mut().zip(&self.dims).rev() {
            let radix = 2 * n - 1;
            *slot = (id % radix) as i64 - (n as i64 - 1);
            id /= radix;
        }
        ShiftVector(out)
    }

    /// Position of a canonical shift in [`canonical_shifts`] order.
    pub fn canonical_index(&self, shift: &ShiftVector) -> Option<usize> {
        if shift.check(self).is_err() || !shift.is_canonical() {
            return None;
        }
        Some(self.shift_id(&shift.0) - self.num_canonical() - 1)
    }
}

/// Per-dimension index difference `col - row` between two multi-indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ShiftVector(Vec<i64>);

impl ShiftVector {
    pub fn new(components: impl Into<Vec<i64>>) -> Self {
        Self(components.into())
    }

    pub fn components(&self) -> &[i64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&s| s == 0)
    }

    /// True iff the first nonzero component is positive, or the shift is zero.
    pub fn is_canonical(&self) -> bool {
        self.0.iter().find(|&&s| s != 0).map_or(true, |&s| s > 0)
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|s| -s).collect())
    }

    /// Number of matrix positions carrying this shift, `prod(N_p - |s_p|)`.
    pub fn diagonal_len(&self, dims: &DimSpec) -> Result<usize> {
        self.check(dims)?;
        Ok(self
            .0
            .iter()
            .zip(dims.dims())
            .map(|(&s, &n)| n - s.unsigned_abs() as usize)
            .product())
    }

    fn check(&self, dims: &DimSpec) -> Result<()> {
        let ok = self.0.len() == dims.ndim()
            && self
                .0
                .iter()
                .zip(dims.dims())
                .all(|(&s, &n)| s.unsigned_abs() < n as u64);
        if ok {
            Ok(())
        } else {
            Err(Error::ShiftOutOfRange {
                shift: self.0.clone(),
                dims: dims.dims().to_vec(),
            })
        }
    }
}

/// All canonical nonzero shifts in lexicographic order.
pub fn canonical_shifts(dims: &DimSpec) -> Vec<ShiftVector> {
    let center = dims.num_canonical();
    (center + 1..dims.shift_space())
        .map(|id| dims.shift_from_id(id))
        .collect()
}

/// Matrix positions `(row, col)` whose multi-index difference equals a shift.
///
/// Rows are visited in flat order. `len()` is `prod(N_p - |s_p|)`.
#[derive(Debug, Clone)]
pub struct ShiftPositions {
    dims: DimSpec,
    shift: Vec<i64>,
    lo: Vec<usize>,
    hi: Vec<usize>,
    cursor: Option<Vec<usize>>,
    remaining: usize,
}

impl Iterator for ShiftPositions {
    type Item = (usize, usize);

    fn next(&mut self) -> Option<Self::Item> {
        let row = self.cursor.as_mut()?;
        let col: Vec<usize> = row
            .iter()
            .zip(&self.shift)
            .map(|(&k, &s)| (k as i64 + s) as usize)
            .collect();
        let item = (self.dims.flat_index(row), self.dims.flat_index(&col));

        // odometer over the valid row ranges, last dimension fastest
        let mut p = row.len();
        loop {
            if p == 0 {
                self.cursor = None;
                break;
            }
            p -= 1;
            if row[p] < self.hi[p] {
                row[p] += 1;
                break;
            }
            row[p] = self.lo[p];
        }
        self.remaining -= 1;
        Some(item)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl ExactSizeIterator for ShiftPositions {}

pub fn shift_positions(dims: &DimSpec, shift: &ShiftVector) -> Result<ShiftPositions> {
    let count = shift.diagonal_len(dims)?;
    let lo: Vec<usize> = shift.0.iter().map(|&s| (-s).max(0) as usize).collect();
    let hi: Vec<usize> = shift
        .0
        .iter()
        .zip(dims.dims())
        .map(|(&s, &n)| n - 1 - s.max(0) as usize)
        .collect();
    Ok(ShiftPositions {
        dims: dims.clone(),
        shift: shift.0.clone(),
        cursor: Some(lo.clone()),
        lo,
        hi,
        remaining: count,
    })
}

/// Free parameters of a Hermitian multilevel Toeplitz matrix.
///
/// `coeffs[i]` belongs to `canonical_shifts(dims)[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzParams {
    pub dims: DimSpec,
    pub center: f64,
    pub coeffs: Vec<C64>,
}

impl ToeplitzParams {
    pub fn new(dims: DimSpec, center: f64, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != dims.num_canonical() {
            return Err(Error::Shape(format!(
                "expected {} canonical coefficients for dims {:?}, got {}",
                dims.num_canonical(),
                dims.dims(),
                coeffs.len()
            )));
        }
        Ok(Self {
            dims,
            center,
            coeffs,
        })
    }

    pub fn zeros(dims: &DimSpec) -> Self {
        Self {
            dims: dims.clone(),
            center: 0.0,
            coeffs: vec![C64::new(0.0, 0.0); dims.num_canonical()],
        }
    }

    pub fn coeff(&self, shift: &ShiftVector) -> Option<C64> {
        self.dims.canonical_index(shift).map(|i| self.coeffs[i])
    }

    pub fn set_coeff(&mut self, shift: &ShiftVector, value: C64) -> Result<()> {
        let i = self
            .dims
            .canonical_index(shift)
            .ok_or_else(|| Error::InvalidArgument(format!("{shift:?} is not a canonical shift")))?;
        self.coeffs[i] = value;
        Ok(())
    }

    /// Number of free real parameters, `2 * #canonical + 1`.
    pub fn real_dim(&self) -> usize {
        2 * self.coeffs.len() + 1
    }

    /// `[center, re c_0, im c_0, re c_1, ...]`.
    pub fn to_real_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.real_dim());
        out.push(self.center);
        for c in &self.coeffs {
            out.push(c.re);
            out.push(c.im);
        }
        out
    }

    pub fn from_real_vec(dims: &DimSpec, values: &[f64]) -> Result<Self> {
        if values.len() != 2 * dims.num_canonical() + 1 {
            return Err(Error::Shape(format!(
                "expected {} real parameters, got {}",
                2 * dims.num_canonical() + 1,
                values.len()
            )));
        }
        let coeffs = values[1..]
            .chunks_exact(2)
            .map(|p| C64::new(p[0], p[1]))
            .collect();
        Self::new(dims.clone(), values[0], coeffs)
    }

    /// Euclidean norm over the complex parameters (center counted once).
    pub fn norm(&self) -> f64 {
        (self.center * self.center + self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }
}

/// Occurrence count of every free parameter inside the materialized matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccurrenceCounts {
    pub center: usize,
    pub shifts: Vec<usize>,
}

// Label of a matrix entry: which parameter it carries and whether conjugated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Center,
    Upper(u32),
    Lower(u32),
}

/// Precomputed entry-to-parameter map for one [`DimSpec`].
///
/// Building the map costs `O(M^2)`, so repeated constructions (the ADMM loop)
/// should share one layout.
#[derive(Debug, Clone)]
pub struct ToeplitzLayout {
    dims: DimSpec,
    slots: Vec<Slot>,
    counts: Vec<usize>,
}

impl ToeplitzLayout {
    pub fn new(dims: &DimSpec) -> Self {
        let m = dims.size();
        let center = dims.num_canonical();
        let indices: Vec<Vec<usize>> = dims.multi_indices().collect();
        let mut slots = Vec::with_capacity(m * m);
        let mut counts = vec![0usize; center];
        let mut shift = vec![0i64; dims.ndim()];
        for row in &indices {
            for col in &indices {
                for (s, (&k, &l)) in shift.iter_mut().zip(row.iter().zip(col)) {
                    *s = l as i64 - k as i64;
                }
                let id = dims.shift_id(&shift);
                let slot = match id.cmp(&center) {
                    std::cmp::Ordering::Equal => Slot::Center,
                    std::cmp::Ordering::Greater => Slot::Upper((id - center - 1) as u32),
                    std::cmp::Ordering::Less => {
                        let i = center - 1 - id;
                        counts[i] += 1;
                        Slot::Lower(i as u32)
                    }
                };
                slots.push(slot);
            }
        }
        Self {
            dims: dims.clone(),
            slots,
            counts,
        }
    }

    pub fn dims(&self) -> &DimSpec {
        &self.dims
    }

    pub fn build(&self, u: &ToeplitzParams) -> CMatrix {
        assert_eq!(u.dims, self.dims, "parameter dims do not match the layout");
        let m = self.dims.size();
        CMatrix::from_fn(m, m, |r, c| match self.slots[r * m + c] {
            Slot::Center => C64::new(u.center, 0.0),
            Slot::Upper(i) => u.coeffs[i as usize],
            Slot::Lower(i) => u.coeffs[i as usize].conj(),
        })
    }

    /// Adjoint of [`ToeplitzLayout::build`] on Hermitian matrices.
    ///
    /// The center collects `Re(Tr A)`; coefficient `i` collects the entries of
    /// `A` at the positions of the negated shift, which for Hermitian `A` is
    /// `<A, S_i>` with `S_i` the 0/1 pattern of the canonical shift.
    pub fn diag_sums(&self, a: &CMatrix) -> Result<ToeplitzParams> {
        let m = self.dims.size();
        if a.nrows() != m || a.ncols() != m {
            return Err(Error::Shape(format!(
                "expected a {m}x{m} matrix for dims {:?}, got {}x{}",
                self.dims.dims(),
                a.nrows(),
                a.ncols()
            )));
        }
        let mut out = ToeplitzParams::zeros(&self.dims);
        for r in 0..m {
            for c in 0..m {
                match self.slots[r * m + c] {
                    Slot::Center => out.center += a[(r, c)].re,
                    Slot::Lower(i) => out.coeffs[i as usize] += a[(r, c)],
                    Slot::Upper(_) => {}
                }
            }
        }
        Ok(out)
    }

    pub fn occurrence_counts(&self) -> OccurrenceCounts {
        OccurrenceCounts {
            center: self.dims.size(),
            shifts: self.counts.clone(),
        }
    }
}

/// Materialize the Hermitian multilevel Toeplitz matrix of `u`.
pub fn build_toeplitz(u: &ToeplitzParams) -> CMatrix {
    ToeplitzLayout::new(&u.dims).build(u)
}

/// Sum a Hermitian matrix along every multilevel shifted diagonal.
pub fn diag_sums(a: &CMatrix, dims: &DimSpec) -> Result<ToeplitzParams> {
    ToeplitzLayout::new(dims).diag_sums(a)
}

pub fn occurrence_counts(dims: &DimSpec) -> OccurrenceCounts {
    OccurrenceCounts {
        center: dims.size(),
        shifts: canonical_shifts(dims)
            .iter()
            .map(|s| s.diagonal_len(dims).expect("canonical shifts are in range"))
            .collect(),
    }
}
