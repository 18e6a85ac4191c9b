//! Dense third-order tensors, mode-n unfoldings and Khatri-Rao kernels.
//!
//! A mode-n unfolding is the `J_n x I_n` matrix whose row `j` is the mode-n
//! fiber with the remaining two indices `(p, q)` (in increasing mode order)
//! encoded as `j = i_p + I_p * i_q`. The same row order is used for every
//! matrix built from the factors (see [`crate::model::build_h`]) so that
//! `X_(n) = H_n A_n^T` holds row for row.

use std::fmt;

use ndarray::{Array2, ArrayView2};

use crate::error::{MidasError, Result};

/// One of the three tensor modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    One,
    Two,
    Three,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::One, Mode::Two, Mode::Three];

    /// 0-based position of the mode.
    pub fn index(self) -> usize {
        match self {
            Mode::One => 0,
            Mode::Two => 1,
            Mode::Three => 2,
        }
    }

    pub fn from_index(index: usize) -> Result<Mode> {
        Mode::ALL
            .get(index)
            .copied()
            .ok_or(MidasError::InvalidMode(index + 1))
    }

    /// Mode from its 1-based number as used in the math notation.
    pub fn from_number(number: usize) -> Result<Mode> {
        match number {
            1 => Ok(Mode::One),
            2 => Ok(Mode::Two),
            3 => Ok(Mode::Three),
            n => Err(MidasError::InvalidMode(n)),
        }
    }

    pub fn number(self) -> usize {
        self.index() + 1
    }

    /// The two other modes, lower one first. The lower one varies fastest
    /// along the unfolding rows.
    pub fn others(self) -> (Mode, Mode) {
        match self {
            Mode::One => (Mode::Two, Mode::Three),
            Mode::Two => (Mode::One, Mode::Three),
            Mode::Three => (Mode::One, Mode::Two),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Dense `I1 x I2 x I3` tensor of `f64`, column-major (first index fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl DenseTensor3 {
    /// Wraps column-major data. Rejects zero dimensions, a length mismatch and
    /// non-finite entries.
    pub fn new(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        check_dims(dims)?;
        let len = dims.iter().product::<usize>();
        if data.len() != len {
            return Err(MidasError::Shape(format!(
                "tensor {:?} needs {} entries, got {}",
                dims,
                len,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(MidasError::NonFinite(format!(
                "tensor entry at linear index {pos}"
            )));
        }
        Ok(DenseTensor3 { dims, data })
    }

    /// Skips the finiteness check; used for model reconstructions, which
    /// may legitimately carry non-finite values from a diverged iterate.
    pub(crate) fn from_parts_unchecked(dims: [usize; 3], data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dims.iter().product::<usize>());
        DenseTensor3 { dims, data }
    }

    pub fn zeros(dims: [usize; 3]) -> Result<Self> {
        check_dims(dims)?;
        Ok(DenseTensor3 {
            dims,
            data: vec![0.0; dims.iter().product()],
        })
    }

    /// Builds a tensor from `f(i1, i2, i3)`, 0-based.
    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        check_dims(dims)?;
        let mut data = Vec::with_capacity(dims.iter().product());
        for i3 in 0..dims[2] {
            for i2 in 0..dims[1] {
                for i1 in 0..dims[0] {
                    data.push(f(i1, i2, i3));
                }
            }
        }
        DenseTensor3::new(dims, data)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn dim(&self, mode: Mode) -> usize {
        self.dims[mode.index()]
    }

    /// Total number of entries, `I1 * I2 * I3`.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn linear_index(&self, i1: usize, i2: usize, i3: usize) -> usize {
        i1 + self.dims[0] * (i2 + self.dims[1] * i3)
    }

    #[inline]
    pub fn get(&self, i1: usize, i2: usize, i3: usize) -> f64 {
        self.data[self.linear_index(i1, i2, i3)]
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `||self - other||_F^2`.
    pub fn distance_sq(&self, other: &DenseTensor3) -> Result<f64> {
        self.check_same_dims(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }

    pub fn check_same_dims(&self, other: &DenseTensor3) -> Result<()> {
        if self.dims != other.dims {
            return Err(MidasError::Shape(format!(
                "tensor dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    /// Number of mode-n fibers, `J_n = prod_{m != n} I_m`.
    pub fn fiber_count(&self, mode: Mode) -> usize {
        fiber_count(self.dims, mode)
    }

    /// Stride between consecutive entries of a mode-n fiber.
    fn mode_stride(&self, mode: Mode) -> usize {
        match mode {
            Mode::One => 1,
            Mode::Two => self.dims[0],
            Mode::Three => self.dims[0] * self.dims[1],
        }
    }

    /// Linear offset of the first entry of mode-n fiber `j`.
    fn fiber_base(&self, mode: Mode, j: usize) -> usize {
        let (p, q) = mode.others();
        let ip = j % self.dims[p.index()];
        let iq = j / self.dims[p.index()];
        ip * self.mode_stride(p) + iq * self.mode_stride(q)
    }

    fn copy_fiber(&self, mode: Mode, j: usize, out: &mut [f64]) {
        let base = self.fiber_base(mode, j);
        let stride = self.mode_stride(mode);
        if stride == 1 {
            out.copy_from_slice(&self.data[base..base + out.len()]);
        } else {
            for (i, o) in out.iter_mut().enumerate() {
                *o = self.data[base + i * stride];
            }
        }
    }
}

fn check_dims(dims: [usize; 3]) -> Result<()> {
    if dims.contains(&0) {
        return Err(MidasError::Shape(format!(
            "tensor dims must be positive, got {dims:?}"
        )));
    }
    Ok(())
}

/// `J_n` for the given dimension triple.
pub fn fiber_count(dims: [usize; 3], mode: Mode) -> usize {
    let (p, q) = mode.others();
    dims[p.index()] * dims[q.index()]
}

/// Splits fiber index `j` of `mode` into the full `(i1, i2, i3)` triple with
/// the mode-n index set to `i_n`.
pub fn fiber_coords(dims: [usize; 3], mode: Mode, j: usize, i_n: usize) -> [usize; 3] {
    let (p, q) = mode.others();
    let mut idx = [0; 3];
    idx[p.index()] = j % dims[p.index()];
    idx[q.index()] = j / dims[p.index()];
    idx[mode.index()] = i_n;
    idx
}

/// Mode-n unfolding, `J_n x I_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldedMatrix {
    pub mode: Mode,
    pub matrix: Array2<f64>,
}

impl UnfoldedMatrix {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }
}

/// A set of distinct mode-n fiber indices (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiberBatch {
    mode: Mode,
    indices: Vec<usize>,
}

impl FiberBatch {
    /// Validates that indices are non-empty, distinct and below `fibers`.
    pub fn new(mode: Mode, indices: Vec<usize>, fibers: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(MidasError::InvalidBatch("empty batch".into()));
        }
        let mut seen = vec![false; fibers];
        for &j in &indices {
            if j >= fibers {
                return Err(MidasError::FiberOutOfRange {
                    mode,
                    index: j,
                    limit: fibers,
                });
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(MidasError::InvalidBatch(format!("duplicate fiber {j}")));
            }
        }
        Ok(FiberBatch { mode, indices })
    }

    /// All fibers of the mode in order.
    pub fn full(mode: Mode, fibers: usize) -> Self {
        FiberBatch {
            mode,
            indices: (0..fibers).collect(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Mode-n unfolding with entry `(j, i_n) = X(i1, i2, i3)`.
pub fn unfold(t: &DenseTensor3, mode: Mode) -> UnfoldedMatrix {
    let rows = t.fiber_count(mode);
    let cols = t.dim(mode);
    let mut matrix = Array2::zeros((rows, cols));
    for (j, mut row) in matrix.rows_mut().into_iter().enumerate() {
        t.copy_fiber(mode, j, row.as_slice_mut().expect("standard layout"));
    }
    UnfoldedMatrix { mode, matrix }
}

/// Inverse of [`unfold`].
pub fn fold(m: &UnfoldedMatrix, dims: [usize; 3]) -> Result<DenseTensor3> {
    check_dims(dims)?;
    let rows = fiber_count(dims, m.mode);
    let cols = dims[m.mode.index()];
    if m.rows() != rows || m.cols() != cols {
        return Err(MidasError::Shape(format!(
            "mode-{} unfolding of {:?} must be {}x{}, got {}x{}",
            m.mode,
            dims,
            rows,
            cols,
            m.rows(),
            m.cols()
        )));
    }
    let mut t = DenseTensor3::zeros(dims)?;
    for ((j, i), &v) in m.matrix.indexed_iter() {
        let [i1, i2, i3] = fiber_coords(dims, m.mode, j, i);
        let pos = t.linear_index(i1, i2, i3);
        t.data[pos] = v;
    }
    DenseTensor3::new(dims, t.data)
}

/// Rows `batch.indices()` of the mode-n unfolding, read straight from the
/// tensor storage.
pub fn gather_fiber_rows(t: &DenseTensor3, batch: &FiberBatch) -> Result<Array2<f64>> {
    let mode = batch.mode();
    let fibers = t.fiber_count(mode);
    let cols = t.dim(mode);
    let mut out = Array2::zeros((batch.len(), cols));
    for (&j, mut row) in batch.indices().iter().zip(out.rows_mut()) {
        if j >= fibers {
            return Err(MidasError::FiberOutOfRange {
                mode,
                index: j,
                limit: fibers,
            });
        }
        t.copy_fiber(mode, j, row.as_slice_mut().expect("standard layout"));
    }
    Ok(out)
}

/// Column-wise Kronecker product. Row `ia * I_b + ib` of column `l` is
/// `a[ia, l] * b[ib, l]`.
pub fn khatri_rao(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Array2<f64>> {
    if a.ncols() != b.ncols() {
        return Err(MidasError::Shape(format!(
            "khatri-rao column mismatch: {} vs {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let (ia, ib, cols) = (a.nrows(), b.nrows(), a.ncols());
    Ok(Array2::from_shape_fn((ia * ib, cols), |(row, l)| {
        a[[row / ib, l]] * b[[row % ib, l]]
    }))
}
