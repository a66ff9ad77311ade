//! Dense tensor algebra used as the reference substrate for every other module.
//!
//! Storage is row-major (last index fastest). The multi-index of
//! [`multi_index`] follows the opposite convention (first index fastest),
//! which is the one the KCP index algebra is written in. Everything that has
//! to translate between the two goes through [`multi_index`] and
//! [`split_index`]; row-major offsets are multi-indices over the reversed
//! mode list.

use crate::error::{KcpError, Result};

/// Ordered list of mode sizes. An empty list is a scalar.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
    count: usize,
}

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        let mut count: usize = 1;
        for (mode, &dim) in dims.iter().enumerate() {
            if dim == 0 {
                return Err(KcpError::InvalidShape(format!("mode {mode} has size 0")));
            }
            count = count.checked_mul(dim).ok_or_else(|| {
                KcpError::InvalidShape(format!("element count of {dims:?} overflows usize"))
            })?;
        }
        Ok(Self { dims, count })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Number of elements.
    pub fn count(&self) -> usize {
        self.count
    }
}

/// Flat index of `indices` under the first-index-fastest convention:
/// `i0 + i1*d0 + i2*d0*d1 + ...`.
pub fn multi_index(indices: &[usize], dims: &[usize]) -> Result<usize> {
    if indices.len() != dims.len() {
        return Err(KcpError::DimensionMismatch {
            expected: dims.len(),
            actual: indices.len(),
        });
    }
    let mut flat = 0usize;
    let mut stride = 1usize;
    for (mode, (&index, &size)) in indices.iter().zip(dims).enumerate() {
        if index >= size {
            return Err(KcpError::IndexOutOfRange { mode, index, size });
        }
        flat += index * stride;
        stride *= size;
    }
    Ok(flat)
}

/// Inverse of [`multi_index`].
pub fn split_index(flat: usize, dims: &[usize]) -> Result<Vec<usize>> {
    let count = dims.iter().product::<usize>();
    if flat >= count {
        return Err(KcpError::FlatIndexOutOfRange { flat, count });
    }
    let mut rest = flat;
    Ok(dims
        .iter()
        .map(|&size| {
            let index = rest % size;
            rest /= size;
            index
        })
        .collect())
}

/// Row-major offset of `indices`: the multi-index of the reversed lists.
pub(crate) fn row_major_offset(indices: &[usize], dims: &[usize]) -> Result<usize> {
    let rev_idx: Vec<usize> = indices.iter().rev().copied().collect();
    let rev_dims: Vec<usize> = dims.iter().rev().copied().collect();
    multi_index(&rev_idx, &rev_dims)
}

/// Row-major strides (in elements) of `dims`.
pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut out = vec![1usize; dims.len()];
    for j in (0..dims.len().saturating_sub(1)).rev() {
        out[j] = out[j + 1] * dims[j + 1];
    }
    out
}

/// Visit every multi-index of `dims` in row-major order.
pub(crate) fn for_each_index(dims: &[usize], mut f: impl FnMut(&[usize])) {
    if dims.contains(&0) {
        return;
    }
    let mut idx = vec![0usize; dims.len()];
    loop {
        f(&idx);
        let mut mode = dims.len();
        loop {
            if mode == 0 {
                return;
            }
            mode -= 1;
            idx[mode] += 1;
            if idx[mode] < dims[mode] {
                break;
            }
            idx[mode] = 0;
        }
    }
}

/// A d-th order array of `f64`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.count() {
            return Err(KcpError::DimensionMismatch {
                expected: shape.count(),
                actual: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn from_vec(dims: impl Into<Vec<usize>>, data: Vec<f64>) -> Result<Self> {
        Self::new(Shape::new(dims)?, data)
    }

    pub fn zeros(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        let data = vec![0.0; shape.count()];
        Ok(Self { shape, data })
    }

    pub fn filled(dims: impl Into<Vec<usize>>, value: f64) -> Result<Self> {
        let shape = Shape::new(dims)?;
        let data = vec![value; shape.count()];
        Ok(Self { shape, data })
    }

    /// Builds a tensor by evaluating `f` at every row-major multi-index.
    pub fn from_fn(
        dims: impl Into<Vec<usize>>,
        mut f: impl FnMut(&[usize]) -> f64,
    ) -> Result<Self> {
        let shape = Shape::new(dims)?;
        let mut data = Vec::with_capacity(shape.count());
        for_each_index(shape.dims(), |idx| data.push(f(idx)));
        Ok(Self { shape, data })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_fn([n, n], |idx| if idx[0] == idx[1] { 1.0 } else { 0.0 })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn order(&self) -> usize {
        self.shape.order()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, indices: &[usize]) -> Result<f64> {
        Ok(self.data[row_major_offset(indices, self.dims())?])
    }

    pub fn set(&mut self, indices: &[usize], value: f64) -> Result<()> {
        let at = row_major_offset(indices, self.shape.dims())?;
        self.data[at] = value;
        Ok(())
    }

    /// Row count of a matrix.
    ///
    /// Panics if the tensor is not 2-D.
    pub fn rows(&self) -> usize {
        assert_eq!(
            self.order(),
            2,
            "rows() on a tensor of order {}",
            self.order()
        );
        self.dims()[0]
    }

    /// Column count of a matrix.
    ///
    /// Panics if the tensor is not 2-D.
    pub fn cols(&self) -> usize {
        assert_eq!(
            self.order(),
            2,
            "cols() on a tensor of order {}",
            self.order()
        );
        self.dims()[1]
    }

    /// Largest absolute entry (0 for an all-zero tensor).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entry-wise difference. Shapes must match.
    pub fn max_abs_diff(&self, other: &DenseTensor) -> Result<f64> {
        if self.dims() != other.dims() {
            return Err(KcpError::SizeMismatch(format!(
                "{:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn scale(&self, alpha: f64) -> DenseTensor {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    /// Matrix transpose. Panics if the tensor is not 2-D.
    pub fn transpose(&self) -> DenseTensor {
        let (r, c) = (self.rows(), self.cols());
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = self.data[i * c + j];
            }
        }
        DenseTensor {
            shape: Shape::new([c, r]).expect("transposed shape is valid"),
            data,
        }
    }
}

/// Reinterprets the flat data under a new shape.
pub fn reshape(t: &DenseTensor, new: Shape) -> Result<DenseTensor> {
    if new.count() != t.len() {
        return Err(KcpError::CountMismatch {
            from: t.len(),
            to: new.count(),
        });
    }
    Ok(DenseTensor {
        shape: new,
        data: t.data.clone(),
    })
}

fn check_mode_split(order: usize, row_modes: &[usize], col_modes: &[usize]) -> Result<()> {
    let mut seen = vec![false; order];
    for &mode in row_modes.iter().chain(col_modes) {
        if mode >= order {
            return Err(KcpError::InvalidPermutation {
                order,
                detail: format!("mode {mode} does not exist"),
            });
        }
        if seen[mode] {
            return Err(KcpError::InvalidPermutation {
                order,
                detail: format!("mode {mode} listed twice"),
            });
        }
        seen[mode] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(KcpError::InvalidPermutation {
            order,
            detail: format!("mode {missing} missing"),
        });
    }
    Ok(())
}

/// Unfolds `t` into a matrix. Row `r` is the multi-index of the `row_modes`
/// indices (first listed mode fastest), column likewise for `col_modes`.
pub fn matricize(t: &DenseTensor, row_modes: &[usize], col_modes: &[usize]) -> Result<DenseTensor> {
    check_mode_split(t.order(), row_modes, col_modes)?;
    let dims = t.dims();
    let row_dims: Vec<usize> = row_modes.iter().map(|&m| dims[m]).collect();
    let col_dims: Vec<usize> = col_modes.iter().map(|&m| dims[m]).collect();
    let rows: usize = row_dims.iter().product();
    let cols: usize = col_dims.iter().product();
    let mut out = vec![0.0; rows * cols];
    let mut mu = vec![0usize; row_modes.len()];
    let mut nu = vec![0usize; col_modes.len()];
    let mut err = None;
    for_each_index(dims, |idx| {
        for (slot, &m) in mu.iter_mut().zip(row_modes) {
            *slot = idx[m];
        }
        for (slot, &m) in nu.iter_mut().zip(col_modes) {
            *slot = idx[m];
        }
        match (
            multi_index(&mu, &row_dims),
            multi_index(&nu, &col_dims),
            row_major_offset(idx, dims),
        ) {
            (Ok(r), Ok(c), Ok(src)) => out[r * cols + c] = t.data[src],
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    DenseTensor::from_vec([rows, cols], out)
}

/// Inverse of [`matricize`]: folds a matrix back into a tensor of `dims`.
pub fn unmatricize(
    m: &DenseTensor,
    dims: &[usize],
    row_modes: &[usize],
    col_modes: &[usize],
) -> Result<DenseTensor> {
    check_mode_split(dims.len(), row_modes, col_modes)?;
    if m.order() != 2 {
        return Err(KcpError::RankMismatch {
            expected: 2,
            actual: m.order(),
        });
    }
    let row_dims: Vec<usize> = row_modes.iter().map(|&k| dims[k]).collect();
    let col_dims: Vec<usize> = col_modes.iter().map(|&k| dims[k]).collect();
    let (rows, cols) = (
        row_dims.iter().product::<usize>(),
        col_dims.iter().product::<usize>(),
    );
    if m.rows() != rows || m.cols() != cols {
        return Err(KcpError::SizeMismatch(format!(
            "matrix {:?} cannot fold into {dims:?}",
            m.dims()
        )));
    }
    let mut mu = vec![0usize; row_modes.len()];
    let mut nu = vec![0usize; col_modes.len()];
    DenseTensor::from_fn(dims.to_vec(), |idx| {
        for (slot, &k) in mu.iter_mut().zip(row_modes) {
            *slot = idx[k];
        }
        for (slot, &k) in nu.iter_mut().zip(col_modes) {
            *slot = idx[k];
        }
        let r = multi_index(&mu, &row_dims).expect("index within folded dims");
        let c = multi_index(&nu, &col_dims).expect("index within folded dims");
        m.data[r * cols + c]
    })
}

/// Sums over paired modes `axes_a[j]` / `axes_b[j]`. Output modes are the
/// remaining modes of `a` followed by the remaining modes of `b`, each in
/// their original order.
pub fn contract(
    a: &DenseTensor,
    b: &DenseTensor,
    axes_a: &[usize],
    axes_b: &[usize],
) -> Result<DenseTensor> {
    if axes_a.len() != axes_b.len() {
        return Err(KcpError::SizeMismatch(format!(
            "{} axes on the left, {} on the right",
            axes_a.len(),
            axes_b.len()
        )));
    }
    let distinct = |axes: &[usize], order: usize| -> Result<()> {
        for (j, &ax) in axes.iter().enumerate() {
            if ax >= order {
                return Err(KcpError::ModeOutOfRange { mode: ax, order });
            }
            if axes[..j].contains(&ax) {
                return Err(KcpError::SizeMismatch(format!(
                    "axis {ax} contracted twice"
                )));
            }
        }
        Ok(())
    };
    distinct(axes_a, a.order())?;
    distinct(axes_b, b.order())?;
    for (&x, &y) in axes_a.iter().zip(axes_b) {
        if a.dims()[x] != b.dims()[y] {
            return Err(KcpError::SizeMismatch(format!(
                "mode {x} of size {} against mode {y} of size {}",
                a.dims()[x],
                b.dims()[y]
            )));
        }
    }
    let free_a: Vec<usize> = (0..a.order()).filter(|m| !axes_a.contains(m)).collect();
    let free_b: Vec<usize> = (0..b.order()).filter(|m| !axes_b.contains(m)).collect();
    let sa = strides(a.dims());
    let sb = strides(b.dims());
    let sum_dims: Vec<usize> = axes_a.iter().map(|&x| a.dims()[x]).collect();
    let out_dims: Vec<usize> = free_a
        .iter()
        .map(|&m| a.dims()[m])
        .chain(free_b.iter().map(|&m| b.dims()[m]))
        .collect();

    // Offsets contributed by every contracted index combination.
    let mut sum_offsets = Vec::new();
    for_each_index(&sum_dims, |idx| {
        let oa: usize = idx.iter().zip(axes_a).map(|(i, &x)| i * sa[x]).sum();
        let ob: usize = idx.iter().zip(axes_b).map(|(i, &y)| i * sb[y]).sum();
        sum_offsets.push((oa, ob));
    });

    let na = free_a.len();
    DenseTensor::from_fn(out_dims, |idx| {
        let base_a: usize = idx[..na].iter().zip(&free_a).map(|(i, &m)| i * sa[m]).sum();
        let base_b: usize = idx[na..].iter().zip(&free_b).map(|(i, &m)| i * sb[m]).sum();
        sum_offsets
            .iter()
            .map(|&(oa, ob)| a.data[base_a + oa] * b.data[base_b + ob])
            .sum()
    })
}

/// Kronecker product of two matrices under the multi-index convention:
/// entry `(α + β·rows_a, γ + τ·cols_a)` is `a(α, γ)·b(β, τ)`.
pub fn kronecker(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    for t in [a, b] {
        if t.order() != 2 {
            return Err(KcpError::RankMismatch {
                expected: 2,
                actual: t.order(),
            });
        }
    }
    let (ra, ca) = (a.rows(), a.cols());
    let (rb, cb) = (b.rows(), b.cols());
    let cols = ca * cb;
    let mut out = vec![0.0; ra * rb * cols];
    for beta in 0..rb {
        for alpha in 0..ra {
            let row = multi_index(&[alpha, beta], &[ra, rb])?;
            for tau in 0..cb {
                let bv = b.data[beta * cb + tau];
                for gamma in 0..ca {
                    let col = multi_index(&[gamma, tau], &[ca, cb])?;
                    out[row * cols + col] = a.data[alpha * ca + gamma] * bv;
                }
            }
        }
    }
    DenseTensor::from_vec([ra * rb, cols], out)
}

/// Outer product of vectors; one mode per vector.
pub fn outer(vectors: &[&[f64]]) -> Result<DenseTensor> {
    if vectors.is_empty() {
        return Err(KcpError::EmptyInput("outer product of zero vectors"));
    }
    let dims: Vec<usize> = vectors.iter().map(|v| v.len()).collect();
    let mut data: Vec<f64> = vec![1.0];
    for v in vectors {
        let mut next = Vec::with_capacity(data.len() * v.len());
        for &p in &data {
            next.extend(v.iter().map(|&x| p * x));
        }
        data = next;
    }
    DenseTensor::from_vec(dims, data)
}

/// Vectorizes `t` with the multi-index convention: `v[multi_index(idx)] = t[idx]`.
pub fn vectorize(t: &DenseTensor) -> Vec<f64> {
    let dims = t.dims();
    let mut out = vec![0.0; t.len()];
    let mut pos = 0usize;
    for_each_index(dims, |idx| {
        let at = multi_index(idx, dims).expect("index within dims");
        out[at] = t.data[pos];
        pos += 1;
    });
    out
}

/// Inverse of [`vectorize`].
pub fn tensorize(v: &[f64], dims: &[usize]) -> Result<DenseTensor> {
    let shape = Shape::new(dims.to_vec())?;
    if shape.count() != v.len() {
        return Err(KcpError::DimensionMismatch {
            expected: shape.count(),
            actual: v.len(),
        });
    }
    DenseTensor::from_fn(dims.to_vec(), |idx| {
        v[multi_index(idx, dims).expect("index within dims")]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(dims: &[usize]) -> DenseTensor {
        let n: usize = dims.iter().product();
        DenseTensor::from_vec(dims.to_vec(), (0..n).map(|v| v as f64 + 1.0).collect()).unwrap()
    }

    #[test]
    fn multi_index_examples() {
        assert_eq!(multi_index(&[0, 0], &[2, 3]).unwrap(), 0);
        assert_eq!(multi_index(&[1, 2], &[2, 3]).unwrap(), 5);
        assert_eq!(multi_index(&[1, 1, 1], &[2, 2, 2]).unwrap(), 7);
    }

    #[test]
    fn multi_index_errors() {
        assert!(matches!(
            multi_index(&[0], &[2, 3]),
            Err(KcpError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            multi_index(&[2, 0], &[2, 3]),
            Err(KcpError::IndexOutOfRange { mode: 0, .. })
        ));
    }

    #[test]
    fn split_index_examples() {
        assert_eq!(split_index(0, &[4, 5]).unwrap(), vec![0, 0]);
        assert_eq!(split_index(5, &[2, 3]).unwrap(), vec![1, 2]);
        assert_eq!(split_index(7, &[2, 2, 2]).unwrap(), vec![1, 1, 1]);
        assert!(matches!(
            split_index(6, &[2, 3]),
            Err(KcpError::FlatIndexOutOfRange { .. })
        ));
    }

    #[test]
    fn shape_rejects_zero_and_overflow() {
        assert!(Shape::new([2, 0]).is_err());
        assert!(Shape::new([usize::MAX, 2]).is_err());
        assert_eq!(Shape::new(Vec::new()).unwrap().count(), 1);
    }

    #[test]
    fn reshape_is_metadata_only() {
        let t = seq(&[6]);
        let r = reshape(&t, Shape::new([2, 3]).unwrap()).unwrap();
        assert_eq!(r.data(), t.data());

        let t = seq(&[2, 3]);
        let r = reshape(&t, Shape::new([3, 2]).unwrap()).unwrap();
        assert_eq!(r.data()[4], t.data()[4]);

        let t = seq(&[2, 2, 2]);
        let there = reshape(&t, Shape::new([4, 2]).unwrap()).unwrap();
        let back = reshape(&there, Shape::new([2, 2, 2]).unwrap()).unwrap();
        assert_eq!(back, t);

        assert!(matches!(
            reshape(&t, Shape::new([3, 3]).unwrap()),
            Err(KcpError::CountMismatch { from: 8, to: 9 })
        ));
    }

    #[test]
    fn matricize_matrix_identity() {
        let t = seq(&[2, 3]);
        assert_eq!(matricize(&t, &[0], &[1]).unwrap(), t);
    }

    #[test]
    fn matricize_three_way_against_enumeration() {
        let t = seq(&[2, 3, 4]);
        let m = matricize(&t, &[0, 1], &[2]).unwrap();
        assert_eq!(m.dims(), &[6, 4]);
        for r in 0..6 {
            let mu = split_index(r, &[2, 3]).unwrap();
            for c in 0..4 {
                assert_eq!(m.data()[r * 4 + c], t.get(&[mu[0], mu[1], c]).unwrap());
            }
        }
    }

    #[test]
    fn matricize_rejects_bad_mode_lists() {
        let t = seq(&[2, 3, 4]);
        assert!(matricize(&t, &[0, 0], &[2]).is_err());
        assert!(matricize(&t, &[0], &[2]).is_err());
        assert!(matricize(&t, &[0, 3], &[1, 2]).is_err());
    }

    #[test]
    fn unmatricize_inverts_matricize() {
        let t = seq(&[2, 3, 2, 2]);
        let m = matricize(&t, &[3, 1], &[0, 2]).unwrap();
        assert_eq!(unmatricize(&m, t.dims(), &[3, 1], &[0, 2]).unwrap(), t);
    }

    #[test]
    fn contract_matrix_vector() {
        let a = seq(&[2, 3]);
        let v = DenseTensor::from_vec([3], vec![1.0, -1.0, 2.0]).unwrap();
        let y = contract(&a, &v, &[1], &[0]).unwrap();
        assert_eq!(y.data(), &[1.0 - 2.0 + 6.0, 4.0 - 5.0 + 12.0]);
    }

    #[test]
    fn contract_with_identity_is_noop() {
        let t = seq(&[2, 3, 4]);
        let id = DenseTensor::identity(4).unwrap();
        assert_eq!(contract(&t, &id, &[2], &[0]).unwrap(), t);
    }

    #[test]
    fn contract_third_order_against_loops() {
        let a = seq(&[2, 3, 4]);
        let b = DenseTensor::from_fn([3, 2, 5], |i| {
            (i[0] as f64 - 1.0) * (i[2] as f64 + 0.5) + i[1] as f64
        })
        .unwrap();
        let c = contract(&a, &b, &[1], &[0]).unwrap();
        assert_eq!(c.dims(), &[2, 4, 2, 5]);
        for i in 0..2 {
            for j in 0..4 {
                for k in 0..2 {
                    for l in 0..5 {
                        let mut s = 0.0;
                        for x in 0..3 {
                            s += a.get(&[i, x, j]).unwrap() * b.get(&[x, k, l]).unwrap();
                        }
                        assert_eq!(c.get(&[i, j, k, l]).unwrap(), s);
                    }
                }
            }
        }
    }

    #[test]
    fn contract_size_mismatch() {
        let a = seq(&[2, 3]);
        let b = seq(&[4]);
        assert!(matches!(
            contract(&a, &b, &[1], &[0]),
            Err(KcpError::SizeMismatch(_))
        ));
    }

    #[test]
    fn kronecker_of_identities() {
        let i2 = DenseTensor::identity(2).unwrap();
        assert_eq!(
            kronecker(&i2, &i2).unwrap(),
            DenseTensor::identity(4).unwrap()
        );
    }

    #[test]
    fn kronecker_expansion() {
        let a = DenseTensor::from_vec([2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = DenseTensor::from_vec([2, 2], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let k = kronecker(&a, &b).unwrap();
        // Row α + 2β, column γ + 2τ holds a(α,γ) b(β,τ).
        #[rustfmt::skip]
        let expected = vec![
            0.0, 0.0, 1.0, 2.0,
            0.0, 0.0, 3.0, 4.0,
            1.0, 2.0, 0.0, 0.0,
            3.0, 4.0, 0.0, 0.0,
        ];
        assert_eq!(k.data(), expected.as_slice());
    }

    #[test]
    fn kronecker_rejects_non_matrices() {
        let v = seq(&[3]);
        let m = seq(&[2, 2]);
        assert!(matches!(
            kronecker(&v, &m),
            Err(KcpError::RankMismatch { .. })
        ));
    }

    #[test]
    fn outer_examples() {
        let t = outer(&[&[1.0]]).unwrap();
        assert_eq!(t.dims(), &[1]);
        assert_eq!(t.data(), &[1.0]);

        let t = outer(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        assert_eq!(t.data(), &[0.0, 1.0, 0.0, 0.0]);

        assert!(matches!(outer(&[]), Err(KcpError::EmptyInput(_))));
    }

    #[test]
    fn outer_is_column_times_row() {
        let a = [1.0, -2.0, 3.0];
        let b = [0.5, 4.0];
        let t = outer(&[&a, &b]).unwrap();
        let col = DenseTensor::from_vec([3, 1], a.to_vec()).unwrap();
        let row = DenseTensor::from_vec([1, 2], b.to_vec()).unwrap();
        assert_eq!(t, contract(&col, &row, &[1], &[0]).unwrap());
    }

    #[test]
    fn vectorize_uses_first_index_fastest() {
        let t = seq(&[2, 3]);
        // Row-major data 1..6; t(1,0) = 4 lands at multi-index 1.
        assert_eq!(vectorize(&t), vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(tensorize(&vectorize(&t), &[2, 3]).unwrap(), t);
    }
}
