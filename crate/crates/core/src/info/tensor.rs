//! Dense row-major tensor helpers used by the discrete solvers.
//!
//! Tensors are plain `Vec<f64>` buffers paired with a list of axis sizes;
//! the last axis varies fastest.

pub fn num_elements(dims: &[usize]) -> usize {
    dims.iter().product()
}

pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; dims.len()];
    for axis in (0..dims.len().saturating_sub(1)).rev() {
        strides[axis] = strides[axis + 1] * dims[axis + 1];
    }
    strides
}

/// Calls `f(multi_index, flat_index)` for every cell, last axis fastest.
pub fn for_each_index(dims: &[usize], mut f: impl FnMut(&[usize], usize)) {
    let total = num_elements(dims);
    if total == 0 {
        return;
    }
    let mut idx = vec![0usize; dims.len()];
    for flat in 0..total {
        f(&idx, flat);
        for axis in (0..dims.len()).rev() {
            idx[axis] += 1;
            if idx[axis] < dims[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
}

/// Sums out every axis not listed in `keep`. `keep` must be strictly
/// increasing; the result is laid out over the kept axes in that order.
pub fn marginalize(dims: &[usize], data: &[f64], keep: &[usize]) -> Vec<f64> {
    debug_assert!(keep.windows(2).all(|w| w[0] < w[1]));
    let kept_dims: Vec<usize> = keep.iter().map(|&a| dims[a]).collect();
    let kept_strides = strides(&kept_dims);
    let mut out = vec![0.0; num_elements(&kept_dims)];
    for_each_index(dims, |idx, flat| {
        let mut target = 0;
        for (slot, &axis) in keep.iter().enumerate() {
            target += idx[axis] * kept_strides[slot];
        }
        out[target] += data[flat];
    });
    out
}

/// Contracts `axis` of the tensor with a row-major `dims[axis] x cols`
/// matrix, replacing that axis by one of size `cols`.
pub fn mode_product(
    dims: &[usize],
    data: &[f64],
    axis: usize,
    matrix: &[f64],
    cols: usize,
) -> (Vec<usize>, Vec<f64>) {
    let rows = dims[axis];
    debug_assert_eq!(matrix.len(), rows * cols);
    let outer: usize = dims[..axis].iter().product();
    let inner: usize = dims[axis + 1..].iter().product();
    let mut new_dims = dims.to_vec();
    new_dims[axis] = cols;
    let mut out = vec![0.0; outer * cols * inner];
    for o in 0..outer {
        for r in 0..rows {
            let src = &data[(o * rows + r) * inner..(o * rows + r + 1) * inner];
            if src.iter().all(|&v| v == 0.0) {
                continue;
            }
            for c in 0..cols {
                let w = matrix[r * cols + c];
                if w == 0.0 {
                    continue;
                }
                let dst = &mut out[(o * cols + c) * inner..(o * cols + c + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
    (new_dims, out)
}

/// Moves `axis` to the front, keeping the relative order of the others.
pub fn move_axis_to_front(dims: &[usize], data: &[f64], axis: usize) -> (Vec<usize>, Vec<f64>) {
    if axis == 0 {
        return (dims.to_vec(), data.to_vec());
    }
    let mut order = vec![axis];
    order.extend((0..dims.len()).filter(|&a| a != axis));
    let new_dims: Vec<usize> = order.iter().map(|&a| dims[a]).collect();
    let new_strides = strides(&new_dims);
    let mut out = vec![0.0; data.len()];
    for_each_index(dims, |idx, flat| {
        let mut target = 0;
        for (slot, &a) in order.iter().enumerate() {
            target += idx[a] * new_strides[slot];
        }
        out[target] = data[flat];
    });
    (new_dims, out)
}
