//! Order-fixed summation.
//!
//! All reductions inside the solver go through [`pairwise_sum`] so that the
//! result depends only on the input order, never on how work was split across
//! threads.

const BLOCK: usize = 8;

/// Pairwise (tree) summation with a fixed split point at `len / 2`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= BLOCK {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Column sums of the row-major `data` (rows of length `width`) written to
/// `out`, each column summed with the same tree as [`pairwise_sum`], so
/// `out[c]` equals `pairwise_sum` of column `c` bit for bit.
pub fn pairwise_sum_rows(data: &[f64], width: usize, out: &mut [f64]) {
    assert_eq!(out.len(), width);
    let count = if width == 0 { 0 } else { data.len() / width };
    let mut scratch = vec![0.0; width * (usize::BITS as usize)];
    rows_rec(&data[..count * width], width, count, out, &mut scratch);
}

fn rows_rec(data: &[f64], width: usize, count: usize, out: &mut [f64], scratch: &mut [f64]) {
    if count <= BLOCK {
        out.fill(0.0);
        for row in data.chunks_exact(width) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        return;
    }
    let mid = count / 2;
    rows_rec(&data[..mid * width], width, mid, out, scratch);
    let (right, rest) = scratch.split_at_mut(width);
    rows_rec(&data[mid * width..], width, count - mid, right, rest);
    for (o, r) in out.iter_mut().zip(right.iter()) {
        *o += r;
    }
}

pub fn pairwise_mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}
