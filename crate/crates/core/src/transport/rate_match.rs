//! Circular-buffer rate matching and the time interleaver that spreads
//! consecutive modulation symbols over the data symbols of a subframe.

use crate::error::{Error, Result};

/// Reads the coded bits cyclically until `target_len` bits are produced,
/// repeating or puncturing as needed.
pub fn rate_match(coded: &[u8], target_len: usize) -> Result<Vec<u8>> {
    if coded.is_empty() && target_len > 0 {
        return Err(Error::InvalidArgument("cannot rate-match an empty codeword".into()));
    }
    Ok((0..target_len).map(|i| coded[i % coded.len()]).collect())
}

/// Folds received LLRs back onto the codeword: repeated positions add,
/// punctured positions stay zero.
pub fn de_rate_match(llrs: &[f32], coded_len: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; coded_len];
    if coded_len == 0 {
        return out;
    }
    for (i, &l) in llrs.iter().enumerate() {
        out[i % coded_len] += l;
    }
    out
}

/// Row-column permutation: symbol `m` goes to data column `m % n_cols`,
/// row `m / n_cols`. Output is column-major (one column after another).
pub fn interleave<T: Copy>(items: &[T], n_cols: usize) -> Result<Vec<T>> {
    if n_cols == 0 || items.len() % n_cols != 0 {
        return Err(Error::Dimension {
            what: "interleaver input",
            expected: n_cols,
            got: items.len(),
        });
    }
    let n_rows = items.len() / n_cols;
    Ok((0..items.len())
        .map(|p| {
            let (col, row) = (p / n_rows, p % n_rows);
            items[row * n_cols + col]
        })
        .collect())
}

pub fn deinterleave<T: Copy>(items: &[T], n_cols: usize) -> Result<Vec<T>> {
    if n_cols == 0 || items.len() % n_cols != 0 {
        return Err(Error::Dimension {
            what: "deinterleaver input",
            expected: n_cols,
            got: items.len(),
        });
    }
    let n_rows = items.len() / n_cols;
    Ok((0..items.len())
        .map(|m| {
            let (row, col) = (m / n_cols, m % n_cols);
            items[col * n_rows + row]
        })
        .collect())
}
