//! Exact dynamic time warping with diagonal, right and down steps.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DtwAlignment {
    /// Aligned `(i, j)` index pairs from `(0, 0)` to `(n-1, m-1)`.
    pub path: Vec<(usize, usize)>,
    /// Summed frame cost along the path.
    pub cost: f64,
}

impl DtwAlignment {
    pub fn mean_cost(&self) -> f64 {
        self.cost / self.path.len() as f64
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Aligns two frame sequences under Euclidean frame cost.
pub fn dtw_align(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<DtwAlignment> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("dtw sequence"));
    }
    let dim = a[0].len();
    if a.iter().chain(b).any(|f| f.len() != dim) {
        return Err(Error::Shape("dtw frames differ in dimension".into()));
    }
    Ok(dtw_with_cost(a.len(), b.len(), |i, j| euclidean(&a[i], &b[j])))
}

const DIAG: u8 = 0;
const UP: u8 = 1; // from (i-1, j)
const LEFT: u8 = 2; // from (i, j-1)

/// Minimum-cost monotone path over an `n x m` grid. Ties in cost prefer the
/// shorter path, which keeps the result symmetric under transposition.
pub fn dtw_with_cost(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> DtwAlignment {
    assert!(n > 0 && m > 0, "dtw grid must be nonempty");
    // (cost, steps) per cell of the previous and current row.
    let mut prev: Vec<(f64, usize)> = vec![(f64::INFINITY, 0); m];
    let mut cur: Vec<(f64, usize)> = vec![(f64::INFINITY, 0); m];
    let mut dirs = vec![DIAG; n * m];
    let better = |a: (f64, usize), b: (f64, usize)| a.0 < b.0 || (a.0 == b.0 && a.1 < b.1);
    for i in 0..n {
        for j in 0..m {
            let c = cost(i, j);
            if i == 0 && j == 0 {
                cur[0] = (c, 1);
                continue;
            }
            let mut best = (f64::INFINITY, usize::MAX);
            let mut dir = DIAG;
            if i > 0 && j > 0 {
                best = prev[j - 1];
            }
            if i > 0 && better(prev[j], best) {
                best = prev[j];
                dir = UP;
            }
            if j > 0 && better(cur[j - 1], best) {
                best = cur[j - 1];
                dir = LEFT;
            }
            cur[j] = (best.0 + c, best.1 + 1);
            dirs[i * m + j] = dir;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let total = prev[m - 1].0;
    let mut path = Vec::with_capacity(prev[m - 1].1);
    let (mut i, mut j) = (n - 1, m - 1);
    path.push((i, j));
    while i > 0 || j > 0 {
        match dirs[i * m + j] {
            DIAG => {
                i -= 1;
                j -= 1;
            }
            UP => i -= 1,
            _ => j -= 1,
        }
        path.push((i, j));
    }
    path.reverse();
    DtwAlignment { path, cost: total }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn equal_sequences_align_diagonally() {
        let a = frames(&[0.0, 1.0, 3.0, 2.0]);
        let r = dtw_align(&a, &a).unwrap();
        assert_eq!(r.cost, 0.0);
        assert_eq!(r.path, vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
    }

    #[test]
    fn repeated_frame() {
        let r = dtw_align(&frames(&[1.0]), &frames(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(r.cost, 0.0);
        assert_eq!(r.path, vec![(0, 0), (0, 1), (0, 2)]);
    }

    #[test]
    fn rejects_empty_and_ragged() {
        assert!(dtw_align(&[], &frames(&[1.0])).is_err());
        assert!(dtw_align(&[vec![1.0]], &[vec![1.0, 2.0]]).is_err());
    }
}
