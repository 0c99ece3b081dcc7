//! Staircase sweep through a transfer column.
//!
//! A state on `n` legs is stored row-major with leg 0 (the observable end) as
//! the most significant digit. A column is never materialised. Its nodes act
//! one at a time, so the cut always has exactly `n` legs.

use crate::linalg::C64;
use faer::linalg::matmul::matmul;
use faer::{Accum, MatMut, MatRef, Par};

/// One local map of a column sweep: `new = m * old` on legs `pos .. pos + width`.
#[derive(Clone, Debug)]
pub struct Op {
    pub pos: usize,
    pub width: usize,
    pub m: Vec<C64>,
}

impl Op {
    pub fn transposed(&self, dim: usize) -> Op {
        let a = dim.pow(self.width as u32);
        let mut t = vec![C64::new(0.0, 0.0); a * a];
        for e in 0..a {
            for w in 0..a {
                t[w * a + e] = self.m[e * a + w];
            }
        }
        Op { pos: self.pos, width: self.width, m: t }
    }
}

/// Topological order of the nodes `0..=n` of a column: for `gamma_j = +`
/// node `j - 1` precedes node `j`, otherwise node `j` precedes node `j - 1`.
/// Among admissible candidates the smallest index goes first.
pub fn node_order(jumps: &[i8]) -> Vec<usize> {
    let n = jumps.len();
    let mut indeg = vec![0usize; n + 1];
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for j in 1..=n {
        let (a, b) = if jumps[j - 1] > 0 { (j - 1, j) } else { (j, j - 1) };
        succ[a].push(b);
        indeg[b] += 1;
    }
    let mut ready: std::collections::BTreeSet<usize> = (0..=n).filter(|&k| indeg[k] == 0).collect();
    let mut out = Vec::with_capacity(n + 1);
    while let Some(k) = ready.pop_first() {
        out.push(k);
        for &s in &succ[k] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                ready.insert(s);
            }
        }
    }
    out
}

/// Applies `op` in place. `buf` is scratch space.
pub fn apply(psi: &mut [C64], buf: &mut Vec<C64>, n: usize, dim: usize, op: &Op) {
    let a = dim.pow(op.width as u32);
    let inner = dim.pow((n - op.pos - op.width) as u32);
    let blk_len = a * inner;
    if buf.len() < blk_len {
        buf.resize(blk_len, C64::new(0.0, 0.0));
    }
    let lhs = MatRef::from_row_major_slice(&op.m, a, a);
    for blk in psi.chunks_exact_mut(blk_len) {
        let scratch = &mut buf[..blk_len];
        if inner >= 8 {
            let rhs = MatRef::from_row_major_slice(blk, a, inner);
            let dst = MatMut::from_row_major_slice_mut(scratch, a, inner);
            matmul(dst, Accum::Replace, lhs, rhs, C64::new(1.0, 0.0), Par::Seq);
        } else {
            scratch.fill(C64::new(0.0, 0.0));
            for e in 0..a {
                let row = &op.m[e * a..(e + 1) * a];
                let out = &mut scratch[e * inner..(e + 1) * inner];
                for (w, &c) in row.iter().enumerate() {
                    if c.re == 0.0 && c.im == 0.0 {
                        continue;
                    }
                    let src = &blk[w * inner..(w + 1) * inner];
                    for (o, &s) in out.iter_mut().zip(src) {
                        *o += c * s;
                    }
                }
            }
        }
        blk.copy_from_slice(scratch);
    }
}

pub fn apply_all(psi: &mut [C64], buf: &mut Vec<C64>, n: usize, dim: usize, ops: &[Op]) {
    for op in ops {
        apply(psi, buf, n, dim, op);
    }
}

/// Applies the transposed ops in reverse order, i.e. the column acting to the left.
pub fn apply_all_transposed(psi: &mut [C64], buf: &mut Vec<C64>, n: usize, dim: usize, ops: &[Op]) {
    for op in ops.iter().rev() {
        apply(psi, buf, n, dim, &op.transposed(dim));
    }
}

/// `v^(x n)` for a one-leg vector `v`.
pub fn product_state(v: &[C64], n: usize) -> Vec<C64> {
    let mut psi = vec![C64::new(1.0, 0.0)];
    for _ in 0..n {
        let mut next = Vec::with_capacity(psi.len() * v.len());
        for &p in &psi {
            next.extend(v.iter().map(|&x| p * x));
        }
        psi = next;
    }
    psi
}

/// `(x)_i v_i` for per-leg vectors.
pub fn product_of(vs: &[Vec<C64>]) -> Vec<C64> {
    let mut psi = vec![C64::new(1.0, 0.0)];
    for v in vs {
        let mut next = Vec::with_capacity(psi.len() * v.len());
        for &p in &psi {
            next.extend(v.iter().map(|&x| p * x));
        }
        psi = next;
    }
    psi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_respects_constraints() {
        for jumps in [vec![1i8, 1, 1], vec![-1, -1], vec![1, -1, 1, -1], vec![-1, 1, 1, -1, -1]] {
            let o = node_order(&jumps);
            assert_eq!(o.len(), jumps.len() + 1);
            let pos = |k: usize| o.iter().position(|&x| x == k).unwrap();
            for j in 1..=jumps.len() {
                if jumps[j - 1] > 0 {
                    assert!(pos(j - 1) < pos(j));
                } else {
                    assert!(pos(j) < pos(j - 1));
                }
            }
        }
    }

    #[test]
    fn apply_matches_dense_kron() {
        // A one-leg op at position 1 of 3 legs equals 1 (x) M (x) 1.
        let dim = 3;
        let m: Vec<C64> = (0..9).map(|k| C64::new(k as f64, -(k as f64) / 2.0)).collect();
        let psi0: Vec<C64> = (0..27).map(|k| C64::new((k as f64).sin(), (k as f64).cos())).collect();
        for inner_matmul in [false, true] {
            let _ = inner_matmul;
            let mut psi = psi0.clone();
            let mut buf = Vec::new();
            apply(&mut psi, &mut buf, 3, dim, &Op { pos: 1, width: 1, m: m.clone() });
            for a in 0..3 {
                for e in 0..3 {
                    for c in 0..3 {
                        let expect: C64 = (0..3).map(|w| m[e * 3 + w] * psi0[(a * 3 + w) * 3 + c]).sum();
                        assert!((psi[(a * 3 + e) * 3 + c] - expect).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn matmul_and_loop_paths_agree() {
        let dim = 2;
        let n = 6;
        let m: Vec<C64> = (0..16).map(|k| C64::new((k as f64 * 0.7).cos(), (k as f64).sin())).collect();
        let psi0: Vec<C64> = (0..64).map(|k| C64::new((k as f64 * 1.3).sin(), 0.1 * k as f64)).collect();
        // pos 0 has inner = 16 (matmul), pos 4 has inner = 1 (loops); compare against explicit sums.
        for pos in [0, 4] {
            let mut psi = psi0.clone();
            apply(&mut psi, &mut Vec::new(), n, dim, &Op { pos, width: 2, m: m.clone() });
            let inner = dim.pow((n - pos - 2) as u32);
            for idx in 0..64 {
                let o = idx / (4 * inner);
                let e = (idx / inner) % 4;
                let k = idx % inner;
                let expect: C64 = (0..4).map(|w| m[e * 4 + w] * psi0[(o * 4 + w) * inner + k]).sum();
                assert!((psi[idx] - expect).norm() < 1e-12);
            }
        }
    }
}
