//! Purity of a half-infinite subsystem, from an open light-cone window.

use super::sweep::{self, Op};
use super::{check_size, Circuit};
use crate::error::{domain, Error, Result};
use crate::linalg::{C64, ZERO};
use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par};

fn ceil_odd(q: i64) -> i64 {
    if q.rem_euclid(2) == 1 {
        q
    } else {
        q + 1
    }
}

fn floor_even(q: i64) -> i64 {
    q - q.rem_euclid(2)
}

/// Last qudit of the left half after `tau` layers. The cut is placed on a
/// bond the last layer does not touch.
pub fn cut_qudit(tau: usize) -> i64 {
    if tau % 2 == 0 {
        -1
    } else {
        0
    }
}

/// `P(tau / 2)`: purity of everything right of [`cut_qudit`] after `tau` layers.
pub fn spatial_purity(circ: &Circuit, tau: usize, cap: u128) -> Result<f64> {
    if tau == 0 {
        return Ok(1.0);
    }
    let qc = cut_qudit(tau);
    let lo = floor_even(qc - tau as i64 + 1);
    let hi = ceil_odd(qc + tau as i64);
    spatial_purity_window(circ, tau, lo, hi, cap)
}

/// As [`spatial_purity`] on the explicit window `lo..=hi` (`lo` even, `hi` odd).
pub fn spatial_purity_window(circ: &Circuit, tau: usize, lo: i64, hi: i64, cap: u128) -> Result<f64> {
    let qc = cut_qudit(tau);
    if lo.rem_euclid(2) != 0 || hi.rem_euclid(2) != 1 || lo > qc || hi <= qc {
        return domain(format!("window {lo}..={hi} must start even, end odd and contain the cut after {qc}"));
    }
    chain_purity(circ, tau, lo, hi, qc, cap)
}

/// Evolves the open chain `lo..=hi` for `tau` layers and returns the purity of `qc+1..=hi`.
pub fn chain_purity(circ: &Circuit, tau: usize, lo: i64, hi: i64, qc: i64, cap: u128) -> Result<f64> {
    let d = circ.d();
    let n = (hi - lo + 1) as usize;
    let required = (d as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if required > cap {
        return Err(Error::Size { what: "purity window".into(), required, cap });
    }
    let _ = check_size;
    let m = circ.initial.matrix();
    let s = 1.0 / (d as f64).sqrt();
    let pair: Vec<C64> = (0..d * d).map(|k| m[(k / d, k % d)] * s).collect();
    let mut psi = sweep::product_of(&vec![pair; n / 2]);
    let mut buf = Vec::new();
    for l in 1..=tau as i64 {
        let mut b = lo + (l - lo).rem_euclid(2);
        while b < hi {
            let g = circ.gates.gate(b, l);
            let u = g.matrix();
            let op = Op { pos: (b - lo) as usize, width: 2, m: (0..d.pow(4)).map(|k| u[(k / (d * d), k % (d * d))]).collect() };
            sweep::apply(&mut psi, &mut buf, n, d, &op);
            b += 2;
        }
    }
    let rows = d.pow((qc - lo + 1) as u32);
    Ok(purity_of_rows(&psi, rows))
}

/// `tr[rho^2]` for `rho = M M^dagger` where `M` is `psi` with `rows` rows.
pub(crate) fn purity_of_rows(psi: &[C64], rows: usize) -> f64 {
    let cols = psi.len() / rows;
    let m = MatRef::from_row_major_slice(psi, rows, cols);
    let (k, g) = if rows <= cols {
        let mut g = Mat::<C64>::zeros(rows, rows);
        matmul(g.as_mut(), Accum::Replace, m, m.adjoint(), C64::new(1.0, 0.0), Par::Seq);
        (rows, g)
    } else {
        let mut g = Mat::<C64>::zeros(cols, cols);
        matmul(g.as_mut(), Accum::Replace, m.adjoint(), m, C64::new(1.0, 0.0), Par::Seq);
        (cols, g)
    };
    let mut s = 0.0;
    for j in 0..k {
        for i in 0..k {
            s += g[(i, j)].norm_sqr();
        }
    }
    let _ = ZERO;
    s
}
