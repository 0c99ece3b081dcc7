//! Haar-averaged overlap recurrences for the vertical influence state and
//! the decay of the normalised overlap ratio `rbar_t`.
//!
//! Tables are filled in log space so `t` in the thousands is safe at any `d`.

use crate::error::{domain, Result};
use crate::fit::{self, LineFit};
use serde::Serialize;

fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn q(d: usize) -> f64 {
    let d2 = (d * d) as f64;
    d2 / (d2 + 1.0)
}

/// Natural logs of `A[x][y]` (`y <= x + 1`) and `B[x][y]` (`y <= x`).
#[derive(Clone, Debug)]
pub struct RecurrenceTable {
    pub d: usize,
    pub n: usize,
    ln_a: Vec<Vec<f64>>,
    ln_b: Vec<Vec<f64>>,
}

impl RecurrenceTable {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d < 2 {
            return domain("local dimension must be at least 2");
        }
        let lq = q(d).ln();
        let lg = (2.0 * q(d)).ln();
        let mut ln_a: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        for x in 0..=n {
            let mut row = vec![f64::NEG_INFINITY; x + 2];
            row[0] = lg * x as f64;
            for y in 1..=x + 1 {
                let left = if x == 0 {
                    f64::NEG_INFINITY
                } else if y == x + 1 {
                    ln_a[x - 1][y - 1]
                } else {
                    ln_a[x - 1][y]
                };
                row[y] = lq + logaddexp(left, row[y - 1]);
            }
            ln_a.push(row);
        }
        let mut ln_b: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        for x in 0..=n {
            let mut row = vec![0.0; x + 1];
            for y in 1..=x {
                let left = if y == x { ln_b[x - 1][y - 1] } else { ln_b[x - 1][y] };
                row[y] = lq + logaddexp(left, row[y - 1]);
            }
            ln_b.push(row);
        }
        Ok(Self { d, n, ln_a, ln_b })
    }

    pub fn ln_a(&self, x: usize, y: usize) -> Result<f64> {
        if x > self.n || y > x + 1 {
            return domain(format!("A index ({x}, {y}) outside y <= x + 1, x <= {}", self.n));
        }
        Ok(self.ln_a[x][y])
    }

    pub fn ln_b(&self, x: usize, y: usize) -> Result<f64> {
        if x > self.n || y > x {
            return domain(format!("B index ({x}, {y}) outside y <= x, x <= {}", self.n));
        }
        Ok(self.ln_b[x][y])
    }

    /// `ln A - (x + y) ln(2 d^2 / (d^2 + 1))`.
    pub fn ln_a_normalized(&self, x: usize, y: usize) -> Result<f64> {
        Ok(self.ln_a(x, y)? - (x + y) as f64 * (2.0 * q(self.d)).ln())
    }

    pub fn ln_b_normalized(&self, x: usize, y: usize) -> Result<f64> {
        Ok(self.ln_b(x, y)? - (x + y) as f64 * (2.0 * q(self.d)).ln())
    }

    /// `ln rbar` for the split `t = t1 + t2`.
    pub fn ln_rbar(&self, t: usize, t1: usize) -> Result<f64> {
        if t1 == 0 || t1 >= t {
            return domain(format!("split {t1} must satisfy 1 <= t1 < t = {t}"));
        }
        let t2 = t - t1;
        Ok(self.ln_b(t1, t1)? + 0.5 * self.ln_a(t2, t2 + 1)? - 0.5 * (self.ln_a(t, t + 1)? + self.ln_a(t1, t1 + 1)?))
    }

    pub fn rbar(&self, t: usize, t1: usize) -> Result<f64> {
        Ok(self.ln_rbar(t, t1)?.exp())
    }

    /// Log-log fit of the half-split `rbar_t`, `t1 = floor(t / 2)`, over `lo..=hi`.
    pub fn fit_decay(&self, lo: usize, hi: usize) -> Result<RbarFit> {
        if lo < 2 || hi <= lo {
            return domain(format!("fit window [{lo}, {hi}] is empty"));
        }
        let mut xs = Vec::with_capacity(hi - lo + 1);
        let mut ys = Vec::with_capacity(hi - lo + 1);
        for t in lo..=hi {
            xs.push((t as f64).ln());
            ys.push(self.ln_rbar(t, t / 2)?);
        }
        let LineFit { slope, intercept } = fit::line(&xs, &ys)?;
        Ok(RbarFit { d: self.d, slope, intercept, window: (lo, hi) })
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RbarFit {
    pub d: usize,
    pub slope: f64,
    pub intercept: f64,
    pub window: (usize, usize),
}

/// `ln A[x][y]`.
#[allow(non_snake_case)]
pub fn calA(x: usize, y: usize, d: usize) -> Result<f64> {
    RecurrenceTable::new(d, x)?.ln_a(x, y)
}

/// `ln B[x][y]`.
#[allow(non_snake_case)]
pub fn calB(x: usize, y: usize, d: usize) -> Result<f64> {
    RecurrenceTable::new(d, x)?.ln_b(x, y)
}

pub fn rbar(t: usize, t1: usize, d: usize) -> Result<f64> {
    RecurrenceTable::new(d, t)?.rbar(t, t1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PathFamily {
    /// Paths from `(n, 0)` to `(x, y)` below `y = x + 3`.
    A,
    /// Paths from `(n, 1)` to `(x, y)` below `y = x + 2`.
    B,
}

/// Binomial coefficient, zero when `k < 0` or `k > n`.
pub fn binomial(n: i64, k: i64) -> u128 {
    if k < 0 || n < 0 || k > n {
        return 0;
    }
    let k = k.min(n - k) as u128;
    let n = n as u128;
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Closed forms `a_n` and `b_n` for the lattice-path counts.
pub fn path_count_oracle(x: usize, y: usize, n: i64, which: PathFamily) -> Result<u128> {
    if x + y > 60 {
        return domain("path counts are exact only for x + y <= 60");
    }
    let bound = match which {
        PathFamily::A => x + 1,
        PathFamily::B => x,
    };
    if y > bound {
        return domain(format!("endpoint ({x}, {y}) lies outside the recurrence domain"));
    }
    let (x, y) = (x as i64, y as i64);
    if n < 0 || n > x {
        return Ok(0);
    }
    Ok(match which {
        PathFamily::A => {
            if n <= y - 3 {
                binomial(x + y - n, x - n) - binomial(x + y - n, x + 3)
            } else {
                binomial(x + y - n, y)
            }
        }
        PathFamily::B => {
            if n <= y - 2 {
                binomial(x + y - n - 1, y - 1) - binomial(x + y - n - 1, x + 1)
            } else {
                binomial(x + y - n - 1, y - 1)
            }
        }
    })
}

/// Counts the same paths by walking every one of them.
pub fn enumerate_paths(x: usize, y: usize, n: i64, which: PathFamily) -> u128 {
    let (start_y, gap) = match which {
        PathFamily::A => (0i64, 2i64),
        PathFamily::B => (1, 1),
    };
    fn walk(a: i64, b: i64, x: i64, y: i64, gap: i64) -> u128 {
        if b > a + gap {
            return 0;
        }
        if a == x && b == y {
            return 1;
        }
        let mut c = 0;
        if a < x {
            c += walk(a + 1, b, x, y, gap);
        }
        if b < y {
            c += walk(a, b + 1, x, y, gap);
        }
        c
    }
    if n < 0 || n > x as i64 || (y as i64) < start_y {
        return 0;
    }
    walk(n, start_y, x as i64, y as i64, gap)
}

/// Averaged diagrams evaluated path by path.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AveragedDiagrams {
    /// `A[t][t + 1]`.
    pub a: f64,
    /// `B[t][t]`.
    pub b: f64,
}

/// Sums the domain-wall histories of the two averaged diagrams one at a time.
///
/// Every mixed gate contributes `d / (d^2 + 1)` per branch and every closed
/// leg a factor `d`, so a history of `x + y` steps carries `q^(x+y)` times the
/// boundary weights: `2` per bottom link of `A`, `1 + 1/d^2` per bottom link
/// of `B` and per step along the top boundary of either.
pub fn averaged_contraction_oracle(t: usize, d: usize) -> Result<AveragedDiagrams> {
    if t > 8 {
        return domain("the path-by-path oracle is limited to t <= 8");
    }
    if d < 2 {
        return domain("local dimension must be at least 2");
    }
    let d2 = (d * d) as f64;
    let top = 1.0 + 1.0 / d2;

    // A: domain y <= x + 1, diagonal steps start on y = x + 1.
    fn walk_a(a: usize, b: usize, x: usize, y: usize, top: f64) -> f64 {
        if a == x && b == y {
            return 1.0;
        }
        let mut s = 0.0;
        if a < x {
            let w = if b == 0 { 2.0 } else { 1.0 };
            s += w * walk_a(a + 1, b, x, y, top);
        }
        if b < y && b < a + 1 {
            s += walk_a(a, b + 1, x, y, top);
        }
        if b == a + 1 && a < x && b < y {
            s += top * walk_a(a + 1, b + 1, x, y, top);
        }
        s
    }
    // B: domain y <= x, diagonal steps start on y = x.
    fn walk_b(a: usize, b: usize, x: usize, y: usize, top: f64) -> f64 {
        if a == x && b == y {
            return 1.0;
        }
        let mut s = 0.0;
        if a < x {
            let w = if b == 0 { top } else { 1.0 };
            s += w * walk_b(a + 1, b, x, y, top);
        }
        if b < y && b < a {
            s += walk_b(a, b + 1, x, y, top);
        }
        if b == a && a < x && b < y {
            s += top * walk_b(a + 1, b + 1, x, y, top);
        }
        s
    }
    let qd = q(d);
    Ok(AveragedDiagrams {
        a: walk_a(0, 0, t, t + 1, top) * qd.powi(2 * t as i32 + 1),
        b: walk_b(0, 0, t, t, top) * qd.powi(2 * t as i32),
    })
}

/// Exact Haar average of `<L|L>` for a pure product initial state, from the
/// two-replica Weingarten calculus in the pairing basis `{identity, swap}`.
///
/// Legs carry two-component coefficient vectors; the sweep order follows the
/// influence engine, so this is an independent check on both ends.
pub fn averaged_norm(jumps: &[i8], d: usize) -> Result<f64> {
    let n = jumps.len();
    if n == 0 || n > 20 {
        return domain("averaged norm needs 1 <= path length <= 20");
    }
    if d < 2 {
        return domain("local dimension must be at least 2");
    }
    let df = d as f64;
    let qq = df * df;
    let wg = [[1.0 / (qq * qq - 1.0), -1.0 / (qq * (qq * qq - 1.0))], [-1.0 / (qq * (qq * qq - 1.0)), 1.0 / (qq * qq - 1.0)]];
    let gram = [[qq, df], [df, qq]];
    // g[tl][tr][b]: both bottom legs carry the same pairing b.
    let mut g = [[[0.0; 2]; 2]; 2];
    for (tl, gtl) in g.iter_mut().enumerate() {
        for (tr, gtr) in gtl.iter_mut().enumerate() {
            for (b, v) in gtr.iter_mut().enumerate() {
                *v = (0..2).map(|s| gram[tl][s] * gram[tr][s] * wg[s][b]).sum();
            }
        }
    }
    let cap = [1.0 / df, 0.0];
    let mut edge = [[0.0; 2]; 2];
    for (e, row) in edge.iter_mut().enumerate() {
        for (w, v) in row.iter_mut().enumerate() {
            // new[e] on the 0th leg from the bottom-right output of the top gate.
            *v = if w == e { (0..2).flat_map(|a| (0..2).map(move |b| (a, b))).map(|(a, b)| cap[a] * cap[b] * g[a][b][w]).sum() } else { 0.0 };
        }
    }
    let mut two = [0.0f64; 16];
    for e in 0..2 {
        for f in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    // new (tr = e, br = f) from old (tl = a, bl = b); g is diagonal in the bottom pair.
                    two[(e * 2 + f) * 4 + a * 2 + b] = if b == f { g[a][e][b] } else { 0.0 };
                }
            }
        }
    }
    let init = [qq; 4];
    let size = 1usize << n;
    let mut psi = vec![0.0f64; size];
    for (i, p) in psi.iter_mut().enumerate() {
        *p = (0..n)
            .map(|j| {
                let bit = (i >> (n - 1 - j)) & 1;
                if jumps[j] > 0 {
                    [df, 1.0][bit]
                } else {
                    [1.0 / df, 0.0][bit]
                }
            })
            .product();
    }
    let order = crate::influence::node_order(jumps);
    let mut buf = vec![0.0f64; size];
    for _ in 0..n {
        for &k in &order {
            if k == 0 {
                apply_real(&mut psi, &mut buf, n, 0, 1, &edge.concat());
            } else if k == n {
                apply_real(&mut psi, &mut buf, n, n - 1, 1, &init);
            } else {
                apply_real(&mut psi, &mut buf, n, k - 1, 2, &two);
            }
        }
    }
    let close: Vec<[f64; 2]> = jumps.iter().map(|&j| if j > 0 { [0.0, 1.0] } else { [df, qq] }).collect();
    Ok(psi
        .iter()
        .enumerate()
        .map(|(i, p)| p * (0..n).map(|j| close[j][(i >> (n - 1 - j)) & 1]).product::<f64>())
        .sum())
}

fn apply_real(psi: &mut [f64], buf: &mut [f64], n: usize, pos: usize, width: usize, m: &[f64]) {
    let a = 1usize << width;
    let inner = 1usize << (n - pos - width);
    for (blk, out) in psi.chunks_exact_mut(a * inner).zip(buf.chunks_exact_mut(a * inner)) {
        out.fill(0.0);
        for e in 0..a {
            for w in 0..a {
                let c = m[e * a + w];
                if c != 0.0 {
                    for r in 0..inner {
                        out[e * inner + r] += c * blk[w * inner + r];
                    }
                }
            }
        }
        blk.copy_from_slice(out);
    }
}
