//! Brute-force references. Nothing here shares code with the sweep engine.

use super::{nodes, Circuit, CircuitSpec, Local};
use crate::error::{domain, Error, Result};
use crate::linalg::{CMat, C64, ZERO};

/// Full state vector on qudits `lo .. lo + n`, qudit `lo` most significant.
#[derive(Clone, Debug)]
pub struct RingState {
    pub d: usize,
    pub lo: i64,
    pub n: usize,
    pub periodic: bool,
    pub psi: Vec<C64>,
}

impl RingState {
    /// Pair-product initial state; `lo` must be even and `n` even.
    pub fn new(circ: &Circuit, lo: i64, n: usize, periodic: bool, cap: u128) -> Result<Self> {
        if lo.rem_euclid(2) != 0 || n % 2 != 0 || n == 0 {
            return domain(format!("ring needs even start and even size, got lo = {lo}, n = {n}"));
        }
        let d = circ.d();
        let required = (d as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        if required > cap {
            return Err(Error::Size { what: "oracle state vector".into(), required, cap });
        }
        let m = circ.initial.matrix();
        let s = 1.0 / (d as f64).sqrt();
        let mut psi = vec![C64::new(1.0, 0.0)];
        for _ in 0..n / 2 {
            let mut next = Vec::with_capacity(psi.len() * d * d);
            for &p in &psi {
                for i in 0..d {
                    for j in 0..d {
                        next.push(p * m[(i, j)] * s);
                    }
                }
            }
            psi = next;
        }
        Ok(Self { d, lo, n, periodic, psi })
    }

    fn stride(&self, i: usize) -> usize {
        self.d.pow((self.n - 1 - i) as u32)
    }

    /// Applies a `d^2 x d^2` matrix to sites `i1, i2` (vector positions).
    fn apply2(&mut self, i1: usize, i2: usize, u: &CMat) {
        let d = self.d;
        let (s1, s2) = (self.stride(i1), self.stride(i2));
        let mut out = self.psi.clone();
        for idx in 0..self.psi.len() {
            let x1 = (idx / s1) % d;
            let x2 = (idx / s2) % d;
            if x1 != 0 || x2 != 0 {
                continue;
            }
            for k in 0..d {
                for l in 0..d {
                    let mut acc = ZERO;
                    for i in 0..d {
                        for j in 0..d {
                            acc += u[(k * d + l, i * d + j)] * self.psi[idx + i * s1 + j * s2];
                        }
                    }
                    out[idx + k * s1 + l * s2] = acc;
                }
            }
        }
        self.psi = out;
    }

    /// Applies a one-site operator at qudit `q`.
    pub fn apply1(&mut self, q: i64, o: &CMat) {
        let d = self.d;
        let i = (q - self.lo).rem_euclid(self.n as i64) as usize;
        let s = self.stride(i);
        let mut out = vec![ZERO; self.psi.len()];
        for idx in 0..self.psi.len() {
            let x = (idx / s) % d;
            let base = idx - x * s;
            for k in 0..d {
                out[base + k * s] += o[(k, x)] * self.psi[idx];
            }
        }
        self.psi = out;
    }

    /// Layer `l` of the brickwork, gates keyed by their left qudit.
    pub fn layer(&mut self, circ: &Circuit, l: i64) {
        let n = self.n as i64;
        for i in 0..n {
            let b = self.lo + i;
            if (b - l).rem_euclid(2) != 0 {
                continue;
            }
            if i + 1 < n {
                self.apply2(i as usize, (i + 1) as usize, circ.gates.gate(b, l).matrix());
            } else if self.periodic {
                self.apply2((n - 1) as usize, 0, circ.gates.gate(b, l).matrix());
            }
        }
    }

    pub fn evolve(&mut self, circ: &Circuit, from: i64, to: i64) {
        for l in from + 1..=to {
            self.layer(circ, l);
        }
    }

    pub fn inner(&self, other: &RingState) -> C64 {
        self.psi.iter().zip(&other.psi).map(|(a, b)| a.conj() * b).sum()
    }

    /// Purity of the qudits `from..=to` (inside the window, no wrap).
    pub fn block_purity(&self, from: i64, to: i64) -> f64 {
        let d = self.d;
        let (i0, i1) = ((from - self.lo) as usize, (to - self.lo) as usize);
        let outer = d.pow(i0 as u32);
        let block = d.pow((i1 - i0 + 1) as u32);
        let inner = d.pow((self.n - 1 - i1) as u32);
        let mut rho = vec![ZERO; block * block];
        for o in 0..outer {
            for r in 0..inner {
                for a in 0..block {
                    let x = self.psi[(o * block + a) * inner + r];
                    for b in 0..block {
                        rho[a * block + b] += x * self.psi[(o * block + b) * inner + r].conj();
                    }
                }
            }
        }
        rho.iter().map(|z| z.norm_sqr()).sum()
    }
}

fn even_floor(q: i64) -> i64 {
    q - q.rem_euclid(2)
}

/// `tr[rho_0 a(t1) b(t2)] = <U a^dagger psi(t1) | b psi(t2)>` on a periodic ring
/// wide enough that the wrap is causally invisible.
pub fn ring_correlator(circ: &Circuit, a: &Local, b: &Local, cap: u128) -> Result<C64> {
    if a.t > b.t {
        return domain("need t1 <= t2".to_string());
    }
    let reach = 2 * b.t as i64 + 2;
    let lo = even_floor(a.qudit.min(b.qudit) - reach);
    let hi = a.qudit.max(b.qudit) + reach;
    let n = ((hi - lo + 2) / 2 * 2) as usize;
    let mut psi = RingState::new(circ, lo, n, true, cap)?;
    let (l1, l2) = (2 * a.t as i64, 2 * b.t as i64);
    psi.evolve(circ, 0, l1);
    let mut w = psi.clone();
    w.apply1(a.qudit, &a.op.adjoint().to_owned());
    w.evolve(circ, l1, l2);
    psi.evolve(circ, l1, l2);
    psi.apply1(b.qudit, b.op);
    Ok(w.inner(&psi))
}

/// Purity of the block `from..=to` of a ring started at `lo` with `n` qudits, after `tau` layers.
pub fn ring_purity(circ: &Circuit, tau: usize, lo: i64, n: usize, from: i64, to: i64, cap: u128) -> Result<f64> {
    let mut psi = RingState::new(circ, lo, n, true, cap)?;
    psi.evolve(circ, 0, tau as i64);
    Ok(psi.block_purity(from, to))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Wire(i64),
    Port(usize),
}

/// Forward-sheet amplitude with labelled slots, first slot most significant.
struct Sheet {
    d: usize,
    slots: Vec<Slot>,
    amp: Vec<C64>,
}

impl Sheet {
    fn find(&self, s: Slot) -> usize {
        self.slots.iter().position(|&x| x == s).unwrap_or_else(|| panic!("missing slot {s:?}"))
    }

    fn stride(&self, i: usize) -> usize {
        self.d.pow((self.slots.len() - 1 - i) as u32)
    }

    fn push_pair(&mut self, a: Slot, b: Slot, t: &[C64]) {
        let dd = self.d * self.d;
        let mut next = Vec::with_capacity(self.amp.len() * dd);
        for &x in &self.amp {
            next.extend(t.iter().map(|&y| x * y));
        }
        self.amp = next;
        self.slots.push(a);
        self.slots.push(b);
    }

    fn gate(&mut self, q: i64, u: &CMat) {
        let d = self.d;
        let (i1, i2) = (self.find(Slot::Wire(q)), self.find(Slot::Wire(q + 1)));
        let (s1, s2) = (self.stride(i1), self.stride(i2));
        let mut out = self.amp.clone();
        for idx in 0..self.amp.len() {
            if (idx / s1) % d != 0 || (idx / s2) % d != 0 {
                continue;
            }
            for k in 0..d {
                for l in 0..d {
                    let mut acc = ZERO;
                    for i in 0..d {
                        for j in 0..d {
                            acc += u[(k * d + l, i * d + j)] * self.amp[idx + i * s1 + j * s2];
                        }
                    }
                    out[idx + k * s1 + l * s2] = acc;
                }
            }
        }
        self.amp = out;
    }
}

/// `<L_gamma|` from an explicit simulation of the region left of the path.
///
/// The region's forward sheet is evolved as a process: a leg leaving the region
/// becomes an output port, a leg entering it starts a fresh wire maximally
/// correlated with an input port. The folded state is then
/// `d^(-T/2) sum_k F[a, k] conj(F[a', k])` over the `T` wires left at the top.
pub fn influence_oracle(spec: &CircuitSpec, margin: i64, cap: u128) -> Result<Vec<C64>> {
    let circ = &spec.circuit;
    let d = circ.d();
    let jumps = spec.path.jumps();
    let n = jumps.len();
    let bs = nodes(jumps, spec.anchor);
    let qmin = even_floor(bs.iter().min().unwrap() - 2 * n as i64 - 2 - margin);
    let m = circ.initial.matrix();
    let pair: Vec<C64> = (0..d * d).map(|k| m[(k / d, k % d)]).collect();
    let mut delta = vec![ZERO; d * d];
    for k in 0..d {
        delta[k * d + k] = C64::new(1.0, 0.0);
    }
    let mut sh = Sheet { d, slots: Vec::new(), amp: vec![C64::new(1.0, 0.0)] };
    let mut b = qmin;
    while b <= bs[n] - 2 {
        sh.push_pair(Slot::Wire(b), Slot::Wire(b + 1), &pair);
        b += 2;
    }
    for tau in 0..n {
        let j = n - tau;
        if jumps[j - 1] > 0 {
            let i = sh.find(Slot::Wire(bs[j - 1]));
            sh.slots[i] = Slot::Port(j);
        } else {
            sh.push_pair(Slot::Wire(bs[j]), Slot::Port(j), &delta);
        }
        let l = tau as i64 + 1;
        let edge = bs[n - l as usize] - 2;
        let mut g = qmin + (l - qmin).rem_euclid(2);
        while g <= edge {
            sh.gate(g, circ.gates.gate(g, l).matrix());
            g += 2;
        }
        let need = (d as u128).checked_pow(sh.slots.len() as u32).unwrap_or(u128::MAX);
        if need > cap {
            return Err(Error::Size { what: "influence oracle sheet".into(), required: need, cap });
        }
    }
    // Reorder into (ports 1..n) x (top wires).
    let ports: Vec<usize> = (1..=n).map(|j| sh.find(Slot::Port(j))).collect();
    let tops: Vec<usize> = (0..sh.slots.len()).filter(|&i| matches!(sh.slots[i], Slot::Wire(_))).collect();
    let np = d.pow(n as u32);
    let nt = d.pow(tops.len() as u32);
    let strides: Vec<usize> = (0..sh.slots.len()).map(|i| sh.stride(i)).collect();
    let digit_sum = |sel: &[usize], mut v: usize| {
        let mut off = 0;
        for &i in sel.iter().rev() {
            off += (v % d) * strides[i];
            v /= d;
        }
        off
    };
    let mut f = vec![ZERO; np * nt];
    for p in 0..np {
        let po = digit_sum(&ports, p);
        for t in 0..nt {
            f[p * nt + t] = sh.amp[po + digit_sum(&tops, t)];
        }
    }
    let scale = (d as f64).powf(-(tops.len() as f64) / 2.0);
    let dd = d * d;
    let mut out = vec![ZERO; dd.pow(n as u32)];
    for a in 0..np {
        for ap in 0..np {
            let s: C64 = (0..nt).map(|t| f[a * nt + t] * f[ap * nt + t].conj()).sum();
            let (mut x, mut y, mut idx, mut w) = (a, ap, 0usize, 1usize);
            for _ in 0..n {
                idx += ((x % d) * d + (y % d)) * w;
                x /= d;
                y /= d;
                w *= dd;
            }
            out[idx] = s * scale;
        }
    }
    Ok(out)
}
