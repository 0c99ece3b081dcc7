//! Dense contraction of folded brickwork circuits along time-like paths.
//!
//! Lattice conventions shared by everything in this module:
//!
//! * gate `(b, l)` acts on qudits `(b, b + 1)` at layer `l >= 1` with `b = l (mod 2)`;
//!   layer 1 is applied first;
//! * the initial state pairs qudits `(2k, 2k + 1)`;
//! * a path with jumps `g_1 .. g_n` anchored at `b_top` visits the nodes
//!   `b_j = b_top + g_1 + .. + g_j`; node `j < n` is the gate `(b_j, n - j)` and
//!   node `n` is the initial pair at `b_n`. The anchor needs `b_top = n (mod 2)`;
//! * leg `j` (1-based, leg 1 at the top) joins node `j - 1` and node `j`.
//!   Folded legs are flattened as `a*d + a'` and leg 1 is the most significant digit.
//!
//! A qudit `q` sits at the half-integer position `x = q / 2`.

mod oracle;
mod purity;
mod sweep;

pub use oracle::{influence_oracle, ring_correlator, ring_purity, RingState};
pub use purity::{chain_purity, spatial_purity, spatial_purity_window};
pub use sweep::{apply as apply_op, node_order, Op};

use crate::error::{domain, Error, Result};
use crate::gates::{dressed_gate, fold, fold_unchecked, haar_gate, loop_state, FoldedGate, LocalGate};
use crate::geometry::{InitialStateMatrix, Path};
use crate::linalg::{self, CMat, C64, ONE, ZERO};
use crate::rng::{substream, Role};
use serde::{Deserialize, Serialize};
use std::borrow::Cow;
use std::fmt;
use std::sync::Arc;

/// Default cap on the number of amplitudes of any dense vector.
pub const DEFAULT_MAX_AMPLITUDES: u128 = 1 << 28;

type GateFn = dyn Fn(i64, i64) -> LocalGate + Send + Sync;

/// Where the gate at `(b, l)` comes from.
#[derive(Clone)]
pub enum GateField {
    /// One gate everywhere.
    Uniform { gate: LocalGate, folded: Arc<FoldedGate> },
    /// Independent Haar gates, one substream per `(b, l)`.
    Haar { d: usize, seed: u64 },
    /// `base` with independent Haar one-site dressings per `(b, l)`.
    DressedDu { base: LocalGate, seed: u64 },
    /// Arbitrary user map. `dual_unitary` is trusted, not checked.
    Custom { d: usize, f: Arc<GateFn>, dual_unitary: bool },
}

impl fmt::Debug for GateField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateField::Uniform { gate, .. } => write!(f, "Uniform(d={})", gate.d()),
            GateField::Haar { d, seed } => write!(f, "Haar(d={d}, seed={seed})"),
            GateField::DressedDu { base, seed } => write!(f, "DressedDu(d={}, seed={seed})", base.d()),
            GateField::Custom { d, .. } => write!(f, "Custom(d={d})"),
        }
    }
}

impl GateField {
    pub fn uniform(gate: LocalGate) -> Result<Self> {
        let folded = Arc::new(fold(&gate)?);
        Ok(GateField::Uniform { gate, folded })
    }

    pub fn haar(d: usize, seed: u64) -> Self {
        GateField::Haar { d, seed }
    }

    pub fn dressed_du(base: LocalGate, seed: u64) -> Result<Self> {
        let base = base.validated()?;
        Ok(GateField::DressedDu { base, seed })
    }

    pub fn custom(d: usize, dual_unitary: bool, f: impl Fn(i64, i64) -> LocalGate + Send + Sync + 'static) -> Self {
        GateField::Custom { d, f: Arc::new(f), dual_unitary }
    }

    pub fn d(&self) -> usize {
        match self {
            GateField::Uniform { gate, .. } => gate.d(),
            GateField::Haar { d, .. } | GateField::Custom { d, .. } => *d,
            GateField::DressedDu { base, .. } => base.d(),
        }
    }

    pub fn gate(&self, b: i64, l: i64) -> LocalGate {
        match self {
            GateField::Uniform { gate, .. } => gate.clone(),
            GateField::Haar { d, seed } => haar_gate(*d, &mut substream(*seed, b, l, Role::Gate)),
            GateField::DressedDu { base, seed } => {
                let d = base.d();
                let one = |role| linalg::haar_unitary(d, &mut substream(*seed, b, l, role));
                dressed_gate(
                    base,
                    &one(Role::DressUPlus),
                    &one(Role::DressUMinus),
                    &one(Role::DressVPlus),
                    &one(Role::DressVMinus),
                )
                .expect("haar dressings are unitary")
            }
            GateField::Custom { f, .. } => f(b, l),
        }
    }

    pub fn folded(&self, b: i64, l: i64) -> Cow<'_, FoldedGate> {
        match self {
            GateField::Uniform { folded, .. } => Cow::Borrowed(folded.as_ref()),
            _ => Cow::Owned(fold_unchecked(&self.gate(b, l))),
        }
    }

    /// Whether every gate of the field is dual-unitary.
    pub fn is_dual_unitary(&self) -> bool {
        match self {
            GateField::Uniform { gate, .. } => crate::gates::gate_properties(gate).is_dual_unitary(),
            GateField::DressedDu { base, .. } => crate::gates::gate_properties(base).is_dual_unitary(),
            GateField::Haar { .. } => false,
            GateField::Custom { dual_unitary, .. } => *dual_unitary,
        }
    }

    /// The same circuit seen in a mirror `q -> 1 - q`: gate `(b, l)` becomes
    /// `S U(-b, l) S`.
    pub fn reflected(&self) -> GateField {
        let me = self.clone();
        if let GateField::Uniform { gate, .. } = self {
            return GateField::uniform(gate.reflect()).expect("reflection keeps unitarity");
        }
        let du = self.is_dual_unitary();
        GateField::custom(self.d(), du, move |b, l| me.gate(-b, l).reflect())
    }
}

/// Gates plus initial state: everything except where to look.
#[derive(Clone, Debug)]
pub struct Circuit {
    pub gates: GateField,
    pub initial: InitialStateMatrix,
}

impl Circuit {
    pub fn new(gates: GateField, initial: InitialStateMatrix) -> Result<Self> {
        if gates.d() != initial.d() {
            return domain(format!("gate d = {} but initial state d = {}", gates.d(), initial.d()));
        }
        Ok(Self { gates, initial })
    }

    pub fn d(&self) -> usize {
        self.gates.d()
    }

    /// Mirror image: reflected gates and transposed pair matrix.
    pub fn reflected(&self) -> Circuit {
        Circuit { gates: self.gates.reflected(), initial: self.initial.transpose() }
    }

    /// `I[(i i'), (j j')] = m_ij conj(m_i'j')`, flattened row-major.
    fn folded_initial(&self) -> Vec<C64> {
        let d = self.d();
        let m = self.initial.matrix();
        let dd = d * d;
        let mut out = vec![ZERO; dd * dd];
        for i in 0..d {
            for ip in 0..d {
                for j in 0..d {
                    for jp in 0..d {
                        out[(i * d + ip) * dd + j * d + jp] = m[(i, j)] * m[(ip, jp)].conj();
                    }
                }
            }
        }
        out
    }
}

/// A circuit observed along a path anchored at `anchor`.
#[derive(Clone, Debug)]
pub struct CircuitSpec {
    pub circuit: Circuit,
    pub path: Path,
    pub anchor: i64,
    pub max_amplitudes: u128,
}

impl CircuitSpec {
    /// Uses the smallest nonnegative admissible anchor.
    pub fn new(circuit: Circuit, path: Path) -> Self {
        let anchor = (path.len() % 2) as i64;
        Self { circuit, path, anchor, max_amplitudes: DEFAULT_MAX_AMPLITUDES }
    }

    pub fn with_anchor(mut self, anchor: i64) -> Result<Self> {
        if (anchor - self.path.len() as i64).rem_euclid(2) != 0 {
            return domain(format!("anchor {anchor} must have the parity of the path length {}", self.path.len()));
        }
        self.anchor = anchor;
        Ok(self)
    }

    pub fn with_cap(mut self, max_amplitudes: u128) -> Self {
        self.max_amplitudes = max_amplitudes;
        self
    }

    pub fn d(&self) -> usize {
        self.circuit.d()
    }

    /// Full time steps covered by the path.
    pub fn t(&self) -> f64 {
        self.path.len() as f64 / 2.0
    }

    fn check_anchor(&self) -> Result<()> {
        if (self.anchor - self.path.len() as i64).rem_euclid(2) != 0 {
            return domain(format!("anchor {} has the wrong parity for |path| = {}", self.anchor, self.path.len()));
        }
        Ok(())
    }

    fn check_size(&self, what: &str) -> Result<()> {
        check_size(what, self.d(), self.path.len(), self.max_amplitudes)
    }
}

pub(crate) fn check_size(what: &str, d: usize, legs: usize, cap: u128) -> Result<()> {
    let required = ((d * d) as u128).checked_pow(legs as u32).unwrap_or(u128::MAX);
    if required > cap {
        return Err(Error::Size { what: what.to_string(), required, cap });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// `<L|` or `|R>` as a dense vector over the folded legs of its path.
#[derive(Clone, Debug)]
pub struct InfluenceState {
    pub path: Path,
    pub d: usize,
    pub side: Side,
    pub anchor: i64,
    pub seed: Option<u64>,
    pub amplitudes: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    path: String,
    d: usize,
    t: f64,
    side: Side,
    anchor: i64,
    seed: Option<u64>,
    len: usize,
}

impl InfluenceState {
    pub fn legs(&self) -> usize {
        self.path.len()
    }

    /// Local dimension of one folded leg.
    pub fn leg_dim(&self) -> usize {
        self.d * self.d
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> InfluenceState {
        let n = self.norm_sq().sqrt();
        let mut out = self.clone();
        if n > 0.0 {
            out.amplitudes.iter_mut().for_each(|a| *a /= n);
        }
        out
    }

    /// The amplitudes reshaped with the top `k` legs as rows.
    pub fn matrix(&self, k: usize) -> CMat {
        let rows = self.leg_dim().pow(k as u32);
        let cols = self.amplitudes.len() / rows;
        linalg::from_row_major(&self.amplitudes, rows, cols)
    }

    /// Max deviation from the product of loop states.
    pub fn product_defect(&self) -> f64 {
        let lp = sweep::product_state(&loop_state(self.d), self.legs());
        self.amplitudes.iter().zip(&lp).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Writes `<stem>.bin` (little-endian interleaved re, im) and `<stem>.json`.
    pub fn export(&self, stem: &std::path::Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.amplitudes.len() * 16);
        for a in &self.amplitudes {
            bytes.extend_from_slice(&a.re.to_le_bytes());
            bytes.extend_from_slice(&a.im.to_le_bytes());
        }
        std::fs::write(stem.with_extension("bin"), bytes)?;
        let car = Sidecar {
            path: self.path.to_string(),
            d: self.d,
            t: self.path.len() as f64 / 2.0,
            side: self.side,
            anchor: self.anchor,
            seed: self.seed,
            len: self.amplitudes.len(),
        };
        std::fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&car)?)?;
        Ok(())
    }

    pub fn import(stem: &std::path::Path) -> Result<InfluenceState> {
        let car: Sidecar = serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)?;
        let bytes = std::fs::read(stem.with_extension("bin"))?;
        if bytes.len() != car.len * 16 {
            return Err(Error::Validation(format!("expected {} bytes, found {}", car.len * 16, bytes.len())));
        }
        let amplitudes = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                C64::new(re, im)
            })
            .collect();
        Ok(InfluenceState {
            path: car.path.parse()?,
            d: car.d,
            side: car.side,
            anchor: car.anchor,
            seed: car.seed,
            amplitudes,
        })
    }
}

/// What closes the top of a column and what sits on its legs.
#[derive(Clone, Debug, Default)]
pub(crate) struct Decor {
    /// Replacement for the loop on the top-left and top-right output of node 0.
    pub cap_left: Option<Vec<C64>>,
    pub cap_right: Option<Vec<C64>>,
    /// Operator inserted on leg `j` (1-based).
    pub insert: Option<(usize, CMat)>,
}

/// Folded cap for a top operator: `c[(k, k')] = o[k', k] / sqrt(d)`.
pub(crate) fn operator_cap(o: &CMat) -> Vec<C64> {
    let d = o.nrows();
    let s = 1.0 / (d as f64).sqrt();
    let mut c = vec![ZERO; d * d];
    for k in 0..d {
        for kp in 0..d {
            c[k * d + kp] = o[(kp, k)] * s;
        }
    }
    c
}

/// Nodes `b_0 .. b_n` of a path anchored at `top`.
pub(crate) fn nodes(jumps: &[i8], top: i64) -> Vec<i64> {
    let mut b = Vec::with_capacity(jumps.len() + 1);
    b.push(top);
    for &g in jumps {
        b.push(b.last().unwrap() + g as i64);
    }
    b
}

/// The column anchored at `top` as a sequence of local maps.
pub(crate) fn column_ops(circ: &Circuit, init: &[C64], jumps: &[i8], top: i64, decor: &Decor) -> Vec<Op> {
    let d = circ.d();
    let dd = d * d;
    let n = jumps.len();
    let bs = nodes(jumps, top);
    let lp = loop_state(d);
    let cap_l = decor.cap_left.as_deref().unwrap_or(&lp);
    let cap_r = decor.cap_right.as_deref().unwrap_or(&lp);
    let mut per_node: Vec<Op> = Vec::with_capacity(n + 1);
    for (j, &b) in bs.iter().enumerate().take(n) {
        let w = circ.gates.folded(b, (n - j) as i64);
        let w = w.raw();
        let at = |tl: usize, tr: usize, bl: usize, br: usize| w[((tl * dd + tr) * dd + bl) * dd + br];
        if j == 0 {
            let mut m = vec![ZERO; dd * dd];
            for br in 0..dd {
                for bl in 0..dd {
                    let mut s = ZERO;
                    for tl in 0..dd {
                        if cap_l[tl] == ZERO {
                            continue;
                        }
                        for tr in 0..dd {
                            s += cap_l[tl] * cap_r[tr] * at(tl, tr, bl, br);
                        }
                    }
                    m[br * dd + bl] = s;
                }
            }
            per_node.push(Op { pos: 0, width: 1, m });
        } else {
            let mut m = vec![ZERO; dd.pow(4)];
            for tl in 0..dd {
                for tr in 0..dd {
                    for bl in 0..dd {
                        for br in 0..dd {
                            m[(tr * dd + br) * dd * dd + tl * dd + bl] = at(tl, tr, bl, br);
                        }
                    }
                }
            }
            per_node.push(Op { pos: j - 1, width: 2, m });
        }
    }
    let mut m = vec![ZERO; dd * dd];
    for tl in 0..dd {
        for tr in 0..dd {
            m[tr * dd + tl] = init[tl * dd + tr];
        }
    }
    per_node.push(Op { pos: n - 1, width: 1, m });

    let order = node_order(jumps);
    let mut ops: Vec<Op> = Vec::with_capacity(n + 2);
    let insert_after = decor.insert.as_ref().map(|(j, a)| {
        let pj = order.iter().position(|&k| k == j - 1).unwrap();
        let pk = order.iter().position(|&k| k == *j).unwrap();
        (pj.min(pk), insertion_op(a, *j, jumps[j - 1] > 0))
    });
    for (slot, &k) in order.iter().enumerate() {
        ops.push(per_node[k].clone());
        if let Some((after, op)) = &insert_after {
            if *after == slot {
                ops.push(op.clone());
            }
        }
    }
    ops
}

/// `A[(k k'), (i i')] = delta_ki a[i', k']`, transposed on an upward leg.
fn insertion_op(a: &CMat, j: usize, up: bool) -> Op {
    let d = a.nrows();
    let dd = d * d;
    let mut m = vec![ZERO; dd * dd];
    for k in 0..d {
        for kp in 0..d {
            for ip in 0..d {
                let (r, c) = (k * d + kp, k * d + ip);
                let v = a[(ip, kp)];
                if up {
                    m[c * dd + r] = v;
                } else {
                    m[r * dd + c] = v;
                }
            }
        }
    }
    Op { pos: j - 1, width: 1, m }
}

/// Qudit touched by an operator inserted on leg `j`, for a column anchored at `top`.
pub(crate) fn insertion_qudit(jumps: &[i8], top: i64, j: usize) -> i64 {
    let b = nodes(jumps, top)[j - 1];
    if jumps[j - 1] > 0 {
        b + 1
    } else {
        b
    }
}

/// Sweeps `psi` through the columns anchored at `tops`, left to right.
pub(crate) fn sweep_right(circ: &Circuit, jumps: &[i8], tops: impl Iterator<Item = (i64, Decor)>, psi: &mut [C64]) {
    let init = circ.folded_initial();
    let dim = circ.d() * circ.d();
    let mut buf = Vec::new();
    for (top, decor) in tops {
        let ops = column_ops(circ, &init, jumps, top, &decor);
        sweep::apply_all(psi, &mut buf, jumps.len(), dim, &ops);
    }
}

fn sweep_left(circ: &Circuit, jumps: &[i8], tops: impl Iterator<Item = i64>, psi: &mut [C64]) {
    let init = circ.folded_initial();
    let dim = circ.d() * circ.d();
    let mut buf = Vec::new();
    for top in tops {
        let ops = column_ops(circ, &init, jumps, top, &Decor::default());
        sweep::apply_all_transposed(psi, &mut buf, jumps.len(), dim, &ops);
    }
}

fn loops(d: usize, n: usize) -> Vec<C64> {
    sweep::product_state(&loop_state(d), n)
}

/// The product of `n` loop states.
pub fn loop_product(d: usize, n: usize) -> Vec<C64> {
    loops(d, n)
}

/// `<L_gamma|` seen from the column at `spec.anchor`: the `|gamma|` columns to its left, closed by loops.
pub fn build_left_influence(spec: &CircuitSpec) -> Result<InfluenceState> {
    spec.check_anchor()?;
    spec.check_size("left influence state")?;
    let n = spec.path.len() as i64;
    let mut psi = loops(spec.d(), spec.path.len());
    let tops = (1..=n).rev().map(|k| (spec.anchor - 2 * k, Decor::default()));
    sweep_right(&spec.circuit, spec.path.jumps(), tops, &mut psi);
    Ok(state(spec, Side::Left, psi))
}

/// `|R_gamma>` seen from the column at `spec.anchor`: the `|gamma|` columns to its right.
pub fn build_right_influence(spec: &CircuitSpec) -> Result<InfluenceState> {
    spec.check_anchor()?;
    spec.check_size("right influence state")?;
    let n = spec.path.len() as i64;
    let mut psi = loops(spec.d(), spec.path.len());
    let tops = (1..=n).rev().map(|k| spec.anchor + 2 * k);
    sweep_left(&spec.circuit, spec.path.jumps(), tops, &mut psi);
    Ok(state(spec, Side::Right, psi))
}

fn state(spec: &CircuitSpec, side: Side, amplitudes: Vec<C64>) -> InfluenceState {
    let seed = match &spec.circuit.gates {
        GateField::Haar { seed, .. } | GateField::DressedDu { seed, .. } => Some(*seed),
        _ => None,
    };
    InfluenceState { path: spec.path.clone(), d: spec.d(), side, anchor: spec.anchor, seed, amplitudes }
}

/// `<s|s>`.
pub fn influence_norm(s: &InfluenceState) -> f64 {
    s.norm_sq()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    I,
    II,
    Disconnected,
}

/// Causal classification of `tr[rho_0 a_x1(t1) b_x2(t2)]` in half-integer positions.
///
/// Regime I uses `|x2 - x1|` so that both orientations of the pair are covered.
pub fn classify_regime(x1: f64, x2: f64, t1: u32, t2: u32) -> Result<Regime> {
    if t2 < t1 {
        return domain(format!("need t2 >= t1, got t1 = {t1}, t2 = {t2}"));
    }
    if (x1.ceil() - x2.ceil()).abs() > (t1 + t2) as f64 {
        Ok(Regime::Disconnected)
    } else if (x2 - x1).abs() <= (t2 - t1) as f64 {
        Ok(Regime::I)
    } else {
        Ok(Regime::II)
    }
}

/// One-site operator at a lattice point.
#[derive(Clone, Debug)]
pub struct Local<'a> {
    pub op: &'a CMat,
    pub qudit: i64,
    pub t: u32,
}

/// How a correlator was contracted.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelatorPlan {
    pub regime: Regime,
    pub path: Path,
    /// Anchors of the columns holding `a` and `b`.
    pub column_a: i64,
    pub column_b: i64,
}

fn check_op(o: &CMat, d: usize) -> Result<()> {
    if o.nrows() != d || o.ncols() != d {
        return domain(format!("operator must be {d}x{d}, got {}x{}", o.nrows(), o.ncols()));
    }
    Ok(())
}

fn even_floor(q: i64) -> i64 {
    q - q.rem_euclid(2)
}

/// Jumps `g_1..g_k` with `count` pluses first.
fn staircase(k: usize, pluses: usize) -> Vec<i8> {
    (0..k).map(|i| if i < pluses { 1 } else { -1 }).collect()
}

fn alternating(k: usize) -> Vec<i8> {
    (0..k).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect()
}

/// Picks a path and the column positions for `a` at `(qa, t1)` and `b` at `(qb, t2)`.
pub fn plan_correlator(qa: i64, t1: u32, qb: i64, t2: u32) -> Result<CorrelatorPlan> {
    if t2 < t1 {
        return domain(format!("need t2 >= t1, got t1 = {t1}, t2 = {t2}"));
    }
    if t2 == 0 {
        return domain("correlator with t2 = 0 needs no circuit; use expectation".to_string());
    }
    let regime = classify_regime(qa as f64 / 2.0, qb as f64 / 2.0, t1, t2)?;
    let n = 2 * t2 as usize;
    let j = 2 * (t2 - t1) as usize;
    let cb = even_floor(qb);
    if j == 0 {
        let path = Path::new(alternating(n))?;
        return Ok(CorrelatorPlan { regime, path, column_a: even_floor(qa), column_b: cb });
    }
    let delta = qa - cb;
    let reach = (j - 1) as i64;
    for (up, s) in [(1i8, delta - 1), (-1i8, delta)] {
        if s.abs() <= reach && (s - reach).rem_euclid(2) == 0 {
            let mut jumps = staircase(j - 1, ((reach + s) / 2) as usize);
            jumps.push(up);
            jumps.extend(alternating(n - j));
            return Ok(CorrelatorPlan { regime, path: Path::new(jumps)?, column_a: cb, column_b: cb });
        }
    }
    let dir: i8 = if qa > cb { 1 } else { -1 };
    let jl = j as i64;
    let (xa_up, xa_down) = if dir > 0 { (qa - jl, qa - jl + 1) } else { (qa + jl - 2, qa + jl - 1) };
    let (up, xa) = if xa_up.rem_euclid(2) == 0 { (1i8, xa_up) } else { (-1i8, xa_down) };
    let mut jumps = vec![dir; j - 1];
    jumps.push(up);
    jumps.extend(alternating(n - j));
    Ok(CorrelatorPlan { regime, path: Path::new(jumps)?, column_a: xa, column_b: cb })
}

/// `tr[rho_0 a(t1) b(t2)]` with operators in the Heisenberg picture.
///
/// Disconnected pairs factorise into one-point functions.
pub fn correlator(circ: &Circuit, a: &Local, b: &Local, cap: u128) -> Result<C64> {
    let d = circ.d();
    check_op(a.op, d)?;
    check_op(b.op, d)?;
    let (a, b) = if a.t <= b.t { (a, b) } else { return domain("operator a must not be later than b".to_string()) };
    if b.t == 0 {
        if a.qudit == b.qudit {
            return Ok(initial_expectation(circ, &(a.op * b.op), a.qudit));
        }
        if even_floor(a.qudit) == even_floor(b.qudit) {
            return Ok(initial_pair_expectation(circ, a, b));
        }
        return Ok(initial_expectation(circ, a.op, a.qudit) * initial_expectation(circ, b.op, b.qudit));
    }
    let regime = classify_regime(a.qudit as f64 / 2.0, b.qudit as f64 / 2.0, a.t, b.t)?;
    if regime == Regime::Disconnected {
        return Ok(expectation(circ, a.op, a.qudit, a.t, cap)? * expectation(circ, b.op, b.qudit, b.t, cap)?);
    }
    let plan = plan_correlator(a.qudit, a.t, b.qudit, b.t)?;
    contract_plan(circ, &plan, a, b, cap)
}

fn contract_plan(circ: &Circuit, plan: &CorrelatorPlan, a: &Local, b: &Local, cap: u128) -> Result<C64> {
    let d = circ.d();
    let n = plan.path.len();
    check_size("correlator boundary state", d, n, cap)?;
    let jumps = plan.path.jumps();
    let j = 2 * (b.t - a.t) as usize;
    let xmin = plan.column_a.min(plan.column_b);
    let xmax = plan.column_a.max(plan.column_b);
    let left = CircuitSpec { circuit: circ.clone(), path: plan.path.clone(), anchor: xmin, max_amplitudes: cap };
    let right = CircuitSpec { anchor: xmax, ..left.clone() };
    let mut psi = build_left_influence(&left)?.amplitudes;
    let r = build_right_influence(&right)?.amplitudes;

    let mut decors: Vec<(i64, Decor)> = (0..=(xmax - xmin) / 2).map(|k| (xmin + 2 * k, Decor::default())).collect();
    let decor_at = |decors: &mut Vec<(i64, Decor)>, x: i64| -> usize { decors.iter().position(|(t, _)| *t == x).unwrap() };

    let ib = decor_at(&mut decors, plan.column_b);
    let cap_b = operator_cap(b.op);
    let b_left = b.qudit == plan.column_b;
    if j == 0 {
        let ia = decor_at(&mut decors, plan.column_a);
        let a_left = a.qudit == plan.column_a;
        if ia == ib && a_left == b_left {
            let c = operator_cap(&(a.op * b.op));
            set_cap(&mut decors[ib].1, b_left, c);
        } else {
            set_cap(&mut decors[ib].1, b_left, cap_b);
            set_cap(&mut decors[ia].1, a_left, operator_cap(a.op));
        }
    } else {
        set_cap(&mut decors[ib].1, b_left, cap_b);
        let ia = decor_at(&mut decors, plan.column_a);
        debug_assert_eq!(insertion_qudit(jumps, plan.column_a, j), a.qudit);
        decors[ia].1.insert = Some((j, a.op.clone()));
    }
    sweep_right(circ, jumps, decors.into_iter(), &mut psi);
    Ok(psi.iter().zip(&r).map(|(x, y)| x * y).sum())
}

fn set_cap(decor: &mut Decor, left: bool, c: Vec<C64>) {
    if left {
        decor.cap_left = Some(c);
    } else {
        decor.cap_right = Some(c);
    }
}

/// `<Psi_0| o_q |Psi_0>` read off the pair matrix.
fn initial_expectation(circ: &Circuit, o: &CMat, q: i64) -> C64 {
    let m = circ.initial.matrix();
    let d = circ.d();
    let mut s = ZERO;
    for i in 0..d {
        for j in 0..d {
            for x in 0..d {
                if q.rem_euclid(2) == 0 {
                    s += m[(i, j)].conj() * o[(i, x)] * m[(x, j)];
                } else {
                    s += m[(i, j)].conj() * o[(j, x)] * m[(i, x)];
                }
            }
        }
    }
    s / d as f64
}

/// Both operators on the two qudits of one initial pair.
fn initial_pair_expectation(circ: &Circuit, a: &Local, b: &Local) -> C64 {
    let (l, r) = if a.qudit.rem_euclid(2) == 0 { (a.op, b.op) } else { (b.op, a.op) };
    let m = circ.initial.matrix();
    let d = circ.d();
    let mut s = ZERO;
    for i in 0..d {
        for j in 0..d {
            for x in 0..d {
                for y in 0..d {
                    s += m[(i, j)].conj() * l[(i, x)] * r[(j, y)] * m[(x, y)];
                }
            }
        }
    }
    s / d as f64
}

/// `tr[rho_0 o_q(t)]`.
pub fn expectation(circ: &Circuit, o: &CMat, q: i64, t: u32, cap: u128) -> Result<C64> {
    check_op(o, circ.d())?;
    if t == 0 {
        return Ok(initial_expectation(circ, o, q));
    }
    let id = linalg::identity(circ.d());
    let a = Local { op: &id, qudit: q, t };
    let b = Local { op: o, qudit: q, t };
    let plan = plan_correlator(q, t, q, t)?;
    contract_plan(circ, &plan, &a, &b, cap)
}

/// Outcome of [`rank1_check`].
#[derive(Clone, Debug)]
pub struct Rank1Report {
    /// Singular values of the column product, descending.
    pub singular_values: Vec<f64>,
    /// `sigma_2 / sigma_1`.
    pub ratio: f64,
    /// `|<u_1|R>| / |R|` for the leading left singular vector.
    pub right_overlap: f64,
    /// `|<v_1|conj L>| / |L|` for the leading right singular vector.
    pub left_overlap: f64,
}

/// Materialises the product of `|gamma|` columns starting at `spec.anchor` and inspects its rank.
pub fn rank1_check(spec: &CircuitSpec) -> Result<Rank1Report> {
    spec.check_anchor()?;
    let n = spec.path.len();
    let dim = (spec.d() * spec.d()).pow(n as u32);
    check_size("rank-1 column product", spec.d(), 2 * n, spec.max_amplitudes.min(1 << 24))?;
    let tops: Vec<i64> = (0..n as i64).map(|k| spec.anchor + 2 * k).collect();
    let mut p = CMat::zeros(dim, dim);
    let mut psi = vec![ZERO; dim];
    for k in 0..dim {
        psi.fill(ZERO);
        psi[k] = ONE;
        sweep_right(&spec.circuit, spec.path.jumps(), tops.iter().map(|&t| (t, Decor::default())), &mut psi);
        for (c, v) in psi.iter().enumerate() {
            p[(k, c)] = *v;
        }
    }
    let svd = p.svd().map_err(|e| Error::Numerical(format!("svd: {e:?}")))?;
    let s = svd.S().column_vector();
    let sv: Vec<f64> = (0..dim).map(|i| s[i].re).collect();
    let ratio = if sv[0] > 0.0 { sv.get(1).copied().unwrap_or(0.0) / sv[0] } else { 0.0 };

    let r_state = build_right_influence(&CircuitSpec { anchor: spec.anchor - 2, ..spec.clone() })?;
    let l_state = build_left_influence(&CircuitSpec { anchor: spec.anchor + 2 * n as i64, ..spec.clone() })?;
    let u = svd.U();
    let v = svd.V();
    let overlap = |col: &dyn Fn(usize) -> C64, x: &[C64]| {
        let nx: f64 = x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let s: C64 = x.iter().enumerate().map(|(i, a)| col(i).conj() * a).sum();
        s.norm() / nx
    };
    let conj_l: Vec<C64> = l_state.amplitudes.iter().map(|a| a.conj()).collect();
    Ok(Rank1Report {
        singular_values: sv,
        ratio,
        right_overlap: overlap(&|i| u[(i, 0)], &r_state.amplitudes),
        left_overlap: overlap(&|i| v[(i, 0)], &conj_l),
    })
}

#[cfg(test)]
mod tests;
