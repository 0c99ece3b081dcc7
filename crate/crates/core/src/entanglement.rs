//! Schmidt analysis of influence states and the bounds built on it.

use crate::error::{domain, Error, Result};
use crate::gates::loop_state;
use crate::geometry::{Cut, Path};
use crate::influence::{build_left_influence, CircuitSpec, InfluenceState, Op};
use crate::linalg::{self, C64, ZERO};
use serde::Serialize;

/// Schmidt values below this are counted as zero for rank purposes.
pub const ZERO_SCHMIDT: f64 = 1e-14;

/// Squared Schmidt values across a cut, descending, summing to one.
#[derive(Clone, Debug, Serialize)]
pub struct SchmidtSpectrum {
    pub values: Vec<f64>,
    pub k: usize,
    pub n: usize,
}

impl SchmidtSpectrum {
    /// Normalises arbitrary nonnegative weights.
    pub fn from_weights(mut w: Vec<f64>, k: usize, n: usize) -> Result<Self> {
        if w.iter().any(|x| !(*x >= 0.0)) {
            return domain("Schmidt weights must be nonnegative".to_string());
        }
        let z: f64 = w.iter().sum();
        if z <= 0.0 {
            return Err(Error::Numerical("state has zero norm".into()));
        }
        w.iter_mut().for_each(|x| *x /= z);
        w.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { values: w, k, n })
    }

    pub fn cut(&self) -> Cut {
        Cut { k: self.k, n: self.n }
    }

    /// Number of values above [`ZERO_SCHMIDT`].
    pub fn rank(&self) -> usize {
        self.values.iter().filter(|&&v| v > ZERO_SCHMIDT).count()
    }
}

/// Singular values of the state with the top `k` legs as rows, squared and normalised.
pub fn schmidt_spectrum(s: &InfluenceState, cut: Cut) -> Result<SchmidtSpectrum> {
    if cut.n != s.legs() {
        return domain(format!("cut for {} sites applied to a {}-leg state", cut.n, s.legs()));
    }
    spectrum_of(&s.amplitudes, s.leg_dim(), cut.k, cut.n)
}

fn spectrum_of(amps: &[C64], leg_dim: usize, k: usize, n: usize) -> Result<SchmidtSpectrum> {
    let rows = leg_dim.pow(k as u32);
    let m = linalg::from_row_major(amps, rows, amps.len() / rows);
    let sv = linalg::singular_values(&m)?;
    SchmidtSpectrum::from_weights(sv.into_iter().map(|x| x * x).collect(), k, n)
}

/// Renyi index. `alpha = 1` is von Neumann, `f64::INFINITY` the min-entropy.
pub fn entropy(sp: &SchmidtSpectrum, alpha: f64) -> Result<f64> {
    entropy_of(&sp.values, alpha)
}

pub(crate) fn entropy_of(p: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return domain(format!("Renyi index must be >= 0, got {alpha}"));
    }
    let s = if alpha == 1.0 {
        -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
    } else if alpha == f64::INFINITY {
        -p.iter().cloned().fold(0.0, f64::max).ln()
    } else if alpha == 0.0 {
        (p.iter().filter(|&&x| x > ZERO_SCHMIDT).count() as f64).ln()
    } else {
        p.iter().filter(|&&x| x > 0.0).map(|&x| x.powf(alpha)).sum::<f64>().ln() / (1.0 - alpha)
    };
    Ok(s.max(0.0))
}

/// Shannon entropy of a probability vector, in nats.
pub fn shannon(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

#[derive(Clone, Debug, Serialize)]
pub struct MaxEntropy {
    pub value: f64,
    pub k: usize,
}

/// Largest entropy over all proper cuts; ties go to the smallest `k`.
pub fn max_entropy_over_cuts(s: &InfluenceState, alpha: f64) -> Result<MaxEntropy> {
    let mut best = MaxEntropy { value: f64::NEG_INFINITY, k: 0 };
    for cut in s.path.cuts() {
        let e = entropy(&schmidt_spectrum(s, cut)?, alpha)?;
        if e > best.value {
            best = MaxEntropy { value: e, k: cut.k };
        }
    }
    if best.k == 0 {
        return domain("path of length 1 has no proper cut".to_string());
    }
    Ok(best)
}

/// A state on the reduced path together with the size of its `A` block.
#[derive(Clone, Debug)]
pub struct Reduced {
    pub spec: CircuitSpec,
    pub state: InfluenceState,
    /// Number of up-pointing legs of `A`; the reduced cut sits after this many legs.
    pub tau_a: usize,
}

/// The reduced path `+^tau_A -^(#- in Abar) +^(#+ in Abar)` for the cut after `k` sites.
pub fn reduced_path(path: &Path, k: usize) -> Result<Path> {
    let j = path.jumps();
    let tau_a = path.tau_top(k);
    let minus_abar = j[k..].iter().filter(|&&g| g < 0).count();
    let plus_abar = j.len() - k - minus_abar;
    let mut out = vec![1i8; tau_a];
    out.extend(std::iter::repeat_n(-1i8, minus_abar));
    out.extend(std::iter::repeat_n(1i8, plus_abar));
    Path::new(out)
}

/// For dual-unitary gates, the state on the reduced path whose spectrum across
/// `tau_a` equals the original spectrum across `k`.
pub fn du_reduce(spec: &CircuitSpec, k: usize) -> Result<Reduced> {
    if !spec.circuit.gates.is_dual_unitary() {
        return Err(Error::Validation("du_reduce needs dual-unitary gates".into()));
    }
    Cut::new(k, spec.path.len())?;
    let path = reduced_path(&spec.path, k)?;
    let minus_a = k - spec.path.tau_top(k);
    let tau_a = spec.path.tau_top(k);
    let spec = CircuitSpec { path, anchor: spec.anchor - minus_a as i64, ..spec.clone() };
    let state = build_left_influence(&spec)?;
    Ok(Reduced { spec, state, tau_a })
}

/// Schmidt spectrum of a reduced state across its `A` block.
pub fn reduced_spectrum(r: &Reduced) -> Result<Option<SchmidtSpectrum>> {
    if r.tau_a == 0 || r.tau_a == r.state.legs() {
        return Ok(None);
    }
    schmidt_spectrum(&r.state, Cut::new(r.tau_a, r.state.legs())?).map(Some)
}

#[derive(Clone, Debug, Serialize)]
pub struct PkDecomposition {
    /// `p_0 .. p_tau_A`.
    pub p: Vec<f64>,
    /// Spectrum of each `rho_k` (empty when `p_k = 0`).
    pub spectra: Vec<Vec<f64>>,
    /// von Neumann entropy of each `rho_k`.
    pub entropies: Vec<f64>,
    pub shannon: f64,
    pub lower: f64,
    pub upper: f64,
    /// Max deviation of `sum_k P_k |L>` from `|L>`.
    pub completeness_defect: f64,
}

/// One-site projectors on the loop state and on its complement.
fn loop_projectors(d: usize) -> (Vec<C64>, Vec<C64>) {
    let lp = loop_state(d);
    let dd = d * d;
    let mut on = vec![ZERO; dd * dd];
    let mut off = vec![ZERO; dd * dd];
    for e in 0..dd {
        for w in 0..dd {
            on[e * dd + w] = lp[e] * lp[w].conj();
            off[e * dd + w] = if e == w { C64::new(1.0, 0.0) } else { ZERO } - on[e * dd + w];
        }
    }
    (on, off)
}

/// `P_k` keeps the bottom `k - 1` of the `tau_A` top legs, puts leg `tau_A - k`
/// (0-based) on the loop complement and the legs above it on the loop. `P_0`
/// puts all `tau_A` legs on the loop.
pub fn apply_pk(s: &InfluenceState, tau_a: usize, k: usize) -> Vec<C64> {
    let (on, off) = loop_projectors(s.d);
    let dim = s.leg_dim();
    let mut psi = s.amplitudes.clone();
    let mut buf = Vec::new();
    let top = if k == 0 { tau_a } else { tau_a - k };
    for pos in 0..top {
        crate::influence::apply_op(&mut psi, &mut buf, s.legs(), dim, &Op { pos, width: 1, m: on.clone() });
    }
    if k > 0 {
        crate::influence::apply_op(&mut psi, &mut buf, s.legs(), dim, &Op { pos: top, width: 1, m: off.clone() });
    }
    psi
}

/// Decomposes a reduced state with the projectors `P_0 .. P_tau_A` on its top block.
pub fn pk_decomposition(r: &Reduced) -> Result<PkDecomposition> {
    let s = &r.state;
    let tau_a = r.tau_a;
    if tau_a == 0 || tau_a >= s.legs() {
        return domain(format!("reduced A block of {tau_a} legs leaves no proper cut in {} legs", s.legs()));
    }
    let norm = s.norm_sq();
    let mut p = Vec::with_capacity(tau_a + 1);
    let mut spectra = Vec::with_capacity(tau_a + 1);
    let mut entropies = Vec::with_capacity(tau_a + 1);
    let mut total = vec![ZERO; s.amplitudes.len()];
    for k in 0..=tau_a {
        let v = apply_pk(s, tau_a, k);
        let w: f64 = v.iter().map(|a| a.norm_sqr()).sum();
        total.iter_mut().zip(&v).for_each(|(t, x)| *t += x);
        p.push(w / norm);
        if w / norm > 1e-15 {
            let sp = spectrum_of(&v, s.leg_dim(), tau_a, s.legs())?;
            entropies.push(entropy_of(&sp.values, 1.0)?);
            spectra.push(sp.values);
        } else {
            entropies.push(0.0);
            spectra.push(Vec::new());
        }
    }
    let defect = total.iter().zip(&s.amplitudes).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let scale = s.amplitudes.iter().map(|a| a.norm()).fold(0.0, f64::max).max(1e-300);
    if defect / scale > 1e-10 {
        return Err(Error::Numerical(format!("projectors are not complete: defect {defect:.3e}")));
    }
    let h = shannon(&p);
    let lower: f64 = p.iter().zip(&entropies).map(|(a, b)| a * b).sum();
    Ok(PkDecomposition { p, spectra, entropies, shannon: h, lower, upper: lower + h, completeness_defect: defect })
}

/// `S^(alpha) <= (2 alpha / (alpha - 1)) (-log r)` with `r` the normalised overlap
/// of `s` with the product `a (x) b` split after `a.legs()` sites.
pub fn ey_bound_overlap(s: &InfluenceState, a: &InfluenceState, b: &InfluenceState, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if a.legs() + b.legs() != s.legs() {
        return domain("product legs do not add up to the state".to_string());
    }
    let nb = b.amplitudes.len();
    let mut ov = ZERO;
    for (i, x) in a.amplitudes.iter().enumerate() {
        let row = &s.amplitudes[i * nb..(i + 1) * nb];
        let inner: C64 = row.iter().zip(&b.amplitudes).map(|(y, z)| y * z.conj()).sum();
        ov += inner * x.conj();
    }
    let r = ov.norm() / (s.norm_sq() * a.norm_sq() * b.norm_sq()).sqrt();
    Ok(factor(alpha) * 2.0 * -(r.ln()))
}

/// `S^(alpha) <= (alpha / (alpha - 1)) log(N_gamma / N_Abar)` for dual-unitary circuits.
pub fn ey_bound_norm(norm_full: f64, norm_abar: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(norm_full > 0.0 && norm_abar > 0.0) {
        return domain("norms must be positive".to_string());
    }
    Ok(factor(alpha) * (norm_full / norm_abar).ln())
}

/// The bottom `|gamma| - k` legs as a path of their own, anchored where `A` ends.
pub fn abar_spec(spec: &CircuitSpec, k: usize) -> Result<CircuitSpec> {
    let j = spec.path.jumps();
    let end: i64 = spec.anchor + j[..k].iter().map(|&g| g as i64).sum::<i64>();
    Ok(CircuitSpec { path: spec.path.segment(k..j.len())?, anchor: end, ..spec.clone() })
}

/// The top `k` legs as a path of their own, at the nearest admissible anchor.
pub fn a_spec(spec: &CircuitSpec, k: usize) -> Result<CircuitSpec> {
    let shift = ((spec.path.len() - k) % 2) as i64;
    Ok(CircuitSpec { path: spec.path.segment(0..k)?, anchor: spec.anchor - shift, ..spec.clone() })
}

fn factor(alpha: f64) -> f64 {
    if alpha == f64::INFINITY {
        1.0
    } else {
        alpha / (alpha - 1.0)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 1.0) {
        return domain(format!("Eckart-Young bounds need alpha > 1, got {alpha}"));
    }
    Ok(())
}

/// `(alpha / (alpha - 1)) log(d^tau_A P(tau/2) / P(tau_Abar/2))`, with
/// `purity(x)` returning `P(x/2)` for `x` layers.
pub fn du_renyi_bound(tau_a: usize, tau: usize, d: usize, alpha: f64, purity: &dyn Fn(usize) -> Option<f64>) -> Result<f64> {
    check_alpha(alpha)?;
    if tau_a > tau {
        return domain(format!("tau_A = {tau_a} exceeds tau = {tau}"));
    }
    let missing = |x| Error::Domain(format!("no purity for {x} layers"));
    let full = purity(tau).ok_or_else(|| missing(tau))?;
    let rest = purity(tau - tau_a).ok_or_else(|| missing(tau - tau_a))?;
    Ok(factor(alpha) * ((d as f64).powi(tau_a as i32) * full / rest).ln())
}

#[cfg(test)]
mod tests;
