use super::{instances, par_points, Cell, CutPolicy, ExperimentConfig, Instance, Outcome, Table};
use crate::entanglement::{du_reduce, du_renyi_bound, entropy, max_entropy_over_cuts, pk_decomposition, schmidt_spectrum, PkDecomposition, ZERO_SCHMIDT};
use crate::error::{Error, Result};
use crate::geometry::{canonical_path_len, Cut, Path, PathKind};
use crate::influence::{build_left_influence, correlator, plan_correlator, spatial_purity, CircuitSpec, InfluenceState, Local, Regime};
use crate::linalg::{self, CMat, C64};
use crate::membrane::{self, LineTension};
use crate::recurrence::RecurrenceTable;
use faer::Mat;

fn spec(cfg: &ExperimentConfig, inst: &Instance, kind: PathKind, n: usize) -> Result<CircuitSpec> {
    Ok(CircuitSpec::new(inst.circuit.clone(), canonical_path_len(kind, n)?).with_cap(cfg.cap()))
}

fn left(cfg: &ExperimentConfig, inst: &Instance, kind: PathKind, n: usize) -> Result<InfluenceState> {
    build_left_influence(&spec(cfg, inst, kind, n)?)
}

fn head(inst: &Instance) -> Vec<Cell> {
    vec![inst.p.into(), inst.sample.into()]
}

fn with(mut h: Vec<Cell>, rest: impl IntoIterator<Item = Cell>) -> Vec<Cell> {
    h.extend(rest);
    h
}

fn entropy_at(s: &InfluenceState, k: usize, alpha: f64) -> Result<f64> {
    entropy(&schmidt_spectrum(s, Cut::new(k, s.legs())?)?, alpha)
}

/// The cut the policy picks for `s`, with the max policy maximising `alpha`.
fn pick_cut(policy: CutPolicy, s: &InfluenceState, alpha: f64) -> Result<usize> {
    match policy.fixed(s.legs()) {
        Some(c) => Ok(c?.k),
        None => Ok(max_entropy_over_cuts(s, alpha)?.k),
    }
}

/// Entropy at the fractional position `r n`, linear between the neighbouring cuts.
fn entropy_at_ratio(s: &InfluenceState, r: f64, alpha: f64) -> Result<f64> {
    let n = s.legs();
    let x = (r * n as f64).clamp(1.0, (n - 1) as f64);
    let k0 = x.floor() as usize;
    let f = x - k0 as f64;
    let s0 = entropy_at(s, k0, alpha)?;
    if f < 1e-12 {
        return Ok(s0);
    }
    Ok((1.0 - f) * s0 + f * entropy_at(s, k0 + 1, alpha)?)
}

fn require_du(insts: &[Instance]) -> Result<()> {
    if insts.iter().any(|i| !i.circuit.gates.is_dual_unitary()) {
        return Err(Error::Config("this experiment needs a dual-unitary gate family".into()));
    }
    Ok(())
}

fn t_points(cfg: &ExperimentConfig, insts: &[Instance]) -> Vec<(usize, usize)> {
    (0..insts.len()).flat_map(|i| (cfg.t_min..=cfg.t_max).map(move |t| (i, t))).collect()
}

pub(super) fn schmidt_hist(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let insts = instances(cfg)?;
    let pts = t_points(cfg, &insts);
    let kind = cfg.path.kind();
    let res = par_points(&pts, |&(i, t)| {
        let s = left(cfg, &insts[i], kind, 2 * t)?;
        let k = pick_cut(cfg.cut, &s, 1.0)?;
        Ok((k, schmidt_spectrum(&s, Cut::new(k, s.legs())?)?.values))
    })?;
    let mut values = Table::new("", &["p", "sample", "t", "k", "index", "lambda"]);
    let mut summary = Table::new("-summary", &["p", "sample", "t", "k", "rank", "above_1e-1", "fraction_below_1e-3"]);
    for (&(i, t), r) in pts.iter().zip(res) {
        let h = with(head(&insts[i]), [t.into()]);
        match r {
            Outcome::Done((k, v)) => {
                for (j, x) in v.iter().enumerate() {
                    values.push(with(h.clone(), [k.into(), j.into(), (*x).into()]));
                }
                let rank = v.iter().filter(|&&x| x > ZERO_SCHMIDT).count();
                let big = v.iter().filter(|&&x| x > 0.1).count();
                let small = v.iter().filter(|&&x| x < 1e-3).count() as f64 / v.len() as f64;
                summary.push(with(h, [k.into(), rank.into(), big.into(), small.into()]));
            }
            Outcome::Capped => {
                values.push_gap(h.clone());
                summary.push_gap(h);
            }
        }
    }
    Ok(vec![values, summary])
}

pub(super) fn purity_plateau(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let insts = instances(cfg)?;
    let pts: Vec<(usize, usize)> = (0..insts.len()).flat_map(|i| (0..=2 * cfg.t_max).map(move |tau| (i, tau))).collect();
    let res = par_points(&pts, |&(i, tau)| spatial_purity(&insts[i].circuit, tau, cfg.cap()))?;
    let d = cfg.d as f64;
    let mut table = Table::new("", &["p", "sample", "tau", "t", "purity", "scaled", "increment"]);
    let mut prev: Option<f64> = None;
    for (&(i, tau), r) in pts.iter().zip(res) {
        let h = with(head(&insts[i]), [tau.into(), (tau as f64 / 2.0).into()]);
        if tau == 0 {
            prev = None;
        }
        match r {
            Outcome::Done(p) => {
                let scaled = d.powi(tau as i32) * p;
                let inc = if tau == 0 { None } else { prev.map(|q| scaled - q) };
                table.push(with(h, [p.into(), scaled.into(), inc.into()]));
                prev = Some(scaled);
            }
            Outcome::Capped => {
                table.push_gap(h);
                prev = None;
            }
        }
    }
    Ok(vec![table])
}

pub(super) fn renyi_inf_bound(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let insts = instances(cfg)?;
    let pts = t_points(cfg, &insts);
    let kind = cfg.path.kind();
    let cap = cfg.cap();
    let res = par_points(&pts, |&(i, t)| {
        let inst = &insts[i];
        let s = left(cfg, inst, kind, 2 * t)?;
        let k = pick_cut(cfg.cut, &s, f64::INFINITY)?;
        let sp = schmidt_spectrum(&s, Cut::new(k, s.legs())?)?;
        let s_inf = entropy(&sp, f64::INFINITY)?;
        let s2 = entropy(&sp, 2.0)?;
        let r = k as f64 / s.legs() as f64;
        let bound = if inst.circuit.gates.is_dual_unitary() {
            let tau = s.path.count_plus();
            let tau_a = s.path.tau_top(k);
            let p_full = spatial_purity(&inst.circuit, tau, cap)?;
            let p_rest = spatial_purity(&inst.circuit, tau - tau_a, cap)?;
            let purity = |x: usize| if x == tau { Some(p_full) } else if x == tau - tau_a { Some(p_rest) } else { None };
            Some(du_renyi_bound(tau_a, tau, cfg.d, f64::INFINITY, &purity)?)
        } else {
            None
        };
        Ok((k, s_inf, s2, -(1.0 - r).ln(), bound))
    })?;
    let mut table = Table::new("", &["p", "sample", "t", "k", "s_inf", "s_2", "asymptotic_bound", "purity_bound"]);
    for (&(i, t), r) in pts.iter().zip(res) {
        let h = with(head(&insts[i]), [t.into()]);
        match r {
            Outcome::Done((k, si, s2, asym, b)) => table.push(with(
                h,
                [k.into(), cfg.unit(si).into(), cfg.unit(s2).into(), cfg.unit(asym).into(), b.map(|b| cfg.unit(b)).into()],
            )),
            Outcome::Capped => table.push_gap(h),
        }
    }
    Ok(vec![table])
}

struct PkPoint {
    k: usize,
    n: usize,
    v_abar: f64,
    pk: PkDecomposition,
    direct: f64,
}

fn pk_points(cfg: &ExperimentConfig) -> Result<(Vec<Instance>, Vec<(usize, usize)>, Vec<Outcome<PkPoint>>)> {
    let insts = instances(cfg)?;
    require_du(&insts)?;
    let pts = t_points(cfg, &insts);
    let kind = cfg.path.kind();
    let res = par_points(&pts, |&(i, t)| {
        let spec = spec(cfg, &insts[i], kind, 2 * t)?;
        let s = build_left_influence(&spec)?;
        let k = match cfg.cut.fixed(s.legs()) {
            Some(c) => c?.k,
            None => s.legs() / 2,
        };
        let direct = entropy_at(&s, k, 1.0)?;
        let red = du_reduce(&spec, k)?;
        let pk = pk_decomposition(&red)?;
        let rest: Path = s.path.segment(k..s.legs())?;
        Ok(PkPoint { k, n: s.legs(), v_abar: rest.slope(), pk, direct })
    })?;
    Ok((insts, pts, res))
}

pub(super) fn pk_profile(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let (insts, pts, res) = pk_points(cfg)?;
    let v = cfg.path.slope();
    let mut table = Table::new("", &["p", "sample", "t", "k", "kk", "p_k", "target", "asymptotic"]);
    let mut bounds = Table::new("-bounds", &["p", "sample", "t", "k", "s_direct", "lower", "upper", "shannon", "sum_p"]);
    for (&(i, t), r) in pts.iter().zip(res) {
        let h = with(head(&insts[i]), [t.into()]);
        match r {
            Outcome::Done(pp) => {
                let tt = t as f64;
                for (kk, &p) in pp.pk.p.iter().enumerate() {
                    let asym = membrane::pk_asymptotic(kk, tt, v, pp.n - pp.k, pp.v_abar);
                    let target = if kk == 0 { None } else { Some(1.0 / ((1.0 + v) * tt)) };
                    table.push(with(h.clone(), [pp.k.into(), kk.into(), p.into(), target.into(), asym.into()]));
                }
                let sum: f64 = pp.pk.p.iter().sum();
                bounds.push(with(
                    h,
                    [
                        pp.k.into(),
                        cfg.unit(pp.direct).into(),
                        cfg.unit(pp.pk.lower).into(),
                        cfg.unit(pp.pk.upper).into(),
                        cfg.unit(pp.pk.shannon).into(),
                        sum.into(),
                    ],
                ));
            }
            Outcome::Capped => {
                table.push_gap(h.clone());
                bounds.push_gap(h);
            }
        }
    }
    Ok(vec![table, bounds])
}

pub(super) fn rhok_entropy(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let (insts, pts, res) = pk_points(cfg)?;
    let mut table = Table::new("", &["p", "sample", "t", "k", "kk", "p_k", "rank", "entropy", "membrane"]);
    for (&(i, t), r) in pts.iter().zip(res) {
        let h = with(head(&insts[i]), [t.into()]);
        match r {
            Outcome::Done(pp) => {
                for kk in 0..pp.pk.p.len() {
                    let rank = pp.pk.spectra[kk].iter().filter(|&&x| x > ZERO_SCHMIDT).count();
                    let mem = membrane::rhok_membrane_entropy(kk, pp.n - pp.k, cfg.d);
                    table.push(with(
                        h.clone(),
                        [
                            pp.k.into(),
                            kk.into(),
                            pp.pk.p[kk].into(),
                            rank.into(),
                            cfg.unit(pp.pk.entropies[kk]).into(),
                            cfg.unit(mem).into(),
                        ],
                    ));
                }
            }
            Outcome::Capped => table.push_gap(h),
        }
    }
    Ok(vec![table])
}

pub(super) fn vn_slope(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let insts = instances(cfg)?;
    let kind = cfg.path.kind();
    let r = cfg.cut.ratio();
    let ns: Vec<usize> = (2 * cfg.t_min..=2 * cfg.t_max).collect();
    let pts: Vec<(usize, usize)> = (0..insts.len()).flat_map(|i| ns.iter().map(move |&n| (i, n))).collect();
    let res = par_points(&pts, |&(i, n)| {
        let s = left(cfg, &insts[i], kind, n)?;
        let cut = entropy_at_ratio(&s, r, 1.0)?;
        let mx = max_entropy_over_cuts(&s, 1.0)?;
        Ok((cut, mx.value, mx.k))
    })?;
    let mut series = Table::new("", &["p", "sample", "n", "t", "s_cut", "s_max", "k_max"]);
    let mut fits = Table::new("-fit", &["p", "sample", "series", "points", "a", "b", "target"]);
    let ln_d = (cfg.d as f64).ln();
    let v = cfg.path.slope().abs();
    let targets = [membrane::du_slope_s(r, v) * ln_d, membrane::du_slope_max(v).1 * ln_d];
    for (i, inst) in insts.iter().enumerate() {
        let mut cut_series = Vec::new();
        let mut max_series = Vec::new();
        for (&(j, n), out) in pts.iter().zip(&res) {
            if j != i {
                continue;
            }
            let t = n as f64 / 2.0;
            let h = with(head(inst), [n.into(), t.into()]);
            match out {
                Outcome::Done((c, m, k)) => {
                    cut_series.push((t, cfg.unit(*c)));
                    max_series.push((t, cfg.unit(*m)));
                    series.push(with(h, [cfg.unit(*c).into(), cfg.unit(*m).into(), (*k).into()]));
                }
                Outcome::Capped => series.push_gap(h),
            }
        }
        for ((name, s), target) in [("cut", &cut_series), ("max", &max_series)].into_iter().zip(targets) {
            let h = with(head(inst), [name.into(), s.len().into()]);
            match super::extrapolate_slope(s) {
                Ok(f) => fits.push(with(h, [f.a.into(), f.b.into(), cfg.unit(target).into()])),
                Err(Error::Domain(_)) => fits.push_gap(h),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(vec![series, fits])
}

pub(super) fn vertical_growth(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let insts = instances(cfg)?;
    let kinds = [(0.0, PathKind::Vertical), (1.0, PathKind::Lightcone)];
    let pts: Vec<(usize, usize, usize)> =
        t_points(cfg, &insts).into_iter().flat_map(|(i, t)| (0..kinds.len()).map(move |w| (i, t, w))).collect();
    let res = par_points(&pts, |&(i, t, w)| {
        let s = left(cfg, &insts[i], kinds[w].1, 2 * t)?;
        let m = max_entropy_over_cuts(&s, 2.0)?;
        Ok((m.value, m.k))
    })?;
    let mut table = Table::new("", &["p", "sample", "t", "v", "s2_max", "k_max"]);
    for (&(i, t, w), r) in pts.iter().zip(res) {
        let h = with(head(&insts[i]), [t.into(), kinds[w].0.into()]);
        match r {
            Outcome::Done((s, k)) => table.push(with(h, [cfg.unit(s).into(), k.into()])),
            Outcome::Capped => table.push_gap(h),
        }
    }
    Ok(vec![table])
}

pub(super) fn rbar_decay(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let n = cfg.t_max.max(cfg.fit_hi);
    let res = par_points(&cfg.d_values, |&d| {
        let tab = RecurrenceTable::new(d, n)?;
        let rows: Vec<(usize, f64)> = (cfg.t_min.max(2)..=cfg.t_max).map(|t| Ok((t, tab.ln_rbar(t, t / 2)?))).collect::<Result<_>>()?;
        Ok((rows, tab.fit_decay(cfg.fit_lo, cfg.fit_hi)?))
    })?;
    let mut series = Table::new("", &["d", "t", "t1", "rbar", "ln_rbar"]);
    let mut fits = Table::new("-fit", &["d", "lo", "hi", "slope", "intercept", "target"]);
    for (&d, r) in cfg.d_values.iter().zip(res) {
        if let Outcome::Done((rows, fit)) = r {
            for (t, l) in rows {
                series.push(vec![d.into(), t.into(), (t / 2).into(), l.exp().into(), l.into()]);
            }
            fits.push(vec![d.into(), cfg.fit_lo.into(), cfg.fit_hi.into(), fit.slope.into(), fit.intercept.into(), (-1.25).into()]);
        }
    }
    Ok(vec![series, fits])
}

pub(super) fn temporal_vs_spatial(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let insts = instances(cfg)?;
    let pts = t_points(cfg, &insts);
    let kind = cfg.path.kind();
    let res = par_points(&pts, |&(i, t)| {
        let s = left(cfg, &insts[i], kind, 2 * t)?;
        let mx = max_entropy_over_cuts(&s, 2.0)?.value;
        let at = entropy_at_ratio(&s, cfg.cut.ratio(), 2.0)?;
        let pur = spatial_purity(&insts[i].circuit, 2 * t, cfg.cap())?;
        Ok((mx, at, -pur.ln()))
    })?;
    let mut table = Table::new("", &["p", "sample", "t", "temporal_s2_max", "temporal_s2_cut", "spatial_s2"]);
    for (&(i, t), r) in pts.iter().zip(res) {
        let h = with(head(&insts[i]), [t.into()]);
        match r {
            Outcome::Done((a, b, c)) => table.push(with(h, [cfg.unit(a).into(), cfg.unit(b).into(), cfg.unit(c).into()])),
            Outcome::Capped => table.push_gap(h),
        }
    }
    Ok(vec![table])
}

/// Grid of interior cut ratios and slopes in `[0, 1]`.
pub(crate) fn membrane_grid(g: usize) -> (Vec<f64>, Vec<f64>) {
    let rs = (0..g).map(|i| (i + 1) as f64 / (g + 1) as f64).collect();
    let vs = (0..g).map(|j| j as f64 / (g - 1) as f64).collect();
    (rs, vs)
}

pub(super) fn membrane(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let (rs, vs) = membrane_grid(cfg.grid);
    let mut pts = Vec::with_capacity(cfg.d_values.len() * rs.len() * vs.len());
    for &d in &cfg.d_values {
        for &r in &rs {
            pts.extend(vs.iter().map(|&v| (d, r, v)));
        }
    }
    let res = par_points(&pts, |&(d, r, v)| {
        let lt = LineTension::haar(d)?;
        let h = membrane::vte2_haar(r, v, d)?;
        let g = membrane::vte2_generic(&lt, r, v)?;
        let n = membrane::vte2_numeric(&lt, r, v)?;
        Ok((h, g.value, n))
    })?;
    let mut table = Table::new("", &["d", "r", "v", "vte2", "branch", "generic", "numeric", "du_slope"]);
    for (&(d, r, v), out) in pts.iter().zip(res) {
        if let Outcome::Done((h, g, n)) = out {
            table.push(vec![
                d.into(),
                r.into(),
                v.into(),
                h.value.into(),
                (h.branch.index() as usize).into(),
                g.into(),
                n.into(),
                membrane::du_slope_s(r, v).into(),
            ]);
        }
    }
    Ok(vec![table])
}

/// `diag(1, w, w^2, ...)` with `w = exp(2 pi i / d)`: Pauli Z for qubits.
pub fn clock(d: usize) -> CMat {
    Mat::from_fn(d, d, |i, j| if i == j { C64::from_polar(1.0, 2.0 * std::f64::consts::PI * i as f64 / d as f64) } else { C64::new(0.0, 0.0) })
}

pub(super) fn correlate(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let insts = instances(cfg)?;
    let z = clock(cfg.d);
    let zd = linalg::adjoint(&z);
    let pts: Vec<(usize, usize, i64)> =
        t_points(cfg, &insts).into_iter().flat_map(|(i, t)| (0..=2 * t as i64).map(move |x| (i, t, x))).collect();
    let res = par_points(&pts, |&(i, t, x)| {
        let a = Local { op: &zd, qudit: 0, t: 0 };
        let b = Local { op: &z, qudit: x, t: t as u32 };
        let plan = plan_correlator(0, 0, x, t as u32)?;
        Ok((plan.regime, correlator(&insts[i].circuit, &a, &b, cfg.cap())?))
    })?;
    let mut table = Table::new("", &["p", "sample", "t", "x", "regime", "re", "im"]);
    for (&(i, t, x), r) in pts.iter().zip(res) {
        let h = with(head(&insts[i]), [t.into(), x.into()]);
        match r {
            Outcome::Done((reg, c)) => {
                let name = match reg {
                    Regime::I => "I",
                    Regime::II => "II",
                    Regime::Disconnected => "disconnected",
                };
                table.push(with(h, [name.into(), c.re.into(), c.im.into()]));
            }
            Outcome::Capped => table.push_gap(h),
        }
    }
    Ok(vec![table])
}
