//! Natural-parameter continuation of stationary states in `gamma` or `na`,
//! with fold, pitchfork and crossing detection.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{comp, PhysicalParams, VariationalState, COMPONENTS_PER_GAUSSIAN};
use crate::stability::{stability_spectrum_with, StabilityOptions};
use crate::stationary::{newton, NewtonOptions, StationaryState, Symmetry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Gamma,
    Na,
}

impl SweepAxis {
    pub fn get(&self, p: &PhysicalParams) -> f64 {
        match self {
            SweepAxis::Gamma => p.gamma,
            SweepAxis::Na => p.na,
        }
    }

    pub fn set(&self, p: &mut PhysicalParams, v: f64) {
        match self {
            SweepAxis::Gamma => p.gamma = v,
            SweepAxis::Na => p.na = v,
        }
    }

    pub fn other(&self) -> SweepAxis {
        match self {
            SweepAxis::Gamma => SweepAxis::Na,
            SweepAxis::Na => SweepAxis::Gamma,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StepControl {
    pub initial: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Successes before the step is doubled.
    pub grow_after: usize,
    /// Corrector may move at most `max(jump_abs, jump_rel * |predictor - last|)`
    /// away from the predictor.
    pub jump_abs: f64,
    pub jump_rel: f64,
    pub with_stability: bool,
    pub newton: NewtonOptions,
    pub stability: StabilityOptions,
    /// Size of the forward jump used to pass crossings.
    pub jump_length: f64,
    /// Offset in the other parameter for detours around crossings.
    pub detour: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            initial: 1e-3,
            min_step: 1e-8,
            max_step: 1e-2,
            grow_after: 5,
            jump_abs: 2e-2,
            jump_rel: 1.0,
            with_stability: false,
            newton: NewtonOptions {
                max_iter: 25,
                ..Default::default()
            },
            stability: StabilityOptions::default(),
            jump_length: 2e-2,
            detour: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StabilitySummary {
    pub stable: bool,
    pub max_re: f64,
    /// Smallest non-gauge `|Lambda|`.
    pub min_abs: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BranchPoint {
    pub param: f64,
    pub state: StationaryState,
    pub stability: Option<StabilitySummary>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Termination {
    Target,
    /// The corrector failed for every step down to `min_step`.
    FoldSuspected { bracket: (f64, f64) },
    /// A broken branch reached the symmetric manifold.
    SymmetryRestored { bracket: (f64, f64) },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Tangent,
    Pitchfork,
    MergeE,
    CrossingNoEp,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BifurcationEvent {
    pub kind: EventKind,
    pub location: f64,
    pub uncertainty: f64,
    pub participants: Vec<String>,
    /// Fitted exponent for tangent events.
    pub exponent: Option<f64>,
    /// Second estimate (stability-based for pitchforks).
    pub alternative: Option<f64>,
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Branch {
    pub swept_param: SweepAxis,
    pub label: Option<String>,
    pub points: Vec<BranchPoint>,
    pub events: Vec<BifurcationEvent>,
    pub termination: Termination,
    /// Parameter intervals that could not be filled.
    pub holes: Vec<(f64, f64)>,
}

impl Branch {
    pub fn last(&self) -> &BranchPoint {
        self.points.last().expect("branch has a start point")
    }

    pub fn params(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.param).collect()
    }

    fn name(&self) -> String {
        self.label.clone().unwrap_or_else(|| "unlabelled".into())
    }
}

/// Gauge-fixed canonical components plus `mu`, with `Im gamma` unwrapped
/// towards `reference`.
fn coordinates(s: &StationaryState, reference: Option<&[f64]>) -> Vec<f64> {
    let mut v = s.state.canonical().gauge_fixed().to_components().to_vec();
    if let Some(r) = reference {
        for k in 0..2 {
            let i = k * COMPONENTS_PER_GAUSSIAN + comp::IM_G;
            v[i] += 2.0 * PI * ((r[i] - v[i]) / (2.0 * PI)).round();
        }
    }
    v.push(s.mu.re);
    v.push(s.mu.im);
    v
}

fn state_from(coords: &[f64], template: &VariationalState) -> VariationalState {
    let n = template.to_components().len();
    VariationalState::from_components(&coords[..n], template.params)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() - 2;
    a[..n].iter().zip(&b[..n]).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

enum Attempt {
    Accepted(BranchPoint),
    Restored(BranchPoint),
    Jump,
    Failed,
}

struct Sweeper<'a> {
    axis: SweepAxis,
    ctrl: &'a StepControl,
}

impl Sweeper<'_> {
    fn summarize(&self, s: &StationaryState) -> Option<StabilitySummary> {
        if !self.ctrl.with_stability {
            return None;
        }
        let spec = stability_spectrum_with(s, &self.ctrl.stability).ok()?;
        let min_abs = spec
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(i, _)| !spec.zero_indices.contains(i))
            .map(|(_, l)| l.norm())
            .fold(f64::INFINITY, f64::min);
        Some(StabilitySummary {
            stable: spec.stable,
            max_re: spec.max_re,
            min_abs,
        })
    }

    fn point(&self, s: StationaryState) -> BranchPoint {
        BranchPoint {
            param: self.axis.get(&s.state.params),
            stability: self.summarize(&s),
            state: s,
        }
    }

    fn predict(&self, points: &[BranchPoint], param: f64) -> Vec<f64> {
        let last = &points[points.len() - 1];
        let c1 = coordinates(&last.state, None);
        if points.len() < 2 {
            return c1;
        }
        let prev = &points[points.len() - 2];
        let c0 = coordinates(&prev.state, Some(&c1));
        let t = (param - last.param) / (last.param - prev.param);
        c1.iter().zip(&c0).map(|(a, b)| a + t * (a - b)).collect()
    }

    fn attempt(&self, points: &[BranchPoint], param: f64) -> Attempt {
        let last = points.last().unwrap();
        let predicted = self.predict(points, param);
        let mut params = last.state.state.params;
        self.axis.set(&mut params, param);
        let guess = state_from(&predicted, &last.state.state);
        let mu = C64::new(predicted[predicted.len() - 2], predicted[predicted.len() - 1]);
        let Ok(mut s) = newton(&guess, &params, &self.ctrl.newton, Some(mu)) else {
            return Attempt::Failed;
        };
        s.label = last.state.label.clone();
        let c_last = coordinates(&last.state, None);
        let c_new = coordinates(&s, Some(&c_last));
        let moved = distance(&c_new, &predicted);
        let bound = self
            .ctrl
            .jump_abs
            .max(self.ctrl.jump_rel * distance(&predicted, &c_last));
        let restored = last.state.symmetry == Symmetry::PtBroken && s.symmetry == Symmetry::PtSymmetric;
        if restored && (moved <= bound || last.state.pt_residual < 1e-2) {
            return Attempt::Restored(self.point(s));
        }
        if moved > bound || restored {
            return Attempt::Jump;
        }
        Attempt::Accepted(self.point(s))
    }
}

/// Sweeps `start` along `axis` towards `target`.
pub fn sweep_branch(
    start: &StationaryState,
    axis: SweepAxis,
    target: f64,
    ctrl: &StepControl,
) -> Result<Branch> {
    let sw = Sweeper { axis, ctrl };
    let p0 = axis.get(&start.state.params);
    let mut branch = Branch {
        swept_param: axis,
        label: start.label.clone(),
        points: vec![sw.point(start.clone())],
        events: Vec::new(),
        termination: Termination::Target,
        holes: Vec::new(),
    };
    if target == p0 {
        return Ok(branch);
    }
    let dir = (target - p0).signum();
    let mut step = ctrl.initial;
    let mut successes = 0;
    let mut jumps = 0;
    loop {
        let last = branch.last().param;
        if (target - last) * dir <= 0.0 {
            break;
        }
        let param = if (target - last).abs() <= step { target } else { last + dir * step };
        match sw.attempt(&branch.points, param) {
            Attempt::Accepted(p) => {
                branch.points.push(p);
                successes += 1;
                jumps = 0;
                if successes >= ctrl.grow_after {
                    step = (2.0 * step).min(ctrl.max_step);
                    successes = 0;
                }
            }
            Attempt::Restored(p) => {
                branch.termination = Termination::SymmetryRestored {
                    bracket: ordered(last, p.param),
                };
                return Ok(branch);
            }
            outcome => {
                if matches!(outcome, Attempt::Jump) {
                    jumps += 1;
                }
                successes = 0;
                step *= 0.5;
                if step < ctrl.min_step {
                    if jumps > 0 {
                        if let Some(next) = handle_crossing(&mut branch, &sw, target, dir)? {
                            step = next;
                            jumps = 0;
                            continue;
                        }
                    }
                    branch.termination = Termination::FoldSuspected {
                        bracket: ordered(last, last + dir * 2.0 * ctrl.min_step),
                    };
                    return Ok(branch);
                }
            }
        }
    }
    Ok(branch)
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    (a.min(b), a.max(b))
}

/// Passes a region where the corrector keeps landing on another branch:
/// first a detour through the other parameter, then a forward jump with
/// backward fill. Returns the step size to resume with, or `None` when
/// both fail (the caller records a fold or hole).
fn handle_crossing(branch: &mut Branch, sw: &Sweeper, target: f64, dir: f64) -> Result<Option<f64>> {
    let ctrl = sw.ctrl;
    let last = branch.last().clone();
    let jump_to = last.param + dir * ctrl.jump_length.min((target - last.param).abs());
    // Detour: shift the other parameter, pass in the swept one, shift back.
    let other = sw.axis.other();
    let base = other.get(&last.state.state.params);
    let mut detour_ok = None;
    for sign in [1.0, -1.0] {
        let Ok(out) = sweep_branch(&last.state, other, base + sign * ctrl.detour, ctrl) else {
            continue;
        };
        if out.termination != Termination::Target {
            continue;
        }
        let Ok(across) = sweep_branch(&out.last().state, sw.axis, jump_to, ctrl) else {
            continue;
        };
        if across.termination != Termination::Target {
            continue;
        }
        let Ok(back) = sweep_branch(&across.last().state, other, base, ctrl) else {
            continue;
        };
        if back.termination == Termination::Target {
            detour_ok = Some(back.last().state.clone());
            break;
        }
    }
    let landed = match detour_ok {
        Some(s) => Some(s),
        None => {
            // Forward jump from the extrapolated predictor.
            match sw.attempt(&branch.points, jump_to) {
                Attempt::Accepted(p) => Some(p.state),
                _ => None,
            }
        }
    };
    let Some(landed) = landed else {
        return Ok(None);
    };
    // Backward fill from the landing point; it must reconnect continuously.
    let fill = sweep_branch(&landed, sw.axis, last.param, ctrl)?;
    let reconnects = fill.termination == Termination::Target
        && fill.last().state.state.parameter_distance(&last.state.state) < 1e-6;
    if reconnects {
        let mut pts: Vec<BranchPoint> = fill.points.into_iter().rev().skip(1).collect();
        branch.points.append(&mut pts);
    } else {
        branch.holes.push(ordered(last.param, jump_to));
        let mut p = sw.point(landed);
        p.param = jump_to;
        branch.points.push(p);
    }
    Ok(Some(ctrl.initial))
}

/// Least-squares line `y = a + b x`; returns `(a, b, rms residual)`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rms = (x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum::<f64>() / n).sqrt();
    (a, b, rms)
}

/// Coordinates of `branch` solved afresh at `param`, starting from its
/// nearest point. Rejected if Newton lands on `other`.
fn partner_at(branch: &Branch, param: f64, other: &[f64]) -> Option<Vec<f64>> {
    let start = branch
        .points
        .iter()
        .min_by(|x, y| (x.param - param).abs().total_cmp(&(y.param - param).abs()))?;
    let mut params = *start.state.params();
    branch.swept_param.set(&mut params, param);
    let mut seed = start.state.state;
    seed.params = params;
    let s = newton(&seed, &params, &NewtonOptions::default(), Some(start.state.mu)).ok()?;
    let c = coordinates(&s, Some(other));
    let own = coordinates(&start.state, Some(other));
    (distance(&c, &own) < distance(&c, other)).then_some(c)
}

/// Linear interpolation of branch coordinates at `param`.
fn interpolate(branch: &Branch, param: f64, reference: &[f64]) -> Option<Vec<f64>> {
    let pts = &branch.points;
    for w in pts.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if (param - a.param) * (param - b.param) <= 0.0 && a.param != b.param {
            let t = (param - a.param) / (b.param - a.param);
            let ca = coordinates(&a.state, Some(reference));
            let cb = coordinates(&b.state, Some(reference));
            return Some(ca.iter().zip(&cb).map(|(x, y)| x + t * (y - x)).collect());
        }
    }
    None
}

/// Fold from two branches that end together: fits the squared distance
/// between them as linear in the parameter, then checks the exponent of
/// `d ~ |p_c - p|^alpha` on a log-log fit.
pub fn locate_fold(a: &Branch, b: &Branch) -> Result<BifurcationEvent> {
    let (end_a, end_b) = (a.last().param, b.last().param);
    // Closest points to the fold first; widen the window until the fit has
    // enough support.
    let mut near: Vec<&BranchPoint> = a.points.iter().collect();
    near.sort_by(|x, y| (x.param - end_a).abs().total_cmp(&(y.param - end_a).abs()));
    let mut window = 1e-5;
    let chosen = loop {
        let c: Vec<&BranchPoint> = near.iter().copied().filter(|p| (p.param - end_a).abs() <= window).collect();
        if c.len() >= 6 || c.len() == near.len() {
            break c;
        }
        window *= 4.0;
    };
    let mut ps = Vec::new();
    let mut ds = Vec::new();
    for p in chosen {
        let ca = coordinates(&p.state, None);
        if let Some(cb) = partner_at(b, p.param, &ca) {
            ps.push(p.param);
            ds.push(distance(&ca, &cb));
        }
    }
    if ps.len() < 4 {
        return Err(Error::Unclassified(format!(
            "fold fit needs overlapping branch ends ({end_a} vs {end_b})"
        )));
    }
    let fit = fold_from_distances(&ps, &ds)?;
    Ok(BifurcationEvent {
        kind: EventKind::Tangent,
        location: fit.location,
        uncertainty: fit.uncertainty.max((end_a - end_b).abs()),
        participants: vec![a.name(), b.name()],
        exponent: Some(fit.exponent),
        alternative: None,
        flagged: false,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct FoldFit {
    pub location: f64,
    pub uncertainty: f64,
    /// Slope of `ln d` against `ln |p_c - p|`.
    pub exponent: f64,
}

/// Fold location from branch separations `ds` at parameters `ps`: `d^2` is
/// fitted as linear in the parameter and extrapolated to zero.
pub fn fold_from_distances(ps: &[f64], ds: &[f64]) -> Result<FoldFit> {
    if ps.len() != ds.len() || ps.len() < 3 {
        return Err(Error::Unclassified("fold fit needs at least three samples".into()));
    }
    let d2: Vec<f64> = ds.iter().map(|d| d * d).collect();
    let (i0, slope, rms) = linear_fit(ps, &d2);
    let pc = -i0 / slope;
    let scale = d2.iter().cloned().fold(0.0, f64::max);
    if !pc.is_finite() || rms > 0.05 * scale {
        return Err(Error::Unclassified(format!("poor fold fit (rms {rms:.3e})")));
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = ps
        .iter()
        .zip(ds)
        .filter(|(p, d)| (pc - **p).abs() > 0.0 && **d > 0.0)
        .map(|(p, d)| ((pc - p).abs().ln(), d.ln()))
        .unzip();
    let exponent = if lx.len() >= 3 { linear_fit(&lx, &ly).1 } else { f64::NAN };
    let span = ps.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - ps.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(FoldFit {
        location: pc,
        uncertainty: (rms / slope.abs()).max(1e-12 * span),
        exponent,
    })
}

/// Pitchfork where a broken branch rejoins a symmetric one. The energy
/// estimate extrapolates `pt_residual^2` (linear in the parameter) to zero;
/// the stability estimate bisects the stability change of the symmetric
/// branch, when it carries stability data.
pub fn locate_pitchfork(symmetric: &Branch, broken: &Branch, ctrl: &StepControl) -> Result<BifurcationEvent> {
    let pts: Vec<&BranchPoint> = broken
        .points
        .iter()
        .filter(|p| p.state.symmetry == Symmetry::PtBroken)
        .collect();
    if pts.len() < 3 {
        return Err(Error::Unclassified("broken branch too short for a pitchfork fit".into()));
    }
    let n = pts.len().min(10);
    let tail = &pts[pts.len() - n..];
    let x: Vec<f64> = tail.iter().map(|p| p.param).collect();
    let y: Vec<f64> = tail.iter().map(|p| p.state.pt_residual.powi(2)).collect();
    let (a, b, rms) = linear_fit(&x, &y);
    let energy = -a / b;
    let uncertainty = (rms / b.abs()).max(match broken.termination {
        Termination::SymmetryRestored { bracket } => bracket.1 - bracket.0,
        _ => 0.0,
    });
    let alternative = stability_change(symmetric, ctrl).ok();
    let flagged = alternative.is_some_and(|s| (s - energy).abs() > 3.0 * uncertainty.max(1e-3));
    Ok(BifurcationEvent {
        kind: EventKind::Pitchfork,
        location: energy,
        uncertainty,
        participants: vec![symmetric.name(), broken.name()],
        exponent: None,
        alternative,
        flagged,
    })
}

/// Parameter at which a branch first loses stability, refined by bisection
/// with fresh Newton solves.
pub fn stability_change(branch: &Branch, ctrl: &StepControl) -> Result<f64> {
    let opts = StepControl {
        with_stability: true,
        ..*ctrl
    };
    let sw = Sweeper { axis: branch.swept_param, ctrl: &opts };
    let stable_at = |p: &BranchPoint| -> Option<bool> {
        p.stability.map(|s| s.stable).or_else(|| sw.summarize(&p.state).map(|s| s.stable))
    };
    let mut prev: Option<(BranchPoint, bool)> = None;
    for p in &branch.points {
        let Some(st) = stable_at(p) else { continue };
        if let Some((q, qs)) = &prev {
            if *qs && !st {
                return bisect_stability(&sw, q.clone(), p.clone());
            }
        }
        prev = Some((p.clone(), st));
    }
    Err(Error::Undefined)
}

fn bisect_stability(sw: &Sweeper, mut lo: BranchPoint, mut hi: BranchPoint) -> Result<f64> {
    while (hi.param - lo.param).abs() > 1e-4 {
        let mid = 0.5 * (lo.param + hi.param);
        let Attempt::Accepted(p) = sw.attempt(std::slice::from_ref(&lo), mid) else {
            break;
        };
        match p.stability.map(|s| s.stable) {
            Some(true) => lo = p,
            Some(false) => hi = p,
            None => break,
        }
    }
    Ok(0.5 * (lo.param + hi.param))
}

/// Parameter values where two branches swap order in `Re E_mf` while their
/// wavefunctions stay apart.
pub fn find_crossings(a: &Branch, b: &Branch, min_distance: f64) -> Vec<BifurcationEvent> {
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for p in &a.points {
        let ca = coordinates(&p.state, None);
        let Some(cb) = interpolate(b, p.param, &ca) else {
            prev = None;
            continue;
        };
        let diff = p.state.e_mf.re - energy_at(b, p.param).unwrap_or(f64::NAN);
        if let Some((pp, pd)) = prev {
            if pd * diff < 0.0 && distance(&ca, &cb) > min_distance {
                let t = pd / (pd - diff);
                out.push(BifurcationEvent {
                    kind: EventKind::CrossingNoEp,
                    location: pp + t * (p.param - pp),
                    uncertainty: (p.param - pp).abs(),
                    participants: vec![a.name(), b.name()],
                    exponent: None,
                    alternative: None,
                    flagged: false,
                });
            }
        }
        prev = Some((p.param, diff));
    }
    out
}

fn energy_at(b: &Branch, param: f64) -> Option<f64> {
    for w in b.points.windows(2) {
        let (x, y) = (&w[0], &w[1]);
        if (param - x.param) * (param - y.param) <= 0.0 && x.param != y.param {
            let t = (param - x.param) / (y.param - x.param);
            return Some(x.state.e_mf.re + t * (y.state.e_mf.re - x.state.e_mf.re));
        }
    }
    None
}

/// Whether two fold-terminated branches end in the same bracket and
/// approach each other.
pub fn share_fold(a: &Branch, b: &Branch, tol: f64) -> bool {
    match (a.termination, b.termination) {
        (Termination::FoldSuspected { bracket: x }, Termination::FoldSuspected { bracket: y }) => {
            let close = (x.0 - y.0).abs() < tol;
            let d = a.last().state.state.parameter_distance(&b.last().state.state);
            let reach = a
                .points
                .first()
                .map(|p| p.state.state.parameter_distance(&b.points[0].state.state))
                .unwrap_or(f64::INFINITY);
            close && d < 0.5 * reach.max(1e-12)
        }
        _ => false,
    }
}

/// Builds the events among a set of branches swept along the same axis.
pub fn detect_events(branches: &[Branch], ctrl: &StepControl) -> Vec<BifurcationEvent> {
    let mut events = Vec::new();
    let mut used = vec![false; branches.len()];
    for i in 0..branches.len() {
        for j in i + 1..branches.len() {
            if used[i] || used[j] {
                continue;
            }
            if share_fold(&branches[i], &branches[j], 1e-3) {
                match locate_fold(&branches[i], &branches[j]) {
                    Ok(e) => events.push(e),
                    Err(_) => {
                        let b = match branches[i].termination {
                            Termination::FoldSuspected { bracket } => bracket,
                            _ => unreachable!(),
                        };
                        events.push(BifurcationEvent {
                            kind: EventKind::Tangent,
                            location: b.0,
                            uncertainty: b.1 - b.0,
                            participants: vec![branches[i].name(), branches[j].name()],
                            exponent: None,
                            alternative: None,
                            flagged: true,
                        });
                    }
                }
                used[i] = true;
                used[j] = true;
            }
        }
    }
    for (k, b) in branches.iter().enumerate() {
        if let Termination::SymmetryRestored { .. } = b.termination {
            let end = &b.last().state;
            let partner = branches
                .iter()
                .enumerate()
                .filter(|(m, o)| *m != k && o.points[0].state.symmetry == Symmetry::PtSymmetric)
                .min_by(|(_, x), (_, y)| {
                    let dx = nearest_distance(x, end);
                    let dy = nearest_distance(y, end);
                    dx.total_cmp(&dy)
                });
            if let Some((_, sym)) = partner {
                if let Ok(e) = locate_pitchfork(sym, b, ctrl) {
                    events.push(e);
                }
            }
        }
    }
    for i in 0..branches.len() {
        for j in i + 1..branches.len() {
            events.extend(find_crossings(&branches[i], &branches[j], 1e-2));
        }
    }
    events.sort_by(|a, b| a.location.total_cmp(&b.location));
    events
}

fn nearest_distance(b: &Branch, s: &StationaryState) -> f64 {
    b.points
        .iter()
        .map(|p| p.state.state.parameter_distance(&s.state))
        .fold(f64::INFINITY, f64::min)
}

/// When a pitchfork and a tangent lie within `tol` of each other they are
/// reported as one merge event.
pub fn merge_events(events: &mut Vec<BifurcationEvent>, tol: f64) {
    let p = events.iter().position(|e| e.kind == EventKind::Pitchfork);
    let t = events.iter().position(|e| {
        e.kind == EventKind::Tangent
            && p.is_some_and(|p| e.participants.iter().any(|x| events[p].participants.contains(x)))
    });
    if let (Some(p), Some(t)) = (p, t) {
        if (events[p].location - events[t].location).abs() < tol {
            let mut merged = events[t].clone();
            merged.kind = EventKind::MergeE;
            merged.participants.extend(events[p].participants.iter().cloned());
            merged.participants.sort();
            merged.participants.dedup();
            let (a, b) = (p.max(t), p.min(t));
            events.remove(a);
            events.remove(b);
            events.push(merged);
            events.sort_by(|a, b| a.location.total_cmp(&b.location));
        }
    }
}

pub fn mu_of(point: &BranchPoint) -> C64 {
    point.state.mu
}
