//! Adaptive explicit Runge–Kutta integration: Dormand–Prince 5(4) with FSAL,
//! Hermite dense output, section-crossing event detection (Brent in the
//! guard), and variational (sensitivity) flow with log-magnitude storage.
//!
//! Explicit-only by design: at desk scale (ε ≥ 5e-3) the stiffness ratio
//! ~ε⁻³ stays tractable, and [`FclError::StepUnderflow`] makes any
//! misconfiguration loud instead of silently crawling.

use crate::error::{FclError, Result};

/// Tolerances and budgets for one integration.
#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; `None` selects one automatically.
    pub h_init: Option<f64>,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: u64,
    /// Keep every accepted step in the returned [`Trajectory`].
    pub store_trajectory: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: None,
            h_min: 1e-14,
            h_max: f64::INFINITY,
            max_steps: 50_000_000,
            store_trajectory: false,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(FclError::Domain(
                "IntegratorConfig: tolerances must be > 0".into(),
            ));
        }
        if !(self.h_min < self.h_max) {
            return Err(FclError::Domain(
                "IntegratorConfig: need h_min < h_max".into(),
            ));
        }
        Ok(())
    }
}

/// Which zero crossings of a guard fire the event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventDirection {
    Rising,
    Falling,
    Any,
}

/// A state-space event: fires where `guard` crosses zero in `direction`.
/// Terminal events stop the integration; non-terminal ones are counted.
pub struct EventSpec<'a, const N: usize> {
    pub guard: Box<dyn Fn(&[f64; N]) -> f64 + 'a>,
    pub direction: EventDirection,
    pub terminal: bool,
}

impl<'a, const N: usize> EventSpec<'a, N> {
    pub fn terminal(guard: impl Fn(&[f64; N]) -> f64 + 'a, direction: EventDirection) -> Self {
        EventSpec {
            guard: Box::new(guard),
            direction,
            terminal: true,
        }
    }

    pub fn counting(guard: impl Fn(&[f64; N]) -> f64 + 'a, direction: EventDirection) -> Self {
        EventSpec {
            guard: Box::new(guard),
            direction,
            terminal: false,
        }
    }

    fn matches(&self, g0: f64, g1: f64) -> bool {
        match self.direction {
            EventDirection::Rising => g0 < 0.0 && g1 >= 0.0,
            EventDirection::Falling => g0 > 0.0 && g1 <= 0.0,
            EventDirection::Any => g0 * g1 <= 0.0 && g0 != g1 && g0 != 0.0,
        }
    }
}

/// Accepted steps of one run plus step statistics.
#[derive(Debug, Clone, Default)]
pub struct Trajectory<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    /// Embedded-pair error estimate (scaled norm) of each accepted step.
    pub error_estimates: Vec<f64>,
    pub accepted: u64,
    pub rejected: u64,
    pub n_rhs: u64,
}

/// Result of an event-terminated integration.
pub struct EventOutcome<const N: usize> {
    pub event_index: usize,
    pub time: f64,
    pub state: [f64; N],
    pub trajectory: Trajectory<N>,
    /// Fire counts for every event (terminal ones included).
    pub counts: Vec<u64>,
}

// Dormand–Prince 5(4) Butcher tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 5th-order weights equal the last A row (FSAL); 4th-order embedded weights:
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, ks: &[[f64; N]], ws: &[f64]) -> [f64; N] {
    let mut out = *y;
    for (k, &w) in ks.iter().zip(ws) {
        if w != 0.0 {
            for i in 0..N {
                out[i] += h * w * k[i];
            }
        }
    }
    out
}

/// One DP5 step from (t, y) with step h. Returns (y_next, k-stages); the
/// seventh stage is the FSAL slope at y_next.
pub fn dp5_step<const N: usize>(
    field: &impl Fn(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    h: f64,
    k1: Option<[f64; N]>,
) -> ([f64; N], [[f64; N]; 7]) {
    let mut k = [[0.0; N]; 7];
    k[0] = k1.unwrap_or_else(|| field(t, y));
    for s in 1..6 {
        let ys = axpy(y, h, &k[..s], &A[s - 1][..s]);
        k[s] = field(t + C[s] * h, &ys);
    }
    let y_next = axpy(y, h, &k[..6], &A[5][..6]);
    k[6] = field(t + h, &y_next);
    (y_next, k)
}

fn error_norm<const N: usize>(
    y0: &[f64; N],
    y1: &[f64; N],
    k: &[[f64; N]; 7],
    h: f64,
    cfg: &IntegratorConfig,
) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let mut e = 0.0;
        for s in 0..7 {
            let w5 = if s < 6 { A[5][s] } else { 0.0 };
            e += (w5 - B4[s]) * k[s][i];
        }
        e *= h;
        let sc = cfg.atol + cfg.rtol * y0[i].abs().max(y1[i].abs());
        acc += (e / sc) * (e / sc);
    }
    (acc / N as f64).sqrt()
}

/// Cubic Hermite interpolant on [t0, t0+h] from endpoint values and slopes.
fn hermite<const N: usize>(
    t0: f64,
    h: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    y1: &[f64; N],
    f1: &[f64; N],
    t: f64,
) -> [f64; N] {
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    }
    out
}

fn initial_step<const N: usize>(
    field: &impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    cfg: &IntegratorConfig,
) -> f64 {
    let rn = (N as f64).sqrt();
    let sc = |i: usize| cfg.atol + cfg.rtol * y0[i].abs();
    let d0 = (0..N).map(|i| (y0[i] / sc(i)).powi(2)).sum::<f64>().sqrt() / rn;
    let d1 = (0..N).map(|i| (f0[i] / sc(i)).powi(2)).sum::<f64>().sqrt() / rn;
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let mut y1 = *y0;
    for i in 0..N {
        y1[i] += h0 * f0[i];
    }
    let f1 = field(t0 + h0, &y1);
    let d2 = (0..N)
        .map(|i| ((f1[i] - f0[i]) / sc(i)).powi(2))
        .sum::<f64>()
        .sqrt()
        / rn
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(cfg.h_max)
}

/// Brent localization of an event inside a bracketing sub-interval
/// [ta, tb] of one accepted step, then a polish loop that re-steps from the
/// step start so the returned state carries full integration accuracy, with
/// |guard| ≤ 1e-12.
#[allow(clippy::too_many_arguments)]
fn locate_event<const N: usize>(
    field: &impl Fn(f64, &[f64; N]) -> [f64; N],
    ev: &EventSpec<N>,
    t0: f64,
    h: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    y1: &[f64; N],
    f1: &[f64; N],
    ta: f64,
    tb: f64,
) -> Result<(f64, [f64; N])> {
    let gfun = |tau: f64| {
        if tau <= t0 {
            (ev.guard)(y0)
        } else if tau >= t0 + h {
            (ev.guard)(y1)
        } else {
            (ev.guard)(&hermite(t0, h, y0, f0, y1, f1, tau))
        }
    };
    let mut te = crate::special::brent_root(gfun, ta, tb, 1e-13 * h.max(1e-12))?;
    // Polish on the true (single-step) solution rather than the interpolant.
    let mut ye = *y1;
    for _ in 0..12 {
        ye = if te <= t0 {
            *y0
        } else {
            dp5_step(field, t0, y0, te - t0, Some(*f0)).0
        };
        let g = (ev.guard)(&ye);
        if g.abs() <= 1e-12 {
            return Ok((te, ye));
        }
        // Newton in time: dg/dt = ∇g·f by a directional finite difference.
        let fe = field(te, &ye);
        let delta = 1e-7 * h.max(1e-9);
        let mut yp = ye;
        for i in 0..N {
            yp[i] += delta * fe[i];
        }
        let dgdt = ((ev.guard)(&yp) - g) / delta;
        if dgdt == 0.0 || !dgdt.is_finite() {
            break;
        }
        te = (te - g / dgdt).clamp(t0, t0 + h);
    }
    let g = (ev.guard)(&ye);
    if g.abs() <= 1e-10 {
        // Grazing crossing: accept with slightly relaxed precision.
        Ok((te, ye))
    } else {
        Err(FclError::NoConvergence(format!(
            "event localization stalled: |guard| = {}",
            g.abs()
        )))
    }
}

/// Shared adaptive driver. `post_accept` runs on every state about to be
/// committed and may modify it in place, returning whether it did (used for
/// variational renormalization; guards must not depend on the modified
/// components). Returns the fired terminal event (if any), the final state
/// reached, the trajectory, and per-event fire counts.
pub(crate) type DriveResult<const N: usize> = (
    Option<(usize, f64, [f64; N])>,
    [f64; N],
    Trajectory<N>,
    Vec<u64>,
);

pub(crate) fn drive<const N: usize>(
    field: &impl Fn(f64, &[f64; N]) -> [f64; N],
    y0: [f64; N],
    t_end: f64,
    events: &mut [EventSpec<'_, N>],
    cfg: &IntegratorConfig,
    mut post_accept: impl FnMut(&mut [f64; N]) -> bool,
) -> Result<DriveResult<N>> {
    cfg.validate()?;
    let mut traj = Trajectory::default();
    let mut counts = vec![0u64; events.len()];
    let mut t = 0.0;
    let mut y = y0;
    let mut f0 = field(t, &y);
    traj.n_rhs += 1;

    // Immediate firing: a terminal guard already at zero and moving in the
    // triggering direction (event idempotence).
    for (idx, ev) in events.iter().enumerate() {
        if !ev.terminal {
            continue;
        }
        let g = (ev.guard)(&y);
        if g.abs() <= 1e-12 {
            let probe = 1e-9;
            let mut yp = y;
            for i in 0..N {
                yp[i] += probe * f0[i];
            }
            let dg = (ev.guard)(&yp) - g;
            let fires = match ev.direction {
                EventDirection::Rising => dg > 0.0,
                EventDirection::Falling => dg < 0.0,
                EventDirection::Any => dg != 0.0,
            };
            if fires {
                counts[idx] += 1;
                return Ok((Some((idx, 0.0, y)), y, traj, counts));
            }
        }
    }

    let mut g_prev: Vec<f64> = events.iter().map(|e| (e.guard)(&y)).collect();
    let mut h = cfg
        .h_init
        .unwrap_or_else(|| initial_step(field, t, &y, &f0, cfg))
        .min(cfg.h_max)
        .min((t_end - t).abs().max(cfg.h_min));

    if cfg.store_trajectory {
        traj.times.push(t);
        traj.states.push(y);
        traj.error_estimates.push(0.0);
    }

    while t < t_end {
        if traj.accepted + traj.rejected >= cfg.max_steps {
            return Err(FclError::MaxSteps(format!(
                "integrator: {} steps at t = {t}",
                cfg.max_steps
            )));
        }
        if h < cfg.h_min {
            return Err(FclError::StepUnderflow(format!(
                "integrator: h = {h} below h_min at t = {t}"
            )));
        }
        let h_eff = h.min(t_end - t);
        let (y1, k) = dp5_step(field, t, &y, h_eff, Some(f0));
        traj.n_rhs += 6;
        let err = error_norm(&y, &y1, &k, h_eff, cfg);
        if !err.is_finite() {
            traj.rejected += 1;
            h *= 0.25;
            continue;
        }
        if err <= 1.0 {
            let t1 = t + h_eff;
            let f1 = k[6];

            // Scan the dense output for guard crossings on a fixed
            // sub-sampling of the step: endpoint comparison alone misses
            // steps spanning more than one crossing.
            const M: usize = 32;
            let mut fired: Option<(usize, f64, [f64; N])> = None;
            if !events.is_empty() {
                let mut samples: Vec<[f64; N]> = Vec::with_capacity(M + 1);
                samples.push(y);
                for j in 1..M {
                    let tau = t + h_eff * j as f64 / M as f64;
                    samples.push(hermite(t, h_eff, &y, &f0, &y1, &f1, tau));
                }
                samples.push(y1);
                // Pass 1: localize the earliest terminal crossing.
                for (idx, ev) in events.iter().enumerate() {
                    if !ev.terminal {
                        continue;
                    }
                    let mut gj = g_prev[idx];
                    for j in 0..M {
                        let gj1 = (ev.guard)(&samples[j + 1]);
                        if ev.matches(gj, gj1) {
                            let ta = t + h_eff * j as f64 / M as f64;
                            let tb = t + h_eff * (j + 1) as f64 / M as f64;
                            let (te, ye) =
                                locate_event(field, ev, t, h_eff, &y, &f0, &y1, &f1, ta, tb)?;
                            if fired.map_or(true, |(_, tf, _)| te < tf) {
                                fired = Some((idx, te, ye));
                            }
                            break;
                        }
                        gj = gj1;
                    }
                }
                // Pass 2: count non-terminal crossings occurring before the
                // terminal time (sub-sample crossing times by linear
                // interpolation; full localization is not needed to count).
                for (idx, ev) in events.iter().enumerate() {
                    if ev.terminal {
                        g_prev[idx] = (ev.guard)(&y1);
                        continue;
                    }
                    let mut gj = g_prev[idx];
                    for j in 0..M {
                        let gj1 = (ev.guard)(&samples[j + 1]);
                        if ev.matches(gj, gj1) {
                            let frac = if gj1 != gj { gj / (gj - gj1) } else { 0.0 };
                            let tc = t + h_eff * (j as f64 + frac) / M as f64;
                            if fired.map_or(true, |(_, tf, _)| tc <= tf) {
                                counts[idx] += 1;
                            }
                        }
                        gj = gj1;
                    }
                    g_prev[idx] = gj;
                }
            }

            if let Some((idx, te, mut ye)) = fired {
                counts[idx] += 1;
                post_accept(&mut ye);
                traj.accepted += 1;
                if cfg.store_trajectory {
                    traj.times.push(te);
                    traj.states.push(ye);
                    traj.error_estimates.push(err);
                }
                return Ok((Some((idx, te, ye)), ye, traj, counts));
            }

            t = t1;
            y = y1;
            if post_accept(&mut y) {
                f0 = field(t, &y); // renormalization invalidates the FSAL slope
                traj.n_rhs += 1;
            } else {
                f0 = f1;
            }
            traj.accepted += 1;
            if cfg.store_trajectory {
                traj.times.push(t);
                traj.states.push(y);
                traj.error_estimates.push(err);
            }
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
            h = (h_eff * fac).min(cfg.h_max);
        } else {
            traj.rejected += 1;
            h = h_eff * (0.9 * err.powf(-0.2)).max(0.1);
        }
    }
    Ok((None, y, traj, counts))
}

/// Integrates to a fixed final time; returns (t_end, final state, trajectory).
pub fn integrate<const N: usize>(
    field: &impl Fn(f64, &[f64; N]) -> [f64; N],
    y0: [f64; N],
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<(f64, [f64; N], Trajectory<N>)> {
    let mut events: [EventSpec<N>; 0] = [];
    let (_fired, state, traj, _counts) = drive(field, y0, t_end, &mut events, cfg, |_| false)?;
    Ok((t_end, state, traj))
}

/// Integrates until the first terminal event fires.
pub fn integrate_to_event<const N: usize>(
    field: &impl Fn(f64, &[f64; N]) -> [f64; N],
    y0: [f64; N],
    events: &mut [EventSpec<'_, N>],
    t_horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<EventOutcome<N>> {
    if !events.iter().any(|e| e.terminal) {
        return Err(FclError::Domain(
            "integrate_to_event: at least one terminal event required".into(),
        ));
    }
    let (fired, _state, trajectory, counts) = drive(field, y0, t_horizon, events, cfg, |_| false)?;
    match fired {
        Some((event_index, time, state)) => Ok(EventOutcome {
            event_index,
            time,
            state,
            trajectory,
            counts,
        }),
        None => Err(FclError::NoEvent(format!(
            "no terminal event within horizon {t_horizon}"
        ))),
    }
}

/// Outcome of a variational integration: event state plus the sensitivity
/// direction and its log-magnitude (stored separately to avoid underflow).
pub struct VariationalOutcome {
    pub event_index: usize,
    pub time: f64,
    pub state: [f64; 3],
    pub v_dir: [f64; 3],
    pub v_logmag: f64,
    pub accepted: u64,
    pub rejected: u64,
    pub counts: Vec<u64>,
}

/// Jointly integrates s' = f(s), v' = J(s)·v on the 3-dimensional cylinder
/// state until a terminal event.
///
/// v is renormalized to unit length after every accepted step with the
/// factor accumulated in log space, so exponentially strong contraction
/// never underflows.
pub fn integrate_variational(
    field: &impl Fn(f64, &[f64; 3]) -> [f64; 3],
    jacobian: &impl Fn(f64, &[f64; 3]) -> [[f64; 3]; 3],
    y0: [f64; 3],
    v0: [f64; 3],
    events: &mut [EventSpec<'_, 3>],
    t_horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<VariationalOutcome> {
    let aug_field = |t: f64, s: &[f64; 6]| -> [f64; 6] {
        let y = [s[0], s[1], s[2]];
        let v = [s[3], s[4], s[5]];
        let f = field(t, &y);
        let j = jacobian(t, &y);
        let mut out = [0.0; 6];
        out[..3].copy_from_slice(&f);
        for i in 0..3 {
            out[3 + i] = j[i][0] * v[0] + j[i][1] * v[1] + j[i][2] * v[2];
        }
        out
    };

    let norm0 = (v0[0] * v0[0] + v0[1] * v0[1] + v0[2] * v0[2]).sqrt();
    if norm0 == 0.0 {
        return Err(FclError::Domain(
            "integrate_variational: zero initial direction".into(),
        ));
    }
    let s0 = [y0[0], y0[1], y0[2], v0[0] / norm0, v0[1] / norm0, v0[2] / norm0];
    let logmag_cell = std::cell::Cell::new(norm0.ln());

    let mut aug_events: Vec<EventSpec<6>> = events
        .iter()
        .map(|ev| EventSpec {
            guard: {
                let g = &ev.guard;
                Box::new(move |s: &[f64; 6]| g(&[s[0], s[1], s[2]]))
            },
            direction: ev.direction,
            terminal: ev.terminal,
        })
        .collect();

    let renorm = |s: &mut [f64; 6]| {
        let n = (s[3] * s[3] + s[4] * s[4] + s[5] * s[5]).sqrt();
        if n > 0.0 {
            s[3] /= n;
            s[4] /= n;
            s[5] /= n;
            logmag_cell.set(logmag_cell.get() + n.ln());
        }
        true
    };

    // The sensitivity components are kept near unit norm, so default scaling
    // (atol + rtol·|component|) controls them adequately.
    let (fired, _final, traj, counts) = drive(&aug_field, s0, t_horizon, &mut aug_events, cfg, renorm)?;
    match fired {
        Some((event_index, time, s)) => Ok(VariationalOutcome {
            event_index,
            time,
            state: [s[0], s[1], s[2]],
            v_dir: [s[3], s[4], s[5]],
            v_logmag: logmag_cell.get(),
            accepted: traj.accepted,
            rejected: traj.rejected,
            counts,
        }),
        None => Err(FclError::NoEvent(format!(
            "variational: no terminal event within horizon {t_horizon}"
        ))),
    }
}
