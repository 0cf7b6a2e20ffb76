//! A periodically forced saddle-node toy model for tipping phenomena.
//!
//! After the substitution a = ã − 𝒜 sin(2πθ) and the scalings δ̃ = ε³ν,
//! ω = ε^α, the model reads
//!
//! ```text
//!   z′ = a − z²
//!   θ′ = ε^α
//!   a′ = −2π ε^α 𝒜 cos(2πθ) − ε³ ν
//! ```
//!
//! The critical manifold is z² = a with a fold cycle at z = a = 0.  For
//! α ∈ {1, 2} the reduced flow on the manifold is Hamiltonian with
//! H(z, θ) = (𝒜/2) sin(2πθ) + z²/2 and carries a folded saddle at
//! (0, 1/4) and a folded center at (0, 3/4).  Initial angles inside the
//! canard-bounded window jump at an explicitly computable angle θ_e; this
//! module evaluates those formulas and checks them against direct
//! simulation.

use crate::error::{FclError, Result};
use crate::integrator::{integrate_to_event, EventDirection, EventSpec, IntegratorConfig};
use crate::model::ScalingRegime;
use crate::special::brent_root;

use std::f64::consts::PI;

/// Parameters of the tipping model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TippingSpec {
    /// Forcing amplitude 𝒜 > 0.
    pub amplitude: f64,
    /// Slow drift rate ν > 0.
    pub nu: f64,
    pub regime: ScalingRegime,
    /// Entry/exit radius R > 0 with R² < 2𝒜.
    pub r: f64,
    /// Annular-entry height ρ with ρ² > R².
    pub rho: f64,
}

impl TippingSpec {
    pub fn new(amplitude: f64, nu: f64, regime: ScalingRegime, r: f64, rho: f64) -> Result<Self> {
        if !(amplitude > 0.0) {
            return Err(FclError::Domain(format!(
                "TippingSpec: amplitude must be > 0, got {amplitude}"
            )));
        }
        if !(nu > 0.0) {
            return Err(FclError::Domain(format!(
                "TippingSpec: nu must be > 0, got {nu}"
            )));
        }
        if !(r > 0.0 && r * r < 2.0 * amplitude) {
            return Err(FclError::Domain(format!(
                "TippingSpec: need 0 < R² < 2A, got R = {r}, A = {amplitude}"
            )));
        }
        if !(rho * rho > r * r) {
            return Err(FclError::Domain(format!(
                "TippingSpec: need rho² > R², got rho = {rho}, R = {r}"
            )));
        }
        Ok(TippingSpec {
            amplitude,
            nu,
            regime,
            r,
            rho,
        })
    }

    /// Desk-scale defaults (𝒜 = 0.5, R = 0.3, ν = 1, ρ = 0.5): moderate
    /// transit times with all smallness hypotheses comfortably satisfied.
    pub fn desk(regime: ScalingRegime) -> Self {
        TippingSpec::new(0.5, 1.0, regime, 0.3, 0.5).expect("static desk parameters")
    }

    /// The full field in (z, θ, a) coordinates.
    pub fn rhs(&self, s: &[f64; 3]) -> [f64; 3] {
        let e1 = self.regime.eps1();
        let e2 = self.regime.eps2();
        [
            s[2] - s[0] * s[0],
            e1,
            -2.0 * PI * e1 * self.amplitude * (2.0 * PI * s[1]).cos() - e2 * self.nu,
        ]
    }
}

/// The conserved quantity of the desingularized reduced flow,
/// H(z, θ) = (𝒜/2) sin(2πθ) + z²/2.
pub fn tipping_hamiltonian(z: f64, theta: f64, amplitude: f64) -> f64 {
    0.5 * amplitude * (2.0 * PI * theta).sin() + 0.5 * z * z
}

/// The desingularized reduced field on the critical manifold, state (z, θ):
/// ż = −π𝒜 cos(2πθ), θ̇ = z.
pub fn tipping_desingularized_rhs(s: &[f64; 2], amplitude: f64) -> [f64; 2] {
    [-PI * amplitude * (2.0 * PI * s[1]).cos(), s[0]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoldedKind {
    Saddle,
    Center,
}

/// A folded singularity of the reduced flow on the fold cycle z = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldedSingularity {
    pub z: f64,
    pub theta: f64,
    pub kind: FoldedKind,
    /// Eigenvalues of the desingularized-reduced Jacobian, as (re, im) pairs.
    pub eigenvalues: [(f64, f64); 2],
}

/// The two folded singularities: a neutral folded saddle at (0, 1/4) and a
/// folded center at (0, 3/4), classified from the Jacobian
/// [[0, 2π²𝒜 sin(2πθ)], [1, 0]] of the desingularized reduced flow.
pub fn tipping_folded_singularities(amplitude: f64) -> Result<[FoldedSingularity; 2]> {
    if !(amplitude > 0.0) {
        return Err(FclError::Domain(format!(
            "tipping_folded_singularities: amplitude must be > 0, got {amplitude}"
        )));
    }
    let mut out = [FoldedSingularity {
        z: 0.0,
        theta: 0.0,
        kind: FoldedKind::Saddle,
        eigenvalues: [(0.0, 0.0); 2],
    }; 2];
    for (slot, theta) in [(0usize, 0.25f64), (1, 0.75)] {
        // Jacobian of (ż, θ̇) = (−π𝒜 cos 2πθ, z): trace 0,
        // det = −2π²𝒜 sin(2πθ).
        let det = -2.0 * PI * PI * amplitude * (2.0 * PI * theta).sin();
        let (kind, eigenvalues) = if det < 0.0 {
            let lam = (-det).sqrt();
            (FoldedKind::Saddle, [(lam, 0.0), (-lam, 0.0)])
        } else {
            let om = det.sqrt();
            (FoldedKind::Center, [(0.0, om), (0.0, -om)])
        };
        out[slot] = FoldedSingularity {
            z: 0.0,
            theta,
            kind,
            eigenvalues,
        };
    }
    Ok(out)
}

/// The canard-window endpoints (θ_l, θ_r) where the entry circle {z = R} on
/// the attracting sheet meets the singular canard cycle: both solve
/// sin(2πθ) = 1 − R²/𝒜, with θ_l ∈ (1/4, 3/4] and θ_r ∈ (3/4, 1) ∪ [0, 1/4).
pub fn tipping_interval(r: f64, amplitude: f64) -> Result<(f64, f64)> {
    if !(amplitude > 0.0 && r > 0.0 && r * r < 2.0 * amplitude) {
        return Err(FclError::Domain(format!(
            "tipping_interval: need 0 < R² < 2A, got R = {r}, A = {amplitude}"
        )));
    }
    let s = 1.0 - r * r / amplitude;
    let phi = s.asin();
    let theta_l = 0.5 - phi / (2.0 * PI);
    let theta_r = (phi / (2.0 * PI)).rem_euclid(1.0);
    Ok((theta_l, theta_r))
}

/// Signed distance of θ (mod 1) to the boundary of the jump window
/// 𝓘 = (θ_l, θ_r + 1): positive inside the window, negative outside, with
/// magnitude equal to the circle distance to the nearer endpoint.
fn window_position(theta: f64, theta_l: f64, theta_r: f64) -> f64 {
    let lifted = theta_l + (theta - theta_l).rem_euclid(1.0);
    let inside = lifted > theta_l && lifted < theta_r + 1.0;
    let circ = |p: f64, q: f64| {
        let d = (p - q).rem_euclid(1.0);
        d.min(1.0 - d)
    };
    let dist = circ(theta, theta_l).min(circ(theta, theta_r));
    if inside {
        dist
    } else {
        -dist
    }
}

/// The singular jump angle θ_e(θ) = (1/2π) arcsin(sin(2πθ) + R²/𝒜), mapped
/// into (3/4, 1) ∪ [0, 1/4).
///
/// Requires θ (mod 1) inside the jump window 𝓘; outside it the level
/// H = K(θ) exceeds the canard level and no jump angle exists.
pub fn tipping_theta_e(theta: f64, r: f64, amplitude: f64) -> Result<f64> {
    let (theta_l, theta_r) = tipping_interval(r, amplitude)?;
    let dist = window_position(theta, theta_l, theta_r);
    if dist <= 0.0 {
        return Err(FclError::Domain(format!(
            "tipping_theta_e: theta = {theta} outside the jump window ({theta_l}, {})",
            theta_r + 1.0
        )));
    }
    let arg = (2.0 * PI * theta).sin() + r * r / amplitude;
    if !(-1.0..=1.0).contains(&arg) {
        return Err(FclError::Domain(format!(
            "tipping_theta_e: arcsin argument {arg} outside [-1, 1]"
        )));
    }
    Ok((arg.asin() / (2.0 * PI)).rem_euclid(1.0))
}

/// Transit time from the annular entry {a = ρ²} down to {a = R²}: the
/// minimal positive root T of
/// ρ² + 𝒜 sin(2πθ) − R² = ε³νT + 𝒜 sin(2π(θ + ε^α T)).
///
/// The left side is the available budget; the decoupled (θ, a) subsystem
/// gives the right side exactly.  T is bracketed by a forward scan in steps
/// of min(ε^{−α}, ε^{−3})/1024 (so no earlier sign change can be skipped at
/// the forcing's scale), then polished by Brent to residual ≤ 1e−10.
pub fn tipping_transit_time(theta: f64, spec: &TippingSpec) -> Result<f64> {
    let eps = spec.regime.eps;
    let e1 = spec.regime.eps1();
    let e2 = spec.regime.eps2();
    let amp = spec.amplitude;
    let budget = spec.rho * spec.rho - spec.r * spec.r;
    let g = |t: f64| {
        e2 * spec.nu * t + amp * (2.0 * PI * (theta + e1 * t)).sin()
            - (budget + amp * (2.0 * PI * theta).sin())
    };
    let step = eps.powi(-(spec.regime.alpha.min(3) as i32)) / 1024.0;
    // The linear drift alone exhausts the budget (plus the full forcing
    // swing) by this time, so a root must be bracketed before it.
    let horizon = (budget + 2.0 * amp) / (e2 * spec.nu) + step;
    let mut t0 = 0.0;
    let mut g0 = g(0.0);
    if g0 >= 0.0 {
        return Err(FclError::Domain(
            "tipping_transit_time: entry already at or below the target level".into(),
        ));
    }
    let mut bracket = None;
    while t0 < horizon {
        let t1 = t0 + step;
        let g1 = g(t1);
        if g1 >= 0.0 {
            bracket = Some((t0, t1));
            break;
        }
        t0 = t1;
        g0 = g1;
    }
    let _ = g0;
    let (lo, hi) =
        bracket.ok_or_else(|| FclError::NoBracket(format!(
            "tipping_transit_time: no sign change of the transit equation in (0, {horizon})"
        )))?;
    let mut t = brent_root(g, lo, hi, 1e-14)?;
    // Newton polish to push the residual itself below 1e-10.
    for _ in 0..4 {
        let dg = e2 * spec.nu + 2.0 * PI * e1 * amp * (2.0 * PI * (theta + e1 * t)).cos();
        if dg != 0.0 {
            t -= g(t) / dg;
        }
    }
    if g(t).abs() > 1e-10 {
        return Err(FclError::NoConvergence(format!(
            "tipping_transit_time: residual {} > 1e-10 at T = {t}",
            g(t)
        )));
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TippingClass {
    /// Entry angle safely inside the jump window: θ_e applies.
    RegularJump,
    /// Entry angle within the margin of the window boundary; the orbit
    /// shadows the canard and no quantitative prediction is made.
    CanardAdjacent,
    /// Entry angle outside the window: the reduced orbit recirculates.
    Exterior,
}

/// Outcome of one simulated passage to the exit section {z = −R}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TippingJumpReport {
    pub class: TippingClass,
    pub theta0: f64,
    /// Exit angle mod 1.
    pub theta_exit: f64,
    pub a_exit: f64,
    pub transit_time: f64,
    /// Predicted jump angle (regular-jump entries only).
    pub theta_e: Option<f64>,
    /// Circle distance |θ_exit − θ_e| (regular-jump entries only).
    pub theta_error: Option<f64>,
}

/// Margin (in θ) around the window boundary inside which an orbit is
/// reported as canard-adjacent rather than compared against θ_e.
const CANARD_MARGIN: f64 = 0.02;

/// Integrates the full tipping field from the entry section {a = R²} to the
/// exit section {z = −R}.
///
/// Entries well inside the jump window are classified as regular jumps and
/// compared against θ_e; entries within `CANARD_MARGIN` of the boundary are
/// reported canard-adjacent with no prediction; exterior entries recirculate
/// on the attracting sheet and produce `NoEvent` at the horizon (the slow
/// ε³ν drift would only tip them on a far longer time scale).
pub fn tipping_simulate(spec: &TippingSpec, theta0: f64, z0: f64) -> Result<TippingJumpReport> {
    if !(z0 > 0.0) {
        return Err(FclError::Domain(format!(
            "tipping_simulate: entry z must be on the attracting side (z > 0), got {z0}"
        )));
    }
    let (theta_l, theta_r) = tipping_interval(spec.r, spec.amplitude)?;
    let dist = window_position(theta0, theta_l, theta_r);
    let class = if dist > CANARD_MARGIN {
        TippingClass::RegularJump
    } else if dist > -CANARD_MARGIN {
        TippingClass::CanardAdjacent
    } else {
        TippingClass::Exterior
    };

    let field = |_t: f64, s: &[f64; 3]| spec.rhs(s);
    let r_exit = spec.r;
    let mut events = [EventSpec::terminal(
        move |s: &[f64; 3]| s[0] + r_exit,
        EventDirection::Falling,
    )];
    // Regular jumps exit within O(1) reduced time; three reduced periods
    // leave recirculating orbits untouched by the ε³ν drift.
    let horizon = 3.0 / spec.regime.eps1() + 100.0;
    let cfg = IntegratorConfig::default();
    let out = integrate_to_event(
        &field,
        [z0, theta0, spec.r * spec.r],
        &mut events,
        horizon,
        &cfg,
    )?;

    let theta_exit = out.state[1].rem_euclid(1.0);
    let (theta_e, theta_error) = if class == TippingClass::RegularJump {
        let te = tipping_theta_e(theta0, spec.r, spec.amplitude)?;
        let d = (theta_exit - te).rem_euclid(1.0);
        (Some(te), Some(d.min(1.0 - d)))
    } else {
        (None, None)
    };
    Ok(TippingJumpReport {
        class,
        theta0,
        theta_exit,
        a_exit: out.state[2],
        transit_time: out.time,
        theta_e,
        theta_error,
    })
}
