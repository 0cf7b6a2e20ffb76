//! System classes: scaling regime, remainder specifications, the prototypical
//! cylinder system, sections, general systems, and normal-form extraction.

use serde::{Deserialize, Serialize};

use crate::error::{FclError, Result};
use crate::periodic::{fit_periodic, PeriodicFn, MAX_HARMONICS};

/// The two small parameters derive from a single ε: ε₁ = ε^α (rotation) and
/// ε₂ = ε³ (drift). They are always recomputed, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRegime {
    pub alpha: u32,
    pub eps: f64,
}

impl ScalingRegime {
    pub fn new(alpha: u32, eps: f64) -> Result<Self> {
        if alpha < 1 {
            return Err(FclError::Domain("ScalingRegime: alpha must be >= 1".into()));
        }
        if !(eps > 0.0) {
            return Err(FclError::Domain("ScalingRegime: eps must be > 0".into()));
        }
        Ok(ScalingRegime { alpha, eps })
    }

    /// ε₁ = ε^α, the angular speed.
    pub fn eps1(&self) -> f64 {
        self.eps.powi(self.alpha as i32)
    }

    /// ε₂ = ε³, the drift speed.
    pub fn eps2(&self) -> f64 {
        self.eps * self.eps * self.eps
    }
}

/// Which equation a remainder belongs to; fixes its admissible order class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RemainderTarget {
    /// Radial (fast) equation: O(r³, y², ry, ε^α r², ε^α y, ε³).
    Fast,
    /// Drift (slow) equation: O(r, y, ε^α, ε³).
    Slow,
}

/// One remainder monomial m(θ)·r^p·y^q·ε^s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: PeriodicFn,
    pub p: u32,
    pub q: u32,
    pub s: u32,
}

/// Order-class membership of a fast-equation monomial for a given α.
pub fn fast_class_admits(p: u32, q: u32, s: u32, alpha: u32) -> bool {
    p >= 3 || q >= 2 || (p >= 1 && q >= 1) || (s >= alpha && p >= 2) || (s >= alpha && q >= 1)
        || s >= 3
}

/// Order-class membership of a slow-equation monomial for a given α.
pub fn slow_class_admits(p: u32, q: u32, s: u32, alpha: u32) -> bool {
    p >= 1 || q >= 1 || s >= alpha || s >= 3
}

/// A sum of admissible monomials for one target equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderSpec {
    pub target: RemainderTarget,
    pub terms: Vec<Monomial>,
}

impl RemainderSpec {
    pub fn empty(target: RemainderTarget) -> Self {
        RemainderSpec {
            target,
            terms: Vec::new(),
        }
    }

    /// Validates every monomial against the order class for this α.
    pub fn validate(&self, alpha: u32) -> Result<()> {
        for m in &self.terms {
            let ok = match self.target {
                RemainderTarget::Fast => fast_class_admits(m.p, m.q, m.s, alpha),
                RemainderTarget::Slow => slow_class_admits(m.p, m.q, m.s, alpha),
            };
            if !ok {
                return Err(FclError::Domain(format!(
                    "remainder monomial r^{} y^{} eps^{} outside the {:?} order class for alpha={alpha}",
                    m.p, m.q, m.s, self.target
                )));
            }
        }
        Ok(())
    }

    /// Evaluates the remainder sum.
    ///
    /// ε-powers with s ≥ 3 are interpreted as ε^{s-3}·ε₂ so that the
    /// ε₂ → 0 layer family can be evaluated by passing `eps2` independently
    /// of `eps` (the full system passes eps2 = ε³, recovering plain ε^s).
    pub fn eval(&self, r: f64, theta: f64, y: f64, eps: f64, eps2: f64) -> f64 {
        let mut v = 0.0;
        for m in &self.terms {
            let ef = if m.s >= 3 {
                eps.powi(m.s as i32 - 3) * eps2
            } else {
                eps.powi(m.s as i32)
            };
            v += m.coeff.eval(theta) * r.powi(m.p as i32) * y.powi(m.q as i32) * ef;
        }
        v
    }

    /// ∂/∂r of [`eval`].
    pub fn d_dr(&self, r: f64, theta: f64, y: f64, eps: f64, eps2: f64) -> f64 {
        let mut v = 0.0;
        for m in &self.terms {
            if m.p == 0 {
                continue;
            }
            let ef = if m.s >= 3 {
                eps.powi(m.s as i32 - 3) * eps2
            } else {
                eps.powi(m.s as i32)
            };
            v += m.coeff.eval(theta)
                * m.p as f64
                * r.powi(m.p as i32 - 1)
                * y.powi(m.q as i32)
                * ef;
        }
        v
    }

    /// ∂/∂y of [`eval`].
    pub fn d_dy(&self, r: f64, theta: f64, y: f64, eps: f64, eps2: f64) -> f64 {
        let mut v = 0.0;
        for m in &self.terms {
            if m.q == 0 {
                continue;
            }
            let ef = if m.s >= 3 {
                eps.powi(m.s as i32 - 3) * eps2
            } else {
                eps.powi(m.s as i32)
            };
            v += m.coeff.eval(theta)
                * m.q as f64
                * r.powi(m.p as i32)
                * y.powi(m.q as i32 - 1)
                * ef;
        }
        v
    }

    /// ∂/∂θ of [`eval`].
    pub fn d_dtheta(&self, r: f64, theta: f64, y: f64, eps: f64, eps2: f64) -> f64 {
        let mut v = 0.0;
        for m in &self.terms {
            let ef = if m.s >= 3 {
                eps.powi(m.s as i32 - 3) * eps2
            } else {
                eps.powi(m.s as i32)
            };
            v += m.coeff.deriv(theta) * r.powi(m.p as i32) * y.powi(m.q as i32) * ef;
        }
        v
    }
}

/// A point on the cylinder with the angle kept as an unbounded lift.
///
/// `theta()` reduces mod 1; rotation counting always uses the lift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylState {
    pub r: f64,
    pub theta_lifted: f64,
    pub y: f64,
}

impl CylState {
    pub fn new(r: f64, theta_lifted: f64, y: f64) -> Self {
        CylState { r, theta_lifted, y }
    }

    /// The angle reduced to [0, 1).
    pub fn theta(&self) -> f64 {
        self.theta_lifted.rem_euclid(1.0)
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.r, self.theta_lifted, self.y]
    }

    pub fn from_array(s: [f64; 3]) -> Self {
        CylState {
            r: s[0],
            theta_lifted: s[1],
            y: s[2],
        }
    }
}

/// Entry annulus {y = R², r ∈ [β₋, β₊]} and exit cylinder {r = R, |y| ≤ y₀}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionSpec {
    pub r_exit: f64,
    pub beta_minus: f64,
    pub beta_plus: f64,
    pub y0: f64,
}

impl SectionSpec {
    /// β₋ = -2R, β₊ = -R/2, y₀ = R²: brackets the attracting trace -√(a/b)·R
    /// for moderate coefficient ratios.
    pub fn default_for(r_exit: f64) -> Self {
        SectionSpec {
            r_exit,
            beta_minus: -2.0 * r_exit,
            beta_plus: -0.5 * r_exit,
            y0: r_exit * r_exit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_exit > 0.0) {
            return Err(FclError::Domain("SectionSpec: R must be > 0".into()));
        }
        if !(self.beta_minus < self.beta_plus && self.beta_plus < 0.0) {
            return Err(FclError::Domain(
                "SectionSpec: need beta_minus < beta_plus < 0".into(),
            ));
        }
        if !(self.y0 > 0.0) {
            return Err(FclError::Domain("SectionSpec: y0 must be > 0".into()));
        }
        Ok(())
    }

    /// Checks that the attracting critical-manifold trace -√(a/b)·R lies
    /// strictly inside (β₋, β₊) for sampled θ.
    pub fn validate_against(&self, sys: &PrototypicalSystem) -> Result<()> {
        self.validate()?;
        for i in 0..256 {
            let th = i as f64 / 256.0;
            let trace = -(sys.a.eval(th) / sys.b.eval(th)).sqrt() * self.r_exit;
            if !(self.beta_minus < trace && trace < self.beta_plus) {
                return Err(FclError::AssumptionViolated(format!(
                    "attracting trace {trace} at theta={th} outside ({}, {})",
                    self.beta_minus, self.beta_plus
                )));
            }
        }
        Ok(())
    }

    /// Entry state at the section with the given angle and radius.
    pub fn entry(&self, r: f64, theta_lifted: f64) -> CylState {
        CylState::new(r, theta_lifted, self.r_exit * self.r_exit)
    }
}

/// The full three time-scale cylinder field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypicalSystem {
    pub a: PeriodicFn,
    pub b: PeriodicFn,
    pub c: PeriodicFn,
    pub rem_r: RemainderSpec,
    pub rem_y: RemainderSpec,
    pub regime: ScalingRegime,
}

impl PrototypicalSystem {
    /// Validated constructor: positivity certificates for a, b, c and
    /// order-class admission for the remainders.
    pub fn new(
        a: PeriodicFn,
        b: PeriodicFn,
        c: PeriodicFn,
        rem_r: RemainderSpec,
        rem_y: RemainderSpec,
        regime: ScalingRegime,
    ) -> Result<Self> {
        a.require_positive("a")?;
        b.require_positive("b")?;
        c.require_positive("c")?;
        if rem_r.target != RemainderTarget::Fast || rem_y.target != RemainderTarget::Slow {
            return Err(FclError::Domain(
                "PrototypicalSystem: rem_r must target Fast, rem_y Slow".into(),
            ));
        }
        rem_r.validate(regime.alpha)?;
        rem_y.validate(regime.alpha)?;
        Ok(PrototypicalSystem {
            a,
            b,
            c,
            rem_r,
            rem_y,
            regime,
        })
    }

    /// Constructor without the positivity certificates, for diagnostic use
    /// (e.g. feeding deliberately degenerate coefficients to the fold-condition
    /// report).
    pub fn new_unchecked(
        a: PeriodicFn,
        b: PeriodicFn,
        c: PeriodicFn,
        rem_r: RemainderSpec,
        rem_y: RemainderSpec,
        regime: ScalingRegime,
    ) -> Self {
        PrototypicalSystem {
            a,
            b,
            c,
            rem_r,
            rem_y,
            regime,
        }
    }

    /// a = b = c ≡ 1, zero remainders.
    pub fn unit(regime: ScalingRegime) -> Self {
        PrototypicalSystem {
            a: PeriodicFn::constant(1.0),
            b: PeriodicFn::constant(1.0),
            c: PeriodicFn::constant(1.0),
            rem_r: RemainderSpec::empty(RemainderTarget::Fast),
            rem_y: RemainderSpec::empty(RemainderTarget::Slow),
            regime,
        }
    }

    /// Right-hand side on the lift, at the system's own (ε₁, ε₂).
    pub fn rhs(&self, s: &[f64; 3]) -> [f64; 3] {
        self.rhs_with_eps2(s, self.regime.eps2())
    }

    /// Right-hand side with an overriding ε₂ (ε₂ = 0 gives the layer family
    /// used by the Poincaré-map fold analysis).
    pub fn rhs_with_eps2(&self, s: &[f64; 3], eps2: f64) -> [f64; 3] {
        let (r, th, y) = (s[0], s[1], s[2]);
        let eps = self.regime.eps;
        let a = self.a.eval(th);
        let b = self.b.eval(th);
        let c = self.c.eval(th);
        [
            -a * y + b * r * r + self.rem_r.eval(r, th, y, eps, eps2),
            self.regime.eps1(),
            eps2 * (-c + self.rem_y.eval(r, th, y, eps, eps2)),
        ]
    }

    /// Analytic Jacobian of [`rhs`] (the θ-row is zero: θ' is constant).
    pub fn jacobian(&self, s: &[f64; 3]) -> [[f64; 3]; 3] {
        self.jacobian_with_eps2(s, self.regime.eps2())
    }

    pub fn jacobian_with_eps2(&self, s: &[f64; 3], eps2: f64) -> [[f64; 3]; 3] {
        let (r, th, y) = (s[0], s[1], s[2]);
        let eps = self.regime.eps;
        let a = self.a.eval(th);
        let b = self.b.eval(th);
        [
            [
                2.0 * b * r + self.rem_r.d_dr(r, th, y, eps, eps2),
                -self.a.deriv(th) * y
                    + self.b.deriv(th) * r * r
                    + self.rem_r.d_dtheta(r, th, y, eps, eps2),
                -a + self.rem_r.d_dy(r, th, y, eps, eps2),
            ],
            [0.0, 0.0, 0.0],
            [
                eps2 * self.rem_y.d_dr(r, th, y, eps, eps2),
                eps2 * (-self.c.deriv(th) + self.rem_y.d_dtheta(r, th, y, eps, eps2)),
                eps2 * self.rem_y.d_dy(r, th, y, eps, eps2),
            ],
        ]
    }

    /// Field evaluation in the named-state form.
    pub fn eval_field(&self, s: &CylState) -> (f64, f64, f64) {
        let d = self.rhs(&s.to_array());
        (d[0], d[1], d[2])
    }
}

/// Solves -a(θ)y + b(θ)r² + R_r(r,θ,y,0) = 0 for y (the slow surface
/// y = φ₀(r,θ)) by damped Newton from the seed (b/a)r².
///
/// Residual at the returned y is ≤ 1e-12; fails with `NoConvergence` after
/// 50 iterations (too-large r or a degenerate remainder).
pub fn critical_manifold_y(sys: &PrototypicalSystem, r: f64, theta: f64) -> Result<f64> {
    let a = sys.a.eval(theta);
    let b = sys.b.eval(theta);
    let g = |y: f64| -a * y + b * r * r + sys.rem_r.eval(r, theta, y, 0.0, 0.0);
    let dg = |y: f64| -a + sys.rem_r.d_dy(r, theta, y, 0.0, 0.0);
    let mut y = b / a * r * r;
    for _ in 0..50 {
        let gy = g(y);
        if gy.abs() <= 1e-12 {
            return Ok(y);
        }
        let d = dg(y);
        if d == 0.0 {
            break;
        }
        let mut step = -gy / d;
        // Damping: halve until the residual actually decreases.
        let mut lambda = 1.0;
        while lambda > 1e-6 && g(y + lambda * step).abs() >= gy.abs() {
            lambda *= 0.5;
        }
        step *= lambda;
        y += step;
    }
    if g(y).abs() <= 1e-12 {
        Ok(y)
    } else {
        Err(FclError::NoConvergence(format!(
            "critical_manifold_y: Newton stalled at r={r}, theta={theta} (residual {})",
            g(y).abs()
        )))
    }
}

/// A user-supplied smooth system in the transformed form
///
///   r' = ε₁ F(r, θ, y, ε₁, ε₂),  θ' = ε₁,  y' = ε₁ε₂ H(r, θ, y, ε₁, ε₂)
///
/// given by its scalar fields F and H (evaluable to machine precision,
/// differentiable by finite differences).
pub struct GeneralSystem {
    pub f: Box<dyn Fn(f64, f64, f64, f64, f64) -> f64 + Send + Sync>,
    pub h: Box<dyn Fn(f64, f64, f64, f64, f64) -> f64 + Send + Sync>,
}

impl GeneralSystem {
    pub fn new(
        f: impl Fn(f64, f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
        h: impl Fn(f64, f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        GeneralSystem {
            f: Box::new(f),
            h: Box::new(h),
        }
    }

    /// Builds the general form of a prototypical system (for round-trip
    /// testing of the extraction): F = -a y + b r² + rem_r, H = -c + rem_y.
    pub fn from_prototype(sys: &PrototypicalSystem) -> Self {
        let s = sys.clone();
        let s2 = sys.clone();
        let eps = sys.regime.eps;
        GeneralSystem {
            f: Box::new(move |r, th, y, _e1, e2| {
                -s.a.eval(th) * y + s.b.eval(th) * r * r + s.rem_r.eval(r, th, y, eps, e2)
            }),
            h: Box::new(move |r, th, y, _e1, e2| {
                -s2.c.eval(th) + s2.rem_y.eval(r, th, y, eps, e2)
            }),
        }
    }
}

/// Diagnostics from [`extract_prototype`].
#[derive(Debug, Clone, Copy)]
pub struct ExtractDiagnostics {
    /// Max DFT fit residual across the three coefficients.
    pub max_fit_residual: f64,
    /// Max |F(0, θ, 0, ε₁, 0)| over the grid (Assumption residual).
    pub assumption_residual: f64,
}

/// Richardson-extrapolated central first derivative, base step h.
fn central_d1(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// Richardson-extrapolated central second derivative, base step h.
fn central_d2(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// Extracts the normal-form coefficients of a general system:
///
///   a(θ) = -∂F/∂y(0,θ,0,0,0),  b(θ) = ½∂²F/∂r²(0,θ,0,0,0),
///   c(θ) = -H(0,θ,0,0,0),
///
/// by Richardson-extrapolated central differences (base step 1e-4) on a
/// 256-point θ-grid, fitted to truncated Fourier series.
pub fn extract_prototype(
    g: &GeneralSystem,
    regime: ScalingRegime,
) -> Result<(PrototypicalSystem, ExtractDiagnostics)> {
    const N: usize = 256;
    const H: f64 = 1e-4;
    let mut sa = Vec::with_capacity(N);
    let mut sb = Vec::with_capacity(N);
    let mut sc = Vec::with_capacity(N);
    let mut assumption_residual: f64 = 0.0;
    for j in 0..N {
        let th = j as f64 / N as f64;
        let av = -central_d1(|y| (g.f)(0.0, th, y, 0.0, 0.0), 0.0, H);
        let bv = 0.5 * central_d2(|r| (g.f)(r, th, 0.0, 0.0, 0.0), 0.0, H);
        let cv = -(g.h)(0.0, th, 0.0, 0.0, 0.0);
        if av <= 0.0 || bv <= 0.0 || cv <= 0.0 {
            return Err(FclError::AssumptionViolated(format!(
                "extract_prototype: nonpositive coefficient at theta={th} (a={av}, b={bv}, c={cv})"
            )));
        }
        assumption_residual =
            assumption_residual.max((g.f)(0.0, th, 0.0, regime.eps1(), 0.0).abs());
        sa.push(av);
        sb.push(bv);
        sc.push(cv);
    }
    let (a, ra) = fit_periodic(&sa, MAX_HARMONICS, 1e-9);
    let (b, rb) = fit_periodic(&sb, MAX_HARMONICS, 1e-9);
    let (c, rc) = fit_periodic(&sc, MAX_HARMONICS, 1e-9);
    let sys = PrototypicalSystem::new(
        a,
        b,
        c,
        RemainderSpec::empty(RemainderTarget::Fast),
        RemainderSpec::empty(RemainderTarget::Slow),
        regime,
    )?;
    Ok((
        sys,
        ExtractDiagnostics {
            max_fit_residual: ra.max(rb).max(rc),
            assumption_residual,
        },
    ))
}

/// Result of one fold condition: pass flag plus the worst margin and where.
#[derive(Debug, Clone, Copy)]
pub struct ConditionMargin {
    pub pass: bool,
    /// Worst-case margin; sign convention documented per field in
    /// [`ConditionReport`].
    pub margin: f64,
    pub at_theta: f64,
}

/// Fold-of-cycles certificate evaluated on the ε₂ → 0 layer family, sampled
/// over θ.
#[derive(Debug, Clone, Copy)]
pub struct ConditionReport {
    /// max |F(0, θ, 0)| (pass iff ≤ tol).
    pub f_zero: ConditionMargin,
    /// max |∂F/∂r(0, θ, 0)| (pass iff ≤ tol).
    pub df_dr_zero: ConditionMargin,
    /// min ∂²F/∂r²(0, θ, 0) (pass iff > 0): convexity.
    pub d2f_dr2_positive: ConditionMargin,
    /// max ∂F/∂y(0, θ, 0) (pass iff < 0): transversality in y.
    pub df_dy_negative: ConditionMargin,
    /// max H(0, θ, 0) (pass iff < 0): slow regularity.
    pub h_negative: ConditionMargin,
}

impl ConditionReport {
    pub fn all_pass(&self) -> bool {
        self.f_zero.pass
            && self.df_dr_zero.pass
            && self.d2f_dr2_positive.pass
            && self.df_dy_negative.pass
            && self.h_negative.pass
    }
}

/// Evaluates the fold-of-cycles sufficient conditions on 256 sampled angles
/// using central finite differences on the ε₂ = 0 field:
/// F(0,θ,0) = 0, ∂F/∂r(0,θ,0) = 0, ∂²F/∂r² > 0, ∂F/∂y < 0, H(0,θ,0) < 0.
pub fn check_fold_conditions(sys: &PrototypicalSystem) -> ConditionReport {
    const N: usize = 256;
    const H: f64 = 1e-4;
    const TOL: f64 = 1e-9;
    let eps = sys.regime.eps;
    let fast =
        |r: f64, th: f64, y: f64| -sys.a.eval(th) * y + sys.b.eval(th) * r * r
            + sys.rem_r.eval(r, th, y, eps, 0.0);
    let slow = |th: f64| -sys.c.eval(th) + sys.rem_y.eval(0.0, th, 0.0, eps, 0.0);

    let mut worst = [
        (0.0f64, 0.0f64),          // max |F|
        (0.0, 0.0),                // max |dF/dr|
        (f64::INFINITY, 0.0),      // min d2F/dr2
        (f64::NEG_INFINITY, 0.0),  // max dF/dy
        (f64::NEG_INFINITY, 0.0),  // max H
    ];
    for j in 0..N {
        let th = j as f64 / N as f64;
        let f0 = fast(0.0, th, 0.0).abs();
        let dfr = central_d1(|r| fast(r, th, 0.0), 0.0, H).abs();
        let d2fr = central_d2(|r| fast(r, th, 0.0), 0.0, H);
        let dfy = central_d1(|y| fast(0.0, th, y), 0.0, H);
        let hv = slow(th);
        if f0 > worst[0].0 {
            worst[0] = (f0, th);
        }
        if dfr > worst[1].0 {
            worst[1] = (dfr, th);
        }
        if d2fr < worst[2].0 {
            worst[2] = (d2fr, th);
        }
        if dfy > worst[3].0 {
            worst[3] = (dfy, th);
        }
        if hv > worst[4].0 {
            worst[4] = (hv, th);
        }
    }
    ConditionReport {
        f_zero: ConditionMargin {
            pass: worst[0].0 <= TOL,
            margin: worst[0].0,
            at_theta: worst[0].1,
        },
        df_dr_zero: ConditionMargin {
            pass: worst[1].0 <= TOL,
            margin: worst[1].0,
            at_theta: worst[1].1,
        },
        d2f_dr2_positive: ConditionMargin {
            pass: worst[2].0 > 0.0,
            margin: worst[2].0,
            at_theta: worst[2].1,
        },
        df_dy_negative: ConditionMargin {
            pass: worst[3].0 < 0.0,
            margin: worst[3].0,
            at_theta: worst[3].1,
        },
        h_negative: ConditionMargin {
            pass: worst[4].0 < 0.0,
            margin: worst[4].0,
            at_theta: worst[4].1,
        },
    }
}
