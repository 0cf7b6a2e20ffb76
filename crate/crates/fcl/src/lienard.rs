//! Periodically forced Liénard oscillators reduced to the prototypical
//! cylinder system.
//!
//! The oscillator x″ + μ f(x) x′ + g(x) = A(ωt) is rewritten, after the
//! Liénard transformation and time rescalings tied to ε^α = μ⁻¹ωϑ⁻¹ and
//! ε³ = μ⁻², as
//!
//! ```text
//!   x̃′ = ϑ⁻¹(−ỹ + K(x̃+x_F) − K(x_F))
//!   θ′  = ε^α
//!   ỹ′  = ε³ ϑ⁻¹ (g(x̃+x_F) − A(θ))
//! ```
//!
//! with K(x) = −∫₀ˣ f.  Near a fold point x_F of K this is the prototypical
//! system with a ≡ ϑ⁻¹, b ≡ ϑ⁻¹ K″(x_F)/2, c(θ) = −ϑ⁻¹(g(x_F) − A(θ)), so the
//! exit asymptotics apply directly.  This module builds that reduction and
//! verifies it against direct simulation of the untruncated field.

use crate::asymptotics::{fit_power_law, predict_exit_y, PowerLawFit};
use crate::error::{FclError, Result};
use crate::integrator::{integrate_to_event, EventDirection, EventSpec, IntegratorConfig};
use crate::model::{
    GeneralSystem, PrototypicalSystem, RemainderSpec, RemainderTarget, ScalingRegime, SectionSpec,
};
use crate::periodic::PeriodicFn;
use crate::special::brent_root;

/// A real polynomial in one variable, coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Polynomial { coeffs }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| k as f64 * c)
            .collect();
        Polynomial { coeffs }
    }

    /// Antiderivative with zero constant term.
    pub fn antiderivative(&self) -> Polynomial {
        let mut coeffs = vec![0.0];
        coeffs.extend(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| c / (k as f64 + 1.0)),
        );
        Polynomial { coeffs }
    }
}

/// A forced Liénard oscillator in the scaling regime ε^α = μ⁻¹ωϑ⁻¹, ε³ = μ⁻².
#[derive(Debug, Clone)]
pub struct LienardSpec {
    /// Friction function f(x).
    pub f: Polynomial,
    /// Restoring function g(x).
    pub g: Polynomial,
    /// Periodic forcing A(θ).
    pub forcing: PeriodicFn,
    /// Time-scale parameter ϑ > 0.
    pub vartheta: f64,
    pub regime: ScalingRegime,
}

impl LienardSpec {
    /// The forced van der Pol oscillator: f = x² − 1, g = x,
    /// A(θ) = 0.5 sin(2πθ), ϑ = 1.
    pub fn van_der_pol(regime: ScalingRegime) -> Self {
        LienardSpec {
            f: Polynomial::new(vec![-1.0, 0.0, 1.0]),
            g: Polynomial::new(vec![0.0, 1.0]),
            forcing: PeriodicFn::new(
                0.0,
                vec![crate::periodic::Harmonic {
                    k: 1,
                    cos_coeff: 0.0,
                    sin_coeff: 0.5,
                }],
            )
            .expect("static harmonic list"),
            vartheta: 1.0,
            regime,
        }
    }
}

/// Result of reducing a Liénard spec to the prototypical system.
#[derive(Debug, Clone)]
pub struct LienardBuild {
    /// The truncated prototypical system (empty remainders).
    pub system: PrototypicalSystem,
    /// The admissible fold point: f(x_F) = 0 with K″(x_F) = −f′(x_F) > 0.
    pub x_f: f64,
    /// K″(x_F).
    pub k2: f64,
    /// K(x_F), the fold height used to center the untruncated field.
    pub k_at_xf: f64,
}

const XF_SCAN_RANGE: f64 = 16.0;
const XF_SCAN_CELLS: usize = 8192;

/// Locates the fold point and assembles the prototypical coefficients.
///
/// x_F is found by bracketed root finding on f over [−16, 16]; among the
/// roots, convexity K″ = −f′ > 0 selects the admissible branch, and the one
/// closest to the origin is taken when several qualify.  The slow-regularity
/// condition g(x_F) − A(θ) < 0 is sampled on 512 angles.
pub fn lienard_build(spec: &LienardSpec) -> Result<LienardBuild> {
    if !(spec.vartheta > 0.0) {
        return Err(FclError::Domain(format!(
            "lienard_build: vartheta must be > 0, got {}",
            spec.vartheta
        )));
    }
    let df = spec.f.derivative();

    // Collect sign-change brackets of f and keep the roots where K'' > 0.
    let mut candidates: Vec<f64> = Vec::new();
    let mut x_prev = -XF_SCAN_RANGE;
    let mut f_prev = spec.f.eval(x_prev);
    for i in 1..=XF_SCAN_CELLS {
        let x = -XF_SCAN_RANGE + 2.0 * XF_SCAN_RANGE * i as f64 / XF_SCAN_CELLS as f64;
        let fx = spec.f.eval(x);
        if f_prev == 0.0 && df.eval(x_prev) < 0.0 {
            candidates.push(x_prev);
        } else if f_prev * fx < 0.0 {
            let root = brent_root(|z| spec.f.eval(z), x_prev, x, 1e-14)?;
            if df.eval(root) < 0.0 {
                candidates.push(root);
            }
        }
        x_prev = x;
        f_prev = fx;
    }
    let x_f = candidates
        .into_iter()
        .min_by(|p, q| p.abs().partial_cmp(&q.abs()).unwrap())
        .ok_or_else(|| {
            FclError::AssumptionViolated(
                "lienard_build: no fold point with f(x_F) = 0 and -f'(x_F) > 0 in [-16, 16]"
                    .into(),
            )
        })?;
    let k2 = -df.eval(x_f);
    let g_xf = spec.g.eval(x_f);

    // Slow regularity: g(x_F) - A(θ) must be strictly negative everywhere.
    for j in 0..512 {
        let th = j as f64 / 512.0;
        if g_xf - spec.forcing.eval(th) >= 0.0 {
            return Err(FclError::AssumptionViolated(format!(
                "lienard_build: g(x_F) - A(θ) = {} >= 0 at θ = {th}",
                g_xf - spec.forcing.eval(th)
            )));
        }
    }

    let vti = 1.0 / spec.vartheta;
    let a = PeriodicFn::constant(vti);
    let b = PeriodicFn::constant(vti * 0.5 * k2);
    let c_harmonics = spec
        .forcing
        .harmonics
        .iter()
        .map(|h| crate::periodic::Harmonic {
            k: h.k,
            cos_coeff: vti * h.cos_coeff,
            sin_coeff: vti * h.sin_coeff,
        })
        .collect();
    let c = PeriodicFn::new(vti * (spec.forcing.mean - g_xf), c_harmonics)?;
    let system = PrototypicalSystem::new(
        a,
        b,
        c,
        RemainderSpec::empty(RemainderTarget::Fast),
        RemainderSpec::empty(RemainderTarget::Slow),
        spec.regime,
    )?;

    let k = spec.f.antiderivative();
    Ok(LienardBuild {
        system,
        x_f,
        k2,
        k_at_xf: -k.eval(x_f),
    })
}

/// The untruncated Liénard field centered at the fold, as a general system
/// (r = x̃, y = ỹ): F = ϑ⁻¹(−y + K(r+x_F) − K(x_F)), H = ϑ⁻¹(g(r+x_F) − A(θ)).
pub fn lienard_general_system(spec: &LienardSpec, build: &LienardBuild) -> GeneralSystem {
    let k = spec.f.antiderivative();
    let k_of = move |x: f64| -k.eval(x);
    let x_f = build.x_f;
    let k_xf = build.k_at_xf;
    let vti = 1.0 / spec.vartheta;
    let g = spec.g.clone();
    let forcing = spec.forcing.clone();
    GeneralSystem::new(
        move |r, _th, y, _e1, _e2| vti * (-y + k_of(r + x_f) - k_xf),
        move |r, th, _y, _e1, _e2| vti * (g.eval(r + x_f) - forcing.eval(th)),
    )
}

/// One entry-to-exit run of the untruncated field at a given ε.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LienardRun {
    pub eps: f64,
    /// Exit height ỹ at x̃ = R (negative: the drift has overshot the fold).
    pub exit_y: f64,
    /// Lifted exit angle.
    pub exit_theta: f64,
    pub transit_time: f64,
    /// Leading-order exit-height prediction at the exit angle.
    pub predicted_y: f64,
    /// exit_y / predicted_y.
    pub ratio: f64,
}

/// Verification report: per-ε runs plus the power-law fit of the normalized
/// drift |exit ỹ| / (c(θ̃)²/(ab))^{1/3} vs ε.
///
/// Normalizing by the exit-angle-dependent coefficient is essential: the
/// exit angle itself moves with ε, so the raw |exit ỹ| mixes the ε² law with
/// the θ̃-dependence of the prefactor.  The normalized fit has slope 2 and
/// intercept ln Ω₀.  `fit` is `None` when fewer than 4 values of ε were run.
#[derive(Debug, Clone)]
pub struct LienardVerifyReport {
    pub runs: Vec<LienardRun>,
    pub fit: Option<PowerLawFit>,
    pub x_f: f64,
    pub k2: f64,
}

/// Smallest sampled value of c over a period.
fn c_min(c: &PeriodicFn) -> f64 {
    (0..256)
        .map(|i| c.eval(i as f64 / 256.0))
        .fold(f64::INFINITY, f64::min)
}

/// Integrates the untruncated Liénard field from the entry annulus
/// {ỹ = R²} to the exit cylinder {x̃ = R} and compares the exit height
/// against the prototypical prediction at each ε in `eps_list`.
pub fn lienard_verify(
    spec: &LienardSpec,
    section: &SectionSpec,
    entry_r: f64,
    eps_list: &[f64],
    cfg: &IntegratorConfig,
) -> Result<LienardVerifyReport> {
    section.validate()?;
    if !(section.beta_minus <= entry_r && entry_r <= section.beta_plus) {
        return Err(FclError::Domain(format!(
            "lienard_verify: entry r = {entry_r} outside [{}, {}]",
            section.beta_minus, section.beta_plus
        )));
    }
    let build = lienard_build(spec)?;
    let gen = lienard_general_system(spec, &build);
    let r_exit = section.r_exit;
    let cmin = c_min(&build.system.c);
    let alpha = spec.regime.alpha;

    let mut runs = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let regime = ScalingRegime::new(alpha, eps)?;
        let (e1, e2) = (regime.eps1(), regime.eps2());
        let field = |_t: f64, s: &[f64; 3]| {
            [
                (gen.f)(s[0], s[1], s[2], e1, e2),
                e1,
                e2 * (gen.h)(s[0], s[1], s[2], e1, e2),
            ]
        };
        let mut events = [EventSpec::terminal(
            move |s: &[f64; 3]| s[0] - r_exit,
            EventDirection::Rising,
        )];
        let horizon = 10.0 * (section.y0 + r_exit * r_exit) / (cmin * e2);
        let out = integrate_to_event(
            &field,
            [entry_r, 0.0, section.y0],
            &mut events,
            horizon,
            cfg,
        )?;
        let exit_theta = out.state[1];
        let exit_y = out.state[2];
        let abc = (
            build.system.a.eval(exit_theta),
            build.system.b.eval(exit_theta),
            build.system.c.eval(exit_theta),
        );
        let predicted_y = predict_exit_y(alpha.max(2), eps, abc.0, abc.1, abc.2)
            .leading
            .expect("alpha >= 2 has an explicit coefficient");
        runs.push(LienardRun {
            eps,
            exit_y,
            exit_theta,
            transit_time: out.time,
            predicted_y,
            ratio: exit_y / predicted_y,
        });
    }

    let omega = crate::special::omega0().value;
    let pairs: Vec<(f64, f64)> = runs
        .iter()
        .map(|r| (r.eps, r.exit_y / (-r.predicted_y / (omega * r.eps * r.eps))))
        .collect();
    let fit = if pairs.len() >= 4 {
        Some(fit_power_law(&pairs)?)
    } else {
        None
    };
    Ok(LienardVerifyReport {
        runs,
        fit,
        x_f: build.x_f,
        k2: build.k2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::extract_prototype;
    use crate::special::omega0;

    fn vdp(alpha: u32, eps: f64) -> LienardSpec {
        LienardSpec::van_der_pol(ScalingRegime::new(alpha, eps).unwrap())
    }

    #[test]
    fn polynomial_basics() {
        let f = Polynomial::new(vec![-1.0, 0.0, 1.0]); // x² − 1
        assert_eq!(f.eval(2.0), 3.0);
        assert_eq!(f.derivative().eval(3.0), 6.0);
        // K = −∫f = x − x³/3
        let k = f.antiderivative();
        assert!((-k.eval(1.0) - (1.0 - 1.0 / 3.0)).abs() < 1e-15);
        assert_eq!(k.eval(0.0), 0.0);
    }

    #[test]
    fn van_der_pol_reduction() {
        let build = lienard_build(&vdp(2, 0.01)).unwrap();
        // f = x²−1 has roots ±1; K″ = −2x > 0 selects x_F = −1, K″(−1) = 2.
        assert!((build.x_f + 1.0).abs() < 1e-12);
        assert!((build.k2 - 2.0).abs() < 1e-12);
        assert_eq!(build.system.a.eval(0.3), 1.0);
        assert_eq!(build.system.b.eval(0.3), 1.0);
        // c(θ) = 1 + 0.5 sin(2πθ), mean 1.
        assert!((build.system.c.eval(0.25) - 1.5).abs() < 1e-14);
        assert!((build.system.c.period_mean() - 1.0).abs() < 1e-15);
        // Predicted drift coefficient −(2(g−A)²/K″)^{1/3}Ω₀ at θ̃ = 0.25
        // equals −(c²)^{1/3}Ω₀ here.
        let coeff = (2.0 * (-1.0 - 0.5f64) * (-1.0 - 0.5) / 2.0).cbrt();
        let pred = predict_exit_y(2, 0.01, 1.0, 1.0, 1.5).leading.unwrap();
        assert!((pred - (-coeff * omega0().value * 1e-4)).abs() < 1e-18);
    }

    #[test]
    fn rejects_inadmissible_specs() {
        // f = x² + 1 has no real roots at all.
        let mut s = vdp(2, 0.01);
        s.f = Polynomial::new(vec![1.0, 0.0, 1.0]);
        assert!(matches!(
            lienard_build(&s),
            Err(FclError::AssumptionViolated(_))
        ));
        // g(x_F) − A(θ) >= 0 somewhere: g = x + 2 gives g(−1) = 1 > A.
        let mut s = vdp(2, 0.01);
        s.g = Polynomial::new(vec![2.0, 1.0]);
        assert!(matches!(
            lienard_build(&s),
            Err(FclError::AssumptionViolated(_))
        ));
    }

    #[test]
    fn extraction_round_trip_matches_build() {
        let spec = vdp(2, 0.01);
        let build = lienard_build(&spec).unwrap();
        let gen = lienard_general_system(&spec, &build);
        let (extracted, diag) = extract_prototype(&gen, spec.regime).unwrap();
        assert!(diag.max_fit_residual < 1e-6);
        for j in 0..64 {
            let th = j as f64 / 64.0;
            assert!((extracted.a.eval(th) - build.system.a.eval(th)).abs() < 1e-6);
            assert!((extracted.b.eval(th) - build.system.b.eval(th)).abs() < 1e-6);
            assert!((extracted.c.eval(th) - build.system.c.eval(th)).abs() < 1e-6);
        }
    }

    #[test]
    fn untruncated_field_matches_taylor_expansion_near_fold() {
        // F = −y + K(x̃−1) − K(−1) should equal −y + x̃² + O(x̃³) for vdP.
        let spec = vdp(2, 0.01);
        let build = lienard_build(&spec).unwrap();
        let gen = lienard_general_system(&spec, &build);
        for &r in &[-0.02, -0.005, 0.01, 0.03] {
            let exact = (gen.f)(r, 0.0, 0.2, 0.0, 0.0);
            let quad = -0.2 + r * r;
            assert!(
                (exact - quad).abs() < 0.5 * r.abs().powi(3) + 1e-15,
                "cubic remainder bound failed at r = {r}"
            );
        }
        // H = g(x̃−1) − A(θ) = −c(θ) + x̃.
        let h = (gen.h)(0.07, 0.25, 0.0, 0.0, 0.0);
        assert!((h - (-1.5 + 0.07)).abs() < 1e-14);
    }

    #[test]
    fn verify_exit_drift_against_prediction() {
        let spec = vdp(2, 0.01);
        let section = SectionSpec::default_for(0.1);
        let report = lienard_verify(
            &spec,
            &section,
            -0.2,
            &[0.005, 0.01, 0.02, 0.04],
            &IntegratorConfig::default(),
        )
        .unwrap();
        let fit = report.fit.as_ref().unwrap();
        assert!((fit.slope - 2.0).abs() < 0.1, "slope {}", fit.slope);
        // The intercept is only loosely pinned: a slope error δ shifts it by
        // δ·|ln ε| ≈ 4.4δ, so the per-ε ratio check below is the real
        // prefactor test.
        assert!((fit.intercept - omega0().value.ln()).abs() < 0.5);
        for run in &report.runs {
            assert!(run.exit_y < 0.0);
            assert!(
                (run.ratio - 1.0).abs() < 0.2,
                "prefactor off at eps {}: ratio {}",
                run.eps,
                run.ratio
            );
        }
    }

    #[test]
    fn verify_exit_angle_frozen_for_fast_rotation() {
        // α ≥ 4: the exit angle stays within an O(ε³ ln ε) envelope of entry.
        let spec = vdp(4, 0.02);
        let section = SectionSpec::default_for(0.1);
        let report = lienard_verify(
            &spec,
            &section,
            -0.2,
            &[0.02],
            &IntegratorConfig::default(),
        )
        .unwrap();
        let eps: f64 = 0.02;
        let envelope = 50.0 * eps.powi(3) * eps.ln().abs();
        assert!(
            report.runs[0].exit_theta.abs() < envelope,
            "exit angle {} vs envelope {envelope}",
            report.runs[0].exit_theta
        );
    }
}
