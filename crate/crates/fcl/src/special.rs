//! Special functions needed by the exit-drift analysis: Bessel J of order
//! ±1/3, the Airy function Ai, the Gamma function, a bracketed root finder,
//! and the universal drift constant Ω₀ — the smallest positive zero of
//! J_{-1/3}(2z^{3/2}/3) + J_{1/3}(2z^{3/2}/3), which coincides with the first
//! zero of Ai(-z).
//!
//! Everything here is series/closed-form arithmetic in double precision; no
//! external special-function dependency. Ω₀ is computed once (never
//! hard-coded in library code) and cached behind a `OnceLock`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::FclError;

/// Result of the Ω₀ computation with its self-checks.
///
/// `residual` is the Bessel-combination value at the root; `airy_crosscheck`
/// is the distance to the independently computed first zero of Ai(-z).
#[derive(Debug, Clone, Copy)]
pub struct Omega0Result {
    pub value: f64,
    pub residual: f64,
    pub airy_crosscheck: f64,
}

/// Lanczos approximation of Γ(x), g = 7 with 9 coefficients.
///
/// Relative accuracy ~1e-13 on the real line (reflection formula for x < 0.5).
pub fn gamma(x: f64) -> f64 {
    // Lanczos coefficients for g = 7, n = 9 (Godfrey's table).
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx)
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = C[0];
        for (i, &c) in C.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + G + 0.5;
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
    }
}

/// Bessel function of the first kind J_ν(w) for ν ∈ {-1/3, +1/3} by its
/// ascending power series, truncated when a term drops below 1e-17 of the
/// partial sum.
///
/// The series is used only on 0 < w ≤ 30 (all call sites here stay below
/// w ≈ 3.5, where cancellation is negligible).
pub fn bessel_j(nu: f64, w: f64) -> Result<f64, FclError> {
    if nu != 1.0 / 3.0 && nu != -1.0 / 3.0 {
        return Err(FclError::Domain(format!(
            "bessel_j: order {nu} unsupported (only ±1/3)"
        )));
    }
    if !(w > 0.0 && w <= 30.0) {
        return Err(FclError::Domain(format!(
            "bessel_j: argument {w} outside (0, 30]"
        )));
    }
    let half = 0.5 * w;
    let q = half * half;
    // term_0 = (w/2)^nu / Γ(ν+1); term_{m} = -term_{m-1} · q / (m (m+ν))
    let mut term = half.powf(nu) / gamma(nu + 1.0);
    let mut sum = term;
    for m in 1..200 {
        let m = m as f64;
        term *= -q / (m * (m + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    Ok(sum)
}

/// Unevaluated double-double value hi + lo. On the oscillatory side of the
/// Airy series the terms grow to ~e^{(2/3)|x|^{3/2}} before cancelling, so
/// plain f64 accumulation loses ~7 digits at x = -8; carrying ~32 digits
/// through the recurrence keeps the advertised 1e-13 absolute error.
#[derive(Debug, Clone, Copy)]
struct Dd(f64, f64);

impl Dd {
    fn from(v: f64) -> Self {
        Dd(v, 0.0)
    }

    fn to_f64(self) -> f64 {
        self.0 + self.1
    }

    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }

    fn quick_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        Dd(s, b - (s - a))
    }

    fn two_prod(a: f64, b: f64) -> (f64, f64) {
        let p = a * b;
        (p, a.mul_add(b, -p))
    }

    fn add(self, o: Dd) -> Dd {
        let (s, e) = Dd::two_sum(self.0, o.0);
        Dd::quick_sum(s, e + self.1 + o.1)
    }

    fn mul(self, o: Dd) -> Dd {
        let (p, e) = Dd::two_prod(self.0, o.0);
        Dd::quick_sum(p, e + self.0 * o.1 + self.1 * o.0)
    }

    fn scale(self, b: f64) -> Dd {
        let (p, e) = Dd::two_prod(self.0, b);
        Dd::quick_sum(p, e + self.1 * b)
    }

    fn div_f64(self, d: f64) -> Dd {
        let q1 = self.0 / d;
        let (p, e) = Dd::two_prod(q1, d);
        let q2 = (self.0 - p + (self.1 - e)) / d;
        Dd::quick_sum(q1, q2)
    }
}

/// Shared core for Ai and Ai': Maclaurin series of the two standard solutions
///
///   f(x) = Σ t_k,  t_0 = 1,  t_k = t_{k-1} x³ / ((3k-1)(3k))
///   g(x) = Σ s_k,  s_0 = x,  s_k = s_{k-1} x³ / ((3k)(3k+1))
///
/// and their termwise derivatives, accumulated in double-double to survive
/// the cancellation at negative x. Returns (f, g, f', g').
fn airy_fg(x: f64) -> (f64, f64, f64, f64) {
    let xd = Dd::from(x);
    let x2 = xd.mul(xd);
    let x3 = x2.mul(xd);
    let x2_3 = x2.scale(3.0);
    let mut t = Dd::from(1.0);
    let mut s = xd;
    let mut f = t;
    let mut g = s;
    // Derivative series: d/dx t_k = 3k t_k / x is ill-defined at x = 0, so
    // track term derivatives recursively instead:
    // t_k = t_{k-1} x³ / d  =>  t'_k = (t'_{k-1} x³ + 3x² t_{k-1}) / d.
    let mut tp = Dd::from(0.0);
    let mut sp = Dd::from(1.0);
    let mut fp = tp;
    let mut gp = sp;
    for k in 1..120 {
        let kf = k as f64;
        let dt = (3.0 * kf - 1.0) * (3.0 * kf);
        let ds = (3.0 * kf) * (3.0 * kf + 1.0);
        let tp_new = tp.mul(x3).add(x2_3.mul(t)).div_f64(dt);
        let sp_new = sp.mul(x3).add(x2_3.mul(s)).div_f64(ds);
        t = t.mul(x3).div_f64(dt);
        s = s.mul(x3).div_f64(ds);
        tp = tp_new;
        sp = sp_new;
        f = f.add(t);
        g = g.add(s);
        fp = fp.add(tp);
        gp = gp.add(sp);
        if t.0.abs() < 1e-20 && s.0.abs() < 1e-20 {
            break;
        }
    }
    (f.to_f64(), g.to_f64(), fp.to_f64(), gp.to_f64())
}

fn airy_consts() -> (f64, f64) {
    // Ai(0) = 3^{-2/3}/Γ(2/3), Ai'(0) = -3^{-1/3}/Γ(1/3)
    let c1 = 3.0_f64.powf(-2.0 / 3.0) / gamma(2.0 / 3.0);
    let c2 = -(3.0_f64.powf(-1.0 / 3.0)) / gamma(1.0 / 3.0);
    (c1, c2)
}

/// Airy function Ai(x) by Maclaurin series, valid (abs. error ≲1e-13) on
/// |x| ≤ 8.
pub fn airy_ai(x: f64) -> Result<f64, FclError> {
    if x.abs() > 8.0 {
        return Err(FclError::Domain(format!(
            "airy_ai: argument {x} outside |x| <= 8"
        )));
    }
    let (f, g, _, _) = airy_fg(x);
    let (c1, c2) = airy_consts();
    Ok(c1 * f + c2 * g)
}

/// Derivative Ai'(x) on the same domain as [`airy_ai`].
pub fn airy_ai_prime(x: f64) -> Result<f64, FclError> {
    if x.abs() > 8.0 {
        return Err(FclError::Domain(format!(
            "airy_ai_prime: argument {x} outside |x| <= 8"
        )));
    }
    let (_, _, fp, gp) = airy_fg(x);
    let (c1, c2) = airy_consts();
    Ok(c1 * fp + c2 * gp)
}

/// Brent's method on a bracketing interval [a, b] with f(a)·f(b) < 0.
///
/// Converges when the interval or |f| drops below `tol`; at most 200
/// iterations (inverse quadratic interpolation guarded by bisection).
pub fn brent_root<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, FclError> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(FclError::Bracket(format!(
            "brent_root: no sign change on [{a}, {b}] (f: {fa}, {fb})"
        )));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let eps = f64::EPSILON;
        let tol1 = 2.0 * eps * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 || fb.abs() <= tol {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // inverse quadratic interpolation (secant when a == c)
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let r = fb / fc;
                let t = fa / fc;
                p = s * (2.0 * xm * t * (t - r) - (b - a) * (r - 1.0));
                q = (t - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b += d;
        } else {
            b += if xm > 0.0 { tol1 } else { -tol1 };
        }
        fb = f(b);
    }
    Err(FclError::NoConvergence(
        "brent_root: 200 iterations exhausted".into(),
    ))
}

/// The Bessel combination whose smallest positive zero is Ω₀.
fn omega0_objective(z: f64) -> f64 {
    let w = 2.0 * z.powf(1.5) / 3.0;
    bessel_j(-1.0 / 3.0, w).unwrap() + bessel_j(1.0 / 3.0, w).unwrap()
}

fn compute_omega0() -> Omega0Result {
    let mut value = brent_root(omega0_objective, 1.0, 3.0, 1e-15)
        .expect("omega0: bracket [1,3] must straddle the first zero");
    // Brent stops within a few ulp; polish to the representable value with
    // the smallest residual (the objective has O(1) slope at the zero, so
    // the residual resolves single-ulp moves).
    let mut residual = omega0_objective(value).abs();
    for k in -8i64..=8 {
        let cand = f64::from_bits((value.to_bits() as i64 + k) as u64);
        let r = omega0_objective(cand).abs();
        if r < residual {
            residual = r;
            value = cand;
        }
    }
    // Independent cross-check: first zero of Ai(-z) on the same bracket.
    let airy_zero = brent_root(|z| airy_ai(-z).unwrap(), 1.0, 3.0, 1e-15)
        .expect("omega0: Airy cross-check bracket failed");
    Omega0Result {
        value,
        residual,
        airy_crosscheck: (value - airy_zero).abs(),
    }
}

/// Ω₀ with its residual and Airy cross-check; computed once and cached.
pub fn omega0() -> Omega0Result {
    static CACHE: OnceLock<Omega0Result> = OnceLock::new();
    *CACHE.get_or_init(compute_omega0)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Oracle values frozen from an independent 40-digit computation.
    const J13_1: f64 = 0.730_876_402_169_448_0;
    const JM13_1: f64 = 0.606_887_505_046_529_3;
    const J13_HALF: f64 = 0.672_830_829_497_946_0;
    const JM13_HALF: f64 = 1.064_420_467_230_624_1;
    const J13_10: f64 = -0.186_145_167_048_695_76;
    const JM13_10: f64 = -0.240_471_075_363_265_26;
    const AI_0: f64 = 0.355_028_053_887_817_24;
    const AIP_0: f64 = -0.258_819_403_792_806_80;
    const AI_1: f64 = 0.135_292_416_312_881_42;
    const AI_M25: f64 = -0.112_325_067_692_966_09;
    const AI_M8: f64 = -0.052_705_050_356_386_203;
    const OMEGA0: f64 = 2.338_107_410_459_767;
    const GAMMA_13: f64 = 2.678_938_534_707_747_6;
    const GAMMA_23: f64 = 1.354_117_939_426_400_5;

    #[test]
    fn gamma_oracle_values() {
        assert!((gamma(1.0 / 3.0) - GAMMA_13).abs() < 1e-13 * GAMMA_13);
        assert!((gamma(2.0 / 3.0) - GAMMA_23).abs() < 1e-13 * GAMMA_23);
        assert!((gamma(1.0) - 1.0).abs() < 1e-14);
        assert!((gamma(5.0) - 24.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_reflection_identity() {
        for &x in &[1.0 / 3.0, 2.0 / 3.0] {
            let lhs = gamma(x) * gamma(1.0 - x);
            let rhs = PI / (PI * x).sin();
            assert!(
                (lhs - rhs).abs() < 1e-13 * rhs.abs(),
                "reflection at {x}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn bessel_oracle_values() {
        assert!((bessel_j(1.0 / 3.0, 1.0).unwrap() - J13_1).abs() < 1e-14);
        assert!((bessel_j(-1.0 / 3.0, 1.0).unwrap() - JM13_1).abs() < 1e-14);
        assert!((bessel_j(1.0 / 3.0, 0.5).unwrap() - J13_HALF).abs() < 1e-14);
        assert!((bessel_j(-1.0 / 3.0, 0.5).unwrap() - JM13_HALF).abs() < 1e-14);
        // Larger argument: allow mild cancellation loss.
        assert!((bessel_j(1.0 / 3.0, 10.0).unwrap() - J13_10).abs() < 1e-11);
        assert!((bessel_j(-1.0 / 3.0, 10.0).unwrap() - JM13_10).abs() < 1e-11);
    }

    #[test]
    fn bessel_small_argument_leading_term() {
        let w = 1e-6;
        let lead = (w / 2.0_f64).powf(1.0 / 3.0) / gamma(4.0 / 3.0);
        let v = bessel_j(1.0 / 3.0, w).unwrap();
        assert!(((v - lead) / lead).abs() < 1e-6);
    }

    #[test]
    fn bessel_domain_errors() {
        assert!(bessel_j(1.0 / 3.0, 0.0).is_err());
        assert!(bessel_j(1.0 / 3.0, 30.5).is_err());
        assert!(bessel_j(0.5, 1.0).is_err());
    }

    #[test]
    fn airy_oracle_values() {
        assert!((airy_ai(0.0).unwrap() - AI_0).abs() < 1e-13);
        assert!((airy_ai_prime(0.0).unwrap() - AIP_0).abs() < 1e-13);
        assert!((airy_ai(1.0).unwrap() - AI_1).abs() < 1e-13);
        assert!((airy_ai(-2.5).unwrap() - AI_M25).abs() < 1e-13);
        assert!((airy_ai(-8.0).unwrap() - AI_M8).abs() < 5e-13);
        assert!(airy_ai(8.5).is_err());
    }

    #[test]
    fn airy_positive_on_nonnegative_axis() {
        for i in 0..=80 {
            let x = i as f64 * 0.1;
            assert!(airy_ai(x).unwrap() > 0.0, "Ai({x}) must be positive");
        }
    }

    #[test]
    fn airy_first_zero() {
        assert!(airy_ai(-OMEGA0).unwrap().abs() < 1e-11);
    }

    /// Ai(-z) = (√z/3)[J_{1/3} + J_{-1/3}](2 z^{3/2}/3) across z ∈ [0.1, 5].
    #[test]
    fn airy_bessel_identity() {
        for i in 0..64 {
            let z = 0.1 + 4.9 * i as f64 / 63.0;
            let w = 2.0 * z.powf(1.5) / 3.0;
            let lhs = z.sqrt() / 3.0
                * (bessel_j(1.0 / 3.0, w).unwrap() + bessel_j(-1.0 / 3.0, w).unwrap());
            let rhs = airy_ai(-z).unwrap();
            assert!((lhs - rhs).abs() < 1e-12, "identity at z={z}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn airy_derivative_consistency() {
        // Central difference of the series against the analytic derivative.
        for &x in &[-2.0, -0.5, 0.0, 0.7, 2.0] {
            let h = 1e-5;
            let num = (airy_ai(x + h).unwrap() - airy_ai(x - h).unwrap()) / (2.0 * h);
            let ana = airy_ai_prime(x).unwrap();
            assert!((num - ana).abs() < 1e-9, "Ai' at {x}: {num} vs {ana}");
        }
    }

    #[test]
    fn brent_basics() {
        let r = brent_root(|x| x * x - 2.0, 1.0, 2.0, 1e-14).unwrap();
        assert!((r - 2.0_f64.sqrt()).abs() < 1e-12);
        let r = brent_root(|x| (2.0 * PI * x).sin() - 0.5, 0.0, 0.25, 1e-14).unwrap();
        assert!((r - 1.0 / 12.0).abs() < 1e-12);
        let r = brent_root(|x| airy_ai(x).unwrap(), -3.0, -2.0, 1e-14).unwrap();
        assert!((r + OMEGA0).abs() < 1e-12);
        assert!(brent_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn omega0_value_and_crosschecks() {
        let o = omega0();
        assert!((o.value - OMEGA0).abs() < 1e-13, "omega0 = {}", o.value);
        assert!(o.residual <= 1e-12);
        assert!(o.airy_crosscheck <= 1e-10);
        // Bracket endpoints have the documented signs.
        assert!(omega0_objective(1.0) > 0.0);
        assert!(omega0_objective(3.0) < 0.0);
    }

    #[test]
    fn omega0_deterministic() {
        let a = omega0();
        let b = omega0();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }
}
