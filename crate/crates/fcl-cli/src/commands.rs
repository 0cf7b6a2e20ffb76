//! Implementations of the CLI subcommands.
//!
//! Every command returns `Ok(true)` when its checks pass, `Ok(false)` on a
//! suite failure, and `Err` on configuration or numeric breakdown.  Output
//! files (CSV, SVG) always carry the run manifest as comment headers.

use std::path::PathBuf;

use fcl::asymptotics::{fit_power_law, predict_n_rot};
use fcl::blowup::{
    check_blowdown_consistency, k3_corner_eigenvalues, kappa_12, kappa_12_inv, kappa_23,
    kappa_23_inv, riccati_special_solution, to_chart, Chart,
};
use fcl::config::Config;
use fcl::error::{FclError, Result};
use fcl::integrator::IntegratorConfig;
use fcl::lienard::lienard_verify;
use fcl::model::{PrototypicalSystem, ScalingRegime, SectionSpec};
use fcl::special::omega0;
use fcl::tipping::{
    tipping_folded_singularities, tipping_interval, tipping_simulate, tipping_theta_e,
    tipping_transit_time, FoldedKind,
};
use fcl::transition::{poincare_map, transition_map};
use rayon::prelude::*;

use crate::output::{write_csv, write_svg, RunManifest, Series};

/// Shared invocation context: parsed config, flag overrides, output sink.
pub struct Ctx {
    pub cfg: Config,
    pub alpha: Option<u32>,
    pub eps: Option<f64>,
    pub eps_grid: Option<Vec<f64>>,
    pub entry_r: Option<f64>,
    pub out: PathBuf,
    pub manifest: RunManifest,
}

impl Ctx {
    fn regime(&self) -> Result<ScalingRegime> {
        ScalingRegime::new(
            self.alpha.unwrap_or(self.cfg.regime.alpha),
            self.eps.unwrap_or(self.cfg.regime.eps),
        )
    }

    fn system(&self) -> Result<PrototypicalSystem> {
        let mut sys = self.cfg.system()?;
        sys.regime = self.regime()?;
        Ok(sys)
    }

    fn section(&self) -> Result<SectionSpec> {
        self.cfg.section()
    }

    fn entry_r(&self, section: &SectionSpec) -> f64 {
        self.entry_r
            .unwrap_or(0.5 * (section.beta_minus + section.beta_plus))
    }

    fn grid_or(&self, default: &[f64]) -> Vec<f64> {
        self.eps_grid.clone().unwrap_or_else(|| default.to_vec())
    }
}

/// A single pass/fail line of a verification table.
struct Check {
    name: &'static str,
    value: f64,
    threshold: String,
    pass: bool,
}

impl Check {
    fn new(name: &'static str, value: f64, threshold: String, pass: bool) -> Check {
        Check {
            name,
            value,
            threshold,
            pass,
        }
    }
}

fn emit_table(ctx: &Ctx, file: &str, checks: &[Check]) -> Result<bool> {
    let rows: Vec<String> = checks
        .iter()
        .map(|c| {
            format!(
                "{},{:.12e},{},{}",
                c.name,
                c.value,
                c.threshold,
                if c.pass { "pass" } else { "FAIL" }
            )
        })
        .collect();
    write_csv(&ctx.out, file, &ctx.manifest, "check,value,threshold,status", &rows)
        .map_err(|e| FclError::Config(format!("cannot write {file}: {e}")))?;
    for c in checks {
        println!(
            "{:40} {:>18.10e}  {:24} {}",
            c.name,
            c.value,
            c.threshold,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    Ok(checks.iter().all(|c| c.pass))
}

/// Plain least squares y = a + b x, returning (slope, intercept, r²).
fn linear_fit(pairs: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pairs.len() as f64;
    let xb = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let yb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - xb) * (p.0 - xb)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - xb) * (p.1 - yb)).sum();
    let slope = sxy / sxx;
    let intercept = yb - slope * xb;
    let sst: f64 = pairs.iter().map(|p| (p.1 - yb) * (p.1 - yb)).sum();
    let ssr: f64 = pairs
        .iter()
        .map(|p| {
            let r = p.1 - intercept - slope * p.0;
            r * r
        })
        .sum();
    let r2 = if sst == 0.0 { 1.0 } else { 1.0 - ssr / sst };
    (slope, intercept, r2)
}

const TRANSITION_HEADER: &str =
    "alpha,eps,entry_r,exit_theta_lifted,exit_y,n_rot,transit_time,log_contraction";

fn transition_row(sys: &PrototypicalSystem, section: &SectionSpec, entry_r: f64) -> Result<String> {
    let rec = transition_map(
        sys,
        section,
        section.entry(entry_r, 0.0),
        &IntegratorConfig::default(),
    )?;
    Ok(format!(
        "{},{:.12e},{:.12e},{:.12e},{:.12e},{},{:.12e},{:.12e}",
        sys.regime.alpha,
        sys.regime.eps,
        entry_r,
        rec.exit.theta_lifted,
        rec.exit.y,
        rec.n_rot,
        rec.transit_time,
        rec.log_contraction_y
    ))
}

pub fn cmd_omega0(ctx: &Ctx) -> Result<bool> {
    let w = omega0();
    println!("{:.16}", w.value);
    println!("bessel residual:  {:.3e}", w.residual);
    println!("airy cross-check: {:.3e}", w.airy_crosscheck);
    let row = format!("{:.16},{:.3e},{:.3e}", w.value, w.residual, w.airy_crosscheck);
    write_csv(
        &ctx.out,
        "omega0.csv",
        &ctx.manifest,
        "value,residual,airy_crosscheck",
        &[row],
    )
    .map_err(|e| FclError::Config(format!("cannot write omega0.csv: {e}")))?;
    Ok(w.residual.abs() <= 1e-12 && w.airy_crosscheck.abs() <= 1e-10)
}

pub fn cmd_transition(ctx: &Ctx) -> Result<bool> {
    let sys = ctx.system()?;
    let section = ctx.section()?;
    let row = transition_row(&sys, &section, ctx.entry_r(&section))?;
    println!("{TRANSITION_HEADER}");
    println!("{row}");
    write_csv(
        &ctx.out,
        "transition.csv",
        &ctx.manifest,
        TRANSITION_HEADER,
        &[row],
    )
    .map_err(|e| FclError::Config(format!("cannot write transition.csv: {e}")))?;
    Ok(true)
}

pub fn cmd_scan(ctx: &Ctx) -> Result<bool> {
    let base = ctx.system()?;
    let section = ctx.section()?;
    let entry_r = ctx.entry_r(&section);
    let grid = ctx.grid_or(&[0.005, 0.00707, 0.01, 0.0141, 0.02, 0.0283, 0.04]);

    let mut results: Vec<(u64, String, (f64, f64))> = grid
        .par_iter()
        .map(|&eps| {
            let mut sys = base.clone();
            sys.regime.eps = eps;
            let row = transition_row(&sys, &section, entry_r)?;
            let exit_y: f64 = row.split(',').nth(4).unwrap().parse().unwrap();
            Ok((eps.to_bits(), row, (eps.log10(), exit_y.abs().log10())))
        })
        .collect::<Result<Vec<_>>>()?;
    // Deterministic merge regardless of worker scheduling.
    results.sort_by_key(|r| r.0);

    let rows: Vec<String> = results.iter().map(|r| r.1.clone()).collect();
    let pts: Vec<(f64, f64)> = results.iter().map(|r| r.2).collect();
    println!("{TRANSITION_HEADER}");
    for r in &rows {
        println!("{r}");
    }
    write_csv(&ctx.out, "scan.csv", &ctx.manifest, TRANSITION_HEADER, &rows)
        .map_err(|e| FclError::Config(format!("cannot write scan.csv: {e}")))?;
    write_svg(
        &ctx.out,
        "scan.svg",
        &ctx.manifest,
        "exit drift |exit_y| vs eps (log-log); predicted slope 2 for alpha >= 2",
        "log10 eps",
        "log10 |exit_y|",
        &[Series {
            label: "|exit_y|",
            points: &pts,
        }],
    )
    .map_err(|e| FclError::Config(format!("cannot write scan.svg: {e}")))?;
    Ok(true)
}

pub fn cmd_verify(ctx: &Ctx) -> Result<bool> {
    let base = ctx.system()?;
    let section = ctx.section()?;
    let entry_r = ctx.entry_r(&section);
    let alpha = base.regime.alpha;
    let omega = omega0().value;
    let mut checks = Vec::new();

    // Exit-drift scaling: |exit_y| normalized by the exit-angle coefficient
    // follows Omega0 * eps^2.
    let drift_grid = ctx.grid_or(&[0.005, 0.00707, 0.01, 0.0141, 0.02, 0.0283, 0.04]);
    let recs: Vec<(f64, f64, f64)> = drift_grid
        .par_iter()
        .map(|&eps| {
            let mut sys = base.clone();
            sys.regime.eps = eps;
            let rec = transition_map(
                &sys,
                &section,
                section.entry(entry_r, 0.0),
                &IntegratorConfig::default(),
            )?;
            let th = rec.exit.theta_lifted;
            let coeff = (sys.c.eval(th).powi(2) / (sys.a.eval(th) * sys.b.eval(th))).cbrt();
            Ok((eps, rec.exit.y, rec.exit.y / coeff))
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(f64, f64)> = recs.iter().map(|r| (r.0, r.2)).collect();
    let fit = fit_power_law(&pairs)?;
    let slope_tol = if alpha == 1 { 0.2 } else { 0.1 };
    checks.push(Check::new(
        "exit_y log-log slope",
        fit.slope,
        format!("2.0 +/- {slope_tol}"),
        (fit.slope - 2.0).abs() <= slope_tol,
    ));
    if alpha >= 2 {
        // Geometric mean of the per-eps prefactor ratios.
        let logsum: f64 = recs
            .iter()
            .map(|r| (r.2.abs() / (omega * r.0 * r.0)).ln())
            .sum();
        let prefactor = (logsum / recs.len() as f64).exp();
        checks.push(Check::new(
            "exit_y prefactor / Omega0",
            prefactor,
            "1.0 +/- 0.15".into(),
            (prefactor - 1.0).abs() <= 0.15,
        ));
    }

    // Rotation counts against the floor law, plus their scaling exponent.
    let rot_grid: Vec<f64> = match alpha {
        1 => vec![0.004, 0.00566, 0.008, 0.0113, 0.016],
        2 => vec![0.0025, 0.00354, 0.005, 0.00707, 0.01],
        _ => vec![0.01, 0.02],
    };
    let rots: Vec<(f64, i64, i64)> = rot_grid
        .par_iter()
        .map(|&eps| {
            let mut sys = base.clone();
            sys.regime.eps = eps;
            let rec = transition_map(
                &sys,
                &section,
                section.entry(entry_r, 0.0),
                &IntegratorConfig::default(),
            )?;
            let pred = predict_n_rot(alpha, 0.0, eps, section.r_exit, &sys)?;
            Ok((eps, rec.n_rot, pred.n))
        })
        .collect::<Result<Vec<_>>>()?;
    if alpha <= 2 {
        let worst = rots
            .iter()
            .map(|&(_, got, pred)| (got - pred).abs() as f64 - (10.0f64).max(0.1 * pred as f64))
            .fold(f64::MIN, f64::max);
        checks.push(Check::new(
            "n_rot vs floor law (worst excess)",
            worst,
            "<= 0".into(),
            worst <= 0.0,
        ));
        let pairs: Vec<(f64, f64)> = rots
            .iter()
            .filter(|r| r.1 > 0)
            .map(|&(e, got, _)| (e, got as f64))
            .collect();
        let fit = fit_power_law(&pairs)?;
        let (want, tol) = if alpha == 1 { (-2.0, 0.1) } else { (-1.0, 0.15) };
        checks.push(Check::new(
            "n_rot log-log slope",
            fit.slope,
            format!("{want} +/- {tol}"),
            (fit.slope - want).abs() <= tol,
        ));
    } else {
        let max_rot = rots.iter().map(|r| r.1).max().unwrap_or(0);
        checks.push(Check::new(
            "n_rot at alpha >= 3 (max over grid)",
            max_rot as f64,
            "== 0".into(),
            max_rot == 0,
        ));
    }

    // Strong contraction: log-contraction is linear in eps^{-3} with
    // negative slope.
    let con_grid = [0.02, 0.025, 0.032, 0.04, 0.05];
    let cons: Vec<(f64, f64)> = con_grid
        .par_iter()
        .map(|&eps| {
            let mut sys = base.clone();
            sys.regime.eps = eps;
            let rec = transition_map(
                &sys,
                &section,
                section.entry(entry_r, 0.0),
                &IntegratorConfig::default(),
            )?;
            Ok((eps.powi(-3), rec.log_contraction_y))
        })
        .collect::<Result<Vec<_>>>()?;
    let (slope, _, r2) = linear_fit(&cons);
    checks.push(Check::new(
        "contraction slope vs eps^-3",
        slope,
        "< 0".into(),
        slope < 0.0,
    ));
    checks.push(Check::new(
        "contraction linearity r^2",
        r2,
        ">= 0.99".into(),
        r2 >= 0.99,
    ));

    let drift_pts: Vec<(f64, f64)> = recs
        .iter()
        .map(|r| (r.0.log10(), r.2.abs().log10()))
        .collect();
    let pred_pts: Vec<(f64, f64)> = recs
        .iter()
        .map(|r| (r.0.log10(), (omega * r.0 * r.0).log10()))
        .collect();
    write_svg(
        &ctx.out,
        "verify_exit_y.svg",
        &ctx.manifest,
        "normalized exit drift vs eps with the Omega0 eps^2 law",
        "log10 eps",
        "log10 |exit_y| / coeff",
        &[
            Series {
                label: "measured",
                points: &drift_pts,
            },
            Series {
                label: "Omega0 eps^2",
                points: &pred_pts,
            },
        ],
    )
    .map_err(|e| FclError::Config(format!("cannot write verify_exit_y.svg: {e}")))?;
    emit_table(ctx, "verify.csv", &checks)
}

pub fn cmd_charts_verify(ctx: &Ctx) -> Result<bool> {
    let sys = ctx.system()?;
    let mut checks = Vec::new();

    // Chart-change round trips on a deterministic point cloud.
    let mut worst: f64 = 0.0;
    let mut lcg: u64 = 0x2545F4914F6CDD1D;
    let mut unif = || {
        lcg = lcg.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (lcg >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..100 {
        let (r, th, y, eps) = (
            -1.5 + unif(),
            unif(),
            0.5 + unif(),
            0.1 + 0.2 * unif(),
        );
        let p1 = to_chart(Chart::K1, r, th, y, eps)?;
        let q = kappa_12_inv(&kappa_12(&p1)?)?;
        for i in 0..4 {
            worst = worst.max((q.coords[i] - p1.coords[i]).abs());
        }
        let p2 = to_chart(Chart::K2, 0.5 + unif(), th, y, eps)?;
        let q = kappa_23_inv(&kappa_23(&p2)?)?;
        for i in 0..4 {
            worst = worst.max((q.coords[i] - p2.coords[i]).abs());
        }
    }
    checks.push(Check::new(
        "kappa round-trip max error",
        worst,
        "<= 1e-13".into(),
        worst <= 1e-13,
    ));

    // Blow-down orbit consistency in the entry and rescaling charts.
    let cfg = IntegratorConfig::default();
    let p1 = fcl::blowup::ChartPoint::new(Chart::K1, [-1.5, 0.0, 0.1, 0.5]);
    let dev1 = check_blowdown_consistency(Chart::K1, &sys, &p1, 4.0, &cfg)?;
    checks.push(Check::new(
        "blow-down consistency K1",
        dev1,
        "<= 1e-8".into(),
        dev1 <= 1e-8,
    ));
    let p2 = fcl::blowup::ChartPoint::new(Chart::K2, [-3.0, 0.0, 4.0, 0.05]);
    let dev2 = check_blowdown_consistency(Chart::K2, &sys, &p2, 5.0, &cfg)?;
    checks.push(Check::new(
        "blow-down consistency K2",
        dev2,
        "<= 1e-8".into(),
        dev2 <= 1e-8,
    ));

    // Exit-chart corner spectrum (b, 0, -2b, -b).
    let theta = 0.3;
    let b = sys.b.eval(theta);
    let eig = k3_corner_eigenvalues(&sys, theta)?;
    let want = [b, 0.0, -2.0 * b, -b];
    let spec_err = eig
        .iter()
        .zip(&want)
        .map(|(e, w)| (e - w).abs())
        .fold(0.0f64, f64::max);
    checks.push(Check::new(
        "K3 corner eigenvalues",
        spec_err,
        "<= 1e-10".into(),
        spec_err <= 1e-10,
    ));

    emit_table(ctx, "charts_verify.csv", &checks)
}

pub fn cmd_riccati(ctx: &Ctx, a: f64, b: f64, c: f64, l: f64) -> Result<bool> {
    let curve = riccati_special_solution(a, b, c, l)?;
    let rows: Vec<String> = curve
        .samples
        .iter()
        .map(|s| format!("{:.12e},{:.12e}", s[0], s[1]))
        .collect();
    write_csv(&ctx.out, "riccati.csv", &ctx.manifest, "r2,y2", &rows)
        .map_err(|e| FclError::Config(format!("cannot write riccati.csv: {e}")))?;
    let pts: Vec<(f64, f64)> = curve.samples.iter().map(|s| (s[0], s[1])).collect();
    write_svg(
        &ctx.out,
        "riccati.svg",
        &ctx.manifest,
        "Riccati special solution: left branch b/a r2^2, right asymptote -Omega0-like constant",
        "r2",
        "y2",
        &[Series {
            label: "special solution",
            points: &pts,
        }],
    )
    .map_err(|e| FclError::Config(format!("cannot write riccati.svg: {e}")))?;
    println!(
        "right-asymptote error {:.3e} (tolerance {:.3e}) over {} samples",
        curve.right_asymptote_error,
        curve.tolerance,
        curve.samples.len()
    );
    Ok(curve.right_asymptote_error <= curve.tolerance)
}

pub fn cmd_lienard(ctx: &Ctx) -> Result<bool> {
    let mut spec = ctx.cfg.lienard()?;
    spec.regime = ctx.regime()?;
    let section = ctx.section()?;
    let entry_r = ctx.entry_r(&section);
    let grid = ctx.grid_or(&[0.005, 0.01, 0.02, 0.04]);
    let report = lienard_verify(&spec, &section, entry_r, &grid, &IntegratorConfig::default())?;

    let rows: Vec<String> = report
        .runs
        .iter()
        .map(|r| {
            format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                r.eps, r.exit_y, r.exit_theta, r.predicted_y, r.ratio
            )
        })
        .collect();
    write_csv(
        &ctx.out,
        "lienard.csv",
        &ctx.manifest,
        "eps,exit_y,exit_theta_lifted,predicted_y,ratio",
        &rows,
    )
    .map_err(|e| FclError::Config(format!("cannot write lienard.csv: {e}")))?;

    let mut checks = vec![Check::new(
        "fold point x_F located",
        report.x_f,
        "K''(x_F) > 0".into(),
        report.k2 > 0.0,
    )];
    if let Some(fit) = &report.fit {
        checks.push(Check::new(
            "exit_y log-log slope",
            fit.slope,
            "2.0 +/- 0.1".into(),
            (fit.slope - 2.0).abs() <= 0.1,
        ));
    }
    if spec.regime.alpha >= 2 {
        let worst = report
            .runs
            .iter()
            .map(|r| (r.ratio - 1.0).abs())
            .fold(0.0f64, f64::max);
        checks.push(Check::new(
            "prefactor ratio worst deviation",
            worst,
            "<= 0.2".into(),
            worst <= 0.2,
        ));
    }
    emit_table(ctx, "lienard_verify.csv", &checks)
}

pub fn cmd_tipping(ctx: &Ctx) -> Result<bool> {
    let mut spec = ctx.cfg.tipping()?;
    spec.regime = ctx.regime()?;
    let mut checks = Vec::new();

    let [ps, pc] = tipping_folded_singularities(spec.amplitude)?;
    checks.push(Check::new(
        "folded saddle at theta = 1/4",
        ps.theta,
        "saddle".into(),
        ps.kind == FoldedKind::Saddle && ps.theta == 0.25,
    ));
    checks.push(Check::new(
        "folded center at theta = 3/4",
        pc.theta,
        "center".into(),
        pc.kind == FoldedKind::Center && pc.theta == 0.75,
    ));

    let (tl, tr) = tipping_interval(spec.r, spec.amplitude)?;
    let theta0 = 0.5 * (tl + tr + 1.0);
    if spec.regime.alpha <= 2 {
        let rep = tipping_simulate(&spec, theta0, spec.r)?;
        let te = tipping_theta_e(theta0, spec.r, spec.amplitude)?;
        println!(
            "mid-window entry theta0 = {theta0:.6}: simulated jump {:.6}, predicted {te:.6}",
            rep.theta_exit
        );
        checks.push(Check::new(
            "jump angle |theta_sim - theta_e|",
            rep.theta_error.unwrap_or(f64::NAN),
            "<= 0.02".into(),
            rep.theta_error.map(|e| e <= 0.02).unwrap_or(false),
        ));
        checks.push(Check::new(
            "exit drift a_exit magnitude",
            rep.a_exit,
            format!("|a| <= eps^(2a/3) x10 = {:.3e}", 10.0 * spec.regime.eps.powf(2.0 * spec.regime.alpha as f64 / 3.0)),
            rep.a_exit.abs()
                <= 10.0 * spec.regime.eps.powf(2.0 * spec.regime.alpha as f64 / 3.0),
        ));
    }
    let t = tipping_transit_time(0.3, &spec)?;
    checks.push(Check::new(
        "annulus transit time T > 0",
        t,
        "> 0".into(),
        t > 0.0,
    ));

    emit_table(ctx, "tipping_verify.csv", &checks)
}

pub fn cmd_poincare(ctx: &Ctx) -> Result<bool> {
    // Fold-of-cycles certificate on the layer family: eps1 fixed, eps2 = 0.
    let mut sys = ctx.system()?;
    sys.regime = ScalingRegime::new(1, ctx.eps.unwrap_or(0.05))?;
    let cfg = IntegratorConfig::default();
    let p = |r: f64, y: f64| -> Result<f64> {
        Ok(poincare_map(&sys, r, y, 0.0, Some(0.0), &cfg)?.0)
    };
    let h = 1e-5;
    let p00 = p(0.0, 0.0)?;
    let dpdr = (p(h, 0.0)? - p(-h, 0.0)?) / (2.0 * h);
    let d2pdr2 = (p(h, 0.0)? - 2.0 * p00 + p(-h, 0.0)?) / (h * h);
    let dpdy = (p(0.0, h)? - p(0.0, -h)?) / (2.0 * h);
    // Slow drift with eps2 restored: y must decrease over one period.
    let (_, y1) = poincare_map(&sys, 0.0, 0.0, 0.0, None, &cfg)?;

    let checks = vec![
        Check::new("P_r(0,0)", p00, "|.| <= 1e-8".into(), p00.abs() <= 1e-8),
        Check::new(
            "dP_r/dr at fold",
            dpdr,
            "1 +/- 1e-5".into(),
            (dpdr - 1.0).abs() <= 1e-5,
        ),
        Check::new(
            "d2P_r/dr2 sign",
            d2pdr2,
            "> 0".into(),
            d2pdr2 > 0.0,
        ),
        Check::new("dP_r/dy sign", dpdy, "< 0".into(), dpdy < 0.0),
        Check::new("slow drift P_y - y0 sign", y1, "< 0".into(), y1 < 0.0),
    ];
    emit_table(ctx, "poincare.csv", &checks)
}
