//! Plain-text (TOML) configuration for systems, sections, and applications.
//!
//! Schema (all tables optional except [regime]):
//!
//! ```toml
//! [regime]            # scaling regime
//! alpha = 2
//! eps = 0.01
//!
//! [coefficients.a]    # likewise .b and .c; omitted coefficients default to 1
//! mean = 1.0
//! harmonics = [{ k = 1, sin = 0.5 }]         # cos defaults to 0, sin to 0
//!
//! [sections]          # entry/exit sections; omitted fields default from R
//! R = 0.1
//! beta_minus = -0.2
//! beta_plus = -0.05
//! y0 = 0.01
//!
//! [remainders]        # optional monomial perturbations m(θ) r^p y^q ε^s
//! fast = [{ p = 3, q = 0, s = 0, mean = 0.1 }]
//! slow = []
//!
//! [lienard]
//! f = [-1.0, 0.0, 1.0]            # ascending polynomial coefficients
//! g = [0.0, 1.0]
//! vartheta = 1.0
//! forcing = { mean = 0.0, harmonics = [{ k = 1, sin = 0.5 }] }
//!
//! [tipping]
//! amplitude = 0.5
//! nu = 1.0
//! R = 0.3
//! rho = 0.5
//! ```
//!
//! Unknown keys anywhere are rejected with the offending key named.

use crate::error::{FclError, Result};
use crate::lienard::{LienardSpec, Polynomial};
use crate::model::{
    Monomial, PrototypicalSystem, RemainderSpec, RemainderTarget, ScalingRegime, SectionSpec,
};
use crate::periodic::{Harmonic, PeriodicFn};
use crate::tipping::TippingSpec;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicCfg {
    pub k: u32,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientCfg {
    pub mean: f64,
    #[serde(default)]
    pub harmonics: Vec<HarmonicCfg>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsCfg {
    pub a: Option<CoefficientCfg>,
    pub b: Option<CoefficientCfg>,
    pub c: Option<CoefficientCfg>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeCfg {
    pub alpha: u32,
    pub eps: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionsCfg {
    #[serde(rename = "R")]
    pub r: f64,
    pub beta_minus: Option<f64>,
    pub beta_plus: Option<f64>,
    pub y0: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialCfg {
    pub p: u32,
    pub q: u32,
    pub s: u32,
    pub mean: f64,
    #[serde(default)]
    pub harmonics: Vec<HarmonicCfg>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemaindersCfg {
    #[serde(default)]
    pub fast: Vec<MonomialCfg>,
    #[serde(default)]
    pub slow: Vec<MonomialCfg>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LienardCfg {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub vartheta: f64,
    pub forcing: CoefficientCfg,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TippingCfg {
    pub amplitude: f64,
    pub nu: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub rho: f64,
}

/// The parsed configuration file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub regime: RegimeCfg,
    pub coefficients: Option<CoefficientsCfg>,
    pub sections: Option<SectionsCfg>,
    pub remainders: Option<RemaindersCfg>,
    pub lienard: Option<LienardCfg>,
    pub tipping: Option<TippingCfg>,
}

fn to_periodic(cfg: &CoefficientCfg) -> Result<PeriodicFn> {
    let harmonics = cfg
        .harmonics
        .iter()
        .map(|h| Harmonic {
            k: h.k,
            cos_coeff: h.cos,
            sin_coeff: h.sin,
        })
        .collect();
    PeriodicFn::new(cfg.mean, harmonics)
}

impl Config {
    /// Parses TOML text; syntax errors and unknown keys are reported with
    /// the parser's location/key context.
    pub fn from_toml(text: &str) -> Result<Config> {
        toml::from_str(text).map_err(|e| FclError::Config(format!("config parse error: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            FclError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Config::from_toml(&text)
    }

    /// A minimal in-memory config for the default unit system.
    pub fn default_unit(alpha: u32, eps: f64) -> Config {
        Config {
            regime: RegimeCfg { alpha, eps },
            coefficients: None,
            sections: None,
            remainders: None,
            lienard: None,
            tipping: None,
        }
    }

    pub fn regime(&self) -> Result<ScalingRegime> {
        ScalingRegime::new(self.regime.alpha, self.regime.eps)
    }

    /// Builds the prototypical system; missing coefficients default to 1 and
    /// missing remainders to empty.
    pub fn system(&self) -> Result<PrototypicalSystem> {
        let unit = || PeriodicFn::constant(1.0);
        let (a, b, c) = match &self.coefficients {
            None => (unit(), unit(), unit()),
            Some(cs) => (
                cs.a.as_ref().map_or_else(|| Ok(unit()), to_periodic)?,
                cs.b.as_ref().map_or_else(|| Ok(unit()), to_periodic)?,
                cs.c.as_ref().map_or_else(|| Ok(unit()), to_periodic)?,
            ),
        };
        let mono = |m: &MonomialCfg| -> Result<Monomial> {
            Ok(Monomial {
                coeff: to_periodic(&CoefficientCfg {
                    mean: m.mean,
                    harmonics: m.harmonics.clone(),
                })?,
                p: m.p,
                q: m.q,
                s: m.s,
            })
        };
        let (fast, slow) = match &self.remainders {
            None => (Vec::new(), Vec::new()),
            Some(r) => (
                r.fast.iter().map(mono).collect::<Result<Vec<_>>>()?,
                r.slow.iter().map(mono).collect::<Result<Vec<_>>>()?,
            ),
        };
        let mut rem_r = RemainderSpec::empty(RemainderTarget::Fast);
        rem_r.terms = fast;
        rem_r.validate(self.regime.alpha)?;
        let mut rem_y = RemainderSpec::empty(RemainderTarget::Slow);
        rem_y.terms = slow;
        rem_y.validate(self.regime.alpha)?;
        PrototypicalSystem::new(a, b, c, rem_r, rem_y, self.regime()?)
    }

    /// Builds the section spec; a missing [sections] table defaults to
    /// R = 0.1 with the standard entry band.
    pub fn section(&self) -> Result<SectionSpec> {
        let spec = match &self.sections {
            None => SectionSpec::default_for(0.1),
            Some(s) => {
                let mut spec = SectionSpec::default_for(s.r);
                if let Some(v) = s.beta_minus {
                    spec.beta_minus = v;
                }
                if let Some(v) = s.beta_plus {
                    spec.beta_plus = v;
                }
                if let Some(v) = s.y0 {
                    spec.y0 = v;
                }
                spec
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds the Liénard spec; a missing [lienard] table defaults to the
    /// forced van der Pol oscillator.
    pub fn lienard(&self) -> Result<LienardSpec> {
        let regime = self.regime()?;
        match &self.lienard {
            None => Ok(LienardSpec::van_der_pol(regime)),
            Some(l) => {
                if !(l.vartheta > 0.0) {
                    return Err(FclError::Config(format!(
                        "[lienard] vartheta must be > 0, got {}",
                        l.vartheta
                    )));
                }
                Ok(LienardSpec {
                    f: Polynomial::new(l.f.clone()),
                    g: Polynomial::new(l.g.clone()),
                    forcing: to_periodic(&l.forcing)?,
                    vartheta: l.vartheta,
                    regime,
                })
            }
        }
    }

    /// Builds the tipping spec; a missing [tipping] table defaults to the
    /// desk-scale parameters.
    pub fn tipping(&self) -> Result<TippingSpec> {
        let regime = self.regime()?;
        match &self.tipping {
            None => Ok(TippingSpec::desk(regime)),
            Some(t) => TippingSpec::new(t.amplitude, t.nu, regime, t.r, t.rho),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
        [regime]
        alpha = 2
        eps = 0.01

        [coefficients.c]
        mean = 2.0
        harmonics = [{ k = 1, sin = 1.0 }]

        [sections]
        R = 0.1
        beta_minus = -0.3

        [remainders]
        fast = [{ p = 3, q = 0, s = 0, mean = 0.1 }]

        [lienard]
        f = [-1.0, 0.0, 1.0]
        g = [0.0, 1.0]
        vartheta = 2.0
        forcing = { mean = 0.0, harmonics = [{ k = 1, sin = 0.5 }] }

        [tipping]
        amplitude = 0.5
        nu = 1.0
        R = 0.3
        rho = 0.5
    "#;

    #[test]
    fn parses_full_config() {
        let cfg = Config::from_toml(FULL).unwrap();
        let sys = cfg.system().unwrap();
        assert_eq!(sys.regime.alpha, 2);
        assert_eq!(sys.a.eval(0.37), 1.0);
        assert!((sys.c.eval(0.25) - 3.0).abs() < 1e-14);
        assert_eq!(sys.rem_r.terms.len(), 1);
        assert_eq!(sys.rem_y.terms.len(), 0);

        let sec = cfg.section().unwrap();
        assert_eq!(sec.r_exit, 0.1);
        assert_eq!(sec.beta_minus, -0.3);
        assert_eq!(sec.beta_plus, -0.05);

        let lien = cfg.lienard().unwrap();
        assert_eq!(lien.vartheta, 2.0);
        assert_eq!(lien.f.eval(2.0), 3.0);

        let tip = cfg.tipping().unwrap();
        assert_eq!(tip.amplitude, 0.5);
        assert_eq!(tip.r, 0.3);
    }

    #[test]
    fn defaults_when_tables_missing() {
        let cfg = Config::from_toml("[regime]\nalpha = 1\neps = 0.02\n").unwrap();
        let sys = cfg.system().unwrap();
        assert_eq!(sys.c.eval(0.9), 1.0);
        assert_eq!(cfg.section().unwrap().r_exit, 0.1);
        // Default applications: van der Pol and desk tipping.
        assert_eq!(cfg.lienard().unwrap().vartheta, 1.0);
        assert_eq!(cfg.tipping().unwrap().amplitude, 0.5);

        let cfg = Config::default_unit(2, 0.01);
        assert!(cfg.system().is_ok());
    }

    #[test]
    fn rejects_unknown_keys_naming_them() {
        let err = Config::from_toml("[regime]\nalpha = 1\neps = 0.02\nbogus_key = 3\n")
            .unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("bogus_key"), "message was: {msg}");

        let err =
            Config::from_toml("[regime]\nalpha = 1\neps = 0.02\n[sections]\nradius = 0.1\n")
                .unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("radius"), "message was: {msg}");
    }

    #[test]
    fn rejects_invalid_values() {
        // Inadmissible remainder order class must be caught by validation.
        let text = "[regime]\nalpha = 2\neps = 0.01\n[remainders]\nfast = [{ p = 1, q = 0, s = 0, mean = 0.1 }]\n";
        let cfg = Config::from_toml(text).unwrap();
        assert!(cfg.system().is_err());

        // Bad regime values.
        let cfg = Config::from_toml("[regime]\nalpha = 0\neps = 0.01\n").unwrap();
        assert!(cfg.regime().is_err());
    }
}
