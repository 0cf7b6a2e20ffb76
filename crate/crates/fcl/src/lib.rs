//! fcl — a numerical laboratory for three time-scale systems near a regular
//! folded limit cycle.
//!
//! The library simulates the prototypical cylinder system
//!
//! ```text
//!   r' = -a(θ) y + b(θ) r² + R_r(r, θ, y, ε)
//!   θ' = ε^α
//!   y' = ε³ (-c(θ) + R_y(r, θ, y, ε))
//! ```
//!
//! with smooth positive 1-periodic coefficients, computes its entry-to-exit
//! transition map by direct adaptive integration, and checks the asymptotic
//! exit laws (drift ∝ Ω₀ε², exit-angle increments, rotation counts, strong
//! contraction) together with the blow-up chart machinery that explains them.
//! Two applications are included: periodically forced Liénard oscillators and
//! a climate-tipping toy model.
//!
//! Module map:
//! - [`periodic`], [`model`]: coefficient functions, system classes, sections,
//!   normal-form extraction;
//! - [`special`]: Bessel J±1/3, Airy Ai, Gamma, Brent, the constant Ω₀;
//! - [`integrator`]: Dormand–Prince 5(4) with dense output, events, and
//!   variational (sensitivity) flow;
//! - [`transition`]: transition map, Poincaré map, contraction scans;
//! - [`blowup`]: charts K1/K2/K3, chart vector fields, Riccati dynamics;
//! - [`asymptotics`]: closed-form predictions and power-law fitting;
//! - [`lienard`], [`tipping`]: the applications;
//! - [`config`]: plain-text configuration loading.

pub mod asymptotics;
pub mod blowup;
pub mod config;
pub mod error;
pub mod lienard;
pub mod integrator;
pub mod model;
pub mod periodic;
pub mod special;
pub mod tipping;
pub mod transition;

pub use error::{FclError, Result};
