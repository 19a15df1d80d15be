//! Composite training loss: negative worst-case sum rate plus a smooth hinge
//! on the normalised CRLB slack of every sAP.

use maisac_core::comm::{InterferenceBound, RateUnit, RobustTerms};
use maisac_core::config::SystemConfig;
use maisac_core::fp::Mode;
use maisac_core::geometry::Scenario;
use maisac_core::numerics::Real;
use maisac_core::robust::{crlb_slack, theta_sets};

use crate::model::Projected;
use crate::Result;

/// Distortion radius the policy is trained against.
pub fn design_radius(cfg: &SystemConfig, mode: Mode) -> f64 {
    match mode {
        Mode::Robust => cfg.amplifier.epsilon,
        Mode::NonRobust => 0.0,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LossParts<S> {
    pub total: S,
    /// `K * kappa`: worst-case sum rate in bits at the design radius.
    pub sum_rate: S,
    /// Sum of squared slack deficits.
    pub penalty: S,
    /// sAPs whose certified CRLB exceeds the budget.
    pub violations: usize,
}

/// Differentiable loss of a projected decision on `scenario`.
pub fn loss<S: Real>(
    cfg: &SystemConfig,
    scenario: &Scenario,
    decision: &Projected<S>,
    mode: Mode,
    lambda: f64,
) -> Result<LossParts<S>> {
    let eps = design_radius(cfg, mode);
    let channels = scenario.channels_for(&decision.tx, &decision.rx)?;
    let beta1 = cfg.amplifier.beta1;
    let budget = cfg.budget();
    let sum_rate = RobustTerms::new(&channels.comm, &decision.w, beta1).worst_case_rate(
        eps,
        budget.noise_ue,
        InterferenceBound::Triangle,
        RateUnit::Bits,
    );
    let slacks: Vec<S> = theta_sets(&channels, &decision.w, budget.noise_sap, beta1)
        .iter()
        .map(|t| crlb_slack(eps, t, cfg.sensing.crlb_threshold))
        .collect();
    let deficits: Vec<S> = slacks.iter().map(|&s| (-s).relu()).collect();
    let penalty = S::dot(&deficits, &deficits);
    Ok(LossParts {
        total: penalty.scale(lambda) - sum_rate,
        sum_rate,
        penalty,
        violations: slacks.iter().filter(|s| s.value() < 0.0).count(),
    })
}

/// Reported loss with the 0/1 violation indicator in place of the hinge.
pub fn indicator_loss(kappa_sum: f64, violations: usize, lambda: f64) -> f64 {
    -kappa_sum + lambda * violations as f64
}
