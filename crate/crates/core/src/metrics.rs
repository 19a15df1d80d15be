//! Evaluation of an emitted solution under nominal and adversarial amplifiers.

use num_complex::Complex64;
use serde::Serialize;

use crate::comm::{InterferenceBound, RateUnit, RobustTerms, Solution};
use crate::config::SystemConfig;
use crate::geometry::ChannelSet;
use crate::robust::{theta_sets, worst_case_crlb};
use crate::sensing::fim_terms;

/// Phase grid used for the adversarial coefficient search.
pub const ADVERSARIAL_PHASES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    /// Sum rate in bits with a linear amplifier.
    pub nominal_rate: f64,
    /// Certified lower bound on the sum rate over the disk.
    pub worst_case_rate: f64,
    /// Lowest sum rate on the phase grid at `|beta3| = eps`.
    pub adversarial_rate: f64,
    pub adversarial_phase: f64,
    /// Worst `Tr(CRLB)` over sAPs with a linear amplifier.
    pub crlb_nominal: f64,
    /// Worst certified upper bound on `Tr(CRLB)` over sAPs and the disk.
    pub crlb_worst_case: f64,
    pub power_feasible: bool,
    pub layout_feasible: bool,
    /// `crlb_worst_case <= gamma`.
    pub sensing_feasible: bool,
}

impl Evaluation {
    pub fn feasible(&self) -> bool {
        self.power_feasible && self.layout_feasible && self.sensing_feasible
    }
}

fn crlb_of(m: [[f64; 2]; 2]) -> f64 {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det > 0.0 {
        (m[0][0] + m[1][1]) / det
    } else {
        f64::INFINITY
    }
}

/// Evaluate `sol` on `channels` with coefficient radius `eps`.
pub fn evaluate(cfg: &SystemConfig, channels: &ChannelSet, sol: &Solution, eps: f64) -> Evaluation {
    let beta1 = cfg.amplifier.beta1;
    let noise = cfg.noise_w();
    let terms = RobustTerms::new(&channels.comm, &sol.w, beta1);
    let taps = sol.w.len();
    let nominal_rate = terms
        .link_terms(&vec![Complex64::new(0.0, 0.0); taps])
        .sum_rate(noise, RateUnit::Bits);
    let worst_case_rate =
        terms.worst_case_rate(eps, noise, InterferenceBound::Triangle, RateUnit::Bits);
    let (adversarial_rate, adversarial_phase) =
        terms.adversarial_rate(eps, noise, ADVERSARIAL_PHASES);
    let noise_sap = cfg.budget().noise_sap;
    let zeros = vec![Complex64::new(0.0, 0.0); taps];
    let crlb_nominal = fim_terms(channels, &sol.w, noise_sap)
        .iter()
        .map(|t| crlb_of(t.matrix(beta1, &zeros)))
        .fold(0.0, f64::max);
    let crlb_worst_case = theta_sets(channels, &sol.w, noise_sap, beta1)
        .iter()
        .map(|t| worst_case_crlb(eps, t))
        .fold(0.0, f64::max);
    Evaluation {
        nominal_rate,
        worst_case_rate,
        adversarial_rate,
        adversarial_phase,
        crlb_nominal,
        crlb_worst_case,
        power_feasible: sol.power_feasible(cfg.power.max_power_w),
        layout_feasible: sol.layout.is_feasible(),
        sensing_feasible: crlb_worst_case <= cfg.sensing.crlb_threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fp::mrt_beamformers;

    #[test]
    fn rates_are_ordered() {
        let cfg = SystemConfig::default();
        for seed in 0..10 {
            let sc = cfg.scenario(seed).unwrap();
            let layout = cfg.spread_layout().unwrap();
            let ch = sc.channels(&layout).unwrap();
            let sol = Solution::new(mrt_beamformers(&ch, 1.0), layout);
            let e = evaluate(&cfg, &ch, &sol, 0.15);
            assert!(e.worst_case_rate <= e.adversarial_rate + 1e-9);
            assert!(e.crlb_nominal <= e.crlb_worst_case * (1.0 + 1e-9));
            assert!(e.power_feasible && e.layout_feasible);
            let zero = evaluate(&cfg, &ch, &sol, 0.0);
            assert!((zero.adversarial_rate - zero.nominal_rate).abs() <= 1e-9 * zero.nominal_rate);
        }
    }
}
