//! System configuration and per-seed scenario drawing.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::comm::LinkBudget;
use crate::error::{Error, Result};
use crate::geometry::{
    angle_to, check_spacing, path_loss, CommLink, CommPath, Geometry, Interval, MaLayout, Point,
    Scenario, SensingLink, SPEED_OF_LIGHT,
};
use crate::numerics::{complex_normal, rng};
use crate::pa::PaParams;

/// RNG stream reserved for scenario geometry and multipath.
const SCENARIO_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub network: NetworkConfig,
    pub geometry: GeometryConfig,
    pub arrays: ArrayConfig,
    pub channel: ChannelConfig,
    pub power: PowerConfig,
    pub sensing: SensingConfig,
    pub amplifier: AmplifierConfig,
    pub optimizer: OptimizerConfig,
    pub gnn: GnnConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub taps: usize,
    pub saps: usize,
    pub users: usize,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Radius of the ring carrying every AP and UE, meters.
    pub ring_radius_m: f64,
    pub target_m: [f64; 2],
    pub carrier_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    /// Minimum element spacing in wavelengths.
    pub min_spacing: f64,
    pub tx_bounds: [f64; 2],
    pub rx_bounds: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub comm_exponent: f64,
    pub sensing_exponent: f64,
    pub paths: usize,
    pub rcs: f64,
    /// Spread of extra delay on scattered paths, seconds.
    pub delay_spread_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConfig {
    /// Per-tAP transmit budget in watts.
    pub max_power_w: f64,
    pub noise_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingConfig {
    /// Upper limit on the CRLB trace, square meters.
    pub crlb_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplifierConfig {
    pub beta1: f64,
    /// Radius of the third-order coefficient uncertainty disk.
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub iterations: usize,
    pub inner_steps: usize,
    /// Initial beamformer step as a fraction of `sqrt(P_t)`.
    pub step: f64,
    /// Initial position step in wavelengths.
    pub position_step: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnnConfig {
    pub hidden: usize,
    pub heads: usize,
    pub layers: usize,
    pub ffn: usize,
    pub penalty: f64,
    pub learning_rate: f64,
    pub steps: usize,
    pub batch: usize,
    /// Training scenarios drawn per run.
    pub samples: usize,
    /// Epochs without improvement before training stops.
    pub patience: usize,
}

impl Default for SystemConfig {
    /// Desk-scale version of the reference deployment.
    fn default() -> Self {
        Self {
            network: NetworkConfig {
                taps: 2,
                saps: 2,
                users: 2,
                tx_antennas: 4,
                rx_antennas: 2,
            },
            geometry: GeometryConfig {
                ring_radius_m: 50.0,
                target_m: [0.0, 0.0],
                carrier_hz: 3.5e9,
            },
            arrays: ArrayConfig {
                min_spacing: 0.5,
                tx_bounds: [-2.0, 2.0],
                rx_bounds: [-2.0, 2.0],
            },
            channel: ChannelConfig {
                comm_exponent: 2.8,
                sensing_exponent: 2.2,
                paths: 3,
                rcs: 3.0,
                delay_spread_s: 1e-7,
            },
            power: PowerConfig {
                max_power_w: 1.0,
                noise_dbm: -120.0,
            },
            sensing: SensingConfig {
                crlb_threshold: 0.05,
            },
            amplifier: AmplifierConfig {
                beta1: 1.0,
                epsilon: 0.15,
            },
            optimizer: OptimizerConfig {
                iterations: 30,
                inner_steps: 5,
                step: 0.1,
                position_step: 0.05,
                tolerance: 1e-5,
            },
            gnn: GnnConfig {
                hidden: 32,
                heads: 4,
                layers: 4,
                ffn: 64,
                penalty: 10.0,
                learning_rate: 0.01,
                steps: 200,
                batch: 8,
                samples: 32,
                patience: 10,
            },
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(
            field,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let n = &self.network;
        for (field, v) in [
            ("network.taps", n.taps),
            ("network.saps", n.saps),
            ("network.users", n.users),
            ("network.tx_antennas", n.tx_antennas),
            ("network.rx_antennas", n.rx_antennas),
            ("channel.paths", self.channel.paths),
        ] {
            if v == 0 {
                return Err(invalid(field, "must be at least 1"));
            }
        }
        positive("geometry.ring_radius_m", self.geometry.ring_radius_m)?;
        positive("geometry.carrier_hz", self.geometry.carrier_hz)?;
        positive("arrays.min_spacing", self.arrays.min_spacing)?;
        positive("channel.rcs", self.channel.rcs)?;
        positive("channel.comm_exponent", self.channel.comm_exponent)?;
        positive("channel.sensing_exponent", self.channel.sensing_exponent)?;
        positive("power.max_power_w", self.power.max_power_w)?;
        positive("sensing.crlb_threshold", self.sensing.crlb_threshold)?;
        positive("amplifier.beta1", self.amplifier.beta1)?;
        if !self.power.noise_dbm.is_finite() {
            return Err(invalid("power.noise_dbm", "must be finite"));
        }
        if !(self.channel.delay_spread_s >= 0.0) {
            return Err(invalid("channel.delay_spread_s", "must be non-negative"));
        }
        if !(0.0..=0.5).contains(&self.amplifier.epsilon) {
            return Err(invalid("amplifier.epsilon", "must lie in [0, 0.5]"));
        }
        for (field, b) in [
            ("arrays.tx_bounds", self.arrays.tx_bounds),
            ("arrays.rx_bounds", self.arrays.rx_bounds),
        ] {
            if !(b[0] < b[1]) {
                return Err(invalid(
                    field,
                    format!("lower bound {} must be below {}", b[0], b[1]),
                ));
            }
        }
        check_spacing(n.tx_antennas, self.tx_bounds(), self.arrays.min_spacing)?;
        check_spacing(n.rx_antennas, self.rx_bounds(), self.arrays.min_spacing)?;
        let o = &self.optimizer;
        positive("optimizer.step", o.step)?;
        positive("optimizer.position_step", o.position_step)?;
        positive("optimizer.tolerance", o.tolerance)?;
        let g = &self.gnn;
        if g.heads == 0 || g.hidden % g.heads != 0 {
            return Err(invalid("gnn.heads", "must divide gnn.hidden"));
        }
        for (field, v) in [
            ("gnn.layers", g.layers),
            ("gnn.ffn", g.ffn),
            ("gnn.batch", g.batch),
            ("gnn.samples", g.samples),
        ] {
            if v == 0 {
                return Err(invalid(field, "must be at least 1"));
            }
        }
        positive("gnn.learning_rate", g.learning_rate)?;
        if !(g.penalty >= 0.0) {
            return Err(invalid("gnn.penalty", "must be non-negative"));
        }
        Ok(())
    }

    pub fn tx_bounds(&self) -> Interval {
        Interval {
            lo: self.arrays.tx_bounds[0],
            hi: self.arrays.tx_bounds[1],
        }
    }

    pub fn rx_bounds(&self) -> Interval {
        Interval {
            lo: self.arrays.rx_bounds[0],
            hi: self.arrays.rx_bounds[1],
        }
    }

    pub fn noise_w(&self) -> f64 {
        10f64.powf((self.power.noise_dbm - 30.0) / 10.0)
    }

    pub fn budget(&self) -> LinkBudget {
        let n = self.noise_w();
        LinkBudget {
            noise_ue: n,
            noise_sap: n,
        }
    }

    /// Coefficients seen by an optimizer that trusts only the linear model.
    pub fn nominal_pa(&self) -> PaParams {
        PaParams {
            beta1: self.amplifier.beta1,
            ..PaParams::linear(self.network.taps)
        }
    }

    pub fn spread_layout(&self) -> Result<MaLayout> {
        let n = &self.network;
        MaLayout::spread(
            n.taps,
            n.tx_antennas,
            n.saps,
            n.rx_antennas,
            self.tx_bounds(),
            self.rx_bounds(),
            self.arrays.min_spacing,
        )
    }

    pub fn half_wavelength_layout(&self) -> Result<MaLayout> {
        let n = &self.network;
        MaLayout::half_wavelength(
            n.taps,
            n.tx_antennas,
            n.saps,
            n.rx_antennas,
            self.tx_bounds(),
            self.rx_bounds(),
            self.arrays.min_spacing,
        )
    }

    /// Nodes evenly spaced on the ring with a random rotation and random
    /// role assignment; multipath drawn around the line-of-sight direction.
    pub fn scenario(&self, seed: u64) -> Result<Scenario> {
        self.validate()?;
        let n = &self.network;
        let mut r = rng(seed, SCENARIO_STREAM);
        let count = n.taps + n.saps + n.users;
        let offset = r.gen_range(0.0..2.0 * PI);
        let mut slots: Vec<usize> = (0..count).collect();
        slots.shuffle(&mut r);
        let radius = self.geometry.ring_radius_m;
        let target = Point::new(self.geometry.target_m[0], self.geometry.target_m[1]);
        let point = |slot: usize| {
            let t = offset + 2.0 * PI * slot as f64 / count as f64;
            Point::new(radius * t.cos(), radius * t.sin())
        };
        let mut it = slots.into_iter().map(point);
        let geometry = Geometry {
            target,
            taps: it.by_ref().take(n.taps).collect(),
            saps: it.by_ref().take(n.saps).collect(),
            ues: it.collect(),
        };
        let ch = &self.channel;
        let carrier = self.geometry.carrier_hz;
        let mut comm = Vec::with_capacity(n.taps);
        for &tap in &geometry.taps {
            let mut links = Vec::with_capacity(n.users);
            for &ue in &geometry.ues {
                let d = tap.distance(ue);
                let los = angle_to(ue, tap)?;
                let paths = (0..ch.paths)
                    .map(|l| {
                        let gain = complex_normal(&mut r, 1.0 / ch.paths as f64);
                        if l == 0 {
                            CommPath {
                                gain,
                                delay: d / SPEED_OF_LIGHT,
                                aod: los,
                            }
                        } else {
                            CommPath {
                                gain,
                                delay: d / SPEED_OF_LIGHT + r.gen_range(0.0..=ch.delay_spread_s),
                                aod: los + r.gen_range(-PI / 3.0..PI / 3.0),
                            }
                        }
                    })
                    .collect();
                links.push(CommLink {
                    paths,
                    path_gain: path_loss(d, ch.comm_exponent)?,
                    carrier_hz: carrier,
                });
            }
            comm.push(links);
        }
        let sensing = (0..n.taps)
            .map(|a| {
                (0..n.saps)
                    .map(|b| {
                        SensingLink::new(&geometry, a, b, ch.rcs, ch.sensing_exponent, carrier)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Scenario {
            geometry,
            comm,
            sensing,
        })
    }
}
