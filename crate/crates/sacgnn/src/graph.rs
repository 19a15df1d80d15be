//! Heterogeneous graph over tAP antennas, sAP antennas and UEs.

use num_complex::Complex64;

use maisac_core::config::SystemConfig;
use maisac_core::geometry::{ChannelSet, Interval, MaLayout, Point, Scenario};

use crate::{GnnError, Result};

/// Width of every edge feature vector.
pub const EDGE_FEATURES: usize = 4;
/// Width of a UE feature vector.
pub const USER_FEATURES: usize = 5;

/// Floor applied to powers before taking logarithms.
const POWER_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    TxAntenna { tap: usize, element: usize },
    RxAntenna { sap: usize, element: usize },
    User(usize),
}

impl NodeKind {
    /// Index of the input projection used by this node type.
    pub fn type_index(self) -> usize {
        match self {
            Self::TxAntenna { .. } => 0,
            Self::RxAntenna { .. } => 1,
            Self::User(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Comm,
    Sensing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
    pub features: [f64; EDGE_FEATURES],
}

/// Array sizes fixing the node numbering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphShape {
    pub taps: usize,
    pub tx_antennas: usize,
    pub saps: usize,
    pub rx_antennas: usize,
    pub users: usize,
}

impl GraphShape {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        let n = &cfg.network;
        Self {
            taps: n.taps,
            tx_antennas: n.tx_antennas,
            saps: n.saps,
            rx_antennas: n.rx_antennas,
            users: n.users,
        }
    }

    pub fn nodes(&self) -> usize {
        self.taps * self.tx_antennas + self.saps * self.rx_antennas + self.users
    }

    pub fn tx_node(&self, tap: usize, element: usize) -> usize {
        tap * self.tx_antennas + element
    }

    pub fn rx_node(&self, sap: usize, element: usize) -> usize {
        self.taps * self.tx_antennas + sap * self.rx_antennas + element
    }

    pub fn user_node(&self, k: usize) -> usize {
        self.taps * self.tx_antennas + self.saps * self.rx_antennas + k
    }

    pub fn tx_features(&self) -> usize {
        self.tx_antennas + 4
    }

    pub fn rx_features(&self) -> usize {
        self.rx_antennas + 2
    }

    fn kinds(&self) -> Vec<NodeKind> {
        let tx = (0..self.taps)
            .flat_map(|tap| (0..self.tx_antennas).map(move |element| NodeKind::TxAntenna { tap, element }));
        let rx = (0..self.saps)
            .flat_map(|sap| (0..self.rx_antennas).map(move |element| NodeKind::RxAntenna { sap, element }));
        tx.chain(rx).chain((0..self.users).map(NodeKind::User)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct HetGraph {
    pub shape: GraphShape,
    pub kinds: Vec<NodeKind>,
    pub features: Vec<Vec<f64>>,
    pub edges: Vec<Edge>,
    /// `incoming[v]` lists the edges ending at `v`.
    pub incoming: Vec<Vec<usize>>,
}

impl HetGraph {
    pub fn new(
        shape: GraphShape,
        features: Vec<Vec<f64>>,
        edges: Vec<Edge>,
    ) -> Result<Self> {
        let kinds = shape.kinds();
        if features.len() != kinds.len() {
            return Err(GnnError::Graph(format!(
                "{} feature vectors for {} nodes",
                features.len(),
                kinds.len()
            )));
        }
        let mut incoming = vec![Vec::new(); kinds.len()];
        for (i, e) in edges.iter().enumerate() {
            if e.src >= kinds.len() || e.dst >= kinds.len() {
                return Err(GnnError::Graph(format!("edge {i} has a missing endpoint")));
            }
            if e.features.iter().any(|x| !x.is_finite()) {
                return Err(GnnError::Graph(format!("edge {i} has non-finite features")));
            }
            incoming[e.dst].push(i);
        }
        if let Some(v) = features.iter().position(|f| f.iter().any(|x| !x.is_finite())) {
            return Err(GnnError::Graph(format!("node {v} has non-finite features")));
        }
        Ok(Self {
            shape,
            kinds,
            features,
            edges,
            incoming,
        })
    }

    pub fn nodes(&self) -> usize {
        self.kinds.len()
    }

    pub fn count_edges(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count() / 2
    }
}

fn fit(mut v: Vec<f64>, len: usize) -> Vec<f64> {
    v.resize(len, 0.0);
    v
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (mean, xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n)
}

/// Phase over pi of the largest-magnitude coefficient.
fn strongest_phase(hs: &[Complex64]) -> f64 {
    hs.iter()
        .copied()
        .fold(None::<Complex64>, |best, h| match best {
            Some(b) if b.norm_sqr() >= h.norm_sqr() => Some(b),
            _ => Some(h),
        })
        .map_or(0.0, |h| h.arg() / std::f64::consts::PI)
}

fn normalised_position(x: f64, bounds: Interval) -> f64 {
    (x - bounds.center()) / (0.5 * bounds.width())
}

/// Graph for `channels`, evaluated at `layout`, with `design_eps` as the
/// distortion bound fed to the tAP nodes.
pub fn build_graph(
    cfg: &SystemConfig,
    scenario: &Scenario,
    channels: &ChannelSet,
    layout: &MaLayout,
    design_eps: f64,
) -> Result<HetGraph> {
    let shape = GraphShape::from_config(cfg);
    let geo = &scenario.geometry;
    let radius = cfg.geometry.ring_radius_m;
    let noise = cfg.noise_w();
    let p_t = cfg.power.max_power_w;
    // received SNR in dB over 100 keeps magnitudes near unity
    let snr = |h: Complex64| 0.1 * (h.norm_sqr() * p_t / noise).max(POWER_FLOOR).log10();
    let (t, b_count, k_count) = (shape.taps, shape.saps, shape.users);
    let (n_t, n_r) = (shape.tx_antennas, shape.rx_antennas);

    let mut edges = Vec::new();
    let mut both = |src: usize, dst: usize, kind: EdgeKind, features: [f64; EDGE_FEATURES]| {
        edges.push(Edge { src, dst, kind, features });
        edges.push(Edge { src: dst, dst: src, kind, features });
    };
    for a in 0..t {
        for m in 0..n_t {
            for k in 0..k_count {
                let h = channels.comm[a][k][m];
                let d = geo.taps[a].distance(geo.ues[k]) / radius;
                let f = [snr(h), h.arg().cos(), h.arg().sin(), d];
                both(shape.tx_node(a, m), shape.user_node(k), EdgeKind::Comm, f);
            }
            for b in 0..b_count {
                let bistatic = (geo.taps[a].distance(geo.target) + geo.target.distance(geo.saps[b])) / (2.0 * radius);
                for n in 0..n_r {
                    let h = channels.sensing[a][b].as_slice()[n * n_t + m];
                    let f = [snr(h), h.arg().cos(), h.arg().sin(), bistatic];
                    both(shape.tx_node(a, m), shape.rx_node(b, n), EdgeKind::Sensing, f);
                }
            }
        }
    }

    let mut features = Vec::with_capacity(shape.nodes());
    for a in 0..t {
        let path_db: Vec<f64> = scenario.comm[a]
            .iter()
            .map(|l| 0.01 * 10.0 * l.path_gain.max(POWER_FLOOR).log10())
            .collect();
        let (path_mean, _) = mean_var(&path_db);
        for m in 0..n_t {
            let hs: Vec<Complex64> = (0..k_count).map(|k| channels.comm[a][k][m]).collect();
            let (mean, var) = mean_var(&hs.iter().map(|&h| snr(h)).collect::<Vec<_>>());
            let stats = fit(vec![mean, var, strongest_phase(&hs), path_mean], n_t + 1);
            let mut f = vec![
                normalised_position(layout.tx[a][m], layout.tx_bounds),
                design_eps,
                p_t,
            ];
            f.extend(stats);
            features.push(f);
        }
    }
    for b in 0..b_count {
        for n in 0..n_r {
            let hs: Vec<Complex64> = (0..t)
                .flat_map(|a| (0..n_t).map(move |m| (a, m)))
                .map(|(a, m)| channels.sensing[a][b].as_slice()[n * n_t + m])
                .collect();
            let (mean, var) = mean_var(&hs.iter().map(|&h| snr(h)).collect::<Vec<_>>());
            let mut f = vec![
                normalised_position(layout.rx[b][n], layout.rx_bounds),
                cfg.sensing.crlb_threshold,
            ];
            f.extend(fit(vec![mean, var], n_r));
            features.push(f);
        }
    }
    for k in 0..k_count {
        let hs: Vec<Complex64> = (0..t).flat_map(|a| channels.comm[a][k].iter().copied()).collect();
        let (mean, var) = mean_var(&hs.iter().map(|&h| snr(h)).collect::<Vec<_>>());
        let Point { x, y } = geo.ues[k];
        features.push(vec![
            y.atan2(x) / std::f64::consts::PI,
            0.01 * cfg.power.noise_dbm,
            mean,
            var,
            strongest_phase(&hs),
        ]);
    }

    HetGraph::new(shape, features, edges)
}
