//! Flat parameter storage, its block layout and the text checkpoint.
//!
//! Checkpoint layout, one item per line:
//!
//! ```text
//! maisac-gnn checkpoint 1
//! spec <key>=<value> ...
//! block <name> <rows> <cols>
//! <rows * cols values, row-major, space separated>
//! ...
//! ```
//!
//! Values use Rust's shortest round-trip formatting, so a save/load cycle is
//! exact.

use std::fmt::Write as _;

use rand::Rng;

use maisac_core::config::SystemConfig;
use maisac_core::numerics::{rng, Real};

use crate::graph::{GraphShape, EDGE_FEATURES, USER_FEATURES};
use crate::{GnnError, Result};

const MAGIC: &str = "maisac-gnn checkpoint 1";
/// RNG stream for parameter initialisation.
const INIT_STREAM: u64 = 41;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub hidden: usize,
    pub heads: usize,
    pub layers: usize,
    pub ffn: usize,
    pub decoder: usize,
    pub tx_features: usize,
    pub rx_features: usize,
    pub user_features: usize,
    pub edge_features: usize,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
}

impl ModelSpec {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        let shape = GraphShape::from_config(cfg);
        let g = &cfg.gnn;
        Self {
            hidden: g.hidden,
            heads: g.heads,
            layers: g.layers,
            ffn: g.ffn,
            decoder: g.hidden,
            tx_features: shape.tx_features(),
            rx_features: shape.rx_features(),
            user_features: USER_FEATURES,
            edge_features: EDGE_FEATURES,
            tx_antennas: shape.tx_antennas,
            rx_antennas: shape.rx_antennas,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }

    fn fields(&self) -> [(&'static str, usize); 11] {
        [
            ("hidden", self.hidden),
            ("heads", self.heads),
            ("layers", self.layers),
            ("ffn", self.ffn),
            ("decoder", self.decoder),
            ("tx_features", self.tx_features),
            ("rx_features", self.rx_features),
            ("user_features", self.user_features),
            ("edge_features", self.edge_features),
            ("tx_antennas", self.tx_antennas),
            ("rx_antennas", self.rx_antennas),
        ]
    }
}

/// Affine map `y = W x + b` stored at fixed offsets in the flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub rows: usize,
    pub cols: usize,
    pub weight: usize,
    pub bias: Option<usize>,
}

impl Linear {
    pub fn apply<S: Real>(&self, p: &[S], x: &[S]) -> Vec<S> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                let row = &p[self.weight + r * self.cols..self.weight + (r + 1) * self.cols];
                let y = S::dot(row, x);
                match self.bias {
                    Some(b) => y + p[b + r],
                    None => y,
                }
            })
            .collect()
    }
}

/// Per-layer attention and feed-forward maps. Heads are stacked along the
/// output rows of `query`, `key`, `value` and `edge`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerParams {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub edge: Linear,
    pub output: Linear,
    pub ffn_in: Linear,
    pub ffn_out: Linear,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub spec: ModelSpec,
    /// Input projections indexed by [`crate::graph::NodeKind::type_index`].
    pub input: [Linear; 3],
    pub layers: Vec<LayerParams>,
    pub beam: [Linear; 2],
    /// Per-tAP transmit power fraction, read from the pooled antenna states.
    pub power: [Linear; 2],
    pub tx_position: [Linear; 2],
    pub rx_position: [Linear; 2],
    pub blocks: Vec<Block>,
    pub len: usize,
}

struct Builder {
    blocks: Vec<Block>,
    len: usize,
}

impl Builder {
    fn block(&mut self, name: String, rows: usize, cols: usize) -> usize {
        let offset = self.len;
        self.blocks.push(Block { name, rows, cols, offset });
        self.len += rows * cols;
        offset
    }

    fn linear(&mut self, name: &str, rows: usize, cols: usize, bias: bool) -> Linear {
        let weight = self.block(format!("{name}.w"), rows, cols);
        let bias = bias.then(|| self.block(format!("{name}.b"), rows, 1));
        Linear { rows, cols, weight, bias }
    }
}

impl Architecture {
    pub fn new(spec: ModelSpec) -> Self {
        let mut b = Builder { blocks: Vec::new(), len: 0 };
        let d = spec.hidden;
        let input = [
            b.linear("in.tx", d, spec.tx_features, true),
            b.linear("in.rx", d, spec.rx_features, true),
            b.linear("in.ue", d, spec.user_features, true),
        ];
        let layers = (0..spec.layers)
            .map(|l| LayerParams {
                query: b.linear(&format!("l{l}.q"), d, d, false),
                key: b.linear(&format!("l{l}.k"), d, d, false),
                value: b.linear(&format!("l{l}.v"), d, d, false),
                edge: b.linear(&format!("l{l}.e"), d, spec.edge_features, false),
                output: b.linear(&format!("l{l}.o"), d, d, false),
                ffn_in: b.linear(&format!("l{l}.ffn1"), spec.ffn, d, true),
                ffn_out: b.linear(&format!("l{l}.ffn2"), d, spec.ffn, true),
            })
            .collect();
        let beam = [
            b.linear("beam.1", spec.decoder, 2 * d, true),
            b.linear("beam.2", 4, spec.decoder, true),
        ];
        let power = [
            b.linear("pow.1", spec.decoder, d, true),
            b.linear("pow.2", 1, spec.decoder, true),
        ];
        let tx_position = [
            b.linear("pos.tx.1", spec.decoder, d, true),
            b.linear("pos.tx.2", spec.tx_antennas, spec.decoder, true),
        ];
        let rx_position = [
            b.linear("pos.rx.1", spec.decoder, d, true),
            b.linear("pos.rx.2", spec.rx_antennas, spec.decoder, true),
        ];
        Self {
            spec,
            input,
            layers,
            beam,
            power,
            tx_position,
            rx_position,
            blocks: b.blocks,
            len: b.len,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub arch: Architecture,
    pub values: Vec<f64>,
}

impl Params {
    /// Glorot-uniform weights and zero biases.
    pub fn init(spec: ModelSpec, seed: u64) -> Self {
        let arch = Architecture::new(spec);
        let mut r = rng(seed, INIT_STREAM);
        let mut values = vec![0.0; arch.len];
        for blk in arch.blocks.iter().filter(|b| b.cols > 1) {
            let limit = (6.0 / (blk.rows + blk.cols) as f64).sqrt();
            for v in &mut values[blk.offset..blk.offset + blk.rows * blk.cols] {
                *v = r.gen_range(-limit..limit);
            }
        }
        Self { arch, values }
    }

    pub fn zeros(spec: ModelSpec) -> Self {
        let arch = Architecture::new(spec);
        let values = vec![0.0; arch.len];
        Self { arch, values }
    }

    pub fn spec(&self) -> ModelSpec {
        self.arch.spec
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.arch
            .blocks
            .iter()
            .find(|b| b.name == name)
            .map(|b| &self.values[b.offset..b.offset + b.rows * b.cols])
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC}\nspec");
        for (k, v) in self.spec().fields() {
            let _ = write!(out, " {k}={v}");
        }
        out.push('\n');
        for b in &self.arch.blocks {
            let _ = writeln!(out, "block {} {} {}", b.name, b.rows, b.cols);
            let vals: Vec<String> = self.values[b.offset..b.offset + b.rows * b.cols]
                .iter()
                .map(|v| v.to_string())
                .collect();
            out.push_str(&vals.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| GnnError::Checkpoint(format!("line {line}: {msg}"));
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l.trim() == MAGIC => {}
            _ => return Err(bad(1, "missing checkpoint header")),
        }
        let (n, spec_line) = lines.next().ok_or_else(|| bad(2, "missing spec line"))?;
        let mut spec = ModelSpec {
            hidden: 0,
            heads: 0,
            layers: 0,
            ffn: 0,
            decoder: 0,
            tx_features: 0,
            rx_features: 0,
            user_features: 0,
            edge_features: 0,
            tx_antennas: 0,
            rx_antennas: 0,
        };
        let mut tokens = spec_line.split_whitespace();
        if tokens.next() != Some("spec") {
            return Err(bad(n, "expected `spec`"));
        }
        for tok in tokens {
            let (k, v) = tok.split_once('=').ok_or_else(|| bad(n, "expected key=value"))?;
            let v: usize = v.parse().map_err(|_| bad(n, &format!("bad value for {k}")))?;
            let slot = match k {
                "hidden" => &mut spec.hidden,
                "heads" => &mut spec.heads,
                "layers" => &mut spec.layers,
                "ffn" => &mut spec.ffn,
                "decoder" => &mut spec.decoder,
                "tx_features" => &mut spec.tx_features,
                "rx_features" => &mut spec.rx_features,
                "user_features" => &mut spec.user_features,
                "edge_features" => &mut spec.edge_features,
                "tx_antennas" => &mut spec.tx_antennas,
                "rx_antennas" => &mut spec.rx_antennas,
                _ => return Err(bad(n, &format!("unknown spec key {k}"))),
            };
            *slot = v;
        }
        if spec.heads == 0 || spec.hidden % spec.heads != 0 {
            return Err(bad(n, "heads must divide hidden"));
        }
        let mut params = Self::zeros(spec);
        for blk in params.arch.blocks.clone() {
            let (n, head) = lines.next().ok_or_else(|| bad(0, &format!("missing block {}", blk.name)))?;
            let want = format!("block {} {} {}", blk.name, blk.rows, blk.cols);
            if head.trim() != want {
                return Err(bad(n, &format!("expected `{want}`")));
            }
            let (n, body) = lines.next().ok_or_else(|| bad(n + 1, "missing values"))?;
            let vals = body
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad(n, "unparsable value"))?;
            if vals.len() != blk.rows * blk.cols {
                return Err(bad(n, &format!("expected {} values", blk.rows * blk.cols)));
            }
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(bad(n, "non-finite value"));
            }
            params.values[blk.offset..blk.offset + vals.len()].copy_from_slice(&vals);
        }
        if let Some((n, _)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(bad(n, "trailing content"));
        }
        Ok(params)
    }
}
