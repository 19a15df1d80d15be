//! Forward pass: typed input projections, multi-head edge-aware attention
//! layers, and the beamforming and position decoders.

use num_complex::Complex;

use maisac_core::comm::{project_power, Solution};
use maisac_core::config::SystemConfig;
use maisac_core::geometry::{repair_positions, MaLayout, Scenario};
use maisac_core::numerics::{cscale, Mat, Real};

use crate::graph::HetGraph;
use crate::params::{Architecture, LayerParams, Linear};
use crate::Result;

const LAYER_NORM_EPS: f64 = 1e-5;
/// Keeps normalisations finite when a vector is all zeros.
const NORM_FLOOR: f64 = 1e-30;
/// Diagonal loading of the zero-forcing Gram matrix relative to its mean
/// eigenvalue.
const ZF_RIDGE: f64 = 1e-3;

/// Softmax of `scores`, shifted by the largest score for stability.
pub fn attention_weights<S: Real>(scores: &[S]) -> Vec<S> {
    let top = scores.iter().map(|s| s.value()).fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<S> = scores.iter().map(|&s| (s - S::from_f64(top)).exp()).collect();
    let total = S::sum(&e);
    e.into_iter().map(|x| x / total).collect()
}

/// Zero-mean, unit-variance normalisation without learned scale or shift.
pub fn layer_norm<S: Real>(x: &[S]) -> Vec<S> {
    let n = S::from_f64(x.len() as f64);
    let mean = S::sum(x) / n;
    let centred: Vec<S> = x.iter().map(|&v| v - mean).collect();
    let var = S::dot(&centred, &centred) / n;
    let inv = S::one() / (var + S::from_f64(LAYER_NORM_EPS)).sqrt();
    centred.into_iter().map(|v| v * inv).collect()
}

fn add<S: Real>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

fn mlp<S: Real>(maps: &[Linear; 2], p: &[S], x: &[S]) -> Vec<S> {
    let h: Vec<S> = maps[0].apply(p, x).into_iter().map(Real::tanh).collect();
    maps[1].apply(p, &h)
}

pub fn embed<S: Real>(graph: &HetGraph, arch: &Architecture, p: &[S]) -> Vec<Vec<S>> {
    graph
        .kinds
        .iter()
        .zip(&graph.features)
        .map(|(kind, f)| {
            let x: Vec<S> = f.iter().map(|&v| S::from_f64(v)).collect();
            arch.input[kind.type_index()].apply(p, &x)
        })
        .collect()
}

/// One attention layer followed by the position-wise feed-forward block,
/// each with a residual connection and normalisation.
pub fn attention_layer<S: Real>(
    graph: &HetGraph,
    hidden: &[Vec<S>],
    layer: &LayerParams,
    p: &[S],
    heads: usize,
) -> Vec<Vec<S>> {
    let d = hidden.first().map_or(0, Vec::len);
    let dk = d / heads;
    let scale = S::from_f64(1.0 / (dk as f64).sqrt());
    let q: Vec<Vec<S>> = hidden.iter().map(|h| layer.query.apply(p, h)).collect();
    let k: Vec<Vec<S>> = hidden.iter().map(|h| layer.key.apply(p, h)).collect();
    let v: Vec<Vec<S>> = hidden.iter().map(|h| layer.value.apply(p, h)).collect();
    hidden
        .iter()
        .enumerate()
        .map(|(node, h)| {
            let inc = &graph.incoming[node];
            let mut message = vec![S::zero(); d];
            if !inc.is_empty() {
                let keys: Vec<Vec<S>> = inc
                    .iter()
                    .map(|&e| {
                        let edge = &graph.edges[e];
                        let o: Vec<S> = edge.features.iter().map(|&x| S::from_f64(x)).collect();
                        add(&k[edge.src], &layer.edge.apply(p, &o))
                    })
                    .collect();
                for head in 0..heads {
                    let span = head * dk..(head + 1) * dk;
                    let scores: Vec<S> = keys
                        .iter()
                        .map(|key| S::dot(&q[node][span.clone()], &key[span.clone()]) * scale)
                        .collect();
                    let alpha = attention_weights(&scores);
                    for (j, i) in span.enumerate() {
                        let vals: Vec<S> = inc.iter().map(|&e| v[graph.edges[e].src][i]).collect();
                        message[head * dk + j] = S::dot(&alpha, &vals);
                    }
                }
            }
            let mixed = layer_norm(&add(h, &layer.output.apply(p, &message)));
            let inner: Vec<S> = layer.ffn_in.apply(p, &mixed).into_iter().map(Real::relu).collect();
            layer_norm(&add(&mixed, &layer.ffn_out.apply(p, &inner)))
        })
        .collect()
}

pub fn encode<S: Real>(graph: &HetGraph, arch: &Architecture, p: &[S]) -> Vec<Vec<S>> {
    let heads = arch.spec.heads;
    arch.layers
        .iter()
        .fold(embed(graph, arch, p), |h, layer| attention_layer(graph, &h, layer, p, heads))
}

/// Decoder outputs before projection.
#[derive(Debug, Clone)]
pub struct PolicyOutput<S> {
    /// `w_hat[a]` is `N_T x K`.
    pub w_hat: Vec<Mat<S>>,
    pub tx_hat: Vec<Vec<S>>,
    pub rx_hat: Vec<Vec<S>>,
}

fn mean_pool<S: Real>(rows: &[&Vec<S>]) -> Vec<S> {
    let n = S::from_f64(rows.len() as f64);
    (0..rows[0].len())
        .map(|i| S::sum(&rows.iter().map(|r| r[i]).collect::<Vec<_>>()) / n)
        .collect()
}

/// Inverse of a small Hermitian positive-definite matrix by Gauss-Jordan
/// elimination without pivoting.
fn hpd_inverse<S: Real>(m: &Mat<S>) -> Mat<S> {
    let n = m.rows();
    let mut a = m.clone();
    let mut inv = Mat::identity(n);
    for c in 0..n {
        let pivot = Complex::new(S::one(), S::zero()) / a[(c, c)];
        for j in 0..n {
            a[(c, j)] = a[(c, j)] * pivot;
            inv[(c, j)] = inv[(c, j)] * pivot;
        }
        for r in (0..n).filter(|&r| r != c) {
            let f = a[(r, c)];
            for j in 0..n {
                a[(r, j)] = a[(r, j)] - f * a[(c, j)];
                inv[(r, j)] = inv[(r, j)] - f * inv[(c, j)];
            }
        }
    }
    inv
}

fn unit_columns<S: Real>(m: &Mat<S>) -> Mat<S> {
    let norms: Vec<S> = (0..m.cols())
        .map(|k| {
            let col = m.column(k);
            let n2 = S::sum(&col.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>());
            S::one() / (n2 + S::from_f64(NORM_FLOOR)).sqrt()
        })
        .collect();
    Mat::from_fn(m.rows(), m.cols(), |i, k| cscale(m[(i, k)], norms[k]))
}

/// Unit-column matched-filter and regularised zero-forcing directions for
/// the `N_T x K` channel matrix `h` of one tAP.
pub fn beam_bases<S: Real>(h: &Mat<S>) -> (Mat<S>, Mat<S>) {
    let gram = h.adjoint().matmul(h).expect("gram of a matrix with itself");
    let k = gram.rows();
    let ridge = gram.trace().re.scale(ZF_RIDGE / k.max(1) as f64) + S::from_f64(NORM_FLOOR);
    let loaded = gram.add(&Mat::identity(k).scale(Complex::new(ridge, S::zero())));
    let zf = h.matmul(&hpd_inverse(&loaded)).expect("shapes agree");
    (unit_columns(h), unit_columns(&zf))
}

/// Mean-pooled position decoders, `base + half_width * tanh(out)` per array.
fn decode_positions<S: Real>(
    hidden: &[Vec<S>],
    maps: &[Linear; 2],
    p: &[S],
    nodes: &[Vec<usize>],
    base: &[Vec<f64>],
    half: f64,
) -> Vec<Vec<S>> {
    nodes
        .iter()
        .zip(base)
        .map(|(ids, b)| {
            let rows: Vec<&Vec<S>> = ids.iter().map(|&v| &hidden[v]).collect();
            let out = mlp(maps, p, &mean_pool(&rows));
            out.into_iter()
                .zip(b)
                .map(|(o, &x0)| S::from_f64(x0) + o.tanh().scale(half))
                .collect()
        })
        .collect()
}

/// Position, power and pairwise (antenna, UE) beam decoders.
///
/// Positions come first. After repair, the comm channel of each tAP is
/// evaluated there and split into matched-filter and zero-forcing
/// directions; entry `(m, k)` of the beam is `c1 * mrt[m, k] + c2 * zf[m, k]`
/// with complex weights read from the antenna and UE states. Each tAP's beam
/// is rescaled to power `P_t * sigmoid(s_a)`, so the output meets the budget
/// and its power level stays trainable.
pub fn decode<S: Real>(
    graph: &HetGraph,
    hidden: &[Vec<S>],
    arch: &Architecture,
    p: &[S],
    cfg: &SystemConfig,
    scenario: &Scenario,
    base: &MaLayout,
) -> Result<PolicyOutput<S>> {
    let shape = graph.shape;
    let tx_nodes: Vec<Vec<usize>> = (0..shape.taps)
        .map(|a| (0..shape.tx_antennas).map(|m| shape.tx_node(a, m)).collect())
        .collect();
    let rx_nodes: Vec<Vec<usize>> = (0..shape.saps)
        .map(|b| (0..shape.rx_antennas).map(|n| shape.rx_node(b, n)).collect())
        .collect();
    let tx_hat = decode_positions(hidden, &arch.tx_position, p, &tx_nodes, &base.tx, 0.5 * base.tx_bounds.width());
    let rx_hat = decode_positions(hidden, &arch.rx_position, p, &rx_nodes, &base.rx, 0.5 * base.rx_bounds.width());
    let mut w_hat = Vec::with_capacity(shape.taps);
    for (a, ids) in tx_nodes.iter().enumerate() {
        let tx = repair_positions(&tx_hat[a], base.tx_bounds, base.min_spacing)?;
        let links = scenario.comm[a]
            .iter()
            .map(|l| l.channel(&tx))
            .collect::<maisac_core::Result<Vec<_>>>()?;
        let h = Mat::from_fn(shape.tx_antennas, shape.users, |m, k| links[k][m]);
        let (mrt, zf) = beam_bases(&h);
        let mut entries = Vec::with_capacity(shape.tx_antennas * shape.users);
        for (m, &ant) in ids.iter().enumerate() {
            for k in 0..shape.users {
                let mut pair = hidden[ant].clone();
                pair.extend_from_slice(&hidden[shape.user_node(k)]);
                let c = mlp(&arch.beam, p, &pair);
                entries.push(Complex::new(c[0], c[1]) * mrt[(m, k)] + Complex::new(c[2], c[3]) * zf[(m, k)]);
            }
        }
        let ants: Vec<&Vec<S>> = ids.iter().map(|&v| &hidden[v]).collect();
        let s = mlp(&arch.power, p, &mean_pool(&ants))[0];
        let fraction = (s.scale(0.5).tanh() + S::one()).scale(0.5);
        let norm2 = S::sum(&entries.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>());
        let gain = (fraction.scale(cfg.power.max_power_w) / (norm2 + S::from_f64(NORM_FLOOR))).sqrt();
        let entries = entries.into_iter().map(|z| cscale(z, gain)).collect();
        w_hat.push(Mat::from_vec(shape.tx_antennas, shape.users, entries)?);
    }
    Ok(PolicyOutput { w_hat, tx_hat, rx_hat })
}

/// Feasible decision after radial power scaling and position repair.
#[derive(Debug, Clone)]
pub struct Projected<S> {
    pub w: Vec<Mat<S>>,
    pub tx: Vec<Vec<S>>,
    pub rx: Vec<Vec<S>>,
}

impl Projected<f64> {
    pub fn to_solution(&self, base: &MaLayout) -> Solution {
        let layout = MaLayout {
            tx: self.tx.clone(),
            rx: self.rx.clone(),
            ..base.clone()
        };
        Solution::new(self.w.clone(), layout)
    }
}

pub fn project<S: Real>(out: &PolicyOutput<S>, base: &MaLayout, p_max: f64) -> Result<Projected<S>> {
    let fix = |arrays: &[Vec<S>], bounds| {
        arrays
            .iter()
            .map(|x| repair_positions(x, bounds, base.min_spacing))
            .collect::<maisac_core::Result<Vec<_>>>()
    };
    Ok(Projected {
        w: out.w_hat.iter().map(|w| project_power(w, p_max)).collect(),
        tx: fix(&out.tx_hat, base.tx_bounds)?,
        rx: fix(&out.rx_hat, base.rx_bounds)?,
    })
}

pub fn policy<S: Real>(
    graph: &HetGraph,
    arch: &Architecture,
    p: &[S],
    cfg: &SystemConfig,
    scenario: &Scenario,
    base: &MaLayout,
) -> Result<PolicyOutput<S>> {
    let hidden = encode(graph, arch, p);
    decode(graph, &hidden, arch, p, cfg, scenario, base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::params::{ModelSpec, Params};
    use maisac_core::numerics::CMatrix;
    use num_complex::Complex64;

    fn setup() -> (SystemConfig, Scenario, HetGraph, MaLayout) {
        let cfg = SystemConfig::default();
        let sc = cfg.scenario(2).unwrap();
        let layout = cfg.spread_layout().unwrap();
        let ch = sc.channels(&layout).unwrap();
        let g = build_graph(&cfg, &sc, &ch, &layout, 0.15).unwrap();
        (cfg, sc, g, layout)
    }

    #[test]
    fn attention_examples() {
        assert_eq!(attention_weights(&[3.7]), vec![1.0]);
        assert_eq!(attention_weights(&[0.4, 0.4]), vec![0.5, 0.5]);
        let a = attention_weights(&[1.0, 0.0]);
        assert!((a[0] - 0.7311).abs() < 5e-5 && (a[1] - 0.2689).abs() < 5e-5);
    }

    #[test]
    fn layer_norm_is_standardised() {
        let y = layer_norm(&[1.0, 2.0, 4.0, 7.0]);
        let mean: f64 = y.iter().sum::<f64>() / 4.0;
        let var: f64 = y.iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-4);
    }

    #[test]
    fn zero_network_decodes_to_zero_beams_and_base_positions() {
        let (cfg, sc, g, base) = setup();
        let p = Params::zeros(ModelSpec::from_config(&cfg));
        let hidden = vec![vec![0.0; cfg.gnn.hidden]; g.nodes()];
        let out = decode(&g, &hidden, &p.arch, &p.values, &cfg, &sc, &base).unwrap();
        assert!(out.w_hat.iter().all(|w| w.frob_norm() == 0.0));
        assert_eq!(out.tx_hat, base.tx);
        assert_eq!(out.rx_hat, base.rx);
    }

    #[test]
    fn zero_forcing_basis_nulls_other_users() {
        let h = CMatrix::from_fn(4, 2, |m, k| Complex64::from_polar(1e-3 * (1.0 + m as f64), 0.7 * (m * (k + 1)) as f64));
        let (mrt, zf) = beam_bases(&h);
        for k in 0..2 {
            let mrt_norm: f64 = mrt.column(k).iter().map(|z| z.norm_sqr()).sum();
            assert!((mrt_norm - 1.0).abs() < 1e-12);
            let own = maisac_core::numerics::inner(&h.column(k), &zf.column(k)).norm();
            let leak = maisac_core::numerics::inner(&h.column(1 - k), &zf.column(k)).norm();
            assert!(leak < 1e-2 * own, "leak {leak} vs {own}");
        }
    }

    #[test]
    fn beam_shape_is_antennas_by_users() {
        let (cfg, sc, g, base) = setup();
        let p = Params::init(ModelSpec::from_config(&cfg), 1);
        let out = policy(&g, &p.arch, &p.values, &cfg, &sc, &base).unwrap();
        assert_eq!(out.w_hat.len(), 2);
        assert!(out.w_hat.iter().all(|w| w.shape() == (4, 2)));
    }

    #[test]
    fn isolated_node_keeps_its_state_up_to_normalisation() {
        let (cfg, _, mut g, _) = setup();
        let p = Params::init(ModelSpec::from_config(&cfg), 4);
        let victim = 0;
        for inc in g.incoming.iter_mut() {
            inc.retain(|&e| g.edges[e].src != victim);
        }
        g.incoming[victim].clear();
        let h = embed(&g, &p.arch, &p.values);
        let layer = &p.arch.layers[0];
        let next = attention_layer(&g, &h, layer, &p.values, cfg.gnn.heads);
        let mixed = layer_norm(&h[victim]);
        let inner: Vec<f64> = layer.ffn_in.apply(&p.values, &mixed).into_iter().map(f64::relu).collect();
        let want = layer_norm(&add(&mixed, &layer.ffn_out.apply(&p.values, &inner)));
        for (a, b) in next[victim].iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_weights_sum_to_one_on_every_neighbourhood() {
        let (cfg, _, g, _) = setup();
        let p = Params::init(ModelSpec::from_config(&cfg), 5);
        let h = embed(&g, &p.arch, &p.values);
        let layer = &p.arch.layers[0];
        let dk = cfg.gnn.hidden / cfg.gnn.heads;
        for (node, inc) in g.incoming.iter().enumerate() {
            let q = layer.query.apply(&p.values, &h[node]);
            for head in 0..cfg.gnn.heads {
                let span = head * dk..(head + 1) * dk;
                let scores: Vec<f64> = inc
                    .iter()
                    .map(|&e| {
                        let edge = &g.edges[e];
                        let key = add(&layer.key.apply(&p.values, &h[edge.src]), &layer.edge.apply(&p.values, &edge.features));
                        f64::dot(&q[span.clone()], &key[span.clone()])
                    })
                    .collect();
                let total: f64 = attention_weights(&scores).iter().sum();
                assert!((total - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn projection_scales_and_is_idempotent() {
        let (_, _, _, base) = setup();
        let w = CMatrix::from_fn(4, 2, |i, j| Complex64::new(1.0 + i as f64, j as f64));
        let norm2 = w.frob_norm_sqr();
        let out = PolicyOutput {
            w_hat: vec![w.scale(Complex64::new((4.0 / norm2).sqrt(), 0.0)); 2],
            tx_hat: vec![vec![-3.0, 0.0, 0.1, 0.2]; 2],
            rx_hat: vec![vec![0.0, 0.1]; 2],
        };
        let once = project(&out, &base, 1.0).unwrap();
        assert!((once.w[0].frob_norm_sqr() - 1.0).abs() < 1e-12);
        assert!(once.w[0].approx_eq(&out.w_hat[0].scale(Complex64::new(0.5, 0.0)), 1e-12));
        assert_eq!(once.rx[0], vec![0.0, 0.5]);
        let again = project(
            &PolicyOutput {
                w_hat: once.w.clone(),
                tx_hat: once.tx.clone(),
                rx_hat: once.rx.clone(),
            },
            &base,
            1.0,
        )
        .unwrap();
        assert_eq!(again.tx, once.tx);
        assert_eq!(again.rx, once.rx);
        for (a, b) in again.w.iter().zip(&once.w) {
            assert!(a.approx_eq(b, 1e-15));
        }
        once.to_solution(&base).layout.validate().unwrap();
    }
}
