use maisac_core::config::SystemConfig;
use maisac_core::fp::Mode;
use maisac_gnn::params::{ModelSpec, Params};
use maisac_gnn::train::{evaluate, gradient, Sample};

/// One tAP with two elements, one sAP with two elements and two UEs.
fn toy_config() -> SystemConfig {
    let mut cfg = SystemConfig::default();
    cfg.network.taps = 1;
    cfg.network.saps = 1;
    cfg.network.users = 2;
    cfg.network.tx_antennas = 2;
    cfg.network.rx_antennas = 2;
    cfg.gnn.hidden = 8;
    cfg.gnn.heads = 2;
    cfg.gnn.layers = 2;
    cfg.gnn.ffn = 16;
    cfg
}

fn check_every_block(mode: Mode, seed: u64) {
    let cfg = toy_config();
    let sample = Sample::new(&cfg, cfg.scenario(seed).unwrap(), mode).unwrap();
    assert_eq!(sample.graph.nodes(), 6);
    let params = Params::init(ModelSpec::from_config(&cfg), seed);
    let (_, grad) = gradient(&cfg, &params, &sample, mode).unwrap();
    let loss_at = |values: &[f64]| {
        let p = Params {
            arch: params.arch.clone(),
            values: values.to_vec(),
        };
        evaluate(&cfg, &p, &sample, mode).unwrap().total
    };
    let mut checked = 0;
    for block in &params.arch.blocks {
        let len = block.rows * block.cols;
        let picks = [0, len / 3, (2 * len) / 3, len - 1];
        for &i in picks.iter().take(len.min(4)) {
            let at = block.offset + i;
            let h = 1e-6 * params.values[at].abs().max(1.0);
            let mut plus = params.values.clone();
            let mut minus = params.values.clone();
            plus[at] += h;
            minus[at] -= h;
            let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            let err = (grad[at] - fd).abs() / grad[at].abs().max(fd.abs()).max(1e-6);
            assert!(
                err < 1e-3,
                "{} [{i}]: analytic {} vs central difference {fd}",
                block.name,
                grad[at]
            );
            checked += 1;
        }
    }
    assert!(checked > 4 * params.arch.blocks.len() / 2);
}

#[test]
fn robust_loss_gradient_matches_central_differences() {
    check_every_block(Mode::Robust, 1);
}

#[test]
fn nominal_loss_gradient_matches_central_differences() {
    check_every_block(Mode::NonRobust, 2);
}
