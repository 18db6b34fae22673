//! The file-based workflow: edge list in, samples and predictions out,
//! scored against held-out labels. The same steps as `spp synth`, `spp fit`,
//! `spp predict` and `spp eval`.
//!
//! cargo run --release --example edge_list_pipeline -- [out_dir]

use std::path::PathBuf;

use spp::io::persist::{parse_pairs, NodeResolver};
use spp::io::{auc, ingest, load_samples, make_split, save_samples, EdgeList, PosteriorSamples};
use spp::mcmc::{run_chain, ChainConfig, SmcConfig};
use spp::prior::HyperParams;
use spp::relmodel::{predict, RelationalState};
use spp::verify::{planted_data, SyntheticConfig};

fn main() -> spp::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let edges_path = out.join("pipeline_edges.tsv");

    let mut planted = SyntheticConfig {
        size: 60,
        planted: vec![([1, 1], [20, 25]), ([25, 30], [25, 20])],
        ..SyntheticConfig::default()
    };
    planted.chain.hp.tau = 0.5;
    let synth = planted_data(&planted, 4)?;
    std::fs::write(&edges_path, EdgeList::from_matrix(&synth.data).to_tsv()).map_err(|e| spp::SppError::Io {
        path: edges_path.clone(),
        source: e,
    })?;

    let data = ingest(&edges_path, None)?;
    println!("ingested {} nodes, {} links", data.nodes.len(), data.matrix.count_ones());
    let split = make_split(&data.matrix, 0.1, 4)?;

    let cfg = ChainConfig {
        iterations: 300,
        hp: HyperParams::new(0.5, 0.95, planted.chain.hp.gamma, 0.5)?,
        smc: SmcConfig {
            stages: Some(30),
            ..SmcConfig::default()
        },
        seed: 4,
        record_wallclock: false,
        ..ChainConfig::default()
    };
    let state = RelationalState::new(data.matrix.clone(), split.train_mask.clone(), cfg.hp.tau, cfg.hp.gamma)?;
    let fitted = run_chain(state, &cfg, |_, _| Ok(()))?;
    let samples_path = out.join("pipeline_samples.json");
    save_samples(
        &samples_path,
        &PosteriorSamples {
            hp: cfg.hp,
            shape: fitted.final_state.shape().clone(),
            nodes: Some(data.nodes.clone()),
            samples: fitted.samples,
        },
    )?;

    // reload and resolve held-out pairs by node name, as `spp predict` does
    let loaded = load_samples(&samples_path)?;
    let nodes = NodeResolver::new(loaded.nodes.clone(), loaded.shape.len(0));
    let pairs_text: String = split
        .test
        .iter()
        .map(|&(r, c)| format!("{}\t{}\n", nodes.name(r), nodes.name(c)))
        .collect();
    let pairs = parse_pairs(&pairs_text, &nodes)?;
    let scores = predict(&loaded.snapshots(), &pairs)?;
    println!(
        "{} samples saved to {}; held-out AUC {:.4}",
        loaded.samples.len(),
        samples_path.display(),
        auc(&scores, &split.labels)?
    );
    Ok(())
}
