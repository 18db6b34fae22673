//! Generates a relational matrix from the prior, shows how the latent
//! permutations hide the patches, and round-trips the truth through JSON.
//!
//! cargo run --release --example relational_synthetic -- [out_dir]

use std::path::PathBuf;

use spp::io::persist::{model_from_json, model_to_json};
use spp::io::{render_partition, EdgeList, RenderMode, SavedModel};
use spp::prior::HyperParams;
use spp::relmodel::{generate_synthetic, BinaryMatrix};
use spp::rng::seeded;
use spp::{ArrayShape, Partition, Patch, Rect};

fn density_picture(path: &std::path::Path, m: &BinaryMatrix) -> spp::Result<()> {
    // one patch per one-cell, so the PGM renderer can draw the raw matrix
    let shape = ArrayShape::new(vec![m.rows(), m.cols()])?;
    let mut patches = Vec::new();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if m.get(i, j) {
                patches.push(Patch::new(Rect::new(&shape, vec![i + 1, j + 1], vec![1, 1])?, 1.0)?);
            }
        }
    }
    let tau = patches.len().max(1) as f64;
    render_partition(&Partition::new(shape, tau, patches)?, path, RenderMode::Rate)
}

fn main() -> spp::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let shape = ArrayShape::new(vec![120, 120])?;
    let hp = HyperParams::new(1.0, 0.97, 1e-3, 0.5)?;
    let s = generate_synthetic(&shape, &hp, false, &mut seeded(21))?;
    println!("{} patches, {} links, density {:.4}", s.truth.partition.len(), s.data.count_ones(), s.data.density());

    // undo the permutations to see the patches
    let mut latent = BinaryMatrix::zeros(120, 120);
    for i in 0..120 {
        for j in 0..120 {
            latent.set(i, j, s.data.get(s.truth.row_perm[i], s.truth.col_perm[j]));
        }
    }
    density_picture(&out.join("synthetic_observed.pgm"), &s.data)?;
    density_picture(&out.join("synthetic_latent.pgm"), &latent)?;
    render_partition(&s.truth.partition, out.join("synthetic_truth.pgm"), RenderMode::Rate)?;

    let model = SavedModel {
        partition: s.truth.partition.clone(),
        theta: hp.theta,
        gamma: hp.gamma,
        perms: Some((s.truth.row_perm.clone(), s.truth.col_perm.clone())),
    };
    let text = model_to_json(&model)?;
    assert_eq!(model_from_json(&text)?, model);
    println!("truth round-trips through {} bytes of JSON", text.len());

    let edges = EdgeList::from_matrix(&s.data);
    println!("edge list: {} nodes, {} edges", edges.len(), edges.edges.len());
    println!("pictures written to {}", out.display());
    Ok(())
}
