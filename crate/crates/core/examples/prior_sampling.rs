//! Draws partitions from the prior with both constructions, compares their
//! patch counts with the expected value and renders one draw as a PGM.
//!
//! cargo run --release --example prior_sampling -- [out_dir]

use std::path::PathBuf;

use spp::io::{render_partition, RenderMode};
use spp::prior::{self, HyperParams};
use spp::rng::stream;
use spp::ArrayShape;

fn main() -> spp::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let shape = ArrayShape::new(vec![200, 300])?;
    let hp = HyperParams::new(0.2, 0.95, 1e-2, 0.5)?;

    let draws = 2_000;
    let expected = prior::expected_count(&shape, hp.tau, hp.theta);
    let mut direct = 0usize;
    let mut candidate = 0usize;
    let mut rng_d = stream(11, 0);
    let mut rng_c = stream(11, 1);
    for _ in 0..draws {
        direct += prior::sample_partition_direct(&shape, &hp, &mut rng_d).len();
        candidate += prior::sample_partition_candidate(&shape, &hp, &mut rng_c).len();
    }
    println!("expected patches      {expected:.3}");
    println!("direct construction   {:.3}", direct as f64 / draws as f64);
    println!("candidate (thinned)   {:.3}", candidate as f64 / draws as f64);

    let v = prior::expected_total_volume(&shape, &hp);
    println!(
        "covered volume: tau*S_X = {} and E(K)*prod E(l) = {:.6}",
        v.budget_volume, v.from_components
    );
    for (d, n) in shape.dims().iter().enumerate() {
        println!("dimension {d}: E(l) = {:.4} of {n}", v.expected_lengths[d]);
    }

    let part = prior::sample_partition_direct(&shape, &hp, &mut stream(11, 2));
    let rate = out.join("prior_rate.pgm");
    let outline = out.join("prior_outline.pgm");
    render_partition(&part, &rate, RenderMode::Rate)?;
    render_partition(&part, &outline, RenderMode::Outline)?;
    println!("{} patches rendered to {} and {}", part.len(), rate.display(), outline.display());
    Ok(())
}
