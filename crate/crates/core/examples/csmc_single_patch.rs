//! One planted patch, one patch in the model, only the conditional SMC move.
//! The chain's box frequencies are compared with the posterior enumerated
//! over every box.
//!
//! cargo run --release --example csmc_single_patch

use spp::verify::{csmc_posterior, CsmcPosteriorConfig};

fn main() -> spp::Result<()> {
    for inside in [0.8, 0.1] {
        let cfg = CsmcPosteriorConfig {
            inside,
            ..CsmcPosteriorConfig::default()
        };
        let o = csmc_posterior(&cfg)?;
        println!("link probability {inside} inside the planted box: {}", o.detail);
    }
    Ok(())
}
