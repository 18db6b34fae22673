//! Plants three patches in a shuffled 100x100 matrix, fits the model on 90%
//! of the cells and scores the held-out 10%.
//!
//! cargo run --release --example fit_link_prediction -- [seed]

use spp::io::{auc, make_split};
use spp::mcmc::run_chain;
use spp::relmodel::{predict, RelationalState};
use spp::verify::{planted_data, SyntheticConfig};

fn main() -> spp::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let cfg = SyntheticConfig::default();
    let synth = planted_data(&cfg, seed)?;
    let split = make_split(&synth.data, cfg.holdout, seed)?;
    println!("{} links, {} held-out cells", synth.data.count_ones(), split.test.len());

    let mut chain = cfg.chain.clone();
    chain.seed = seed;
    let state = RelationalState::new(synth.data.clone(), split.train_mask.clone(), chain.hp.tau, chain.hp.gamma)?;
    let out = run_chain(state, &chain, |_, row| {
        if row.iter % 100 == 0 {
            println!(
                "iter {:4}  loglik {:10.2}  K {:2}  mtm rows {:.3}  cols {:.3}",
                row.iter, row.loglik_train, row.k, row.accept_mtm_row, row.accept_mtm_col
            );
        }
        Ok(())
    })?;
    let samples: Vec<_> = out.samples.into_iter().map(|(_, s)| s).collect();
    let fitted = auc(&predict(&samples, &split.test)?, &split.labels)?;
    let planted = auc(&predict(std::slice::from_ref(&synth.truth), &split.test)?, &split.labels)?;
    println!("held-out AUC {fitted:.4} from {} samples (planted model {planted:.4})", samples.len());
    Ok(())
}
