//! Restricting a draw on a larger array to a sub-array gives the law of a
//! direct draw on the sub-array. Shows the exact identities, then the
//! Monte-Carlo comparison and the negative control that must fail.
//!
//! cargo run --release --example self_consistency

use spp::prior::HyperParams;
use spp::projection::{self, project_partition, McConfig, SubArraySpec};
use spp::rng::seeded;
use spp::ArrayShape;

fn main() -> spp::Result<()> {
    let exact = projection::exact_suite()?;
    println!("construction max TV      {:.2e}", exact.construction_max_tv);
    println!("intensity max rel. gap   {:.2e} over {} cases", exact.intensity.max_relative_diff, exact.intensity.cases.len());
    println!("position law max TV      {:.2e} over {} cases", exact.position_max_tv, exact.positions.len());
    println!("exact suite passed       {}", exact.passed);

    let outer = ArrayShape::new(vec![6, 6])?;
    let spec = SubArraySpec::leading(outer.clone(), vec![5, 5])?;
    let hp = HyperParams::new(2.0, 0.5, 1.0, 0.5)?;

    let draw = spp::prior::sample_partition_candidate(&outer, &hp, &mut seeded(1));
    let projected = project_partition(&draw, &spec)?;
    println!("\none draw: {} patches on 6x6, {} survive on 5x5", draw.len(), projected.len());

    let mut cfg = McConfig::new(20_000, 4);
    let good = projection::check_self_consistency_mc(&spec, &hp, &cfg)?;
    println!("\nmean count projected {:.4} vs direct {:.4}", good.mean_count_projected, good.mean_count_direct);
    println!("count test p = {:.3}", good.count_test.p_value);
    for (d, t) in good.position_exact_tests.iter().enumerate() {
        println!("dimension {d} (s, l) vs exact pmf p = {:.3}", t.p_value);
    }
    println!("total cost KS p = {:.3}", good.cost_sum_test.p_value);
    println!("passed {}", good.passed);

    cfg.keep_empty_projections = true;
    let control = projection::check_self_consistency_mc(&spec, &hp, &cfg)?;
    println!("\nnegative control (empty projections kept): count p = {:.2e}, passed {}", control.count_test.p_value, control.passed);
    Ok(())
}
