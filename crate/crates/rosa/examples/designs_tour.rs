//! Quick tour of the bundled trial designs.
//!
//! For each design, prints the parameter space and operating-characteristic
//! schema, then Monte Carlo estimates at the center of the space and at the
//! two corners, with standard errors. Useful as a smoke test of the
//! simulators and as a map of what each design's OC surface looks like.

use rosa::designs::{
    AuxInterimConfig, AuxInterimDesign, EnrichmentConfig, EnrichmentDesign, TrialDesign,
    TwoArmRctConfig, TwoArmRctDesign,
};
use rosa::mc::estimate_ocs;
use rosa::model::Scenario;

fn tour(design: &dyn TrialDesign, reps: u32) -> rosa::Result<()> {
    let space = design.parameter_space();
    let schema = design.oc_schema();
    println!("\n=== {} ===", design.name());
    for i in 0..space.dim() {
        println!("  {:>6}: [{}, {}]", space.dim_names()[i], space.lower()[i], space.upper()[i]);
    }

    let mid = Scenario::new(
        (0..space.dim()).map(|i| 0.5 * (space.lower()[i] + space.upper()[i])).collect(),
    );
    let lo = Scenario::new(space.lower().to_vec());
    let hi = Scenario::new(space.upper().to_vec());
    let set = estimate_ocs(design, &[lo, mid, hi], reps, 3)?;

    print!("  {:>8}", "point");
    for name in &schema.names {
        print!(" {name:>16}");
    }
    println!();
    for (row, label) in ["lower", "center", "upper"].iter().enumerate() {
        print!("  {label:>8}");
        for oc in 0..schema.r() {
            print!(
                " {:>9.3}±{:<6.3}",
                set.oc_means[row].values[oc], set.mc_se[row][oc]
            );
        }
        println!();
    }
    Ok(())
}

fn main() -> rosa::Result<()> {
    tour(&TwoArmRctDesign::new(TwoArmRctConfig::default())?, 2000)?;
    tour(&AuxInterimDesign::new(AuxInterimConfig::default())?, 2000)?;
    tour(&EnrichmentDesign::new(EnrichmentConfig::default())?, 400)?;
    Ok(())
}
