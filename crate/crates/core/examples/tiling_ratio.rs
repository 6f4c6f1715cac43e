//! How much of a query specification a set of exemplar specifications tiles.
//!
//!     cargo run --example tiling_ratio

use cad_icl::components::{ComponentSet, Granularities};
use cad_icl::selection::{marginal_gain, tiling_ratio};

fn main() -> cad_icl::Result<()> {
    let grains = Granularities::new(vec![2, 4, 8])?;
    let query = "A rectangular plate 60 mm long and 40 mm wide with a central through hole of diameter 10 mm.";
    let specs = [
        "A rectangular plate 50 mm long and 30 mm wide.",
        "A cylinder with a central through hole of diameter 8 mm.",
        "A hex nut with an M6 thread.",
    ];
    let q = ComponentSet::from_spec(query, &grains);
    let db: Vec<ComponentSet> = specs.iter().map(|s| ComponentSet::from_spec(s, &grains)).collect();

    println!("query weight w(C_q) = {}", q.weighted_size());
    for (n, grams) in q.iter() {
        println!("  n={n}: {} distinct windows", grams.len());
    }
    for (i, s) in specs.iter().enumerate() {
        println!("alone  #{i}: ratio {:.3}  {s}", tiling_ratio(&[i], &db, &q)?);
    }
    // #0 and #1 cover disjoint windows, so #1 keeps its full gain
    println!("gain of #1 on empty set:  {}", marginal_gain(&[], 1, &db, &q)?);
    println!("gain of #1 after #0:      {}", marginal_gain(&[0], 1, &db, &q)?);
    println!("ratio of {{#0, #1}}:        {:.3}", tiling_ratio(&[0, 1], &db, &q)?);
    Ok(())
}
