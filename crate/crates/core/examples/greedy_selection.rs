//! Greedy exemplar selection against the exhaustive optimum.
//!
//!     cargo run --release --example greedy_selection

use std::path::Path;

use cad_icl::components::{ComponentSet, Granularities};
use cad_icl::corpus::Corpus;
use cad_icl::selection::{brute_force_with, greedy_bound, greedy_with, GreedyOptions, TilingObjective, DEFAULT_ORACLE_BUDGET};

fn main() -> cad_icl::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini/corpus");
    let corpus = Corpus::load_dir(&dir)?;
    let grains = Granularities::default();
    let db: Vec<ComponentSet> = corpus.exemplars().iter().map(|e| ComponentSet::from_spec(&e.spec, &grains)).collect();
    let query = "A rectangular plate 70 mm long, 45 mm wide and 6 mm thick with a central through hole of diameter 12 mm.";
    let objective = TilingObjective::new(&db, &ComponentSet::from_spec(query, &grains))?;

    for k in 1..=4 {
        let greedy = greedy_with(&objective, k, &GreedyOptions::default())?;
        let lazy = greedy_with(&objective, k, &GreedyOptions { lazy: true, ..Default::default() })?;
        assert_eq!(greedy, lazy);
        let best = brute_force_with(&objective, k, DEFAULT_ORACLE_BUDGET)?;
        println!(
            "k={k}: greedy {:?} gains {:?} ratio {:.3} | optimum ratio {:.3} | guarantee {:.1}%",
            greedy.chosen,
            greedy.gains,
            greedy.tiling_ratio,
            best.tiling_ratio,
            100.0 * greedy_bound(k)
        );
    }
    let top = greedy_with(&objective, 3, &GreedyOptions::default())?;
    for i in top.chosen {
        println!("  {}: {}", corpus.exemplars()[i].id, corpus.exemplars()[i].spec);
    }
    Ok(())
}
