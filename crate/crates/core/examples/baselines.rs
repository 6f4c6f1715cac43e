//! Every selection strategy on the same query.
//!
//!     cargo run --example baselines

use std::path::Path;

use cad_icl::baselines::{Selector, Strategy};
use cad_icl::components::Granularities;
use cad_icl::corpus::Corpus;

fn main() -> cad_icl::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini/corpus");
    let corpus = Corpus::load_dir(&dir)?;
    let selector = Selector::new(&corpus, Granularities::default())?;
    let query = "A solid cylinder with a diameter of 24 mm and a height of 30 mm.";
    println!("query: {query}");
    for strategy in Strategy::ALL {
        let picked = selector.select(strategy, query, 3, 7)?;
        let ids: Vec<&str> = picked.chosen.iter().map(|&i| corpus.exemplars()[i].id.as_str()).collect();
        println!("{strategy:>9}: ratio {:.3} {ids:?}", picked.tiling_ratio);
    }
    Ok(())
}
