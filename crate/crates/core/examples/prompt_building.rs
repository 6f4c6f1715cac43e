//! Assemble a few-shot prompt and pull code back out of model replies.
//!
//!     cargo run --example prompt_building

use std::path::Path;

use cad_icl::baselines::{Selector, Strategy};
use cad_icl::components::Granularities;
use cad_icl::corpus::Corpus;
use cad_icl::prompting::{build_prompt, extract_code};

fn main() -> cad_icl::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini/corpus");
    let corpus = Corpus::load_dir(&dir)?;
    let selector = Selector::new(&corpus, Granularities::default())?;
    let query = "A rectangular plate 40 mm long, 20 mm wide and 3 mm thick.";
    let selection = selector.select(Strategy::Dst, query, 2, 0)?;
    let prompt = build_prompt(&selection, &corpus, query)?;
    for m in prompt.messages() {
        println!("--- {} ---\n{}", m.role, m.content);
    }

    let replies = [
        "Here you go:\n```python\nimport cadquery as cq\nresult = cq.Workplane(\"XY\").box(40, 20, 3)\n```",
        "Draft:\n```python\nresult = 1\n```\nFinal:\n```python\nimport cadquery as cq\nresult = cq.Workplane().box(40, 20, 3)\n```",
        "I cannot help with that.",
    ];
    for r in replies {
        let e = extract_code(r);
        println!("{:?}: {:?}", e.status, e.code);
    }
    Ok(())
}
