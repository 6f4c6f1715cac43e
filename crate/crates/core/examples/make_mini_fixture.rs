//! Regenerate the frozen 12-query corpus under `tests/fixtures/mini`.
//!
//! Parts come from a few parametric families; each has a spec, a
//! CadQuery-style script and an exact solid. A scripted chat backend plays
//! the model while the cassette is recorded, and the run results it would
//! trigger are written to a result store. The golden report is the replay
//! of that cassette.
//!
//!     cargo run --release --example make_mini_fixture [OUT_DIR]

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cad_icl::baselines::Strategy;
use cad_icl::corpus::{partition_tiers, score_corpus, split_test_set, Corpus, Exemplar, OpsCounter};
use cad_icl::gateway::{BackendError, Cassette, ChatBackend, Gateway, GatewayConfig, GatewayMode};
use cad_icl::geometry::rotation::{apply, rotations24};
use cad_icl::geometry::shapes::{Primitive, Sampling, Solid};
use cad_icl::geometry::{GeometryArtifact, VoxelSpec};
use cad_icl::harness::{sweep_csv, Execution, Experiment, ExperimentConfig};
use cad_icl::prompting::ChatMessage;
use cad_icl::runner::{FailureClass, ResultStore, RunResult};

const SAMPLING: Sampling = Sampling {
    surface_points: 1200,
    edge_points: 200,
    resolution: 16,
    seed: 0,
};

struct Part {
    spec: String,
    code: String,
    solid: Solid,
}

fn cuboid(center: [f64; 3], size: [f64; 3]) -> Primitive {
    Primitive::Cuboid { center, size }
}

fn cylinder(center: [f64; 3], radius: f64, height: f64) -> Primitive {
    Primitive::Cylinder { center, radius, height }
}

fn part(family: usize, rng: &mut ChaCha8Rng) -> Part {
    let mut d = |lo: u32, hi: u32| f64::from(rng.random_range(lo..=hi));
    match family {
        0 => {
            let (l, w, t) = (d(20, 80), d(10, 40), d(2, 8));
            Part {
                spec: format!("A rectangular plate {l} mm long, {w} mm wide and {t} mm thick."),
                code: format!("import cadquery as cq\nresult = cq.Workplane(\"XY\").box({l}, {w}, {t})"),
                solid: Solid::single(cuboid([0.0; 3], [l, w, t])),
            }
        }
        1 => {
            let (dia, h) = (d(10, 40), d(10, 60));
            Part {
                spec: format!("A solid cylinder with a diameter of {dia} mm and a height of {h} mm."),
                code: format!("import cadquery as cq\nresult = cq.Workplane(\"XY\").circle({}).extrude({h})", dia / 2.0),
                solid: Solid::single(cylinder([0.0, 0.0, h / 2.0], dia / 2.0, h)),
            }
        }
        2 => {
            let (l, w, t, hole) = (d(40, 80), d(30, 60), d(4, 10), d(6, 20));
            Part {
                spec: format!(
                    "A rectangular plate {l} mm long, {w} mm wide and {t} mm thick with a central through hole of diameter {hole} mm."
                ),
                code: format!(
                    "import cadquery as cq\nresult = (\n    cq.Workplane(\"XY\")\n    .box({l}, {w}, {t})\n    .faces(\">Z\")\n    .workplane()\n    .hole({hole})\n)"
                ),
                solid: Solid {
                    add: vec![cuboid([0.0; 3], [l, w, t])],
                    subtract: vec![cylinder([0.0; 3], hole / 2.0, t * 2.0)],
                },
            }
        }
        3 => {
            let (outer, wall, len) = (d(20, 50), d(2, 6), d(20, 80));
            let inner = outer - 2.0 * wall;
            Part {
                spec: format!(
                    "A hollow tube with an outer diameter of {outer} mm, an inner diameter of {inner} mm and a length of {len} mm."
                ),
                code: format!(
                    "import cadquery as cq\nresult = (\n    cq.Workplane(\"XY\")\n    .circle({})\n    .circle({})\n    .extrude({len})\n)",
                    outer / 2.0,
                    inner / 2.0
                ),
                solid: Solid {
                    add: vec![cylinder([0.0, 0.0, len / 2.0], outer / 2.0, len)],
                    subtract: vec![cylinder([0.0, 0.0, len / 2.0], inner / 2.0, len * 2.0)],
                },
            }
        }
        4 => {
            let (l, w, t, h) = (d(30, 60), d(15, 30), d(3, 8), d(20, 50));
            Part {
                spec: format!(
                    "An L-shaped bracket made of a base plate {l} mm long, {w} mm wide and {t} mm thick, with a vertical plate {h} mm tall and {t} mm thick rising from one end of the base plate."
                ),
                code: format!(
                    "import cadquery as cq\nbase = cq.Workplane(\"XY\").box({l}, {w}, {t})\nwall = (\n    cq.Workplane(\"XY\")\n    .box({t}, {w}, {h})\n    .translate(({}, 0, {}))\n)\nresult = base.union(wall)",
                    (l - t) / 2.0,
                    (h - t) / 2.0
                ),
                solid: Solid {
                    add: vec![
                        cuboid([0.0; 3], [l, w, t]),
                        cuboid([(l - t) / 2.0, 0.0, (h - t) / 2.0], [t, w, h]),
                    ],
                    subtract: vec![],
                },
            }
        }
        5 => {
            let (d1, h1, d2, h2) = (d(30, 50), d(10, 30), d(10, 25), d(20, 50));
            Part {
                spec: format!(
                    "A stepped shaft with a lower cylinder of diameter {d1} mm and height {h1} mm, and an upper cylinder of diameter {d2} mm and height {h2} mm on top of the lower cylinder."
                ),
                code: format!(
                    "import cadquery as cq\nresult = (\n    cq.Workplane(\"XY\")\n    .circle({})\n    .extrude({h1})\n    .faces(\">Z\")\n    .workplane()\n    .circle({})\n    .extrude({h2})\n)",
                    d1 / 2.0,
                    d2 / 2.0
                ),
                solid: Solid {
                    add: vec![
                        cylinder([0.0, 0.0, h1 / 2.0], d1 / 2.0, h1),
                        cylinder([0.0, 0.0, h1 + h2 / 2.0], d2 / 2.0, h2),
                    ],
                    subtract: vec![],
                },
            }
        }
        _ => {
            let (l, w, t, boss, bh, hole) = (d(40, 80), d(40, 80), d(6, 12), d(16, 30), d(10, 30), d(4, 10));
            Part {
                spec: format!(
                    "A rectangular base plate {l} mm long, {w} mm wide and {t} mm thick with a cylindrical boss of diameter {boss} mm and height {bh} mm at its center, and a through hole of diameter {hole} mm cut through the boss and the plate."
                ),
                code: format!(
                    "import cadquery as cq\nresult = (\n    cq.Workplane(\"XY\")\n    .box({l}, {w}, {t})\n    .faces(\">Z\")\n    .workplane()\n    .circle({})\n    .extrude({bh})\n    .faces(\">Z\")\n    .workplane()\n    .hole({hole})\n)",
                    boss / 2.0
                ),
                solid: Solid {
                    add: vec![
                        cuboid([0.0; 3], [l, w, t]),
                        cylinder([0.0, 0.0, t / 2.0 + bh / 2.0], boss / 2.0, bh),
                    ],
                    subtract: vec![cylinder([0.0, 0.0, bh / 2.0], hole / 2.0, t + bh + 2.0)],
                },
            }
        }
    }
}

/// What the scripted model does for a test query.
#[derive(Clone, Copy, Debug)]
enum Plan {
    /// Returns the reference script; the runner reports the solid moved,
    /// rotated and rescaled.
    Exact,
    /// Returns a script whose solid is stretched along x and squashed along y.
    Perturbed,
    /// Answers in prose only.
    NoBlock,
    Syntax,
    ScaleCall,
    NoWires,
}

const PLANS: [Plan; 12] = [
    Plan::Exact,
    Plan::Perturbed,
    Plan::Exact,
    Plan::NoBlock,
    Plan::Exact,
    Plan::Syntax,
    Plan::Perturbed,
    Plan::Exact,
    Plan::ScaleCall,
    Plan::Exact,
    Plan::NoWires,
    Plan::Perturbed,
];

fn fenced(code: &str) -> String {
    format!("Here is the script.\n```python\n{code}\n```\n")
}

struct Scripted {
    responses: HashMap<String, (Plan, String)>,
}

impl ChatBackend for Scripted {
    fn chat(&self, _: &GatewayConfig, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let user = &messages.last().expect("user turn").content;
        let query = user.rsplit("Description: ").next().unwrap_or_default();
        let (plan, response) = self.responses.get(query).ok_or_else(|| BackendError {
            retryable: false,
            message: format!("unscripted query {query:?}"),
        })?;
        // without demonstrations the model forgets the code fence on
        // otherwise-good answers
        let zero_shot = !user.contains("\n'''\n");
        if zero_shot && matches!(plan, Plan::Exact) {
            return Ok("A solid matching the description can be made with a box and an extrude.".into());
        }
        Ok(response.clone())
    }
}

fn stretched(solid: &Solid) -> Solid {
    let warp = |p: &Primitive| match *p {
        Primitive::Cuboid { center, size } => Primitive::Cuboid {
            center: [center[0] * 1.25, center[1] * 0.8, center[2]],
            size: [size[0] * 1.25, size[1] * 0.8, size[2]],
        },
        Primitive::Cylinder { center, radius, height } => Primitive::Cylinder {
            center: [center[0] * 1.25, center[1] * 0.8, center[2]],
            radius: radius * 1.1,
            height: height * 0.85,
        },
    };
    Solid {
        add: solid.add.iter().map(warp).collect(),
        subtract: solid.subtract.iter().map(warp).collect(),
    }
}

/// Samples rounded to 1e-6 keep the checked-in files small.
fn rounded(artifact: GeometryArtifact) -> GeometryArtifact {
    let round = |p: &[f64; 3]| p.map(|v| (v * 1e6).round() / 1e6);
    let (surface, edges) = artifact.map_points(round);
    GeometryArtifact::from_samples(surface, edges, SAMPLING.resolution, 2).expect("non-empty samples")
}

fn moved(artifact: &GeometryArtifact, rotation: usize) -> GeometryArtifact {
    let r = &rotations24()[rotation];
    let f = |p: &[f64; 3]| {
        let q = apply(r, p);
        [2.5 * q[0] + 40.0, 2.5 * q[1] - 15.0, 2.5 * q[2] + 7.0]
    };
    let (surface, edges) = artifact.map_points(f);
    rounded(GeometryArtifact::from_samples(surface, edges, SAMPLING.resolution, 2).expect("non-empty samples"))
}

fn main() -> cad_icl::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini"));
    if out.exists() {
        std::fs::remove_dir_all(&out).expect("clear output directory");
    }
    let corpus_dir = out.join("corpus");
    std::fs::create_dir_all(corpus_dir.join("geometry")).expect("create fixture dirs");

    // 36 parts, families cycled so every tier sees a mix
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut parts = Vec::new();
    let mut exemplars = Vec::new();
    while exemplars.len() < 36 {
        let family = exemplars.len() % 7;
        let p = part(family, &mut rng);
        if exemplars.iter().any(|e: &Exemplar| e.spec == p.spec) {
            continue;
        }
        exemplars.push(Exemplar {
            id: format!("part-{:02}", exemplars.len()),
            spec: p.spec.clone(),
            code: p.code.clone(),
            geometry_ref: None,
            geom: Some(p.solid.topology_count()),
            complexity: None,
        });
        parts.push(p);
    }
    let mut corpus = Corpus::from_exemplars(exemplars)?.corpus;
    score_corpus(&mut corpus, &OpsCounter::default())?;
    partition_tiers(&mut corpus)?;
    let split = split_test_set(&corpus, 4, 7)?;

    // ground truth for every test query
    let test: Vec<(usize, String)> = split
        .test_ids(&cad_icl::corpus::Tier::ALL)
        .into_iter()
        .map(|(_, id)| (corpus.index_of(&id).expect("test id in corpus"), id))
        .collect();
    let mut records: Vec<Exemplar> = corpus.exemplars().to_vec();
    for (i, id) in &test {
        let rel = format!("geometry/{id}.json");
        rounded(parts[*i].solid.artifact(&Sampling { seed: *i as u64, ..SAMPLING })?).save(&corpus_dir.join(&rel))?;
        records[*i].geometry_ref = Some(rel);
    }
    let tiers = corpus.tiers.clone();
    let mut corpus = Corpus::from_exemplars(records)?.corpus;
    corpus.tiers = tiers;
    corpus.save_dir(&corpus_dir)?;
    split.save(&corpus_dir)?;

    // scripted responses and the results the runner would return
    let store = ResultStore::new(out.join("results"));
    let mut responses = HashMap::new();
    for (n, (i, _)) in test.iter().enumerate() {
        let p = &parts[*i];
        let plan = PLANS[n];
        let run_seed = 100 + n as u64;
        let (code, result) = match plan {
            Plan::Exact => {
                let a = p.solid.artifact(&Sampling { seed: run_seed, ..SAMPLING })?;
                (p.code.clone(), Some(RunResult::ok(moved(&a, (5 * n) % 24), 0.5)))
            }
            Plan::Perturbed => {
                let code = format!("{}\nresult = result.translate((0, 0, 0))", p.code);
                let a = stretched(&p.solid).artifact(&Sampling { seed: run_seed, ..SAMPLING })?;
                (code, Some(RunResult::ok(rounded(a), 0.5)))
            }
            Plan::NoBlock => (String::new(), None),
            Plan::Syntax => (
                p.code.replacen("(", "((", 1),
                Some(RunResult::fail(FailureClass::TypeI, "SyntaxError: '(' was never closed", 0.1)),
            ),
            Plan::ScaleCall => (
                format!("{}\nresult = result.scale(2)", p.code),
                Some(RunResult::fail(
                    FailureClass::TypeII,
                    "AttributeError: 'Workplane' object has no attribute 'scale'",
                    0.2,
                )),
            ),
            Plan::NoWires => (
                "import cadquery as cq\nresult = cq.Workplane(\"XY\").extrude(10)".to_string(),
                Some(RunResult::fail(FailureClass::TypeIII, "ValueError: No pending wires present", 0.2)),
            ),
        };
        let response = match plan {
            Plan::NoBlock => "I would start from a rectangular sketch and extrude it to the stated thickness.".to_string(),
            _ => fenced(&code),
        };
        if let Some(r) = result {
            store.put(&code, &r)?;
        }
        responses.insert(p.spec.clone(), (plan, response));
    }

    let cassette = out.join("cassette.jsonl");
    let mut config = ExperimentConfig {
        corpus_dir: corpus_dir.clone(),
        strategy: Strategy::Dst,
        k: 2,
        seed: 11,
        tiers: cad_icl::corpus::Tier::ALL.to_vec(),
        granularities: Default::default(),
        fill_to_k: false,
        omit_empty_examples: false,
        workers: 4,
        gateway: GatewayConfig {
            mode: GatewayMode::Record,
            cassette: Some(cassette.clone()),
            model: "scripted-model".into(),
            ..Default::default()
        },
        // a 32³ grid keeps IoU meaningful at this sample density
        metrics: VoxelSpec {
            resolution: 32,
            ..Default::default()
        },
        execution: Execution::Stored {
            results_dir: out.join("results"),
        },
    };

    // record every (strategy, k) cell the tests and examples replay
    let cells: Vec<(Strategy, Vec<usize>)> = vec![
        (Strategy::Dst, vec![0, 1, 2, 3]),
        (Strategy::Random, vec![1, 2, 3]),
        (Strategy::Ldsim, vec![1, 2, 3]),
        (Strategy::Bm25, vec![1, 2, 3]),
        (Strategy::Diversity, vec![1, 2, 3]),
    ];
    for (strategy, shots) in &cells {
        config.strategy = *strategy;
        let backend = Scripted { responses: responses.clone() };
        let gateway = Gateway::with_backend(config.gateway.clone(), Some(Box::new(backend)))?;
        let experiment = Experiment::with_backends(config.clone(), gateway, Box::new(store.clone()))?;
        for &k in shots {
            experiment.run_k(k)?;
        }
    }
    // appends arrive in worker order; store the cassette sorted by hash
    let text = std::fs::read_to_string(&cassette).expect("cassette written");
    let mut lines: Vec<&str> = text.lines().collect();
    lines.sort_unstable();
    lines.dedup();
    std::fs::write(&cassette, lines.join("\n") + "\n").expect("rewrite cassette");
    println!("cassette: {} entries", Cassette::open(&cassette)?.len());

    // the checked-in config is relative to the fixture directory
    config.strategy = Strategy::Dst;
    config.corpus_dir = "corpus".into();
    config.gateway.mode = GatewayMode::Replay;
    config.gateway.cassette = Some("cassette.jsonl".into());
    config.execution = Execution::Stored {
        results_dir: "results".into(),
    };
    let toml_path = out.join("experiment.toml");
    std::fs::write(&toml_path, config.to_toml()?).expect("write config");

    let golden = out.join("golden");
    std::fs::create_dir_all(&golden).expect("create golden dir");
    let experiment = Experiment::open(ExperimentConfig::load(&toml_path)?)?;
    let report = experiment.run()?;
    report.save(&golden.join("report.json"))?;
    let sweep: Vec<_> = [0, 1, 2, 3].iter().map(|&k| experiment.run_k(k)).collect::<Result<_, _>>()?;
    std::fs::write(golden.join("sweep.csv"), sweep_csv(&sweep)?).expect("write sweep");

    let all = report.overall();
    println!(
        "golden report: {} queries, VSR {:.1}%, mean IoU {:.3}, failures {:?}",
        all.total, all.vsr, all.mean_iou.unwrap_or(0.0), all.failures
    );
    Ok(())
}
