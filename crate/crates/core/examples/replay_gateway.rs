//! Record completions into a cassette, then replay them offline.
//!
//! A scripted backend stands in for the model here. With a real endpoint,
//! use `Gateway::new` in `Record` or `Live` mode and export the bearer
//! token in the variable named by `api_key_env` (`OPENAI_API_KEY` by default).
//!
//!     cargo run --example replay_gateway

use cad_icl::gateway::{BackendError, ChatBackend, Gateway, GatewayConfig, GatewayMode};
use cad_icl::prompting::{ChatMessage, Prompt};
use cad_icl::Error;

struct Echo;

impl ChatBackend for Echo {
    fn chat(&self, _: &GatewayConfig, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let last = &messages.last().expect("user turn").content;
        Ok(format!("```python\n# {} chars of prompt\nresult = None\n```", last.len()))
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("cad-icl-replay-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let config = GatewayConfig {
        model: "scripted".into(),
        mode: GatewayMode::Record,
        cassette: Some(dir.join("cassette.jsonl")),
        ..GatewayConfig::default()
    };
    let prompt = Prompt::new(vec![], "A cube with 10 mm sides.")?;

    let recorder = Gateway::with_backend(config.clone(), Some(Box::new(Echo)))?;
    let recorded = recorder.complete(&prompt)?;
    println!("recorded {} -> {recorded:?}", recorder.hash(&prompt));

    let replayer = Gateway::with_backend(GatewayConfig { mode: GatewayMode::Replay, ..config }, None)?;
    assert_eq!(replayer.complete(&prompt)?, recorded);
    println!("replayed identically");

    let unseen = Prompt::new(vec![], "A sphere.")?;
    match replayer.complete(&unseen) {
        Err(Error::MissingCassetteEntry(h)) => println!("unseen prompt {h} is not in the cassette"),
        other => println!("unexpected: {other:?}"),
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
