//! Few-shot prompt assembly and code extraction from model responses.

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::selection::SelectionResult;

pub const SYSTEM_PROMPT: &str = "You are an expert CAD engineer proficient in Python and the CadQuery library. Your task is to generate precise, executable CadQuery scripts according to given natural language descriptions.";

pub const INSTRUCTION: &str = "Please create a CadQuery Python code which can generate a model based on the instruction and description.\n\
The final CadQuery code MUST BE put in '''python code''' with ONLY the executable code inside the python box, nothing else.\n\
Relevant examples will be provided in sequence according to their similarity to the final query, and these examples may be helpful for answer generation.\n\
Please don't use the non-existent '.scale()' method on Workplane objects.";

pub const EXAMPLES_BEGIN: &str = "#Examples Begin:";
pub const EXAMPLES_END: &str = "#Examples End";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub spec: String,
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub system: String,
    pub instruction: String,
    pub demonstrations: Vec<Demonstration>,
    pub query_spec: String,
    /// Leave out the example markers entirely when there are no demonstrations.
    pub omit_empty_examples: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl Prompt {
    pub fn new(demonstrations: Vec<Demonstration>, query_spec: &str) -> Result<Self> {
        if query_spec.trim().is_empty() {
            return Err(Error::Contract("query specification is empty".into()));
        }
        Ok(Prompt {
            system: SYSTEM_PROMPT.to_string(),
            instruction: INSTRUCTION.to_string(),
            demonstrations,
            query_spec: query_spec.to_string(),
            omit_empty_examples: false,
        })
    }

    /// The user turn: instruction, the example block, then the query.
    pub fn user_content(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.instruction);
        out.push_str("\n\n");
        if !(self.demonstrations.is_empty() && self.omit_empty_examples) {
            out.push_str(EXAMPLES_BEGIN);
            out.push_str("\n\n");
            for d in &self.demonstrations {
                out.push_str("Description: ");
                out.push_str(&d.spec);
                out.push_str("\n'''\n");
                out.push_str(&d.code);
                out.push_str("\n'''\n\n");
            }
            out.push_str(EXAMPLES_END);
            out.push_str("\n\n");
        }
        out.push_str("Description: ");
        out.push_str(&self.query_spec);
        out
    }

    pub fn messages(&self) -> Vec<ChatMessage> {
        vec![
            ChatMessage {
                role: "system".into(),
                content: self.system.clone(),
            },
            ChatMessage {
                role: "user".into(),
                content: self.user_content(),
            },
        ]
    }
}

/// Render the prompt for a selection, demonstrations in pick order.
pub fn build_prompt(selection: &SelectionResult, db: &Corpus, query_spec: &str) -> Result<Prompt> {
    let demos = selection
        .chosen
        .iter()
        .map(|&i| {
            db.get(i)
                .map(|e| Demonstration {
                    spec: e.spec.clone(),
                    code: e.code.clone(),
                })
                .ok_or_else(|| Error::UnknownExemplar(format!("index {i}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Prompt::new(demos, query_spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractionStatus {
    Ok,
    NoBlock,
    MultipleBlocksResolved,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub code: Option<String>,
    pub status: ExtractionStatus,
}

const FENCES: [&str; 2] = ["```", "'''"];

fn is_tag(s: &str) -> bool {
    s.trim_end()
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '+' | '.'))
}

/// All fenced blocks in order. A fence is ``` or ''' and closes with the same
/// delimiter; an opening line holding only a language tag is skipped, and
/// one newline before the closing fence is dropped.
pub fn code_blocks(text: &str) -> Vec<&str> {
    let mut blocks = Vec::new();
    let mut pos = 0;
    loop {
        let next = FENCES
            .iter()
            .filter_map(|f| text[pos..].find(f).map(|at| (pos + at, *f)))
            .min_by_key(|(at, _)| *at);
        let Some((open, fence)) = next else { break };
        let mut start = open + fence.len();
        let line_end = text[start..].find('\n').map(|i| start + i);
        if let Some(le) = line_end {
            if is_tag(&text[start..le]) {
                start = le + 1;
            }
        }
        let Some(close_rel) = text[start..].find(fence) else { break };
        let close = start + close_rel;
        let body = &text[start..close];
        blocks.push(body.strip_suffix('\n').unwrap_or(body));
        pos = close + fence.len();
    }
    blocks
}

/// The last fenced block wins when several are present.
pub fn extract_code(raw: &str) -> Extraction {
    let blocks = code_blocks(raw);
    match blocks.len() {
        0 => Extraction {
            code: None,
            status: ExtractionStatus::NoBlock,
        },
        1 => Extraction {
            code: Some(blocks[0].to_string()),
            status: ExtractionStatus::Ok,
        },
        _ => Extraction {
            code: Some(blocks[blocks.len() - 1].to_string()),
            status: ExtractionStatus::MultipleBlocksResolved,
        },
    }
}
