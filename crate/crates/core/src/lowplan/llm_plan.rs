use std::collections::BTreeSet;

use super::parse::{parse_plan_response, PLAN_SCHEMA};
use super::PlannedPath;
use crate::annotate::AnnotatedImage;
use crate::error::{Error, Result};
use crate::geometry::ViewDirection;
use crate::llm::{ChatClient, ChatMessage, ContentPart};
use crate::prompt::{default_vap, PromptTemplate};

/// Low-level prompt plus the instruction ablation switch.
#[derive(Debug, Clone)]
pub struct LowLevelPrompt {
    pub template: PromptTemplate,
    /// When false the instruction is withheld from the model.
    pub include_instruction: bool,
}

impl Default for LowLevelPrompt {
    fn default() -> Self {
        LowLevelPrompt {
            template: default_vap(),
            include_instruction: true,
        }
    }
}

const WITHHELD: &str = "(not provided; choose waypoints from the visible layout alone)";

impl LowLevelPrompt {
    pub fn render(&self, instruction: &str, dir: ViewDirection) -> Result<String> {
        let instruction = if self.include_instruction { instruction } else { WITHHELD };
        self.template.render(&[
            ("instruction", instruction),
            ("view_direction", dir.name()),
            ("output_schema", PLAN_SCHEMA),
        ])
    }
}

/// One request with the rendered prompt and the annotated view. A reply
/// with no usable JSON earns one reprompt quoting the error; a second
/// failure yields no paths. Endpoint errors propagate.
pub fn plan_view_llm(
    client: &dyn ChatClient,
    prompt: &LowLevelPrompt,
    instruction: &str,
    annotated: &AnnotatedImage,
    valid_ids: &BTreeSet<u32>,
    view_dir: ViewDirection,
) -> Result<Vec<PlannedPath>> {
    let mut messages = vec![ChatMessage::user(vec![
        ContentPart::Text(prompt.render(instruction, view_dir)?),
        ContentPart::Png(annotated.png_bytes()),
    ])];
    for attempt in 0..2 {
        let reply = client.complete(&messages)?;
        match parse_plan_response(&reply, valid_ids, view_dir) {
            Ok(parsed) => {
                for d in &parsed.diagnostics {
                    log::warn!("{view_dir} view: dropped planner entry ({d})");
                }
                return Ok(parsed.paths);
            }
            Err(e @ (Error::NoJson | Error::BadReply(_))) if attempt == 0 => {
                messages.push(ChatMessage::assistant(reply));
                messages.push(ChatMessage::user_text(format!(
                    "Your reply could not be used: {e}. Answer again with a single JSON object following this schema:\n{PLAN_SCHEMA}"
                )));
            }
            Err(e @ (Error::NoJson | Error::BadReply(_))) => {
                log::warn!("{view_dir} view: unusable planner reply after reprompt ({e}); no paths");
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::RgbImage;
    use std::sync::Mutex;

    struct Canned {
        replies: Mutex<Vec<&'static str>>,
        seen: Mutex<Vec<usize>>,
    }

    impl Canned {
        fn new(mut replies: Vec<&'static str>) -> Self {
            replies.reverse();
            Canned {
                replies: Mutex::new(replies),
                seen: Mutex::new(Vec::new()),
            }
        }
    }

    impl ChatClient for Canned {
        fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
            self.seen.lock().unwrap().push(messages.len());
            self.replies
                .lock()
                .unwrap()
                .pop()
                .map(str::to_owned)
                .ok_or_else(|| Error::Endpoint("script exhausted".into()))
        }
    }

    fn img() -> AnnotatedImage {
        AnnotatedImage::plain(RgbImage::new(8, 8))
    }

    #[test]
    fn valid_reply_needs_one_call() {
        let c = Canned::new(vec![r#"{"waypoints":[{"waypoint_id":2,"path":[1,2]}]}"#]);
        let ids: BTreeSet<u32> = (1..=3).collect();
        let p = plan_view_llm(&c, &LowLevelPrompt::default(), "go", &img(), &ids, ViewDirection::Front).unwrap();
        assert_eq!(p[0].point_ids, vec![1, 2]);
        assert_eq!(*c.seen.lock().unwrap(), vec![1]);
    }

    #[test]
    fn reprompts_once_then_degrades() {
        let ids: BTreeSet<u32> = (1..=3).collect();
        let c = Canned::new(vec!["hmm", r#"{"waypoints":[{"waypoint_id":3,"path":[3]}]}"#]);
        let p = plan_view_llm(&c, &LowLevelPrompt::default(), "go", &img(), &ids, ViewDirection::Left).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(*c.seen.lock().unwrap(), vec![1, 3]);

        let c = Canned::new(vec!["hmm", "still prose"]);
        let p = plan_view_llm(&c, &LowLevelPrompt::default(), "go", &img(), &ids, ViewDirection::Left).unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn instruction_can_be_withheld() {
        let mut prompt = LowLevelPrompt::default();
        assert!(prompt.render("find the red sofa", ViewDirection::Back).unwrap().contains("red sofa"));
        prompt.include_instruction = false;
        let text = prompt.render("find the red sofa", ViewDirection::Back).unwrap();
        assert!(!text.contains("red sofa"));
        assert!(text.contains("back"));
    }
}
