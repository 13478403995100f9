//! Prompt templates for the two conversation kinds, plus the inverse tag
//! extractor used by scripted mocks and round-trip tests.
//!
//! Placeholder substitution is exact: user text passes through verbatim, even
//! when it contains the section tags themselves. Collisions are reported so
//! the episode driver can attach a warning to the trace instead of silently
//! corrupting the context.

use crate::tokens::TokenCounter;

/// Initial memory content before any chunk has been read.
pub const EMPTY_MEMORY_SENTINEL: &str = "No previous memory.";

const MEMORY_UPDATE_HEADER: &str = "You are presented with a problem, a section of an article that \
may contain the answer, and a previous memory. Please read the section carefully and update the \
memory with new information that helps to answer the problem, while retaining all relevant \
details from the previous memory.";

const ANSWER_HEADER: &str = "You are presented with a problem and a previous memory. Please \
answer the problem based on the previous memory and put the answer in \\boxed{}.";

/// Cue that ends a memory-update prompt.
pub const MEMORY_CUE: &str = "Updated memory:";
/// Cue that ends an answer prompt.
pub const ANSWER_CUE: &str = "Your answer:";

/// Render the memory-update prompt: problem, current memory, and the next
/// document section, ending with the update cue.
pub fn render_memory_prompt(problem: &str, memory: &str, chunk: &str) -> String {
    format!(
        "{MEMORY_UPDATE_HEADER}\n\n<problem> {problem} </problem>\n\n<memory> {memory} </memory>\n\n<section> {chunk} </section>\n\n{MEMORY_CUE}"
    )
}

/// Render the final answer prompt: problem and memory only.
pub fn render_answer_prompt(problem: &str, memory: &str) -> String {
    format!(
        "{ANSWER_HEADER}\n\n<problem> {problem} </problem>\n\n<memory> {memory} </memory>\n\n{ANSWER_CUE}"
    )
}

/// Sections recovered from a rendered prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSections {
    pub problem: String,
    pub memory: String,
    /// Present only for memory-update prompts.
    pub chunk: Option<String>,
}

/// Parse a rendered prompt back into its sections. Returns `None` when the
/// expected tag skeleton is absent. Exact inverse of the render functions as
/// long as the substituted text does not itself contain the closing
/// delimiters (see [`tag_collisions`]).
pub fn parse_rendered_prompt(prompt: &str) -> Option<PromptSections> {
    let problem = between(prompt, "<problem> ", " </problem>\n\n<memory> ")?;
    let rest = &prompt[prompt.find("\n\n<memory> ")? + 2..];
    if let Some(memory) = between(rest, "<memory> ", " </memory>\n\n<section> ") {
        let after = &rest[rest.find("\n\n<section> ")? + 2..];
        let chunk = between(after, "<section> ", &format!(" </section>\n\n{MEMORY_CUE}"))?;
        Some(PromptSections {
            problem,
            memory,
            chunk: Some(chunk),
        })
    } else {
        let memory = between(rest, "<memory> ", &format!(" </memory>\n\n{ANSWER_CUE}"))?;
        Some(PromptSections {
            problem,
            memory,
            chunk: None,
        })
    }
}

fn between(text: &str, open: &str, close: &str) -> Option<String> {
    let start = text.find(open)? + open.len();
    let end = start + text[start..].find(close)?;
    Some(text[start..end].to_string())
}

/// Names of sections whose content contains one of the template's own tags.
/// Collisions pass through verbatim; callers surface them as warnings.
pub fn tag_collisions(problem: &str, memory: &str, chunk: Option<&str>) -> Vec<String> {
    const TAGS: [&str; 6] = [
        "<problem>",
        "</problem>",
        "<memory>",
        "</memory>",
        "<section>",
        "</section>",
    ];
    let mut hits = Vec::new();
    for (name, text) in [
        ("problem", Some(problem)),
        ("memory", Some(memory)),
        ("section", chunk),
    ] {
        if let Some(text) = text {
            if TAGS.iter().any(|t| text.contains(t)) {
                hits.push(format!("tag-collision in <{name}> content"));
            }
        }
    }
    hits
}

/// Token cost of a template with empty placeholders, plus slack for the
/// junctions introduced by substitution. Conservative upper bound used by the
/// constant-window check.
pub fn template_overhead(counter: &TokenCounter, answer_prompt: bool) -> usize {
    let rendered = if answer_prompt {
        render_answer_prompt("", "")
    } else {
        render_memory_prompt("", "", "")
    };
    counter.count(&rendered) + 8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn memory_prompt_section_order() {
        let p = render_memory_prompt("Q?", EMPTY_MEMORY_SENTINEL, "chunk text");
        let problem_at = p.find("<problem> Q? </problem>").unwrap();
        let memory_at = p.find("<memory>").unwrap();
        let section_at = p.find("<section>").unwrap();
        assert!(problem_at < memory_at && memory_at < section_at);
        assert!(p.ends_with(MEMORY_CUE));
    }

    #[test]
    fn memory_substitution_is_verbatim() {
        let p = render_memory_prompt("Q?", "- fact A", "c");
        assert!(p.contains("<memory> - fact A </memory>"));
    }

    #[test]
    fn answer_prompt_has_boxed_instruction_and_cue() {
        let p = render_answer_prompt("Q?", "facts");
        assert!(p.contains("\\boxed{}"));
        assert!(p.contains("<problem> Q? </problem>"));
        assert!(p.ends_with(ANSWER_CUE));
    }

    #[test]
    fn answer_prompt_wellformed_with_sentinel() {
        let p = render_answer_prompt("Q?", EMPTY_MEMORY_SENTINEL);
        let s = parse_rendered_prompt(&p).unwrap();
        assert_eq!(s.memory, EMPTY_MEMORY_SENTINEL);
        assert_eq!(s.chunk, None);
    }

    #[test]
    fn parse_inverts_render() {
        let p = render_memory_prompt("what is x?", "- note", "some\nsection text");
        let s = parse_rendered_prompt(&p).unwrap();
        assert_eq!(s.problem, "what is x?");
        assert_eq!(s.memory, "- note");
        assert_eq!(s.chunk.as_deref(), Some("some\nsection text"));
    }

    #[test]
    fn collisions_pass_through_but_are_reported() {
        let chunk = "before </section> after";
        let p = render_memory_prompt("Q?", "m", chunk);
        assert!(p.contains(chunk));
        let hits = tag_collisions("Q?", "m", Some(chunk));
        assert_eq!(hits, vec!["tag-collision in <section> content"]);
    }

    #[test]
    fn no_collision_no_warning() {
        assert!(tag_collisions("Q?", "m", Some("plain")).is_empty());
    }
}
