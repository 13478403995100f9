#![no_main]

//! Prompt tag extraction: arbitrary input never panics; rendered prompts
//! round-trip exactly when the parts carry no template tags.

use libfuzzer_sys::fuzz_target;
use memagent::workflow::prompt::{
    parse_rendered_prompt, render_answer_prompt, render_memory_prompt, tag_collisions,
};

fuzz_target!(|data: &[u8]| {
    let input = String::from_utf8_lossy(data);
    let _ = parse_rendered_prompt(&input);

    // Structured round trip: carve the input into three parts.
    let parts: Vec<&str> = input.splitn(3, '\u{1f}').collect();
    let problem = parts.first().copied().unwrap_or("");
    let memory = parts.get(1).copied().unwrap_or("");
    let chunk = parts.get(2).copied().unwrap_or("");
    if tag_collisions(problem, memory, Some(chunk)).is_empty()
        && !problem.contains("</problem>")
        && !memory.contains("</memory>")
        && !chunk.contains("</section>")
    {
        let prompt = render_memory_prompt(problem, memory, chunk);
        let sections = parse_rendered_prompt(&prompt).expect("rendered prompt must parse");
        assert_eq!(sections.problem, problem);
        assert_eq!(sections.memory, memory);
        assert_eq!(sections.chunk.as_deref(), Some(chunk));

        let prompt = render_answer_prompt(problem, memory);
        let sections = parse_rendered_prompt(&prompt).expect("rendered prompt must parse");
        assert_eq!(sections.problem, problem);
        assert_eq!(sections.memory, memory);
        assert_eq!(sections.chunk, None);
    }
});
