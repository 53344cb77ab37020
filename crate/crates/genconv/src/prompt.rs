use crate::persona::PersonaSpec;

pub const DEFAULT_TOPIC: &str = "What makes a day a good day?";

const TEMPLATE: &str = "You are in a conversation. There are two speakers, SpeakerA and SpeakerB.
You are SpeakerA. The conversation will consists of turns in the form:
[SpeakerA's utterances]
[SpeakerB's utterances]
[SpeakerA's utterances]
…
You need to only give [SpeakerA's utterances]. You will be prompted by [Language] that will instruct you on the language that you shall use as SpeakerA. Further, you will be prompted by [Topic], the topic of the conversation. Behave as in a normal conversation with SpeakerB to discuss the [Topic].
[Language] {language} [Topic] {topic}";

/// System prompt for one agent. Every agent sees itself as SpeakerA.
pub fn build_system_prompt(persona: &PersonaSpec, topic: &str) -> String {
    let language = persona.text.trim_end();
    let language = if language.ends_with('.') { language.to_string() } else { format!("{language}.") };
    TEMPLATE.replace("{language}", &language).replace("{topic}", topic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persona::persona;

    #[test]
    fn fills_both_slots() {
        let p = build_system_prompt(persona(1).unwrap(), DEFAULT_TOPIC);
        assert!(p.starts_with("You are in a conversation. There are two speakers, SpeakerA and SpeakerB."));
        assert!(p.contains("Your language is precise, and unambiguous."));
        assert_eq!(p.matches(DEFAULT_TOPIC).count(), 1);
        assert!(p.ends_with(&format!("[Topic] {DEFAULT_TOPIC}")));
    }

    #[test]
    fn personas_differ_only_in_language_slot() {
        let a = build_system_prompt(persona(3).unwrap(), "tea");
        let b = build_system_prompt(persona(9).unwrap(), "tea");
        let strip = |s: &str, p: &PersonaSpec| s.replace(p.text, "<L>");
        assert_ne!(a, b);
        assert_eq!(strip(&a, persona(3).unwrap()), strip(&b, persona(9).unwrap()));
    }
}
