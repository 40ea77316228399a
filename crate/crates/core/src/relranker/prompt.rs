use std::fmt::Write as _;

pub const SYSTEM_PROMPT: &str =
    "You are a careful visual annotator. You grade how strongly each requested attribute is expressed in an image and answer only in the requested format.";

/// Scoring instruction for one image. Pure function of its inputs.
pub fn build_prompt(names: &[String], image_descriptor: &str) -> String {
    let n = names.len();
    let mut p = String::new();
    let _ = writeln!(p, "Image: {image_descriptor}");
    let _ = writeln!(
        p,
        "Score each attribute below from 0 to 5, where 0 means the attribute is absent and 5 means its highest expression."
    );
    let _ = writeln!(p, "Attributes:");
    for (k, name) in names.iter().enumerate() {
        let _ = writeln!(p, "{}. {name}", k + 1);
    }
    let placeholder: Vec<String> = (1..=n).map(|k| format!("s{k}")).collect();
    let _ = write!(
        p,
        "Reply with exactly {n} integers as one bracketed list in the order above, like [{}], and nothing else.",
        placeholder.join(", ")
    );
    p
}

/// Descriptor used for corpus samples; the sample id lets fixtures key replies.
pub fn sample_descriptor(sample_id: usize, side: usize) -> String {
    format!("sample {sample_id}, a {side}x{side} grayscale scene (attached)")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn contains_names_and_scale() {
        let p = build_prompt(&names(&["Bangs", "Bald"]), "test image");
        assert!(p.contains("Bangs") && p.contains("Bald"));
        assert!(p.contains("0 to 5"));
    }

    #[test]
    fn deterministic() {
        let n = names(&["a", "b", "c"]);
        assert_eq!(build_prompt(&n, "x"), build_prompt(&n, "x"));
    }

    #[test]
    fn demands_exactly_n_integers() {
        let n = names(&["Bangs", "Bald", "Gender", "Beard", "Blond", "Makeup"]);
        let p = build_prompt(&n, "face");
        assert!(p.contains("exactly 6 integers"));
        // The format example must not itself parse as an answer.
        assert!(crate::relranker::parse_reply(&p, 6).is_none());
    }
}
