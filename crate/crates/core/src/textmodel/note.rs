//! Clinical-note tokenisation with a trigger-window negation filter and a
//! fixed suffix stemmer.

/// Words that open a negated span.
pub const NEGATION_TRIGGERS: [&str; 6] = ["no", "not", "without", "denies", "denied", "negative"];

/// Tokens dropped after a trigger, at most, when no sentence punctuation
/// (`.`, `;`, `:`) closes the span first.
pub const NEGATION_WINDOW: usize = 5;

/// Suffixes tried in order; the first match is stripped once if at least
/// three characters remain.
pub const SUFFIXES: [&str; 6] = ["ation", "tion", "ing", "es", "ed", "s"];

pub const STOPWORDS: [&str; 48] = [
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been",
    "before", "but", "by", "for", "from", "had", "has", "have", "he", "her", "his", "if", "in",
    "into", "is", "it", "its", "of", "on", "or", "she", "so", "than", "that", "the", "their",
    "then", "there", "these", "this", "to", "was", "were", "which", "with",
];

enum Piece {
    Word(String),
    Stop,
}

fn pieces(text: &str) -> Vec<Piece> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            out.push(Piece::Word(std::mem::take(&mut word)));
        }
        if matches!(ch, '.' | ';' | ':') {
            out.push(Piece::Stop);
        }
    }
    if !word.is_empty() {
        out.push(Piece::Word(word));
    }
    out
}

pub fn stem(word: &str) -> String {
    for suffix in SUFFIXES {
        if let Some(root) = word.strip_suffix(suffix) {
            if root.chars().count() >= 3 {
                return root.to_string();
            }
            // Only the first matching suffix is considered.
            return word.to_string();
        }
    }
    word.to_string()
}

/// Lowercases, splits on non-alphanumeric runs, removes negated spans,
/// drops stopwords and stems what remains.
pub fn preprocess_note(text: &str) -> Vec<String> {
    let mut kept = Vec::new();
    let mut skipping = 0usize;
    for piece in pieces(text) {
        match piece {
            Piece::Stop => skipping = 0,
            Piece::Word(w) => {
                if NEGATION_TRIGGERS.contains(&w.as_str()) {
                    skipping = NEGATION_WINDOW;
                    continue;
                }
                if skipping > 0 {
                    skipping -= 1;
                    continue;
                }
                kept.push(w);
            }
        }
    }
    kept.into_iter()
        .filter(|w| !STOPWORDS.contains(&w.as_str()))
        .map(|w| stem(&w))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negated_sentence_vanishes() {
        assert!(preprocess_note("no history of diabetes.").is_empty());
    }

    #[test]
    fn plain_sentence_is_stemmed() {
        assert_eq!(preprocess_note("history of diabetes"), ["history", "diabet"]);
    }

    #[test]
    fn empty_input() {
        assert!(preprocess_note("").is_empty());
        assert!(preprocess_note("  ...;; ").is_empty());
    }

    #[test]
    fn window_closes_at_punctuation_or_after_five_tokens() {
        assert_eq!(
            preprocess_note("Denies chest pain; reports fever"),
            ["report", "fever"]
        );
        assert_eq!(
            preprocess_note("without one two three four five six seven"),
            ["six", "seven"]
        );
        // A trigger inside a window restarts it.
        assert_eq!(preprocess_note("no fever no cough x1 x2 x3 x4 x5 rash"), ["x5", "rash"]);
    }

    #[test]
    fn suffix_rules() {
        assert_eq!(stem("medication"), "medic");
        assert_eq!(stem("infection"), "infec");
        assert_eq!(stem("bleeding"), "bleed");
        assert_eq!(stem("ruled"), "rul");
        assert_eq!(stem("lungs"), "lung");
        // Too short to strip.
        assert_eq!(stem("ring"), "ring");
        assert_eq!(stem("yes"), "yes");
        // First match decides; "es" matches before "s".
        assert_eq!(stem("goes"), "goes");
    }

    #[test]
    fn digits_are_kept_and_case_folded() {
        assert_eq!(preprocess_note("BP 120/80, HR 95"), ["bp", "120", "80", "hr", "95"]);
    }

    #[test]
    fn stopwords_and_triggers_are_disjoint() {
        for t in NEGATION_TRIGGERS {
            assert!(!STOPWORDS.contains(&t));
        }
    }

    #[test]
    fn double_suffix_words_keep_stemming_on_reapplication() {
        // Stripping exactly one suffix per pass means outputs that still end
        // in a listed suffix are not fixed points.
        let once = preprocess_note("classes");
        assert_eq!(once, ["class"]);
        assert_eq!(preprocess_note(&once.join(" ")), ["clas"]);
    }
}
