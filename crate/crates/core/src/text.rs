//! Surface-form classifiers shared by the tagger features, the gazetteer
//! lookups and the error categorizer.

use std::sync::OnceLock;

use regex::Regex;

fn emoticon_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(concat!(
            r"^(?:",
            // eyes, optional nose, mouth: :) ;-P =D xD :'(
            r"[<>]?[:;=8xX][-o*'^]?[()\[\]{}<>|/\\dDpPO3*@$]+",
            // mirrored: (: D:> ]:
            r"|[()\[\]{}<>|/\\dDO]+[-o*'^]?[:;=8][<>]?",
            r"|</?3+|\^_*\^|-_+-|[oO]_[oO]|T_T",
            r")$"
        ))
        .expect("valid emoticon pattern")
    })
}

/// Emoticon shapes such as `:)`, `;-P`, `D:>` or `<3`.
pub fn is_emoticon(form: &str) -> bool {
    form.chars().count() >= 2 && emoticon_re().is_match(form)
}

/// At least three identical consecutive characters (`soooo`, `NANANANA` does
/// not qualify by itself; `!!!` does).
pub fn has_char_run(form: &str, min_run: usize) -> bool {
    let mut prev = None;
    let mut run = 0;
    for c in form.chars() {
        if Some(c) == prev {
            run += 1;
        } else {
            prev = Some(c);
            run = 1;
        }
        if run >= min_run {
            return true;
        }
    }
    false
}

/// A sequence of length ≥ 2 repeated at least three times, e.g. `NANANANA`,
/// `hahaha`.
pub fn has_repeated_syllable(form: &str) -> bool {
    let chars: Vec<char> = form.chars().flat_map(char::to_lowercase).collect();
    let n = chars.len();
    (2..=3).any(|width| {
        (0..n).any(|start| {
            let reps = (start..n)
                .step_by(width)
                .take_while(|&i| i + width <= n && chars[i..i + width] == chars[start..start + width])
                .count();
            reps >= 3 && chars[start..start + width].iter().any(|c| c.is_alphabetic())
        })
    })
}

/// Elongated spelling: a character tripled, or a short syllable repeated.
pub fn is_elongated(form: &str) -> bool {
    has_char_run(form, 3) || has_repeated_syllable(form)
}

/// Character shape: `X` upper, `x` lower, `d` digit, other characters kept;
/// runs longer than four are cut to four.
pub fn word_shape(form: &str) -> String {
    let mut out = String::new();
    let mut prev = None;
    let mut run = 0;
    for c in form.chars() {
        let s = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_numeric() {
            'd'
        } else {
            c
        };
        if Some(s) == prev {
            run += 1;
        } else {
            prev = Some(s);
            run = 1;
        }
        if run <= 4 {
            out.push(s);
        }
    }
    out
}

pub fn is_all_caps(form: &str) -> bool {
    form.chars().any(char::is_alphabetic)
        && form.chars().filter(|c| c.is_alphabetic()).all(char::is_uppercase)
}

fn simple_map(c: char, upper: bool) -> char {
    let mut mapped = if upper {
        c.to_uppercase().collect::<Vec<_>>()
    } else {
        c.to_lowercase().collect::<Vec<_>>()
    };
    // Multi-character expansions (ß -> SS) have no simple mapping.
    if mapped.len() == 1 {
        mapped.pop().unwrap()
    } else {
        c
    }
}

/// Lowercases with one-to-one character mapping.
pub fn lowercase_simple(form: &str) -> String {
    form.chars().map(|c| simple_map(c, false)).collect()
}

/// Uppercases the first character, leaving the rest unchanged.
pub fn capitalize_first(form: &str) -> String {
    let mut chars = form.chars();
    match chars.next() {
        Some(first) => {
            let mut out = String::with_capacity(form.len());
            out.push(simple_map(first, true));
            out.extend(chars);
            out
        }
        None => String::new(),
    }
}
