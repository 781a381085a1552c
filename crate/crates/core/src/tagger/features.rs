use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::text;

pub const START: &str = "<S>";
pub const END: &str = "</S>";

/// Feature keys for one token position. Every key is `template=value`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSet {
    keys: Vec<String>,
}

impl FeatureSet {
    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn contains(&self, key: &str) -> bool {
        self.keys.iter().any(|k| k == key)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

/// Coarse token class: emoticon, number, punctuation, casing, elongation.
pub fn token_class(form: &str) -> &'static str {
    if text::is_emoticon(form) {
        "emo"
    } else if form.chars().any(|c| c.is_ascii_digit())
        && form.chars().all(|c| c.is_ascii_digit() || ".,:/-".contains(c))
    {
        "num"
    } else if form.chars().all(|c| !c.is_alphanumeric()) {
        "punct"
    } else if text::is_elongated(form) {
        "elong"
    } else if form.chars().count() > 1 && text::is_all_caps(form) {
        "allcaps"
    } else if form.chars().next().is_some_and(char::is_uppercase) {
        "title"
    } else if form.chars().any(|c| c.is_ascii_digit()) {
        "alnum"
    } else {
        "lower"
    }
}

fn shape_value(form: &str) -> String {
    if text::is_emoticon(form) {
        "punct-emo".to_string()
    } else {
        text::word_shape(form)
    }
}

/// Extracts the fixed template inventory for position `index`.
///
/// `history` holds the predicted tags of positions `0..index`.
pub fn extract_features(sentence: &Sentence, index: usize, history: &[String]) -> Result<FeatureSet> {
    let n = sentence.len();
    if index >= n {
        return Err(Error::Feature(format!(
            "index {index} out of range for sentence of length {n}"
        )));
    }
    if history.len() != index {
        return Err(Error::Feature(format!(
            "history has {} tags, expected {index}",
            history.len()
        )));
    }
    let form = sentence.tokens[index].form.as_str();
    let word_at = |offset: isize| -> &str {
        let i = index as isize + offset;
        if i < 0 {
            START
        } else if i as usize >= n {
            END
        } else {
            &sentence.tokens[i as usize].form
        }
    };
    let tag_at = |back: usize| -> &str {
        if back > index {
            START
        } else {
            &history[index - back]
        }
    };

    let chars: Vec<char> = form.chars().collect();
    let mut keys = Vec::with_capacity(28);
    keys.push("bias".to_string());
    keys.push(format!("word={form}"));
    keys.push(format!("lower={}", text::lowercase_simple(form)));
    keys.push(format!("shape={}", shape_value(form)));
    keys.push(format!("class={}", token_class(form)));
    for k in 1..=4.min(chars.len()) {
        keys.push(format!("pre{k}={}", chars[..k].iter().collect::<String>()));
        keys.push(format!("suf{k}={}", chars[chars.len() - k..].iter().collect::<String>()));
    }
    keys.push(format!("prevword={}", word_at(-1)));
    keys.push(format!("prev2word={}", word_at(-2)));
    keys.push(format!("nextword={}", word_at(1)));
    keys.push(format!("next2word={}", word_at(2)));
    keys.push(format!("nextshape={}", {
        let w = word_at(1);
        if w == END { END.to_string() } else { shape_value(w) }
    }));
    let (t1, t2) = (tag_at(1), tag_at(2));
    keys.push(format!("prevtag={t1}"));
    keys.push(format!("prev2tag={t2}"));
    keys.push(format!("prevtags={t2}|{t1}"));
    keys.push(format!("prevtag+word={t1}|{form}"));
    Ok(FeatureSet { keys })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Token;

    fn sentence(forms: &[&str]) -> Sentence {
        Sentence::new("d", "s", forms.iter().map(|f| Token::new(*f, "X")).collect())
    }

    #[test]
    fn first_position_templates() {
        let s = sentence(&["love", "when", "I", "see"]);
        let f = extract_features(&s, 0, &[]).unwrap();
        for key in ["word=love", "prevword=<S>", "suf3=ove", "shape=xxxx", "prevtag=<S>", "nextword=when"] {
            assert!(f.contains(key), "missing {key}: {:?}", f.keys());
        }
        assert!(f.keys().iter().all(|k| k == "bias" || k.contains('=')));
    }

    #[test]
    fn emoticon_shape() {
        let s = sentence(&["FN", ":)"]);
        let f = extract_features(&s, 1, &["NNP".into()]).unwrap();
        assert!(f.contains("shape=punct-emo"));
        assert!(f.contains("class=emo"));
        assert!(f.contains("prevtag=NNP"));
        assert!(f.contains("prev2tag=<S>"));
        assert!(f.contains("nextword=</S>"));
    }

    #[test]
    fn deterministic() {
        let s = sentence(&["Boo", "into", "The", "Wild"]);
        let h: Vec<String> = vec!["NNP".into(), "IN".into()];
        assert_eq!(
            extract_features(&s, 2, &h).unwrap(),
            extract_features(&s, 2, &h).unwrap()
        );
    }

    #[test]
    fn out_of_range_and_bad_history() {
        let s = sentence(&["a"]);
        assert!(extract_features(&s, 1, &["DT".into()]).is_err());
        assert!(extract_features(&s, 0, &["DT".into()]).is_err());
    }

    #[test]
    fn affixes_limited_to_word_length() {
        let s = sentence(&["ok"]);
        let f = extract_features(&s, 0, &[]).unwrap();
        assert!(f.contains("suf2=ok") && f.contains("pre1=o"));
        assert!(!f.keys().iter().any(|k| k.starts_with("suf3=")));
    }
}
