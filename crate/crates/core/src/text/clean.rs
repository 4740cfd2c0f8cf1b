use std::sync::LazyLock;

use regex::Regex;

static URL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)(?:\b[a-z][a-z0-9+.\-]*://|\bwww\.|\bt\.co/)\S*").expect("url pattern")
});

static TAG_OR_MENTION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[#@][\p{L}\p{N}_]+").expect("tag pattern"));

/// Normalizes raw post text to lowercase ASCII words separated by single spaces.
///
/// Steps, in order: drop URLs, drop `#hashtag` and `@mention` spans, turn any
/// whitespace into a space and delete every other character outside ASCII
/// letters and digits (emoji, non-Latin script, punctuation), lowercase,
/// collapse runs of spaces. The output only contains `[a-z0-9 ]`.
pub fn clean(text: &str) -> String {
    let no_urls = URL.replace_all(text, " ");
    let no_tags = TAG_OR_MENTION.replace_all(&no_urls, " ");
    let filtered: String = no_tags
        .chars()
        .filter_map(|c| {
            if c.is_whitespace() {
                Some(' ')
            } else if c.is_ascii_alphanumeric() {
                Some(c.to_ascii_lowercase())
            } else {
                None
            }
        })
        .collect();
    filtered.split(' ').filter(|w| !w.is_empty()).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_social_markup() {
        assert_eq!(clean("RT @user: help! http://t.co/x #flood 😱"), "rt help");
    }

    #[test]
    fn empty_stays_empty() {
        assert_eq!(clean(""), "");
        assert_eq!(clean("   😱 #tag @who "), "");
    }

    #[test]
    fn plain_sentence_survives() {
        assert_eq!(
            clean("Seek higher ground immediately"),
            "seek higher ground immediately"
        );
    }

    #[test]
    fn url_variants() {
        assert_eq!(clean("see https://example.com/a?b=1 now"), "see now");
        assert_eq!(clean("go www.redcross.org today"), "go today");
        assert_eq!(clean("pic t.co/AbC123 here"), "pic here");
    }

    #[test]
    fn punctuation_is_removed_not_spaced() {
        assert_eq!(clean("Don't panic!!! Flood-warning, now."), "dont panic floodwarning now");
        assert_eq!(clean("line\nbreak\ttab"), "line break tab");
        assert_eq!(clean("Philippine flood fatalities hit 23"), "philippine flood fatalities hit 23");
    }

    #[test]
    fn non_latin_scripts_dropped() {
        assert_eq!(clean("ayuda ÿ 地震 help"), "ayuda help");
    }
}
