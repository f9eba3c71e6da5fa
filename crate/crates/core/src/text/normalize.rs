use std::sync::LazyLock;

use regex::Regex;
use unicode_general_category::{get_general_category, GeneralCategory as G};

use super::vocab::NUM;

static NUMERIC: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^[+-]?(?:\d{1,3}(?:,\d{3})+|\d+)?(?:\.\d+)?%?$").expect("valid pattern")
});

/// True when every character is Unicode punctuation or a symbol.
pub fn is_punctuation_only(token: &str) -> bool {
    token.chars().all(|c| {
        matches!(
            get_general_category(c),
            G::ConnectorPunctuation
                | G::DashPunctuation
                | G::OpenPunctuation
                | G::ClosePunctuation
                | G::InitialPunctuation
                | G::FinalPunctuation
                | G::OtherPunctuation
                | G::MathSymbol
                | G::CurrencySymbol
                | G::ModifierSymbol
                | G::OtherSymbol
        )
    })
}

/// Optional sign, digits (optionally grouped by commas), an optional
/// fractional part and an optional trailing percent sign.
pub fn is_numeric(token: &str) -> bool {
    token.chars().any(|c| c.is_ascii_digit()) && NUMERIC.is_match(token)
}

/// Lowercases one token, drops it if it is empty or punctuation-only, and
/// maps numbers to the number sentinel.
pub fn normalize_token(token: &str) -> Option<String> {
    let lower = token.to_lowercase();
    if is_punctuation_only(&lower) {
        None
    } else if is_numeric(&lower) {
        Some(NUM.to_string())
    } else {
        Some(lower)
    }
}

pub fn normalize_tokens<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    tokens
        .iter()
        .filter_map(|t| normalize_token(t.as_ref()))
        .collect()
}
