//! Length measures used for budgets and compression statistics.

use std::fmt;
use std::sync::Arc;

/// Counts length in a chosen unit. Separators inserted when joining units are
/// never counted: lengths of a multi-unit text are sums over its parts.
#[derive(Clone, Default)]
pub enum LengthUnit {
    Characters,
    /// Whitespace-delimited tokens, with every CJK character counted alone.
    #[default]
    WhitespaceTokens,
    /// Delegates to an external tokenizer.
    Callback(Arc<dyn Fn(&str) -> usize + Send + Sync>),
}

impl LengthUnit {
    pub fn measure(&self, text: &str) -> usize {
        match self {
            LengthUnit::Characters => text.chars().count(),
            LengthUnit::WhitespaceTokens => whitespace_cjk_tokens(text),
            LengthUnit::Callback(f) => f(text),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LengthUnit::Characters => "characters",
            LengthUnit::WhitespaceTokens => "whitespace-tokens",
            LengthUnit::Callback(_) => "model-tokens",
        }
    }
}

impl fmt::Debug for LengthUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LengthUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "characters" | "chars" => Ok(LengthUnit::Characters),
            "whitespace-tokens" | "tokens" => Ok(LengthUnit::WhitespaceTokens),
            other => Err(format!("unknown length unit `{other}`")),
        }
    }
}

/// CJK ideographs, kana and hangul syllables.
pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF
        | 0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xAC00..=0xD7AF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2FA1F)
}

fn whitespace_cjk_tokens(text: &str) -> usize {
    let mut count = 0;
    let mut in_word = false;
    for c in text.chars() {
        if c.is_whitespace() {
            in_word = false;
        } else if is_cjk(c) {
            count += 1;
            in_word = false;
        } else if !in_word {
            count += 1;
            in_word = true;
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let unit = LengthUnit::WhitespaceTokens;
        assert_eq!(unit.measure(""), 0);
        assert_eq!(unit.measure("hello world"), 2);
        assert_eq!(unit.measure("hello世界 foo"), 4);
        assert_eq!(unit.measure("  a\n\nb  "), 2);
        assert_eq!(LengthUnit::Characters.measure("世界 a"), 4);
        let cb = LengthUnit::Callback(Arc::new(|s: &str| s.len()));
        assert_eq!(cb.measure("abc"), 3);
    }

    #[test]
    fn joining_with_whitespace_is_additive() {
        let unit = LengthUnit::WhitespaceTokens;
        let parts = ["one two", "三四", "five."];
        let sum: usize = parts.iter().map(|p| unit.measure(p)).sum();
        assert_eq!(unit.measure(&parts.join("\n")), sum);
    }
}
