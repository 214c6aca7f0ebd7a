use serde::{Deserialize, Serialize};

/// Sliding token windows over whitespace tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChunkPolicy {
    pub max_tokens: usize,
    pub overlap: usize,
}

impl Default for ChunkPolicy {
    fn default() -> Self {
        Self {
            max_tokens: 512,
            overlap: 64,
        }
    }
}

impl ChunkPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_tokens == 0 || self.overlap >= self.max_tokens {
            return Err(format!(
                "chunk policy needs 0 <= overlap < max_tokens, got {}/{}",
                self.overlap, self.max_tokens
            ));
        }
        Ok(())
    }

    fn stride(&self) -> usize {
        self.max_tokens - self.overlap
    }

    /// Splits `text` into chunks joined by single spaces. The last window
    /// ends at the final token; no window is entirely contained in the
    /// previous one.
    pub fn split(&self, text: &str) -> Vec<String> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let mut out = Vec::new();
        let mut start = 0;
        while start < tokens.len() {
            let end = (start + self.max_tokens).min(tokens.len());
            out.push(tokens[start..end].join(" "));
            if end == tokens.len() {
                break;
            }
            start += self.stride();
        }
        out
    }
}
