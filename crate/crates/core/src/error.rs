use thiserror::Error;

/// A parameter or input that violates a documented invariant.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{field}: {reason}")]
pub struct ConfigError {
    /// Dotted path of the offending field, relative to the block that was
    /// validated. Callers prepend their own block name with [`ConfigError::within`].
    pub field: String,
    pub reason: String,
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Prefixes the field path with `block`.
    pub fn within(mut self, block: &str) -> Self {
        self.field = if self.field.is_empty() {
            block.to_string()
        } else {
            format!("{block}.{}", self.field)
        };
        self
    }
}
