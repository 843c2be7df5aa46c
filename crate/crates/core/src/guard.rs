//! Desk-scale caps on enumeration and dynamic-programming sizes.

use crate::error::{Result, StopGameError};

pub const ENV_OVERRIDE: &str = "STOPGAME_GUARD_OVERRIDE";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Guards {
    pub enumeration: u128,
    pub dp_states: u128,
}

impl Default for Guards {
    fn default() -> Self {
        Guards { enumeration: 1_000_000, dp_states: 10_000_000 }
    }
}

impl Guards {
    /// Defaults, overridden by `STOPGAME_GUARD_OVERRIDE`.
    ///
    /// Accepted forms: a single number for both caps, or `enum=N,dp=M` (either part optional).
    pub fn from_env() -> Self {
        match std::env::var(ENV_OVERRIDE) {
            Ok(text) => Guards::parse(&text).unwrap_or_default(),
            Err(_) => Guards::default(),
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        if let Ok(n) = text.parse::<u128>() {
            return Some(Guards { enumeration: n, dp_states: n });
        }
        let mut g = Guards::default();
        for part in text.split(',') {
            let (key, value) = part.split_once('=')?;
            let value = value.trim().parse::<u128>().ok()?;
            match key.trim() {
                "enum" | "enumeration" => g.enumeration = value,
                "dp" | "dp_states" => g.dp_states = value,
                _ => return None,
            }
        }
        Some(g)
    }

    pub fn check_enumeration(&self, what: &'static str, count: u128) -> Result<()> {
        if count > self.enumeration {
            Err(StopGameError::GuardExceeded { what, count, cap: self.enumeration })
        } else {
            Ok(())
        }
    }

    pub fn check_states(&self, what: &'static str, count: u128) -> Result<()> {
        if count > self.dp_states {
            Err(StopGameError::GuardExceeded { what, count, cap: self.dp_states })
        } else {
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(Guards::parse("42"), Some(Guards { enumeration: 42, dp_states: 42 }));
        assert_eq!(Guards::parse("dp=7"), Some(Guards { enumeration: 1_000_000, dp_states: 7 }));
        assert_eq!(Guards::parse("enum=3, dp=9"), Some(Guards { enumeration: 3, dp_states: 9 }));
        assert_eq!(Guards::parse("bogus"), None);
    }

    #[test]
    fn caps_trip() {
        let g = Guards { enumeration: 10, dp_states: 10 };
        assert!(g.check_enumeration("x", 10).is_ok());
        assert!(matches!(g.check_states("x", 11), Err(StopGameError::GuardExceeded { count: 11, .. })));
    }
}
