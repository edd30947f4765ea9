//! The JSON chain-file format consumed by the CLI:
//! `{"labels": [...], "P": [[...], ...], "f": [...]}` with `f` optional.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::markov::{Observable, TransitionMatrix};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainFile {
    pub labels: Vec<String>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(default)]
    pub f: Option<Vec<f64>>,
}

impl ChainFile {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Validates and builds the kernel and optional observable.
    pub fn build(self) -> Result<(TransitionMatrix, Option<Observable>)> {
        let matrix = TransitionMatrix::new(self.p, self.labels)?;
        let f = self.f.map(Observable::new).transpose()?;
        Ok((matrix, f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_builds() {
        let text = r#"{"labels": ["a", "b"], "P": [[0.5, 0.5], [0.4, 0.6]], "f": [-1.0, 1.0]}"#;
        let file = ChainFile::from_json(text).unwrap();
        let (m, f) = file.build().unwrap();
        assert_eq!(m.n_states(), 2);
        assert_eq!(f.unwrap().values(), &[-1.0, 1.0]);
    }

    #[test]
    fn optional_f() {
        let text = r#"{"labels": ["a"], "P": [[1.0]]}"#;
        let (_, f) = ChainFile::from_json(text).unwrap().build().unwrap();
        assert!(f.is_none());
    }

    #[test]
    fn invalid_matrix_surfaces_build_error() {
        let text = r#"{"labels": ["a", "b"], "P": [[0.7, 0.4], [0.5, 0.5]]}"#;
        assert!(ChainFile::from_json(text).unwrap().build().is_err());
    }
}
