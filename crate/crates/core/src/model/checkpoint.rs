//! Serializable trained-model state: head weights plus per-layer penalty
//! parameters, with a content hash for reproducible run manifests.

use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::unroll::UnrollParams;

use super::heads::{HeadInput, HeadParams, ModelKind};

/// Version stamp embedded in every checkpoint file.
pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// Trained parameters for one model: linear head plus the raw (log-domain)
/// per-layer penalty parameters of the unrolled solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    /// Output kind name (`"l2gmom"` or `"l2gmom_sr"`).
    pub kind: String,
    /// Which feature matrix the head reads (`"momentum"` or `"lookback"`).
    pub head_input: String,
    pub theta: Vec<f64>,
    pub b: f64,
    pub raw_alpha: Vec<f64>,
    pub raw_beta: Vec<f64>,
    pub raw_gamma: Vec<f64>,
}

impl Checkpoint {
    pub fn new(
        kind: ModelKind,
        head_input: HeadInput,
        head: &HeadParams,
        params: &UnrollParams,
    ) -> Self {
        Checkpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            kind: kind.as_str().to_string(),
            head_input: head_input.as_str().to_string(),
            theta: head.theta.to_vec(),
            b: head.b,
            raw_alpha: params.raw_alpha().to_vec(),
            raw_beta: params.raw_beta().to_vec(),
            raw_gamma: params.raw_gamma().to_vec(),
        }
    }

    pub fn model_kind(&self) -> Result<ModelKind> {
        ModelKind::parse(&self.kind)
    }

    pub fn model_input(&self) -> Result<HeadInput> {
        HeadInput::parse(&self.head_input)
    }

    pub fn head(&self) -> Result<HeadParams> {
        let head = HeadParams { theta: Array1::from_vec(self.theta.clone()), b: self.b };
        head.validate()?;
        Ok(head)
    }

    pub fn unroll(&self) -> Result<UnrollParams> {
        UnrollParams::from_raw(
            Array1::from_vec(self.raw_alpha.clone()),
            Array1::from_vec(self.raw_beta.clone()),
            Array1::from_vec(self.raw_gamma.clone()),
        )
    }

    fn validate(&self) -> Result<()> {
        if self.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::validation(format!(
                "checkpoint schema version {} is not supported (expected {CHECKPOINT_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.model_kind()?;
        self.model_input()?;
        self.head()?;
        self.unroll()?;
        Ok(())
    }

    /// Stable content hash: SHA-256 of the compact JSON encoding.
    pub fn id(&self) -> String {
        let json = serde_json::to_string(self).expect("checkpoint serialization cannot fail");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::validation(format!("checkpoint encode failed: {e}")))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cp: Checkpoint = serde_json::from_str(s)
            .map_err(|e| Error::validation(format!("checkpoint parse failed: {e}")))?;
        cp.validate()?;
        Ok(cp)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

/// A set of identically-shaped checkpoints trained from different seeds;
/// inference averages their outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleCheckpoint {
    pub schema_version: u32,
    pub members: Vec<Checkpoint>,
}

impl EnsembleCheckpoint {
    pub fn new(members: Vec<Checkpoint>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::validation("ensemble checkpoint needs at least one member"));
        }
        let first = &members[0];
        for (i, m) in members.iter().enumerate() {
            m.validate()?;
            if m.kind != first.kind
                || m.head_input != first.head_input
                || m.theta.len() != first.theta.len()
                || m.raw_alpha.len() != first.raw_alpha.len()
            {
                return Err(Error::validation(format!(
                    "ensemble member {i} has a different shape than member 0"
                )));
            }
        }
        Ok(EnsembleCheckpoint { schema_version: CHECKPOINT_SCHEMA_VERSION, members })
    }

    pub fn model_kind(&self) -> Result<ModelKind> {
        self.members[0].model_kind()
    }

    pub fn model_input(&self) -> Result<HeadInput> {
        self.members[0].model_input()
    }

    pub fn id(&self) -> String {
        let json = serde_json::to_string(self).expect("ensemble serialization cannot fail");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::validation(format!("ensemble encode failed: {e}")))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ens: EnsembleCheckpoint = serde_json::from_str(s)
            .map_err(|e| Error::validation(format!("ensemble parse failed: {e}")))?;
        if ens.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::validation(format!(
                "ensemble schema version {} is not supported (expected {CHECKPOINT_SCHEMA_VERSION})",
                ens.schema_version
            )));
        }
        Self::new(ens.members)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sample() -> Checkpoint {
        let head = HeadParams { theta: array![0.5, -0.2, 0.1], b: 0.05 };
        let params = UnrollParams::new(3).unwrap();
        Checkpoint::new(ModelKind::Trend, HeadInput::Momentum, &head, &params)
    }

    #[test]
    fn checkpoint_round_trips_through_json_and_disk() {
        let cp = sample();
        let back = Checkpoint::from_json(&cp.to_json().unwrap()).unwrap();
        assert_eq!(back, cp);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        cp.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded, cp);
        assert_eq!(loaded.id(), cp.id());

        // Reconstructed parameter objects carry the same values.
        let head = loaded.head().unwrap();
        assert_eq!(head.theta, array![0.5, -0.2, 0.1]);
        let params = loaded.unroll().unwrap();
        assert_eq!(params.depth(), 3);
        assert!((params.alpha(0) - 1.0).abs() < 1e-12);
        assert!((params.gamma(2) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn id_changes_with_content() {
        let a = sample();
        let mut b = sample();
        b.b += 1e-9;
        assert_ne!(a.id(), b.id());
        assert_eq!(a.id().len(), 64);
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let mut cp = sample();
        cp.schema_version = 99;
        let json = serde_json::to_string(&cp).unwrap();
        assert!(Checkpoint::from_json(&json).is_err());
    }

    #[test]
    fn malformed_json_is_rejected_as_validation() {
        let err = Checkpoint::from_json("{not json").unwrap_err();
        assert_eq!(err.category(), "validation");
        let mut cp = sample();
        cp.kind = "mystery".into();
        let err = Checkpoint::from_json(&serde_json::to_string(&cp).unwrap()).unwrap_err();
        assert_eq!(err.category(), "validation");
    }

    #[test]
    fn ensemble_requires_consistent_members() {
        let a = sample();
        let mut b = sample();
        b.b = -0.3;
        let ens = EnsembleCheckpoint::new(vec![a.clone(), b]).unwrap();
        assert_eq!(ens.members.len(), 2);
        assert_eq!(ens.model_kind().unwrap(), ModelKind::Trend);

        assert!(EnsembleCheckpoint::new(vec![]).is_err());
        let mut other_kind = sample();
        other_kind.kind = "l2gmom_sr".into();
        assert!(EnsembleCheckpoint::new(vec![a.clone(), other_kind]).is_err());
        let wider = Checkpoint::new(
            ModelKind::Trend,
            HeadInput::Momentum,
            &HeadParams { theta: array![1.0, 2.0], b: 0.0 },
            &UnrollParams::new(3).unwrap(),
        );
        assert!(EnsembleCheckpoint::new(vec![a, wider]).is_err());

        let ens_json = ens.to_json().unwrap();
        let back = EnsembleCheckpoint::from_json(&ens_json).unwrap();
        assert_eq!(back, ens);
    }
}
