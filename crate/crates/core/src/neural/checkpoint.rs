use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{ModelConfig, ModelParams};
use super::tensor::{NamedTensor, Tensor};
use crate::codec::{check_schema, read_json, write_json, SCHEMA_VERSION};
use crate::dataset::Vocab;
use crate::error::{Error, Result};
use crate::featurizer::Standardizer;
use crate::scalar::Scalar;

/// How a checkpoint was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub config_digest: String,
    /// Outer fold index, or `None` for a model trained on all data.
    pub fold: Option<usize>,
    pub best_epoch: usize,
    pub best_validation_loss: Option<f64>,
}

/// Everything needed to run a trained model on new features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub vocab: Vocab,
    pub config: ModelConfig,
    pub standardizer: Standardizer,
    pub training: TrainingInfo,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn new<T: Scalar>(
        params: &ModelParams<T>,
        vocab: Vocab,
        standardizer: Standardizer,
        training: TrainingInfo,
    ) -> Result<Self> {
        if params.vocab_size() != vocab.len() {
            return Err(Error::Shape(format!(
                "model has {} output words but the vocabulary has {}",
                params.vocab_size(),
                vocab.len()
            )));
        }
        if let Some(name) = params.first_non_finite() {
            return Err(Error::NonFinite(name));
        }
        let tensors = params
            .tensors()
            .into_iter()
            .map(|(name, t)| NamedTensor {
                name,
                shape: t.shape().to_vec(),
                data: t.data().iter().map(|v| v.as_f64()).collect(),
            })
            .collect();
        Ok(Checkpoint {
            schema_version: SCHEMA_VERSION,
            vocab,
            config: params.config.clone(),
            standardizer,
            training,
            tensors,
        })
    }

    /// Rebuilds the parameters, checking every name and shape.
    pub fn params<T: Scalar>(&self) -> Result<ModelParams<T>> {
        check_schema(self.schema_version, "checkpoint")?;
        let mut p = ModelParams::<T>::zeros(&self.config, self.vocab.len())?;
        let slots = p.tensors_mut();
        if slots.len() != self.tensors.len() {
            return Err(Error::Schema(format!(
                "checkpoint has {} tensors, model expects {}",
                self.tensors.len(),
                slots.len()
            )));
        }
        for ((name, slot), nt) in slots.into_iter().zip(&self.tensors) {
            if nt.name != name || nt.shape != slot.shape() {
                return Err(Error::Schema(format!(
                    "tensor `{}` {:?} does not match expected `{name}` {:?}",
                    nt.name,
                    nt.shape,
                    slot.shape()
                )));
            }
            if nt.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Schema(format!("tensor `{name}` holds non-finite values")));
            }
            *slot = Tensor::from_vec(&nt.shape, nt.data.iter().map(|&v| T::of(v)).collect())?;
        }
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck: Checkpoint = read_json(path)?;
        ck.params::<f64>()?;
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn fixture() -> (ModelParams<f64>, Vocab) {
        let vocab = Vocab::build(["robot moved", "robot failed"]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = ModelParams::init(&ModelConfig::compact(3, 2, 2), vocab.len(), &mut rng).unwrap();
        (p, vocab)
    }

    fn info() -> TrainingInfo {
        TrainingInfo {
            config_digest: "abc".into(),
            fold: Some(0),
            best_epoch: 3,
            best_validation_loss: Some(0.5),
        }
    }

    #[test]
    fn round_trips_through_disk() {
        let (p, vocab) = fixture();
        let ck = Checkpoint::new(&p, vocab, Standardizer::default(), info()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.params::<f64>().unwrap(), p);
    }

    #[test]
    fn rejects_wrong_shapes() {
        let (p, vocab) = fixture();
        let mut ck = Checkpoint::new(&p, vocab, Standardizer::default(), info()).unwrap();
        ck.tensors[3].shape = vec![1, 1];
        assert!(matches!(ck.params::<f64>(), Err(Error::Schema(_))));
        ck.tensors.pop();
        assert!(ck.params::<f64>().is_err());
    }
}
