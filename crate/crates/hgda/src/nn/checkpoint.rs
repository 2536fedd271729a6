//! Single-file JSON parameter checkpoints:
//! `{"tensors": {name: {"shape": [r, c], "values": [...]}}, "adam": {...},
//! "epoch": n, "seed": s}` — values row-major, names sorted.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::adam::AdamState;
use crate::mat::Mat;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid checkpoint {path}: {msg}")]
    Invalid { path: String, msg: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    shape: [usize; 2],
    values: Vec<f64>,
}

impl TensorEntry {
    fn from_mat(m: &Mat) -> Self {
        TensorEntry {
            shape: [m.rows(), m.cols()],
            values: m.as_slice().to_vec(),
        }
    }

    fn into_mat(self, path: &str, name: &str) -> Result<Mat, CheckpointError> {
        if self.values.len() != self.shape[0] * self.shape[1] {
            return Err(CheckpointError::Invalid {
                path: path.to_string(),
                msg: format!(
                    "tensor {name}: {} values for shape {:?}",
                    self.values.len(),
                    self.shape
                ),
            });
        }
        Ok(Mat::from_vec(self.shape[0], self.shape[1], self.values))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AdamEntry {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    step: u64,
    m: BTreeMap<String, TensorEntry>,
    v: BTreeMap<String, TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    tensors: BTreeMap<String, TensorEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    adam: Option<AdamEntry>,
    epoch: usize,
    seed: u64,
}

/// A loaded checkpoint: named tensors plus name-keyed optimizer moments.
#[derive(Debug)]
pub struct Checkpoint {
    pub tensors: BTreeMap<String, Mat>,
    adam: Option<LoadedAdam>,
    pub epoch: usize,
    pub seed: u64,
}

#[derive(Debug)]
struct LoadedAdam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    step: u64,
    m: BTreeMap<String, Mat>,
    v: BTreeMap<String, Mat>,
}

impl Checkpoint {
    pub fn has_adam(&self) -> bool {
        self.adam.is_some()
    }

    /// Optimizer state with moments aligned to `order` (the consumer's
    /// parameter order). `None` if the checkpoint carried no state.
    pub fn adam_state_for(&self, order: &[String]) -> Option<AdamState> {
        let a = self.adam.as_ref()?;
        let mut m = Vec::with_capacity(order.len());
        let mut v = Vec::with_capacity(order.len());
        for name in order {
            m.push(a.m.get(name)?.clone());
            v.push(a.v.get(name)?.clone());
        }
        Some(AdamState {
            lr: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
            weight_decay: a.weight_decay,
            step: a.step,
            m,
            v,
        })
    }
}

/// Write a checkpoint. `named` pairs parameter names with values, in the
/// model's parameter order; the same order applies to the Adam moments.
pub fn save(
    path: impl AsRef<Path>,
    named: &[(String, &Mat)],
    adam: Option<&AdamState>,
    epoch: usize,
    seed: u64,
) -> Result<(), CheckpointError> {
    let path = path.as_ref();
    let tensors: BTreeMap<String, TensorEntry> = named
        .iter()
        .map(|(n, m)| (n.clone(), TensorEntry::from_mat(m)))
        .collect();
    let adam = adam.map(|a| AdamEntry {
        lr: a.lr,
        beta1: a.beta1,
        beta2: a.beta2,
        eps: a.eps,
        weight_decay: a.weight_decay,
        step: a.step,
        m: named
            .iter()
            .zip(&a.m)
            .map(|((n, _), m)| (n.clone(), TensorEntry::from_mat(m)))
            .collect(),
        v: named
            .iter()
            .zip(&a.v)
            .map(|((n, _), v)| (n.clone(), TensorEntry::from_mat(v)))
            .collect(),
    });
    let file = CheckpointFile {
        tensors,
        adam,
        epoch,
        seed,
    };
    let body = serde_json::to_string_pretty(&file).expect("checkpoint serializes") + "\n";
    fs::write(path, body).map_err(|e| CheckpointError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Read a checkpoint back. Adam moments are re-ordered by the sorted tensor
/// names, matching how [`save`] wrote them.
pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint, CheckpointError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let raw = fs::read_to_string(path).map_err(|e| CheckpointError::Io {
        path: display.clone(),
        source: e,
    })?;
    let file: CheckpointFile =
        serde_json::from_str(&raw).map_err(|e| CheckpointError::Invalid {
            path: display.clone(),
            msg: e.to_string(),
        })?;
    let mut tensors = BTreeMap::new();
    for (name, entry) in file.tensors {
        let mat = entry.into_mat(&display, &name)?;
        tensors.insert(name, mat);
    }
    let adam = match file.adam {
        None => None,
        Some(a) => {
            let mut m = BTreeMap::new();
            let mut v = BTreeMap::new();
            for name in tensors.keys() {
                let me = a.m.get(name).cloned().ok_or_else(|| CheckpointError::Invalid {
                    path: display.clone(),
                    msg: format!("adam state missing first moment for {name}"),
                })?;
                let ve = a.v.get(name).cloned().ok_or_else(|| CheckpointError::Invalid {
                    path: display.clone(),
                    msg: format!("adam state missing second moment for {name}"),
                })?;
                m.insert(name.clone(), me.into_mat(&display, name)?);
                v.insert(name.clone(), ve.into_mat(&display, name)?);
            }
            Some(LoadedAdam {
                lr: a.lr,
                beta1: a.beta1,
                beta2: a.beta2,
                eps: a.eps,
                weight_decay: a.weight_decay,
                step: a.step,
                m,
                v,
            })
        }
    };
    Ok(Checkpoint {
        tensors,
        adam,
        epoch: file.epoch,
        seed: file.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        let w = Mat::from_rows(&[vec![1.5, -2.25], vec![0.125, 3.0]]);
        let b = Mat::from_rows(&[vec![0.0, 1.0]]);
        let mut adam = AdamState::new(1e-3, 1e-4, &[(2, 2), (1, 2)]);
        adam.step(
            &mut [&mut w.clone(), &mut b.clone()],
            &[Mat::filled(2, 2, 1.0), Mat::filled(1, 2, -1.0)],
        );
        save(
            &path,
            &[("clf.W".into(), &w), ("clf.b".into(), &b)],
            Some(&adam),
            7,
            42,
        )
        .unwrap();
        let ck = load(&path).unwrap();
        assert_eq!(ck.epoch, 7);
        assert_eq!(ck.seed, 42);
        assert_eq!(ck.tensors["clf.W"], w);
        assert_eq!(ck.tensors["clf.b"], b);
        let loaded = ck
            .adam_state_for(&["clf.W".to_string(), "clf.b".to_string()])
            .unwrap();
        assert_eq!(loaded.step, 1);
        assert_eq!(loaded.m, adam.m);
        assert_eq!(loaded.v, adam.v);
    }

    #[test]
    fn sorted_names_match_moment_order() {
        // Names are stored sorted; "alpha.L" < "clf.W" regardless of the
        // registration order passed to save.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        let a = Mat::scalar(1.0);
        let b = Mat::scalar(2.0);
        let adam = AdamState::new(1e-3, 0.0, &[(1, 1), (1, 1)]);
        save(
            &path,
            &[("clf.W".into(), &b), ("alpha.L".into(), &a)],
            Some(&adam),
            0,
            0,
        )
        .unwrap();
        let ck = load(&path).unwrap();
        let names: Vec<&String> = ck.tensors.keys().collect();
        assert_eq!(names, ["alpha.L", "clf.W"]);
    }
}
