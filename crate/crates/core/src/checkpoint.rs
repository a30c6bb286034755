//! Named-tensor checkpoint files.
//!
//! A checkpoint is a JSON object:
//!
//! ```text
//! {
//!   "format": "brainib-checkpoint",
//!   "version": 1,
//!   "tensors": [ { "name": "encoder.gin1.lin1.weight", "shape": [30, 32], "data": [...] }, ... ]
//! }
//! ```
//!
//! `data` is row-major and written in shortest round-trip form, so loading a
//! checkpoint reproduces every value exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const FORMAT: &str = "brainib-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, t: &Tensor) -> Self {
        Self {
            name: name.into(),
            shape: t.shape(),
            data: t.data().to_vec(),
        }
    }

    pub fn to_tensor(&self) -> Result<Tensor> {
        Tensor::from_vec(self.shape[0], self.shape[1], self.data.clone()).map_err(|_| {
            Error::Checkpoint(format!(
                "tensor `{}` has {} values for shape {:?}",
                self.name,
                self.data.len(),
                self.shape
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn new(tensors: Vec<NamedTensor>) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            tensors,
        }
    }

    pub fn get(&self, name: &str) -> Result<Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))?
            .to_tensor()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)
            .map_err(|e| Error::Checkpoint(format!("malformed checkpoint: {e}")))?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    fn validate(&self) -> Result<()> {
        if self.format != FORMAT {
            return Err(Error::Checkpoint(format!(
                "unknown format `{}`",
                self.format
            )));
        }
        if self.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {} (expected {VERSION})",
                self.version
            )));
        }
        for t in &self.tensors {
            t.to_tensor()?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::graph_data::write_file(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
