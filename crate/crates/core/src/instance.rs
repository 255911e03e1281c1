//! Rank-one perturbation instances `A(u, v) = M + u vᵀ` and their JSON
//! file format:
//!
//! ```json
//! { "n": 6, "m": [row-major reals], "u": [reals], "v": [reals] }
//! ```
//!
//! `u` and `v` may be omitted on read (zero vectors), which lets a plain
//! base matrix be stored in the same format.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::minors;

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    m: Matrix,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl Instance {
    pub fn new(m: Matrix, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let n = m.n();
        for vec in [&u, &v] {
            if vec.len() != n {
                return Err(Error::DimensionMismatch(vec.len(), n));
            }
            if let Some(pos) = vec.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite(pos));
            }
        }
        Ok(Self { m, u, v })
    }

    /// Like [`Instance::new`], additionally requiring `m` to be a P-matrix.
    pub fn new_checked(m: Matrix, u: Vec<f64>, v: Vec<f64>, tau: f64) -> Result<Self> {
        let inst = Self::new(m, u, v)?;
        let report = minors::violation_set(&inst.m, tau)?;
        if !report.violations.is_empty() {
            let first = &report.violations[0];
            return Err(Error::NotPMatrix { subset: first.alpha.to_string(), value: first.value });
        }
        Ok(inst)
    }

    pub fn unperturbed(m: Matrix) -> Self {
        let n = m.n();
        Self { m, u: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn n(&self) -> usize {
        self.m.n()
    }

    pub fn m(&self) -> &Matrix {
        &self.m
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    /// `M + u vᵀ`.
    pub fn perturbed(&self) -> Matrix {
        self.m
            .add_outer(&self.u, &self.v)
            .expect("instance invariants guarantee conformal finite data")
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            n: self.n(),
            m: self.m.as_slice().to_vec(),
            u: Some(self.u.clone()),
            v: Some(self.v.clone()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<InstanceFile>(s)?.into_instance()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = self.to_json()?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }
}

/// `M + u vᵀ` for an instance.
pub fn apply_perturbation(inst: &Instance) -> Matrix {
    inst.perturbed()
}

/// On-disk layout.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub n: usize,
    pub m: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<Instance> {
        let m = Matrix::new(self.n, self.m)?;
        let n = self.n;
        Instance::new(m, self.u.unwrap_or_else(|| vec![0.0; n]), self.v.unwrap_or_else(|| vec![0.0; n]))
    }
}
