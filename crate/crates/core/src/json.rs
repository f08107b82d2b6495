//! JSON schemas for operators, channels, decoupling instances and coding
//! tasks.
//!
//! Operator JSON: `{ "labels": [..], "dims": [..], "re": [[..]], "im": [[..]] }`
//! with row-major matrices in the crate's lexicographic basis convention.

use crate::channel::Channel;
use crate::decoupling::{DecouplingInstance, EnsembleInstance};
use crate::density::DensityOp;
use crate::error::{Error, Result};
use crate::op::{CMatrix, Op};
use crate::system::SystemSpec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A complex matrix as separate real and imaginary row-major grids.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let rows = m.nrows();
        let cols = m.ncols();
        let mut re = vec![vec![0.0; cols]; rows];
        let mut im = vec![vec![0.0; cols]; rows];
        for r in 0..rows {
            for c in 0..cols {
                re[r][c] = m[(r, c)].re;
                im[r][c] = m[(r, c)].im;
            }
        }
        MatrixJson { re, im }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let rows = self.re.len();
        if rows == 0 {
            return Err(Error::InvalidArgument("empty matrix".into()));
        }
        let cols = self.re[0].len();
        if self.im.len() != rows {
            return Err(Error::InvalidArgument(format!(
                "re has {rows} rows, im has {}",
                self.im.len()
            )));
        }
        let mut m = CMatrix::zeros(rows, cols);
        for r in 0..rows {
            if self.re[r].len() != cols || self.im[r].len() != cols {
                return Err(Error::InvalidArgument(format!("ragged matrix row {r}")));
            }
            for c in 0..cols {
                m[(r, c)] = Complex64::new(self.re[r][c], self.im[r][c]);
            }
        }
        Ok(m)
    }
}

/// Labeled operator: spec plus matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorJson {
    pub labels: Vec<String>,
    pub dims: Vec<usize>,
    #[serde(flatten)]
    pub matrix: MatrixJson,
}

impl OperatorJson {
    pub fn from_op(op: &Op) -> Self {
        OperatorJson {
            labels: op.spec().labels().to_vec(),
            dims: op.spec().dims().to_vec(),
            matrix: MatrixJson::from_matrix(op.matrix()),
        }
    }

    pub fn to_op(&self) -> Result<Op> {
        if self.labels.len() != self.dims.len() {
            return Err(Error::InvalidArgument(format!(
                "{} labels but {} dims",
                self.labels.len(),
                self.dims.len()
            )));
        }
        let spec = SystemSpec::new(self.labels.iter().cloned().zip(self.dims.iter().copied()))?;
        Op::new(spec, self.matrix.to_matrix()?)
    }

    /// Parse and enforce the density-operator invariants.
    pub fn to_density(&self) -> Result<DensityOp> {
        DensityOp::new(self.to_op()?)
    }
}

/// System spec as parallel label/dim lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemSpecJson {
    pub labels: Vec<String>,
    pub dims: Vec<usize>,
}

impl SystemSpecJson {
    pub fn from_spec(spec: &SystemSpec) -> Self {
        SystemSpecJson {
            labels: spec.labels().to_vec(),
            dims: spec.dims().to_vec(),
        }
    }

    pub fn to_spec(&self) -> Result<SystemSpec> {
        SystemSpec::new(self.labels.iter().cloned().zip(self.dims.iter().copied()))
    }
}

/// Channel JSON: `{ "in": spec, "out": spec, "kraus": [matrix, ..] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelJson {
    #[serde(rename = "in")]
    pub in_spec: SystemSpecJson,
    #[serde(rename = "out")]
    pub out_spec: SystemSpecJson,
    pub kraus: Vec<MatrixJson>,
}

impl ChannelJson {
    pub fn from_channel(t: &Channel) -> Self {
        ChannelJson {
            in_spec: SystemSpecJson::from_spec(t.in_spec()),
            out_spec: SystemSpecJson::from_spec(t.out_spec()),
            kraus: t.kraus().iter().map(MatrixJson::from_matrix).collect(),
        }
    }

    pub fn to_channel(&self) -> Result<Channel> {
        let kraus = self
            .kraus
            .iter()
            .map(|k| k.to_matrix())
            .collect::<Result<Vec<_>>>()?;
        Channel::new(self.in_spec.to_spec()?, self.out_spec.to_spec()?, kraus)
    }
}

/// A decoupling task: a `(state, channel)` pair, a bare four-party joint
/// state, or a weighted ensemble of pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceJson {
    Pair {
        rho: OperatorJson,
        channel: ChannelJson,
    },
    Joint {
        tau: OperatorJson,
    },
    Ensemble {
        weights: Vec<f64>,
        pairs: Vec<PairJson>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairJson {
    pub rho: OperatorJson,
    pub channel: ChannelJson,
}

impl InstanceJson {
    pub fn to_pair(&self) -> Result<DecouplingInstance> {
        match self {
            InstanceJson::Pair { rho, channel } => {
                DecouplingInstance::new(rho.to_density()?, channel.to_channel()?)
            }
            _ => Err(Error::InvalidArgument(
                "expected a { rho, channel } instance".into(),
            )),
        }
    }

    pub fn to_joint(&self) -> Result<crate::decoupling::JointInstance> {
        match self {
            InstanceJson::Pair { .. } => Ok(self.to_pair()?.joint()),
            InstanceJson::Joint { tau } => crate::decoupling::JointInstance::new(tau.to_density()?),
            InstanceJson::Ensemble { .. } => self.to_ensemble()?.joint(),
        }
    }

    pub fn to_ensemble(&self) -> Result<EnsembleInstance> {
        match self {
            InstanceJson::Ensemble { weights, pairs } => {
                let parts = pairs
                    .iter()
                    .map(|p| DecouplingInstance::new(p.rho.to_density()?, p.channel.to_channel()?))
                    .collect::<Result<Vec<_>>>()?;
                EnsembleInstance::new(weights.clone(), parts)
            }
            _ => Err(Error::InvalidArgument(
                "expected an ensemble instance".into(),
            )),
        }
    }
}

/// Coding task: channel, pure test state, and the rate pair in bits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodingTaskJson {
    pub channel: ChannelJson,
    pub sigma: OperatorJson,
    #[serde(rename = "Q_bits")]
    pub q_bits: f64,
    #[serde(rename = "E_bits")]
    pub e_bits: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::rand_density;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn operator_roundtrip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(121);
        let rho = rand_density("A", 3, &mut rng);
        let json = OperatorJson::from_op(rho.op());
        let text = serde_json::to_string(&json).unwrap();
        let back: OperatorJson = serde_json::from_str(&text).unwrap();
        let op = back.to_op().unwrap();
        // serde_json prints f64 losslessly, so the round trip is bit exact
        assert!(op.max_abs_diff(rho.op()) == 0.0);
    }

    #[test]
    fn channel_roundtrip() {
        let t = Channel::depolarizing(SystemSpec::single("A", 2).unwrap());
        let json = ChannelJson::from_channel(&t);
        let text = serde_json::to_string(&json).unwrap();
        let back: ChannelJson = serde_json::from_str(&text).unwrap();
        let t2 = back.to_channel().unwrap();
        assert_eq!(t2.kraus().len(), t.kraus().len());
        assert_eq!(t2.in_spec(), t.in_spec());
    }

    #[test]
    fn instance_variants_parse() {
        let rho = DensityOp::max_entangled_pair("A", "E", 2).unwrap();
        let t = Channel::identity(SystemSpec::single("A", 2).unwrap());
        let pair = InstanceJson::Pair {
            rho: OperatorJson::from_op(rho.op()),
            channel: ChannelJson::from_channel(&t),
        };
        let text = serde_json::to_string(&pair).unwrap();
        let parsed: InstanceJson = serde_json::from_str(&text).unwrap();
        assert!(parsed.to_pair().is_ok());
        assert!(parsed.to_joint().is_ok());
        assert!(parsed.to_ensemble().is_err());
    }

    #[test]
    fn invalid_density_is_rejected_at_load() {
        let spec = SystemSpec::single("A", 2).unwrap();
        let not_normalized = Op::identity(spec);
        let json = OperatorJson::from_op(&not_normalized);
        assert!(matches!(json.to_density(), Err(Error::TraceNotOne(_))));
    }
}
