//! `SQM1` model files.
//!
//! ```text
//! magic        4 bytes  "SQM1"
//! kind         u8       1 = MLP, 2 = attention RNN
//! MLP:         u8 activation (0 relu, 1 tanh), u32 layer count, u32 dims...
//! RNN:         u32 input_dim, u32 hidden_dim, u32 attention_dim
//! param count  u64
//! params       f64 each, in `Parameters::param_slices` order
//! ```
//! All integers and floats are little-endian.

use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::params::Parameters;
use crate::nn::{Activation, Architecture, MlpModel, RnnAttentionModel};

pub const MODEL_MAGIC: &[u8; 4] = b"SQM1";
const KIND_MLP: u8 = 1;
const KIND_RNN: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Mlp(MlpModel),
    Rnn(RnnAttentionModel),
}

fn put_params(out: &mut Vec<u8>, model: &impl Parameters) {
    out.extend_from_slice(&(model.num_params() as u64).to_le_bytes());
    out.extend_from_slice(&model.param_bytes());
}

pub fn encode_mlp(model: &MlpModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + model.num_params() * 8);
    out.extend_from_slice(MODEL_MAGIC);
    out.push(KIND_MLP);
    out.push(match model.activation() {
        Activation::Relu => 0,
        Activation::Tanh => 1,
    });
    out.extend_from_slice(&(model.layer_dims().len() as u32).to_le_bytes());
    for &d in model.layer_dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    put_params(&mut out, model);
    out
}

pub fn encode_rnn(model: &RnnAttentionModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + model.num_params() * 8);
    out.extend_from_slice(MODEL_MAGIC);
    out.push(KIND_RNN);
    for d in [model.input_dim(), model.hidden_dim(), model.attention_dim()] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    put_params(&mut out, model);
    out
}

impl AnyModel {
    pub fn encode(&self) -> Vec<u8> {
        match self {
            AnyModel::Mlp(m) => encode_mlp(m),
            AnyModel::Rnn(m) => encode_rnn(m),
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format(format!(
                "truncated: wanted {n} bytes at offset {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn fill_params(&mut self, model: &mut impl Parameters) -> Result<()> {
        let count = self.u64()? as usize;
        if count != model.num_params() {
            return Err(Error::Format(format!(
                "header declares {count} parameters, architecture has {}",
                model.num_params()
            )));
        }
        for slice in model.param_slices_mut() {
            for v in slice.iter_mut() {
                *v = f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
            }
        }
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<AnyModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MODEL_MAGIC {
        return Err(Error::Format("bad magic, expected SQM1".into()));
    }
    match r.u8()? {
        KIND_MLP => {
            let activation = match r.u8()? {
                0 => Activation::Relu,
                1 => Activation::Tanh,
                other => return Err(Error::Format(format!("unknown activation tag {other}"))),
            };
            let n = r.u32()? as usize;
            if n > 64 {
                return Err(Error::Format(format!("implausible layer count {n}")));
            }
            let dims = (0..n).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let mut model = MlpModel::new(Architecture::new(dims, activation), 0)
                .map_err(|e| Error::Format(e.to_string()))?;
            r.fill_params(&mut model)?;
            Ok(AnyModel::Mlp(model))
        }
        KIND_RNN => {
            let (i, h, a) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
            let mut model = RnnAttentionModel::new(i, h, a, 0).map_err(|e| Error::Format(e.to_string()))?;
            r.fill_params(&mut model)?;
            Ok(AnyModel::Rnn(model))
        }
        other => Err(Error::Format(format!("unknown model kind {other}"))),
    }
}

pub fn decode_mlp(bytes: &[u8]) -> Result<MlpModel> {
    match decode_model(bytes)? {
        AnyModel::Mlp(m) => Ok(m),
        AnyModel::Rnn(_) => Err(Error::Format("expected an MLP, found an RNN".into())),
    }
}

pub fn decode_rnn(bytes: &[u8]) -> Result<RnnAttentionModel> {
    match decode_model(bytes)? {
        AnyModel::Rnn(m) => Ok(m),
        AnyModel::Mlp(_) => Err(Error::Format("expected an RNN, found an MLP".into())),
    }
}

pub fn read_model(path: &Path) -> Result<AnyModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn mlp_round_trip_is_bit_exact(
            dims in prop::collection::vec(1usize..9, 2..5),
            seed in any::<u64>(),
            tanh in any::<bool>(),
        ) {
            let act = if tanh { Activation::Tanh } else { Activation::Relu };
            let model = MlpModel::new(Architecture::new(dims, act), seed).unwrap();
            let bytes = encode_mlp(&model);
            let back = decode_mlp(&bytes).unwrap();
            prop_assert_eq!(encode_mlp(&back), bytes);
            prop_assert_eq!(back, model);
        }

        #[test]
        fn rnn_round_trip_is_bit_exact(i in 1usize..6, h in 1usize..9, a in 1usize..9, seed in any::<u64>()) {
            let model = RnnAttentionModel::new(i, h, a, seed).unwrap();
            let bytes = encode_rnn(&model);
            prop_assert_eq!(decode_rnn(&bytes).unwrap(), model);
        }
    }

    #[test]
    fn corrupt_headers_are_rejected() {
        let model = MlpModel::new(Architecture::new(vec![3, 2], Activation::Relu), 1).unwrap();
        let bytes = encode_mlp(&model);
        assert!(decode_model(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_model(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(decode_model(&extra).is_err());
    }
}
