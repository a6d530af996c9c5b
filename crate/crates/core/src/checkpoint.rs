//! Binary parameter checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic    16 bytes  "FEDGAN-PARAMS\0\0\0"
//! version   1 byte   = 1
//! layers    u32
//! per layer: out u32, in u32, activation tag u8, activation param f64
//! per layer: weights (out*in f64, row-major) then bias (out f64)
//! ```
//!
//! Encoding is lossless, so decoded parameters are bit-identical to the originals.

use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Activation, Layer, Matrix, Network};

pub const MAGIC: &[u8; 16] = b"FEDGAN-PARAMS\0\0\0";
pub const VERSION: u8 = 1;

pub fn encode(net: &Network) -> Vec<u8> {
    let mut out = Vec::with_capacity(21 + net.num_params() * 8 + net.layers().len() * 17);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        let (tag, param) = activation_tag(layer.activation);
        out.extend_from_slice(&(layer.output_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.input_dim() as u32).to_le_bytes());
        out.push(tag);
        out.extend_from_slice(&param.to_le_bytes());
    }
    for v in net.params() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn activation_tag(a: Activation) -> (u8, f64) {
    match a {
        Activation::LeakyRelu { slope } => (0, slope),
        Activation::Sigmoid => (1, 0.0),
        Activation::Tanh => (2, 0.0),
        Activation::Identity => (3, 0.0),
        Activation::Softmax => (4, 0.0),
    }
}

fn activation_from_tag(tag: u8, param: f64) -> Result<Activation> {
    Ok(match tag {
        0 => Activation::LeakyRelu { slope: param },
        1 => Activation::Sigmoid,
        2 => Activation::Tanh,
        3 => Activation::Identity,
        4 => Activation::Softmax,
        t => return Err(Error::Checkpoint(format!("unknown activation tag {t}"))),
    })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end =
            self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Decodes one checkpoint, returning the network and the number of bytes consumed.
pub fn decode_prefix(bytes: &[u8]) -> Result<(Network, usize)> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(16)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = c.take(1)?[0];
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let n_layers = c.u32()?;
    if n_layers == 0 || n_layers > 4096 {
        return Err(Error::Checkpoint(format!("implausible layer count {n_layers}")));
    }
    let mut shapes = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let out = c.u32()?;
        let inp = c.u32()?;
        let tag = c.take(1)?[0];
        let act = activation_from_tag(tag, c.f64()?)?;
        shapes.push((out, inp, act));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for (out, inp, act) in shapes {
        let n = out
            .checked_mul(inp)
            .filter(|n| n * 8 <= bytes.len())
            .ok_or_else(|| Error::Checkpoint("layer larger than checkpoint".into()))?;
        let weights = (0..n).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
        let bias = (0..out).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
        layers.push(Layer::new(Matrix::from_vec(out, inp, weights)?, bias, act)?);
    }
    Ok((Network::new(layers)?, c.pos))
}

pub fn decode(bytes: &[u8]) -> Result<Network> {
    let (net, used) = decode_prefix(bytes)?;
    if used != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(net)
}

pub fn save(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode(net))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Network> {
    decode(&std::fs::read(path)?)
}

/// A discriminator/generator pair packed back to back, as carried in transactions.
pub fn encode_pair(disc: &Network, gen: &Network) -> Vec<u8> {
    let mut out = encode(disc);
    out.extend(encode(gen));
    out
}

pub fn decode_pair(bytes: &[u8]) -> Result<(Network, Network)> {
    let (disc, used) = decode_prefix(bytes)?;
    let gen = decode(&bytes[used..])?;
    Ok((disc, gen))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Architecture;
    use crate::rng::stream;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(seed in any::<u64>(), hidden in proptest::collection::vec(1usize..6, 0..3)) {
            let net = Architecture::mlp(3, &hidden, 2, Activation::Tanh).init(&mut stream(seed, 0)).unwrap();
            let back = decode(&encode(&net)).unwrap();
            prop_assert!(net.params().zip(back.params()).all(|(a, b)| a.to_bits() == b.to_bits()));
            prop_assert_eq!(back, net);
        }
    }

    #[test]
    fn header_layout() {
        let net = Architecture::mlp(2, &[], 1, Activation::Sigmoid).init(&mut stream(1, 0)).unwrap();
        let bytes = encode(&net);
        assert_eq!(&bytes[..16], MAGIC);
        assert_eq!(bytes[16], VERSION);
        assert_eq!(bytes.len(), 16 + 1 + 4 + 17 + 3 * 8);
    }

    #[test]
    fn rejects_corruption() {
        let net = Architecture::mlp(2, &[3], 1, Activation::Sigmoid).init(&mut stream(1, 0)).unwrap();
        let bytes = encode(&net);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut bad = bytes.clone();
        bad[16] = 9;
        assert!(decode(&bad).is_err());
        assert!(decode(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn pair_round_trip() {
        let d = Architecture::mlp(2, &[4], 1, Activation::Sigmoid).init(&mut stream(2, 0)).unwrap();
        let g = Architecture::mlp(3, &[4], 2, Activation::Identity).init(&mut stream(2, 1)).unwrap();
        let (d2, g2) = decode_pair(&encode_pair(&d, &g)).unwrap();
        assert_eq!((d2, g2), (d, g));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gen.ckpt");
        let g = Architecture::mlp(3, &[4], 2, Activation::Identity).init(&mut stream(2, 1)).unwrap();
        save(&g, &path).unwrap();
        assert_eq!(load(&path).unwrap(), g);
    }
}
