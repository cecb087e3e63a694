//! The `UASWMLP1` model file format.
//!
//! A flat little-endian binary, self-describing enough to reload without
//! outside context:
//!
//! ```text
//! offset 0   magic "UASWMLP1" (8 bytes)
//!         8  u32 n_features
//!        12  u32 n_trunk_layers
//!            u32 × n_trunk_layers   trunk widths, input to output
//!            u32 n_heads (= 3)
//!            u32 × n_heads          head widths (4, 2, 2)
//!            f32 × n_features       scaler mean
//!            f32 × n_features       scaler std
//!            per trunk layer, then per head:
//!              f32 × (out·in)       weights, row-major [out][in]
//!              f32 × out            biases
//! ```
//!
//! Weights are stored at f32 precision; in-memory training happens in f64,
//! so saving quantises. Decoding a valid file and re-encoding it is
//! byte-exact.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::{DenseLayer, MlpModel, Scaler, HEAD_SIZES};

/// Leading magic bytes of every model file.
pub const MAGIC: &[u8; 8] = b"UASWMLP1";

/// Model (de)serialisation failures.
#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("bad magic: not a UASWMLP1 model file")]
    BadMagic,
    #[error("model file truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("unsupported head layout {sizes:?}, expected {HEAD_SIZES:?}")]
    BadHeads { sizes: Vec<u32> },
    #[error("{0} bytes of trailing garbage after the model payload")]
    TrailingBytes(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Serialises a model into the `UASWMLP1` layout.
pub fn to_bytes(model: &MlpModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    push_u32(&mut out, model.n_features() as u32);
    push_u32(&mut out, model.trunk.len() as u32);
    for layer in &model.trunk {
        push_u32(&mut out, layer.out_dim as u32);
    }
    push_u32(&mut out, model.heads.len() as u32);
    for head in &model.heads {
        push_u32(&mut out, head.out_dim as u32);
    }
    for v in model.scaler.mean.iter().chain(&model.scaler.std) {
        push_f32(&mut out, *v);
    }
    for layer in model.trunk.iter().chain(&model.heads) {
        for w in layer.weights.iter().chain(&layer.biases) {
            push_f32(&mut out, *w);
        }
    }
    out
}

/// Parses a `UASWMLP1` byte image.
pub fn from_bytes(bytes: &[u8]) -> Result<MlpModel, ModelIoError> {
    let mut r = Reader { bytes, offset: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(ModelIoError::BadMagic);
    }
    let n_features = r.read_u32()? as usize;
    let n_trunk = r.read_u32()? as usize;
    let mut widths = Vec::with_capacity(n_trunk);
    for _ in 0..n_trunk {
        widths.push(r.read_u32()? as usize);
    }
    let n_heads = r.read_u32()? as usize;
    let mut head_sizes = Vec::with_capacity(n_heads);
    for _ in 0..n_heads {
        head_sizes.push(r.read_u32()?);
    }
    if head_sizes.len() != HEAD_SIZES.len()
        || head_sizes
            .iter()
            .zip(&HEAD_SIZES)
            .any(|(got, want)| *got as usize != *want)
    {
        return Err(ModelIoError::BadHeads { sizes: head_sizes });
    }

    let mean = r.read_f32_vec(n_features)?;
    let std = r.read_f32_vec(n_features)?;

    let mut trunk = Vec::with_capacity(n_trunk);
    let mut in_dim = n_features;
    for &out_dim in &widths {
        trunk.push(read_layer(&mut r, in_dim, out_dim)?);
        in_dim = out_dim;
    }
    let mut heads = Vec::with_capacity(HEAD_SIZES.len());
    for &out_dim in &HEAD_SIZES {
        heads.push(read_layer(&mut r, in_dim, out_dim)?);
    }

    if r.offset != bytes.len() {
        return Err(ModelIoError::TrailingBytes(bytes.len() - r.offset));
    }
    Ok(MlpModel {
        scaler: Scaler { mean, std },
        trunk,
        heads,
    })
}

/// Writes a model file.
pub fn save(model: &MlpModel, path: &Path) -> Result<(), ModelIoError> {
    fs::write(path, to_bytes(model))?;
    Ok(())
}

/// Reads a model file.
pub fn load(path: &Path) -> Result<MlpModel, ModelIoError> {
    from_bytes(&fs::read(path)?)
}

fn push_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn push_f32(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&(v as f32).to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], ModelIoError> {
        if self.offset + len > self.bytes.len() {
            return Err(ModelIoError::Truncated {
                offset: self.bytes.len(),
            });
        }
        let slice = &self.bytes[self.offset..self.offset + len];
        self.offset += len;
        Ok(slice)
    }

    fn read_u32(&mut self) -> Result<u32, ModelIoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn read_f32(&mut self) -> Result<f64, ModelIoError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()) as f64)
    }

    fn read_f32_vec(&mut self, len: usize) -> Result<Vec<f64>, ModelIoError> {
        (0..len).map(|_| self.read_f32()).collect()
    }
}

fn read_layer(r: &mut Reader, in_dim: usize, out_dim: usize) -> Result<DenseLayer, ModelIoError> {
    Ok(DenseLayer {
        weights: r.read_f32_vec(in_dim * out_dim)?,
        biases: r.read_f32_vec(out_dim)?,
        in_dim,
        out_dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::Topology;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random model whose parameters sit exactly on the f32 grid.
    fn f32_grid_model(seed: u64) -> MlpModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = MlpModel::zeroed(15, &Topology::default());
        for layer in model.trunk.iter_mut().chain(model.heads.iter_mut()) {
            for w in &mut layer.weights {
                *w = rng.random_range(-2.0f32..2.0f32) as f64;
            }
            for b in &mut layer.biases {
                *b = rng.random_range(-1.0f32..1.0f32) as f64;
            }
        }
        for m in &mut model.scaler.mean {
            *m = rng.random_range(-100.0f32..100.0f32) as f64;
        }
        for s in &mut model.scaler.std {
            *s = rng.random_range(0.1f32..50.0f32) as f64;
        }
        model
    }

    #[test]
    fn roundtrips_are_identities() {
        for seed in 0..20 {
            let model = f32_grid_model(seed);
            let bytes = to_bytes(&model);
            let back = from_bytes(&bytes).unwrap();
            assert_eq!(back, model);
            assert_eq!(to_bytes(&back), bytes);
        }
    }

    #[test]
    fn tap_example_layout() {
        let model = MlpModel::zeroed(15, &Topology::default());
        let bytes = to_bytes(&model);
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 15);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
        // widths 12, 12 then head count 3 and sizes 4, 2, 2
        let words: Vec<u32> = (16..40)
            .step_by(4)
            .map(|o| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()))
            .collect();
        assert_eq!(words, vec![12, 12, 3, 4, 2, 2]);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let model = f32_grid_model(3);
        let bytes = to_bytes(&model);

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(from_bytes(&bad_magic), Err(ModelIoError::BadMagic)));

        assert!(matches!(
            from_bytes(&bytes[..bytes.len() - 3]),
            Err(ModelIoError::Truncated { .. })
        ));

        let mut trailing = bytes.clone();
        trailing.extend_from_slice(&[0, 1, 2]);
        assert!(matches!(
            from_bytes(&trailing),
            Err(ModelIoError::TrailingBytes(3))
        ));

        // Flip the head count to 2.
        let mut bad_heads = bytes.clone();
        bad_heads[24] = 2;
        assert!(matches!(
            from_bytes(&bad_heads),
            Err(ModelIoError::BadHeads { .. })
        ));
    }

    #[test]
    fn save_and_load_via_file() {
        let dir = std::env::temp_dir().join("uasw_model_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.uaswmlp");
        let model = f32_grid_model(8);
        save(&model, &path).unwrap();
        assert_eq!(load(&path).unwrap(), model);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
