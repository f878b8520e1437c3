//! Versioned binary model format.
//!
//! All integers are little-endian `u32`, all reals little-endian IEEE-754 `f64`:
//!
//! ```text
//! magic            4 bytes  "APLM"
//! format_version   u32      currently 1
//! layer_count      u32
//! layer_count x {  input_dim u32, output_dim u32, activation u8 }
//!                           activation: 0 sigmoid, 1 relu, 2 tanh, 3 softmax, 4 linear
//! threshold        f64
//! has_normalizer   u8       0 or 1
//! [dim u32, shift f64 x dim, scale f64 x dim]      when has_normalizer = 1
//! layer_count x {  weights f64 x (output_dim * input_dim), row-major,
//!                  biases  f64 x output_dim }
//! ```
//!
//! Encoding is canonical, so save -> load -> save reproduces the same bytes.

use std::io::{self, Read, Write};

use ndarray::{Array1, Array2};

use super::activation::Activation;
use super::model::{LayerSpec, Mlp, Normalizer};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"APLM";
pub const FORMAT_VERSION: u32 = 1;

/// Sanity cap on any single dimension read from disk.
const MAX_DIM: u32 = 1 << 24;

pub fn write_model<W: Write>(model: &Mlp, out: &mut W) -> io::Result<()> {
    out.write_all(MODEL_MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(model.layers.len() as u32).to_le_bytes())?;
    for layer in &model.layers {
        out.write_all(&(layer.spec.input_dim as u32).to_le_bytes())?;
        out.write_all(&(layer.spec.output_dim as u32).to_le_bytes())?;
        out.write_all(&[layer.spec.activation.code()])?;
    }
    out.write_all(&model.threshold.to_le_bytes())?;
    match &model.normalizer {
        None => out.write_all(&[0])?,
        Some(norm) => {
            out.write_all(&[1])?;
            out.write_all(&(norm.dim() as u32).to_le_bytes())?;
            for v in norm.shift.iter().chain(&norm.scale) {
                out.write_all(&v.to_le_bytes())?;
            }
        }
    }
    for v in model.tensors().flatten() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact<R: Read, const N: usize>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input
        .read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated model: {e}")))?;
    Ok(buf)
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact(input)?))
}

fn read_dim<R: Read>(input: &mut R) -> Result<usize> {
    let v = read_u32(input)?;
    if v == 0 || v > MAX_DIM {
        return Err(Error::Format(format!("implausible dimension {v}")));
    }
    Ok(v as usize)
}

fn read_f64<R: Read>(input: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(read_exact(input)?))
}

fn read_f64s<R: Read>(input: &mut R, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| read_f64(input)).collect()
}

pub fn read_model<R: Read>(input: &mut R) -> Result<Mlp> {
    let magic: [u8; 4] = read_exact(input)?;
    if &magic != MODEL_MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let version = read_u32(input)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported model format version {version}")));
    }
    let count = read_dim(input)?;
    let mut specs = Vec::with_capacity(count);
    for _ in 0..count {
        let input_dim = read_dim(input)?;
        let output_dim = read_dim(input)?;
        let [code] = read_exact::<_, 1>(input)?;
        specs.push(LayerSpec::new(input_dim, output_dim, Activation::from_code(code)?));
    }
    let threshold = read_f64(input)?;
    let normalizer = match read_exact::<_, 1>(input)? {
        [0] => None,
        [1] => {
            let dim = read_dim(input)?;
            let shift = read_f64s(input, dim)?;
            let scale = read_f64s(input, dim)?;
            Some(Normalizer { shift, scale })
        }
        [other] => return Err(Error::Format(format!("bad normalizer flag {other}"))),
    };
    let mut params = Vec::with_capacity(count);
    for spec in &specs {
        let w = read_f64s(input, spec.output_dim * spec.input_dim)?;
        let b = read_f64s(input, spec.output_dim)?;
        let w = Array2::from_shape_vec((spec.output_dim, spec.input_dim), w)
            .map_err(|e| Error::Format(e.to_string()))?;
        params.push((w, Array1::from(b)));
    }
    Mlp::from_parameters(&specs, params, normalizer, threshold)
        .map_err(|e| Error::Format(format!("inconsistent model: {e}")))
}

impl Mlp {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        write_model(self, &mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = bytes;
        let model = read_model(&mut cursor)?;
        if !cursor.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes after model", cursor.len())));
        }
        Ok(model)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::DEFAULT_THRESHOLD;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_model() -> Mlp {
        let specs = LayerSpec::stack(3, &[4], Activation::Sigmoid, 2, Activation::Softmax);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = Mlp::initialize(&specs, 3.0, &mut rng).unwrap();
        m.set_normalizer(Some(Normalizer {
            shift: vec![0.0, 1.0, 2.0],
            scale: vec![1.0, 0.5, 0.25],
        }))
        .unwrap();
        m
    }

    #[test]
    fn header_layout_is_documented_layout() {
        let specs = [LayerSpec::new(1, 2, Activation::Softmax)];
        let m = Mlp::from_parameters(
            &specs,
            vec![(Array2::from_elem((2, 1), 1.5), Array1::from(vec![-1.0, 2.0]))],
            None,
            DEFAULT_THRESHOLD,
        )
        .unwrap();
        let bytes = m.to_bytes();
        let mut expected = b"APLM".to_vec();
        expected.extend(1u32.to_le_bytes());
        expected.extend(1u32.to_le_bytes());
        expected.extend(1u32.to_le_bytes());
        expected.extend(2u32.to_le_bytes());
        expected.push(3);
        expected.extend(0.5f64.to_le_bytes());
        expected.push(0);
        for v in [1.5f64, 1.5, -1.0, 2.0] {
            expected.extend(v.to_le_bytes());
        }
        assert_eq!(bytes, expected);
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let m = sample_model();
        let bytes = m.to_bytes();
        let back = Mlp::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn rejects_corrupt_files() {
        let bytes = sample_model().to_bytes();
        assert!(Mlp::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Mlp::from_bytes(&extra).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Mlp::from_bytes(&bad).is_err());
        let mut bad_version = bytes;
        bad_version[4] = 9;
        assert!(Mlp::from_bytes(&bad_version).is_err());
    }
}
