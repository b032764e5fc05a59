//! Binary model checkpoints.
//!
//! Layout: magic `RATCKPT1`, layer count as u32 LE, one `(in, out, activation)`
//! u32-LE triple per layer, then per layer the weights (row-major) followed by
//! the bias, all as f32 LE.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::model::{Activation, DenseLayer, MlpModel};

const MAGIC: &[u8; 8] = b"RATCKPT1";

pub fn save_checkpoint(model: &MlpModel, path: &Path) -> Result<()> {
    model.validate()?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(model.layers.len() as u32).to_le_bytes())?;
    for layer in &model.layers {
        w.write_all(&(layer.in_dim() as u32).to_le_bytes())?;
        w.write_all(&(layer.out_dim() as u32).to_le_bytes())?;
        w.write_all(&layer.activation.code().to_le_bytes())?;
    }
    for layer in &model.layers {
        for &v in layer.weights.data() {
            w.write_all(&v.to_le_bytes())?;
        }
        for &v in layer.bias.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<MlpModel> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::BadCheckpoint(format!(
            "wrong magic {:?}, expected {:?}",
            String::from_utf8_lossy(&magic),
            String::from_utf8_lossy(MAGIC)
        )));
    }
    let layer_count = read_u32(&mut r, "layer count")? as usize;
    if layer_count == 0 || layer_count > 1024 {
        return Err(Error::BadCheckpoint(format!(
            "implausible layer count {layer_count}"
        )));
    }
    let mut headers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let in_dim = read_u32(&mut r, "in width")? as usize;
        let out_dim = read_u32(&mut r, "out width")? as usize;
        let act = Activation::from_code(read_u32(&mut r, "activation")?)?;
        headers.push((in_dim, out_dim, act));
    }
    let mut layers = Vec::with_capacity(layer_count);
    for &(in_dim, out_dim, act) in &headers {
        let weights = read_f32s(&mut r, in_dim * out_dim, "weights")?;
        let bias = read_f32s(&mut r, out_dim, "bias")?;
        layers.push(DenseLayer::from_parts(
            Tensor::matrix(out_dim, in_dim, weights)?,
            Tensor::from_vec(bias),
            act,
        )?);
    }
    let num_classes = headers.last().expect("nonempty").1;
    MlpModel::from_layers(layers, num_classes)
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::BadCheckpoint(format!("truncated while reading {what}")))
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf, what)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f32s<R: Read>(r: &mut R, count: usize, what: &str) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; count * 4];
    read_exact(r, &mut bytes, what)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}
