//! `SEML` layout cache.
//!
//! `"SEML"`, `u32` version, `u64` seed, `u32` M, `M·2` `f32` positions, then
//! `u8` layout method (0 = pca, 1 = tsne), then the params block: `u8`
//! requested method, `f64` perplexity,
//! `u32` iterations, `f64` early exaggeration, `u32` exaggeration
//! iterations, `f64` learning rate, `u32` PCA dims (0 = automatic), and a
//! `u32`-length-prefixed UTF-8 warning (empty for none). Little-endian.

use std::fs;
use std::io;
use std::path::Path;

use super::{ProjectedLayout, ProjectionMethod, ProjectionParams};
use crate::ingest::binary::{read_file, Reader};
use crate::ingest::IngestError;

const MAGIC: &[u8; 4] = b"SEML";
const VERSION: u32 = 1;

pub fn encode_layout(layout: &ProjectedLayout) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 8 * layout.positions.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&layout.seed.to_le_bytes());
    out.extend_from_slice(&(layout.positions.len() as u32).to_le_bytes());
    for p in &layout.positions {
        out.extend_from_slice(&(p[0] as f32).to_le_bytes());
        out.extend_from_slice(&(p[1] as f32).to_le_bytes());
    }
    let params = &layout.params;
    out.push(method_byte(layout.method));
    out.push(method_byte(params.method));
    out.extend_from_slice(&params.perplexity.to_le_bytes());
    out.extend_from_slice(&(params.iterations as u32).to_le_bytes());
    out.extend_from_slice(&params.early_exaggeration.to_le_bytes());
    out.extend_from_slice(&(params.exaggeration_iterations as u32).to_le_bytes());
    out.extend_from_slice(&params.learning_rate.to_le_bytes());
    out.extend_from_slice(&(params.pca_dims.unwrap_or(0) as u32).to_le_bytes());
    let warning = layout.warning.as_deref().unwrap_or("");
    out.extend_from_slice(&(warning.len() as u32).to_le_bytes());
    out.extend_from_slice(warning.as_bytes());
    out
}

fn method_byte(m: ProjectionMethod) -> u8 {
    match m {
        ProjectionMethod::Pca => 0,
        ProjectionMethod::Tsne => 1,
    }
}

fn method_from(r: &Reader<'_>, byte: u8, offset: usize) -> Result<ProjectionMethod, IngestError> {
    match byte {
        0 => Ok(ProjectionMethod::Pca),
        1 => Ok(ProjectionMethod::Tsne),
        other => Err(r.error(offset, format!("unknown projection method {other}"))),
    }
}

pub fn decode_layout(path: &Path, bytes: &[u8]) -> Result<ProjectedLayout, IngestError> {
    let mut r = Reader::new(path, bytes);
    r.magic(MAGIC)?;
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(r.error(4, format!("unsupported layout version {version}")));
    }
    let seed = r.u64("seed")?;
    let m = r.u32("sample count")? as usize;
    let coords = r.matrix(m, 2)?;
    let positions = coords.iter_rows().map(|row| [row[0], row[1]]).collect();
    let offset = 20 + 8 * m;
    let byte = r.u8("layout method")?;
    let method = method_from(&r, byte, offset)?;
    let byte = r.u8("requested method")?;
    let requested = method_from(&r, byte, offset + 1)?;
    let perplexity = r.f64("perplexity")?;
    let iterations = r.u32("iterations")? as usize;
    let early_exaggeration = r.f64("early exaggeration")?;
    let exaggeration_iterations = r.u32("exaggeration iterations")? as usize;
    let learning_rate = r.f64("learning rate")?;
    let pca_dims = match r.u32("pca dims")? {
        0 => None,
        k => Some(k as usize),
    };
    let len = r.u32("warning length")? as usize;
    let mut warning = Vec::with_capacity(len.min(4096));
    for _ in 0..len {
        warning.push(r.u8("warning")?);
    }
    r.finish()?;
    let warning = String::from_utf8(warning).map_err(|_| r.error(0, "warning is not UTF-8"))?;
    Ok(ProjectedLayout {
        positions,
        method,
        seed,
        params: ProjectionParams {
            method: requested,
            perplexity,
            iterations,
            early_exaggeration,
            exaggeration_iterations,
            learning_rate,
            pca_dims,
        },
        warning: (!warning.is_empty()).then_some(warning),
    })
}

pub fn write_layout(path: &Path, layout: &ProjectedLayout) -> io::Result<()> {
    fs::write(path, encode_layout(layout))
}

pub fn read_layout(path: &Path) -> Result<ProjectedLayout, IngestError> {
    let bytes = read_file(path)?;
    decode_layout(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_of_quantized_layout() {
        let layout = ProjectedLayout {
            positions: vec![[0.1, -2.5], [3.25, 1e-3]],
            method: ProjectionMethod::Tsne,
            seed: 42,
            params: ProjectionParams {
                pca_dims: Some(10),
                ..Default::default()
            },
            warning: Some("note".into()),
        }
        .quantized();
        let bytes = encode_layout(&layout);
        assert_eq!(&bytes[..4], b"SEML");
        let back = decode_layout(Path::new("x.seml"), &bytes).unwrap();
        assert_eq!(back, layout);
    }
}
