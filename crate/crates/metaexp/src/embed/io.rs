//! Embedding persistence.
//!
//! Binary layout: magic `DEMB`, u32 version, u64 vocabulary size, u32 dim,
//! then the vocabulary table (u32 length-prefixed UTF-8 ids), then the input
//! and output weight matrices as row-major little-endian f32. A plain-text
//! export (one listing per line) is provided for interop.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::EmbeddingMatrix;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"DEMB";
const VERSION: u32 = 1;

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::io(path.display().to_string(), e)
}

pub fn save_embeddings(matrix: &EmbeddingMatrix, path: &Path) -> Result<()> {
    matrix.validate()?;
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let put = |w: &mut BufWriter<File>, bytes: &[u8]| -> Result<()> {
        w.write_all(bytes).map_err(|e| io_err(path, e))
    };
    put(&mut w, MAGIC)?;
    put(&mut w, &VERSION.to_le_bytes())?;
    put(&mut w, &(matrix.vocab.len() as u64).to_le_bytes())?;
    put(&mut w, &(matrix.dim as u32).to_le_bytes())?;
    for token in &matrix.vocab {
        put(&mut w, &(token.len() as u32).to_le_bytes())?;
        put(&mut w, token.as_bytes())?;
    }
    for &x in matrix.w.iter().chain(matrix.v.iter()) {
        put(&mut w, &x.to_le_bytes())?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);

    fn take<const N: usize>(r: &mut impl Read, path: &Path) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        r.read_exact(&mut buf).map_err(|e| io_err(path, e))?;
        Ok(buf)
    }

    let magic: [u8; 4] = take(&mut r, path)?;
    if &magic != MAGIC {
        return Err(Error::schema(None, "not an embedding file (bad magic)"));
    }
    let version = u32::from_le_bytes(take(&mut r, path)?);
    if version != VERSION {
        return Err(Error::schema(None, format!("unsupported embedding version {version}")));
    }
    let n = u64::from_le_bytes(take(&mut r, path)?) as usize;
    let dim = u32::from_le_bytes(take(&mut r, path)?) as usize;

    let mut vocab = Vec::with_capacity(n);
    for _ in 0..n {
        let len = u32::from_le_bytes(take(&mut r, path)?) as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf).map_err(|e| io_err(path, e))?;
        let token = String::from_utf8(buf)
            .map_err(|_| Error::schema(None, "non-UTF-8 token in vocabulary"))?;
        vocab.push(token);
    }

    let mut read_matrix = |count: usize| -> Result<Vec<f32>> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            out.push(f32::from_le_bytes(take(&mut r, path)?));
        }
        Ok(out)
    };
    let w = read_matrix(n * dim)?;
    let v = read_matrix(n * dim)?;

    let matrix = EmbeddingMatrix { vocab, dim, w, v };
    matrix.validate()?;
    Ok(matrix)
}

/// Writes one listing per line: `listing_id v0 v1 ... v{dim-1}` (input rows).
pub fn export_embeddings_text(matrix: &EmbeddingMatrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for (i, token) in matrix.vocab.iter().enumerate() {
        write!(w, "{token}").map_err(|e| io_err(path, e))?;
        for &x in matrix.input_row(i) {
            write!(w, " {x}").map_err(|e| io_err(path, e))?;
        }
        writeln!(w).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}
