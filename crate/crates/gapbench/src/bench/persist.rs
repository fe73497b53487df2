//! Binary persistence for ground sets: a versioned header, the grind spec
//! echo, then values, corrupted mask, indicating mask, and truth in the
//! canonical layout (little-endian f64 values, one byte per mask cell).

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array3;

use crate::core::{GroundSet, SampleSet};
use crate::error::{Error, Result};
use crate::grinder::GrindSpec;

const MAGIC: &[u8; 16] = b"GAPBENCH-GROUND\n";
const VERSION: u32 = 1;

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path.display().to_string(), e)
}

/// Write a ground set (and the spec that produced it) to a binary file.
pub fn write_ground_set(ground: &GroundSet, spec: &GrindSpec, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let (n, t, d) = ground.dim();
    w.write_all(MAGIC).map_err(io_err(path))?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io_err(path))?;
    for dim in [n as u64, t as u64, d as u64] {
        w.write_all(&dim.to_le_bytes()).map_err(io_err(path))?;
    }
    // spec echo: fixed-width numeric fields
    let echo = [
        match spec.pattern {
            crate::grinder::Pattern::Point => 0u64,
            crate::grinder::Pattern::Subsequence => 1,
            crate::grinder::Pattern::Block => 2,
        },
        spec.rate.to_bits(),
        spec.seq_len.unwrap_or(0) as u64,
        spec.block_len.unwrap_or(0) as u64,
        spec.block_width.unwrap_or(0) as u64,
        spec.seed,
    ];
    for v in echo {
        w.write_all(&v.to_le_bytes()).map_err(io_err(path))?;
    }
    for v in ground.corrupted().values() {
        w.write_all(&v.to_bits().to_le_bytes()).map_err(io_err(path))?;
    }
    let mask_bytes: Vec<u8> = ground.corrupted().mask().iter().copied().collect();
    w.write_all(&mask_bytes).map_err(io_err(path))?;
    let ind_bytes: Vec<u8> = ground.indicating_mask().iter().copied().collect();
    w.write_all(&ind_bytes).map_err(io_err(path))?;
    for v in ground.truth() {
        w.write_all(&v.to_bits().to_le_bytes()).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Read a ground set back, returning it with the echoed spec.
pub fn read_ground_set(path: &Path) -> Result<(GroundSet, GrindSpec)> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 16];
    r.read_exact(&mut magic).map_err(io_err(path))?;
    if &magic != MAGIC {
        return Err(Error::InvalidInput(format!(
            "{} is not a ground-set file",
            path.display()
        )));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf).map_err(io_err(path))?;
    let version = u32::from_le_bytes(u32buf);
    if version != VERSION {
        return Err(Error::InvalidInput(format!(
            "unsupported ground-set version {version}"
        )));
    }
    let read_u64 = |r: &mut BufReader<std::fs::File>| -> Result<u64> {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf).map_err(io_err(path))?;
        Ok(u64::from_le_bytes(buf))
    };
    let n = read_u64(&mut r)? as usize;
    let t = read_u64(&mut r)? as usize;
    let d = read_u64(&mut r)? as usize;
    let pattern_code = read_u64(&mut r)?;
    let rate = f64::from_bits(read_u64(&mut r)?);
    let seq_len = read_u64(&mut r)? as usize;
    let block_len = read_u64(&mut r)? as usize;
    let block_width = read_u64(&mut r)? as usize;
    let seed = read_u64(&mut r)?;
    let spec = GrindSpec {
        pattern: match pattern_code {
            0 => crate::grinder::Pattern::Point,
            1 => crate::grinder::Pattern::Subsequence,
            2 => crate::grinder::Pattern::Block,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown pattern code {other}"
                )))
            }
        },
        rate,
        seq_len: (seq_len > 0).then_some(seq_len),
        block_len: (block_len > 0).then_some(block_len),
        block_width: (block_width > 0).then_some(block_width),
        seed,
    };

    let cells = n * t * d;
    let mut values = Vec::with_capacity(cells);
    for _ in 0..cells {
        values.push(f64::from_bits(read_u64(&mut r)?));
    }
    let mut corrupted_mask = vec![0u8; cells];
    r.read_exact(&mut corrupted_mask).map_err(io_err(path))?;
    let mut indicating = vec![0u8; cells];
    r.read_exact(&mut indicating).map_err(io_err(path))?;
    let mut truth = Vec::with_capacity(cells);
    for _ in 0..cells {
        truth.push(f64::from_bits(read_u64(&mut r)?));
    }

    let shape = (n, t, d);
    let truth_arr = Array3::from_shape_vec(shape, truth)
        .map_err(|e| Error::InvalidInput(format!("corrupt file: {e}")))?;
    let ind_arr = Array3::from_shape_vec(shape, indicating)
        .map_err(|e| Error::InvalidInput(format!("corrupt file: {e}")))?;
    let corrupted_mask_arr = Array3::from_shape_vec(shape, corrupted_mask)
        .map_err(|e| Error::InvalidInput(format!("corrupt file: {e}")))?;
    let _ = Array3::from_shape_vec(shape, values)
        .map_err(|e| Error::InvalidInput(format!("corrupt file: {e}")))?;

    // rebuild from the original (truth + union of masks), then re-grind the
    // indicated cells so invariants are enforced on load
    let original_mask = ndarray::Zip::from(&corrupted_mask_arr)
        .and(&ind_arr)
        .map_collect(|&c, &i| c | i);
    let original = SampleSet::new(truth_arr, original_mask)?;
    let ground = GroundSet::from_original(&original, ind_arr)?;
    Ok((ground, spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grinder::grind;

    #[test]
    fn ground_set_roundtrip() {
        let values =
            Array3::from_shape_fn((3, 6, 2), |(i, j, k)| (i * 12 + j * 2 + k) as f64 * 0.25);
        let set = SampleSet::from_values(values).unwrap();
        let spec = GrindSpec::subsequence(0.4, Some(3), 99);
        let ground = grind(&set, &spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ground.bin");
        write_ground_set(&ground, &spec, &path).unwrap();
        let (back, spec_back) = read_ground_set(&path).unwrap();
        assert_eq!(back.indicating_mask(), ground.indicating_mask());
        assert_eq!(back.corrupted().mask(), ground.corrupted().mask());
        assert_eq!(back.truth(), ground.truth());
        assert_eq!(spec_back, spec);
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("not_ground.bin");
        std::fs::write(&path, b"something else entirely").unwrap();
        assert!(read_ground_set(&path).is_err());
    }
}
