//! Reader and writer for the NPY subset used on disk.
//!
//! Supported: format version 1.0, dtypes `<f4` (tensors) and `<u4` (label
//! maps), C order. The writer emits one canonical header per shape, padded
//! with spaces so the data section starts on a 64-byte multiple, which makes
//! save(load(x)) byte-identical and matches what numpy itself writes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::GridDims;
use crate::tensor::{LabelMap, ProbabilityTensor};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;
const F4: &str = "<f4";
const U4: &str = "<u4";

/// Refuse arrays above this many bytes of payload; headers are untrusted.
const MAX_DATA_BYTES: usize = 1 << 31;

pub fn save_tensor(t: &ProbabilityTensor, path: &Path) -> Result<()> {
    let mut shape = t.dims().shape().to_vec();
    shape.push(t.num_classes());
    let mut data = Vec::with_capacity(t.values().len() * 4);
    for v in t.values() {
        data.extend_from_slice(&v.to_le_bytes());
    }
    write_file(path, F4, &shape, &data)
}

pub fn load_tensor(path: &Path) -> Result<ProbabilityTensor> {
    let raw = read_file(path)?;
    if raw.descr != F4 {
        return Err(Error::format(
            path,
            format!(
                "expected dtype '{F4}' for a probability tensor, got '{}'",
                raw.descr
            ),
        ));
    }
    if raw.shape.len() != 3 && raw.shape.len() != 4 {
        return Err(Error::format(
            path,
            format!(
                "expected 3 or 4 axes (spatial axes + classes), got {}",
                raw.shape.len()
            ),
        ));
    }
    let (spatial, classes) = raw.shape.split_at(raw.shape.len() - 1);
    let dims = GridDims::from_extents(spatial)?;
    let values = raw
        .data
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ProbabilityTensor::new(dims, classes[0], values)
}

pub fn save_label_map(m: &LabelMap, path: &Path) -> Result<()> {
    let mut data = Vec::with_capacity(m.labels().len() * 4);
    for v in m.labels() {
        data.extend_from_slice(&v.to_le_bytes());
    }
    write_file(path, U4, m.dims().shape(), &data)
}

pub fn load_label_map(path: &Path) -> Result<LabelMap> {
    let raw = read_file(path)?;
    if raw.descr != U4 {
        return Err(Error::format(
            path,
            format!(
                "expected dtype '{U4}' for a label map, got '{}'",
                raw.descr
            ),
        ));
    }
    if raw.shape.len() != 2 && raw.shape.len() != 3 {
        return Err(Error::format(
            path,
            format!("expected 2 or 3 spatial axes, got {}", raw.shape.len()),
        ));
    }
    let dims = GridDims::from_extents(&raw.shape)?;
    let labels = raw
        .data
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    LabelMap::new(dims, labels)
}

struct RawArray {
    descr: String,
    shape: Vec<usize>,
    data: Vec<u8>,
}

fn write_file(path: &Path, descr: &str, shape: &[usize], data: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&header_bytes(descr, shape))
        .and_then(|()| w.write_all(data))
        .and_then(|()| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Canonical header bytes: magic, version 1.0, little-endian u16 length, then
/// `{'descr': '<f4', 'fortran_order': False, 'shape': (8, 8, 3), }` padded
/// with spaces and closed by a newline so the total length is a multiple
/// of 64.
pub(crate) fn header_bytes(descr: &str, shape: &[usize]) -> Vec<u8> {
    let body = shape
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ");
    let tuple = if shape.len() == 1 {
        format!("({body},)")
    } else {
        format!("({body})")
    };
    let dict = format!("{{'descr': '{descr}', 'fortran_order': False, 'shape': {tuple}, }}");
    let unpadded = MAGIC.len() + 4 + dict.len() + 1;
    let padding = (ALIGN - unpadded % ALIGN) % ALIGN;
    let header_len = dict.len() + padding + 1;
    debug_assert!(header_len <= u16::MAX as usize);
    let mut out = Vec::with_capacity(MAGIC.len() + 4 + header_len);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header_len as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.extend(std::iter::repeat_n(b' ', padding));
    out.push(b'\n');
    out
}

fn read_file(path: &Path) -> Result<RawArray> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);

    let mut preamble = [0u8; 10];
    read_exact(&mut r, &mut preamble, path)?;
    if &preamble[..6] != MAGIC {
        return Err(Error::format(path, "not an NPY file (bad magic)"));
    }
    if preamble[6] != 1 || preamble[7] != 0 {
        return Err(Error::format(
            path,
            format!("unsupported NPY version {}.{}", preamble[6], preamble[7]),
        ));
    }
    let header_len = u16::from_le_bytes([preamble[8], preamble[9]]) as usize;
    let mut header = vec![0u8; header_len];
    read_exact(&mut r, &mut header, path)?;
    let header = std::str::from_utf8(&header)
        .map_err(|_| Error::format(path, "header is not valid ASCII"))?;
    let (descr, fortran, shape) =
        parse_header(header).map_err(|reason| Error::format(path, reason))?;
    if fortran {
        return Err(Error::format(path, "fortran_order arrays are not supported"));
    }
    if descr != F4 && descr != U4 {
        return Err(Error::format(
            path,
            format!("unsupported dtype '{descr}' (only '{F4}' and '{U4}')"),
        ));
    }

    let count = shape
        .iter()
        .try_fold(1usize, |acc, &e| acc.checked_mul(e))
        .filter(|&c| c.checked_mul(4).is_some_and(|b| b <= MAX_DATA_BYTES))
        .ok_or_else(|| Error::format(path, format!("shape {shape:?} is too large")))?;
    let mut data = vec![0u8; count * 4];
    read_exact(&mut r, &mut data, path)?;
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => {}
        Ok(_) => return Err(Error::format(path, "trailing bytes after array data")),
        Err(e) => return Err(Error::io(path, e)),
    }
    Ok(RawArray {
        descr: descr.to_string(),
        shape,
        data,
    })
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], path: &Path) -> Result<()> {
    r.read_exact(buf).map_err(|e| Error::io(path, e))
}

/// Parses the Python dict literal in an NPY header. Tolerates arbitrary
/// whitespace padding; requires exactly the three standard keys.
fn parse_header(s: &str) -> std::result::Result<(&str, bool, Vec<usize>), String> {
    let s = s.trim();
    let inner = s
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or("header is not a dict literal")?;

    let descr = {
        let v = field(inner, "descr")?;
        let v = v.strip_prefix('\'').ok_or("descr is not quoted")?;
        let end = v.find('\'').ok_or("unterminated descr string")?;
        &v[..end]
    };

    let fortran = match field(inner, "fortran_order")? {
        v if v.starts_with("True") => true,
        v if v.starts_with("False") => false,
        _ => return Err("fortran_order is neither True nor False".into()),
    };

    let shape = {
        let v = field(inner, "shape")?;
        let v = v.strip_prefix('(').ok_or("shape is not a tuple")?;
        let end = v.find(')').ok_or("unterminated shape tuple")?;
        v[..end]
            .split(',')
            .map(str::trim)
            .filter(|part| !part.is_empty())
            .map(|part| {
                part.parse::<usize>()
                    .map_err(|_| format!("bad shape entry {part:?}"))
            })
            .collect::<std::result::Result<Vec<usize>, String>>()?
    };

    Ok((descr, fortran, shape))
}

/// Slice starting right after `'key':`, trimmed.
fn field<'a>(inner: &'a str, key: &str) -> std::result::Result<&'a str, String> {
    let pat = format!("'{key}'");
    let at = inner
        .find(&pat)
        .ok_or_else(|| format!("missing key '{key}'"))?;
    let rest = inner[at + pat.len()..].trim_start();
    let rest = rest
        .strip_prefix(':')
        .ok_or_else(|| format!("missing ':' after '{key}'"))?;
    Ok(rest.trim_start())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridDims;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tmp(name: &str) -> tempfile::TempDir {
        let _ = name;
        tempfile::tempdir().unwrap()
    }

    fn random_tensor(rng: &mut ChaCha8Rng) -> ProbabilityTensor {
        let rows = rng.random_range(1..6);
        let cols = rng.random_range(1..6);
        let three_d = rng.random_bool(0.3);
        let dims = if three_d {
            GridDims::new_3d(rows, cols, rng.random_range(1..4)).unwrap()
        } else {
            GridDims::new_2d(rows, cols).unwrap()
        };
        let channels = rng.random_range(2..5);
        let mut values = Vec::with_capacity(dims.num_cells() * channels);
        for _ in 0..dims.num_cells() {
            let raw: Vec<f32> = (0..channels).map(|_| rng.random::<f32>() + 1e-3).collect();
            let sum: f32 = raw.iter().sum();
            values.extend(raw.iter().map(|v| v / sum));
        }
        ProbabilityTensor::new(dims, channels, values).unwrap()
    }

    #[test]
    fn header_matches_worked_layout() {
        let h = header_bytes("<f4", &[8, 8, 3]);
        assert_eq!(h.len() % 64, 0);
        assert_eq!(&h[..6], MAGIC);
        assert_eq!(&h[6..8], &[1, 0]);
        let len = u16::from_le_bytes([h[8], h[9]]) as usize;
        assert_eq!(10 + len, h.len());
        let text = std::str::from_utf8(&h[10..]).unwrap();
        assert!(text.starts_with("{'descr': '<f4', 'fortran_order': False, 'shape': (8, 8, 3), }"));
        assert!(text.ends_with('\n'));
        let dict_end = text.find('}').unwrap() + 1;
        assert!(text[dict_end..text.len() - 1].bytes().all(|b| b == b' '));
    }

    #[test]
    fn tensor_round_trip_is_byte_identical() {
        let dir = tmp("roundtrip");
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for i in 0..100 {
            let t = random_tensor(&mut rng);
            let path = dir.path().join(format!("t{i}.npy"));
            save_tensor(&t, &path).unwrap();
            let loaded = load_tensor(&path).unwrap();
            assert_eq!(loaded, t);
            let bytes_a = std::fs::read(&path).unwrap();
            save_tensor(&loaded, &path).unwrap();
            let bytes_b = std::fs::read(&path).unwrap();
            assert_eq!(bytes_a, bytes_b);
        }
    }

    #[test]
    fn label_map_round_trip() {
        let dir = tmp("labels");
        let dims = GridDims::new_3d(3, 4, 2).unwrap();
        let labels: Vec<u32> = (0..dims.num_cells() as u32).map(|i| i % 5).collect();
        let m = LabelMap::new(dims, labels).unwrap();
        let path = dir.path().join("m.npy");
        save_label_map(&m, &path).unwrap();
        assert_eq!(load_label_map(&path).unwrap(), m);
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tmp("magic");
        let path = dir.path().join("bad.npy");
        std::fs::write(&path, b"NOTNPYxxxx").unwrap();
        let err = load_tensor(&path).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
    }

    #[test]
    fn rejects_version_2() {
        let dir = tmp("version");
        let path = dir.path().join("v2.npy");
        let mut bytes = header_bytes("<f4", &[1, 1, 2]);
        bytes[6] = 2;
        bytes.extend_from_slice(&0.5f32.to_le_bytes());
        bytes.extend_from_slice(&0.5f32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        let err = load_tensor(&path).unwrap_err();
        assert!(err.to_string().contains("unsupported NPY version 2.0"), "{err}");
    }

    #[test]
    fn rejects_fortran_order() {
        let dir = tmp("fortran");
        let path = dir.path().join("f.npy");
        let mut bytes = header_bytes("<f4", &[1, 1, 2]);
        let at = bytes
            .windows(5)
            .position(|w| w == b"False")
            .expect("header carries a fortran_order flag");
        bytes[at..at + 5].copy_from_slice(b"True ");
        bytes.extend_from_slice(&0.5f32.to_le_bytes());
        bytes.extend_from_slice(&0.5f32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        let err = load_tensor(&path).unwrap_err();
        assert!(err.to_string().contains("fortran_order"), "{err}");
    }

    #[test]
    fn rejects_wrong_dtype_for_target() {
        let dir = tmp("dtype");
        let dims = GridDims::new_2d(1, 2).unwrap();
        let m = LabelMap::new(dims, vec![1, 2]).unwrap();
        let path = dir.path().join("m.npy");
        save_label_map(&m, &path).unwrap();
        let err = load_tensor(&path).unwrap_err();
        assert!(err.to_string().contains("expected dtype '<f4'"), "{err}");
    }

    #[test]
    fn rejects_unsupported_dtype() {
        let dir = tmp("f8");
        let path = dir.path().join("f8.npy");
        let mut bytes = header_bytes("<f8", &[1]);
        bytes.extend_from_slice(&1.0f64.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        let err = load_tensor(&path).unwrap_err();
        assert!(err.to_string().contains("unsupported dtype '<f8'"), "{err}");
    }

    #[test]
    fn rejects_truncated_and_trailing_data() {
        let dir = tmp("trunc");
        let dims = GridDims::new_2d(2, 2).unwrap();
        let t = ProbabilityTensor::new(dims, 2, vec![0.5; 8]).unwrap();
        let path = dir.path().join("t.npy");
        save_tensor(&t, &path).unwrap();
        let full = std::fs::read(&path).unwrap();

        std::fs::write(&path, &full[..full.len() - 1]).unwrap();
        assert!(load_tensor(&path).is_err());

        let mut extended = full.clone();
        extended.push(0);
        std::fs::write(&path, extended).unwrap();
        let err = load_tensor(&path).unwrap_err();
        assert!(err.to_string().contains("trailing bytes"), "{err}");
    }

    #[test]
    fn accepts_extra_whitespace_padding() {
        // Same dict, nonstandard padding: legal input, just not what the
        // writer produces.
        let dir = tmp("pad");
        let path = dir.path().join("w.npy");
        let dict = "{'descr': '<u4', 'fortran_order': False, 'shape': (1, 2), }";
        let mut header = Vec::new();
        header.extend_from_slice(MAGIC);
        header.extend_from_slice(&[1, 0]);
        let padded = format!("{dict}   \n");
        header.extend_from_slice(&(padded.len() as u16).to_le_bytes());
        header.extend_from_slice(padded.as_bytes());
        header.extend_from_slice(&7u32.to_le_bytes());
        header.extend_from_slice(&9u32.to_le_bytes());
        std::fs::write(&path, header).unwrap();
        let m = load_label_map(&path).unwrap();
        assert_eq!(m.labels(), &[7, 9]);
    }

    #[test]
    fn load_validates_probability_invariants() {
        let dir = tmp("invalid");
        let path = dir.path().join("bad.npy");
        let mut bytes = header_bytes("<f4", &[1, 1, 2]);
        bytes.extend_from_slice(&0.9f32.to_le_bytes());
        bytes.extend_from_slice(&0.3f32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_tensor(&path),
            Err(Error::UnnormalizedProbability { index: 0, .. })
        ));
    }
}
