//! Paired observation/label datasets on disk.
//!
//! File layout, all integers and floats little-endian:
//!
//! ```text
//! "S2FD" | u32 version | u32 header_len | header JSON (UTF-8)
//! record*: mask (N_p bytes, 0/1)
//!          ls_obs (N_sym·N_p·N_ant × (f32 re, f32 im)), absent for truth-only files
//!          truth  (same layout)
//!          u32 draw_len | draw JSON line (terminated by '\n')
//! ```
//!
//! Complex tensors are written symbol-major, then pilot, then antenna.
//! Everything after the header is the payload.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::cfr::{CfrTensor, Shape};
use crate::error::{Error, Result};
use crate::grid::{CarrierGrid, GridConfig};
use crate::impairments::{ImpairmentDraw, Toggles};
use crate::seed;

pub const DATASET_MAGIC: [u8; 4] = *b"S2FD";
pub const DATASET_VERSION: u32 = 1;

/// One training/evaluation example.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    /// Impaired LS observation at the pilots; `None` for truth-only records
    /// that have not been through an impairment pass yet.
    pub ls_obs: Option<CfrTensor>,
    pub truth: CfrTensor,
    /// Pilot occupancy; unoccupied pilots of `ls_obs` are exactly zero.
    pub mask: Vec<bool>,
    pub draw: ImpairmentDraw,
}

impl DatasetRecord {
    pub fn snr_db(&self) -> f64 {
        self.draw.snr_db
    }

    pub fn observation(&self) -> Result<&CfrTensor> {
        self.ls_obs
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("record has no observation (truth-only)".into()))
    }

    pub fn shape(&self) -> Shape {
        self.truth.shape()
    }

    pub fn validate(&self) -> Result<()> {
        let shape = self.truth.shape();
        if self.mask.len() != shape.n_p {
            return Err(Error::Shape(format!(
                "mask has {} pilots, truth has {}",
                self.mask.len(),
                shape.n_p
            )));
        }
        if let Some(obs) = &self.ls_obs {
            obs.ensure_shape(shape)?;
            for i in 0..shape.n_sym {
                for k in (0..shape.n_p).filter(|&k| !self.mask[k]) {
                    for j in 0..shape.n_ant {
                        if obs[(i, k, j)] != Complex64::new(0.0, 0.0) {
                            return Err(Error::Format(format!(
                                "masked-out observation at ({i}, {k}, {j}) is non-zero"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// JSON header of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub grid: GridConfig,
    pub record_count: u64,
    pub has_observations: bool,
    /// Impairment stages enabled while generating; `None` when unknown
    /// (for example imported channels).
    pub toggles: Option<Toggles>,
    pub creation_seed: u64,
    #[serde(default)]
    pub description: String,
}

impl DatasetHeader {
    pub fn new(grid: &CarrierGrid, toggles: Option<Toggles>, creation_seed: u64) -> Self {
        Self {
            grid: grid.config(),
            record_count: 0,
            has_observations: true,
            toggles,
            creation_seed,
            description: String::new(),
        }
    }
}

/// Serialized file plus where its payload starts.
pub struct EncodedDataset {
    pub bytes: Vec<u8>,
    pub payload_offset: usize,
}

impl EncodedDataset {
    pub fn payload(&self) -> &[u8] {
        &self.bytes[self.payload_offset..]
    }
}

fn push_tensor(out: &mut Vec<u8>, t: &CfrTensor) {
    for v in t.values() {
        out.extend_from_slice(&(v.re as f32).to_le_bytes());
        out.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
}

/// Serializes records; `header.record_count` and `has_observations` are
/// filled in from the records.
pub fn encode_dataset(header: &DatasetHeader, records: &[DatasetRecord]) -> Result<EncodedDataset> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot write an empty dataset".into()))?;
    let grid = CarrierGrid::new(&header.grid)?;
    let shape = Shape::of_grid(&grid);
    let has_obs = first.ls_obs.is_some();
    for (n, r) in records.iter().enumerate() {
        if r.shape() != shape {
            return Err(Error::Shape(format!(
                "record {n} has shape {}, header grid implies {shape}",
                r.shape()
            )));
        }
        if r.ls_obs.is_some() != has_obs {
            return Err(Error::Shape(format!(
                "record {n} mixes truth-only and paired records"
            )));
        }
        r.validate()?;
    }
    let mut header = header.clone();
    header.record_count = records.len() as u64;
    header.has_observations = has_obs;
    let header_json = serde_json::to_vec(&header)?;

    let tensor_bytes = shape.len() * 8;
    let mut out = Vec::with_capacity(
        12 + header_json.len() + records.len() * (shape.n_p + tensor_bytes * 2 + 256),
    );
    out.extend_from_slice(&DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    let payload_offset = out.len();
    for r in records {
        out.extend(r.mask.iter().map(|&m| m as u8));
        if let Some(obs) = &r.ls_obs {
            push_tensor(&mut out, obs);
        }
        push_tensor(&mut out, &r.truth);
        let mut draw = serde_json::to_vec(&r.draw)?;
        draw.push(b'\n');
        out.extend_from_slice(&(draw.len() as u32).to_le_bytes());
        out.extend_from_slice(&draw);
    }
    Ok(EncodedDataset { bytes: out, payload_offset })
}

/// Writes `bytes` to a temporary sibling of `path`, then renames it into
/// place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    Ok(result?)
}

/// Writes a dataset file and returns the number of bytes written.
pub fn write_dataset(path: &Path, header: &DatasetHeader, records: &[DatasetRecord]) -> Result<u64> {
    let encoded = encode_dataset(header, records)?;
    write_atomic(path, &encoded.bytes)?;
    Ok(encoded.bytes.len() as u64)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format(format!(
                "truncated file: {what} needs {n} bytes at offset {}, {} left",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn tensor(&mut self, shape: Shape, what: &str) -> Result<CfrTensor> {
        let b = self.take(shape.len() * 8, what)?;
        let values = b
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
                Complex64::new(re as f64, im as f64)
            })
            .collect();
        CfrTensor::from_vec(shape, values)
    }
}

pub fn decode_dataset(bytes: &[u8]) -> Result<(DatasetHeader, Vec<DatasetRecord>)> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != DATASET_MAGIC {
        return Err(Error::BadMagic {
            expected: DATASET_MAGIC,
            found: [magic[0], magic[1], magic[2], magic[3]],
        });
    }
    let version = cur.u32("version")?;
    if version != DATASET_VERSION {
        return Err(Error::Version {
            expected: DATASET_VERSION,
            found: version,
        });
    }
    let header_len = cur.u32("header length")? as usize;
    let header: DatasetHeader = serde_json::from_slice(cur.take(header_len, "header")?)?;
    let grid = CarrierGrid::new(&header.grid)?;
    let shape = Shape::of_grid(&grid);
    let mut records = Vec::with_capacity(header.record_count.min(1 << 20) as usize);
    for n in 0..header.record_count {
        let what = format!("record {n}");
        let mask = cur
            .take(shape.n_p, &what)?
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::Format(format!("{what}: mask byte {other} is not 0/1"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        let ls_obs = if header.has_observations {
            Some(cur.tensor(shape, &what)?)
        } else {
            None
        };
        let truth = cur.tensor(shape, &what)?;
        let draw_len = cur.u32(&what)? as usize;
        let draw: ImpairmentDraw = serde_json::from_slice(cur.take(draw_len, &what)?)?;
        let record = DatasetRecord {
            ls_obs,
            truth,
            mask,
            draw,
        };
        record.validate()?;
        records.push(record);
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after {} records",
            bytes.len() - cur.pos,
            header.record_count
        )));
    }
    Ok((header, records))
}

pub fn read_dataset(path: &Path) -> Result<(DatasetHeader, Vec<DatasetRecord>)> {
    let bytes = std::fs::read(path)?;
    decode_dataset(&bytes)
}

/// Reads externally generated channels (for example ray-traced CFRs) as
/// truth-only records.
///
/// Each CSV row holds one (symbol, antenna) slice as `2·N_p` numbers
/// `re_0, im_0, re_1, im_1, ...`. Rows are ordered symbol-major within a
/// record, then antenna; consecutive groups of `N_sym·N_ant` rows form
/// records.
pub fn import_external_cfr(path: &Path, grid: &CarrierGrid) -> Result<Vec<DatasetRecord>> {
    let text = std::fs::read_to_string(path)?;
    parse_external_cfr(&text, grid)
}

pub fn parse_external_cfr(text: &str, grid: &CarrierGrid) -> Result<Vec<DatasetRecord>> {
    let shape = Shape::of_grid(grid);
    let width = 2 * shape.n_p;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row: r + 1,
            column: 0,
            message: e.to_string(),
        })?;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != width {
            return Err(Error::Shape(format!(
                "row {} has {} values, expected 2·N_p = {width}",
                r + 1,
                rec.len()
            )));
        }
        let mut nums = Vec::with_capacity(width);
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: r + 1,
                column: c + 1,
                message: format!("not a number: {cell:?}"),
            })?;
            nums.push(v);
        }
        rows.push(nums.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect());
    }
    if rows.is_empty() {
        return Err(Error::Format("no channel rows found".into()));
    }
    let per_record = shape.n_sym * shape.n_ant;
    if rows.len() % per_record != 0 {
        return Err(Error::Shape(format!(
            "{} rows is not a multiple of N_sym·N_ant = {per_record}",
            rows.len()
        )));
    }
    Ok(rows
        .chunks_exact(per_record)
        .map(|chunk| {
            let truth = CfrTensor::from_fn(shape, |i, k, j| chunk[i * shape.n_ant + j][k]).quantize_f32();
            DatasetRecord {
                ls_obs: None,
                truth,
                mask: vec![true; shape.n_p],
                draw: ImpairmentDraw::identity(shape.n_ant, 0),
            }
        })
        .collect())
}

/// Shuffles `0..n` with `seed` and cuts it at the cumulative fractions.
pub fn split_indices(n: usize, fractions: &[f64], seed: u64) -> Result<Vec<Vec<usize>>> {
    if fractions.is_empty() || fractions.iter().any(|f| !f.is_finite() || *f <= 0.0) {
        return Err(Error::InvalidArgument("split fractions must be positive".into()));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("split fractions sum to {total}, not 1")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed::derive(seed, seed::stream::SPLIT, 0)));
    let mut parts = Vec::with_capacity(fractions.len());
    let mut cum = 0.0;
    let mut start = 0;
    for (p, f) in fractions.iter().enumerate() {
        cum += f;
        let end = if p + 1 == fractions.len() {
            n
        } else {
            ((cum * n as f64).round() as usize).min(n)
        };
        parts.push(order[start..end.max(start)].to_vec());
        start = end.max(start);
    }
    Ok(parts)
}

pub fn split<T: Clone>(items: &[T], fractions: &[f64], seed: u64) -> Result<Vec<Vec<T>>> {
    Ok(split_indices(items.len(), fractions, seed)?
        .into_iter()
        .map(|idx| idx.into_iter().map(|i| items[i].clone()).collect())
        .collect())
}
