//! On-disk formats. All binary formats are little-endian and start with an
//! 8-byte ASCII magic.
//!
//! | file          | magic      | body                                                          |
//! |---------------|------------|---------------------------------------------------------------|
//! | `.desc`       | `ISTA0001` | u32 H, u32 W, u32 D, H·W·D f32                                 |
//! | `.codebook`   | `ISTACB01` | u32 N, u32 D, u64 seed, N·D f64                                |
//! | `.pairstats`  | `ISTAPS01` | u32 N, u32 D, per pair: u64 count, D·D f64                     |
//! | `.pairmodel`  | `ISTAPM01` | u32 N, u32 D, per pair: u64 count, u32 rank, σ, U cols, V cols |
//! | `.redmodel`   | `ISTARD01` | u32 blocks, per block: u32 in, u32 out, f64 matrix; full part  |
//! | `.sig`        | `ISTASG01` | u32 dim, dim f32                                               |
//! | `.index`      | `ISTAIX01` | u32 count, u32 dim, per entry: id, resolutions, dim f32        |
//!
//! Grid files are named `<image_id>.<pixels>.desc`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ista_core::reduce::Projection;
use ista_core::{
    BlockProjection, Codebook, DescriptorGrid, FullProjection, GroundTruth, PairBasis, PairComponent,
    PairStatistics, Resolution, Signature,
};

use crate::error::{Error, Result};

pub const DESC_MAGIC: &[u8; 8] = b"ISTA0001";
pub const CODEBOOK_MAGIC: &[u8; 8] = b"ISTACB01";
pub const PAIRSTATS_MAGIC: &[u8; 8] = b"ISTAPS01";
pub const PAIRMODEL_MAGIC: &[u8; 8] = b"ISTAPM01";
pub const REDMODEL_MAGIC: &[u8; 8] = b"ISTARD01";
pub const SIG_MAGIC: &[u8; 8] = b"ISTASG01";
pub const INDEX_MAGIC: &[u8; 8] = b"ISTAIX01";

struct Encoder(Vec<u8>);

impl Encoder {
    fn new(magic: &[u8; 8]) -> Self {
        Encoder(magic.to_vec())
    }
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32s(&mut self, vs: impl IntoIterator<Item = f32>) {
        for v in vs {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
    fn f64s<'a>(&mut self, vs: impl IntoIterator<Item = &'a f64>) {
        for v in vs {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
    fn bytes(&mut self, b: &[u8]) {
        self.u32(b.len());
        self.0.extend_from_slice(b);
    }
}

/// Writes through a sibling temp file so readers never see partial output.
fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

struct Decoder<'a> {
    path: &'a Path,
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn new(path: &'a Path, buf: &'a [u8], magic: &[u8; 8]) -> Result<Self> {
        if buf.len() < 8 || &buf[..8] != magic {
            let found = String::from_utf8_lossy(&buf[..buf.len().min(8)]).into_owned();
            return Err(Error::format(
                path,
                format!(
                    "bad magic {found:?}, expected {:?}",
                    String::from_utf8_lossy(magic)
                ),
            ));
        }
        Ok(Self { path, buf, pos: 8 })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::format(
                self.path,
                format!(
                    "truncated: need {} more bytes at offset {}, file has {}",
                    n,
                    self.pos,
                    self.buf.len()
                ),
            )),
        }
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| self.overflow())?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| self.overflow())?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
    fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::format(self.path, "identifier is not UTF-8"))
    }
    fn overflow(&self) -> Error {
        Error::format(self.path, "declared size overflows")
    }
    fn finish(self) -> Result<()> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(Error::format(
                self.path,
                format!(
                    "{} trailing bytes after payload (expected size {}, actual {})",
                    self.buf.len() - self.pos,
                    self.pos,
                    self.buf.len()
                ),
            ))
        }
    }
}

fn file_name(path: &Path) -> Result<&str> {
    path.file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::format(path, "file name is not valid UTF-8"))
}

/// Splits `<image_id>.<pixels>` into its parts.
pub fn split_resolution_stem(stem: &str) -> Option<(&str, u32)> {
    let (id, px) = stem.rsplit_once('.')?;
    let pixels = px.parse().ok()?;
    (!id.is_empty()).then_some((id, pixels))
}

/// Parses a grid file name `<image_id>.<pixels>.desc`.
pub fn parse_grid_name(path: &Path) -> Result<(String, Resolution)> {
    let name = file_name(path)?;
    name.strip_suffix(".desc")
        .and_then(split_resolution_stem)
        .map(|(id, px)| (id.to_string(), Resolution::from_pixels(px)))
        .ok_or_else(|| Error::format(path, "grid file name must be <image_id>.<pixels>.desc"))
}

pub fn grid_file_name(image_id: &str, resolution: Resolution) -> String {
    format!("{image_id}.{}.desc", resolution.pixels())
}

/// Exact size in bytes of a `.desc` file for the given shape.
pub fn desc_file_size(height: usize, width: usize, depth: usize) -> usize {
    8 + 12 + height * width * depth * 4
}

pub fn save_grid(grid: &DescriptorGrid, path: &Path) -> Result<()> {
    let values: Vec<f32> = grid.values().iter().map(|&v| v as f32).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(ista_core::Error::Validation(format!(
            "value {} at flat index {i} does not fit in f32",
            grid.values()[i]
        ))
        .into());
    }
    let mut e = Encoder::new(DESC_MAGIC);
    e.u32(grid.height());
    e.u32(grid.width());
    e.u32(grid.depth());
    e.f32s(values);
    write_file(path, &e.0)
}

/// Loads a grid exactly as stored (no normalization); identity comes from the file name.
pub fn load_grid(path: &Path) -> Result<DescriptorGrid> {
    let (image_id, resolution) = parse_grid_name(path)?;
    let buf = read_file(path)?;
    let mut d = Decoder::new(path, &buf, DESC_MAGIC)?;
    let (h, w, depth) = (d.u32()?, d.u32()?, d.u32()?);
    let expected = h
        .checked_mul(w)
        .and_then(|v| v.checked_mul(depth))
        .and_then(|v| v.checked_mul(4))
        .and_then(|v| v.checked_add(20))
        .ok_or_else(|| Error::format(path, "declared grid size overflows"))?;
    if buf.len() != expected {
        return Err(Error::format(
            path,
            format!(
                "payload length mismatch for {h}x{w}x{depth} grid: expected {expected} bytes, actual {}",
                buf.len()
            ),
        ));
    }
    let values = d.f32s(h * w * depth)?.into_iter().map(f64::from).collect();
    d.finish()?;
    DescriptorGrid::new(image_id, resolution, h, w, depth, values)
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Reads only the header of a grid file: `(height, width, depth)`.
pub fn read_grid_shape(path: &Path) -> Result<(usize, usize, usize)> {
    use std::io::Read;
    let mut head = [0u8; 20];
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    f.read_exact(&mut head).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::format(path, "truncated header"),
        _ => Error::io(path, e),
    })?;
    let mut d = Decoder::new(path, &head, DESC_MAGIC)?;
    Ok((d.u32()?, d.u32()?, d.u32()?))
}

/// Splits a signature file name `<image_id>.<pixels>.sig`.
pub fn parse_signature_name(path: &Path) -> Result<(String, u32)> {
    let name = file_name(path)?;
    name.strip_suffix(".sig")
        .and_then(split_resolution_stem)
        .map(|(id, px)| (id.to_string(), px))
        .ok_or_else(|| Error::format(path, "signature file name must be <image_id>.<pixels>.sig"))
}

pub fn save_codebook(cb: &Codebook, path: &Path) -> Result<()> {
    let mut e = Encoder::new(CODEBOOK_MAGIC);
    e.u32(cb.len());
    e.u32(cb.dim());
    e.u64(cb.seed());
    e.f64s(cb.centers());
    write_file(path, &e.0)
}

pub fn load_codebook(path: &Path) -> Result<Codebook> {
    let buf = read_file(path)?;
    let mut d = Decoder::new(path, &buf, CODEBOOK_MAGIC)?;
    let (n, dim, seed) = (d.u32()?, d.u32()?, d.u64()?);
    let centers = d.f64s(n * dim)?;
    d.finish()?;
    Codebook::new(centers, dim, seed, None).map_err(|e| Error::format(path, e.to_string()))
}

pub fn save_pair_stats(stats: &PairStatistics, path: &Path) -> Result<()> {
    let mut e = Encoder::new(PAIRSTATS_MAGIC);
    let (n, dim) = (stats.clusters(), stats.dim());
    e.u32(n);
    e.u32(dim);
    for p in 0..n * n {
        e.u64(stats.counts()[p]);
        e.f64s(&stats.sums()[p * dim * dim..(p + 1) * dim * dim]);
    }
    write_file(path, &e.0)
}

pub fn load_pair_stats(path: &Path) -> Result<PairStatistics> {
    let buf = read_file(path)?;
    let mut d = Decoder::new(path, &buf, PAIRSTATS_MAGIC)?;
    let (n, dim) = (d.u32()?, d.u32()?);
    let mut counts = Vec::with_capacity(n * n);
    let mut sums = Vec::with_capacity(n * n * dim * dim);
    for _ in 0..n * n {
        counts.push(d.u64()?);
        sums.extend(d.f64s(dim * dim)?);
    }
    d.finish()?;
    PairStatistics::from_parts(n, dim, sums, counts).map_err(|e| Error::format(path, e.to_string()))
}

pub fn save_pair_model(basis: &PairBasis, path: &Path) -> Result<()> {
    let mut e = Encoder::new(PAIRMODEL_MAGIC);
    e.u32(basis.clusters());
    e.u32(basis.dim());
    for c in basis.pairs() {
        e.u64(c.count);
        e.u32(c.rank());
        e.f64s(&c.singular_values);
        e.f64s(&c.u);
        e.f64s(&c.v);
    }
    write_file(path, &e.0)
}

pub fn load_pair_model(path: &Path) -> Result<PairBasis> {
    let buf = read_file(path)?;
    let mut d = Decoder::new(path, &buf, PAIRMODEL_MAGIC)?;
    let (n, dim) = (d.u32()?, d.u32()?);
    let mut pairs = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        let count = d.u64()?;
        let rank = d.u32()?;
        if rank > dim {
            return Err(Error::format(path, format!("rank {rank} exceeds depth {dim}")));
        }
        pairs.push(PairComponent {
            count,
            singular_values: d.f64s(rank)?,
            u: d.f64s(rank * dim)?,
            v: d.f64s(rank * dim)?,
        });
    }
    d.finish()?;
    PairBasis::from_pairs(n, dim, pairs).map_err(|e| Error::format(path, e.to_string()))
}

/// Block projections plus, once fitted, the full projection.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionModel {
    pub blocks: BlockProjection,
    pub full: Option<FullProjection>,
}

pub fn save_reduction_model(model: &ReductionModel, path: &Path) -> Result<()> {
    let mut e = Encoder::new(REDMODEL_MAGIC);
    e.u32(model.blocks.blocks().len());
    for b in model.blocks.blocks() {
        e.u32(b.cols());
        e.u32(b.rows());
        e.f64s(b.data());
    }
    match &model.full {
        Some(full) => {
            e.u32(full.input_dim());
            e.u32(full.output_dim());
            e.u8(full.whiten() as u8);
            e.f64s(full.matrix().data());
        }
        None => {
            e.u32(0);
            e.u32(0);
            e.u8(0);
        }
    }
    write_file(path, &e.0)
}

pub fn load_reduction_model(path: &Path) -> Result<ReductionModel> {
    let buf = read_file(path)?;
    let mut d = Decoder::new(path, &buf, REDMODEL_MAGIC)?;
    let count = d.u32()?;
    let mut blocks = Vec::with_capacity(count);
    for _ in 0..count {
        let (input, output) = (d.u32()?, d.u32()?);
        let data = d.f64s(input * output)?;
        blocks.push(Projection::new(output, input, data).map_err(|e| Error::format(path, e.to_string()))?);
    }
    let (input, output, whiten) = (d.u32()?, d.u32()?, d.u8()?);
    let full = if input == 0 && output == 0 {
        None
    } else {
        let data = d.f64s(input * output)?;
        let matrix = Projection::new(output, input, data).map_err(|e| Error::format(path, e.to_string()))?;
        Some(FullProjection::new(matrix, whiten != 0, Vec::new()))
    };
    d.finish()?;
    Ok(ReductionModel {
        blocks: BlockProjection::from_blocks(blocks),
        full,
    })
}

pub fn save_vector(values: &[f64], path: &Path) -> Result<()> {
    let mut e = Encoder::new(SIG_MAGIC);
    e.u32(values.len());
    e.f32s(values.iter().map(|&v| v as f32));
    write_file(path, &e.0)
}

pub fn load_vector(path: &Path) -> Result<Vec<f64>> {
    let buf = read_file(path)?;
    let mut d = Decoder::new(path, &buf, SIG_MAGIC)?;
    let dim = d.u32()?;
    let v = d.f32s(dim)?.into_iter().map(f64::from).collect::<Vec<_>>();
    d.finish()?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::format(path, "signature has non-finite entries"));
    }
    Ok(v)
}

pub fn save_index(entries: &[Signature], path: &Path) -> Result<()> {
    let dim = entries.first().map_or(0, Signature::dim);
    if let Some(bad) = entries.iter().find(|s| s.dim() != dim) {
        return Err(ista_core::Error::DimensionMismatch {
            context: "index entry",
            expected: dim,
            actual: bad.dim(),
        }
        .into());
    }
    let mut e = Encoder::new(INDEX_MAGIC);
    e.u32(entries.len());
    e.u32(dim);
    for s in entries {
        e.bytes(s.image_id.as_bytes());
        e.u32(s.resolutions.len());
        for &r in &s.resolutions {
            e.u32(r as usize);
        }
        e.f32s(s.vector.iter().map(|&v| v as f32));
    }
    write_file(path, &e.0)
}

pub fn load_index(path: &Path) -> Result<Vec<Signature>> {
    let buf = read_file(path)?;
    let mut d = Decoder::new(path, &buf, INDEX_MAGIC)?;
    let (count, dim) = (d.u32()?, d.u32()?);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let id = d.string()?;
        let nres = d.u32()?;
        let resolutions = (0..nres).map(|_| d.u32().map(|r| r as u32)).collect::<Result<Vec<_>>>()?;
        let vector = d.f32s(dim)?.into_iter().map(f64::from).collect();
        out.push(Signature::new(id, vector, resolutions).map_err(|e| Error::format(path, e.to_string()))?);
    }
    d.finish()?;
    Ok(out)
}

/// Parses `query_id | positive ids... | junk ids...` lines; `#` starts a comment.
pub fn parse_ground_truth(text: &str, path: &Path) -> Result<Vec<GroundTruth>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('|').collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::format(
                path,
                format!("line {}: expected `query | positives | junk`", lineno + 1),
            ));
        }
        let query = fields[0].trim();
        if query.is_empty() || query.contains(char::is_whitespace) {
            return Err(Error::format(path, format!("line {}: bad query id", lineno + 1)));
        }
        let ids = |f: Option<&&str>| -> Vec<String> {
            f.map(|s| s.split_whitespace().map(str::to_string).collect())
                .unwrap_or_default()
        };
        let gt = GroundTruth::new(query, ids(fields.get(1)), ids(fields.get(2)))
            .map_err(|e| Error::format(path, format!("line {}: {e}", lineno + 1)))?;
        out.push(gt);
    }
    Ok(out)
}

pub fn load_ground_truth(path: &Path) -> Result<Vec<GroundTruth>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ground_truth(&text, path)
}

pub fn format_ground_truth(entries: &[GroundTruth]) -> String {
    let mut s = String::new();
    for gt in entries {
        let pos: Vec<&str> = gt.positives.iter().map(String::as_str).collect();
        let junk: Vec<&str> = gt.junk.iter().map(String::as_str).collect();
        s.push_str(&format!("{} | {} | {}\n", gt.query_id, pos.join(" "), junk.join(" ")));
    }
    s
}

pub fn save_ground_truth(entries: &[GroundTruth], path: &Path) -> Result<()> {
    write_file(path, format_ground_truth(entries).as_bytes())
}

/// Ranking as TSV lines `rank<TAB>image_id<TAB>score`, ranks starting at 1.
pub fn format_ranking(ranking: &[(String, f64)]) -> String {
    ranking
        .iter()
        .enumerate()
        .map(|(i, (id, score))| format!("{}\t{id}\t{score:.6}\n", i + 1))
        .collect()
}

/// Files in `dir` ending in `suffix`, sorted by name.
pub fn list_files(dir: &Path, suffix: &str) -> Result<Vec<PathBuf>> {
    let rd = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let p = entry.path();
        if p.is_file() && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(suffix)) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(h: usize, w: usize, d: usize, values: Vec<f64>) -> DescriptorGrid {
        DescriptorGrid::new("img", Resolution::R512, h, w, d, values).unwrap()
    }

    #[test]
    fn smallest_grid_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.512.desc");
        let g = grid(1, 1, 2, vec![1.0, 0.0]);
        save_grid(&g, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 8 + 12 + 8);
        assert_eq!(&bytes[..8], b"ISTA0001");
        assert_eq!(&bytes[8..20], &[1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&bytes[20..], &[0, 0, 0x80, 0x3f, 0, 0, 0, 0]);
        assert_eq!(load_grid(&path).unwrap(), g);
    }

    #[test]
    fn vgg_sized_grid_file_size() {
        assert_eq!(desc_file_size(32, 32, 512), 2_097_172);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("big.512.desc");
        let g = DescriptorGrid::new("big", Resolution::R512, 32, 32, 512, vec![0.5; 32 * 32 * 512]).unwrap();
        save_grid(&g, &path).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 2_097_172);
    }

    #[test]
    fn nan_grid_is_never_written() {
        let dir = tempfile::tempdir().unwrap();
        let err = DescriptorGrid::new("x", Resolution::R512, 1, 1, 2, vec![f64::NAN, 0.0]);
        assert!(matches!(err, Err(ista_core::Error::Validation(_))));
        // values beyond f32 range are refused at save time
        let g = grid(1, 1, 1, vec![1e300]);
        let path = dir.path().join("img.512.desc");
        assert!(save_grid(&g, &path).is_err());
        assert!(!path.exists());
    }

    #[test]
    fn bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.512.desc");
        save_grid(&grid(2, 2, 2, vec![0.25; 8]), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();

        let bad = dir.path().join("bad.512.desc");
        let mut wrong = bytes.clone();
        wrong[..8].copy_from_slice(b"XXXX0000");
        fs::write(&bad, &wrong).unwrap();
        let e = load_grid(&bad).unwrap_err().to_string();
        assert!(e.contains("bad magic"), "{e}");

        bytes.truncate(bytes.len() - 4);
        let short = dir.path().join("short.512.desc");
        fs::write(&short, &bytes).unwrap();
        let e = load_grid(&short).unwrap_err().to_string();
        assert!(e.contains("expected 52") && e.contains("actual 48"), "{e}");
    }

    #[test]
    fn missing_file_is_missing_input() {
        let e = load_codebook(Path::new("/nonexistent/x.codebook")).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn grid_names() {
        let (id, r) = parse_grid_name(Path::new("a/holiday.100000.1024.desc")).unwrap();
        assert_eq!((id.as_str(), r), ("holiday.100000", Resolution::R1024));
        assert!(parse_grid_name(Path::new("plain.desc")).is_err());
        assert_eq!(grid_file_name("x", Resolution::Custom(300)), "x.300.desc");
    }

    #[test]
    fn ground_truth_text() {
        let text = "# comment\nq1 | a b | j\n\nq2 | c |\nq3 | d\n";
        let gts = parse_ground_truth(text, Path::new("gt")).unwrap();
        assert_eq!(gts.len(), 3);
        assert_eq!(gts[0].positives.len(), 2);
        assert!(gts[0].junk.contains("j"));
        assert!(gts[2].junk.is_empty());
        let again = parse_ground_truth(&format_ground_truth(&gts), Path::new("gt")).unwrap();
        assert_eq!(again, gts);
        assert!(parse_ground_truth("q | a | a\n", Path::new("gt")).is_err());
        assert!(parse_ground_truth("q a b\n", Path::new("gt")).is_err());
    }

    #[test]
    fn ranking_tsv() {
        let s = format_ranking(&[("b".into(), 0.5), ("a".into(), -0.25)]);
        assert_eq!(s, "1\tb\t0.500000\n2\ta\t-0.250000\n");
    }

    #[test]
    fn model_files_round_trip() {
        use ista_core::PairBasis;
        let dir = tempfile::tempdir().unwrap();
        let cb = Codebook::new(vec![1.0, 0.0, 0.0, 1.0], 2, 77, None).unwrap();
        let p = dir.path().join("m.codebook");
        save_codebook(&cb, &p).unwrap();
        assert_eq!(load_codebook(&p).unwrap(), cb);

        let stats = PairStatistics::from_parts(2, 2, (0..16).map(f64::from).collect(), vec![1, 2, 3, 4]).unwrap();
        let p = dir.path().join("s.pairstats");
        save_pair_stats(&stats, &p).unwrap();
        assert_eq!(load_pair_stats(&p).unwrap(), stats);

        let basis = PairBasis::fit(&stats, 0.9, 1).unwrap();
        let p = dir.path().join("b.pairmodel");
        save_pair_model(&basis, &p).unwrap();
        assert_eq!(load_pair_model(&p).unwrap(), basis);

        let red = ReductionModel {
            blocks: BlockProjection::from_blocks(vec![Projection::new(1, 2, vec![0.5, 0.25]).unwrap()]),
            full: None,
        };
        let p = dir.path().join("r.redmodel");
        save_reduction_model(&red, &p).unwrap();
        assert_eq!(load_reduction_model(&p).unwrap(), red);
        let full = ReductionModel {
            full: Some(FullProjection::new(Projection::new(1, 1, vec![2.0]).unwrap(), true, Vec::new())),
            ..red
        };
        save_reduction_model(&full, &p).unwrap();
        assert_eq!(load_reduction_model(&p).unwrap(), full);

        let idx = vec![
            Signature::new("a", vec![0.5, 0.25], vec![512, 1024]).unwrap(),
            Signature::new("b", vec![-1.0, 0.0], vec![512]).unwrap(),
        ];
        let p = dir.path().join("i.index");
        save_index(&idx, &p).unwrap();
        assert_eq!(load_index(&p).unwrap(), idx);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn grids_round_trip_bit_exactly(
            h in 1usize..5, w in 1usize..5, d in 1usize..4,
            seed in proptest::collection::vec(-1e6f32..1e6f32, 64)
        ) {
            let dir = tempfile::tempdir().unwrap();
            let values: Vec<f64> = seed.iter().cycle().take(h * w * d).map(|&v| f64::from(v)).collect();
            let g = DescriptorGrid::new("p", Resolution::R1024, h, w, d, values).unwrap();
            let path = dir.path().join("p.1024.desc");
            save_grid(&g, &path).unwrap();
            let back = load_grid(&path).unwrap();
            prop_assert_eq!(back.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            g.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(back, g);
        }

        #[test]
        fn signature_vectors_round_trip(v in proptest::collection::vec(-10.0f32..10.0, 0..40)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("v.sig");
            let values: Vec<f64> = v.iter().map(|&x| f64::from(x)).collect();
            save_vector(&values, &path).unwrap();
            prop_assert_eq!(load_vector(&path).unwrap(), values);
        }
    }
}
