//! Latent-code → orientation codebook with exact cosine kNN search.
//!
//! File layout (all little-endian, no padding):
//!
//! ```text
//! "AAEC" | u32 version = 1 | u32 entry count | u32 dim
//! per entry: dim x f32 code | 9 x f32 rotation (row-major) | f32 bbox_diag | 2 x f32 bbox_center
//! ```

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Matrix3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{Rotation3, Vec2};
use crate::image::Image;

pub const MAGIC: &[u8; 4] = b"AAEC";
pub const VERSION: u32 = 1;
pub const DEFAULT_DIM: usize = 128;

/// Entries scored per parallel task.
const BLOCK: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode(pub Vec<f32>);

impl LatentCode {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::bounds("latent code", "non-finite value"));
        }
        Ok(LatentCode(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f32) -> LatentCode {
        LatentCode(self.0.iter().map(|v| v * s).collect())
    }
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f64 {
    // four independent accumulators so the loop vectorizes
    let mut acc = [0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * i + l] as f64 * b[4 * i + l] as f64;
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] as f64 * b[i] as f64;
    }
    s
}

/// `a·b / (|a||b|)`.
pub fn cosine_similarity(a: &LatentCode, b: &LatentCode) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateCode);
    }
    Ok((dot(&a.0, &b.0) / (na * nb)).clamp(-1.0, 1.0))
}

/// One codebook row, held at file precision (f32) so that a saved and
/// reloaded codebook compares bit-identical to the original.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookEntry {
    pub code: LatentCode,
    /// Camera-to-object rotation, row-major.
    rotation_rows: [f32; 9],
    /// Silhouette bbox diagonal in pixels.
    pub bbox_diag: f32,
    pub bbox_center: [f32; 2],
}

impl CodebookEntry {
    pub fn new(code: LatentCode, rotation: &Rotation3, bbox_diag: f64, bbox_center: Vec2) -> Self {
        CodebookEntry {
            code,
            rotation_rows: rotation.to_rows().map(|v| v as f32),
            bbox_diag: bbox_diag as f32,
            bbox_center: [bbox_center.x as f32, bbox_center.y as f32],
        }
    }

    /// Stored rotation re-projected onto SO(3).
    pub fn rotation(&self) -> Rotation3 {
        Rotation3::orthonormalized(Matrix3::from_fn(|i, j| self.rotation_rows[3 * i + j] as f64))
    }

    pub fn rotation_rows(&self) -> &[f32; 9] {
        &self.rotation_rows
    }

    pub fn bbox_center(&self) -> Vec2 {
        Vec2::new(self.bbox_center[0] as f64, self.bbox_center[1] as f64)
    }
}

/// Immutable codebook; norms are cached at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    dim: usize,
    entries: Vec<CodebookEntry>,
    norms: Vec<f64>,
}

/// Anything that maps an image crop to a latent code.
pub trait Encoder {
    fn dim(&self) -> usize;
    fn encode(&self, image: &Image) -> Result<LatentCode>;
}

impl<F> Encoder for (usize, F)
where
    F: Fn(&Image) -> Result<LatentCode>,
{
    fn dim(&self) -> usize {
        self.0
    }
    fn encode(&self, image: &Image) -> Result<LatentCode> {
        (self.1)(image)
    }
}

/// Input to [`build_codebook`]: an encoder-ready image plus its labels.
#[derive(Debug, Clone)]
pub struct LabeledView {
    pub image: Image,
    pub rotation: Rotation3,
    pub bbox_diag: f64,
    pub bbox_center: Vec2,
}

impl Codebook {
    pub fn from_entries(dim: usize, entries: Vec<CodebookEntry>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::bounds("codebook dim", "must be positive"));
        }
        for e in &entries {
            if e.code.dim() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    actual: e.code.dim(),
                });
            }
            if !(e.bbox_diag > 0.0) {
                return Err(Error::DegenerateBbox(format!("bbox diagonal {}", e.bbox_diag)));
            }
        }
        let norms: Vec<f64> = entries.iter().map(|e| e.code.norm()).collect();
        if norms.iter().any(|&n| n == 0.0) {
            return Err(Error::DegenerateCode);
        }
        Ok(Codebook { dim, entries, norms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CodebookEntry] {
        &self.entries
    }

    pub fn entry(&self, i: usize) -> &CodebookEntry {
        &self.entries[i]
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// Exact top-`k` entries by cosine similarity, descending; ties go to
    /// the lower index.
    pub fn knn_query(&self, q: &LatentCode, k: usize) -> Result<Vec<(usize, f64)>> {
        if k == 0 || k > self.len() {
            return Err(Error::bounds("k", format!("{k} not in 1..={}", self.len())));
        }
        if q.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: q.dim(),
            });
        }
        let qn = q.norm();
        if qn == 0.0 {
            return Err(Error::DegenerateCode);
        }
        let partials: Vec<Vec<Hit>> = self
            .entries
            .par_chunks(BLOCK)
            .enumerate()
            .map(|(b, chunk)| {
                let base = b * BLOCK;
                let mut heap = BinaryHeap::with_capacity(k + 1);
                for (j, e) in chunk.iter().enumerate() {
                    let idx = base + j;
                    let sim = dot(&e.code.0, &q.0) / (self.norms[idx] * qn);
                    push_bounded(&mut heap, Hit { sim, idx }, k);
                }
                heap.into_vec()
            })
            .collect();
        let mut heap = BinaryHeap::with_capacity(k + 1);
        for hit in partials.into_iter().flatten() {
            push_bounded(&mut heap, hit, k);
        }
        let mut hits = heap.into_vec();
        hits.sort_unstable();
        Ok(hits.into_iter().map(|h| (h.idx, h.sim)).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.len() as u32).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        for e in &self.entries {
            for v in &e.code.0 {
                w.write_all(&v.to_le_bytes())?;
            }
            for v in e.rotation_rows.iter().chain([&e.bbox_diag]).chain(&e.bbox_center) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        let magic = r.take(4, "magic")?;
        if magic != MAGIC {
            return Err(Error::Format {
                offset: 0,
                msg: format!("bad magic {magic:?}"),
            });
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let count = r.u32("entry count")? as usize;
        let dim_offset = r.pos;
        let dim = r.u32("dim")? as usize;
        if dim == 0 {
            return Err(Error::Format {
                offset: dim_offset as u64,
                msg: "dim is zero".into(),
            });
        }
        let record = (dim + 12) * 4;
        let needed = 16 + count * record;
        if bytes.len() < needed {
            return Err(Error::Format {
                offset: bytes.len() as u64,
                msg: format!("truncated: expected {needed} bytes, file has {}", bytes.len()),
            });
        }
        if bytes.len() > needed {
            return Err(Error::Format {
                offset: needed as u64,
                msg: format!("{} trailing bytes", bytes.len() - needed),
            });
        }
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let start = r.pos;
            let code = (0..dim).map(|_| r.f32("code")).collect::<Result<Vec<_>>>()?;
            let mut rotation_rows = [0f32; 9];
            for v in rotation_rows.iter_mut() {
                *v = r.f32("rotation")?;
            }
            let bbox_diag = r.f32("bbox_diag")?;
            let bbox_center = [r.f32("bbox_center")?, r.f32("bbox_center")?];
            let m = Matrix3::from_fn(|i, j| rotation_rows[3 * i + j] as f64);
            if (m.transpose() * m - Matrix3::identity()).abs().max() > 1e-4 {
                return Err(Error::Format {
                    offset: (start + dim * 4) as u64,
                    msg: "rotation is not orthonormal".into(),
                });
            }
            let code = LatentCode::new(code).map_err(|_| Error::Format {
                offset: start as u64,
                msg: "non-finite code".into(),
            })?;
            entries.push(CodebookEntry {
                code,
                rotation_rows,
                bbox_diag,
                bbox_center,
            });
        }
        Codebook::from_entries(dim, entries)
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format {
                offset: self.pos as u64,
                msg: format!("unexpected end of file reading {what}"),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Heap element ordered so that the *worst* hit is at the top of a max-heap:
/// lower similarity is "greater", and among equal similarities the higher
/// index is "greater".
#[derive(Debug, Clone, Copy)]
struct Hit {
    sim: f64,
    idx: usize,
}

impl PartialEq for Hit {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Hit {}

impl PartialOrd for Hit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Hit {
    fn cmp(&self, other: &Self) -> Ordering {
        other.sim.total_cmp(&self.sim).then(self.idx.cmp(&other.idx))
    }
}

fn push_bounded(heap: &mut BinaryHeap<Hit>, hit: Hit, k: usize) {
    if heap.len() < k {
        heap.push(hit);
    } else if let Some(worst) = heap.peek() {
        if hit < *worst {
            heap.pop();
            heap.push(hit);
        }
    }
}

/// Encodes each view in order. All images must share one shape and every
/// code must have the encoder's declared `dim`.
pub fn build_codebook<E, I>(encoder: &E, views: I) -> Result<Codebook>
where
    E: Encoder + ?Sized,
    I: IntoIterator<Item = Result<LabeledView>>,
{
    let dim = encoder.dim();
    let mut entries = Vec::new();
    let mut shape: Option<(usize, usize, usize)> = None;
    for view in views {
        let view = view?;
        let s = (view.image.width, view.image.height, view.image.channels);
        match shape {
            None => shape = Some(s),
            Some(first) if first != s => {
                return Err(Error::Dimension {
                    expected: first.0 * first.1 * first.2,
                    actual: s.0 * s.1 * s.2,
                })
            }
            _ => {}
        }
        let code = encoder.encode(&view.image)?;
        if code.dim() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: code.dim(),
            });
        }
        entries.push(CodebookEntry::new(
            code,
            &view.rotation,
            view.bbox_diag,
            view.bbox_center,
        ));
    }
    if entries.is_empty() {
        return Err(Error::EmptyInput("codebook views"));
    }
    Codebook::from_entries(dim, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_codebook(n: usize, dim: usize, seed: u64) -> Codebook {
        let mut rng = Rng::seed_from_u64(seed);
        let entries = (0..n)
            .map(|_| {
                CodebookEntry::new(
                    LatentCode((0..dim).map(|_| rng.uniform(-1.0, 1.0) as f32).collect()),
                    &Rotation3::identity(),
                    10.0,
                    Vec2::new(1.0, 2.0),
                )
            })
            .collect();
        Codebook::from_entries(dim, entries).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let a = LatentCode(vec![1.0, 0.0]);
        let b = LatentCode(vec![0.0, 1.0]);
        let c = LatentCode(vec![1.0, 1.0]);
        assert_eq!(cosine_similarity(&a, &a).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&a, &b).unwrap(), 0.0);
        assert!((cosine_similarity(&a, &c).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(matches!(
            cosine_similarity(&a, &LatentCode(vec![0.0, 0.0])),
            Err(Error::DegenerateCode)
        ));
        assert!(matches!(
            cosine_similarity(&a, &LatentCode(vec![1.0])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn knn_bounds_and_self_match() {
        let cb = random_codebook(50, 8, 1);
        assert!(cb.knn_query(&cb.entry(0).code, 0).is_err());
        assert!(cb.knn_query(&cb.entry(0).code, 51).is_err());
        for i in [0, 17, 49] {
            let hits = cb.knn_query(&cb.entry(i).code, 3).unwrap();
            assert_eq!(hits[0].0, i);
            assert!((hits[0].1 - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn ties_go_to_lower_index() {
        let e = |v: Vec<f32>| CodebookEntry::new(LatentCode(v), &Rotation3::identity(), 1.0, Vec2::zeros());
        let cb = Codebook::from_entries(
            2,
            vec![
                e(vec![0.0, 1.0]),
                e(vec![2.0, 0.0]),
                e(vec![1.0, 0.0]),
                e(vec![3.0, 0.0]),
            ],
        )
        .unwrap();
        let hits = cb.knn_query(&LatentCode(vec![1.0, 0.0]), 3).unwrap();
        assert_eq!(hits.iter().map(|h| h.0).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn build_single_view() {
        let enc = (4usize, |img: &Image| LatentCode::new(img.data.clone()));
        let view = LabeledView {
            image: Image::gray(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap(),
            rotation: Rotation3::identity(),
            bbox_diag: 3.0,
            bbox_center: Vec2::new(1.0, 1.0),
        };
        let cb = build_codebook(&enc, vec![Ok(view.clone())]).unwrap();
        assert_eq!(cb.len(), 1);
        let hits = cb.knn_query(&enc.encode(&view.image).unwrap(), 1).unwrap();
        assert!((hits[0].1 - 1.0).abs() < 1e-12);

        let bad = (3usize, |img: &Image| LatentCode::new(img.data.clone()));
        assert!(matches!(
            build_codebook(&bad, vec![Ok(view)]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn format_errors() {
        assert!(matches!(
            Codebook::from_bytes(&[]),
            Err(Error::Format { offset: 0, .. })
        ));
        let mut bytes = Vec::new();
        random_codebook(3, 4, 2).write_to(&mut bytes).unwrap();
        let mut v999 = bytes.clone();
        v999[4..8].copy_from_slice(&999u32.to_le_bytes());
        assert!(matches!(
            Codebook::from_bytes(&v999),
            Err(Error::UnsupportedVersion(999))
        ));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(
            Codebook::from_bytes(&magic),
            Err(Error::Format { offset: 0, .. })
        ));
        let short = &bytes[..bytes.len() - 5];
        assert!(matches!(Codebook::from_bytes(short), Err(Error::Format { .. })));
        assert_eq!(bytes.len(), 16 + 3 * (4 + 12) * 4);
    }
}
