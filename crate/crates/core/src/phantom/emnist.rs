use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use ndarray::Array2;
use serde_json::json;

use super::{Phantom, SIZE};
use crate::error::{Error, Result};
use crate::rng::{Stream, PHANTOM_STREAM};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;
const GLYPH: usize = 28;
const PLACEMENT_ATTEMPTS: usize = 1000;
const PLACEMENT_ROUNDS: usize = 8;

/// 28x28 handwritten glyphs, stored upright.
///
/// EMNIST stores each image transposed; glyphs are transposed on load so that
/// row 0 is the top of the character.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphStore {
    glyphs: Vec<[u8; GLYPH * GLYPH]>,
    labels: Option<Vec<u8>>,
}

impl GlyphStore {
    /// Loads an IDX image file, or a directory holding an `*images-idx3*`
    /// file and optionally a matching `*labels-idx1*` file. Gzip input is
    /// detected by its magic bytes.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (images, labels) = if path.is_dir() { find_pair(path)? } else { (path.to_path_buf(), None) };
        let (dims, pixels) = read_idx(&images, IMAGE_MAGIC)?;
        if dims.len() != 3 || dims[1] != GLYPH || dims[2] != GLYPH {
            return Err(idx_err(&images, format!("expected dims [n, 28, 28], found {dims:?}")));
        }
        let glyphs = pixels
            .chunks_exact(GLYPH * GLYPH)
            .map(|raw| {
                let mut g = [0u8; GLYPH * GLYPH];
                for r in 0..GLYPH {
                    for c in 0..GLYPH {
                        g[r * GLYPH + c] = raw[c * GLYPH + r];
                    }
                }
                g
            })
            .collect::<Vec<_>>();
        let labels = match labels {
            Some(p) => {
                let (ldims, l) = read_idx(&p, LABEL_MAGIC)?;
                if ldims.len() != 1 || ldims[0] != glyphs.len() {
                    return Err(idx_err(
                        &p,
                        format!("{} labels for {} images", ldims.first().unwrap_or(&0), glyphs.len()),
                    ));
                }
                Some(l)
            }
            None => None,
        };
        if glyphs.is_empty() {
            return Err(idx_err(&images, "file holds no images".into()));
        }
        Ok(GlyphStore { glyphs, labels })
    }

    /// Store from upright 28x28 glyphs.
    pub fn from_glyphs(glyphs: Vec<[u8; GLYPH * GLYPH]>) -> Result<Self> {
        if glyphs.is_empty() {
            return Err(Error::invalid("glyph store is empty"));
        }
        Ok(GlyphStore { glyphs, labels: None })
    }

    pub fn len(&self) -> usize {
        self.glyphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.glyphs.is_empty()
    }

    pub fn glyph(&self, i: usize) -> &[u8; GLYPH * GLYPH] {
        &self.glyphs[i]
    }

    pub fn label(&self, i: usize) -> Option<u8> {
        self.labels.as_ref().map(|l| l[i])
    }
}

fn idx_err(path: &Path, reason: String) -> Error {
    Error::Idx { path: path.to_path_buf(), reason }
}

fn find_pair(dir: &Path) -> Result<(PathBuf, Option<PathBuf>)> {
    let mut names: Vec<PathBuf> =
        std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    names.sort();
    let find = |tag: &str| {
        names.iter().find(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.contains(tag))).cloned()
    };
    let images = find("images-idx3").ok_or_else(|| idx_err(dir, "no *images-idx3* file in directory".into()))?;
    Ok((images, find("labels-idx1")))
}

/// Reads an IDX file of unsigned bytes, returning its dims and payload.
pub(crate) fn read_idx(path: &Path, magic: u32) -> Result<(Vec<usize>, Vec<u8>)> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bytes = if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out).map_err(|e| idx_err(path, format!("gzip: {e}")))?;
        out
    } else {
        raw
    };
    parse_idx(&bytes, magic).map_err(|reason| idx_err(path, reason))
}

fn parse_idx(bytes: &[u8], magic: u32) -> std::result::Result<(Vec<usize>, Vec<u8>), String> {
    if bytes.len() < 4 {
        return Err("truncated header".into());
    }
    let found = u32::from_be_bytes(bytes[..4].try_into().unwrap());
    if found != magic {
        return Err(format!("bad magic {found:#010x}, expected {magic:#010x}"));
    }
    let rank = (found & 0xff) as usize;
    let header = 4 + 4 * rank;
    if bytes.len() < header {
        return Err("truncated header".into());
    }
    let dims: Vec<usize> =
        bytes[4..header].chunks_exact(4).map(|c| u32::from_be_bytes(c.try_into().unwrap()) as usize).collect();
    let count: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() < count {
        return Err(format!("truncated payload: header promises {count} bytes, found {}", payload.len()));
    }
    if payload.len() > count {
        return Err(format!("count mismatch: header promises {count} bytes, found {}", payload.len()));
    }
    Ok((dims, payload.to_vec()))
}

/// Bilinear resize of a glyph to `size x size`, binarized at half its peak.
fn scaled_mask(glyph: &[u8; GLYPH * GLYPH], size: usize) -> Array2<bool> {
    let g = |r: usize, c: usize| glyph[r * GLYPH + c] as f64;
    let scale = GLYPH as f64 / size as f64;
    let coord = |i: usize| ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (GLYPH - 1) as f64);
    let up = Array2::from_shape_fn((size, size), |(i, j)| {
        let (y, x) = (coord(i), coord(j));
        let (y0, x0) = (y.floor() as usize, x.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(GLYPH - 1), (x0 + 1).min(GLYPH - 1));
        let (fy, fx) = (y - y0 as f64, x - x0 as f64);
        (1.0 - fy) * ((1.0 - fx) * g(y0, x0) + fx * g(y0, x1)) + fy * ((1.0 - fx) * g(y1, x0) + fx * g(y1, x1))
    });
    let peak = up.fold(0.0f64, |m, &v| m.max(v));
    up.mapv(|v| peak > 0.0 && v >= 0.5 * peak)
}

fn draw_glyph(rng: &mut Stream, store: &GlyphStore) -> Result<usize> {
    for _ in 0..100 {
        let i = rng.int_inclusive(0, store.len() - 1);
        if store.glyph(i).iter().any(|&p| p > 0) {
            return Ok(i);
        }
    }
    Err(Error::invalid("glyph store yields only blank glyphs"))
}

/// Family D: one glyph scaled to 64-110 pixels at a random position.
pub fn gen_emnist(seed: u64, store: &GlyphStore) -> Result<Phantom> {
    let mut rng = Stream::new(seed, PHANTOM_STREAM);
    let index = draw_glyph(&mut rng, store)?;
    let size = rng.int_inclusive(64, 110);
    let row = rng.int_inclusive(0, SIZE - size);
    let col = rng.int_inclusive(0, SIZE - size);
    let eps_fg = rng.range(2.0, 10.0);
    let mask = scaled_mask(store.glyph(index), size);
    let mut eps = Array2::from_elem((SIZE, SIZE), 1.0);
    for ((r, c), &m) in mask.indexed_iter() {
        if m {
            eps[[row + r, col + c]] = eps_fg;
        }
    }
    Ok(Phantom::lossless(
        eps,
        json!({ "family": "D", "glyph": index, "label": store.label(index), "size": size, "row": row, "col": col, "eps": eps_fg }),
    ))
}

/// Family E: 2-3 glyphs of 32-56 pixels with disjoint bounding boxes.
pub fn gen_multi(seed: u64, store: &GlyphStore) -> Result<Phantom> {
    let mut rng = Stream::new(seed, PHANTOM_STREAM);
    let count = rng.int_inclusive(2, 3);
    let mut glyphs = Vec::with_capacity(count);
    for _ in 0..count {
        glyphs.push((draw_glyph(&mut rng, store)?, rng.int_inclusive(32, 56), rng.range(2.0, 10.0)));
    }
    let mut attempts = 0;
    for _ in 0..PLACEMENT_ROUNDS {
        let mut boxes: Vec<(usize, usize, usize)> = Vec::with_capacity(count);
        let mut budget = PLACEMENT_ATTEMPTS;
        for &(_, size, _) in &glyphs {
            while budget > 0 {
                budget -= 1;
                attempts += 1;
                let (r, c) = (rng.int_inclusive(0, SIZE - size), rng.int_inclusive(0, SIZE - size));
                let clear =
                    boxes.iter().all(|&(r2, c2, s2)| r + size <= r2 || r2 + s2 <= r || c + size <= c2 || c2 + s2 <= c);
                if clear {
                    boxes.push((r, c, size));
                    break;
                }
            }
        }
        if boxes.len() < count {
            continue;
        }
        let mut eps = Array2::from_elem((SIZE, SIZE), 1.0);
        let mut placed = Vec::with_capacity(count);
        for (&(index, size, value), &(row, col, _)) in glyphs.iter().zip(&boxes) {
            for ((r, c), &m) in scaled_mask(store.glyph(index), size).indexed_iter() {
                if m {
                    eps[[row + r, col + c]] = value;
                }
            }
            placed.push(json!({ "glyph": index, "label": store.label(index), "size": size, "row": row, "col": col, "eps": value }));
        }
        return Ok(Phantom::lossless(eps, json!({ "family": "E", "glyphs": placed })));
    }
    Err(Error::PlacementFailed { attempts })
}
