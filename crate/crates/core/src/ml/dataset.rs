//! Training data: IDX and CSV ingestion, ownership and label encodings.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::fixed::FixedPoint;
use crate::matrix::Matrix;
use crate::rng;
use crate::share::PartyId;

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;

/// How the raw label of a sample becomes a target row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelEncoding {
    /// One column: 1 when the label equals the given class, else 0.
    Binary { positive: u32 },
    /// `classes` columns with a single 1.
    OneHot { classes: usize },
    /// One column holding the label itself.
    Raw,
}

impl LabelEncoding {
    pub fn width(self) -> usize {
        match self {
            LabelEncoding::Binary { .. } | LabelEncoding::Raw => 1,
            LabelEncoding::OneHot { classes } => classes,
        }
    }

    fn row(self, label: f64, out: &mut Vec<f64>) {
        match self {
            LabelEncoding::Binary { positive } => {
                out.push(if label == positive as f64 { 1.0 } else { 0.0 })
            }
            LabelEncoding::OneHot { classes } => {
                for c in 0..classes {
                    out.push(if label == c as f64 { 1.0 } else { 0.0 });
                }
            }
            LabelEncoding::Raw => out.push(label),
        }
    }
}

/// Samples in the clear, as held by their owners before sharing.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub n: usize,
    pub d: usize,
    /// Row-major `n x d`, normally in [0, 1].
    pub features: Vec<f64>,
    pub labels: Vec<f64>,
    pub owners: Vec<PartyId>,
}

/// Public facts about a shared dataset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataMeta {
    pub n: usize,
    pub d: usize,
    pub label_cols: usize,
    pub owners: Vec<PartyId>,
}

impl DataMeta {
    /// Row indices of each owner, in sample order.
    pub fn rows_of(&self, p: PartyId) -> Vec<usize> {
        (0..self.n).filter(|&i| self.owners[i] == p).collect()
    }
}

/// One owner's encoded rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OwnerPart {
    pub x: Matrix,
    pub y: Matrix,
}

impl Dataset {
    pub fn new(n: usize, d: usize, features: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        if features.len() != n * d || labels.len() != n {
            return Err(Error::Shape(format!(
                "{} features and {} labels for {n} samples of width {d}",
                features.len(),
                labels.len()
            )));
        }
        Ok(Dataset { n, d, features, labels, owners: vec![PartyId::P0; n] })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    /// First `k` samples.
    pub fn head(&self, k: usize) -> Dataset {
        let k = k.min(self.n);
        Dataset {
            n: k,
            d: self.d,
            features: self.features[..k * self.d].to_vec(),
            labels: self.labels[..k].to_vec(),
            owners: self.owners[..k].to_vec(),
        }
    }

    /// Splits the samples into three contiguous blocks, one per party.
    pub fn with_block_owners(mut self) -> Self {
        let n = self.n;
        self.owners = (0..n).map(|i| PartyId::ALL[(i * 3) / n.max(1)]).collect();
        self
    }

    pub fn with_owner(mut self, p: PartyId) -> Self {
        self.owners = vec![p; self.n];
        self
    }

    pub fn meta(&self, enc: LabelEncoding) -> DataMeta {
        DataMeta { n: self.n, d: self.d, label_cols: enc.width(), owners: self.owners.clone() }
    }

    /// Target rows, row-major `n x enc.width()`.
    pub fn targets(&self, enc: LabelEncoding) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * enc.width());
        for &l in &self.labels {
            enc.row(l, &mut out);
        }
        out
    }

    /// Encoded rows owned by `p`, or `None` when it owns none.
    pub fn part(&self, p: PartyId, codec: &FixedPoint, enc: LabelEncoding) -> Result<Option<OwnerPart>> {
        let rows: Vec<usize> = (0..self.n).filter(|&i| self.owners[i] == p).collect();
        if rows.is_empty() {
            return Ok(None);
        }
        let t = self.targets(enc);
        let w = enc.width();
        let mut x = Vec::with_capacity(rows.len() * self.d);
        let mut y = Vec::with_capacity(rows.len() * w);
        for &i in &rows {
            for &v in self.row(i) {
                x.push(codec.encode(v)?);
            }
            for &v in &t[i * w..(i + 1) * w] {
                y.push(codec.encode(v)?);
            }
        }
        Ok(Some(OwnerPart {
            x: Matrix::from_vec(rows.len(), self.d, x)?,
            y: Matrix::from_vec(rows.len(), w, y)?,
        }))
    }

    /// Every owner's encoded rows, for a process that plays all parties.
    pub fn parts(&self, codec: &FixedPoint, enc: LabelEncoding) -> Result<[Option<OwnerPart>; 3]> {
        Ok([
            self.part(PartyId::P0, codec, enc)?,
            self.part(PartyId::P1, codec, enc)?,
            self.part(PartyId::P2, codec, enc)?,
        ])
    }

    /// Features with the given weight vector applied, `w` of length d.
    pub fn scores(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().zip(w).map(|(a, b)| a * b).sum()).collect()
    }
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Parse("IDX header is truncated".into()))
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut buf)?;
    Ok(buf)
}

/// Parses an IDX image file into `n x (rows*cols)` pixels scaled by 1/255.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let magic = read_u32(bytes, 0)?;
    if magic != IDX_IMAGES {
        return Err(Error::Parse(format!("bad IDX image magic {magic:#010x}")));
    }
    let n = read_u32(bytes, 4)? as usize;
    let d = read_u32(bytes, 8)? as usize * read_u32(bytes, 12)? as usize;
    let body = &bytes[16..];
    if body.len() != n * d {
        return Err(Error::Parse(format!("IDX images: {} bytes for {n} x {d}", body.len())));
    }
    Ok((n, d, body.iter().map(|&b| b as f64 / 255.0).collect()))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<f64>> {
    let magic = read_u32(bytes, 0)?;
    if magic != IDX_LABELS {
        return Err(Error::Parse(format!("bad IDX label magic {magic:#010x}")));
    }
    let n = read_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(Error::Parse(format!("IDX labels: {} bytes for {n} labels", body.len())));
    }
    Ok(body.iter().map(|&b| b as f64).collect())
}

pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let (n, d, x) = parse_idx_images(&read_all(images)?)?;
    let y = parse_idx_labels(&read_all(labels)?)?;
    if y.len() != n {
        return Err(Error::Parse(format!("{n} images but {} labels", y.len())));
    }
    Dataset::new(n, d, x, y)
}

/// Which half of an MNIST-style directory to read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Reads `train-*` or `t10k-*` IDX files from a directory.
pub fn load_idx_dir(dir: &Path, split: Split) -> Result<Dataset> {
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    load_idx(
        &dir.join(format!("{prefix}-images-idx3-ubyte")),
        &dir.join(format!("{prefix}-labels-idx1-ubyte")),
    )
}

/// Parses CSV text. The last column is the label; a first row that does not
/// parse as numbers is taken as a header.
pub fn parse_csv<R: Read>(input: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(input);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut d = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("csv: {e}")))?;
        let vals: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let vals = match vals {
            Ok(v) => v,
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::Parse(format!("csv row {}: {e}", i + 1))),
        };
        if vals.len() < 2 {
            return Err(Error::Parse(format!("csv row {} has fewer than two columns", i + 1)));
        }
        let w = vals.len() - 1;
        match d {
            None => d = Some(w),
            Some(dd) if dd != w => {
                return Err(Error::Parse(format!("csv row {} has {} columns, expected {}", i + 1, w + 1, dd + 1)))
            }
            _ => {}
        }
        features.extend_from_slice(&vals[..w]);
        labels.push(vals[w]);
    }
    let d = d.ok_or_else(|| Error::Parse("csv has no data rows".into()))?;
    Dataset::new(labels.len(), d, features, labels)
}

pub fn load_csv(path: &Path) -> Result<Dataset> {
    parse_csv(BufReader::new(File::open(path)?))
}

/// Features uniform in [0, 1]; label 1 when a fixed hyperplane scores the
/// sample positive.
pub fn synthetic_binary(n: usize, d: usize, seed: u64) -> Dataset {
    let mut r = rng::stream(seed, 0, b"synthetic", "binary");
    let w: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
    let bias = -w.iter().sum::<f64>() / 2.0;
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| r.gen::<f64>()).collect();
        let s: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + bias;
        y.push(if s > 0.0 { 1.0 } else { 0.0 });
        x.extend(row);
    }
    Dataset::new(n, d, x, y).expect("consistent sizes")
}

/// Features uniform in [0, 1]; label is a fixed linear function plus small noise.
pub fn synthetic_linear(n: usize, d: usize, seed: u64) -> Dataset {
    let mut r = rng::stream(seed, 0, b"synthetic", "linear");
    let w: Vec<f64> = (0..d).map(|_| r.gen_range(-0.5..0.5)).collect();
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| r.gen::<f64>()).collect();
        let s: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        y.push(s + r.gen_range(-0.01..0.01));
        x.extend(row);
    }
    Dataset::new(n, d, x, y).expect("consistent sizes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Params;

    fn idx_images(n: u32, r: u32, c: u32, px: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        for w in [IDX_IMAGES, n, r, c] {
            v.extend(w.to_be_bytes());
        }
        v.extend_from_slice(px);
        v
    }

    #[test]
    fn idx_shape_and_scaling() {
        let px: Vec<u8> = (0..16).map(|i| if i == 5 { 255 } else { 0 }).collect();
        let (n, d, x) = parse_idx_images(&idx_images(4, 2, 2, &px)).unwrap();
        assert_eq!((n, d), (4, 4));
        let codec = Params::default_params().codec;
        assert_eq!(codec.encode(x[5]).unwrap(), codec.encode(1.0).unwrap());
        assert_eq!(x[4], 0.0);
    }

    #[test]
    fn idx_rejects_bad_magic_and_length() {
        let mut b = idx_images(1, 2, 2, &[0; 4]);
        b[3] = 0x01;
        assert!(matches!(parse_idx_images(&b), Err(Error::Parse(_))));
        let b = idx_images(2, 2, 2, &[0; 4]);
        assert!(matches!(parse_idx_images(&b), Err(Error::Parse(_))));
        assert!(matches!(parse_idx_labels(&[0, 0, 8]), Err(Error::Parse(_))));
    }

    #[test]
    fn csv_with_and_without_header() {
        let a = parse_csv("0.5,1\n0.25,0\n".as_bytes()).unwrap();
        let b = parse_csv("x,label\n0.5,1\n0.25,0\n".as_bytes()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.features, vec![0.5, 0.25]);
        assert_eq!(a.labels, vec![1.0, 0.0]);
        let codec = Params::default_params().codec;
        let p = a.part(PartyId::P0, &codec, LabelEncoding::Binary { positive: 1 }).unwrap().unwrap();
        assert_eq!(p.x.get(0, 0), codec.encode(0.5).unwrap());
        assert_eq!(p.y.get(0, 0), codec.one());
        assert!(parse_csv("1,2\n1,2,3\n".as_bytes()).is_err());
    }

    #[test]
    fn block_owners_cover_every_party() {
        let ds = synthetic_binary(10, 3, 1).with_block_owners();
        let meta = ds.meta(LabelEncoding::Binary { positive: 1 });
        let sizes: Vec<usize> = PartyId::ALL.iter().map(|p| meta.rows_of(*p).len()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 10);
        assert!(sizes.iter().all(|s| *s >= 3));
    }

    #[test]
    fn one_hot_rows() {
        let ds = Dataset::new(2, 1, vec![0.0, 1.0], vec![2.0, 0.0]).unwrap();
        let t = ds.targets(LabelEncoding::OneHot { classes: 3 });
        assert_eq!(t, vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
    }
}
