//! Cleartext use of a trained model: prediction, accuracy, a floating-point
//! reference trainer, and export.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fixed::FixedPoint;
use crate::matrix::Matrix;

use super::dataset::{Dataset, LabelEncoding};
use super::train::{ModelKind, TrainConfig};

/// Row-major `f64` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Dense {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "dense shape");
        Dense { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Dense::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn decode(m: &Matrix, codec: &FixedPoint) -> Self {
        Dense::new(m.rows(), m.cols(), m.data().iter().map(|v| codec.decode(*v)).collect())
    }

    pub fn matmul(&self, o: &Dense) -> Dense {
        assert_eq!(self.cols, o.rows, "dense matmul");
        let mut out = Dense::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * o.cols..(i + 1) * o.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for (d, b) in orow.iter_mut().zip(&o.data[k * o.cols..(k + 1) * o.cols]) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Dense {
        let mut out = Dense::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    fn zip(&self, o: &Dense, f: impl Fn(f64, f64) -> f64) -> Dense {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols), "dense shapes");
        Dense::new(self.rows, self.cols, self.data.iter().zip(&o.data).map(|(a, b)| f(*a, *b)).collect())
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Dense {
        Dense::new(self.rows, self.cols, self.data.iter().map(|a| f(*a)).collect())
    }

    fn select_rows(&self, idx: &[usize]) -> Dense {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(&self.data[i * self.cols..(i + 1) * self.cols]);
        }
        Dense::new(idx.len(), self.cols, data)
    }
}

/// Piecewise-linear sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x < -0.5 {
        0.0
    } else if x < 0.5 {
        x + 0.5
    } else {
        1.0
    }
}

/// A model in the clear.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub kind: ModelKind,
    pub layers: Vec<Dense>,
}

impl Model {
    pub fn from_revealed(kind: ModelKind, ws: &[Matrix], codec: &FixedPoint) -> Self {
        Model { kind, layers: ws.iter().map(|w| Dense::decode(w, codec)).collect() }
    }

    /// Output rows for the given features, before any thresholding.
    pub fn forward(&self, x: &Dense) -> Dense {
        let mut a = x.clone();
        let last = self.layers.len() - 1;
        for (i, w) in self.layers.iter().enumerate() {
            a = a.matmul(w);
            if i < last {
                a = a.map(|v| v.max(0.0));
            }
        }
        if self.kind == ModelKind::Logistic {
            a = a.map(sigmoid);
        }
        a
    }

    /// Fraction of samples classified correctly.
    pub fn accuracy(&self, ds: &Dataset, enc: LabelEncoding) -> f64 {
        if ds.n == 0 {
            return 0.0;
        }
        let out = self.forward(&Dense::new(ds.n, ds.d, ds.features.clone()));
        let t = ds.targets(enc);
        let w = enc.width();
        let mut right = 0;
        for i in 0..ds.n {
            let row = &out.data[i * out.cols..(i + 1) * out.cols];
            let target = &t[i * w..(i + 1) * w];
            let ok = if w == 1 {
                (row[0] > 0.5) == (target[0] > 0.5)
            } else {
                argmax(row) == argmax(target)
            };
            right += usize::from(ok);
        }
        right as f64 / ds.n as f64
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// The same training schedule in double precision: same initial weights,
/// batches and update rule, no rounding.
pub fn float_train(ds: &Dataset, cfg: &TrainConfig) -> Result<Model> {
    cfg.validate(&ds.meta(cfg.labels))?;
    let shapes = cfg.layer_shapes(ds.d);
    let mut ws: Vec<Dense> = cfg
        .initial_weights(ds.d)?
        .into_iter()
        .zip(&shapes)
        .map(|(w, &(a, b))| Dense::new(a, b, w))
        .collect();
    let x = Dense::new(ds.n, ds.d, ds.features.clone());
    let y = Dense::new(ds.n, cfg.labels.width(), ds.targets(cfg.labels));
    let step = cfg.lr / cfg.batch as f64;
    for batch in cfg.batches(ds.n) {
        let xb = x.select_rows(&batch);
        let yb = y.select_rows(&batch);
        let layers = ws.len();
        let mut acts = vec![xb];
        let mut derivs = Vec::new();
        for (i, w) in ws.iter().enumerate() {
            let z = acts[i].matmul(w);
            if i + 1 < layers {
                derivs.push(z.map(|v| if v >= 0.0 { 1.0 } else { 0.0 }));
                acts.push(z.map(|v| v.max(0.0)));
            } else if cfg.kind == ModelKind::Logistic {
                acts.push(z.map(sigmoid));
            } else {
                acts.push(z);
            }
        }
        let mut errs = vec![acts[layers].zip(&yb, |a, b| a - b)];
        for i in (0..layers - 1).rev() {
            let back = errs[0].matmul(&ws[i + 1].transpose());
            errs.insert(0, back.zip(&derivs[i], |a, b| a * b));
        }
        for i in 0..layers {
            let g = acts[i].transpose().matmul(&errs[i]);
            ws[i] = ws[i].zip(&g, |w, g| w - step * g);
        }
    }
    Ok(Model { kind: cfg.kind, layers: ws })
}

/// Writes the revealed ring entries as little-endian u64 words to `path`
/// and a decimal rendering to `path.txt`. Returns both paths.
pub fn export_model(path: &Path, ws: &[Matrix], codec: &FixedPoint) -> Result<(PathBuf, PathBuf)> {
    let mut bin = Vec::new();
    for w in ws {
        for v in w.data() {
            bin.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bin)?;
    let mut txt_path = path.as_os_str().to_owned();
    txt_path.push(".txt");
    let txt_path = PathBuf::from(txt_path);
    let mut f = fs::File::create(&txt_path)?;
    for (i, w) in ws.iter().enumerate() {
        writeln!(f, "# layer {i} {}x{}", w.rows(), w.cols())?;
        for r in 0..w.rows() {
            let line: Vec<String> = w.row(r).iter().map(|v| format!("{:.6}", codec.decode(*v))).collect();
            writeln!(f, "{}", line.join(" "))?;
        }
    }
    Ok((path.to_path_buf(), txt_path))
}

/// Reads a model written by [`export_model`] given the layer shapes.
pub fn import_model(path: &Path, shapes: &[(usize, usize)]) -> Result<Vec<Matrix>> {
    let bytes = fs::read(path)?;
    let total: usize = shapes.iter().map(|(a, b)| a * b).sum();
    if bytes.len() != total * 8 {
        return Err(Error::Parse(format!("model file has {} bytes, expected {}", bytes.len(), total * 8)));
    }
    let mut words = bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")));
    shapes
        .iter()
        .map(|&(a, b)| Matrix::from_vec(a, b, words.by_ref().take(a * b).collect()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_pieces() {
        assert_eq!(sigmoid(-0.75), 0.0);
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(0.25), 0.75);
        assert_eq!(sigmoid(0.5), 1.0);
    }

    #[test]
    fn dense_ops() {
        let a = Dense::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = a.transpose();
        assert_eq!(b.data, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(a.matmul(&b).data, vec![14.0, 32.0, 32.0, 77.0]);
    }

    #[test]
    fn export_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let codec = crate::params::Params::default_params().codec;
        let w = Matrix::from_vec(2, 1, vec![codec.encode(0.5).unwrap(), codec.encode(-1.25).unwrap()]).unwrap();
        let (bin, txt) = export_model(&dir.path().join("m.bin"), &[w.clone()], &codec).unwrap();
        assert_eq!(import_model(&bin, &[(2, 1)]).unwrap(), vec![w]);
        let text = fs::read_to_string(txt).unwrap();
        assert!(text.contains("-1.250000"));
        assert!(import_model(&bin, &[(3, 1)]).is_err());
    }
}
