//! Sparse matrix substrate, LIBSVM ingestion and synthetic instances.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of the PRNG used everywhere a seed appears.
pub const RNG_ALGORITHM: &str = "rand_chacha::ChaCha8Rng/seed_from_u64";

/// The crate-wide seeded generator.
pub type Rng64 = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Column-compressed sparse matrix.
///
/// Row indices are strictly increasing inside each column. Squared column
/// norms are cached at construction; they are the coordinate-wise curvature
/// of `½‖Gx − y‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    col_sq_norms: Vec<f64>,
}

impl CscMatrix {
    /// Builds from raw CSC arrays, validating structure.
    pub fn new(
        nrows: usize,
        ncols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if col_ptr.len() != ncols + 1 {
            return Err(Error::DimensionMismatch {
                expected: ncols + 1,
                got: col_ptr.len(),
            });
        }
        if row_idx.len() != values.len() || col_ptr[ncols] != values.len() || col_ptr[0] != 0 {
            return Err(Error::BadDimensions("inconsistent CSC arrays".into()));
        }
        for j in 0..ncols {
            let (a, b) = (col_ptr[j], col_ptr[j + 1]);
            if a > b {
                return Err(Error::BadDimensions(format!("column pointer decreases at {j}")));
            }
            let rows = &row_idx[a..b];
            if rows.windows(2).any(|w| w[0] >= w[1]) || rows.iter().any(|&r| r >= nrows) {
                return Err(Error::BadDimensions(format!("bad row indices in column {j}")));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadDimensions("non-finite matrix entry".into()));
        }
        let col_sq_norms = (0..ncols)
            .map(|j| values[col_ptr[j]..col_ptr[j + 1]].iter().map(|v| v * v).sum())
            .collect();
        Ok(Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
            col_sq_norms,
        })
    }

    /// From a row-major dense array; exact zeros are dropped.
    pub fn from_dense(nrows: usize, ncols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::DimensionMismatch {
                expected: nrows * ncols,
                got: data.len(),
            });
        }
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for j in 0..ncols {
            for i in 0..nrows {
                let v = data[i * ncols + j];
                if v != 0.0 {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(values.len());
        }
        Self::new(nrows, ncols, col_ptr, row_idx, values)
    }

    /// From rows given as sorted `(column, value)` lists.
    pub fn from_rows(nrows: usize, ncols: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let mut counts = vec![0usize; ncols + 1];
        for row in rows {
            for &(j, _) in row {
                if j >= ncols {
                    return Err(Error::BadDimensions(format!("column {j} >= {ncols}")));
                }
                counts[j + 1] += 1;
            }
        }
        for j in 0..ncols {
            counts[j + 1] += counts[j];
        }
        let nnz = counts[ncols];
        let mut next = counts.clone();
        let mut row_idx = vec![0; nnz];
        let mut values = vec![0.0; nnz];
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                row_idx[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        Self::new(nrows, ncols, counts, row_idx, values)
    }

    pub fn identity(n: usize) -> Self {
        Self::new(n, n, (0..=n).collect(), (0..n).collect(), vec![1.0; n])
            .expect("identity is well formed")
    }

    pub fn diag(d: &[f64]) -> Result<Self> {
        let n = d.len();
        let mut dense = vec![0.0; n * n];
        for (i, &v) in d.iter().enumerate() {
            dense[i * n + i] = v;
        }
        Self::from_dense(n, n, &dense)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Row indices and values of column `j`.
    #[inline]
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[a..b], &self.values[a..b])
    }

    /// `‖G e_j‖²`.
    #[inline]
    pub fn col_sq_norm(&self, j: usize) -> f64 {
        self.col_sq_norms[j]
    }

    pub fn col_sq_norms(&self) -> &[f64] {
        &self.col_sq_norms
    }

    /// `(G Gᵀ)_{ii}`, i.e. squared row norms.
    pub fn row_sq_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows];
        for (&r, &v) in self.row_idx.iter().zip(&self.values) {
            out[r] += v * v;
        }
        out
    }

    /// `⟨G e_j, z⟩`.
    #[inline]
    pub fn column_dot(&self, j: usize, z: &[f64]) -> f64 {
        let (rows, vals) = self.column(j);
        rows.iter().zip(vals).map(|(&r, &v)| v * z[r]).sum()
    }

    /// `z += eta · G e_j`, touching only the nonzeros of column `j`.
    pub fn column_axpy(&self, j: usize, eta: f64, z: &mut [f64]) -> Result<()> {
        if j >= self.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                got: j,
            });
        }
        if z.len() != self.nrows {
            return Err(Error::DimensionMismatch {
                expected: self.nrows,
                got: z.len(),
            });
        }
        if eta == 0.0 {
            return Ok(());
        }
        let (rows, vals) = self.column(j);
        for (&r, &v) in rows.iter().zip(vals) {
            z[r] += eta * v;
        }
        Ok(())
    }

    /// `G x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension");
        let mut out = vec![0.0; self.nrows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                let (rows, vals) = self.column(j);
                for (&r, &v) in rows.iter().zip(vals) {
                    out[r] += xj * v;
                }
            }
        }
        out
    }

    /// `Gᵀ z`.
    pub fn matvec_t(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.nrows, "matvec_t dimension");
        (0..self.ncols).map(|j| self.column_dot(j, z)).collect()
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows * self.ncols];
        for j in 0..self.ncols {
            let (rows, vals) = self.column(j);
            for (&r, &v) in rows.iter().zip(vals) {
                out[r * self.ncols + j] = v;
            }
        }
        out
    }

    /// Rows as sorted `(column, value)` lists.
    pub fn to_rows(&self) -> Vec<Vec<(usize, f64)>> {
        let mut rows = vec![Vec::new(); self.nrows];
        for j in 0..self.ncols {
            let (r, v) = self.column(j);
            for (&ri, &vi) in r.iter().zip(v) {
                rows[ri].push((j, vi));
            }
        }
        rows
    }
}

/// Upper estimate of `λ_max(GᵀG) = ‖G‖₂²` by power iteration.
///
/// The Rayleigh quotient approaches `λ_max` from below, so the converged
/// value is inflated by `1 + 10·tol`.
pub fn spectral_norm_sq(m: &CscMatrix, max_iters: usize, tol: f64) -> Result<f64> {
    if m.values.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroMatrix);
    }
    let n = m.ncols;
    // deterministic start with no special alignment
    let mut v: Vec<f64> = (0..n)
        .map(|j| 1.0 + (0.618_033_988_75 * (j + 1) as f64).fract())
        .collect();
    normalize(&mut v);
    let mut lambda = 0.0;
    for _ in 0..max_iters.max(1) {
        let w = m.matvec_t(&m.matvec(&v));
        let next: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        v = w.into_iter().map(|a| a / norm).collect();
        let done = (next - lambda).abs() <= tol * next.abs();
        lambda = next;
        if done {
            break;
        }
    }
    Ok(lambda * (1.0 + 10.0 * tol))
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|a| *a /= norm);
    }
}

/// Parses a LIBSVM file (`label idx:val ...`, 1-based indices). Each line is
/// a row; labels are discarded. The column count is the largest index seen.
pub fn load_libsvm(path: impl AsRef<Path>) -> Result<CscMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_libsvm(&text, path)
}

pub fn parse_libsvm(text: &str, path: &Path) -> Result<CscMatrix> {
    let mut rows = Vec::new();
    let mut ncols = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            reason,
        };
        let mut tokens = line.split_whitespace();
        let label = tokens.next().unwrap_or_default();
        label
            .parse::<f64>()
            .map_err(|_| parse_err(format!("bad label {label:?}")))?;
        let mut row: Vec<(usize, f64)> = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(format!("expected idx:val, got {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(format!("bad index {idx:?}")))?;
            if idx == 0 {
                return Err(parse_err("indices are 1-based".into()));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| parse_err(format!("bad value {val:?}")))?;
            if !val.is_finite() {
                return Err(parse_err(format!("non-finite value {val}")));
            }
            if let Some(&(prev, _)) = row.last() {
                if idx - 1 <= prev {
                    return Err(Error::IndexOutOfOrder {
                        path: path.to_path_buf(),
                        line: line_no,
                    });
                }
            }
            ncols = ncols.max(idx);
            row.push((idx - 1, val));
        }
        rows.push(row);
    }
    CscMatrix::from_rows(rows.len(), ncols, &rows)
}

/// Writes rows in LIBSVM format with label `0`. Values use the shortest
/// decimal that round-trips.
pub fn write_libsvm(path: impl AsRef<Path>, m: &CscMatrix) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for row in m.to_rows() {
        write!(out, "0")?;
        for (j, v) in row {
            write!(out, " {}:{}", j + 1, v)?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// A problem instance: design matrix, optional observations and ground truth.
#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub g: CscMatrix,
    /// Observations, present for sparse recovery.
    pub y: Option<Vec<f64>>,
    /// Planted signal of a synthetic instance.
    pub x_true: Option<Vec<f64>>,
    pub meta: InstanceMeta,
}

/// JSON sidecar describing an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub name: String,
    pub m: usize,
    pub n: usize,
    pub seed: Option<u64>,
    pub noise_level: Option<f64>,
}

impl InstanceMeta {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Dense standard-normal `m × n` matrix, optionally thinned by a Bernoulli
/// mask keeping each entry with probability `density`.
pub fn gaussian_matrix(m: usize, n: usize, density: f64, rng: &mut Rng64) -> Result<CscMatrix> {
    let data: Vec<f64> = (0..m * n)
        .map(|_| {
            let v: f64 = rng.sample(StandardNormal);
            if density < 1.0 && rng.random::<f64>() >= density {
                0.0
            } else {
                v
            }
        })
        .collect();
    CscMatrix::from_dense(m, n, &data)
}

/// Synthetic sparse-recovery instance: Gaussian `G`, a planted signal with
/// `support_size` standard-normal entries on a random support, and
/// `y = G x̄ + noise_level·‖G x̄‖·randn(m)`.
pub fn synth_sparse_instance(
    m: usize,
    n: usize,
    support_size: usize,
    noise_level: f64,
    seed: u64,
) -> Result<Instance> {
    synth_sparse_instance_with_density(m, n, support_size, noise_level, 1.0, seed)
}

pub fn synth_sparse_instance_with_density(
    m: usize,
    n: usize,
    support_size: usize,
    noise_level: f64,
    density: f64,
    seed: u64,
) -> Result<Instance> {
    if m == 0 || n == 0 || support_size > n || !(noise_level >= 0.0) || !(density > 0.0 && density <= 1.0) {
        return Err(Error::BadDimensions(format!(
            "m={m} n={n} support={support_size} noise={noise_level} density={density}"
        )));
    }
    let mut rng = seeded_rng(seed);
    let g = gaussian_matrix(m, n, density, &mut rng)?;
    let (x_true, y) = plant_sparse_signal(&g, support_size, noise_level, &mut rng);
    let name = format!("synth-{m}-{n}-{support_size}-s{seed}");
    Ok(Instance {
        meta: InstanceMeta {
            name: name.clone(),
            m,
            n,
            seed: Some(seed),
            noise_level: Some(noise_level),
        },
        name,
        g,
        y: Some(y),
        x_true: Some(x_true),
    })
}

/// Planted signal with `support_size` standard-normal entries on a random
/// support, and `y = G x̄ + noise_level·‖G x̄‖·randn(m)`.
pub fn plant_sparse_signal(g: &CscMatrix, support_size: usize, noise_level: f64, rng: &mut Rng64) -> (Vec<f64>, Vec<f64>) {
    let n = g.ncols();
    let support = rand::seq::index::sample(rng, n, support_size.min(n));
    let mut x_true = vec![0.0; n];
    for j in support.iter() {
        x_true[j] = rng.sample(StandardNormal);
    }
    let clean = g.matvec(&x_true);
    let scale = noise_level * clean.iter().map(|v| v * v).sum::<f64>().sqrt();
    let y = clean
        .iter()
        .map(|&v| {
            let e: f64 = rng.sample(StandardNormal);
            v + scale * e
        })
        .collect();
    (x_true, y)
}

/// Sparse-recovery instance on a given design matrix, with a signal planted
/// as in [`plant_sparse_signal`].
pub fn sparse_instance_from_matrix(name: &str, g: CscMatrix, support_size: usize, noise_level: f64, seed: u64) -> Result<Instance> {
    if support_size > g.ncols() || !(noise_level >= 0.0) {
        return Err(Error::BadDimensions(format!(
            "support={support_size} n={} noise={noise_level}",
            g.ncols()
        )));
    }
    let (x_true, y) = plant_sparse_signal(&g, support_size, noise_level, &mut seeded_rng(seed));
    Ok(Instance {
        meta: InstanceMeta {
            name: name.to_string(),
            m: g.nrows(),
            n: g.ncols(),
            seed: Some(seed),
            noise_level: Some(noise_level),
        },
        name: name.to_string(),
        g,
        y: Some(y),
        x_true: Some(x_true),
    })
}

/// Gaussian design matrix for the ℓ4 eigenvalue problem.
pub fn synth_l4_instance(m: usize, n: usize, seed: u64) -> Result<Instance> {
    if m == 0 || n == 0 {
        return Err(Error::BadDimensions(format!("m={m} n={n}")));
    }
    let mut rng = seeded_rng(seed);
    let g = gaussian_matrix(m, n, 1.0, &mut rng)?;
    let name = format!("synth-l4-{m}-{n}-s{seed}");
    Ok(Instance {
        meta: InstanceMeta {
            name: name.clone(),
            m,
            n,
            seed: Some(seed),
            noise_level: None,
        },
        name,
        g,
        y: None,
        x_true: None,
    })
}

/// Standard-normal vector.
pub fn randn(n: usize, rng: &mut Rng64) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}
