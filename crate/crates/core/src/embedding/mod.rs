//! Sliding-window (delay) embedding of a series into a point cloud and its
//! PCA reduction.

mod pca;

pub use pca::{pca_fit, pca_project, PcaModel};

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::AnnotatedSeries;

/// `m` window elements beyond the first, spaced `s` samples apart; successive
/// points start `dt` samples apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedParams {
    pub m: usize,
    pub s: usize,
    pub dt: usize,
}

impl EmbedParams {
    pub fn new(m: usize, s: usize, dt: usize) -> Result<Self> {
        let p = Self { m, s, dt };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.s == 0 || self.dt == 0 {
            return Err(Error::param("embedding m, s and dt must all be >= 1"));
        }
        Ok(())
    }

    /// Samples spanned by one embedding vector beyond its first sample.
    pub fn span(&self) -> usize {
        self.m * self.s
    }

    pub fn dim(&self) -> usize {
        self.m + 1
    }
}

/// Ordered embedding vectors, stored row-major, each tagged with the sample
/// index it starts at.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    data: Vec<f64>,
    dim: usize,
    source_index: Vec<usize>,
}

impl PointCloud {
    pub fn from_rows(rows: Vec<Vec<f64>>, source_index: Vec<usize>) -> Result<Self> {
        if rows.len() != source_index.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: source_index.len(),
            });
        }
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in &rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        if source_index.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("source_index must be strictly increasing"));
        }
        Ok(Self {
            data,
            dim,
            source_index,
        })
    }

    pub(crate) fn from_flat(data: Vec<f64>, dim: usize, source_index: Vec<usize>) -> Self {
        debug_assert_eq!(data.len(), dim * source_index.len());
        Self {
            data,
            dim,
            source_index,
        }
    }

    pub fn len(&self) -> usize {
        self.source_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_index.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim.max(1)).take(self.len())
    }

    pub fn source_index(&self) -> &[usize] {
        &self.source_index
    }

    pub(crate) fn flat(&self) -> &[f64] {
        &self.data
    }

    /// Writes `source_index,c1,...,cd` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("source_index");
        for c in 1..=self.dim {
            out.push_str(&format!(",c{c}"));
        }
        out.push('\n');
        for (i, p) in self.points().enumerate() {
            out.push_str(&self.source_index[i].to_string());
            for v in p {
                out.push_str(&format!(",{v:?}"));
            }
            out.push('\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Point `k` is `[x(t), x(t+s), ..., x(t+m*s)]` with `t = k * dt`, for every
/// `t` whose window fits inside the series.
pub fn sliding_window_embed(series: &AnnotatedSeries, p: &EmbedParams) -> Result<PointCloud> {
    p.validate()?;
    let x = &series.samples;
    let span = p.span();
    if x.len() < span + 1 {
        return Err(Error::SeriesTooShort {
            needed: span + 1,
            got: x.len(),
        });
    }
    let dim = p.dim();
    let starts: Vec<usize> = (0..x.len() - span).step_by(p.dt).collect();
    let mut data = Vec::with_capacity(starts.len() * dim);
    for &t in &starts {
        data.extend((0..=p.m).map(|j| x[t + j * p.s]));
    }
    Ok(PointCloud::from_flat(data, dim, starts))
}
