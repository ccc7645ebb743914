use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::{Error, Result};

/// Samples for one `(context, action)` cell, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Pool {
    ids: Vec<u64>,
    dim: usize,
    truth: Vec<f64>,
    visible: Option<(usize, Vec<f64>)>,
}

impl Pool {
    pub fn new(ids: Vec<u64>, truth: Vec<f64>, dim: usize) -> Result<Self> {
        if truth.len() != ids.len() * dim {
            return Err(Error::InvalidSpec(format!(
                "{} values do not form {} samples of dimension {dim}",
                truth.len(),
                ids.len()
            )));
        }
        if truth.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite embedding value".into()));
        }
        Ok(Self { ids, dim, truth, visible: None })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Embedding the reward is generated from.
    pub fn truth(&self, i: usize) -> &[f64] {
        &self.truth[i * self.dim..(i + 1) * self.dim]
    }

    /// Embedding shown to agents.
    pub fn visible(&self, i: usize) -> &[f64] {
        match &self.visible {
            Some((dv, values)) => &values[i * dv..(i + 1) * dv],
            None => self.truth(i),
        }
    }

    pub fn visible_dim(&self) -> usize {
        self.visible.as_ref().map_or(self.dim, |(dv, _)| *dv)
    }

    pub fn truths(&self) -> impl Iterator<Item = &[f64]> {
        self.truth.chunks_exact(self.dim.max(1))
    }

    pub(crate) fn with_visible(&self, dim: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.len() * dim);
        Self { visible: Some((dim, values)), ..self.clone() }
    }

    /// Mean of the agent-visible embeddings.
    pub fn visible_mean(&self) -> Vec<f64> {
        let dv = self.visible_dim();
        let mut acc = vec![0.0; dv];
        for i in 0..self.len() {
            for (a, v) in acc.iter_mut().zip(self.visible(i)) {
                *a += v;
            }
        }
        acc.iter_mut().for_each(|a| *a /= self.len() as f64);
        acc
    }
}

/// Pre-sampled treatment embeddings for every `(context, action)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseDatabase {
    n_contexts: usize,
    n_actions: usize,
    dim: usize,
    cells: Vec<Option<Pool>>,
}

impl ResponseDatabase {
    /// Cells are indexed `context * n_actions + action`.
    pub fn from_cells(n_contexts: usize, n_actions: usize, dim: usize, cells: Vec<Pool>) -> Result<Self> {
        Self::from_optional_cells(n_contexts, n_actions, dim, cells.into_iter().map(Some).collect())
    }

    fn from_optional_cells(
        n_contexts: usize,
        n_actions: usize,
        dim: usize,
        cells: Vec<Option<Pool>>,
    ) -> Result<Self> {
        if cells.len() != n_contexts * n_actions {
            return Err(Error::InvalidSpec(format!(
                "{} cells for {n_contexts} contexts × {n_actions} actions",
                cells.len()
            )));
        }
        if cells.iter().flatten().any(|p| p.dim != dim) {
            return Err(Error::InvalidSpec(format!("pool dimension differs from {dim}")));
        }
        Ok(Self { n_contexts, n_actions, dim, cells })
    }

    pub fn n_contexts(&self) -> usize {
        self.n_contexts
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Dimension of the true embeddings.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the agent-visible embeddings.
    pub fn visible_dim(&self) -> usize {
        self.cells.iter().flatten().next().map_or(self.dim, Pool::visible_dim)
    }

    pub fn total_samples(&self) -> usize {
        self.cells.iter().flatten().map(Pool::len).sum()
    }

    /// Non-empty pool for a cell.
    pub fn pool(&self, context: usize, action: usize) -> Result<&Pool> {
        let missing = Error::MissingCell { context, action };
        if context >= self.n_contexts || action >= self.n_actions {
            return Err(missing);
        }
        match &self.cells[context * self.n_actions + action] {
            None => Err(missing),
            Some(p) if p.is_empty() => Err(Error::EmptyCell { context, action }),
            Some(p) => Ok(p),
        }
    }

    pub(crate) fn map_pools(&self, mut f: impl FnMut(usize, usize, &Pool) -> Pool) -> Self {
        let cells = self
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| c.as_ref().map(|p| f(i / self.n_actions, i % self.n_actions, p)))
            .collect();
        Self { cells, ..self.clone() }
    }

    /// Parse the `context,action,sample_id,z_0,…` text format.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
        let header = rdr.headers()?.clone();
        let fixed = ["context", "action", "sample_id"];
        let line_err = |line: u64, message: String| Error::DatabaseFormat { line, message };
        if header.len() < 4 || header.iter().take(3).ne(fixed.iter().copied()) {
            return Err(line_err(1, "header must start with context,action,sample_id,z_0".into()));
        }
        let dim = header.len() - 3;
        for (j, name) in header.iter().skip(3).enumerate() {
            if name != format!("z_{j}") {
                return Err(line_err(1, format!("expected column z_{j}, found '{name}'")));
            }
        }
        let mut rows: Vec<(usize, usize, u64, Vec<f64>)> = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != header.len() {
                return Err(line_err(line, format!("expected {} fields, found {}", header.len(), record.len())));
            }
            let int = |i: usize| {
                record[i]
                    .trim()
                    .parse::<u64>()
                    .map_err(|e| line_err(line, format!("column {}: {e}", fixed[i])))
            };
            let (c, a, id) = (int(0)? as usize, int(1)? as usize, int(2)?);
            let z = (3..record.len())
                .map(|i| {
                    record[i]
                        .trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| line_err(line, format!("bad value '{}'", &record[i])))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push((c, a, id, z));
        }
        let n_contexts = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let n_actions = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        let mut cells: Vec<Option<(Vec<u64>, Vec<f64>)>> = vec![None; n_contexts * n_actions];
        for (c, a, id, z) in rows {
            let cell = cells[c * n_actions + a].get_or_insert_with(Default::default);
            cell.0.push(id);
            cell.1.extend(z);
        }
        let cells = cells
            .into_iter()
            .map(|c| c.map(|(ids, truth)| Pool::new(ids, truth, dim)).transpose())
            .collect::<Result<Vec<_>>>()?;
        Self::from_optional_cells(n_contexts, n_actions, dim, cells)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Write true embeddings in the text format accepted by [`Self::read_csv`].
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["context".to_string(), "action".into(), "sample_id".into()];
        header.extend((0..self.dim).map(|j| format!("z_{j}")));
        w.write_record(&header)?;
        for (i, pool) in self.cells.iter().enumerate() {
            let Some(pool) = pool else { continue };
            let (c, a) = (i / self.n_actions, i % self.n_actions);
            for s in 0..pool.len() {
                let mut row = vec![c.to_string(), a.to_string(), pool.ids[s].to_string()];
                row.extend(pool.truth(s).iter().map(|v| v.to_string()));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Gaussian law of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGaussian {
    pub mean: Vec<f64>,
    /// Row-major `d × d`.
    pub cov: Vec<f64>,
}

/// Per-cell Gaussians used to synthesise a [`ResponseDatabase`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticGeneratorSpec {
    pub n_contexts: usize,
    pub n_actions: usize,
    pub dim: usize,
    /// Indexed `context * n_actions + action`.
    pub cells: Vec<CellGaussian>,
    pub samples_per_cell: usize,
}

/// Draw `samples_per_cell` i.i.d. embeddings per cell.
pub fn build_database<R: Rng + ?Sized>(spec: &SyntheticGeneratorSpec, rng: &mut R) -> Result<ResponseDatabase> {
    let d = spec.dim;
    if spec.samples_per_cell == 0 {
        return Err(Error::InvalidSpec("samples_per_cell must be at least 1".into()));
    }
    if spec.cells.len() != spec.n_contexts * spec.n_actions {
        return Err(Error::InvalidSpec("cell count does not match contexts × actions".into()));
    }
    let mut pools = Vec::with_capacity(spec.cells.len());
    let mut next_id = 0u64;
    for cell in &spec.cells {
        if cell.mean.len() != d || cell.cov.len() != d * d {
            return Err(Error::InvalidSpec("cell parameters do not match dimension".into()));
        }
        let cov = DMatrix::from_row_slice(d, d, &cell.cov);
        let factor = psd_factor(&cov)?;
        let mean = DVector::from_column_slice(&cell.mean);
        let mut truth = Vec::with_capacity(spec.samples_per_cell * d);
        let mut ids = Vec::with_capacity(spec.samples_per_cell);
        for _ in 0..spec.samples_per_cell {
            let z = linalg::sample_mvn(&mean, &factor, rng);
            truth.extend(z.iter());
            ids.push(next_id);
            next_id += 1;
        }
        pools.push(Pool::new(ids, truth, d)?);
    }
    ResponseDatabase::from_cells(spec.n_contexts, spec.n_actions, d, pools)
}

/// Square root `F` with `F Fᵀ = cov` for a symmetric PSD matrix.
fn psd_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let asym = (cov - cov.transpose()).amax();
    if asym > 1e-12 * cov.amax().max(1.0) {
        return Err(Error::InvalidSpec("covariance is not symmetric".into()));
    }
    let eig = cov.clone().symmetric_eigen();
    let tol = 1e-12 * cov.amax().max(1.0);
    if eig.eigenvalues.iter().any(|&l| l < -tol) {
        return Err(Error::InvalidSpec("covariance is not positive semi-definite".into()));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}
