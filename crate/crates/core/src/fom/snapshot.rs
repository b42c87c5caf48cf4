use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{Error, Result};
use crate::fom::mesh::Mesh1D;
use crate::nn::{InputNormalization, TrainingSet};

const SNAP_MAGIC: &[u8; 8] = b"LPSNAP01";
const FLAG_PER_SNAPSHOT_MESH: u64 = 1;
const FLAG_PERIODIC: u64 = 2;

/// Nodal solutions at `(t_j, μ_k)`, values ordered `[k][j][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    n_nodes: usize,
    /// One mesh, or one per time stamp.
    meshes: Vec<Vec<f64>>,
    period: Option<f64>,
    times: Vec<f64>,
    param_dim: usize,
    n_params: usize,
    params: Vec<f64>,
    values: Vec<f64>,
    pub descriptor: Option<Value>,
}

impl SnapshotSet {
    pub fn new(mesh: &Mesh1D, times: Vec<f64>, params: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        Self::build(vec![mesh.nodes().to_vec()], mesh.period(), times, params, values)
    }

    /// One mesh per time stamp (moving meshes); all meshes share the node count.
    pub fn with_meshes(meshes: &[Mesh1D], times: Vec<f64>, params: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if meshes.len() != times.len() {
            return Err(Error::dim("per-snapshot meshes", times.len(), meshes.len()));
        }
        Self::build(
            meshes.iter().map(|m| m.nodes().to_vec()).collect(),
            meshes.first().and_then(|m| m.period()),
            times,
            params,
            values,
        )
    }

    fn build(
        meshes: Vec<Vec<f64>>,
        period: Option<f64>,
        times: Vec<f64>,
        params: Vec<Vec<f64>>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let n_nodes = meshes.first().map_or(0, Vec::len);
        if n_nodes == 0 || times.is_empty() || params.is_empty() {
            return Err(Error::InvalidInput("snapshot set needs nodes, times and parameters".into()));
        }
        if let Some(m) = meshes.iter().find(|m| m.len() != n_nodes) {
            return Err(Error::dim("snapshot mesh nodes", n_nodes, m.len()));
        }
        let param_dim = params[0].len();
        if let Some(p) = params.iter().find(|p| p.len() != param_dim) {
            return Err(Error::dim("parameter vector", param_dim, p.len()));
        }
        let expected = n_nodes * times.len() * params.len();
        if values.len() != expected {
            return Err(Error::dim("snapshot values", expected, values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("snapshot values must be finite".into()));
        }
        Ok(Self {
            n_nodes,
            meshes,
            period,
            times,
            param_dim,
            n_params: params.len(),
            params: params.concat(),
            values,
            descriptor: None,
        })
    }

    /// Stacks single-parameter sets that share times and meshes.
    pub fn concat_params(sets: &[SnapshotSet]) -> Result<Self> {
        let first = sets.first().ok_or_else(|| Error::InvalidInput("no snapshot sets to combine".into()))?;
        let mut params = Vec::new();
        let mut values = Vec::new();
        for s in sets {
            if s.times != first.times || s.meshes != first.meshes || s.param_dim != first.param_dim {
                return Err(Error::InvalidInput("snapshot sets disagree in times, meshes or parameter dimension".into()));
            }
            for k in 0..s.n_params() {
                params.push(s.param(k).to_vec());
            }
            values.extend_from_slice(&s.values);
        }
        let mut out = Self::build(first.meshes.clone(), first.period, first.times.clone(), params, values)?;
        out.descriptor = first.descriptor.clone();
        Ok(out)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn param(&self, k: usize) -> &[f64] {
        if self.param_dim == 0 {
            &[]
        } else {
            &self.params[k * self.param_dim..(k + 1) * self.param_dim]
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn has_per_snapshot_meshes(&self) -> bool {
        self.meshes.len() > 1
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn nodes(&self, j: usize) -> &[f64] {
        if self.meshes.len() == 1 {
            &self.meshes[0]
        } else {
            &self.meshes[j]
        }
    }

    pub fn mesh(&self, j: usize) -> Mesh1D {
        match self.period {
            Some(p) => {
                let x = self.nodes(j);
                Mesh1D::uniform_periodic(x[0], x[0] + p, x.len()).expect("stored periodic mesh is valid")
            }
            None => Mesh1D::new(self.nodes(j).to_vec()).expect("stored mesh is valid"),
        }
    }

    pub fn snapshot(&self, k: usize, j: usize) -> &[f64] {
        let s = (k * self.n_times() + j) * self.n_nodes;
        &self.values[s..s + self.n_nodes]
    }

    /// Keeps time indices for which `keep` holds.
    pub fn select_times(&self, keep: impl Fn(usize, f64) -> bool) -> Result<Self> {
        let idx: Vec<usize> = (0..self.n_times()).filter(|&j| keep(j, self.times[j])).collect();
        if idx.is_empty() {
            return Err(Error::InvalidInput("time selection is empty".into()));
        }
        let mut values = Vec::with_capacity(idx.len() * self.n_params() * self.n_nodes);
        for k in 0..self.n_params() {
            for &j in &idx {
                values.extend_from_slice(self.snapshot(k, j));
            }
        }
        let meshes = if self.has_per_snapshot_meshes() {
            idx.iter().map(|&j| self.meshes[j].clone()).collect()
        } else {
            self.meshes.clone()
        };
        let params = (0..self.n_params()).map(|k| self.param(k).to_vec()).collect();
        let mut out = Self::build(meshes, self.period, idx.iter().map(|&j| self.times[j]).collect(), params, values)?;
        out.descriptor = self.descriptor.clone();
        Ok(out)
    }

    /// Input ranges of `(x, t, μ…)` over the whole set.
    pub fn normalization(&self) -> InputNormalization {
        let range = |it: &mut dyn Iterator<Item = f64>| {
            it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        };
        let x = range(&mut self.meshes.iter().flatten().copied());
        let t = range(&mut self.times.iter().copied());
        let mu: Vec<(f64, f64)> = (0..self.param_dim)
            .map(|d| range(&mut (0..self.n_params()).map(|k| self.param(k)[d])))
            .collect();
        InputNormalization::from_ranges(x, t, &mu)
    }

    /// Every `(x_i, t_j, μ_k, u)` point, normalized for training.
    pub fn training_set(&self, norm: &InputNormalization) -> Result<TrainingSet> {
        if norm.mu_dim() != self.param_dim {
            return Err(Error::dim("normalization parameter dimension", self.param_dim, norm.mu_dim()));
        }
        let mut set = TrainingSet::with_capacity(self.param_dim, self.values.len());
        for k in 0..self.n_params() {
            for j in 0..self.n_times() {
                let t = self.times[j];
                for (x, u) in self.nodes(j).iter().zip(self.snapshot(k, j)) {
                    set.push(norm, *x, t, self.param(k), *u);
                }
            }
        }
        Ok(set)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w, SNAP_MAGIC, &self.times)?;
        w.flush()?;
        if let Some(d) = &self.descriptor {
            std::fs::write(sidecar_path(path), serde_json::to_string_pretty(d)?)?;
        }
        Ok(())
    }

    pub(crate) fn write_to(&self, w: &mut impl Write, magic: &[u8; 8], time_slot: &[f64]) -> Result<()> {
        let mut flags = 0;
        if self.has_per_snapshot_meshes() {
            flags |= FLAG_PER_SNAPSHOT_MESH;
        }
        if self.period.is_some() {
            flags |= FLAG_PERIODIC;
        }
        w.write_all(magic)?;
        for v in [self.n_nodes, time_slot.len(), self.n_params(), self.param_dim] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        w.write_all(&flags.to_le_bytes())?;
        if let Some(p) = self.period {
            w.write_all(&p.to_le_bytes())?;
        }
        for x in self.meshes.iter().flatten().chain(time_slot).chain(&self.params).chain(&self.values) {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut set = Self::read_from(&bytes, SNAP_MAGIC)?;
        let side = sidecar_path(path);
        if side.exists() {
            set.descriptor = Some(serde_json::from_str(&std::fs::read_to_string(side)?)?);
        }
        Ok(set)
    }

    pub(crate) fn read_from(bytes: &[u8], magic: &[u8; 8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(8)? != magic {
            return Err(Error::Format(format!(
                "bad magic, expected {}",
                String::from_utf8_lossy(magic)
            )));
        }
        let n_nodes = cur.u64()? as usize;
        let n_times = cur.u64()? as usize;
        let n_params = cur.u64()? as usize;
        let param_dim = cur.u64()? as usize;
        let flags = cur.u64()?;
        let period = if flags & FLAG_PERIODIC != 0 { Some(cur.f64()?) } else { None };
        let n_meshes = if flags & FLAG_PER_SNAPSHOT_MESH != 0 { n_times } else { 1 };
        let meshes = (0..n_meshes).map(|_| cur.f64s(n_nodes)).collect::<Result<Vec<_>>>()?;
        let times = cur.f64s(n_times)?;
        let params = (0..n_params).map(|_| cur.f64s(param_dim)).collect::<Result<Vec<_>>>()?;
        let values = cur.f64s(n_nodes * n_times * n_params)?;
        if cur.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after snapshot payload".into()));
        }
        Self::build(meshes, period, times, params, values)
    }

    /// Columns `mu…, t, x, u`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        let mut header: Vec<String> = (0..self.param_dim).map(|d| format!("mu{d}")).collect();
        header.extend(["t", "x", "u"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.n_params() {
            let mu: Vec<String> = self.param(k).iter().map(|v| format!("{v:e}")).collect();
            for j in 0..self.n_times() {
                for (x, u) in self.nodes(j).iter().zip(self.snapshot(k, j)) {
                    for m in &mu {
                        write!(w, "{m},")?;
                    }
                    writeln!(w, "{:e},{x:e},{u:e}", self.times[j])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("truncated binary container".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SnapshotSet {
        let mesh = Mesh1D::uniform(0.0, 1.0, 4).unwrap();
        let values: Vec<f64> = (0..5 * 3 * 2).map(|v| v as f64 * 0.5).collect();
        SnapshotSet::new(&mesh, vec![0.0, 0.1, 0.2], vec![vec![0.3], vec![0.7]], values).unwrap()
    }

    #[test]
    fn indexing_is_param_major() {
        let s = sample();
        assert_eq!(s.snapshot(0, 0)[0], 0.0);
        assert_eq!(s.snapshot(0, 1)[0], 2.5);
        assert_eq!(s.snapshot(1, 0)[0], 7.5);
    }

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.lpsnap");
        let mut s = sample();
        s.descriptor = Some(serde_json::json!({"dt_rule": "dx"}));
        s.write(&path).unwrap();
        let back = SnapshotSet::read(&path).unwrap();
        assert_eq!(back, s);
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], b"LPSNAP01");
        assert!(SnapshotSet::read_from(&bytes[..bytes.len() - 3], SNAP_MAGIC).is_err());
    }

    #[test]
    fn moving_meshes_round_trip() {
        let meshes = [
            Mesh1D::new(vec![0.0, 0.5, 1.0]).unwrap(),
            Mesh1D::new(vec![0.0, 0.6, 1.0]).unwrap(),
        ];
        let s = SnapshotSet::with_meshes(&meshes, vec![0.0, 1.0], vec![vec![]], vec![1.0; 6]).unwrap();
        assert!(s.has_per_snapshot_meshes());
        let mut buf = Vec::new();
        s.write_to(&mut buf, SNAP_MAGIC, s.times()).unwrap();
        assert_eq!(SnapshotSet::read_from(&buf, SNAP_MAGIC).unwrap(), s);
        assert_eq!(s.nodes(1)[1], 0.6);
    }

    #[test]
    fn csv_has_one_row_per_point() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        sample().write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "mu0,t,x,u");
        assert_eq!(lines.count(), 30);
    }

    #[test]
    fn time_selection() {
        let s = sample().select_times(|_, t| t <= 0.1 + 1e-12).unwrap();
        assert_eq!(s.n_times(), 2);
        assert_eq!(s.snapshot(1, 1), sample().snapshot(1, 1));
    }

    #[test]
    fn training_set_covers_all_points() {
        let s = sample();
        let ts = s.training_set(&s.normalization()).unwrap();
        assert_eq!(ts.len(), 30);
    }
}
