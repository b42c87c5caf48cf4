use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodal mesh on an interval. Periodic meshes omit the right endpoint, which coincides with the left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh1D {
    nodes: Vec<f64>,
    periodic: Option<f64>,
}

impl Mesh1D {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidInput("a mesh needs at least two nodes".into()));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("mesh nodes must be finite".into()));
        }
        if let Some(i) = nodes.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!(
                "mesh nodes must be strictly increasing (nodes {i} and {})",
                i + 1
            )));
        }
        Ok(Self {
            nodes,
            periodic: None,
        })
    }

    /// Arbitrary nodes with an optional period.
    pub fn with_period(nodes: Vec<f64>, period: Option<f64>) -> Result<Self> {
        let mut mesh = Self::new(nodes)?;
        if let Some(p) = period {
            if !(p > mesh.nodes[mesh.len() - 1] - mesh.nodes[0]) {
                return Err(Error::InvalidInput(format!("period {p} shorter than the node span")));
            }
        }
        mesh.periodic = period;
        Ok(mesh)
    }

    /// `cells + 1` equally spaced nodes from `a` to `b`.
    pub fn uniform(a: f64, b: f64, cells: usize) -> Result<Self> {
        if cells == 0 || b <= a {
            return Err(Error::InvalidInput(format!("bad uniform mesh [{a}, {b}] with {cells} cells")));
        }
        let h = (b - a) / cells as f64;
        let mut nodes: Vec<f64> = (0..=cells).map(|i| a + i as f64 * h).collect();
        nodes[cells] = b;
        Self::new(nodes)
    }

    /// `cells` nodes `a + iΔx`, `i < cells`, with `u(b) ≡ u(a)`.
    pub fn uniform_periodic(a: f64, b: f64, cells: usize) -> Result<Self> {
        if cells < 2 || b <= a {
            return Err(Error::InvalidInput(format!("bad periodic mesh [{a}, {b}] with {cells} cells")));
        }
        let h = (b - a) / cells as f64;
        let mut mesh = Self::new((0..cells).map(|i| a + i as f64 * h).collect())?;
        mesh.periodic = Some(b - a);
        Ok(mesh)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic.is_some()
    }

    pub fn period(&self) -> Option<f64> {
        self.periodic
    }

    pub fn left(&self) -> f64 {
        self.nodes[0]
    }

    /// Right end of the domain (the period end for periodic meshes).
    pub fn right(&self) -> f64 {
        match self.periodic {
            Some(p) => self.nodes[0] + p,
            None => *self.nodes.last().unwrap(),
        }
    }

    /// Distance from node `j` to its right neighbour (wrapping when periodic).
    pub fn spacing_right(&self, j: usize) -> f64 {
        let n = self.nodes.len();
        if j + 1 < n {
            self.nodes[j + 1] - self.nodes[j]
        } else {
            match self.periodic {
                Some(p) => self.nodes[0] + p - self.nodes[j],
                None => self.nodes[j] - self.nodes[j - 1],
            }
        }
    }

    /// Distance from node `j` to its left neighbour (wrapping when periodic).
    pub fn spacing_left(&self, j: usize) -> f64 {
        if j > 0 {
            self.nodes[j] - self.nodes[j - 1]
        } else {
            match self.periodic {
                Some(p) => self.nodes[0] + p - self.nodes[self.nodes.len() - 1],
                None => self.nodes[1] - self.nodes[0],
            }
        }
    }

    /// Control width of every node: the average of the adjacent spacings, or the end spacing at a boundary.
    pub fn widths(&self) -> Vec<f64> {
        let n = self.nodes.len();
        (0..n)
            .map(|j| {
                if self.periodic.is_none() && (j == 0 || j + 1 == n) {
                    if j == 0 {
                        self.spacing_right(0)
                    } else {
                        self.spacing_left(j)
                    }
                } else {
                    0.5 * (self.spacing_left(j) + self.spacing_right(j))
                }
            })
            .collect()
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.nodes.len()).map(|j| self.spacing_right(j)).fold(f64::INFINITY, f64::min)
    }
}

/// Band-refined moving mesh: spacing `h_refine` while `x_{i-1}` lies in `[band_lo + t, band_hi + t]`,
/// `h_coarse` elsewhere, with the last node clamped to the right end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovingBandRule {
    pub left: f64,
    pub right: f64,
    pub cells: usize,
    pub band_lo: f64,
    pub band_hi: f64,
    /// Coarse spacing as a multiple of the fine spacing.
    pub coarse_ratio: u32,
    pub h_refine: f64,
    pub speed: f64,
}

impl Default for MovingBandRule {
    fn default() -> Self {
        Self {
            left: 0.0,
            right: 5.0,
            cells: 1000,
            band_lo: 0.5,
            band_hi: 1.5,
            coarse_ratio: 4,
            h_refine: 1.0 / 500.0,
            speed: 1.0,
        }
    }
}

impl MovingBandRule {
    pub fn h_coarse(&self) -> f64 {
        self.h_refine * self.coarse_ratio as f64
    }

    pub fn mesh_at(&self, t: f64) -> Result<Mesh1D> {
        if !(t >= 0.0) {
            return Err(Error::InvalidInput(format!("moving mesh requested at t = {t}")));
        }
        // integer node positions in units of h_refine keep spacings exact
        let unit = self.h_refine;
        let lo = (self.band_lo + self.speed * t - self.left) / unit - 1e-9;
        let hi = (self.band_hi + self.speed * t - self.left) / unit + 1e-9;
        let mut k: u64 = 0;
        let mut nodes = Vec::with_capacity(self.cells + 1);
        nodes.push(self.left);
        for _ in 1..self.cells {
            let kf = k as f64;
            k += if kf >= lo && kf <= hi { 1 } else { self.coarse_ratio as u64 };
            nodes.push(self.left + k as f64 * unit);
        }
        nodes.push(self.right);
        Mesh1D::new(nodes).map_err(|_| {
            Error::InvalidInput(format!("moving-band rule overflows the domain at t = {t}"))
        })
    }
}

/// The standard band rule on `[0,5]` with 1000 cells.
pub fn moving_mesh_nodes(t: f64) -> Result<Mesh1D> {
    MovingBandRule::default().mesh_at(t)
}

/// Piecewise-linear interpolation of nodal values from `old` to `new` nodes.
pub fn remap_solution(old: &Mesh1D, new: &Mesh1D, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != old.len() {
        return Err(Error::dim("remap input", old.len(), u.len()));
    }
    let tol = 1e-9 * (old.right() - old.left()).abs().max(1.0);
    if new.left() < old.left() - tol || new.right() > old.right() + tol || new.right() < old.left() || new.left() > old.right() {
        return Err(Error::InvalidInput(format!(
            "remap target [{}, {}] lies outside source [{}, {}]",
            new.left(),
            new.right(),
            old.left(),
            old.right()
        )));
    }
    let xs = old.nodes();
    let mut out = Vec::with_capacity(new.len());
    let mut seg = 0;
    for &x in new.nodes() {
        while seg + 2 < xs.len() && xs[seg + 1] < x {
            seg += 1;
        }
        let (x0, x1) = (xs[seg], xs[seg + 1]);
        let w = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
        out.push(u[seg] + w * (u[seg + 1] - u[seg]));
    }
    Ok(out)
}

/// Linear interpolation of nodal values at arbitrary points (clamped at the ends).
pub fn interpolate(mesh: &Mesh1D, u: &[f64], points: &[f64]) -> Vec<f64> {
    let xs = mesh.nodes();
    points
        .iter()
        .map(|&x| {
            let seg = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
                Ok(i) => return u[i],
                Err(0) => return u[0],
                Err(i) if i >= xs.len() => return u[xs.len() - 1],
                Err(i) => i - 1,
            };
            let w = (x - xs[seg]) / (xs[seg + 1] - xs[seg]);
            u[seg] + w * (u[seg + 1] - u[seg])
        })
        .collect()
}
