//! Lattice geometry, the m-particle joint space and the shared topology matrix.
//!
//! Sites are numbered row-major over the lattice directions (last direction
//! fastest). Joint states are numbered row-major over particle positions, so
//! for `m = 2` and `N` sites the joint index of `(x0, x1)` is `x0 * N + x1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Periodic,
    Open,
}

impl Boundary {
    pub fn as_str(self) -> &'static str {
        match self {
            Boundary::Periodic => "periodic",
            Boundary::Open => "open",
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "periodic" => Ok(Boundary::Periodic),
            "open" => Ok(Boundary::Open),
            other => Err(format!("unknown boundary '{other}' (expected periodic or open)")),
        }
    }
}

/// A q-dimensional regular lattice with `dims[i]` nodes and `2 * k_half[i]`
/// neighbors along direction `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeTopology {
    dims: Vec<usize>,
    k_half: Vec<usize>,
    boundary: Boundary,
    strides: Vec<usize>,
    n_sites: usize,
}

impl LatticeTopology {
    pub fn new(q: usize, dims: &[usize], k_half: &[usize], boundary: Boundary) -> Result<Self> {
        if q == 0 {
            return Err(Error::config("lattice needs at least one direction (q >= 1)"));
        }
        if dims.len() != q || k_half.len() != q {
            return Err(Error::config(format!(
                "dimension mismatch: q = {q} but {} sizes and {} neighbor ranges were given",
                dims.len(),
                k_half.len()
            )));
        }
        for (i, (&n, &k)) in dims.iter().zip(k_half).enumerate() {
            if n < 2 {
                return Err(Error::config(format!("direction {i}: N_{i} = {n} must be >= 2")));
            }
            if k < 1 {
                return Err(Error::config(format!("direction {i}: k_{i} = {k} must be >= 1")));
            }
            if 2 * k >= n {
                return Err(Error::config(format!(
                    "direction {i}: 2*k_{i} = {} must be smaller than N_{i} = {n}",
                    2 * k
                )));
            }
        }
        let n_sites = dims
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| Error::Capacity("lattice site count overflows usize".into()))?;
        let mut strides = vec![1; q];
        for i in (0..q.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        Ok(Self {
            dims: dims.to_vec(),
            k_half: k_half.to_vec(),
            boundary,
            strides,
            n_sites,
        })
    }

    /// One-dimensional ring (or chain) with nearest neighbors.
    pub fn chain(n: usize, boundary: Boundary) -> Result<Self> {
        Self::new(1, &[n], &[1], boundary)
    }

    pub fn q(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn k_half(&self) -> &[usize] {
        &self.k_half
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Single-particle state count N.
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Neighbor count per site, k = sum of 2 k_i.
    pub fn k_total(&self) -> usize {
        2 * self.links_per_site()
    }

    /// Forward links owned by each site, sum of k_i.
    pub fn links_per_site(&self) -> usize {
        self.k_half.iter().sum()
    }

    /// Size of the link table (some slots are unused with open boundaries).
    pub fn link_slots(&self) -> usize {
        self.n_sites * self.links_per_site()
    }

    pub fn coordinate(&self, site: usize, direction: usize) -> usize {
        (site / self.strides[direction]) % self.dims[direction]
    }

    pub fn coordinates(&self, site: usize) -> Vec<usize> {
        (0..self.q()).map(|d| self.coordinate(site, d)).collect()
    }

    pub fn site(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.q() {
            return Err(Error::Index(format!(
                "expected {} coordinates, got {}",
                self.q(),
                coords.len()
            )));
        }
        let mut site = 0;
        for (d, &c) in coords.iter().enumerate() {
            if c >= self.dims[d] {
                return Err(Error::Index(format!(
                    "coordinate {c} out of range [0, {}) along direction {d}",
                    self.dims[d]
                )));
            }
            site += c * self.strides[d];
        }
        Ok(site)
    }

    /// Site reached from `site` by moving `offset` nodes along `direction`.
    pub fn neighbor(&self, site: usize, direction: usize, offset: isize) -> Option<usize> {
        let n = self.dims[direction] as isize;
        let c = self.coordinate(site, direction) as isize;
        let target = match self.boundary {
            Boundary::Periodic => (c + offset).rem_euclid(n),
            Boundary::Open => {
                let t = c + offset;
                if t < 0 || t >= n {
                    return None;
                }
                t
            }
        };
        Some((site as isize + (target - c) * self.strides[direction] as isize) as usize)
    }

    /// Position of the (direction, offset) pair inside a site's forward link list.
    pub fn link_slot(&self, direction: usize, offset: usize) -> usize {
        debug_assert!(offset >= 1 && offset <= self.k_half[direction]);
        self.k_half[..direction].iter().sum::<usize>() + offset - 1
    }

    /// Inverse of [`link_slot`](Self::link_slot).
    pub fn slot_move(&self, slot: usize) -> (usize, usize) {
        let mut rest = slot;
        for (d, &k) in self.k_half.iter().enumerate() {
            if rest < k {
                return (d, rest + 1);
            }
            rest -= k;
        }
        panic!("link slot {slot} out of range");
    }

    /// Identifier of the link joining `site` to its forward neighbor at
    /// (`direction`, `offset`). Every undirected lattice link has exactly one id.
    pub fn link_id(&self, site: usize, direction: usize, offset: usize) -> usize {
        site * self.links_per_site() + self.link_slot(direction, offset)
    }

    /// The two sites joined by a link, or `None` for an unused slot at an open edge.
    pub fn link_endpoints(&self, link: usize) -> Option<(usize, usize)> {
        let per = self.links_per_site();
        let site = link / per;
        let (d, o) = self.slot_move(link % per);
        self.neighbor(site, d, o as isize).map(|t| (site, t))
    }

    /// Whether a link slot corresponds to a real link.
    pub fn link_exists(&self, link: usize) -> bool {
        self.link_endpoints(link).is_some()
    }
}

/// The m-particle joint space over a lattice: full tensor product of size N^m.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointSpace {
    lattice: LatticeTopology,
    m: usize,
    dim: usize,
    // strides[p] = N^(m-1-p)
    strides: Vec<usize>,
}

impl JointSpace {
    pub fn new(lattice: LatticeTopology, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::config("particle count m must be >= 1"));
        }
        let n = lattice.n_sites();
        let dim = u32::try_from(m)
            .ok()
            .and_then(|e| n.checked_pow(e))
            .ok_or_else(|| {
                Error::Capacity(format!("joint dimension {n}^{m} overflows the index type"))
            })?;
        if dim >= TopologyMatrix::INVALID as usize {
            return Err(Error::Capacity(format!(
                "joint dimension {dim} exceeds the topology index range ({})",
                TopologyMatrix::INVALID
            )));
        }
        let strides = (0..m).map(|p| n.pow((m - 1 - p) as u32)).collect();
        Ok(Self {
            lattice,
            m,
            dim,
            strides,
        })
    }

    pub fn lattice(&self) -> &LatticeTopology {
        &self.lattice
    }

    pub fn particles(&self) -> usize {
        self.m
    }

    /// Joint state count N^m.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// k = sum of 2 k_i.
    pub fn k_total(&self) -> usize {
        self.lattice.k_total()
    }

    /// Stored off-diagonal values per row of the reduced Hamiltonian, m k / 2.
    pub fn half_width(&self) -> usize {
        self.m * self.lattice.links_per_site()
    }

    /// Columns of the topology matrix, m k + 1.
    pub fn width(&self) -> usize {
        2 * self.half_width() + 1
    }

    /// Upper bound on the fraction of non-zero Hamiltonian entries, (m k + 1) / N^m.
    pub fn filling_factor(&self) -> f64 {
        self.width() as f64 / self.dim as f64
    }

    pub fn particle_stride(&self, particle: usize) -> usize {
        self.strides[particle]
    }

    pub fn joint_index(&self, positions: &[usize]) -> Result<usize> {
        if positions.len() != self.m {
            return Err(Error::Index(format!(
                "expected {} particle positions, got {}",
                self.m,
                positions.len()
            )));
        }
        let n = self.lattice.n_sites();
        positions.iter().try_fold(0usize, |acc, &x| {
            if x >= n {
                Err(Error::Index(format!("position {x} out of range [0, {n})")))
            } else {
                Ok(acc * n + x)
            }
        })
    }

    pub fn joint_positions(&self, alpha: usize) -> Result<Vec<usize>> {
        if alpha >= self.dim {
            return Err(Error::Index(format!(
                "joint index {alpha} out of range [0, {})",
                self.dim
            )));
        }
        let mut out = vec![0; self.m];
        self.positions_into(alpha, &mut out);
        Ok(out)
    }

    /// Unchecked decoding into a caller-provided buffer of length m.
    #[inline]
    pub fn positions_into(&self, alpha: usize, out: &mut [usize]) {
        let n = self.lattice.n_sites();
        let mut rest = alpha;
        for p in (0..self.m).rev() {
            out[p] = rest % n;
            rest /= n;
        }
    }

    /// Position of one particle in joint state `alpha`.
    #[inline]
    pub fn position_of(&self, alpha: usize, particle: usize) -> usize {
        (alpha / self.strides[particle]) % self.lattice.n_sites()
    }

    /// Number of coinciding particle pairs in joint state `alpha`.
    pub fn coincidences(&self, positions: &[usize]) -> usize {
        let mut count = 0;
        for a in 0..positions.len() {
            for b in a + 1..positions.len() {
                if positions[a] == positions[b] {
                    count += 1;
                }
            }
        }
        count
    }

    /// All joint states with `particle` sitting on `site`, in increasing order.
    pub fn states_with_particle_at(
        &self,
        particle: usize,
        site: usize,
    ) -> impl Iterator<Item = usize> + '_ {
        let n = self.lattice.n_sites();
        let lo_span = self.strides[particle];
        let hi_span = self.dim / (lo_span * n);
        (0..hi_span).flat_map(move |hi| {
            let base = hi * lo_span * n + site * lo_span;
            (0..lo_span).map(move |lo| base + lo)
        })
    }

    /// Joint state reached by moving one particle forward along a link slot.
    fn forward_move(&self, alpha: usize, particle: usize, slot: usize, sign: isize) -> Option<usize> {
        let x = self.position_of(alpha, particle);
        let (d, o) = self.lattice.slot_move(slot);
        let y = self.lattice.neighbor(x, d, sign * o as isize)?;
        let stride = self.strides[particle] as isize;
        Some((alpha as isize + (y as isize - x as isize) * stride) as usize)
    }
}

/// Shared table of the non-null Hamiltonian columns of every joint row.
///
/// Row layout (width `2h + 1`, `h` = m k / 2): slot 0 is the diagonal, slots
/// `1..=h` are the forward moves (particle `p`, direction `d`, offset `+o`) and
/// slots `h+1..=2h` are the backward moves in the same order. The reduced
/// Hamiltonian stores values only for the diagonal and the forward half; the
/// value of backward slot `j` of row `a` is the conjugate of forward slot `j`
/// of the row it points to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyMatrix {
    rows: usize,
    half: usize,
    indices: Vec<u32>,
    valid_count: Vec<u32>,
}

impl TopologyMatrix {
    /// Marker for an absent neighbor (open boundaries).
    pub const INVALID: u32 = u32::MAX;

    pub fn build(space: &JointSpace) -> Result<Self> {
        let rows = space.dim();
        let half = space.half_width();
        let width = 2 * half + 1;
        let cells = rows
            .checked_mul(width)
            .ok_or_else(|| Error::Capacity("topology table size overflows usize".into()))?;
        let per_particle = space.lattice().links_per_site();
        let mut indices = vec![Self::INVALID; cells];
        let mut valid_count = vec![0u32; rows];
        for (alpha, (row, count)) in indices
            .chunks_exact_mut(width)
            .zip(valid_count.iter_mut())
            .enumerate()
        {
            row[0] = alpha as u32;
            for p in 0..space.particles() {
                for s in 0..per_particle {
                    let j = p * per_particle + s;
                    if let Some(beta) = space.forward_move(alpha, p, s, 1) {
                        row[1 + j] = beta as u32;
                        *count += 1;
                    }
                    if let Some(beta) = space.forward_move(alpha, p, s, -1) {
                        row[1 + half + j] = beta as u32;
                        *count += 1;
                    }
                }
            }
        }
        Ok(Self {
            rows,
            half,
            indices,
            valid_count,
        })
    }

    /// Build a topology for an arbitrary graph from its forward neighbor
    /// lists (`rows * half` entries, [`INVALID`](Self::INVALID) for none). The
    /// backward half is derived; each row may be the forward target of at most
    /// one row per slot.
    pub fn from_forward(rows: usize, half: usize, forward: &[u32]) -> Result<Self> {
        if forward.len() != rows * half {
            return Err(Error::Dimension(format!(
                "expected {} forward entries, got {}",
                rows * half,
                forward.len()
            )));
        }
        let width = 2 * half + 1;
        let mut indices = vec![Self::INVALID; rows * width];
        let mut valid_count = vec![0u32; rows];
        for alpha in 0..rows {
            indices[alpha * width] = alpha as u32;
        }
        for alpha in 0..rows {
            for j in 0..half {
                let beta = forward[alpha * half + j];
                if beta == Self::INVALID {
                    continue;
                }
                let b = beta as usize;
                if b >= rows || b == alpha {
                    return Err(Error::Index(format!(
                        "row {alpha}: forward neighbor {b} is invalid"
                    )));
                }
                let back = &mut indices[b * width + 1 + half + j];
                if *back != Self::INVALID {
                    return Err(Error::Consistency(format!(
                        "row {b} is the slot-{j} target of both {} and {alpha}",
                        *back
                    )));
                }
                *back = alpha as u32;
                indices[alpha * width + 1 + j] = beta;
                valid_count[alpha] += 1;
                valid_count[b] += 1;
            }
        }
        Ok(Self {
            rows,
            half,
            indices,
            valid_count,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Forward slots per row (m k / 2).
    pub fn half_width(&self) -> usize {
        self.half
    }

    /// Columns per row (m k + 1).
    pub fn width(&self) -> usize {
        2 * self.half + 1
    }

    #[inline]
    pub fn row(&self, alpha: usize) -> &[u32] {
        let w = self.width();
        &self.indices[alpha * w..(alpha + 1) * w]
    }

    #[inline]
    pub fn forward(&self, alpha: usize) -> &[u32] {
        &self.row(alpha)[1..=self.half]
    }

    #[inline]
    pub fn backward(&self, alpha: usize) -> &[u32] {
        &self.row(alpha)[1 + self.half..]
    }

    /// Genuine (non-diagonal) neighbors of a row.
    pub fn valid_count(&self, alpha: usize) -> usize {
        self.valid_count[alpha] as usize
    }

    /// Valid column indices of a row, diagonal first.
    pub fn columns(&self, alpha: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(alpha)
            .iter()
            .filter(|&&b| b != Self::INVALID)
            .map(|&b| b as usize)
    }

    pub fn index_bytes(&self) -> usize {
        self.indices.len() * std::mem::size_of::<u32>()
    }
}
