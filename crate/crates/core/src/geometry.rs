//! The cube hierarchy of a regularized Cantor set.
//!
//! Level `j` holds `2^{dj}` closed cubes of edge `ℓ_j`. Indices follow tree
//! order: the children of cube `k` are `k·2^d + c` where the `d` bits of `c`
//! pick the side on each axis, axis 1 most significant and bit 0 meaning the
//! negative side. Index 0 is therefore the all-negative corner.

use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sequence::{fmt_f64, Ladder};

/// Largest `d·n` materialized by default.
pub const DEFAULT_BIT_CAP: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cube {
    pub center: Vec<f64>,
    pub edge: f64,
    pub level: usize,
    pub index: u64,
}

impl Cube {
    pub fn contains(&self, x: &[f64]) -> bool {
        let h = 0.5 * self.edge;
        self.center.iter().zip(x).all(|(c, t)| (t - c).abs() <= h)
    }

    pub fn contains_cube(&self, other: &Cube, slack: f64) -> bool {
        let h = 0.5 * (self.edge - other.edge) + slack;
        self.center
            .iter()
            .zip(&other.center)
            .all(|(a, b)| (a - b).abs() <= h)
    }
}

#[derive(Debug, Clone)]
pub struct CantorSet {
    ladder: Ladder,
    d: usize,
    /// `centers[j]` holds `2^{dj}·d` coordinates, `j = 0..=n`.
    centers: Vec<Vec<f64>>,
    /// Per-axis child displacement at level `j` (index `j-1`).
    offsets: Vec<f64>,
}

/// Containing cubes of a point of the set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    /// Cube index at levels `1..=n`.
    pub cubes: Vec<u64>,
    /// Frame index for blocks `1..=m`; the frame of block `p` is centered on
    /// the level `j_p - 1` cube with that index.
    pub frames: Vec<u64>,
}

impl Location {
    pub fn leaf(&self) -> u64 {
        *self.cubes.last().expect("at least one level")
    }
}

/// Per-axis `±1` choice vectors of a level-`n` cube, coarsest level first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Address {
    pub axes: Vec<Vec<i8>>,
}

impl Address {
    /// The axis-1 choice vector.
    pub fn first_axis(&self) -> &[i8] {
        &self.axes[0]
    }
}

impl CantorSet {
    pub fn build(ladder: &Ladder, d: usize) -> Result<Self> {
        Self::build_with_cap(ladder, d, DEFAULT_BIT_CAP)
    }

    pub fn build_with_cap(ladder: &Ladder, d: usize, bit_cap: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Parameter("dimension must be at least 1".into()));
        }
        let n = ladder.depth();
        let p = ladder.params();
        if !(2.0 * p.frame * p.alpha < 1.0) {
            return Err(Error::Parameter(format!(
                "frames overlap: 2·T·alpha = {} ≥ 1",
                2.0 * p.frame * p.alpha
            )));
        }
        if d * n > bit_cap || d * n >= 63 {
            return Err(Error::Capacity {
                needed: 1u64.checked_shl((d * n) as u32).unwrap_or(u64::MAX),
                cap: 1u64 << bit_cap.min(62),
            });
        }
        let offsets: Vec<f64> = (1..=n)
            .map(|j| {
                let l = ladder.ell_at(j);
                if ladder.is_selected(j) {
                    (p.frame - 0.5) * l
                } else {
                    0.5 * l
                }
            })
            .collect();
        let mut centers = vec![vec![0.0; d]];
        for j in 1..=n {
            let prev = &centers[j - 1];
            let count = 1usize << (d * j);
            let off = offsets[j - 1];
            let mut level = Vec::with_capacity(count * d);
            for k in 0..count {
                let parent = k >> d;
                for i in 0..d {
                    let bit = (k >> (d - 1 - i)) & 1;
                    let c = prev[parent * d + i];
                    level.push(if bit == 1 { c + off } else { c - off });
                }
            }
            centers.push(level);
        }
        let set = Self {
            ladder: ladder.clone(),
            d,
            centers,
            offsets,
        };
        let bad = set.violations();
        if !bad.is_empty() {
            return Err(Error::Invariant(bad.join("; ")));
        }
        Ok(set)
    }

    pub fn ladder(&self) -> &Ladder {
        &self.ladder
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn depth(&self) -> usize {
        self.ladder.depth()
    }

    pub fn frame(&self) -> f64 {
        self.ladder.frame()
    }

    pub fn leaf_count(&self) -> usize {
        1usize << (self.d * self.depth())
    }

    pub fn level_count(&self, j: usize) -> usize {
        1usize << (self.d * j)
    }

    /// Edge of level `j`; level 0 is the root frame.
    pub fn edge(&self, j: usize) -> f64 {
        if j == 0 {
            2.0 * self.frame() * self.ladder.ell_at(1)
        } else {
            self.ladder.ell_at(j)
        }
    }

    pub fn offset(&self, j: usize) -> f64 {
        self.offsets[j - 1]
    }

    /// Flat center coordinates of level `j` (`0..=n`).
    pub fn centers(&self, j: usize) -> &[f64] {
        &self.centers[j]
    }

    pub fn center(&self, j: usize, k: u64) -> &[f64] {
        let k = k as usize;
        &self.centers[j][k * self.d..(k + 1) * self.d]
    }

    pub fn leaf_centers(&self) -> &[f64] {
        &self.centers[self.depth()]
    }

    pub fn ancestor(&self, k: u64, level: usize) -> u64 {
        k >> (self.d * (self.depth() - level))
    }

    pub fn root(&self) -> Cube {
        Cube {
            center: vec![0.0; self.d],
            edge: self.edge(0),
            level: 0,
            index: 0,
        }
    }

    pub fn cube(&self, j: usize, k: u64) -> Cube {
        Cube {
            center: self.center(j, k).to_vec(),
            edge: self.edge(j),
            level: j,
            index: k,
        }
    }

    /// The `2^{dj}` cubes of level `j ∈ 1..=n` in canonical order.
    pub fn level_cubes(&self, j: usize) -> Result<Vec<Cube>> {
        if j == 0 || j > self.depth() {
            return Err(Error::OutOfRange {
                what: "level",
                value: j as u64,
                limit: self.depth() as u64,
            });
        }
        Ok((0..self.level_count(j) as u64).map(|k| self.cube(j, k)).collect())
    }

    /// Frames of block `p ∈ 1..=m`: edge `2Tℓ_{j_p}`, centered on the cubes
    /// of level `j_p - 1`.
    pub fn frames(&self, p: usize) -> Result<Vec<Cube>> {
        let sel = self.ladder.selected();
        if p == 0 || p > sel.len() {
            return Err(Error::OutOfRange {
                what: "block",
                value: p as u64,
                limit: sel.len() as u64,
            });
        }
        let jp = sel[p - 1];
        let edge = 2.0 * self.frame() * self.ladder.ell_at(jp);
        Ok((0..self.level_count(jp - 1) as u64)
            .map(|i| Cube {
                center: self.center(jp - 1, i).to_vec(),
                edge,
                level: jp - 1,
                index: i,
            })
            .collect())
    }

    /// Containing chain of a point of `E_n`, or `None` when the point lies
    /// outside every level-`n` cube. On shared faces the lower index wins.
    pub fn locate(&self, x: &[f64]) -> Option<Location> {
        if x.len() != self.d {
            return None;
        }
        let n = self.depth();
        if !self.root().contains(x) {
            return None;
        }
        let mut k = 0u64;
        let mut cubes = Vec::with_capacity(n);
        for j in 1..=n {
            let parent = self.center(j - 1, k);
            let mut child = k << self.d;
            for i in 0..self.d {
                if x[i] > parent[i] {
                    child |= 1 << (self.d - 1 - i);
                }
            }
            let c = self.center(j, child);
            let h = 0.5 * self.edge(j);
            if !c.iter().zip(x).all(|(c, t)| (t - c).abs() <= h) {
                return None;
            }
            k = child;
            cubes.push(k);
        }
        let frames = self
            .ladder
            .selected()
            .iter()
            .map(|&jp| if jp == 1 { 0 } else { cubes[jp - 2] })
            .collect();
        Some(Location { cubes, frames })
    }

    pub fn encode(&self, k: u64) -> Result<Address> {
        let n = self.depth();
        if k >= self.leaf_count() as u64 {
            return Err(Error::OutOfRange {
                what: "cube index",
                value: k,
                limit: self.leaf_count() as u64,
            });
        }
        let mut axes = vec![Vec::with_capacity(n); self.d];
        for j in 1..=n {
            let digit = (k >> (self.d * (n - j))) & ((1 << self.d) - 1);
            for (i, axis) in axes.iter_mut().enumerate() {
                axis.push(if (digit >> (self.d - 1 - i)) & 1 == 1 { 1 } else { -1 });
            }
        }
        Ok(Address { axes })
    }

    pub fn decode(&self, a: &Address) -> Result<u64> {
        let n = self.depth();
        if a.axes.len() != self.d {
            return Err(Error::Dimension {
                expected: self.d,
                got: a.axes.len(),
            });
        }
        let mut k = 0u64;
        for j in 0..n {
            for axis in &a.axes {
                let bit = match axis.get(j) {
                    Some(1) => 1,
                    Some(-1) => 0,
                    _ => return Err(Error::Parameter(format!("address entry at level {}", j + 1))),
                };
                k = (k << 1) | bit;
            }
        }
        Ok(k)
    }

    /// Split an index into the axis-1 choice bits `v` and the remaining
    /// axes `u`, both coarsest level first.
    pub fn factor(&self, k: u64) -> (u64, u64) {
        let n = self.depth();
        let (mut u, mut v) = (0u64, 0u64);
        for j in 1..=n {
            let digit = (k >> (self.d * (n - j))) & ((1 << self.d) - 1);
            v = (v << 1) | (digit >> (self.d - 1));
            u = (u << (self.d - 1)) | (digit & ((1 << (self.d - 1)) - 1));
        }
        (u, v)
    }

    pub fn unfactor(&self, u: u64, v: u64) -> u64 {
        let n = self.depth();
        let rest = self.d - 1;
        let mut k = 0u64;
        for j in 1..=n {
            let vb = (v >> (n - j)) & 1;
            let ub = (u >> (rest * (n - j))) & ((1 << rest) - 1);
            k = (k << self.d) | (vb << rest) | ub;
        }
        k
    }

    /// Toggle the choice on `axis` (zero-based) at `level` of leaf `k`.
    pub fn flip(&self, k: u64, axis: usize, level: usize) -> u64 {
        let n = self.depth();
        k ^ (1 << (self.d * (n - level) + self.d - 1 - axis))
    }

    /// Leaf index of the cube symmetric through the origin.
    pub fn mirror(&self, k: u64) -> u64 {
        !k & (self.leaf_count() as u64 - 1)
    }

    /// Structural checks run after every build.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.depth();
        let d = self.d;
        let tol = 1e-12 * self.edge(0);
        for j in 0..=n {
            if self.centers[j].len() != self.level_count(j) * d {
                out.push(format!("level {j} has the wrong cube count"));
            }
        }
        // nesting: each child inside its parent
        for j in 1..=n {
            let half_gap = 0.5 * (self.edge(j - 1) - self.edge(j)) + tol;
            let off = self.offset(j);
            if off > half_gap {
                out.push(format!("level {j} cubes leave their parents"));
            }
        }
        // corner placement inside the frame of each block
        let sel = self.ladder.selected();
        for &jp in sel {
            let l = self.ladder.ell_at(jp);
            let corner = self.frame() * l - 0.5 * l;
            if (self.offset(jp) - corner).abs() > tol {
                out.push(format!("level {jp} cubes are not frame corners"));
            }
        }
        // separation of neighbouring frames
        for w in sel.windows(2) {
            let (jp, jq) = (w[0], w[1]);
            let cell = (-((jq - jp - 1) as f64)).exp2() * self.ladder.ell_at(jp);
            if !(2.0 * self.frame() * self.ladder.ell_at(jq) < 0.5 * cell) {
                out.push(format!("frames of block starting {jq} are not separated"));
            }
        }
        // point symmetry through the root center
        let leaves = self.leaf_centers();
        for k in 0..self.leaf_count() as u64 {
            let m = self.mirror(k) as usize;
            let k = k as usize;
            if (0..d).any(|i| leaves[k * d + i] != -leaves[m * d + i]) {
                out.push(format!("leaf {k} has no mirror image"));
                break;
            }
        }
        out
    }

    /// SHA-256 of the ladder text at this dimension.
    pub fn ladder_digest(&self, s: f64) -> String {
        hex::encode(Sha256::digest(self.ladder.to_text(self.d, s).as_bytes()))
    }

    /// `# {json}` header, then `k c_1 … c_d edge` per leaf cube.
    pub fn to_text(&self, s: f64) -> String {
        let meta = serde_json::json!({
            "d": self.d,
            "n": self.depth(),
            "alpha": self.ladder.alpha(),
            "T": self.frame(),
            "ladder_digest": self.ladder_digest(s),
        });
        let mut out = format!("# {meta}\n");
        let edge = fmt_f64(self.edge(self.depth()));
        for k in 0..self.leaf_count() as u64 {
            let _ = write!(out, "{k}");
            for c in self.center(self.depth(), k) {
                let _ = write!(out, " {}", fmt_f64(*c));
            }
            let _ = writeln!(out, " {edge}");
        }
        out
    }
}
