//! Occupancy grids and solid re-rasterization from surface samples.

use base64::Engine;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::Point3;
use crate::error::{Error, Result};

/// Cubic grid of `resolution³` cells of side `cell` starting at `origin`.
/// Cell `(x, y, z)` has linear index `x + r·(y + r·z)`.
///
/// Storage is one bit row per `(y, z)` pair, x along the bits, so the
/// morphology and flood fill below work a word at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub origin: Point3,
    pub cell: f64,
    pub resolution: usize,
    words: usize,
    bits: Vec<u64>,
}

/// How a normalized solid is re-rasterized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VoxelSpec {
    pub resolution: usize,
    /// Grid spans `[-half_extent, half_extent]³`.
    pub half_extent: f64,
    /// Morphological closing radius (cells) bridging gaps between samples.
    pub close_radius: usize,
}

impl Default for VoxelSpec {
    fn default() -> Self {
        VoxelSpec {
            resolution: 64,
            half_extent: 2.0,
            close_radius: 2,
        }
    }
}

// Row helpers. Bits at or beyond the resolution are kept zero.

fn shift_up(src: &[u64], dst: &mut [u64]) {
    let mut carry = 0;
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = (s << 1) | carry;
        carry = s >> 63;
    }
}

fn shift_down(src: &[u64], dst: &mut [u64]) {
    let mut carry = 0;
    for (d, &s) in dst.iter_mut().zip(src).rev() {
        *d = (s >> 1) | carry;
        carry = s << 63;
    }
}

impl VoxelGrid {
    pub fn empty(origin: Point3, cell: f64, resolution: usize) -> Self {
        let words = resolution.div_ceil(64);
        VoxelGrid {
            origin,
            cell,
            resolution,
            words,
            bits: vec![0; words * resolution * resolution],
        }
    }

    pub fn for_spec(spec: &VoxelSpec) -> Self {
        let h = spec.half_extent;
        VoxelGrid::empty([-h, -h, -h], 2.0 * h / spec.resolution as f64, spec.resolution)
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.resolution * (y + self.resolution * z)
    }

    #[inline]
    fn locate(&self, idx: usize) -> (usize, u64) {
        let (row, x) = (idx / self.resolution, idx % self.resolution);
        (row * self.words + x / 64, 1u64 << (x % 64))
    }

    fn last_mask(&self) -> u64 {
        match self.resolution % 64 {
            0 => u64::MAX,
            m => (1u64 << m) - 1,
        }
    }

    fn rows(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn cell_of(&self, p: &Point3) -> Option<usize> {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let f = ((p[a] - self.origin[a]) / self.cell).floor();
            if !(f >= 0.0 && f < self.resolution as f64) {
                return None;
            }
            c[a] = f as usize;
        }
        Some(self.index(c[0], c[1], c[2]))
    }

    pub fn cell_center(&self, idx: usize) -> Point3 {
        let r = self.resolution;
        let (x, y, z) = (idx % r, (idx / r) % r, idx / (r * r));
        [
            self.origin[0] + (x as f64 + 0.5) * self.cell,
            self.origin[1] + (y as f64 + 0.5) * self.cell,
            self.origin[2] + (z as f64 + 0.5) * self.cell,
        ]
    }

    pub fn get(&self, idx: usize) -> bool {
        let (w, m) = self.locate(idx);
        self.bits[w] & m != 0
    }

    pub fn set(&mut self, idx: usize, value: bool) {
        let (w, m) = self.locate(idx);
        if value {
            self.bits[w] |= m;
        } else {
            self.bits[w] &= !m;
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn same_frame(&self, other: &VoxelGrid) -> bool {
        self.resolution == other.resolution && self.cell == other.cell && self.origin == other.origin
    }

    /// Occupancy in linear-index order, packed least-significant-bit first.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.resolution.pow(3);
        let mut out = vec![0u8; n.div_ceil(8)];
        for i in 0..n {
            if self.get(i) {
                out[i / 8] |= 1 << (i % 8);
            }
        }
        out
    }

    pub fn from_bytes(origin: Point3, cell: f64, resolution: usize, bytes: &[u8]) -> Result<Self> {
        let n = resolution.pow(3);
        if bytes.len() != n.div_ceil(8) {
            return Err(Error::Contract(format!(
                "bitset of {} bytes does not match resolution {resolution}",
                bytes.len()
            )));
        }
        let mut g = VoxelGrid::empty(origin, cell, resolution);
        for i in 0..n {
            if bytes[i / 8] & (1 << (i % 8)) != 0 {
                g.set(i, true);
            }
        }
        Ok(g)
    }

    /// Mark every cell containing at least one sample; samples outside the
    /// grid are ignored.
    pub fn splat(&mut self, points: &[Point3]) {
        for p in points {
            if let Some(i) = self.cell_of(p) {
                self.set(i, true);
            }
        }
    }

    /// Box dilation (`dilate`) or erosion by `radius` cells along each axis
    /// in turn. Cells beyond the border count as empty.
    fn morph(&mut self, radius: usize, dilate: bool) {
        let (r, w) = (self.resolution, self.words);
        let mask = self.last_mask();
        // x: shifts within a row
        let mut up = vec![0u64; w];
        let mut down = vec![0u64; w];
        let mut tmp = vec![0u64; w];
        for row in self.bits.chunks_mut(w) {
            up.copy_from_slice(row);
            down.copy_from_slice(row);
            for _ in 0..radius {
                shift_up(&up, &mut tmp);
                up.copy_from_slice(&tmp);
                up[w - 1] &= mask;
                shift_down(&down, &mut tmp);
                down.copy_from_slice(&tmp);
                for i in 0..w {
                    row[i] = if dilate { row[i] | up[i] | down[i] } else { row[i] & up[i] & down[i] };
                }
            }
        }
        // y and z: whole rows
        for stride in [1, r] {
            let src = self.bits.clone();
            for q in 0..self.rows() {
                let coord = (q / stride) % r;
                let (lo, hi) = (coord.saturating_sub(radius), (coord + radius).min(r - 1));
                let clipped = coord < radius || coord + radius > r - 1;
                let out = &mut self.bits[q * w..(q + 1) * w];
                if !dilate && clipped {
                    out.fill(0);
                    continue;
                }
                for c in lo..=hi {
                    let nq = q - coord * stride + c * stride;
                    let s = &src[nq * w..(nq + 1) * w];
                    for i in 0..w {
                        out[i] = if dilate { out[i] | s[i] } else { out[i] & s[i] };
                    }
                }
            }
        }
    }

    /// Fill every cell not reachable from the grid boundary through empty
    /// cells (6-connectivity).
    pub fn fill_interior(&mut self) {
        let (r, w) = (self.resolution, self.words);
        if r == 0 {
            return;
        }
        let mask = self.last_mask();
        let rows = self.rows();
        let free: Vec<u64> = self
            .bits
            .chunks(w)
            .flat_map(|row| {
                row.iter()
                    .enumerate()
                    .map(move |(i, &b)| if i + 1 == w { !b & mask } else { !b })
            })
            .collect();
        let mut outside = vec![0u64; free.len()];
        let edge_bits = |i: usize| {
            let mut m = 0;
            if i == 0 {
                m |= 1;
            }
            if i + 1 == w {
                m |= 1u64 << ((r - 1) % 64);
            }
            m
        };
        for q in 0..rows {
            let (y, z) = (q % r, q / r);
            let border_row = y == 0 || z == 0 || y == r - 1 || z == r - 1;
            for i in 0..w {
                let seed = if border_row { u64::MAX } else { edge_bits(i) };
                outside[q * w + i] = seed & free[q * w + i];
            }
        }
        let mut s = vec![0u64; w];
        let mut a = vec![0u64; w];
        let mut b = vec![0u64; w];
        let mut relax = |q: usize, outside: &mut Vec<u64>| -> bool {
            let (y, z) = (q % r, q / r);
            s.copy_from_slice(&outside[q * w..(q + 1) * w]);
            for (cond, nq) in [(y > 0, q.wrapping_sub(1)), (y + 1 < r, q + 1), (z > 0, q.wrapping_sub(r)), (z + 1 < r, q + r)] {
                if cond {
                    for i in 0..w {
                        s[i] |= outside[nq * w + i];
                    }
                }
            }
            let f = &free[q * w..(q + 1) * w];
            for i in 0..w {
                s[i] &= f[i];
            }
            loop {
                shift_up(&s, &mut a);
                shift_down(&s, &mut b);
                let mut grew = false;
                for i in 0..w {
                    let n = (s[i] | a[i] | b[i]) & f[i];
                    grew |= n != s[i];
                    s[i] = n;
                }
                if !grew {
                    break;
                }
            }
            let cur = &mut outside[q * w..(q + 1) * w];
            if cur != s.as_slice() {
                cur.copy_from_slice(&s);
                true
            } else {
                false
            }
        };
        loop {
            let mut changed = false;
            for q in 0..rows {
                changed |= relax(q, &mut outside);
            }
            for q in (0..rows).rev() {
                changed |= relax(q, &mut outside);
            }
            if !changed {
                break;
            }
        }
        for (row_bits, row_out) in self.bits.chunks_mut(w).zip(outside.chunks(w)) {
            for i in 0..w {
                row_bits[i] = !row_out[i];
            }
            row_bits[w - 1] &= mask;
        }
    }

    /// Solid occupancy from surface samples: splat, dilate, fill the
    /// interior, erode.
    pub fn rasterize_solid(&mut self, surface: &[Point3], close_radius: usize) {
        self.splat(surface);
        if close_radius > 0 {
            self.morph(close_radius, true);
        }
        self.fill_interior();
        if close_radius > 0 {
            self.morph(close_radius, false);
        }
    }

    /// Grid sized to the bounding cube of `points` with a small margin.
    pub fn fit(points: &[Point3], resolution: usize) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let span = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max).max(1e-9) * 1.1;
        let center: Vec<f64> = (0..3).map(|a| 0.5 * (lo[a] + hi[a])).collect();
        VoxelGrid::empty(
            [center[0] - span / 2.0, center[1] - span / 2.0, center[2] - span / 2.0],
            span / resolution as f64,
            resolution,
        )
    }

    /// Re-rasterize under a spec from surface samples already in the
    /// normalized frame.
    pub fn from_surface(surface: &[Point3], spec: &VoxelSpec) -> Self {
        let mut g = VoxelGrid::for_spec(spec);
        g.rasterize_solid(surface, spec.close_radius);
        g
    }
}

/// Intersection and union cell counts.
pub fn overlap_counts(a: &VoxelGrid, b: &VoxelGrid) -> Result<(u64, u64)> {
    if !a.same_frame(b) {
        return Err(Error::Contract("voxel grids differ in resolution, origin or cell size".into()));
    }
    let mut inter = 0;
    let mut union = 0;
    for (&x, &y) in a.bits.iter().zip(&b.bits) {
        inter += u64::from((x & y).count_ones());
        union += u64::from((x | y).count_ones());
    }
    Ok((inter, union))
}

/// `|A ∧ B| / |A ∨ B|`, 0 for an empty union.
pub fn voxel_iou(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64> {
    let (inter, union) = overlap_counts(a, b)?;
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

#[derive(Serialize, Deserialize)]
struct VoxelGridWire {
    origin: Point3,
    cell: f64,
    resolution: usize,
    bitset: String,
}

impl Serialize for VoxelGrid {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        VoxelGridWire {
            origin: self.origin,
            cell: self.cell,
            resolution: self.resolution,
            bitset: base64::engine::general_purpose::STANDARD.encode(self.to_bytes()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for VoxelGrid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = VoxelGridWire::deserialize(d)?;
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(w.bitset.as_bytes())
            .map_err(serde::de::Error::custom)?;
        VoxelGrid::from_bytes(w.origin, w.cell, w.resolution, &bytes).map_err(serde::de::Error::custom)
    }
}
