//! Constructive solids with exact membership, used to synthesize
//! ground-truth and generated artifacts for demos, tests and fixtures.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::voxel::VoxelGrid;
use super::{stats_of, GeometryArtifact, Point3};
use crate::error::{Error, Result};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Primitive {
    /// Axis-aligned box.
    Cuboid { center: Point3, size: Point3 },
    /// Cylinder along z.
    Cylinder { center: Point3, radius: f64, height: f64 },
}

impl Primitive {
    fn contains(&self, p: &Point3, strict: bool) -> bool {
        let slack = if strict { -EPS } else { EPS };
        match *self {
            Primitive::Cuboid { center, size } => {
                (0..3).all(|a| (p[a] - center[a]).abs() < size[a] / 2.0 + slack)
            }
            Primitive::Cylinder { center, radius, height } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                (dx * dx + dy * dy).sqrt() < radius + slack && (p[2] - center[2]).abs() < height / 2.0 + slack
            }
        }
    }

    fn area(&self) -> f64 {
        match *self {
            Primitive::Cuboid { size: [x, y, z], .. } => 2.0 * (x * y + y * z + x * z),
            Primitive::Cylinder { radius, height, .. } => 2.0 * PI * radius * (radius + height),
        }
    }

    fn edge_length(&self) -> f64 {
        match *self {
            Primitive::Cuboid { size: [x, y, z], .. } => 4.0 * (x + y + z),
            Primitive::Cylinder { radius, .. } => 4.0 * PI * radius,
        }
    }

    /// Faces plus edges of the boundary representation.
    pub fn topology_count(&self) -> u64 {
        match self {
            Primitive::Cuboid { .. } => 6 + 12,
            Primitive::Cylinder { .. } => 3 + 3,
        }
    }

    fn sample_surface(&self, rng: &mut impl Rng) -> Point3 {
        match *self {
            Primitive::Cuboid { center, size } => {
                let faces = [size[1] * size[2], size[0] * size[2], size[0] * size[1]];
                let total: f64 = faces.iter().sum();
                let mut t = rng.random::<f64>() * total;
                let mut axis = 2;
                for (a, f) in faces.iter().enumerate() {
                    if t < *f {
                        axis = a;
                        break;
                    }
                    t -= f;
                }
                let mut p = [0.0; 3];
                for a in 0..3 {
                    p[a] = center[a] + (rng.random::<f64>() - 0.5) * size[a];
                }
                let sign = if rng.random::<bool>() { 0.5 } else { -0.5 };
                p[axis] = center[axis] + sign * size[axis];
                p
            }
            Primitive::Cylinder { center, radius, height } => {
                let side = 2.0 * PI * radius * height;
                let cap = PI * radius * radius;
                let t = rng.random::<f64>() * (side + 2.0 * cap);
                if t < side {
                    let phi = rng.random::<f64>() * 2.0 * PI;
                    let z = (rng.random::<f64>() - 0.5) * height;
                    [center[0] + radius * phi.cos(), center[1] + radius * phi.sin(), center[2] + z]
                } else {
                    let phi = rng.random::<f64>() * 2.0 * PI;
                    let rr = radius * rng.random::<f64>().sqrt();
                    let z = if t < side + cap { height / 2.0 } else { -height / 2.0 };
                    [center[0] + rr * phi.cos(), center[1] + rr * phi.sin(), center[2] + z]
                }
            }
        }
    }

    fn sample_edge(&self, rng: &mut impl Rng) -> Point3 {
        match *self {
            Primitive::Cuboid { center, size } => {
                let lens = [size[0], size[1], size[2]];
                let total: f64 = lens.iter().sum::<f64>();
                let mut t = rng.random::<f64>() * total;
                let mut axis = 2;
                for (a, l) in lens.iter().enumerate() {
                    if t < *l {
                        axis = a;
                        break;
                    }
                    t -= l;
                }
                let mut p = [0.0; 3];
                for a in 0..3 {
                    let sign = if rng.random::<bool>() { 0.5 } else { -0.5 };
                    p[a] = center[a] + sign * size[a];
                }
                p[axis] = center[axis] + (rng.random::<f64>() - 0.5) * size[axis];
                p
            }
            Primitive::Cylinder { center, radius, height } => {
                let phi = rng.random::<f64>() * 2.0 * PI;
                let z = if rng.random::<bool>() { height / 2.0 } else { -height / 2.0 };
                [center[0] + radius * phi.cos(), center[1] + radius * phi.sin(), center[2] + z]
            }
        }
    }
}

/// Union of `add` minus the union of `subtract`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solid {
    pub add: Vec<Primitive>,
    #[serde(default)]
    pub subtract: Vec<Primitive>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub surface_points: usize,
    pub edge_points: usize,
    pub resolution: usize,
    pub seed: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            surface_points: 4096,
            edge_points: 1024,
            resolution: 64,
            seed: 0,
        }
    }
}

impl Solid {
    pub fn single(p: Primitive) -> Self {
        Solid { add: vec![p], subtract: Vec::new() }
    }

    pub fn contains(&self, p: &Point3) -> bool {
        self.add.iter().any(|a| a.contains(p, false)) && !self.subtract.iter().any(|s| s.contains(p, true))
    }

    pub fn topology_count(&self) -> u64 {
        self.add.iter().chain(&self.subtract).map(Primitive::topology_count).sum()
    }

    fn on_boundary(&self, p: &Point3, from_add: bool, owner: usize) -> bool {
        if from_add {
            !self.add.iter().enumerate().any(|(i, a)| i != owner && a.contains(p, true))
                && !self.subtract.iter().any(|s| s.contains(p, false))
        } else {
            self.add.iter().any(|a| a.contains(p, true))
                && !self.subtract.iter().enumerate().any(|(i, s)| i != owner && s.contains(p, true))
        }
    }

    fn sample(&self, n: usize, rng: &mut impl Rng, weight: fn(&Primitive) -> f64, edge: bool) -> Vec<Point3> {
        let parts: Vec<(bool, usize, &Primitive)> = self
            .add
            .iter()
            .enumerate()
            .map(|(i, p)| (true, i, p))
            .chain(self.subtract.iter().enumerate().map(|(i, p)| (false, i, p)))
            .collect();
        let total: f64 = parts.iter().map(|(_, _, p)| weight(p)).sum();
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0;
        while out.len() < n && attempts < 200 * n.max(1) {
            attempts += 1;
            let mut t = rng.random::<f64>() * total;
            let mut chosen = parts[parts.len() - 1];
            for part in &parts {
                let w = weight(part.2);
                if t < w {
                    chosen = *part;
                    break;
                }
                t -= w;
            }
            let (from_add, owner, prim) = chosen;
            let p = if edge { prim.sample_edge(rng) } else { prim.sample_surface(rng) };
            if self.on_boundary(&p, from_add, owner) {
                out.push(p);
            }
        }
        out
    }

    /// Seeded samples on the boundary and the primitive edges, plus an
    /// occupancy grid from exact membership at cell centres.
    pub fn artifact(&self, sampling: &Sampling) -> Result<GeometryArtifact> {
        let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
        let surface = self.sample(sampling.surface_points, &mut rng, Primitive::area, false);
        if surface.is_empty() {
            return Err(Error::Contract("solid has no boundary".into()));
        }
        let edges = self.sample(sampling.edge_points, &mut rng, Primitive::edge_length, true);
        let mut voxels = VoxelGrid::fit(&surface, sampling.resolution);
        for i in 0..sampling.resolution.pow(3) {
            if self.contains(&voxels.cell_center(i)) {
                voxels.set(i, true);
            }
        }
        let stats = stats_of(&surface)?;
        Ok(GeometryArtifact { surface, edges, voxels, stats })
    }
}
