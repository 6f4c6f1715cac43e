//! Geometric evaluation of generated solids against ground truth.
//!
//! Solids are exchanged as [`GeometryArtifact`]s: surface and edge point
//! samples plus an occupancy grid. Evaluation normalizes the ground truth to
//! unit gyration radius about its centroid, searches 96 rigid candidates for
//! the generated solid (2 translations × 2 scales × 24 rotations), keeps the
//! candidate with the best voxel IoU (ties → smaller Chamfer distance) and
//! reports IoU, CD and edge CD under it.

mod align;
mod chamfer;
mod kdtree;
pub mod rotation;
pub mod shapes;
mod voxel;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use align::{align_and_score, candidates, EvalMetrics, Reference, RigidCandidate};
pub use chamfer::{chamfer_distance, edge_chamfer_distance};
pub use kdtree::KdTree;
pub use rotation::{rotations24, Rot};
pub use voxel::{overlap_counts, voxel_iou, VoxelGrid, VoxelSpec};

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryStats {
    pub centroid: Point3,
    pub gyration_radius: f64,
}

/// Sampled representation of one solid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryArtifact {
    pub surface: Vec<Point3>,
    pub edges: Vec<Point3>,
    pub voxels: VoxelGrid,
    pub stats: GeometryStats,
}

pub fn centroid(points: &[Point3]) -> Result<Point3> {
    if points.is_empty() {
        return Err(Error::Contract("centroid of an empty point cloud".into()));
    }
    let mut c = [0.0; 3];
    for p in points {
        for a in 0..3 {
            c[a] += p[a];
        }
    }
    let n = points.len() as f64;
    Ok([c[0] / n, c[1] / n, c[2] / n])
}

/// Root-mean-square distance of the points to `center`.
pub fn gyration_radius(points: &[Point3], center: &Point3) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Contract("gyration radius of an empty point cloud".into()));
    }
    let ss: f64 = points
        .iter()
        .map(|p| (0..3).map(|a| (p[a] - center[a]).powi(2)).sum::<f64>())
        .sum();
    Ok((ss / points.len() as f64).sqrt())
}

pub fn stats_of(points: &[Point3]) -> Result<GeometryStats> {
    let c = centroid(points)?;
    Ok(GeometryStats {
        centroid: c,
        gyration_radius: gyration_radius(points, &c)?,
    })
}

impl GeometryArtifact {
    /// Artifact from samples in model units; the occupancy grid is fitted to
    /// the surface bounding cube and rasterized from the samples.
    pub fn from_samples(surface: Vec<Point3>, edges: Vec<Point3>, resolution: usize, close_radius: usize) -> Result<Self> {
        let stats = stats_of(&surface)?;
        let mut voxels = VoxelGrid::fit(&surface, resolution);
        voxels.rasterize_solid(&surface, close_radius);
        Ok(GeometryArtifact { surface, edges, voxels, stats })
    }

    /// The stand-in for an invalid generation: a single point at the origin.
    pub fn invalid_penalty() -> Self {
        let mut voxels = VoxelGrid::empty([-0.5, -0.5, -0.5], 1.0, 1);
        voxels.set(0, true);
        GeometryArtifact {
            surface: vec![[0.0; 3]],
            edges: vec![[0.0; 3]],
            voxels,
            stats: GeometryStats {
                centroid: [0.0; 3],
                gyration_radius: 0.0,
            },
        }
    }

    pub fn is_penalty(&self) -> bool {
        self.surface == [[0.0; 3]] && self.edges == [[0.0; 3]] && self.stats.gyration_radius == 0.0
    }

    /// Apply `f` to every sample.
    pub fn map_points(&self, f: impl Fn(&Point3) -> Point3) -> (Vec<Point3>, Vec<Point3>) {
        (self.surface.iter().map(&f).collect(), self.edges.iter().map(&f).collect())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Translate the surface centroid to the origin and scale to unit gyration
/// radius; the grid is re-rasterized under `spec`.
pub fn normalize(artifact: &GeometryArtifact, spec: &VoxelSpec) -> Result<GeometryArtifact> {
    let stats = stats_of(&artifact.surface)?;
    if !(stats.gyration_radius > 0.0) {
        return Err(Error::Normalization("gyration radius is zero".into()));
    }
    let c = stats.centroid;
    let s = 1.0 / stats.gyration_radius;
    let (surface, edges) = artifact.map_points(|p| [(p[0] - c[0]) * s, (p[1] - c[1]) * s, (p[2] - c[2]) * s]);
    let voxels = VoxelGrid::from_surface(&surface, spec);
    let stats = stats_of(&surface)?;
    Ok(GeometryArtifact { surface, edges, voxels, stats })
}
