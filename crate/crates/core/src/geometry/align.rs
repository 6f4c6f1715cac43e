use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chamfer::{chamfer_distance, chamfer_with_trees};
use super::kdtree::KdTree;
use super::rotation::{apply, rotations24};
use super::voxel::{overlap_counts, VoxelGrid, VoxelSpec};
use super::{normalize, stats_of, GeometryArtifact, GeometryStats, Point3};
use crate::error::{Error, Result};

/// Which solid's centroid or gyration radius a candidate borrows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    GroundTruth,
    Generated,
}

/// `x ↦ R · ((x − c) / r)` with `c`, `r` taken from the referenced solid and
/// `R` the rotation at `rotation` in [`rotations24`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RigidCandidate {
    pub translation: Reference,
    pub scale: Reference,
    pub rotation: usize,
}

/// All 96 candidates, translation outermost and rotation innermost.
pub fn candidates() -> Vec<RigidCandidate> {
    let mut out = Vec::with_capacity(96);
    for translation in [Reference::GroundTruth, Reference::Generated] {
        for scale in [Reference::Generated, Reference::GroundTruth] {
            for rotation in 0..24 {
                out.push(RigidCandidate { translation, scale, rotation });
            }
        }
    }
    out
}

impl RigidCandidate {
    fn params(&self, generated: &GeometryStats, truth: &GeometryStats) -> (Point3, f64) {
        let c = match self.translation {
            Reference::GroundTruth => truth.centroid,
            Reference::Generated => generated.centroid,
        };
        let r = match self.scale {
            Reference::GroundTruth => truth.gyration_radius,
            Reference::Generated => generated.gyration_radius,
        };
        (c, r)
    }

    fn map(&self, points: &[Point3], c: Point3, r: f64) -> Vec<Point3> {
        let rot = &rotations24()[self.rotation];
        let s = 1.0 / r;
        points
            .iter()
            .map(|p| apply(rot, &[(p[0] - c[0]) * s, (p[1] - c[1]) * s, (p[2] - c[2]) * s]))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub valid: bool,
    pub iou: f64,
    pub cd: f64,
    pub ecd: f64,
    /// ECD fell back to surface samples because an edge cloud was empty.
    pub ecd_fallback: bool,
    pub best_transform: Option<RigidCandidate>,
}

fn edge_or_surface<'a>(a: &'a GeometryArtifact) -> &'a [Point3] {
    if a.edges.is_empty() {
        &a.surface
    } else {
        &a.edges
    }
}

/// Score generated solid `p` against ground truth `q`. A penalty `p` is
/// compared unmoved against the normalized ground truth with IoU fixed at 0.
pub fn align_and_score(p: &GeometryArtifact, q: &GeometryArtifact, spec: &VoxelSpec) -> Result<EvalMetrics> {
    let truth_stats = stats_of(&q.surface)?;
    let norm_q = normalize(q, spec)?;
    if p.is_penalty() {
        let fallback = norm_q.edges.is_empty();
        return Ok(EvalMetrics {
            valid: false,
            iou: 0.0,
            cd: chamfer_distance(&p.surface, &norm_q.surface)?,
            ecd: chamfer_distance(&p.edges, edge_or_surface(&norm_q))?,
            ecd_fallback: fallback,
            best_transform: None,
        });
    }
    if p.surface.is_empty() {
        return Err(Error::Contract("generated artifact has no surface samples".into()));
    }
    let gen_stats = stats_of(&p.surface)?;

    let usable: Vec<RigidCandidate> = candidates()
        .into_iter()
        .filter(|c| c.params(&gen_stats, &truth_stats).1 > 0.0)
        .collect();
    let scored: Vec<(u64, u64)> = usable
        .par_iter()
        .map(|cand| {
            let (c, r) = cand.params(&gen_stats, &truth_stats);
            let moved = cand.map(&p.surface, c, r);
            let grid = VoxelGrid::from_surface(&moved, spec);
            overlap_counts(&grid, &norm_q.voxels)
        })
        .collect::<Result<Vec<_>>>()?;

    // IoU as an exact rational: a/b > c/d  ⇔  a·d > c·b (0/0 counts as 0)
    let iou_cmp = |a: (u64, u64), b: (u64, u64)| {
        let lhs = a.0 as u128 * b.1.max(1) as u128;
        let rhs = b.0 as u128 * a.1.max(1) as u128;
        lhs.cmp(&rhs)
    };
    let best_iou = scored.iter().copied().max_by(|a, b| iou_cmp(*a, *b)).expect("candidates");
    let tied: Vec<usize> = (0..usable.len())
        .filter(|&i| iou_cmp(scored[i], best_iou).is_eq())
        .collect();

    let q_tree = KdTree::new(&norm_q.surface);
    let tie_cd: Vec<(f64, Vec<Point3>)> = tied
        .par_iter()
        .map(|&i| {
            let cand = usable[i];
            let (c, r) = cand.params(&gen_stats, &truth_stats);
            let moved = cand.map(&p.surface, c, r);
            let cd = chamfer_with_trees(&moved, &KdTree::new(&moved), &norm_q.surface, &q_tree);
            (cd, moved)
        })
        .collect();
    let (pick, (cd, _)) = tie_cd
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.0.cmp(&b.0)))
        .expect("at least one tie");
    let cand = usable[tied[pick]];
    let (c, r) = cand.params(&gen_stats, &truth_stats);

    let fallback = p.edges.is_empty() || norm_q.edges.is_empty();
    let ecd = if fallback {
        *cd
    } else {
        chamfer_distance(&cand.map(&p.edges, c, r), &norm_q.edges)?
    };
    let (inter, union) = best_iou;
    Ok(EvalMetrics {
        valid: true,
        iou: if union == 0 { 0.0 } else { inter as f64 / union as f64 },
        cd: *cd,
        ecd,
        ecd_fallback: fallback,
        best_transform: Some(cand),
    })
}
