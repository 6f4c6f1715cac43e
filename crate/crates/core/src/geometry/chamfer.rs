use rayon::prelude::*;

use super::kdtree::KdTree;
use super::Point3;
use crate::error::{Error, Result};

/// Mean nearest-neighbour distance from each point of `from` to `tree`.
/// Distances are computed in parallel and summed in point order.
fn mean_nn(from: &[Point3], tree: &KdTree) -> f64 {
    let d: Vec<f64> = from.par_iter().map(|p| tree.nearest_dist2(p).sqrt()).collect();
    d.iter().sum::<f64>() / from.len() as f64
}

/// `(1/2|P|) Σ_p min_q ‖p − q‖ + (1/2|Q|) Σ_q min_p ‖p − q‖`.
pub fn chamfer_distance(p: &[Point3], q: &[Point3]) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::Contract("chamfer distance of an empty point cloud".into()));
    }
    Ok(chamfer_with_trees(p, &KdTree::new(p), q, &KdTree::new(q)))
}

pub(crate) fn chamfer_with_trees(p: &[Point3], p_tree: &KdTree, q: &[Point3], q_tree: &KdTree) -> f64 {
    0.5 * mean_nn(p, q_tree) + 0.5 * mean_nn(q, p_tree)
}

/// Chamfer distance restricted to edge samples.
pub fn edge_chamfer_distance(p_edges: &[Point3], q_edges: &[Point3]) -> Result<f64> {
    chamfer_distance(p_edges, q_edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forced_values() {
        let p = [[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        assert_eq!(chamfer_distance(&p, &p).unwrap(), 0.0);
        assert_eq!(chamfer_distance(&[[0.0; 3]], &[[1.0, 0.0, 0.0]]).unwrap(), 1.0);
        assert_eq!(chamfer_distance(&p, &[[1.0, 0.0, 0.0]]).unwrap(), 1.0);
        assert_eq!(
            chamfer_distance(&[[0.0; 3]], &[[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]).unwrap(),
            1.0
        );
        assert!(chamfer_distance(&[], &p).is_err());
        assert_eq!(edge_chamfer_distance(&p, &p).unwrap(), 0.0);
    }
}
