use rstar::primitives::GeomWithData;
use rstar::RTree;

use crate::model::Location;

type Entry = GeomWithData<[f64; 2], usize>;

/// Static 2-D point index. Built once, then read-only.
#[derive(Debug, Clone)]
pub(crate) struct SpatialIndex {
    tree: RTree<Entry>,
    points: Vec<Location>,
}

impl SpatialIndex {
    pub fn new(points: &[Location]) -> Self {
        let entries = points
            .iter()
            .enumerate()
            .map(|(i, l)| GeomWithData::new([l.x, l.y], i))
            .collect();
        SpatialIndex {
            tree: RTree::bulk_load(entries),
            points: points.to_vec(),
        }
    }

    /// `(index, distance)` of every point with distance `<= radius`, sorted by
    /// distance and then by index.
    pub fn within(&self, center: &Location, radius: f64) -> Vec<(usize, f64)> {
        // pad the squared radius so boundary points survive rounding; the
        // exact test below decides membership
        let r2 = radius * radius * (1.0 + 1e-9) + 1e-12;
        let mut out: Vec<(usize, f64)> = self
            .tree
            .locate_within_distance([center.x, center.y], r2)
            .map(|e| (e.data, center.distance(&self.points[e.data])))
            .filter(|(_, d)| *d <= radius)
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    /// Nearest point; lowest index among equidistant ones.
    pub fn nearest(&self, center: &Location) -> Option<usize> {
        let first = self.tree.nearest_neighbor([center.x, center.y])?;
        let d = center.distance(&self.points[first.data]);
        self.within(center, d).first().map(|(i, _)| *i)
    }
}
