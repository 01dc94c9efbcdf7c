use crate::geometry::{distance_sq, Point3};

const LEAF_SIZE: usize = 8;

enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: Box<Node>, right: Box<Node> },
}

/// Static 3-d tree for nearest-neighbor distance queries.
pub struct KdTree {
    points: Vec<Point3>,
    root: Node,
}

impl KdTree {
    pub fn build(points: &[Point3]) -> Self {
        let mut points = points.to_vec();
        let n = points.len();
        let root = build_node(&mut points, 0, n);
        KdTree { points, root }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Squared distance from `q` to the nearest stored point, or `None` when empty.
    pub fn nearest_distance_sq(&self, q: Point3) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = f64::INFINITY;
        self.search(&self.root, q, &mut best);
        Some(best)
    }

    fn search(&self, node: &Node, q: Point3, best: &mut f64) {
        match node {
            Node::Leaf { start, end } => {
                for p in &self.points[*start..*end] {
                    let d = distance_sq(*p, q);
                    if d < *best {
                        *best = d;
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let delta = q[*axis] - value;
                let (near, far) = if delta <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                if delta * delta <= *best {
                    self.search(far, q, best);
                }
            }
        }
    }
}

fn build_node(points: &mut [Point3], start: usize, end: usize) -> Node {
    if end - start <= LEAF_SIZE {
        return Node::Leaf { start, end };
    }
    let slice = &mut points[start..end];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in slice.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0);
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    let value = slice[mid][axis];
    // Points left of `mid` are ≤ value, points from `mid` on are ≥ value.
    let left = build_node(points, start, start + mid);
    let right = build_node(points, start + mid, end);
    Node::Split { axis, value, left: Box::new(left), right: Box::new(right) }
}
