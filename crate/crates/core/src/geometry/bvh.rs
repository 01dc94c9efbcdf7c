//! Bounding-volume hierarchy over triangles for nearest-surface queries.

use super::sdf::point_triangle_distance_sq;
use super::{Point3, TriangleMesh};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Point3,
    hi: Point3,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            lo: [f64::INFINITY; 3],
            hi: [f64::NEG_INFINITY; 3],
        }
    }

    fn grow(&mut self, p: Point3) {
        for k in 0..3 {
            self.lo[k] = self.lo[k].min(p[k]);
            self.hi[k] = self.hi[k].max(p[k]);
        }
    }

    fn merge(&mut self, o: &Aabb) {
        self.grow(o.lo);
        self.grow(o.hi);
    }

    fn distance_sq(&self, p: Point3) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let v = if p[k] < self.lo[k] {
                self.lo[k] - p[k]
            } else if p[k] > self.hi[k] {
                p[k] - self.hi[k]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Median-split BVH. Built once per mesh; queries are read-only and can run
/// from many threads.
#[derive(Debug, Clone)]
pub struct Bvh {
    triangles: Vec<[Point3; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Self {
        let triangles: Vec<[Point3; 3]> = (0..mesh.faces.len()).map(|f| mesh.triangle(f)).collect();
        let mut order: Vec<usize> = (0..triangles.len()).collect();
        let centroids: Vec<Point3> = triangles
            .iter()
            .map(|t| {
                [
                    (t[0][0] + t[1][0] + t[2][0]) / 3.0,
                    (t[0][1] + t[1][1] + t[2][1]) / 3.0,
                    (t[0][2] + t[1][2] + t[2][2]) / 3.0,
                ]
            })
            .collect();
        let mut nodes = Vec::new();
        if !triangles.is_empty() {
            build_node(&triangles, &centroids, &mut order, 0, triangles.len(), &mut nodes);
        }
        Bvh {
            triangles,
            order,
            nodes,
        }
    }

    /// Squared distance from `p` to the closest triangle, and that triangle's
    /// face index. `None` for an empty mesh.
    pub fn nearest(&self, p: Point3) -> Option<(f64, usize)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, usize::MAX);
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds().distance_sq(p) > best.0 {
                continue;
            }
            match *node {
                Node::Leaf { start, end, .. } => {
                    for &ti in &self.order[start..end] {
                        let d = point_triangle_distance_sq(p, &self.triangles[ti]);
                        if d < best.0 || (d == best.0 && ti < best.1) {
                            best = (d, ti);
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[left].bounds().distance_sq(p);
                    let dr = self.nodes[right].bounds().distance_sq(p);
                    // visit the closer child first
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        Some(best)
    }
}

fn build_node(
    tris: &[[Point3; 3]],
    centroids: &[Point3],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &ti in &order[start..end] {
        for v in tris[ti] {
            bounds.grow(v);
        }
        cbounds.grow(centroids[ti]);
    }
    let me = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { bounds, start, end });
        return me;
    }
    let axis = (0..3)
        .max_by(|&a, &b| {
            (cbounds.hi[a] - cbounds.lo[a]).total_cmp(&(cbounds.hi[b] - cbounds.lo[b]))
        })
        .unwrap_or(0);
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        centroids[a][axis]
            .total_cmp(&centroids[b][axis])
            .then(a.cmp(&b))
    });
    nodes.push(Node::Leaf {
        bounds,
        start,
        end,
    });
    let left = build_node(tris, centroids, order, start, mid, nodes);
    let right = build_node(tris, centroids, order, mid, end, nodes);
    let mut merged = *nodes[left].bounds();
    merged.merge(nodes[right].bounds());
    nodes[me] = Node::Inner {
        bounds: merged,
        left,
        right,
    };
    me
}
